//! Per-gait-type joint angle templates.
//!
//! Each curve is a truncated Fourier series (4 harmonics) over cycle
//! phase, phase 0 at foot strike. Coefficients were fit once to knot
//! curves with the qualitative signatures of each gait type and are
//! frozen here:
//!   - normal: knee near full extension (~5 deg) at strike
//!   - toe-walking: ankle plantarflexed (negative dorsiflexion) at contact
//!   - flexed-knee: knee flexion stays elevated (>15 deg) through stance
//!   - foot drag: reduced dorsiflexion in swing (negative at mid-swing)
//!
//! Coefficient layout: [a0, a1, b1, a2, b2, a3, b3, a4, b4] for
//! a0 + sum_k a_k cos(2 pi k phi) + b_k sin(2 pi k phi).

use crate::biomech::Joint;
use crate::gaitsynth::GaitType;

pub const HARMONICS: usize = 4;

pub const NORMAL_HIP: [f64; 9] = [
    14.47970562, 19.88610277, -4.15855584, -3.781131401, -1.850155439, -0.02400293672,
    1.067403015, -0.6021904185, 0.6982522556,
];
pub const NORMAL_KNEE: [f64; 9] = [
    21.46542558, -2.388316021, -21.90843712, -12.54048959, 7.04704394, -1.225032863,
    5.321949074, -0.2901336275, 2.693654612,
];
pub const NORMAL_ANKLE: [f64; 9] = [
    0.9046519598, -1.266617225, 4.092162757, -0.3707279962, -6.361923527, -2.618416101,
    1.854939247, 2.514817136, -1.365477032,
];

pub const TOE_WALKING_HIP: [f64; 9] = [
    17.18744786, 19.15288414, -3.911443003, -3.705400492, -1.468920568, -0.05030099008,
    0.6311139627, -0.8920267774, 0.793009939,
];
pub const TOE_WALKING_KNEE: [f64; 9] = [
    24.20095209, -1.530918127, -19.23374883, -9.112266589, 6.835658372, -0.4742086903,
    4.287467116, 0.001627066031, 2.313489423,
];
pub const TOE_WALKING_ANKLE: [f64; 9] = [
    -14.74059717, -2.171761828, 1.656089279, -1.552993558, -4.650258664, -1.266243514,
    1.317504426, 1.368853909, -1.509319263,
];

pub const FLEXED_KNEE_HIP: [f64; 9] = [
    23.11818011, 18.09133271, -1.570990171, -2.021796817, -2.481381601, -0.5639244135,
    0.652510473, -0.3480114975, 0.3887594989,
];
pub const FLEXED_KNEE_KNEE: [f64; 9] = [
    34.84296505, 2.240854261, -16.10644362, -8.631694923, 2.989585035, -2.869820277,
    3.37460236, -0.8810832198, 3.043379542,
];
pub const FLEXED_KNEE_ANKLE: [f64; 9] = [
    6.319378179, -1.925869773, 4.092900623, 0.8237426961, -4.988794901, -2.573189389,
    0.4380178774, 1.770286697, -0.1336614206,
];

pub const FOOT_DRAG_HIP: [f64; 9] = [
    12.68481902, 18.95841101, -2.22900266, -2.610467601, -2.402511389, -0.5786476684,
    0.9168199713, -0.4655839442, 0.6639843402,
];
pub const FOOT_DRAG_KNEE: [f64; 9] = [
    18.5219491, 0.1102399707, -16.43515815, -8.502670597, 3.153370056, -2.431720758,
    3.261843766, -1.265121433, 2.206462545,
];
pub const FOOT_DRAG_ANKLE: [f64; 9] = [
    -3.436850712, -2.744572151, 7.121283376, 2.548423204, -3.821393361, -1.823641101,
    0.1591444514, 2.236471075, -0.03176623577,
];

/// Fraction of the cycle spent in stance; > 0.5 so double support exists.
pub fn stance_fraction(gait: GaitType) -> f64 {
    match gait {
        GaitType::Normal => 0.60,
        GaitType::ToeWalking => 0.58,
        GaitType::FlexedKnee => 0.62,
        GaitType::FootDrag => 0.63,
    }
}

pub fn coefficients(gait: GaitType, joint: Joint) -> &'static [f64; 9] {
    match (gait, joint) {
        (GaitType::Normal, Joint::Hip) => &NORMAL_HIP,
        (GaitType::Normal, Joint::Knee) => &NORMAL_KNEE,
        (GaitType::Normal, Joint::Ankle) => &NORMAL_ANKLE,
        (GaitType::ToeWalking, Joint::Hip) => &TOE_WALKING_HIP,
        (GaitType::ToeWalking, Joint::Knee) => &TOE_WALKING_KNEE,
        (GaitType::ToeWalking, Joint::Ankle) => &TOE_WALKING_ANKLE,
        (GaitType::FlexedKnee, Joint::Hip) => &FLEXED_KNEE_HIP,
        (GaitType::FlexedKnee, Joint::Knee) => &FLEXED_KNEE_KNEE,
        (GaitType::FlexedKnee, Joint::Ankle) => &FLEXED_KNEE_ANKLE,
        (GaitType::FootDrag, Joint::Hip) => &FOOT_DRAG_HIP,
        (GaitType::FootDrag, Joint::Knee) => &FOOT_DRAG_KNEE,
        (GaitType::FootDrag, Joint::Ankle) => &FOOT_DRAG_ANKLE,
    }
}

/// Evaluates a coefficient set at cycle phase (any real; wraps).
pub fn eval_fourier(coeffs: &[f64], phase: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut v = coeffs[0];
    for k in 1..=(coeffs.len() - 1) / 2 {
        let arg = two_pi * k as f64 * phase;
        v += coeffs[2 * k - 1] * arg.cos() + coeffs[2 * k] * arg.sin();
    }
    v
}

/// Template value for one joint of one gait type.
pub fn template(gait: GaitType, joint: Joint, phase: f64) -> f64 {
    eval_fourier(coefficients(gait, joint), phase)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_extremum(
        gait: GaitType,
        joint: Joint,
        lo: f64,
        hi: f64,
        maximize: bool,
    ) -> (f64, f64) {
        let n = 20_000;
        let mut best = (lo, template(gait, joint, lo));
        for i in 0..=n {
            let p = lo + (hi - lo) * i as f64 / n as f64;
            let v = template(gait, joint, p);
            if (maximize && v > best.1) || (!maximize && v < best.1) {
                best = (p, v);
            }
        }
        best
    }

    #[test]
    fn normal_knee_near_full_extension_at_strike() {
        let v = template(GaitType::Normal, Joint::Knee, 0.0);
        assert!((v - 5.0).abs() < 1.0, "knee at strike = {v}");
    }

    #[test]
    fn toe_walking_ankle_plantarflexed_at_strike() {
        let v = template(GaitType::ToeWalking, Joint::Ankle, 0.0);
        assert!(v < 0.0, "toe-walking ankle at strike = {v}");
        // stays plantarflexed through the whole cycle
        for i in 0..100 {
            assert!(template(GaitType::ToeWalking, Joint::Ankle, i as f64 / 100.0) < 0.0);
        }
    }

    #[test]
    fn flexed_knee_stays_flexed_through_stance() {
        let sf = stance_fraction(GaitType::FlexedKnee);
        let (_, min) = dense_extremum(GaitType::FlexedKnee, Joint::Knee, 0.0, sf, false);
        assert!(min > 15.0, "flexed-knee stance minimum = {min}");
    }

    #[test]
    fn foot_drag_reduces_swing_dorsiflexion() {
        let window = |g: GaitType| {
            let sf = stance_fraction(g);
            (sf + (1.0 - sf) / 3.0, sf + 2.0 * (1.0 - sf) / 3.0)
        };
        let (lo, hi) = window(GaitType::Normal);
        let (_, normal_ms) = dense_extremum(GaitType::Normal, Joint::Ankle, lo, hi, true);
        let (lo, hi) = window(GaitType::FootDrag);
        let (_, drag_ms) = dense_extremum(GaitType::FootDrag, Joint::Ankle, lo, hi, true);
        assert!(drag_ms < 0.0, "foot-drag mid-swing dorsiflexion {drag_ms} not negative");
        assert!(drag_ms < normal_ms - 5.0, "{drag_ms} vs normal {normal_ms}");
    }

    #[test]
    fn all_templates_within_physiological_bounds() {
        use crate::biomech::{ANGLE_MAX_DEG, ANGLE_MIN_DEG};
        for gait in GaitType::ALL {
            for joint in Joint::ALL {
                for i in 0..2000 {
                    let v = template(gait, joint, i as f64 / 2000.0);
                    assert!((ANGLE_MIN_DEG..=ANGLE_MAX_DEG).contains(&v));
                }
            }
        }
    }

    #[test]
    fn stance_fractions_give_double_support() {
        for gait in GaitType::ALL {
            let sf = stance_fraction(gait);
            assert!(sf > 0.5 && sf < 0.7);
        }
    }
}
