//! Sagittal-plane link-segment inverse dynamics: joint angles in, ground
//! reaction forces out.
//!
//! The leg is a thigh-shank chain under a lumped upper body; hip, knee,
//! and ankle act as hinges and the foot is treated as massless, so the
//! ground reaction equals the ankle reaction. The recursion runs from the
//! lump boundary at the hip down to the foot:
//!
//!   R_hip   = M_lump * (a_lump + g)      with a_lump = 0 (steady gait)
//!   R_knee  = R_hip  + m_thigh * (a_thigh + g)
//!   R_ankle = R_knee + m_shank * (a_shank + g)
//!   GRF     = R_ankle
//!
//! Segment kinematics come from forward kinematics of the angle chain
//! rooted at the hip; accelerations are central differences (one-sided at
//! the ends). The head-arms-trunk lump plus the contralateral remainder
//! is assumed to travel at constant velocity, which keeps quiet standing
//! exact and the per-cycle force impulse within ~1% of body weight.
//!
//! Double support: each foot's series is the full-support force times a
//! share weight w(t). The weight ramps complementarily across the
//! double-support interval and carries a short loading-response overshoot
//! at foot strike (heel transient) balanced by a shallow dip over the rest
//! of stance, so the per-cycle impulse is preserved.

use thiserror::Error;

pub const GRAVITY: f64 = 9.81;

/// Flexion angles outside this range are rejected as non-physiological.
pub const ANGLE_MIN_DEG: f64 = -40.0;
pub const ANGLE_MAX_DEG: f64 = 150.0;

#[derive(Debug, Error, PartialEq)]
pub enum BiomechError {
    #[error("trajectory has {len} samples; differentiation needs at least 3")]
    TooShort { len: usize },
    #[error("{what} length {got} does not match trajectory length {expected}")]
    LengthMismatch { what: &'static str, expected: usize, got: usize },
    #[error("invalid anthropometry: {0}")]
    InvalidAnthropometry(String),
    #[error("invalid ratio table: {0}")]
    InvalidRatioTable(String),
    #[error("{joint} angle {value} deg at sample {index} outside [{ANGLE_MIN_DEG}, {ANGLE_MAX_DEG}]")]
    AngleOutOfBounds { joint: &'static str, index: usize, value: f64 },
    #[error("invalid contact schedule: {0}")]
    BadContacts(String),
    #[error("sample rate must be positive, got {0}")]
    BadSampleRate(f64),
}

/// Subject body dimensions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Anthropometry {
    pub body_mass: f64,
    pub thigh_length: f64,
    pub shank_length: f64,
    pub foot_length: f64,
    pub height: f64,
}

impl Anthropometry {
    pub fn validate(&self) -> Result<(), BiomechError> {
        let fields = [
            ("body_mass", self.body_mass),
            ("thigh_length", self.thigh_length),
            ("shank_length", self.shank_length),
            ("foot_length", self.foot_length),
            ("height", self.height),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(BiomechError::InvalidAnthropometry(format!(
                    "{name} must be strictly positive, got {v}"
                )));
            }
        }
        let limbs = self.thigh_length + self.shank_length + self.foot_length;
        if limbs >= self.height {
            return Err(BiomechError::InvalidAnthropometry(format!(
                "segment lengths sum to {limbs} m, not below height {} m",
                self.height
            )));
        }
        Ok(())
    }
}

/// One leg's sagittal flexion curves, all in degrees.
#[derive(Debug, Clone, PartialEq)]
pub struct JointTrajectory {
    hip_flexion: Vec<f64>,
    knee_flexion: Vec<f64>,
    ankle_flexion: Vec<f64>,
    sample_rate: f64,
}

impl JointTrajectory {
    pub fn new(
        hip_flexion: Vec<f64>,
        knee_flexion: Vec<f64>,
        ankle_flexion: Vec<f64>,
        sample_rate: f64,
    ) -> Result<Self, BiomechError> {
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return Err(BiomechError::BadSampleRate(sample_rate));
        }
        let n = hip_flexion.len();
        if knee_flexion.len() != n {
            return Err(BiomechError::LengthMismatch {
                what: "knee series",
                expected: n,
                got: knee_flexion.len(),
            });
        }
        if ankle_flexion.len() != n {
            return Err(BiomechError::LengthMismatch {
                what: "ankle series",
                expected: n,
                got: ankle_flexion.len(),
            });
        }
        for (joint, series) in [
            ("hip", &hip_flexion),
            ("knee", &knee_flexion),
            ("ankle", &ankle_flexion),
        ] {
            for (i, &v) in series.iter().enumerate() {
                if !(ANGLE_MIN_DEG..=ANGLE_MAX_DEG).contains(&v) || !v.is_finite() {
                    return Err(BiomechError::AngleOutOfBounds { joint, index: i, value: v });
                }
            }
        }
        Ok(JointTrajectory { hip_flexion, knee_flexion, ankle_flexion, sample_rate })
    }

    pub fn len(&self) -> usize {
        self.hip_flexion.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hip_flexion.is_empty()
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn hip(&self) -> &[f64] {
        &self.hip_flexion
    }

    pub fn knee(&self) -> &[f64] {
        &self.knee_flexion
    }

    pub fn ankle(&self) -> &[f64] {
        &self.ankle_flexion
    }

    /// Linear interpolation at time t (seconds from sample 0), clamped to
    /// the series span.
    pub fn sample(&self, joint: Joint, t: f64) -> f64 {
        let series = match joint {
            Joint::Hip => &self.hip_flexion,
            Joint::Knee => &self.knee_flexion,
            Joint::Ankle => &self.ankle_flexion,
        };
        interp_clamped(series, self.sample_rate, t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Joint {
    Hip,
    Knee,
    Ankle,
}

impl Joint {
    pub const ALL: [Joint; 3] = [Joint::Hip, Joint::Knee, Joint::Ankle];

    pub fn name(&self) -> &'static str {
        match self {
            Joint::Hip => "hip",
            Joint::Knee => "knee",
            Joint::Ankle => "ankle",
        }
    }
}

pub(crate) fn interp_clamped(series: &[f64], rate: f64, t: f64) -> f64 {
    let x = t * rate;
    if x <= 0.0 {
        return series[0];
    }
    let last = series.len() - 1;
    if x >= last as f64 {
        return series[last];
    }
    let i = x.floor() as usize;
    let frac = x - i as f64;
    series[i] * (1.0 - frac) + series[i + 1] * frac
}

/// Per-segment mass and geometry ratios; all relative to body mass and
/// segment length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentParams {
    pub mass: f64,
    pub com_ratio: f64,
    pub gyration_ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentProperties {
    pub thigh: SegmentParams,
    pub shank: SegmentParams,
    pub foot: SegmentParams,
}

impl SegmentProperties {
    pub fn mass_sum(&self) -> f64 {
        self.thigh.mass + self.shank.mass + self.foot.mass
    }
}

/// Anthropometric ratio table; mass fractions of body mass, com and
/// gyration fractions of segment length (from the proximal end).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioTable {
    pub thigh_mass: f64,
    pub shank_mass: f64,
    pub foot_mass: f64,
    pub thigh_com: f64,
    pub shank_com: f64,
    pub foot_com: f64,
    pub thigh_gyration: f64,
    pub shank_gyration: f64,
    pub foot_gyration: f64,
}

impl Default for RatioTable {
    fn default() -> Self {
        RatioTable {
            thigh_mass: 0.100,
            shank_mass: 0.0465,
            foot_mass: 0.0145,
            thigh_com: 0.433,
            shank_com: 0.433,
            foot_com: 0.5,
            thigh_gyration: 0.323,
            shank_gyration: 0.302,
            foot_gyration: 0.475,
        }
    }
}

impl RatioTable {
    pub fn validate(&self) -> Result<(), BiomechError> {
        let masses = self.thigh_mass + self.shank_mass + self.foot_mass;
        if !(masses > 0.0 && masses < 0.5) {
            return Err(BiomechError::InvalidRatioTable(format!(
                "leg mass fractions sum to {masses}; expected a small fraction of body mass"
            )));
        }
        for (name, r) in [
            ("thigh_com", self.thigh_com),
            ("shank_com", self.shank_com),
            ("foot_com", self.foot_com),
            ("thigh_gyration", self.thigh_gyration),
            ("shank_gyration", self.shank_gyration),
            ("foot_gyration", self.foot_gyration),
        ] {
            if !(r > 0.0 && r < 1.0) {
                return Err(BiomechError::InvalidRatioTable(format!(
                    "{name} must be in (0,1), got {r}"
                )));
            }
        }
        Ok(())
    }
}

/// Segment masses and ratios for one leg from the default ratio table.
pub fn segment_properties(a: &Anthropometry) -> Result<SegmentProperties, BiomechError> {
    segment_properties_with(a, &RatioTable::default())
}

pub fn segment_properties_with(
    a: &Anthropometry,
    table: &RatioTable,
) -> Result<SegmentProperties, BiomechError> {
    a.validate()?;
    table.validate()?;
    Ok(SegmentProperties {
        thigh: SegmentParams {
            mass: table.thigh_mass * a.body_mass,
            com_ratio: table.thigh_com,
            gyration_ratio: table.thigh_gyration,
        },
        shank: SegmentParams {
            mass: table.shank_mass * a.body_mass,
            com_ratio: table.shank_com,
            gyration_ratio: table.shank_gyration,
        },
        foot: SegmentParams {
            mass: table.foot_mass * a.body_mass,
            com_ratio: table.foot_com,
            gyration_ratio: table.foot_gyration,
        },
    })
}

/// One foot's ground reaction force history. Components are exactly zero
/// wherever the stance mask is false.
#[derive(Debug, Clone, PartialEq)]
pub struct GrfSeries {
    pub vertical: Vec<f64>,
    pub anterior_posterior: Vec<f64>,
    pub sample_rate: f64,
    pub stance_mask: Vec<bool>,
}

impl GrfSeries {
    pub fn len(&self) -> usize {
        self.vertical.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertical.is_empty()
    }

    /// Checks the physical invariants: non-negative vertical force during
    /// stance, exact zeros outside it.
    pub fn validate_physical(&self) -> Result<(), BiomechError> {
        for i in 0..self.len() {
            if self.stance_mask[i] {
                if self.vertical[i] < 0.0 {
                    return Err(BiomechError::BadContacts(format!(
                        "negative vertical GRF {} N at sample {i}",
                        self.vertical[i]
                    )));
                }
            } else if self.vertical[i] != 0.0 || self.anterior_posterior[i] != 0.0 {
                return Err(BiomechError::BadContacts(format!(
                    "nonzero GRF outside stance at sample {i}"
                )));
            }
        }
        Ok(())
    }
}

fn central_diff(y: &[f64], dt: f64) -> Vec<f64> {
    let n = y.len();
    let mut d = vec![0.0; n];
    for i in 1..n - 1 {
        d[i] = (y[i + 1] - y[i - 1]) / (2.0 * dt);
    }
    d[0] = (y[1] - y[0]) / dt;
    d[n - 1] = (y[n - 1] - y[n - 2]) / dt;
    d
}

/// Full-support force (the force the floor would see if this leg carried
/// the whole body), both components, at the trajectory sample rate.
fn full_support_force(
    traj: &JointTrajectory,
    a: &Anthropometry,
    props: &SegmentProperties,
) -> Result<(Vec<f64>, Vec<f64>), BiomechError> {
    let n = traj.len();
    if n < 3 {
        return Err(BiomechError::TooShort { len: n });
    }
    let dt = 1.0 / traj.sample_rate();
    let (lt, ls) = (a.thigh_length, a.shank_length);
    let (rt, rs) = (props.thigh.com_ratio, props.shank.com_ratio);

    // hip-rooted segment com positions
    let mut tx = vec![0.0; n];
    let mut tz = vec![0.0; n];
    let mut sx = vec![0.0; n];
    let mut sz = vec![0.0; n];
    for i in 0..n {
        let th = traj.hip()[i].to_radians();
        let tk = traj.knee()[i].to_radians();
        let phi_s = th - tk;
        let (dtx, dtz) = (th.sin(), -th.cos());
        let (dsx, dsz) = (phi_s.sin(), -phi_s.cos());
        tx[i] = rt * lt * dtx;
        tz[i] = rt * lt * dtz;
        sx[i] = lt * dtx + rs * ls * dsx;
        sz[i] = lt * dtz + rs * ls * dsz;
    }
    let ax_t = central_diff(&central_diff(&tx, dt), dt);
    let az_t = central_diff(&central_diff(&tz, dt), dt);
    let ax_s = central_diff(&central_diff(&sx, dt), dt);
    let az_s = central_diff(&central_diff(&sz, dt), dt);

    let (mt, ms) = (props.thigh.mass, props.shank.mass);
    let mut fz = vec![0.0; n];
    let mut fx = vec![0.0; n];
    for i in 0..n {
        // hip boundary carries the lump statically; leg segments add their
        // dynamic terms as the recursion descends
        fz[i] = a.body_mass * GRAVITY + mt * az_t[i] + ms * az_s[i];
        fx[i] = mt * ax_t[i] + ms * ax_s[i];
    }
    Ok((fz, fx))
}

/// Single-foot inverse dynamics at the trajectory rate: full-support force
/// zeroed outside the stance mask. Double-support sharing is the paired
/// variant's job.
pub fn inverse_dynamics(
    traj: &JointTrajectory,
    a: &Anthropometry,
    stance_mask: &[bool],
) -> Result<GrfSeries, BiomechError> {
    if stance_mask.len() != traj.len() {
        return Err(BiomechError::LengthMismatch {
            what: "stance mask",
            expected: traj.len(),
            got: stance_mask.len(),
        });
    }
    let props = segment_properties(a)?;
    let (mut fz, mut fx) = full_support_force(traj, a, &props)?;
    for i in 0..fz.len() {
        if !stance_mask[i] {
            fz[i] = 0.0;
            fx[i] = 0.0;
        }
    }
    Ok(GrfSeries {
        vertical: fz,
        anterior_posterior: fx,
        sample_rate: traj.sample_rate(),
        stance_mask: stance_mask.to_vec(),
    })
}

/// Strike/off instants for one foot, seconds from trajectory sample 0.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactSchedule {
    pub strikes: Vec<f64>,
    pub offs: Vec<f64>,
}

impl ContactSchedule {
    pub fn validate(&self) -> Result<(), BiomechError> {
        if !self.strikes.windows(2).all(|w| w[0] < w[1]) {
            return Err(BiomechError::BadContacts("strikes not strictly increasing".into()));
        }
        if !self.offs.windows(2).all(|w| w[0] < w[1]) {
            return Err(BiomechError::BadContacts("offs not strictly increasing".into()));
        }
        Ok(())
    }

    pub fn in_stance(&self, t: f64) -> bool {
        self.current_stance(t).is_some()
    }

    /// Stance interval containing t, as (strike, off); open-ended stances
    /// (no matching off) are treated as not in stance.
    pub fn current_stance(&self, t: f64) -> Option<(f64, f64)> {
        for &s in self.strikes.iter().rev() {
            if s <= t {
                let off = self.offs.iter().find(|&&o| o > s)?;
                return if t < *off { Some((s, *off)) } else { None };
            }
        }
        None
    }
}

/// Load-share shape: base double-support ramp plus the loading-response
/// transient and its impulse compensation. Strikes or offs without an
/// opposite-foot partner (gait initiation and termination) ramp over
/// `solo_ramp` seconds instead of jumping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadShare {
    pub ramp_power: f64,
    pub bump_amplitude: f64,
    pub bump_duration: f64,
    pub solo_ramp: f64,
}

impl Default for LoadShare {
    fn default() -> Self {
        LoadShare { ramp_power: 3.0, bump_amplitude: 1.0, bump_duration: 0.012, solo_ramp: 0.1 }
    }
}

impl LoadShare {
    /// Share weight for the foot whose stance is [strike, off), given the
    /// other foot's bracketing events.
    pub fn weight(
        &self,
        t: f64,
        strike: f64,
        off: f64,
        other_off_after_strike: Option<f64>,
        other_strike_before_off: Option<f64>,
    ) -> f64 {
        if t < strike || t >= off {
            return 0.0;
        }
        let mut w = 1.0;
        let lead_end = other_off_after_strike
            .filter(|&oo| oo > strike)
            .unwrap_or((strike + self.solo_ramp).min(off));
        if t < lead_end {
            let s = (t - strike) / (lead_end - strike);
            w = 1.0 - (1.0 - s).powf(self.ramp_power);
        }
        let trail_start = other_strike_before_off
            .filter(|&os| os < off)
            .unwrap_or((off - self.solo_ramp).max(strike));
        if t >= trail_start && off > trail_start {
            let s = (t - trail_start) / (off - trail_start);
            w = (1.0 - s).powf(self.ramp_power);
        }
        // heel transient: short overshoot at strike, paid back by a wide
        // shallow dip across the remaining stance so the impulse balances
        let tb = t - strike;
        let stance = off - strike;
        if tb < self.bump_duration {
            let x = std::f64::consts::PI * tb / self.bump_duration;
            w += self.bump_amplitude * x.sin() * x.sin();
        } else {
            let rest = stance - self.bump_duration;
            if rest > 0.0 {
                let c = 2.0 * self.bump_amplitude * self.bump_duration / rest;
                let x = std::f64::consts::PI * (tb - self.bump_duration) / rest;
                w -= c * x.sin() * x.sin();
            }
        }
        w.max(0.0)
    }
}

/// Two-foot inverse dynamics with double-support sharing, resampled to
/// `out_rate` over `n_out` samples (the heel transient is shorter than a
/// trajectory sample, so the weights are evaluated analytically on the
/// output grid).
#[allow(clippy::too_many_arguments)]
pub fn inverse_dynamics_shared(
    left: &JointTrajectory,
    right: &JointTrajectory,
    a: &Anthropometry,
    left_contacts: &ContactSchedule,
    right_contacts: &ContactSchedule,
    share: &LoadShare,
    out_rate: f64,
    n_out: usize,
) -> Result<(GrfSeries, GrfSeries), BiomechError> {
    if !(out_rate > 0.0 && out_rate.is_finite()) {
        return Err(BiomechError::BadSampleRate(out_rate));
    }
    left_contacts.validate()?;
    right_contacts.validate()?;
    let props = segment_properties(a)?;

    let mut out = Vec::with_capacity(2);
    for (traj, own, other) in [
        (left, left_contacts, right_contacts),
        (right, right_contacts, left_contacts),
    ] {
        let (fz, fx) = full_support_force(traj, a, &props)?;
        let rate = traj.sample_rate();
        let mut vertical = vec![0.0; n_out];
        let mut ap = vec![0.0; n_out];
        let mut mask = vec![false; n_out];
        for i in 0..n_out {
            let t = i as f64 / out_rate;
            if let Some((strike, off)) = own.current_stance(t) {
                mask[i] = true;
                let other_off = other.offs.iter().copied().find(|&o| o > strike && o < off);
                let other_strike =
                    other.strikes.iter().copied().rev().find(|&s| s > strike && s < off);
                let w = share.weight(t, strike, off, other_off, other_strike);
                vertical[i] = w * interp_clamped(&fz, rate, t);
                ap[i] = w * interp_clamped(&fx, rate, t);
            }
        }
        out.push(GrfSeries { vertical, anterior_posterior: ap, sample_rate: out_rate, stance_mask: mask });
    }
    let right_grf = out.pop().expect("two feet");
    let left_grf = out.pop().expect("two feet");
    Ok((left_grf, right_grf))
}
