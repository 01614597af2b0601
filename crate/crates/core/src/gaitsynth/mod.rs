//! Trial synthesis: gait templates -> joint trajectories -> ground
//! reaction forces -> geophone records, plus gait cycle extraction and
//! the 12 critical-angle targets.
//!
//! The 12 targets are the hip/knee/ankle flexion angles at four cycle
//! events: foot strike, loading response (extremum in the first 20% of
//! stance), foot off, and mid-swing (extremum in the middle third of
//! swing). Extremum polarity is fixed per joint: flexion peaks for hip
//! and knee, a dorsiflexion minimum at loading and maximum at mid-swing
//! for the ankle.

pub mod bundle;
pub mod templates;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::biomech::{
    inverse_dynamics_shared, Anthropometry, BiomechError, ContactSchedule, Joint,
    JointTrajectory, LoadShare, ANGLE_MAX_DEG, ANGLE_MIN_DEG,
};
use crate::floorsim::{
    simulate_vibration, FloorError, FloorModel, FootForcing, VibrationRecord,
    DEFAULT_CORNER_HZ, DEFAULT_GAIN, DEFAULT_SENSITIVITY, GEOPHONE_RATE,
};

pub const MOCAP_RATE: f64 = 100.0;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("cadence {0} steps/min outside [60, 160]")]
    BadCadence(f64),
    #[error("n_cycles must be at least 1")]
    NoCycles,
    #[error("unmatched gait events for {foot:?} foot at index {index}: {detail}")]
    UnmatchedEvents { foot: Foot, index: usize, detail: String },
    #[error("cycle [{start}, {end}] outside trajectory span [0, {span}]")]
    CycleOutsideSpan { start: f64, end: f64, span: f64 },
    #[error("invalid gait events: {0}")]
    BadEvents(String),
    #[error(transparent)]
    Biomech(#[from] BiomechError),
    #[error(transparent)]
    Floor(#[from] FloorError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("parse error in {path}: {detail}")]
    Parse { path: String, detail: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GaitType {
    Normal,
    ToeWalking,
    FlexedKnee,
    FootDrag,
}

impl GaitType {
    pub const ALL: [GaitType; 4] =
        [GaitType::Normal, GaitType::ToeWalking, GaitType::FlexedKnee, GaitType::FootDrag];

    pub fn name(&self) -> &'static str {
        match self {
            GaitType::Normal => "normal",
            GaitType::ToeWalking => "toe_walking",
            GaitType::FlexedKnee => "flexed_knee",
            GaitType::FootDrag => "foot_drag",
        }
    }

    pub fn parse(s: &str) -> Option<GaitType> {
        GaitType::ALL.into_iter().find(|g| g.name() == s)
    }

    pub fn is_abnormal(&self) -> bool {
        !matches!(self, GaitType::Normal)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Foot {
    Left,
    Right,
}

impl Foot {
    pub fn name(&self) -> &'static str {
        match self {
            Foot::Left => "left",
            Foot::Right => "right",
        }
    }
}

/// Foot strike / foot off instants for both feet, seconds from record start.
#[derive(Debug, Clone, PartialEq)]
pub struct GaitEvents {
    pub left: ContactSchedule,
    pub right: ContactSchedule,
}

impl GaitEvents {
    pub fn foot(&self, foot: Foot) -> &ContactSchedule {
        match foot {
            Foot::Left => &self.left,
            Foot::Right => &self.right,
        }
    }

    /// Strictly increasing, strictly alternating strike/off per foot.
    pub fn validate(&self) -> Result<(), SynthError> {
        for (foot, c) in [(Foot::Left, &self.left), (Foot::Right, &self.right)] {
            c.validate().map_err(|e| SynthError::BadEvents(format!("{foot:?}: {e}")))?;
            for (i, w) in c.strikes.windows(2).enumerate() {
                let offs_between =
                    c.offs.iter().filter(|&&o| o > w[0] && o < w[1]).count();
                if offs_between != 1 {
                    return Err(SynthError::UnmatchedEvents {
                        foot,
                        index: i,
                        detail: format!(
                            "{offs_between} foot-offs between strikes at {} and {}",
                            w[0], w[1]
                        ),
                    });
                }
            }
        }
        Ok(())
    }
}

/// One foot-strike-to-foot-strike window.
#[derive(Debug, Clone, PartialEq)]
pub struct GaitCycle {
    pub start: f64,
    pub end: f64,
    pub foot_off: f64,
    pub trial_id: String,
    pub foot: Foot,
}

impl GaitCycle {
    pub fn duration(&self) -> f64 {
        self.end - self.start
    }

    pub fn stance_fraction(&self) -> f64 {
        (self.foot_off - self.start) / self.duration()
    }
}

/// Cycle events at which the critical angles are read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CycleEvent {
    FootStrike,
    LoadingResponse,
    FootOff,
    MidSwing,
}

impl CycleEvent {
    pub const ALL: [CycleEvent; 4] = [
        CycleEvent::FootStrike,
        CycleEvent::LoadingResponse,
        CycleEvent::FootOff,
        CycleEvent::MidSwing,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            CycleEvent::FootStrike => "foot_strike",
            CycleEvent::LoadingResponse => "loading_response",
            CycleEvent::FootOff => "foot_off",
            CycleEvent::MidSwing => "mid_swing",
        }
    }

    pub fn is_stance(&self) -> bool {
        !matches!(self, CycleEvent::MidSwing)
    }
}

pub const N_TARGETS: usize = 12;

/// The 12 critical angles: 3 joints x 4 events, degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetAngles {
    values: [f64; N_TARGETS],
}

impl TargetAngles {
    pub fn new(values: [f64; N_TARGETS]) -> Self {
        TargetAngles { values }
    }

    pub fn index(joint: Joint, event: CycleEvent) -> usize {
        let j = Joint::ALL.iter().position(|x| x == &joint).expect("joint in table");
        let e = CycleEvent::ALL.iter().position(|x| x == &event).expect("event in table");
        j * CycleEvent::ALL.len() + e
    }

    pub fn get(&self, joint: Joint, event: CycleEvent) -> f64 {
        self.values[Self::index(joint, event)]
    }

    pub fn values(&self) -> &[f64; N_TARGETS] {
        &self.values
    }

    /// Segment label for reports: joint@event.
    pub fn segment_name(idx: usize) -> String {
        let joint = Joint::ALL[idx / CycleEvent::ALL.len()];
        let event = CycleEvent::ALL[idx % CycleEvent::ALL.len()];
        format!("{}_{}", joint.name(), event.name())
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        for (i, &v) in self.values.iter().enumerate() {
            if !v.is_finite() || !(ANGLE_MIN_DEG..=ANGLE_MAX_DEG).contains(&v) {
                return Err(SynthError::BadEvents(format!(
                    "target {} = {v} outside physiological bounds",
                    Self::segment_name(i)
                )));
            }
        }
        Ok(())
    }
}

/// One synthesized walking trial.
#[derive(Debug, Clone)]
pub struct TrialRecord {
    pub trial_id: String,
    pub subject_id: u32,
    pub gait_type: GaitType,
    pub anthropometry: Anthropometry,
    pub left: JointTrajectory,
    pub right: JointTrajectory,
    pub events: GaitEvents,
    pub grf_left: crate::biomech::GrfSeries,
    pub grf_right: crate::biomech::GrfSeries,
    pub footfalls_left: Vec<(f64, f64)>,
    pub footfalls_right: Vec<(f64, f64)>,
    /// Transduced per-sensor signals, volts.
    pub vibration: VibrationRecord,
    pub cadence_spm: f64,
    pub seed: u64,
}

impl TrialRecord {
    pub fn trajectory(&self, foot: Foot) -> &JointTrajectory {
        match foot {
            Foot::Left => &self.left,
            Foot::Right => &self.right,
        }
    }

    /// Analysis cycles from the trial's ground-truth events, stamped with
    /// its id. Each foot's first stride is the walk-on warm-up and is
    /// dropped so every analyzed cycle is steady-state gait.
    pub fn cycles(&self) -> Result<Vec<GaitCycle>, SynthError> {
        let mut cycles = extract_cycles(&self.events)?;
        let first_left = self.events.left.strikes.first().copied();
        let first_right = self.events.right.strikes.first().copied();
        cycles.retain(|c| {
            let first = match c.foot {
                Foot::Left => first_left,
                Foot::Right => first_right,
            };
            first.map_or(true, |f| c.start > f)
        });
        for c in cycles.iter_mut() {
            c.trial_id = self.trial_id.clone();
        }
        Ok(cycles)
    }
}

/// Deterministic per-subject profile drawn from the subject seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubjectProfile {
    pub anthropometry: Anthropometry,
    pub cadence_base: f64,
    /// Constant per-joint angle offsets, degrees.
    pub joint_offsets: [f64; 3],
}

pub fn subject_profile(subject_seed: u64) -> SubjectProfile {
    let mut rng = ChaCha8Rng::seed_from_u64(subject_seed);
    let height = clamp_normal(&mut rng, 1.72, 0.08, 1.50, 1.95);
    let body_mass = clamp_normal(&mut rng, 72.0, 12.0, 45.0, 110.0);
    let anthropometry = Anthropometry {
        body_mass,
        thigh_length: 0.245 * height,
        shank_length: 0.246 * height,
        foot_length: 0.152 * height,
        height,
    };
    let cadence_base = clamp_normal(&mut rng, 105.0, 6.0, 92.0, 118.0);
    let joint_offsets = [
        clamp_normal(&mut rng, 0.0, 2.5, -7.0, 7.0),
        clamp_normal(&mut rng, 0.0, 2.0, -6.0, 6.0),
        clamp_normal(&mut rng, 0.0, 1.5, -4.5, 4.5),
    ];
    SubjectProfile { anthropometry, cadence_base, joint_offsets }
}

fn clamp_normal(rng: &mut impl Rng, mean: f64, std: f64, lo: f64, hi: f64) -> f64 {
    let d = Normal::new(mean, std).expect("finite std");
    d.sample(rng).clamp(lo, hi)
}

/// Trial-level perturbation of one joint curve: a constant offset plus two
/// low harmonics, all drawn N(0, sigma-scaled).
#[derive(Debug, Clone, Copy)]
struct Perturbation {
    c: [f64; 5], // c0, c1, d1, c2, d2
}

impl Perturbation {
    fn draw(rng: &mut impl Rng, sigma: f64) -> Self {
        let offset = Normal::new(0.0, sigma).expect("finite");
        let harmonic = Normal::new(0.0, 0.6 * sigma).expect("finite");
        Perturbation {
            c: [
                offset.sample(rng),
                harmonic.sample(rng),
                harmonic.sample(rng),
                harmonic.sample(rng),
                harmonic.sample(rng),
            ],
        }
    }

    fn eval(&self, phase: f64) -> f64 {
        let two_pi = 2.0 * std::f64::consts::PI;
        self.c[0]
            + self.c[1] * (two_pi * phase).cos()
            + self.c[2] * (two_pi * phase).sin()
            + self.c[3] * (2.0 * two_pi * phase).cos()
            + self.c[4] * (2.0 * two_pi * phase).sin()
    }
}

/// Base trial perturbation std in degrees; abnormal gait types use
/// `ABNORMAL_PERTURB_FACTOR` times this.
pub const TRIAL_PERTURB_STD: f64 = 1.2;
pub const ABNORMAL_PERTURB_FACTOR: f64 = 2.5;

/// Lead-in before the first strike and ring-down after the last off, s.
const LEAD_IN: f64 = 0.4;
const TAIL: f64 = 0.5;

/// Both feet's angle curves plus the ground-truth events.
#[derive(Debug, Clone)]
pub struct GaitSynthesis {
    pub left: JointTrajectory,
    pub right: JointTrajectory,
    pub events: GaitEvents,
    pub duration: f64,
}

/// Synthesizes per-joint angle curves for one trial: per-gait-type Fourier
/// template + per-subject constant offsets (subject_seed) + per-trial
/// low-harmonic perturbations (trial_seed). Abnormal gait types draw
/// perturbations 2.5x wider.
///
/// Each foot gets `n_cycles + 1` strike-to-strike windows; the first is a
/// warm-up stride (gait initiation, ramped on by the load-share model)
/// that [`TrialRecord::cycles`] excludes from analysis.
pub fn synth_trajectory(
    gait_type: GaitType,
    subject_seed: u64,
    trial_seed: u64,
    n_cycles: usize,
    cadence_spm: f64,
) -> Result<GaitSynthesis, SynthError> {
    if n_cycles < 1 {
        return Err(SynthError::NoCycles);
    }
    if !(60.0..=160.0).contains(&cadence_spm) {
        return Err(SynthError::BadCadence(cadence_spm));
    }
    let profile = subject_profile(subject_seed);
    let cycle_t = 120.0 / cadence_spm;
    let sf = templates::stance_fraction(gait_type);
    let strides = n_cycles + 1; // analyzed cycles plus the warm-up
    let duration = LEAD_IN + (strides as f64 + 1.25) * cycle_t + TAIL;
    let n = (duration * MOCAP_RATE).round() as usize;

    let sigma = TRIAL_PERTURB_STD
        * if gait_type.is_abnormal() { ABNORMAL_PERTURB_FACTOR } else { 1.0 };
    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed);
    // fixed draw order: left hip/knee/ankle, then right
    let perturb: Vec<[Perturbation; 3]> = (0..2)
        .map(|_| {
            [
                Perturbation::draw(&mut rng, sigma),
                Perturbation::draw(&mut rng, sigma),
                Perturbation::draw(&mut rng, sigma),
            ]
        })
        .collect();

    let first_strike = [LEAD_IN, LEAD_IN + cycle_t / 2.0];
    let mut trajectories = Vec::with_capacity(2);
    for (f, first) in first_strike.iter().enumerate() {
        let mut series: [Vec<f64>; 3] = [
            Vec::with_capacity(n),
            Vec::with_capacity(n),
            Vec::with_capacity(n),
        ];
        for i in 0..n {
            let t = i as f64 / MOCAP_RATE;
            let phase = ((t - first) / cycle_t).rem_euclid(1.0);
            for (j, joint) in Joint::ALL.iter().enumerate() {
                let v = templates::template(gait_type, *joint, phase)
                    + profile.joint_offsets[j]
                    + perturb[f][j].eval(phase);
                // physiological saturation keeps extreme perturbation draws legal
                series[j].push(v.clamp(ANGLE_MIN_DEG + 0.1, ANGLE_MAX_DEG - 0.1));
            }
        }
        let [hip, knee, ankle] = series;
        trajectories.push(JointTrajectory::new(hip, knee, ankle, MOCAP_RATE)?);
    }
    let right = trajectories.pop().expect("two feet");
    let left = trajectories.pop().expect("two feet");

    let schedule = |first: f64| ContactSchedule {
        strikes: (0..=strides).map(|k| first + k as f64 * cycle_t).collect(),
        offs: (0..=strides).map(|k| first + (k as f64 + sf) * cycle_t).collect(),
    };
    let events = GaitEvents { left: schedule(first_strike[0]), right: schedule(first_strike[1]) };
    events.validate()?;

    Ok(GaitSynthesis { left, right, events, duration })
}

/// Step geometry for the walkway: alternating footfalls along +x.
fn footfall_positions(height: f64, n_steps: usize, lateral: f64, start_x: f64) -> Vec<(f64, f64)> {
    let step = 0.4 * height;
    (0..n_steps).map(|k| (start_x + 2.0 * step * k as f64, lateral)).collect()
}

/// Full forward chain for one trial: trajectory synthesis, shared inverse
/// dynamics at the geophone rate, floor simulation, geophone transduction.
pub fn synth_trial(
    gait_type: GaitType,
    subject_id: u32,
    subject_seed: u64,
    trial_index: u32,
    trial_seed: u64,
    floor: &FloorModel,
) -> Result<TrialRecord, SynthError> {
    let profile = subject_profile(subject_seed);
    let mut trial_rng = ChaCha8Rng::seed_from_u64(trial_seed ^ 0x9e37_79b9_7f4a_7c15);
    let cadence = clamp_normal(&mut trial_rng, profile.cadence_base, 1.5, 90.0, 120.0);
    let n_cycles = 1;

    let synth = synth_trajectory(gait_type, subject_seed, trial_seed, n_cycles, cadence)?;
    let n_out = (synth.duration * GEOPHONE_RATE).round() as usize;
    let (grf_left, grf_right) = inverse_dynamics_shared(
        &synth.left,
        &synth.right,
        &profile.anthropometry,
        &synth.events.left,
        &synth.events.right,
        &LoadShare::default(),
        GEOPHONE_RATE,
        n_out,
    )?;
    grf_left.validate_physical()?;
    grf_right.validate_physical()?;

    let n_left = synth.events.left.strikes.len();
    let n_right = synth.events.right.strikes.len();
    let step = 0.4 * profile.anthropometry.height;
    let footfalls_left = footfall_positions(profile.anthropometry.height, n_left, -0.15, 0.5);
    let footfalls_right =
        footfall_positions(profile.anthropometry.height, n_right, 0.15, 0.5 + step);

    let velocity = simulate_vibration(
        &[
            FootForcing { grf: grf_left.clone(), footfalls: footfalls_left.clone() },
            FootForcing { grf: grf_right.clone(), footfalls: footfalls_right.clone() },
        ],
        floor,
        trial_seed,
    )?;
    let vibration = velocity.transduce(DEFAULT_SENSITIVITY, DEFAULT_GAIN, DEFAULT_CORNER_HZ)?;

    Ok(TrialRecord {
        trial_id: format!("s{subject_id:02}_{}_{trial_index:03}", gait_type.name()),
        subject_id,
        gait_type,
        anthropometry: profile.anthropometry,
        left: synth.left,
        right: synth.right,
        events: synth.events,
        grf_left,
        grf_right,
        footfalls_left,
        footfalls_right,
        vibration,
        cadence_spm: cadence,
        seed: trial_seed,
    })
}

/// One cycle per consecutive same-foot strike pair, with the contained
/// foot off. Errors name the foot and strike index when events do not pair.
pub fn extract_cycles(events: &GaitEvents) -> Result<Vec<GaitCycle>, SynthError> {
    events.validate()?;
    let mut cycles = Vec::new();
    for (foot, c) in [(Foot::Left, &events.left), (Foot::Right, &events.right)] {
        for (i, w) in c.strikes.windows(2).enumerate() {
            let off = c
                .offs
                .iter()
                .copied()
                .find(|&o| o > w[0] && o < w[1])
                .ok_or_else(|| SynthError::UnmatchedEvents {
                    foot,
                    index: i,
                    detail: format!("no foot off inside [{}, {}]", w[0], w[1]),
                })?;
            cycles.push(GaitCycle {
                start: w[0],
                end: w[1],
                foot_off: off,
                trial_id: String::new(),
                foot,
            });
        }
    }
    // chronological, left before right on exact ties
    cycles.sort_by(|a, b| a.start.partial_cmp(&b.start).unwrap().then(a.foot.cmp(&b.foot)));
    Ok(cycles)
}

/// Extremum polarity at (loading response, mid-swing) per joint.
fn polarity(joint: Joint) -> (bool, bool) {
    match joint {
        Joint::Hip => (true, true),
        Joint::Knee => (true, true),
        // loading-response plantarflexion dip, mid-swing dorsiflexion peak
        Joint::Ankle => (false, true),
    }
}

/// Reads the 12 critical angles for one cycle out of a trajectory.
pub fn extract_targets(
    traj: &JointTrajectory,
    cycle: &GaitCycle,
) -> Result<TargetAngles, SynthError> {
    let span = (traj.len() - 1) as f64 / traj.sample_rate();
    if cycle.start < 0.0 || cycle.end > span + 1e-9 || cycle.start >= cycle.end {
        return Err(SynthError::CycleOutsideSpan { start: cycle.start, end: cycle.end, span });
    }

    let stance = cycle.foot_off - cycle.start;
    let swing = cycle.end - cycle.foot_off;
    let loading = (cycle.start, cycle.start + 0.2 * stance);
    let mid_swing = (cycle.foot_off + swing / 3.0, cycle.foot_off + 2.0 * swing / 3.0);

    let mut values = [0.0; N_TARGETS];
    for joint in Joint::ALL {
        let (load_max, swing_max) = polarity(joint);
        values[TargetAngles::index(joint, CycleEvent::FootStrike)] =
            traj.sample(joint, cycle.start);
        values[TargetAngles::index(joint, CycleEvent::FootOff)] =
            traj.sample(joint, cycle.foot_off);
        values[TargetAngles::index(joint, CycleEvent::LoadingResponse)] =
            window_extremum(traj, joint, loading, load_max);
        values[TargetAngles::index(joint, CycleEvent::MidSwing)] =
            window_extremum(traj, joint, mid_swing, swing_max);
    }
    let targets = TargetAngles::new(values);
    targets.validate()?;
    Ok(targets)
}

/// Extremum over a window: exact interpolated endpoints plus every grid
/// sample strictly inside.
fn window_extremum(
    traj: &JointTrajectory,
    joint: Joint,
    (lo, hi): (f64, f64),
    maximize: bool,
) -> f64 {
    let rate = traj.sample_rate();
    let mut best = traj.sample(joint, lo);
    let consider = |best: &mut f64, v: f64| {
        if (maximize && v > *best) || (!maximize && v < *best) {
            *best = v;
        }
    };
    consider(&mut best, traj.sample(joint, hi));
    let first = (lo * rate).ceil() as usize;
    let last = (hi * rate).floor() as usize;
    for i in first..=last.min(traj.len() - 1) {
        consider(&mut best, traj.sample(joint, i as f64 / rate));
    }
    best
}
