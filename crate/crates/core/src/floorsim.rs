//! Structural forward model: per-foot ground reaction forces at footfall
//! locations in, per-sensor geophone signals out.
//!
//! The floor is a sum of modal SDOF oscillators. Each footstep forces
//! every (sensor, mode) pair with its GRF attenuated by exp(-alpha*d) and
//! delayed by d/wave_speed rounded to the output grid; responses
//! superpose. The chain is linear and time-invariant until the seeded
//! white noise is added to the velocity, and the geophone itself is a
//! first-order high-pass (bilinear discretization) times sensitivity and
//! amplifier gain.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::biomech::GrfSeries;
use crate::newmark::{integrate_modal, IntegrateError, ModalOscillator};

/// Geophone sampling rate, Hz.
pub const GEOPHONE_RATE: f64 = 500.0;
/// Amplifier gain applied to the sensor output.
pub const DEFAULT_GAIN: f64 = 500.0;
/// SM-24-style sensitivity, volts per m/s.
pub const DEFAULT_SENSITIVITY: f64 = 28.8;
/// High-pass corner in the sensor's natural-frequency region, Hz.
pub const DEFAULT_CORNER_HZ: f64 = 10.0;

#[derive(Debug, Error)]
pub enum FloorError {
    #[error("invalid floor model: {0}")]
    InvalidModel(String),
    #[error("empty GRF series")]
    EmptyForce,
    #[error("non-finite force at sample {index}")]
    NonFiniteForce { index: usize },
    #[error("foot has {runs} stance intervals but {positions} footfall positions")]
    FootfallMismatch { runs: usize, positions: usize },
    #[error("corner frequency {corner} Hz not below Nyquist {nyquist} Hz")]
    CornerAboveNyquist { corner: f64, nyquist: f64 },
    #[error(transparent)]
    Integrate(#[from] IntegrateError),
}

/// Modal floor plus sensing geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct FloorModel {
    pub modes: Vec<ModalOscillator>,
    /// Exponential amplitude decay, 1/m.
    pub attenuation_alpha: f64,
    /// Propagation speed for the arrival delay, m/s.
    pub wave_speed: f64,
    pub sensor_positions: Vec<(f64, f64)>,
    /// White noise std on floor velocity, m/s.
    pub noise_std: f64,
}

impl FloorModel {
    pub fn validate(&self) -> Result<(), FloorError> {
        if self.modes.is_empty() {
            return Err(FloorError::InvalidModel("at least one mode required".into()));
        }
        if self.sensor_positions.is_empty() {
            return Err(FloorError::InvalidModel("at least one sensor required".into()));
        }
        for i in 0..self.sensor_positions.len() {
            for j in i + 1..self.sensor_positions.len() {
                if self.sensor_positions[i] == self.sensor_positions[j] {
                    return Err(FloorError::InvalidModel(format!(
                        "sensors {i} and {j} share position {:?}",
                        self.sensor_positions[i]
                    )));
                }
            }
        }
        if !(self.attenuation_alpha >= 0.0 && self.attenuation_alpha.is_finite()) {
            return Err(FloorError::InvalidModel("attenuation must be >= 0".into()));
        }
        if !(self.wave_speed > 0.0 && self.wave_speed.is_finite()) {
            return Err(FloorError::InvalidModel("wave speed must be > 0".into()));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(FloorError::InvalidModel("noise std must be >= 0".into()));
        }
        Ok(())
    }

    pub fn sensor_count(&self) -> usize {
        self.sensor_positions.len()
    }
}

impl Default for FloorModel {
    fn default() -> Self {
        FloorModel {
            modes: vec![ModalOscillator::new(2000.0, 0.05, 12.0).expect("valid default mode")],
            attenuation_alpha: 0.5,
            wave_speed: 300.0,
            sensor_positions: vec![(0.0, 0.0), (1.5, 0.6), (3.0, 0.0), (4.5, 0.6)],
            noise_std: 5e-5,
        }
    }
}

/// One foot's forcing: its GRF history plus one (x, y) footfall position
/// per stance interval, in stance order.
#[derive(Debug, Clone)]
pub struct FootForcing {
    pub grf: GrfSeries,
    pub footfalls: Vec<(f64, f64)>,
}

/// Per-sensor signals on a shared clock. `gain`/`sensitivity` record what
/// the signal has been through: raw floor velocity is gain 1, sensitivity 1.
#[derive(Debug, Clone, PartialEq)]
pub struct VibrationRecord {
    pub signals: Vec<Vec<f64>>,
    pub sample_rate: f64,
    pub gain: f64,
    pub sensitivity: f64,
}

impl VibrationRecord {
    pub fn len(&self) -> usize {
        self.signals.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Applies the geophone transfer chain to every channel.
    pub fn transduce(
        &self,
        sensitivity: f64,
        gain: f64,
        corner_frequency: f64,
    ) -> Result<VibrationRecord, FloorError> {
        let mut signals = Vec::with_capacity(self.signals.len());
        for ch in &self.signals {
            signals.push(geophone_transduce(
                ch,
                self.sample_rate,
                sensitivity,
                gain,
                corner_frequency,
            )?);
        }
        Ok(VibrationRecord {
            signals,
            sample_rate: self.sample_rate,
            gain: self.gain * gain,
            sensitivity: self.sensitivity * sensitivity,
        })
    }
}

fn stance_runs(mask: &[bool]) -> Vec<(usize, usize)> {
    let mut runs = Vec::new();
    let mut start = None;
    for (i, &m) in mask.iter().enumerate() {
        match (m, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                runs.push((s, i));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        runs.push((s, mask.len()));
    }
    runs
}

fn resample_linear(series: &[f64], from_rate: f64, to_rate: f64, n_out: usize) -> Vec<f64> {
    if (from_rate - to_rate).abs() < 1e-12 && series.len() >= n_out {
        return series[..n_out].to_vec();
    }
    (0..n_out)
        .map(|i| crate::biomech::interp_clamped(series, from_rate, i as f64 / to_rate))
        .collect()
}

/// Floor velocity at every sensor for a set of footfalls, sampled at
/// [`GEOPHONE_RATE`]. Superposition over feet, stance intervals, and modes;
/// noise is seeded white Gaussian on the velocity.
pub fn simulate_vibration(
    forcings: &[FootForcing],
    floor: &FloorModel,
    seed: u64,
) -> Result<VibrationRecord, FloorError> {
    floor.validate()?;
    if forcings.is_empty() || forcings.iter().any(|f| f.grf.is_empty()) {
        return Err(FloorError::EmptyForce);
    }
    for f in forcings {
        if let Some(index) = f.grf.vertical.iter().position(|v| !v.is_finite()) {
            return Err(FloorError::NonFiniteForce { index });
        }
    }

    let dt = 1.0 / GEOPHONE_RATE;
    let n_out = forcings
        .iter()
        .map(|f| ((f.grf.len() as f64 / f.grf.sample_rate) * GEOPHONE_RATE).round() as usize)
        .max()
        .unwrap_or(0);

    let mut signals = vec![vec![0.0; n_out]; floor.sensor_count()];

    for foot in forcings {
        let force = resample_linear(&foot.grf.vertical, foot.grf.sample_rate, GEOPHONE_RATE, n_out);
        let mask: Vec<bool> = {
            // resampled stance: a sample is stance if its source time is
            let src = &foot.grf.stance_mask;
            (0..n_out)
                .map(|i| {
                    let x = (i as f64 / GEOPHONE_RATE) * foot.grf.sample_rate;
                    let j = (x.round() as usize).min(src.len().saturating_sub(1));
                    src[j]
                })
                .collect()
        };
        let runs = stance_runs(&mask);
        if runs.len() != foot.footfalls.len() {
            return Err(FloorError::FootfallMismatch {
                runs: runs.len(),
                positions: foot.footfalls.len(),
            });
        }
        for ((a, b), &(fx, fy)) in runs.iter().zip(&foot.footfalls) {
            let mut step_force = vec![0.0; n_out];
            step_force[*a..*b].copy_from_slice(&force[*a..*b]);
            for (s, &(sx, sy)) in floor.sensor_positions.iter().enumerate() {
                let d = ((fx - sx) * (fx - sx) + (fy - sy) * (fy - sy)).sqrt();
                let delay = (d / floor.wave_speed / dt).round() as usize;
                let atten = (-floor.attenuation_alpha * d).exp();
                let mut forced = vec![0.0; n_out];
                if delay < n_out {
                    for i in delay..n_out {
                        forced[i] = step_force[i - delay] * atten;
                    }
                }
                for mode in &floor.modes {
                    let resp = integrate_modal(mode, &forced, dt, 0.0, 0.0)?;
                    for (acc, v) in signals[s].iter_mut().zip(&resp.velocity) {
                        *acc += v;
                    }
                }
            }
        }
    }

    if floor.noise_std > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dist = Normal::new(0.0, floor.noise_std).expect("finite noise std");
        for ch in signals.iter_mut() {
            for v in ch.iter_mut() {
                *v += dist.sample(&mut rng);
            }
        }
    }

    Ok(VibrationRecord { signals, sample_rate: GEOPHONE_RATE, gain: 1.0, sensitivity: 1.0 })
}

/// First-order high-pass at `corner_frequency` (bilinear transform), then
/// sensitivity and gain. Rejects DC exactly.
pub fn geophone_transduce(
    floor_velocity: &[f64],
    sample_rate: f64,
    sensitivity: f64,
    gain: f64,
    corner_frequency: f64,
) -> Result<Vec<f64>, FloorError> {
    let nyquist = sample_rate / 2.0;
    if !(corner_frequency > 0.0) || corner_frequency >= nyquist {
        return Err(FloorError::CornerAboveNyquist { corner: corner_frequency, nyquist });
    }
    let wc = 2.0 * std::f64::consts::PI * corner_frequency;
    let k = 2.0 * sample_rate;
    let a = k / (k + wc);
    let p = (k - wc) / (k + wc);
    let scale = sensitivity * gain;
    let mut out = Vec::with_capacity(floor_velocity.len());
    let mut prev_x = 0.0;
    let mut prev_y = 0.0;
    for &x in floor_velocity {
        let y = a * (x - prev_x) + p * prev_y;
        prev_x = x;
        prev_y = y;
        out.push(y * scale);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_step_grf(n: usize, start: usize, end: usize, peak: f64) -> GrfSeries {
        let mut vertical = vec![0.0; n];
        let mut mask = vec![false; n];
        for i in start..end {
            let s = (i - start) as f64 / (end - start) as f64;
            vertical[i] = peak * (std::f64::consts::PI * s).sin();
            mask[i] = true;
        }
        GrfSeries {
            vertical,
            anterior_posterior: vec![0.0; n],
            sample_rate: GEOPHONE_RATE,
            stance_mask: mask,
        }
    }

    fn quiet_floor() -> FloorModel {
        FloorModel { noise_std: 0.0, ..FloorModel::default() }
    }

    #[test]
    fn zero_force_gives_zero_signals() {
        let grf = GrfSeries {
            vertical: vec![0.0; 400],
            anterior_posterior: vec![0.0; 400],
            sample_rate: GEOPHONE_RATE,
            stance_mask: vec![false; 400],
        };
        let rec = simulate_vibration(
            &[FootForcing { grf, footfalls: vec![] }],
            &quiet_floor(),
            7,
        )
        .unwrap();
        assert!(rec.signals.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn doubling_force_doubles_every_sample() {
        let grf = single_step_grf(600, 100, 350, 700.0);
        let mut grf2 = grf.clone();
        for v in grf2.vertical.iter_mut() {
            *v *= 2.0;
        }
        let floor = quiet_floor();
        let r1 = simulate_vibration(
            &[FootForcing { grf, footfalls: vec![(1.0, 0.2)] }],
            &floor,
            0,
        )
        .unwrap();
        let r2 = simulate_vibration(
            &[FootForcing { grf: grf2, footfalls: vec![(1.0, 0.2)] }],
            &floor,
            0,
        )
        .unwrap();
        for (a, b) in r1.signals.iter().flatten().zip(r2.signals.iter().flatten()) {
            assert_eq!(*b, 2.0 * *a);
        }
    }

    #[test]
    fn superposition_of_two_footsteps() {
        let floor = quiet_floor();
        let g1 = single_step_grf(1000, 50, 300, 650.0);
        let g2 = single_step_grf(1000, 450, 720, 720.0);
        let joint = {
            let mut vertical = g1.vertical.clone();
            let mut mask = g1.stance_mask.clone();
            for i in 0..1000 {
                vertical[i] += g2.vertical[i];
                mask[i] = mask[i] || g2.stance_mask[i];
            }
            GrfSeries {
                vertical,
                anterior_posterior: vec![0.0; 1000],
                sample_rate: GEOPHONE_RATE,
                stance_mask: mask,
            }
        };
        let r_joint = simulate_vibration(
            &[FootForcing { grf: joint, footfalls: vec![(0.8, -0.1), (1.5, -0.1)] }],
            &floor,
            0,
        )
        .unwrap();
        let r1 = simulate_vibration(
            &[FootForcing { grf: g1, footfalls: vec![(0.8, -0.1)] }],
            &floor,
            0,
        )
        .unwrap();
        let r2 = simulate_vibration(
            &[FootForcing { grf: g2, footfalls: vec![(1.5, -0.1)] }],
            &floor,
            0,
        )
        .unwrap();
        for s in 0..floor.sensor_count() {
            for i in 0..1000 {
                let want = r1.signals[s][i] + r2.signals[s][i];
                assert!((r_joint.signals[s][i] - want).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn farther_sensor_sees_smaller_peak() {
        // sensors along a line, footfall at the origin end
        let floor = FloorModel {
            sensor_positions: vec![(0.5, 0.0), (1.5, 0.0), (3.0, 0.0), (4.5, 0.0)],
            noise_std: 0.0,
            ..FloorModel::default()
        };
        let grf = single_step_grf(800, 100, 400, 700.0);
        let rec = simulate_vibration(
            &[FootForcing { grf, footfalls: vec![(0.0, 0.0)] }],
            &floor,
            0,
        )
        .unwrap();
        let peaks: Vec<f64> = rec
            .signals
            .iter()
            .map(|ch| ch.iter().fold(0.0f64, |m, &v| m.max(v.abs())))
            .collect();
        for w in peaks.windows(2) {
            assert!(w[0] > w[1], "peaks not strictly decreasing: {peaks:?}");
        }
    }

    #[test]
    fn seeded_noise_is_deterministic() {
        let floor = FloorModel::default(); // noise on
        let grf = single_step_grf(500, 60, 300, 680.0);
        let mk = || {
            simulate_vibration(
                &[FootForcing { grf: grf.clone(), footfalls: vec![(1.2, 0.3)] }],
                &floor,
                1234,
            )
            .unwrap()
        };
        assert_eq!(mk(), mk());
    }

    #[test]
    fn footfall_count_must_match_stance_runs() {
        let grf = single_step_grf(500, 60, 300, 680.0);
        let err = simulate_vibration(
            &[FootForcing { grf, footfalls: vec![(0.0, 0.0), (1.0, 0.0)] }],
            &quiet_floor(),
            0,
        );
        assert!(matches!(err, Err(FloorError::FootfallMismatch { runs: 1, positions: 2 })));
    }

    #[test]
    fn nan_force_rejected() {
        let mut grf = single_step_grf(100, 10, 60, 500.0);
        grf.vertical[20] = f64::NAN;
        let err = simulate_vibration(
            &[FootForcing { grf, footfalls: vec![(0.0, 0.0)] }],
            &quiet_floor(),
            0,
        );
        assert!(matches!(err, Err(FloorError::NonFiniteForce { index: 20 })));
    }

    #[test]
    fn transduce_zero_is_zero() {
        let out = geophone_transduce(&vec![0.0; 256], 500.0, 28.8, 500.0, 10.0).unwrap();
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn transduce_rejects_dc() {
        // constant velocity: output decays below 1e-3 of the passband level
        // within 1 second
        let x = vec![2e-3; 500];
        let out = geophone_transduce(&x, 500.0, DEFAULT_SENSITIVITY, DEFAULT_GAIN, 10.0).unwrap();
        let passband = 2e-3 * DEFAULT_SENSITIVITY * DEFAULT_GAIN;
        assert!(out[499].abs() < 1e-3 * passband, "residual {}", out[499]);
    }

    #[test]
    fn transduce_matches_analytic_response_at_50_hz() {
        let fs = 500.0;
        let f = 50.0;
        let fc = 10.0;
        let n = 2000;
        let x: Vec<f64> =
            (0..n).map(|i| (2.0 * std::f64::consts::PI * f * i as f64 / fs).sin()).collect();
        let out = geophone_transduce(&x, fs, DEFAULT_SENSITIVITY, DEFAULT_GAIN, fc).unwrap();
        // steady state after the corner transient (tau ~ 16 ms)
        let peak = out[n - 500..].iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        let analytic = {
            let r = f / fc;
            r / (1.0 + r * r).sqrt()
        };
        let want = DEFAULT_SENSITIVITY * DEFAULT_GAIN * analytic;
        assert!(
            (peak - want).abs() / want < 0.02,
            "peak {peak} vs analytic {want}"
        );
    }

    #[test]
    fn corner_at_nyquist_rejected() {
        let err = geophone_transduce(&[0.0; 4], 500.0, 1.0, 1.0, 250.0);
        assert!(matches!(err, Err(FloorError::CornerAboveNyquist { .. })));
    }
}
