//! Trial bundle persistence and the dataset protocol.
//!
//! One directory per trial:
//!   trial_<id>/meta.txt    key = value, events, footfalls, anthropometry
//!   trial_<id>/angles.csv  t + hip/knee/ankle per foot, trajectory rate
//!   trial_<id>/grf.csv     t + vertical/AP/stance per foot, geophone rate
//!   trial_<id>/vib.csv     t + one column per sensor, volts
//!
//! CSV numerics are written with 9 significant digits; meta values that
//! must survive a round trip exactly (events, anthropometry, seeds) are
//! written with 17. Saving a loaded record reproduces the bytes, which is
//! what the reproducibility checks compare.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::biomech::{Anthropometry, ContactSchedule, GrfSeries, JointTrajectory};
use crate::floorsim::{FloorModel, VibrationRecord};
use crate::gaitsynth::{synth_trial, GaitEvents, GaitType, SynthError, TrialRecord, MOCAP_RATE};

/// splitmix64-style seed derivation; used to fan a global seed out to
/// subjects and trials without correlated streams.
pub fn mix_seed(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fmt9(x: f64) -> String {
    format!("{x:.8e}")
}

fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

fn join17(xs: &[f64]) -> String {
    xs.iter().map(|&x| fmt17(x)).collect::<Vec<_>>().join(",")
}

fn join_xy(xs: &[(f64, f64)]) -> String {
    xs.iter().map(|&(x, y)| format!("{}:{}", fmt17(x), fmt17(y))).collect::<Vec<_>>().join(";")
}

fn parse_err(path: &Path, detail: impl Into<String>) -> SynthError {
    SynthError::Parse { path: path.display().to_string(), detail: detail.into() }
}

/// Writes one trial bundle under `parent`, returning the bundle directory.
pub fn save_trial(record: &TrialRecord, parent: &Path) -> Result<PathBuf, SynthError> {
    let dir = parent.join(format!("trial_{}", record.trial_id));
    fs::create_dir_all(&dir)?;

    // meta.txt
    {
        let mut w = BufWriter::new(fs::File::create(dir.join("meta.txt"))?);
        let a = &record.anthropometry;
        writeln!(w, "trial_id = {}", record.trial_id)?;
        writeln!(w, "subject_id = {}", record.subject_id)?;
        writeln!(w, "gait_type = {}", record.gait_type.name())?;
        writeln!(w, "seed = {}", record.seed)?;
        writeln!(w, "cadence_spm = {}", fmt17(record.cadence_spm))?;
        writeln!(w, "body_mass = {}", fmt17(a.body_mass))?;
        writeln!(w, "thigh_length = {}", fmt17(a.thigh_length))?;
        writeln!(w, "shank_length = {}", fmt17(a.shank_length))?;
        writeln!(w, "foot_length = {}", fmt17(a.foot_length))?;
        writeln!(w, "height = {}", fmt17(a.height))?;
        writeln!(w, "left_strikes = {}", join17(&record.events.left.strikes))?;
        writeln!(w, "left_offs = {}", join17(&record.events.left.offs))?;
        writeln!(w, "right_strikes = {}", join17(&record.events.right.strikes))?;
        writeln!(w, "right_offs = {}", join17(&record.events.right.offs))?;
        writeln!(w, "left_footfalls = {}", join_xy(&record.footfalls_left))?;
        writeln!(w, "right_footfalls = {}", join_xy(&record.footfalls_right))?;
        writeln!(w, "vib_sample_rate = {}", fmt17(record.vibration.sample_rate))?;
        writeln!(w, "vib_gain = {}", fmt17(record.vibration.gain))?;
        writeln!(w, "vib_sensitivity = {}", fmt17(record.vibration.sensitivity))?;
    }

    // angles.csv at the trajectory rate
    {
        let mut w = BufWriter::new(fs::File::create(dir.join("angles.csv"))?);
        writeln!(w, "t,hip_l,knee_l,ankle_l,hip_r,knee_r,ankle_r")?;
        for i in 0..record.left.len() {
            let t = i as f64 / record.left.sample_rate();
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                fmt9(t),
                fmt9(record.left.hip()[i]),
                fmt9(record.left.knee()[i]),
                fmt9(record.left.ankle()[i]),
                fmt9(record.right.hip()[i]),
                fmt9(record.right.knee()[i]),
                fmt9(record.right.ankle()[i]),
            )?;
        }
    }

    // grf.csv at the GRF rate
    {
        let mut w = BufWriter::new(fs::File::create(dir.join("grf.csv"))?);
        writeln!(w, "t,fv_l,fap_l,stance_l,fv_r,fap_r,stance_r")?;
        for i in 0..record.grf_left.len() {
            let t = i as f64 / record.grf_left.sample_rate;
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                fmt9(t),
                fmt9(record.grf_left.vertical[i]),
                fmt9(record.grf_left.anterior_posterior[i]),
                record.grf_left.stance_mask[i] as u8,
                fmt9(record.grf_right.vertical[i]),
                fmt9(record.grf_right.anterior_posterior[i]),
                record.grf_right.stance_mask[i] as u8,
            )?;
        }
    }

    // vib.csv at the geophone rate
    {
        let mut w = BufWriter::new(fs::File::create(dir.join("vib.csv"))?);
        let n_sensors = record.vibration.signals.len();
        let header: Vec<String> = (1..=n_sensors).map(|i| format!("s{i}")).collect();
        writeln!(w, "t,{}", header.join(","))?;
        for i in 0..record.vibration.len() {
            let t = i as f64 / record.vibration.sample_rate;
            let row: Vec<String> =
                record.vibration.signals.iter().map(|ch| fmt9(ch[i])).collect();
            writeln!(w, "{},{}", fmt9(t), row.join(","))?;
        }
    }

    Ok(dir)
}

fn read_meta(path: &Path) -> Result<BTreeMap<String, String>, SynthError> {
    let text = fs::read_to_string(path)?;
    let mut map = BTreeMap::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| parse_err(path, format!("line {}: expected key = value", ln + 1)))?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

fn meta_get<'a>(
    map: &'a BTreeMap<String, String>,
    path: &Path,
    key: &str,
) -> Result<&'a str, SynthError> {
    map.get(key).map(String::as_str).ok_or_else(|| parse_err(path, format!("missing key {key}")))
}

fn parse_f64(path: &Path, key: &str, s: &str) -> Result<f64, SynthError> {
    s.parse().map_err(|_| parse_err(path, format!("{key}: bad number {s:?}")))
}

fn parse_list(path: &Path, key: &str, s: &str) -> Result<Vec<f64>, SynthError> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(',').map(|x| parse_f64(path, key, x.trim())).collect()
}

fn parse_xy_list(path: &Path, key: &str, s: &str) -> Result<Vec<(f64, f64)>, SynthError> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(';')
        .map(|pair| {
            let (x, y) = pair
                .split_once(':')
                .ok_or_else(|| parse_err(path, format!("{key}: bad pair {pair:?}")))?;
            Ok((parse_f64(path, key, x)?, parse_f64(path, key, y)?))
        })
        .collect()
}

fn read_csv(path: &Path, want_cols: usize) -> Result<Vec<Vec<f64>>, SynthError> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| parse_err(path, "empty file"))?;
    let n_cols = header.split(',').count();
    if n_cols != want_cols {
        return Err(parse_err(path, format!("expected {want_cols} columns, found {n_cols}")));
    }
    let mut cols: Vec<Vec<f64>> = vec![Vec::new(); n_cols];
    for (ln, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let mut count = 0;
        for (c, field) in line.split(',').enumerate() {
            if c >= n_cols {
                return Err(parse_err(path, format!("line {}: too many fields", ln + 2)));
            }
            cols[c].push(parse_f64(path, header, field)?);
            count += 1;
        }
        if count != n_cols {
            return Err(parse_err(path, format!("line {}: {count} fields", ln + 2)));
        }
    }
    Ok(cols)
}

/// Reads a trial bundle directory back into a [`TrialRecord`].
pub fn load_trial(dir: &Path) -> Result<TrialRecord, SynthError> {
    let meta_path = dir.join("meta.txt");
    let meta = read_meta(&meta_path)?;
    let p = &meta_path;

    let trial_id = meta_get(&meta, p, "trial_id")?.to_string();
    let subject_id: u32 = meta_get(&meta, p, "subject_id")?
        .parse()
        .map_err(|_| parse_err(p, "subject_id not an integer"))?;
    let gait_type = GaitType::parse(meta_get(&meta, p, "gait_type")?)
        .ok_or_else(|| parse_err(p, "unknown gait_type"))?;
    let seed: u64 =
        meta_get(&meta, p, "seed")?.parse().map_err(|_| parse_err(p, "seed not an integer"))?;
    let cadence_spm = parse_f64(p, "cadence_spm", meta_get(&meta, p, "cadence_spm")?)?;
    let anthropometry = Anthropometry {
        body_mass: parse_f64(p, "body_mass", meta_get(&meta, p, "body_mass")?)?,
        thigh_length: parse_f64(p, "thigh_length", meta_get(&meta, p, "thigh_length")?)?,
        shank_length: parse_f64(p, "shank_length", meta_get(&meta, p, "shank_length")?)?,
        foot_length: parse_f64(p, "foot_length", meta_get(&meta, p, "foot_length")?)?,
        height: parse_f64(p, "height", meta_get(&meta, p, "height")?)?,
    };
    let events = GaitEvents {
        left: ContactSchedule {
            strikes: parse_list(p, "left_strikes", meta_get(&meta, p, "left_strikes")?)?,
            offs: parse_list(p, "left_offs", meta_get(&meta, p, "left_offs")?)?,
        },
        right: ContactSchedule {
            strikes: parse_list(p, "right_strikes", meta_get(&meta, p, "right_strikes")?)?,
            offs: parse_list(p, "right_offs", meta_get(&meta, p, "right_offs")?)?,
        },
    };
    let footfalls_left = parse_xy_list(p, "left_footfalls", meta_get(&meta, p, "left_footfalls")?)?;
    let footfalls_right =
        parse_xy_list(p, "right_footfalls", meta_get(&meta, p, "right_footfalls")?)?;
    let vib_rate = parse_f64(p, "vib_sample_rate", meta_get(&meta, p, "vib_sample_rate")?)?;
    let vib_gain = parse_f64(p, "vib_gain", meta_get(&meta, p, "vib_gain")?)?;
    let vib_sens = parse_f64(p, "vib_sensitivity", meta_get(&meta, p, "vib_sensitivity")?)?;

    let angles = read_csv(&dir.join("angles.csv"), 7)?;
    let left = JointTrajectory::new(
        angles[1].clone(),
        angles[2].clone(),
        angles[3].clone(),
        MOCAP_RATE,
    )?;
    let right = JointTrajectory::new(
        angles[4].clone(),
        angles[5].clone(),
        angles[6].clone(),
        MOCAP_RATE,
    )?;

    let grf_path = dir.join("grf.csv");
    let grf = read_csv(&grf_path, 7)?;
    let n = grf[0].len();
    let rate = if n >= 2 {
        let span = grf[0][n - 1] - grf[0][0];
        ((n - 1) as f64 / span * 10.0).round() / 10.0
    } else {
        crate::floorsim::GEOPHONE_RATE
    };
    let to_mask = |col: &[f64]| -> Vec<bool> { col.iter().map(|&x| x != 0.0).collect() };
    let grf_left = GrfSeries {
        vertical: grf[1].clone(),
        anterior_posterior: grf[2].clone(),
        sample_rate: rate,
        stance_mask: to_mask(&grf[3]),
    };
    let grf_right = GrfSeries {
        vertical: grf[4].clone(),
        anterior_posterior: grf[5].clone(),
        sample_rate: rate,
        stance_mask: to_mask(&grf[6]),
    };

    let vib_path = dir.join("vib.csv");
    let vib_text = fs::read_to_string(&vib_path)?;
    let n_sensors = vib_text
        .lines()
        .next()
        .ok_or_else(|| parse_err(&vib_path, "empty file"))?
        .split(',')
        .count()
        - 1;
    let vib = read_csv(&vib_path, n_sensors + 1)?;
    let vibration = VibrationRecord {
        signals: vib[1..].to_vec(),
        sample_rate: vib_rate,
        gain: vib_gain,
        sensitivity: vib_sens,
    };

    Ok(TrialRecord {
        trial_id,
        subject_id,
        gait_type,
        anthropometry,
        left,
        right,
        events,
        grf_left,
        grf_right,
        footfalls_left,
        footfalls_right,
        vibration,
        cadence_spm,
        seed,
    })
}

/// Trial counts of the generation protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DatasetProtocol {
    pub subjects: u32,
    pub normal_trials: u32,
    pub abnormal_trials: u32,
}

impl Default for DatasetProtocol {
    fn default() -> Self {
        DatasetProtocol { subjects: 20, normal_trials: 20, abnormal_trials: 10 }
    }
}

impl DatasetProtocol {
    pub fn trials_per_subject(&self) -> u32 {
        self.normal_trials + 3 * self.abnormal_trials
    }

    pub fn total_trials(&self) -> u32 {
        self.subjects * self.trials_per_subject()
    }

    /// Gait type of trial `index` within a subject: normals first, then
    /// the three abnormal blocks.
    pub fn gait_of(&self, index: u32) -> GaitType {
        if index < self.normal_trials {
            GaitType::Normal
        } else {
            match (index - self.normal_trials) / self.abnormal_trials {
                0 => GaitType::ToeWalking,
                1 => GaitType::FlexedKnee,
                _ => GaitType::FootDrag,
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub trial_id: String,
    pub subject_id: u32,
    pub gait_type: GaitType,
    pub seed: u64,
    pub dir: String,
}

/// Index of every bundle in a dataset plus the provenance stamp.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    pub config_hash: String,
    pub global_seed: u64,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn save(&self, path: &Path) -> Result<(), SynthError> {
        let mut w = BufWriter::new(fs::File::create(path)?);
        writeln!(w, "# config_hash = {}", self.config_hash)?;
        writeln!(w, "# global_seed = {}", self.global_seed)?;
        writeln!(w, "trial_id,subject_id,gait_type,seed,dir")?;
        for e in &self.entries {
            writeln!(
                w,
                "{},{},{},{},{}",
                e.trial_id,
                e.subject_id,
                e.gait_type.name(),
                e.seed,
                e.dir
            )?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Manifest, SynthError> {
        let text = fs::read_to_string(path)?;
        let mut config_hash = String::new();
        let mut global_seed = 0u64;
        let mut entries = Vec::new();
        let mut saw_header = false;
        for line in text.lines() {
            if let Some(rest) = line.strip_prefix('#') {
                if let Some((k, v)) = rest.split_once('=') {
                    match k.trim() {
                        "config_hash" => config_hash = v.trim().to_string(),
                        "global_seed" => {
                            global_seed = v
                                .trim()
                                .parse()
                                .map_err(|_| parse_err(path, "bad global_seed"))?
                        }
                        _ => {}
                    }
                }
                continue;
            }
            if !saw_header {
                saw_header = true;
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 5 {
                return Err(parse_err(path, format!("bad manifest row {line:?}")));
            }
            entries.push(ManifestEntry {
                trial_id: fields[0].to_string(),
                subject_id: fields[1].parse().map_err(|_| parse_err(path, "bad subject"))?,
                gait_type: GaitType::parse(fields[2])
                    .ok_or_else(|| parse_err(path, "bad gait_type"))?,
                seed: fields[3].parse().map_err(|_| parse_err(path, "bad seed"))?,
                dir: fields[4].to_string(),
            });
        }
        Ok(Manifest { config_hash, global_seed, entries })
    }
}

/// Generates every trial of the protocol under `out_dir`, in parallel,
/// and returns the manifest (entries in (subject, trial) order).
pub fn generate_dataset(
    proto: &DatasetProtocol,
    floor: &FloorModel,
    global_seed: u64,
    config_hash: &str,
    out_dir: &Path,
) -> Result<Manifest, SynthError> {
    fs::create_dir_all(out_dir)?;
    let mut jobs = Vec::new();
    for subject in 0..proto.subjects {
        let subject_seed = mix_seed(global_seed, 0xA11C_E000 + subject as u64);
        for trial in 0..proto.trials_per_subject() {
            let trial_seed = mix_seed(subject_seed, 0x7EA1 + trial as u64);
            jobs.push((subject, subject_seed, trial, trial_seed, proto.gait_of(trial)));
        }
    }
    let entries: Result<Vec<ManifestEntry>, SynthError> = jobs
        .par_iter()
        .map(|&(subject, subject_seed, trial, trial_seed, gait)| {
            let record = synth_trial(gait, subject, subject_seed, trial, trial_seed, floor)?;
            let dir = save_trial(&record, out_dir)?;
            Ok(ManifestEntry {
                trial_id: record.trial_id.clone(),
                subject_id: subject,
                gait_type: gait,
                seed: trial_seed,
                dir: dir
                    .file_name()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default(),
            })
        })
        .collect();
    let manifest = Manifest {
        config_hash: config_hash.to_string(),
        global_seed,
        entries: entries?,
    };
    manifest.save(&out_dir.join("manifest.csv"))?;
    Ok(manifest)
}

/// Loads a trial bundle given its manifest entry.
pub fn load_entry(dataset_dir: &Path, entry: &ManifestEntry) -> Result<TrialRecord, SynthError> {
    load_trial(&dataset_dir.join(&entry.dir))
}
