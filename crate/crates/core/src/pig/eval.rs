//! MAE breakdowns over a test split: overall, per motion segment
//! (joint x event), per joint, per phase (stance/swing events), and per
//! gait type. 22 rows total for the standard schema.

use rayon::prelude::*;

use crate::ad::ParamStore;
use crate::biomech::Joint;
use crate::gaitsynth::{CycleEvent, GaitType, TargetAngles, N_TARGETS};
use crate::pig::graph::GraphInstance;
use crate::pig::train::AngleEstimator;
use crate::pig::ModelError;

#[derive(Debug, Clone, PartialEq)]
pub struct EvalCell {
    pub scope: &'static str,
    pub label: String,
    /// Number of (cycle, angle) error terms in this cell.
    pub count: usize,
    pub mae: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub rows: Vec<EvalCell>,
}

impl EvalReport {
    pub fn overall(&self) -> f64 {
        self.rows[0].mae
    }

    pub fn cell(&self, scope: &str, label: &str) -> Option<&EvalCell> {
        self.rows.iter().find(|r| r.scope == scope && r.label == label)
    }
}

struct Acc {
    total: f64,
    count: usize,
}

impl Acc {
    fn new() -> Self {
        Acc { total: 0.0, count: 0 }
    }

    fn push(&mut self, e: f64) {
        self.total += e;
        self.count += 1;
    }

    fn mae(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.total / self.count as f64
        }
    }
}

/// Evaluates a trained model over a (disjoint) test split.
pub fn evaluate<E: AngleEstimator>(
    model: &E,
    store: &ParamStore,
    test: &[GraphInstance],
) -> Result<EvalReport, ModelError> {
    if test.is_empty() {
        return Err(ModelError::EmptySplit);
    }
    let per_graph: Result<Vec<([f64; N_TARGETS], GaitType)>, ModelError> = test
        .par_iter()
        .map(|g| {
            let t = g.targets.ok_or(ModelError::MissingTargets)?;
            let p = model.predict(store, g)?;
            let mut err = [0.0; N_TARGETS];
            for k in 0..N_TARGETS {
                err[k] = (p[k] - t.values()[k]).abs();
            }
            Ok((err, g.gait_type))
        })
        .collect();
    let per_graph = per_graph?;

    let mut overall = Acc::new();
    let mut segments: Vec<Acc> = (0..N_TARGETS).map(|_| Acc::new()).collect();
    let mut joints = [Acc::new(), Acc::new(), Acc::new()];
    let mut phases = [Acc::new(), Acc::new()]; // stance, swing
    let mut gaits: Vec<Acc> = (0..GaitType::ALL.len()).map(|_| Acc::new()).collect();

    for (err, gait) in &per_graph {
        let gait_idx = GaitType::ALL.iter().position(|g| g == gait).expect("known gait");
        for (slot, &e) in err.iter().enumerate() {
            overall.push(e);
            segments[slot].push(e);
            joints[slot / CycleEvent::ALL.len()].push(e);
            let event = CycleEvent::ALL[slot % CycleEvent::ALL.len()];
            phases[if event.is_stance() { 0 } else { 1 }].push(e);
            gaits[gait_idx].push(e);
        }
    }

    let mut rows = Vec::with_capacity(22);
    rows.push(EvalCell { scope: "overall", label: "all".into(), count: overall.count, mae: overall.mae() });
    for (slot, acc) in segments.iter().enumerate() {
        rows.push(EvalCell {
            scope: "segment",
            label: TargetAngles::segment_name(slot),
            count: acc.count,
            mae: acc.mae(),
        });
    }
    for (j, acc) in joints.iter().enumerate() {
        rows.push(EvalCell {
            scope: "joint",
            label: Joint::ALL[j].name().to_string(),
            count: acc.count,
            mae: acc.mae(),
        });
    }
    for (p, acc) in phases.iter().enumerate() {
        rows.push(EvalCell {
            scope: "phase",
            label: if p == 0 { "stance".into() } else { "swing".into() },
            count: acc.count,
            mae: acc.mae(),
        });
    }
    for (g, acc) in gaits.iter().enumerate() {
        rows.push(EvalCell {
            scope: "gait_type",
            label: GaitType::ALL[g].name().to_string(),
            count: acc.count,
            mae: acc.mae(),
        });
    }
    Ok(EvalReport { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaitsynth::N_TARGETS;
    use crate::pig::graph::GraphInstance;

    /// Test stub predicting targets plus a fixed offset.
    struct OffsetModel(f64);

    impl AngleEstimator for OffsetModel {
        fn register(&self, _s: &mut ParamStore) -> Result<(), ModelError> {
            Ok(())
        }
        fn sample_grad(
            &self,
            _s: &ParamStore,
            _g: &GraphInstance,
        ) -> Result<crate::pig::train::SampleGrad, ModelError> {
            unimplemented!("evaluation only")
        }
        fn predict(
            &self,
            _s: &ParamStore,
            g: &GraphInstance,
        ) -> Result<[f64; N_TARGETS], ModelError> {
            let t = g.targets.ok_or(ModelError::MissingTargets)?;
            let mut out = *t.values();
            for v in out.iter_mut() {
                *v += self.0;
            }
            Ok(out)
        }
    }

    fn graphs() -> Vec<GraphInstance> {
        use crate::pig::model::test_support::tiny_graph;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut gs: Vec<GraphInstance> = (0..6).map(|_| tiny_graph(&mut rng, 4, 24, 20)).collect();
        gs[2].gait_type = GaitType::ToeWalking;
        gs[3].gait_type = GaitType::FlexedKnee;
        gs[4].gait_type = GaitType::FootDrag;
        gs[5].gait_type = GaitType::ToeWalking;
        gs
    }

    #[test]
    fn identity_model_scores_zero_everywhere() {
        let store = ParamStore::new(0);
        let report = evaluate(&OffsetModel(0.0), &store, &graphs()).unwrap();
        assert_eq!(report.rows.len(), 22);
        for row in &report.rows {
            assert_eq!(row.mae, 0.0, "{}/{}", row.scope, row.label);
        }
    }

    #[test]
    fn constant_offset_fills_every_cell() {
        let store = ParamStore::new(0);
        let report = evaluate(&OffsetModel(2.0), &store, &graphs()).unwrap();
        for row in &report.rows {
            if row.count > 0 {
                assert!((row.mae - 2.0).abs() < 1e-12, "{}/{} = {}", row.scope, row.label, row.mae);
            }
        }
    }

    #[test]
    fn gait_rows_average_to_overall() {
        let store = ParamStore::new(0);
        // non-uniform errors: scale targets to make per-gait MAEs differ
        struct Skewed;
        impl AngleEstimator for Skewed {
            fn register(&self, _s: &mut ParamStore) -> Result<(), ModelError> {
                Ok(())
            }
            fn sample_grad(
                &self,
                _s: &ParamStore,
                _g: &GraphInstance,
            ) -> Result<crate::pig::train::SampleGrad, ModelError> {
                unimplemented!()
            }
            fn predict(
                &self,
                _s: &ParamStore,
                g: &GraphInstance,
            ) -> Result<[f64; N_TARGETS], ModelError> {
                let t = g.targets.unwrap();
                let off = if g.gait_type == GaitType::Normal { 1.0 } else { 3.5 };
                let mut out = *t.values();
                for v in out.iter_mut() {
                    *v += off;
                }
                Ok(out)
            }
        }
        let report = evaluate(&Skewed, &store, &graphs()).unwrap();
        let overall = report.rows[0].mae * report.rows[0].count as f64;
        let weighted: f64 = report
            .rows
            .iter()
            .filter(|r| r.scope == "gait_type")
            .map(|r| r.mae * r.count as f64)
            .sum();
        assert!((overall - weighted).abs() < 1e-9);
    }

    #[test]
    fn empty_split_is_an_error() {
        let store = ParamStore::new(0);
        assert!(matches!(
            evaluate(&OffsetModel(0.0), &store, &[]),
            Err(ModelError::EmptySplit)
        ));
    }
}
