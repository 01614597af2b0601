//! Physics-constrained forward pass of the graph model.
//!
//! Two constrained aggregation paths write into the latent force node:
//!
//!   structural dynamics — each vibration node's window runs through a
//!   shared recurrent structure property learner; the per-sensor
//!   embeddings are combined by plain summation (the floor response is a
//!   superposition, the learner absorbs the unknown M/C/K);
//!
//!   gait biomechanics — each joint embedding is mapped into a
//!   (sin, cos) feature space, the body features into segment-weight /
//!   moment-arm proxies by a learned affine map, their elementwise
//!   products are scored by two-layer attention (linear, tanh, linear,
//!   per head) and the attention-weighted terms are summed.
//!
//! The squared distance between the two force embeddings is the
//! consistency penalty exposed to the loss. All remaining edge families
//! route typed messages with mean aggregation and residual updates; the
//! latent force node sends its state outward along force-constraint
//! edges but is only written by the physics paths. Every aggregation
//! iterates nodes and edges in role order, so isomorphic relabelings of
//! the node list evaluate bit-identically.

use std::collections::BTreeMap;

use crate::ad::{Init, ParamStore, StoreError, Tape, Tensor, ValueId};
use crate::gaitsynth::{TargetAngles, N_TARGETS};
use crate::pig::graph::{EdgeKind, GraphInstance, NodeRole};
use crate::pig::lstm::{frame_signal, LstmSpec};
use crate::pig::ModelError;

#[derive(Debug, Clone, PartialEq)]
pub struct PigConfig {
    pub hidden_dim: usize,
    pub attention_heads: usize,
    pub lstm_hidden: usize,
    pub message_rounds: usize,
    pub vib_window: usize,
    pub vib_frame: usize,
    pub vib_input_scale: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub lambda_consistency: f64,
    pub patience: usize,
    pub seed: u64,
}

impl Default for PigConfig {
    fn default() -> Self {
        PigConfig {
            hidden_dim: 32,
            attention_heads: 2,
            lstm_hidden: 32,
            message_rounds: 3,
            vib_window: 1024,
            vib_frame: 16,
            vib_input_scale: 0.04,
            learning_rate: 3e-3,
            epochs: 40,
            batch_size: 32,
            lambda_consistency: 0.1,
            patience: 10,
            seed: 0,
        }
    }
}

impl PigConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.hidden_dim == 0 || self.hidden_dim % 2 != 0 {
            return Err(ModelError::InvalidConfig(format!(
                "hidden_dim must be positive and even (sin/cos split), got {}",
                self.hidden_dim
            )));
        }
        // reverse and outbound message channels need a second hop to reach
        // the readout
        if self.message_rounds < 2 {
            return Err(ModelError::InvalidConfig("message_rounds must be >= 2".into()));
        }
        for (name, v) in [
            ("attention_heads", self.attention_heads),
            ("lstm_hidden", self.lstm_hidden),
            ("vib_window", self.vib_window),
            ("vib_frame", self.vib_frame),
            ("epochs", self.epochs),
            ("batch_size", self.batch_size),
            ("patience", self.patience),
        ] {
            if v == 0 {
                return Err(ModelError::InvalidConfig(format!("{name} must be positive")));
            }
        }
        if !(self.learning_rate >= 0.0) || !(self.lambda_consistency >= 0.0) {
            return Err(ModelError::InvalidConfig(
                "learning_rate and lambda_consistency must be >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// Message-passing direction relative to the role-normalized edge.
const DIRECTIONS: [&str; 2] = ["fwd", "rev"];
const STANDARD_KINDS: [EdgeKind; 4] =
    [EdgeKind::Spatial, EdgeKind::Temporal, EdgeKind::Indirect, EdgeKind::TimeConstraint];

pub struct PigModel {
    pub cfg: PigConfig,
}

/// Output of the full forward pass.
pub struct PigForward {
    /// Prediction node ids in target-slot order.
    pub preds: Vec<ValueId>,
    pub consistency: ValueId,
    /// Attention weights per head as (target slot, weight).
    pub attention: Vec<Vec<(usize, f64)>>,
}

pub struct ForceAggregate {
    pub total: ValueId,
    /// Per-sensor projected embeddings in sensor order.
    pub encodings: Vec<(usize, ValueId)>,
}

pub struct BiomechConstraint {
    pub embedding: ValueId,
    pub attention: Vec<Vec<(usize, f64)>>,
}

impl PigModel {
    pub fn new(cfg: PigConfig) -> Result<Self, ModelError> {
        cfg.validate()?;
        Ok(PigModel { cfg })
    }

    fn splearner(&self) -> LstmSpec {
        LstmSpec::new("pig.splearner", self.cfg.vib_frame, self.cfg.lstm_hidden)
    }

    /// Registers every learnable slice in a fixed order.
    pub fn register(&self, store: &mut ParamStore) -> Result<(), StoreError> {
        let h = self.cfg.hidden_dim;
        store.register("pig.joint_embed", h, N_TARGETS, Init::ScaledNormal)?;
        store.register("pig.time.w", h, 2, Init::ScaledNormal)?;
        store.register("pig.time.b", h, 1, Init::Zeros)?;
        self.splearner().register(store)?;
        store.register("pig.vibproj.w", h, self.cfg.lstm_hidden, Init::ScaledNormal)?;
        store.register("pig.vibproj.b", h, 1, Init::Zeros)?;
        store.register("pig.bio.w1", h / 2, h, Init::ScaledNormal)?;
        store.register("pig.bio.w2", h / 2, h, Init::ScaledNormal)?;
        store.register("pig.bio.bodymap.w", h, 4, Init::ScaledNormal)?;
        store.register("pig.bio.bodymap.b", h, 1, Init::Zeros)?;
        for k in 0..self.cfg.attention_heads {
            store.register(&format!("pig.att.h{k}.w"), h, h, Init::ScaledNormal)?;
            store.register(&format!("pig.att.h{k}.b"), h, 1, Init::Zeros)?;
            store.register(&format!("pig.att.h{k}.a"), h, 1, Init::Normal(0.3))?;
        }
        store.register("pig.att.out.w", h, h * self.cfg.attention_heads, Init::ScaledNormal)?;
        store.register("pig.att.out.b", h, 1, Init::Zeros)?;
        for kind in STANDARD_KINDS {
            for dir in DIRECTIONS {
                store.register(
                    &format!("pig.msg.{}.{dir}.w", kind.name()),
                    h,
                    h,
                    Init::ScaledNormal,
                )?;
                store.register(&format!("pig.msg.{}.{dir}.b", kind.name()), h, 1, Init::Zeros)?;
            }
        }
        store.register("pig.msg.force_constraint.out.w", h, h, Init::ScaledNormal)?;
        store.register("pig.msg.force_constraint.out.b", h, 1, Init::Zeros)?;
        store.register("pig.upd.w", h, h, Init::ScaledNormal)?;
        store.register("pig.upd.b", h, 1, Init::Zeros)?;
        store.register("pig.read.w", N_TARGETS, h, Init::ScaledNormal)?;
        store.register("pig.read.b", N_TARGETS, 1, Init::Zeros)?;
        Ok(())
    }

    /// Joint embeddings from node features, in role order.
    fn joint_states(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        graph: &GraphInstance,
    ) -> Result<BTreeMap<NodeRole, (usize, ValueId)>, ModelError> {
        let embed = tape.param(store, "pig.joint_embed")?;
        let mut joints = BTreeMap::new();
        let mut order: Vec<usize> = (0..graph.nodes.len()).collect();
        order.sort_by_key(|&i| graph.nodes[i].role);
        for i in order {
            if let NodeRole::Joint(..) = graph.nodes[i].role {
                let feat = tape.leaf(Tensor::vector(graph.nodes[i].feature.clone()))?;
                let x = tape.matmul(embed, feat)?;
                joints.insert(graph.nodes[i].role, (i, x));
            }
        }
        Ok(joints)
    }

    /// Structural-dynamics path: shared recurrent encoder per vibration
    /// node, summation into the latent force embedding. Only sensors
    /// linked to the latent force node by a force-constraint edge join
    /// the sum.
    pub fn force_aggregate(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        graph: &GraphInstance,
    ) -> Result<ForceAggregate, ModelError> {
        let spec = self.splearner();
        let proj_w = tape.param(store, "pig.vibproj.w")?;
        let proj_b = tape.param(store, "pig.vibproj.b")?;

        let lf = graph
            .node_by_role(NodeRole::LatentForce)
            .ok_or_else(|| ModelError::InvalidGraph("missing latent force node".into()))?;
        let mut encodings = Vec::new();
        let mut linked = Vec::new();
        let mut sensors: Vec<(usize, usize)> = graph
            .nodes
            .iter()
            .enumerate()
            .filter_map(|(i, n)| match n.role {
                NodeRole::Vibration(s) => Some((s, i)),
                _ => None,
            })
            .collect();
        sensors.sort_unstable();
        for (s, i) in sensors {
            let window = &graph.nodes[i].feature;
            if window.len() != self.cfg.vib_window {
                return Err(ModelError::WindowLength {
                    needed: window.len(),
                    configured: self.cfg.vib_window,
                });
            }
            let frames =
                frame_signal(window, graph.valid_len, self.cfg.vib_frame, self.cfg.vib_input_scale);
            let enc = spec.encode(tape, store, &frames)?;
            let proj = tape.affine(proj_w, enc, proj_b)?;
            let state = tape.tanh(proj)?;
            encodings.push((s, state));
            let has_edge = graph.edges.iter().any(|e| {
                e.kind == EdgeKind::ForceConstraint
                    && ((e.src == lf && e.dst == i) || (e.src == i && e.dst == lf))
            });
            if has_edge {
                linked.push(state);
            }
        }
        let total = if linked.is_empty() {
            tape.leaf(Tensor::zeros(self.cfg.hidden_dim, 1))?
        } else {
            tape.add_n(&linked)?
        };
        Ok(ForceAggregate { total, encodings })
    }

    /// Gait-biomechanics path. `mask`, when given, drops target slots from
    /// the attention (their multiplied terms contribute nothing).
    pub fn biomech_constrain(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        graph: &GraphInstance,
        mask: Option<&[bool; N_TARGETS]>,
    ) -> Result<BiomechConstraint, ModelError> {
        let h = self.cfg.hidden_dim;
        let lf = graph
            .node_by_role(NodeRole::LatentForce)
            .ok_or_else(|| ModelError::InvalidGraph("missing latent force node".into()))?;
        let body = graph.node_by_role(NodeRole::Body);

        // the biomech write rides the body-latent force constraint edge
        let body_linked = body.map_or(false, |b| {
            graph.edges.iter().any(|e| {
                e.kind == EdgeKind::ForceConstraint
                    && ((e.src == b && e.dst == lf) || (e.src == lf && e.dst == b))
            })
        });
        if !body_linked {
            let zero = tape.leaf(Tensor::zeros(h, 1))?;
            return Ok(BiomechConstraint { embedding: zero, attention: Vec::new() });
        }
        let body = body.expect("checked above");

        let w1 = tape.param(store, "pig.bio.w1")?;
        let w2 = tape.param(store, "pig.bio.w2")?;
        let bw = tape.param(store, "pig.bio.bodymap.w")?;
        let bb = tape.param(store, "pig.bio.bodymap.b")?;
        let body_feat = tape.leaf(Tensor::vector(graph.nodes[body].feature.clone()))?;
        let body_proxy = tape.affine(bw, body_feat, bb)?;

        // multiplied terms for joints that carry a body-dimension edge
        let joints = self.joint_states(tape, store, graph)?;
        let mut terms: Vec<(usize, ValueId)> = Vec::new();
        for (role, (i, x)) in &joints {
            let NodeRole::Joint(joint, event) = role else { continue };
            let slot = TargetAngles::index(*joint, *event);
            if let Some(m) = mask {
                if !m[slot] {
                    continue;
                }
            }
            let has_edge = graph.edges.iter().any(|e| {
                e.kind == EdgeKind::BodyDimension
                    && ((e.src == body && e.dst == *i) || (e.src == *i && e.dst == body))
            });
            if !has_edge {
                continue;
            }
            let s = tape.matmul(w1, *x)?;
            let s = tape.sin(s)?;
            let c = tape.matmul(w2, *x)?;
            let c = tape.cos(c)?;
            let u = tape.concat(&[s, c])?;
            terms.push((slot, tape.mul(u, body_proxy)?));
        }
        if terms.is_empty() {
            let zero = tape.leaf(Tensor::zeros(h, 1))?;
            return Ok(BiomechConstraint { embedding: zero, attention: Vec::new() });
        }

        // two-layer attention scoring per head, softmax over the terms
        let mut head_outputs = Vec::new();
        let mut attention = Vec::new();
        for k in 0..self.cfg.attention_heads {
            let aw = tape.param(store, &format!("pig.att.h{k}.w"))?;
            let ab = tape.param(store, &format!("pig.att.h{k}.b"))?;
            let aa = tape.param(store, &format!("pig.att.h{k}.a"))?;
            let mut scores = Vec::with_capacity(terms.len());
            for (_, t) in &terms {
                let z = tape.affine(aw, *t, ab)?;
                let z = tape.tanh(z)?;
                scores.push(tape.dot(aa, z)?);
            }
            let stacked = tape.stack(&scores)?;
            let alpha = tape.softmax(stacked)?;
            attention.push(
                terms
                    .iter()
                    .enumerate()
                    .map(|(pos, (slot, _))| (*slot, tape.value(alpha).data()[pos]))
                    .collect(),
            );
            let mut weighted = Vec::with_capacity(terms.len());
            for (pos, (_, t)) in terms.iter().enumerate() {
                let a_i = tape.index(alpha, pos)?;
                weighted.push(tape.mul_scalar(*t, a_i)?);
            }
            head_outputs.push(tape.add_n(&weighted)?);
        }
        let heads = tape.concat(&head_outputs)?;
        let ow = tape.param(store, "pig.att.out.w")?;
        let ob = tape.param(store, "pig.att.out.b")?;
        let embedding = tape.affine(ow, heads, ob)?;
        Ok(BiomechConstraint { embedding, attention })
    }

    /// Full forward pass; message rounds over the typed edges, per-joint
    /// scalar readout.
    pub fn forward_tape(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        graph: &GraphInstance,
        mask: Option<&[bool; N_TARGETS]>,
    ) -> Result<PigForward, ModelError> {
        graph.validate()?;
        let n = graph.nodes.len();

        // initial states
        let force = self.force_aggregate(tape, store, graph)?;
        let bio = self.biomech_constrain(tape, store, graph, mask)?;
        let diff = tape.sub(force.total, bio.embedding)?;
        let sq = tape.mul(diff, diff)?;
        let consistency = tape.sum(sq)?;
        let lf_sum = tape.add(force.total, bio.embedding)?;
        let lf_state = tape.scale(lf_sum, 0.5)?;

        let joints = self.joint_states(tape, store, graph)?;
        let tw = tape.param(store, "pig.time.w")?;
        let tb = tape.param(store, "pig.time.b")?;

        let mut states: Vec<Option<ValueId>> = vec![None; n];
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by_key(|&i| graph.nodes[i].role);
        for &i in &order {
            match graph.nodes[i].role {
                NodeRole::Joint(..) => states[i] = Some(joints[&graph.nodes[i].role].1),
                NodeRole::Time(_) => {
                    let feat = tape.leaf(Tensor::vector(graph.nodes[i].feature.clone()))?;
                    let z = tape.affine(tw, feat, tb)?;
                    states[i] = Some(tape.tanh(z)?);
                }
                NodeRole::Vibration(s) => {
                    states[i] = Some(
                        force
                            .encodings
                            .iter()
                            .find(|(k, _)| *k == s)
                            .map(|(_, v)| *v)
                            .expect("encoded above"),
                    );
                }
                NodeRole::Body => {} // feature-only node
                NodeRole::LatentForce => states[i] = Some(lf_state),
            }
        }

        // role-normalized directed message schedule, identical for every
        // isomorphic relabeling
        let mut schedule: Vec<(EdgeKind, &str, usize, usize)> = Vec::new();
        for e in &graph.edges {
            let (lo, hi) = if graph.nodes[e.src].role <= graph.nodes[e.dst].role {
                (e.src, e.dst)
            } else {
                (e.dst, e.src)
            };
            if STANDARD_KINDS.contains(&e.kind) {
                schedule.push((e.kind, "fwd", lo, hi));
                schedule.push((e.kind, "rev", hi, lo));
            } else if e.kind == EdgeKind::ForceConstraint {
                // latent force broadcasts outward to its vibration nodes
                let (lf_id, other) = if graph.nodes[lo].role == NodeRole::LatentForce {
                    (lo, hi)
                } else {
                    (hi, lo)
                };
                if matches!(graph.nodes[other].role, NodeRole::Vibration(_)) {
                    schedule.push((EdgeKind::ForceConstraint, "out", lf_id, other));
                }
            }
            // BodyDimension edges gate the biomech terms; no messages
        }
        schedule.sort_by_key(|&(kind, dir, src, dst)| {
            (kind, dir, graph.nodes[src].role, graph.nodes[dst].role)
        });

        let mut msg_params = BTreeMap::new();
        for kind in STANDARD_KINDS {
            for dir in DIRECTIONS {
                let w = tape.param(store, &format!("pig.msg.{}.{dir}.w", kind.name()))?;
                let b = tape.param(store, &format!("pig.msg.{}.{dir}.b", kind.name()))?;
                msg_params.insert((kind, dir), (w, b));
            }
        }
        let fc_w = tape.param(store, "pig.msg.force_constraint.out.w")?;
        let fc_b = tape.param(store, "pig.msg.force_constraint.out.b")?;
        msg_params.insert((EdgeKind::ForceConstraint, "out"), (fc_w, fc_b));
        let upd_w = tape.param(store, "pig.upd.w")?;
        let upd_b = tape.param(store, "pig.upd.b")?;

        for _round in 0..self.cfg.message_rounds {
            let mut inbox: Vec<Vec<ValueId>> = vec![Vec::new(); n];
            for &(kind, dir, src, dst) in &schedule {
                let src_state = match states[src] {
                    Some(s) => s,
                    None => continue, // feature-only nodes do not send
                };
                let (w, b) = msg_params[&(kind, dir)];
                let m = tape.affine(w, src_state, b)?;
                inbox[dst].push(m);
            }
            let mut next = states.clone();
            for &i in &order {
                let (Some(h), false) = (states[i], inbox[i].is_empty()) else { continue };
                // latent force keeps its physics embedding
                if graph.nodes[i].role == NodeRole::LatentForce {
                    continue;
                }
                let summed = tape.add_n(&inbox[i])?;
                let mean = tape.scale(summed, 1.0 / inbox[i].len() as f64)?;
                let own = tape.matmul(upd_w, h)?;
                let pre = tape.add(own, mean)?;
                let pre = tape.add(pre, upd_b)?;
                let delta = tape.tanh(pre)?;
                next[i] = Some(tape.add(h, delta)?);
            }
            states = next;
        }

        // per-joint scalar readout into target-slot order
        let rw = tape.param(store, "pig.read.w")?;
        let rb = tape.param(store, "pig.read.b")?;
        let mut preds = vec![None; N_TARGETS];
        for (role, (i, _)) in &joints {
            let NodeRole::Joint(joint, event) = role else { continue };
            let slot = TargetAngles::index(*joint, *event);
            let h = states[*i].expect("joint state present");
            let w_row = tape.row(rw, slot)?;
            let contrib = tape.dot(w_row, h)?;
            let bias = tape.index(rb, slot)?;
            preds[slot] = Some(tape.add(contrib, bias)?);
        }
        let preds: Vec<ValueId> = preds
            .into_iter()
            .map(|p| p.ok_or_else(|| ModelError::InvalidGraph("missing joint node".into())))
            .collect::<Result<_, _>>()?;

        Ok(PigForward { preds, consistency, attention: bio.attention })
    }

    /// Prediction values only.
    pub fn predict(
        &self,
        store: &ParamStore,
        graph: &GraphInstance,
    ) -> Result<[f64; N_TARGETS], ModelError> {
        let mut tape = Tape::new();
        let fwd = self.forward_tape(&mut tape, store, graph, None)?;
        let mut out = [0.0; N_TARGETS];
        for (k, id) in fwd.preds.iter().enumerate() {
            out[k] = tape.value(*id).as_scalar().expect("scalar prediction");
        }
        Ok(out)
    }
}

/// Training loss: mean squared error over the 12 targets plus
/// `lambda` times the physics consistency penalty.
pub fn pig_loss(
    tape: &mut Tape,
    preds: &[ValueId],
    target: &TargetAngles,
    consistency: ValueId,
    lambda: f64,
) -> Result<ValueId, ModelError> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(ModelError::InvalidConfig(format!("lambda must be >= 0, got {lambda}")));
    }
    let pred_vec = tape.stack(preds)?;
    let target_vec = tape.leaf(Tensor::vector(target.values().to_vec()))?;
    let diff = tape.sub(pred_vec, target_vec)?;
    let sq = tape.mul(diff, diff)?;
    let mse = tape.mean(sq)?;
    let pen = tape.scale(consistency, lambda)?;
    Ok(tape.add(mse, pen)?)
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;
    use crate::biomech::Joint;
    use crate::gaitsynth::{CycleEvent, Foot, GaitCycle, GaitType};
    use crate::pig::graph::{edges_for, GraphNode, TimeMark};
    use rand::Rng;

    /// Hand-assembled small graph (tiny windows) for fast model tests.
    pub fn tiny_graph(
        rng: &mut impl Rng,
        sensors: usize,
        vib_window: usize,
        valid_len: usize,
    ) -> GraphInstance {
        let mut nodes = Vec::new();
        for joint in Joint::ALL {
            for event in CycleEvent::ALL {
                let mut onehot = vec![0.0; 12];
                onehot[TargetAngles::index(joint, event)] = 1.0;
                nodes.push(GraphNode { role: NodeRole::Joint(joint, event), feature: onehot });
            }
        }
        nodes.push(GraphNode { role: NodeRole::Time(TimeMark::Strike), feature: vec![0.0, 1.1] });
        nodes.push(GraphNode { role: NodeRole::Time(TimeMark::Off), feature: vec![0.6, 1.1] });
        for s in 0..sensors {
            let mut window = vec![0.0; vib_window];
            for w in window.iter_mut().take(valid_len) {
                *w = rng.random_range(-20.0..20.0);
            }
            nodes.push(GraphNode { role: NodeRole::Vibration(s), feature: window });
        }
        nodes.push(GraphNode {
            role: NodeRole::Body,
            feature: vec![0.72, 0.42, 0.42, 0.26],
        });
        nodes.push(GraphNode { role: NodeRole::LatentForce, feature: Vec::new() });
        let edges = edges_for(&nodes);
        let mut targets = [0.0; N_TARGETS];
        for t in targets.iter_mut() {
            *t = rng.random_range(-20.0..60.0);
        }
        GraphInstance {
            nodes,
            edges,
            cycle: GaitCycle {
                start: 0.0,
                end: 1.1,
                foot_off: 0.66,
                trial_id: "tiny".into(),
                foot: Foot::Left,
            },
            gait_type: GaitType::Normal,
            subject_id: 0,
            valid_len,
            targets: Some(TargetAngles::new(targets)),
        }
    }

    pub fn tiny_cfg() -> PigConfig {
        PigConfig {
            hidden_dim: 6,
            attention_heads: 2,
            lstm_hidden: 4,
            message_rounds: 2,
            vib_window: 24,
            vib_frame: 8,
            vib_input_scale: 0.05,
            ..PigConfig::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::test_support::{tiny_cfg, tiny_graph};
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup() -> (PigModel, ParamStore, GraphInstance) {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let graph = tiny_graph(&mut rng, 4, 24, 17);
        let model = PigModel::new(tiny_cfg()).unwrap();
        let mut store = ParamStore::new(42);
        model.register(&mut store).unwrap();
        (model, store, graph)
    }

    #[test]
    fn attention_weights_sum_to_one_per_head() {
        let (model, store, graph) = setup();
        let mut tape = Tape::new();
        let bio = model.biomech_constrain(&mut tape, &store, &graph, None).unwrap();
        assert_eq!(bio.attention.len(), 2);
        for head in &bio.attention {
            assert_eq!(head.len(), 12);
            let total: f64 = head.iter().map(|(_, w)| w).sum();
            assert!((total - 1.0).abs() < 1e-9, "head sums to {total}");
            assert!(head.iter().all(|(_, w)| *w >= 0.0));
        }
    }

    #[test]
    fn masking_one_slot_removes_its_term_exactly() {
        let (model, store, graph) = setup();
        let mut mask = [true; N_TARGETS];
        mask[5] = false;
        let run = |m: Option<&[bool; N_TARGETS]>| {
            let mut tape = Tape::new();
            let bio = model.biomech_constrain(&mut tape, &store, &graph, m).unwrap();
            tape.value(bio.embedding).data().to_vec()
        };
        let masked = run(Some(&mask));
        let full = run(None);
        assert_ne!(masked, full, "masked term still contributes");

        // the masked result must be bit-identical to a softmax/sum built
        // without the term at all: masking removes it from both
        let mut tape = Tape::new();
        let bio = model.biomech_constrain(&mut tape, &store, &graph, Some(&mask)).unwrap();
        for head in &bio.attention {
            assert_eq!(head.len(), 11);
            assert!(head.iter().all(|(slot, _)| *slot != 5));
            let total: f64 = head.iter().map(|(_, w)| w).sum();
            assert!((total - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn forward_is_deterministic() {
        let (model, store, graph) = setup();
        assert_eq!(model.predict(&store, &graph).unwrap(), model.predict(&store, &graph).unwrap());
    }

    #[test]
    fn sensor_permutation_leaves_force_aggregate_unchanged() {
        let (model, store, graph) = setup();
        let mut permuted = graph.clone();
        // swap the windows carried by sensors 0 and 3
        let a = permuted.nodes.iter().position(|n| n.role == NodeRole::Vibration(0)).unwrap();
        let b = permuted.nodes.iter().position(|n| n.role == NodeRole::Vibration(3)).unwrap();
        let tmp = permuted.nodes[a].feature.clone();
        permuted.nodes[a].feature = permuted.nodes[b].feature.clone();
        permuted.nodes[b].feature = tmp;
        let run = |g: &GraphInstance| {
            let mut tape = Tape::new();
            let f = model.force_aggregate(&mut tape, &store, g).unwrap();
            tape.value(f.total).data().to_vec()
        };
        let x = run(&graph);
        let y = run(&permuted);
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn relabeled_graph_evaluates_identically() {
        let (model, store, graph) = setup();
        let n = graph.nodes.len();
        // reverse the node order and remap edges
        let perm: Vec<usize> = (0..n).rev().collect();
        let mut inverse = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inverse[old] = new;
        }
        let mut relabeled = graph.clone();
        relabeled.nodes = perm.iter().map(|&old| graph.nodes[old].clone()).collect();
        relabeled.edges = graph
            .edges
            .iter()
            .map(|e| crate::pig::graph::GraphEdge {
                src: inverse[e.src],
                dst: inverse[e.dst],
                kind: e.kind,
            })
            .collect();
        let a = model.predict(&store, &graph).unwrap();
        let b = model.predict(&store, &relabeled).unwrap();
        assert_eq!(a, b, "relabeling changed predictions");
    }

    #[test]
    fn loss_examples() {
        let (model, store, graph) = setup();
        let target = graph.targets.unwrap();
        // pred == target, zero consistency -> zero loss
        let mut tape = Tape::new();
        let preds: Vec<ValueId> =
            target.values().iter().map(|&v| tape.scalar(v).unwrap()).collect();
        let zero = tape.scalar(0.0).unwrap();
        let loss = pig_loss(&mut tape, &preds, &target, zero, 0.1).unwrap();
        assert_eq!(tape.value(loss).as_scalar().unwrap(), 0.0);
        // off by 1 degree everywhere -> MSE 1
        let mut tape = Tape::new();
        let preds: Vec<ValueId> =
            target.values().iter().map(|&v| tape.scalar(v + 1.0).unwrap()).collect();
        let zero = tape.scalar(0.0).unwrap();
        let loss = pig_loss(&mut tape, &preds, &target, zero, 0.1).unwrap();
        assert!((tape.value(loss).as_scalar().unwrap() - 1.0).abs() < 1e-12);
        // lambda 0 reduces to plain MSE even with nonzero consistency
        let mut tape = Tape::new();
        let preds: Vec<ValueId> =
            target.values().iter().map(|&v| tape.scalar(v + 2.0).unwrap()).collect();
        let cons = tape.scalar(123.0).unwrap();
        let loss = pig_loss(&mut tape, &preds, &target, cons, 0.0).unwrap();
        assert!((tape.value(loss).as_scalar().unwrap() - 4.0).abs() < 1e-12);
        let _ = (model, store);
    }

    #[test]
    fn gradient_matches_finite_differences_end_to_end() {
        use crate::gradcheck::{fd_gradient, max_rel_err, DEFAULT_FLOOR, DEFAULT_STEP};
        let (model, store, graph) = setup();
        let target = graph.targets.unwrap();
        let lambda = 0.1;
        let eval = |s: &ParamStore| -> f64 {
            let mut tape = Tape::new();
            let fwd = model.forward_tape(&mut tape, s, &graph, None).unwrap();
            let loss = pig_loss(&mut tape, &fwd.preds, &target, fwd.consistency, lambda).unwrap();
            tape.value(loss).as_scalar().unwrap()
        };
        let mut tape = Tape::new();
        let fwd = model.forward_tape(&mut tape, &store, &graph, None).unwrap();
        let loss = pig_loss(&mut tape, &fwd.preds, &target, fwd.consistency, lambda).unwrap();
        let analytic = tape.backward(loss, store.len()).unwrap();
        let fd = fd_gradient(&store, DEFAULT_STEP, eval);
        let worst = max_rel_err(&analytic, &fd, DEFAULT_FLOOR);
        assert!(worst < 1e-4, "max relative error {worst}");
    }

    #[test]
    fn rejects_bad_config() {
        assert!(PigModel::new(PigConfig { hidden_dim: 7, ..PigConfig::default() }).is_err());
        assert!(PigModel::new(PigConfig { message_rounds: 1, ..PigConfig::default() }).is_err());
    }
}
