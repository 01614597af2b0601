//! Heterogeneous graph construction for one gait cycle.
//!
//! 20 nodes for the default four-sensor rig: 12 joint nodes (3 joints x
//! 4 cycle events), 2 time nodes (foot strike, foot off), one vibration
//! node per sensor, 1 body node, and 1 latent force node that both
//! physics paths write into. Six edge families wire them:
//!
//!   Spatial          hip-knee, knee-ankle within each event column
//!   Temporal         event chain within each joint
//!   Indirect         every vibration node to every joint node
//!   TimeConstraint   strike node to strike/loading joints, off node to
//!                    off/mid-swing joints
//!   BodyDimension    body node to every joint node
//!   ForceConstraint  body-latent force, latent force-each vibration node
//!
//! Nodes are addressed by role, not by list position, so isomorphic
//! relabelings evaluate identically.

use crate::biomech::Joint;
use crate::gaitsynth::{CycleEvent, GaitCycle, GaitType, TargetAngles, TrialRecord};
use crate::pig::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NodeKind {
    Hip,
    Knee,
    Ankle,
    Time,
    Vibration,
    Body,
    LatentForce,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EdgeKind {
    Spatial,
    Temporal,
    Indirect,
    TimeConstraint,
    BodyDimension,
    ForceConstraint,
}

impl EdgeKind {
    pub const ALL: [EdgeKind; 6] = [
        EdgeKind::Spatial,
        EdgeKind::Temporal,
        EdgeKind::Indirect,
        EdgeKind::TimeConstraint,
        EdgeKind::BodyDimension,
        EdgeKind::ForceConstraint,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            EdgeKind::Spatial => "spatial",
            EdgeKind::Temporal => "temporal",
            EdgeKind::Indirect => "indirect",
            EdgeKind::TimeConstraint => "time_constraint",
            EdgeKind::BodyDimension => "body_dimension",
            EdgeKind::ForceConstraint => "force_constraint",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TimeMark {
    Strike,
    Off,
}

/// Stable identity of a node; ordering defines the canonical evaluation
/// order everywhere in the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NodeRole {
    Joint(Joint, CycleEvent),
    Time(TimeMark),
    Vibration(usize),
    Body,
    LatentForce,
}

impl NodeRole {
    pub fn kind(&self) -> NodeKind {
        match self {
            NodeRole::Joint(Joint::Hip, _) => NodeKind::Hip,
            NodeRole::Joint(Joint::Knee, _) => NodeKind::Knee,
            NodeRole::Joint(Joint::Ankle, _) => NodeKind::Ankle,
            NodeRole::Time(_) => NodeKind::Time,
            NodeRole::Vibration(_) => NodeKind::Vibration,
            NodeRole::Body => NodeKind::Body,
            NodeRole::LatentForce => NodeKind::LatentForce,
        }
    }

    pub fn is_joint(&self) -> bool {
        matches!(self, NodeRole::Joint(..))
    }
}

#[derive(Debug, Clone)]
pub struct GraphNode {
    pub role: NodeRole,
    pub feature: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GraphEdge {
    pub src: usize,
    pub dst: usize,
    pub kind: EdgeKind,
}

#[derive(Debug, Clone)]
pub struct GraphInstance {
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<GraphEdge>,
    pub cycle: GaitCycle,
    pub gait_type: GaitType,
    pub subject_id: u32,
    /// Un-padded sample count of the vibration windows.
    pub valid_len: usize,
    /// Present for training and evaluation graphs.
    pub targets: Option<TargetAngles>,
}

impl GraphInstance {
    pub fn node_by_role(&self, role: NodeRole) -> Option<usize> {
        self.nodes.iter().position(|n| n.role == role)
    }

    pub fn sensor_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n.role, NodeRole::Vibration(_))).count()
    }

    /// Drops every edge of one family; used by the routing audit.
    pub fn without_edge_kind(&self, kind: EdgeKind) -> GraphInstance {
        let mut g = self.clone();
        g.edges.retain(|e| e.kind != kind);
        g
    }

    /// Structural invariants: role-legal endpoints for every family and a
    /// connected graph.
    pub fn validate(&self) -> Result<(), ModelError> {
        for e in &self.edges {
            let (a, b) = (&self.nodes[e.src].role, &self.nodes[e.dst].role);
            let ok = match e.kind {
                EdgeKind::Spatial => matches!(
                    (a, b),
                    (NodeRole::Joint(j1, e1), NodeRole::Joint(j2, e2)) if e1 == e2 && j1 != j2
                ),
                EdgeKind::Temporal => matches!(
                    (a, b),
                    (NodeRole::Joint(j1, e1), NodeRole::Joint(j2, e2)) if j1 == j2 && e1 != e2
                ),
                EdgeKind::Indirect => matches!(
                    (a, b),
                    (NodeRole::Joint(..), NodeRole::Vibration(_))
                        | (NodeRole::Vibration(_), NodeRole::Joint(..))
                ),
                EdgeKind::TimeConstraint => matches!(
                    (a, b),
                    (NodeRole::Time(_), NodeRole::Joint(..))
                        | (NodeRole::Joint(..), NodeRole::Time(_))
                ),
                EdgeKind::BodyDimension => matches!(
                    (a, b),
                    (NodeRole::Body, NodeRole::Joint(..)) | (NodeRole::Joint(..), NodeRole::Body)
                ),
                EdgeKind::ForceConstraint => matches!(
                    (a, b),
                    (NodeRole::Body, NodeRole::LatentForce)
                        | (NodeRole::LatentForce, NodeRole::Body)
                        | (NodeRole::LatentForce, NodeRole::Vibration(_))
                        | (NodeRole::Vibration(_), NodeRole::LatentForce)
                ),
            };
            if !ok {
                return Err(ModelError::InvalidGraph(format!(
                    "{:?} edge between {a:?} and {b:?}",
                    e.kind
                )));
            }
        }
        // connectivity
        let n = self.nodes.len();
        let mut adj = vec![Vec::new(); n];
        for e in &self.edges {
            adj[e.src].push(e.dst);
            adj[e.dst].push(e.src);
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        if !seen.iter().all(|&s| s) {
            return Err(ModelError::InvalidGraph("graph is not connected".into()));
        }
        Ok(())
    }
}

/// Builds the physics-informed graph for one cycle of a trial.
///
/// Vibration node features are the raw per-sensor window over the cycle,
/// zero-padded to `vib_window`; body features are [mass/100, thigh, shank,
/// foot lengths]; time features are [event time normalized by cycle
/// length, cycle duration].
pub fn build_graph(
    trial: &TrialRecord,
    cycle: &GaitCycle,
    vib_window: usize,
) -> Result<GraphInstance, ModelError> {
    if cycle.trial_id != trial.trial_id {
        return Err(ModelError::CycleMismatch {
            cycle: cycle.trial_id.clone(),
            trial: trial.trial_id.clone(),
        });
    }
    let rate = trial.vibration.sample_rate;
    let start = (cycle.start * rate).floor() as usize;
    let end = ((cycle.end * rate).ceil() as usize).min(trial.vibration.len());
    if start >= end {
        return Err(ModelError::InvalidGraph(format!(
            "cycle [{}, {}] outside the vibration record",
            cycle.start, cycle.end
        )));
    }
    let valid_len = end - start;
    if valid_len > vib_window {
        return Err(ModelError::WindowLength { needed: valid_len, configured: vib_window });
    }

    let mut nodes = Vec::with_capacity(20);
    for joint in Joint::ALL {
        for event in CycleEvent::ALL {
            let mut onehot = vec![0.0; 12];
            onehot[TargetAngles::index(joint, event)] = 1.0;
            nodes.push(GraphNode { role: NodeRole::Joint(joint, event), feature: onehot });
        }
    }
    let duration = cycle.duration();
    nodes.push(GraphNode {
        role: NodeRole::Time(TimeMark::Strike),
        feature: vec![0.0, duration],
    });
    nodes.push(GraphNode {
        role: NodeRole::Time(TimeMark::Off),
        feature: vec![cycle.stance_fraction(), duration],
    });
    for (s, ch) in trial.vibration.signals.iter().enumerate() {
        let mut window = vec![0.0; vib_window];
        window[..valid_len].copy_from_slice(&ch[start..end]);
        nodes.push(GraphNode { role: NodeRole::Vibration(s), feature: window });
    }
    let a = &trial.anthropometry;
    nodes.push(GraphNode {
        role: NodeRole::Body,
        feature: vec![a.body_mass / 100.0, a.thigh_length, a.shank_length, a.foot_length],
    });
    nodes.push(GraphNode { role: NodeRole::LatentForce, feature: Vec::new() });

    let edges = edges_for(&nodes);

    let graph = GraphInstance {
        nodes,
        edges,
        cycle: cycle.clone(),
        gait_type: trial.gait_type,
        subject_id: trial.subject_id,
        valid_len,
        targets: None,
    };
    graph.validate()?;
    Ok(graph)
}

/// Instantiates all six edge families over a node list that carries the
/// standard roles (12 joints, 2 time marks, sensors, body, latent force).
pub fn edges_for(nodes: &[GraphNode]) -> Vec<GraphEdge> {
    let idx = |role: NodeRole| nodes.iter().position(|n| n.role == role).expect("role present");
    let sensors = nodes.iter().filter(|n| matches!(n.role, NodeRole::Vibration(_))).count();
    let mut edges = Vec::new();
    // Spatial: physiological chain within each event column
    for event in CycleEvent::ALL {
        for pair in [(Joint::Hip, Joint::Knee), (Joint::Knee, Joint::Ankle)] {
            edges.push(GraphEdge {
                src: idx(NodeRole::Joint(pair.0, event)),
                dst: idx(NodeRole::Joint(pair.1, event)),
                kind: EdgeKind::Spatial,
            });
        }
    }
    // Temporal: motion sequence within each joint
    for joint in Joint::ALL {
        for pair in CycleEvent::ALL.windows(2) {
            edges.push(GraphEdge {
                src: idx(NodeRole::Joint(joint, pair[0])),
                dst: idx(NodeRole::Joint(joint, pair[1])),
                kind: EdgeKind::Temporal,
            });
        }
    }
    // Indirect: complete bipartite joints x sensors
    for joint in Joint::ALL {
        for event in CycleEvent::ALL {
            for s in 0..sensors {
                edges.push(GraphEdge {
                    src: idx(NodeRole::Joint(joint, event)),
                    dst: idx(NodeRole::Vibration(s)),
                    kind: EdgeKind::Indirect,
                });
            }
        }
    }
    // TimeConstraint: strike gates the contact-side events, off the rest
    for joint in Joint::ALL {
        for (mark, events) in [
            (TimeMark::Strike, [CycleEvent::FootStrike, CycleEvent::LoadingResponse]),
            (TimeMark::Off, [CycleEvent::FootOff, CycleEvent::MidSwing]),
        ] {
            for event in events {
                edges.push(GraphEdge {
                    src: idx(NodeRole::Time(mark)),
                    dst: idx(NodeRole::Joint(joint, event)),
                    kind: EdgeKind::TimeConstraint,
                });
            }
        }
    }
    // BodyDimension: body to every joint
    for joint in Joint::ALL {
        for event in CycleEvent::ALL {
            edges.push(GraphEdge {
                src: idx(NodeRole::Body),
                dst: idx(NodeRole::Joint(joint, event)),
                kind: EdgeKind::BodyDimension,
            });
        }
    }
    // ForceConstraint: body - latent force - vibration
    edges.push(GraphEdge {
        src: idx(NodeRole::Body),
        dst: idx(NodeRole::LatentForce),
        kind: EdgeKind::ForceConstraint,
    });
    for s in 0..sensors {
        edges.push(GraphEdge {
            src: idx(NodeRole::LatentForce),
            dst: idx(NodeRole::Vibration(s)),
            kind: EdgeKind::ForceConstraint,
        });
    }
    edges
}

/// Builds the graph and attaches the ground-truth targets extracted from
/// the cycle's own foot trajectory.
pub fn build_training_graph(
    trial: &TrialRecord,
    cycle: &GaitCycle,
    vib_window: usize,
) -> Result<GraphInstance, ModelError> {
    let mut g = build_graph(trial, cycle, vib_window)?;
    let traj = trial.trajectory(cycle.foot);
    let targets = crate::gaitsynth::extract_targets(traj, cycle)
        .map_err(|e| ModelError::InvalidGraph(e.to_string()))?;
    g.targets = Some(targets);
    Ok(g)
}
