//! Recurrent sequence encoders on the tape: the structure property
//! learner inside the graph model and the standalone baseline regressor.
//!
//! Standard LSTM cell, gates in i/f/g/o order, forget bias starting at 1.
//! Signals are consumed as fixed-size frames so a cycle window of ~600
//! samples becomes a few dozen recurrent steps; framing only reshapes the
//! sequence, every raw sample still enters the cell.

use crate::ad::{AdError, Init, ParamStore, StoreError, Tape, Tensor, ValueId};
use crate::gaitsynth::N_TARGETS;
use crate::pig::graph::{GraphInstance, NodeRole};
use crate::pig::ModelError;

const GATES: [&str; 4] = ["i", "f", "g", "o"];

/// One LSTM parameter set; `prefix` namespaces its slices in the store.
#[derive(Debug, Clone)]
pub struct LstmSpec {
    pub prefix: String,
    pub input_dim: usize,
    pub hidden: usize,
}

impl LstmSpec {
    pub fn new(prefix: impl Into<String>, input_dim: usize, hidden: usize) -> Self {
        LstmSpec { prefix: prefix.into(), input_dim, hidden }
    }

    pub fn register(&self, store: &mut ParamStore) -> Result<(), StoreError> {
        for gate in GATES {
            store.register(
                &format!("{}.wx_{gate}", self.prefix),
                self.hidden,
                self.input_dim,
                Init::ScaledNormal,
            )?;
            store.register(
                &format!("{}.wh_{gate}", self.prefix),
                self.hidden,
                self.hidden,
                Init::ScaledNormal,
            )?;
            let bias = if gate == "f" { Init::Const(1.0) } else { Init::Zeros };
            store.register(&format!("{}.b_{gate}", self.prefix), self.hidden, 1, bias)?;
        }
        Ok(())
    }

    /// Runs the cell over `frames` and returns the final hidden state.
    pub fn encode(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        frames: &[Vec<f64>],
    ) -> Result<ValueId, AdError> {
        let p = |g: &str, part: &str| format!("{}.{part}_{g}", self.prefix);
        let wx: Vec<ValueId> =
            GATES.iter().map(|g| tape.param(store, &p(g, "wx"))).collect::<Result<_, _>>()?;
        let wh: Vec<ValueId> =
            GATES.iter().map(|g| tape.param(store, &p(g, "wh"))).collect::<Result<_, _>>()?;
        let b: Vec<ValueId> =
            GATES.iter().map(|g| tape.param(store, &p(g, "b"))).collect::<Result<_, _>>()?;

        let mut h = tape.leaf(Tensor::zeros(self.hidden, 1))?;
        let mut c = tape.leaf(Tensor::zeros(self.hidden, 1))?;
        for frame in frames {
            let x = tape.leaf(Tensor::vector(frame.clone()))?;
            let mut pre = Vec::with_capacity(4);
            for k in 0..4 {
                let xw = tape.matmul(wx[k], x)?;
                let hw = tape.matmul(wh[k], h)?;
                let s = tape.add(xw, hw)?;
                pre.push(tape.add(s, b[k])?);
            }
            let i = tape.sigmoid(pre[0])?;
            let f = tape.sigmoid(pre[1])?;
            let g = tape.tanh(pre[2])?;
            let o = tape.sigmoid(pre[3])?;
            let keep = tape.mul(f, c)?;
            let write = tape.mul(i, g)?;
            c = tape.add(keep, write)?;
            let ct = tape.tanh(c)?;
            h = tape.mul(o, ct)?;
        }
        Ok(h)
    }
}

/// Splits one scaled signal window into frame vectors, dropping frames
/// past the valid length.
pub fn frame_signal(window: &[f64], valid_len: usize, frame: usize, scale: f64) -> Vec<Vec<f64>> {
    let steps = valid_len.max(1).div_ceil(frame);
    (0..steps)
        .map(|t| {
            (0..frame)
                .map(|k| window.get(t * frame + k).copied().unwrap_or(0.0) * scale)
                .collect()
        })
        .collect()
}

/// Baseline: the four sensor windows concatenated channel-wise per frame,
/// one LSTM, final hidden state through an affine head to the 12 angles.
#[derive(Debug, Clone)]
pub struct BaselineConfig {
    pub hidden: usize,
    pub vib_window: usize,
    pub vib_frame: usize,
    pub vib_input_scale: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub patience: usize,
    pub seed: u64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            hidden: 32,
            vib_window: 1024,
            vib_frame: 16,
            vib_input_scale: 0.04,
            learning_rate: 3e-3,
            epochs: 40,
            batch_size: 32,
            patience: 10,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BaselineLstm {
    pub cfg: BaselineConfig,
    sensors: usize,
}

impl BaselineLstm {
    pub fn new(cfg: BaselineConfig, sensors: usize) -> Self {
        BaselineLstm { cfg, sensors }
    }

    fn spec(&self) -> LstmSpec {
        LstmSpec::new("lstm.enc", self.sensors * self.cfg.vib_frame, self.cfg.hidden)
    }

    pub fn register(&self, store: &mut ParamStore) -> Result<(), StoreError> {
        self.spec().register(store)?;
        store.register("lstm.head.w", N_TARGETS, self.cfg.hidden, Init::ScaledNormal)?;
        store.register("lstm.head.b", N_TARGETS, 1, Init::Zeros)?;
        Ok(())
    }

    /// Multichannel frames: per time frame, the per-sensor frames
    /// concatenated in sensor order.
    pub fn frames(&self, graph: &GraphInstance) -> Result<Vec<Vec<f64>>, ModelError> {
        let mut windows = Vec::new();
        for s in 0..self.sensors {
            let idx = graph
                .node_by_role(NodeRole::Vibration(s))
                .ok_or_else(|| ModelError::InvalidGraph(format!("missing sensor node {s}")))?;
            let w = &graph.nodes[idx].feature;
            if w.len() != self.cfg.vib_window {
                return Err(ModelError::WindowLength {
                    needed: w.len(),
                    configured: self.cfg.vib_window,
                });
            }
            windows.push(frame_signal(
                w,
                graph.valid_len,
                self.cfg.vib_frame,
                self.cfg.vib_input_scale,
            ));
        }
        let steps = windows[0].len();
        Ok((0..steps)
            .map(|t| windows.iter().flat_map(|w| w[t].iter().copied()).collect())
            .collect())
    }

    /// Tape forward pass: returns the 12 prediction node ids.
    pub fn forward_tape(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        graph: &GraphInstance,
    ) -> Result<Vec<ValueId>, ModelError> {
        let frames = self.frames(graph)?;
        let h = self.spec().encode(tape, store, &frames)?;
        let w = tape.param(store, "lstm.head.w")?;
        let b = tape.param(store, "lstm.head.b")?;
        let out = tape.affine(w, h, b)?;
        Ok((0..N_TARGETS).map(|k| tape.index(out, k)).collect::<Result<_, _>>()?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn framing_covers_every_valid_sample() {
        let window: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let frames = frame_signal(&window, 70, 16, 1.0);
        assert_eq!(frames.len(), 5); // ceil(70/16)
        assert_eq!(frames[0][0], 0.0);
        assert_eq!(frames[4][5], 69.0);
        let flat: Vec<f64> = frames.iter().flatten().copied().collect();
        for (i, &want) in window[..70].iter().enumerate() {
            assert_eq!(flat[i], want);
        }
    }

    #[test]
    fn encoder_is_deterministic() {
        let mut store = ParamStore::new(3);
        let spec = LstmSpec::new("t", 4, 6);
        spec.register(&mut store).unwrap();
        let frames = vec![vec![0.1, -0.2, 0.3, 0.0], vec![0.5, 0.5, -0.5, 0.1]];
        let run = || {
            let mut tape = Tape::new();
            let h = spec.encode(&mut tape, &store, &frames).unwrap();
            tape.value(h).data().to_vec()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn zero_input_gives_input_independent_state() {
        let mut store = ParamStore::new(9);
        let spec = LstmSpec::new("t", 3, 5);
        spec.register(&mut store).unwrap();
        let z1 = vec![vec![0.0; 3]; 7];
        let z2 = vec![vec![0.0; 3]; 7];
        let enc = |frames: &[Vec<f64>]| {
            let mut tape = Tape::new();
            let h = spec.encode(&mut tape, &store, frames).unwrap();
            tape.value(h).data().to_vec()
        };
        assert_eq!(enc(&z1), enc(&z2));
    }
}
