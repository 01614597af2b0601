//! Wengert-list reverse-mode differentiation over [`ParamStore`] slices.
//!
//! The tape records every primitive applied during a forward pass; nodes
//! are created in topological order by construction (an input id must
//! exist before it can be consumed), so the backward sweep is a single
//! reverse pass that visits each node exactly once. Parameter leaves
//! remember their offset in the flat store and scatter their adjoints
//! into one gradient vector aligned with [`ParamStore::values`].
//!
//! Every node's value is checked for non-finite entries on creation so
//! a diverging forward pass fails loudly with the offending node named.

use thiserror::Error;

use super::store::{ParamStore, StoreError};
use super::tensor::{Tensor, TensorError};

#[derive(Debug, Error)]
pub enum AdError {
    #[error("non-finite value produced by tape node {node} ({op})")]
    NonFinite { node: usize, op: &'static str },
    #[error("backward output must be a scalar, node {node} is {rows}x{cols}")]
    NotScalar { node: usize, rows: usize, cols: usize },
    #[error("index {index} out of bounds for node of {len} rows")]
    IndexOutOfBounds { index: usize, len: usize },
    #[error("empty operand list for {0}")]
    EmptyOperands(&'static str),
    #[error(transparent)]
    Shape(#[from] TensorError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ValueId(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf { param_offset: Option<usize> },
    Add(ValueId, ValueId),
    Sub(ValueId, ValueId),
    Mul(ValueId, ValueId),
    MatMul(ValueId, ValueId),
    Scale(ValueId, f64),
    MulScalar(ValueId, ValueId),
    Tanh(ValueId),
    Sigmoid(ValueId),
    Sin(ValueId),
    Cos(ValueId),
    Exp(ValueId),
    LeakyRelu(ValueId, f64),
    Sum(ValueId),
    Mean(ValueId),
    Softmax(ValueId),
    Stack(Vec<ValueId>),
    Index(ValueId, usize),
    Row(ValueId, usize),
    Concat(Vec<ValueId>),
    AddN(Vec<ValueId>),
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf { .. } => "leaf",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::MatMul(..) => "matmul",
            Op::Scale(..) => "scale",
            Op::MulScalar(..) => "mul_scalar",
            Op::Tanh(..) => "tanh",
            Op::Sigmoid(..) => "sigmoid",
            Op::Sin(..) => "sin",
            Op::Cos(..) => "cos",
            Op::Exp(..) => "exp",
            Op::LeakyRelu(..) => "leaky_relu",
            Op::Sum(..) => "sum",
            Op::Mean(..) => "mean",
            Op::Softmax(..) => "softmax",
            Op::Stack(..) => "stack",
            Op::Index(..) => "index",
            Op::Row(..) => "row",
            Op::Concat(..) => "concat",
            Op::AddN(..) => "add_n",
        }
    }
}

struct Node {
    op: Op,
    value: Tensor,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: ValueId) -> &Tensor {
        &self.nodes[id.0].value
    }

    fn push(&mut self, op: Op, value: Tensor) -> Result<ValueId, AdError> {
        if !value.data().iter().all(|x| x.is_finite()) {
            return Err(AdError::NonFinite { node: self.nodes.len(), op: op.name() });
        }
        let id = ValueId(self.nodes.len());
        self.nodes.push(Node { op, value });
        Ok(id)
    }

    /// Constant leaf; receives no gradient.
    pub fn leaf(&mut self, value: Tensor) -> Result<ValueId, AdError> {
        self.push(Op::Leaf { param_offset: None }, value)
    }

    pub fn scalar(&mut self, x: f64) -> Result<ValueId, AdError> {
        self.leaf(Tensor::scalar(x))
    }

    /// Parameter leaf: copies the named slice out of the store and records
    /// its offset so `backward` can scatter the adjoint.
    pub fn param(&mut self, store: &ParamStore, name: &str) -> Result<ValueId, AdError> {
        let info = store.slice(name)?;
        let data = store.values()[info.range()].to_vec();
        let value = Tensor::from_vec(info.rows, info.cols, data)?;
        self.push(Op::Leaf { param_offset: Some(info.offset) }, value)
    }

    pub fn add(&mut self, a: ValueId, b: ValueId) -> Result<ValueId, AdError> {
        let (ta, tb) = (self.value(a), self.value(b));
        if !ta.same_shape(tb) {
            return Err(TensorError::ShapeMismatch {
                op: "add",
                ar: ta.rows(),
                ac: ta.cols(),
                br: tb.rows(),
                bc: tb.cols(),
            }
            .into());
        }
        let data = ta.data().iter().zip(tb.data()).map(|(x, y)| x + y).collect();
        let value = Tensor::from_vec(ta.rows(), ta.cols(), data)?;
        self.push(Op::Add(a, b), value)
    }

    pub fn sub(&mut self, a: ValueId, b: ValueId) -> Result<ValueId, AdError> {
        let (ta, tb) = (self.value(a), self.value(b));
        if !ta.same_shape(tb) {
            return Err(TensorError::ShapeMismatch {
                op: "sub",
                ar: ta.rows(),
                ac: ta.cols(),
                br: tb.rows(),
                bc: tb.cols(),
            }
            .into());
        }
        let data = ta.data().iter().zip(tb.data()).map(|(x, y)| x - y).collect();
        let value = Tensor::from_vec(ta.rows(), ta.cols(), data)?;
        self.push(Op::Sub(a, b), value)
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: ValueId, b: ValueId) -> Result<ValueId, AdError> {
        let (ta, tb) = (self.value(a), self.value(b));
        if !ta.same_shape(tb) {
            return Err(TensorError::ShapeMismatch {
                op: "mul",
                ar: ta.rows(),
                ac: ta.cols(),
                br: tb.rows(),
                bc: tb.cols(),
            }
            .into());
        }
        let data = ta.data().iter().zip(tb.data()).map(|(x, y)| x * y).collect();
        let value = Tensor::from_vec(ta.rows(), ta.cols(), data)?;
        self.push(Op::Mul(a, b), value)
    }

    pub fn matmul(&mut self, a: ValueId, b: ValueId) -> Result<ValueId, AdError> {
        let value = self.value(a).matmul(self.value(b))?;
        self.push(Op::MatMul(a, b), value)
    }

    pub fn scale(&mut self, a: ValueId, c: f64) -> Result<ValueId, AdError> {
        let value = self.value(a).map(|x| x * c);
        self.push(Op::Scale(a, c), value)
    }

    /// Tensor times a 1x1 tape node.
    pub fn mul_scalar(&mut self, a: ValueId, s: ValueId) -> Result<ValueId, AdError> {
        let sv = self.value(s).as_scalar().ok_or(AdError::NotScalar {
            node: s.0,
            rows: self.value(s).rows(),
            cols: self.value(s).cols(),
        })?;
        let value = self.value(a).map(|x| x * sv);
        self.push(Op::MulScalar(a, s), value)
    }

    pub fn tanh(&mut self, a: ValueId) -> Result<ValueId, AdError> {
        let value = self.value(a).map(f64::tanh);
        self.push(Op::Tanh(a), value)
    }

    pub fn sigmoid(&mut self, a: ValueId) -> Result<ValueId, AdError> {
        let value = self.value(a).map(|x| 1.0 / (1.0 + (-x).exp()));
        self.push(Op::Sigmoid(a), value)
    }

    pub fn sin(&mut self, a: ValueId) -> Result<ValueId, AdError> {
        let value = self.value(a).map(f64::sin);
        self.push(Op::Sin(a), value)
    }

    pub fn cos(&mut self, a: ValueId) -> Result<ValueId, AdError> {
        let value = self.value(a).map(f64::cos);
        self.push(Op::Cos(a), value)
    }

    pub fn exp(&mut self, a: ValueId) -> Result<ValueId, AdError> {
        let value = self.value(a).map(f64::exp);
        self.push(Op::Exp(a), value)
    }

    pub fn leaky_relu(&mut self, a: ValueId, slope: f64) -> Result<ValueId, AdError> {
        let value = self.value(a).map(|x| if x > 0.0 { x } else { slope * x });
        self.push(Op::LeakyRelu(a, slope), value)
    }

    pub fn sum(&mut self, a: ValueId) -> Result<ValueId, AdError> {
        let s = self.value(a).data().iter().sum();
        self.push(Op::Sum(a), Tensor::scalar(s))
    }

    pub fn mean(&mut self, a: ValueId) -> Result<ValueId, AdError> {
        let t = self.value(a);
        if t.is_empty() {
            return Err(AdError::EmptyOperands("mean"));
        }
        let m = t.data().iter().sum::<f64>() / t.len() as f64;
        self.push(Op::Mean(a), Tensor::scalar(m))
    }

    /// Numerically shifted softmax over a column vector.
    pub fn softmax(&mut self, a: ValueId) -> Result<ValueId, AdError> {
        let t = self.value(a);
        if t.is_empty() {
            return Err(AdError::EmptyOperands("softmax"));
        }
        let hi = t.data().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let ex: Vec<f64> = t.data().iter().map(|&x| (x - hi).exp()).collect();
        let z: f64 = ex.iter().sum();
        let value = Tensor::from_vec(t.rows(), t.cols(), ex.iter().map(|e| e / z).collect())?;
        self.push(Op::Softmax(a), value)
    }

    /// Stacks 1x1 nodes into a column vector.
    pub fn stack(&mut self, items: &[ValueId]) -> Result<ValueId, AdError> {
        if items.is_empty() {
            return Err(AdError::EmptyOperands("stack"));
        }
        let mut data = Vec::with_capacity(items.len());
        for &id in items {
            let s = self.value(id).as_scalar().ok_or(AdError::NotScalar {
                node: id.0,
                rows: self.value(id).rows(),
                cols: self.value(id).cols(),
            })?;
            data.push(s);
        }
        self.push(Op::Stack(items.to_vec()), Tensor::vector(data))
    }

    /// Extracts element `i` of a column vector as a scalar node.
    pub fn index(&mut self, a: ValueId, i: usize) -> Result<ValueId, AdError> {
        let t = self.value(a);
        if i >= t.rows() || t.cols() != 1 {
            return Err(AdError::IndexOutOfBounds { index: i, len: t.rows() });
        }
        let v = t.get(i, 0);
        self.push(Op::Index(a, i), Tensor::scalar(v))
    }

    /// Extracts row `r` of a matrix as a column vector.
    pub fn row(&mut self, a: ValueId, r: usize) -> Result<ValueId, AdError> {
        let t = self.value(a);
        if r >= t.rows() {
            return Err(AdError::IndexOutOfBounds { index: r, len: t.rows() });
        }
        let data: Vec<f64> = (0..t.cols()).map(|c| t.get(r, c)).collect();
        self.push(Op::Row(a, r), Tensor::vector(data))
    }

    /// Concatenates column vectors.
    pub fn concat(&mut self, items: &[ValueId]) -> Result<ValueId, AdError> {
        if items.is_empty() {
            return Err(AdError::EmptyOperands("concat"));
        }
        let mut data = Vec::new();
        for &id in items {
            let t = self.value(id);
            if t.cols() != 1 {
                return Err(TensorError::ShapeMismatch {
                    op: "concat",
                    ar: t.rows(),
                    ac: t.cols(),
                    br: 0,
                    bc: 1,
                }
                .into());
            }
            data.extend_from_slice(t.data());
        }
        self.push(Op::Concat(items.to_vec()), Tensor::vector(data))
    }

    /// Sum of same-shaped tensors.
    pub fn add_n(&mut self, items: &[ValueId]) -> Result<ValueId, AdError> {
        if items.is_empty() {
            return Err(AdError::EmptyOperands("add_n"));
        }
        let first = self.value(items[0]).clone();
        let mut data = first.data().to_vec();
        for &id in &items[1..] {
            let t = self.value(id);
            if !t.same_shape(&first) {
                return Err(TensorError::ShapeMismatch {
                    op: "add_n",
                    ar: first.rows(),
                    ac: first.cols(),
                    br: t.rows(),
                    bc: t.cols(),
                }
                .into());
            }
            for (d, x) in data.iter_mut().zip(t.data()) {
                *d += x;
            }
        }
        let value = Tensor::from_vec(first.rows(), first.cols(), data)?;
        self.push(Op::AddN(items.to_vec()), value)
    }

    /// W*x + b.
    pub fn affine(&mut self, w: ValueId, x: ValueId, b: ValueId) -> Result<ValueId, AdError> {
        let wx = self.matmul(w, x)?;
        self.add(wx, b)
    }

    /// sum(a .* b), the inner product of two column vectors.
    pub fn dot(&mut self, a: ValueId, b: ValueId) -> Result<ValueId, AdError> {
        let p = self.mul(a, b)?;
        self.sum(p)
    }

    /// Reverse sweep from a scalar output. Returns d(output)/d(store values)
    /// as a flat vector of length `param_len`.
    pub fn backward(&self, output: ValueId, param_len: usize) -> Result<Vec<f64>, AdError> {
        let out = &self.nodes[output.0];
        if out.value.as_scalar().is_none() {
            return Err(AdError::NotScalar {
                node: output.0,
                rows: out.value.rows(),
                cols: out.value.cols(),
            });
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[output.0] = Some(Tensor::scalar(1.0));
        let mut param_grad = vec![0.0; param_len];

        for i in (0..=output.0).rev() {
            let g = match grads[i].take() {
                Some(g) => g,
                None => continue,
            };
            let node = &self.nodes[i];
            match &node.op {
                Op::Leaf { param_offset } => {
                    if let Some(off) = param_offset {
                        for (dst, src) in param_grad[*off..*off + g.len()].iter_mut().zip(g.data())
                        {
                            *dst += src;
                        }
                    }
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, &g);
                    accumulate(&mut grads, *b, &g);
                }
                Op::Sub(a, b) => {
                    accumulate(&mut grads, *a, &g);
                    let neg = g.map(|x| -x);
                    accumulate(&mut grads, *b, &neg);
                }
                Op::Mul(a, b) => {
                    let ga = hadamard(&g, &self.nodes[b.0].value);
                    let gb = hadamard(&g, &self.nodes[a.0].value);
                    accumulate(&mut grads, *a, &ga);
                    accumulate(&mut grads, *b, &gb);
                }
                Op::MatMul(a, b) => {
                    // d/dA (A B) = G B^T ; d/dB = A^T G
                    let ga = g.matmul_t(&self.nodes[b.0].value)?;
                    let gb = self.nodes[a.0].value.t_matmul(&g)?;
                    accumulate(&mut grads, *a, &ga);
                    accumulate(&mut grads, *b, &gb);
                }
                Op::Scale(a, c) => {
                    let ga = g.map(|x| x * c);
                    accumulate(&mut grads, *a, &ga);
                }
                Op::MulScalar(a, s) => {
                    let sv = self.nodes[s.0].value.as_scalar().expect("checked at build");
                    let ga = g.map(|x| x * sv);
                    let gs: f64 = g
                        .data()
                        .iter()
                        .zip(self.nodes[a.0].value.data())
                        .map(|(x, y)| x * y)
                        .sum();
                    accumulate(&mut grads, *a, &ga);
                    accumulate(&mut grads, *s, &Tensor::scalar(gs));
                }
                Op::Tanh(a) => {
                    let ga = zip_map(&g, &node.value, |gi, y| gi * (1.0 - y * y));
                    accumulate(&mut grads, *a, &ga);
                }
                Op::Sigmoid(a) => {
                    let ga = zip_map(&g, &node.value, |gi, y| gi * y * (1.0 - y));
                    accumulate(&mut grads, *a, &ga);
                }
                Op::Sin(a) => {
                    let ga = zip_map(&g, &self.nodes[a.0].value, |gi, x| gi * x.cos());
                    accumulate(&mut grads, *a, &ga);
                }
                Op::Cos(a) => {
                    let ga = zip_map(&g, &self.nodes[a.0].value, |gi, x| -gi * x.sin());
                    accumulate(&mut grads, *a, &ga);
                }
                Op::Exp(a) => {
                    let ga = zip_map(&g, &node.value, |gi, y| gi * y);
                    accumulate(&mut grads, *a, &ga);
                }
                Op::LeakyRelu(a, slope) => {
                    let ga = zip_map(&g, &self.nodes[a.0].value, |gi, x| {
                        if x > 0.0 {
                            gi
                        } else {
                            gi * slope
                        }
                    });
                    accumulate(&mut grads, *a, &ga);
                }
                Op::Sum(a) => {
                    let gs = g.as_scalar().expect("sum output is scalar");
                    let src = &self.nodes[a.0].value;
                    let ga = src.map(|_| gs);
                    accumulate(&mut grads, *a, &ga);
                }
                Op::Mean(a) => {
                    let src = &self.nodes[a.0].value;
                    let gs = g.as_scalar().expect("mean output is scalar") / src.len() as f64;
                    let ga = src.map(|_| gs);
                    accumulate(&mut grads, *a, &ga);
                }
                Op::Softmax(a) => {
                    // dx = y .* (g - <g, y>)
                    let y = &node.value;
                    let gy: f64 = g.data().iter().zip(y.data()).map(|(gi, yi)| gi * yi).sum();
                    let ga = zip_map(&g, y, |gi, yi| yi * (gi - gy));
                    accumulate(&mut grads, *a, &ga);
                }
                Op::Stack(items) => {
                    for (k, &id) in items.iter().enumerate() {
                        accumulate(&mut grads, id, &Tensor::scalar(g.data()[k]));
                    }
                }
                Op::Index(a, idx) => {
                    let src = &self.nodes[a.0].value;
                    let mut ga = Tensor::zeros(src.rows(), src.cols());
                    ga.data_mut()[*idx] = g.as_scalar().expect("index output is scalar");
                    accumulate(&mut grads, *a, &ga);
                }
                Op::Row(a, r) => {
                    let src = &self.nodes[a.0].value;
                    let mut ga = Tensor::zeros(src.rows(), src.cols());
                    let cols = src.cols();
                    ga.data_mut()[r * cols..(r + 1) * cols].copy_from_slice(g.data());
                    accumulate(&mut grads, *a, &ga);
                }
                Op::Concat(items) => {
                    let mut off = 0;
                    for &id in items {
                        let n = self.nodes[id.0].value.len();
                        let part = Tensor::vector(g.data()[off..off + n].to_vec());
                        accumulate(&mut grads, id, &part);
                        off += n;
                    }
                }
                Op::AddN(items) => {
                    for &id in items {
                        accumulate(&mut grads, id, &g);
                    }
                }
            }
        }
        Ok(param_grad)
    }
}

fn accumulate(grads: &mut [Option<Tensor>], id: ValueId, g: &Tensor) {
    match &mut grads[id.0] {
        Some(existing) => {
            for (d, s) in existing.data_mut().iter_mut().zip(g.data()) {
                *d += s;
            }
        }
        slot @ None => *slot = Some(g.clone()),
    }
}

fn hadamard(a: &Tensor, b: &Tensor) -> Tensor {
    zip_map(a, b, |x, y| x * y)
}

fn zip_map(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Tensor::from_vec(a.rows(), a.cols(), data).expect("shapes checked by caller")
}

/// Gradient of a scalar objective with respect to every store value.
///
/// The objective must be expressed through tape primitives; it receives a
/// fresh tape and returns the id of its scalar output.
pub fn grad<F>(store: &ParamStore, objective: F) -> Result<Vec<f64>, AdError>
where
    F: FnOnce(&mut Tape, &ParamStore) -> Result<ValueId, AdError>,
{
    let mut tape = Tape::new();
    let out = objective(&mut tape, store)?;
    tape.backward(out, store.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ad::store::Init;

    fn store_with(name: &str, vals: &[f64]) -> ParamStore {
        let mut s = ParamStore::new(0);
        s.register(name, vals.len(), 1, Init::Zeros).unwrap();
        s.get_mut(name).unwrap().copy_from_slice(vals);
        s
    }

    #[test]
    fn square_gradient() {
        // f(x) = x*x at x=3 -> df/dx = 6
        let s = store_with("x", &[3.0]);
        let g = grad(&s, |t, s| {
            let x = t.param(s, "x")?;
            let y = t.mul(x, x)?;
            t.sum(y)
        })
        .unwrap();
        assert_eq!(g, vec![6.0]);
    }

    #[test]
    fn sin_gradient_at_zero() {
        // f(x) = sin(x) at x=0 -> df/dx = 1
        let s = store_with("x", &[0.0]);
        let g = grad(&s, |t, s| {
            let x = t.param(s, "x")?;
            let y = t.sin(x)?;
            t.sum(y)
        })
        .unwrap();
        assert_eq!(g, vec![1.0]);
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::vector(vec![1.0, -0.5, 2.0, 0.0])).unwrap();
        let y = t.softmax(x).unwrap();
        let s: f64 = t.value(y).data().iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn non_finite_forward_names_node() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::scalar(800.0)).unwrap();
        let e = t.exp(x); // overflows to +inf
        match e {
            Err(AdError::NonFinite { op, .. }) => assert_eq!(op, "exp"),
            other => panic!("expected NonFinite, got {other:?}"),
        }
    }

    #[test]
    fn backward_requires_scalar_output() {
        let s = store_with("x", &[1.0, 2.0]);
        let mut t = Tape::new();
        let x = t.param(&s, "x").unwrap();
        assert!(matches!(t.backward(x, s.len()), Err(AdError::NotScalar { .. })));
    }

    #[test]
    fn matmul_chain_matches_hand_derivative() {
        // f = sum(W * x), dW = 1 * x^T broadcast, dx = W^T * 1
        let mut s = ParamStore::new(0);
        s.register("w", 2, 2, Init::Zeros).unwrap();
        s.register("x", 2, 1, Init::Zeros).unwrap();
        s.get_mut("w").unwrap().copy_from_slice(&[1.0, 2.0, 3.0, 4.0]);
        s.get_mut("x").unwrap().copy_from_slice(&[5.0, 6.0]);
        let g = grad(&s, |t, s| {
            let w = t.param(s, "w")?;
            let x = t.param(s, "x")?;
            let y = t.matmul(w, x)?;
            t.sum(y)
        })
        .unwrap();
        assert_eq!(&g[0..4], &[5.0, 6.0, 5.0, 6.0]); // dW rows are x^T
        assert_eq!(&g[4..6], &[4.0, 6.0]); // dx = col sums of W
    }

    #[test]
    fn central_difference_agreement_on_random_tanh_net() {
        // 2-layer tanh network, 37 params: W1 (5x4)=20, b1 5, W2 (2x5)=10, b2 2.
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1234);
        let mut s = ParamStore::new(42);
        s.register("w1", 5, 4, Init::ScaledNormal).unwrap();
        s.register("b1", 5, 1, Init::Normal(0.2)).unwrap();
        s.register("w2", 2, 5, Init::ScaledNormal).unwrap();
        s.register("b2", 2, 1, Init::Normal(0.2)).unwrap();
        assert_eq!(s.len(), 37);
        let input: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();

        let f = |store: &ParamStore| -> f64 {
            let mut t = Tape::new();
            let out = (|| -> Result<ValueId, AdError> {
                let x = t.leaf(Tensor::vector(input.clone()))?;
                let w1 = t.param(store, "w1")?;
                let b1 = t.param(store, "b1")?;
                let h = t.affine(w1, x, b1)?;
                let h = t.tanh(h)?;
                let w2 = t.param(store, "w2")?;
                let b2 = t.param(store, "b2")?;
                let o = t.affine(w2, h, b2)?;
                let sq = t.mul(o, o)?;
                t.sum(sq)
            })()
            .unwrap();
            t.value(out).as_scalar().unwrap()
        };

        let analytic = grad(&s, |t, store| {
            let x = t.leaf(Tensor::vector(input.clone()))?;
            let w1 = t.param(store, "w1")?;
            let b1 = t.param(store, "b1")?;
            let h = t.affine(w1, x, b1)?;
            let h = t.tanh(h)?;
            let w2 = t.param(store, "w2")?;
            let b2 = t.param(store, "b2")?;
            let o = t.affine(w2, h, b2)?;
            let sq = t.mul(o, o)?;
            t.sum(sq)
        })
        .unwrap();

        let h = 1e-5;
        let mut worst = 0.0f64;
        for i in 0..s.len() {
            let mut sp = s.clone();
            sp.values_mut()[i] += h;
            let mut sm = s.clone();
            sm.values_mut()[i] -= h;
            let fd = (f(&sp) - f(&sm)) / (2.0 * h);
            let denom = analytic[i].abs().max(fd.abs()).max(1e-6);
            worst = worst.max((analytic[i] - fd).abs() / denom);
        }
        assert!(worst < 1e-4, "max relative error {worst}");
    }
}
