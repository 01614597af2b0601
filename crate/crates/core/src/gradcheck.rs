//! Finite-difference gradient verification.
//!
//! The tape gradient is checked against a five-point central-difference
//! stencil: truncation error is O(h^4), so the step can stay large enough
//! (default 3e-4) that f64 roundoff on the objective does not drown
//! small-magnitude coordinates. Relative error uses the usual floored
//! denominator; coordinates below the floor are compared absolutely
//! against it.

use crate::ad::ParamStore;

pub const DEFAULT_STEP: f64 = 3e-4;
/// Gradient magnitudes below this are indistinguishable from zero at the
/// objective scales used in the oracles.
pub const DEFAULT_FLOOR: f64 = 1e-4;

/// Fourth-order central differences of a scalar objective with respect to
/// every store value.
pub fn fd_gradient(store: &ParamStore, h: f64, mut f: impl FnMut(&ParamStore) -> f64) -> Vec<f64> {
    let mut grad = vec![0.0; store.len()];
    let mut work = store.clone();
    for i in 0..store.len() {
        let x0 = store.values()[i];
        let mut eval = |x: f64| {
            work.values_mut()[i] = x;
            f(&work)
        };
        let fp2 = eval(x0 + 2.0 * h);
        let fp1 = eval(x0 + h);
        let fm1 = eval(x0 - h);
        let fm2 = eval(x0 - 2.0 * h);
        work.values_mut()[i] = x0;
        grad[i] = (-fp2 + 8.0 * fp1 - 8.0 * fm1 + fm2) / (12.0 * h);
    }
    grad
}

/// max_i |a_i - b_i| / max(|a_i|, |b_i|, floor)
pub fn max_rel_err(a: &[f64], b: &[f64], floor: f64) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(floor))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ad::{grad, Init, Tape};

    #[test]
    fn fd_matches_analytic_on_polynomial() {
        // f(x) = sum(x^3): df/dx_i = 3 x_i^2, exactly representable
        let mut s = ParamStore::new(0);
        s.register("x", 4, 1, Init::Zeros).unwrap();
        s.get_mut("x").unwrap().copy_from_slice(&[0.5, -1.0, 2.0, 0.0]);
        let fd = fd_gradient(&s, 1e-3, |st| {
            st.get("x").unwrap().iter().map(|v| v * v * v).sum()
        });
        let want: Vec<f64> =
            s.get("x").unwrap().iter().map(|v| 3.0 * v * v).collect();
        // the stencil is exact for cubics; only objective roundoff remains
        assert!(max_rel_err(&fd, &want, 1e-6) < 1e-6, "{fd:?} vs {want:?}");
    }

    #[test]
    fn agrees_with_tape_on_transcendental_mix() {
        // f(x) = sum(exp(sin(x)) * cos(x/2))
        let mut s = ParamStore::new(3);
        s.register("x", 6, 1, Init::Normal(0.8)).unwrap();
        let analytic = grad(&s, |t: &mut Tape, st| {
            let x = t.param(st, "x")?;
            let sx = t.sin(x)?;
            let ex = t.exp(sx)?;
            let half = t.scale(x, 0.5)?;
            let c = t.cos(half)?;
            let m = t.mul(ex, c)?;
            t.sum(m)
        })
        .unwrap();
        let fd = fd_gradient(&s, DEFAULT_STEP, |st| {
            st.get("x")
                .unwrap()
                .iter()
                .map(|&v| v.sin().exp() * (0.5 * v).cos())
                .sum()
        });
        assert!(max_rel_err(&analytic, &fd, DEFAULT_FLOOR) < 1e-6);
    }
}
