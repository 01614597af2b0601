//! Reverse-mode autodiff over a flat parameter vector.

mod store;
mod tape;
mod tensor;

pub use store::{Init, ParamStore, SliceInfo, StoreError};
pub use tape::{grad, AdError, Tape, ValueId};
pub use tensor::{Tensor, TensorError};

#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    /// Builds a random expression from the recorded primitives over a
    /// parameter vector and checks the tape gradient against central
    /// finite differences.
    fn random_expr(
        t: &mut Tape,
        s: &ParamStore,
        ops: &[u8],
    ) -> Result<ValueId, AdError> {
        let x = t.param(s, "x")?;
        let mut cur = x;
        for &op in ops {
            cur = match op % 7 {
                0 => t.tanh(cur)?,
                1 => t.sigmoid(cur)?,
                2 => t.sin(cur)?,
                3 => t.cos(cur)?,
                4 => {
                    let half = t.scale(cur, 0.5)?;
                    t.mul(cur, half)?
                }
                5 => t.add(cur, x)?,
                _ => {
                    let sm = t.softmax(cur)?;
                    t.add(sm, cur)?
                }
            };
        }
        let sq = t.mul(cur, cur)?;
        t.mean(sq)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn gradient_matches_central_differences(
            vals in proptest::collection::vec(-1.5f64..1.5, 3..6),
            ops in proptest::collection::vec(any::<u8>(), 1..6),
        ) {
            let mut s = ParamStore::new(0);
            s.register("x", vals.len(), 1, Init::Zeros).unwrap();
            s.get_mut("x").unwrap().copy_from_slice(&vals);

            let eval = |store: &ParamStore| -> f64 {
                let mut t = Tape::new();
                let out = random_expr(&mut t, store, &ops).unwrap();
                t.value(out).as_scalar().unwrap()
            };
            let analytic = grad(&s, |t, store| random_expr(t, store, &ops)).unwrap();

            let h = 1e-5;
            for i in 0..s.len() {
                let mut sp = s.clone();
                sp.values_mut()[i] += h;
                let mut sm = s.clone();
                sm.values_mut()[i] -= h;
                let fd = (eval(&sp) - eval(&sm)) / (2.0 * h);
                let denom = analytic[i].abs().max(fd.abs()).max(1e-6);
                prop_assert!(
                    (analytic[i] - fd).abs() / denom < 1e-4,
                    "param {}: ad {} vs fd {}", i, analytic[i], fd
                );
            }
        }
    }
}
