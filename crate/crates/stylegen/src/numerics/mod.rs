//! Minimal dense-array numerics with reverse-mode automatic
//! differentiation — everything the sequence model needs and nothing
//! more. All values are 64-bit floats; all randomness flows from
//! [`RngState`] so runs are bit-reproducible per seed.

mod array;
pub mod check;
mod graph;
mod optim;
mod rng;

pub use array::Array;
pub use graph::{Graph, Node};
pub use optim::{glorot_init, sgd_step, Param};
pub use rng::{RngState, RngStream};

#[derive(Debug, thiserror::Error)]
pub enum NumericsError {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("backward requires a scalar loss, got shape {shape:?}")]
    NonScalarLoss { shape: Vec<usize> },
}

#[cfg(test)]
mod gradcheck_tests {
    use super::check::{central_difference_check, max_rel_error};
    use super::*;

    // Mean softmax-cross-entropy over the rows of a random 4x7 logit
    // matrix (each row a lookup, targets cycling through the vocab).
    fn ce_loss(g: &mut Graph, w: &Param) -> Node {
        let wn = g.param(w);
        let mut total = None;
        for row in 0..4 {
            let logits = g.embedding_lookup(wn, row).unwrap();
            let ce = g.cross_entropy(logits, row % 7).unwrap();
            total = Some(match total {
                None => ce,
                Some(t) => g.add(t, ce).unwrap(),
            });
        }
        g.scale(total.unwrap(), 0.25)
    }

    #[test]
    fn cross_entropy_gradient_matches_finite_differences() {
        let w = Param::new("logits", glorot_init(&[4, 7], RngState::new(11)));

        let mut g = Graph::new();
        let loss = ce_loss(&mut g, &w);
        g.backward(loss).unwrap();
        let analytic = vec![w.grad().data().to_vec()];
        w.zero_grad();

        let failures = central_difference_check(
            &[w.clone()],
            &analytic,
            || {
                let mut g = Graph::new();
                let loss = ce_loss(&mut g, &w);
                g.value(loss).scalar_value()
            },
            1e-5,
            1e-6,
        );
        assert!(
            failures.is_empty(),
            "max rel error {}",
            max_rel_error(&failures)
        );
    }

    #[test]
    fn composite_ops_gradient_matches_finite_differences() {
        // tanh(W x) . sigmoid(softmax(W x)) style composite touching
        // matmul, tanh, sigmoid, softmax, mul, concat, slice, dot.
        let w = Param::new("w", glorot_init(&[5, 3], RngState::new(21)));
        let x = Array::vector(vec![0.3, -1.1, 0.7]);

        let build = |g: &mut Graph, w: &Param| -> Node {
            let wn = g.param(w);
            let xn = g.constant(x.clone());
            let h = g.matmul(wn, xn).unwrap();
            let t = g.tanh(h);
            let s = g.sigmoid(h);
            let sm = g.softmax(h).unwrap();
            let prod = g.mul(t, s).unwrap();
            let cat = g.concat(&[prod, sm]).unwrap();
            let left = g.slice(cat, 0, 5).unwrap();
            let right = g.slice(cat, 5, 10).unwrap();
            let d = g.dot(left, right).unwrap();
            let lsm = g.log_softmax(h).unwrap();
            let m = g.mean(lsm);
            g.add(d, m).unwrap()
        };

        let mut g = Graph::new();
        let loss = build(&mut g, &w);
        g.backward(loss).unwrap();
        let analytic = vec![w.grad().data().to_vec()];
        w.zero_grad();

        let failures = central_difference_check(
            &[w.clone()],
            &analytic,
            || {
                let mut g = Graph::new();
                let loss = build(&mut g, &w);
                g.value(loss).scalar_value()
            },
            1e-5,
            1e-4,
        );
        assert!(
            failures.is_empty(),
            "max rel error {}",
            max_rel_error(&failures)
        );
    }
}
