//! One LSTM cell as graph operations.

use crate::numerics::{glorot_init, Graph, Node, NumericsError, Param, RngState};

/// Weights of a single LSTM cell. Gate layout along the first axis is
/// `[input; forget; candidate; output]`, each `hidden` wide.
pub struct LstmParams {
    pub w_x: Param,
    pub w_h: Param,
    pub b: Param,
    pub hidden: usize,
}

impl LstmParams {
    pub fn init(prefix: &str, input: usize, hidden: usize, rng: RngState) -> Self {
        Self {
            w_x: Param::new(
                format!("{prefix}.w_x"),
                glorot_init(&[4 * hidden, input], rng.derive_str("w_x")),
            ),
            w_h: Param::new(
                format!("{prefix}.w_h"),
                glorot_init(&[4 * hidden, hidden], rng.derive_str("w_h")),
            ),
            b: Param::new(
                format!("{prefix}.b"),
                glorot_init(&[4 * hidden], rng.derive_str("b")),
            ),
            hidden,
        }
    }

    pub fn params(&self) -> Vec<Param> {
        vec![self.w_x.clone(), self.w_h.clone(), self.b.clone()]
    }
}

/// Graph-bound cell weights for one forward pass.
#[derive(Clone, Copy)]
pub struct LstmNodes {
    w_x: Node,
    w_h: Node,
    b: Node,
    hidden: usize,
}

impl LstmNodes {
    pub fn bind(g: &mut Graph, p: &LstmParams) -> Self {
        Self {
            w_x: g.param(&p.w_x),
            w_h: g.param(&p.w_h),
            b: g.param(&p.b),
            hidden: p.hidden,
        }
    }

    /// One step: `(h, c) -> (h', c')` given input `x`.
    pub fn step(
        &self,
        g: &mut Graph,
        x: Node,
        state: (Node, Node),
    ) -> Result<(Node, Node), NumericsError> {
        let (h_prev, c_prev) = state;
        let from_x = g.matmul(self.w_x, x)?;
        let from_h = g.matmul(self.w_h, h_prev)?;
        let pre = g.add(from_x, from_h)?;
        let gates = g.add(pre, self.b)?;

        let n = self.hidden;
        let i_gate = g.slice(gates, 0, n)?;
        let f_gate = g.slice(gates, n, 2 * n)?;
        let cand = g.slice(gates, 2 * n, 3 * n)?;
        let o_gate = g.slice(gates, 3 * n, 4 * n)?;

        let i = g.sigmoid(i_gate);
        let f = g.sigmoid(f_gate);
        let cand = g.tanh(cand);
        let o = g.sigmoid(o_gate);

        let keep = g.mul(f, c_prev)?;
        let write = g.mul(i, cand)?;
        let c = g.add(keep, write)?;
        let c_act = g.tanh(c);
        let h = g.mul(o, c_act)?;
        Ok((h, c))
    }

    pub fn zero_state(&self, g: &mut Graph) -> (Node, Node) {
        let h = g.constant(crate::numerics::Array::zeros(&[self.hidden]));
        let c = g.constant(crate::numerics::Array::zeros(&[self.hidden]));
        (h, c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::check::{central_difference_check, max_rel_error};
    use crate::numerics::{Array, Graph};

    fn step_loss(g: &mut Graph, p: &LstmParams, x: &Array) -> Node {
        let cell = LstmNodes::bind(g, p);
        let x = g.constant(x.clone());
        let s0 = cell.zero_state(g);
        let (h1, c1) = cell.step(g, x, s0).unwrap();
        let (h2, _) = cell.step(g, x, (h1, c1)).unwrap();
        g.sum(h2)
    }

    #[test]
    fn zero_weights_give_zero_outputs() {
        let p = LstmParams {
            w_x: Param::new("w_x", Array::zeros(&[16, 3])),
            w_h: Param::new("w_h", Array::zeros(&[16, 4])),
            b: Param::new("b", Array::zeros(&[16])),
            hidden: 4,
        };
        let mut g = Graph::new();
        let cell = LstmNodes::bind(&mut g, &p);
        let x = g.constant(Array::vector(vec![1.0, -2.0, 0.5]));
        let s0 = cell.zero_state(&mut g);
        let (h, c) = cell.step(&mut g, x, s0).unwrap();
        // all gates 0.5, candidate tanh(0)=0 => c = 0, h = 0
        assert!(g.value(h).data().iter().all(|&v| v == 0.0));
        assert!(g.value(c).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn two_step_gradients_match_finite_differences() {
        // backpropagation through time over two chained steps
        let p = LstmParams::init("cell", 3, 5, RngState::new(17));
        let x = Array::vector(vec![0.4, -0.9, 1.3]);

        let mut g = Graph::new();
        let loss = step_loss(&mut g, &p, &x);
        g.backward(loss).unwrap();
        let params = p.params();
        let analytic: Vec<Vec<f64>> = params.iter().map(|q| q.grad().data().to_vec()).collect();
        params.iter().for_each(|q| q.zero_grad());

        let failures = central_difference_check(
            &params,
            &analytic,
            || {
                let mut g = Graph::new();
                let loss = step_loss(&mut g, &p, &x);
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
