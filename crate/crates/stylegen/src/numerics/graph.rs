//! Reverse-mode automatic differentiation over [`Array`] values.
//!
//! A [`Graph`] is an append-only arena of nodes. Forward values are
//! computed eagerly when an op is recorded; `backward` walks the arena in
//! reverse (construction order is already topological) and accumulates
//! gradients additively across fan-out. Gradients of parameter leaves are
//! flushed into their [`Param`] storage so they survive the graph.

use super::array::Array;
use super::optim::Param;
use super::rng::RngStream;
use super::NumericsError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Node {
    id: usize,
}

enum Op {
    Leaf,
    Add(Node, Node),
    Mul(Node, Node),
    Scale(Node, f64),
    Matmul(Node, Node),
    Dot(Node, Node),
    Transpose(Node),
    Concat(Vec<Node>),
    Stack(Vec<Node>),
    Slice(Node, usize),
    Tanh(Node),
    Sigmoid(Node),
    Softmax(Node),
    LogSoftmax(Node),
    EmbeddingLookup(Node, usize),
    CrossEntropy(Node, usize),
    Sum(Node),
    Mean(Node),
    Dropout(Node, Array),
}

struct NodeData {
    value: Array,
    // Lazily allocated by backward(); shape always equals value's.
    grad: Option<Array>,
    op: Op,
    requires_grad: bool,
}

pub struct Graph {
    nodes: Vec<NodeData>,
    param_leaves: Vec<(usize, Param)>,
}

impl Default for Graph {
    fn default() -> Self {
        Self::new()
    }
}

impl Graph {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            param_leaves: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, n: Node) -> &Array {
        &self.nodes[n.id].value
    }

    pub fn grad(&self, n: Node) -> Option<&Array> {
        self.nodes[n.id].grad.as_ref()
    }

    fn push(&mut self, value: Array, op: Op, requires_grad: bool) -> Node {
        let id = self.nodes.len();
        self.nodes.push(NodeData {
            value,
            grad: None,
            op,
            requires_grad,
        });
        Node { id }
    }

    fn requires(&self, n: Node) -> bool {
        self.nodes[n.id].requires_grad
    }

    /// A leaf that never receives a gradient.
    pub fn constant(&mut self, value: Array) -> Node {
        self.push(value, Op::Leaf, false)
    }

    /// A leaf carrying a gradient, not tied to parameter storage.
    pub fn variable(&mut self, value: Array) -> Node {
        self.push(value, Op::Leaf, true)
    }

    /// A leaf bound to persistent parameter storage. After `backward`,
    /// the node's gradient is added into the parameter's accumulator.
    pub fn param(&mut self, p: &Param) -> Node {
        let node = self.push(p.value(), Op::Leaf, true);
        self.param_leaves.push((node.id, p.clone()));
        node
    }

    pub fn add(&mut self, a: Node, b: Node) -> Result<Node, NumericsError> {
        let (va, vb) = (&self.nodes[a.id].value, &self.nodes[b.id].value);
        if !va.same_shape(vb) {
            return Err(shape_err("add", va, vb));
        }
        let value = va.zip_map(vb, |x, y| x + y);
        let rg = self.requires(a) || self.requires(b);
        Ok(self.push(value, Op::Add(a, b), rg))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Node, b: Node) -> Result<Node, NumericsError> {
        let (va, vb) = (&self.nodes[a.id].value, &self.nodes[b.id].value);
        if !va.same_shape(vb) {
            return Err(shape_err("mul", va, vb));
        }
        let value = va.zip_map(vb, |x, y| x * y);
        let rg = self.requires(a) || self.requires(b);
        Ok(self.push(value, Op::Mul(a, b), rg))
    }

    pub fn scale(&mut self, a: Node, c: f64) -> Node {
        let value = self.nodes[a.id].value.map(|x| x * c);
        let rg = self.requires(a);
        self.push(value, Op::Scale(a, c), rg)
    }

    /// `[m,k]x[k,n]`, `[m,k]x[k]` or `[k]x[k,n]`.
    pub fn matmul(&mut self, a: Node, b: Node) -> Result<Node, NumericsError> {
        let (va, vb) = (&self.nodes[a.id].value, &self.nodes[b.id].value);
        let value = match (va.ndim(), vb.ndim()) {
            (2, 2) if va.cols() == vb.rows() => va.matmul2(vb),
            (2, 1) if va.cols() == vb.len() => va.matvec(vb),
            (1, 2) if va.len() == vb.rows() => va.vecmat(vb),
            _ => return Err(shape_err("matmul", va, vb)),
        };
        let rg = self.requires(a) || self.requires(b);
        Ok(self.push(value, Op::Matmul(a, b), rg))
    }

    pub fn dot(&mut self, a: Node, b: Node) -> Result<Node, NumericsError> {
        let (va, vb) = (&self.nodes[a.id].value, &self.nodes[b.id].value);
        if va.ndim() != 1 || vb.ndim() != 1 || va.len() != vb.len() {
            return Err(shape_err("dot", va, vb));
        }
        let value = Array::scalar(va.dot(vb));
        let rg = self.requires(a) || self.requires(b);
        Ok(self.push(value, Op::Dot(a, b), rg))
    }

    pub fn transpose(&mut self, a: Node) -> Result<Node, NumericsError> {
        let va = &self.nodes[a.id].value;
        if va.ndim() != 2 {
            return Err(shape_err("transpose", va, va));
        }
        let value = va.transposed();
        let rg = self.requires(a);
        Ok(self.push(value, Op::Transpose(a), rg))
    }

    /// Concatenates rank-1 nodes into one vector.
    pub fn concat(&mut self, parts: &[Node]) -> Result<Node, NumericsError> {
        debug_assert!(!parts.is_empty());
        let mut data = Vec::new();
        for &p in parts {
            let v = &self.nodes[p.id].value;
            if v.ndim() != 1 {
                return Err(shape_err("concat", v, v));
            }
            data.extend_from_slice(v.data());
        }
        let rg = parts.iter().any(|&p| self.requires(p));
        Ok(self.push(Array::vector(data), Op::Concat(parts.to_vec()), rg))
    }

    /// Stacks `n` equal-length vectors into an `[n,d]` matrix.
    pub fn stack(&mut self, rows: &[Node]) -> Result<Node, NumericsError> {
        debug_assert!(!rows.is_empty());
        let d = self.nodes[rows[0].id].value.len();
        let mut data = Vec::with_capacity(rows.len() * d);
        for &r in rows {
            let v = &self.nodes[r.id].value;
            if v.ndim() != 1 || v.len() != d {
                return Err(shape_err("stack", &self.nodes[rows[0].id].value, v));
            }
            data.extend_from_slice(v.data());
        }
        let value = Array::new(vec![rows.len(), d], data).expect("stack shape");
        let rg = rows.iter().any(|&r| self.requires(r));
        Ok(self.push(value, Op::Stack(rows.to_vec()), rg))
    }

    /// `[start, end)` of a rank-1 node.
    pub fn slice(&mut self, a: Node, start: usize, end: usize) -> Result<Node, NumericsError> {
        let va = &self.nodes[a.id].value;
        if va.ndim() != 1 || start >= end || end > va.len() {
            return Err(NumericsError::ShapeMismatch {
                op: "slice",
                left: va.shape().to_vec(),
                right: vec![start, end],
            });
        }
        let value = Array::vector(va.data()[start..end].to_vec());
        let rg = self.requires(a);
        Ok(self.push(value, Op::Slice(a, start), rg))
    }

    pub fn tanh(&mut self, a: Node) -> Node {
        let value = self.nodes[a.id].value.map(f64::tanh);
        let rg = self.requires(a);
        self.push(value, Op::Tanh(a), rg)
    }

    pub fn sigmoid(&mut self, a: Node) -> Node {
        let value = self.nodes[a.id].value.map(sigmoid);
        let rg = self.requires(a);
        self.push(value, Op::Sigmoid(a), rg)
    }

    /// Numerically stable softmax over a rank-1 node.
    pub fn softmax(&mut self, a: Node) -> Result<Node, NumericsError> {
        let va = &self.nodes[a.id].value;
        if va.ndim() != 1 {
            return Err(shape_err("softmax", va, va));
        }
        let value = Array::vector(softmax_vec(va.data()));
        let rg = self.requires(a);
        Ok(self.push(value, Op::Softmax(a), rg))
    }

    pub fn log_softmax(&mut self, a: Node) -> Result<Node, NumericsError> {
        let va = &self.nodes[a.id].value;
        if va.ndim() != 1 {
            return Err(shape_err("log_softmax", va, va));
        }
        let value = Array::vector(log_softmax_vec(va.data()));
        let rg = self.requires(a);
        Ok(self.push(value, Op::LogSoftmax(a), rg))
    }

    /// Row `id` of an embedding table node (`[V,d] -> [d]`).
    pub fn embedding_lookup(&mut self, table: Node, id: usize) -> Result<Node, NumericsError> {
        let vt = &self.nodes[table.id].value;
        if vt.ndim() != 2 || id >= vt.rows() {
            return Err(NumericsError::ShapeMismatch {
                op: "embedding_lookup",
                left: vt.shape().to_vec(),
                right: vec![id],
            });
        }
        let value = Array::vector(vt.row(id).to_vec());
        let rg = self.requires(table);
        Ok(self.push(value, Op::EmbeddingLookup(table, id), rg))
    }

    /// Negative log-likelihood of `target` under `softmax(logits)`,
    /// fused for stability.
    pub fn cross_entropy(&mut self, logits: Node, target: usize) -> Result<Node, NumericsError> {
        let vl = &self.nodes[logits.id].value;
        if vl.ndim() != 1 || target >= vl.len() {
            return Err(NumericsError::ShapeMismatch {
                op: "cross_entropy",
                left: vl.shape().to_vec(),
                right: vec![target],
            });
        }
        let lsm = log_softmax_vec(vl.data());
        let value = Array::scalar(-lsm[target]);
        let rg = self.requires(logits);
        Ok(self.push(value, Op::CrossEntropy(logits, target), rg))
    }

    pub fn sum(&mut self, a: Node) -> Node {
        let value = Array::scalar(self.nodes[a.id].value.sum());
        let rg = self.requires(a);
        self.push(value, Op::Sum(a), rg)
    }

    pub fn mean(&mut self, a: Node) -> Node {
        let v = &self.nodes[a.id].value;
        let value = Array::scalar(v.sum() / v.len() as f64);
        let rg = self.requires(a);
        self.push(value, Op::Mean(a), rg)
    }

    /// Inverted dropout: in training each element is zeroed with
    /// probability `p` and survivors are scaled by `1/(1-p)`; at
    /// inference this is the identity.
    pub fn dropout(&mut self, a: Node, p: f64, training: bool, rng: &mut RngStream) -> Node {
        debug_assert!((0.0..1.0).contains(&p));
        if !training || p == 0.0 {
            return a;
        }
        let keep = 1.0 / (1.0 - p);
        let va = &self.nodes[a.id].value;
        let mask_data: Vec<f64> = (0..va.len())
            .map(|_| if rng.next_f64() < p { 0.0 } else { keep })
            .collect();
        let mask = Array::new(va.shape().to_vec(), mask_data).expect("mask shape");
        let value = va.zip_map(&mask, |x, m| x * m);
        let rg = self.requires(a);
        self.push(value, Op::Dropout(a, mask), rg)
    }

    /// Reverse pass from a scalar `loss`. Populates node gradients and
    /// flushes parameter-leaf gradients into their [`Param`] storage.
    pub fn backward(&mut self, loss: Node) -> Result<(), NumericsError> {
        if !self.nodes[loss.id].value.is_scalar() {
            return Err(NumericsError::NonScalarLoss {
                shape: self.nodes[loss.id].value.shape().to_vec(),
            });
        }
        for n in &mut self.nodes {
            n.grad = None;
        }
        self.nodes[loss.id].grad = Some(Array::scalar(1.0));

        // Arena order is topological: parents precede children.
        for id in (0..=loss.id).rev() {
            if !self.nodes[id].requires_grad || self.nodes[id].grad.is_none() {
                continue;
            }
            self.propagate(id);
        }

        for (id, p) in &self.param_leaves {
            if let Some(g) = &self.nodes[*id].grad {
                p.accumulate_grad(g);
            }
        }
        Ok(())
    }

    fn accumulate(&mut self, target: Node, contribution: &Array) {
        if !self.nodes[target.id].requires_grad {
            return;
        }
        let slot = &mut self.nodes[target.id];
        match &mut slot.grad {
            Some(g) => g.add_assign_scaled(contribution, 1.0),
            None => slot.grad = Some(contribution.clone()),
        }
    }

    fn propagate(&mut self, id: usize) {
        let g = self.nodes[id].grad.clone().expect("grad present");
        // Ops are cheap to take apart; clone the few indices we need.
        match &self.nodes[id].op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                let (a, b) = (*a, *b);
                self.accumulate(a, &g);
                self.accumulate(b, &g);
            }
            Op::Mul(a, b) => {
                let (a, b) = (*a, *b);
                let da = g.zip_map(&self.nodes[b.id].value, |gi, bi| gi * bi);
                let db = g.zip_map(&self.nodes[a.id].value, |gi, ai| gi * ai);
                self.accumulate(a, &da);
                self.accumulate(b, &db);
            }
            Op::Scale(a, c) => {
                let (a, c) = (*a, *c);
                self.accumulate(a, &g.map(|x| x * c));
            }
            Op::Matmul(a, b) => {
                let (a, b) = (*a, *b);
                let (va, vb) = (&self.nodes[a.id].value, &self.nodes[b.id].value);
                let (da, db) = match (va.ndim(), vb.ndim()) {
                    (2, 2) => (g.matmul2(&vb.transposed()), va.transposed().matmul2(&g)),
                    (2, 1) => (g.outer(vb), va.transposed().matvec(&g)),
                    (1, 2) => (vb.matvec(&g), va.outer(&g)),
                    _ => unreachable!("validated at construction"),
                };
                self.accumulate(a, &da);
                self.accumulate(b, &db);
            }
            Op::Dot(a, b) => {
                let (a, b) = (*a, *b);
                let gs = g.scalar_value();
                let da = self.nodes[b.id].value.map(|x| x * gs);
                let db = self.nodes[a.id].value.map(|x| x * gs);
                self.accumulate(a, &da);
                self.accumulate(b, &db);
            }
            Op::Transpose(a) => {
                let a = *a;
                self.accumulate(a, &g.transposed());
            }
            Op::Concat(parts) => {
                let parts = parts.clone();
                let mut offset = 0;
                for p in parts {
                    let len = self.nodes[p.id].value.len();
                    let dg = Array::vector(g.data()[offset..offset + len].to_vec());
                    offset += len;
                    self.accumulate(p, &dg);
                }
            }
            Op::Stack(rows) => {
                let rows = rows.clone();
                for (i, r) in rows.iter().enumerate() {
                    let dg = Array::vector(g.row(i).to_vec());
                    self.accumulate(*r, &dg);
                }
            }
            Op::Slice(a, start) => {
                let (a, start) = (*a, *start);
                let mut da = Array::zeros(self.nodes[a.id].value.shape());
                da.data_mut()[start..start + g.len()].copy_from_slice(g.data());
                self.accumulate(a, &da);
            }
            Op::Tanh(a) => {
                let a = *a;
                let da = g.zip_map(&self.nodes[id].value, |gi, y| gi * (1.0 - y * y));
                self.accumulate(a, &da);
            }
            Op::Sigmoid(a) => {
                let a = *a;
                let da = g.zip_map(&self.nodes[id].value, |gi, y| gi * y * (1.0 - y));
                self.accumulate(a, &da);
            }
            Op::Softmax(a) => {
                let a = *a;
                let y = &self.nodes[id].value;
                let inner = g.dot(y);
                let da = g.zip_map(y, |gi, yi| yi * (gi - inner));
                self.accumulate(a, &da);
            }
            Op::LogSoftmax(a) => {
                let a = *a;
                let y = &self.nodes[id].value;
                let gsum = g.sum();
                let da = g.zip_map(y, |gi, yi| gi - yi.exp() * gsum);
                self.accumulate(a, &da);
            }
            Op::EmbeddingLookup(table, row) => {
                let (table, row) = (*table, *row);
                let mut da = Array::zeros(self.nodes[table.id].value.shape());
                let cols = da.cols();
                da.data_mut()[row * cols..(row + 1) * cols].copy_from_slice(g.data());
                self.accumulate(table, &da);
            }
            Op::CrossEntropy(logits, target) => {
                let (logits, target) = (*logits, *target);
                let gs = g.scalar_value();
                let mut probs = softmax_vec(self.nodes[logits.id].value.data());
                probs[target] -= 1.0;
                let da = Array::vector(probs.into_iter().map(|p| p * gs).collect());
                self.accumulate(logits, &da);
            }
            Op::Sum(a) => {
                let a = *a;
                let gs = g.scalar_value();
                let da = self.nodes[a.id].value.map(|_| gs);
                self.accumulate(a, &da);
            }
            Op::Mean(a) => {
                let a = *a;
                let n = self.nodes[a.id].value.len() as f64;
                let gs = g.scalar_value() / n;
                let da = self.nodes[a.id].value.map(|_| gs);
                self.accumulate(a, &da);
            }
            Op::Dropout(a, mask) => {
                let a = *a;
                let da = g.zip_map(mask, |gi, m| gi * m);
                self.accumulate(a, &da);
            }
        }
    }
}

fn shape_err(op: &'static str, a: &Array, b: &Array) -> NumericsError {
    NumericsError::ShapeMismatch {
        op,
        left: a.shape().to_vec(),
        right: b.shape().to_vec(),
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softmax_vec(xs: &[f64]) -> Vec<f64> {
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = xs.iter().map(|&x| (x - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

fn log_softmax_vec(xs: &[f64]) -> Vec<f64> {
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let log_total = xs
        .iter()
        .map(|&x| (x - max).exp())
        .sum::<f64>()
        .ln()
        + max;
    xs.iter().map(|&x| x - log_total).collect()
}

#[cfg(test)]
mod tests {
    use super::super::rng::RngState;
    use super::*;

    #[test]
    fn softmax_of_zeros_is_uniform() {
        let mut g = Graph::new();
        let x = g.constant(Array::vector(vec![0.0, 0.0, 0.0]));
        let s = g.softmax(x).unwrap();
        for &v in g.value(s).data() {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn tanh_gradient_at_zero_is_one() {
        let mut g = Graph::new();
        let x = g.variable(Array::scalar(0.0));
        let y = g.tanh(x);
        g.backward(y).unwrap();
        assert_eq!(g.grad(x).unwrap().scalar_value(), 1.0);
    }

    #[test]
    fn sum_gradient_is_ones() {
        let mut g = Graph::new();
        let x = g.variable(Array::vector(vec![1.0, 2.0, 3.0]));
        let s = g.sum(x);
        g.backward(s).unwrap();
        assert_eq!(g.grad(x).unwrap().data(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn fanout_accumulates() {
        // loss = x + x  =>  dloss/dx = 2
        let mut g = Graph::new();
        let x = g.variable(Array::scalar(3.0));
        let y = g.add(x, x).unwrap();
        g.backward(y).unwrap();
        assert_eq!(g.grad(x).unwrap().scalar_value(), 2.0);
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let mut g = Graph::new();
        let x = g.variable(Array::vector(vec![1.0, 2.0]));
        let err = g.backward(x).unwrap_err();
        assert!(matches!(err, NumericsError::NonScalarLoss { .. }));
    }

    #[test]
    fn add_shape_mismatch_reports_both_shapes() {
        let mut g = Graph::new();
        let a = g.constant(Array::vector(vec![1.0, 2.0]));
        let b = g.constant(Array::vector(vec![1.0, 2.0, 3.0]));
        let err = g.add(a, b).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("[2]") && msg.contains("[3]"), "{msg}");
    }

    #[test]
    fn dropout_identity_cases() {
        let mut g = Graph::new();
        let x = g.constant(Array::vector(vec![1.0, 2.0, 3.0]));
        let mut rng = RngState::new(5).stream();
        // p = 0 in training
        let y = g.dropout(x, 0.0, true, &mut rng);
        assert_eq!(g.value(y).data(), &[1.0, 2.0, 3.0]);
        // inference
        let z = g.dropout(x, 0.1, false, &mut rng);
        assert_eq!(g.value(z).data(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn dropout_zero_fraction_near_p() {
        let mut g = Graph::new();
        let n = 1_000_000;
        let x = g.constant(Array::vector(vec![1.0; n]));
        let mut rng = RngState::new(99).derive_str("dropout").stream();
        let y = g.dropout(x, 0.1, true, &mut rng);
        let zeros = g.value(y).data().iter().filter(|&&v| v == 0.0).count();
        let frac = zeros as f64 / n as f64;
        assert!((0.099..=0.101).contains(&frac), "zero fraction {frac}");
        // survivors scaled by 1/(1-p)
        let survivor = g.value(y).data().iter().find(|&&v| v != 0.0).unwrap();
        assert!((survivor - 1.0 / 0.9).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_matches_log_softmax() {
        let mut g = Graph::new();
        let logits = g.constant(Array::vector(vec![0.3, -1.2, 2.0, 0.0]));
        let ce = g.cross_entropy(logits, 2).unwrap();
        let lsm = g.log_softmax(logits).unwrap();
        let expected = -g.value(lsm).data()[2];
        assert!((g.value(ce).scalar_value() - expected).abs() < 1e-12);
    }
}
