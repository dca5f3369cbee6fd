//! Parameter storage, Glorot initialization and SGD.

use std::cell::RefCell;
use std::rc::Rc;

use super::array::Array;
use super::rng::RngState;

struct ParamInner {
    name: String,
    value: Array,
    grad: Array,
}

/// A named trainable parameter. Values persist across graphs; gradients
/// accumulate until [`sgd_step`] consumes them.
#[derive(Clone)]
pub struct Param {
    inner: Rc<RefCell<ParamInner>>,
}

impl Param {
    pub fn new(name: impl Into<String>, value: Array) -> Self {
        let grad = Array::zeros(value.shape());
        Self {
            inner: Rc::new(RefCell::new(ParamInner {
                name: name.into(),
                value,
                grad,
            })),
        }
    }

    pub fn name(&self) -> String {
        self.inner.borrow().name.clone()
    }

    pub fn value(&self) -> Array {
        self.inner.borrow().value.clone()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.inner.borrow().value.shape().to_vec()
    }

    pub fn grad(&self) -> Array {
        self.inner.borrow().grad.clone()
    }

    pub fn set_value(&self, value: Array) {
        let mut inner = self.inner.borrow_mut();
        assert!(
            inner.value.same_shape(&value),
            "set_value must preserve shape"
        );
        inner.value = value;
    }

    pub fn accumulate_grad(&self, g: &Array) {
        self.inner.borrow_mut().grad.add_assign_scaled(g, 1.0);
    }

    pub fn zero_grad(&self) {
        self.inner.borrow_mut().grad.fill(0.0);
    }

    /// Nudges a single entry in place, used by finite-difference checks.
    pub fn perturb(&self, index: usize, delta: f64) {
        self.inner.borrow_mut().value.data_mut()[index] += delta;
    }

    pub fn grad_has_non_finite(&self) -> bool {
        self.inner.borrow().grad.has_non_finite()
    }
}

/// Uniform Glorot init on `±sqrt(6/(fan_in+fan_out))`. Fans are the last
/// two dims; rank-1 shapes take `fan_out = 1`.
pub fn glorot_init(shape: &[usize], rng: RngState) -> Array {
    assert!(!shape.is_empty());
    let (fan_in, fan_out) = match shape.len() {
        1 => (shape[0], 1),
        n => (shape[n - 1], shape[n - 2]),
    };
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let len: usize = shape.iter().product();
    let mut stream = rng.stream();
    let data = (0..len).map(|_| stream.uniform(-bound, bound)).collect();
    Array::new(shape.to_vec(), data).expect("glorot shape")
}

/// One SGD update: optional global-norm clip, `p -= lr * g`, zero grads.
pub fn sgd_step(params: &[Param], lr: f64, clip: Option<f64>) {
    let mut scale = 1.0;
    if let Some(max_norm) = clip {
        let sq: f64 = params
            .iter()
            .map(|p| p.inner.borrow().grad.data().iter().map(|g| g * g).sum::<f64>())
            .sum();
        let norm = sq.sqrt();
        if norm > max_norm {
            scale = max_norm / norm;
        }
    }
    for p in params {
        let mut inner = p.inner.borrow_mut();
        let ParamInner { value, grad, .. } = &mut *inner;
        value.add_assign_scaled(grad, -lr * scale);
        grad.fill(0.0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn glorot_respects_bound() {
        let a = glorot_init(&[100, 100], RngState::new(1));
        let bound = (6.0 / 200.0_f64).sqrt();
        assert!(a.data().iter().all(|&x| x.abs() <= bound));
    }

    #[test]
    fn glorot_deterministic_per_seed() {
        let a = glorot_init(&[10, 10], RngState::new(7));
        let b = glorot_init(&[10, 10], RngState::new(7));
        assert_eq!(a, b);
    }

    #[test]
    fn glorot_variance_matches_formula() {
        // Var(U(-b, b)) = b^2/3 = 2/(fan_in+fan_out)
        let a = glorot_init(&[1000, 100], RngState::new(3));
        let n = a.len() as f64;
        let mean = a.sum() / n;
        let var = a.data().iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        let expected = 2.0 / 1100.0;
        assert!(
            (var - expected).abs() / expected < 0.05,
            "var {var} vs {expected}"
        );
    }

    #[test]
    fn sgd_basic_update() {
        let p = Param::new("w", Array::scalar(1.0));
        p.accumulate_grad(&Array::scalar(2.0));
        sgd_step(&[p.clone()], 0.1, None);
        assert!((p.value().scalar_value() - 0.8).abs() < 1e-15);
        assert_eq!(p.grad().scalar_value(), 0.0);
    }

    #[test]
    fn sgd_clips_global_norm() {
        // gradient norm 10, clip 1 => effective gradient scaled by 0.1
        let p = Param::new("w", Array::vector(vec![0.0, 0.0]));
        p.accumulate_grad(&Array::vector(vec![6.0, 8.0]));
        sgd_step(&[p.clone()], 1.0, Some(1.0));
        let v = p.value();
        assert!((v.data()[0] + 0.6).abs() < 1e-12);
        assert!((v.data()[1] + 0.8).abs() < 1e-12);
    }

    #[test]
    fn sgd_converges_on_quadratic() {
        // f(x) = (x - 3)^2, analytic minimum at 3
        let p = Param::new("x", Array::scalar(0.0));
        for _ in 0..200 {
            let x = p.value().scalar_value();
            p.accumulate_grad(&Array::scalar(2.0 * (x - 3.0)));
            sgd_step(std::slice::from_ref(&p), 0.1, None);
        }
        assert!((p.value().scalar_value() - 3.0).abs() < 1e-6);
    }
}
