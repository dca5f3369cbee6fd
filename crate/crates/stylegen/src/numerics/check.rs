//! Finite-difference gradient checking.
//!
//! The oracle re-evaluates the loss through forward passes only, so it is
//! independent of the reverse-mode rules it validates.

use super::optim::Param;

/// Result of checking one parameter entry.
#[derive(Debug)]
pub struct GradCheckFailure {
    pub param: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

/// Central finite differences over every entry of every parameter.
///
/// `loss_fn` must rebuild the forward computation from the parameters'
/// current values. `analytic` holds the gradients produced by `backward`
/// for the same loss, captured before calling this (the params' grad
/// accumulators are not touched here).
pub fn central_difference_check(
    params: &[Param],
    analytic: &[Vec<f64>],
    mut loss_fn: impl FnMut() -> f64,
    eps: f64,
    rel_tol: f64,
) -> Vec<GradCheckFailure> {
    let mut failures = Vec::new();
    for (p, grads) in params.iter().zip(analytic) {
        let len = p.value().len();
        assert_eq!(len, grads.len(), "gradient length for {}", p.name());
        for i in 0..len {
            p.perturb(i, eps);
            let plus = loss_fn();
            p.perturb(i, -2.0 * eps);
            let minus = loss_fn();
            p.perturb(i, eps);
            let numeric = (plus - minus) / (2.0 * eps);
            let analytic_g = grads[i];
            let denom = analytic_g.abs().max(numeric.abs()).max(1e-8);
            let rel = (analytic_g - numeric).abs() / denom;
            if rel > rel_tol {
                failures.push(GradCheckFailure {
                    param: p.name(),
                    index: i,
                    analytic: analytic_g,
                    numeric,
                    rel_error: rel,
                });
            }
        }
    }
    failures
}

/// Largest relative error over all checked entries (0 when empty).
pub fn max_rel_error(failures: &[GradCheckFailure]) -> f64 {
    failures.iter().map(|f| f.rel_error).fold(0.0, f64::max)
}
