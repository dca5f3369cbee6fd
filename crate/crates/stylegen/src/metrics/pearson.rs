//! Sample Pearson correlation with a two-sided p-value from the
//! t-distribution.

use super::MetricsError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PearsonResult {
    pub r: f64,
    /// Two-sided p-value; NaN when fewer than 3 points (df = 0).
    pub p_value: f64,
    pub n: usize,
}

/// Standard sample correlation. Errors on mismatched or too-short
/// inputs and on zero variance in either series.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<PearsonResult, MetricsError> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(MetricsError::BadSeries {
            xs: xs.len(),
            ys: ys.len(),
        });
    }
    let n = xs.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        let dx = x - mean_x;
        let dy = y - mean_y;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(MetricsError::ZeroVariance);
    }
    let r = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    let df = xs.len() as f64 - 2.0;
    let p_value = if df <= 0.0 {
        f64::NAN
    } else if (1.0 - r * r) <= 0.0 {
        0.0
    } else {
        let t = r.abs() * (df / (1.0 - r * r)).sqrt();
        // P(|T| > t) = I_{df/(df+t^2)}(df/2, 1/2)
        regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t))
    };
    Ok(PearsonResult {
        r,
        p_value,
        n: xs.len(),
    })
}

fn ln_gamma(x: f64) -> f64 {
    // Lanczos approximation, g = 7
    const COEFFS: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // reflection
        return std::f64::consts::PI.ln()
            - (std::f64::consts::PI * x).sin().ln()
            - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEFFS[0];
    for (i, &c) in COEFFS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Continued-fraction evaluation of the incomplete beta integral.
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const MAX_ITER: usize = 300;
    const EPS: f64 = 1e-15;
    const TINY: f64 = 1e-300;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// `I_x(a, b)`, the regularized incomplete beta function.
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn affine_series_correlate_exactly() {
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x + 3.0).collect();
        let res = pearson(&xs, &ys).unwrap();
        assert!((res.r - 1.0).abs() < 1e-12);
        assert!(res.p_value < 1e-12);

        let neg: Vec<f64> = xs.iter().map(|x| -x).collect();
        let res = pearson(&xs, &neg).unwrap();
        assert!((res.r + 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_variance_rejected() {
        assert!(matches!(
            pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(MetricsError::ZeroVariance)
        ));
    }

    #[test]
    fn mismatched_series_rejected() {
        assert!(pearson(&[1.0], &[1.0, 2.0]).is_err());
        assert!(pearson(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn matches_published_fixture() {
        // Anscombe's quartet, dataset I
        let xs = [10.0, 8.0, 13.0, 9.0, 11.0, 14.0, 6.0, 4.0, 12.0, 7.0, 5.0];
        let ys = [
            8.04, 6.95, 7.58, 8.81, 8.33, 9.96, 7.24, 4.26, 10.84, 4.82, 5.68,
        ];
        let res = pearson(&xs, &ys).unwrap();
        assert!((res.r - 0.8164205163448396).abs() < 1e-6);
        assert!((res.p_value - 0.002169628873078804).abs() < 1e-9);
    }

    #[test]
    fn p_value_matches_t_distribution_table() {
        // two-sided P(|T| > 2.0) with 10 degrees of freedom
        let p = regularized_incomplete_beta(5.0, 0.5, 10.0 / (10.0 + 4.0));
        assert!((p - 0.07338803477074039).abs() < 1e-10);
    }

    #[test]
    fn small_series_fixture() {
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let ys = [2.0, 1.0, 4.0, 3.0, 7.0, 5.0];
        let res = pearson(&xs, &ys).unwrap();
        assert!((res.r - 0.7917946548886297).abs() < 1e-12);
        assert!((res.p_value - 0.06051140336275659).abs() < 1e-9);
    }
}
