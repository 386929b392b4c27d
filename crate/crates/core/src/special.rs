//! Regularized incomplete beta function evaluated in log space.

use statrs::function::beta::ln_beta;

const CF_MAX_ITER: usize = 500;
const CF_EPS: f64 = 1e-16;
const TINY: f64 = 1e-300;

/// `ln I_x(a, b)`, the log of the Beta(a, b) CDF at `x`.
///
/// `ln_b` must be `ln B(a, b)`; it is passed in because callers evaluate the
/// same distribution many times.
pub fn ln_beta_cdf(x: f64, a: f64, b: f64, ln_b: f64) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if x >= 1.0 {
        return 0.0;
    }
    if x < (a + 1.0) / (a + b + 2.0) {
        ln_front(x, a, b, ln_b) - a.ln() + beta_cf(x, a, b).ln()
    } else {
        // I_x(a, b) = 1 - I_{1-x}(b, a)
        let upper = ln_front(x, a, b, ln_b) - b.ln() + beta_cf(1.0 - x, b, a).ln();
        ln_1m_exp(upper)
    }
}

/// `ln (1 - I_x(a, b))`, the log survival function.
pub fn ln_beta_sf(x: f64, a: f64, b: f64, ln_b: f64) -> f64 {
    ln_beta_cdf(1.0 - x, b, a, ln_b)
}

/// `I_x(a, b)`.
pub fn beta_cdf(x: f64, a: f64, b: f64) -> f64 {
    ln_beta_cdf(x, a, b, ln_beta(a, b)).exp()
}

/// Log density of Beta(a, b) at `x`.
pub fn ln_beta_pdf(x: f64, a: f64, b: f64, ln_b: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        let edge = if x <= 0.0 { a } else { b };
        return if edge < 1.0 {
            f64::INFINITY
        } else if edge == 1.0 {
            -ln_b
        } else {
            f64::NEG_INFINITY
        };
    }
    (a - 1.0) * x.ln() + (b - 1.0) * (-x).ln_1p() - ln_b
}

/// `ln(1 - e^x)` for `x ≤ 0`, accurate across the range.
pub fn ln_1m_exp(x: f64) -> f64 {
    if x > -std::f64::consts::LN_2 {
        (-x.exp_m1()).ln()
    } else {
        (-x.exp()).ln_1p()
    }
}

/// `ln(e^x + e^y)`.
pub fn ln_add_exp(x: f64, y: f64) -> f64 {
    let (hi, lo) = if x > y { (x, y) } else { (y, x) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

fn ln_front(x: f64, a: f64, b: f64, ln_b: f64) -> f64 {
    a * x.ln() + b * (-x).ln_1p() - ln_b
}

/// Continued fraction for the incomplete beta (modified Lentz).
fn beta_cf(x: f64, a: f64, b: f64) -> f64 {
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
    for m in 1..=CF_MAX_ITER {
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
        if (del - 1.0).abs() < CF_EPS {
            break;
        }
    }
    h
}
