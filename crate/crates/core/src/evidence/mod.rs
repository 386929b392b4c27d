//! Encompassing Bayes factors.
//!
//! The Bayes factor of a constrained model against the unconstrained one is
//! `f / c`, the posterior over the prior mass of the constraint region under
//! the unconstrained Dirichlet. Both constants are estimated by counting
//! ([`count`]); their Monte Carlo error is propagated through beta posteriors
//! on the counted proportions.

pub mod count;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::{derive_seed, stream};

pub use count::{
    automatic_count, count_in_region, reorder_by_violations, stepwise_count, AutoOptions,
    CountDistribution, CountResult, StepCount,
};

/// Default number of uncertainty draws.
pub const DEFAULT_UNCERTAINTY_DRAWS: usize = 5000;

/// A normalising constant, either counted or known in closed form.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstantEstimate {
    Counted(CountResult),
    Exact(f64),
}

impl ConstantEstimate {
    pub fn point(&self) -> f64 {
        match self {
            Self::Counted(c) => c.proportion(),
            Self::Exact(v) => *v,
        }
    }

    fn is_zero(&self) -> bool {
        match self {
            Self::Counted(c) => c.has_zero_step(),
            Self::Exact(v) => *v == 0.0,
        }
    }

    fn upper_bound(&self) -> f64 {
        match self {
            Self::Counted(c) => c.upper_bound(),
            Self::Exact(v) => *v,
        }
    }

    fn draw<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Self::Counted(c) => count::draw_proportion(&c.effective_steps(), rng),
            Self::Exact(v) => *v,
        }
    }
}

/// Point estimate with Monte Carlo uncertainty.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BfSummary {
    pub estimate: f64,
    /// Standard deviation of the uncertainty draws.
    pub se: f64,
    pub q05: f64,
    pub q95: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvidenceStatus {
    Estimated,
    /// No posterior hits: only an upper bound on `bf_0u` is available.
    UpperBound,
    /// No prior hits: only a lower bound on `bf_0u` is available.
    LowerBound,
    /// No hits on either side.
    Indeterminate,
}

/// One-sided 95% bounds derived from the rule of three.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BfBounds {
    pub f_upper: Option<f64>,
    pub c_upper: Option<f64>,
    pub bf_0u_lower: Option<f64>,
    pub bf_0u_upper: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvidenceResult {
    pub status: EvidenceStatus,
    pub c_hat: f64,
    pub f_hat: f64,
    /// Constrained against unconstrained, `f / c`.
    pub bf_0u: Option<BfSummary>,
    /// Unconstrained against constrained, `c / f`.
    pub bf_u0: Option<BfSummary>,
    /// Constrained against its complement, `f (1 - c) / (c (1 - f))`.
    pub bf_00c: Option<BfSummary>,
    pub bounds: Option<BfBounds>,
    /// Number of uncertainty draws.
    pub r: usize,
}

/// `f(1 - c) / (c(1 - f))`; `None` if either proportion is 0 or 1.
pub fn complement_bf(f: f64, c: f64) -> Option<f64> {
    let v = f * (1.0 - c) / (c * (1.0 - f));
    (v.is_finite() && v > 0.0).then_some(v)
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn summarize(estimate: f64, mut draws: Vec<f64>) -> BfSummary {
    draws.retain(|v| v.is_finite());
    if draws.len() < 2 {
        return BfSummary {
            estimate,
            se: 0.0,
            q05: estimate,
            q95: estimate,
        };
    }
    let n = draws.len() as f64;
    let mean = draws.iter().sum::<f64>() / n;
    let se = (draws.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt();
    draws.sort_by(f64::total_cmp);
    BfSummary {
        estimate,
        se,
        q05: quantile(&draws, 0.05),
        q95: quantile(&draws, 0.95),
    }
}

/// Encompassing Bayes factors from prior (`c`) and posterior (`f`) counts.
///
/// Uncertainty comes from `r` joint draws of `f` and `c` from the beta
/// posteriors of the counted proportions (products over steps for stepwise
/// counts). Gibbs-based steps enter with their effective number of draws. A side without hits yields rule-of-three bounds instead of point
/// estimates.
pub fn encompassing_bf(
    prior: &ConstantEstimate,
    posterior: &ConstantEstimate,
    r: usize,
    seed: u64,
) -> Result<EvidenceResult> {
    for (name, k) in [("prior", prior), ("posterior", posterior)] {
        if let ConstantEstimate::Exact(v) = k {
            if !(0.0..=1.0).contains(v) {
                return Err(Error::InvalidValue(format!(
                    "{} constant must lie in [0, 1], got {}",
                    name, v
                )));
            }
        }
    }
    if r == 0 {
        return Err(Error::InvalidValue("at least one uncertainty draw is required".into()));
    }
    let c_hat = prior.point();
    let f_hat = posterior.point();
    let (c_zero, f_zero) = (prior.is_zero(), posterior.is_zero());
    if c_zero || f_zero {
        let c_upper = c_zero.then(|| prior.upper_bound());
        let f_upper = f_zero.then(|| posterior.upper_bound());
        let (status, lower, upper) = match (f_zero, c_zero) {
            (true, false) => (EvidenceStatus::UpperBound, None, Some(posterior.upper_bound() / c_hat)),
            (false, true) => (EvidenceStatus::LowerBound, Some(f_hat / prior.upper_bound()), None),
            _ => (EvidenceStatus::Indeterminate, None, None),
        };
        return Ok(EvidenceResult {
            status,
            c_hat,
            f_hat,
            bf_0u: None,
            bf_u0: None,
            bf_00c: None,
            bounds: Some(BfBounds {
                f_upper,
                c_upper,
                bf_0u_lower: lower,
                bf_0u_upper: upper,
            }),
            r,
        });
    }

    let mut rng = stream(derive_seed(seed, 0xbf), 0);
    let mut b0u = Vec::with_capacity(r);
    let mut b00c = Vec::with_capacity(r);
    for _ in 0..r {
        let f = posterior.draw(&mut rng);
        let c = prior.draw(&mut rng);
        b0u.push(f / c);
        b00c.push(complement_bf(f, c).unwrap_or(f64::NAN));
    }
    let bu0: Vec<f64> = b0u.iter().map(|b| 1.0 / b).collect();
    let bf = f_hat / c_hat;
    Ok(EvidenceResult {
        status: EvidenceStatus::Estimated,
        c_hat,
        f_hat,
        bf_0u: Some(summarize(bf, b0u)),
        bf_u0: Some(summarize(1.0 / bf, bu0)),
        bf_00c: complement_bf(f_hat, c_hat).map(|v| summarize(v, b00c)),
        bounds: None,
        r,
    })
}
