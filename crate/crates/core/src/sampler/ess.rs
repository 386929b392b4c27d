//! Effective sample size from summed autocorrelations.
//!
//! Uses Geyer's initial monotone positive sequence: autocorrelations are
//! summed in adjacent pairs, stopping at the first non-positive pair, with
//! each pair capped by its predecessor.

use serde::Serialize;

use super::Chain;

/// Per-coordinate effective sample sizes of one chain.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EssReport {
    pub ess: Vec<f64>,
    /// `ess / len` per coordinate.
    pub ratio: Vec<f64>,
    /// Coordinates with zero variance; their ESS is reported as 1.
    pub degenerate: Vec<bool>,
    pub len: usize,
}

impl EssReport {
    pub fn min_ratio(&self) -> f64 {
        self.ratio.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn mean_ratio(&self) -> f64 {
        self.ratio.iter().sum::<f64>() / self.ratio.len().max(1) as f64
    }
}

pub fn effective_sample_size(chain: &Chain) -> EssReport {
    let n = chain.len();
    let mut ess = Vec::with_capacity(chain.dim());
    let mut degenerate = Vec::with_capacity(chain.dim());
    for d in 0..chain.dim() {
        let (e, deg) = ess_of(&chain.column(d));
        ess.push(e);
        degenerate.push(deg);
    }
    let ratio = ess.iter().map(|e| e / n.max(1) as f64).collect();
    EssReport {
        ess,
        ratio,
        degenerate,
        len: n,
    }
}

/// ESS of a single series; the flag marks a constant series.
pub fn ess_of(x: &[f64]) -> (f64, bool) {
    let n = x.len();
    if n < 2 {
        return (n as f64, true);
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let gamma0 = centered.iter().map(|v| v * v).sum::<f64>() / n as f64;
    if gamma0 <= (mean.abs() * f64::EPSILON).powi(2) || gamma0 < f64::MIN_POSITIVE {
        return (1.0, true);
    }
    let autocov = |lag: usize| -> f64 {
        centered[..n - lag]
            .iter()
            .zip(&centered[lag..])
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / n as f64
    };
    let mut sum = 0.0;
    let mut prev_pair = f64::INFINITY;
    let mut lag = 0;
    while lag + 1 < n {
        let rho0 = if lag == 0 { 1.0 } else { autocov(lag) / gamma0 };
        let rho1 = autocov(lag + 1) / gamma0;
        let pair = rho0 + rho1;
        if pair <= 0.0 {
            break;
        }
        let pair = pair.min(prev_pair);
        sum += pair;
        prev_pair = pair;
        lag += 2;
    }
    // τ = 2 Σ Γ_k - 1, where the first pair includes ρ_0 = 1; ESS capped at n log10 n
    let tau = 2.0 * sum - 1.0;
    let cap = n as f64 * (n as f64).log10().max(1.0);
    ((n as f64 / tau.max(1e-12)).min(cap), false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn iid_draws() {
        let mut rng = crate::rng::stream(1, 0);
        let x: Vec<f64> = (0..20_000).map(|_| rng.random::<f64>()).collect();
        let (e, deg) = ess_of(&x);
        assert!(!deg);
        let r = e / x.len() as f64;
        assert!((0.9..=1.1).contains(&r), "ratio {r}");
    }

    #[test]
    fn ar1_half() {
        let mut rng = crate::rng::stream(2, 0);
        let phi = 0.5;
        let mut v = 0.0;
        let x: Vec<f64> = (0..100_000)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                v = phi * v + z;
                v
            })
            .collect();
        let r = ess_of(&x).0 / x.len() as f64;
        assert!((r - 1.0 / 3.0).abs() < 0.05, "ratio {r}");
    }

    #[test]
    fn constant_chain_is_flagged() {
        let chain = Chain::from_samples(vec![0.25; 300], 1).unwrap();
        let rep = effective_sample_size(&chain);
        assert_eq!(rep.ess, vec![1.0]);
        assert!(rep.degenerate[0]);
    }
}
