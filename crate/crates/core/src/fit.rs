//! Goodness of fit: Pearson's X² and posterior-predictive p-values.

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{complete_theta, CountData, ItemLayout};
use crate::par::{map_indexed, Exec};
use crate::rng::stream;
use crate::sampler::Chain;

/// Posterior draws per RNG stream. Fixed so the result does not depend on the
/// number of threads.
const PPP_BLOCK: usize = 1024;

/// Per-item-type X² between counts `k` and expectations `n_i θ_ij`.
///
/// Cells with zero expectation contribute 0 if empty and make the item
/// type's statistic infinite otherwise.
pub fn x2_by_item(k: &[u64], n: &[u64], probs: &[f64], layout: &ItemLayout) -> Vec<f64> {
    (0..layout.n_items())
        .map(|i| {
            let total = n[i] as f64;
            layout
                .full_range(i)
                .map(|c| {
                    let expected = probs[c] * total;
                    let obs = k[c] as f64;
                    if expected <= 0.0 {
                        if k[c] == 0 {
                            0.0
                        } else {
                            f64::INFINITY
                        }
                    } else {
                        (obs - expected) * (obs - expected) / expected
                    }
                })
                .sum()
        })
        .collect()
}

/// Pearson's X² summed over all cells, using the completed probabilities.
pub fn x2_statistic(data: &CountData, theta: &[f64], layout: &ItemLayout) -> Result<f64> {
    data.check(layout)?;
    let probs = complete_theta(theta, layout)?;
    Ok(x2_by_item(data.k(), data.n(), &probs, layout).iter().sum())
}

/// Product-multinomial frequencies at `probs` via sequential conditional
/// binomials; each item type sums exactly to its `n_i`.
pub fn sample_counts<R: Rng + ?Sized>(
    n: &[u64],
    probs: &[f64],
    layout: &ItemLayout,
    rng: &mut R,
    out: &mut [u64],
) {
    for i in 0..layout.n_items() {
        let mut left = n[i];
        let mut mass = 1.0;
        let range = layout.full_range(i);
        let last = range.end - 1;
        for c in range {
            if c == last {
                out[c] = left;
                break;
            }
            let p = if mass > 0.0 {
                (probs[c] / mass).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let x = if left == 0 || p == 0.0 {
                0
            } else if p >= 1.0 {
                left
            } else {
                Binomial::new(left, p).expect("valid binomial").sample(rng)
            };
            out[c] = x;
            left -= x;
            mass -= probs[c];
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PppResult {
    /// Proportion of draws with `X²_obs < X²_pred`, ties counting one half.
    pub p_value: f64,
    /// The same proportion computed per item type.
    pub p_by_item: Vec<f64>,
    pub x2_obs: Vec<f64>,
    pub x2_pred: Vec<f64>,
    /// Number of posterior draws used.
    pub t: usize,
}

fn score(obs: f64, pred: f64) -> f64 {
    if obs < pred {
        1.0
    } else if obs == pred {
        0.5
    } else {
        0.0
    }
}

/// Posterior-predictive p-value of the Pearson X² statistic.
///
/// For each draw `θ(t)` of `chain`, X²_obs compares the data with `θ(t)` and
/// X²_pred compares frequencies simulated at `θ(t)` with `θ(t)`. Draws are
/// processed in fixed blocks on separate streams of `seed`.
pub fn ppp_value(
    chain: &Chain,
    data: &CountData,
    layout: &ItemLayout,
    seed: u64,
    exec: Exec,
) -> Result<PppResult> {
    data.check(layout)?;
    if chain.dim() != layout.dim() {
        return Err(Error::dim("chain dimension", layout.dim(), chain.dim()));
    }
    if chain.is_empty() {
        return Err(Error::InvalidValue("chain has no draws".into()));
    }
    let t_total = chain.len();
    let n_items = layout.n_items();
    let blocks = map_indexed(exec, t_total.div_ceil(PPP_BLOCK), |b| -> Result<_> {
        let mut rng = stream(seed, b as u64);
        let mut k_pred = vec![0u64; layout.n_categories()];
        let end = ((b + 1) * PPP_BLOCK).min(t_total);
        let mut rows = Vec::with_capacity(end - b * PPP_BLOCK);
        for t in b * PPP_BLOCK..end {
            let probs = complete_theta(chain.sample(t), layout)?;
            sample_counts(data.n(), &probs, layout, &mut rng, &mut k_pred);
            let obs = x2_by_item(data.k(), data.n(), &probs, layout);
            let pred = x2_by_item(&k_pred, data.n(), &probs, layout);
            rows.push((obs, pred));
        }
        Ok(rows)
    });
    let mut x2_obs = Vec::with_capacity(t_total);
    let mut x2_pred = Vec::with_capacity(t_total);
    let mut total = 0.0;
    let mut by_item = vec![0.0; n_items];
    for block in blocks {
        for (obs, pred) in block? {
            for i in 0..n_items {
                by_item[i] += score(obs[i], pred[i]);
            }
            let (o, p): (f64, f64) = (obs.iter().sum(), pred.iter().sum());
            total += score(o, p);
            x2_obs.push(o);
            x2_pred.push(p);
        }
    }
    let t = t_total as f64;
    Ok(PppResult {
        p_value: total / t,
        p_by_item: by_item.iter().map(|v| v / t).collect(),
        x2_obs,
        x2_pred,
        t: t_total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn exact_expectation_is_zero() {
        let layout = ItemLayout::binary(1).unwrap();
        let data = CountData::new(&layout, vec![20, 20]).unwrap();
        assert_eq!(x2_statistic(&data, &[0.5], &layout).unwrap(), 0.0);
    }

    #[test]
    fn hand_computed_value() {
        let layout = ItemLayout::binary(1).unwrap();
        let data = CountData::new(&layout, vec![16, 24]).unwrap();
        assert_abs_diff_eq!(x2_statistic(&data, &[0.5], &layout).unwrap(), 1.6, epsilon = 1e-12);
    }

    #[test]
    fn additive_over_item_types() {
        let one = ItemLayout::binary(1).unwrap();
        let two = ItemLayout::binary(2).unwrap();
        let a = x2_statistic(&CountData::new(&one, vec![16, 24]).unwrap(), &[0.5], &one).unwrap();
        let b = x2_statistic(&CountData::new(&one, vec![3, 12]).unwrap(), &[0.3], &one).unwrap();
        let ab = x2_statistic(&CountData::new(&two, vec![16, 24, 3, 12]).unwrap(), &[0.5, 0.3], &two)
            .unwrap();
        assert_abs_diff_eq!(ab, a + b, epsilon = 1e-12);
    }

    #[test]
    fn zero_expectation_conventions() {
        let layout = ItemLayout::binary(1).unwrap();
        let empty = CountData::new(&layout, vec![0, 10]).unwrap();
        assert_eq!(x2_statistic(&empty, &[0.0], &layout).unwrap(), 0.0);
        let hit = CountData::new(&layout, vec![1, 9]).unwrap();
        assert_eq!(x2_statistic(&hit, &[0.0], &layout).unwrap(), f64::INFINITY);
        assert_eq!(score(f64::INFINITY, 3.0), 0.0);
    }

    #[test]
    fn gross_misfit() {
        let layout = ItemLayout::binary(2).unwrap();
        let data = CountData::new(&layout, vec![0, 45, 45, 0]).unwrap();
        // draws concentrated on the opposite pattern
        let chain = Chain::from_samples([0.9, 0.1].repeat(2000), 2).unwrap();
        let r = ppp_value(&chain, &data, &layout, 1, Exec::Parallel).unwrap();
        assert!(r.p_value < 0.01);
        assert_eq!(r.t, 2000);
    }

    #[test]
    fn independent_of_execution_policy() {
        let layout = ItemLayout::new(vec![3, 2]).unwrap();
        let data = CountData::new(&layout, vec![5, 3, 2, 4, 6]).unwrap();
        let chain = Chain::from_samples([0.5, 0.3, 0.4].repeat(3000), 3).unwrap();
        let a = ppp_value(&chain, &data, &layout, 7, Exec::Sequential).unwrap();
        let b = ppp_value(&chain, &data, &layout, 7, Exec::Parallel).unwrap();
        assert_eq!(a, b);
    }

    proptest! {
        #[test]
        fn predictive_counts_keep_totals(p in 0.0f64..1.0, q in 0.0f64..1.0, n1 in 0u64..500, n2 in 0u64..500, seed in any::<u64>()) {
            let layout = ItemLayout::new(vec![3, 2]).unwrap();
            let probs = [p * q, p * (1.0 - q), 1.0 - p, q, 1.0 - q];
            let mut out = [0u64; 5];
            sample_counts(&[n1, n2], &probs, &layout, &mut stream(seed, 0), &mut out);
            prop_assert_eq!(out[0] + out[1] + out[2], n1);
            prop_assert_eq!(out[3] + out[4], n2);
        }

        #[test]
        fn x2_is_nonnegative(k1 in 0u64..50, k2 in 0u64..50, t in 0.01f64..0.99) {
            let layout = ItemLayout::binary(1).unwrap();
            let data = CountData::new(&layout, vec![k1, k2]).unwrap();
            prop_assert!(x2_statistic(&data, &[t], &layout).unwrap() >= 0.0);
        }
    }
}
