//! Gibbs sampling from the truncated product-Dirichlet posterior.
//!
//! Each free coordinate `θ_d` is redrawn from its full conditional, a beta
//! distribution in `θ_d / s` (with `s` the item-type budget) truncated to the
//! interval the constraints allow along the coordinate axis.

pub mod ess;
pub mod map;
pub mod truncbeta;

use std::fmt;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    conditional_bounds_ab_cached, conditional_bounds_indicator, conditional_bounds_v,
    in_convex_hull, Interval, BISECTION_TOL,
};
use crate::model::{
    posterior_shapes, AbPolytope, CountData, DirichletPrior, ItemLayout, Theta, VPolytope,
};
use crate::par::{map_indexed, Exec};
use crate::rng::stream;

pub use ess::{effective_sample_size, EssReport};
pub use map::{chebyshev_center, map_estimate};
pub use truncbeta::{sample_truncated_beta, TruncatedBeta};

/// Burn-in when the chain starts at the MAP estimate.
pub const BURNIN_FROM_MAP: usize = 10;
/// Burn-in when the caller supplies the starting point.
pub const BURNIN_FROM_START: usize = 1000;

type Predicate = dyn Fn(&[f64]) -> bool + Send + Sync;

/// A convex region given only by a membership test.
#[derive(Clone)]
pub struct Indicator {
    inside: Arc<Predicate>,
    tol: f64,
}

impl Indicator {
    /// `inside` must describe a convex set; this is not checked.
    pub fn new<F>(inside: F) -> Self
    where
        F: Fn(&[f64]) -> bool + Send + Sync + 'static,
    {
        Self {
            inside: Arc::new(inside),
            tol: BISECTION_TOL,
        }
    }

    /// Bisection tolerance for the boundary search.
    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        (self.inside)(theta)
    }

    pub fn tolerance(&self) -> f64 {
        self.tol
    }
}

impl fmt::Debug for Indicator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Indicator").field("tol", &self.tol).finish()
    }
}

#[derive(Clone, Debug)]
pub enum Constraint {
    Ab(AbPolytope),
    V(VPolytope),
    Indicator(Indicator),
}

/// A constraint region together with the category layout it lives in.
#[derive(Clone, Debug)]
pub struct ConstraintModel {
    layout: ItemLayout,
    constraint: Constraint,
}

impl ConstraintModel {
    pub fn ab(layout: ItemLayout, poly: AbPolytope) -> Result<Self> {
        poly.check_dim(&layout)?;
        Ok(Self {
            layout,
            constraint: Constraint::Ab(poly),
        })
    }

    pub fn v(layout: ItemLayout, poly: VPolytope) -> Result<Self> {
        poly.check_dim(&layout)?;
        Ok(Self {
            layout,
            constraint: Constraint::V(poly),
        })
    }

    pub fn indicator(layout: ItemLayout, indicator: Indicator) -> Self {
        Self {
            layout,
            constraint: Constraint::Indicator(indicator),
        }
    }

    /// The encompassing model: `A` has no rows.
    pub fn unconstrained(layout: ItemLayout) -> Self {
        let poly = AbPolytope::unconstrained(layout.dim());
        Self {
            layout,
            constraint: Constraint::Ab(poly),
        }
    }

    pub fn layout(&self) -> &ItemLayout {
        &self.layout
    }

    pub fn constraint(&self) -> &Constraint {
        &self.constraint
    }

    /// Membership of `theta` in the constraint region.
    pub fn contains(&self, theta: &[f64]) -> Result<bool> {
        if theta.len() != self.layout.dim() {
            return Err(Error::dim("parameter vector", self.layout.dim(), theta.len()));
        }
        match &self.constraint {
            Constraint::Ab(p) => Ok(p.satisfies(theta)),
            Constraint::V(p) => in_convex_hull(p, theta),
            Constraint::Indicator(ind) => Ok(ind.contains(theta)),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScanOrder {
    /// Coordinates in index order every sweep.
    #[default]
    Systematic,
    /// A fresh random permutation of the coordinates every sweep.
    Random,
}

#[derive(Clone, Debug)]
pub struct GibbsOptions {
    /// Total sweeps including burn-in.
    pub iterations: usize,
    /// Sweeps to discard; defaults depend on whether `start` is given.
    pub burnin: Option<usize>,
    pub scan: ScanOrder,
    pub start: Option<Theta>,
}

impl GibbsOptions {
    pub fn new(iterations: usize) -> Self {
        Self {
            iterations,
            burnin: None,
            scan: ScanOrder::Systematic,
            start: None,
        }
    }

    pub fn burnin(mut self, burnin: usize) -> Self {
        self.burnin = Some(burnin);
        self
    }

    pub fn scan(mut self, scan: ScanOrder) -> Self {
        self.scan = scan;
        self
    }

    pub fn start(mut self, start: Theta) -> Self {
        self.start = Some(start);
        self
    }

    fn effective_burnin(&self) -> usize {
        self.burnin.unwrap_or(if self.start.is_some() {
            BURNIN_FROM_START
        } else {
            BURNIN_FROM_MAP
        })
    }
}

/// Retained draws of one chain, stored row-major (`len × dim`).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Chain {
    samples: Vec<f64>,
    dim: usize,
    pub burnin: usize,
    /// Master seed and stream index, when the chain was seeded by this crate.
    pub seed: Option<(u64, u64)>,
    pub scan: ScanOrder,
}

impl Chain {
    pub fn from_samples(samples: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 || !samples.len().is_multiple_of(dim) {
            return Err(Error::InvalidValue(format!(
                "{} values do not form rows of length {}",
                samples.len(),
                dim
            )));
        }
        Ok(Self {
            samples,
            dim,
            burnin: 0,
            seed: None,
            scan: ScanOrder::Systematic,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.samples.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sample(&self, t: usize) -> &[f64] {
        &self.samples[t * self.dim..(t + 1) * self.dim]
    }

    pub fn samples(&self) -> impl Iterator<Item = &[f64]> {
        self.samples.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.samples
    }

    pub fn column(&self, d: usize) -> Vec<f64> {
        self.samples().map(|s| s[d]).collect()
    }

    pub fn last(&self) -> Option<&[f64]> {
        (!self.is_empty()).then(|| self.sample(self.len() - 1))
    }

    pub fn means(&self) -> Vec<f64> {
        let n = self.len().max(1) as f64;
        let mut m = vec![0.0; self.dim];
        for s in self.samples() {
            for (a, x) in m.iter_mut().zip(s) {
                *a += x;
            }
        }
        m.iter_mut().for_each(|v| *v /= n);
        m
    }

    /// Sample standard deviations (denominator `n - 1`).
    pub fn sds(&self) -> Vec<f64> {
        let m = self.means();
        let n = self.len();
        if n < 2 {
            return vec![0.0; self.dim];
        }
        let mut v = vec![0.0; self.dim];
        for s in self.samples() {
            for ((a, x), mu) in v.iter_mut().zip(s).zip(&m) {
                *a += (x - mu) * (x - mu);
            }
        }
        v.iter().map(|a| (a / (n - 1) as f64).sqrt()).collect()
    }

    /// Concatenates chains of equal dimension.
    pub fn pooled(chains: &[Chain]) -> Result<Chain> {
        let dim = chains.first().map(|c| c.dim).ok_or_else(|| {
            Error::InvalidValue("cannot pool an empty list of chains".into())
        })?;
        let mut samples = Vec::new();
        for c in chains {
            if c.dim != dim {
                return Err(Error::dim("chain dimension", dim, c.dim));
            }
            samples.extend_from_slice(&c.samples);
        }
        Chain::from_samples(samples, dim)
    }
}

/// Mutable sampler state for one chain.
pub(crate) struct GibbsKernel<'a> {
    model: &'a ConstraintModel,
    dists: Vec<TruncatedBeta>,
    theta: Vec<f64>,
    /// Cached `A θ` for facet constraints.
    ax: Vec<f64>,
    order: Vec<usize>,
}

impl<'a> GibbsKernel<'a> {
    /// `shapes` are the full-length Dirichlet shapes (`k + β`).
    pub(crate) fn new(model: &'a ConstraintModel, shapes: &[f64], start: Vec<f64>) -> Result<Self> {
        let layout = model.layout();
        if shapes.len() != layout.n_categories() {
            return Err(Error::dim("shapes", layout.n_categories(), shapes.len()));
        }
        layout.check_theta(&start)?;
        if !model.contains(&start)? {
            return Err(Error::InvalidValue(
                "starting point violates the constraints".into(),
            ));
        }
        let dists = (0..layout.dim())
            .map(|d| {
                let last = layout.last_index(layout.item_of(d));
                TruncatedBeta::new(shapes[layout.full_index(d)], shapes[last])
            })
            .collect();
        let mut kernel = Self {
            model,
            dists,
            theta: start,
            ax: Vec::new(),
            order: (0..layout.dim()).collect(),
        };
        kernel.refresh_cache();
        Ok(kernel)
    }

    fn refresh_cache(&mut self) {
        if let Constraint::Ab(poly) = self.model.constraint() {
            self.ax.clear();
            self.ax
                .extend((0..poly.n_rows()).map(|r| poly.row_dot(r, &self.theta)));
        }
    }

    pub(crate) fn theta(&self) -> &[f64] {
        &self.theta
    }

    /// One full sweep over all coordinates.
    pub(crate) fn sweep<R: Rng + ?Sized>(&mut self, scan: ScanOrder, rng: &mut R) -> Result<()> {
        if scan == ScanOrder::Random {
            self.order.shuffle(rng);
        }
        for idx in 0..self.order.len() {
            let d = self.order[idx];
            self.update(d, rng)?;
        }
        // keeps round-off in the cache from accumulating across sweeps
        self.refresh_cache();
        Ok(())
    }

    fn bounds(&self, d: usize, budget: f64) -> Result<Interval> {
        let layout = self.model.layout();
        match self.model.constraint() {
            Constraint::Ab(poly) => {
                conditional_bounds_ab_cached(poly, &self.ax, self.theta[d], budget, d)
            }
            Constraint::V(poly) => conditional_bounds_v(poly, layout, &self.theta, d),
            Constraint::Indicator(ind) => conditional_bounds_indicator(
                |t: &[f64]| ind.contains(t),
                layout,
                &self.theta,
                d,
                ind.tolerance(),
            ),
        }
    }

    fn update<R: Rng + ?Sized>(&mut self, d: usize, rng: &mut R) -> Result<()> {
        let budget = self.model.layout().budget(&self.theta, d);
        let u: f64 = rng.random();
        if budget <= 0.0 {
            self.set(d, 0.0);
            return Ok(());
        }
        let iv = self.bounds(d, budget)?;
        let lo = (iv.lo / budget).clamp(0.0, 1.0);
        let hi = (iv.hi / budget).clamp(lo, 1.0);
        let eta = self.dists[d].quantile(lo, hi, u);
        let value = (budget * eta).clamp(iv.lo.max(0.0), iv.hi.min(budget));
        self.set(d, value);
        Ok(())
    }

    fn set(&mut self, d: usize, value: f64) {
        let old = self.theta[d];
        self.theta[d] = value;
        if let Constraint::Ab(poly) = self.model.constraint() {
            let delta = value - old;
            if delta != 0.0 {
                for &(r, a) in poly.column(d) {
                    self.ax[r] += a * delta;
                }
            }
        }
    }
}

/// Runs one Gibbs chain of `opts.iterations` sweeps and keeps the draws after
/// burn-in.
///
/// Without a starting point the chain starts at the MAP estimate.
pub fn gibbs_chain<R: Rng + ?Sized>(
    model: &ConstraintModel,
    data: &CountData,
    prior: &DirichletPrior,
    opts: &GibbsOptions,
    rng: &mut R,
) -> Result<Chain> {
    let start = match &opts.start {
        Some(s) => s.clone(),
        None => map_estimate(model, data, prior)?,
    };
    run_from(model, data, prior, opts, start, rng)
}

fn run_from<R: Rng + ?Sized>(
    model: &ConstraintModel,
    data: &CountData,
    prior: &DirichletPrior,
    opts: &GibbsOptions,
    start: Theta,
    rng: &mut R,
) -> Result<Chain> {
    data.check(model.layout())?;
    let shapes = posterior_shapes(data, prior)?;
    let mut kernel = GibbsKernel::new(model, &shapes, start.into_inner())?;
    let burnin = opts.effective_burnin().min(opts.iterations);
    let dim = model.layout().dim();
    let mut samples = Vec::with_capacity((opts.iterations - burnin) * dim);
    for t in 0..opts.iterations {
        kernel.sweep(opts.scan, rng)?;
        if t >= burnin {
            samples.extend_from_slice(kernel.theta());
        }
    }
    Ok(Chain {
        samples,
        dim,
        burnin,
        seed: None,
        scan: opts.scan,
    })
}

/// Runs `n_chains` independent chains; chain `c` uses stream `c` of
/// `master_seed`.
///
/// The MAP start (when needed) is computed once and shared. Output is
/// identical for every execution policy and thread count.
pub fn run_parallel_chains(
    model: &ConstraintModel,
    data: &CountData,
    prior: &DirichletPrior,
    opts: &GibbsOptions,
    n_chains: usize,
    master_seed: u64,
    exec: Exec,
) -> Result<Vec<Chain>> {
    if n_chains == 0 {
        return Err(Error::InvalidValue("at least one chain is required".into()));
    }
    let start = match &opts.start {
        Some(s) => s.clone(),
        None => map_estimate(model, data, prior)?,
    };
    let results = map_indexed(exec, n_chains, |c| {
        let mut rng = stream(master_seed, c as u64);
        run_from(model, data, prior, opts, start.clone(), &mut rng).map(|mut chain| {
            chain.seed = Some((master_seed, c as u64));
            chain
        })
    });
    results
        .into_iter()
        .enumerate()
        .map(|(index, r)| {
            r.map_err(|e| Error::Chain {
                index,
                source: Box::new(e),
            })
        })
        .collect()
}

/// Whether every retained draw satisfies the model within tolerance.
pub fn chain_satisfies(model: &ConstraintModel, chain: &Chain) -> Result<bool> {
    for s in chain.samples() {
        if !model.contains(s)? {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn ab_example() -> ConstraintModel {
        let layout = ItemLayout::binary(3).unwrap();
        let poly = AbPolytope::new(
            vec![
                vec![1.0, -1.0, 0.0],
                vec![0.0, 1.0, -1.0],
                vec![0.0, 0.0, 1.0],
            ],
            vec![0.0, 0.0, 0.5],
            3,
        )
        .unwrap();
        ConstraintModel::ab(layout, poly).unwrap()
    }

    #[test]
    fn conjugate_posterior_mean() {
        let layout = ItemLayout::binary(1).unwrap();
        let model = ConstraintModel::unconstrained(layout.clone());
        let data = CountData::new(&layout, vec![16, 24]).unwrap();
        let prior = DirichletPrior::uniform(&layout);
        let chain = gibbs_chain(
            &model,
            &data,
            &prior,
            &GibbsOptions::new(100_000),
            &mut stream(1, 0),
        )
        .unwrap();
        assert!((chain.means()[0] - 17.0 / 42.0).abs() < 0.005);
    }

    #[test]
    fn prior_draws_respect_the_order() {
        let model = ab_example();
        let layout = model.layout().clone();
        let chain = gibbs_chain(
            &model,
            &CountData::zeros(&layout),
            &DirichletPrior::uniform(&layout),
            &GibbsOptions::new(20_000).scan(ScanOrder::Random),
            &mut stream(2, 0),
        )
        .unwrap();
        for s in chain.samples() {
            assert!(s[0] <= s[1] + 1e-12 && s[1] <= s[2] + 1e-12 && s[2] <= 0.5 + 1e-12);
        }
        // uniform on the ordered region: E θ = (1/8, 1/4, 3/8)
        for (m, e) in chain.means().iter().zip([0.125, 0.25, 0.375]) {
            assert!((m - e).abs() < 0.01, "{m} vs {e}");
        }
    }

    #[test]
    fn indicator_chain_stays_inside() {
        let layout = ItemLayout::binary(2).unwrap();
        let ind = Indicator::new(|t: &[f64]| t[0] * t[0] + t[1] * t[1] <= 0.25);
        let model = ConstraintModel::indicator(layout.clone(), ind);
        let start = Theta::new(vec![0.1, 0.1], &layout).unwrap();
        let chain = gibbs_chain(
            &model,
            &CountData::zeros(&layout),
            &DirichletPrior::uniform(&layout),
            &GibbsOptions::new(2_000).start(start),
            &mut stream(3, 0),
        )
        .unwrap();
        assert_eq!(chain.len(), 1_000);
        assert!(chain.samples().all(|s| s[0] * s[0] + s[1] * s[1] <= 0.25));
    }

    #[test]
    fn infeasible_start_is_rejected() {
        let model = ab_example();
        let layout = model.layout().clone();
        let start = Theta::new(vec![0.3, 0.2, 0.3], &layout).unwrap();
        let err = gibbs_chain(
            &model,
            &CountData::zeros(&layout),
            &DirichletPrior::uniform(&layout),
            &GibbsOptions::new(10).start(start),
            &mut stream(3, 0),
        );
        assert!(err.is_err());
    }

    #[test]
    fn single_chain_matches_direct_run() {
        let model = ab_example();
        let layout = model.layout().clone();
        let data = CountData::from_free(&layout, &[3, 5, 9], &[20]).unwrap();
        let prior = DirichletPrior::uniform(&layout);
        let opts = GibbsOptions::new(500);
        let par = run_parallel_chains(&model, &data, &prior, &opts, 1, 11, Exec::Parallel).unwrap();
        let direct = gibbs_chain(&model, &data, &prior, &opts, &mut stream(11, 0)).unwrap();
        assert_eq!(par[0].as_flat(), direct.as_flat());
    }

    #[test]
    fn multinomial_budget_is_respected() {
        let layout = ItemLayout::new(vec![4]).unwrap();
        let model = ConstraintModel::unconstrained(layout.clone());
        let data = CountData::new(&layout, vec![5, 1, 7, 3]).unwrap();
        let chain = gibbs_chain(
            &model,
            &data,
            &DirichletPrior::uniform(&layout),
            &GibbsOptions::new(50_000),
            &mut stream(5, 0),
        )
        .unwrap();
        for s in chain.samples() {
            assert!(s.iter().sum::<f64>() <= 1.0 + 1e-12);
        }
        // Dirichlet(6, 2, 8, 4) means
        for (m, e) in chain.means().iter().zip([0.3, 0.1, 0.4]) {
            assert!((m - e).abs() < 0.01, "{m} vs {e}");
        }
    }
}
