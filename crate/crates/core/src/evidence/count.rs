//! Monte Carlo counting of the probability mass inside a constraint region.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{AbPolytope, DirichletSampler, ItemLayout};
use crate::par::{map_indexed, Exec};
use crate::rng::{derive_seed, stream, StreamRng};
use crate::sampler::{ConstraintModel, GibbsKernel, ScanOrder};

/// Draws per independent RNG stream in plain counting. Fixed so that counts
/// do not depend on the number of threads.
pub const COUNT_BLOCK: u64 = 10_000;

/// Default total draw budget of the automatic procedure.
pub const DEFAULT_MAX_DRAWS: u64 = 1_000_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CountDistribution {
    /// Fixed number of draws; hits are binomial.
    Sampling,
    /// Draws continue until a target number of hits; the number of draws is
    /// negative binomial.
    NegativeBinomial,
}

/// Hits and draws of one step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StepCount {
    /// Number of leading rows of `A` that define this step's region.
    pub rows: usize,
    pub inside: u64,
    pub total: u64,
    /// Equivalent number of independent draws; below `total` when the step
    /// counts autocorrelated Gibbs draws.
    pub effective: f64,
}

impl StepCount {
    pub fn proportion(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.inside as f64 / self.total as f64
        }
    }
}

/// Outcome of a counting run.
///
/// For stepwise runs `inside` and `total` are sums over the steps and the
/// estimate is the product of the per-step proportions.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CountResult {
    pub inside: u64,
    pub total: u64,
    pub per_step: Option<Vec<StepCount>>,
    pub distribution: CountDistribution,
    /// False when a step could not be run or the draw budget ran out.
    pub complete: bool,
}

impl CountResult {
    pub fn single(inside: u64, total: u64) -> Self {
        Self {
            inside,
            total,
            per_step: None,
            distribution: CountDistribution::Sampling,
            complete: true,
        }
    }

    fn from_steps(steps: Vec<StepCount>, distribution: CountDistribution, complete: bool) -> Self {
        Self {
            inside: steps.iter().map(|s| s.inside).sum(),
            total: steps.iter().map(|s| s.total).sum(),
            per_step: Some(steps),
            distribution,
            complete,
        }
    }

    /// `(inside, total)` per step; a single pair for plain counts.
    pub fn steps(&self) -> Vec<(u64, u64)> {
        match &self.per_step {
            Some(s) => s.iter().map(|s| (s.inside, s.total)).collect(),
            None => vec![(self.inside, self.total)],
        }
    }

    /// `(proportion, effective draws)` per step, the inputs of the beta
    /// uncertainty draws.
    pub fn effective_steps(&self) -> Vec<(f64, f64)> {
        match &self.per_step {
            Some(s) => s.iter().map(|s| (s.proportion(), s.effective)).collect(),
            None => vec![(self.proportion(), self.total as f64)],
        }
    }

    /// Relative standard error of the estimate from the effective draws.
    pub fn relative_se(&self) -> f64 {
        self.effective_steps()
            .iter()
            .map(|&(p, n)| (1.0 - p) / (p * n))
            .sum::<f64>()
            .sqrt()
    }

    /// Product of the per-step proportions.
    pub fn proportion(&self) -> f64 {
        self.steps()
            .iter()
            .map(|&(i, t)| if t == 0 { 0.0 } else { i as f64 / t as f64 })
            .product()
    }

    /// True if some step has no hits.
    pub fn has_zero_step(&self) -> bool {
        self.steps().iter().any(|&(i, _)| i == 0)
    }

    /// One-sided 95% upper bound on the proportion: steps without hits use
    /// `3 / T`, the others their point estimate.
    pub fn upper_bound(&self) -> f64 {
        self.steps()
            .iter()
            .map(|&(i, t)| {
                if t == 0 {
                    1.0
                } else if i == 0 {
                    (3.0 / t as f64).min(1.0)
                } else {
                    i as f64 / t as f64
                }
            })
            .product()
    }
}

fn count_block(
    model: &ConstraintModel,
    sampler: &DirichletSampler,
    draws: u64,
    rng: &mut StreamRng,
) -> Result<(u64, Option<Vec<f64>>)> {
    let mut theta = vec![0.0; model.layout().dim()];
    let mut inside = 0;
    let mut last = None;
    for _ in 0..draws {
        sampler.sample_into(rng, &mut theta);
        if model.contains(&theta)? {
            inside += 1;
            last = Some(theta.clone());
        }
    }
    Ok((inside, last))
}

/// Counts and last hit of `draws` unconstrained Dirichlet draws, in blocks of
/// [`COUNT_BLOCK`] with block `j` on stream `j` of `seed`.
fn count_parallel(
    model: &ConstraintModel,
    shapes: &[f64],
    draws: u64,
    seed: u64,
    exec: Exec,
) -> Result<(u64, Option<Vec<f64>>)> {
    let sampler = DirichletSampler::new(shapes, model.layout())?;
    let n_blocks = draws.div_ceil(COUNT_BLOCK) as usize;
    let blocks = map_indexed(exec, n_blocks, |j| {
        let size = COUNT_BLOCK.min(draws - j as u64 * COUNT_BLOCK);
        count_block(model, &sampler, size, &mut stream(seed, j as u64))
    });
    let mut inside = 0;
    let mut last = None;
    for block in blocks {
        let (i, l) = block?;
        inside += i;
        if l.is_some() {
            last = l;
        }
    }
    Ok((inside, last))
}

/// Proportion of `draws` independent Dirichlet(`shapes`) draws that land in
/// the region of `model`.
///
/// With prior shapes this estimates `c`; with posterior shapes, `f`.
pub fn count_in_region(
    model: &ConstraintModel,
    shapes: &[f64],
    draws: u64,
    seed: u64,
    exec: Exec,
) -> Result<CountResult> {
    if draws == 0 {
        return Err(Error::InvalidValue("number of draws must be positive".into()));
    }
    let (inside, _) = count_parallel(model, shapes, draws, seed, exec)?;
    Ok(CountResult::single(inside, draws))
}

/// Reorders the rows of `poly` so that the most frequently violated come
/// first, which makes rejection checks exit earlier.
///
/// Violations are counted on `pilot` unconstrained draws. Membership, and so
/// every count, is unchanged.
pub fn reorder_by_violations(
    poly: &AbPolytope,
    layout: &ItemLayout,
    shapes: &[f64],
    pilot: u64,
    seed: u64,
) -> Result<AbPolytope> {
    poly.check_dim(layout)?;
    let sampler = DirichletSampler::new(shapes, layout)?;
    let mut rng = stream(derive_seed(seed, 0x7265_6f72), 0);
    let mut violations = vec![0u64; poly.n_rows()];
    let mut theta = vec![0.0; layout.dim()];
    for _ in 0..pilot {
        sampler.sample_into(&mut rng, &mut theta);
        for (r, v) in violations.iter_mut().enumerate() {
            if poly.row_dot(r, &theta) > poly.rhs()[r] + crate::model::CONSTRAINT_TOL {
                *v += 1;
            }
        }
    }
    let mut order: Vec<usize> = (0..poly.n_rows()).collect();
    order.sort_by(|&a, &b| violations[b].cmp(&violations[a]).then(a.cmp(&b)));
    Ok(poly.permuted(&order))
}

fn check_steps(steps: &[usize], rows: usize) -> Result<()> {
    if steps.is_empty() {
        return Err(Error::InvalidValue("at least one step is required".into()));
    }
    if steps[0] == 0 || steps.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidValue(
            "steps must be strictly increasing row counts starting above zero".into(),
        ));
    }
    if *steps.last().unwrap() != rows {
        return Err(Error::InvalidValue(format!(
            "the last step must equal the number of rows ({}), got {}",
            rows,
            steps.last().unwrap()
        )));
    }
    Ok(())
}

/// Largest number of stored batch sums before neighbours are merged.
const MAX_BATCHES: usize = 1 << 16;

/// Hit indicators of a Gibbs step, kept as sums over batches whose length
/// doubles whenever too many are stored.
#[derive(Debug)]
struct HitSeries {
    batch: u64,
    sums: Vec<u64>,
    current: u64,
    filled: u64,
}

impl HitSeries {
    fn new() -> Self {
        Self {
            batch: 1,
            sums: Vec::new(),
            current: 0,
            filled: 0,
        }
    }

    fn push(&mut self, hit: bool) {
        self.current += hit as u64;
        self.filled += 1;
        if self.filled == self.batch {
            self.sums.push(self.current);
            self.current = 0;
            self.filled = 0;
            if self.sums.len() == 2 * MAX_BATCHES {
                self.sums = self.sums.chunks(2).map(|c| c[0] + c[1]).collect();
                self.batch *= 2;
            }
        }
    }

    /// Independent draws carrying the same information about the hit rate,
    /// at most `total`. The partial last batch is ignored.
    fn effective(&self, total: u64) -> f64 {
        let k = self.sums.len();
        if k < 20 {
            return total as f64;
        }
        let b = self.batch as f64;
        let x: Vec<f64> = self.sums.iter().map(|&v| v as f64).collect();
        let m = x.iter().sum::<f64>() / k as f64;
        let p = m / b;
        let var = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (k as f64 - 1.0);
        if !(p > 0.0 && p < 1.0 && var > 0.0) {
            return total as f64;
        }
        // Var(p̂) = var / (ess b²) set equal to p(1 - p) / n_eff
        let (ess, _) = crate::sampler::ess::ess_of(&x);
        (p * (1.0 - p) * ess * b * b / var).min(total as f64)
    }
}

/// One step of a stepwise or automatic run. Step 0 draws independently from
/// the Dirichlet; step `m > 0` runs a Gibbs chain on the region of step
/// `m - 1` and counts the draws that also satisfy its added rows.
struct Step<'a> {
    poly: &'a AbPolytope,
    rows: std::ops::Range<usize>,
    source: Source<'a>,
    rng: StreamRng,
    inside: u64,
    total: u64,
    last_hit: Option<Vec<f64>>,
    hits: HitSeries,
}

enum Source<'a> {
    Direct(DirichletSampler, Vec<f64>),
    Gibbs(Option<GibbsKernel<'a>>),
}

impl<'a> Step<'a> {
    /// Draws until `limit` draws are made or `stop_at` hits are reached.
    fn extend(&mut self, limit: u64, stop_at: Option<u64>) -> Result<()> {
        for _ in 0..limit {
            if stop_at.is_some_and(|s| self.inside >= s) {
                break;
            }
            let theta: &[f64] = match &mut self.source {
                Source::Direct(sampler, buf) => {
                    sampler.sample_into(&mut self.rng, buf);
                    buf
                }
                Source::Gibbs(Some(kernel)) => {
                    kernel.sweep(ScanOrder::Systematic, &mut self.rng)?;
                    kernel.theta()
                }
                Source::Gibbs(None) => return Ok(()),
            };
            self.total += 1;
            let hit = self.poly.satisfies_rows(theta, self.rows.clone());
            if hit {
                self.inside += 1;
                self.last_hit = Some(theta.to_vec());
            }
            if matches!(self.source, Source::Gibbs(_)) {
                self.hits.push(hit);
            }
        }
        Ok(())
    }

    fn ready(&self) -> bool {
        !matches!(self.source, Source::Gibbs(None))
    }

    fn count(&self) -> StepCount {
        let effective = match self.source {
            Source::Direct(..) => self.total as f64,
            Source::Gibbs(_) => self.hits.effective(self.total),
        };
        StepCount {
            rows: self.rows.end,
            inside: self.inside,
            total: self.total,
            effective,
        }
    }
}

struct Stages {
    models: Vec<ConstraintModel>,
}

impl Stages {
    /// Gibbs regions: model `m` is the polytope of the first `steps[m]` rows.
    fn new(poly: &AbPolytope, layout: &ItemLayout, steps: &[usize]) -> Result<Self> {
        let models = steps[..steps.len() - 1]
            .iter()
            .map(|&r| ConstraintModel::ab(layout.clone(), poly.head(r)))
            .collect::<Result<_>>()?;
        Ok(Self { models })
    }

    fn build<'a>(
        &'a self,
        poly: &'a AbPolytope,
        layout: &ItemLayout,
        steps: &[usize],
        shapes: &[f64],
        seed: u64,
    ) -> Result<Vec<Step<'a>>> {
        let mut out = Vec::with_capacity(steps.len());
        for (m, &rows) in steps.iter().enumerate() {
            let start = if m == 0 { 0 } else { steps[m - 1] };
            let source = if m == 0 {
                Source::Direct(DirichletSampler::new(shapes, layout)?, vec![0.0; layout.dim()])
            } else {
                Source::Gibbs(None)
            };
            out.push(Step {
                poly,
                rows: start..rows,
                source,
                rng: stream(derive_seed(seed, m as u64 + 1), 0),
                inside: 0,
                total: 0,
                last_hit: None,
                hits: HitSeries::new(),
            });
        }
        Ok(out)
    }

    /// Starts the chain of step `m` from the last hit of step `m - 1`.
    fn start<'a>(&'a self, steps: &mut [Step<'a>], m: usize, shapes: &[f64]) -> Result<bool> {
        if steps[m].ready() {
            return Ok(true);
        }
        let Some(hit) = steps[m - 1].last_hit.clone() else {
            return Ok(false);
        };
        let kernel = GibbsKernel::new(&self.models[m - 1], shapes, hit)?;
        steps[m].source = Source::Gibbs(Some(kernel));
        Ok(true)
    }
}

/// Stepwise estimate of the mass inside `A θ ≤ b`.
///
/// `steps` are increasing row counts ending at the number of rows. Step 1
/// counts independent draws inside the first `steps[0]` rows; step `m`
/// runs the Gibbs sampler on the region of step `m - 1` for `draws`
/// iterations and counts those satisfying the added rows. The estimate is
/// the product of the per-step proportions. If a step has no hits the
/// following steps cannot start and the result is marked incomplete.
pub fn stepwise_count(
    poly: &AbPolytope,
    layout: &ItemLayout,
    steps: &[usize],
    shapes: &[f64],
    draws: u64,
    seed: u64,
    exec: Exec,
) -> Result<CountResult> {
    poly.check_dim(layout)?;
    check_steps(steps, poly.n_rows())?;
    if draws == 0 {
        return Err(Error::InvalidValue("number of draws must be positive".into()));
    }
    let first = ConstraintModel::ab(layout.clone(), poly.head(steps[0]))?;
    let (inside, last_hit) = count_parallel(&first, shapes, draws, derive_seed(seed, 1), exec)?;

    let stages = Stages::new(poly, layout, steps)?;
    let mut run = stages.build(poly, layout, steps, shapes, seed)?;
    run[0].inside = inside;
    run[0].total = draws;
    run[0].last_hit = last_hit;
    let mut complete = true;
    for m in 1..steps.len() {
        if !stages.start(&mut run, m, shapes)? {
            complete = false;
            break;
        }
        run[m].extend(draws, None)?;
    }
    let counts = run.iter().map(Step::count).collect();
    Ok(CountResult::from_steps(counts, CountDistribution::Sampling, complete))
}

#[derive(Clone, Copy, Debug)]
pub struct AutoOptions {
    /// Minimum number of hits per step.
    pub cmin: u64,
    /// Draws per batch; defaults to `max(10 cmin, 10⁴)`.
    pub block: Option<u64>,
    /// Total draws over all steps before giving up.
    pub max_draws: u64,
}

impl AutoOptions {
    pub fn new(cmin: u64) -> Self {
        Self {
            cmin,
            block: None,
            max_draws: DEFAULT_MAX_DRAWS,
        }
    }

    pub fn block_size(&self) -> u64 {
        self.block.unwrap_or((self.cmin * 10).max(10_000))
    }
}

/// Automatic stepwise counting.
///
/// Every step first receives one batch of draws. Then the step with the
/// fewest hits (the earliest on ties) is extended, stopping as soon as it
/// reaches `cmin` hits or a batch is used up, until all steps have at least
/// `cmin` hits. The draw counts are negative binomial. When the budget runs
/// out the partial result is returned with `complete = false`.
pub fn automatic_count(
    poly: &AbPolytope,
    layout: &ItemLayout,
    steps: &[usize],
    shapes: &[f64],
    opts: &AutoOptions,
    seed: u64,
) -> Result<CountResult> {
    poly.check_dim(layout)?;
    check_steps(steps, poly.n_rows())?;
    if opts.cmin == 0 {
        return Err(Error::InvalidValue("cmin must be at least 1".into()));
    }
    let block = opts.block_size().max(1);
    let stages = Stages::new(poly, layout, steps)?;
    let mut run = stages.build(poly, layout, steps, shapes, seed)?;
    let mut used = 0u64;
    let budget_left = |used: u64| opts.max_draws.saturating_sub(used);

    for m in 0..run.len() {
        if m > 0 && !stages.start(&mut run, m, shapes)? {
            continue;
        }
        let before = run[m].total;
        run[m].extend(block.min(budget_left(used)), None)?;
        used += run[m].total - before;
    }

    let mut complete = true;
    loop {
        let Some(m) = (0..run.len())
            .filter(|&m| run[m].inside < opts.cmin)
            .min_by_key(|&m| (run[m].inside, m))
        else {
            break;
        };
        if budget_left(used) == 0 {
            complete = false;
            break;
        }
        if m > 0 && !stages.start(&mut run, m, shapes)? {
            // unreachable: the predecessor has hits whenever this step is the minimum
            complete = false;
            break;
        }
        let before = run[m].total;
        run[m].extend(block.min(budget_left(used)), Some(opts.cmin))?;
        used += run[m].total - before;
    }
    let counts = run.iter().map(Step::count).collect();
    Ok(CountResult::from_steps(counts, CountDistribution::NegativeBinomial, complete))
}

/// Draws `Beta(p n + 1, (1 - p) n + 1)` per step of proportion `p` and
/// effective draws `n`, and multiplies. With independent draws this is
/// `Beta(inside + 1, total - inside + 1)`.
pub(crate) fn draw_proportion<R: Rng + ?Sized>(steps: &[(f64, f64)], rng: &mut R) -> f64 {
    use rand_distr::{Beta, Distribution};
    steps
        .iter()
        .map(|&(p, n)| {
            Beta::new(p * n + 1.0, (1.0 - p) * n + 1.0)
                .expect("positive shapes")
                .sample(rng)
        })
        .product()
}
