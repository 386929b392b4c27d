//! Multinomial data model: category layout, counts, parameter vectors,
//! constraint representations and the (truncated) Dirichlet densities.
//!
//! Counts are stored for all `J` categories; parameter vectors store only the
//! `D = J - I` free probabilities, the last category of every item type being
//! implied by the sum-to-one constraint.

use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Slack allowed on `A θ ≤ b` so that exact boundary points are accepted.
pub const CONSTRAINT_TOL: f64 = 1e-10;

/// Slack allowed on simplex membership of parameter vectors.
pub const SIMPLEX_TOL: f64 = 1e-10;

/// Number of response options per item type and the derived index maps.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ItemLayout {
    options: Vec<usize>,
    full_offsets: Vec<usize>,
    free_offsets: Vec<usize>,
    free_item: Vec<usize>,
}

impl ItemLayout {
    pub fn new(options: Vec<usize>) -> Result<Self> {
        if options.is_empty() {
            return Err(Error::Layout("at least one item type is required".into()));
        }
        if let Some((i, &j)) = options.iter().enumerate().find(|(_, &j)| j < 2) {
            return Err(Error::Layout(format!(
                "item type {} has {} options; at least 2 are required",
                i + 1,
                j
            )));
        }
        let mut full_offsets = Vec::with_capacity(options.len() + 1);
        let mut free_offsets = Vec::with_capacity(options.len() + 1);
        let mut free_item = Vec::new();
        let (mut full, mut free) = (0, 0);
        for (i, &j) in options.iter().enumerate() {
            full_offsets.push(full);
            free_offsets.push(free);
            full += j;
            free += j - 1;
            free_item.extend(std::iter::repeat_n(i, j - 1));
        }
        full_offsets.push(full);
        free_offsets.push(free);
        Ok(Self {
            options,
            full_offsets,
            free_offsets,
            free_item,
        })
    }

    /// `items` binary item types.
    pub fn binary(items: usize) -> Result<Self> {
        Self::new(vec![2; items])
    }

    pub fn options(&self) -> &[usize] {
        &self.options
    }

    /// Number of item types `I`.
    pub fn n_items(&self) -> usize {
        self.options.len()
    }

    /// Total number of categories `J`.
    pub fn n_categories(&self) -> usize {
        self.full_offsets[self.options.len()]
    }

    /// Number of free parameters `D`.
    pub fn dim(&self) -> usize {
        self.free_offsets[self.options.len()]
    }

    pub fn is_binary(&self) -> bool {
        self.options.iter().all(|&j| j == 2)
    }

    /// Range of item type `i` in full (length-`J`) vectors.
    pub fn full_range(&self, i: usize) -> std::ops::Range<usize> {
        self.full_offsets[i]..self.full_offsets[i + 1]
    }

    /// Range of item type `i` in free (length-`D`) vectors.
    pub fn free_range(&self, i: usize) -> std::ops::Range<usize> {
        self.free_offsets[i]..self.free_offsets[i + 1]
    }

    /// Item type owning free coordinate `d`.
    pub fn item_of(&self, d: usize) -> usize {
        self.free_item[d]
    }

    /// Index of free coordinate `d` in full vectors.
    pub fn full_index(&self, d: usize) -> usize {
        let i = self.free_item[d];
        self.full_offsets[i] + (d - self.free_offsets[i])
    }

    /// Index of the implied last category of item type `i` in full vectors.
    pub fn last_index(&self, i: usize) -> usize {
        self.full_offsets[i + 1] - 1
    }

    /// The item-type budget `s = 1 - Σ_{p≠d} θ_p` left for coordinate `d`.
    pub fn budget(&self, theta: &[f64], d: usize) -> f64 {
        let range = self.free_range(self.item_of(d));
        let others: f64 = theta[range].iter().sum::<f64>() - theta[d];
        (1.0 - others).max(0.0)
    }

    /// Checks that `theta` is a valid free parameter vector for this layout.
    pub fn check_theta(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.dim() {
            return Err(Error::dim("parameter vector", self.dim(), theta.len()));
        }
        for (d, &t) in theta.iter().enumerate() {
            if !t.is_finite() || !(-SIMPLEX_TOL..=1.0 + SIMPLEX_TOL).contains(&t) {
                return Err(Error::OutsideSimplex(format!("coordinate {} = {}", d + 1, t)));
            }
        }
        for i in 0..self.n_items() {
            let sum: f64 = theta[self.free_range(i)].iter().sum();
            if sum > 1.0 + SIMPLEX_TOL {
                return Err(Error::OutsideSimplex(format!(
                    "item type {} sums to {}",
                    i + 1,
                    sum
                )));
            }
        }
        Ok(())
    }
}

/// Observed frequencies `k` for all `J` categories and totals `n` per item type.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountData {
    k: Vec<u64>,
    n: Vec<u64>,
}

impl CountData {
    /// Builds counts from all `J` category frequencies; totals are derived.
    pub fn new(layout: &ItemLayout, k: Vec<u64>) -> Result<Self> {
        if k.len() != layout.n_categories() {
            return Err(Error::dim("counts", layout.n_categories(), k.len()));
        }
        let n = (0..layout.n_items())
            .map(|i| k[layout.full_range(i)].iter().sum())
            .collect();
        Ok(Self { k, n })
    }

    /// Builds counts from the `D` free-category frequencies and the totals;
    /// the last category of each item type is `n_i - Σ k_ij`.
    pub fn from_free(layout: &ItemLayout, k_free: &[u64], n: &[u64]) -> Result<Self> {
        if k_free.len() != layout.dim() {
            return Err(Error::dim("free counts", layout.dim(), k_free.len()));
        }
        let n = broadcast_totals(layout, n)?;
        let mut k = Vec::with_capacity(layout.n_categories());
        for i in 0..layout.n_items() {
            let part = &k_free[layout.free_range(i)];
            let used: u64 = part.iter().sum();
            if used > n[i] {
                return Err(Error::InvalidValue(format!(
                    "item type {}: counts sum to {} but n = {}",
                    i + 1,
                    used,
                    n[i]
                )));
            }
            k.extend_from_slice(part);
            k.push(n[i] - used);
        }
        Ok(Self { k, n })
    }

    /// Builds counts from all `J` frequencies and checks them against totals.
    pub fn with_totals(layout: &ItemLayout, k: Vec<u64>, n: &[u64]) -> Result<Self> {
        let data = Self::new(layout, k)?;
        let n = broadcast_totals(layout, n)?;
        if let Some(i) = (0..n.len()).find(|&i| n[i] != data.n[i]) {
            return Err(Error::InvalidValue(format!(
                "item type {}: counts sum to {} but n = {}",
                i + 1,
                data.n[i],
                n[i]
            )));
        }
        Ok(data)
    }

    /// No observations (prior analysis).
    pub fn zeros(layout: &ItemLayout) -> Self {
        Self {
            k: vec![0; layout.n_categories()],
            n: vec![0; layout.n_items()],
        }
    }

    pub fn k(&self) -> &[u64] {
        &self.k
    }

    pub fn n(&self) -> &[u64] {
        &self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n.iter().all(|&n| n == 0)
    }

    pub(crate) fn check(&self, layout: &ItemLayout) -> Result<()> {
        if self.k.len() != layout.n_categories() {
            return Err(Error::dim("counts", layout.n_categories(), self.k.len()));
        }
        if self.n.len() != layout.n_items() {
            return Err(Error::dim("totals", layout.n_items(), self.n.len()));
        }
        Ok(())
    }
}

fn broadcast_totals(layout: &ItemLayout, n: &[u64]) -> Result<Vec<u64>> {
    match n.len() {
        1 => Ok(vec![n[0]; layout.n_items()]),
        len if len == layout.n_items() => Ok(n.to_vec()),
        len => Err(Error::dim("totals", layout.n_items(), len)),
    }
}

/// A validated point of the unconstrained parameter space Ω.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Theta(Vec<f64>);

impl Theta {
    pub fn new(values: Vec<f64>, layout: &ItemLayout) -> Result<Self> {
        layout.check_theta(&values)?;
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for Theta {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Facet form `{θ : A θ ≤ b}`.
#[derive(Clone, Debug, PartialEq)]
pub struct AbPolytope {
    a: Vec<f64>,
    b: Vec<f64>,
    dim: usize,
    columns: Vec<Vec<(usize, f64)>>,
}

impl AbPolytope {
    /// `rows` is row-major; every row must have `dim` entries.
    pub fn new(rows: Vec<Vec<f64>>, b: Vec<f64>, dim: usize) -> Result<Self> {
        if rows.len() != b.len() {
            return Err(Error::dim("b vector", rows.len(), b.len()));
        }
        let mut a = Vec::with_capacity(rows.len() * dim);
        for row in &rows {
            if row.len() != dim {
                return Err(Error::dim("columns of A", dim, row.len()));
            }
            a.extend_from_slice(row);
        }
        Self::from_flat(a, b, dim)
    }

    /// `a` is the row-major flattening of an `R × dim` matrix.
    pub fn from_flat(a: Vec<f64>, b: Vec<f64>, dim: usize) -> Result<Self> {
        if a.len() != b.len() * dim {
            return Err(Error::dim("entries of A", b.len() * dim, a.len()));
        }
        if let Some(x) = a.iter().chain(b.iter()).find(|x| !x.is_finite()) {
            return Err(Error::InvalidValue(format!("non-finite constraint entry {}", x)));
        }
        let mut columns = vec![Vec::new(); dim];
        for (r, row) in a.chunks(dim.max(1)).enumerate().take(b.len()) {
            for (d, &x) in row.iter().enumerate() {
                if x != 0.0 {
                    columns[d].push((r, x));
                }
            }
        }
        Ok(Self { a, b, dim, columns })
    }

    /// No constraints at all: the whole space Ω.
    pub fn unconstrained(dim: usize) -> Self {
        Self {
            a: Vec::new(),
            b: Vec::new(),
            dim,
            columns: vec![Vec::new(); dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_rows(&self) -> usize {
        self.b.len()
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.a[r * self.dim..(r + 1) * self.dim]
    }

    pub fn rhs(&self) -> &[f64] {
        &self.b
    }

    /// Nonzero entries `(row, coefficient)` of column `d`.
    pub fn column(&self, d: usize) -> &[(usize, f64)] {
        &self.columns[d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.a.chunks(self.dim.max(1)).take(self.b.len())
    }

    /// `A_r θ` for row `r`.
    pub fn row_dot(&self, r: usize, theta: &[f64]) -> f64 {
        dot(self.row(r), theta)
    }

    /// Whether `A θ ≤ b + ε` holds for every row; stops at the first violation.
    pub fn satisfies(&self, theta: &[f64]) -> bool {
        self.satisfies_rows(theta, 0..self.n_rows())
    }

    /// Like [`satisfies`](Self::satisfies) restricted to a range of rows.
    pub fn satisfies_rows(&self, theta: &[f64], rows: std::ops::Range<usize>) -> bool {
        rows.into_iter()
            .all(|r| self.row_dot(r, theta) <= self.b[r] + CONSTRAINT_TOL)
    }

    /// First violated row, if any.
    pub fn first_violation(&self, theta: &[f64]) -> Option<usize> {
        (0..self.n_rows()).find(|&r| self.row_dot(r, theta) > self.b[r] + CONSTRAINT_TOL)
    }

    /// Per-row slack `b - A θ` (negative entries are violations).
    pub fn slack(&self, theta: &[f64]) -> Vec<f64> {
        (0..self.n_rows())
            .map(|r| self.b[r] - self.row_dot(r, theta))
            .collect()
    }

    /// The polytope formed by the first `rows` inequalities.
    pub fn head(&self, rows: usize) -> Self {
        let rows = rows.min(self.n_rows());
        Self::from_flat(self.a[..rows * self.dim].to_vec(), self.b[..rows].to_vec(), self.dim)
            .expect("prefix of a valid polytope")
    }

    /// The polytope with its rows reordered by `order`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        let mut a = Vec::with_capacity(self.a.len());
        let mut b = Vec::with_capacity(self.b.len());
        for &r in order {
            a.extend_from_slice(self.row(r));
            b.push(self.b[r]);
        }
        Self::from_flat(a, b, self.dim).expect("permutation of a valid polytope")
    }

    /// The polytope with one additional row.
    pub fn with_row(&self, row: &[f64], rhs: f64) -> Result<Self> {
        if row.len() != self.dim {
            return Err(Error::dim("columns of A", self.dim, row.len()));
        }
        let mut a = self.a.clone();
        a.extend_from_slice(row);
        let mut b = self.b.clone();
        b.push(rhs);
        Self::from_flat(a, b, self.dim)
    }

    pub(crate) fn check_dim(&self, layout: &ItemLayout) -> Result<()> {
        if self.dim != layout.dim() {
            return Err(Error::dim("columns of A", layout.dim(), self.dim));
        }
        Ok(())
    }
}

/// Vertex form: the convex hull of the rows of `V`.
#[derive(Clone, Debug, PartialEq)]
pub struct VPolytope {
    v: Vec<f64>,
    dim: usize,
}

impl VPolytope {
    /// Each row must be a valid parameter vector for `layout`.
    pub fn new(rows: Vec<Vec<f64>>, layout: &ItemLayout) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidValue("vertex matrix has no rows".into()));
        }
        let dim = layout.dim();
        let mut v = Vec::with_capacity(rows.len() * dim);
        for (s, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::dim("columns of V", dim, row.len()));
            }
            layout.check_theta(row).map_err(|e| {
                Error::InvalidValue(format!("vertex {} is not a probability vector: {}", s + 1, e))
            })?;
            v.extend_from_slice(row);
        }
        Ok(Self { v, dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_vertices(&self) -> usize {
        self.v.len() / self.dim.max(1)
    }

    pub fn vertex(&self, s: usize) -> &[f64] {
        &self.v[s * self.dim..(s + 1) * self.dim]
    }

    pub fn vertices(&self) -> impl Iterator<Item = &[f64]> {
        self.v.chunks(self.dim.max(1))
    }

    /// `Vᵀ α`.
    pub fn combine(&self, weights: &MixtureWeights) -> Result<Vec<f64>> {
        if weights.0.len() != self.n_vertices() {
            return Err(Error::dim("mixture weights", self.n_vertices(), weights.0.len()));
        }
        let mut theta = vec![0.0; self.dim];
        for (vertex, &w) in self.vertices().zip(&weights.0) {
            for (t, &x) in theta.iter_mut().zip(vertex) {
                *t += w * x;
            }
        }
        Ok(theta)
    }

    /// Uniform average of all vertices.
    pub fn centroid(&self) -> Vec<f64> {
        let s = self.n_vertices();
        self.combine(&MixtureWeights(vec![1.0 / s as f64; s]))
            .expect("matching length")
    }

    pub(crate) fn check_dim(&self, layout: &ItemLayout) -> Result<()> {
        if self.dim != layout.dim() {
            return Err(Error::dim("columns of V", layout.dim(), self.dim));
        }
        Ok(())
    }
}

/// Convex combination weights over the vertices of a [`VPolytope`].
#[derive(Clone, Debug, PartialEq)]
pub struct MixtureWeights(Vec<f64>);

impl MixtureWeights {
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        if alpha.is_empty() {
            return Err(Error::InvalidValue("no mixture weights".into()));
        }
        if alpha.iter().any(|&a| !(a >= -SIMPLEX_TOL)) {
            return Err(Error::InvalidValue("mixture weights must be nonnegative".into()));
        }
        let sum: f64 = alpha.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidValue(format!("mixture weights sum to {}", sum)));
        }
        Ok(Self(alpha))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Dirichlet shape parameters `β` for all `J` categories.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DirichletPrior {
    beta: Vec<f64>,
}

impl DirichletPrior {
    pub fn new(beta: Vec<f64>, layout: &ItemLayout) -> Result<Self> {
        if beta.len() != layout.n_categories() {
            return Err(Error::dim("prior shapes", layout.n_categories(), beta.len()));
        }
        if let Some(b) = beta.iter().find(|&&b| !(b > 0.0 && b.is_finite())) {
            return Err(Error::InvalidValue(format!("prior shape {} is not positive", b)));
        }
        Ok(Self { beta })
    }

    /// All shapes equal to one: uniform on the (truncated) parameter space.
    pub fn uniform(layout: &ItemLayout) -> Self {
        Self {
            beta: vec![1.0; layout.n_categories()],
        }
    }

    pub fn shapes(&self) -> &[f64] {
        &self.beta
    }

    pub fn is_uniform(&self) -> bool {
        self.beta.iter().all(|&b| b == 1.0)
    }
}

/// Extends free parameters with the implied last category of every item type.
pub fn complete_theta(theta: &[f64], layout: &ItemLayout) -> Result<Vec<f64>> {
    if theta.len() != layout.dim() {
        return Err(Error::dim("parameter vector", layout.dim(), theta.len()));
    }
    let mut full = Vec::with_capacity(layout.n_categories());
    for i in 0..layout.n_items() {
        let part = &theta[layout.free_range(i)];
        let last = 1.0 - part.iter().sum::<f64>();
        if last < -SIMPLEX_TOL {
            return Err(Error::OutsideSimplex(format!(
                "item type {} implies last probability {}",
                i + 1,
                last
            )));
        }
        full.extend_from_slice(part);
        full.push(last.max(0.0));
    }
    Ok(full)
}

/// Log of the product-multinomial mass function, multinomial coefficients included.
pub fn log_likelihood(data: &CountData, theta: &[f64], layout: &ItemLayout) -> Result<f64> {
    data.check(layout)?;
    let p = complete_theta(theta, layout)?;
    let mut ll = 0.0;
    for i in 0..layout.n_items() {
        let n = data.n[i];
        if n == 0 {
            continue;
        }
        ll += ln_gamma(n as f64 + 1.0);
        for c in layout.full_range(i) {
            let k = data.k[c];
            if k == 0 {
                continue;
            }
            if p[c] <= 0.0 {
                return Ok(f64::NEG_INFINITY);
            }
            ll += k as f64 * p[c].ln() - ln_gamma(k as f64 + 1.0);
        }
    }
    Ok(ll)
}

/// Whether `θ` satisfies `A θ ≤ b` (with tolerance [`CONSTRAINT_TOL`]).
pub fn satisfies_ab(theta: &[f64], poly: &AbPolytope) -> Result<bool> {
    if theta.len() != poly.dim() {
        return Err(Error::dim("parameter vector", poly.dim(), theta.len()));
    }
    Ok(poly.satisfies(theta))
}

/// Conjugate update `k + β`.
pub fn posterior_shapes(data: &CountData, prior: &DirichletPrior) -> Result<Vec<f64>> {
    if data.k.len() != prior.beta.len() {
        return Err(Error::dim("counts", prior.beta.len(), data.k.len()));
    }
    Ok(data
        .k
        .iter()
        .zip(&prior.beta)
        .map(|(&k, &b)| k as f64 + b)
        .collect())
}

/// Independent product-Dirichlet draws with fixed shapes.
#[derive(Clone, Debug)]
pub struct DirichletSampler {
    layout: ItemLayout,
    shapes: Vec<ShapeDraw>,
}

#[derive(Clone, Debug)]
enum ShapeDraw {
    Exp,
    Gamma(Gamma<f64>),
}

impl DirichletSampler {
    pub fn new(shapes: &[f64], layout: &ItemLayout) -> Result<Self> {
        if shapes.len() != layout.n_categories() {
            return Err(Error::dim("shapes", layout.n_categories(), shapes.len()));
        }
        let shapes = shapes
            .iter()
            .map(|&a| {
                if a == 1.0 {
                    Ok(ShapeDraw::Exp)
                } else {
                    Gamma::new(a, 1.0)
                        .map(ShapeDraw::Gamma)
                        .map_err(|_| Error::InvalidValue(format!("invalid Dirichlet shape {}", a)))
                }
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            layout: layout.clone(),
            shapes,
        })
    }

    /// Writes the free coordinates of one draw into `out` (length `D`).
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let layout = &self.layout;
        let mut g = [0.0f64; 16];
        let mut heap = Vec::new();
        for i in 0..layout.n_items() {
            let range = layout.full_range(i);
            let buf: &mut [f64] = if range.len() <= g.len() {
                &mut g[..range.len()]
            } else {
                heap.resize(range.len(), 0.0);
                &mut heap[..]
            };
            let mut total = 0.0;
            for (slot, c) in buf.iter_mut().zip(range.clone()) {
                *slot = match &self.shapes[c] {
                    ShapeDraw::Exp => Exp1.sample(rng),
                    ShapeDraw::Gamma(dist) => dist.sample(rng),
                };
                total += *slot;
            }
            let free = layout.free_range(i);
            if total > 0.0 {
                for (o, &x) in out[free].iter_mut().zip(buf.iter()) {
                    *o = x / total;
                }
            } else {
                // every gamma underflowed (tiny shapes): pick a vertex uniformly
                let pick = rng.random_range(0..buf.len());
                for (j, o) in out[free].iter_mut().enumerate() {
                    *o = if j == pick { 1.0 } else { 0.0 };
                }
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut out = vec![0.0; self.layout.dim()];
        self.sample_into(rng, &mut out);
        out
    }
}

/// One draw from the unconstrained product-Dirichlet with the given shapes.
pub fn sample_unconstrained<R: Rng + ?Sized>(
    shapes: &[f64],
    layout: &ItemLayout,
    rng: &mut R,
) -> Result<Theta> {
    Ok(Theta(DirichletSampler::new(shapes, layout)?.sample(rng)))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ab_example() -> AbPolytope {
        AbPolytope::new(
            vec![
                vec![1.0, -1.0, 0.0],
                vec![0.0, 1.0, -1.0],
                vec![0.0, 0.0, 1.0],
            ],
            vec![0.0, 0.0, 0.5],
            3,
        )
        .unwrap()
    }

    #[test]
    fn layout_dimensions() {
        let l = ItemLayout::new(vec![2, 2, 2]).unwrap();
        assert_eq!((l.n_items(), l.n_categories(), l.dim()), (3, 6, 3));
        let l = ItemLayout::new(vec![3; 10]).unwrap();
        assert_eq!((l.n_items(), l.dim()), (10, 20));
        let l = ItemLayout::new(vec![6]).unwrap();
        assert_eq!((l.n_items(), l.dim()), (1, 5));
        assert!(ItemLayout::new(vec![2, 1]).is_err());
        assert!(ItemLayout::new(vec![]).is_err());
    }

    #[test]
    fn layout_index_maps() {
        let l = ItemLayout::new(vec![3, 2, 4]).unwrap();
        assert_eq!(l.free_range(2), 3..6);
        assert_eq!(l.full_index(3), 5);
        assert_eq!(l.last_index(1), 4);
        assert_eq!(l.item_of(4), 2);
        assert_abs_diff_eq!(l.budget(&[0.2, 0.3, 0.5, 0.1, 0.2, 0.3], 4), 0.6, epsilon = 1e-12);
    }

    #[test]
    fn complete_theta_examples() {
        let l = ItemLayout::new(vec![2, 2, 2]).unwrap();
        let full = complete_theta(&[0.2, 0.3, 0.1], &l).unwrap();
        for (x, y) in full.iter().zip([0.2, 0.8, 0.3, 0.7, 0.1, 0.9]) {
            assert_abs_diff_eq!(*x, y, epsilon = 1e-15);
        }
        let l = ItemLayout::new(vec![3]).unwrap();
        let full = complete_theta(&[0.2, 0.3], &l).unwrap();
        assert_abs_diff_eq!(full[2], 0.5, epsilon = 1e-15);
        let l = ItemLayout::new(vec![2]).unwrap();
        assert_eq!(complete_theta(&[1.0], &l).unwrap(), vec![1.0, 0.0]);
        let l = ItemLayout::new(vec![3]).unwrap();
        assert!(complete_theta(&[0.7, 0.4], &l).is_err());
    }

    #[test]
    fn log_likelihood_small_cases() {
        let l = ItemLayout::new(vec![2]).unwrap();
        let d = CountData::new(&l, vec![1, 0]).unwrap();
        assert_abs_diff_eq!(log_likelihood(&d, &[0.5], &l).unwrap(), 0.5f64.ln(), epsilon = 1e-14);
        let d = CountData::new(&l, vec![1, 1]).unwrap();
        assert_abs_diff_eq!(log_likelihood(&d, &[0.5], &l).unwrap(), 0.5f64.ln(), epsilon = 1e-14);
        let d = CountData::new(&l, vec![0, 3]).unwrap();
        assert_eq!(log_likelihood(&d, &[1.0], &l).unwrap(), f64::NEG_INFINITY);
        let d = CountData::new(&l, vec![0, 0]).unwrap();
        assert_eq!(log_likelihood(&d, &[0.3], &l).unwrap(), 0.0);
    }

    #[test]
    fn log_likelihood_matches_direct_binomials() {
        // direct evaluation: C(n,k) p^k (1-p)^(n-k) with exact integer coefficients
        fn binom_pmf(n: u64, k: u64, p: f64) -> f64 {
            let mut c = 1.0f64;
            for j in 0..k {
                c = c * (n - j) as f64 / (j + 1) as f64;
            }
            c * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32)
        }
        let l = ItemLayout::binary(3).unwrap();
        let d = CountData::new(&l, vec![16, 24, 4, 32, 2, 13]).unwrap();
        let theta = [0.4, 1.0 / 9.0, 2.0 / 15.0];
        let direct = binom_pmf(40, 16, theta[0]).ln()
            + binom_pmf(36, 4, theta[1]).ln()
            + binom_pmf(15, 2, theta[2]).ln();
        let ll = log_likelihood(&d, &theta, &l).unwrap();
        assert_abs_diff_eq!(ll, direct, epsilon = 1e-10);
    }

    #[test]
    fn satisfies_ab_examples() {
        let p = ab_example();
        assert!(satisfies_ab(&[0.1, 0.2, 0.3], &p).unwrap());
        assert!(!satisfies_ab(&[0.3, 0.2, 0.3], &p).unwrap());
        assert!(satisfies_ab(&[0.5, 0.5, 0.5], &p).unwrap());
        assert_eq!(p.first_violation(&[0.3, 0.2, 0.3]), Some(0));
        assert!(satisfies_ab(&[0.1, 0.2], &p).is_err());
        assert!(AbPolytope::new(vec![vec![1.0; 4]], vec![0.0], 3).is_err());
    }

    #[test]
    fn posterior_shape_updates() {
        let l = ItemLayout::binary(1).unwrap();
        let d = CountData::new(&l, vec![16, 24]).unwrap();
        assert_eq!(posterior_shapes(&d, &DirichletPrior::uniform(&l)).unwrap(), vec![17.0, 25.0]);
        let d = CountData::new(&l, vec![9, 16]).unwrap();
        let prior = DirichletPrior::new(vec![2.0, 2.0], &l).unwrap();
        assert_eq!(posterior_shapes(&d, &prior).unwrap(), vec![11.0, 18.0]);
        let l3 = ItemLayout::binary(3).unwrap();
        let shapes = posterior_shapes(&CountData::zeros(&l3), &DirichletPrior::uniform(&l3)).unwrap();
        assert_eq!(shapes, vec![1.0; 6]);
        assert!(DirichletPrior::new(vec![1.0, 0.0], &l).is_err());
    }

    #[test]
    fn free_count_shorthand() {
        let l = ItemLayout::binary(3).unwrap();
        let d = CountData::from_free(&l, &[16, 4, 2], &[40, 36, 15]).unwrap();
        assert_eq!(d.k(), &[16, 24, 4, 32, 2, 13]);
        let d = CountData::from_free(&l, &[9, 16, 7], &[25]).unwrap();
        assert_eq!(d.n(), &[25, 25, 25]);
        assert!(CountData::from_free(&l, &[50, 4, 2], &[40, 36, 15]).is_err());
    }

    #[test]
    fn vertex_rows_are_validated() {
        let l = ItemLayout::binary(3).unwrap();
        assert!(VPolytope::new(vec![vec![0.0, 1.2, 0.0]], &l).is_err());
        let l3 = ItemLayout::new(vec![3]).unwrap();
        assert!(VPolytope::new(vec![vec![0.6, 0.6]], &l3).is_err());
        assert!(VPolytope::new(vec![], &l).is_err());
        let v = VPolytope::new(vec![vec![0.0, 0.0, 0.0], vec![0.5, 0.5, 0.5]], &l).unwrap();
        assert_eq!(v.centroid(), vec![0.25, 0.25, 0.25]);
        assert!(MixtureWeights::new(vec![0.5, 0.6]).is_err());
    }

    fn empirical_means(shapes: &[f64], layout: &ItemLayout, n: usize) -> Vec<f64> {
        let sampler = DirichletSampler::new(shapes, layout).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut mean = vec![0.0; layout.dim()];
        for _ in 0..n {
            for (m, x) in mean.iter_mut().zip(sampler.sample(&mut rng)) {
                *m += x / n as f64;
            }
        }
        mean
    }

    #[test]
    fn unconstrained_draw_means() {
        let l2 = ItemLayout::binary(1).unwrap();
        assert_abs_diff_eq!(empirical_means(&[1.0, 1.0], &l2, 100_000)[0], 0.5, epsilon = 0.005);
        assert_abs_diff_eq!(empirical_means(&[2.0, 1.0], &l2, 100_000)[0], 2.0 / 3.0, epsilon = 0.005);
        let l3 = ItemLayout::new(vec![3]).unwrap();
        for m in empirical_means(&[1.0, 1.0, 1.0], &l3, 100_000) {
            assert_abs_diff_eq!(m, 1.0 / 3.0, epsilon = 0.005);
        }
    }

    fn layout_and_theta() -> impl Strategy<Value = (ItemLayout, Vec<f64>)> {
        prop::collection::vec(2usize..5, 1..5).prop_flat_map(|options| {
            let layout = ItemLayout::new(options).unwrap();
            let raw = prop::collection::vec(0.001f64..1.0, layout.n_categories());
            (Just(layout), raw)
        })
        .prop_map(|(layout, raw)| {
            let mut theta = Vec::with_capacity(layout.dim());
            for i in 0..layout.n_items() {
                let block = &raw[layout.full_range(i)];
                let total: f64 = block.iter().sum();
                theta.extend(block[..block.len() - 1].iter().map(|x| x / total));
            }
            (layout, theta)
        })
    }

    proptest! {
        #[test]
        fn completed_blocks_sum_to_one((layout, theta) in layout_and_theta()) {
            let full = complete_theta(&theta, &layout).unwrap();
            for i in 0..layout.n_items() {
                let s: f64 = full[layout.full_range(i)].iter().sum();
                prop_assert!((s - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn empty_constraints_accept_everything((layout, theta) in layout_and_theta()) {
            let poly = AbPolytope::unconstrained(layout.dim());
            prop_assert!(satisfies_ab(&theta, &poly).unwrap());
        }

        #[test]
        fn posterior_minus_prior_is_counts(k in prop::collection::vec(0u64..1000, 6), beta in prop::collection::vec(0.1f64..5.0, 6)) {
            let layout = ItemLayout::binary(3).unwrap();
            let data = CountData::new(&layout, k.clone()).unwrap();
            let prior = DirichletPrior::new(beta.clone(), &layout).unwrap();
            let shapes = posterior_shapes(&data, &prior).unwrap();
            for ((s, b), k) in shapes.iter().zip(&beta).zip(&k) {
                prop_assert_eq!((s - b).round() as u64, *k);
            }
        }

        #[test]
        fn likelihood_invariant_to_item_order(k in prop::collection::vec(0u64..30, 5), t in prop::collection::vec(0.05f64..0.45, 3)) {
            // layout (3, 2): item types are [θ0, θ1 | θ2]
            let layout = ItemLayout::new(vec![3, 2]).unwrap();
            let data = CountData::new(&layout, k.clone()).unwrap();
            let theta = vec![t[0], t[1], t[2]];
            let ll = log_likelihood(&data, &theta, &layout).unwrap();
            let swapped_layout = ItemLayout::new(vec![2, 3]).unwrap();
            let mut k2 = k[3..].to_vec();
            k2.extend_from_slice(&k[..3]);
            let data2 = CountData::new(&swapped_layout, k2).unwrap();
            let theta2 = vec![t[2], t[0], t[1]];
            let ll2 = log_likelihood(&data2, &theta2, &swapped_layout).unwrap();
            prop_assert!((ll - ll2).abs() < 1e-9 * (1.0 + ll.abs()));
        }
    }
}
