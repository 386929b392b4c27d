//! Maximum a-posteriori starting values.
//!
//! Facet constraints use a log-barrier Newton method in `θ`. Vertex
//! constraints use the same method over the mixture weights, or gradient
//! ascent over softmax logits of the weights when there are many vertices.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Constraint, ConstraintModel};
use crate::error::{Error, Result};
use crate::model::{
    complete_theta, log_likelihood, posterior_shapes, CountData, DirichletPrior, DirichletSampler,
    ItemLayout, Theta, VPolytope,
};

pub const GRAD_TOL: f64 = 1e-8;
const BARRIER_GAP: f64 = 1e-11;
const NEWTON_MAX_ITER: usize = 200;
const ASCENT_MAX_ITER: usize = 20_000;
const INDICATOR_SEARCH_DRAWS: usize = 100_000;
/// Above this many vertices the dense Newton system over the weights is
/// replaced by first-order ascent.
const NEWTON_MAX_VERTICES: usize = 400;

/// Constraint rows `g_r θ ≤ h_r`: the model's own rows plus the simplex.
struct Rows {
    g: Vec<Vec<f64>>,
    h: Vec<f64>,
}

impl Rows {
    fn for_model(model: &ConstraintModel, poly_rows: Option<&crate::model::AbPolytope>) -> Self {
        let layout = model.layout();
        let dim = layout.dim();
        let mut g = Vec::new();
        let mut h = Vec::new();
        if let Some(poly) = poly_rows {
            for (r, row) in poly.rows().enumerate() {
                g.push(row.to_vec());
                h.push(poly.rhs()[r]);
            }
        }
        for d in 0..dim {
            let mut row = vec![0.0; dim];
            row[d] = -1.0;
            g.push(row);
            h.push(0.0);
        }
        for i in 0..layout.n_items() {
            let mut row = vec![0.0; dim];
            for d in layout.free_range(i) {
                row[d] = 1.0;
            }
            g.push(row);
            h.push(1.0);
        }
        Self { g, h }
    }

    fn slacks(&self, x: &[f64], t_coef: Option<(&[f64], f64)>) -> Vec<f64> {
        self.g
            .iter()
            .zip(&self.h)
            .enumerate()
            .map(|(r, (row, &h))| {
                let mut s = h - row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
                if let Some((norms, t)) = t_coef {
                    s -= norms[r] * t;
                }
                s
            })
            .collect()
    }
}

/// Smooth convex objective with gradient and Hessian, `+∞` outside its domain.
trait Objective {
    fn eval(&self, x: &[f64]) -> f64;
    fn grad_hess(&self, x: &[f64], grad: &mut [f64], hess: &mut [f64]);
}

/// Minimises `scale·f(x) - Σ log(h - G x)` for a decreasing barrier weight
/// (`scale` grows), starting from a strictly feasible `x`.
fn barrier_minimize(
    obj: &dyn Objective,
    g: &[Vec<f64>],
    h: &[f64],
    mut x: Vec<f64>,
) -> Result<Vec<f64>> {
    let n = x.len();
    let m = g.len() as f64;
    let mut scale = 1.0;
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n * n];
    let mut og = vec![0.0; n];
    let mut oh = vec![0.0; n * n];
    let value = |x: &[f64], scale: f64| -> f64 {
        let mut v = scale * obj.eval(x);
        for (row, &hr) in g.iter().zip(h) {
            let s = hr - row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
            if s <= 0.0 {
                return f64::INFINITY;
            }
            v -= s.ln();
        }
        v
    };
    loop {
        for _ in 0..NEWTON_MAX_ITER {
            grad.iter_mut().for_each(|v| *v = 0.0);
            hess.iter_mut().for_each(|v| *v = 0.0);
            obj.grad_hess(&x, &mut og, &mut oh);
            for i in 0..n {
                grad[i] = scale * og[i];
            }
            for i in 0..n * n {
                hess[i] = scale * oh[i];
            }
            for (row, &hr) in g.iter().zip(h) {
                let s = hr - row.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>();
                let inv = 1.0 / s;
                for i in 0..n {
                    if row[i] == 0.0 {
                        continue;
                    }
                    grad[i] += row[i] * inv;
                    for j in 0..n {
                        hess[i * n + j] += row[i] * row[j] * inv * inv;
                    }
                }
            }
            let grad_norm = grad.iter().map(|v| v * v).sum::<f64>().sqrt();
            let step = solve_spd(&hess, &grad, n)
                .ok_or_else(|| Error::Numeric("singular Newton system in MAP search".into()))?;
            // step solves H s = g; Newton direction is -s
            let decrement: f64 = grad.iter().zip(&step).map(|(a, b)| a * b).sum();
            if decrement <= 1e-20 || grad_norm <= GRAD_TOL * scale.max(1.0) * 1e-2 {
                break;
            }
            let f0 = value(&x, scale);
            let mut t = 1.0;
            let mut accepted = false;
            let mut trial = vec![0.0; n];
            for _ in 0..60 {
                for i in 0..n {
                    trial[i] = x[i] - t * step[i];
                }
                let f1 = value(&trial, scale);
                if f1.is_finite() && f1 <= f0 - 0.25 * t * decrement {
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                break;
            }
            std::mem::swap(&mut x, &mut trial);
            if decrement * 0.5 < 1e-14 {
                break;
            }
        }
        if m / scale < BARRIER_GAP {
            return Ok(x);
        }
        scale *= 10.0;
    }
}

/// Cholesky solve with a growing ridge if the matrix is not numerically SPD.
fn solve_spd(a: &[f64], b: &[f64], n: usize) -> Option<Vec<f64>> {
    let diag_max = (0..n).map(|i| a[i * n + i].abs()).fold(0.0, f64::max).max(1e-300);
    let mut ridge = 0.0;
    for _ in 0..20 {
        if let Some(l) = cholesky(a, n, ridge) {
            let mut y = vec![0.0; n];
            for i in 0..n {
                let s: f64 = (0..i).map(|k| l[i * n + k] * y[k]).sum();
                y[i] = (b[i] - s) / l[i * n + i];
            }
            let mut x = vec![0.0; n];
            for i in (0..n).rev() {
                let s: f64 = (i + 1..n).map(|k| l[k * n + i] * x[k]).sum();
                x[i] = (y[i] - s) / l[i * n + i];
            }
            return Some(x);
        }
        ridge = if ridge == 0.0 { 1e-12 * diag_max } else { ridge * 100.0 };
    }
    None
}

fn cholesky(a: &[f64], n: usize, ridge: f64) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            if i == j {
                s += ridge;
            }
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if s <= 0.0 || !s.is_finite() {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Some(l)
}

/// `-t` over `(θ, t)`: maximising the smallest scaled slack.
struct NegRadius {
    n: usize,
}

impl Objective for NegRadius {
    fn eval(&self, x: &[f64]) -> f64 {
        -x[self.n - 1]
    }
    fn grad_hess(&self, _x: &[f64], grad: &mut [f64], hess: &mut [f64]) {
        grad.iter_mut().for_each(|v| *v = 0.0);
        hess.iter_mut().for_each(|v| *v = 0.0);
        grad[self.n - 1] = -1.0;
    }
}

/// Negative log posterior kernel `-Σ w_c ln p_c(θ)` with `w_c ≥ 0`.
struct NegLogKernel<'a> {
    layout: &'a ItemLayout,
    weights: Vec<f64>,
}

impl NegLogKernel<'_> {
    fn probs(&self, x: &[f64]) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.layout.n_categories());
        for i in 0..self.layout.n_items() {
            let part = &x[self.layout.free_range(i)];
            p.extend_from_slice(part);
            p.push(1.0 - part.iter().sum::<f64>());
        }
        p
    }
}

impl Objective for NegLogKernel<'_> {
    fn eval(&self, x: &[f64]) -> f64 {
        let p = self.probs(x);
        let mut v = 0.0;
        for (&w, &pc) in self.weights.iter().zip(&p) {
            if w > 0.0 {
                if pc <= 0.0 {
                    return f64::INFINITY;
                }
                v -= w * pc.ln();
            }
        }
        v
    }

    fn grad_hess(&self, x: &[f64], grad: &mut [f64], hess: &mut [f64]) {
        let n = x.len();
        grad.iter_mut().for_each(|v| *v = 0.0);
        hess.iter_mut().for_each(|v| *v = 0.0);
        let p = self.probs(x);
        let layout = self.layout;
        for i in 0..layout.n_items() {
            let free = layout.free_range(i);
            for d in free.clone() {
                let c = layout.full_index(d);
                let w = self.weights[c];
                if w > 0.0 {
                    grad[d] -= w / p[c];
                    hess[d * n + d] += w / (p[c] * p[c]);
                }
            }
            let last = layout.last_index(i);
            let w = self.weights[last];
            if w > 0.0 {
                let pl = p[last];
                for d in free.clone() {
                    grad[d] += w / pl;
                    for e in free.clone() {
                        hess[d * n + e] += w / (pl * pl);
                    }
                }
            }
        }
    }
}

/// Point maximising the smallest distance to the facets (and to the
/// boundary of the simplex), together with that distance.
///
/// Returns [`Error::Infeasible`] if the constraints admit no point.
pub fn chebyshev_center(model: &ConstraintModel) -> Result<(Vec<f64>, f64)> {
    let layout = model.layout();
    let poly = match model.constraint() {
        Constraint::Ab(p) => Some(p),
        _ => None,
    };
    let rows = Rows::for_model(model, poly);
    let dim = layout.dim();
    let norms: Vec<f64> = rows
        .g
        .iter()
        .map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    // simplex centre, then start t below the worst scaled slack
    let mut x: Vec<f64> = (0..dim)
        .map(|d| 1.0 / layout.options()[layout.item_of(d)] as f64)
        .collect();
    let slack = rows.slacks(&x, None);
    let worst = slack
        .iter()
        .zip(&norms)
        .filter(|(_, &n)| n > 0.0)
        .map(|(s, n)| s / n)
        .fold(f64::INFINITY, f64::min);
    if rows.h.iter().zip(&norms).any(|(&h, &n)| n == 0.0 && h < 0.0) {
        return Err(Error::Infeasible);
    }
    x.push(worst - 1.0);
    let g: Vec<Vec<f64>> = rows
        .g
        .iter()
        .zip(&norms)
        .filter(|(_, &n)| n > 0.0)
        .map(|(row, &n)| {
            let mut r = row.clone();
            r.push(n);
            r
        })
        .collect();
    let h: Vec<f64> = rows
        .h
        .iter()
        .zip(&norms)
        .filter(|(_, &n)| n > 0.0)
        .map(|(&h, _)| h)
        .collect();
    let x = barrier_minimize(&NegRadius { n: dim + 1 }, &g, &h, x)?;
    let radius = x[dim];
    if radius < -1e-9 {
        return Err(Error::Infeasible);
    }
    Ok((x[..dim].to_vec(), radius))
}

fn kernel_weights(data: &CountData, prior: &DirichletPrior) -> Result<Vec<f64>> {
    Ok(posterior_shapes(data, prior)?
        .into_iter()
        .map(|s| (s - 1.0).max(0.0))
        .collect())
}

/// Constraint-satisfying maximiser of the posterior kernel.
///
/// Exponents below zero (shapes under one without data) are clipped to zero.
/// When no exponent is positive the posterior is flat and the most interior
/// point is returned instead: the Chebyshev centre for facets, the vertex
/// centroid for hulls.
pub fn map_estimate(
    model: &ConstraintModel,
    data: &CountData,
    prior: &DirichletPrior,
) -> Result<Theta> {
    let layout = model.layout();
    data.check(layout)?;
    let weights = kernel_weights(data, prior)?;
    let flat = weights.iter().all(|&w| w == 0.0);
    let theta = match model.constraint() {
        Constraint::Ab(poly) => {
            let (center, radius) = chebyshev_center(model)?;
            if flat || radius <= 1e-12 {
                center
            } else {
                let rows = Rows::for_model(model, Some(poly));
                let obj = NegLogKernel { layout, weights };
                barrier_minimize(&obj, &rows.g, &rows.h, center)?
            }
        }
        Constraint::V(poly) => {
            if flat || poly.n_vertices() == 1 {
                poly.centroid()
            } else if poly.n_vertices() <= NEWTON_MAX_VERTICES {
                map_vertices_newton(poly, layout, &weights)
                    .unwrap_or_else(|| map_vertices_ascent(poly, layout, &weights))
            } else {
                map_vertices_ascent(poly, layout, &weights)
            }
        }
        Constraint::Indicator(ind) => {
            let shapes = posterior_shapes(data, prior)?;
            search_indicator(model, ind, &shapes, data)?
        }
    };
    Theta::new(clean(theta, layout), layout)
}

/// Removes round-off that would push a coordinate just outside the simplex.
fn clean(mut theta: Vec<f64>, layout: &ItemLayout) -> Vec<f64> {
    for t in &mut theta {
        *t = t.clamp(0.0, 1.0);
    }
    for i in 0..layout.n_items() {
        let sum: f64 = theta[layout.free_range(i)].iter().sum();
        if sum > 1.0 {
            for t in &mut theta[layout.free_range(i)] {
                *t /= sum;
            }
        }
    }
    theta
}

/// Kernel as a function of the first `S - 1` mixture weights; the last
/// weight is `1 - Σ α`.
struct WeightKernel<'a> {
    inner: NegLogKernel<'a>,
    base: &'a [f64],
    /// Row `s` is `v_s - v_S`.
    diffs: Vec<Vec<f64>>,
}

impl WeightKernel<'_> {
    fn theta(&self, alpha: &[f64]) -> Vec<f64> {
        let mut theta = self.base.to_vec();
        for (a, w) in alpha.iter().zip(&self.diffs) {
            for (t, x) in theta.iter_mut().zip(w) {
                *t += a * x;
            }
        }
        theta
    }
}

impl Objective for WeightKernel<'_> {
    fn eval(&self, x: &[f64]) -> f64 {
        self.inner.eval(&self.theta(x))
    }

    fn grad_hess(&self, x: &[f64], grad: &mut [f64], hess: &mut [f64]) {
        let n = x.len();
        let dim = self.base.len();
        let theta = self.theta(x);
        let mut g = vec![0.0; dim];
        let mut h = vec![0.0; dim * dim];
        self.inner.grad_hess(&theta, &mut g, &mut h);
        // hw[s] = H w_s
        let hw: Vec<Vec<f64>> = self
            .diffs
            .iter()
            .map(|w| (0..dim).map(|i| (0..dim).map(|j| h[i * dim + j] * w[j]).sum()).collect())
            .collect();
        for s in 0..n {
            grad[s] = self.diffs[s].iter().zip(&g).map(|(a, b)| a * b).sum();
            for t in 0..n {
                hess[s * n + t] = self.diffs[s].iter().zip(&hw[t]).map(|(a, b)| a * b).sum();
            }
        }
    }
}

/// Barrier Newton over the mixture weights; `None` if it fails numerically
/// or the start has zero posterior density.
fn map_vertices_newton(poly: &VPolytope, layout: &ItemLayout, weights: &[f64]) -> Option<Vec<f64>> {
    let s = poly.n_vertices();
    let base = poly.vertex(s - 1);
    let obj = WeightKernel {
        inner: NegLogKernel {
            layout,
            weights: weights.to_vec(),
        },
        base,
        diffs: (0..s - 1)
            .map(|k| poly.vertex(k).iter().zip(base).map(|(a, b)| a - b).collect())
            .collect(),
    };
    let start = vec![1.0 / s as f64; s - 1];
    if !obj.eval(&start).is_finite() {
        return None;
    }
    let mut g: Vec<Vec<f64>> = (0..s - 1)
        .map(|k| {
            let mut row = vec![0.0; s - 1];
            row[k] = -1.0;
            row
        })
        .collect();
    let mut h = vec![0.0; s - 1];
    g.push(vec![1.0; s - 1]);
    h.push(1.0);
    let alpha = barrier_minimize(&obj, &g, &h, start).ok()?;
    Some(obj.theta(&alpha))
}

/// Gradient ascent over softmax logits of the mixture weights.
fn map_vertices_ascent(poly: &VPolytope, layout: &ItemLayout, weights: &[f64]) -> Vec<f64> {
    let s = poly.n_vertices();
    let dim = poly.dim();
    let centroid = poly.centroid();
    let objective = |theta: &[f64]| -> f64 {
        let p = complete_theta(theta, layout).unwrap_or_default();
        let mut v = 0.0;
        for (&w, &pc) in weights.iter().zip(&p) {
            if w > 0.0 {
                if pc <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                v += w * pc.ln();
            }
        }
        v
    };
    let theta_of = |gamma: &[f64]| -> (Vec<f64>, Vec<f64>) {
        let m = gamma.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = gamma.iter().map(|g| (g - m).exp()).collect();
        let z: f64 = e.iter().sum();
        let alpha: Vec<f64> = e.iter().map(|v| v / z).collect();
        let mut theta = vec![0.0; dim];
        for (v, &a) in poly.vertices().zip(&alpha) {
            for (t, &x) in theta.iter_mut().zip(v) {
                *t += a * x;
            }
        }
        (alpha, theta)
    };
    let mut gamma = vec![0.0; s];
    let (mut alpha, mut theta) = theta_of(&gamma);
    let mut value = objective(&theta);
    if !value.is_finite() {
        return centroid;
    }
    let mut step = 1.0;
    for _ in 0..ASCENT_MAX_ITER {
        let p = complete_theta(&theta, layout).unwrap_or_default();
        let mut dtheta = vec![0.0; dim];
        for d in 0..dim {
            let i = layout.item_of(d);
            let c = layout.full_index(d);
            let last = layout.last_index(i);
            if weights[c] > 0.0 {
                dtheta[d] += weights[c] / p[c];
            }
            if weights[last] > 0.0 {
                dtheta[d] -= weights[last] / p[last];
            }
        }
        let dalpha: Vec<f64> = poly
            .vertices()
            .map(|v| v.iter().zip(&dtheta).map(|(a, b)| a * b).sum())
            .collect();
        let mean: f64 = alpha.iter().zip(&dalpha).map(|(a, d)| a * d).sum();
        let grad: Vec<f64> = alpha.iter().zip(&dalpha).map(|(a, d)| a * (d - mean)).collect();
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if norm < GRAD_TOL {
            break;
        }
        let mut improved = false;
        for _ in 0..60 {
            let trial: Vec<f64> = gamma.iter().zip(&grad).map(|(g, d)| g + step * d).collect();
            let (ta, tt) = theta_of(&trial);
            let tv = objective(&tt);
            if tv.is_finite() && tv >= value + 1e-4 * step * norm * norm {
                gamma = trial;
                alpha = ta;
                theta = tt;
                value = tv;
                improved = true;
                step *= 2.0;
                break;
            }
            step *= 0.5;
        }
        if !improved {
            break;
        }
    }
    theta
}

/// Best posterior kernel among feasible unconstrained posterior draws.
fn search_indicator(
    model: &ConstraintModel,
    ind: &super::Indicator,
    shapes: &[f64],
    data: &CountData,
) -> Result<Vec<f64>> {
    let layout = model.layout();
    let sampler = DirichletSampler::new(shapes, layout)?;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut theta = vec![0.0; layout.dim()];
    for _ in 0..INDICATOR_SEARCH_DRAWS {
        sampler.sample_into(&mut rng, &mut theta);
        if ind.contains(&theta) {
            let ll = log_likelihood(data, &theta, layout)?;
            if best.as_ref().is_none_or(|(b, _)| ll > *b) {
                best = Some((ll, theta.clone()));
            }
        }
    }
    best.map(|(_, t)| t).ok_or(Error::Infeasible)
}
