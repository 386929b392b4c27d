//! Polytope geometry: where a coordinate line through the current point
//! enters and leaves the constraint region, and convex-hull membership.

pub mod lp;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{AbPolytope, ItemLayout, VPolytope};
pub use lp::{solve_lp, LpProblem, LpSolution, LpStatus, Relation};

/// Intervals narrower than this negative width are treated as corruption.
pub const EMPTY_TOL: f64 = 1e-8;

/// Hull membership verdict threshold on the redundancy LP optimum.
pub const HULL_TOL: f64 = 1e-8;

pub const BISECTION_TOL: f64 = 1e-8;
pub const BISECTION_MAX_ITER: usize = 200;

/// Truncation limits `[lo, hi]` of one coordinate given all the others.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    /// Collapses slightly inverted limits; rejects clearly empty ones.
    pub fn new(lo: f64, hi: f64, coord: usize) -> Result<Self> {
        if lo > hi + EMPTY_TOL || lo.is_nan() || hi.is_nan() {
            return Err(Error::EmptyInterval { coord, lo, hi });
        }
        if lo > hi {
            let mid = 0.5 * (lo + hi);
            return Ok(Self { lo: mid, hi: mid });
        }
        Ok(Self { lo, hi })
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64, tol: f64) -> bool {
        x >= self.lo - tol && x <= self.hi + tol
    }
}

/// Truncation interval for coordinate `d` under `A θ ≤ b`, intersected with
/// the natural range `[0, s]` where `s` is the item-type budget.
pub fn conditional_bounds_ab(
    poly: &AbPolytope,
    layout: &ItemLayout,
    theta: &[f64],
    d: usize,
) -> Result<Interval> {
    if theta.len() != poly.dim() {
        return Err(Error::dim("parameter vector", poly.dim(), theta.len()));
    }
    let budget = layout.budget(theta, d);
    let (mut lo, mut hi) = (0.0f64, budget);
    for &(r, a) in poly.column(d) {
        let rest = poly.rhs()[r] - (poly.row_dot(r, theta) - a * theta[d]);
        let z = rest / a;
        if a > 0.0 {
            hi = hi.min(z);
        } else {
            lo = lo.max(z);
        }
    }
    Interval::new(lo, hi, d)
}

/// Same as [`conditional_bounds_ab`] but reads `A θ` from a cache `ax`
/// that the caller keeps in sync with `theta`.
pub(crate) fn conditional_bounds_ab_cached(
    poly: &AbPolytope,
    ax: &[f64],
    theta_d: f64,
    budget: f64,
    d: usize,
) -> Result<Interval> {
    let (mut lo, mut hi) = (0.0f64, budget);
    let b = poly.rhs();
    for &(r, a) in poly.column(d) {
        let z = (b[r] - ax[r] + a * theta_d) / a;
        if a > 0.0 {
            hi = hi.min(z);
        } else {
            lo = lo.max(z);
        }
    }
    Interval::new(lo, hi, d)
}

/// Truncation interval for coordinate `d` inside the convex hull of `poly`.
///
/// Solves two LPs, pushing the point as far as possible along `±e_d` while it
/// remains a convex combination of the vertices.
pub fn conditional_bounds_v(
    poly: &VPolytope,
    layout: &ItemLayout,
    theta: &[f64],
    d: usize,
) -> Result<Interval> {
    if theta.len() != poly.dim() {
        return Err(Error::dim("parameter vector", poly.dim(), theta.len()));
    }
    let up = max_step(poly, theta, d, 1.0)?;
    let down = max_step(poly, theta, d, -1.0)?;
    let budget = layout.budget(theta, d);
    let lo = (theta[d] - down).max(0.0);
    let hi = (theta[d] + up).min(budget);
    Interval::new(lo, hi, d)
}

/// Largest `λ ≥ 0` with `θ + direction·λ·e_d` in the hull.
fn max_step(poly: &VPolytope, theta: &[f64], d: usize, direction: f64) -> Result<f64> {
    let s = poly.n_vertices();
    let dim = poly.dim();
    // variables: α_1..α_S, λ
    let mut objective = vec![0.0; s + 1];
    objective[s] = 1.0;
    let mut lp = LpProblem::maximize(objective);
    for row in 0..dim {
        let mut coeffs: Vec<f64> = poly.vertices().map(|v| v[row]).collect();
        coeffs.push(if row == d { -direction } else { 0.0 });
        lp.add_row(coeffs, Relation::Eq, theta[row]);
    }
    let mut ones = vec![1.0; s + 1];
    ones[s] = 0.0;
    lp.add_row(ones, Relation::Eq, 1.0);
    let sol = solve_lp(&lp);
    match sol.status {
        LpStatus::Optimal => Ok(sol.x[s].max(0.0)),
        LpStatus::Infeasible => Err(Error::OutsideHull),
        LpStatus::Unbounded => Err(Error::Lp("unbounded line search in a bounded hull".into())),
        LpStatus::NumericalFailure => Err(Error::Lp("numerical failure in line search".into())),
    }
}

/// Whether `theta` lies in the convex hull of the vertices of `poly`.
///
/// Uses the redundancy LP: maximise `zᵀθ - z₀` subject to `zᵀv - z₀ ≤ 0` for
/// every vertex and `zᵀθ - z₀ ≤ 1`. The optimum is 0 inside and 1 outside.
pub fn in_convex_hull(poly: &VPolytope, theta: &[f64]) -> Result<bool> {
    Ok(hull_lp_value(poly, theta)? <= HULL_TOL)
}

/// Optimum of the redundancy LP used by [`in_convex_hull`].
pub fn hull_lp_value(poly: &VPolytope, theta: &[f64]) -> Result<f64> {
    let dim = poly.dim();
    if theta.len() != dim {
        return Err(Error::dim("parameter vector", dim, theta.len()));
    }
    // variables: z_1..z_D, z0 (all free)
    let mut objective = theta.to_vec();
    objective.push(-1.0);
    let mut lp = LpProblem::maximize(objective.clone());
    for j in 0..=dim {
        lp.set_free(j);
    }
    for v in poly.vertices() {
        let mut coeffs = v.to_vec();
        coeffs.push(-1.0);
        lp.add_row(coeffs, Relation::Le, 0.0);
    }
    lp.add_row(objective, Relation::Le, 1.0);
    let sol = solve_lp(&lp);
    match sol.status {
        LpStatus::Optimal => Ok(sol.value),
        status => Err(Error::Lp(format!("hull membership LP ended with {:?}", status))),
    }
}

/// Truncation interval for coordinate `d` inside a convex region given only
/// by a membership predicate.
///
/// Bisects between the current value and each natural limit (`0` and the
/// item-type budget). The returned limits are the innermost points known to
/// be inside, so the interval never leaves the region. The region must be
/// convex; this is not checked.
pub fn conditional_bounds_indicator<F>(
    inside: F,
    layout: &ItemLayout,
    theta: &[f64],
    d: usize,
    tol: f64,
) -> Result<Interval>
where
    F: Fn(&[f64]) -> bool,
{
    if theta.len() != layout.dim() {
        return Err(Error::dim("parameter vector", layout.dim(), theta.len()));
    }
    if !inside(theta) {
        return Err(Error::InvalidValue(
            "current point does not satisfy the indicator".into(),
        ));
    }
    let budget = layout.budget(theta, d);
    let mut probe = theta.to_vec();
    let hi = boundary(&inside, &mut probe, d, theta[d], budget, tol);
    let lo = boundary(&inside, &mut probe, d, theta[d], 0.0, tol);
    Interval::new(lo, hi, d)
}

fn boundary<F>(inside: &F, probe: &mut [f64], d: usize, from: f64, limit: f64, tol: f64) -> f64
where
    F: Fn(&[f64]) -> bool,
{
    let original = probe[d];
    probe[d] = limit;
    let result = if inside(probe) {
        limit
    } else {
        let (mut good, mut bad) = (from, limit);
        for _ in 0..BISECTION_MAX_ITER {
            if (bad - good).abs() <= tol {
                break;
            }
            let mid = 0.5 * (good + bad);
            probe[d] = mid;
            if inside(probe) {
                good = mid;
            } else {
                bad = mid;
            }
        }
        good
    };
    probe[d] = original;
    result
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn layout() -> ItemLayout {
        ItemLayout::binary(3).unwrap()
    }

    fn ab() -> AbPolytope {
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

    fn v() -> VPolytope {
        VPolytope::new(
            vec![
                vec![0.0, 0.0, 0.0],
                vec![0.0, 0.0, 0.5],
                vec![0.0, 0.5, 0.5],
                vec![0.5, 0.5, 0.5],
            ],
            &layout(),
        )
        .unwrap()
    }

    #[test]
    fn ab_bounds_by_hand() {
        let t = [0.1, 0.2, 0.3];
        let i = conditional_bounds_ab(&ab(), &layout(), &t, 1).unwrap();
        assert_abs_diff_eq!(i.lo, 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(i.hi, 0.3, epsilon = 1e-15);
        let i = conditional_bounds_ab(&ab(), &layout(), &t, 0).unwrap();
        assert_eq!((i.lo, i.hi), (0.0, 0.2));
        let i = conditional_bounds_ab(&ab(), &layout(), &t, 2).unwrap();
        assert_abs_diff_eq!(i.lo, 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(i.hi, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn ab_bounds_reject_corrupt_state() {
        let err = conditional_bounds_ab(&ab(), &layout(), &[0.4, 0.2, 0.3], 1);
        assert!(matches!(err, Err(Error::EmptyInterval { .. })));
    }

    #[test]
    fn multinomial_budget_limits_interval() {
        let l = ItemLayout::new(vec![3]).unwrap();
        let p = AbPolytope::unconstrained(2);
        let i = conditional_bounds_ab(&p, &l, &[0.3, 0.5], 0).unwrap();
        assert_abs_diff_eq!(i.hi, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn v_bounds_match_ab_examples() {
        let t = [0.1, 0.2, 0.3];
        for d in 0..3 {
            let a = conditional_bounds_ab(&ab(), &layout(), &t, d).unwrap();
            let b = conditional_bounds_v(&v(), &layout(), &t, d).unwrap();
            assert_abs_diff_eq!(a.lo, b.lo, epsilon = 1e-8);
            assert_abs_diff_eq!(a.hi, b.hi, epsilon = 1e-8);
        }
        let i = conditional_bounds_v(&v(), &layout(), &[0.0, 0.0, 0.0], 2).unwrap();
        assert_abs_diff_eq!(i.lo, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(i.hi, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn point_polytope_gives_degenerate_interval() {
        let l = layout();
        let p = VPolytope::new(vec![vec![0.2, 0.4, 0.6]], &l).unwrap();
        let i = conditional_bounds_v(&p, &l, &[0.2, 0.4, 0.6], 1).unwrap();
        assert_abs_diff_eq!(i.lo, 0.4, epsilon = 1e-12);
        assert_abs_diff_eq!(i.hi, 0.4, epsilon = 1e-12);
    }

    #[test]
    fn v_bounds_outside_hull_is_error() {
        let err = conditional_bounds_v(&v(), &layout(), &[0.6, 0.1, 0.1], 2);
        assert!(matches!(err, Err(Error::OutsideHull)));
    }

    #[test]
    fn hull_membership_examples() {
        let p = v();
        for s in 0..4 {
            assert!(in_convex_hull(&p, p.vertex(s)).unwrap());
        }
        assert!(in_convex_hull(&p, &p.centroid()).unwrap());
        assert!(!in_convex_hull(&p, &[0.6, 0.1, 0.1]).unwrap());
        assert_abs_diff_eq!(hull_lp_value(&p, &[0.6, 0.1, 0.1]).unwrap(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn indicator_bounds() {
        let l = layout();
        let poly = ab();
        let t = [0.1, 0.2, 0.3];
        for d in 0..3 {
            let exact = conditional_bounds_ab(&poly, &l, &t, d).unwrap();
            let approx =
                conditional_bounds_indicator(|x| poly.satisfies(x), &l, &t, d, 1e-8).unwrap();
            assert_abs_diff_eq!(exact.lo, approx.lo, epsilon = 1e-8);
            assert_abs_diff_eq!(exact.hi, approx.hi, epsilon = 1e-8);
        }
        let i = conditional_bounds_indicator(|_| true, &l, &t, 0, 1e-8).unwrap();
        assert_eq!((i.lo, i.hi), (0.0, 1.0));
        let circle = |x: &[f64]| x[0] * x[0] + x[1] * x[1] <= 0.25;
        let i = conditional_bounds_indicator(circle, &l, &[0.3, 0.0, 0.0], 0, 1e-8).unwrap();
        assert_abs_diff_eq!(i.lo, 0.0, epsilon = 1e-8);
        assert_abs_diff_eq!(i.hi, 0.5, epsilon = 1e-8);
        assert!(conditional_bounds_indicator(circle, &l, &[0.6, 0.0, 0.0], 0, 1e-8).is_err());
    }

    fn interior_point() -> impl Strategy<Value = [f64; 3]> {
        // θ1 ≤ θ2 ≤ θ3 ≤ 0.5 via sorted uniforms
        prop::array::uniform3(0.0f64..0.5).prop_map(|mut x| {
            x.sort_by(f64::total_cmp);
            x
        })
    }

    proptest! {
        #[test]
        fn bounds_contain_current_value(t in interior_point(), d in 0usize..3) {
            let i = conditional_bounds_ab(&ab(), &layout(), &t, d).unwrap();
            prop_assert!(i.contains(t[d], 1e-12));
        }

        #[test]
        fn extra_rows_never_enlarge(t in interior_point(), d in 0usize..3, row in prop::array::uniform3(-1.0f64..1.0)) {
            let poly = ab();
            // choose rhs so that t stays feasible
            let rhs = row.iter().zip(&t).map(|(a, b)| a * b).sum::<f64>() + 0.01;
            let tighter = poly.with_row(&row, rhs).unwrap();
            let wide = conditional_bounds_ab(&poly, &layout(), &t, d).unwrap();
            let narrow = conditional_bounds_ab(&tighter, &layout(), &t, d).unwrap();
            prop_assert!(narrow.lo >= wide.lo && narrow.hi <= wide.hi);
        }

        #[test]
        fn hull_and_facets_agree(t in prop::array::uniform3(0.0f64..1.0)) {
            prop_assert_eq!(in_convex_hull(&v(), &t).unwrap(), ab().satisfies(&t));
        }
    }
}
