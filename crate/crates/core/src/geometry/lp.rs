//! Dense two-phase primal simplex.
//!
//! Problems here are small and dense (a few dozen rows, up to a few thousand
//! columns), so a full tableau is simpler and fast enough. Entering columns
//! follow Dantzig's rule until a run of degenerate pivots is seen, after
//! which Bland's rule takes over for the rest of the solve; that rule cannot
//! cycle.

use serde::Serialize;

const PIVOT_TOL: f64 = 1e-11;
const COST_TOL: f64 = 1e-10;
const FEAS_TOL: f64 = 1e-9;
const RESIDUAL_TOL: f64 = 1e-8;
const DEGENERATE_RUN: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

/// `max cᵀx` subject to linear rows and per-variable bounds.
///
/// Variables default to `0 ≤ x < ∞`.
#[derive(Clone, Debug)]
pub struct LpProblem {
    objective: Vec<f64>,
    sense: f64,
    rows: Vec<(Vec<f64>, Relation, f64)>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// Iteration limit hit or the final point failed the residual check.
    NumericalFailure,
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Objective value in the caller's sense (max or min).
    pub value: f64,
    pub x: Vec<f64>,
}

impl LpProblem {
    pub fn maximize(objective: Vec<f64>) -> Self {
        let n = objective.len();
        Self {
            objective,
            sense: 1.0,
            rows: Vec::new(),
            lower: vec![0.0; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn minimize(objective: Vec<f64>) -> Self {
        let mut p = Self::maximize(objective.into_iter().map(|c| -c).collect());
        p.sense = -1.0;
        p
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    /// Adds `coeffs · x (rel) rhs`. Panics if `coeffs` has the wrong length.
    pub fn add_row(&mut self, coeffs: Vec<f64>, rel: Relation, rhs: f64) -> &mut Self {
        assert_eq!(coeffs.len(), self.n_vars(), "row length must match variable count");
        self.rows.push((coeffs, rel, rhs));
        self
    }

    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: f64) -> &mut Self {
        self.lower[var] = lower;
        self.upper[var] = upper;
        self
    }

    pub fn set_free(&mut self, var: usize) -> &mut Self {
        self.set_bounds(var, f64::NEG_INFINITY, f64::INFINITY)
    }

    fn max_residual(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (coeffs, rel, rhs) in &self.rows {
            let lhs: f64 = coeffs.iter().zip(x).map(|(a, b)| a * b).sum();
            let scale = 1.0 + rhs.abs();
            let v = match rel {
                Relation::Le => (lhs - rhs).max(0.0),
                Relation::Ge => (rhs - lhs).max(0.0),
                Relation::Eq => (lhs - rhs).abs(),
            };
            worst = worst.max(v / scale);
        }
        for (j, &xj) in x.iter().enumerate() {
            worst = worst.max((self.lower[j] - xj).max(0.0)).max((xj - self.upper[j]).max(0.0));
        }
        worst
    }
}

/// Each original variable is `offset + Σ sign · y_col` over nonnegative `y`.
struct VarMap {
    offset: f64,
    cols: Vec<(usize, f64)>,
}

struct Tableau {
    width: usize,
    data: Vec<f64>,
    cost: Vec<f64>,
    basis: Vec<usize>,
    n_rows: usize,
    blocked_from: usize,
    bland: bool,
}

enum Outcome {
    Optimal,
    Unbounded,
    IterationLimit,
}

impl Tableau {
    fn rhs(&self, r: usize) -> f64 {
        self.data[r * self.width + self.width - 1]
    }

    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.width + c]
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let w = self.width;
        let p = self.data[r * w + q];
        for x in &mut self.data[r * w..(r + 1) * w] {
            *x /= p;
        }
        let (before, rest) = self.data.split_at_mut(r * w);
        let (prow, after) = rest.split_at_mut(w);
        for row in before.chunks_mut(w).chain(after.chunks_mut(w)) {
            let f = row[q];
            if f != 0.0 {
                for (x, &y) in row.iter_mut().zip(prow.iter()) {
                    *x -= f * y;
                }
                row[q] = 0.0;
            }
        }
        let f = self.cost[q];
        if f != 0.0 {
            for (x, &y) in self.cost.iter_mut().zip(prow.iter()) {
                *x -= f * y;
            }
            self.cost[q] = 0.0;
        }
        self.basis[r] = q;
    }

    fn entering(&self) -> Option<usize> {
        let candidates = (0..self.blocked_from).filter(|&j| self.cost[j] > COST_TOL);
        if self.bland {
            candidates.min()
        } else {
            candidates.max_by(|&a, &b| self.cost[a].total_cmp(&self.cost[b]).then(b.cmp(&a)))
        }
    }

    fn leaving(&self, q: usize) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for r in 0..self.n_rows {
            let a = self.at(r, q);
            if a > PIVOT_TOL {
                let ratio = self.rhs(r).max(0.0) / a;
                best = match best {
                    None => Some((r, ratio)),
                    Some((br, bratio)) => {
                        if ratio < bratio - 1e-12
                            || (ratio <= bratio + 1e-12 && self.basis[r] < self.basis[br])
                        {
                            Some((r, ratio))
                        } else {
                            Some((br, bratio))
                        }
                    }
                };
            }
        }
        best.map(|(r, _)| r)
    }

    fn run(&mut self, max_iter: usize) -> Outcome {
        let mut degenerate = 0;
        for _ in 0..max_iter {
            let Some(q) = self.entering() else {
                return Outcome::Optimal;
            };
            let Some(r) = self.leaving(q) else {
                return Outcome::Unbounded;
            };
            if self.rhs(r).abs() < 1e-12 {
                degenerate += 1;
                if degenerate > DEGENERATE_RUN {
                    self.bland = true;
                }
            } else {
                degenerate = 0;
            }
            self.pivot(r, q);
        }
        Outcome::IterationLimit
    }

    fn remove_row(&mut self, r: usize) {
        let w = self.width;
        self.data.drain(r * w..(r + 1) * w);
        self.basis.remove(r);
        self.n_rows -= 1;
    }

    fn objective_value(&self) -> f64 {
        -self.cost[self.width - 1]
    }
}

/// Solves the problem. Never returns a wrong `Optimal`: a solution that fails
/// the residual check is reported as [`LpStatus::NumericalFailure`].
pub fn solve_lp(problem: &LpProblem) -> LpSolution {
    let n = problem.n_vars();
    let fail = |status| LpSolution {
        status,
        value: f64::NAN,
        x: Vec::new(),
    };

    // variable substitution to y ≥ 0
    let mut maps = Vec::with_capacity(n);
    let mut ny = 0;
    let mut bound_rows: Vec<(usize, f64)> = Vec::new();
    for j in 0..n {
        let (lo, hi) = (problem.lower[j], problem.upper[j]);
        if lo > hi {
            return fail(LpStatus::Infeasible);
        }
        let map = if lo.is_finite() {
            if hi.is_finite() {
                bound_rows.push((ny, hi - lo));
            }
            ny += 1;
            VarMap {
                offset: lo,
                cols: vec![(ny - 1, 1.0)],
            }
        } else if hi.is_finite() {
            ny += 1;
            VarMap {
                offset: hi,
                cols: vec![(ny - 1, -1.0)],
            }
        } else {
            ny += 2;
            VarMap {
                offset: 0.0,
                cols: vec![(ny - 2, 1.0), (ny - 1, -1.0)],
            }
        };
        maps.push(map);
    }

    let mut rows: Vec<(Vec<f64>, Relation, f64)> = Vec::new();
    for (coeffs, rel, rhs) in &problem.rows {
        let mut row = vec![0.0; ny];
        let mut rhs = *rhs;
        for (j, &a) in coeffs.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            rhs -= a * maps[j].offset;
            for &(c, sign) in &maps[j].cols {
                row[c] += a * sign;
            }
        }
        rows.push((row, *rel, rhs));
    }
    for (c, width) in bound_rows {
        let mut row = vec![0.0; ny];
        row[c] = 1.0;
        rows.push((row, Relation::Le, width));
    }
    for (row, rel, rhs) in &mut rows {
        if *rhs < 0.0 {
            row.iter_mut().for_each(|x| *x = -*x);
            *rhs = -*rhs;
            *rel = match rel {
                Relation::Le => Relation::Ge,
                Relation::Ge => Relation::Le,
                Relation::Eq => Relation::Eq,
            };
        }
    }

    let m = rows.len();
    let n_slack = rows.iter().filter(|(_, r, _)| *r != Relation::Eq).count();
    let n_art = rows.iter().filter(|(_, r, _)| *r != Relation::Le).count();
    let art_start = ny + n_slack;
    let width = art_start + n_art + 1;
    let mut data = vec![0.0; m * width];
    let mut basis = vec![0; m];
    let (mut slack, mut art) = (ny, art_start);
    let mut rhs_scale: f64 = 1.0;
    for (r, (row, rel, rhs)) in rows.iter().enumerate() {
        let line = &mut data[r * width..(r + 1) * width];
        line[..ny].copy_from_slice(row);
        line[width - 1] = *rhs;
        rhs_scale = rhs_scale.max(rhs.abs());
        match rel {
            Relation::Le => {
                line[slack] = 1.0;
                basis[r] = slack;
                slack += 1;
            }
            Relation::Ge => {
                line[slack] = -1.0;
                slack += 1;
                line[art] = 1.0;
                basis[r] = art;
                art += 1;
            }
            Relation::Eq => {
                line[art] = 1.0;
                basis[r] = art;
                art += 1;
            }
        }
    }

    let max_iter = 200 * (m + width) + 1000;
    let mut t = Tableau {
        width,
        data,
        cost: vec![0.0; width],
        basis,
        n_rows: m,
        blocked_from: width - 1,
        bland: false,
    };

    if n_art > 0 {
        for j in art_start..width - 1 {
            t.cost[j] = -1.0;
        }
        for r in 0..m {
            if t.basis[r] >= art_start {
                for j in 0..width {
                    t.cost[j] += t.at(r, j);
                }
            }
        }
        for j in art_start..width - 1 {
            t.cost[j] = 0.0;
        }
        match t.run(max_iter) {
            Outcome::Optimal => {}
            Outcome::Unbounded | Outcome::IterationLimit => {
                return fail(LpStatus::NumericalFailure)
            }
        }
        if t.objective_value() < -FEAS_TOL * rhs_scale {
            return fail(LpStatus::Infeasible);
        }
        // drive artificials out of the basis, dropping redundant rows
        let mut r = 0;
        while r < t.n_rows {
            if t.basis[r] >= art_start {
                let q = (0..art_start)
                    .filter(|&j| t.at(r, j).abs() > 1e-9)
                    .max_by(|&a, &b| t.at(r, a).abs().total_cmp(&t.at(r, b).abs()));
                match q {
                    Some(q) => {
                        t.pivot(r, q);
                        r += 1;
                    }
                    None => t.remove_row(r),
                }
            } else {
                r += 1;
            }
        }
        t.blocked_from = art_start;
    }

    // phase 2 costs over y (slacks cost nothing)
    let mut c = vec![0.0; width];
    for (j, map) in maps.iter().enumerate() {
        for &(col, sign) in &map.cols {
            c[col] += problem.objective[j] * sign;
        }
    }
    t.cost = c.clone();
    t.cost[width - 1] = 0.0;
    for r in 0..t.n_rows {
        let cb = c[t.basis[r]];
        if cb != 0.0 {
            for j in 0..width {
                t.cost[j] -= cb * t.at(r, j);
            }
        }
    }
    t.bland = false;
    match t.run(max_iter) {
        Outcome::Optimal => {}
        Outcome::Unbounded => {
            return LpSolution {
                status: LpStatus::Unbounded,
                value: problem.sense * f64::INFINITY,
                x: Vec::new(),
            }
        }
        Outcome::IterationLimit => return fail(LpStatus::NumericalFailure),
    }

    let mut y = vec![0.0; ny];
    for r in 0..t.n_rows {
        if t.basis[r] < ny {
            y[t.basis[r]] = t.rhs(r).max(0.0);
        }
    }
    let x: Vec<f64> = maps
        .iter()
        .map(|m| m.offset + m.cols.iter().map(|&(c, s)| s * y[c]).sum::<f64>())
        .collect();
    if problem.max_residual(&x) > RESIDUAL_TOL {
        return fail(LpStatus::NumericalFailure);
    }
    let value = problem.sense
        * problem
            .objective
            .iter()
            .zip(&x)
            .map(|(a, b)| a * b)
            .sum::<f64>();
    LpSolution {
        status: LpStatus::Optimal,
        value,
        x,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn bounded_single_variable() {
        let mut p = LpProblem::maximize(vec![1.0]);
        p.add_row(vec![1.0], Relation::Le, 1.0);
        let s = solve_lp(&p);
        assert_eq!(s.status, LpStatus::Optimal);
        assert_abs_diff_eq!(s.value, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn infeasible_single_variable() {
        let mut p = LpProblem::maximize(vec![1.0]);
        p.add_row(vec![1.0], Relation::Le, -1.0);
        assert_eq!(solve_lp(&p).status, LpStatus::Infeasible);
    }

    #[test]
    fn unbounded_single_variable() {
        let p = LpProblem::maximize(vec![1.0]);
        assert_eq!(solve_lp(&p).status, LpStatus::Unbounded);
    }

    #[test]
    fn textbook_problem() {
        // max 3x + 5y, x ≤ 4, 2y ≤ 12, 3x + 2y ≤ 18 → (2, 6), 36
        let mut p = LpProblem::maximize(vec![3.0, 5.0]);
        p.add_row(vec![1.0, 0.0], Relation::Le, 4.0)
            .add_row(vec![0.0, 2.0], Relation::Le, 12.0)
            .add_row(vec![3.0, 2.0], Relation::Le, 18.0);
        let s = solve_lp(&p);
        assert_eq!(s.status, LpStatus::Optimal);
        assert_abs_diff_eq!(s.value, 36.0, epsilon = 1e-10);
        assert_abs_diff_eq!(s.x[0], 2.0, epsilon = 1e-10);
        assert_abs_diff_eq!(s.x[1], 6.0, epsilon = 1e-10);
    }

    #[test]
    fn equalities_free_variables_and_minimisation() {
        // min |shift| style: min x0 + x1 s.t. x0 - x1 = -3, x0 free, x1 ∈ [1, 10]
        let mut p = LpProblem::minimize(vec![1.0, 1.0]);
        p.set_free(0).set_bounds(1, 1.0, 10.0);
        p.add_row(vec![1.0, -1.0], Relation::Eq, -3.0);
        let s = solve_lp(&p);
        assert_eq!(s.status, LpStatus::Optimal);
        assert_abs_diff_eq!(s.x[0], -2.0, epsilon = 1e-10);
        assert_abs_diff_eq!(s.x[1], 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(s.value, -1.0, epsilon = 1e-10);
    }

    #[test]
    fn redundant_equalities_are_dropped() {
        let mut p = LpProblem::maximize(vec![1.0, 2.0]);
        p.add_row(vec![1.0, 1.0], Relation::Eq, 1.0)
            .add_row(vec![2.0, 2.0], Relation::Eq, 2.0)
            .add_row(vec![0.0, 1.0], Relation::Ge, 0.25);
        let s = solve_lp(&p);
        assert_eq!(s.status, LpStatus::Optimal);
        assert_abs_diff_eq!(s.value, 2.0, epsilon = 1e-10);
    }

    #[test]
    fn degenerate_problem_terminates() {
        // Beale's cycling example (cycles under naive Dantzig with a poor tie rule)
        let mut p = LpProblem::maximize(vec![0.75, -150.0, 0.02, -6.0]);
        p.add_row(vec![0.25, -60.0, -0.04, 9.0], Relation::Le, 0.0)
            .add_row(vec![0.5, -90.0, -0.02, 3.0], Relation::Le, 0.0)
            .add_row(vec![0.0, 0.0, 1.0, 0.0], Relation::Le, 1.0);
        let s = solve_lp(&p);
        assert_eq!(s.status, LpStatus::Optimal);
        assert_abs_diff_eq!(s.value, 0.05, epsilon = 1e-10);
    }

    proptest! {
        // feasible by construction (x0 satisfies every row), bounded by the box
        #[test]
        fn residuals_small_on_feasible_bounded_problems(
            rows in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 4), 1..12),
            x0 in prop::collection::vec(0.0f64..1.0, 4),
            slack in prop::collection::vec(0.0f64..2.0, 12),
            c in prop::collection::vec(-3.0f64..3.0, 4),
        ) {
            let mut p = LpProblem::maximize(c);
            for j in 0..4 {
                p.set_bounds(j, -10.0, 10.0);
            }
            for (r, row) in rows.iter().enumerate() {
                let rhs: f64 = row.iter().zip(&x0).map(|(a, b)| a * b).sum::<f64>() + slack[r];
                p.add_row(row.clone(), Relation::Le, rhs);
            }
            let s = solve_lp(&p);
            prop_assert_eq!(s.status, LpStatus::Optimal);
            prop_assert!(p.max_residual(&s.x) <= 1e-8);
        }
    }
}
