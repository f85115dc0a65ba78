//! Self-contained dense linear-programming solver.
//!
//! Two-phase primal simplex on an explicit tableau. Pivoting uses the
//! Dantzig rule (most negative reduced cost) and switches permanently to
//! Bland's rule after a run of degenerate pivots, which guarantees
//! termination. The pivot sequence is a pure function of the input, so
//! the same program and tolerance always produce bitwise-identical
//! solutions.
//!
//! Everything is stored dense; intended problem sizes are a few thousand
//! rows at most.

use crate::error::{Error, Result};

/// Outcome classification of a solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// A dense linear program: maximize `objective . x` subject to
/// `a_ub x <= b_ub`, `a_eq x = b_eq` and `bounds[j].0 <= x_j <= bounds[j].1`.
///
/// Lower bounds must be finite; upper bounds may be `f64::INFINITY`.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    pub n_vars: usize,
    pub objective: Vec<f64>,
    pub a_ub: Vec<Vec<f64>>,
    pub b_ub: Vec<f64>,
    pub a_eq: Vec<Vec<f64>>,
    pub b_eq: Vec<f64>,
    pub bounds: Vec<(f64, f64)>,
}

impl LinearProgram {
    /// Empty program over `n_vars` variables bounded to `x >= 0`.
    pub fn new(n_vars: usize) -> Self {
        LinearProgram {
            n_vars,
            objective: vec![0.0; n_vars],
            a_ub: Vec::new(),
            b_ub: Vec::new(),
            a_eq: Vec::new(),
            b_eq: Vec::new(),
            bounds: vec![(0.0, f64::INFINITY); n_vars],
        }
    }

    pub fn add_ub(&mut self, row: Vec<f64>, b: f64) {
        self.a_ub.push(row);
        self.b_ub.push(b);
    }

    pub fn add_eq(&mut self, row: Vec<f64>, b: f64) {
        self.a_eq.push(row);
        self.b_eq.push(b);
    }

    pub fn n_constraints(&self) -> usize {
        self.a_ub.len() + self.a_eq.len()
    }

    fn validate(&self) -> Result<()> {
        if self.n_vars == 0 {
            return Err(Error::invalid("LP must have at least one variable"));
        }
        if self.objective.len() != self.n_vars || self.bounds.len() != self.n_vars {
            return Err(Error::invalid("objective/bounds length mismatch"));
        }
        if self.a_ub.len() != self.b_ub.len() || self.a_eq.len() != self.b_eq.len() {
            return Err(Error::invalid("constraint matrix/rhs length mismatch"));
        }
        for row in self.a_ub.iter().chain(self.a_eq.iter()) {
            if row.len() != self.n_vars {
                return Err(Error::invalid("constraint row width mismatch"));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid("non-finite constraint coefficient"));
            }
        }
        if self.objective.iter().any(|v| !v.is_finite())
            || self.b_ub.iter().any(|v| !v.is_finite())
            || self.b_eq.iter().any(|v| !v.is_finite())
        {
            return Err(Error::invalid("non-finite coefficient"));
        }
        for &(lo, hi) in &self.bounds {
            if !lo.is_finite() || hi.is_nan() || hi < lo {
                return Err(Error::invalid(format!("bad variable bounds [{lo}, {hi}]")));
            }
        }
        Ok(())
    }
}

/// Result of [`solve`]. `x` and `objective` are meaningful only when
/// `status == Optimal`.
#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    /// Largest normalized feasibility violation of the returned point.
    pub max_residual: f64,
}

const PIVOT_TOL: f64 = 1e-8;
const COST_TOL: f64 = 1e-9;
// Degenerate-pivot streak after which the pivot rule drops to Bland's.
const BLAND_SWITCH: usize = 200;

/// Solves the program. `tol` bounds the accepted feasibility residual of
/// an optimal solution (normalized per row by `max(1, |b|)`).
pub fn solve(lp: &LinearProgram, tol: f64) -> Result<LpSolution> {
    lp.validate()?;
    let n = lp.n_vars;

    // Shift x = y + lo so that y >= 0; finite upper bounds become rows.
    let lo: Vec<f64> = lp.bounds.iter().map(|b| b.0).collect();
    let mut rows: Vec<(Vec<f64>, f64, bool)> = Vec::new(); // (coeffs, rhs, is_eq)
    for (a, &b) in lp.a_ub.iter().zip(&lp.b_ub) {
        let shift: f64 = a.iter().zip(&lo).map(|(c, l)| c * l).sum();
        rows.push((a.clone(), b - shift, false));
    }
    for (j, &(l, h)) in lp.bounds.iter().enumerate() {
        if h.is_finite() {
            let mut a = vec![0.0; n];
            a[j] = 1.0;
            rows.push((a, h - l, false));
        }
    }
    for (a, &b) in lp.a_eq.iter().zip(&lp.b_eq) {
        let shift: f64 = a.iter().zip(&lo).map(|(c, l)| c * l).sum();
        rows.push((a.clone(), b - shift, true));
    }

    let m = rows.len();
    // Column layout: 0..n structural, then one slack per inequality row,
    // then one artificial per row that needs it, then the rhs.
    let mut n_slack = 0usize;
    let mut n_art = 0usize;
    for (_, b, eq) in &rows {
        if !eq {
            n_slack += 1;
        }
        if *eq || *b < 0.0 {
            n_art += 1;
        }
    }
    let total = n + n_slack + n_art;
    let width = total + 1;
    let mut tab = vec![0.0f64; (m + 1) * width];
    let mut basis = vec![usize::MAX; m];
    let art_start = n + n_slack;

    let mut slack_cols = vec![None; m];
    let mut slack_idx = 0usize;
    let mut art_idx = 0usize;
    for (i, (a, b, eq)) in rows.iter().enumerate() {
        let neg = *b < 0.0;
        let sign = if neg { -1.0 } else { 1.0 };
        let r = i * width;
        for j in 0..n {
            tab[r + j] = sign * a[j];
        }
        tab[r + total] = sign * b;
        if !*eq {
            tab[r + n + slack_idx] = sign;
            slack_cols[i] = Some(n + slack_idx);
            if !neg {
                basis[i] = n + slack_idx;
            }
            slack_idx += 1;
        }
        if *eq || neg {
            tab[r + art_start + art_idx] = 1.0;
            basis[i] = art_start + art_idx;
            art_idx += 1;
        }
    }

    let mut state = Tableau {
        tab,
        basis,
        m,
        n_total: total,
        width,
        art_start,
        active: vec![true; m],
        iterations: 0,
        bland: false,
        degen_streak: 0,
        max_iter: 50_000 + 40 * (m + n),
    };

    // Phase 1: maximize -sum(artificials). Reduced-cost row starts at
    // +1 on artificial columns, then basic artificials are priced out.
    if n_art > 0 {
        let or = state.m * state.width;
        for j in 0..state.width {
            state.tab[or + j] = 0.0;
        }
        for j in art_start..total {
            state.tab[or + j] = 1.0;
        }
        for i in 0..m {
            if state.basis[i] >= art_start {
                for j in 0..state.width {
                    state.tab[or + j] -= state.tab[i * state.width + j];
                }
            }
        }
        match state.run(true)? {
            StepOutcome::Optimal => {}
            StepOutcome::Unbounded => {
                return Err(Error::NumericalFailure(
                    "phase-1 objective reported unbounded".into(),
                ));
            }
        }
        let infeas = -state.tab[state.m * state.width + total];
        if infeas > 1e-7 {
            return Ok(LpSolution {
                status: LpStatus::Infeasible,
                x: Vec::new(),
                objective: f64::NAN,
                iterations: state.iterations,
                max_residual: f64::NAN,
            });
        }
        state.evict_artificials();
    }

    // Phase 2: maximize the shifted objective over structural + slack
    // columns; artificial columns are barred from entering.
    {
        let or = state.m * state.width;
        for j in 0..state.width {
            state.tab[or + j] = 0.0;
        }
        for j in 0..n {
            state.tab[or + j] = -lp.objective[j];
        }
        for i in 0..m {
            if !state.active[i] {
                continue;
            }
            let bj = state.basis[i];
            if bj < n && lp.objective[bj] != 0.0 {
                let c = lp.objective[bj];
                for j in 0..state.width {
                    state.tab[or + j] += c * state.tab[i * state.width + j];
                }
            }
        }
    }
    state.bland = false;
    state.degen_streak = 0;
    match state.run(false)? {
        StepOutcome::Optimal => {}
        StepOutcome::Unbounded => {
            return Ok(LpSolution {
                status: LpStatus::Unbounded,
                x: Vec::new(),
                objective: f64::NAN,
                iterations: state.iterations,
                max_residual: f64::NAN,
            });
        }
    }

    // Extract x = y + lo and check residuals against the original data.
    let residual_of = |x: &[f64]| -> f64 {
        let mut worst = 0.0f64;
        for (a, &b) in lp.a_ub.iter().zip(&lp.b_ub) {
            let v: f64 = a.iter().zip(x).map(|(c, v)| c * v).sum();
            worst = worst.max((v - b) / b.abs().max(1.0));
        }
        for (a, &b) in lp.a_eq.iter().zip(&lp.b_eq) {
            let v: f64 = a.iter().zip(x).map(|(c, v)| c * v).sum();
            worst = worst.max((v - b).abs() / b.abs().max(1.0));
        }
        for (j, &(l, h)) in lp.bounds.iter().enumerate() {
            worst = worst.max(l - x[j]).max(x[j] - h);
        }
        worst
    };
    let mut x = lo.clone();
    for i in 0..m {
        if state.active[i] {
            let b = state.basis[i];
            if b < n {
                x[b] = lo[b] + state.tab[i * state.width + total];
            }
        }
    }
    let mut max_residual = residual_of(&x);
    // The tableau drifts over long pivot chains; re-solving the tight
    // constraints of the final basis from the original data recovers the
    // vertex to near machine precision.
    if let Some(y) = refine_vertex(&rows, &slack_cols, &state, n) {
        let x_ref: Vec<f64> = y.iter().zip(&lo).map(|(v, l)| v + l).collect();
        let r = residual_of(&x_ref);
        if r < max_residual {
            x = x_ref;
            max_residual = r;
        }
    }
    let objective: f64 = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
    if max_residual > tol.max(1e-12) {
        return Err(Error::NumericalFailure(format!(
            "solution residual {max_residual:.3e} exceeds tolerance {tol:.3e} \
             after {} iterations",
            state.iterations
        )));
    }

    Ok(LpSolution {
        status: LpStatus::Optimal,
        x,
        objective,
        iterations: state.iterations,
        max_residual,
    })
}

enum StepOutcome {
    Optimal,
    Unbounded,
}

/// Re-derives the optimal vertex from the original (shifted) rows: every
/// nonbasic structural variable sits at zero and every row whose slack is
/// nonbasic holds with equality, which pins the basic structural values.
/// Returns `None` when the tight system is rank-deficient.
fn refine_vertex(
    rows: &[(Vec<f64>, f64, bool)],
    slack_cols: &[Option<usize>],
    state: &Tableau,
    n: usize,
) -> Option<Vec<f64>> {
    let basic: std::collections::BTreeSet<usize> =
        (0..state.m).filter(|&i| state.active[i]).map(|i| state.basis[i]).collect();
    let unknowns: Vec<usize> = (0..n).filter(|j| basic.contains(j)).collect();
    let b = unknowns.len();
    let mut y = vec![0.0; n];
    if b == 0 {
        return Some(y);
    }
    let mut sys: Vec<Vec<f64>> = Vec::new();
    for (i, (a, rhs, eq)) in rows.iter().enumerate() {
        if i < state.active.len() && !state.active[i] {
            continue;
        }
        let tight = *eq || slack_cols[i].is_none_or(|s| !basic.contains(&s));
        if !tight {
            continue;
        }
        let mut r: Vec<f64> = unknowns.iter().map(|&j| a[j]).collect();
        r.push(*rhs);
        sys.push(r);
    }
    if sys.len() < b {
        return None;
    }
    // Gauss-Jordan with partial pivoting on the rectangular tight system.
    let mut pivot_row_of = vec![usize::MAX; b];
    let mut used = vec![false; sys.len()];
    for col in 0..b {
        let mut best = usize::MAX;
        let mut best_abs = 1e-11;
        for (i, row) in sys.iter().enumerate() {
            if !used[i] && row[col].abs() > best_abs {
                best_abs = row[col].abs();
                best = i;
            }
        }
        if best == usize::MAX {
            return None;
        }
        used[best] = true;
        pivot_row_of[col] = best;
        let p = sys[best][col];
        for v in &mut sys[best] {
            *v /= p;
        }
        for i in 0..sys.len() {
            if i == best {
                continue;
            }
            let f = sys[i][col];
            if f == 0.0 {
                continue;
            }
            let (src, dst) = if best < i {
                let (lo_part, hi_part) = sys.split_at_mut(i);
                (&lo_part[best], &mut hi_part[0])
            } else {
                let (lo_part, hi_part) = sys.split_at_mut(best);
                (&hi_part[0], &mut lo_part[i])
            };
            for (d, s) in dst.iter_mut().zip(src.iter()) {
                *d -= f * s;
            }
        }
    }
    for (col, &j) in unknowns.iter().enumerate() {
        y[j] = sys[pivot_row_of[col]][b];
    }
    Some(y)
}

struct Tableau {
    tab: Vec<f64>,
    basis: Vec<usize>,
    m: usize,
    n_total: usize,
    width: usize,
    art_start: usize,
    active: Vec<bool>,
    iterations: usize,
    bland: bool,
    degen_streak: usize,
    max_iter: usize,
}

impl Tableau {
    fn run(&mut self, phase1: bool) -> Result<StepOutcome> {
        loop {
            self.iterations += 1;
            if self.iterations > self.max_iter {
                return Err(Error::NumericalFailure(format!(
                    "iteration cap {} exceeded (phase {}, {} rows)",
                    self.max_iter,
                    if phase1 { 1 } else { 2 },
                    self.m
                )));
            }
            let enter_limit = if phase1 { self.n_total } else { self.art_start };
            let or = self.m * self.width;
            let col = if self.bland {
                (0..enter_limit).find(|&j| self.tab[or + j] < -COST_TOL)
            } else {
                let mut best = None;
                let mut best_v = -COST_TOL;
                for j in 0..enter_limit {
                    let v = self.tab[or + j];
                    if v < best_v {
                        best_v = v;
                        best = Some(j);
                    }
                }
                best
            };
            let Some(col) = col else {
                return Ok(StepOutcome::Optimal);
            };

            let row = if self.bland {
                self.ratio_test_bland(col)
            } else {
                self.ratio_test_harris(col)
            };
            let Some((row, best_ratio)) = row else {
                return Ok(StepOutcome::Unbounded);
            };

            if best_ratio <= 1e-12 {
                self.degen_streak += 1;
                if self.degen_streak > BLAND_SWITCH {
                    self.bland = true;
                }
            } else {
                self.degen_streak = 0;
            }
            self.pivot(row, col);
        }
    }

    /// Strict minimum-ratio rule breaking ties on the lowest leaving
    /// basis index, as Bland's anti-cycling guarantee requires.
    fn ratio_test_bland(&self, col: usize) -> Option<(usize, f64)> {
        let mut row: Option<usize> = None;
        let mut best_ratio = f64::INFINITY;
        for i in 0..self.m {
            if !self.active[i] {
                continue;
            }
            let a = self.tab[i * self.width + col];
            if a <= PIVOT_TOL {
                continue;
            }
            let ratio = self.tab[i * self.width + self.n_total] / a;
            let better = match row {
                None => true,
                Some(r) => {
                    ratio < best_ratio - 1e-12
                        || (ratio <= best_ratio + 1e-12 && self.basis[i] < self.basis[r])
                }
            };
            if better {
                row = Some(i);
                best_ratio = ratio;
            }
        }
        row.map(|r| (r, best_ratio))
    }

    /// Two-pass ratio test: first find the tightest ratio with a small
    /// feasibility slack, then among rows within that bound pick the
    /// largest pivot element. Avoids pivoting on tiny entries, which is
    /// where tableau arithmetic falls apart.
    fn ratio_test_harris(&self, col: usize) -> Option<(usize, f64)> {
        const SLACK: f64 = 1e-9;
        let mut theta_max = f64::INFINITY;
        for i in 0..self.m {
            if !self.active[i] {
                continue;
            }
            let a = self.tab[i * self.width + col];
            if a <= PIVOT_TOL {
                continue;
            }
            let rhs = self.tab[i * self.width + self.n_total];
            theta_max = theta_max.min((rhs.max(0.0) + SLACK) / a);
        }
        if theta_max == f64::INFINITY {
            return None;
        }
        let mut row: Option<usize> = None;
        let mut best_pivot = 0.0;
        let mut best_ratio = f64::INFINITY;
        for i in 0..self.m {
            if !self.active[i] {
                continue;
            }
            let a = self.tab[i * self.width + col];
            if a <= PIVOT_TOL {
                continue;
            }
            let rhs = self.tab[i * self.width + self.n_total];
            let ratio = rhs.max(0.0) / a;
            if ratio <= theta_max && a > best_pivot {
                best_pivot = a;
                row = Some(i);
                best_ratio = ratio;
            }
        }
        row.map(|r| (r, best_ratio))
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let w = self.width;
        let p = self.tab[row * w + col];
        for j in 0..w {
            self.tab[row * w + j] /= p;
        }
        self.tab[row * w + col] = 1.0;
        for i in 0..=self.m {
            if i == row {
                continue;
            }
            let f = self.tab[i * w + col];
            if f == 0.0 {
                continue;
            }
            let (lo_part, hi_part) = self.tab.split_at_mut(row.max(i) * w);
            let (src, dst) = if row < i {
                (&lo_part[row * w..row * w + w], &mut hi_part[..w])
            } else {
                (&hi_part[..w], &mut lo_part[i * w..i * w + w])
            };
            for j in 0..w {
                dst[j] -= f * src[j];
            }
            self.tab[i * w + col] = 0.0;
        }
        self.basis[row] = col;
    }

    /// Forces artificial variables out of the basis after phase 1; rows
    /// that cannot pivot on any real column are redundant and dropped.
    fn evict_artificials(&mut self) {
        for i in 0..self.m {
            if !self.active[i] || self.basis[i] < self.art_start {
                continue;
            }
            let mut pivot_col = None;
            for j in 0..self.art_start {
                if self.tab[i * self.width + j].abs() > PIVOT_TOL {
                    pivot_col = Some(j);
                    break;
                }
            }
            match pivot_col {
                Some(j) => self.pivot(i, j),
                None => {
                    self.active[i] = false;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b}");
    }

    #[test]
    fn box_maximum() {
        let mut lp = LinearProgram::new(1);
        lp.objective = vec![1.0];
        lp.add_ub(vec![1.0], 1.0);
        let sol = solve(&lp, 1e-9).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert_close(sol.objective, 1.0, 1e-9);
        assert_close(sol.x[0], 1.0, 1e-9);
    }

    #[test]
    fn degenerate_facet_objective_unique() {
        let mut lp = LinearProgram::new(2);
        lp.objective = vec![1.0, 1.0];
        lp.add_ub(vec![1.0, 1.0], 1.0);
        let sol = solve(&lp, 1e-9).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert_close(sol.objective, 1.0, 1e-9);
    }

    #[test]
    fn infeasible_pair() {
        let mut lp = LinearProgram::new(1);
        lp.objective = vec![1.0];
        lp.bounds[0] = (2.0, f64::INFINITY);
        lp.add_ub(vec![1.0], 1.0);
        let sol = solve(&lp, 1e-9).unwrap();
        assert_eq!(sol.status, LpStatus::Infeasible);
    }

    #[test]
    fn unbounded_detected() {
        let mut lp = LinearProgram::new(2);
        lp.objective = vec![2.0, 1.0];
        lp.add_ub(vec![1.0, -2.0], 4.0);
        lp.add_ub(vec![-1.0, 1.0], 2.0);
        let sol = solve(&lp, 1e-9).unwrap();
        assert_eq!(sol.status, LpStatus::Unbounded);
    }

    #[test]
    fn equality_and_upper_bounds() {
        // max x + 2y s.t. x + y = 1, y <= 0.4 -> x=0.6,y=0.4, obj 1.4
        let mut lp = LinearProgram::new(2);
        lp.objective = vec![1.0, 2.0];
        lp.add_eq(vec![1.0, 1.0], 1.0);
        lp.bounds[1] = (0.0, 0.4);
        let sol = solve(&lp, 1e-9).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert_close(sol.objective, 1.4, 1e-9);
        assert_close(sol.x[0], 0.6, 1e-9);
    }

    #[test]
    fn negative_rhs_needs_phase1() {
        // x >= 3 expressed as -x <= -3, minimize x (max -x) -> x = 3.
        let mut lp = LinearProgram::new(1);
        lp.objective = vec![-1.0];
        lp.add_ub(vec![-1.0], -3.0);
        let sol = solve(&lp, 1e-9).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert_close(sol.x[0], 3.0, 1e-9);
    }

    #[test]
    fn shifted_lower_bounds() {
        // max -x - y with x,y >= 1.5 and x + y >= 4.
        let mut lp = LinearProgram::new(2);
        lp.objective = vec![-1.0, -1.0];
        lp.bounds = vec![(1.5, f64::INFINITY); 2];
        lp.add_ub(vec![-1.0, -1.0], -4.0);
        let sol = solve(&lp, 1e-9).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert_close(sol.objective, -4.0, 1e-9);
    }

    #[test]
    fn deterministic_bitwise() {
        let mut lp = LinearProgram::new(3);
        lp.objective = vec![1.0, 2.0, 0.5];
        lp.add_ub(vec![1.0, 1.0, 1.0], 2.0);
        lp.add_ub(vec![2.0, 0.5, 1.0], 3.0);
        lp.add_eq(vec![0.0, 1.0, 1.0], 1.0);
        let a = solve(&lp, 1e-9).unwrap();
        let b = solve(&lp, 1e-9).unwrap();
        assert_eq!(a.x, b.x);
        assert_eq!(a.objective.to_bits(), b.objective.to_bits());
    }

    #[test]
    fn objective_scaling_keeps_vertex() {
        let mut lp = LinearProgram::new(3);
        lp.objective = vec![1.0, 0.75, 0.5];
        lp.add_ub(vec![1.0, 2.0, 1.0], 4.0);
        lp.add_ub(vec![3.0, 1.0, 0.0], 5.0);
        lp.add_ub(vec![0.0, 1.0, 2.0], 3.0);
        let base = solve(&lp, 1e-9).unwrap();
        for lambda in [2.0, 4.0, 0.5] {
            let mut scaled = lp.clone();
            for c in &mut scaled.objective {
                *c *= lambda;
            }
            let sol = solve(&scaled, 1e-9).unwrap();
            assert_eq!(sol.x, base.x, "vertex changed under lambda = {lambda}");
            assert_eq!(sol.objective.to_bits(), (lambda * base.objective).to_bits());
        }
    }

    #[test]
    fn weak_duality_spot_check() {
        // Sampled feasible points can never beat the reported optimum.
        let mut lp = LinearProgram::new(3);
        lp.objective = vec![1.0, 1.5, -0.5];
        lp.add_ub(vec![1.0, 1.0, 0.0], 2.0);
        lp.add_ub(vec![0.5, 2.0, 1.0], 3.0);
        lp.bounds = vec![(0.0, 2.0); 3];
        let sol = solve(&lp, 1e-9).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        let mut state = 42u64;
        let mut uniform = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64) / ((1u64 << 53) as f64)
        };
        let mut checked = 0;
        while checked < 200 {
            let x = [2.0 * uniform(), 2.0 * uniform(), 2.0 * uniform()];
            let feas = lp
                .a_ub
                .iter()
                .zip(&lp.b_ub)
                .all(|(a, &b)| a.iter().zip(&x).map(|(c, v)| c * v).sum::<f64>() <= b);
            if !feas {
                continue;
            }
            checked += 1;
            let val: f64 = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
            assert!(val <= sol.objective + 1e-9);
        }
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let mut lp = LinearProgram::new(2);
        lp.objective = vec![1.0];
        assert!(matches!(solve(&lp, 1e-9), Err(Error::InvalidArgument(_))));
        let mut lp2 = LinearProgram::new(2);
        lp2.add_ub(vec![1.0], 1.0);
        assert!(matches!(solve(&lp2, 1e-9), Err(Error::InvalidArgument(_))));
    }
}
