//! Bounded-variable simplex on an explicit dense tableau.
//!
//! Every row `i` gets a logical variable `s_i` with `sum(a_ij x_j) - s_i = 0`
//! and the row bounds moved onto `s_i`. The tableau stores `B⁻¹[A | -I]` for
//! the current basis `B`, which keeps warm starts cheap: adding a cut appends
//! one row and one basic logical, changing a bound only moves nonbasic values.
//! Optimality is then restored by the dual simplex when the basis is still
//! dual feasible, otherwise by a composite primal phase 1.

use crate::linalg::{DenseMatrix, LuFactors, SingularMatrix};
use crate::lp::{LpError, LpProblem, LpRow, LpSolution};

const PIVOT_TOL: f64 = 1e-9;
const PRIMAL_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-10;
const HARRIS_TOL: f64 = 1e-11;
const REINVERT_EVERY: usize = 200;
const BLAND_AFTER: usize = 40;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarState {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic free variable parked at zero.
    Free,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Debug)]
pub struct Simplex {
    n: usize,
    cost: Vec<f64>,
    rows: Vec<Vec<(usize, f64)>>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    tab: Vec<Vec<f64>>,
    basis: Vec<usize>,
    state: Vec<VarState>,
    x: Vec<f64>,
    d: Vec<f64>,
    since_reinvert: usize,
    pivots: usize,
    degenerate_run: usize,
    max_pivots: usize,
}

impl Simplex {
    /// Builds a slack basis for `p`. `p` is assumed validated.
    pub fn new(p: &LpProblem) -> Self {
        let n = p.num_vars();
        let m = p.rows.len();
        let width = n + m;
        let mut lower = Vec::with_capacity(width);
        let mut upper = Vec::with_capacity(width);
        for &(l, u) in &p.bounds {
            lower.push(l);
            upper.push(u);
        }
        for r in &p.rows {
            lower.push(r.lower);
            upper.push(r.upper);
        }
        let mut state = vec![VarState::Basic; width];
        let mut x = vec![0.0; width];
        for j in 0..n {
            let (s, v) = initial_state(p.objective[j], lower[j], upper[j]);
            state[j] = s;
            x[j] = v;
        }
        let mut tab = vec![vec![0.0; width]; m];
        let rows: Vec<Vec<(usize, f64)>> = p.rows.iter().map(|r| merge_coeffs(&r.coeffs)).collect();
        for (i, r) in rows.iter().enumerate() {
            for &(j, a) in r {
                tab[i][j] = -a;
            }
            tab[i][n + i] = 1.0;
            x[n + i] = r.iter().map(|&(j, a)| a * x[j]).sum();
        }
        let mut d = vec![0.0; width];
        d[..n].copy_from_slice(&p.objective);
        Self {
            n,
            cost: p.objective.clone(),
            rows,
            lower,
            upper,
            tab,
            basis: (n..n + m).collect(),
            state,
            x,
            d,
            since_reinvert: 0,
            pivots: 0,
            degenerate_run: 0,
            max_pivots: 50 * (n + m) + 5000,
        }
    }

    pub fn num_vars(&self) -> usize {
        self.n
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn pivots(&self) -> usize {
        self.pivots
    }

    pub fn values(&self) -> &[f64] {
        &self.x[..self.n]
    }

    pub fn objective(&self) -> f64 {
        self.cost.iter().zip(&self.x).map(|(c, v)| c * v).sum()
    }

    pub fn var_bounds(&self, j: usize) -> (f64, f64) {
        (self.lower[j], self.upper[j])
    }

    /// Whether row `i`'s logical is basic, i.e. the row can be dropped without
    /// disturbing the rest of the basis.
    pub fn row_is_slack(&self, i: usize) -> bool {
        self.state[self.n + i] == VarState::Basic
    }

    /// Appends a row. Its logical enters the basis, so the current basis stays
    /// dual feasible and `solve` continues with dual simplex pivots.
    pub fn add_row(&mut self, row: &LpRow) -> usize {
        let coeffs = merge_coeffs(&row.coeffs);
        let width = self.x.len();
        let mut new_row = vec![0.0; width + 1];
        for &(j, a) in &coeffs {
            if self.state[j] != VarState::Basic {
                new_row[j] -= a;
            }
        }
        // Eliminate basic structurals through their tableau rows.
        for (k, &b) in self.basis.iter().enumerate() {
            if b >= self.n {
                continue;
            }
            let a = coeffs
                .iter()
                .find(|&&(j, _)| j == b)
                .map_or(0.0, |&(_, a)| a);
            if a == 0.0 {
                continue;
            }
            for (t, &v) in new_row.iter_mut().zip(&self.tab[k]) {
                *t += a * v;
            }
        }
        for b in &self.basis {
            new_row[*b] = 0.0;
        }
        new_row[width] = 1.0;
        for r in &mut self.tab {
            r.push(0.0);
        }
        self.tab.push(new_row);
        let activity: f64 = coeffs.iter().map(|&(j, a)| a * self.x[j]).sum();
        self.rows.push(coeffs);
        self.lower.push(row.lower);
        self.upper.push(row.upper);
        self.state.push(VarState::Basic);
        self.x.push(activity);
        self.d.push(0.0);
        self.basis.push(width);
        self.rows.len() - 1
    }

    /// Drops row `i`, whose logical must be basic. Rows after `i` shift down.
    pub fn remove_row(&mut self, i: usize) {
        let var = self.n + i;
        assert!(self.state[var] == VarState::Basic, "row {i} is binding");
        let pos = self
            .basis
            .iter()
            .position(|&b| b == var)
            .expect("basic logical in basis");
        self.tab.remove(pos);
        self.basis.remove(pos);
        for r in &mut self.tab {
            r.remove(var);
        }
        for b in &mut self.basis {
            if *b > var {
                *b -= 1;
            }
        }
        self.rows.remove(i);
        self.lower.remove(var);
        self.upper.remove(var);
        self.state.remove(var);
        self.x.remove(var);
        self.d.remove(var);
    }

    /// Changes the bounds of variable `j` (structural index).
    pub fn set_var_bounds(&mut self, j: usize, lower: f64, upper: f64) {
        self.set_bounds_internal(j, lower, upper);
    }

    pub fn set_row_bounds(&mut self, i: usize, lower: f64, upper: f64) {
        self.set_bounds_internal(self.n + i, lower, upper);
    }

    fn set_bounds_internal(&mut self, j: usize, lower: f64, upper: f64) {
        self.lower[j] = lower;
        self.upper[j] = upper;
        if self.state[j] == VarState::Basic {
            return;
        }
        let (s, v) = nonbasic_position(self.d[j], lower, upper);
        self.state[j] = s;
        let delta = v - self.x[j];
        if delta != 0.0 {
            self.shift_nonbasic(j, delta);
        }
    }

    /// Moves nonbasic `j` by `delta`, keeping the basics consistent.
    fn shift_nonbasic(&mut self, j: usize, delta: f64) {
        self.x[j] += delta;
        for (k, &b) in self.basis.iter().enumerate() {
            let a = self.tab[k][j];
            if a != 0.0 {
                self.x[b] -= a * delta;
            }
        }
    }

    /// Parks a variable that just left the basis exactly on `val`.
    fn snap_nonbasic(&mut self, j: usize, s: VarState, val: f64) {
        self.state[j] = s;
        let eps = val - self.x[j];
        if eps != 0.0 {
            self.shift_nonbasic(j, eps);
        }
    }

    fn infeasibility(&self, j: usize) -> f64 {
        (self.lower[j] - self.x[j])
            .max(self.x[j] - self.upper[j])
            .max(0.0)
    }

    fn primal_feasible(&self) -> bool {
        self.basis
            .iter()
            .all(|&b| self.infeasibility(b) <= PRIMAL_TOL)
    }

    fn dual_infeasibility(&self, j: usize) -> f64 {
        let d = self.d[j];
        match self.state[j] {
            VarState::Basic => 0.0,
            _ if self.lower[j] == self.upper[j] => 0.0,
            VarState::AtLower => (-d).max(0.0),
            VarState::AtUpper => d.max(0.0),
            VarState::Free => d.abs(),
        }
    }

    /// Flips boxed nonbasics onto the bound their reduced cost prefers.
    /// Returns whether the basis is now dual feasible.
    fn repair_dual_by_flips(&mut self) -> bool {
        let mut ok = true;
        for j in 0..self.x.len() {
            if self.dual_infeasibility(j) <= DUAL_TOL {
                continue;
            }
            let (l, u) = (self.lower[j], self.upper[j]);
            let target = match self.state[j] {
                VarState::AtLower if u.is_finite() => Some((VarState::AtUpper, u)),
                VarState::AtUpper if l.is_finite() => Some((VarState::AtLower, l)),
                _ => None,
            };
            match target {
                Some((s, v)) => {
                    self.state[j] = s;
                    let delta = v - self.x[j];
                    self.shift_nonbasic(j, delta);
                }
                None => ok = false,
            }
        }
        ok
    }

    pub fn solve(&mut self) -> Result<Status, LpError> {
        let mut reinverted_for_check = false;
        loop {
            if !self.primal_feasible() {
                let status = if self.repair_dual_by_flips() {
                    self.dual_simplex()?
                } else {
                    self.phase_one()?
                };
                if status == Status::Infeasible {
                    if reinverted_for_check {
                        return Ok(Status::Infeasible);
                    }
                    // Confirm against a fresh factorization before declaring.
                    self.reinvert()?;
                    reinverted_for_check = true;
                    continue;
                }
            }
            match self.primal_simplex()? {
                Status::Unbounded => return Ok(Status::Unbounded),
                Status::Infeasible => continue,
                Status::Optimal => {}
            }
            if self.primal_residual() <= 1e-9 * (1.0 + self.max_abs_value())
                && self.primal_feasible()
            {
                return Ok(Status::Optimal);
            }
            if reinverted_for_check {
                return Ok(Status::Optimal);
            }
            self.reinvert()?;
            reinverted_for_check = true;
        }
    }

    fn max_abs_value(&self) -> f64 {
        self.x.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest `|sum(a_ij x_j) - s_i|` over rows.
    pub fn primal_residual(&self) -> f64 {
        self.rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let act: f64 = r.iter().map(|&(j, a)| a * self.x[j]).sum();
                (act - self.x[self.n + i]).abs()
            })
            .fold(0.0, f64::max)
    }

    fn choose_entering_primal(&self, phase_one: Option<&[f64]>) -> Option<(usize, f64)> {
        let bland = self.degenerate_run > BLAND_AFTER;
        let mut best: Option<(usize, f64, f64)> = None;
        for j in 0..self.x.len() {
            if self.state[j] == VarState::Basic || self.lower[j] == self.upper[j] {
                continue;
            }
            let dj = match phase_one {
                Some(p) => p[j],
                None => self.d[j],
            };
            let dir = match self.state[j] {
                VarState::AtLower if dj < -DUAL_TOL => 1.0,
                VarState::AtUpper if dj > DUAL_TOL => -1.0,
                VarState::Free if dj.abs() > DUAL_TOL => -dj.signum(),
                _ => continue,
            };
            let score = dj.abs();
            if bland {
                return Some((j, dir));
            }
            if best.is_none_or(|(_, _, s)| score > s) {
                best = Some((j, dir, score));
            }
        }
        best.map(|(j, dir, _)| (j, dir))
    }

    /// Harris two-pass ratio test for moving nonbasic `j` in direction `dir`.
    /// Returns `(row, step)`; `row == None` means the entering bound flips.
    /// In phase 1 infeasible basics may pass through their violated bound.
    fn ratio_test(&self, j: usize, dir: f64, phase_one: bool) -> Option<(Option<usize>, f64)> {
        let bland = self.degenerate_run > BLAND_AFTER;
        let own = self.upper[j] - self.lower[j];
        let limit = |k: usize, slack_tol: f64| -> Option<f64> {
            let alpha = self.tab[k][j];
            if alpha.abs() < PIVOT_TOL {
                return None;
            }
            let rate = -dir * alpha;
            let b = self.basis[k];
            let (v, l, u) = (self.x[b], self.lower[b], self.upper[b]);
            let bound = if rate < 0.0 {
                if phase_one && v < l - PRIMAL_TOL {
                    return None;
                }
                if phase_one && v > u + PRIMAL_TOL {
                    u
                } else {
                    l
                }
            } else if phase_one && v > u + PRIMAL_TOL {
                return None;
            } else if phase_one && v < l - PRIMAL_TOL {
                l
            } else {
                u
            };
            if !bound.is_finite() {
                return None;
            }
            Some(((bound - v) / rate + slack_tol / rate.abs()).max(0.0))
        };
        let mut t_max = f64::INFINITY;
        for k in 0..self.basis.len() {
            if let Some(t) = limit(k, HARRIS_TOL) {
                t_max = t_max.min(t);
            }
        }
        if own.is_finite() && own <= t_max {
            return Some((None, own));
        }
        if !t_max.is_finite() {
            return None;
        }
        let mut best: Option<(usize, f64, f64)> = None;
        for k in 0..self.basis.len() {
            let Some(t) = limit(k, 0.0) else { continue };
            if t > t_max {
                continue;
            }
            let alpha = self.tab[k][j].abs();
            let better = match best {
                None => true,
                Some((bk, _, ba)) => {
                    if bland {
                        self.basis[k] < self.basis[bk]
                    } else {
                        alpha > ba
                    }
                }
            };
            if better {
                best = Some((k, t, alpha));
            }
        }
        best.map(|(k, t, _)| (Some(k), t))
    }

    fn primal_simplex(&mut self) -> Result<Status, LpError> {
        loop {
            self.maybe_reinvert()?;
            let Some((j, dir)) = self.choose_entering_primal(None) else {
                return Ok(Status::Optimal);
            };
            let Some((row, t)) = self.ratio_test(j, dir, false) else {
                return Ok(Status::Unbounded);
            };
            self.take_step(j, dir, row, t)?;
            if !self.primal_feasible() {
                // Harris tolerance drift; let the caller restore feasibility.
                return Ok(Status::Infeasible);
            }
        }
    }

    fn take_step(&mut self, j: usize, dir: f64, row: Option<usize>, t: f64) -> Result<(), LpError> {
        if t <= 1e-12 {
            self.degenerate_run += 1;
        } else {
            self.degenerate_run = 0;
        }
        self.shift_nonbasic(j, dir * t);
        match row {
            None => {
                self.state[j] = if dir > 0.0 {
                    VarState::AtUpper
                } else {
                    VarState::AtLower
                };
                self.x[j] = if dir > 0.0 {
                    self.upper[j]
                } else {
                    self.lower[j]
                };
                self.pivots += 1;
                self.check_budget()
            }
            Some(k) => {
                let b = self.basis[k];
                let rate = -dir * self.tab[k][j];
                let (l, u) = (self.lower[b], self.upper[b]);
                let v = self.x[b];
                let (s, val) =
                    if l.is_finite() && (!u.is_finite() || (v - l).abs() <= (v - u).abs()) {
                        (VarState::AtLower, l)
                    } else if u.is_finite() {
                        (VarState::AtUpper, u)
                    } else {
                        (
                            if rate < 0.0 {
                                VarState::AtLower
                            } else {
                                VarState::AtUpper
                            },
                            v,
                        )
                    };
                self.pivot(k, j)?;
                self.snap_nonbasic(b, s, val);
                Ok(())
            }
        }
    }

    /// Composite phase 1: minimize the sum of bound violations of the basics.
    fn phase_one(&mut self) -> Result<Status, LpError> {
        loop {
            self.maybe_reinvert()?;
            if self.primal_feasible() {
                return Ok(Status::Optimal);
            }
            // Phase-1 reduced costs: gradient of sum of infeasibilities.
            let width = self.x.len();
            let mut w = vec![0.0; width];
            for (k, &b) in self.basis.iter().enumerate() {
                let sign = if self.x[b] < self.lower[b] - PRIMAL_TOL {
                    -1.0
                } else if self.x[b] > self.upper[b] + PRIMAL_TOL {
                    1.0
                } else {
                    continue;
                };
                // d(x_b)/d(x_j) = -tab[k][j]
                for (wj, &a) in w.iter_mut().zip(&self.tab[k]) {
                    *wj -= sign * a;
                }
            }
            for &b in &self.basis {
                w[b] = 0.0;
            }
            let Some((j, dir)) = self.choose_entering_primal(Some(&w)) else {
                return Ok(Status::Infeasible);
            };
            match self.ratio_test(j, dir, true) {
                Some((row, t)) => self.take_step(j, dir, row, t)?,
                None => {
                    // No blocking bound: step until the first violated basic becomes feasible.
                    let mut t_best = f64::INFINITY;
                    let mut row = None;
                    for k in 0..self.basis.len() {
                        let alpha = self.tab[k][j];
                        if alpha.abs() < PIVOT_TOL {
                            continue;
                        }
                        let rate = -dir * alpha;
                        let b = self.basis[k];
                        let target = if self.x[b] < self.lower[b] - PRIMAL_TOL && rate > 0.0 {
                            self.lower[b]
                        } else if self.x[b] > self.upper[b] + PRIMAL_TOL && rate < 0.0 {
                            self.upper[b]
                        } else {
                            continue;
                        };
                        let t = (target - self.x[b]) / rate;
                        if t < t_best {
                            t_best = t;
                            row = Some(k);
                        }
                    }
                    if row.is_none() {
                        return Ok(Status::Infeasible);
                    }
                    self.take_step(j, dir, row, t_best)?;
                }
            }
        }
    }

    /// Dual simplex from a dual feasible basis.
    fn dual_simplex(&mut self) -> Result<Status, LpError> {
        loop {
            self.maybe_reinvert()?;
            let bland = self.degenerate_run > BLAND_AFTER;
            let mut leave: Option<(usize, f64)> = None;
            for (k, &b) in self.basis.iter().enumerate() {
                let v = self.infeasibility(b);
                if v <= PRIMAL_TOL {
                    continue;
                }
                let better = match leave {
                    None => true,
                    Some((bk, bv)) => {
                        if bland {
                            b < self.basis[bk]
                        } else {
                            v > bv
                        }
                    }
                };
                if better {
                    leave = Some((k, v));
                }
            }
            let Some((r, _)) = leave else {
                return Ok(Status::Optimal);
            };
            let b = self.basis[r];
            let increase = self.x[b] < self.lower[b];
            let target = if increase {
                self.lower[b]
            } else {
                self.upper[b]
            };
            // x_b = const - sum_j alpha_j x_j over nonbasics.
            let eligible = |j: usize, alpha: f64| -> bool {
                if alpha.abs() < PIVOT_TOL || self.lower[j] == self.upper[j] {
                    return false;
                }
                // Entering moves with sign s_j; x_b changes by -alpha * s_j.
                let want = if increase {
                    -alpha.signum()
                } else {
                    alpha.signum()
                };
                match self.state[j] {
                    VarState::Basic => false,
                    VarState::AtLower => want > 0.0,
                    VarState::AtUpper => want < 0.0,
                    VarState::Free => true,
                }
            };
            let mut t_max = f64::INFINITY;
            for j in 0..self.x.len() {
                let alpha = self.tab[r][j];
                if eligible(j, alpha) {
                    let dj = self.d[j].abs();
                    t_max = t_max.min((dj + DUAL_TOL) / alpha.abs());
                }
            }
            if !t_max.is_finite() {
                return Ok(Status::Infeasible);
            }
            let mut best: Option<(usize, f64)> = None;
            for j in 0..self.x.len() {
                let alpha = self.tab[r][j];
                if !eligible(j, alpha) || self.d[j].abs() / alpha.abs() > t_max {
                    continue;
                }
                let better = match best {
                    None => true,
                    Some((bj, ba)) => {
                        if bland {
                            j < bj
                        } else {
                            alpha.abs() > ba
                        }
                    }
                };
                if better {
                    best = Some((j, alpha.abs()));
                }
            }
            let (j, _) = best.expect("t_max finite implies a candidate");
            let alpha = self.tab[r][j];
            let delta = (self.x[b] - target) / alpha;
            if (self.d[j] / alpha).abs() <= 1e-12 {
                self.degenerate_run += 1;
            } else {
                self.degenerate_run = 0;
            }
            self.shift_nonbasic(j, delta);
            self.pivot(r, j)?;
            let s = if increase {
                VarState::AtLower
            } else {
                VarState::AtUpper
            };
            self.snap_nonbasic(b, s, target);
            // Keep dual feasibility exact against tiny Harris overshoots.
            for q in 0..self.x.len() {
                if self.state[q] == VarState::AtLower && self.d[q] < 0.0 && self.d[q] > -DUAL_TOL {
                    self.d[q] = 0.0;
                } else if self.state[q] == VarState::AtUpper
                    && self.d[q] > 0.0
                    && self.d[q] < DUAL_TOL
                {
                    self.d[q] = 0.0;
                }
            }
        }
    }

    fn check_budget(&self) -> Result<(), LpError> {
        if self.pivots > self.max_pivots {
            Err(LpError::IterationLimit(self.max_pivots))
        } else {
            Ok(())
        }
    }

    /// Basis exchange: nonbasic `j` replaces the basic of row `r`. Values are
    /// the caller's responsibility.
    fn pivot(&mut self, r: usize, j: usize) -> Result<(), LpError> {
        let piv = self.tab[r][j];
        if piv.abs() < PIVOT_TOL * 1e-3 {
            let (min_pivot, max_pivot) = self.pivot_range(r);
            return Err(LpError::NumericalBreakdown {
                pivot: piv,
                min_pivot,
                max_pivot,
            });
        }
        let inv = 1.0 / piv;
        let pivot_row: Vec<f64> = self.tab[r].iter().map(|v| v * inv).collect();
        for (k, row) in self.tab.iter_mut().enumerate() {
            if k == r {
                continue;
            }
            let f = row[j];
            if f == 0.0 {
                continue;
            }
            for (v, &p) in row.iter_mut().zip(&pivot_row) {
                *v -= f * p;
            }
            row[j] = 0.0;
        }
        let dj = self.d[j];
        if dj != 0.0 {
            for (v, &p) in self.d.iter_mut().zip(&pivot_row) {
                *v -= dj * p;
            }
        }
        self.d[j] = 0.0;
        self.tab[r] = pivot_row;
        self.tab[r][j] = 1.0;
        self.basis[r] = j;
        self.state[j] = VarState::Basic;
        self.pivots += 1;
        self.since_reinvert += 1;
        self.check_budget()
    }

    fn pivot_range(&self, r: usize) -> (f64, f64) {
        let row = &self.tab[r];
        let mut lo = f64::INFINITY;
        let mut hi: f64 = 0.0;
        for &v in row {
            if v != 0.0 {
                lo = lo.min(v.abs());
                hi = hi.max(v.abs());
            }
        }
        (lo, hi)
    }

    fn maybe_reinvert(&mut self) -> Result<(), LpError> {
        if self.since_reinvert >= REINVERT_EVERY {
            self.reinvert()?;
        }
        Ok(())
    }

    /// Recomputes tableau, basic values and reduced costs from the original
    /// data and the current basis.
    pub fn reinvert(&mut self) -> Result<(), LpError> {
        let m = self.rows.len();
        let n = self.n;
        let width = n + m;
        self.since_reinvert = 0;
        if m == 0 {
            for j in 0..n {
                self.d[j] = self.cost[j];
            }
            return Ok(());
        }
        let mut a = DenseMatrix::zeros(m, n);
        for (i, r) in self.rows.iter().enumerate() {
            for &(j, v) in r {
                a[(i, j)] += v;
            }
        }
        let mut bmat = DenseMatrix::zeros(m, m);
        for (k, &var) in self.basis.iter().enumerate() {
            if var < n {
                for i in 0..m {
                    bmat[(i, k)] = a[(i, var)];
                }
            } else {
                bmat[(var - n, k)] = -1.0;
            }
        }
        let mut repairs = 0;
        let lu = loop {
            match LuFactors::factorize(&bmat, 1e-12) {
                Ok(lu) => break lu,
                Err(e) if repairs < m => {
                    self.replace_dependent(&mut bmat, &e)?;
                    repairs += 1;
                }
                Err(e) => {
                    return Err(LpError::NumericalBreakdown {
                        pivot: e.pivot,
                        min_pivot: e.pivot,
                        max_pivot: 1.0,
                    })
                }
            }
        };
        let binv = lu.inverse();
        for i in 0..m {
            let row = &mut self.tab[i];
            for j in 0..n {
                let mut s = 0.0;
                for k in 0..m {
                    let b = binv[(i, k)];
                    if b != 0.0 {
                        s += b * a[(k, j)];
                    }
                }
                row[j] = s;
            }
            for k in 0..m {
                row[n + k] = -binv[(i, k)];
            }
        }
        for (k, &b) in self.basis.iter().enumerate() {
            for (i, row) in self.tab.iter_mut().enumerate() {
                row[b] = if i == k { 1.0 } else { 0.0 };
            }
        }
        // Basic values from nonbasic values.
        let mut xb = vec![0.0; m];
        for j in 0..width {
            if self.state[j] == VarState::Basic {
                continue;
            }
            let v = self.x[j];
            if v == 0.0 {
                continue;
            }
            for (k, row) in self.tab.iter().enumerate() {
                xb[k] -= row[j] * v;
            }
        }
        for (k, &b) in self.basis.iter().enumerate() {
            self.x[b] = xb[k];
        }
        // Reduced costs.
        let cost_of = |v: usize| if v < n { self.cost[v] } else { 0.0 };
        let cb: Vec<f64> = self.basis.iter().map(|&b| cost_of(b)).collect();
        for j in 0..width {
            if self.state[j] == VarState::Basic {
                self.d[j] = 0.0;
                continue;
            }
            let mut s = cost_of(j);
            for (k, row) in self.tab.iter().enumerate() {
                s -= cb[k] * row[j];
            }
            self.d[j] = s;
        }
        Ok(())
    }

    /// Basis repair after a failed factorization: the dependent column is
    /// swapped for the logical of a row no pivot reached. Drift in the
    /// tableau can let a near-zero pivot through; the swapped-out variable
    /// goes to its nearest bound and the caller's phase logic restores
    /// feasibility.
    fn replace_dependent(
        &mut self,
        bmat: &mut DenseMatrix,
        e: &SingularMatrix,
    ) -> Result<(), LpError> {
        let n = self.n;
        let breakdown = LpError::NumericalBreakdown {
            pivot: e.pivot,
            min_pivot: e.pivot,
            max_pivot: 1.0,
        };
        let Some(&i) = e
            .unpivoted_rows
            .iter()
            .find(|&&i| !self.basis.contains(&(n + i)))
        else {
            return Err(breakdown);
        };
        let k = e.column;
        let old = self.basis[k];
        let (l, u, v) = (self.lower[old], self.upper[old], self.x[old]);
        let (state, val) = if l.is_finite() && (!u.is_finite() || (v - l).abs() <= (u - v).abs()) {
            (VarState::AtLower, l)
        } else if u.is_finite() {
            (VarState::AtUpper, u)
        } else {
            (VarState::Free, 0.0)
        };
        self.state[old] = state;
        self.x[old] = val;
        self.basis[k] = n + i;
        self.state[n + i] = VarState::Basic;
        for r in 0..bmat.rows() {
            bmat[(r, k)] = if r == i { -1.0 } else { 0.0 };
        }
        Ok(())
    }

    /// Row multipliers `y` with `c - Aᵀy` the structural reduced costs.
    pub fn duals(&self) -> Vec<f64> {
        (0..self.rows.len()).map(|i| self.d[self.n + i]).collect()
    }

    pub fn solution(&self) -> LpSolution {
        let n = self.n;
        let y = self.duals();
        // Reduced costs recomputed from y so the certificate is independent
        // of the tableau's accumulated state.
        let mut red = self.cost.clone();
        for (i, r) in self.rows.iter().enumerate() {
            for &(j, a) in r {
                red[j] -= y[i] * a;
            }
        }
        let mut dual_residual: f64 = 0.0;
        let mut dual_obj = 0.0;
        let scale = 1.0 + self.cost.iter().fold(0.0_f64, |m, c| m.max(c.abs()));
        let mut account = |dj: f64, l: f64, u: f64, v: f64| {
            let bound = if dj > 0.0 {
                l
            } else if dj < 0.0 {
                u
            } else {
                v
            };
            if bound.is_finite() {
                dual_obj += dj * bound;
            } else {
                dual_residual = dual_residual.max(dj.abs());
                dual_obj += dj * v;
            }
        };
        for j in 0..n {
            account(red[j], self.lower[j], self.upper[j], self.x[j]);
        }
        for i in 0..self.rows.len() {
            let v = n + i;
            // Logical column is -e_i, so its reduced cost is +y_i.
            account(y[i], self.lower[v], self.upper[v], self.x[v]);
        }
        let objective = self.objective();
        let bounds_violation = (0..self.x.len())
            .map(|j| self.infeasibility(j))
            .fold(0.0, f64::max);
        LpSolution {
            x: self.x[..n].to_vec(),
            objective,
            duals: y,
            reduced_costs: red,
            primal_residual: self.primal_residual().max(bounds_violation),
            dual_residual: dual_residual / scale,
            duality_gap: objective - dual_obj,
            pivots: self.pivots,
        }
    }
}

fn merge_coeffs(coeffs: &[(usize, f64)]) -> Vec<(usize, f64)> {
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(coeffs.len());
    for &(j, a) in coeffs {
        match out.iter_mut().find(|(k, _)| *k == j) {
            Some(e) => e.1 += a,
            None => out.push((j, a)),
        }
    }
    out.retain(|&(_, a)| a != 0.0);
    out
}

fn initial_state(cost: f64, l: f64, u: f64) -> (VarState, f64) {
    nonbasic_position(cost, l, u)
}

fn nonbasic_position(d: f64, l: f64, u: f64) -> (VarState, f64) {
    match (l.is_finite(), u.is_finite()) {
        (true, true) => {
            if d < 0.0 {
                (VarState::AtUpper, u)
            } else {
                (VarState::AtLower, l)
            }
        }
        (true, false) => (VarState::AtLower, l),
        (false, true) => (VarState::AtUpper, u),
        (false, false) => (VarState::Free, 0.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> LpProblem {
        // min -x - y, x + 2y <= 4, 3x + y <= 6, x, y >= 0 -> (1.6, 1.2)
        let mut p = LpProblem::new();
        let x = p.add_var(-1.0, 0.0, f64::INFINITY);
        let y = p.add_var(-1.0, 0.0, f64::INFINITY);
        p.add_le(vec![(x, 1.0), (y, 2.0)], 4.0);
        p.add_le(vec![(x, 3.0), (y, 1.0)], 6.0);
        p
    }

    #[test]
    fn warm_start_after_cut() {
        let p = small();
        let mut s = Simplex::new(&p);
        assert_eq!(s.solve().unwrap(), Status::Optimal);
        assert!((s.objective() + 2.8).abs() < 1e-12);
        s.add_row(&LpRow::le(vec![(0, 1.0), (1, 1.0)], 2.0));
        assert_eq!(s.solve().unwrap(), Status::Optimal);
        assert!((s.objective() + 2.0).abs() < 1e-12);
        assert!(s.primal_residual() < 1e-12);
    }

    #[test]
    fn bound_change_then_resolve() {
        let p = small();
        let mut s = Simplex::new(&p);
        s.solve().unwrap();
        s.set_var_bounds(0, 0.0, 0.5);
        assert_eq!(s.solve().unwrap(), Status::Optimal);
        // x = 0.5, y = 1.75
        assert!((s.values()[0] - 0.5).abs() < 1e-12);
        assert!((s.values()[1] - 1.75).abs() < 1e-12);
    }

    #[test]
    fn remove_slack_row_restores_original() {
        let p = small();
        let mut s = Simplex::new(&p);
        s.solve().unwrap();
        let r = s.add_row(&LpRow::le(vec![(0, 1.0)], 100.0));
        s.solve().unwrap();
        assert!(s.row_is_slack(r));
        s.remove_row(r);
        assert_eq!(s.solve().unwrap(), Status::Optimal);
        assert!((s.objective() + 2.8).abs() < 1e-12);
    }

    #[test]
    fn reinvert_preserves_solution() {
        let p = small();
        let mut s = Simplex::new(&p);
        s.solve().unwrap();
        let before = s.values().to_vec();
        s.reinvert().unwrap();
        for (a, b) in before.iter().zip(s.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
