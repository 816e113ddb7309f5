//! Linear programs in row-bounded form and the one-shot `solve_lp` entry point.

use thiserror::Error;

use crate::simplex::Simplex;

/// A linear row `lower <= sum(coeff * x[var]) <= upper`.
///
/// Equality rows have `lower == upper`; one-sided rows use an infinite bound.
#[derive(Clone, Debug, PartialEq)]
pub struct LpRow {
    pub coeffs: Vec<(usize, f64)>,
    pub lower: f64,
    pub upper: f64,
}

impl LpRow {
    pub fn eq(coeffs: Vec<(usize, f64)>, rhs: f64) -> Self {
        Self {
            coeffs,
            lower: rhs,
            upper: rhs,
        }
    }

    pub fn le(coeffs: Vec<(usize, f64)>, rhs: f64) -> Self {
        Self {
            coeffs,
            lower: f64::NEG_INFINITY,
            upper: rhs,
        }
    }

    pub fn ge(coeffs: Vec<(usize, f64)>, rhs: f64) -> Self {
        Self {
            coeffs,
            lower: rhs,
            upper: f64::INFINITY,
        }
    }

    pub fn is_equality(&self) -> bool {
        self.lower == self.upper
    }

    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, a)| a * x[j]).sum()
    }

    /// Amount by which `x` violates this row (0 when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let a = self.activity(x);
        (self.lower - a).max(a - self.upper).max(0.0)
    }
}

/// `min objective·x` subject to `rows` and per-variable `bounds`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LpProblem {
    pub objective: Vec<f64>,
    pub bounds: Vec<(f64, f64)>,
    pub rows: Vec<LpRow>,
}

impl LpProblem {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a variable and returns its index.
    pub fn add_var(&mut self, cost: f64, lower: f64, upper: f64) -> usize {
        self.objective.push(cost);
        self.bounds.push((lower, upper));
        self.objective.len() - 1
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_row(&mut self, row: LpRow) -> usize {
        self.rows.push(row);
        self.rows.len() - 1
    }

    pub fn add_eq(&mut self, coeffs: Vec<(usize, f64)>, rhs: f64) -> usize {
        self.add_row(LpRow::eq(coeffs, rhs))
    }

    pub fn add_le(&mut self, coeffs: Vec<(usize, f64)>, rhs: f64) -> usize {
        self.add_row(LpRow::le(coeffs, rhs))
    }

    pub fn add_ge(&mut self, coeffs: Vec<(usize, f64)>, rhs: f64) -> usize {
        self.add_row(LpRow::ge(coeffs, rhs))
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Largest row or bound violation of `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let rows = self.rows.iter().map(|r| r.violation(x)).fold(0.0, f64::max);
        let bounds = self
            .bounds
            .iter()
            .zip(x)
            .map(|(&(l, u), &v)| (l - v).max(v - u).max(0.0))
            .fold(0.0, f64::max);
        rows.max(bounds)
    }

    pub(crate) fn validate(&self) -> Result<(), LpError> {
        let n = self.num_vars();
        if self.bounds.len() != n {
            return Err(LpError::Malformed(format!(
                "{} bounds for {} variables",
                self.bounds.len(),
                n
            )));
        }
        for (j, (&c, &(l, u))) in self.objective.iter().zip(&self.bounds).enumerate() {
            if !c.is_finite() {
                return Err(LpError::Malformed(format!(
                    "non-finite cost on variable {j}"
                )));
            }
            if l.is_nan() || u.is_nan() || l > u || l == f64::INFINITY || u == f64::NEG_INFINITY {
                return Err(LpError::Malformed(format!(
                    "bad bounds [{l}, {u}] on variable {j}"
                )));
            }
        }
        for (i, row) in self.rows.iter().enumerate() {
            if row.lower.is_nan() || row.upper.is_nan() || row.lower > row.upper {
                return Err(LpError::Malformed(format!(
                    "bad row bounds [{}, {}] on row {i}",
                    row.lower, row.upper
                )));
            }
            for &(j, a) in &row.coeffs {
                if j >= n {
                    return Err(LpError::Malformed(format!(
                        "row {i} references variable {j}"
                    )));
                }
                if !a.is_finite() {
                    return Err(LpError::Malformed(format!(
                        "non-finite coefficient in row {i}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Optimal basic solution plus the certificates needed to check it.
#[derive(Clone, Debug)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// Row multipliers `y`, with reduced costs `c - Aᵀy`.
    pub duals: Vec<f64>,
    pub reduced_costs: Vec<f64>,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub duality_gap: f64,
    pub pivots: usize,
}

#[derive(Clone, Debug)]
pub enum LpOutcome {
    Optimal(LpSolution),
    Infeasible,
    Unbounded,
}

impl LpOutcome {
    pub fn optimal(self) -> Option<LpSolution> {
        match self {
            LpOutcome::Optimal(s) => Some(s),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum LpError {
    #[error("malformed LP: {0}")]
    Malformed(String),
    #[error(
        "numerical breakdown: degenerate pivot {pivot:e} (basis pivots in [{min_pivot:e}, {max_pivot:e}])"
    )]
    NumericalBreakdown {
        pivot: f64,
        min_pivot: f64,
        max_pivot: f64,
    },
    #[error("iteration limit of {0} pivots reached")]
    IterationLimit(usize),
}

/// Solves `p` from scratch with the bounded-variable simplex.
pub fn solve_lp(p: &LpProblem) -> Result<LpOutcome, LpError> {
    p.validate()?;
    let mut s = Simplex::new(p);
    Ok(match s.solve()? {
        crate::simplex::Status::Optimal => LpOutcome::Optimal(s.solution()),
        crate::simplex::Status::Infeasible => LpOutcome::Infeasible,
        crate::simplex::Status::Unbounded => LpOutcome::Unbounded,
    })
}
