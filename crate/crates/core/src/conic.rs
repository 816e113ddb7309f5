//! Second-order cone form of the pump-free flow problem, written as plain
//! text for external conic solvers.
//!
//! Format, one statement per line, `#` starts a comment:
//!
//! ```text
//! VAR name
//! EQ   c1 v1 c2 v2 ... = rhs
//! INEQ c1 v1 c2 v2 ... <= rhs
//! RCONE a b c          # b^2 <= a*c, a >= 0; each term a name or a number
//! OBJ  c1 v1 ...       # minimized
//! BIN  name            # mixed-integer extension
//! QCUT q v ; c1 v1 ... <= rhs   # q*v^2 + sum <= rhs, q >= 0
//! ```

use std::fmt::Write as _;

use crate::error::{Result, WdsError};
use crate::network::{EdgeKind, Network};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Term {
    Var(usize),
    Const(f64),
}

impl Term {
    fn eval(&self, x: &[f64]) -> f64 {
        match *self {
            Term::Var(j) => x[j],
            Term::Const(v) => v,
        }
    }
}

/// Convex quadratic row `q·x[var]² + Σ lin ≤ rhs`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadRow {
    pub var: usize,
    pub q: f64,
    pub lin: Vec<(usize, f64)>,
    pub rhs: f64,
}

impl QuadRow {
    pub fn violation(&self, x: &[f64]) -> f64 {
        let v = x[self.var];
        self.q * v * v + self.lin.iter().map(|&(j, a)| a * x[j]).sum::<f64>() - self.rhs
    }

    /// Supporting hyperplane at `x[var] = at`, as `(coeffs, rhs)` of a `≤` row.
    pub fn tangent(&self, at: f64) -> (Vec<(usize, f64)>, f64) {
        let mut coeffs = self.lin.clone();
        match coeffs.iter_mut().find(|(j, _)| *j == self.var) {
            Some((_, a)) => *a += 2.0 * self.q * at,
            None => coeffs.push((self.var, 2.0 * self.q * at)),
        }
        (coeffs, self.rhs + self.q * at * at)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConicModel {
    pub vars: Vec<String>,
    pub equalities: Vec<(Vec<(usize, f64)>, f64)>,
    /// `Σ ≤ rhs`
    pub inequalities: Vec<(Vec<(usize, f64)>, f64)>,
    pub rcones: Vec<[Term; 3]>,
    pub objective: Vec<(usize, f64)>,
    pub binaries: Vec<usize>,
    pub quads: Vec<QuadRow>,
}

fn lin_text(model: &ConicModel, coeffs: &[(usize, f64)]) -> String {
    coeffs
        .iter()
        .map(|&(j, a)| format!("{a:e} {}", model.vars[j]))
        .collect::<Vec<_>>()
        .join(" ")
}

impl ConicModel {
    pub fn add_var(&mut self, name: impl Into<String>) -> usize {
        self.vars.push(name.into());
        self.vars.len() - 1
    }

    pub fn to_text(&self) -> String {
        let term = |t: &Term| match *t {
            Term::Var(j) => self.vars[j].clone(),
            Term::Const(v) => format!("{v:e}"),
        };
        let mut s = String::from("# wdsflow conic model v1\n");
        for v in &self.vars {
            writeln!(s, "VAR {v}").unwrap();
        }
        for (c, rhs) in &self.equalities {
            writeln!(s, "EQ {} = {rhs:e}", lin_text(self, c)).unwrap();
        }
        for (c, rhs) in &self.inequalities {
            writeln!(s, "INEQ {} <= {rhs:e}", lin_text(self, c)).unwrap();
        }
        for [a, b, c] in &self.rcones {
            writeln!(s, "RCONE {} {} {}", term(a), term(b), term(c)).unwrap();
        }
        writeln!(s, "OBJ {}", lin_text(self, &self.objective)).unwrap();
        for &j in &self.binaries {
            writeln!(s, "BIN {}", self.vars[j]).unwrap();
        }
        for q in &self.quads {
            writeln!(
                s,
                "QCUT {:e} {} ; {} <= {:e}",
                q.q,
                self.vars[q.var],
                lin_text(self, &q.lin),
                q.rhs
            )
            .unwrap();
        }
        s
    }

    /// Largest violation of any constraint at `x` (binaries not checked).
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let dot = |c: &[(usize, f64)]| c.iter().map(|&(j, a)| a * x[j]).sum::<f64>();
        let mut v: f64 = 0.0;
        for (c, rhs) in &self.equalities {
            v = v.max((dot(c) - rhs).abs());
        }
        for (c, rhs) in &self.inequalities {
            v = v.max(dot(c) - rhs);
        }
        for [a, b, c] in &self.rcones {
            let (a, b, c) = (a.eval(x), b.eval(x), c.eval(x));
            v = v.max(b * b - a * c).max(-a);
        }
        for q in &self.quads {
            v = v.max(q.violation(x));
        }
        v
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().map(|&(j, a)| a * x[j]).sum()
    }
}

/// Variable layout of [`export_socp`]: per pipe `f, w, y, t` in that order.
pub fn socp_var(pipe: usize, which: usize) -> usize {
    4 * pipe + which
}

/// Cone program whose `f` part minimizes `Σ c_p|f_p|³/3` subject to
/// `Aᵀf = d`. The reference node's balance row is dropped as redundant.
pub fn export_socp(net: &Network, d: &[f64]) -> Result<ConicModel> {
    net.check_len("injections", d.len(), net.num_nodes())?;
    let mut m = ConicModel::default();
    let mut cs = Vec::with_capacity(net.num_edges());
    for e in net.edges() {
        match e.kind {
            EdgeKind::Pipe { c, rho } if rho == 2.0 => cs.push(c),
            EdgeKind::Pipe { rho, .. } => {
                return Err(WdsError::Unsupported(format!(
                    "cone export needs exponent 2, pipe '{}' has {rho}",
                    e.id
                )))
            }
            EdgeKind::Pump(_) => {
                return Err(WdsError::Unsupported(format!(
                    "pump '{}' present; cone export is pump free",
                    e.id
                )))
            }
        }
        for prefix in ["f", "w", "y", "t"] {
            m.add_var(format!("{prefix}[{}]", e.id));
        }
    }
    for v in 0..net.num_nodes() {
        if v == net.reference() {
            continue;
        }
        let row: Vec<(usize, f64)> = net
            .incident(v)
            .iter()
            .map(|i| {
                (
                    socp_var(i.edge, 0),
                    if net.edge(i.edge).tail == v {
                        1.0
                    } else {
                        -1.0
                    },
                )
            })
            .collect();
        m.equalities.push((row, d[v]));
    }
    for (p, &c) in cs.iter().enumerate() {
        let [f, w, y, t] = [0, 1, 2, 3].map(|k| socp_var(p, k));
        m.inequalities.push((vec![(f, 1.0), (w, -1.0)], 0.0));
        m.inequalities.push((vec![(f, -1.0), (w, -1.0)], 0.0));
        m.rcones
            .push([Term::Var(y), Term::Var(w), Term::Const(1.0)]);
        m.rcones.push([Term::Var(w), Term::Var(y), Term::Var(t)]);
        m.objective.push((t, c / 3.0));
    }
    Ok(m)
}
