//! Energy-function solvers for pump-free networks.
//!
//! The flow problem `min Σ c_p|f_p|^(ρ+1)/(ρ+1) s.t. Aᵀf = d` is attacked
//! from two sides: dual decomposition on its multipliers, and gradient descent
//! on the unconstrained pressure potential
//! `F(h) = Σ_p c_p^(-1/ρ) |a_pᵀh|^(1+1/ρ) / (1+1/ρ) − dᵀh`.
//! A damped Newton method over loop flows backs both up.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, WdsError};
use crate::graph::{analyze_cycles, tree_flows};
use crate::hydraulics::{flow_from_drop, head_drop, validated_solution};
use crate::network::{EdgeKind, Network, WfInput, WfSolution};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Acceleration {
    None,
    /// Heavy-ball (dual decomposition) or Nesterov (gradient) momentum with
    /// adaptive restart.
    Momentum(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    /// Dual decomposition step `μ`; the gradient solver uses it as its first trial step.
    pub step_size: f64,
    pub max_iters: usize,
    /// Mass residual target, scaled by `max(1, max|d|)`.
    pub tol_primal: f64,
    /// Gradient max-norm target, scaled by `max(1, max|d|)`.
    pub tol_grad: f64,
    pub acceleration: Acceleration,
    /// Multiply the dual step by `max c` when coefficients are far from unity.
    pub auto_scale: bool,
    /// Halve the dual step whenever the dual objective drops or the
    /// residual vector reverses direction.
    pub adaptive_step: bool,
    /// Gradient solver: divide each node's gradient by the summed edge
    /// conductances `df/dΔh` around it.
    pub diagonal_scaling: bool,
    /// Overrides every pipe's exponent.
    pub rho: Option<f64>,
    /// Starting multipliers (dual decomposition) or pressures (gradient).
    pub initial: Option<Vec<f64>>,
    /// Record the dual objective every this many iterations (0 = never).
    pub trace_every: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            step_size: 1e-4,
            max_iters: 20_000,
            tol_primal: 1e-8,
            tol_grad: 1e-9,
            acceleration: Acceleration::None,
            auto_scale: true,
            adaptive_step: false,
            diagonal_scaling: false,
            rho: None,
            initial: None,
            trace_every: 0,
        }
    }
}

/// Per-pipe `(c, rho)` after checking the network is pump free.
fn pipe_params(
    net: &Network,
    input: Option<&WfInput>,
    rho: Option<f64>,
) -> Result<Vec<(f64, f64)>> {
    net.edges()
        .iter()
        .enumerate()
        .map(|(p, e)| match e.kind {
            EdgeKind::Pipe { c, .. } if c == 0.0 => Err(WdsError::Unsupported(format!(
                "lossless link '{}' in an energy solve",
                e.id
            ))),
            EdgeKind::Pipe { c, rho: r } => Ok((c, rho.unwrap_or(r))),
            EdgeKind::Pump(_) if input.is_some_and(|i| !i.is_on(p)) => Err(WdsError::Unsupported(
                format!("off pump '{}' must be reduced before an energy solve", e.id),
            )),
            EdgeKind::Pump(_) => Err(WdsError::Unsupported(format!(
                "pump '{}' present; energy solvers need a pump-free network",
                e.id
            ))),
        })
        .collect()
}

/// `Σ c_p|f_p|^(ρ+1)/(ρ+1)`
pub fn energy_value(net: &Network, f: &[f64], rho: Option<f64>) -> Result<f64> {
    net.check_len("flows", f.len(), net.num_edges())?;
    let params = pipe_params(net, None, rho)?;
    Ok(params
        .iter()
        .zip(f)
        .map(|(&(c, r), &fp)| c * fp.abs().powf(r + 1.0) / (r + 1.0))
        .sum())
}

/// Details of a dual decomposition run.
#[derive(Clone, Debug)]
pub struct DualRun {
    pub multipliers: Vec<f64>,
    pub flows: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub step_size: f64,
    /// Dual objective at the recorded iterations.
    pub trace: Vec<(usize, f64)>,
    pub converged: bool,
    pub seconds: f64,
}

fn edge_flows(net: &Network, params: &[(f64, f64)], x: &[f64], f: &mut [f64]) {
    for (p, e) in net.edges().iter().enumerate() {
        let (c, r) = params[p];
        f[p] = flow_from_drop(c, r, x[e.tail] - x[e.head]);
    }
}

/// `d − Aᵀf` into `g`; returns its max-norm.
fn mass_gap(net: &Network, d: &[f64], f: &[f64], g: &mut [f64]) -> f64 {
    g.copy_from_slice(d);
    for (e, &fp) in net.edges().iter().zip(f) {
        g[e.tail] -= fp;
        g[e.head] += fp;
    }
    g.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Dual function `q(ξ) = Σ_p [E_p(f_p) − f_p a_pᵀξ] + dᵀξ` at the primal minimizer.
fn dual_value(net: &Network, params: &[(f64, f64)], d: &[f64], xi: &[f64], f: &[f64]) -> f64 {
    let mut q: f64 = d.iter().zip(xi).map(|(a, b)| a * b).sum();
    for (p, e) in net.edges().iter().enumerate() {
        let (c, r) = params[p];
        let fp = f[p];
        q += c * fp.abs().powf(r + 1.0) / (r + 1.0) - fp * (xi[e.tail] - xi[e.head]);
    }
    q
}

fn scale_of(d: &[f64]) -> f64 {
    d.iter().fold(1.0_f64, |m, v| m.max(v.abs()))
}

fn remove_mean(v: &mut [f64]) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= mean);
}

/// Dual ascent on the flow problem's multipliers.
pub fn dual_decomposition_run(
    net: &Network,
    input: &WfInput,
    cfg: &SolverConfig,
) -> Result<DualRun> {
    let start = Instant::now();
    let params = pipe_params(net, Some(input), cfg.rho)?;
    validate_cfg(cfg)?;
    let n = net.num_nodes();
    let d = &input.injections;
    let tol = cfg.tol_primal * scale_of(d);
    let mut mu = cfg.step_size;
    if cfg.auto_scale {
        let cmax = params.iter().fold(0.0_f64, |m, p| m.max(p.0));
        if !(1e-2..=1e2).contains(&cmax) {
            mu *= cmax;
        }
    }
    let mut xi = match &cfg.initial {
        Some(v) => {
            net.check_len("initial multipliers", v.len(), n)?;
            v.clone()
        }
        None => vec![0.0; n],
    };
    remove_mean(&mut xi);
    let mut prev = xi.clone();
    let mut f = vec![0.0; net.num_edges()];
    let mut g = vec![0.0; n];
    let mut trace = Vec::new();
    let mut residual = f64::INFINITY;
    let mut q_prev = f64::NEG_INFINITY;
    let mut g_prev = vec![0.0; n];
    for k in 0..cfg.max_iters {
        edge_flows(net, &params, &xi, &mut f);
        residual = mass_gap(net, d, &f, &mut g);
        let q = if cfg.adaptive_step || cfg.trace_every > 0 {
            dual_value(net, &params, d, &xi, &f)
        } else {
            0.0
        };
        if cfg.trace_every > 0 && k % cfg.trace_every == 0 {
            trace.push((k, q));
        }
        if residual <= tol {
            return Ok(DualRun {
                multipliers: xi,
                flows: f,
                iterations: k,
                residual,
                step_size: mu,
                trace,
                converged: true,
                seconds: start.elapsed().as_secs_f64(),
            });
        }
        // The dual is concave; a drop or a gradient that reverses means the
        // step overshot.
        if cfg.adaptive_step {
            let turn: f64 = g.iter().zip(&g_prev).map(|(a, b)| a * b).sum();
            if q < q_prev - 1e-12 * q.abs().max(1.0) || turn < 0.0 {
                mu *= 0.5;
                prev.copy_from_slice(&xi);
            }
            g_prev.copy_from_slice(&g);
        }
        q_prev = q;
        match cfg.acceleration {
            Acceleration::None => {
                for (x, gi) in xi.iter_mut().zip(&g) {
                    *x += mu * gi;
                }
            }
            Acceleration::Momentum(beta) => {
                // Restart when the momentum points against the ascent direction.
                let align: f64 = g
                    .iter()
                    .zip(xi.iter().zip(&prev))
                    .map(|(gi, (x, p))| gi * (x - p))
                    .sum();
                let b = if align < 0.0 { 0.0 } else { beta };
                for i in 0..n {
                    let step = mu * g[i] + b * (xi[i] - prev[i]);
                    prev[i] = xi[i];
                    xi[i] += step;
                }
            }
        }
        remove_mean(&mut xi);
    }
    Ok(DualRun {
        multipliers: xi,
        flows: f,
        iterations: cfg.max_iters,
        residual,
        step_size: mu,
        trace,
        converged: false,
        seconds: start.elapsed().as_secs_f64(),
    })
}

fn validate_cfg(cfg: &SolverConfig) -> Result<()> {
    if !(cfg.step_size > 0.0) || !(cfg.tol_primal > 0.0) || !(cfg.tol_grad > 0.0) {
        return Err(WdsError::Parameter(
            "step size and tolerances must be positive".into(),
        ));
    }
    if let Acceleration::Momentum(b) = cfg.acceleration {
        if !(0.0..1.0).contains(&b) {
            return Err(WdsError::Parameter(format!(
                "momentum must lie in [0, 1), got {b}"
            )));
        }
    }
    Ok(())
}

/// Dual decomposition solve. Pressures come from the multipliers shifted to
/// the reference: `h = ξ − ξ_r + h_r`.
pub fn solve_dual_decomposition(
    net: &Network,
    input: &WfInput,
    cfg: &SolverConfig,
) -> Result<WfSolution> {
    let run = dual_decomposition_run(net, input, cfg)?;
    if !run.converged {
        return Err(WdsError::NonConvergence {
            iterations: run.iterations,
            residual: run.residual,
        });
    }
    let r = net.reference();
    let h: Vec<f64> = run
        .multipliers
        .iter()
        .map(|x| x - run.multipliers[r] + input.reference_pressure)
        .collect();
    Ok(validated_solution(
        net,
        input,
        run.flows,
        h,
        "energy/dual-decomposition",
    ))
}

/// Details of a gradient run on the pressure potential.
#[derive(Clone, Debug)]
pub struct GradientRun {
    pub pressures: Vec<f64>,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub converged: bool,
}

fn potential(net: &Network, params: &[(f64, f64)], d: &[f64], h: &[f64]) -> f64 {
    let mut v = -d.iter().zip(h).map(|(a, b)| a * b).sum::<f64>();
    for (p, e) in net.edges().iter().enumerate() {
        let (c, r) = params[p];
        let x = (h[e.tail] - h[e.head]).abs();
        let s = 1.0 + 1.0 / r;
        v += c.powf(-1.0 / r) * x.powf(s) / s;
    }
    v
}

/// Gradient `Aᵀf(h) − d` of the potential into `g`; returns its max-norm.
fn potential_gradient(
    net: &Network,
    params: &[(f64, f64)],
    d: &[f64],
    h: &[f64],
    f: &mut [f64],
    g: &mut [f64],
) -> f64 {
    edge_flows(net, params, h, f);
    let r = mass_gap(net, d, f, g);
    g.iter_mut().for_each(|v| *v = -*v);
    r
}

/// Gradient descent with Armijo backtracking (optionally Nesterov momentum)
/// on the pressure potential.
pub fn gradient_pressure_run(
    net: &Network,
    input: &WfInput,
    cfg: &SolverConfig,
) -> Result<GradientRun> {
    let params = pipe_params(net, Some(input), cfg.rho)?;
    validate_cfg(cfg)?;
    let n = net.num_nodes();
    let d = &input.injections;
    let tol = cfg.tol_grad * scale_of(d);
    let mut h = match &cfg.initial {
        Some(v) => {
            net.check_len("initial pressures", v.len(), n)?;
            v.clone()
        }
        None => vec![input.reference_pressure; n],
    };
    let mut f = vec![0.0; net.num_edges()];
    let mut g = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut gt = vec![0.0; n];
    let mut y = h.clone();
    let mut h_prev = h.clone();
    let mut t = 1.0_f64;
    let mut step = cfg.step_size.max(1e-12);
    let mut norm = f64::INFINITY;
    for k in 0..cfg.max_iters {
        // Momentum point (equal to h without acceleration).
        norm = potential_gradient(net, &params, d, &y, &mut f, &mut g);
        if norm <= tol {
            let conv_norm = potential_gradient(net, &params, d, &y, &mut f, &mut gt);
            return Ok(GradientRun {
                pressures: y,
                iterations: k,
                gradient_norm: conv_norm,
                converged: true,
            });
        }
        if cfg.diagonal_scaling {
            scale_by_conductance(net, &params, &y, &f, &mut g);
        }
        let fy = potential(net, &params, d, &y);
        let gg: f64 = if cfg.diagonal_scaling {
            // g is the scaled direction here; the decrease uses the true slope.
            potential_gradient(net, &params, d, &y, &mut f, &mut gt);
            g.iter().zip(&gt).map(|(a, b)| a * b).sum()
        } else {
            g.iter().map(|v| v * v).sum()
        };
        let mut accepted = false;
        for _ in 0..60 {
            for i in 0..n {
                trial[i] = y[i] - step * g[i];
            }
            if potential(net, &params, d, &trial) <= fy - 0.5 * step * gg {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
        match cfg.acceleration {
            Acceleration::None => {
                h.copy_from_slice(&trial);
                y.copy_from_slice(&trial);
            }
            Acceleration::Momentum(_) => {
                // Restart on objective increase.
                if potential(net, &params, d, &trial) > potential(net, &params, d, &h) {
                    t = 1.0;
                    y.copy_from_slice(&h);
                    continue;
                }
                h_prev.copy_from_slice(&h);
                h.copy_from_slice(&trial);
                let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
                let w = (t - 1.0) / t_next;
                for i in 0..n {
                    y[i] = h[i] + w * (h[i] - h_prev[i]);
                }
                t = t_next;
            }
        }
        step *= 2.0;
    }
    Ok(GradientRun {
        pressures: y,
        iterations: cfg.max_iters,
        gradient_norm: norm,
        converged: false,
    })
}

/// Divides `g[i]` by the sum of `df/dΔh` over the edges at node `i`.
fn scale_by_conductance(net: &Network, params: &[(f64, f64)], h: &[f64], f: &[f64], g: &mut [f64]) {
    const CAP: f64 = 1e12;
    let mut diag = vec![0.0; g.len()];
    for (p, e) in net.edges().iter().enumerate() {
        let x = (h[e.tail] - h[e.head]).abs();
        let w = if x > 0.0 {
            (f[p].abs() / (params[p].1 * x)).min(CAP)
        } else {
            CAP
        };
        diag[e.tail] += w;
        diag[e.head] += w;
    }
    for (gi, di) in g.iter_mut().zip(&diag) {
        if *di > 0.0 {
            *gi /= di;
        }
    }
}

/// Gradient solve; the minimizer is shifted to the reference pressure and
/// flows follow edge by edge.
pub fn solve_gradient_pressure(
    net: &Network,
    input: &WfInput,
    cfg: &SolverConfig,
) -> Result<WfSolution> {
    let params = pipe_params(net, Some(input), cfg.rho)?;
    let run = gradient_pressure_run(net, input, cfg)?;
    if !run.converged {
        return Err(WdsError::NonConvergence {
            iterations: run.iterations,
            residual: run.gradient_norm,
        });
    }
    let shift = input.reference_pressure - run.pressures[net.reference()];
    let h: Vec<f64> = run.pressures.iter().map(|v| v + shift).collect();
    let mut f = vec![0.0; net.num_edges()];
    edge_flows(net, &params, &h, &mut f);
    let tag = "energy/gradient";
    let mut sol = validated_solution(net, input, f, h, tag);
    if cfg.rho.is_some() {
        // Validation above used the stored exponents; recheck with the override.
        sol.residual_edges = net
            .edges()
            .iter()
            .enumerate()
            .map(|(p, e)| {
                let (c, r) = params[p];
                (sol.pressures[e.tail]
                    - sol.pressures[e.head]
                    - crate::hydraulics::head_drop(c, r, sol.flows[p]))
                .abs()
            })
            .collect();
    }
    Ok(sol)
}

/// Details of a loop-flow Newton run.
#[derive(Clone, Debug)]
pub struct NewtonRun {
    pub flows: Vec<f64>,
    pub iterations: usize,
    /// Largest head imbalance around a fundamental cycle, meters.
    pub loop_residual: f64,
    pub converged: bool,
}

/// Damped Newton on the energy restricted to `f = f₀ + N t`, where `f₀`
/// is a tree flow and the columns of `N` are fundamental cycles. Mass
/// balance holds at every iterate; the gradient is the vector of head
/// sums around the cycles.
pub fn loop_newton_run(
    net: &Network,
    input: &WfInput,
    rho: Option<f64>,
    max_iters: usize,
) -> Result<NewtonRun> {
    let params = pipe_params(net, Some(input), rho)?;
    let cs = analyze_cycles(net);
    let f0 = tree_flows(net, &cs.tree, &input.injections);
    let k = cs.cycles.len();
    let at = |t: &DVector<f64>| -> Vec<f64> {
        let mut f = f0.clone();
        for (l, c) in cs.cycles.iter().enumerate() {
            for &p in &c.edges {
                f[p] += c.indicator[p] as f64 * t[l];
            }
        }
        f
    };
    let energy = |f: &[f64]| -> f64 {
        params
            .iter()
            .zip(f)
            .map(|(&(c, r), &x)| c * x.abs().powf(r + 1.0) / (r + 1.0))
            .sum()
    };
    let mut t = DVector::zeros(k);
    let mut f = at(&t);
    let mut residual = 0.0;
    for it in 0..=max_iters {
        let drop: Vec<f64> = params
            .iter()
            .zip(&f)
            .map(|(&(c, r), &x)| head_drop(c, r, x))
            .collect();
        let g = DVector::from_iterator(
            k,
            cs.cycles.iter().map(|c| {
                c.edges
                    .iter()
                    .map(|&p| c.indicator[p] as f64 * drop[p])
                    .sum::<f64>()
            }),
        );
        residual = g.amax();
        let tol = 1e-10 * drop.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        if residual <= tol {
            return Ok(NewtonRun {
                flows: f,
                iterations: it,
                loop_residual: residual,
                converged: true,
            });
        }
        if it == max_iters {
            break;
        }
        let mut hess = DMatrix::zeros(k, k);
        for (a, ca) in cs.cycles.iter().enumerate() {
            for (b, cb) in cs.cycles.iter().enumerate().skip(a) {
                let v: f64 = ca
                    .edges
                    .iter()
                    .filter(|&&p| cb.indicator[p] != 0)
                    .map(|&p| {
                        let (c, r) = params[p];
                        (ca.indicator[p] * cb.indicator[p]) as f64
                            * r
                            * c
                            * f[p].abs().powf(r - 1.0)
                    })
                    .sum();
                hess[(a, b)] = v;
                hess[(b, a)] = v;
            }
        }
        // Zero-flow pipes flatten the Hessian; a small ridge keeps it definite.
        let ridge = 1e-12 * hess.diagonal().amax().max(1e-300);
        let mut step = None;
        for scale in [1.0, 1e3, 1e6, 1e9] {
            let mut h = hess.clone();
            for i in 0..k {
                h[(i, i)] += ridge * scale;
            }
            if let Some(ch) = h.cholesky() {
                step = Some(-ch.solve(&g));
                break;
            }
        }
        let Some(s) = step else { break };
        let e0 = energy(&f);
        let slope = g.dot(&s);
        let loop_max = |f: &[f64]| -> f64 {
            cs.cycles
                .iter()
                .map(|c| {
                    c.edges
                        .iter()
                        .map(|&p| c.indicator[p] as f64 * head_drop(params[p].0, params[p].1, f[p]))
                        .sum::<f64>()
                        .abs()
                })
                .fold(0.0, f64::max)
        };
        let mut alpha = 1.0;
        let mut moved = false;
        for _ in 0..60 {
            let cand = &t + alpha * &s;
            let fc = at(&cand);
            let ec = energy(&fc);
            // Near the optimum the decrease drops below round-off in the
            // energy; then the loop residual decides.
            let flat = (ec - e0).abs() <= 1e-13 * e0.abs();
            if ec <= e0 + 1e-4 * alpha * slope || (flat && loop_max(&fc) < residual) {
                t = cand;
                f = fc;
                moved = true;
                break;
            }
            alpha *= 0.5;
        }
        if !moved {
            break;
        }
    }
    Ok(NewtonRun {
        flows: f,
        iterations: max_iters,
        loop_residual: residual,
        converged: false,
    })
}

/// Loop-flow Newton solve; pressures follow from the tree edges.
pub fn solve_loop_newton(net: &Network, input: &WfInput, cfg: &SolverConfig) -> Result<WfSolution> {
    let params = pipe_params(net, Some(input), cfg.rho)?;
    let run = loop_newton_run(net, input, cfg.rho, 200)?;
    if !run.converged {
        return Err(WdsError::NonConvergence {
            iterations: run.iterations,
            residual: run.loop_residual,
        });
    }
    let tree = crate::graph::bfs_tree(net);
    let mut h = vec![0.0; net.num_nodes()];
    h[net.reference()] = input.reference_pressure;
    for &u in &tree.order[1..] {
        let p = tree.parent_edge[u].expect("non-root has parent");
        let e = net.edge(p);
        let (c, r) = params[p];
        let dh = head_drop(c, r, run.flows[p]);
        h[u] = if e.head == u {
            h[e.tail] - dh
        } else {
            h[e.head] + dh
        };
    }
    Ok(validated_solution(
        net,
        input,
        run.flows,
        h,
        "energy/loop-newton",
    ))
}

/// Solves with dual decomposition first and falls back to loop-flow Newton
/// if it does not converge within its budget.
pub fn solve_energy(net: &Network, input: &WfInput, cfg: &SolverConfig) -> Result<WfSolution> {
    match solve_dual_decomposition(net, input, cfg) {
        Ok(s) => Ok(s),
        Err(WdsError::NonConvergence {
            iterations,
            residual,
        }) => {
            let mut s = solve_loop_newton(net, input, cfg)?;
            s.diagnostics.push(format!(
                "dual decomposition stopped at residual {residual:.3e} after {iterations} iterations; used loop-flow Newton"
            ));
            Ok(s)
        }
        Err(e) => Err(e),
    }
}
