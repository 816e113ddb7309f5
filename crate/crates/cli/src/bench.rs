//! Monte-Carlo runs over generated instances.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use wdsflow_core::miqcqp::{exactness_report, solve_w2};
use wdsflow_core::{solve_with, Network, SolveConfig, SolverChoice, WdsError, WfInput, WfSolution};
use wdsflow_opt::BnbStatus;

use crate::generator::{generate_feasible_instance, scaled_injections, InstanceGenConfig};

pub const REPORT_SCHEMA: u32 = 1;
pub const THRESHOLDS: [f64; 3] = [1e-3, 1e-5, 1e-6];

#[derive(Clone, Debug)]
pub struct BenchConfig {
    pub instances: usize,
    pub gen: InstanceGenConfig,
    pub solver: SolverChoice,
    pub solve: SolveConfig,
    /// Worker threads; `Some(1)` gives a sequential run.
    pub threads: Option<usize>,
    /// Scale these base injections instead of building instances from
    /// random pressures. No ground truth is available then.
    pub base_injections: Option<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Exact,
    Inexact,
    Timeout,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub index: usize,
    pub outcome: Outcome,
    pub seconds: f64,
    pub max_gap: Option<f64>,
    /// Max-norm error relative to `max(‖truth‖∞, 1)`.
    pub flow_error: Option<f64>,
    pub pressure_error: Option<f64>,
    pub max_edge_residual: Option<f64>,
    pub solver: String,
    pub message: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub instances: usize,
    pub finished: usize,
    pub timeouts: usize,
    pub failures: usize,
    /// `(threshold, finished instances with max gap below it)`
    pub below: Vec<(f64, usize)>,
    pub median_seconds: Option<f64>,
    /// Max gaps of finished instances, largest first.
    pub ranked_gaps: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub schema: u32,
    pub network: String,
    pub solver: String,
    pub generator: InstanceGenConfig,
    pub summary: Summary,
    pub records: Vec<InstanceRecord>,
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff = a
        .iter()
        .zip(b)
        .fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()));
    diff / b.iter().fold(1.0_f64, |m, v| m.max(v.abs()))
}

fn solve_one(
    net: &Network,
    input: &WfInput,
    cfg: &BenchConfig,
) -> Result<(WfSolution, f64, bool), WdsError> {
    if cfg.solver == SolverChoice::Miqcqp {
        let w2 = wdsflow_core::miqcqp::W2Config {
            off_pumps: cfg.solve.off_pumps,
            ..cfg.solve.w2.clone()
        };
        let out = solve_w2(net, input, &w2)?;
        let timed_out = out.status == BnbStatus::BudgetExhausted;
        return Ok((out.solution, out.report.max_gap(), timed_out));
    }
    let sol = solve_with(net, input, cfg.solver, &cfg.solve)?.solution;
    let report = exactness_report(
        net,
        &input.off_pumps,
        &sol.flows,
        &sol.pressures,
        cfg.solve.w2.exact_tol,
    );
    Ok((sol, report.max_gap(), false))
}

fn run_one(net: &Network, cfg: &BenchConfig, index: usize) -> InstanceRecord {
    let mut rec = InstanceRecord {
        index,
        outcome: Outcome::Failed,
        seconds: 0.0,
        max_gap: None,
        flow_error: None,
        pressure_error: None,
        max_edge_residual: None,
        solver: cfg.solver.name().to_string(),
        message: None,
    };
    let instance = match &cfg.base_injections {
        Some(base) => WfInput::new(
            net,
            scaled_injections(net, base, &cfg.gen, index as u64),
            cfg.gen.reference_pressure,
        )
        .map(|input| (input, None)),
        None => generate_feasible_instance(net, &cfg.gen, index as u64)
            .map(|i| (i.input, Some(i.truth))),
    };
    let (input, truth) = match instance {
        Ok(x) => x,
        Err(e) => {
            rec.message = Some(format!("generation: {e}"));
            return rec;
        }
    };
    let start = Instant::now();
    let result = solve_one(net, &input, cfg);
    rec.seconds = start.elapsed().as_secs_f64();
    match result {
        Ok((sol, gap, timed_out)) => {
            rec.max_gap = Some(gap);
            rec.max_edge_residual = Some(sol.max_edge_residual());
            if let Some(t) = &truth {
                rec.flow_error = Some(rel_err(&sol.flows, &t.flows));
                rec.pressure_error = Some(rel_err(&sol.pressures, &t.pressures));
            }
            rec.outcome = if timed_out {
                Outcome::Timeout
            } else if gap <= cfg.solve.w2.exact_tol {
                Outcome::Exact
            } else {
                Outcome::Inexact
            };
        }
        Err(e) => {
            rec.outcome = if matches!(e.root(), WdsError::Budget { .. }) {
                Outcome::Timeout
            } else {
                Outcome::Failed
            };
            rec.message = Some(e.to_string());
        }
    }
    rec
}

pub fn summarize(records: &[InstanceRecord]) -> Summary {
    let finished: Vec<&InstanceRecord> = records
        .iter()
        .filter(|r| matches!(r.outcome, Outcome::Exact | Outcome::Inexact))
        .collect();
    let mut ranked: Vec<f64> = finished.iter().filter_map(|r| r.max_gap).collect();
    ranked.sort_by(|a, b| b.total_cmp(a));
    let mut times: Vec<f64> = finished.iter().map(|r| r.seconds).collect();
    times.sort_by(f64::total_cmp);
    let median_seconds = match times.len() {
        0 => None,
        n if n % 2 == 1 => Some(times[n / 2]),
        n => Some(0.5 * (times[n / 2 - 1] + times[n / 2])),
    };
    Summary {
        instances: records.len(),
        finished: finished.len(),
        timeouts: records
            .iter()
            .filter(|r| r.outcome == Outcome::Timeout)
            .count(),
        failures: records
            .iter()
            .filter(|r| r.outcome == Outcome::Failed)
            .count(),
        below: THRESHOLDS
            .iter()
            .map(|&t| (t, ranked.iter().filter(|&&g| g < t).count()))
            .collect(),
        median_seconds,
        ranked_gaps: ranked,
    }
}

pub fn run_montecarlo(net: &Network, name: &str, cfg: &BenchConfig) -> BenchReport {
    let work = || {
        (0..cfg.instances)
            .into_par_iter()
            .map(|k| run_one(net, cfg, k))
            .collect::<Vec<_>>()
    };
    let mut records = match cfg.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(work),
            Err(e) => {
                log::warn!("thread pool: {e}; using the global pool");
                work()
            }
        },
        None => work(),
    };
    records.sort_by_key(|r| r.index);
    BenchReport {
        schema: REPORT_SCHEMA,
        network: name.to_string(),
        solver: cfg.solver.name().to_string(),
        generator: cfg.gen.clone(),
        summary: summarize(&records),
        records,
    }
}

impl BenchReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// `rank,max_gap` rows for plotting.
    pub fn ranked_gaps_csv(&self) -> String {
        let mut s = String::from("rank,max_gap\n");
        for (k, g) in self.summary.ranked_gaps.iter().enumerate() {
            s.push_str(&format!("{},{g:e}\n", k + 1));
        }
        s
    }

    /// Per-instance rows for plotting.
    pub fn records_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
        let mut s = String::from("index,outcome,seconds,max_gap,flow_error,pressure_error\n");
        for r in &self.records {
            let outcome = serde_json::to_value(r.outcome).expect("enum");
            s.push_str(&format!(
                "{},{},{:e},{},{},{}\n",
                r.index,
                outcome.as_str().unwrap_or(""),
                r.seconds,
                opt(r.max_gap),
                opt(r.flow_error),
                opt(r.pressure_error)
            ));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(index: usize, outcome: Outcome, gap: Option<f64>, seconds: f64) -> InstanceRecord {
        InstanceRecord {
            index,
            outcome,
            seconds,
            max_gap: gap,
            flow_error: None,
            pressure_error: None,
            max_edge_residual: None,
            solver: "miqcqp".into(),
            message: None,
        }
    }

    #[test]
    fn threshold_bookkeeping() {
        let s = summarize(&[
            rec(0, Outcome::Inexact, Some(2e-4), 1.0),
            rec(1, Outcome::Inexact, Some(5e-3), 3.0),
        ]);
        assert_eq!(s.below[0], (1e-3, 1));
        assert_eq!(s.ranked_gaps, vec![5e-3, 2e-4]);
        assert_eq!(s.median_seconds, Some(2.0));
    }

    #[test]
    fn timeouts_counted_apart() {
        let s = summarize(&[
            rec(0, Outcome::Exact, Some(0.0), 1.0),
            rec(1, Outcome::Timeout, Some(1.0), 60.0),
            rec(2, Outcome::Failed, None, 0.0),
        ]);
        assert_eq!((s.finished, s.timeouts, s.failures), (1, 1, 1));
        assert_eq!(s.median_seconds, Some(1.0));
        assert_eq!(s.below[2], (1e-6, 1));
    }

    #[test]
    fn rel_err_floor() {
        assert_eq!(rel_err(&[1.5], &[0.5]), 1.0);
        assert_eq!(rel_err(&[11.0], &[10.0]), 0.1);
    }
}
