use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand};
use wdsflow_cli::bench::{run_montecarlo, BenchConfig};
use wdsflow_cli::format::NativeFile;
use wdsflow_cli::generator::{generate_feasible_instance, InstanceGenConfig};
use wdsflow_cli::{inp, load_any, CliError};
use wdsflow_core::graph::{analyze_cycles, blocks, classify};
use wdsflow_core::miqcqp::{build_w2, presolve_bridges, solve_w2, BigM};
use wdsflow_core::{
    dispatch, solve_with, Network, SolutionStatus, SolveConfig, SolverChoice, WdsError, WfInput,
};
use wdsflow_opt::BnbStatus;

#[derive(Parser)]
#[command(
    name = "wdsflow",
    version,
    about = "Steady-state flows and pressures in water networks"
)]
struct Cli {
    /// More log output (repeat for more).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Clone)]
struct SolveOpts {
    /// auto | tree | energy | stitch | miqcqp | hybrid
    #[arg(long, default_value = "auto")]
    solver: String,
    /// Big-M in meters, or "auto".
    #[arg(long)]
    big_m: Option<String>,
    /// Override every pipe's exponent.
    #[arg(long)]
    rho: Option<f64>,
    /// Branch-and-bound time limit in seconds.
    #[arg(long)]
    budget: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the instance stored in a file (or generated for a catalog name).
    Solve {
        file: String,
        #[command(flatten)]
        opts: SolveOpts,
        /// Seed for the instance when the network has none.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Print the solution as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Print the topology class and the solver it routes to.
    Classify { file: String },
    /// Write generated feasible instances as native files.
    Gen {
        file: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short = 'n', default_value_t = 1)]
        count: usize,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Monte-Carlo run over generated instances.
    Bench {
        file: String,
        #[arg(short = 'n', default_value_t = 100)]
        count: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        threads: Option<usize>,
        /// Scale the file's injections instead of building instances from pressures.
        #[arg(long)]
        scale_demands: bool,
        #[command(flatten)]
        opts: SolveOpts,
    },
    /// Print the cone program (pump free) or the W2 model of an instance.
    ExportConic {
        file: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        big_m: Option<f64>,
    },
    /// Convert an EPANET INP file to the native format.
    Convert { inp: PathBuf, native: PathBuf },
}

const EXIT_CANDIDATE: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_BUDGET: u8 = 4;
const EXIT_INPUT: u8 = 5;

fn exit_for(e: &CliError) -> u8 {
    match e {
        CliError::Solver(w) => match w.root() {
            WdsError::Infeasible(_) => EXIT_INFEASIBLE,
            WdsError::Budget { .. } | WdsError::NonConvergence { .. } => EXIT_BUDGET,
            WdsError::Lp(_) => EXIT_CANDIDATE,
            _ => EXIT_INPUT,
        },
        _ => EXIT_INPUT,
    }
}

fn solve_config(opts: &SolveOpts) -> Result<(SolverChoice, SolveConfig), CliError> {
    let choice = match opts.solver.as_str() {
        "stitch" => SolverChoice::Stitching,
        s => s.parse().map_err(CliError::Parse)?,
    };
    let mut cfg = SolveConfig::default();
    if let Some(m) = &opts.big_m {
        cfg.w2.big_m = if m == "auto" {
            BigM::Auto
        } else {
            let v: f64 = m
                .parse()
                .map_err(|_| CliError::Parse(format!("bad --big-m '{m}'")))?;
            if !(v > 0.0) {
                return Err(WdsError::Parameter(format!("big-M must be positive, got {v}")).into());
            }
            BigM::Fixed(v)
        };
    }
    if let Some(r) = opts.rho {
        cfg.energy.rho = Some(r);
    }
    if let Some(b) = opts.budget {
        if !(b > 0.0 && b.is_finite()) {
            return Err(CliError::Parse(format!("bad --budget {b}")));
        }
        cfg.w2.bnb.time_limit = Some(Duration::from_secs_f64(b));
    }
    Ok((choice, cfg))
}

fn instance(spec: &str, seed: u64) -> Result<(Network, WfInput, String), CliError> {
    let (net, input, name) = load_any(spec)?;
    let input = match input {
        Some(i) => i,
        None => {
            let cfg = InstanceGenConfig {
                seed,
                ..InstanceGenConfig::default()
            };
            generate_feasible_instance(&net, &cfg, 0)?.input
        }
    };
    Ok((net, input, name))
}

fn print_solution(net: &Network, sol: &wdsflow_core::WfSolution, json: bool) {
    if json {
        let flows: serde_json::Map<String, serde_json::Value> = net
            .edges()
            .iter()
            .zip(&sol.flows)
            .map(|(e, f)| (e.id.clone(), (*f).into()))
            .collect();
        let heads: serde_json::Map<String, serde_json::Value> = net
            .nodes()
            .iter()
            .zip(&sol.pressures)
            .map(|(n, h)| (n.id.clone(), (*h).into()))
            .collect();
        let doc = serde_json::json!({
            "solver": sol.solver_tag,
            "verified": sol.status == SolutionStatus::Verified,
            "mass_residual": sol.residual_mass,
            "max_edge_residual": sol.max_edge_residual(),
            "flows": flows,
            "pressures": heads,
            "diagnostics": sol.diagnostics,
        });
        println!("{}", serde_json::to_string_pretty(&doc).expect("json"));
        return;
    }
    println!("solver     {}", sol.solver_tag);
    println!("status     {:?}", sol.status);
    println!(
        "residuals  mass {:.3e}, edge {:.3e}",
        sol.residual_mass,
        sol.max_edge_residual()
    );
    for d in &sol.diagnostics {
        println!("note       {d}");
    }
    println!("\n{:<12} {:>14}", "edge", "flow m3/h");
    for (e, f) in net.edges().iter().zip(&sol.flows) {
        println!("{:<12} {:>14.6}", e.id, f);
    }
    println!("\n{:<12} {:>14}", "node", "head m");
    for (n, h) in net.nodes().iter().zip(&sol.pressures) {
        println!("{:<12} {:>14.6}", n.id, h);
    }
}

fn run(cli: Cli) -> Result<u8, CliError> {
    match cli.command {
        Command::Solve {
            file,
            opts,
            seed,
            json,
        } => {
            let (net, input, _) = instance(&file, seed)?;
            let (choice, cfg) = solve_config(&opts)?;
            let (sol, budget_hit) = if choice == SolverChoice::Miqcqp {
                let out = solve_w2(
                    &net,
                    &input,
                    &wdsflow_core::miqcqp::W2Config {
                        off_pumps: cfg.off_pumps,
                        ..cfg.w2
                    },
                )?;
                if !json {
                    println!(
                        "max gap    {:.3e} m (exact: {})",
                        out.report.max_gap(),
                        out.report.exact
                    );
                }
                (out.solution, out.status == BnbStatus::BudgetExhausted)
            } else {
                let d = if choice == SolverChoice::Auto {
                    dispatch(&net, &input, &cfg)?
                } else {
                    solve_with(&net, &input, choice, &cfg)?
                };
                if !json {
                    println!("class      {}", d.class.name());
                }
                (d.solution, false)
            };
            print_solution(&net, &sol, json);
            Ok(if budget_hit {
                EXIT_BUDGET
            } else if sol.status == SolutionStatus::Verified {
                0
            } else {
                EXIT_CANDIDATE
            })
        }
        Command::Classify { file } => {
            let (net, input, _) = load_any(&file)?;
            let input = match input {
                Some(i) => i,
                None => WfInput::new(&net, vec![0.0; net.num_nodes()], 0.0)?,
            };
            let class = classify(&net, &input)?;
            let s = analyze_cycles(&net);
            let b = blocks(&net);
            println!("class        {}", class.name());
            println!(
                "solver       {}",
                wdsflow_core::dispatch::route(class).name()
            );
            println!("nodes        {}", net.num_nodes());
            println!(
                "edges        {} ({} pumps)",
                net.num_edges(),
                net.pumps().count()
            );
            println!("cycles       {}", s.cycles.len());
            println!("bridges      {}", s.bridges.len());
            println!("cyclic blocks {}", b.cyclic().count());
            Ok(0)
        }
        Command::Gen {
            file,
            seed,
            count,
            out_dir,
        } => {
            let (net, _, name) = load_any(&file)?;
            let cfg = InstanceGenConfig {
                seed,
                ..InstanceGenConfig::default()
            };
            std::fs::create_dir_all(&out_dir)?;
            for k in 0..count {
                let inst = generate_feasible_instance(&net, &cfg, k as u64)?;
                let path = out_dir.join(format!("{name}-{seed}-{k}.toml"));
                std::fs::write(&path, NativeFile::from_parts(&net, &inst.input).to_text())?;
                let truth = serde_json::json!({ "flows": inst.truth.flows, "pressures": inst.truth.pressures });
                std::fs::write(
                    path.with_extension("truth.json"),
                    serde_json::to_string_pretty(&truth).expect("json"),
                )?;
                println!("{}", path.display());
            }
            Ok(0)
        }
        Command::Bench {
            file,
            count,
            out,
            seed,
            threads,
            scale_demands,
            opts,
        } => {
            let (net, input, name) = load_any(&file)?;
            let (choice, solve) = solve_config(&opts)?;
            let solver = if choice == SolverChoice::Auto {
                SolverChoice::Miqcqp
            } else {
                choice
            };
            let base_injections = match (scale_demands, input) {
                (true, Some(i)) => Some(i.injections),
                (true, None) => {
                    return Err(CliError::Parse(
                        "--scale-demands needs a file with injections".into(),
                    ))
                }
                (false, _) => None,
            };
            let cfg = BenchConfig {
                instances: count,
                gen: InstanceGenConfig {
                    seed,
                    ..InstanceGenConfig::default()
                },
                solver,
                solve,
                threads,
                base_injections,
            };
            let report = run_montecarlo(&net, &name, &cfg);
            std::fs::write(&out, report.to_json())?;
            std::fs::write(out.with_extension("gaps.csv"), report.ranked_gaps_csv())?;
            std::fs::write(out.with_extension("records.csv"), report.records_csv())?;
            let s = &report.summary;
            println!(
                "instances {}  finished {}  timeouts {}  failures {}",
                s.instances, s.finished, s.timeouts, s.failures
            );
            for (t, n) in &s.below {
                println!("gap < {t:e}: {n}");
            }
            if let Some(m) = s.median_seconds {
                println!("median time {m:.3} s");
            }
            Ok(0)
        }
        Command::ExportConic { file, seed, big_m } => {
            let (net, input, _) = instance(&file, seed)?;
            let model = if net.has_pumps() {
                let m = big_m.unwrap_or(300.0);
                let mut model =
                    build_w2(&net, &input.injections, input.reference_pressure, m, 1e4)?;
                presolve_bridges(&net, &input.injections, &mut model)?;
                model.to_conic()
            } else {
                wdsflow_core::conic::export_socp(&net, &input.injections)?
            };
            print!("{}", model.to_text());
            Ok(0)
        }
        Command::Convert { inp: src, native } => {
            let text = std::fs::read_to_string(&src)?;
            let n = inp::parse_inp(&text)?;
            let input = WfInput::new(&n.net, n.injections, n.reference_head)?;
            std::fs::write(&native, NativeFile::from_parts(&n.net, &input).to_text())?;
            for w in &n.warnings {
                eprintln!("warning: {w}");
            }
            println!(
                "{} nodes, {} edges -> {}",
                n.net.num_nodes(),
                n.net.num_edges(),
                native.display()
            );
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_for(&e))
        }
    }
}
