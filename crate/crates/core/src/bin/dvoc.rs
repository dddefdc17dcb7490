//! Batch front end over the `dvoc_reduce` library.
//!
//! Exit codes: 0 success, 2 usage error, 3 input, parse or I/O error,
//! 4 solver failure, 5 invariant breach in a finished run.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use dvoc_reduce::modal::{classify_states, DEFAULT_CUTOFF};
use dvoc_reduce::scenario::{self, ModalPoint, ModelChoice, RunOutput, Scenario};
use dvoc_reduce::sim::{write_atomic, ASSUMPTION1_EPS};
use dvoc_reduce::{Error, LineType, ParameterSet};

const EXIT_INPUT: u8 = 3;
const EXIT_SOLVER: u8 = 4;
const EXIT_INVARIANT: u8 = 5;

#[derive(Parser)]
#[command(name = "dvoc", version, about = "Full- and reduced-order dVOC inverter simulations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one model of a scenario and write its trace.
    Run {
        /// Scenario file, or the name of a bundled scenario.
        #[arg(long)]
        scenario: String,
        #[arg(long, value_enum, default_value = "full")]
        model: Model,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run the full and matching reduced model and report their differences.
    Compare {
        #[arg(long)]
        scenario: String,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Eigenvalues and participation factors of the full model at an equilibrium.
    Modal {
        #[arg(long)]
        scenario: String,
        /// `t0`, or a time in seconds whose inputs set the operating point.
        #[arg(long, default_value = "t0")]
        at: ModalPoint,
        /// Modes with real part below `-cutoff` are fast [rad/s].
        #[arg(long, default_value_t = DEFAULT_CUTOFF)]
        cutoff: f64,
        /// Classify states at this many random operating points instead.
        #[arg(long)]
        sweep: Option<usize>,
        /// Seed for `--sweep`.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Tabulate the hard and smooth limiter factors as CSV.
    LimiterSweep {
        #[arg(long, default_value_t = 1.2)]
        i_max: f64,
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.2,0.3,0.4")]
        eps: Vec<f64>,
        #[arg(long, default_value_t = 0.01)]
        x_min: f64,
        #[arg(long, default_value_t = 100.0)]
        x_max: f64,
        #[arg(long, default_value_t = 201)]
        n: usize,
        /// Write `limiter-sweep.csv` here instead of printing.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parameter sets.
    Params {
        #[command(subcommand)]
        action: ParamsAction,
    },
}

#[derive(Subcommand)]
enum ParamsAction {
    /// Print a parameter set in per-unit and SI.
    Show {
        /// Take the parameters of this scenario.
        #[arg(long, conflicts_with = "line")]
        scenario: Option<String>,
        /// Line row of the default table when no scenario is given.
        #[arg(long, value_enum, default_value = "inductive")]
        line: Line,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum Model {
    Full,
    Reduced,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum Line {
    Inductive,
    Resistive,
}

enum Failure {
    Lib(Error),
    Invariant(Vec<String>),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_solver_failure() { EXIT_SOLVER } else { EXIT_INPUT })
        }
        Err(Failure::Invariant(breaches)) => {
            for b in breaches.iter().take(10) {
                eprintln!("invariant breach: {b}");
            }
            if breaches.len() > 10 {
                eprintln!("... {} more", breaches.len() - 10);
            }
            ExitCode::from(EXIT_INVARIANT)
        }
    }
}

fn dispatch(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Run { scenario, model, out } => {
            let s = Scenario::load(&scenario)?;
            let choice = match model {
                Model::Full => ModelChoice::Full,
                Model::Reduced => ModelChoice::Reduced,
            };
            let r = scenario::run(&s, choice)?;
            let stem = format!("{}-{}", s.name, r.trace.model);
            r.trace.write_files(&out, &stem, &r.violations, ASSUMPTION1_EPS)?;
            print_summary(&r, &out.join(format!("{stem}.csv")));
            check_invariants(&[&r])
        }
        Command::Compare { scenario, out } => {
            let s = Scenario::load(&scenario)?;
            let (report, full, reduced) = scenario::compare(&s)?;
            for r in [&full, &reduced] {
                let stem = format!("{}-{}", s.name, r.trace.model);
                r.trace.write_files(&out, &stem, &r.violations, ASSUMPTION1_EPS)?;
            }
            let json = serde_json::to_string_pretty(&report).map_err(Error::from)?;
            write_atomic(&out.join(format!("{}-compare.json", s.name)), json.as_bytes())?;
            print!("{}", report.to_text());
            check_invariants(&[&full, &reduced])
        }
        Command::Modal { scenario, at, cutoff, sweep, seed, out } => {
            let s = Scenario::load(&scenario)?;
            std::fs::create_dir_all(&out).map_err(|e| Error::Io { path: out.clone(), source: e })?;
            if let Some(n) = sweep {
                let points = scenario::modal_sweep(&s, n, seed, cutoff)?;
                let json = serde_json::to_string_pretty(&points).map_err(Error::from)?;
                let path = out.join(format!("{}-modal-sweep.json", s.name));
                write_atomic(&path, json.as_bytes())?;
                let mut tally: Vec<(String, usize)> = Vec::new();
                for p in &points {
                    let key = match &p.error {
                        Some(e) => format!("error: {e}"),
                        None => format!("slow {{{}}} ambiguous {{{}}}", p.slow.join(","), p.ambiguous.join(",")),
                    };
                    match tally.iter_mut().find(|(k, _)| *k == key) {
                        Some((_, c)) => *c += 1,
                        None => tally.push((key, 1)),
                    }
                }
                println!("{n} operating points, seed {seed}, cutoff {cutoff} rad/s");
                for (k, c) in tally {
                    println!("{c:>6}  {k}");
                }
                println!("wrote {}", path.display());
                return Ok(());
            }
            let (_, report) = scenario::modal(&s, at, cutoff)?;
            let path = out.join(format!("{}-modal.json", s.name));
            let json = serde_json::to_string_pretty(&report.to_json()).map_err(Error::from)?;
            write_atomic(&path, json.as_bytes())?;
            print!("{}", report.to_table());
            let part = classify_states(&report, cutoff);
            let names = |ix: &[usize]| ix.iter().map(|&i| report.state_names[i].as_str()).collect::<Vec<_>>().join(", ");
            println!("slow: {}", names(&part.slow));
            println!("fast: {}", names(&part.fast));
            if !part.ambiguous.is_empty() {
                println!("ambiguous: {}", names(&part.ambiguous));
            }
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::LimiterSweep { i_max, eps, x_min, x_max, n, out } => {
            let csv = scenario::limiter_sweep(i_max, &eps, x_min, x_max, n)?;
            match out {
                Some(dir) => {
                    std::fs::create_dir_all(&dir).map_err(|e| Error::Io { path: dir.clone(), source: e })?;
                    let path = dir.join("limiter-sweep.csv");
                    write_atomic(&path, csv.as_bytes())?;
                    println!("wrote {}", path.display());
                }
                None => print!("{csv}"),
            }
            Ok(())
        }
        Command::Params { action: ParamsAction::Show { scenario, line } } => {
            let p = match scenario {
                Some(name) => Scenario::load(&name)?.params()?,
                None => ParameterSet::table1_for(match line {
                    Line::Inductive => LineType::Inductive,
                    Line::Resistive => LineType::Resistive,
                }),
            };
            print!("{}", scenario::params_show(&p)?);
            for w in p.consistency_warnings() {
                println!("warning: {w}");
            }
            Ok(())
        }
    }
}

fn print_summary(r: &RunOutput, csv: &Path) {
    let t = &r.trace;
    println!("model {} ({} samples, {} steps)", t.model, t.len(), t.step_count());
    let end = t.final_state().iter().zip(&t.state_names).map(|(x, n)| format!("{n}={x:.6}")).collect::<Vec<_>>();
    println!("final state: {}", end.join(" "));
    println!("wall time: {:.4} s", t.wall_time);
    println!("assumption-1 violations: {}", r.violations.len());
    println!("wrote {}", csv.display());
}

fn check_invariants(runs: &[&RunOutput]) -> Result<(), Failure> {
    let breaches: Vec<String> = runs
        .iter()
        .flat_map(|r| scenario::invariant_breaches(&r.trace, &r.params).into_iter().map(|b| format!("{}: {b}", r.trace.model)))
        .collect();
    if breaches.is_empty() {
        Ok(())
    } else {
        Err(Failure::Invariant(breaches))
    }
}
