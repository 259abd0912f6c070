//! `rearrange`: generate instances, plan, benchmark and render.
//!
//! Exit status is 0 on success, 1 when a planner fails to find a plan, 2 on
//! invalid input (bad flags, unreadable or malformed files).

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand};
use rearrange_core::bench::{render, run_planner, run_suite, write_csv, Planner, Scenario, SuiteConfig};
use rearrange_core::instance::{plan_cost, validate_plan};
use rearrange_core::{Error, Instance, Objective, RearrangementPlan, Workspace};

#[derive(Parser)]
#[command(name = "rearrange", version, about = "Tabletop rearrangement planning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random instance as JSON.
    Gen {
        #[arg(long, default_value = "rand")]
        scenario: Scenario,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        rho: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10.0)]
        width: f64,
        #[arg(long, default_value_t = 10.0)]
        height: f64,
        /// Output file; stdout if absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Plan one instance.
    Plan {
        instance: PathBuf,
        /// ETBM, ERBM, TBM, RBM, EMCTS or MCTS.
        #[arg(long, default_value = "ETBM")]
        mode: Planner,
        #[arg(long, default_value = "pp")]
        objective: Objective,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Seconds.
        #[arg(long, default_value_t = 60.0)]
        time_limit: f64,
        /// Plan JSON output; stdout if absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a benchmark grid and write CSV.
    Bench {
        #[arg(long, default_value = "rand")]
        scenario: Scenario,
        #[arg(long, value_delimiter = ',', required = true)]
        n: Vec<usize>,
        #[arg(long, value_delimiter = ',', required = true)]
        rho: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "ETBM,TBM,ERBM,RBM,EMCTS,MCTS")]
        modes: Vec<Planner>,
        #[arg(long, default_value = "pp")]
        objective: Objective,
        #[arg(long, default_value_t = 10)]
        trials: usize,
        #[arg(long, default_value_t = 60.0)]
        time_limit: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Worker threads, 0 for one per core.
        #[arg(long, default_value_t = 0)]
        workers: usize,
        /// CSV output; stdout if absent.
        #[arg(long)]
        csv_out: Option<PathBuf>,
    },
    /// Draw an instance, or each step of a plan, as SVG.
    Render {
        instance: PathBuf,
        #[arg(long)]
        plan: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

enum Failure {
    Planning(String),
    Input(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Input(e)
    }
}

fn seconds(s: f64) -> Result<Duration, Error> {
    Duration::try_from_secs_f64(s)
        .ok()
        .filter(|d| !d.is_zero())
        .ok_or_else(|| Error::Input(format!("time limit must be a positive number of seconds, got {s}")))
}

fn emit(text: &str, out: Option<&PathBuf>) -> Result<(), Error> {
    match out {
        Some(path) => fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn load_instance(path: &PathBuf) -> Result<Instance, Error> {
    Instance::from_json(&fs::read_to_string(path)?)
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Gen {
            scenario,
            n,
            rho,
            seed,
            width,
            height,
            out,
        } => {
            let inst = scenario.generate(n, rho, seed, Workspace::new(width, height)?)?;
            emit(&(inst.to_json() + "\n"), out.as_ref())?;
        }
        Command::Plan {
            instance,
            mode,
            objective,
            seed,
            time_limit,
            out,
        } => {
            let inst = load_instance(&instance)?;
            let plan = run_planner(&inst, mode, objective, seed, seconds(time_limit)?)?
                .ok_or_else(|| Failure::Planning(format!("{mode} found no plan within {time_limit} s")))?;
            emit(&(plan.to_json() + "\n"), out.as_ref())?;
            eprintln!(
                "{mode}: {} actions, task impedance {:.4}",
                plan.len(),
                plan_cost(&plan, &inst, Objective::Ti)?
            );
        }
        Command::Bench {
            scenario,
            n,
            rho,
            modes,
            objective,
            trials,
            time_limit,
            seed,
            workers,
            csv_out,
        } => {
            let cfg = SuiteConfig {
                scenario,
                ns: n,
                rhos: rho,
                planners: modes,
                objective,
                trials,
                time_limit: seconds(time_limit)?,
                seed,
                workspace: Workspace::default(),
                workers,
            };
            let records = run_suite(&cfg)?;
            match csv_out {
                Some(path) => write_csv(&records, fs::File::create(path).map_err(Error::from)?)?,
                None => write_csv(&records, std::io::stdout().lock())?,
            }
        }
        Command::Render { instance, plan, out } => {
            let inst = load_instance(&instance)?;
            let plan = plan
                .map(|p| fs::read_to_string(p).map_err(Error::from).and_then(|t| RearrangementPlan::from_json(&t)))
                .transpose()?;
            if let Some(p) = &plan {
                if let Some(v) = validate_plan(p, &inst).violation {
                    return Err(Error::Input(format!("plan does not validate: {v:?}")).into());
                }
            }
            for path in render(&inst, plan.as_ref(), &out)? {
                eprintln!("wrote {}", path.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Planning(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Input(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
