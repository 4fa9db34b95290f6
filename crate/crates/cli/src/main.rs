use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use minrule::output::{seed_dir, write_run, write_sweep};
use minrule::run::{bounds, run, sweep, RunError, RunOptions};
use minrule::scenario::PRESETS;
use minrule::{Scenario, SimError};

#[derive(Parser)]
#[command(name = "minrule", version, about = "Seeded simulator for distributed min-rule hypothesis testing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a scenario's schema and models without running it.
    Validate(Source),
    /// Run one seed.
    Run {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        run: RunFlags,
        /// Overrides the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run a list or range of seeds in parallel.
    Sweep {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        run: RunFlags,
        /// `A..B` (half-open), `A..=B`, or a comma list.
        #[arg(long, value_parser = parse_seeds)]
        seeds: Seeds,
    },
    /// List built-in scenarios.
    Presets,
    /// Print the rate bounds of a scenario without running it.
    Bounds(Source),
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Source {
    /// Scenario JSON file.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Built-in scenario name.
    #[arg(long)]
    preset: Option<String>,
}

#[derive(Args)]
struct RunFlags {
    /// Output directory. Without it only the summary is printed.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Keep every K-th step of the belief trace.
    #[arg(long)]
    stride: Option<u64>,
    /// Replay every broadcast and check the trigger and quantizer rules.
    #[arg(long)]
    audit: bool,
}

impl RunFlags {
    fn options(&self, seed: Option<u64>) -> RunOptions {
        RunOptions {
            seed,
            stride: self.stride,
            audit: self.audit,
        }
    }
}

#[derive(Clone, Debug)]
struct Seeds(Vec<u64>);

fn parse_seeds(text: &str) -> Result<Seeds, String> {
    let num = |s: &str| s.trim().parse::<u64>().map_err(|e| format!("bad seed {s:?}: {e}"));
    let seeds: Vec<u64> = if let Some((a, b)) = text.split_once("..=") {
        (num(a)?..=num(b)?).collect()
    } else if let Some((a, b)) = text.split_once("..") {
        (num(a)?..num(b)?).collect()
    } else {
        text.split(',').map(num).collect::<Result<_, _>>()?
    };
    if seeds.is_empty() {
        return Err(format!("{text:?} names no seeds"));
    }
    Ok(Seeds(seeds))
}

fn load(source: &Source) -> Result<Scenario, SimError> {
    let scenario = match (&source.scenario, &source.preset) {
        (Some(path), _) => Scenario::load(path)?,
        (None, Some(name)) => Scenario::preset(name)?,
        (None, None) => unreachable!("clap requires one source"),
    };
    Ok(scenario)
}

fn print_json<T: serde::Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializable"));
}

fn write_error(dir: &Path, e: std::io::Error) -> SimError {
    SimError::io(format!("writing {}", dir.display()), e)
}

fn execute(cli: Cli) -> Result<(), SimError> {
    match cli.command {
        Command::Validate(source) => {
            let scenario = load(&source)?;
            println!(
                "ok: {} ({} agents, {} hypotheses, {}, horizon {})",
                scenario.name(),
                scenario.agent_count(),
                scenario.hypothesis_count(),
                scenario.file.algorithm.label(),
                scenario.horizon()
            );
        }
        Command::Run { source, run: flags, seed } => {
            let scenario = load(&source)?;
            let out = run(&scenario, &flags.options(seed))?;
            for w in &out.summary.warnings {
                eprintln!("warning: {w}");
            }
            if let Some(dir) = &flags.out {
                write_run(dir, &out, scenario.file.output.logs).map_err(|e| write_error(dir, e))?;
            }
            print_json(&out.summary);
            if !out.summary.invariants.all_passed() {
                return Err(RunError::InvariantBreach {
                    step: scenario.horizon(),
                    detail: "invariant report has failures".into(),
                }
                .into());
            }
        }
        Command::Sweep { source, run: flags, seeds } => {
            let scenario = load(&source)?;
            let logs = scenario.file.output.logs;
            let report = sweep(&scenario, &seeds.0, &flags.options(None), |out| match &flags.out {
                Some(dir) => write_run(&seed_dir(dir, out.seed), out, logs)
                    .map_err(|e| RunError::Output(format!("{}: {e}", dir.display()))),
                None => Ok(()),
            })?;
            if let Some(dir) = &flags.out {
                write_sweep(dir, &report).map_err(|e| write_error(dir, e))?;
            }
            print_json(&report.aggregate);
            if report.aggregate.invariants_pass_rate < 1.0 {
                return Err(RunError::InvariantBreach {
                    step: scenario.horizon(),
                    detail: "some seeds failed the invariant report".into(),
                }
                .into());
            }
        }
        Command::Presets => {
            for (name, about) in PRESETS {
                println!("{name:<16} {about}");
            }
        }
        Command::Bounds(source) => {
            let scenario = load(&source)?;
            print_json(&bounds(&scenario));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // usage errors are input errors; help and version are not errors
            let _ = e.print();
            return ExitCode::from(u8::from(e.use_stderr()));
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
