use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use railsim::config::{ConfigError, ScenarioConfig, StrategyKind};
use railsim::run::{apply_overrides, compare_and_write, simulate, write_run, CompareAxis, Overrides, RunError};

#[derive(Parser)]
#[command(name = "railsim", version, about = "Rail network simulation with social-event demand")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario, or a paired comparison with --compare.
    Run(RunArgs),
    /// Run a scenario twice, differing only on one axis.
    Compare {
        #[command(flatten)]
        args: RunArgs,
        /// Axis to vary.
        #[arg(long, value_enum)]
        axis: Axis,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Scenario directory or TOML file.
    #[arg(value_name = "SCENARIO")]
    path: Option<PathBuf>,
    #[arg(long, value_name = "PATH", conflicts_with = "path")]
    scenario: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Simulated hours.
    #[arg(long, value_name = "HOURS")]
    until: Option<u64>,
    #[arg(long, value_enum)]
    strategy: Option<StrategyArg>,
    #[arg(long, value_enum)]
    alt_routing: Option<Switch>,
    /// Compartments in the manager's pool.
    #[arg(long)]
    pool: Option<u32>,
    /// Replace the scenario's events with `lat,lon,HH:MM,HH:MM`. Repeatable.
    #[arg(long, value_name = "LAT,LON,START,END")]
    event: Vec<String>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, value_enum)]
    compare: Option<Axis>,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    None,
    Greedy,
}

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Clone, Copy, ValueEnum)]
enum Axis {
    Event,
    Strategy,
    AltRouting,
}

impl From<Axis> for CompareAxis {
    fn from(a: Axis) -> Self {
        match a {
            Axis::Event => CompareAxis::Event,
            Axis::Strategy => CompareAxis::Strategy,
            Axis::AltRouting => CompareAxis::AltRouting,
        }
    }
}

fn execute(args: RunArgs, axis: Option<Axis>) -> Result<PathBuf, RunError> {
    let path = args.scenario.or(args.path).ok_or_else(|| ConfigError::Invalid("no scenario given".into()))?;
    let base = ScenarioConfig::load(&path)?;
    let overrides = Overrides {
        seed: args.seed,
        until_hours: args.until,
        strategy: args.strategy.map(|s| match s {
            StrategyArg::None => StrategyKind::None,
            StrategyArg::Greedy => StrategyKind::Greedy,
        }),
        alt_routing: args.alt_routing.map(|s| matches!(s, Switch::On)),
        pool: args.pool,
        events: args.event,
    };
    let cfg = apply_overrides(&base, &overrides)?;
    match axis.or(args.compare) {
        Some(axis) => {
            compare_and_write(&cfg, axis.into(), &args.out)?;
        }
        None => {
            let out = simulate("run", &cfg)?;
            write_run(&out, &args.out.join("run"), None, &[])?;
        }
    }
    Ok(args.out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => execute(args, None),
        Command::Compare { args, axis } => execute(args, Some(axis)),
    };
    match result {
        Ok(out) => {
            println!("ok\t{}", out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            let msg = e.to_string().replace(['\n', '\t'], " ");
            eprintln!("error\t{}\t{msg}", e.kind());
            ExitCode::from(2)
        }
    }
}
