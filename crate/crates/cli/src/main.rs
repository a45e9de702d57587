//! `telewalk`: run, replay, serve and validate walking scenarios.
//!
//! Exit codes: 0 ok, 1 I/O failure, 2 invalid input (config, model or
//! command file), 3 runtime abort (the tick is printed on stderr).

mod serve;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use telewalk::config::{parse_override, ConfigError, ScenarioConfig};
use telewalk::sim::{run_scenario, RunStatus, RunSummary, SimError};

#[derive(Parser, Debug)]
#[command(name = "telewalk", version, about = "Teleoperated walking simulator")]
struct Cli {
    /// Repeat for more output.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    /// Print the exit summary as JSON.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Scenario TOML. Defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dotted-key override, e.g. `--set sim.dt=0.005`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the scenario with its configured command file.
    Run {
        #[command(flatten)]
        common: Common,
        /// Telemetry CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a recorded command file through the scenario.
    Replay {
        #[command(flatten)]
        common: Common,
        /// Command CSV; overrides `commands.path`.
        #[arg(long)]
        commands: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve the simulation over WebSocket to one operator.
    Serve {
        #[command(flatten)]
        common: Common,
        /// Overrides `bridge.port`; 0 picks a free port.
        #[arg(long)]
        port: Option<u16>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check every configuration invariant without simulating.
    Validate {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug)]
enum Failure {
    Invalid(String),
    Io(String),
    Abort { tick: u64, reason: String },
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Io(_) => 1,
            Failure::Invalid(_) => 2,
            Failure::Abort { .. } => 3,
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Invalid(issues) => {
                Failure::Invalid(issues.iter().map(|i| format!("  {i}")).collect::<Vec<_>>().join("\n"))
            }
            other => Failure::Invalid(other.to_string()),
        }
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        if let Some(tick) = e.tick() {
            return Failure::Abort { tick, reason: e.to_string() };
        }
        match e {
            SimError::Config(c) => c.into(),
            SimError::Telemetry(t) => Failure::Io(t.to_string()),
            other => Failure::Invalid(other.to_string()),
        }
    }
}

fn load(common: &Common) -> Result<ScenarioConfig, Failure> {
    let overrides = common
        .overrides
        .iter()
        .map(|s| parse_override(s))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(match &common.config {
        Some(p) => ScenarioConfig::load(p, &overrides)?,
        None => ScenarioConfig::with_overrides(&overrides)?,
    })
}

fn report(cli: &Cli, summary: &RunSummary) -> Result<(), Failure> {
    if cli.json {
        println!("{}", serde_json::to_string_pretty(summary).expect("summary serializes"));
    } else {
        println!("{summary}");
    }
    match &summary.status {
        RunStatus::Ok => Ok(()),
        RunStatus::Aborted { tick, reason } => Err(Failure::Abort { tick: *tick, reason: reason.clone() }),
    }
}

fn execute(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Run { common, out } => {
            let cfg = load(common)?;
            if cfg.commands.source == telewalk::config::CommandSource::Live {
                return Err(Failure::Invalid("commands.source = \"live\" needs `telewalk serve`".into()));
            }
            let summary = run_scenario(&cfg, out.clone())?;
            report(cli, &summary)
        }
        Command::Replay { common, commands, out } => {
            let mut cfg = load(common)?;
            if let Some(p) = commands {
                let abs = std::path::absolute(p).map_err(|e| Failure::Io(e.to_string()))?;
                cfg.commands.path = Some(abs.display().to_string());
            }
            if cfg.commands.path.is_none() {
                return Err(Failure::Invalid("replay needs a command file (--commands or commands.path)".into()));
            }
            let summary = run_scenario(&cfg, out.clone())?;
            report(cli, &summary)
        }
        Command::Serve { common, port, out } => {
            let mut cfg = load(common)?;
            if let Some(p) = port {
                cfg.bridge.port = *p;
            }
            let summary = serve::serve(&cfg, out.clone(), cli.verbose)?;
            report(cli, &summary)
        }
        Command::Validate { common } => {
            let cfg = load(common)?;
            let model = cfg.load_model()?;
            cfg.check(&model)?;
            if cli.verbose > 0 {
                print!("{}", cfg.to_toml_string());
            }
            println!("ok: {} ({} joints, omega = {:.6} 1/s)", model.name, model.dofs(), cfg.omega());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Invalid(m) => eprintln!("invalid input:\n{m}"),
                Failure::Io(m) => eprintln!("i/o error: {m}"),
                Failure::Abort { tick, reason } => eprintln!("aborted at tick {tick}: {reason}"),
            }
            ExitCode::from(f.code())
        }
    }
}
