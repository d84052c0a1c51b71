use std::path::PathBuf;
use std::process::ExitCode;

use capbandit::config;
use capbandit::runner::{self, CommandContext};
use clap::{Args, Parser, Subcommand};

/// Experiment harness for capacity-constrained contextual task assignment.
#[derive(Parser)]
#[command(name = "capbandit", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment configuration file (key = value sections).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; artifacts and manifest.json land here.
    #[arg(long)]
    out: PathBuf,
    /// Override [experiment] base_seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Parallel run workers for sweeps.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Print the fully resolved configuration and exit.
    #[arg(long)]
    explain: bool,
    /// Record and emit per-round traces.
    #[arg(long)]
    trace: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic reward log from the [synth] section.
    Synth(CommonArgs),
    /// One online run per configured policy at the first capacity profile.
    Simulate(CommonArgs),
    /// Full (policy x capacity) sweep with aggregation and a plot.
    Sweep(CommonArgs),
    /// Mini-batch runs with integer counts and exact matching.
    BatchSim(CommonArgs),
    /// Hindsight-optimal assignments and shadow prices.
    Oracle(CommonArgs),
    /// Offline unconstrained benchmark fits.
    Offline(CommonArgs),
    /// Render a sweep CSV as an SVG figure.
    Plot(CommonArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Synth(_) => "synth",
            Command::Simulate(_) => "simulate",
            Command::Sweep(_) => "sweep",
            Command::BatchSim(_) => "batch-sim",
            Command::Oracle(_) => "oracle",
            Command::Offline(_) => "offline",
            Command::Plot(_) => "plot",
        }
    }

    fn args(&self) -> &CommonArgs {
        match self {
            Command::Synth(a)
            | Command::Simulate(a)
            | Command::Sweep(a)
            | Command::BatchSim(a)
            | Command::Oracle(a)
            | Command::Offline(a)
            | Command::Plot(a) => a,
        }
    }
}

fn run(cli: Cli) -> capbandit::Result<()> {
    let name = cli.command.name();
    let args = cli.command.args();

    let config_bytes = std::fs::read(&args.config)?;
    let mut app = config::load(&args.config)?;
    if let Some(seed) = args.seed {
        app.experiment.base_seed = seed;
        app.explain.push(config::ExplainEntry {
            key: "base_seed",
            value: seed.to_string(),
            provenance: config::Provenance::Flag,
            note: "overridden by --seed",
        });
    }
    if args.trace {
        app.experiment.record_trace = true;
    }
    if args.explain {
        print!("{}", config::explain_text(&app));
        return Ok(());
    }

    let ctx = CommandContext::new(app, &config_bytes, args.out.clone(), args.jobs, name);
    match cli.command {
        Command::Synth(_) => runner::cmd_synth(&ctx),
        Command::Simulate(_) => runner::cmd_simulate(&ctx, false),
        Command::Sweep(_) => runner::cmd_sweep(&ctx),
        Command::BatchSim(_) => runner::cmd_simulate(&ctx, true),
        Command::Oracle(_) => runner::cmd_oracle(&ctx),
        Command::Offline(_) => runner::cmd_offline(&ctx),
        Command::Plot(_) => runner::cmd_plot(&ctx),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("CAPBANDIT_LOG_LEVEL")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            // One machine-parsable line: error: {"kind":...,"message":...}
            let payload = serde_json::json!({
                "kind": err.kind(),
                "message": err.to_string(),
            });
            eprintln!("error: {payload}");
            ExitCode::FAILURE
        }
    }
}
