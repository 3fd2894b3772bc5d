use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use ctmc_hums_cli::config::{render_key_reference, Settings};
use ctmc_hums_cli::report::OutputDir;
use ctmc_hums_cli::{commands, config};

/// Hidden-Markov degradation monitoring: simulate two-state health models,
/// filter noisy drift observations into posterior state probabilities,
/// estimate model parameters, and run fleet maintenance pipelines.
///
/// Log verbosity is controlled by the CTMC_HUMS_LOG environment variable
/// (error, warn, info, debug, trace).
#[derive(Parser)]
#[command(name = "ctmc-hums", version, about, max_term_width = 100)]
struct Cli {
    /// Config file (key = value lines with dotted sections, # comments).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Override any config key (repeatable), e.g. --set sim.horizon=500.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,

    /// Base RNG seed (config: sim.seed).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory (config: out.dir). Default: ./ctmc-hums-out.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Grid step for simulation and filtering (config: sim.dt).
    #[arg(long, global = true)]
    dt: Option<f64>,

    /// Posterior update scheme: euler | robust (config: filter.scheme).
    #[arg(long, global = true)]
    scheme: Option<String>,

    /// Moving-average window in startups (config: prep.window).
    #[arg(long, global = true)]
    window: Option<usize>,

    /// Decision threshold (config: decision.threshold).
    #[arg(long, global = true)]
    threshold: Option<f64>,

    /// Consecutive startups required above the threshold
    /// (config: decision.run_length).
    #[arg(long = "run-length", global = true)]
    run_length: Option<usize>,

    /// Worker threads for fleet commands; 0 = one per core (config: workers).
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Print the configuration key reference and exit.
    #[arg(long = "help-config", global = true)]
    help_config: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a hidden chain + observations, filter them, report tracking.
    Simulate,
    /// Filter one simulated dataset under perturbed parameter sets and
    /// compare the resulting maintenance decisions.
    Sensitivity,
    /// Iteratively estimate rates and slopes from an observation series CSV.
    Estimate {
        /// Observation series file (t,y).
        series: PathBuf,
    },
    /// Clean, temperature-correct, and smooth logbooks (no filtering).
    Preprocess {
        /// Fleet CSV file or directory of per-appliance CSVs.
        fleet: PathBuf,
    },
    /// Run the posterior filter over an observation series CSV.
    Filter {
        /// Observation series file (t,y).
        series: PathBuf,
    },
    /// Apply the run-length maintenance rule to a posterior trajectory CSV.
    Detect {
        /// Posterior trajectory file (t,p_state_0,...).
        posterior: PathBuf,
    },
    /// Full fleet workflow: preprocess, filter, detect, and score.
    Pipeline {
        /// Fleet CSV file or directory of per-appliance CSVs.
        fleet: PathBuf,
    },
    /// Generate a synthetic appliance fleet with known degradation onsets.
    FleetGen,
    /// Score a grid of (threshold, run length) rules over one fleet.
    Sweep {
        /// Fleet CSV file or directory of per-appliance CSVs.
        fleet: PathBuf,
    },
}

/// Merge config file, --set overrides, and named flags (highest precedence).
fn build_settings(cli: &Cli) -> Result<Settings> {
    let mut settings = Settings::new();
    if let Some(path) = &cli.config {
        settings.load_file(path)?;
    }
    for pair in &cli.set {
        settings.set_pair(pair)?;
    }
    if let Some(seed) = cli.seed {
        settings.set("sim.seed", &seed.to_string())?;
    }
    if let Some(dt) = cli.dt {
        settings.set("sim.dt", &dt.to_string())?;
    }
    if let Some(scheme) = &cli.scheme {
        config::parse_scheme(scheme)?; // validate eagerly for a clean error
        settings.set("filter.scheme", scheme)?;
    }
    if let Some(window) = cli.window {
        settings.set("prep.window", &window.to_string())?;
    }
    if let Some(threshold) = cli.threshold {
        settings.set("decision.threshold", &threshold.to_string())?;
    }
    if let Some(run_length) = cli.run_length {
        settings.set("decision.run_length", &run_length.to_string())?;
    }
    if let Some(workers) = cli.workers {
        settings.set("workers", &workers.to_string())?;
    }
    if let Some(out) = &cli.out {
        settings.set("out.dir", &out.display().to_string())?;
    }
    Ok(settings)
}

fn run() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::new().filter("CTMC_HUMS_LOG"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    if cli.help_config {
        print!("{}", render_key_reference());
        return Ok(());
    }
    let Some(command) = &cli.command else {
        anyhow::bail!("no subcommand given; see --help");
    };
    let settings = build_settings(&cli)?;

    let workers = settings.usize("workers", 0)?;
    if workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
            .context("configuring worker pool")?;
    }

    let out_dir = PathBuf::from(
        settings.get("out.dir").unwrap_or("ctmc-hums-out").to_string(),
    );
    let out = OutputDir::create(&out_dir)?;

    match command {
        Command::Simulate => commands::simulate::run(&settings, &out),
        Command::Sensitivity => commands::sensitivity::run(&settings, &out),
        Command::Estimate { series } => commands::estimate::run(&settings, series, &out),
        Command::Preprocess { fleet } => commands::preprocess::run(&settings, fleet, &out),
        Command::Filter { series } => commands::filter::run(&settings, series, &out),
        Command::Detect { posterior } => commands::detect::run(&settings, posterior, &out),
        Command::Pipeline { fleet } => commands::pipeline::run(&settings, fleet, &out),
        Command::FleetGen => commands::fleet_gen::run(&settings, &out),
        Command::Sweep { fleet } => commands::sweep::run(&settings, fleet, &out),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
