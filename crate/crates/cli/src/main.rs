//! Command-line front end for the transition-pathway pipeline.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pathways_core::market::panel_csv;
use pathways_core::pipeline::{Format, Pipeline, Stage, StageOutput};
use pathways_core::regression::{simulate_panel, Family, SimulationConfig};
use pathways_core::Error;

#[derive(Parser)]
#[command(name = "pathways", version, about = "Occupational transition pathways for workers displaced by automation")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Pipeline config file (flat TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for simulation; overrides the config value.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides the config value.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Report format, may be repeated; overrides the config list.
    #[arg(long, global = true, value_enum)]
    format: Vec<FormatArg>,
    /// Similarity threshold in [0, 100]; overrides the config value.
    #[arg(long, global = true)]
    threshold: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
    Md,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
            FormatArg::Md => Format::Md,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Summarise task exposure and work-activity evolution.
    Exposure,
    /// Score capability similarity and write the shortlist.
    Similarity,
    /// Build predictors and regional market indicators.
    Market,
    /// Fit the candidate count models and select one by AIC.
    Fit,
    /// Assess and rank shortlisted pathways, then write reports.
    Rank,
    /// Run every stage in order.
    Run,
    /// Write a synthetic transition panel drawn from a known model.
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, default_value_t = 342)]
    occupations: usize,
    #[arg(long, default_value_t = 6)]
    years: usize,
    #[arg(long, value_parser = ["poisson", "nb1", "nb2"], default_value = "nb1")]
    family: String,
}

const EXIT_CONFIG: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_CONVERGENCE: u8 = 4;

fn exit_code(err: &Error) -> u8 {
    match err.root() {
        Error::Config(_) => EXIT_CONFIG,
        Error::Convergence(_) => EXIT_CONVERGENCE,
        _ => EXIT_DATA,
    }
}

fn load_pipeline(global: &Global) -> Result<Pipeline, Error> {
    let path = global
        .config
        .as_deref()
        .ok_or_else(|| Error::Config(vec!["--config is required for this command".into()]))?;
    let mut pipeline = Pipeline::from_config_file(path).map_err(|e| match e {
        Error::Io { path, source } => Error::Config(vec![format!("cannot read {}: {source}", path.display())]),
        other => other,
    })?;
    let cfg = pipeline.config_mut();
    if let Some(out) = &global.out {
        cfg.output_dir = out.clone();
    }
    if let Some(seed) = global.seed {
        cfg.seed = seed;
    }
    if !global.format.is_empty() {
        cfg.formats.clear();
        for f in &global.format {
            let f = Format::from(*f);
            if !cfg.formats.contains(&f) {
                cfg.formats.push(f);
            }
        }
    }
    if let Some(t) = global.threshold {
        if !(0.0..=100.0).contains(&t) {
            return Err(Error::Config(vec![format!("--threshold {t} is outside [0, 100]")]));
        }
        cfg.similarity_threshold = t;
    }
    Ok(pipeline)
}

fn report(out: &StageOutput) {
    println!(
        "{}: {} artifact(s) in {:.2} s",
        out.stage,
        out.artifacts.len(),
        out.seconds
    );
    for a in &out.artifacts {
        println!("  {}", a.display());
    }
}

fn simulate(global: &Global, args: &SimulateArgs) -> Result<(), Error> {
    let seed = match (global.seed, &global.config) {
        (Some(s), _) => s,
        (None, Some(_)) => load_pipeline(global)?.config().seed,
        (None, None) => SimulationConfig::default().seed,
    };
    let family = match args.family.as_str() {
        "poisson" => Family::Poisson,
        "nb2" => Family::Nb2,
        _ => Family::Nb1,
    };
    let cfg = SimulationConfig {
        occupations: args.occupations,
        years: args.years,
        family,
        seed,
        ..SimulationConfig::default()
    };
    let panel = simulate_panel(&cfg)?;
    let dir = global.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&dir).map_err(|e| Error::Io {
        path: dir.clone(),
        source: e,
    })?;
    let path = dir.join("simulated_panel.csv");
    std::fs::write(&path, panel_csv(&panel.rows)?).map_err(|e| Error::Io {
        path: path.clone(),
        source: e,
    })?;
    println!("simulated {} rows (seed {seed}) to {}", panel.rows.len(), path.display());
    Ok(())
}

fn execute(cli: &Cli) -> Result<(), Error> {
    let stage = match &cli.command {
        Command::Simulate(args) => return simulate(&cli.global, args),
        Command::Run => None,
        Command::Exposure => Some(Stage::Exposure),
        Command::Similarity => Some(Stage::Similarity),
        Command::Market => Some(Stage::Market),
        Command::Fit => Some(Stage::Regression),
        Command::Rank => Some(Stage::Synthesis),
    };
    let pipeline = load_pipeline(&cli.global)?;
    match stage {
        Some(s) => report(&pipeline.run_stage(s)?),
        None => {
            for s in Stage::ALL {
                report(&pipeline.run_stage(s)?);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
