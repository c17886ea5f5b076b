use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use mltc_core::cohort::Cohort;
use mltc_core::pipeline::{
    load_input_cohort, run_pipeline, stage_cluster, stage_describe, stage_network, stage_pairs,
    stage_report, stage_trajectories, ArtifactRecord, OutputFormat, StageContext,
};
use mltc_core::synth::{generate_cohort, SynthSpec};
use mltc_core::{PipelineConfig, StratumKey};

#[derive(Parser)]
#[command(name = "mltc", version, about = "Mine and cluster multimorbidity trajectories")]
struct Cli {
    /// Log verbosity (error, warn, info, debug, trace).
    #[arg(long, global = true, default_value = "info")]
    log_level: log::LevelFilter,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every stage from the cohort files to the cluster reports.
    Run(WithInput),
    /// Generate a synthetic cohort from a spec file.
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the seed in the spec.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Descriptive statistics, strata and first-diagnosis sequences.
    Describe(WithInput),
    /// Pairwise association and direction tests.
    Pairs(StageArgs),
    /// Trajectory composition and support counting.
    Trajectories(StageArgs),
    /// Condition network and trajectory similarity matrix.
    Network(StageArgs),
    /// Spectral clustering of trajectories.
    Cluster(StageArgs),
    /// Per-cluster reports.
    Report(WithInput),
}

#[derive(Args)]
struct StageArgs {
    /// Pipeline config file (`key = value` lines); defaults apply otherwise.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory holding stage artifacts.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "all")]
    stratum: StratumArg,
    /// Overrides the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args)]
struct WithInput {
    /// Directory with patients.csv, diagnoses.csv, catalog.csv and
    /// optionally hospital_stays.csv.
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    stage: StageArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone)]
struct StratumArg(Vec<StratumKey>);

impl std::str::FromStr for StratumArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.trim().eq_ignore_ascii_case("all") {
            Ok(StratumArg(StratumKey::ALL.to_vec()))
        } else {
            Ok(StratumArg(vec![s.parse()?]))
        }
    }
}

impl StageArgs {
    fn context(&self) -> Result<StageContext> {
        let mut config = match &self.config {
            Some(path) => PipelineConfig::from_file(path)
                .with_context(|| format!("reading config {}", path.display()))?,
            None => PipelineConfig::default(),
        };
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        let format = match self.format {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        };
        Ok(StageContext::new(config, &self.out, format)?)
    }
}

/// Runs `stage` for every selected stratum, records what succeeded and
/// reports whether any stratum failed.
fn per_stratum(
    ctx: &StageContext,
    strata: &[StratumKey],
    stage: impl Fn(StratumKey) -> mltc_core::Result<Vec<ArtifactRecord>>,
) -> Result<bool> {
    let mut records = Vec::new();
    let mut failed = Vec::new();
    for &key in strata {
        match stage(key) {
            Ok(r) => records.extend(r),
            Err(e) => {
                log::error!("{e}");
                failed.push(key);
            }
        }
    }
    ctx.record(records)?;
    summarize(&failed);
    Ok(failed.is_empty())
}

fn summarize(failed: &[StratumKey]) {
    if !failed.is_empty() {
        let names: Vec<String> = failed.iter().map(|k| k.label()).collect();
        eprintln!("failed strata: {}", names.join(", "));
    }
}

fn load(input: &Path, ctx: &StageContext) -> Result<Cohort> {
    Ok(load_input_cohort(input, &ctx.config)?)
}

fn execute(command: Command) -> Result<bool> {
    match command {
        Command::Run(args) => {
            let ctx = args.stage.context()?;
            let outcome = run_pipeline(
                &ctx.config,
                &args.input,
                &ctx.out_dir,
                &args.stage.stratum.0,
                ctx.format,
            )?;
            let failed: Vec<StratumKey> = outcome.failures.iter().map(|(k, _)| *k).collect();
            summarize(&failed);
            log::info!(
                "{} artifacts recorded in {}",
                outcome.manifest.artifacts.len(),
                ctx.out_dir.join(mltc_core::pipeline::MANIFEST_FILE).display()
            );
            Ok(outcome.is_success())
        }
        Command::Synth { spec, out, seed } => {
            let mut spec = SynthSpec::from_file(&spec)?;
            if let Some(seed) = seed {
                spec.seed = seed;
            }
            let cohort = generate_cohort(&spec)?;
            cohort.write(&out)?;
            log::info!(
                "wrote {} patients and {} diagnoses to {}",
                cohort.patients.len(),
                cohort.events.len(),
                out.display()
            );
            Ok(true)
        }
        Command::Describe(args) => {
            let ctx = args.stage.context()?;
            let cohort = load(&args.input, &ctx)?;
            let records = stage_describe(&ctx, &cohort)?;
            ctx.record(records)?;
            Ok(true)
        }
        Command::Pairs(args) => {
            let ctx = args.context()?;
            per_stratum(&ctx, &args.stratum.0, |k| stage_pairs(&ctx, k))
        }
        Command::Trajectories(args) => {
            let ctx = args.context()?;
            per_stratum(&ctx, &args.stratum.0, |k| stage_trajectories(&ctx, k))
        }
        Command::Network(args) => {
            let ctx = args.context()?;
            per_stratum(&ctx, &args.stratum.0, |k| stage_network(&ctx, k))
        }
        Command::Cluster(args) => {
            let ctx = args.context()?;
            per_stratum(&ctx, &args.stratum.0, |k| stage_cluster(&ctx, k))
        }
        Command::Report(args) => {
            let ctx = args.stage.context()?;
            let cohort = load(&args.input, &ctx)?;
            per_stratum(&ctx, &args.stage.stratum.0, |k| stage_report(&ctx, k, &cohort))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(cli.log_level)
        .format_timestamp(None)
        .init();
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
