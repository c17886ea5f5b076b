//! Stage orchestration. Every stage reads its inputs from the artifacts
//! persisted by earlier stages, so stages can be re-run one at a time and the
//! full pipeline is just the stages chained together.

mod artifacts;
mod manifest;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

pub use artifacts::stratum_file;
pub use manifest::{ArtifactRecord, Manifest, MANIFEST_FILE};

use crate::cluster::select_k_and_cluster;
use crate::cohort::{
    catalog_table, descriptive_stats, first_diagnosis_sequences, load_catalog, load_cohort, stratify,
    Catalog, Cohort, CohortPaths, StratumKey,
};
use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::io::{partial_path, Table};
use crate::pairstats::significant_pairs;
use crate::report::{
    cause_of_death_table, cluster_conditions_table, cluster_report, cluster_report_table,
    pair_timing_stats, pair_timing_table,
};
use crate::trajectory::mine_trajectories;
use crate::trajnet::{build_network, similarity_matrix};

/// Stage names in execution order. `describe` runs once per cohort; the rest
/// produce one set of artifacts per stratum.
pub const STAGES: [&str; 8] = [
    "describe",
    "stratify",
    "sequences",
    "pairs",
    "trajectories",
    "network",
    "cluster",
    "report",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    Csv,
    /// CSV plus a JSON mirror of every table.
    Json,
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(format!("unknown format `{other}` (expected csv or json)")),
        }
    }
}

impl fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        })
    }
}

/// Settings shared by every stage invocation.
#[derive(Debug, Clone)]
pub struct StageContext {
    pub config: PipelineConfig,
    pub out_dir: PathBuf,
    pub format: OutputFormat,
    config_hash: String,
}

impl StageContext {
    pub fn new(config: PipelineConfig, out_dir: impl Into<PathBuf>, format: OutputFormat) -> Result<Self> {
        config.validate()?;
        let out_dir = out_dir.into();
        std::fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;
        Ok(StageContext {
            config_hash: config.hash(),
            config,
            out_dir,
            format,
        })
    }

    pub fn config_hash(&self) -> &str {
        &self.config_hash
    }

    /// Records `records` in the output directory's manifest.
    pub fn record(&self, records: Vec<ArtifactRecord>) -> Result<Manifest> {
        Manifest::update(&self.out_dir, &self.config_hash, records)
    }
}

/// Files of one stage, first written with a `.partial` suffix and renamed
/// into place together once the stage has succeeded.
struct StageOutput<'a> {
    ctx: &'a StageContext,
    stage: &'static str,
    stratum: Option<StratumKey>,
    pending: Vec<(PathBuf, ArtifactRecord)>,
}

impl<'a> StageOutput<'a> {
    fn new(ctx: &'a StageContext, stage: &'static str, stratum: Option<StratumKey>) -> Self {
        StageOutput {
            ctx,
            stage,
            stratum,
            pending: Vec::new(),
        }
    }

    fn table(&mut self, file: String, table: &Table) -> Result<()> {
        self.bytes(&file, &table.to_csv()?, table.len())?;
        if self.ctx.format == OutputFormat::Json {
            let stem = file.strip_suffix(".csv").unwrap_or(&file);
            self.bytes(&format!("{stem}.json"), &table.to_json()?, table.len())?;
        }
        Ok(())
    }

    fn bytes(&mut self, file: &str, bytes: &[u8], rows: usize) -> Result<()> {
        let path = self.ctx.out_dir.join(file);
        let partial = partial_path(&path);
        std::fs::write(&partial, bytes).map_err(|e| Error::io(&partial, e))?;
        self.pending.push((
            path,
            ArtifactRecord {
                stage: self.stage.to_string(),
                stratum: self.stratum.map(|k| k.label()),
                file: file.to_string(),
                rows,
                config_hash: self.ctx.config_hash.clone(),
            },
        ));
        Ok(())
    }

    fn commit(self) -> Result<Vec<ArtifactRecord>> {
        let mut records = Vec::with_capacity(self.pending.len());
        for (path, record) in self.pending {
            std::fs::rename(partial_path(&path), &path).map_err(|e| Error::io(&path, e))?;
            records.push(record);
        }
        Ok(records)
    }
}

fn staged<T>(stage: &'static str, stratum: Option<StratumKey>, f: impl FnOnce() -> Result<T>) -> Result<T> {
    log::info!(
        "stage {stage}{}",
        stratum.map(|k| format!(" ({k})")).unwrap_or_default()
    );
    f().map_err(|e| e.in_stage(stage, stratum.map(|k| k.label())))
}

/// Loads the cohort in `input` restricted to the configured study window.
pub fn load_input_cohort(input: &Path, config: &PipelineConfig) -> Result<Cohort> {
    staged("load", None, || load_cohort(&CohortPaths::in_dir(input), config.window()))
}

fn output_catalog(ctx: &StageContext) -> Result<Catalog> {
    let path = ctx.out_dir.join("catalog.csv");
    if !path.is_file() {
        return Err(Error::MissingArtifact(path));
    }
    load_catalog(&path)
}

/// Descriptive statistics, stratum membership and first-diagnosis sequences.
pub fn stage_describe(ctx: &StageContext, cohort: &Cohort) -> Result<Vec<ArtifactRecord>> {
    staged("describe", None, || {
        let config = &ctx.config;
        let sequences = first_diagnosis_sequences(cohort);
        let strata = stratify(cohort, &sequences, config.age_threshold, config.age_anchor);
        let report = descriptive_stats(cohort, &sequences, &strata);

        let mut describe = StageOutput::new(ctx, "describe", None);
        describe.table("descriptive_stats.csv".into(), &artifacts::descriptive_table(&report))?;
        describe.table("catalog.csv".into(), &catalog_table(cohort.catalog()))?;
        let mut outputs = vec![describe];
        for stratum in &strata.strata {
            let mut s = StageOutput::new(ctx, "stratify", Some(stratum.key));
            s.table(stratum_file("stratum", stratum.key), &artifacts::stratum_table(stratum, &strata))?;
            let mut q = StageOutput::new(ctx, "sequences", Some(stratum.key));
            q.table(stratum_file("sequences", stratum.key), &artifacts::sequences_table(stratum, &sequences))?;
            outputs.push(s);
            outputs.push(q);
        }
        let mut records = Vec::new();
        for o in outputs {
            records.extend(o.commit()?);
        }
        Ok(records)
    })
}

pub fn stage_pairs(ctx: &StageContext, key: StratumKey) -> Result<Vec<ArtifactRecord>> {
    staged("pairs", Some(key), || {
        let (stratum, _) = artifacts::read_stratum(&ctx.out_dir, key)?;
        let sequences = artifacts::read_sequences(&ctx.out_dir, &stratum)?;
        let pairs = significant_pairs(&stratum, &sequences, &ctx.config)?;
        log::info!(
            "{key}: {} candidate pairs, {} significant",
            pairs.len(),
            pairs.iter().filter(|p| p.significant).count()
        );
        let mut out = StageOutput::new(ctx, "pairs", Some(key));
        out.table(stratum_file("pairs", key), &artifacts::pairs_table(&pairs))?;
        out.commit()
    })
}

pub fn stage_trajectories(ctx: &StageContext, key: StratumKey) -> Result<Vec<ArtifactRecord>> {
    staged("trajectories", Some(key), || {
        let (stratum, _) = artifacts::read_stratum(&ctx.out_dir, key)?;
        let sequences = artifacts::read_sequences(&ctx.out_dir, &stratum)?;
        let pairs = artifacts::read_pairs(&ctx.out_dir, key)?;
        let trajectories = mine_trajectories(&stratum, &sequences, &pairs, &ctx.config);
        if trajectories.is_empty() {
            log::warn!("{key}: no trajectories retained");
        }
        let mut out = StageOutput::new(ctx, "trajectories", Some(key));
        out.table(
            stratum_file("trajectories", key),
            &artifacts::trajectories_table(&trajectories, ctx.config.traj_length),
        )?;
        out.table(stratum_file("trajectory_members", key), &artifacts::members_table(&trajectories))?;
        out.commit()
    })
}

pub fn stage_network(ctx: &StageContext, key: StratumKey) -> Result<Vec<ArtifactRecord>> {
    staged("network", Some(key), || {
        let trajectories = artifacts::read_trajectories(&ctx.out_dir, key)?;
        let catalog = output_catalog(ctx)?;
        let network = build_network(&trajectories, ctx.config.edge_weighting)?;
        let conditions: Vec<_> = trajectories.iter().map(|t| t.conditions.clone()).collect();
        let matrix = similarity_matrix(&network, &conditions, ctx.config.clamp_similarity)?;

        let mut out = StageOutput::new(ctx, "network", Some(key));
        let dot = network.to_dot(&catalog);
        out.bytes(
            &format!("network_{}.dot", key.label()),
            dot.as_bytes(),
            network.nodes().len() + network.edges().len(),
        )?;
        out.table(stratum_file("network_edges", key), &artifacts::edges_table(&network)?)?;
        out.table(stratum_file("similarity_matrix", key), &artifacts::similarity_table(&matrix))?;
        out.commit()
    })
}

pub fn stage_cluster(ctx: &StageContext, key: StratumKey) -> Result<Vec<ArtifactRecord>> {
    staged("cluster", Some(key), || {
        let matrix = artifacts::read_similarity(&ctx.out_dir, key)?;
        let trajectories = artifacts::read_trajectories(&ctx.out_dir, key)?;
        if matrix.order() != trajectories.len() {
            return Err(Error::invalid(format!(
                "similarity matrix has {} rows but there are {} trajectories",
                matrix.order(),
                trajectories.len()
            )));
        }
        let c = &ctx.config;
        let result = select_k_and_cluster(&matrix, c.k_min, c.k_max, c.seed, c.kmeans_restarts)?;
        log::info!("{key}: selected k = {}", result.k_selected);

        let mut out = StageOutput::new(ctx, "cluster", Some(key));
        out.table(stratum_file("ch_scores", key), &artifacts::ch_table(&result))?;
        out.table(
            stratum_file("clusters", key),
            &artifacts::clusters_table(&trajectories, &result.labels, c.traj_length),
        )?;
        out.table(stratum_file("embedding", key), &artifacts::embedding_table(&result))?;
        out.commit()
    })
}

pub fn stage_report(ctx: &StageContext, key: StratumKey, cohort: &Cohort) -> Result<Vec<ArtifactRecord>> {
    staged("report", Some(key), || {
        let dir = &ctx.out_dir;
        let trajectories = artifacts::read_trajectories(dir, key)?;
        let labels = artifacts::read_cluster_labels(dir, key, &trajectories)?;
        let (stratum, _) = artifacts::read_stratum(dir, key)?;
        let sequences = artifacts::read_sequences(dir, &stratum)?;
        let pairs = artifacts::read_pairs(dir, key)?;
        let reports = cluster_report(&labels, &trajectories, cohort, &sequences, &ctx.config)?;
        let mut timing = Vec::new();
        for p in pairs.iter().filter(|p| p.significant) {
            let stats = pair_timing_stats(p.c1, p.c2, &sequences, &stratum.patient_ids)?;
            timing.push((p.c1, p.c2, stats));
        }

        let mut out = StageOutput::new(ctx, "report", Some(key));
        out.table(stratum_file("cluster_report", key), &cluster_report_table(&reports))?;
        out.table(
            stratum_file("cluster_conditions", key),
            &cluster_conditions_table(&reports, cohort.catalog()),
        )?;
        out.table(stratum_file("cause_of_death", key), &cause_of_death_table(&reports))?;
        out.table(stratum_file("pair_timing", key), &pair_timing_table(&timing))?;
        out.commit()
    })
}

/// Runs every per-stratum stage after `describe`.
pub fn run_stratum(ctx: &StageContext, key: StratumKey, cohort: &Cohort) -> Result<Vec<ArtifactRecord>> {
    let mut records = stage_pairs(ctx, key)?;
    records.extend(stage_trajectories(ctx, key)?);
    records.extend(stage_network(ctx, key)?);
    records.extend(stage_cluster(ctx, key)?);
    records.extend(stage_report(ctx, key, cohort)?);
    Ok(records)
}

#[derive(Debug)]
pub struct PipelineOutcome {
    pub manifest: Manifest,
    /// Strata whose stages failed; the others completed.
    pub failures: Vec<(StratumKey, Error)>,
}

impl PipelineOutcome {
    pub fn is_success(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Loads the cohort, describes it and runs the per-stratum stages for
/// `strata` in parallel. A failing stratum does not stop the others.
pub fn run_pipeline(
    config: &PipelineConfig,
    input_dir: &Path,
    out_dir: &Path,
    strata: &[StratumKey],
    format: OutputFormat,
) -> Result<PipelineOutcome> {
    let ctx = StageContext::new(config.clone(), out_dir, format)?;
    let cohort = load_input_cohort(input_dir, config)?;
    let mut records = stage_describe(&ctx, &cohort)?;

    let results: Vec<(StratumKey, Result<Vec<ArtifactRecord>>)> = std::thread::scope(|scope| {
        let handles: Vec<_> = strata
            .iter()
            .map(|&key| {
                let (ctx, cohort) = (&ctx, &cohort);
                (key, scope.spawn(move || run_stratum(ctx, key, cohort)))
            })
            .collect();
        handles
            .into_iter()
            .map(|(key, h)| {
                let result = h.join().unwrap_or_else(|_| {
                    Err(Error::invalid(format!("worker for {key} panicked")))
                });
                (key, result)
            })
            .collect()
    });

    let mut failures = Vec::new();
    for (key, result) in results {
        match result {
            Ok(r) => records.extend(r),
            Err(e) => {
                log::error!("{e}");
                failures.push((key, e));
            }
        }
    }
    let manifest = ctx.record(records)?;
    Ok(PipelineOutcome { manifest, failures })
}
