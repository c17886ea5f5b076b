//! Pipeline configuration: one flat set of thresholds read from a `key = value` file.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDate;
use sha2::{Digest, Sha256};

use crate::cohort::{AgeAnchor, StudyWindow};
use crate::error::{Error, Result};
use crate::io::DATE_FORMAT;

/// Sidedness of the binomial direction test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum DirectionTest {
    #[default]
    TwoSided,
    OneSided,
}

impl DirectionTest {
    pub fn as_str(self) -> &'static str {
        match self {
            DirectionTest::TwoSided => "two_sided",
            DirectionTest::OneSided => "one_sided",
        }
    }
}

impl FromStr for DirectionTest {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "two_sided" => Ok(DirectionTest::TwoSided),
            "one_sided" => Ok(DirectionTest::OneSided),
            other => Err(format!("expected two_sided|one_sided, got `{other}`")),
        }
    }
}

/// How trajectory-network edge frequencies are accumulated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum EdgeWeighting {
    /// One count per retained trajectory in which the two conditions are adjacent.
    #[default]
    Trajectory,
    /// Adjacency counts weighted by trajectory support.
    Patient,
}

impl EdgeWeighting {
    pub fn as_str(self) -> &'static str {
        match self {
            EdgeWeighting::Trajectory => "trajectory",
            EdgeWeighting::Patient => "patient",
        }
    }
}

impl FromStr for EdgeWeighting {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "trajectory" => Ok(EdgeWeighting::Trajectory),
            "patient" => Ok(EdgeWeighting::Patient),
            other => Err(format!("expected trajectory|patient, got `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub study_start: NaiveDate,
    pub study_end: NaiveDate,
    pub age_threshold: u32,
    pub age_anchor: AgeAnchor,
    pub min_pair_patients: usize,
    pub min_separation_days: i64,
    pub alpha: f64,
    pub direction_alpha: f64,
    pub direction_test: DirectionTest,
    pub strict_table: bool,
    pub traj_length: usize,
    pub min_traj_patients: usize,
    pub traj_min_gap_days: i64,
    pub require_all_pairs: bool,
    pub edge_weighting: EdgeWeighting,
    pub clamp_similarity: bool,
    pub k_min: usize,
    pub k_max: usize,
    pub kmeans_restarts: usize,
    pub seed: u64,
    pub long_stay_days: i64,
    pub report_long_stay: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let window = StudyWindow::default();
        PipelineConfig {
            study_start: window.start,
            study_end: window.end,
            age_threshold: 45,
            age_anchor: AgeAnchor::MedianEvent,
            min_pair_patients: 10,
            min_separation_days: 183,
            alpha: 0.001,
            direction_alpha: 0.05,
            direction_test: DirectionTest::TwoSided,
            strict_table: false,
            traj_length: 3,
            min_traj_patients: 10,
            traj_min_gap_days: 0,
            require_all_pairs: false,
            edge_weighting: EdgeWeighting::Trajectory,
            clamp_similarity: true,
            k_min: 2,
            k_max: 10,
            kmeans_restarts: 10,
            seed: 42,
            long_stay_days: 4,
            report_long_stay: true,
        }
    }
}

fn parse_value<T>(key: &str, line: usize, raw: &str) -> Result<T>
where
    T: FromStr,
    T::Err: std::fmt::Display,
{
    raw.parse()
        .map_err(|e| Error::Config(format!("line {line}: `{key}`: {e}")))
}

fn parse_date(key: &str, line: usize, raw: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(raw, DATE_FORMAT)
        .map_err(|e| Error::Config(format!("line {line}: `{key}`: {e}")))
}

impl PipelineConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        text.parse()
    }

    /// Applies one `key = value` assignment; unknown keys are rejected.
    pub fn set(&mut self, key: &str, value: &str, line: usize) -> Result<()> {
        let v = value.trim().trim_matches('"');
        match key {
            "study_start" => self.study_start = parse_date(key, line, v)?,
            "study_end" => self.study_end = parse_date(key, line, v)?,
            "age_threshold" => self.age_threshold = parse_value(key, line, v)?,
            "age_anchor" => self.age_anchor = parse_value(key, line, v)?,
            "min_pair_patients" => self.min_pair_patients = parse_value(key, line, v)?,
            "min_separation_days" => self.min_separation_days = parse_value(key, line, v)?,
            "alpha" => self.alpha = parse_value(key, line, v)?,
            "direction_alpha" => self.direction_alpha = parse_value(key, line, v)?,
            "direction_test" => self.direction_test = parse_value(key, line, v)?,
            "strict_table" => self.strict_table = parse_value(key, line, v)?,
            "traj_length" => self.traj_length = parse_value(key, line, v)?,
            "min_traj_patients" => self.min_traj_patients = parse_value(key, line, v)?,
            "traj_min_gap_days" => self.traj_min_gap_days = parse_value(key, line, v)?,
            "require_all_pairs" => self.require_all_pairs = parse_value(key, line, v)?,
            "edge_weighting" => self.edge_weighting = parse_value(key, line, v)?,
            "clamp_similarity" => self.clamp_similarity = parse_value(key, line, v)?,
            "k_min" => self.k_min = parse_value(key, line, v)?,
            "k_max" => self.k_max = parse_value(key, line, v)?,
            "kmeans_restarts" => self.kmeans_restarts = parse_value(key, line, v)?,
            "seed" => self.seed = parse_value(key, line, v)?,
            "long_stay_days" => self.long_stay_days = parse_value(key, line, v)?,
            "report_long_stay" => self.report_long_stay = parse_value(key, line, v)?,
            other => return Err(Error::Config(format!("line {line}: unknown key `{other}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        StudyWindow::new(self.study_start, self.study_end)?;
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return bad(format!("alpha must lie in (0, 1], got {}", self.alpha));
        }
        if !(self.direction_alpha > 0.0 && self.direction_alpha <= 1.0) {
            return bad(format!(
                "direction_alpha must lie in (0, 1], got {}",
                self.direction_alpha
            ));
        }
        if self.min_pair_patients == 0 {
            return bad("min_pair_patients must be at least 1".into());
        }
        if self.min_separation_days < 0 || self.traj_min_gap_days < 0 {
            return bad("day thresholds must be non-negative".into());
        }
        if self.traj_length < 2 {
            return bad(format!("traj_length must be at least 2, got {}", self.traj_length));
        }
        if self.k_min < 2 || self.k_max < self.k_min {
            return bad(format!(
                "cluster sweep requires 2 <= k_min <= k_max, got {}..{}",
                self.k_min, self.k_max
            ));
        }
        if self.kmeans_restarts == 0 {
            return bad("kmeans_restarts must be at least 1".into());
        }
        if self.long_stay_days < 0 {
            return bad("long_stay_days must be non-negative".into());
        }
        Ok(())
    }

    pub fn window(&self) -> StudyWindow {
        StudyWindow {
            start: self.study_start,
            end: self.study_end,
        }
    }

    /// Canonical `key = value` rendering of every field, in a fixed order.
    pub fn to_canonical_string(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv("study_start", self.study_start.format(DATE_FORMAT).to_string());
        kv("study_end", self.study_end.format(DATE_FORMAT).to_string());
        kv("age_threshold", self.age_threshold.to_string());
        kv("age_anchor", self.age_anchor.as_str().into());
        kv("min_pair_patients", self.min_pair_patients.to_string());
        kv("min_separation_days", self.min_separation_days.to_string());
        kv("alpha", format!("{:?}", self.alpha));
        kv("direction_alpha", format!("{:?}", self.direction_alpha));
        kv("direction_test", self.direction_test.as_str().into());
        kv("strict_table", self.strict_table.to_string());
        kv("traj_length", self.traj_length.to_string());
        kv("min_traj_patients", self.min_traj_patients.to_string());
        kv("traj_min_gap_days", self.traj_min_gap_days.to_string());
        kv("require_all_pairs", self.require_all_pairs.to_string());
        kv("edge_weighting", self.edge_weighting.as_str().into());
        kv("clamp_similarity", self.clamp_similarity.to_string());
        kv("k_min", self.k_min.to_string());
        kv("k_max", self.k_max.to_string());
        kv("kmeans_restarts", self.kmeans_restarts.to_string());
        kv("seed", self.seed.to_string());
        kv("long_stay_days", self.long_stay_days.to_string());
        kv("report_long_stay", self.report_long_stay.to_string());
        out
    }

    /// SHA-256 of the canonical rendering, hex encoded.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_canonical_string().as_bytes());
        digest.iter().fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }
}

impl FromStr for PipelineConfig {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut config = PipelineConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", i + 1)))?;
            config.set(key.trim(), value, i + 1)?;
        }
        config.validate()?;
        Ok(config)
    }
}
