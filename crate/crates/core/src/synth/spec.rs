use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use chrono::NaiveDate;
use serde::Deserialize;

use crate::cohort::{Catalog, ConditionId, StudyWindow, SystemCategory};
use crate::error::{Error, Result};

/// One planted trajectory: member patients receive `conditions` in order.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchetypeSpec {
    pub id: String,
    /// Planted cluster this archetype belongs to.
    pub cluster: u32,
    pub conditions: Vec<ConditionId>,
    pub mean_gap_days: f64,
    #[serde(default)]
    pub sd_gap_days: f64,
    /// Probability a member expresses the full sequence; otherwise a proper
    /// prefix is expressed.
    #[serde(default = "one")]
    pub penetrance: f64,
    pub member_count: usize,
    /// Overrides the cohort-wide death probability for members.
    #[serde(default)]
    pub death_probability: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Demographics {
    pub male_fraction: f64,
    pub birth_start: NaiveDate,
    pub birth_end: NaiveDate,
    pub wimd_missing: f64,
    pub ethnicity_missing: f64,
    pub ethnicity: BTreeMap<String, f64>,
}

impl Default for Demographics {
    fn default() -> Self {
        Demographics {
            male_fraction: 0.5,
            birth_start: NaiveDate::from_ymd_opt(1935, 1, 1).unwrap(),
            birth_end: NaiveDate::from_ymd_opt(1985, 12, 31).unwrap(),
            wimd_missing: 0.05,
            ethnicity_missing: 0.1,
            ethnicity: [("asian", 0.04), ("black", 0.02), ("mixed", 0.02), ("other", 0.02), ("white", 0.9)]
                .into_iter()
                .map(|(k, v)| (k.to_string(), v))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Mortality {
    pub probability: f64,
    /// Relative weights of the recorded cause-of-death category.
    pub causes: BTreeMap<SystemCategory, f64>,
    /// Share of deaths with no recorded cause.
    pub cause_missing: f64,
}

impl Default for Mortality {
    fn default() -> Self {
        use SystemCategory::*;
        Mortality {
            probability: 0.1,
            causes: [
                (Circulatory, 0.35),
                (Neoplasms, 0.3),
                (Respiratory, 0.15),
                (Mental, 0.08),
                (Nervous, 0.07),
                (Digestive, 0.05),
            ]
            .into_iter()
            .collect(),
            cause_missing: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Stays {
    /// Mean number of hospital stays per patient (Poisson).
    pub rate: f64,
    /// Mean stay length in days (Poisson).
    pub mean_length_days: f64,
}

impl Default for Stays {
    fn default() -> Self {
        Stays {
            rate: 0.5,
            mean_length_days: 3.0,
        }
    }
}

/// Parameters of a synthetic cohort.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub seed: u64,
    /// Total patients; those not drawn into an archetype get background
    /// conditions only. Defaults to the sum of archetype member counts.
    #[serde(default)]
    pub patients: Option<usize>,
    #[serde(default = "default_start")]
    pub study_start: NaiveDate,
    #[serde(default = "default_end")]
    pub study_end: NaiveDate,
    /// Per-condition probability of a background diagnosis.
    #[serde(default)]
    pub background_prevalence: f64,
    /// Per-condition overrides of `background_prevalence`, keyed by condition id.
    #[serde(default)]
    pub background: BTreeMap<String, f64>,
    /// Mean number of extra random conditions per patient (Poisson).
    #[serde(default)]
    pub noise_rate: f64,
    /// Probability that a diagnosis is recorded in primary care.
    #[serde(default = "default_primary")]
    pub primary_care_share: f64,
    #[serde(default)]
    pub demographics: Demographics,
    #[serde(default)]
    pub mortality: Mortality,
    #[serde(default)]
    pub stays: Stays,
    #[serde(default)]
    pub archetypes: Vec<ArchetypeSpec>,
}

fn one() -> f64 {
    1.0
}

fn default_primary() -> f64 {
    0.7
}

fn default_start() -> NaiveDate {
    StudyWindow::default().start
}

fn default_end() -> NaiveDate {
    StudyWindow::default().end
}

fn probability(name: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} = {p} is not a probability")))
    }
}

fn weights(name: &str, w: impl IntoIterator<Item = f64>) -> Result<()> {
    let mut total = 0.0;
    for x in w {
        if !(x >= 0.0 && x.is_finite()) {
            return Err(Error::Config(format!("{name} has a negative or non-finite weight")));
        }
        total += x;
    }
    if total <= 0.0 {
        return Err(Error::Config(format!("{name} weights sum to zero")));
    }
    Ok(())
}

impl SynthSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("synth spec: {e}")))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingFile(path.into()),
            _ => Error::io(path, e),
        })?;
        Self::from_toml(&text)
    }

    pub fn window(&self) -> Result<StudyWindow> {
        StudyWindow::new(self.study_start, self.study_end)
    }

    pub fn total_patients(&self) -> usize {
        let members: usize = self.archetypes.iter().map(|a| a.member_count).sum();
        self.patients.unwrap_or(members)
    }

    /// Background probability for every catalog condition.
    pub fn background_for(&self, catalog: &Catalog) -> Result<BTreeMap<ConditionId, f64>> {
        let mut map: BTreeMap<ConditionId, f64> =
            catalog.ids().map(|id| (id, self.background_prevalence)).collect();
        for (key, &p) in &self.background {
            let id: ConditionId = key
                .parse()
                .map_err(|_| Error::Config(format!("background key `{key}` is not a condition id")))?;
            if !catalog.contains(id) {
                return Err(Error::Config(format!("background references unknown condition {id}")));
            }
            probability(&format!("background.{key}"), p)?;
            map.insert(id, p);
        }
        Ok(map)
    }

    pub fn validate(&self, catalog: &Catalog) -> Result<()> {
        let window = self.window()?;
        probability("background_prevalence", self.background_prevalence)?;
        self.background_for(catalog)?;
        probability("primary_care_share", self.primary_care_share)?;
        if !(self.noise_rate >= 0.0 && self.noise_rate.is_finite()) {
            return Err(Error::Config("noise_rate must be non-negative".into()));
        }

        let d = &self.demographics;
        probability("demographics.male_fraction", d.male_fraction)?;
        probability("demographics.wimd_missing", d.wimd_missing)?;
        probability("demographics.ethnicity_missing", d.ethnicity_missing)?;
        if d.birth_end < d.birth_start {
            return Err(Error::Config("demographics.birth_end precedes birth_start".into()));
        }
        if d.birth_end >= window.start {
            return Err(Error::Config(
                "demographics.birth_end must precede study_start".into(),
            ));
        }
        if d.ethnicity_missing < 1.0 {
            weights("demographics.ethnicity", d.ethnicity.values().copied())?;
        }

        let m = &self.mortality;
        probability("mortality.probability", m.probability)?;
        probability("mortality.cause_missing", m.cause_missing)?;
        if m.cause_missing < 1.0 {
            weights("mortality.causes", m.causes.values().copied())?;
        }
        if !(self.stays.rate >= 0.0 && self.stays.mean_length_days >= 0.0) {
            return Err(Error::Config("stays parameters must be non-negative".into()));
        }

        let mut ids = HashSet::new();
        for a in &self.archetypes {
            let name = format!("archetype `{}`", a.id);
            if !ids.insert(a.id.as_str()) {
                return Err(Error::Config(format!("duplicate {name}")));
            }
            if a.conditions.len() < 3 {
                return Err(Error::Config(format!("{name} needs at least 3 conditions")));
            }
            let distinct: HashSet<_> = a.conditions.iter().collect();
            if distinct.len() != a.conditions.len() {
                return Err(Error::Config(format!("{name} repeats a condition")));
            }
            if let Some(c) = a.conditions.iter().find(|c| !catalog.contains(**c)) {
                return Err(Error::Config(format!("{name} references unknown condition {c}")));
            }
            if !(a.penetrance > 0.0 && a.penetrance <= 1.0) {
                return Err(Error::Config(format!("{name} penetrance must be in (0, 1]")));
            }
            if !(a.mean_gap_days > 0.0 && a.sd_gap_days >= 0.0) {
                return Err(Error::Config(format!("{name} gaps must be positive")));
            }
            if let Some(p) = a.death_probability {
                probability(&format!("{name} death_probability"), p)?;
            }
        }
        let members: usize = self.archetypes.iter().map(|a| a.member_count).sum();
        if self.total_patients() < members {
            return Err(Error::Config(format!(
                "patients = {} is fewer than the {members} archetype members",
                self.total_patients()
            )));
        }
        if self.total_patients() == 0 {
            return Err(Error::Config("synthetic cohort has no patients".into()));
        }
        Ok(())
    }
}
