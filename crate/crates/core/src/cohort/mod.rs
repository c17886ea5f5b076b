//! Longitudinal diagnosis records: the condition catalog, patients, dated
//! diagnosis events, hospital stays and the derived per-patient views.

mod describe;
mod load;
mod sequences;
mod strata;
mod write;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use describe::{descriptive_stats, DescriptiveReport, SubgroupKind, SubgroupStats};
pub use load::{load_cohort, CohortPaths};
pub(crate) use load::load_catalog;
pub use write::{catalog_table, diagnoses_table, patients_table, stays_table, write_cohort_files};
pub use sequences::{first_diagnosis_sequences, FirstDiagnosisSequence, SequenceEntry, Sequences};
pub use strata::{
    age_in_years, stratify, AgeAnchor, AgeAssignment, AgeGroup, Stratification, Stratum,
    StratumKey,
};

/// Body-system category of a long-term condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SystemCategory {
    Blood,
    Circulatory,
    Digestive,
    Ear,
    Endocrine,
    Eye,
    Genitourinary,
    Mental,
    Musculoskeletal,
    Neoplasms,
    Nervous,
    Respiratory,
    Skin,
}

impl SystemCategory {
    /// All categories in alphabetical order.
    pub const ALL: [SystemCategory; 13] = [
        SystemCategory::Blood,
        SystemCategory::Circulatory,
        SystemCategory::Digestive,
        SystemCategory::Ear,
        SystemCategory::Endocrine,
        SystemCategory::Eye,
        SystemCategory::Genitourinary,
        SystemCategory::Mental,
        SystemCategory::Musculoskeletal,
        SystemCategory::Neoplasms,
        SystemCategory::Nervous,
        SystemCategory::Respiratory,
        SystemCategory::Skin,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SystemCategory::Blood => "blood",
            SystemCategory::Circulatory => "circulatory",
            SystemCategory::Digestive => "digestive",
            SystemCategory::Ear => "ear",
            SystemCategory::Endocrine => "endocrine",
            SystemCategory::Eye => "eye",
            SystemCategory::Genitourinary => "genitourinary",
            SystemCategory::Mental => "mental",
            SystemCategory::Musculoskeletal => "musculoskeletal",
            SystemCategory::Neoplasms => "neoplasms",
            SystemCategory::Nervous => "nervous",
            SystemCategory::Respiratory => "respiratory",
            SystemCategory::Skin => "skin",
        }
    }
}

impl fmt::Display for SystemCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SystemCategory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        SystemCategory::ALL
            .into_iter()
            .find(|c| c.as_str() == lower)
            .ok_or_else(|| format!("unknown system category `{s}`"))
    }
}

/// Catalog key of a long-term condition.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct ConditionId(pub u16);

impl fmt::Display for ConditionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl FromStr for ConditionId {
    type Err = std::num::ParseIntError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.trim().parse().map(ConditionId)
    }
}

pub type PatientId = String;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConditionDef {
    pub id: ConditionId,
    pub name: String,
    pub system: SystemCategory,
}

/// The set of long-term conditions under study, keyed by id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Catalog {
    conditions: BTreeMap<ConditionId, ConditionDef>,
}

impl Catalog {
    pub fn new(defs: impl IntoIterator<Item = ConditionDef>) -> Result<Self> {
        let mut conditions = BTreeMap::new();
        for def in defs {
            let id = def.id;
            if conditions.insert(id, def).is_some() {
                return Err(Error::invalid(format!("duplicate condition_id {id} in catalog")));
            }
        }
        if conditions.len() < 2 {
            return Err(Error::invalid("catalog must contain at least 2 conditions"));
        }
        Ok(Catalog { conditions })
    }

    /// The 40 long-term conditions with their body-system categorisation,
    /// numbered 1..=40 in alphabetical order.
    pub fn standard() -> Self {
        use SystemCategory::*;
        const LTCS: [(&str, SystemCategory); 40] = [
            ("Addisons Disease", Endocrine),
            ("Anaemia", Blood),
            ("Barretts Oesophagus", Digestive),
            ("Bronchiectasis", Respiratory),
            ("Cancer", Neoplasms),
            ("Cardiac Arrhythmias", Circulatory),
            ("Cerebral Palsy", Nervous),
            ("Chronic Airway Diseases", Respiratory),
            ("Chronic Arthritis", Musculoskeletal),
            ("Chronic Constipation", Digestive),
            ("Chronic Diarrhoea", Digestive),
            ("Chronic Kidney Disease", Genitourinary),
            ("Chronic Pain Conditions", Musculoskeletal),
            ("Chronic Pneumonia", Respiratory),
            ("Cirrhosis", Digestive),
            ("Coronary Heart Disease", Circulatory),
            ("Dementia", Mental),
            ("Diabetes", Endocrine),
            ("Dysphagia", Digestive),
            ("Epilepsy", Nervous),
            ("Heart Failure", Circulatory),
            ("Hearing Loss", Ear),
            ("Hypertension", Circulatory),
            ("Inflammatory Bowel Disease", Digestive),
            ("Insomnia", Nervous),
            ("Interstitial Lung Disease", Respiratory),
            ("Mental Illness", Mental),
            ("Menopausal And Perimenopausal", Genitourinary),
            ("Multiple Sclerosis", Nervous),
            ("Neuropathic Pain", Nervous),
            ("Osteoporosis", Musculoskeletal),
            ("Parkinsons", Nervous),
            ("Peripheral Vascular Disease", Circulatory),
            ("Polycystic Ovary Syndrome", Endocrine),
            ("Psoriasis", Skin),
            ("Reflux Disorders", Digestive),
            ("Stroke", Nervous),
            ("Thyroid Disorders", Endocrine),
            ("Tourette", Mental),
            ("Visual Impairment", Eye),
        ];
        let defs = LTCS.iter().enumerate().map(|(i, (name, system))| ConditionDef {
            id: ConditionId(i as u16 + 1),
            name: (*name).to_string(),
            system: *system,
        });
        Catalog::new(defs).expect("built-in catalog is valid")
    }

    pub fn get(&self, id: ConditionId) -> Option<&ConditionDef> {
        self.conditions.get(&id)
    }

    pub fn contains(&self, id: ConditionId) -> bool {
        self.conditions.contains_key(&id)
    }

    pub fn system(&self, id: ConditionId) -> Option<SystemCategory> {
        self.get(id).map(|d| d.system)
    }

    pub fn name(&self, id: ConditionId) -> Option<&str> {
        self.get(id).map(|d| d.name.as_str())
    }

    pub fn iter(&self) -> impl Iterator<Item = &ConditionDef> {
        self.conditions.values()
    }

    pub fn ids(&self) -> impl Iterator<Item = ConditionId> + '_ {
        self.conditions.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.conditions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.conditions.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sex {
    Male,
    Female,
}

impl Sex {
    pub fn as_str(self) -> &'static str {
        match self {
            Sex::Male => "male",
            Sex::Female => "female",
        }
    }
}

impl fmt::Display for Sex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Sex {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "male" | "m" => Ok(Sex::Male),
            "female" | "f" => Ok(Sex::Female),
            other => Err(format!("unknown sex `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Patient {
    pub id: PatientId,
    pub sex: Sex,
    pub birth_date: NaiveDate,
    pub death_date: Option<NaiveDate>,
    pub cause_of_death: Option<SystemCategory>,
    pub wimd_quintile: Option<u8>,
    pub ethnicity: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Source {
    PrimaryCare,
    SecondaryCare,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::PrimaryCare => "primary",
            Source::SecondaryCare => "secondary",
        }
    }
}

impl FromStr for Source {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "primary" | "primary_care" => Ok(Source::PrimaryCare),
            "secondary" | "secondary_care" => Ok(Source::SecondaryCare),
            other => Err(format!("unknown source `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiagnosisEvent {
    pub patient_id: PatientId,
    pub condition: ConditionId,
    pub date: NaiveDate,
    pub source: Source,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HospitalStay {
    pub patient_id: PatientId,
    pub admission: NaiveDate,
    pub discharge: NaiveDate,
}

impl HospitalStay {
    pub fn length_days(&self) -> i64 {
        (self.discharge - self.admission).num_days()
    }
}

/// Inclusive calendar window of the study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StudyWindow {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl StudyWindow {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Result<Self> {
        if end < start {
            return Err(Error::Config(format!("study_end {end} precedes study_start {start}")));
        }
        Ok(StudyWindow { start, end })
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        self.start <= date && date <= self.end
    }
}

impl Default for StudyWindow {
    fn default() -> Self {
        StudyWindow {
            start: NaiveDate::from_ymd_opt(2000, 1, 1).unwrap(),
            end: NaiveDate::from_ymd_opt(2021, 12, 31).unwrap(),
        }
    }
}

/// A validated, immutable cohort.
#[derive(Debug, Clone)]
pub struct Cohort {
    catalog: Catalog,
    window: StudyWindow,
    patients: Vec<Patient>,
    index: HashMap<PatientId, usize>,
    events: Vec<DiagnosisEvent>,
    stays: Option<Vec<HospitalStay>>,
    dropped_events: usize,
}

impl Cohort {
    /// Validates keys and invariants; events outside `window` are dropped and counted.
    pub fn new(
        catalog: Catalog,
        window: StudyWindow,
        mut patients: Vec<Patient>,
        events: Vec<DiagnosisEvent>,
        stays: Option<Vec<HospitalStay>>,
    ) -> Result<Self> {
        patients.sort_by(|a, b| a.id.cmp(&b.id));
        let mut index = HashMap::with_capacity(patients.len());
        for (i, p) in patients.iter().enumerate() {
            validate_patient(p)?;
            if index.insert(p.id.clone(), i).is_some() {
                return Err(Error::invalid(format!("duplicate patient_id `{}`", p.id)));
            }
        }
        let mut kept = Vec::with_capacity(events.len());
        let mut dropped_events = 0;
        for e in events {
            if !index.contains_key(&e.patient_id) {
                return Err(Error::invalid(format!(
                    "diagnosis references unknown patient `{}`",
                    e.patient_id
                )));
            }
            if !catalog.contains(e.condition) {
                return Err(Error::invalid(format!(
                    "diagnosis references unknown condition {}",
                    e.condition
                )));
            }
            if window.contains(e.date) {
                kept.push(e);
            } else {
                dropped_events += 1;
            }
        }
        if let Some(stays) = &stays {
            for s in stays {
                if !index.contains_key(&s.patient_id) {
                    return Err(Error::invalid(format!(
                        "hospital stay references unknown patient `{}`",
                        s.patient_id
                    )));
                }
                if s.discharge < s.admission {
                    return Err(Error::invalid(format!(
                        "hospital stay for `{}` discharged before admission",
                        s.patient_id
                    )));
                }
            }
        }
        if dropped_events > 0 {
            log::warn!("{dropped_events} diagnosis event(s) outside the study window were dropped");
        }
        Ok(Cohort {
            catalog,
            window,
            patients,
            index,
            events: kept,
            stays,
            dropped_events,
        })
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    pub fn window(&self) -> StudyWindow {
        self.window
    }

    /// Patients sorted by id.
    pub fn patients(&self) -> &[Patient] {
        &self.patients
    }

    pub fn patient(&self, id: &str) -> Option<&Patient> {
        self.index.get(id).map(|&i| &self.patients[i])
    }

    pub fn events(&self) -> &[DiagnosisEvent] {
        &self.events
    }

    pub fn stays(&self) -> Option<&[HospitalStay]> {
        self.stays.as_deref()
    }

    /// Number of events discarded for falling outside the study window.
    pub fn dropped_events(&self) -> usize {
        self.dropped_events
    }

    pub fn len(&self) -> usize {
        self.patients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patients.is_empty()
    }
}

pub(crate) fn validate_patient(p: &Patient) -> Result<()> {
    if let Some(death) = p.death_date {
        if death < p.birth_date {
            return Err(Error::invalid(format!(
                "patient `{}` has death_date before birth_date",
                p.id
            )));
        }
    }
    if let Some(q) = p.wimd_quintile {
        if !(1..=5).contains(&q) {
            return Err(Error::invalid(format!(
                "patient `{}` has wimd_quintile {q} outside 1..=5",
                p.id
            )));
        }
    }
    Ok(())
}
