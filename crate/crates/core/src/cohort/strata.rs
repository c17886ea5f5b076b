use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{Cohort, PatientId, Sequences, Sex};

/// Which date fixes a patient's age for stratification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AgeAnchor {
    /// Median first-diagnosis date; the earlier middle date for even counts.
    #[default]
    MedianEvent,
    AgeAtStudyStart,
    AgeAtFirstEvent,
}

impl AgeAnchor {
    pub fn as_str(self) -> &'static str {
        match self {
            AgeAnchor::MedianEvent => "median_event",
            AgeAnchor::AgeAtStudyStart => "age_at_study_start",
            AgeAnchor::AgeAtFirstEvent => "age_at_first_event",
        }
    }
}

impl FromStr for AgeAnchor {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "median_event" => Ok(AgeAnchor::MedianEvent),
            "age_at_study_start" | "study_start" => Ok(AgeAnchor::AgeAtStudyStart),
            "age_at_first_event" | "first_event" => Ok(AgeAnchor::AgeAtFirstEvent),
            other => Err(format!("unknown age anchor `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AgeGroup {
    Under45,
    Ge45,
}

impl AgeGroup {
    pub fn as_str(self) -> &'static str {
        match self {
            AgeGroup::Under45 => "lt45",
            AgeGroup::Ge45 => "ge45",
        }
    }
}

impl fmt::Display for AgeGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AgeGroup {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "lt45" | "under_45" => Ok(AgeGroup::Under45),
            "ge45" | "ge_45" => Ok(AgeGroup::Ge45),
            other => Err(format!("unknown age group `{other}`")),
        }
    }
}

/// One of the four sex × age-group strata.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct StratumKey {
    pub sex: Sex,
    pub age_group: AgeGroup,
}

impl StratumKey {
    pub const ALL: [StratumKey; 4] = [
        StratumKey { sex: Sex::Male, age_group: AgeGroup::Under45 },
        StratumKey { sex: Sex::Male, age_group: AgeGroup::Ge45 },
        StratumKey { sex: Sex::Female, age_group: AgeGroup::Under45 },
        StratumKey { sex: Sex::Female, age_group: AgeGroup::Ge45 },
    ];

    /// File-name label, e.g. `male_lt45`.
    pub fn label(self) -> String {
        format!("{}_{}", self.sex, self.age_group)
    }
}

impl fmt::Display for StratumKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}_{}", self.sex, self.age_group)
    }
}

impl FromStr for StratumKey {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (sex, group) = s
            .trim()
            .split_once('_')
            .ok_or_else(|| format!("invalid stratum `{s}`"))?;
        Ok(StratumKey {
            sex: sex.parse()?,
            age_group: group.parse()?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stratum {
    pub key: StratumKey,
    pub patient_ids: BTreeSet<PatientId>,
}

impl Stratum {
    pub fn len(&self) -> usize {
        self.patient_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patient_ids.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AgeAssignment {
    pub age_years: u32,
    pub group: AgeGroup,
    /// Patient had no diagnosis events; age taken at study end.
    pub no_events: bool,
}

#[derive(Debug, Clone)]
pub struct Stratification {
    pub strata: Vec<Stratum>,
    pub ages: BTreeMap<PatientId, AgeAssignment>,
}

impl Stratification {
    pub fn get(&self, key: StratumKey) -> &Stratum {
        self.strata
            .iter()
            .find(|s| s.key == key)
            .expect("all four strata are present")
    }
}

/// Whole years elapsed from `birth` to `at` (0 if `at` precedes `birth`).
pub fn age_in_years(birth: NaiveDate, at: NaiveDate) -> u32 {
    at.years_since(birth).unwrap_or(0)
}

pub fn stratify(
    cohort: &Cohort,
    sequences: &Sequences,
    age_threshold: u32,
    anchor: AgeAnchor,
) -> Stratification {
    let mut strata: Vec<Stratum> = StratumKey::ALL
        .iter()
        .map(|&key| Stratum {
            key,
            patient_ids: BTreeSet::new(),
        })
        .collect();
    let mut ages = BTreeMap::new();
    let window = cohort.window();
    let mut flagged = 0usize;
    for p in cohort.patients() {
        let dates: Vec<NaiveDate> = sequences
            .get(&p.id)
            .map(|s| s.entries.iter().map(|e| e.first_date).collect())
            .unwrap_or_default();
        let (anchor_date, no_events) = if dates.is_empty() {
            (window.end, true)
        } else {
            let date = match anchor {
                AgeAnchor::MedianEvent => dates[(dates.len() - 1) / 2],
                AgeAnchor::AgeAtFirstEvent => dates[0],
                AgeAnchor::AgeAtStudyStart => window.start,
            };
            (date, false)
        };
        flagged += no_events as usize;
        let age_years = age_in_years(p.birth_date, anchor_date);
        let group = if age_years < age_threshold {
            AgeGroup::Under45
        } else {
            AgeGroup::Ge45
        };
        let key = StratumKey { sex: p.sex, age_group: group };
        strata
            .iter_mut()
            .find(|s| s.key == key)
            .expect("key drawn from ALL")
            .patient_ids
            .insert(p.id.clone());
        ages.insert(
            p.id.clone(),
            AgeAssignment {
                age_years,
                group,
                no_events,
            },
        );
    }
    if flagged > 0 {
        log::warn!("{flagged} patient(s) without diagnosis events stratified by age at study end");
    }
    Stratification { strata, ages }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohort::{
        first_diagnosis_sequences, Catalog, ConditionId, DiagnosisEvent, Patient, Source,
        StudyWindow,
    };

    fn d(y: i32, m: u32, day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, day).unwrap()
    }

    fn patient(id: &str, sex: Sex, birth: NaiveDate) -> Patient {
        Patient {
            id: id.into(),
            sex,
            birth_date: birth,
            death_date: None,
            cause_of_death: None,
            wimd_quintile: None,
            ethnicity: None,
        }
    }

    fn event(id: &str, c: u16, date: NaiveDate) -> DiagnosisEvent {
        DiagnosisEvent {
            patient_id: id.into(),
            condition: ConditionId(c),
            date,
            source: Source::PrimaryCare,
        }
    }

    fn run(patients: Vec<Patient>, events: Vec<DiagnosisEvent>) -> Stratification {
        let cohort =
            Cohort::new(Catalog::standard(), StudyWindow::default(), patients, events, None)
                .unwrap();
        let seqs = first_diagnosis_sequences(&cohort);
        stratify(&cohort, &seqs, 45, AgeAnchor::MedianEvent)
    }

    #[test]
    fn age_thirty_is_under_45() {
        let s = run(
            vec![patient("a", Sex::Male, d(1980, 1, 1))],
            vec![event("a", 1, d(2009, 1, 1)), event("a", 2, d(2010, 6, 1)), event("a", 3, d(2011, 1, 1))],
        );
        assert_eq!(s.ages["a"].age_years, 30);
        assert_eq!(s.ages["a"].group, AgeGroup::Under45);
    }

    #[test]
    fn exactly_45_is_ge45() {
        let s = run(
            vec![patient("a", Sex::Female, d(1965, 3, 15))],
            vec![event("a", 1, d(2010, 3, 15))],
        );
        assert_eq!(s.ages["a"].age_years, 45);
        assert_eq!(s.ages["a"].group, AgeGroup::Ge45);
        // the day before the birthday is still 44
        let s = run(
            vec![patient("a", Sex::Female, d(1965, 3, 15))],
            vec![event("a", 1, d(2010, 3, 14))],
        );
        assert_eq!(s.ages["a"].age_years, 44);
    }

    #[test]
    fn even_count_takes_earlier_middle_date() {
        // first dates 2000, 2005, 2020, 2021: median anchor is 2005
        let s = run(
            vec![patient("a", Sex::Male, d(1960, 6, 1))],
            vec![
                event("a", 1, d(2000, 7, 1)),
                event("a", 2, d(2005, 7, 1)),
                event("a", 3, d(2020, 7, 1)),
                event("a", 4, d(2021, 7, 1)),
            ],
        );
        assert_eq!(s.ages["a"].age_years, 45);
    }

    #[test]
    fn six_patient_fixture_matches_hand_partition() {
        let patients = vec![
            patient("m1", Sex::Male, d(1990, 1, 1)),   // 20 at 2010 → male_lt45
            patient("m2", Sex::Male, d(1950, 1, 1)),   // 60 → male_ge45
            patient("m3", Sex::Male, d(1965, 1, 1)),   // 45 → male_ge45
            patient("f1", Sex::Female, d(1975, 1, 1)), // 35 → female_lt45
            patient("f2", Sex::Female, d(1940, 1, 1)), // 70 → female_ge45
            patient("f3", Sex::Female, d(1985, 1, 1)), // no events, 36 at 2021-12-31 → female_lt45
        ];
        let events = ["m1", "m2", "m3", "f1", "f2"]
            .iter()
            .map(|id| event(id, 5, d(2010, 1, 1)))
            .collect();
        let s = run(patients, events);
        let sizes: Vec<(String, usize)> = s.strata.iter().map(|x| (x.key.label(), x.len())).collect();
        assert_eq!(
            sizes,
            vec![
                ("male_lt45".to_string(), 1),
                ("male_ge45".to_string(), 2),
                ("female_lt45".to_string(), 2),
                ("female_ge45".to_string(), 1),
            ]
        );
        assert!(s.ages["f3"].no_events);
        assert_eq!(s.ages["f3"].age_years, 36);
        // partition
        let total: usize = s.strata.iter().map(Stratum::len).sum();
        assert_eq!(total, 6);
    }

    #[test]
    fn stratum_key_round_trips() {
        for key in StratumKey::ALL {
            assert_eq!(key.label().parse::<StratumKey>().unwrap(), key);
        }
    }
}
