//! Per-cluster summaries: system mix, condition shares, mortality, long
//! hospital stays, causes of death and pair timing.

mod tables;

use std::collections::{BTreeMap, BTreeSet};

use crate::cohort::{age_in_years, Cohort, ConditionId, PatientId, Sequences, SystemCategory};
use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::trajectory::Trajectory;

pub use tables::{
    cause_of_death_table, cluster_conditions_table, cluster_report_table, pair_timing_table,
    REPORT_DECIMALS,
};

pub const DAYS_PER_YEAR: f64 = 365.25;

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterReport {
    pub cluster_label: usize,
    pub n_traj: usize,
    /// Sum of trajectory supports; a patient on several trajectories counts once per trajectory.
    pub n_patients_total: usize,
    pub n_patients_unique: usize,
    /// Percentage of condition slots per category; every category is present.
    pub system_distribution: BTreeMap<SystemCategory, f64>,
    /// Percentage of the cluster's trajectories containing each condition.
    pub condition_prevalence: BTreeMap<ConditionId, f64>,
    pub n_deaths: usize,
    pub mortality_pct: f64,
    pub person_years: f64,
    pub mortality_rate_per_100py: f64,
    /// `None` when long-stay reporting is switched off.
    pub n_long_stay: Option<usize>,
    pub long_stay_pct: Option<f64>,
    /// Age at first recorded diagnosis over unique patients.
    pub mean_age: f64,
    pub sd_age: Option<f64>,
    pub cause_of_death_top5: Vec<CauseShare>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CauseShare {
    pub category: SystemCategory,
    pub deaths: usize,
    pub pct: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingStats {
    pub n_patients: usize,
    pub mean_years: f64,
    /// Sample standard deviation; `None` for a single patient.
    pub sd_years: Option<f64>,
}

fn mean_sd(xs: &[f64]) -> (f64, Option<f64>) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let sd = (xs.len() > 1).then(|| {
        (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    });
    (mean, sd)
}

/// Gap in years between first diagnoses of `c1` and `c2`, regardless of order,
/// over the patients in `patients` who have both.
pub fn pair_timing_stats<'a>(
    c1: ConditionId,
    c2: ConditionId,
    sequences: &Sequences,
    patients: impl IntoIterator<Item = &'a PatientId>,
) -> Result<TimingStats> {
    let gaps: Vec<f64> = patients
        .into_iter()
        .filter_map(|id| sequences.get(id))
        .filter_map(|s| Some((s.date_of(c1)?, s.date_of(c2)?)))
        .map(|(a, b)| (b - a).num_days().abs() as f64 / DAYS_PER_YEAR)
        .collect();
    if gaps.is_empty() {
        return Err(Error::invalid(format!(
            "no patient has both {c1} and {c2}"
        )));
    }
    let (mean_years, sd_years) = mean_sd(&gaps);
    Ok(TimingStats {
        n_patients: gaps.len(),
        mean_years,
        sd_years,
    })
}

/// The five most frequent recorded causes among `members` who died, as
/// percentages of deaths with a recorded cause. Ties are broken alphabetically.
pub fn cause_of_death_top5(cohort: &Cohort, members: &BTreeSet<PatientId>) -> Vec<CauseShare> {
    let mut counts: BTreeMap<SystemCategory, usize> = BTreeMap::new();
    for id in members {
        let Some(p) = cohort.patient(id) else { continue };
        if p.death_date.is_some_and(|d| d <= cohort.window().end) {
            if let Some(cause) = p.cause_of_death {
                *counts.entry(cause).or_default() += 1;
            }
        }
    }
    let total: usize = counts.values().sum();
    let mut ranked: Vec<(SystemCategory, usize)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.as_str().cmp(b.0.as_str())));
    ranked
        .into_iter()
        .take(5)
        .map(|(category, deaths)| CauseShare {
            category,
            deaths,
            pct: 100.0 * deaths as f64 / total as f64,
        })
        .collect()
}

/// Builds one report per cluster, ordered by unique patient count
/// (largest first, then by label).
pub fn cluster_report(
    labels: &[usize],
    trajectories: &[Trajectory],
    cohort: &Cohort,
    sequences: &Sequences,
    config: &PipelineConfig,
) -> Result<Vec<ClusterReport>> {
    if labels.len() != trajectories.len() {
        return Err(Error::invalid(format!(
            "{} cluster labels for {} trajectories",
            labels.len(),
            trajectories.len()
        )));
    }
    let stays = if config.report_long_stay {
        Some(cohort.stays().ok_or_else(|| {
            Error::invalid(
                "long-stay reporting is enabled but the cohort has no hospital_stays.csv",
            )
        })?)
    } else {
        None
    };
    let long_stayers: BTreeSet<&str> = stays
        .into_iter()
        .flatten()
        .filter(|s| s.length_days() > config.long_stay_days)
        .map(|s| s.patient_id.as_str())
        .collect();

    let k = labels.iter().max().map_or(0, |m| m + 1);
    let mut reports = Vec::with_capacity(k);
    for label in 0..k {
        let members: Vec<&Trajectory> = trajectories
            .iter()
            .zip(labels)
            .filter(|(_, &l)| l == label)
            .map(|(t, _)| t)
            .collect();
        if members.is_empty() {
            return Err(Error::invalid(format!("cluster {label} has no trajectories")));
        }
        reports.push(single_report(label, &members, cohort, sequences, stays.map(|_| &long_stayers))?);
    }
    reports.sort_by(|a, b| {
        b.n_patients_unique
            .cmp(&a.n_patients_unique)
            .then(a.cluster_label.cmp(&b.cluster_label))
    });
    Ok(reports)
}

fn single_report(
    label: usize,
    members: &[&Trajectory],
    cohort: &Cohort,
    sequences: &Sequences,
    long_stayers: Option<&BTreeSet<&str>>,
) -> Result<ClusterReport> {
    let catalog = cohort.catalog();
    let n_traj = members.len();

    let mut slots: BTreeMap<SystemCategory, usize> =
        SystemCategory::ALL.iter().map(|&c| (c, 0)).collect();
    let mut with_condition: BTreeMap<ConditionId, usize> = BTreeMap::new();
    let mut n_slots = 0;
    for t in members {
        for &c in &t.conditions {
            let system = catalog
                .system(c)
                .ok_or_else(|| Error::invalid(format!("condition {c} is not in the catalog")))?;
            *slots.get_mut(&system).expect("all categories seeded") += 1;
            n_slots += 1;
        }
        for c in t.conditions.iter().collect::<BTreeSet<_>>() {
            *with_condition.entry(*c).or_default() += 1;
        }
    }
    let system_distribution = slots
        .into_iter()
        .map(|(c, n)| (c, 100.0 * n as f64 / n_slots as f64))
        .collect();
    let condition_prevalence = with_condition
        .into_iter()
        .map(|(c, n)| (c, 100.0 * n as f64 / n_traj as f64))
        .collect();

    let n_patients_total = members.iter().map(|t| t.support()).sum();
    let unique: BTreeSet<PatientId> = members
        .iter()
        .flat_map(|t| t.patient_ids.iter().cloned())
        .collect();
    let n_unique = unique.len();

    let end = cohort.window().end;
    let mut n_deaths = 0;
    let mut person_days = 0i64;
    let mut ages = Vec::with_capacity(n_unique);
    for id in &unique {
        let patient = cohort
            .patient(id)
            .ok_or_else(|| Error::invalid(format!("trajectory member `{id}` is not in the cohort")))?;
        let first = sequences
            .get(id)
            .and_then(|s| s.first_event())
            .ok_or_else(|| Error::invalid(format!("trajectory member `{id}` has no diagnoses")))?;
        let died = patient.death_date.filter(|&d| d <= end);
        if died.is_some() {
            n_deaths += 1;
        }
        let exit = died.unwrap_or(end);
        person_days += (exit - first).num_days().max(1);
        ages.push(age_in_years(patient.birth_date, first) as f64);
    }
    let person_years = person_days as f64 / DAYS_PER_YEAR;
    let (mean_age, sd_age) = mean_sd(&ages);
    let n_long_stay = long_stayers.map(|set| unique.iter().filter(|id| set.contains(id.as_str())).count());

    Ok(ClusterReport {
        cluster_label: label,
        n_traj,
        n_patients_total,
        n_patients_unique: n_unique,
        system_distribution,
        condition_prevalence,
        n_deaths,
        mortality_pct: 100.0 * n_deaths as f64 / n_unique as f64,
        person_years,
        mortality_rate_per_100py: 100.0 * n_deaths as f64 / person_years,
        n_long_stay,
        long_stay_pct: n_long_stay.map(|n| 100.0 * n as f64 / n_unique as f64),
        mean_age,
        sd_age,
        cause_of_death_top5: cause_of_death_top5(cohort, &unique),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohort::{
        first_diagnosis_sequences, Catalog, DiagnosisEvent, HospitalStay, Patient, Sex, Source,
        StudyWindow,
    };
    use crate::test_oracles::mean_sd as oracle_mean_sd;
    use chrono::NaiveDate;

    fn d(y: i32, m: u32, day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, day).unwrap()
    }

    fn patient(id: &str, birth: NaiveDate, death: Option<(NaiveDate, SystemCategory)>) -> Patient {
        Patient {
            id: id.into(),
            sex: Sex::Female,
            birth_date: birth,
            death_date: death.map(|x| x.0),
            cause_of_death: death.map(|x| x.1),
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

    fn traj(cs: [u16; 3], ids: &[&str]) -> Trajectory {
        Trajectory {
            conditions: cs.iter().map(|&c| ConditionId(c)).collect(),
            patient_ids: ids.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn fixture(with_stays: bool) -> Cohort {
        use SystemCategory::*;
        let patients = vec![
            patient("p1", d(1950, 6, 15), Some((d(2010, 1, 1), Circulatory))),
            patient("p2", d(1970, 1, 1), None),
            patient("p3", d(1980, 3, 1), Some((d(2019, 6, 30), Neoplasms))),
            patient("p4", d(1960, 1, 1), None),
        ];
        let events = vec![
            event("p1", 20, d(2005, 1, 1)),
            event("p1", 25, d(2006, 1, 1)),
            event("p1", 15, d(2007, 1, 1)),
            event("p2", 20, d(2003, 1, 1)),
            event("p2", 25, d(2004, 1, 1)),
            event("p2", 15, d(2005, 1, 1)),
            event("p2", 12, d(2008, 1, 1)),
            event("p3", 20, d(2012, 1, 1)),
            event("p3", 15, d(2013, 1, 1)),
            event("p3", 12, d(2014, 1, 1)),
            event("p4", 23, d(2001, 1, 1)),
            event("p4", 18, d(2002, 1, 1)),
            event("p4", 12, d(2003, 1, 1)),
        ];
        let stays = vec![
            HospitalStay { patient_id: "p2".into(), admission: d(2010, 1, 1), discharge: d(2010, 1, 6) },
            HospitalStay { patient_id: "p3".into(), admission: d(2015, 1, 1), discharge: d(2015, 1, 5) },
        ];
        Cohort::new(
            Catalog::standard(),
            StudyWindow::default(),
            patients,
            events,
            with_stays.then_some(stays),
        )
        .unwrap()
    }

    fn trajectories() -> Vec<Trajectory> {
        vec![
            traj([20, 25, 15], &["p1", "p2"]),
            traj([20, 15, 12], &["p2", "p3"]),
            traj([23, 18, 12], &["p4"]),
        ]
    }

    #[test]
    fn single_trajectory_slot_shares() {
        let cohort = fixture(true);
        let seqs = first_diagnosis_sequences(&cohort);
        let reports =
            cluster_report(&[0], &[traj([20, 25, 15], &["p1"])], &cohort, &seqs, &PipelineConfig::default())
                .unwrap();
        let dist = &reports[0].system_distribution;
        assert!((dist[&SystemCategory::Nervous] - 200.0 / 3.0).abs() < 1e-12);
        assert!((dist[&SystemCategory::Digestive] - 100.0 / 3.0).abs() < 1e-12);
        assert_eq!(dist.len(), 13);
    }

    #[test]
    fn fixture_matches_hand_recount() {
        let cohort = fixture(true);
        let seqs = first_diagnosis_sequences(&cohort);
        let reports =
            cluster_report(&[0, 0, 1], &trajectories(), &cohort, &seqs, &PipelineConfig::default()).unwrap();
        assert_eq!(reports.len(), 2);
        let r = &reports[0];
        assert_eq!((r.cluster_label, r.n_traj, r.n_patients_total, r.n_patients_unique), (0, 2, 4, 3));
        assert!((r.system_distribution[&SystemCategory::Nervous] - 50.0).abs() < 1e-12);
        assert!((r.system_distribution[&SystemCategory::Genitourinary] - 100.0 / 6.0).abs() < 1e-12);
        assert_eq!(r.condition_prevalence[&ConditionId(20)], 100.0);
        assert_eq!(r.condition_prevalence[&ConditionId(25)], 50.0);
        assert_eq!(r.n_deaths, 2);
        assert!((r.mortality_pct - 200.0 / 3.0).abs() < 1e-12);
        // person-days 1826 + 6939 + 2737
        assert!((r.person_years - 11502.0 / 365.25).abs() < 1e-12);
        assert!((r.mortality_rate_per_100py - 6.3510693792383925).abs() < 1e-12);
        assert_eq!(r.n_long_stay, Some(1));
        let (mean, sd) = oracle_mean_sd(&[54.0, 33.0, 31.0]);
        assert!((r.mean_age - mean).abs() < 1e-12);
        assert!((r.sd_age.unwrap() - sd.unwrap()).abs() < 1e-12);
        assert_eq!(r.cause_of_death_top5.len(), 2);
        assert_eq!(r.cause_of_death_top5[0].category, SystemCategory::Circulatory);
        assert_eq!(r.cause_of_death_top5[0].pct, 50.0);

        let s = &reports[1];
        assert_eq!((s.n_patients_unique, s.n_deaths, s.n_long_stay), (1, 0, Some(0)));
        assert!((s.person_years - 7669.0 / 365.25).abs() < 1e-12);
        assert_eq!(s.sd_age, None);
        assert!(s.cause_of_death_top5.is_empty());
        assert_eq!(reports.iter().map(|r| r.n_traj).sum::<usize>(), 3);
    }

    #[test]
    fn long_stay_needs_stays() {
        let cohort = fixture(false);
        let seqs = first_diagnosis_sequences(&cohort);
        let err = cluster_report(&[0, 0, 1], &trajectories(), &cohort, &seqs, &PipelineConfig::default())
            .unwrap_err();
        assert!(err.to_string().contains("hospital_stays.csv"), "{err}");
        let config = PipelineConfig { report_long_stay: false, ..PipelineConfig::default() };
        let reports = cluster_report(&[0, 0, 1], &trajectories(), &cohort, &seqs, &config).unwrap();
        assert!(reports.iter().all(|r| r.n_long_stay.is_none() && r.long_stay_pct.is_none()));
    }

    #[test]
    fn label_count_must_match() {
        let cohort = fixture(true);
        let seqs = first_diagnosis_sequences(&cohort);
        assert!(cluster_report(&[0, 1], &trajectories(), &cohort, &seqs, &PipelineConfig::default()).is_err());
    }

    #[test]
    fn pair_timing_two_points() {
        let cohort = Cohort::new(
            Catalog::standard(),
            StudyWindow::default(),
            vec![patient("a", d(1950, 1, 1), None), patient("b", d(1950, 1, 1), None), patient("c", d(1950, 1, 1), None)],
            vec![
                event("a", 1, d(2001, 1, 1)),
                event("a", 2, d(2005, 1, 1)), // 1461 days
                event("b", 2, d(2002, 1, 1)),
                event("b", 1, d(2010, 1, 1)), // 2922 days, reversed order
                event("c", 1, d(2003, 1, 1)),
            ],
            None,
        )
        .unwrap();
        let seqs = first_diagnosis_sequences(&cohort);
        let ids: Vec<PatientId> = seqs.keys().cloned().collect();
        let s = pair_timing_stats(ConditionId(1), ConditionId(2), &seqs, &ids).unwrap();
        assert_eq!(s.n_patients, 2);
        assert!((s.mean_years - 6.0).abs() < 1e-12);
        assert!((s.sd_years.unwrap() - 8f64.sqrt()).abs() < 1e-12);
        let one = pair_timing_stats(ConditionId(1), ConditionId(2), &seqs, &ids[..1]).unwrap();
        assert_eq!(one.sd_years, None);
        assert!(pair_timing_stats(ConditionId(1), ConditionId(3), &seqs, &ids).is_err());
    }

    #[test]
    fn pair_timing_matches_direct_recompute() {
        let n = 30;
        let mut patients = Vec::new();
        let mut events = Vec::new();
        let mut expected = Vec::new();
        for i in 0..n {
            let id = format!("q{i:02}");
            patients.push(patient(&id, d(1950, 1, 1), None));
            let start = d(2001, 1, 1) + chrono::Days::new(i * 13);
            let gap = 50 + (i * 97) % 1500;
            events.push(event(&id, 7, start));
            events.push(event(&id, 8, start + chrono::Days::new(gap)));
            expected.push(gap as f64 / 365.25);
        }
        let cohort = Cohort::new(Catalog::standard(), StudyWindow::default(), patients, events, None).unwrap();
        let seqs = first_diagnosis_sequences(&cohort);
        let s = pair_timing_stats(ConditionId(8), ConditionId(7), &seqs, seqs.keys()).unwrap();
        let (mean, sd) = oracle_mean_sd(&expected);
        assert!((s.mean_years - mean).abs() < 1e-12);
        assert!((s.sd_years.unwrap() - sd.unwrap()).abs() < 1e-12);
    }

    #[test]
    fn cause_of_death_ranking() {
        use SystemCategory::*;
        let causes = [Skin, Blood, Blood, Eye, Ear, Mental, Mental, Mental, Nervous];
        let patients: Vec<Patient> = causes
            .iter()
            .enumerate()
            .map(|(i, &c)| patient(&format!("d{i}"), d(1950, 1, 1), Some((d(2010, 1, 1), c))))
            .chain([patient("alive", d(1950, 1, 1), None)])
            .collect();
        let cohort = Cohort::new(Catalog::standard(), StudyWindow::default(), patients, vec![], None).unwrap();
        let everyone: BTreeSet<PatientId> = cohort.patients().iter().map(|p| p.id.clone()).collect();
        let top = cause_of_death_top5(&cohort, &everyone);
        let order: Vec<SystemCategory> = top.iter().map(|s| s.category).collect();
        assert_eq!(order, vec![Mental, Blood, Ear, Eye, Nervous]);
        assert!((top[0].pct - 100.0 / 3.0).abs() < 1e-12);

        let few: BTreeSet<PatientId> = ["d0", "d1", "d3"].iter().map(|s| s.to_string()).collect();
        assert_eq!(cause_of_death_top5(&cohort, &few).len(), 3);
        let same: BTreeSet<PatientId> = ["d5", "d6"].iter().map(|s| s.to_string()).collect();
        let only = cause_of_death_top5(&cohort, &same);
        assert_eq!((only.len(), only[0].pct), (1, 100.0));
        let none: BTreeSet<PatientId> = ["alive".to_string()].into();
        assert!(cause_of_death_top5(&cohort, &none).is_empty());
    }
}
