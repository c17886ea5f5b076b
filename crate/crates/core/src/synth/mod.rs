//! Seeded synthetic cohorts with planted trajectory archetypes, plus the
//! adjusted Rand index for scoring recovered partitions.

mod ari;
mod spec;

use std::collections::BTreeSet;
use std::path::Path;

use chrono::{Days, NaiveDate};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};

pub use ari::adjusted_rand_index;
pub use spec::{ArchetypeSpec, Demographics, Mortality, Stays, SynthSpec};

use crate::cohort::{
    write_cohort_files, Catalog, Cohort, ConditionId, DiagnosisEvent, HospitalStay, Patient, Sex,
    Source, StudyWindow, SystemCategory,
};
use crate::error::Result;
use crate::io::{write_atomic, Cell, Table};

/// Planted membership of one synthetic patient.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TruthRow {
    pub patient_id: String,
    pub archetype_id: Option<String>,
    pub planted_cluster: Option<u32>,
    /// Whether the full archetype sequence was expressed.
    pub full_sequence: bool,
}

#[derive(Debug, Clone)]
pub struct SynthCohort {
    pub catalog: Catalog,
    pub window: StudyWindow,
    pub patients: Vec<Patient>,
    pub events: Vec<DiagnosisEvent>,
    pub stays: Vec<HospitalStay>,
    pub truth: Vec<TruthRow>,
}

pub const TRUTH_COLUMNS: [&str; 4] = ["patient_id", "archetype_id", "planted_cluster", "full_sequence"];

impl SynthCohort {
    pub fn to_cohort(&self) -> Result<Cohort> {
        Cohort::new(
            self.catalog.clone(),
            self.window,
            self.patients.clone(),
            self.events.clone(),
            Some(self.stays.clone()),
        )
    }

    pub fn truth_table(&self) -> Table {
        let mut t = Table::new(&TRUTH_COLUMNS);
        for r in &self.truth {
            t.push(vec![
                Cell::text(r.patient_id.as_str()),
                r.archetype_id.as_deref().map_or(Cell::Empty, Cell::text),
                r.planted_cluster.map_or(Cell::Empty, |c| Cell::Int(c as i64)),
                Cell::Bool(r.full_sequence),
            ]);
        }
        t
    }

    /// Writes the cohort input files plus `truth.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        write_cohort_files(dir, &self.catalog, &self.patients, &self.events, Some(&self.stays))?;
        write_atomic(&dir.join("truth.csv"), &self.truth_table().to_csv()?)
    }
}

fn uniform_date(rng: &mut ChaCha8Rng, from: NaiveDate, to: NaiveDate) -> NaiveDate {
    let span = (to - from).num_days().max(0) as u64;
    from + Days::new(rng.random_range(0..=span))
}

fn weighted<'a, K>(rng: &mut ChaCha8Rng, items: impl IntoIterator<Item = (&'a K, &'a f64)>) -> &'a K
where
    K: 'a,
{
    let items: Vec<(&K, f64)> = items.into_iter().map(|(k, &w)| (k, w)).collect();
    let total: f64 = items.iter().map(|(_, w)| w).sum();
    let mut target = rng.random::<f64>() * total;
    for &(k, w) in &items {
        if target < w {
            return k;
        }
        target -= w;
    }
    items.iter().rev().find(|(_, w)| *w > 0.0).expect("positive weight").0
}

fn poisson(rng: &mut ChaCha8Rng, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("validated mean").sample(rng) as u64
}

/// Generates a cohort from `spec` using the built-in condition catalog.
/// The output is a pure function of the spec, seed included.
pub fn generate_cohort(spec: &SynthSpec) -> Result<SynthCohort> {
    let catalog = Catalog::standard();
    spec.validate(&catalog)?;
    let window = spec.window()?;
    let background = spec.background_for(&catalog)?;
    let all_ids: Vec<ConditionId> = catalog.ids().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let n = spec.total_patients();
    let mut slots: Vec<Option<usize>> = spec
        .archetypes
        .iter()
        .enumerate()
        .flat_map(|(i, a)| std::iter::repeat(Some(i)).take(a.member_count))
        .collect();
    slots.resize(n, None);
    slots.shuffle(&mut rng);

    let width = n.to_string().len().max(5);
    let mut patients = Vec::with_capacity(n);
    let mut events = Vec::new();
    let mut stays = Vec::new();
    let mut truth = Vec::with_capacity(n);
    let d = &spec.demographics;

    for (index, slot) in slots.into_iter().enumerate() {
        let id = format!("P{:0width$}", index + 1);
        let sex = if rng.random::<f64>() < d.male_fraction { Sex::Male } else { Sex::Female };
        let birth_date = uniform_date(&mut rng, d.birth_start, d.birth_end);
        let wimd_quintile = if rng.random::<f64>() < d.wimd_missing {
            None
        } else {
            Some(rng.random_range(1..=5u8))
        };
        let ethnicity = if rng.random::<f64>() < d.ethnicity_missing {
            None
        } else {
            Some(weighted(&mut rng, &d.ethnicity).clone())
        };

        let mut dated: Vec<(ConditionId, NaiveDate)> = Vec::new();
        let mut reserved: BTreeSet<ConditionId> = BTreeSet::new();
        let mut full_sequence = false;
        let archetype = slot.map(|i| &spec.archetypes[i]);
        if let Some(a) = archetype {
            reserved.extend(a.conditions.iter().copied());
            full_sequence = rng.random::<f64>() < a.penetrance;
            let expressed = if full_sequence {
                a.conditions.len()
            } else {
                rng.random_range(1..a.conditions.len())
            };
            let gap = Normal::new(a.mean_gap_days, a.sd_gap_days).expect("validated gap");
            let gaps: Vec<u64> = (1..expressed)
                .map(|_| gap.sample(&mut rng).round().max(1.0) as u64)
                .collect();
            let span: u64 = gaps.iter().sum();
            let latest_start = window
                .end
                .checked_sub_days(Days::new(span))
                .filter(|&d| d >= window.start)
                .unwrap_or(window.start);
            let mut date = uniform_date(&mut rng, window.start, latest_start);
            dated.push((a.conditions[0], date));
            for (c, g) in a.conditions[1..expressed].iter().zip(&gaps) {
                date = date + Days::new(*g);
                dated.push((*c, date));
            }
        }
        for (&c, &p) in &background {
            if !reserved.contains(&c) && p > 0.0 && rng.random::<f64>() < p {
                reserved.insert(c);
                dated.push((c, uniform_date(&mut rng, window.start, window.end)));
            }
        }
        for _ in 0..poisson(&mut rng, spec.noise_rate) {
            let free: Vec<ConditionId> = all_ids.iter().copied().filter(|c| !reserved.contains(c)).collect();
            if free.is_empty() {
                break;
            }
            let c = free[rng.random_range(0..free.len())];
            reserved.insert(c);
            dated.push((c, uniform_date(&mut rng, window.start, window.end)));
        }
        dated.sort();
        for &(condition, date) in &dated {
            let source = if rng.random::<f64>() < spec.primary_care_share {
                Source::PrimaryCare
            } else {
                Source::SecondaryCare
            };
            events.push(DiagnosisEvent { patient_id: id.clone(), condition, date, source });
        }

        let last_event = dated.iter().map(|&(_, d)| d).filter(|&d| d <= window.end).max();
        let death_p = archetype
            .and_then(|a| a.death_probability)
            .unwrap_or(spec.mortality.probability);
        let mut death_date = None;
        let mut cause_of_death = None;
        if rng.random::<f64>() < death_p {
            let earliest = last_event.unwrap_or(window.start) + Days::new(1);
            if earliest <= window.end {
                death_date = Some(uniform_date(&mut rng, earliest, window.end));
                if rng.random::<f64>() >= spec.mortality.cause_missing {
                    let cause: &SystemCategory = weighted(&mut rng, &spec.mortality.causes);
                    cause_of_death = Some(*cause);
                }
            }
        }

        let stay_end = death_date.unwrap_or(window.end);
        for _ in 0..poisson(&mut rng, spec.stays.rate) {
            let admission = uniform_date(&mut rng, window.start, stay_end);
            let length = poisson(&mut rng, spec.stays.mean_length_days);
            stays.push(HospitalStay {
                patient_id: id.clone(),
                admission,
                discharge: admission + Days::new(length),
            });
        }

        truth.push(TruthRow {
            patient_id: id.clone(),
            archetype_id: archetype.map(|a| a.id.clone()),
            planted_cluster: archetype.map(|a| a.cluster),
            full_sequence,
        });
        patients.push(Patient {
            id,
            sex,
            birth_date,
            death_date,
            cause_of_death,
            wimd_quintile,
            ethnicity,
        });
    }
    stays.sort_by(|a, b| (&a.patient_id, a.admission).cmp(&(&b.patient_id, b.admission)));

    if events.iter().any(|e| !window.contains(e.date)) {
        log::warn!("some archetype sequences run past the study window and will be dropped on load");
    }
    Ok(SynthCohort { catalog, window, patients, events, stays, truth })
}

/// Reads `truth.csv` back as written by [`SynthCohort::write`].
pub fn load_truth(path: &Path) -> Result<Vec<TruthRow>> {
    let file = crate::io::CsvFile::input(path, &TRUTH_COLUMNS)?;
    let mut rows = Vec::new();
    for row in file.rows() {
        let archetype = row.get("archetype_id");
        rows.push(TruthRow {
            patient_id: row.get("patient_id").to_string(),
            archetype_id: (!archetype.is_empty()).then(|| archetype.to_string()),
            planted_cluster: row.parse_opt("planted_cluster")?,
            full_sequence: row.parse("full_sequence")?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohort::{first_diagnosis_sequences, load_cohort, CohortPaths};

    fn spec(text: &str) -> SynthSpec {
        SynthSpec::from_toml(text).unwrap()
    }

    const SINGLE: &str = r#"
        seed = 3
        [[archetypes]]
        id = "abc"
        cluster = 0
        conditions = [23, 18, 12]
        mean_gap_days = 400
        sd_gap_days = 100
        member_count = 50
    "#;

    #[test]
    fn full_penetrance_without_noise_plants_ordered_sequences() {
        let synth = generate_cohort(&spec(SINGLE)).unwrap();
        let cohort = synth.to_cohort().unwrap();
        assert_eq!(cohort.len(), 50);
        assert_eq!(cohort.dropped_events(), 0);
        let seqs = first_diagnosis_sequences(&cohort);
        for seq in seqs.values() {
            assert_eq!(seq.conditions().collect::<Vec<_>>(), vec![ConditionId(23), ConditionId(18), ConditionId(12)]);
            let a = seq.date_of(ConditionId(23)).unwrap();
            let b = seq.date_of(ConditionId(18)).unwrap();
            let c = seq.date_of(ConditionId(12)).unwrap();
            assert!(a < b && b < c);
        }
        assert!(synth.truth.iter().all(|t| t.full_sequence && t.planted_cluster == Some(0)));
    }

    #[test]
    fn same_seed_gives_identical_files() {
        let text = format!("noise_rate = 1.5\nbackground_prevalence = 0.05\npatients = 120\n{SINGLE}");
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        generate_cohort(&spec(&text)).unwrap().write(a.path()).unwrap();
        generate_cohort(&spec(&text)).unwrap().write(b.path()).unwrap();
        for f in ["patients.csv", "diagnoses.csv", "hospital_stays.csv", "catalog.csv", "truth.csv"] {
            let x = std::fs::read(a.path().join(f)).unwrap();
            let y = std::fs::read(b.path().join(f)).unwrap();
            assert_eq!(x, y, "{f}");
        }
        let other = generate_cohort(&spec(&text.replace("seed = 3", "seed = 4"))).unwrap();
        let first = generate_cohort(&spec(&text)).unwrap();
        assert_ne!(other.events, first.events);
    }

    #[test]
    fn written_cohort_and_truth_load_back() {
        let text = format!("patients = 80\nbackground_prevalence = 0.1\n{SINGLE}");
        let synth = generate_cohort(&spec(&text)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        synth.write(dir.path()).unwrap();
        let cohort = load_cohort(&CohortPaths::in_dir(dir.path()), synth.window).unwrap();
        assert_eq!(cohort.patients(), &synth.patients[..]);
        assert_eq!(cohort.stays().unwrap(), &synth.stays[..]);
        assert_eq!(load_truth(&dir.path().join("truth.csv")).unwrap(), synth.truth);
        assert_eq!(synth.truth.iter().filter(|t| t.archetype_id.is_none()).count(), 30);
    }

    #[test]
    fn prevalences_converge_within_three_standard_errors() {
        let text = r#"
            seed = 11
            patients = 6000
            background_prevalence = 0.0
            [background]
            "2" = 0.05
            "20" = 0.2
            "35" = 0.5
            [[archetypes]]
            id = "x"
            cluster = 0
            conditions = [1, 3, 5]
            mean_gap_days = 300
            penetrance = 0.6
            member_count = 2000
        "#;
        let synth = generate_cohort(&spec(text)).unwrap();
        let n = synth.patients.len() as f64;
        for (c, p) in [(2u16, 0.05), (20, 0.2), (35, 0.5)] {
            let hits = synth.events.iter().filter(|e| e.condition == ConditionId(c)).count() as f64;
            let se = (p * (1.0 - p) / n).sqrt();
            assert!((hits / n - p).abs() < 3.0 * se, "condition {c}: {} vs {p}", hits / n);
        }
        let members: Vec<&TruthRow> = synth.truth.iter().filter(|t| t.archetype_id.is_some()).collect();
        let m = members.len() as f64;
        let full = members.iter().filter(|t| t.full_sequence).count() as f64;
        let se = (0.6 * 0.4 / m).sqrt();
        assert!((full / m - 0.6).abs() < 3.0 * se);
        // the first archetype condition is always expressed
        let first = synth.events.iter().filter(|e| e.condition == ConditionId(1)).count();
        assert_eq!(first, 2000);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let bad = |t: &str| {
            let s = SynthSpec::from_toml(t);
            s.is_err() || generate_cohort(&s.unwrap()).is_err()
        };
        assert!(bad(&SINGLE.replace("[23, 18, 12]", "[23, 18, 99]")));
        assert!(bad(&SINGLE.replace("[23, 18, 12]", "[23, 18]")));
        assert!(bad(&SINGLE.replace("member_count = 50", "member_count = 50\npenetrance = 0.0")));
        assert!(bad(&format!("unknown_key = 1\n{SINGLE}")));
        assert!(bad(&SINGLE.replace("seed = 3", "")));
        assert!(bad(&format!("patients = 10\n{SINGLE}")));
    }
}
