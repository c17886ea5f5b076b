use std::collections::BTreeMap;

use chrono::NaiveDate;

use super::{Cohort, ConditionId, PatientId};

/// One condition in a patient's chronology, dated by its first diagnosis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SequenceEntry {
    pub condition: ConditionId,
    pub first_date: NaiveDate,
    /// Another condition shares this first-diagnosis date.
    pub tied: bool,
}

/// A patient's conditions ordered by date of first diagnosis (ties by condition id).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FirstDiagnosisSequence {
    pub patient_id: PatientId,
    pub entries: Vec<SequenceEntry>,
}

impl FirstDiagnosisSequence {
    /// Builds a sequence from arbitrary (condition, date) observations, keeping
    /// the earliest date per condition.
    pub fn from_events(
        patient_id: impl Into<PatientId>,
        events: impl IntoIterator<Item = (ConditionId, NaiveDate)>,
    ) -> Self {
        let mut first: BTreeMap<ConditionId, NaiveDate> = BTreeMap::new();
        for (condition, date) in events {
            first
                .entry(condition)
                .and_modify(|d| *d = (*d).min(date))
                .or_insert(date);
        }
        let mut entries: Vec<SequenceEntry> = first
            .into_iter()
            .map(|(condition, first_date)| SequenceEntry {
                condition,
                first_date,
                tied: false,
            })
            .collect();
        entries.sort_by_key(|e| (e.first_date, e.condition));
        for i in 1..entries.len() {
            if entries[i].first_date == entries[i - 1].first_date {
                entries[i].tied = true;
                entries[i - 1].tied = true;
            }
        }
        FirstDiagnosisSequence {
            patient_id: patient_id.into(),
            entries,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn date_of(&self, condition: ConditionId) -> Option<NaiveDate> {
        self.entries
            .iter()
            .find(|e| e.condition == condition)
            .map(|e| e.first_date)
    }

    pub fn contains(&self, condition: ConditionId) -> bool {
        self.entries.iter().any(|e| e.condition == condition)
    }

    pub fn conditions(&self) -> impl Iterator<Item = ConditionId> + '_ {
        self.entries.iter().map(|e| e.condition)
    }

    pub fn first_event(&self) -> Option<NaiveDate> {
        self.entries.first().map(|e| e.first_date)
    }

    pub fn has_ties(&self) -> bool {
        self.entries.iter().any(|e| e.tied)
    }
}

/// Sequences keyed by patient id; every cohort patient has an entry (possibly empty).
pub type Sequences = BTreeMap<PatientId, FirstDiagnosisSequence>;

pub fn first_diagnosis_sequences(cohort: &Cohort) -> Sequences {
    let mut grouped: BTreeMap<&str, Vec<(ConditionId, NaiveDate)>> = cohort
        .patients()
        .iter()
        .map(|p| (p.id.as_str(), Vec::new()))
        .collect();
    for e in cohort.events() {
        if let Some(list) = grouped.get_mut(e.patient_id.as_str()) {
            list.push((e.condition, e.date));
        }
    }
    grouped
        .into_iter()
        .map(|(id, events)| (id.to_string(), FirstDiagnosisSequence::from_events(id, events)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohort::{Catalog, DiagnosisEvent, Patient, Sex, Source, StudyWindow};
    use proptest::prelude::*;

    fn d(y: i32, m: u32, day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, day).unwrap()
    }

    const A: ConditionId = ConditionId(1);
    const B: ConditionId = ConditionId(2);
    const C: ConditionId = ConditionId(3);

    #[test]
    fn earliest_date_per_condition() {
        let seq = FirstDiagnosisSequence::from_events(
            "p",
            [(A, d(2005, 1, 1)), (A, d(2003, 6, 1)), (B, d(2004, 1, 1))],
        );
        let got: Vec<_> = seq.entries.iter().map(|e| (e.condition, e.first_date)).collect();
        assert_eq!(got, vec![(A, d(2003, 6, 1)), (B, d(2004, 1, 1))]);
        assert!(!seq.has_ties());
    }

    #[test]
    fn single_event_is_singleton() {
        let seq = FirstDiagnosisSequence::from_events("p", [(C, d(2010, 2, 2))]);
        assert_eq!(seq.len(), 1);
        assert_eq!(seq.first_event(), Some(d(2010, 2, 2)));
    }

    #[test]
    fn same_day_ties_ordered_by_id_and_flagged() {
        let events = [(C, d(2010, 5, 5)), (A, d(2012, 1, 1)), (B, d(2010, 5, 5))];
        let seq = FirstDiagnosisSequence::from_events("p", events);
        // brute force: every ordering consistent with (date, id) ascending
        let mut oracle: Vec<(NaiveDate, ConditionId)> = events.iter().map(|&(c, t)| (t, c)).collect();
        oracle.sort();
        let got: Vec<_> = seq.entries.iter().map(|e| (e.first_date, e.condition)).collect();
        assert_eq!(got, oracle);
        let ties: Vec<bool> = seq.entries.iter().map(|e| e.tied).collect();
        assert_eq!(ties, vec![true, true, false]);
    }

    fn cohort_from(events: Vec<DiagnosisEvent>) -> Cohort {
        let patients = ["a", "b", "c"]
            .iter()
            .map(|id| Patient {
                id: id.to_string(),
                sex: Sex::Female,
                birth_date: d(1970, 1, 1),
                death_date: None,
                cause_of_death: None,
                wimd_quintile: None,
                ethnicity: None,
            })
            .collect();
        Cohort::new(Catalog::standard(), StudyWindow::default(), patients, events, None).unwrap()
    }

    proptest! {
        #[test]
        fn source_order_independent_and_idempotent(
            raw in proptest::collection::vec((0usize..3, 1u16..8, 0i64..8000), 0..40),
            shuffle_seed in any::<u64>(),
        ) {
            let ids = ["a", "b", "c"];
            let events: Vec<DiagnosisEvent> = raw
                .iter()
                .map(|&(p, c, off)| DiagnosisEvent {
                    patient_id: ids[p].to_string(),
                    condition: ConditionId(c),
                    date: d(2000, 1, 1) + chrono::Duration::days(off),
                    source: if off % 2 == 0 { Source::PrimaryCare } else { Source::SecondaryCare },
                })
                .collect();
            let mut shuffled = events.clone();
            // deterministic Fisher-Yates from the proptest seed
            let mut state = shuffle_seed | 1;
            for i in (1..shuffled.len()).rev() {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                shuffled.swap(i, (state % (i as u64 + 1)) as usize);
            }
            let a = first_diagnosis_sequences(&cohort_from(events));
            let b = first_diagnosis_sequences(&cohort_from(shuffled));
            prop_assert_eq!(&a, &b);
            prop_assert_eq!(a.len(), 3);
            for seq in a.values() {
                let again = FirstDiagnosisSequence::from_events(
                    seq.patient_id.clone(),
                    seq.entries.iter().map(|e| (e.condition, e.first_date)),
                );
                prop_assert_eq!(&again, seq);
                for w in seq.entries.windows(2) {
                    prop_assert!(w[0].first_date <= w[1].first_date);
                    prop_assert!(w[0].condition != w[1].condition);
                }
            }
        }
    }
}
