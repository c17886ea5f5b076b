//! Shared trajectories: chains of significant directed pairs and the patients
//! whose first diagnoses follow them.

use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;

use crate::cohort::{ConditionId, FirstDiagnosisSequence, PatientId, Sequences, Stratum};
use crate::config::PipelineConfig;
use crate::pairstats::PairStats;

/// An ordered sequence of distinct conditions with the patients that follow it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trajectory {
    pub conditions: Vec<ConditionId>,
    pub patient_ids: BTreeSet<PatientId>,
}

impl Trajectory {
    pub fn support(&self) -> usize {
        self.patient_ids.len()
    }

    fn condition_set(&self) -> Vec<ConditionId> {
        let mut set = self.conditions.clone();
        set.sort();
        set
    }
}

fn allowed_steps(pairs: &[PairStats]) -> BTreeMap<ConditionId, BTreeSet<ConditionId>> {
    let mut steps: BTreeMap<ConditionId, BTreeSet<ConditionId>> = BTreeMap::new();
    for p in pairs {
        if p.allows(p.c1, p.c2) {
            steps.entry(p.c1).or_default().insert(p.c2);
        }
        if p.allows(p.c2, p.c1) {
            steps.entry(p.c2).or_default().insert(p.c1);
        }
    }
    steps
}

/// Every sequence of `length` distinct conditions in which each consecutive step
/// is a significant pair traversed in an allowed orientation. With
/// `require_all_pairs`, every earlier→later pair must be allowed, not only
/// consecutive ones. Output is lexicographically sorted.
pub fn build_candidate_trajectories(
    pairs: &[PairStats],
    length: usize,
    require_all_pairs: bool,
) -> Vec<Vec<ConditionId>> {
    if length < 2 {
        return Vec::new();
    }
    let steps = allowed_steps(pairs);
    let mut out = Vec::new();
    let mut path = Vec::with_capacity(length);
    for &start in steps.keys() {
        path.push(start);
        extend(&steps, length, require_all_pairs, &mut path, &mut out);
        path.pop();
    }
    out
}

fn extend(
    steps: &BTreeMap<ConditionId, BTreeSet<ConditionId>>,
    length: usize,
    require_all_pairs: bool,
    path: &mut Vec<ConditionId>,
    out: &mut Vec<Vec<ConditionId>>,
) {
    if path.len() == length {
        out.push(path.clone());
        return;
    }
    let last = *path.last().expect("path starts non-empty");
    let Some(next) = steps.get(&last) else { return };
    for &c in next {
        if path.contains(&c) {
            continue;
        }
        if require_all_pairs
            && !path[..path.len() - 1]
                .iter()
                .all(|p| steps.get(p).is_some_and(|s| s.contains(&c)))
        {
            continue;
        }
        path.push(c);
        extend(steps, length, require_all_pairs, path, out);
        path.pop();
    }
}

/// Patients of the stratum whose first diagnoses of the candidate conditions
/// occur in order, each at least `max(1, min_gap_days)` days after the previous.
/// Other conditions may be diagnosed in between.
pub fn count_trajectory_support(
    candidate: &[ConditionId],
    sequences: &Sequences,
    stratum: &Stratum,
    min_gap_days: i64,
) -> Trajectory {
    let gap = min_gap_days.max(1);
    let patient_ids = stratum
        .patient_ids
        .iter()
        .filter(|id| {
            sequences
                .get(*id)
                .is_some_and(|seq| follows(candidate, seq, gap))
        })
        .cloned()
        .collect();
    Trajectory {
        conditions: candidate.to_vec(),
        patient_ids,
    }
}

fn follows(candidate: &[ConditionId], seq: &FirstDiagnosisSequence, gap: i64) -> bool {
    let mut previous: Option<NaiveDate> = None;
    for &c in candidate {
        let Some(date) = seq.date_of(c) else {
            return false;
        };
        if let Some(prev) = previous {
            if (date - prev).num_days() < gap {
                return false;
            }
        }
        previous = Some(date);
    }
    true
}

/// Keeps, for each set of conditions, the ordering with the highest support
/// (ties go to the lexicographically smaller sequence), then drops anything
/// supported by fewer than `min_patients` patients.
pub fn dedup_trajectories(trajectories: Vec<Trajectory>, min_patients: usize) -> Vec<Trajectory> {
    let mut best: BTreeMap<Vec<ConditionId>, Trajectory> = BTreeMap::new();
    for t in trajectories {
        let key = t.condition_set();
        match best.get_mut(&key) {
            None => {
                best.insert(key, t);
            }
            Some(current) => {
                let replace = match t.support().cmp(&current.support()) {
                    std::cmp::Ordering::Greater => true,
                    std::cmp::Ordering::Less => false,
                    std::cmp::Ordering::Equal => {
                        log::warn!(
                            "trajectories {:?} and {:?} tie at support {}; keeping the lexicographically smaller",
                            current.conditions,
                            t.conditions,
                            t.support()
                        );
                        t.conditions < current.conditions
                    }
                };
                if replace {
                    *current = t;
                }
            }
        }
    }
    best.into_values()
        .filter(|t| t.support() >= min_patients)
        .collect()
}

fn canonical_order(trajectories: &mut [Trajectory]) {
    trajectories.sort_by(|a, b| {
        b.support()
            .cmp(&a.support())
            .then_with(|| a.conditions.cmp(&b.conditions))
    });
}

/// Build, count and deduplicate; ordered by support descending, then by sequence.
pub fn mine_trajectories(
    stratum: &Stratum,
    sequences: &Sequences,
    pairs: &[PairStats],
    config: &PipelineConfig,
) -> Vec<Trajectory> {
    let candidates =
        build_candidate_trajectories(pairs, config.traj_length, config.require_all_pairs);
    let counted: Vec<Trajectory> = candidates
        .iter()
        .map(|c| count_trajectory_support(c, sequences, stratum, config.traj_min_gap_days))
        .filter(|t| t.support() > 0)
        .collect();
    let mut retained = dedup_trajectories(counted, config.min_traj_patients);
    canonical_order(&mut retained);
    retained
}
