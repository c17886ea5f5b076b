//! Pairwise condition association (Fisher + Bonferroni) and temporal direction
//! (binomial) within one stratum.

mod binomial;
mod bonferroni;
mod fisher;

use std::collections::BTreeMap;

use crate::cohort::{ConditionId, Sequences, Stratum};
use crate::config::PipelineConfig;
use crate::error::{Error, Result};

pub use binomial::{binomial_direction_test, Direction};
pub use bonferroni::bonferroni_adjust;
pub use fisher::{fisher_exact_two_sided, ContingencyTable};

/// One tested condition pair, canonical `c1 < c2`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairStats {
    pub c1: ConditionId,
    pub c2: ConditionId,
    pub table: ContingencyTable,
    pub fisher_p: f64,
    pub adjusted_p: f64,
    pub significant: bool,
    /// Patients with `c1` first by at least the minimum separation.
    pub n_fwd: u64,
    /// Patients with `c2` first by at least the minimum separation.
    pub n_bwd: u64,
    /// Only computed for Bonferroni-significant pairs.
    pub binomial_p: Option<f64>,
    pub direction: Direction,
}

impl PairStats {
    /// Whether a trajectory may step from `from` to `to` through this pair.
    pub fn allows(&self, from: ConditionId, to: ConditionId) -> bool {
        if !self.significant {
            return false;
        }
        let forward = from == self.c1 && to == self.c2;
        let backward = from == self.c2 && to == self.c1;
        match self.direction {
            Direction::Forward => forward,
            Direction::Backward => backward,
            Direction::Undirected => forward || backward,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct PairCounts {
    both: u64,
    fwd: u64,
    bwd: u64,
}

struct StratumCounts {
    n: u64,
    prevalence: BTreeMap<ConditionId, u64>,
    pairs: BTreeMap<(ConditionId, ConditionId), PairCounts>,
}

/// Ordered pairs need a gap of at least one day even when the configured
/// separation is zero: same-day first diagnoses carry no order.
fn effective_separation(min_separation_days: i64) -> i64 {
    min_separation_days.max(1)
}

fn count_stratum(stratum: &Stratum, sequences: &Sequences, min_separation_days: i64) -> StratumCounts {
    let sep = effective_separation(min_separation_days);
    let mut prevalence: BTreeMap<ConditionId, u64> = BTreeMap::new();
    let mut pairs: BTreeMap<(ConditionId, ConditionId), PairCounts> = BTreeMap::new();
    for id in &stratum.patient_ids {
        let Some(seq) = sequences.get(id) else { continue };
        for e in &seq.entries {
            *prevalence.entry(e.condition).or_default() += 1;
        }
        for (i, a) in seq.entries.iter().enumerate() {
            for b in &seq.entries[i + 1..] {
                let (lo, hi) = if a.condition < b.condition { (a, b) } else { (b, a) };
                let counts = pairs.entry((lo.condition, hi.condition)).or_default();
                counts.both += 1;
                let gap = (hi.first_date - lo.first_date).num_days();
                if gap >= sep {
                    counts.fwd += 1;
                } else if -gap >= sep {
                    counts.bwd += 1;
                }
            }
        }
    }
    StratumCounts {
        n: stratum.len() as u64,
        prevalence,
        pairs,
    }
}

/// Unordered pairs shared by at least `min_pair_patients` patients whose first
/// diagnoses are at least `min_separation_days` apart.
pub fn enumerate_candidate_pairs(
    stratum: &Stratum,
    sequences: &Sequences,
    min_pair_patients: usize,
    min_separation_days: i64,
) -> Vec<(ConditionId, ConditionId)> {
    count_stratum(stratum, sequences, min_separation_days)
        .pairs
        .into_iter()
        .filter(|(_, c)| c.fwd + c.bwd >= min_pair_patients as u64)
        .map(|(k, _)| k)
        .collect()
}

/// Tests every candidate pair of the stratum, sorted by co-occurrence count descending.
pub fn significant_pairs(
    stratum: &Stratum,
    sequences: &Sequences,
    config: &PipelineConfig,
) -> Result<Vec<PairStats>> {
    if stratum.is_empty() {
        return Err(Error::invalid(format!("stratum {} is empty", stratum.key)));
    }
    let counts = count_stratum(stratum, sequences, config.min_separation_days);
    let min_pairs = config.min_pair_patients as u64;

    let mut tested = Vec::new();
    for (&(c1, c2), pc) in &counts.pairs {
        if pc.fwd + pc.bwd < min_pairs {
            continue;
        }
        let with_c1 = counts.prevalence[&c1];
        let with_c2 = counts.prevalence[&c2];
        let table = if config.strict_table {
            // co-affected patients without an observable order leave the table
            ContingencyTable::new(
                pc.fwd + pc.bwd,
                with_c1 - pc.both,
                with_c2 - pc.both,
                counts.n - with_c1 - with_c2 + pc.both,
            )
        } else {
            ContingencyTable::new(
                pc.both,
                with_c1 - pc.both,
                with_c2 - pc.both,
                counts.n - with_c1 - with_c2 + pc.both,
            )
        };
        let fisher_p = fisher_exact_two_sided(&table)?;
        tested.push(PairStats {
            c1,
            c2,
            table,
            fisher_p,
            adjusted_p: fisher_p,
            significant: false,
            n_fwd: pc.fwd,
            n_bwd: pc.bwd,
            binomial_p: None,
            direction: Direction::Undirected,
        });
    }

    let p_values: Vec<f64> = tested.iter().map(|p| p.fisher_p).collect();
    for (pair, (adjusted, significant)) in tested
        .iter_mut()
        .zip(bonferroni_adjust(&p_values, config.alpha))
    {
        pair.adjusted_p = adjusted;
        pair.significant = significant;
        if significant {
            let (p, direction) = binomial_direction_test(
                pair.n_fwd,
                pair.n_bwd,
                config.direction_alpha,
                config.direction_test,
            )?;
            pair.binomial_p = Some(p);
            pair.direction = direction;
        }
    }
    tested.sort_by(|a, b| {
        b.table
            .n11
            .cmp(&a.table.n11)
            .then(a.c1.cmp(&b.c1))
            .then(a.c2.cmp(&b.c2))
    });
    Ok(tested)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohort::{FirstDiagnosisSequence, Sex, AgeGroup, StratumKey};
    use crate::test_oracles::binomial_doubled_tail;
    use chrono::{Duration, NaiveDate};
    use std::collections::BTreeSet;

    const A: ConditionId = ConditionId(1);
    const B: ConditionId = ConditionId(2);

    fn base() -> NaiveDate {
        NaiveDate::from_ymd_opt(2005, 1, 1).unwrap()
    }

    struct Fixture {
        stratum: Stratum,
        sequences: Sequences,
    }

    impl Fixture {
        fn new() -> Self {
            Fixture {
                stratum: Stratum {
                    key: StratumKey { sex: Sex::Male, age_group: AgeGroup::Ge45 },
                    patient_ids: BTreeSet::new(),
                },
                sequences: Sequences::new(),
            }
        }

        fn add(&mut self, events: &[(ConditionId, i64)]) {
            let id = format!("p{:04}", self.stratum.patient_ids.len());
            let seq = FirstDiagnosisSequence::from_events(
                id.clone(),
                events.iter().map(|&(c, off)| (c, base() + Duration::days(off))),
            );
            self.stratum.patient_ids.insert(id.clone());
            self.sequences.insert(id, seq);
        }

        fn add_n(&mut self, n: usize, events: &[(ConditionId, i64)]) {
            for _ in 0..n {
                self.add(events);
            }
        }
    }

    #[test]
    fn ten_separated_patients_qualify() {
        let mut f = Fixture::new();
        f.add_n(10, &[(A, 0), (B, 200)]);
        assert_eq!(enumerate_candidate_pairs(&f.stratum, &f.sequences, 10, 183), vec![(A, B)]);
    }

    #[test]
    fn nine_patients_do_not_qualify() {
        let mut f = Fixture::new();
        f.add_n(9, &[(A, 0), (B, 200)]);
        assert!(enumerate_candidate_pairs(&f.stratum, &f.sequences, 10, 183).is_empty());
    }

    #[test]
    fn only_separated_patients_count_toward_qualification() {
        let mut f = Fixture::new();
        f.add_n(8, &[(A, 0), (B, 400)]);
        f.add_n(4, &[(A, 0), (B, 100)]);
        // recount: 12 co-affected, 8 with gap >= 183
        let separated = f
            .sequences
            .values()
            .filter(|s| {
                let (a, b) = (s.date_of(A).unwrap(), s.date_of(B).unwrap());
                (b - a).num_days().abs() >= 183
            })
            .count();
        assert_eq!(separated, 8);
        assert!(enumerate_candidate_pairs(&f.stratum, &f.sequences, 10, 183).is_empty());
    }

    #[test]
    fn planted_forward_pair_is_significant() {
        let mut f = Fixture::new();
        f.add_n(40, &[(A, 0), (B, 365)]);
        f.add_n(5, &[(B, 0), (A, 365)]);
        f.add_n(30, &[(A, 0)]);
        f.add_n(25, &[(B, 0)]);
        f.add_n(400, &[(ConditionId(9), 0)]);
        assert_eq!(f.stratum.len(), 500);
        let pairs = significant_pairs(&f.stratum, &f.sequences, &PipelineConfig::default()).unwrap();
        assert_eq!(pairs.len(), 1);
        let p = &pairs[0];
        assert_eq!(p.table, ContingencyTable::new(45, 30, 25, 400));
        // exact rational enumeration, frozen
        let expected = 2.952_963_119_337_162_4e-26;
        assert!((p.fisher_p - expected).abs() / expected < 1e-9, "{}", p.fisher_p);
        assert_eq!(p.adjusted_p, p.fisher_p);
        assert!(p.significant);
        assert_eq!((p.n_fwd, p.n_bwd), (40, 5));
        let expected = binomial_doubled_tail(45, 40);
        assert!((p.binomial_p.unwrap() - expected).abs() < 1e-15);
        assert_eq!(p.direction, Direction::Forward);
        assert!(p.allows(A, B) && !p.allows(B, A));
    }

    #[test]
    fn same_day_pairs_count_in_table_but_not_direction() {
        let mut f = Fixture::new();
        f.add_n(12, &[(A, 0), (B, 300)]);
        f.add_n(6, &[(A, 0), (B, 0)]);
        f.add_n(50, &[(ConditionId(9), 0)]);
        let pairs = significant_pairs(&f.stratum, &f.sequences, &PipelineConfig::default()).unwrap();
        let p = &pairs[0];
        assert_eq!(p.table.n11, 18);
        assert_eq!(p.n_fwd + p.n_bwd, 12);
        assert!(p.n_fwd + p.n_bwd <= p.table.n11);
        assert_eq!(p.table.total(), f.stratum.len() as u64);

        let strict = PipelineConfig { strict_table: true, ..Default::default() };
        let q = &significant_pairs(&f.stratum, &f.sequences, &strict).unwrap()[0];
        assert_eq!(q.table.n11, 12);
        assert_eq!(q.table.total(), f.stratum.len() as u64 - 6);
    }

    #[test]
    fn empty_stratum_is_error() {
        let f = Fixture::new();
        assert!(significant_pairs(&f.stratum, &f.sequences, &PipelineConfig::default()).is_err());
    }
}
