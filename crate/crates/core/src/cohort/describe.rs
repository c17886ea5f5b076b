use std::collections::BTreeMap;
use std::fmt;

use super::{Cohort, Patient, Sequences, Stratification, SystemCategory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SubgroupKind {
    All,
    Sex,
    AgeGroup,
    Ethnicity,
    Wimd,
}

impl SubgroupKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SubgroupKind::All => "all",
            SubgroupKind::Sex => "sex",
            SubgroupKind::AgeGroup => "age_group",
            SubgroupKind::Ethnicity => "ethnicity",
            SubgroupKind::Wimd => "wimd_quintile",
        }
    }
}

impl fmt::Display for SubgroupKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Summary of LTC burden in one subgroup. Percentages are in [0, 100];
/// every statistic is `None` for an empty subgroup, and `sd_ltc` also for N = 1.
#[derive(Debug, Clone, PartialEq)]
pub struct SubgroupStats {
    pub kind: SubgroupKind,
    pub value: String,
    pub n: usize,
    pub mean_ltc: Option<f64>,
    pub sd_ltc: Option<f64>,
    pub mltc_pct: Option<f64>,
    pub one_ltc_pct: Option<f64>,
    pub zero_ltc_pct: Option<f64>,
    pub physical_mental_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DescriptiveReport {
    pub rows: Vec<SubgroupStats>,
}

impl DescriptiveReport {
    pub fn subgroup(&self, kind: SubgroupKind, value: &str) -> Option<&SubgroupStats> {
        self.rows.iter().find(|r| r.kind == kind && r.value == value)
    }

    pub fn of_kind(&self, kind: SubgroupKind) -> impl Iterator<Item = &SubgroupStats> {
        self.rows.iter().filter(move |r| r.kind == kind)
    }
}

#[derive(Default, Clone, Copy)]
struct Burden {
    ltc: usize,
    physical_mental: bool,
}

const MISSING: &str = "missing";

pub fn descriptive_stats(
    cohort: &Cohort,
    sequences: &Sequences,
    strata: &Stratification,
) -> DescriptiveReport {
    let catalog = cohort.catalog();
    let burden = |p: &Patient| -> Burden {
        let Some(seq) = sequences.get(&p.id) else {
            return Burden::default();
        };
        let mut mental = false;
        let mut physical = false;
        for c in seq.conditions() {
            match catalog.system(c) {
                Some(SystemCategory::Mental) => mental = true,
                Some(_) => physical = true,
                None => {}
            }
        }
        Burden {
            ltc: seq.len(),
            physical_mental: mental && physical,
        }
    };

    let mut groups: BTreeMap<(SubgroupKind, String), Vec<Burden>> = BTreeMap::new();
    // seed fixed-level subgroups so empty ones still produce N = 0 rows
    groups.insert((SubgroupKind::All, "all".into()), Vec::new());
    for sex in ["male", "female"] {
        groups.insert((SubgroupKind::Sex, sex.into()), Vec::new());
    }
    for g in ["lt45", "ge45"] {
        groups.insert((SubgroupKind::AgeGroup, g.into()), Vec::new());
    }
    for q in ["1", "2", "3", "4", "5", MISSING] {
        groups.insert((SubgroupKind::Wimd, q.into()), Vec::new());
    }
    groups.insert((SubgroupKind::Ethnicity, MISSING.into()), Vec::new());

    for p in cohort.patients() {
        let b = burden(p);
        let mut push = |kind, value: String| groups.entry((kind, value)).or_default().push(b);
        push(SubgroupKind::All, "all".into());
        push(SubgroupKind::Sex, p.sex.to_string());
        if let Some(age) = strata.ages.get(&p.id) {
            push(SubgroupKind::AgeGroup, age.group.to_string());
        }
        push(
            SubgroupKind::Ethnicity,
            p.ethnicity.clone().unwrap_or_else(|| MISSING.into()),
        );
        push(
            SubgroupKind::Wimd,
            p.wimd_quintile.map_or_else(|| MISSING.into(), |q| q.to_string()),
        );
    }

    let rows = groups
        .into_iter()
        .map(|((kind, value), members)| summarize(kind, value, &members))
        .collect();
    DescriptiveReport { rows }
}

fn summarize(kind: SubgroupKind, value: String, members: &[Burden]) -> SubgroupStats {
    let n = members.len();
    if n == 0 {
        return SubgroupStats {
            kind,
            value,
            n,
            mean_ltc: None,
            sd_ltc: None,
            mltc_pct: None,
            one_ltc_pct: None,
            zero_ltc_pct: None,
            physical_mental_pct: None,
        };
    }
    let nf = n as f64;
    let mean = members.iter().map(|b| b.ltc as f64).sum::<f64>() / nf;
    let sd = (n > 1).then(|| {
        let ss: f64 = members.iter().map(|b| (b.ltc as f64 - mean).powi(2)).sum();
        (ss / (nf - 1.0)).sqrt()
    });
    let pct = |count: usize| 100.0 * count as f64 / nf;
    SubgroupStats {
        kind,
        value,
        n,
        mean_ltc: Some(mean),
        sd_ltc: sd,
        mltc_pct: Some(pct(members.iter().filter(|b| b.ltc >= 2).count())),
        one_ltc_pct: Some(pct(members.iter().filter(|b| b.ltc == 1).count())),
        zero_ltc_pct: Some(pct(members.iter().filter(|b| b.ltc == 0).count())),
        physical_mental_pct: Some(pct(members.iter().filter(|b| b.physical_mental).count())),
    }
}
