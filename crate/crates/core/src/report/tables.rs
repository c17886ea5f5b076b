use super::{ClusterReport, TimingStats};
use crate::cohort::{Catalog, ConditionId, SystemCategory};
use crate::io::{Cell, Table};

/// Decimal places for percentages, rates and person-years in report files.
pub const REPORT_DECIMALS: usize = 4;

fn fixed(x: f64) -> Cell {
    Cell::fixed(x, REPORT_DECIMALS)
}

pub fn cluster_report_table(reports: &[ClusterReport]) -> Table {
    let mut header: Vec<String> = ["cluster_label", "n_traj", "n_patients_total", "n_patients_unique"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend(SystemCategory::ALL.iter().map(|c| format!("sys_{}", c.as_str())));
    header.extend(
        [
            "n_deaths",
            "mortality_pct",
            "person_years",
            "mortality_rate_per_100py",
            "n_long_stay",
            "long_stay_pct",
            "mean_age",
            "sd_age",
        ]
        .iter()
        .map(|s| s.to_string()),
    );
    let mut t = Table::new(&header);
    for r in reports {
        let mut row = vec![
            Cell::from(r.cluster_label),
            Cell::from(r.n_traj),
            Cell::from(r.n_patients_total),
            Cell::from(r.n_patients_unique),
        ];
        row.extend(SystemCategory::ALL.iter().map(|c| fixed(r.system_distribution[c])));
        row.extend([
            Cell::from(r.n_deaths),
            fixed(r.mortality_pct),
            fixed(r.person_years),
            fixed(r.mortality_rate_per_100py),
            r.n_long_stay.map_or(Cell::Empty, Cell::from),
            Cell::opt_fixed(r.long_stay_pct, REPORT_DECIMALS),
            fixed(r.mean_age),
            Cell::opt_fixed(r.sd_age, REPORT_DECIMALS),
        ]);
        t.push(row);
    }
    t
}

pub fn cluster_conditions_table(reports: &[ClusterReport], catalog: &Catalog) -> Table {
    let mut t = Table::new(&["cluster_label", "condition_id", "name", "system_category", "pct_traj"]);
    for r in reports {
        for (&c, &pct) in &r.condition_prevalence {
            t.push(vec![
                Cell::from(r.cluster_label),
                Cell::Int(c.0 as i64),
                Cell::text(catalog.name(c).unwrap_or_default()),
                catalog.system(c).map_or(Cell::Empty, |s| Cell::text(s.as_str())),
                fixed(pct),
            ]);
        }
    }
    t
}

pub fn cause_of_death_table(reports: &[ClusterReport]) -> Table {
    let mut t = Table::new(&["cluster_label", "rank", "category", "deaths", "pct"]);
    for r in reports {
        for (rank, share) in r.cause_of_death_top5.iter().enumerate() {
            t.push(vec![
                Cell::from(r.cluster_label),
                Cell::from(rank + 1),
                Cell::text(share.category.as_str()),
                Cell::from(share.deaths),
                fixed(share.pct),
            ]);
        }
    }
    t
}

pub fn pair_timing_table(rows: &[(ConditionId, ConditionId, TimingStats)]) -> Table {
    let mut t = Table::new(&["c1", "c2", "n_patients", "mean_years", "sd_years"]);
    for (c1, c2, s) in rows {
        t.push(vec![
            Cell::Int(c1.0 as i64),
            Cell::Int(c2.0 as i64),
            Cell::from(s.n_patients),
            fixed(s.mean_years),
            Cell::opt_fixed(s.sd_years, REPORT_DECIMALS),
        ]);
    }
    t
}
