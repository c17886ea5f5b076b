use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use chrono::NaiveDate;

use crate::cluster::ClusterResult;
use crate::cohort::{
    AgeAssignment, AgeGroup, ConditionId, DescriptiveReport, FirstDiagnosisSequence, PatientId,
    SequenceEntry, Sequences, Stratification, Stratum, StratumKey,
};
use crate::error::{Error, Result};
use crate::io::{Cell, CsvFile, Table, DATE_FORMAT};
use crate::pairstats::{ContingencyTable, Direction, PairStats};
use crate::trajectory::Trajectory;
use crate::trajnet::{SimilarityMatrix, TrajectoryNetwork};

pub fn stratum_file(stem: &str, key: StratumKey) -> String {
    format!("{stem}_{}.csv", key.label())
}

fn condition_columns(len: usize) -> Vec<String> {
    (1..=len).map(|i| format!("c{i}")).collect()
}

fn trajectory_length(file: &CsvFile) -> Result<usize> {
    let len = (1..)
        .take_while(|i| file.has_column(&format!("c{i}")))
        .count();
    if len == 0 {
        return Err(Error::Malformed {
            file: file.name.clone(),
            line: 1,
            message: "no condition columns c1, c2, ...".into(),
        });
    }
    Ok(len)
}

pub fn descriptive_table(report: &DescriptiveReport) -> Table {
    let mut t = Table::new(&[
        "subgroup",
        "value",
        "n",
        "mean_ltc",
        "sd_ltc",
        "mltc_pct",
        "one_ltc_pct",
        "zero_ltc_pct",
        "physical_mental_pct",
    ]);
    for r in &report.rows {
        t.push(vec![
            Cell::text(r.kind.as_str()),
            Cell::text(r.value.as_str()),
            Cell::from(r.n),
            Cell::opt_float(r.mean_ltc),
            Cell::opt_float(r.sd_ltc),
            Cell::opt_float(r.mltc_pct),
            Cell::opt_float(r.one_ltc_pct),
            Cell::opt_float(r.zero_ltc_pct),
            Cell::opt_float(r.physical_mental_pct),
        ]);
    }
    t
}

const STRATUM_COLUMNS: [&str; 4] = ["patient_id", "age_years", "age_group", "no_events"];

pub fn stratum_table(stratum: &Stratum, stratification: &Stratification) -> Table {
    let mut t = Table::new(&STRATUM_COLUMNS);
    for id in &stratum.patient_ids {
        let age = &stratification.ages[id];
        t.push(vec![
            Cell::text(id.as_str()),
            Cell::from(age.age_years),
            Cell::text(age.group.as_str()),
            Cell::from(age.no_events),
        ]);
    }
    t
}

pub fn read_stratum(dir: &Path, key: StratumKey) -> Result<(Stratum, BTreeMap<PatientId, AgeAssignment>)> {
    let file = CsvFile::artifact(&dir.join(stratum_file("stratum", key)), &STRATUM_COLUMNS)?;
    let mut patient_ids = BTreeSet::new();
    let mut ages = BTreeMap::new();
    for row in file.rows() {
        let id = row.get("patient_id").to_string();
        let group: AgeGroup = row.parse("age_group")?;
        if group != key.age_group {
            return Err(row.malformed(format!("age group {group} outside stratum {key}")));
        }
        ages.insert(
            id.clone(),
            AgeAssignment {
                age_years: row.parse("age_years")?,
                group,
                no_events: row.parse("no_events")?,
            },
        );
        if !patient_ids.insert(id) {
            return Err(row.malformed("duplicate patient_id"));
        }
    }
    Ok((Stratum { key, patient_ids }, ages))
}

const SEQUENCE_COLUMNS: [&str; 5] = ["patient_id", "position", "condition_id", "first_date", "tied"];

pub fn sequences_table(stratum: &Stratum, sequences: &Sequences) -> Table {
    let mut t = Table::new(&SEQUENCE_COLUMNS);
    for id in &stratum.patient_ids {
        let Some(seq) = sequences.get(id) else { continue };
        for (i, e) in seq.entries.iter().enumerate() {
            t.push(vec![
                Cell::text(id.as_str()),
                Cell::from(i + 1),
                Cell::Int(e.condition.0 as i64),
                Cell::text(e.first_date.format(DATE_FORMAT).to_string()),
                Cell::from(e.tied),
            ]);
        }
    }
    t
}

/// Sequences of every stratum member; members without diagnoses get empty sequences.
pub fn read_sequences(dir: &Path, stratum: &Stratum) -> Result<Sequences> {
    let file = CsvFile::artifact(&dir.join(stratum_file("sequences", stratum.key)), &SEQUENCE_COLUMNS)?;
    let mut sequences: Sequences = stratum
        .patient_ids
        .iter()
        .map(|id| {
            (
                id.clone(),
                FirstDiagnosisSequence {
                    patient_id: id.clone(),
                    entries: Vec::new(),
                },
            )
        })
        .collect();
    for row in file.rows() {
        let id = row.get("patient_id");
        let seq = sequences
            .get_mut(id)
            .ok_or_else(|| row.malformed(format!("patient `{id}` is not in stratum {}", stratum.key)))?;
        let position: usize = row.parse("position")?;
        if position != seq.entries.len() + 1 {
            return Err(row.malformed("sequence positions must be consecutive"));
        }
        let first_date: NaiveDate = row.date("first_date")?;
        seq.entries.push(SequenceEntry {
            condition: row.parse("condition_id")?,
            first_date,
            tied: row.parse("tied")?,
        });
    }
    Ok(sequences)
}

const PAIR_COLUMNS: [&str; 13] = [
    "c1",
    "c2",
    "n11",
    "n10",
    "n01",
    "n00",
    "fisher_p",
    "adjusted_p",
    "significant",
    "n_fwd",
    "n_bwd",
    "binomial_p",
    "direction",
];

pub fn pairs_table(pairs: &[PairStats]) -> Table {
    let mut t = Table::new(&PAIR_COLUMNS);
    for p in pairs {
        t.push(vec![
            Cell::Int(p.c1.0 as i64),
            Cell::Int(p.c2.0 as i64),
            Cell::Int(p.table.n11 as i64),
            Cell::Int(p.table.n10 as i64),
            Cell::Int(p.table.n01 as i64),
            Cell::Int(p.table.n00 as i64),
            Cell::prob(p.fisher_p),
            Cell::prob(p.adjusted_p),
            Cell::from(p.significant),
            Cell::Int(p.n_fwd as i64),
            Cell::Int(p.n_bwd as i64),
            p.binomial_p.map_or(Cell::Empty, Cell::prob),
            Cell::text(p.direction.as_str()),
        ]);
    }
    t
}

pub fn read_pairs(dir: &Path, key: StratumKey) -> Result<Vec<PairStats>> {
    let file = CsvFile::artifact(&dir.join(stratum_file("pairs", key)), &PAIR_COLUMNS)?;
    let mut pairs = Vec::new();
    for row in file.rows() {
        let c1: ConditionId = row.parse("c1")?;
        let c2: ConditionId = row.parse("c2")?;
        if c1 >= c2 {
            return Err(row.malformed("pairs must be listed with c1 < c2"));
        }
        let direction: Direction = row.parse("direction")?;
        pairs.push(PairStats {
            c1,
            c2,
            table: ContingencyTable::new(
                row.parse("n11")?,
                row.parse("n10")?,
                row.parse("n01")?,
                row.parse("n00")?,
            ),
            fisher_p: row.parse("fisher_p")?,
            adjusted_p: row.parse("adjusted_p")?,
            significant: row.parse("significant")?,
            n_fwd: row.parse("n_fwd")?,
            n_bwd: row.parse("n_bwd")?,
            binomial_p: row.parse_opt("binomial_p")?,
            direction,
        });
    }
    Ok(pairs)
}

pub fn trajectories_table(trajectories: &[Trajectory], length: usize) -> Table {
    let mut header = vec!["traj_index".to_string()];
    header.extend(condition_columns(length));
    header.push("support".into());
    let mut t = Table::new(&header);
    for (i, traj) in trajectories.iter().enumerate() {
        let mut row = vec![Cell::from(i)];
        row.extend(traj.conditions.iter().map(|c| Cell::Int(c.0 as i64)));
        row.push(Cell::from(traj.support()));
        t.push(row);
    }
    t
}

pub fn members_table(trajectories: &[Trajectory]) -> Table {
    let mut t = Table::new(&["traj_index", "patient_id"]);
    for (i, traj) in trajectories.iter().enumerate() {
        for id in &traj.patient_ids {
            t.push(vec![Cell::from(i), Cell::text(id.as_str())]);
        }
    }
    t
}

fn read_conditions(row: &crate::io::Row<'_>, len: usize) -> Result<Vec<ConditionId>> {
    (1..=len).map(|i| row.parse(&format!("c{i}"))).collect()
}

fn check_index(row: &crate::io::Row<'_>, expected: usize) -> Result<()> {
    let index: usize = row.parse("traj_index")?;
    if index != expected {
        return Err(row.malformed(format!("expected traj_index {expected}, found {index}")));
    }
    Ok(())
}

/// Trajectories with their member patients, in artifact order.
pub fn read_trajectories(dir: &Path, key: StratumKey) -> Result<Vec<Trajectory>> {
    let file = CsvFile::artifact(&dir.join(stratum_file("trajectories", key)), &["traj_index", "support"])?;
    let len = trajectory_length(&file)?;
    let mut trajectories = Vec::new();
    let mut supports = Vec::new();
    for row in file.rows() {
        check_index(&row, trajectories.len())?;
        trajectories.push(Trajectory {
            conditions: read_conditions(&row, len)?,
            patient_ids: BTreeSet::new(),
        });
        supports.push(row.parse::<usize>("support")?);
    }
    let members = CsvFile::artifact(
        &dir.join(stratum_file("trajectory_members", key)),
        &["traj_index", "patient_id"],
    )?;
    for row in members.rows() {
        let i: usize = row.parse("traj_index")?;
        let traj = trajectories
            .get_mut(i)
            .ok_or_else(|| row.malformed(format!("unknown traj_index {i}")))?;
        traj.patient_ids.insert(row.get("patient_id").to_string());
    }
    for (i, (t, s)) in trajectories.iter().zip(&supports).enumerate() {
        if t.support() != *s {
            return Err(Error::invalid(format!(
                "trajectory {i} of {key} lists support {s} but has {} members",
                t.support()
            )));
        }
    }
    Ok(trajectories)
}

pub fn edges_table(network: &TrajectoryNetwork) -> Result<Table> {
    let mut t = Table::new(&["c1", "c2", "frequency", "weight"]);
    for (&(a, b), &f) in network.edges() {
        t.push(vec![
            Cell::Int(a.0 as i64),
            Cell::Int(b.0 as i64),
            Cell::Int(f as i64),
            Cell::float(crate::trajnet::edge_weight(f)?),
        ]);
    }
    Ok(t)
}

pub fn similarity_table(matrix: &SimilarityMatrix) -> Table {
    let n = matrix.order();
    let mut header = vec!["traj_index".to_string()];
    header.extend((0..n).map(|j| j.to_string()));
    let mut t = Table::new(&header);
    for i in 0..n {
        let mut row = vec![Cell::from(i)];
        row.extend(matrix.row(i).iter().map(|&v| Cell::float(v)));
        t.push(row);
    }
    t
}

pub fn read_similarity(dir: &Path, key: StratumKey) -> Result<SimilarityMatrix> {
    let file = CsvFile::artifact(&dir.join(stratum_file("similarity_matrix", key)), &["traj_index"])?;
    let n = file.header_len() - 1;
    let mut rows = Vec::with_capacity(n);
    for row in file.rows() {
        check_index(&row, rows.len())?;
        if row.len() != n + 1 {
            return Err(row.malformed("ragged similarity row"));
        }
        let values: Result<Vec<f64>> = (0..n).map(|j| row.parse(&j.to_string())).collect();
        rows.push(values?);
    }
    if rows.len() != n {
        return Err(Error::Malformed {
            file: file.name.clone(),
            line: 1,
            message: format!("{} rows for {n} columns", rows.len()),
        });
    }
    SimilarityMatrix::from_rows(rows)
}

pub fn ch_table(result: &ClusterResult) -> Table {
    let mut t = Table::new(&["k", "score"]);
    for (&k, &score) in &result.ch_scores {
        t.push(vec![Cell::from(k), Cell::float(score)]);
    }
    t
}

pub fn embedding_table(result: &ClusterResult) -> Table {
    let dims = result.embedding.ncols();
    let mut header = vec!["traj_index".to_string(), "isolated".to_string()];
    header.extend((1..=dims).map(|d| format!("e{d}")));
    let mut t = Table::new(&header);
    for i in 0..result.embedding.nrows() {
        let mut row = vec![Cell::from(i), Cell::from(result.isolated.contains(&i))];
        row.extend(result.embedding.row(i).iter().map(|&v| Cell::float(v)));
        t.push(row);
    }
    t
}

pub fn clusters_table(trajectories: &[Trajectory], labels: &[usize], length: usize) -> Table {
    let mut header = vec!["traj_index".to_string()];
    header.extend(condition_columns(length));
    header.extend(["support".to_string(), "cluster_label".to_string()]);
    let mut t = Table::new(&header);
    for (i, (traj, &label)) in trajectories.iter().zip(labels).enumerate() {
        let mut row = vec![Cell::from(i)];
        row.extend(traj.conditions.iter().map(|c| Cell::Int(c.0 as i64)));
        row.extend([Cell::from(traj.support()), Cell::from(label)]);
        t.push(row);
    }
    t
}

/// Cluster labels checked against the trajectories they were computed for.
pub fn read_cluster_labels(dir: &Path, key: StratumKey, trajectories: &[Trajectory]) -> Result<Vec<usize>> {
    let file = CsvFile::artifact(
        &dir.join(stratum_file("clusters", key)),
        &["traj_index", "support", "cluster_label"],
    )?;
    let len = trajectory_length(&file)?;
    let mut labels = Vec::new();
    for row in file.rows() {
        let i = labels.len();
        check_index(&row, i)?;
        let conditions = read_conditions(&row, len)?;
        if trajectories.get(i).map(|t| &t.conditions) != Some(&conditions) {
            return Err(row.malformed("cluster assignments do not match trajectories"));
        }
        labels.push(row.parse("cluster_label")?);
    }
    if labels.len() != trajectories.len() {
        return Err(Error::invalid(format!(
            "{} cluster labels for {} trajectories in {key}",
            labels.len(),
            trajectories.len()
        )));
    }
    Ok(labels)
}
