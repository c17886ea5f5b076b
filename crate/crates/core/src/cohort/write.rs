use std::path::Path;

use super::load::{CATALOG_COLUMNS, DIAGNOSIS_COLUMNS, PATIENT_COLUMNS, STAY_COLUMNS};
use super::{Catalog, DiagnosisEvent, HospitalStay, Patient};
use crate::error::Result;
use crate::io::{write_atomic, Cell, Table, DATE_FORMAT};

pub fn catalog_table(catalog: &Catalog) -> Table {
    let mut t = Table::new(&CATALOG_COLUMNS);
    for def in catalog.iter() {
        t.push(vec![
            Cell::Int(def.id.0 as i64),
            Cell::text(def.name.as_str()),
            Cell::text(def.system.as_str()),
        ]);
    }
    t
}

pub fn patients_table(patients: &[Patient]) -> Table {
    let mut t = Table::new(&PATIENT_COLUMNS);
    for p in patients {
        t.push(vec![
            Cell::text(p.id.as_str()),
            Cell::text(p.sex.as_str()),
            Cell::text(p.birth_date.format(DATE_FORMAT).to_string()),
            p.death_date
                .map_or(Cell::Empty, |d| Cell::text(d.format(DATE_FORMAT).to_string())),
            p.cause_of_death.map_or(Cell::Empty, |c| Cell::text(c.as_str())),
            p.wimd_quintile.map_or(Cell::Empty, |q| Cell::Int(q as i64)),
            p.ethnicity.as_deref().map_or(Cell::Empty, Cell::text),
        ]);
    }
    t
}

pub fn diagnoses_table(events: &[DiagnosisEvent]) -> Table {
    let mut t = Table::new(&DIAGNOSIS_COLUMNS);
    for e in events {
        t.push(vec![
            Cell::text(e.patient_id.as_str()),
            Cell::Int(e.condition.0 as i64),
            Cell::text(e.date.format(DATE_FORMAT).to_string()),
            Cell::text(e.source.as_str()),
        ]);
    }
    t
}

pub fn stays_table(stays: &[HospitalStay]) -> Table {
    let mut t = Table::new(&STAY_COLUMNS);
    for s in stays {
        t.push(vec![
            Cell::text(s.patient_id.as_str()),
            Cell::text(s.admission.format(DATE_FORMAT).to_string()),
            Cell::text(s.discharge.format(DATE_FORMAT).to_string()),
        ]);
    }
    t
}

/// Writes the cohort input files under their conventional names in `dir`.
pub fn write_cohort_files(
    dir: &Path,
    catalog: &Catalog,
    patients: &[Patient],
    events: &[DiagnosisEvent],
    stays: Option<&[HospitalStay]>,
) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| crate::error::Error::io(dir, e))?;
    write_atomic(&dir.join("catalog.csv"), &catalog_table(catalog).to_csv()?)?;
    write_atomic(&dir.join("patients.csv"), &patients_table(patients).to_csv()?)?;
    write_atomic(&dir.join("diagnoses.csv"), &diagnoses_table(events).to_csv()?)?;
    if let Some(stays) = stays {
        write_atomic(&dir.join("hospital_stays.csv"), &stays_table(stays).to_csv()?)?;
    }
    Ok(())
}
