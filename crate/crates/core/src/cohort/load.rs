use std::collections::HashSet;
use std::path::{Path, PathBuf};

use super::{
    validate_patient, Catalog, Cohort, ConditionDef, ConditionId, DiagnosisEvent, HospitalStay,
    Patient, StudyWindow, SystemCategory,
};
use crate::error::{Error, Result};
use crate::io::CsvFile;

pub const PATIENT_COLUMNS: [&str; 7] = [
    "patient_id",
    "sex",
    "birth_date",
    "death_date",
    "cause_of_death_category",
    "wimd_quintile",
    "ethnicity",
];
pub const DIAGNOSIS_COLUMNS: [&str; 4] = ["patient_id", "condition_id", "event_date", "source"];
pub const STAY_COLUMNS: [&str; 3] = ["patient_id", "admission_date", "discharge_date"];
pub const CATALOG_COLUMNS: [&str; 3] = ["condition_id", "name", "system_category"];

/// Locations of the cohort input files.
#[derive(Debug, Clone)]
pub struct CohortPaths {
    pub patients: PathBuf,
    pub diagnoses: PathBuf,
    pub stays: Option<PathBuf>,
    pub catalog: PathBuf,
}

impl CohortPaths {
    /// Conventional file names inside `dir`; the stays file is optional.
    pub fn in_dir(dir: &Path) -> Self {
        let stays = dir.join("hospital_stays.csv");
        CohortPaths {
            patients: dir.join("patients.csv"),
            diagnoses: dir.join("diagnoses.csv"),
            stays: stays.is_file().then_some(stays),
            catalog: dir.join("catalog.csv"),
        }
    }
}

pub fn load_cohort(paths: &CohortPaths, window: StudyWindow) -> Result<Cohort> {
    let catalog = load_catalog(&paths.catalog)?;
    let patients = load_patients(&paths.patients)?;
    let ids: HashSet<&str> = patients.iter().map(|p| p.id.as_str()).collect();

    let file = CsvFile::input(&paths.diagnoses, &DIAGNOSIS_COLUMNS)?;
    let mut events = Vec::new();
    for row in file.rows() {
        let patient_id = row.get("patient_id");
        if !ids.contains(patient_id) {
            return Err(Error::UnresolvedKey {
                file: row.file().into(),
                line: row.line(),
                kind: "patient_id",
                key: patient_id.into(),
            });
        }
        let condition: ConditionId = row.parse("condition_id")?;
        if !catalog.contains(condition) {
            return Err(Error::UnresolvedKey {
                file: row.file().into(),
                line: row.line(),
                kind: "condition_id",
                key: condition.to_string(),
            });
        }
        events.push(DiagnosisEvent {
            patient_id: patient_id.to_string(),
            condition,
            date: row.date("event_date")?,
            source: row.parse("source")?,
        });
    }

    let stays = match &paths.stays {
        Some(path) => {
            let file = CsvFile::input(path, &STAY_COLUMNS)?;
            let mut stays = Vec::new();
            for row in file.rows() {
                let patient_id = row.get("patient_id");
                if !ids.contains(patient_id) {
                    return Err(Error::UnresolvedKey {
                        file: row.file().into(),
                        line: row.line(),
                        kind: "patient_id",
                        key: patient_id.into(),
                    });
                }
                let stay = HospitalStay {
                    patient_id: patient_id.to_string(),
                    admission: row.date("admission_date")?,
                    discharge: row.date("discharge_date")?,
                };
                if stay.discharge < stay.admission {
                    return Err(row.malformed("discharge_date precedes admission_date"));
                }
                stays.push(stay);
            }
            Some(stays)
        }
        None => None,
    };

    Cohort::new(catalog, window, patients, events, stays)
}

pub(crate) fn load_catalog(path: &Path) -> Result<Catalog> {
    let file = CsvFile::input(path, &CATALOG_COLUMNS)?;
    let mut seen = HashSet::new();
    let mut defs = Vec::new();
    for row in file.rows() {
        let id: ConditionId = row.parse("condition_id")?;
        if !seen.insert(id) {
            return Err(Error::Duplicate {
                file: row.file().into(),
                line: row.line(),
                kind: "condition_id",
                key: id.to_string(),
            });
        }
        let system: SystemCategory = row.parse("system_category")?;
        defs.push(ConditionDef {
            id,
            name: row.get("name").to_string(),
            system,
        });
    }
    Catalog::new(defs)
}

fn load_patients(path: &Path) -> Result<Vec<Patient>> {
    let file = CsvFile::input(path, &PATIENT_COLUMNS)?;
    let mut seen = HashSet::new();
    let mut patients = Vec::new();
    for row in file.rows() {
        let id = row.get("patient_id");
        if id.is_empty() {
            return Err(row.malformed("empty patient_id"));
        }
        if !seen.insert(id.to_string()) {
            return Err(Error::Duplicate {
                file: row.file().into(),
                line: row.line(),
                kind: "patient_id",
                key: id.into(),
            });
        }
        let ethnicity = row.get("ethnicity");
        let patient = Patient {
            id: id.to_string(),
            sex: row.parse("sex")?,
            birth_date: row.date("birth_date")?,
            death_date: row.date_opt("death_date")?,
            cause_of_death: row.parse_opt("cause_of_death_category")?,
            wimd_quintile: row.parse_opt("wimd_quintile")?,
            ethnicity: (!ethnicity.is_empty()).then(|| ethnicity.to_string()),
        };
        validate_patient(&patient).map_err(|e| row.malformed(e.to_string()))?;
        patients.push(patient);
    }
    Ok(patients)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;
    use std::fs;

    fn write(dir: &Path, name: &str, body: &str) {
        fs::write(dir.join(name), body).unwrap();
    }

    fn fixture(dir: &Path, extra_diag: &str) {
        write(
            dir,
            "catalog.csv",
            "condition_id,name,system_category\n1,Hypertension,circulatory\n2,Chronic Kidney Disease,genitourinary\n3,Epilepsy,nervous\n",
        );
        write(
            dir,
            "patients.csv",
            "patient_id,sex,birth_date,death_date,cause_of_death_category,wimd_quintile,ethnicity\n\
             p1,male,1960-03-01,,,1,White\n\
             p2,female,1985-07-12,2019-01-01,circulatory,,\n\
             p3,male,1950-01-01,,,5,Asian\n",
        );
        write(
            dir,
            "diagnoses.csv",
            &format!(
                "patient_id,condition_id,event_date,source\n\
                 p1,1,2005-01-01,primary\n\
                 p1,2,2008-05-01,secondary\n\
                 p2,3,2010-02-02,primary\n\
                 p3,1,2001-01-01,primary\n{extra_diag}"
            ),
        );
    }

    #[test]
    fn loads_well_formed_fixture() {
        let dir = tempfile::tempdir().unwrap();
        fixture(dir.path(), "");
        let cohort = load_cohort(&CohortPaths::in_dir(dir.path()), StudyWindow::default()).unwrap();
        assert_eq!(cohort.len(), 3);
        assert_eq!(cohort.events().len(), 4);
        assert_eq!(cohort.dropped_events(), 0);
        assert!(cohort.stays().is_none());
        let p2 = cohort.patient("p2").unwrap();
        assert_eq!(p2.death_date, NaiveDate::from_ymd_opt(2019, 1, 1));
        assert_eq!(p2.cause_of_death, Some(SystemCategory::Circulatory));
        assert_eq!(p2.wimd_quintile, None);
        assert_eq!(p2.ethnicity, None);
    }

    #[test]
    fn unknown_patient_names_the_row() {
        let dir = tempfile::tempdir().unwrap();
        fixture(dir.path(), "p9,1,2005-01-01,primary\n");
        let err = load_cohort(&CohortPaths::in_dir(dir.path()), StudyWindow::default()).unwrap_err();
        match err {
            Error::UnresolvedKey { line, key, .. } => {
                assert_eq!(line, 6);
                assert_eq!(key, "p9");
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn event_before_study_start_is_dropped() {
        let dir = tempfile::tempdir().unwrap();
        fixture(dir.path(), "p3,3,1999-12-31,primary\n");
        let cohort = load_cohort(&CohortPaths::in_dir(dir.path()), StudyWindow::default()).unwrap();
        assert_eq!(cohort.events().len(), 4);
        assert_eq!(cohort.dropped_events(), 1);
    }

    #[test]
    fn malformed_date_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        fixture(dir.path(), "p3,3,2001-13-01,primary\n");
        let err = load_cohort(&CohortPaths::in_dir(dir.path()), StudyWindow::default()).unwrap_err();
        assert!(matches!(err, Error::Malformed { line: 6, .. }), "{err}");
    }

    #[test]
    fn duplicate_patient_rejected() {
        let dir = tempfile::tempdir().unwrap();
        fixture(dir.path(), "");
        let mut body = fs::read_to_string(dir.path().join("patients.csv")).unwrap();
        body.push_str("p1,male,1960-03-01,,,1,White\n");
        write(dir.path(), "patients.csv", &body);
        let err = load_cohort(&CohortPaths::in_dir(dir.path()), StudyWindow::default()).unwrap_err();
        assert!(matches!(err, Error::Duplicate { kind: "patient_id", line: 5, .. }), "{err}");
    }

    #[test]
    fn missing_file_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let err = load_cohort(&CohortPaths::in_dir(dir.path()), StudyWindow::default()).unwrap_err();
        assert!(matches!(err, Error::MissingFile(_)), "{err}");
    }

    #[test]
    fn stays_are_loaded_when_present() {
        let dir = tempfile::tempdir().unwrap();
        fixture(dir.path(), "");
        write(
            dir.path(),
            "hospital_stays.csv",
            "patient_id,admission_date,discharge_date\np1,2010-01-01,2010-01-09\n",
        );
        let cohort = load_cohort(&CohortPaths::in_dir(dir.path()), StudyWindow::default()).unwrap();
        let stays = cohort.stays().unwrap();
        assert_eq!(stays.len(), 1);
        assert_eq!(stays[0].length_days(), 8);
    }
}
