#![allow(dead_code)]

pub mod oracles;

use std::path::{Path, PathBuf};

use mltc_core::synth::{generate_cohort, SynthCohort, SynthSpec};

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn two_group_spec() -> SynthSpec {
    SynthSpec::from_file(&fixture("two_groups.toml")).unwrap()
}

/// Generates the two-group cohort into `dir` and returns it.
pub fn write_two_group_cohort(dir: &Path) -> SynthCohort {
    let synth = generate_cohort(&two_group_spec()).unwrap();
    synth.write(dir).unwrap();
    synth
}

/// Every regular file in `dir` except the manifest, with contents.
pub fn artifact_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file() && p.file_name().unwrap() != "manifest.json")
        .map(|p| {
            let name = p.file_name().unwrap().to_string_lossy().into_owned();
            (name, std::fs::read(&p).unwrap())
        })
        .collect();
    files.sort();
    files
}
