//! Temporal multimorbidity trajectory mining and network-based trajectory clustering.
//!
//! The pipeline runs per sex × age stratum:
//!
//! 1. [`cohort`]: load diagnosis records, derive first-diagnosis sequences, stratify.
//! 2. [`pairstats`]: Fisher exact association with Bonferroni correction, then a
//!    binomial test of temporal direction for the significant pairs.
//! 3. [`trajectory`]: compose directed pairs into length-3 trajectories and count
//!    the patients that follow them.
//! 4. [`trajnet`]: build the undirected trajectory condition network, weight
//!    edges by `1/sqrt(frequency)`, and score trajectory similarity from
//!    shortest-path condition similarity.
//! 5. [`cluster`]: spectral clustering of the similarity matrix, choosing the
//!    number of clusters by Calinski-Harabasz score.
//! 6. [`report`]: per-cluster system distributions, mortality and hospital stays.
//!
//! [`synth`] generates seeded cohorts with planted trajectories, and
//! [`pipeline`] chains the stages through persisted CSV artifacts.

pub mod cluster;
pub mod cohort;
pub mod config;
pub mod error;
mod io;
pub mod pairstats;
pub mod pipeline;
pub mod report;
pub mod synth;
pub mod trajectory;
pub mod trajnet;

#[cfg(test)]
#[path = "../tests/common/oracles.rs"]
mod test_oracles;

pub use cohort::{
    Catalog, Cohort, ConditionDef, ConditionId, DiagnosisEvent, HospitalStay, Patient, PatientId,
    Sex, Source, StratumKey, StudyWindow, SystemCategory,
};
pub use config::{DirectionTest, EdgeWeighting, PipelineConfig};
pub use error::{Error, Result};
pub use io::{Cell, Table};
pub use pairstats::{ContingencyTable, Direction, PairStats};
pub use cluster::ClusterResult;
pub use pipeline::{run_pipeline, Manifest, OutputFormat, PipelineOutcome};
pub use report::ClusterReport;
pub use synth::{adjusted_rand_index, SynthSpec};
pub use trajectory::Trajectory;
pub use trajnet::{SimilarityMatrix, TrajectoryNetwork};
