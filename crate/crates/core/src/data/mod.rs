//! Cohort schema, synthetic generation, preprocessing and splitting.

pub mod generate;
pub mod preprocess;
pub mod record;
pub mod split;
pub mod targets;
pub mod vocab;

pub use generate::{generate_cohort, summarize, CohortSummary, GenConfig};
pub use preprocess::{
    discretize_labs, discretize_value, encode_static, encode_visit, fit_lab_stats, fit_static_stats, Bucket, LabEncoding,
    LabStat, LabStats, Preprocessor, StaticStats, UnknownTokenPolicy,
};
pub use record::{read_cohort, write_cohort, EndpointEvent, EndpointKind, PatientRecord, StaticValue, Visit};
pub use split::{split_patients, Split};
pub use targets::{build_targets, label_index, HORIZONS, LABEL_NAMES};
pub use vocab::{StaticFeature, Vocabulary};

/// Model-ready patient: dense static vector, one encoded row per visit, and
/// per-visit target rows with their evaluability mask.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedPatient {
    pub id: String,
    pub static_features: Vec<f64>,
    pub visits: Vec<Vec<f64>>,
    pub targets: Vec<Vec<f64>>,
    pub mask: Vec<Vec<bool>>,
}
