//! On-disk formats: datasets, adaptation artifacts, evaluation reports,
//! run configuration and run manifests.
//!
//! Matrices are stored row-major. Text files are CSV with a JSON header;
//! floats are written in shortest round-trip form so that reading a file
//! back yields the same bits. The binary encoding is little-endian IEEE 754.

mod artifacts;
mod config;
mod dataset;
mod report;
mod table;
mod verify;

pub use artifacts::{
    read_artifacts, write_artifacts, ArtifactDomain, Artifacts, UnconvergedMean, ARTIFACTS_HEADER,
};
pub use config::{
    config_hash, file_digest, FileDigest, HubChoice, Manifest, RunConfig, MANIFEST_FILE,
};
pub use dataset::{
    read_dataset, write_dataset, DatasetDomain, DatasetHeader, Encoding, LabelKind, ASYMMETRY_TOLERANCE,
    BINARY_MAGIC, DATASET_HEADER,
};
pub use report::{read_embedding_csv, write_confusion_csv, write_embedding_csv, write_json};
pub use verify::{verify_artifacts, Check, VerifyReport, VERIFY_TOLERANCE};

/// Version written into every header and manifest.
pub const FORMAT_VERSION: u32 = 1;
