use std::io;

use thiserror::Error;

/// Errors produced across ingestion, detection, evaluation and export.
#[derive(Debug, Error)]
pub enum Error {
    #[error("missing column `{0}` in CSV header")]
    MissingColumn(String),

    #[error("malformed row {row}: {reason}")]
    MalformedRow { row: usize, reason: String },

    #[error("no records match discharge type {discharge_type} and year {year}")]
    EmptySelection { discharge_type: String, year: i32 },

    #[error("graph has no nodes")]
    EmptyGraph,

    #[error("unknown node `{0}`")]
    UnknownNode(String),

    #[error("partition does not match graph: {0}")]
    PartitionMismatch(String),

    #[error("edge weight {0} is not an integer multiplicity")]
    NonIntegerWeights(f64),

    #[error("community {0} has no resident discharges")]
    NoResidentDischarges(usize),

    #[error("community {0} has zero strength")]
    ZeroStrength(usize),

    #[error("bootstrap requires at least one value")]
    EmptyValues,

    #[error("facility ZCTA `{0}` has no town assignment")]
    UnmappedFacility(String),

    #[error("ZCTA `{0}` has no adjacency entry")]
    MissingAdjacency(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("bad boundary file: {0}")]
    BadBoundaryFile(String),

    #[error("report schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
