//! Hospital service area delineation from patient-flow networks.
//!
//! The pipeline aggregates discharge records into ZCTA-to-facility flows,
//! builds an undirected weighted network, partitions it with one of four
//! community detection algorithms and scores the resulting service areas.

pub mod baseline;
pub mod detect;
pub mod error;
pub mod evaluate;
pub mod geojson;
pub mod graph;
pub mod ingest;
pub mod synth;

pub use error::{Error, Result};
