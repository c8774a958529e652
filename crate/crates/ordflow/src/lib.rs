//! Intraday order-flow transition analysis.
//!
//! The library models tick-by-tick order events as a ten-state first-order
//! Markov chain, split by intraday time-zone and market-cap category:
//! ingestion and segmentation of the raw feed, G-tests for sequence
//! dependence, transition-matrix estimation and stationary analysis,
//! Jensen-Shannon comparison across time-zones, PCA embedding of the
//! matrices and DBSCAN clustering of the embedding, plus a seeded synthetic
//! generator used to validate the whole pipeline end to end.

pub mod cluster;
pub mod divergence;
pub mod domain;
pub mod dtmc;
pub mod embed;
pub mod gtest;
pub mod ingest;
pub mod pipeline;
pub mod synth;

pub use domain::{OrderEvent, OrderKind, TimeOfDay, TimeZoneSpec, STATE_COUNT};
pub use dtmc::{CountMatrix, StationaryDistribution, TransitionMatrix};
pub use ingest::SymbolSequence;
