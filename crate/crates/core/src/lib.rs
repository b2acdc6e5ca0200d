//! Shortest-path stability of road networks under small destination
//! perturbations.
//!
//! The building blocks are independent: [`graph`] loads networks,
//! [`routing`] finds deterministic shortest paths, [`sampling`] draws OD
//! pairs on concentric circles, [`perturbation`] picks nearby alternative
//! destinations, and [`stability`] compares the resulting routes.
//! [`pipeline`] ties them together with file outputs.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod geodesy;
pub mod graph;
pub mod map;
pub mod metrics;
pub mod perturbation;
pub mod pipeline;
pub mod routing;
pub mod sampling;
pub mod stability;
pub mod synth;

pub use error::{Error, Result};
pub use geodesy::GeoPoint;
pub use graph::{DirectedEdge, EdgeIdx, NodeIdx, RoadNetwork};
pub use perturbation::{PerturbationConfig, PerturbationSet, PerturbedDestination};
pub use routing::{shortest_path, shortest_path_between, Path};
pub use sampling::{OdPair, SamplingConfig};
pub use stability::{CitySummary, StabilityRecord};
pub use synth::{SynthKind, SynthSpec};
