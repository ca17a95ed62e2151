//! Config-driven experiment harness around the `clustermax` library:
//! parses experiment definitions, fans replications out over disjoint seed
//! streams, aggregates, and emits CSV/JSON results plus plot data.

pub mod config;
pub mod experiments;
pub mod runner;
