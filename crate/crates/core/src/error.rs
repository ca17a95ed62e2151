//! Simulation errors shared by the samplers.

use thiserror::Error;

/// Per-cluster iteration cap: a stopping time that has not resolved after
/// this many draws is reported as an error, never silently truncated.
pub const ITERATION_CAP: u64 = 10_000_000;

/// Generation cap for branching cascades.
pub const GENERATION_CAP: u64 = 10_000;

/// Total-size cap for branching cascades.
pub const SIZE_CAP: u64 = 10_000_000;

/// State captured when a sampler hits a cap, sufficient to decide whether a
/// tail event was already determined at the time of the cap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapState {
    /// Largest claim observed before the cap (None if nothing was drawn).
    pub partial_max: Option<f64>,
    /// Number of draws consumed.
    pub draws: u64,
    /// For fixed-threshold stopping rules, the realized threshold W1: the
    /// final maximum is guaranteed to exceed it even though it was never
    /// reached within the cap.
    pub pending_threshold: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("iteration cap {cap} exceeded after {} draws", state.draws)]
    IterationCap { cap: u64, state: CapState },
    #[error("generation cap {cap} exceeded (cluster size {size_so_far}); subcriticality misconfigured?")]
    GenerationCap { cap: u64, size_so_far: u64 },
    #[error("cluster size cap {cap} exceeded; subcriticality misconfigured?")]
    SizeCap { cap: u64 },
    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),
}
