//! Simulation of marked renewal cluster point processes — Neyman-Scott,
//! Bartlett-Lewis and marked Hawkes variants — together with the estimators
//! needed to study the extreme-value behaviour of their running maxima.
//!
//! The crate splits into:
//!
//! * [`evt`], [`marks`], [`sequences`]: extreme value families, parametric
//!   claim families (one per max-domain of attraction), and the
//!   normalization sequences linking them, including the cluster-size index
//!   adjustment.
//! * [`maxima`]: maxima over a random, possibly claim-dependent, number of
//!   claims; block decomposition and the tail-ratio diagnostic.
//! * [`cluster`]: the full marked renewal cluster process on a finite
//!   horizon with exact leftover bookkeeping.
//! * [`hawkes`]: branching and thinning simulators for the marked Hawkes
//!   process, the Borel cluster-size law and the random-walk hitting-time
//!   correspondence.
//! * [`stats`]: goodness-of-fit machinery shared by the experiment suites.
//! * [`rng`]: splittable counter-based random streams for reproducible
//!   parallel Monte Carlo.

pub mod cluster;
pub mod error;
pub mod evt;
pub mod hawkes;
pub mod marks;
pub mod maxima;
pub mod rng;
pub mod sequences;
pub mod stats;

pub use cluster::{
    ClusterForm, ClusterGenerator, ClusterMechanism, OffsetLaw, ParentProcess,
    ProcessRealization, RealizationSummary, RenewalLaw, SizeLaw,
};
pub use error::SimError;
pub use evt::ExtremeValueFamily;
pub use hawkes::{FertilityModel, HawkesCluster, HawkesMechanism, Kernel};
pub use marks::{MarkEffect, MarkFamily, MarkModel};
pub use maxima::{ClusterSizePolicy, CountLaw, MaximaSample, PairCoupling, TailRatioEstimate};
pub use rng::RandomStream;
pub use sequences::{standard_sequences, AdjustedSequences, NormalizationSequences};
pub use stats::{EmpiricalDistribution, GofReport, TrendPoint, TrendVerdict};
