//! Marked renewal cluster processes.
//!
//! A parent renewal process delivers ancestors `(Γ_i, A_i)`; every ancestor
//! spawns a finite cluster of offspring claims at nonnegative offsets. Two
//! offset geometries are shipped:
//!
//! * mixed binomial: offspring sit at i.i.d. offsets `V_{i,j}` from the
//!   ancestor,
//! * renewal cluster: offspring sit at the partial sums
//!   `T_{i,j} = V_{i,1} + ... + V_{i,j}`.
//!
//! A realization on `[0, t]` tracks the running maximum `M(t)` over claims
//! arriving by `t`, the first-passage index `τ(t) = inf{n : Γ_n > t}`, the
//! maximum `H_τ` of the first cluster starting after `t`, and the leftover
//! claims of earlier ancestors that arrive after `t` (their maximum `ε_t`
//! and count `J_t`). These recombine exactly as
//! `M^τ(t) = M(t) ∨ H_τ ∨ ε_t`, which is asserted per realization in debug
//! builds.

use crate::error::SimError;
use crate::marks::{MarkEffect, MarkModel};
use crate::maxima::CountLaw;
use crate::rng::RandomStream;
use rand_distr::{Distribution, Poisson};
use std::io::{self, Write};

/// Inter-arrival law of the parent renewal process.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RenewalLaw {
    Exponential { rate: f64 },
    Deterministic { value: f64 },
    Uniform { lo: f64, hi: f64 },
}

impl RenewalLaw {
    pub fn mean(&self) -> f64 {
        match *self {
            RenewalLaw::Exponential { rate } => 1.0 / rate,
            RenewalLaw::Deterministic { value } => value,
            RenewalLaw::Uniform { lo, hi } => 0.5 * (lo + hi),
        }
    }

    fn sample(&self, rng: &mut RandomStream) -> f64 {
        match *self {
            RenewalLaw::Exponential { rate } => -rng.open01().ln() / rate,
            RenewalLaw::Deterministic { value } => value,
            RenewalLaw::Uniform { lo, hi } => lo + (hi - lo) * rng.open01(),
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let ok = match *self {
            RenewalLaw::Exponential { rate } => rate.is_finite() && rate > 0.0,
            RenewalLaw::Deterministic { value } => value.is_finite() && value > 0.0,
            RenewalLaw::Uniform { lo, hi } => lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo < hi,
        };
        if ok {
            Ok(())
        } else {
            Err(SimError::InvalidConfiguration(format!(
                "invalid renewal law {self:?}"
            )))
        }
    }
}

/// Parent (immigrant) renewal process with `0 < E[Y] = 1/ν < ∞`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParentProcess {
    law: RenewalLaw,
}

impl ParentProcess {
    pub fn new(law: RenewalLaw) -> Result<Self, SimError> {
        law.validate()?;
        Ok(ParentProcess { law })
    }

    pub fn law(&self) -> RenewalLaw {
        self.law
    }

    /// ν, the reciprocal mean inter-arrival time.
    pub fn nu(&self) -> f64 {
        1.0 / self.law.mean()
    }
}

/// One parent arrival.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParentArrival {
    pub arrival: f64,
    pub mark: f64,
}

/// All parent arrivals with `Γ_i <= t`, plus the first arrival after `t`
/// (needed for `τ(t)` and `H_τ`). Marks are i.i.d. from the mark model.
pub fn simulate_parent(
    parent: &ParentProcess,
    marks: &MarkModel,
    horizon: f64,
    rng: &mut RandomStream,
) -> Vec<ParentArrival> {
    let mut out = Vec::new();
    let mut time = 0.0;
    loop {
        time += parent.law.sample(rng);
        let mark = marks.sample(rng);
        out.push(ParentArrival {
            arrival: time,
            mark,
        });
        if time > horizon {
            return out;
        }
    }
}

/// Conditional offset law of one offspring given the ancestral mark.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OffsetLaw {
    Exponential { rate: f64 },
    Uniform { max: f64 },
    /// `V | A ~ Exponential(rate · A)`: offsets shrink for large ancestral
    /// marks. One shipped coupling between offsets and the ancestral mark.
    MarkScaledExponential { rate: f64 },
}

impl OffsetLaw {
    fn sample(&self, ancestral_mark: f64, rng: &mut RandomStream) -> f64 {
        match *self {
            OffsetLaw::Exponential { rate } => -rng.open01().ln() / rate,
            OffsetLaw::Uniform { max } => max * rng.open01(),
            OffsetLaw::MarkScaledExponential { rate } => -rng.open01().ln() / (rate * ancestral_mark),
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let ok = match *self {
            OffsetLaw::Exponential { rate } | OffsetLaw::MarkScaledExponential { rate } => {
                rate.is_finite() && rate > 0.0
            }
            OffsetLaw::Uniform { max } => max.is_finite() && max > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(SimError::InvalidConfiguration(format!(
                "invalid offset law {self:?}"
            )))
        }
    }
}

/// Law of the offspring count `K_i`, possibly coupled to the ancestral mark.
#[derive(Debug, Clone, PartialEq)]
pub enum SizeLaw {
    /// K independent of all marks.
    Count(CountLaw),
    /// `K | A_0 ~ Poisson(kappa · g(A_0))` with `E[g(A)] = 1`, so
    /// `E[K] = kappa` exactly.
    MarkPoisson { kappa: f64, effect: MarkEffect },
}

impl SizeLaw {
    pub fn mean(&self) -> f64 {
        match self {
            SizeLaw::Count(law) => law.mean(),
            SizeLaw::MarkPoisson { kappa, .. } => *kappa,
        }
    }

    fn sample(
        &self,
        ancestral_mark: f64,
        effect_normalizer: f64,
        rng: &mut RandomStream,
    ) -> u64 {
        match self {
            SizeLaw::Count(law) => law.sample(rng),
            SizeLaw::MarkPoisson { kappa, effect } => {
                let lambda = kappa * effect.g(ancestral_mark, effect_normalizer);
                if lambda <= 0.0 {
                    0
                } else {
                    Poisson::new(lambda).expect("positive rate").sample(rng) as u64
                }
            }
        }
    }

    fn validate(&self, marks: &MarkModel) -> Result<f64, SimError> {
        match self {
            SizeLaw::Count(law) => {
                law.validate()?;
                Ok(1.0)
            }
            SizeLaw::MarkPoisson { kappa, effect } => {
                if !kappa.is_finite() || *kappa < 0.0 {
                    return Err(SimError::InvalidConfiguration(format!(
                        "mark-Poisson size law needs finite kappa >= 0, got {kappa}"
                    )));
                }
                effect
                    .normalizer(marks)
                    .map_err(|e| SimError::InvalidConfiguration(e.to_string()))
            }
        }
    }
}

/// Offset geometry of a cluster.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClusterForm {
    /// Offspring at i.i.d. offsets from the ancestor.
    MixedBinomial,
    /// Offspring at partial sums of i.i.d. increments.
    RenewalCluster,
}

/// One point of a cluster, as an offset from the ancestor arrival.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterPoint {
    pub offset: f64,
    pub mark: f64,
}

/// Anything that can generate one full cluster given the ancestral mark.
/// The first returned point is always the ancestor `(0, A)`.
pub trait ClusterGenerator {
    fn generate(
        &self,
        ancestral_mark: f64,
        marks: &MarkModel,
        rng: &mut RandomStream,
    ) -> Result<Vec<ClusterPoint>, SimError>;

    /// Expected number of claims per cluster, ancestor included.
    fn mean_cluster_size(&self) -> f64;
}

/// Parameterized mixed-binomial / renewal cluster generator.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterMechanism {
    form: ClusterForm,
    size: SizeLaw,
    offsets: OffsetLaw,
    effect_normalizer: f64,
}

impl ClusterMechanism {
    pub fn new(
        form: ClusterForm,
        size: SizeLaw,
        offsets: OffsetLaw,
        marks: &MarkModel,
    ) -> Result<Self, SimError> {
        offsets.validate()?;
        let effect_normalizer = size.validate(marks)?;
        Ok(ClusterMechanism {
            form,
            size,
            offsets,
            effect_normalizer,
        })
    }

    pub fn form(&self) -> ClusterForm {
        self.form
    }

    pub fn size_law(&self) -> &SizeLaw {
        &self.size
    }
}

impl ClusterGenerator for ClusterMechanism {
    fn generate(
        &self,
        ancestral_mark: f64,
        marks: &MarkModel,
        rng: &mut RandomStream,
    ) -> Result<Vec<ClusterPoint>, SimError> {
        let k = self.size.sample(ancestral_mark, self.effect_normalizer, rng);
        let mut points = Vec::with_capacity(k as usize + 1);
        points.push(ClusterPoint {
            offset: 0.0,
            mark: ancestral_mark,
        });
        let mut running_offset = 0.0;
        for _ in 0..k {
            let v = self.offsets.sample(ancestral_mark, rng);
            let offset = match self.form {
                ClusterForm::MixedBinomial => v,
                ClusterForm::RenewalCluster => {
                    running_offset += v;
                    running_offset
                }
            };
            let mark = marks.sample(rng);
            points.push(ClusterPoint { offset, mark });
        }
        Ok(points)
    }

    fn mean_cluster_size(&self) -> f64 {
        1.0 + self.size.mean()
    }
}

/// One stored point of a realization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProcessPoint {
    pub arrival: f64,
    pub claim: f64,
    /// 1-based parent index; the cluster of the `τ(t)`-th parent carries
    /// `cluster_id = τ(t)`.
    pub cluster_id: u64,
    pub is_ancestor: bool,
}

/// Summary statistics of one realization on `[0, t]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RealizationSummary {
    pub horizon: f64,
    /// M(t): maximum claim with arrival <= t; `None` when no claim arrived.
    pub running_max: Option<f64>,
    /// M^τ(t) = M(t) ∨ H_τ ∨ ε_t.
    pub tau_max: f64,
    /// ε_t: maximum leftover claim; `None` when no overhang exists.
    pub leftover_max: Option<f64>,
    /// J_t: number of leftover claims.
    pub leftover_count: u64,
    /// τ(t).
    pub first_passage: u64,
    /// H_τ: maximum over the full cluster of the first parent after t.
    pub next_cluster_max: f64,
    /// Number of claims with arrival <= t.
    pub points_in_window: u64,
}

/// A fully retained realization: the summary plus every generated point.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessRealization {
    pub summary: RealizationSummary,
    pub points: Vec<ProcessPoint>,
}

impl ProcessRealization {
    /// Recomputes the decomposition `M^τ(t) = M(t) ∨ H_τ ∨ ε_t` from the
    /// stored points and checks it against the summary fields.
    pub fn check_identity(&self) -> bool {
        let s = &self.summary;
        let t = s.horizon;
        let mut m_t: Option<f64> = None;
        let mut eps: Option<f64> = None;
        let mut h_tau: Option<f64> = None;
        for p in &self.points {
            if p.cluster_id == s.first_passage {
                h_tau = Some(h_tau.map_or(p.claim, |m: f64| m.max(p.claim)));
            } else if p.arrival <= t {
                m_t = Some(m_t.map_or(p.claim, |m: f64| m.max(p.claim)));
            } else {
                eps = Some(eps.map_or(p.claim, |m: f64| m.max(p.claim)));
            }
        }
        let recombined = [m_t, h_tau, eps]
            .into_iter()
            .flatten()
            .fold(f64::NEG_INFINITY, f64::max);
        m_t == s.running_max
            && eps == s.leftover_max
            && h_tau == Some(s.next_cluster_max)
            && recombined == s.tau_max
    }

    /// Recounts J_t from the stored points: claims whose ancestor arrived by
    /// `t` but which themselves arrive after `t`.
    pub fn recount_leftover(&self) -> u64 {
        let t = self.summary.horizon;
        let mut ancestor_arrival = std::collections::HashMap::new();
        for p in &self.points {
            if p.is_ancestor {
                ancestor_arrival.insert(p.cluster_id, p.arrival);
            }
        }
        self.points
            .iter()
            .filter(|p| {
                let anc = ancestor_arrival[&p.cluster_id];
                anc <= t && p.arrival > t
            })
            .count() as u64
    }

    /// Debug dump, one row per point: `arrivalTime,claim,clusterId,isAncestor`.
    pub fn write_points_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "arrivalTime,claim,clusterId,isAncestor")?;
        for p in &self.points {
            writeln!(
                w,
                "{},{},{},{}",
                p.arrival, p.claim, p.cluster_id, p.is_ancestor
            )?;
        }
        Ok(())
    }
}

/// Recomputes J_t from a realization's stored points (must equal the
/// summary's `leftover_count`).
pub fn leftover_count(realization: &ProcessRealization) -> u64 {
    realization.recount_leftover()
}

struct Accumulator {
    horizon: f64,
    running_max: Option<f64>,
    leftover_max: Option<f64>,
    leftover_count: u64,
    next_cluster_max: Option<f64>,
    points_in_window: u64,
}

impl Accumulator {
    fn new(horizon: f64) -> Self {
        Accumulator {
            horizon,
            running_max: None,
            leftover_max: None,
            leftover_count: 0,
            next_cluster_max: None,
            points_in_window: 0,
        }
    }

    fn observe(&mut self, arrival: f64, claim: f64, is_next_cluster: bool) {
        if is_next_cluster {
            self.next_cluster_max =
                Some(self.next_cluster_max.map_or(claim, |m| m.max(claim)));
        } else if arrival <= self.horizon {
            self.running_max = Some(self.running_max.map_or(claim, |m| m.max(claim)));
            self.points_in_window += 1;
        } else {
            self.leftover_max = Some(self.leftover_max.map_or(claim, |m| m.max(claim)));
            self.leftover_count += 1;
        }
    }

    fn finish(self, first_passage: u64) -> RealizationSummary {
        let next_cluster_max = self
            .next_cluster_max
            .expect("the first-after-horizon cluster always contains its ancestor");
        let tau_max = [self.running_max, self.leftover_max, Some(next_cluster_max)]
            .into_iter()
            .flatten()
            .fold(f64::NEG_INFINITY, f64::max);
        RealizationSummary {
            horizon: self.horizon,
            running_max: self.running_max,
            tau_max,
            leftover_max: self.leftover_max,
            leftover_count: self.leftover_count,
            first_passage,
            next_cluster_max,
            points_in_window: self.points_in_window,
        }
    }
}

fn simulate_impl<G: ClusterGenerator>(
    parent: &ParentProcess,
    generator: &G,
    marks: &MarkModel,
    horizon: f64,
    rng: &mut RandomStream,
    mut retain: Option<&mut Vec<ProcessPoint>>,
) -> Result<RealizationSummary, SimError> {
    let parents = simulate_parent(parent, marks, horizon, rng);
    let first_passage = parents.len() as u64; // last entry is the first after t
    let mut acc = Accumulator::new(horizon);
    for (idx, p) in parents.iter().enumerate() {
        let cluster_id = idx as u64 + 1;
        let is_next_cluster = cluster_id == first_passage;
        let cluster = generator.generate(p.mark, marks, rng)?;
        for (j, cp) in cluster.iter().enumerate() {
            let arrival = p.arrival + cp.offset;
            let claim = marks.claim(cp.mark);
            acc.observe(arrival, claim, is_next_cluster);
            if let Some(points) = retain.as_deref_mut() {
                points.push(ProcessPoint {
                    arrival,
                    claim,
                    cluster_id,
                    is_ancestor: j == 0,
                });
            }
        }
    }
    Ok(acc.finish(first_passage))
}

/// Simulates one realization on `[0, t]`, retaining every point. The cluster
/// of the `τ(t)`-th parent is generated in full (for `H_τ`); parents beyond
/// it are never drawn.
pub fn simulate_process<G: ClusterGenerator>(
    parent: &ParentProcess,
    generator: &G,
    marks: &MarkModel,
    horizon: f64,
    rng: &mut RandomStream,
) -> Result<ProcessRealization, SimError> {
    let mut points = Vec::new();
    let summary = simulate_impl(parent, generator, marks, horizon, rng, Some(&mut points))?;
    let realization = ProcessRealization { summary, points };
    debug_assert!(realization.check_identity());
    debug_assert_eq!(realization.recount_leftover(), summary.leftover_count);
    Ok(realization)
}

/// Streaming variant for long horizons: identical draws and summary, but no
/// point retention.
pub fn simulate_process_streaming<G: ClusterGenerator>(
    parent: &ParentProcess,
    generator: &G,
    marks: &MarkModel,
    horizon: f64,
    rng: &mut RandomStream,
) -> Result<RealizationSummary, SimError> {
    simulate_impl(parent, generator, marks, horizon, rng, None)
}
