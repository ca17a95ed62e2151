//! Marked Hawkes processes, simulated two independent ways.
//!
//! Branching route: a cluster is a cascade in which a point with mark `a`
//! spawns `Poisson(κ_a)` children, `κ_a = ∫ h(s, a) ds`, at waiting times
//! with density `h(·, a)/κ_a`. Subcriticality `κ = E[κ_A] < 1` makes the
//! cascade finite with mean total size `1/(1-κ)`; for mark-free kernels the
//! total size follows the Borel(κ) law. The same size arises as the hitting
//! time of zero by the random walk `S_n = S_{n-1} + L_n - 1`, `S_0 = 1`.
//!
//! Intensity route: points arrive with stochastic intensity
//! `λ(t) = ν + Σ_{τ_i < t} h(t - τ_i, A_i)`, simulated by thinning. Both
//! shipped kernels decrease in the time argument, so the intensity right
//! after any instant bounds the intensity until the next point, which is all
//! the thinning bound needs.
//!
//! Shipped kernels (mass `κ_a = κ · g(a)`):
//!
//! ```text
//! exponential:  h(s, a) = κ_a · θ e^(-θ s)
//! power law:    h(s, a) = κ_a · β (1 + s)^(-β-1)
//! ```

use crate::cluster::{ClusterGenerator, ClusterPoint};
use crate::error::{SimError, GENERATION_CAP, ITERATION_CAP, SIZE_CAP};
use crate::marks::{MarkEffect, MarkModel};
use crate::rng::RandomStream;
use rand_distr::{Distribution, Poisson};
use statrs::function::gamma::ln_gamma;
use std::collections::VecDeque;
use std::io::{self, Write};

/// Time profile of the fertility function (its mass is carried separately).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kernel {
    /// Normalized density θ e^(-θ s): light-tailed delays.
    Exponential { decay: f64 },
    /// Normalized density β (1 + s)^(-β-1): heavy-tailed delays.
    PowerLaw { beta: f64 },
}

impl Kernel {
    /// Normalized waiting-time density at s >= 0.
    fn density(&self, s: f64) -> f64 {
        match *self {
            Kernel::Exponential { decay } => decay * (-decay * s).exp(),
            Kernel::PowerLaw { beta } => beta * (1.0 + s).powf(-beta - 1.0),
        }
    }

    /// Inverse CDF of the normalized waiting time.
    fn waiting_quantile(&self, u: f64) -> f64 {
        match *self {
            Kernel::Exponential { decay } => -(1.0 - u).ln() / decay,
            Kernel::PowerLaw { beta } => (1.0 - u).powf(-1.0 / beta) - 1.0,
        }
    }

    fn validate(&self) -> Result<(), SimError> {
        let ok = match *self {
            Kernel::Exponential { decay } => decay.is_finite() && decay > 0.0,
            Kernel::PowerLaw { beta } => beta.is_finite() && beta > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(SimError::InvalidConfiguration(format!(
                "invalid kernel {self:?}"
            )))
        }
    }
}

/// Fertility function `h(s, a) = κ · g(a) · kernel(s)` with subcritical mean
/// mass `κ = E[∫ h(s, A) ds] < 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FertilityModel {
    kernel: Kernel,
    mass: f64,
    effect: MarkEffect,
    effect_normalizer: f64,
}

impl FertilityModel {
    /// Rejects `κ >= 1` (the cascade would not terminate) and mark effects
    /// without a finite normalizer under `marks`.
    pub fn new(
        kernel: Kernel,
        mass: f64,
        effect: MarkEffect,
        marks: &MarkModel,
    ) -> Result<Self, SimError> {
        kernel.validate()?;
        if !mass.is_finite() || !(0.0..1.0).contains(&mass) {
            return Err(SimError::InvalidConfiguration(format!(
                "branching ratio must satisfy 0 <= kappa < 1, got {mass}"
            )));
        }
        let effect_normalizer = effect
            .normalizer(marks)
            .map_err(|e| SimError::InvalidConfiguration(e.to_string()))?;
        Ok(FertilityModel {
            kernel,
            mass,
            effect,
            effect_normalizer,
        })
    }

    pub fn kernel(&self) -> Kernel {
        self.kernel
    }

    /// κ = E[κ_A].
    pub fn kappa(&self) -> f64 {
        self.mass
    }

    /// κ_a = ∫ h(s, a) ds.
    pub fn kappa_of(&self, mark: f64) -> f64 {
        self.mass * self.effect.g(mark, self.effect_normalizer)
    }

    /// h(s, a).
    pub fn intensity_kernel(&self, s: f64, mark: f64) -> f64 {
        if s < 0.0 {
            0.0
        } else {
            self.kappa_of(mark) * self.kernel.density(s)
        }
    }

    /// Mean cluster size `E[K] + 1 = 1/(1 - κ)`.
    pub fn mean_cluster_size(&self) -> f64 {
        1.0 / (1.0 - self.mass)
    }

    fn offspring_count(&self, mark: f64, rng: &mut RandomStream) -> u64 {
        let lambda = self.kappa_of(mark);
        if lambda <= 0.0 {
            0
        } else {
            Poisson::new(lambda).expect("positive rate").sample(rng) as u64
        }
    }
}

/// One point of a branching cascade.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HawkesPoint {
    /// Arrival offset from the cluster's ancestor.
    pub offset: f64,
    pub mark: f64,
    pub generation: u32,
    /// Index of the parent within the cluster; -1 for the ancestor.
    pub parent_index: i64,
}

/// A complete cascade, ancestor first, in breadth-first order.
#[derive(Debug, Clone, PartialEq)]
pub struct HawkesCluster {
    pub points: Vec<HawkesPoint>,
}

impl HawkesCluster {
    /// K + 1.
    pub fn total_size(&self) -> u64 {
        self.points.len() as u64
    }

    /// Debug dump, one row per point: `offset,mark,generation,parentIndex`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "offset,mark,generation,parentIndex")?;
        for p in &self.points {
            writeln!(w, "{},{},{},{}", p.offset, p.mark, p.generation, p.parent_index)?;
        }
        Ok(())
    }
}

/// Generates one cascade breadth first: each queued point with mark `a`
/// draws `Poisson(κ_a)` children at waiting times from `h(·, a)/κ_a` past
/// its own offset, with fresh i.i.d. marks.
pub fn sample_hawkes_cluster(
    fertility: &FertilityModel,
    marks: &MarkModel,
    ancestral_mark: f64,
    rng: &mut RandomStream,
) -> Result<HawkesCluster, SimError> {
    let mut points = vec![HawkesPoint {
        offset: 0.0,
        mark: ancestral_mark,
        generation: 0,
        parent_index: -1,
    }];
    let mut queue: VecDeque<usize> = VecDeque::new();
    queue.push_back(0);
    while let Some(parent_idx) = queue.pop_front() {
        let parent = points[parent_idx];
        if u64::from(parent.generation) >= GENERATION_CAP {
            return Err(SimError::GenerationCap {
                cap: GENERATION_CAP,
                size_so_far: points.len() as u64,
            });
        }
        let children = fertility.offspring_count(parent.mark, rng);
        for _ in 0..children {
            if points.len() as u64 >= SIZE_CAP {
                return Err(SimError::SizeCap { cap: SIZE_CAP });
            }
            let wait = fertility.kernel.waiting_quantile(rng.open01());
            let mark = marks.sample(rng);
            points.push(HawkesPoint {
                offset: parent.offset + wait,
                mark,
                generation: parent.generation + 1,
                parent_index: parent_idx as i64,
            });
            queue.push_back(points.len() - 1);
        }
    }
    Ok(HawkesCluster { points })
}

/// Draws the hitting time `ζ = inf{k : S_k = 0}` of the random walk
/// `S_0 = 1, S_n = S_{n-1} + L_n - 1`, with each `L_n` Poisson with a fresh
/// mark-mixed rate. Equal in law to the cascade's total size.
pub fn sample_hitting_time(
    fertility: &FertilityModel,
    marks: &MarkModel,
    rng: &mut RandomStream,
) -> Result<u64, SimError> {
    let mut s: i64 = 1;
    let mut steps: u64 = 0;
    while s > 0 {
        if steps >= ITERATION_CAP {
            return Err(SimError::IterationCap {
                cap: ITERATION_CAP,
                state: crate::error::CapState {
                    partial_max: None,
                    draws: steps,
                    pending_threshold: None,
                },
            });
        }
        let mark = marks.sample(rng);
        let l = fertility.offspring_count(mark, rng);
        s += l as i64 - 1;
        steps += 1;
    }
    Ok(steps)
}

/// Empirical law of ζ over `n_draws` independent walks.
pub fn sample_hitting_times(
    fertility: &FertilityModel,
    marks: &MarkModel,
    n_draws: u64,
    rng: &mut RandomStream,
) -> Result<Vec<u64>, SimError> {
    (0..n_draws)
        .map(|_| sample_hitting_time(fertility, marks, rng))
        .collect()
}

/// Borel(κ) pmf, `P(N = n) = e^(-κn) (κn)^(n-1) / n!`, the law of the total
/// progeny of a Poisson(κ) branching process.
pub fn borel_pmf(kappa: f64, n: u64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let nf = n as f64;
    let kn = kappa * nf;
    (-kn + (nf - 1.0) * kn.ln() - ln_gamma(nf + 1.0)).exp()
}

/// Simulates the marked Hawkes process on `[0, t]` with stochastic intensity
/// `λ(s) = ν + Σ_{τ_i < s} h(s - τ_i, A_i)` by Ogata thinning.
///
/// Both shipped kernels are nonincreasing in the time argument, so between
/// proposals the intensity is bounded by its value at the left endpoint; the
/// bound is refreshed at every proposed point.
pub fn simulate_by_thinning(
    fertility: &FertilityModel,
    marks: &MarkModel,
    nu: f64,
    horizon: f64,
    rng: &mut RandomStream,
) -> Result<Vec<(f64, f64)>, SimError> {
    if !(nu.is_finite() && nu > 0.0) {
        return Err(SimError::InvalidConfiguration(format!(
            "immigration rate must be positive, got {nu}"
        )));
    }
    let mut points: Vec<(f64, f64)> = Vec::new();
    // For the exponential kernel the excitation admits O(1) updates:
    // it decays multiplicatively and jumps by κ_a·θ at each point.
    let exp_decay = match fertility.kernel {
        Kernel::Exponential { decay } => Some(decay),
        Kernel::PowerLaw { .. } => None,
    };
    let mut excitation = 0.0f64; // current Σ h(now - τ_i, A_i) for the exp kernel
    let mut now = 0.0f64;

    let eval_excitation = |points: &[(f64, f64)], s: f64| -> f64 {
        points
            .iter()
            .map(|(tau, mark)| fertility.intensity_kernel(s - tau, *mark))
            .sum()
    };

    loop {
        let bound = nu + excitation;
        let delta = -rng.open01().ln() / bound;
        let candidate = now + delta;
        if candidate > horizon {
            return Ok(points);
        }
        // Bring the running excitation forward to the candidate time.
        match exp_decay {
            Some(decay) => excitation *= (-decay * delta).exp(),
            None => excitation = eval_excitation(&points, candidate),
        }
        let lambda = nu + excitation;
        now = candidate;
        if rng.open01() * bound <= lambda {
            if points.len() as u64 >= SIZE_CAP {
                return Err(SimError::SizeCap { cap: SIZE_CAP });
            }
            let mark = marks.sample(rng);
            points.push((candidate, mark));
            // The new point contributes h(0, mark) from this instant on.
            excitation += fertility.intensity_kernel(0.0, mark);
        }
    }
}

/// Adapter exposing Hawkes cascades through the cluster-process interface,
/// so `simulate_process` can run the full marked Hawkes model with Poisson
/// immigrants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HawkesMechanism {
    fertility: FertilityModel,
}

impl HawkesMechanism {
    pub fn new(fertility: FertilityModel) -> Self {
        HawkesMechanism { fertility }
    }

    pub fn fertility(&self) -> &FertilityModel {
        &self.fertility
    }
}

impl ClusterGenerator for HawkesMechanism {
    fn generate(
        &self,
        ancestral_mark: f64,
        marks: &MarkModel,
        rng: &mut RandomStream,
    ) -> Result<Vec<ClusterPoint>, SimError> {
        let cluster = sample_hawkes_cluster(&self.fertility, marks, ancestral_mark, rng)?;
        Ok(cluster
            .points
            .iter()
            .map(|p| ClusterPoint {
                offset: p.offset,
                mark: p.mark,
            })
            .collect())
    }

    fn mean_cluster_size(&self) -> f64 {
        self.fertility.mean_cluster_size()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::marks::MarkFamily;

    fn marks() -> MarkModel {
        MarkModel::new(MarkFamily::pareto(2.0).unwrap())
    }

    fn mark_free(kappa: f64, decay: f64) -> FertilityModel {
        FertilityModel::new(
            Kernel::Exponential { decay },
            kappa,
            MarkEffect::Constant,
            &marks(),
        )
        .unwrap()
    }

    #[test]
    fn construction_rejects_supercritical_mass() {
        assert!(FertilityModel::new(
            Kernel::Exponential { decay: 1.0 },
            1.0,
            MarkEffect::Constant,
            &marks()
        )
        .is_err());
        assert!(FertilityModel::new(
            Kernel::Exponential { decay: 1.0 },
            1.7,
            MarkEffect::Constant,
            &marks()
        )
        .is_err());
    }

    #[test]
    fn zero_fertility_gives_singleton_and_unit_hitting_time() {
        let fert = mark_free(0.0, 1.0);
        let m = marks();
        let mut rng = RandomStream::derive(1, 0, 0);
        let cluster = sample_hawkes_cluster(&fert, &m, 1.0, &mut rng).unwrap();
        assert_eq!(cluster.total_size(), 1);
        assert_eq!(cluster.points[0].parent_index, -1);
        assert_eq!(sample_hitting_time(&fert, &m, &mut rng).unwrap(), 1);
    }

    #[test]
    fn cascade_structure_is_consistent() {
        let fert = mark_free(0.7, 1.0);
        let m = marks();
        let mut rng = RandomStream::derive(2, 0, 0);
        for _ in 0..500 {
            let cluster = sample_hawkes_cluster(&fert, &m, 1.0, &mut rng).unwrap();
            assert_eq!(cluster.total_size() as usize, cluster.points.len());
            for (idx, p) in cluster.points.iter().enumerate() {
                if idx == 0 {
                    assert_eq!(p.generation, 0);
                    assert_eq!(p.offset, 0.0);
                    assert_eq!(p.parent_index, -1);
                } else {
                    let parent = cluster.points[p.parent_index as usize];
                    assert_eq!(p.generation, parent.generation + 1);
                    assert!(p.offset > parent.offset);
                }
            }
        }
    }

    #[test]
    fn mean_cluster_size_matches_subcritical_formula() {
        let fert = mark_free(0.5, 1.0);
        let m = marks();
        let mut rng = RandomStream::derive(3, 0, 0);
        let n = 100_000u64;
        let total: u64 = (0..n)
            .map(|_| {
                sample_hawkes_cluster(&fert, &m, m.sample(&mut rng), &mut rng)
                    .unwrap()
                    .total_size()
            })
            .sum();
        let mean = total as f64 / n as f64;
        // Borel(0.5): Var = κ/(1-κ)^3 = 4, 3 s.e. ~ 0.019.
        assert!((mean - 2.0).abs() < 0.019, "mean {mean}");
    }

    #[test]
    fn borel_pmf_known_values() {
        assert!((borel_pmf(0.5, 1) - (-0.5f64).exp()).abs() < 1e-12);
        // P(2) = e^(-1) · 1 / 2! · ... = e^(-2κ) (2κ)^1 / 2.
        let expected = (-1.0f64).exp() * 1.0 / 2.0;
        assert!((borel_pmf(0.5, 2) - expected).abs() < 1e-12);
        assert_eq!(borel_pmf(0.5, 0), 0.0);
        // pmf sums to 1.
        let total: f64 = (1..=2_000).map(|n| borel_pmf(0.5, n)).sum();
        assert!((total - 1.0).abs() < 1e-9, "sum {total}");
    }

    #[test]
    fn homogeneous_poisson_when_fertility_vanishes() {
        let fert = mark_free(0.0, 1.0);
        let m = marks();
        let reps = 10_000u32;
        let t = 50.0;
        let nu = 2.0;
        let mut total = 0usize;
        for rep in 0..reps {
            let mut rng = RandomStream::derive(4, rep, 0);
            total += simulate_by_thinning(&fert, &m, nu, t, &mut rng).unwrap().len();
        }
        let mean = total as f64 / reps as f64;
        // Poisson(100): 3 s.e. of the mean = 0.3.
        assert!((mean - 100.0).abs() < 0.31, "mean {mean}");
    }

    #[test]
    fn thinning_points_are_ordered_and_within_horizon() {
        let fert = mark_free(0.6, 2.0);
        let m = marks();
        let mut rng = RandomStream::derive(5, 0, 0);
        let pts = simulate_by_thinning(&fert, &m, 1.0, 100.0, &mut rng).unwrap();
        assert!(pts.windows(2).all(|w| w[0].0 < w[1].0));
        assert!(pts.iter().all(|(t, _)| *t >= 0.0 && *t <= 100.0));
    }

    #[test]
    fn mechanism_flattening_preserves_count() {
        let fert = mark_free(0.5, 1.0);
        let mech = HawkesMechanism::new(fert);
        let m = marks();
        let mut count_rng = RandomStream::derive(6, 0, 0);
        let mut flat_rng = RandomStream::derive(6, 0, 0);
        for _ in 0..10_000 {
            let a = m.sample(&mut count_rng);
            let cluster = sample_hawkes_cluster(&fert, &m, a, &mut count_rng).unwrap();
            let b = m.sample(&mut flat_rng);
            let flat = mech.generate(b, &m, &mut flat_rng).unwrap();
            assert_eq!(cluster.total_size() as usize, flat.len());
            assert_eq!(flat[0].offset, 0.0);
        }
    }

    #[test]
    fn cluster_csv_has_mandatory_header() {
        let fert = mark_free(0.5, 1.0);
        let m = marks();
        let mut rng = RandomStream::derive(7, 0, 0);
        let cluster = sample_hawkes_cluster(&fert, &m, 1.0, &mut rng).unwrap();
        let mut buf = Vec::new();
        cluster.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next(), Some("offset,mark,generation,parentIndex"));
        assert_eq!(text.lines().count() as u64, cluster.total_size() + 1);
    }
}
