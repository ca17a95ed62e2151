//! Maxima over a random number of claims, `H = max_{j<=K} X_j`.
//!
//! The cluster size K may be deterministic, an independent count, or a
//! stopping time driven by the claims themselves:
//!
//! * `Deterministic(k)`: K = k always.
//! * `IndependentCount`: K drawn independently of the claims.
//! * `GeometricStopping`: K = inf{k : X_k > W_k} over i.i.d. pairs (W, X),
//!   so K is geometric with success probability P(X > W).
//! * `FixedThreshold`: K = inf{k : X_k > W_1} with a single threshold drawn
//!   up front; H = X_K > W_1 by construction, so H inherits at least the
//!   tail of W.
//!
//! Stopping times are capped at [`ITERATION_CAP`] draws per cluster; hitting
//! the cap is an error carrying partial state, never a silent truncation, so
//! infinite-mean configurations surface instead of biasing results.

use crate::error::{CapState, SimError, ITERATION_CAP};
use crate::marks::{MarkFamily, MarkModel};
use crate::rng::RandomStream;
use crate::sequences::AdjustedSequences;
use rand_distr::{Distribution, Poisson};

/// Law of an independent nonnegative integer cluster size.
#[derive(Debug, Clone, PartialEq)]
pub enum CountLaw {
    Fixed(u64),
    Poisson { mean: f64 },
    /// Support {0, 1, ...} with P(K = k) = p (1-p)^k.
    Geometric { p: f64 },
    /// Explicit pmf table over {0, 1, ..., len-1}; weights need not be
    /// normalized.
    Table { weights: Vec<f64> },
}

impl CountLaw {
    pub fn mean(&self) -> f64 {
        match self {
            CountLaw::Fixed(k) => *k as f64,
            CountLaw::Poisson { mean } => *mean,
            CountLaw::Geometric { p } => (1.0 - p) / p,
            CountLaw::Table { weights } => {
                let total: f64 = weights.iter().sum();
                weights
                    .iter()
                    .enumerate()
                    .map(|(k, w)| k as f64 * w)
                    .sum::<f64>()
                    / total
            }
        }
    }

    pub fn sample(&self, rng: &mut RandomStream) -> u64 {
        match self {
            CountLaw::Fixed(k) => *k,
            CountLaw::Poisson { mean } => {
                if *mean == 0.0 {
                    0
                } else {
                    Poisson::new(*mean).expect("validated mean").sample(rng) as u64
                }
            }
            CountLaw::Geometric { p } => {
                let u = rng.open01();
                (u.ln() / (1.0 - p).ln()).floor() as u64
            }
            CountLaw::Table { weights } => {
                let total: f64 = weights.iter().sum();
                let mut u = rng.open01() * total;
                for (k, w) in weights.iter().enumerate() {
                    if u < *w {
                        return k as u64;
                    }
                    u -= w;
                }
                (weights.len() - 1) as u64
            }
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let ok = match self {
            CountLaw::Fixed(_) => true,
            CountLaw::Poisson { mean } => mean.is_finite() && *mean >= 0.0,
            CountLaw::Geometric { p } => p.is_finite() && *p > 0.0 && *p <= 1.0,
            CountLaw::Table { weights } => {
                !weights.is_empty()
                    && weights.iter().all(|w| w.is_finite() && *w >= 0.0)
                    && weights.iter().sum::<f64>() > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(SimError::InvalidConfiguration(format!(
                "invalid count law {self:?}"
            )))
        }
    }
}

/// Joint law of one (W, X) pair for the geometric stopping rule. The claim
/// marginal always comes from the mark model; the coupling decides W.
#[derive(Debug, Clone, PartialEq)]
pub enum PairCoupling {
    /// W independent of X.
    Independent { threshold: MarkFamily },
    /// W and X driven by the same uniform (maximal positive dependence).
    Comonotone { threshold: MarkFamily },
    /// W = X + shift; requires shift < 0 so that P(X > W) > 0.
    Shifted { shift: f64 },
}

impl PairCoupling {
    fn draw(&self, marks: &MarkModel, rng: &mut RandomStream) -> (f64, f64) {
        match self {
            PairCoupling::Independent { threshold } => {
                let w = threshold.quantile(rng.open01());
                let x = marks.sample(rng);
                (w, x)
            }
            PairCoupling::Comonotone { threshold } => {
                let u = rng.open01();
                (threshold.quantile(u), marks.family().quantile(u))
            }
            PairCoupling::Shifted { shift } => {
                let x = marks.sample(rng);
                (x + shift, x)
            }
        }
    }
}

/// How the number of claims entering one maximum is produced.
#[derive(Debug, Clone, PartialEq)]
pub enum ClusterSizePolicy {
    Deterministic { k: u64 },
    IndependentCount { law: CountLaw },
    GeometricStopping { coupling: PairCoupling },
    FixedThreshold { threshold: MarkFamily },
}

/// One draw of the stopped maximum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaximaSample {
    /// The maximum H; `None` when the policy produced an empty cluster
    /// (K = 0), which is flagged rather than encoded as -infinity.
    pub max: Option<f64>,
    /// K, the number of claims contributing to the maximum.
    pub count: u64,
    /// Claims consumed from the stream by this block (equals `count` for the
    /// shipped policies); block diagnostics sum these into T(n).
    pub draws_consumed: u64,
}

impl ClusterSizePolicy {
    /// Checks parameters; for stopping rules this estimates P(X > W) with a
    /// 10^6-draw pre-pass (closed forms are used where exact) and rejects
    /// couplings with zero success probability.
    pub fn validate(&self, marks: &MarkModel, rng: &mut RandomStream) -> Result<(), SimError> {
        match self {
            ClusterSizePolicy::Deterministic { .. } => Ok(()),
            ClusterSizePolicy::IndependentCount { law } => law.validate(),
            ClusterSizePolicy::GeometricStopping { coupling } => {
                let p = stopping_success_probability(coupling, marks, rng);
                if p > 0.0 {
                    Ok(())
                } else {
                    Err(SimError::InvalidConfiguration(
                        "geometric stopping requires P(X > W) > 0".to_string(),
                    ))
                }
            }
            ClusterSizePolicy::FixedThreshold { .. } => Ok(()),
        }
    }

    /// Expected number of claims per block, `E[K]`; `None` when infinite or
    /// not available in closed form. Stopping probabilities may involve a
    /// Monte Carlo pre-pass on `rng`.
    pub fn mean_block_length(&self, marks: &MarkModel, rng: &mut RandomStream) -> Option<f64> {
        match self {
            ClusterSizePolicy::Deterministic { k } => Some(*k as f64),
            ClusterSizePolicy::IndependentCount { law } => Some(law.mean()),
            ClusterSizePolicy::GeometricStopping { coupling } => {
                let p = stopping_success_probability(coupling, marks, rng);
                (p > 0.0).then(|| 1.0 / p)
            }
            ClusterSizePolicy::FixedThreshold { threshold } => {
                fixed_threshold_mean(*threshold, marks.family())
            }
        }
    }
}

/// P(X > W) for a pair coupling. Exact where a closed form exists
/// (independent identical continuous marginals give 1/2; shifted couplings
/// are degenerate), otherwise a 10^6-draw Monte Carlo pre-pass.
pub fn stopping_success_probability(
    coupling: &PairCoupling,
    marks: &MarkModel,
    rng: &mut RandomStream,
) -> f64 {
    match coupling {
        PairCoupling::Independent { threshold } if *threshold == marks.family() => 0.5,
        PairCoupling::Shifted { shift } => {
            if *shift < 0.0 {
                1.0
            } else {
                0.0
            }
        }
        _ => {
            let n = 1_000_000u64;
            let mut hits = 0u64;
            for _ in 0..n {
                let (w, x) = coupling.draw(marks, rng);
                if x > w {
                    hits += 1;
                }
            }
            hits as f64 / n as f64
        }
    }
}

/// `E[K]` for the fixed-threshold rule, `E[1 / P(X > W)]`, in the closed-form
/// cases (Pareto/Pareto and Exponential/Exponential); `None` when infinite or
/// unavailable.
fn fixed_threshold_mean(threshold: MarkFamily, claims: MarkFamily) -> Option<f64> {
    match (threshold, claims) {
        (MarkFamily::Pareto { shape: aw }, MarkFamily::Pareto { shape: ax }) => {
            // E[W^ax] for W >= 1 Pareto(aw).
            (aw > ax).then(|| aw / (aw - ax))
        }
        (MarkFamily::Exponential { rate: lw }, MarkFamily::Exponential { rate: lx }) => {
            // E[exp(lx W)] = lw / (lw - lx).
            (lw > lx).then(|| lw / (lw - lx))
        }
        _ => None,
    }
}

/// Draws one stopped maximum under `policy`.
pub fn sample_h(
    policy: &ClusterSizePolicy,
    marks: &MarkModel,
    rng: &mut RandomStream,
) -> Result<MaximaSample, SimError> {
    match policy {
        ClusterSizePolicy::Deterministic { k } => Ok(max_of_independent(*k, marks, rng)),
        ClusterSizePolicy::IndependentCount { law } => {
            let k = law.sample(rng);
            Ok(max_of_independent(k, marks, rng))
        }
        ClusterSizePolicy::GeometricStopping { coupling } => {
            let mut max: Option<f64> = None;
            let mut count = 0u64;
            loop {
                if count >= ITERATION_CAP {
                    return Err(SimError::IterationCap {
                        cap: ITERATION_CAP,
                        state: CapState {
                            partial_max: max,
                            draws: count,
                            pending_threshold: None,
                        },
                    });
                }
                let (w, x) = coupling.draw(marks, rng);
                count += 1;
                max = Some(max.map_or(x, |m| m.max(x)));
                if x > w {
                    return Ok(MaximaSample {
                        max,
                        count,
                        draws_consumed: count,
                    });
                }
            }
        }
        ClusterSizePolicy::FixedThreshold { threshold } => {
            let w1 = threshold.quantile(rng.open01());
            let mut max: Option<f64> = None;
            let mut count = 0u64;
            loop {
                if count >= ITERATION_CAP {
                    return Err(SimError::IterationCap {
                        cap: ITERATION_CAP,
                        state: CapState {
                            partial_max: max,
                            draws: count,
                            pending_threshold: Some(w1),
                        },
                    });
                }
                let x = marks.sample(rng);
                count += 1;
                max = Some(max.map_or(x, |m| m.max(x)));
                if x > w1 {
                    debug_assert!(max.unwrap() > w1);
                    return Ok(MaximaSample {
                        max,
                        count,
                        draws_consumed: count,
                    });
                }
            }
        }
    }
}

fn max_of_independent(k: u64, marks: &MarkModel, rng: &mut RandomStream) -> MaximaSample {
    let mut max: Option<f64> = None;
    for _ in 0..k {
        let x = marks.sample(rng);
        max = Some(max.map_or(x, |m| m.max(x)));
    }
    MaximaSample {
        max,
        count: k,
        draws_consumed: k,
    }
}

/// Draws `n_blocks` consecutive blocks by restarting the stopping time on the
/// same underlying stream; by the strong Markov property the resulting maxima
/// are i.i.d. copies of the single-draw law.
pub fn sample_blocks(
    policy: &ClusterSizePolicy,
    marks: &MarkModel,
    n_blocks: u64,
    rng: &mut RandomStream,
) -> Result<Vec<MaximaSample>, SimError> {
    let mut out = Vec::with_capacity(n_blocks as usize);
    for _ in 0..n_blocks {
        out.push(sample_h(policy, marks, rng)?);
    }
    Ok(out)
}

/// Monte Carlo estimate of `n * P(H > c_n x + d_n)` with a binomial standard
/// error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailRatioEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub threshold: f64,
    pub exceedances: u64,
    pub replications: u64,
    /// Replications that hit the iteration cap but whose exceedance was
    /// already determined (partial maximum or pending threshold beyond the
    /// level), so they contribute exactly rather than as errors.
    pub capped_resolved: u64,
}

/// Estimates the adjusted tail ratio `n * P(H > c_n x + d_n)` over
/// `n_replications` independent draws of H.
///
/// A replication that hits the iteration cap is resolved exactly when the
/// exceedance indicator is already determined by the partial state (the
/// partial maximum exceeds the level, or a fixed threshold W1 >= level forces
/// `H = X_K > W1` past it); an undetermined cap propagates as an error.
pub fn tail_ratio(
    policy: &ClusterSizePolicy,
    marks: &MarkModel,
    adj: &AdjustedSequences,
    n: u64,
    x: f64,
    n_replications: u64,
    rng: &mut RandomStream,
) -> Result<TailRatioEstimate, SimError> {
    let threshold = adj.threshold(n, x);
    let mut exceedances = 0u64;
    let mut capped_resolved = 0u64;
    for _ in 0..n_replications {
        match sample_h(policy, marks, rng) {
            Ok(sample) => {
                if sample.max.is_some_and(|h| h > threshold) {
                    exceedances += 1;
                }
            }
            Err(SimError::IterationCap { state, .. }) => {
                let determined_exceed = state.partial_max.is_some_and(|m| m > threshold)
                    || state.pending_threshold.is_some_and(|w1| w1 >= threshold);
                if determined_exceed {
                    exceedances += 1;
                    capped_resolved += 1;
                } else {
                    return Err(SimError::IterationCap {
                        cap: ITERATION_CAP,
                        state,
                    });
                }
            }
            Err(e) => return Err(e),
        }
    }
    let p_hat = exceedances as f64 / n_replications as f64;
    Ok(TailRatioEstimate {
        estimate: n as f64 * p_hat,
        std_error: n as f64 * (p_hat * (1.0 - p_hat) / n_replications as f64).sqrt(),
        threshold,
        exceedances,
        replications: n_replications,
        capped_resolved,
    })
}
