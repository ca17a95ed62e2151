//! Experiment configuration: a single TOML file with flat key-value blocks.
//!
//! Unknown keys are errors, not warnings, and every block must belong to the
//! experiment that is being run; silent misconfiguration produces wrong
//! science. Parse errors carry the offending line; semantic errors name the
//! key and, where the key appears verbatim in the source, its line.

use clustermax::cluster::{ClusterForm, ClusterMechanism, OffsetLaw, ParentProcess, RenewalLaw, SizeLaw};
use clustermax::hawkes::{FertilityModel, HawkesMechanism, Kernel};
use clustermax::marks::{MarkEffect, MarkFamily, MarkModel};
use clustermax::maxima::{ClusterSizePolicy, CountLaw, PairCoupling};
use clustermax::rng::RandomStream;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{path}{}: {message}", line.map(|l| format!(":{l}")).unwrap_or_default())]
    Semantic {
        path: String,
        line: Option<usize>,
        message: String,
    },
}

// ---------------------------------------------------------------------------
// Raw layer: exactly what the file says, with every key strictly checked.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct RawConfig {
    pub experiment: String,
    pub replications: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizons: Option<Vec<f64>>,
    pub master_seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    pub mark: MarkBlock,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub policy: Option<PolicyBlock>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tail_ratio: Option<TailRatioBlock>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parent: Option<ParentBlock>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mechanism: Option<MechanismBlock>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fertility: Option<FertilityBlock>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct MarkBlock {
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shape: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct PolicyBlock {
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub count: Option<CountBlock>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coupling: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shift: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<MarkBlock>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct CountBlock {
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct TailRatioBlock {
    pub x_values: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub adjustment: Option<AdjustmentValue>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expect: Option<String>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(untagged)]
pub enum AdjustmentValue {
    Factor(f64),
    Mode(String),
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct ParentBlock {
    pub law: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lo: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hi: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct MechanismBlock {
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub size: Option<SizeBlock>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub offset: Option<OffsetBlock>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct SizeBlock {
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub effect: Option<String>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct OffsetBlock {
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct FertilityBlock {
    pub kernel: String,
    pub kappa: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decay: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub effect: Option<String>,
}

// ---------------------------------------------------------------------------
// Validated layer: core types, ready to simulate.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    TailRatio,
    ClusterSizeLaw,
    HittingTimeEquivalence,
    ProcessMaxima,
    HawkesCrossCheck,
    LeftoverTrend,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::TailRatio => "tail-ratio",
            ExperimentKind::ClusterSizeLaw => "cluster-size-law",
            ExperimentKind::HittingTimeEquivalence => "hitting-time-equivalence",
            ExperimentKind::ProcessMaxima => "process-maxima",
            ExperimentKind::HawkesCrossCheck => "hawkes-cross-check",
            ExperimentKind::LeftoverTrend => "leftover-trend",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Expectation {
    Converge,
    Diverge,
}

/// Either of the two process mechanisms the harness can drive.
#[derive(Debug, Clone)]
pub enum Mechanism {
    Cluster(ClusterMechanism),
    Hawkes(HawkesMechanism),
}

impl Mechanism {
    pub fn mean_cluster_size(&self) -> f64 {
        use clustermax::cluster::ClusterGenerator;
        match self {
            Mechanism::Cluster(m) => m.mean_cluster_size(),
            Mechanism::Hawkes(m) => m.mean_cluster_size(),
        }
    }
}

#[derive(Debug, Clone)]
pub enum ExperimentSpec {
    TailRatio {
        policy: ClusterSizePolicy,
        x_values: Vec<f64>,
        /// Resolved mean-cluster-size adjustment (1.0 when disabled).
        adjustment: f64,
        expect: Expectation,
    },
    ClusterSizeLaw {
        fertility: FertilityModel,
        /// Whether the kernel is mark-free, i.e. the Borel law applies.
        mark_free: bool,
    },
    HittingTimeEquivalence {
        fertility: FertilityModel,
    },
    ProcessMaxima {
        parent: ParentProcess,
        mechanism: Mechanism,
    },
    HawkesCrossCheck {
        fertility: FertilityModel,
        nu: f64,
    },
    LeftoverTrend {
        parent: ParentProcess,
        mechanism: Mechanism,
        /// Closed-form E[J_t] when available (Poisson parent, independent
        /// Poisson sizes, exponential offsets).
        closed_form: Option<LeftoverClosedForm>,
    },
}

#[derive(Debug, Clone, Copy)]
pub struct LeftoverClosedForm {
    pub nu: f64,
    pub size_mean: f64,
    pub offset_rate: f64,
}

impl LeftoverClosedForm {
    /// E[J_t] = ν μ (1 - e^(-θ t)) / θ.
    pub fn expected(&self, t: f64) -> f64 {
        self.nu * self.size_mean * (1.0 - (-self.offset_rate * t).exp()) / self.offset_rate
    }
}

#[derive(Debug, Clone)]
pub struct ValidatedConfig {
    pub kind: ExperimentKind,
    pub replications: u64,
    /// Horizon scales (t, or n for tail-ratio); `[0.0]` for experiments
    /// without a scale axis.
    pub horizons: Vec<f64>,
    pub master_seed: u64,
    pub output: Option<PathBuf>,
    pub marks: MarkModel,
    pub spec: ExperimentSpec,
    /// Canonical serialization of the raw config (with any seed override
    /// applied), hashed into the run manifest.
    pub canonical: String,
}

// ---------------------------------------------------------------------------
// Parsing and validation
// ---------------------------------------------------------------------------

fn line_of_offset(src: &str, offset: usize) -> usize {
    src[..offset.min(src.len())].matches('\n').count() + 1
}

fn line_of_key(src: &str, key: &str) -> Option<usize> {
    for (idx, line) in src.lines().enumerate() {
        let trimmed = line.trim_start();
        if trimmed.starts_with(key)
            && trimmed[key.len()..]
                .trim_start()
                .starts_with(['=', '{', '.', ']'].as_slice())
        {
            return Some(idx + 1);
        }
        if trimmed.starts_with('[') && trimmed.contains(key) {
            return Some(idx + 1);
        }
    }
    None
}

pub fn parse_raw(path: &str, text: &str) -> Result<RawConfig, ConfigError> {
    toml::from_str::<RawConfig>(text).map_err(|e| {
        let line = e
            .span()
            .map(|s| line_of_offset(text, s.start))
            .unwrap_or(1);
        ConfigError::Parse {
            path: path.to_string(),
            line,
            message: e.message().to_string(),
        }
    })
}

struct Context<'a> {
    path: &'a str,
    text: &'a str,
}

impl<'a> Context<'a> {
    fn semantic(&self, key: &str, message: String) -> ConfigError {
        ConfigError::Semantic {
            path: self.path.to_string(),
            line: line_of_key(self.text, key),
            message,
        }
    }

    fn require<'b, T>(&self, opt: &'b Option<T>, key: &str, ctx: &str) -> Result<&'b T, ConfigError> {
        opt.as_ref()
            .ok_or_else(|| self.semantic(key, format!("`{key}` is required for {ctx}")))
    }

    fn forbid<T>(&self, opt: &Option<T>, key: &str, ctx: &str) -> Result<(), ConfigError> {
        if opt.is_some() {
            Err(self.semantic(key, format!("`{key}` is not used by {ctx}; remove it")))
        } else {
            Ok(())
        }
    }
}

fn mark_family(ctx: &Context, block: &MarkBlock, key: &str) -> Result<MarkFamily, ConfigError> {
    let fam = match block.kind.as_str() {
        "pareto" => {
            ctx.forbid(&block.rate, "rate", "mark kind `pareto`")?;
            ctx.forbid(&block.scale, "scale", "mark kind `pareto`")?;
            let shape = *ctx.require(&block.shape, "shape", "mark kind `pareto`")?;
            MarkFamily::pareto(shape)
        }
        "exponential" => {
            ctx.forbid(&block.shape, "shape", "mark kind `exponential`")?;
            ctx.forbid(&block.scale, "scale", "mark kind `exponential`")?;
            let rate = *ctx.require(&block.rate, "rate", "mark kind `exponential`")?;
            MarkFamily::exponential(rate)
        }
        "uniform" => {
            ctx.forbid(&block.shape, "shape", "mark kind `uniform`")?;
            ctx.forbid(&block.rate, "rate", "mark kind `uniform`")?;
            let scale = *ctx.require(&block.scale, "scale", "mark kind `uniform`")?;
            MarkFamily::uniform(scale)
        }
        other => {
            return Err(ctx.semantic(
                key,
                format!("unknown mark kind `{other}` (expected pareto, exponential or uniform)"),
            ))
        }
    };
    fam.map_err(|e| ctx.semantic(key, e.to_string()))
}

fn count_law(ctx: &Context, block: &CountBlock) -> Result<CountLaw, ConfigError> {
    let law = match block.kind.as_str() {
        "fixed" => CountLaw::Fixed(*ctx.require(&block.k, "k", "count kind `fixed`")?),
        "poisson" => CountLaw::Poisson {
            mean: *ctx.require(&block.mean, "mean", "count kind `poisson`")?,
        },
        "geometric" => CountLaw::Geometric {
            p: *ctx.require(&block.p, "p", "count kind `geometric`")?,
        },
        "table" => CountLaw::Table {
            weights: ctx
                .require(&block.weights, "weights", "count kind `table`")?
                .clone(),
        },
        other => {
            return Err(ctx.semantic(
                "count",
                format!("unknown count kind `{other}` (expected fixed, poisson, geometric or table)"),
            ))
        }
    };
    law.validate()
        .map_err(|e| ctx.semantic("count", e.to_string()))?;
    Ok(law)
}

fn mark_effect(ctx: &Context, name: &Option<String>) -> Result<MarkEffect, ConfigError> {
    match name.as_deref() {
        None | Some("constant") => Ok(MarkEffect::Constant),
        Some("mean-scaled") => Ok(MarkEffect::MeanScaled),
        Some(other) => Err(ctx.semantic(
            "effect",
            format!("unknown mark effect `{other}` (expected constant or mean-scaled)"),
        )),
    }
}

fn policy(
    ctx: &Context,
    block: &PolicyBlock,
    marks: &MarkModel,
    prepass: &mut RandomStream,
) -> Result<ClusterSizePolicy, ConfigError> {
    let policy = match block.kind.as_str() {
        "deterministic" => {
            ctx.forbid(&block.count, "count", "policy kind `deterministic`")?;
            ctx.forbid(&block.coupling, "coupling", "policy kind `deterministic`")?;
            ctx.forbid(&block.shift, "shift", "policy kind `deterministic`")?;
            ctx.forbid(&block.threshold, "threshold", "policy kind `deterministic`")?;
            ClusterSizePolicy::Deterministic {
                k: *ctx.require(&block.k, "k", "policy kind `deterministic`")?,
            }
        }
        "independent-count" => {
            ctx.forbid(&block.k, "k", "policy kind `independent-count`")?;
            ctx.forbid(&block.coupling, "coupling", "policy kind `independent-count`")?;
            ctx.forbid(&block.shift, "shift", "policy kind `independent-count`")?;
            ctx.forbid(&block.threshold, "threshold", "policy kind `independent-count`")?;
            let count = ctx.require(&block.count, "count", "policy kind `independent-count`")?;
            ClusterSizePolicy::IndependentCount {
                law: count_law(ctx, count)?,
            }
        }
        "geometric-stopping" => {
            ctx.forbid(&block.k, "k", "policy kind `geometric-stopping`")?;
            ctx.forbid(&block.count, "count", "policy kind `geometric-stopping`")?;
            let coupling_name =
                ctx.require(&block.coupling, "coupling", "policy kind `geometric-stopping`")?;
            let coupling = match coupling_name.as_str() {
                "independent" => {
                    ctx.forbid(&block.shift, "shift", "coupling `independent`")?;
                    let threshold =
                        ctx.require(&block.threshold, "threshold", "coupling `independent`")?;
                    PairCoupling::Independent {
                        threshold: mark_family(ctx, threshold, "threshold")?,
                    }
                }
                "comonotone" => {
                    ctx.forbid(&block.shift, "shift", "coupling `comonotone`")?;
                    let threshold =
                        ctx.require(&block.threshold, "threshold", "coupling `comonotone`")?;
                    PairCoupling::Comonotone {
                        threshold: mark_family(ctx, threshold, "threshold")?,
                    }
                }
                "shifted" => {
                    ctx.forbid(&block.threshold, "threshold", "coupling `shifted`")?;
                    PairCoupling::Shifted {
                        shift: *ctx.require(&block.shift, "shift", "coupling `shifted`")?,
                    }
                }
                other => {
                    return Err(ctx.semantic(
                        "coupling",
                        format!(
                            "unknown coupling `{other}` (expected independent, comonotone or shifted)"
                        ),
                    ))
                }
            };
            ClusterSizePolicy::GeometricStopping { coupling }
        }
        "fixed-threshold" => {
            ctx.forbid(&block.k, "k", "policy kind `fixed-threshold`")?;
            ctx.forbid(&block.count, "count", "policy kind `fixed-threshold`")?;
            ctx.forbid(&block.coupling, "coupling", "policy kind `fixed-threshold`")?;
            ctx.forbid(&block.shift, "shift", "policy kind `fixed-threshold`")?;
            let threshold =
                ctx.require(&block.threshold, "threshold", "policy kind `fixed-threshold`")?;
            ClusterSizePolicy::FixedThreshold {
                threshold: mark_family(ctx, threshold, "threshold")?,
            }
        }
        other => {
            return Err(ctx.semantic(
                "policy",
                format!("unknown policy kind `{other}`"),
            ))
        }
    };
    policy
        .validate(marks, prepass)
        .map_err(|e| ctx.semantic("policy", e.to_string()))?;
    Ok(policy)
}

fn parent(ctx: &Context, block: &ParentBlock) -> Result<ParentProcess, ConfigError> {
    let law = match block.law.as_str() {
        "exponential" => {
            ctx.forbid(&block.value, "value", "parent law `exponential`")?;
            ctx.forbid(&block.lo, "lo", "parent law `exponential`")?;
            ctx.forbid(&block.hi, "hi", "parent law `exponential`")?;
            RenewalLaw::Exponential {
                rate: *ctx.require(&block.rate, "rate", "parent law `exponential`")?,
            }
        }
        "deterministic" => {
            ctx.forbid(&block.rate, "rate", "parent law `deterministic`")?;
            ctx.forbid(&block.lo, "lo", "parent law `deterministic`")?;
            ctx.forbid(&block.hi, "hi", "parent law `deterministic`")?;
            RenewalLaw::Deterministic {
                value: *ctx.require(&block.value, "value", "parent law `deterministic`")?,
            }
        }
        "uniform" => {
            ctx.forbid(&block.rate, "rate", "parent law `uniform`")?;
            ctx.forbid(&block.value, "value", "parent law `uniform`")?;
            RenewalLaw::Uniform {
                lo: *ctx.require(&block.lo, "lo", "parent law `uniform`")?,
                hi: *ctx.require(&block.hi, "hi", "parent law `uniform`")?,
            }
        }
        other => {
            return Err(ctx.semantic(
                "parent",
                format!("unknown parent law `{other}`"),
            ))
        }
    };
    ParentProcess::new(law).map_err(|e| ctx.semantic("parent", e.to_string()))
}

fn offset_law(ctx: &Context, block: &OffsetBlock) -> Result<OffsetLaw, ConfigError> {
    let law = match block.kind.as_str() {
        "exponential" => {
            ctx.forbid(&block.max, "max", "offset kind `exponential`")?;
            OffsetLaw::Exponential {
                rate: *ctx.require(&block.rate, "rate", "offset kind `exponential`")?,
            }
        }
        "uniform" => {
            ctx.forbid(&block.rate, "rate", "offset kind `uniform`")?;
            OffsetLaw::Uniform {
                max: *ctx.require(&block.max, "max", "offset kind `uniform`")?,
            }
        }
        "mark-scaled-exponential" => {
            ctx.forbid(&block.max, "max", "offset kind `mark-scaled-exponential`")?;
            OffsetLaw::MarkScaledExponential {
                rate: *ctx.require(&block.rate, "rate", "offset kind `mark-scaled-exponential`")?,
            }
        }
        other => {
            return Err(ctx.semantic(
                "offset",
                format!("unknown offset kind `{other}`"),
            ))
        }
    };
    law.validate().map_err(|e| ctx.semantic("offset", e.to_string()))?;
    Ok(law)
}

fn size_law(ctx: &Context, block: &SizeBlock) -> Result<SizeLaw, ConfigError> {
    match block.kind.as_str() {
        "mark-poisson" => {
            ctx.forbid(&block.k, "k", "size kind `mark-poisson`")?;
            ctx.forbid(&block.mean, "mean", "size kind `mark-poisson`")?;
            ctx.forbid(&block.p, "p", "size kind `mark-poisson`")?;
            ctx.forbid(&block.weights, "weights", "size kind `mark-poisson`")?;
            Ok(SizeLaw::MarkPoisson {
                kappa: *ctx.require(&block.kappa, "kappa", "size kind `mark-poisson`")?,
                effect: mark_effect(ctx, &block.effect)?,
            })
        }
        _ => {
            ctx.forbid(&block.kappa, "kappa", "mark-independent size laws")?;
            ctx.forbid(&block.effect, "effect", "mark-independent size laws")?;
            let count = CountBlock {
                kind: block.kind.clone(),
                k: block.k,
                mean: block.mean,
                p: block.p,
                weights: block.weights.clone(),
            };
            Ok(SizeLaw::Count(count_law(ctx, &count)?))
        }
    }
}

fn fertility(
    ctx: &Context,
    block: &FertilityBlock,
    marks: &MarkModel,
) -> Result<FertilityModel, ConfigError> {
    let kernel = match block.kernel.as_str() {
        "exponential" => {
            ctx.forbid(&block.beta, "beta", "kernel `exponential`")?;
            Kernel::Exponential {
                decay: *ctx.require(&block.decay, "decay", "kernel `exponential`")?,
            }
        }
        "power-law" => {
            ctx.forbid(&block.decay, "decay", "kernel `power-law`")?;
            Kernel::PowerLaw {
                beta: *ctx.require(&block.beta, "beta", "kernel `power-law`")?,
            }
        }
        other => {
            return Err(ctx.semantic(
                "fertility",
                format!("unknown kernel `{other}` (expected exponential or power-law)"),
            ))
        }
    };
    let effect = mark_effect(ctx, &block.effect)?;
    FertilityModel::new(kernel, block.kappa, effect, marks)
        .map_err(|e| ctx.semantic("fertility", e.to_string()))
}

fn mechanism(
    ctx: &Context,
    block: &MechanismBlock,
    fertility_block: &Option<FertilityBlock>,
    marks: &MarkModel,
) -> Result<Mechanism, ConfigError> {
    match block.kind.as_str() {
        "hawkes" => {
            ctx.forbid(&block.size, "size", "mechanism kind `hawkes`")?;
            ctx.forbid(&block.offset, "offset", "mechanism kind `hawkes`")?;
            let fert_block = ctx.require(fertility_block, "fertility", "mechanism kind `hawkes`")?;
            Ok(Mechanism::Hawkes(HawkesMechanism::new(fertility(
                ctx, fert_block, marks,
            )?)))
        }
        "mixed-binomial" | "renewal-cluster" => {
            ctx.forbid(fertility_block, "fertility", "non-Hawkes mechanisms")?;
            let form = if block.kind == "mixed-binomial" {
                ClusterForm::MixedBinomial
            } else {
                ClusterForm::RenewalCluster
            };
            let size = size_law(ctx, ctx.require(&block.size, "size", "cluster mechanisms")?)?;
            let offsets = offset_law(ctx, ctx.require(&block.offset, "offset", "cluster mechanisms")?)?;
            ClusterMechanism::new(form, size, offsets, marks)
                .map(Mechanism::Cluster)
                .map_err(|e| ctx.semantic("mechanism", e.to_string()))
        }
        other => Err(ctx.semantic(
            "mechanism",
            format!("unknown mechanism kind `{other}` (expected mixed-binomial, renewal-cluster or hawkes)"),
        )),
    }
}

/// Validates a parsed config; `seed_override` replaces the file's master
/// seed before any validation pre-pass runs.
pub fn validate(
    path: &str,
    text: &str,
    raw: RawConfig,
    seed_override: Option<u64>,
) -> Result<ValidatedConfig, ConfigError> {
    let ctx = Context { path, text };
    let mut raw = raw;
    if let Some(seed) = seed_override {
        raw.master_seed = seed;
    }
    if raw.replications == 0 {
        return Err(ctx.semantic("replications", "replications must be >= 1".to_string()));
    }
    let marks = MarkModel::new(mark_family(&ctx, &raw.mark, "mark")?);
    // Validation pre-passes draw from a reserved stream so experiment
    // replications never share draws with them.
    let mut prepass = RandomStream::derive(raw.master_seed, u32::MAX, 0);

    let kind = match raw.experiment.as_str() {
        "tail-ratio" => ExperimentKind::TailRatio,
        "cluster-size-law" => ExperimentKind::ClusterSizeLaw,
        "hitting-time-equivalence" => ExperimentKind::HittingTimeEquivalence,
        "process-maxima" => ExperimentKind::ProcessMaxima,
        "hawkes-cross-check" => ExperimentKind::HawkesCrossCheck,
        "leftover-trend" => ExperimentKind::LeftoverTrend,
        other => {
            return Err(ctx.semantic(
                "experiment",
                format!("unknown experiment `{other}`"),
            ))
        }
    };

    let scale_kind = match kind {
        ExperimentKind::TailRatio => "n",
        _ => "t",
    };
    let horizons: Vec<f64> = match kind {
        ExperimentKind::ClusterSizeLaw | ExperimentKind::HittingTimeEquivalence => {
            ctx.forbid(&raw.horizons, "horizons", "per-cluster experiments")?;
            vec![0.0]
        }
        _ => {
            let hs = ctx.require(&raw.horizons, "horizons", "scale-indexed experiments")?;
            if hs.is_empty() {
                return Err(ctx.semantic("horizons", "horizons must be non-empty".to_string()));
            }
            if hs.len() > u32::MAX as usize {
                return Err(ctx.semantic("horizons", "too many horizons".to_string()));
            }
            for h in hs {
                let ok = match kind {
                    ExperimentKind::TailRatio => h.fract() == 0.0 && *h >= 1.0,
                    _ => h.is_finite() && *h > 0.0,
                };
                if !ok {
                    return Err(ctx.semantic(
                        "horizons",
                        format!("invalid horizon {h} (must be a positive {scale_kind})"),
                    ));
                }
            }
            hs.clone()
        }
    };

    let spec = match kind {
        ExperimentKind::TailRatio => {
            ctx.forbid(&raw.parent, "parent", "experiment `tail-ratio`")?;
            ctx.forbid(&raw.mechanism, "mechanism", "experiment `tail-ratio`")?;
            ctx.forbid(&raw.fertility, "fertility", "experiment `tail-ratio`")?;
            let policy_block = ctx.require(&raw.policy, "policy", "experiment `tail-ratio`")?;
            let tr = ctx.require(&raw.tail_ratio, "tail-ratio", "experiment `tail-ratio`")?;
            let policy = policy(&ctx, policy_block, &marks, &mut prepass)?;
            if tr.x_values.is_empty() {
                return Err(ctx.semantic("x-values", "x-values must be non-empty".to_string()));
            }
            let (_, limit) = clustermax::sequences::standard_sequences(marks.family());
            for x in &tr.x_values {
                if !limit.supports(*x) {
                    return Err(ctx.semantic(
                        "x-values",
                        format!("x = {x} lies outside the support of {}", limit.name()),
                    ));
                }
            }
            let expect = match tr.expect.as_deref() {
                None | Some("converge") => Expectation::Converge,
                Some("diverge") => Expectation::Diverge,
                Some(other) => {
                    return Err(ctx.semantic(
                        "expect",
                        format!("unknown expectation `{other}` (expected converge or diverge)"),
                    ))
                }
            };
            let adjustment = match &tr.adjustment {
                None | Some(AdjustmentValue::Mode(_)) => {
                    let mode = match &tr.adjustment {
                        Some(AdjustmentValue::Mode(m)) => m.as_str(),
                        _ => "auto",
                    };
                    match mode {
                        "none" => 1.0,
                        "auto" => policy
                            .mean_block_length(&marks, &mut prepass)
                            .ok_or_else(|| {
                                ctx.semantic(
                                    "adjustment",
                                    "policy has no finite closed-form mean block length; \
                                     set adjustment to a number or `none`"
                                        .to_string(),
                                )
                            })?,
                        other => {
                            return Err(ctx.semantic(
                                "adjustment",
                                format!("unknown adjustment `{other}` (expected auto, none or a number)"),
                            ))
                        }
                    }
                }
                Some(AdjustmentValue::Factor(f)) => *f,
            };
            if !(adjustment.is_finite() && adjustment >= 1.0) {
                return Err(ctx.semantic(
                    "adjustment",
                    format!("adjustment must be finite and >= 1, got {adjustment}"),
                ));
            }
            ExperimentSpec::TailRatio {
                policy,
                x_values: tr.x_values.clone(),
                adjustment,
                expect,
            }
        }
        ExperimentKind::ClusterSizeLaw | ExperimentKind::HittingTimeEquivalence => {
            ctx.forbid(&raw.policy, "policy", "per-cluster experiments")?;
            ctx.forbid(&raw.tail_ratio, "tail-ratio", "per-cluster experiments")?;
            ctx.forbid(&raw.parent, "parent", "per-cluster experiments")?;
            ctx.forbid(&raw.mechanism, "mechanism", "per-cluster experiments")?;
            let fert_block = ctx.require(&raw.fertility, "fertility", "per-cluster experiments")?;
            let fert = fertility(&ctx, fert_block, &marks)?;
            if kind == ExperimentKind::ClusterSizeLaw {
                let mark_free = fert_block.effect.as_deref().unwrap_or("constant") == "constant";
                ExperimentSpec::ClusterSizeLaw {
                    fertility: fert,
                    mark_free,
                }
            } else {
                ExperimentSpec::HittingTimeEquivalence { fertility: fert }
            }
        }
        ExperimentKind::ProcessMaxima | ExperimentKind::LeftoverTrend => {
            let label = kind.name();
            ctx.forbid(&raw.policy, "policy", label)?;
            ctx.forbid(&raw.tail_ratio, "tail-ratio", label)?;
            let parent_block = ctx.require(&raw.parent, "parent", label)?;
            let mech_block = ctx.require(&raw.mechanism, "mechanism", label)?;
            let parent = parent(&ctx, parent_block)?;
            let mech = mechanism(&ctx, mech_block, &raw.fertility, &marks)?;
            if let Mechanism::Hawkes(_) = mech {
                if !matches!(parent.law(), RenewalLaw::Exponential { .. }) {
                    return Err(ctx.semantic(
                        "parent",
                        "the Hawkes mechanism requires Poisson immigrants (exponential parent law)"
                            .to_string(),
                    ));
                }
            }
            if kind == ExperimentKind::ProcessMaxima {
                ExperimentSpec::ProcessMaxima {
                    parent,
                    mechanism: mech,
                }
            } else {
                if horizons.len() < 3 {
                    return Err(ctx.semantic(
                        "horizons",
                        "leftover-trend needs at least 3 horizons for a trend verdict".to_string(),
                    ));
                }
                let closed_form = match &mech {
                    Mechanism::Cluster(m) => match (parent.law(), m.size_law(), m.form()) {
                        (
                            RenewalLaw::Exponential { rate: nu },
                            SizeLaw::Count(CountLaw::Poisson { mean }),
                            ClusterForm::MixedBinomial,
                        ) => match mech_block.offset.as_ref().map(|o| o.kind.as_str()) {
                            Some("exponential") => Some(LeftoverClosedForm {
                                nu,
                                size_mean: *mean,
                                offset_rate: mech_block.offset.as_ref().unwrap().rate.unwrap(),
                            }),
                            _ => None,
                        },
                        _ => None,
                    },
                    Mechanism::Hawkes(_) => None,
                };
                ExperimentSpec::LeftoverTrend {
                    parent,
                    mechanism: mech,
                    closed_form,
                }
            }
        }
        ExperimentKind::HawkesCrossCheck => {
            ctx.forbid(&raw.policy, "policy", "experiment `hawkes-cross-check`")?;
            ctx.forbid(&raw.tail_ratio, "tail-ratio", "experiment `hawkes-cross-check`")?;
            ctx.forbid(&raw.mechanism, "mechanism", "experiment `hawkes-cross-check`")?;
            let parent_block = ctx.require(&raw.parent, "parent", "experiment `hawkes-cross-check`")?;
            let parent = parent(&ctx, parent_block)?;
            let nu = match parent.law() {
                RenewalLaw::Exponential { rate } => rate,
                _ => {
                    return Err(ctx.semantic(
                        "parent",
                        "hawkes-cross-check requires an exponential parent law".to_string(),
                    ))
                }
            };
            let fert_block =
                ctx.require(&raw.fertility, "fertility", "experiment `hawkes-cross-check`")?;
            ExperimentSpec::HawkesCrossCheck {
                fertility: fertility(&ctx, fert_block, &marks)?,
                nu,
            }
        }
    };

    let canonical = serde_json::to_string(&raw).expect("raw config serializes");
    Ok(ValidatedConfig {
        kind,
        replications: raw.replications,
        horizons,
        master_seed: raw.master_seed,
        output: raw.output.map(PathBuf::from),
        marks,
        spec,
        canonical,
    })
}

/// Reads, parses and validates a config file.
pub fn load(path: &str, seed_override: Option<u64>) -> Result<ValidatedConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_string(),
        source,
    })?;
    let raw = parse_raw(path, &text)?;
    validate(path, &text, raw, seed_override)
}
