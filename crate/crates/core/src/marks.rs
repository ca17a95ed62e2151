//! Mark (claim size) families.
//!
//! One parametric family is shipped per max-domain of attraction, each with a
//! closed-form survival function and quantile so the normalization limit can
//! be checked exactly at finite n:
//!
//! * `Pareto(α)` with `P(X > x) = x^(-α)` for `x >= 1` (Frechet domain),
//! * `Exponential(λ)` (Gumbel domain),
//! * `Uniform(0, θ)` (Weibull domain, shape 1).
//!
//! Marks live on the positive half line and double as the claim sizes; the
//! claim function is the identity.

use crate::rng::RandomStream;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MarkError {
    #[error("{family} parameter must be positive and finite, got {value}")]
    InvalidParameter { family: &'static str, value: f64 },
    #[error("mark family {0} has an infinite mean; mean-scaled couplings need E[A] < infinity")]
    InfiniteMean(String),
}

/// Shipped parametric claim-size families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MarkFamily {
    /// `P(X > x) = x^(-shape)` for `x >= 1`.
    Pareto { shape: f64 },
    Exponential { rate: f64 },
    /// Uniform on `(0, scale)`.
    Uniform { scale: f64 },
}

impl MarkFamily {
    pub fn pareto(shape: f64) -> Result<Self, MarkError> {
        if shape.is_finite() && shape > 0.0 {
            Ok(MarkFamily::Pareto { shape })
        } else {
            Err(MarkError::InvalidParameter {
                family: "Pareto",
                value: shape,
            })
        }
    }

    pub fn exponential(rate: f64) -> Result<Self, MarkError> {
        if rate.is_finite() && rate > 0.0 {
            Ok(MarkFamily::Exponential { rate })
        } else {
            Err(MarkError::InvalidParameter {
                family: "Exponential",
                value: rate,
            })
        }
    }

    pub fn uniform(scale: f64) -> Result<Self, MarkError> {
        if scale.is_finite() && scale > 0.0 {
            Ok(MarkFamily::Uniform { scale })
        } else {
            Err(MarkError::InvalidParameter {
                family: "Uniform",
                value: scale,
            })
        }
    }

    /// Survival function `P(X > x)`.
    pub fn survival(&self, x: f64) -> f64 {
        match *self {
            MarkFamily::Pareto { shape } => {
                if x <= 1.0 {
                    1.0
                } else {
                    x.powf(-shape)
                }
            }
            MarkFamily::Exponential { rate } => {
                if x <= 0.0 {
                    1.0
                } else {
                    (-rate * x).exp()
                }
            }
            MarkFamily::Uniform { scale } => {
                if x <= 0.0 {
                    1.0
                } else if x >= scale {
                    0.0
                } else {
                    1.0 - x / scale
                }
            }
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        1.0 - self.survival(x)
    }

    /// Inverse CDF on (0, 1).
    pub fn quantile(&self, u: f64) -> f64 {
        debug_assert!(u > 0.0 && u < 1.0);
        match *self {
            MarkFamily::Pareto { shape } => (1.0 - u).powf(-1.0 / shape),
            MarkFamily::Exponential { rate } => -(1.0 - u).ln() / rate,
            MarkFamily::Uniform { scale } => scale * u,
        }
    }

    /// E[X]; `None` when infinite (Pareto with shape <= 1).
    pub fn mean(&self) -> Option<f64> {
        match *self {
            MarkFamily::Pareto { shape } => {
                if shape > 1.0 {
                    Some(shape / (shape - 1.0))
                } else {
                    None
                }
            }
            MarkFamily::Exponential { rate } => Some(1.0 / rate),
            MarkFamily::Uniform { scale } => Some(scale / 2.0),
        }
    }

    pub fn name(&self) -> String {
        match *self {
            MarkFamily::Pareto { shape } => format!("Pareto({shape})"),
            MarkFamily::Exponential { rate } => format!("Exponential({rate})"),
            MarkFamily::Uniform { scale } => format!("Uniform(0, {scale})"),
        }
    }
}

/// Mark sampler plus the claim function mapping marks to claim sizes.
///
/// The shipped mark space is the positive half line and the claim function is
/// the identity, so claims inherit the mark distribution directly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarkModel {
    family: MarkFamily,
}

impl MarkModel {
    pub fn new(family: MarkFamily) -> Self {
        MarkModel { family }
    }

    pub fn family(&self) -> MarkFamily {
        self.family
    }

    pub fn sample(&self, rng: &mut RandomStream) -> f64 {
        self.family.quantile(rng.open01())
    }

    /// Claim size of a mark; identity for the shipped scalar mark space.
    pub fn claim(&self, mark: f64) -> f64 {
        mark
    }

    pub fn survival(&self, x: f64) -> f64 {
        self.family.survival(x)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.family.cdf(x)
    }

    pub fn mean(&self) -> Option<f64> {
        self.family.mean()
    }
}

/// Nonnegative mark functional `g` with `E[g(A)] = 1`, coupling cluster
/// fertility or size to the ancestral mark.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MarkEffect {
    /// g = 1: marks do not influence the coupling.
    Constant,
    /// g(a) = a / E[A]; normalized exactly whenever E[A] is finite.
    MeanScaled,
}

impl MarkEffect {
    /// The normalizing constant (E[A] for the mean-scaled effect); errors
    /// when the mark family has no finite mean.
    pub fn normalizer(&self, model: &MarkModel) -> Result<f64, MarkError> {
        match self {
            MarkEffect::Constant => Ok(1.0),
            MarkEffect::MeanScaled => model
                .mean()
                .ok_or_else(|| MarkError::InfiniteMean(model.family().name())),
        }
    }

    /// g(a), given the normalizer from [`MarkEffect::normalizer`].
    pub fn g(&self, mark: f64, normalizer: f64) -> f64 {
        match self {
            MarkEffect::Constant => 1.0,
            MarkEffect::MeanScaled => mark / normalizer,
        }
    }
}
