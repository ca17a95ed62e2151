//! The three extreme value distributions and their tail measures.
//!
//! Conventions:
//!
//! ```text
//! Frechet(α):  G(x) = exp(-x^(-α))      for x > 0, 0 otherwise
//! Gumbel:      G(x) = exp(-e^(-x))      on the whole line
//! Weibull(α):  G(x) = exp(-(-x)^α)      for x < 0, 1 for x >= 0
//! ```
//!
//! The Weibull family is parameterized with upper endpoint 0; location shifts
//! belong to the centering sequence of whatever mark family maps onto it.
//! The support `E = {y : G(y) > 0}` is `(0, ∞)` for Frechet and the whole
//! line for Gumbel and Weibull, and the tail measure on `E` is
//! `μ_G(x, ∞) = -log G(x)`.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvtError {
    #[error("shape parameter must be positive and finite, got {0}")]
    InvalidShape(f64),
    #[error("x = {x} lies outside the support of {family}")]
    OutsideSupport { family: String, x: f64 },
    #[error("mean cluster size must be finite and >= 1, got {0}")]
    InvalidMeanClusterSize(f64),
}

/// One of the three extreme value laws, with shape where applicable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtremeValueFamily {
    Frechet { shape: f64 },
    Gumbel,
    Weibull { shape: f64 },
}

impl ExtremeValueFamily {
    pub fn frechet(shape: f64) -> Result<Self, EvtError> {
        if shape.is_finite() && shape > 0.0 {
            Ok(ExtremeValueFamily::Frechet { shape })
        } else {
            Err(EvtError::InvalidShape(shape))
        }
    }

    pub fn weibull(shape: f64) -> Result<Self, EvtError> {
        if shape.is_finite() && shape > 0.0 {
            Ok(ExtremeValueFamily::Weibull { shape })
        } else {
            Err(EvtError::InvalidShape(shape))
        }
    }

    /// G(x); 0 below the lower support endpoint, 1 above the upper one.
    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            ExtremeValueFamily::Frechet { shape } => {
                if x <= 0.0 {
                    0.0
                } else {
                    (-x.powf(-shape)).exp()
                }
            }
            ExtremeValueFamily::Gumbel => (-(-x).exp()).exp(),
            ExtremeValueFamily::Weibull { shape } => {
                if x >= 0.0 {
                    1.0
                } else {
                    (-(-x).powf(shape)).exp()
                }
            }
        }
    }

    /// Whether `x` lies in `E = {y : G(y) > 0}`.
    pub fn supports(&self, x: f64) -> bool {
        match *self {
            ExtremeValueFamily::Frechet { .. } => x > 0.0,
            ExtremeValueFamily::Gumbel | ExtremeValueFamily::Weibull { .. } => x.is_finite(),
        }
    }

    /// Tail measure μ_G(x, ∞) = -log G(x), defined for x in E.
    pub fn tail_measure(&self, x: f64) -> Result<f64, EvtError> {
        if !self.supports(x) {
            return Err(EvtError::OutsideSupport {
                family: self.name(),
                x,
            });
        }
        Ok(match *self {
            ExtremeValueFamily::Frechet { shape } => x.powf(-shape),
            ExtremeValueFamily::Gumbel => (-x).exp(),
            ExtremeValueFamily::Weibull { shape } => {
                if x >= 0.0 {
                    0.0
                } else {
                    (-x).powf(shape)
                }
            }
        })
    }

    pub fn name(&self) -> String {
        match *self {
            ExtremeValueFamily::Frechet { shape } => format!("Frechet({shape})"),
            ExtremeValueFamily::Gumbel => "Gumbel".to_string(),
            ExtremeValueFamily::Weibull { shape } => format!("Weibull({shape})"),
        }
    }
}
