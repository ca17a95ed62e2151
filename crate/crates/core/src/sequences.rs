//! Normalization sequences for maxima of the shipped mark families, and the
//! cluster-size adjustment applied to them.
//!
//! For a family with survival F̄ the sequences `(a_n, b_n)` satisfy
//! `n · P(X > a_n x + b_n) -> μ_G(x)`; the shipped families make the identity
//! exact at finite n once the threshold lies in the tail region:
//!
//! ```text
//! Pareto(α):       a_n = n^(1/α),    b_n = 0,          G = Frechet(α)
//! Exponential(λ):  a_n = 1/λ,        b_n = (log n)/λ,  G = Gumbel
//! Uniform(0, θ):   a_n = θ/n,        b_n = θ,          G = Weibull(1)
//! ```
//!
//! Cluster models scale the index instead of the sequence values: the
//! adjusted sequences are `c_n = a_⌊m·n⌋`, `d_n = b_⌊m·n⌋` where `m` is the
//! mean number of claims per cluster.

use crate::evt::{EvtError, ExtremeValueFamily};
use crate::marks::MarkFamily;

/// Scale/center sequences `(a_n, b_n)` for one mark family, exposed as
/// functions of n so arbitrary horizons can be normalized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizationSequences {
    family: MarkFamily,
}

impl NormalizationSequences {
    pub fn family(&self) -> MarkFamily {
        self.family
    }

    /// a_n > 0.
    pub fn scale(&self, n: u64) -> f64 {
        debug_assert!(n >= 1);
        let n = n as f64;
        match self.family {
            MarkFamily::Pareto { shape } => n.powf(1.0 / shape),
            MarkFamily::Exponential { rate } => 1.0 / rate,
            MarkFamily::Uniform { scale } => scale / n,
        }
    }

    /// b_n.
    pub fn center(&self, n: u64) -> f64 {
        debug_assert!(n >= 1);
        let n = n as f64;
        match self.family {
            MarkFamily::Pareto { .. } => 0.0,
            MarkFamily::Exponential { rate } => n.ln() / rate,
            MarkFamily::Uniform { scale } => scale,
        }
    }

    /// The threshold `a_n x + b_n`.
    pub fn threshold(&self, n: u64, x: f64) -> f64 {
        self.scale(n) * x + self.center(n)
    }
}

/// Returns the normalization sequences and the limit law for a mark family.
pub fn standard_sequences(family: MarkFamily) -> (NormalizationSequences, ExtremeValueFamily) {
    let limit = match family {
        MarkFamily::Pareto { shape } => ExtremeValueFamily::Frechet { shape },
        MarkFamily::Exponential { .. } => ExtremeValueFamily::Gumbel,
        MarkFamily::Uniform { .. } => ExtremeValueFamily::Weibull { shape: 1.0 },
    };
    (NormalizationSequences { family }, limit)
}

/// Sequences with the index inflated by the mean cluster size:
/// `c_n = a_⌊m·n⌋`, `d_n = b_⌊m·n⌋`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdjustedSequences {
    base: NormalizationSequences,
    mean_cluster_size: f64,
}

impl AdjustedSequences {
    /// `mean_cluster_size` is the expected number of claims per cluster
    /// (ancestor included for the cluster-process models); must be >= 1.
    pub fn new(base: NormalizationSequences, mean_cluster_size: f64) -> Result<Self, EvtError> {
        if !mean_cluster_size.is_finite() || mean_cluster_size < 1.0 {
            return Err(EvtError::InvalidMeanClusterSize(mean_cluster_size));
        }
        Ok(AdjustedSequences {
            base,
            mean_cluster_size,
        })
    }

    /// Identity adjustment (mean cluster size one).
    pub fn identity(base: NormalizationSequences) -> Self {
        AdjustedSequences {
            base,
            mean_cluster_size: 1.0,
        }
    }

    pub fn mean_cluster_size(&self) -> f64 {
        self.mean_cluster_size
    }

    pub fn base(&self) -> NormalizationSequences {
        self.base
    }

    fn index(&self, n: u64) -> u64 {
        let scaled = (self.mean_cluster_size * n as f64).floor() as u64;
        scaled.max(1)
    }

    /// c_n = a_⌊m·n⌋.
    pub fn scale(&self, n: u64) -> f64 {
        self.base.scale(self.index(n))
    }

    /// d_n = b_⌊m·n⌋.
    pub fn center(&self, n: u64) -> f64 {
        self.base.center(self.index(n))
    }

    /// The threshold `c_n x + d_n`.
    pub fn threshold(&self, n: u64, x: f64) -> f64 {
        self.scale(n) * x + self.center(n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evt::ExtremeValueFamily;

    #[test]
    fn shipped_sequences_match_closed_forms() {
        let (seq, g) = standard_sequences(MarkFamily::pareto(1.0).unwrap());
        assert_eq!(seq.scale(10), 10.0);
        assert_eq!(seq.center(10), 0.0);
        assert_eq!(g, ExtremeValueFamily::Frechet { shape: 1.0 });

        let (seq, g) = standard_sequences(MarkFamily::exponential(1.0).unwrap());
        assert_eq!(seq.scale(20), 1.0);
        assert!((seq.center(20) - 20.0f64.ln()).abs() < 1e-15);
        assert_eq!(g, ExtremeValueFamily::Gumbel);

        let (seq, g) = standard_sequences(MarkFamily::uniform(1.0).unwrap());
        assert_eq!(seq.scale(100), 0.01);
        assert_eq!(seq.center(100), 1.0);
        assert_eq!(g, ExtremeValueFamily::Weibull { shape: 1.0 });
    }

    #[test]
    fn finite_n_identity_exact_for_pareto() {
        // n * P(X > a_n x) = x^(-α) whenever a_n x >= 1.
        let family = MarkFamily::pareto(1.0).unwrap();
        let (seq, g) = standard_sequences(family);
        let n = 10u64;
        let x = 1.0;
        let ratio = n as f64 * family.survival(seq.threshold(n, x));
        assert!((ratio - g.tail_measure(x).unwrap()).abs() < 1e-12);
        assert!((ratio - 1.0).abs() < 1e-12);
    }

    #[test]
    fn finite_n_identity_exact_for_exponential() {
        // n * P(X > log n) = 1 at x = 0.
        let family = MarkFamily::exponential(1.0).unwrap();
        let (seq, _) = standard_sequences(family);
        let n = (3.0f64).exp().round() as u64;
        let ratio = n as f64 * family.survival(seq.threshold(n, 0.0));
        assert!((ratio - 1.0).abs() < 1e-12);
    }

    #[test]
    fn finite_n_identity_exact_for_uniform() {
        // n * P(X > 1 - 1/n) = 1 at x = -1.
        let family = MarkFamily::uniform(1.0).unwrap();
        let (seq, _) = standard_sequences(family);
        let n = 100u64;
        let ratio = n as f64 * family.survival(seq.threshold(n, -1.0));
        assert!((ratio - 1.0).abs() < 1e-12);
    }

    #[test]
    fn adjustment_floors_the_index() {
        let (seq, _) = standard_sequences(MarkFamily::pareto(1.0).unwrap());
        let adj = AdjustedSequences::new(seq, 2.0).unwrap();
        assert_eq!(adj.scale(50), 100.0);
        let adj = AdjustedSequences::new(seq, 1.5).unwrap();
        assert_eq!(adj.scale(3), 4.0); // floor(4.5) = 4
    }

    #[test]
    fn unit_adjustment_is_identity() {
        for family in [
            MarkFamily::pareto(2.0).unwrap(),
            MarkFamily::exponential(0.7).unwrap(),
            MarkFamily::uniform(2.5).unwrap(),
        ] {
            let (seq, _) = standard_sequences(family);
            let adj = AdjustedSequences::new(seq, 1.0).unwrap();
            for k in 0..=6u32 {
                let n = 10u64.pow(k);
                assert_eq!(adj.scale(n), seq.scale(n));
                assert_eq!(adj.center(n), seq.center(n));
            }
        }
    }

    #[test]
    fn rejects_mean_below_one() {
        let (seq, _) = standard_sequences(MarkFamily::pareto(1.0).unwrap());
        assert!(AdjustedSequences::new(seq, 0.5).is_err());
        assert!(AdjustedSequences::new(seq, f64::INFINITY).is_err());
        assert!(AdjustedSequences::new(seq, f64::NAN).is_err());
    }
}
