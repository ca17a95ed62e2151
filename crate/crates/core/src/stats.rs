//! Estimators and goodness-of-fit tests shared by every experiment.
//!
//! All tests run at the 1% significance level. Kolmogorov-Smirnov critical
//! values use the asymptotic law (suites operate at n >= 10^3); chi-square
//! cells are pooled from the tail until every expected count reaches the
//! Cochran threshold of 5.

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use std::ops::RangeInclusive;
use thiserror::Error;

/// Asymptotic 1% Kolmogorov-Smirnov coefficient: D_crit = 1.628 / sqrt(n).
pub const KS_COEFF_01: f64 = 1.628;

/// Two-sided 1% standard-normal critical value.
pub const Z_CRIT_01: f64 = 2.575_829_303_548_900_4;

const COCHRAN_MIN_EXPECTED: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("need at least {required} samples, got {actual}")]
    TooFewSamples { required: usize, actual: usize },
    #[error("samples must be finite (found NaN or infinity)")]
    NonFiniteSample,
    #[error("support is empty after tail pooling")]
    EmptySupport,
    #[error("need at least {required} scales for a trend verdict, got {actual}")]
    TooFewScales { required: usize, actual: usize },
}

/// A sorted sample with its empirical CDF.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalDistribution {
    values: Vec<f64>,
}

impl EmpiricalDistribution {
    pub fn from_samples(mut values: Vec<f64>) -> Result<Self, StatsError> {
        if values.is_empty() {
            return Err(StatsError::TooFewSamples {
                required: 1,
                actual: 0,
            });
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(StatsError::NonFiniteSample);
        }
        values.sort_by(|a, b| a.total_cmp(b));
        Ok(EmpiricalDistribution { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn sorted_values(&self) -> &[f64] {
        &self.values
    }

    /// Empirical CDF (right-continuous, proportion <= x).
    pub fn cdf(&self, x: f64) -> f64 {
        let idx = self.values.partition_point(|v| *v <= x);
        idx as f64 / self.values.len() as f64
    }
}

/// Outcome of one goodness-of-fit check, serialized into run summaries.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GofReport {
    pub statistic: f64,
    #[serde(rename = "critical")]
    pub critical_value_01: f64,
    pub pass: bool,
    #[serde(rename = "n")]
    pub n_samples: u64,
    #[serde(skip_serializing_if = "String::is_empty")]
    pub notes: String,
}

impl GofReport {
    fn new(statistic: f64, critical_value_01: f64, n_samples: u64, notes: String) -> Self {
        GofReport {
            statistic,
            critical_value_01,
            pass: statistic < critical_value_01,
            n_samples,
            notes,
        }
    }
}

/// One-sample Kolmogorov-Smirnov test against the CDF `cdf`.
pub fn ks_one_sample<F: Fn(f64) -> f64>(
    emp: &EmpiricalDistribution,
    cdf: F,
) -> Result<GofReport, StatsError> {
    if emp.len() < 50 {
        return Err(StatsError::TooFewSamples {
            required: 50,
            actual: emp.len(),
        });
    }
    let statistic = ks_statistic(emp, &cdf);
    let n = emp.len() as f64;
    Ok(GofReport::new(
        statistic,
        KS_COEFF_01 / n.sqrt(),
        emp.len() as u64,
        String::new(),
    ))
}

/// The raw sup-distance between the ECDF and `cdf` (no size gate).
pub fn ks_statistic<F: Fn(f64) -> f64>(emp: &EmpiricalDistribution, cdf: &F) -> f64 {
    let n = emp.len() as f64;
    let mut d: f64 = 0.0;
    for (i, x) in emp.sorted_values().iter().enumerate() {
        let f = cdf(*x);
        d = d.max(((i + 1) as f64 / n - f).abs());
        d = d.max((f - i as f64 / n).abs());
    }
    d
}

/// Two-sample Kolmogorov-Smirnov test.
pub fn ks_two_sample(
    a: &EmpiricalDistribution,
    b: &EmpiricalDistribution,
) -> Result<GofReport, StatsError> {
    if a.len() < 50 || b.len() < 50 {
        return Err(StatsError::TooFewSamples {
            required: 50,
            actual: a.len().min(b.len()),
        });
    }
    let statistic = ks_two_sample_statistic(a, b);
    let (m, n) = (a.len() as f64, b.len() as f64);
    let critical = KS_COEFF_01 * ((m + n) / (m * n)).sqrt();
    Ok(GofReport::new(
        statistic,
        critical,
        (a.len() + b.len()) as u64,
        String::new(),
    ))
}

fn ks_two_sample_statistic(a: &EmpiricalDistribution, b: &EmpiricalDistribution) -> f64 {
    let xs = a.sorted_values();
    let ys = b.sorted_values();
    let (m, n) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < xs.len() && j < ys.len() {
        let t = xs[i].min(ys[j]);
        while i < xs.len() && xs[i] <= t {
            i += 1;
        }
        while j < ys.len() && ys[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / m - j as f64 / n).abs());
    }
    d
}

/// P(D > statistic) under the one-sample KS null, with Stephens' finite-n
/// correction of the asymptotic Kolmogorov law.
pub fn ks_p_value(statistic: f64, n: u64) -> f64 {
    let sqrt_n = (n as f64).sqrt();
    kolmogorov_sf((sqrt_n + 0.12 + 0.11 / sqrt_n) * statistic)
}

/// Survival function of the Kolmogorov distribution, Q(λ) = 2 Σ (-1)^(j-1) e^(-2 j² λ²).
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let a2 = -2.0 * lambda * lambda;
    let mut sum = 0.0;
    let mut sign = 1.0;
    let mut prev_term = 0.0f64;
    for j in 1..=100 {
        let term = sign * (a2 * (j * j) as f64).exp();
        sum += term;
        if term.abs() <= 1e-3 * prev_term || term.abs() <= 1e-12 * sum.abs() {
            return (2.0 * sum).clamp(0.0, 1.0);
        }
        sign = -sign;
        prev_term = term.abs();
    }
    1.0
}

/// Chi-square report for an integer sample against a reference pmf, plus the
/// total-variation distance on the pooled partition.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteGofReport {
    #[serde(flatten)]
    pub chi_square: GofReport,
    pub tv_distance: f64,
    pub cells: usize,
}

/// Partitions `lo..=hi` into singleton cells plus one pooled tail cell (which
/// also absorbs values outside the range), pooling until every expected count
/// reaches the Cochran threshold.
fn pooled_cells<P: Fn(u64) -> f64>(
    support: &RangeInclusive<u64>,
    pmf: &P,
    n: f64,
) -> Result<(Vec<u64>, f64), StatsError> {
    let (lo, hi) = (*support.start(), *support.end());
    if hi < lo {
        return Err(StatsError::EmptySupport);
    }
    let mut singles: Vec<u64> = (lo..=hi).collect();
    let mut tail_mass: f64 = 1.0 - singles.iter().map(|k| pmf(*k)).sum::<f64>();
    tail_mass = tail_mass.max(0.0);
    // Pool from the top until both the tail cell and all retained singleton
    // cells meet the minimum expected count.
    while let Some(&top) = singles.last() {
        let top_expected = n * pmf(top);
        if n * tail_mass >= COCHRAN_MIN_EXPECTED && top_expected >= COCHRAN_MIN_EXPECTED {
            break;
        }
        singles.pop();
        tail_mass += pmf(top);
    }
    if singles.len() < 2 {
        return Err(StatsError::EmptySupport);
    }
    Ok((singles, tail_mass))
}

/// Chi-square goodness of fit of integer `samples` against `pmf`, with tail
/// cells pooled; also reports the TV distance over the pooled partition.
pub fn discrete_gof<P: Fn(u64) -> f64>(
    samples: &[u64],
    pmf: P,
    support: RangeInclusive<u64>,
) -> Result<DiscreteGofReport, StatsError> {
    let n = samples.len() as f64;
    if samples.is_empty() {
        return Err(StatsError::TooFewSamples {
            required: 1,
            actual: 0,
        });
    }
    let (singles, tail_mass) = pooled_cells(&support, &pmf, n)?;
    let boundary = *singles.last().unwrap();
    let lo = *support.start();

    let mut observed = vec![0u64; singles.len() + 1];
    for &s in samples {
        if s >= lo && s <= boundary {
            observed[(s - lo) as usize] += 1;
        } else {
            *observed.last_mut().unwrap() += 1;
        }
    }

    let mut statistic = 0.0;
    let mut tv = 0.0;
    for (idx, &k) in singles.iter().enumerate() {
        let expected = n * pmf(k);
        let obs = observed[idx] as f64;
        statistic += (obs - expected).powi(2) / expected;
        tv += (obs / n - pmf(k)).abs();
    }
    let tail_expected = n * tail_mass;
    let tail_obs = *observed.last().unwrap() as f64;
    if tail_expected > 0.0 {
        statistic += (tail_obs - tail_expected).powi(2) / tail_expected;
    }
    tv += (tail_obs / n - tail_mass).abs();
    tv *= 0.5;

    let cells = singles.len() + 1;
    let critical = chi_square_critical_01((cells - 1) as f64);
    Ok(DiscreteGofReport {
        chi_square: GofReport::new(
            statistic,
            critical,
            samples.len() as u64,
            format!("chi-square, {} pooled cells", cells),
        ),
        tv_distance: tv,
        cells,
    })
}

/// Chi-square homogeneity test between two integer samples on a pooled
/// partition of `support` (plus a shared tail cell).
pub fn discrete_homogeneity(
    a: &[u64],
    b: &[u64],
    support: RangeInclusive<u64>,
) -> Result<GofReport, StatsError> {
    if a.is_empty() || b.is_empty() {
        return Err(StatsError::TooFewSamples {
            required: 1,
            actual: 0,
        });
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let total = na + nb;
    // Pool against the combined empirical proportions.
    let lo = *support.start();
    let hi = *support.end();
    let mut combined = vec![0u64; (hi - lo + 1) as usize];
    let mut combined_tail = 0u64;
    for &s in a.iter().chain(b.iter()) {
        if s >= lo && s <= hi {
            combined[(s - lo) as usize] += 1;
        } else {
            combined_tail += 1;
        }
    }
    let min_group = na.min(nb);
    let mut singles: Vec<u64> = (lo..=hi).collect();
    let mut tail_count = combined_tail as f64;
    // Retained singleton cells need the smaller group's expected count to
    // clear the threshold.
    while let Some(&top) = singles.last() {
        let top_combined = combined[(top - lo) as usize] as f64;
        if min_group * top_combined / total >= COCHRAN_MIN_EXPECTED {
            break;
        }
        singles.pop();
        tail_count += top_combined;
    }
    // The tail cell needs the same, unless it carries no mass at all and can
    // simply be dropped.
    while tail_count > 0.0 && min_group * tail_count / total < COCHRAN_MIN_EXPECTED {
        match singles.pop() {
            Some(top) => tail_count += combined[(top - lo) as usize] as f64,
            None => break,
        }
    }
    if singles.len() < 2 {
        return Err(StatsError::EmptySupport);
    }
    let boundary = *singles.last().unwrap();
    let include_tail = tail_count > 0.0;

    let count_cells = |sample: &[u64]| -> Vec<f64> {
        let mut cells = vec![0.0; singles.len() + usize::from(include_tail)];
        for &s in sample {
            if s >= lo && s <= boundary {
                cells[(s - lo) as usize] += 1.0;
            } else if include_tail {
                *cells.last_mut().unwrap() += 1.0;
            }
        }
        cells
    };
    let cells_a = count_cells(a);
    let cells_b = count_cells(b);

    let mut statistic = 0.0;
    for c in 0..cells_a.len() {
        let pooled = (cells_a[c] + cells_b[c]) / total;
        for (n_i, obs) in [(na, cells_a[c]), (nb, cells_b[c])] {
            let expected = n_i * pooled;
            if expected > 0.0 {
                statistic += (obs - expected).powi(2) / expected;
            }
        }
    }
    let df = (cells_a.len() - 1) as f64;
    Ok(GofReport::new(
        statistic,
        chi_square_critical_01(df),
        (a.len() + b.len()) as u64,
        format!("chi-square homogeneity, {} cells", cells_a.len()),
    ))
}

/// 1% critical value of the chi-square law with `df` degrees of freedom.
pub fn chi_square_critical_01(df: f64) -> f64 {
    ChiSquared::new(df)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.99)
}

/// Monotonicity verdict over estimates observed at increasing scales.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TrendVerdict {
    Decreasing,
    Flat,
    Increasing,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrendPoint {
    pub scale: f64,
    pub estimate: f64,
    pub std_error: f64,
}

/// Classifies the trend of `points` (ordered by scale): a step counts only if
/// it moves more than twice the combined standard error, and a monotone
/// verdict requires every step to count in the same direction.
pub fn trend_report(points: &[TrendPoint]) -> Result<TrendVerdict, StatsError> {
    if points.len() < 3 {
        return Err(StatsError::TooFewScales {
            required: 3,
            actual: points.len(),
        });
    }
    let mut all_down = true;
    let mut all_up = true;
    for pair in points.windows(2) {
        let diff = pair[1].estimate - pair[0].estimate;
        let combined = (pair[0].std_error.powi(2) + pair[1].std_error.powi(2)).sqrt();
        if diff >= -2.0 * combined {
            all_down = false;
        }
        if diff <= 2.0 * combined {
            all_up = false;
        }
    }
    Ok(if all_down {
        TrendVerdict::Decreasing
    } else if all_up {
        TrendVerdict::Increasing
    } else {
        TrendVerdict::Flat
    })
}

/// Sample mean with variance and standard error of the mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub variance: f64,
    pub std_error: f64,
    pub n: u64,
}

pub fn mean_with_se(xs: &[f64]) -> MeanEstimate {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let variance = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    MeanEstimate {
        mean,
        variance,
        std_error: (variance / n).sqrt(),
        n: xs.len() as u64,
    }
}

/// Welch two-sample z-test for equal means at the 1% level.
pub fn welch_mean_test(a: &[f64], b: &[f64]) -> GofReport {
    let ea = mean_with_se(a);
    let eb = mean_with_se(b);
    let denom = (ea.std_error.powi(2) + eb.std_error.powi(2)).sqrt();
    let z = if denom > 0.0 {
        ((ea.mean - eb.mean) / denom).abs()
    } else if ea.mean == eb.mean {
        0.0
    } else {
        f64::INFINITY
    };
    GofReport::new(
        z,
        Z_CRIT_01,
        (a.len() + b.len()) as u64,
        "Welch mean z-test".to_string(),
    )
}

/// Moment-based two-sample test for equal variances at the 1% level.
pub fn variance_equality_test(a: &[f64], b: &[f64]) -> GofReport {
    let var_of_s2 = |xs: &[f64]| -> (f64, f64) {
        let n = xs.len() as f64;
        let est = mean_with_se(xs);
        let m4 = xs.iter().map(|x| (x - est.mean).powi(4)).sum::<f64>() / n;
        let v = (m4 - est.variance.powi(2) * (n - 3.0) / (n - 1.0)) / n;
        (est.variance, v.max(0.0))
    };
    let (va, sa) = var_of_s2(a);
    let (vb, sb) = var_of_s2(b);
    let denom = (sa + sb).sqrt();
    let z = if denom > 0.0 {
        ((va - vb) / denom).abs()
    } else if va == vb {
        0.0
    } else {
        f64::INFINITY
    };
    GofReport::new(
        z,
        Z_CRIT_01,
        (a.len() + b.len()) as u64,
        "variance equality z-test".to_string(),
    )
}

/// Spearman rank correlation (average ranks on ties).
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let rx = ranks(xs);
    let ry = ranks(ys);
    pearson(&rx, &ry)
}

fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut out = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            out[idx] = avg;
        }
        i = j + 1;
    }
    out
}

fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        cov += (x - mx) * (y - my);
        vx += (x - mx).powi(2);
        vy += (y - my).powi(2);
    }
    if vx == 0.0 || vy == 0.0 {
        0.0
    } else {
        cov / (vx * vy).sqrt()
    }
}

/// Adaptive Simpson quadrature of `f` on `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        ((b - a) / 6.0 * (fa + 4.0 * fm + fb), m, fm)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        whole: f64,
        m: f64,
        fm: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (left, lm, flm) = simpson(f, a, fa, m, fm);
        let (right, rm, frm) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, fa, m, fm, left, lm, flm, tol * 0.5, depth - 1)
                + recurse(f, m, fm, b, fb, right, rm, frm, tol * 0.5, depth - 1)
        }
    }
    let fa = f(a);
    let fb = f(b);
    let (whole, m, fm) = simpson(f, a, fa, b, fb);
    recurse(f, a, fa, b, fb, whole, m, fm, tol, 50)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RandomStream;

    #[test]
    fn ks_one_sample_point_mass_against_uniform() {
        let emp = EmpiricalDistribution::from_samples(vec![0.5; 100]).unwrap();
        let report = ks_one_sample(&emp, |x| x.clamp(0.0, 1.0)).unwrap();
        assert!((report.statistic - 0.5).abs() < 1e-12);
        assert!(!report.pass);
    }

    #[test]
    fn ks_one_sample_null_case() {
        let mut rng = RandomStream::derive(101, 0, 0);
        let xs: Vec<f64> = (0..10_000).map(|_| rng.open01()).collect();
        let emp = EmpiricalDistribution::from_samples(xs).unwrap();
        let report = ks_one_sample(&emp, |x| x.clamp(0.0, 1.0)).unwrap();
        assert!(report.pass, "statistic {}", report.statistic);
        assert!((report.critical_value_01 - 1.628 / 100.0).abs() < 1e-12);
    }

    #[test]
    fn ks_one_sample_rejects_small_samples() {
        let emp = EmpiricalDistribution::from_samples(vec![0.1; 10]).unwrap();
        assert!(matches!(
            ks_one_sample(&emp, |x| x),
            Err(StatsError::TooFewSamples { .. })
        ));
    }

    #[test]
    fn ks_two_sample_identical_is_zero() {
        let mut rng = RandomStream::derive(5, 0, 0);
        let xs: Vec<f64> = (0..200).map(|_| rng.open01()).collect();
        let a = EmpiricalDistribution::from_samples(xs.clone()).unwrap();
        let b = EmpiricalDistribution::from_samples(xs).unwrap();
        let report = ks_two_sample(&a, &b).unwrap();
        assert_eq!(report.statistic, 0.0);
        assert!(report.pass);
    }

    #[test]
    fn ks_two_sample_known_value() {
        // ECDFs of {1,1,4,4} and {1,1,1,4} differ by 0.25 on [1, 4).
        let a = EmpiricalDistribution::from_samples(vec![1.0, 1.0, 4.0, 4.0]).unwrap();
        let b = EmpiricalDistribution::from_samples(vec![1.0, 1.0, 1.0, 4.0]).unwrap();
        assert!((ks_two_sample_statistic(&a, &b) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn discrete_gof_geometric_null() {
        // Geometric(1/2) on {1, 2, ...} sampled by inversion.
        let mut rng = RandomStream::derive(7, 0, 0);
        let samples: Vec<u64> = (0..100_000)
            .map(|_| (rng.open01().ln() / 0.5f64.ln()).floor() as u64 + 1)
            .collect();
        let pmf = |k: u64| 0.5f64.powi(k as i32);
        let report = discrete_gof(&samples, pmf, 1..=30).unwrap();
        assert!(report.chi_square.pass, "chi2 {}", report.chi_square.statistic);
        assert!(report.tv_distance < 0.01);
    }

    #[test]
    fn discrete_gof_detects_point_mass() {
        let samples = vec![3u64; 1_000];
        let pmf = |_k: u64| 0.1;
        let report = discrete_gof(&samples, pmf, 0..=9).unwrap();
        assert!(!report.chi_square.pass);
        assert!(report.chi_square.statistic > 1_000.0);
        assert!(report.tv_distance > 0.8);
    }

    #[test]
    fn tv_distance_zero_iff_exact_match() {
        // 10 cells uniform, exactly matching counts.
        let mut samples = Vec::new();
        for k in 0..10u64 {
            samples.extend(std::iter::repeat_n(k, 100));
        }
        let report = discrete_gof(&samples, |_| 0.1, 0..=9).unwrap();
        assert!(report.tv_distance.abs() < 1e-12);
        assert!(report.chi_square.statistic.abs() < 1e-9);
    }

    #[test]
    fn homogeneity_same_law_passes() {
        let mut rng = RandomStream::derive(13, 0, 0);
        let draw = |rng: &mut RandomStream| (rng.open01().ln() / 0.6f64.ln()).floor() as u64 + 1;
        let a: Vec<u64> = (0..50_000).map(|_| draw(&mut rng)).collect();
        let b: Vec<u64> = (0..50_000).map(|_| draw(&mut rng)).collect();
        let report = discrete_homogeneity(&a, &b, 1..=20).unwrap();
        assert!(report.pass, "statistic {}", report.statistic);
    }

    #[test]
    fn homogeneity_detects_shift() {
        let a = vec![1u64; 5_000];
        let b = vec![2u64; 5_000];
        let report = discrete_homogeneity(&a, &b, 1..=4).unwrap();
        assert!(!report.pass);
    }

    #[test]
    fn trend_verdicts() {
        let tiny = 1e-6;
        let mk = |es: [f64; 3]| {
            vec![
                TrendPoint {
                    scale: 100.0,
                    estimate: es[0],
                    std_error: tiny,
                },
                TrendPoint {
                    scale: 1_000.0,
                    estimate: es[1],
                    std_error: tiny,
                },
                TrendPoint {
                    scale: 10_000.0,
                    estimate: es[2],
                    std_error: tiny,
                },
            ]
        };
        assert_eq!(
            trend_report(&mk([0.10, 0.05, 0.02])).unwrap(),
            TrendVerdict::Decreasing
        );
        assert_eq!(
            trend_report(&mk([0.05, 0.05, 0.05])).unwrap(),
            TrendVerdict::Flat
        );
        assert_eq!(
            trend_report(&mk([1.0, 5.0, 30.0])).unwrap(),
            TrendVerdict::Increasing
        );
        assert!(trend_report(&mk([1.0, 2.0, 3.0])[..2]).is_err());
    }

    #[test]
    fn trend_requires_significance() {
        let noisy = vec![
            TrendPoint {
                scale: 1.0,
                estimate: 1.0,
                std_error: 10.0,
            },
            TrendPoint {
                scale: 2.0,
                estimate: 0.9,
                std_error: 10.0,
            },
            TrendPoint {
                scale: 3.0,
                estimate: 0.8,
                std_error: 10.0,
            },
        ];
        assert_eq!(trend_report(&noisy).unwrap(), TrendVerdict::Flat);
    }

    #[test]
    fn spearman_on_monotone_and_independent_data() {
        let xs: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x * x).collect();
        assert!((spearman(&xs, &ys) - 1.0).abs() < 1e-12);
        let zs: Vec<f64> = xs.iter().map(|x| -x).collect();
        assert!((spearman(&xs, &zs) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn welch_test_null_and_alternative() {
        let mut rng = RandomStream::derive(21, 0, 0);
        let a: Vec<f64> = (0..20_000).map(|_| rng.open01()).collect();
        let b: Vec<f64> = (0..20_000).map(|_| rng.open01()).collect();
        assert!(welch_mean_test(&a, &b).pass);
        let shifted: Vec<f64> = a.iter().map(|x| x + 0.05).collect();
        assert!(!welch_mean_test(&a, &shifted).pass);
    }

    #[test]
    fn ks_p_values_are_uniform_under_null() {
        // Distribution-free self-test: p-values of 10^3 null KS runs are
        // themselves uniform at the 1% level.
        let runs = 1_000;
        let per_run = 1_000;
        let mut pvals = Vec::with_capacity(runs);
        for r in 0..runs {
            let mut rng = RandomStream::derive(4242, r as u32, 0);
            let xs: Vec<f64> = (0..per_run).map(|_| rng.open01()).collect();
            let emp = EmpiricalDistribution::from_samples(xs).unwrap();
            let d = ks_statistic(&emp, &|x: f64| x.clamp(0.0, 1.0));
            pvals.push(ks_p_value(d, per_run as u64));
        }
        let emp = EmpiricalDistribution::from_samples(pvals).unwrap();
        let report = ks_one_sample(&emp, |x| x.clamp(0.0, 1.0)).unwrap();
        assert!(report.pass, "p-value uniformity KS {}", report.statistic);
    }

    #[test]
    fn simpson_integrates_smooth_functions() {
        let val = adaptive_simpson(&|x: f64| x.exp(), 0.0, 1.0, 1e-10);
        assert!((val - (1.0f64.exp() - 1.0)).abs() < 1e-9);
        let val = adaptive_simpson(&|x: f64| (-x).exp(), 0.0, 40.0, 1e-10);
        assert!((val - 1.0).abs() < 1e-8);
    }
}
