//! Per-experiment task bodies and aggregation.
//!
//! A run is a grid of (horizon, replication) tasks. Each task owns the
//! stream derived from `(master_seed, replication, horizon_index)`, produces
//! one row of values, and rows are aggregated single-threaded afterwards, so
//! results are independent of scheduling.

use crate::config::{
    Expectation, ExperimentKind, ExperimentSpec, LeftoverClosedForm, Mechanism, ValidatedConfig,
};
use clustermax::cluster::simulate_process_streaming;
use clustermax::error::SimError;
use clustermax::hawkes::{
    borel_pmf, sample_hawkes_cluster, sample_hitting_time, simulate_by_thinning,
};
use clustermax::maxima::sample_h;
use clustermax::rng::RandomStream;
use clustermax::sequences::{standard_sequences, AdjustedSequences};
use clustermax::stats::{
    discrete_gof, discrete_homogeneity, ks_one_sample, ks_statistic, mean_with_se, trend_report,
    variance_equality_test, welch_mean_test, EmpiricalDistribution, TrendPoint, TrendVerdict,
};
use serde_json::{json, Value as Json};
use std::fmt;

/// One cell of the results table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Value {
    Float(f64),
    Int(u64),
    /// Serialized as `NA` (empty maxima, inapplicable columns).
    Missing,
}

impl Value {
    pub fn as_float(&self) -> Option<f64> {
        match self {
            Value::Float(f) => Some(*f),
            Value::Int(i) => Some(*i as f64),
            Value::Missing => None,
        }
    }

    fn opt(v: Option<f64>) -> Value {
        v.map_or(Value::Missing, Value::Float)
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Float(x) => write!(f, "{x}"),
            Value::Int(i) => write!(f, "{i}"),
            Value::Missing => write!(f, "NA"),
        }
    }
}

/// Completed task grid in deterministic (horizon-major) order.
pub struct ResultTable {
    pub rows: Vec<Vec<Value>>,
    pub replications: u64,
    pub horizons: usize,
}

impl ResultTable {
    pub fn horizon_rows(&self, h_idx: usize) -> &[Vec<Value>] {
        let reps = self.replications as usize;
        &self.rows[h_idx * reps..(h_idx + 1) * reps]
    }
}

#[derive(Debug)]
pub enum AggregateError {
    /// A capped replication whose tail indicator could not be resolved.
    UnresolvedCap { replication: u32, horizon_index: u32 },
    Stats(String),
}

/// Aggregated output of one run.
pub struct RunSummary {
    pub pass: bool,
    pub json: Json,
    /// `(relative path, contents)` of ready-to-plot two-column files.
    pub plots: Vec<(String, String)>,
}

impl ValidatedConfig {
    pub fn value_columns(&self) -> &'static [&'static str] {
        match self.kind {
            ExperimentKind::TailRatio => &["h", "k", "capped", "partialMax", "pendingThreshold"],
            ExperimentKind::ClusterSizeLaw => &["totalSize", "maxGeneration"],
            ExperimentKind::HittingTimeEquivalence => &["totalSize", "zeta"],
            ExperimentKind::ProcessMaxima => &["mT", "mTau", "epsT", "hTau", "jT", "tauT"],
            ExperimentKind::HawkesCrossCheck => &["countThinning", "countBranching"],
            ExperimentKind::LeftoverTrend => &["jT", "tauT"],
        }
    }

    /// Executes one (replication, horizon) task on its own derived stream.
    pub fn run_task(&self, replication: u32, horizon_index: u32) -> Result<Vec<Value>, SimError> {
        let mut rng = RandomStream::derive(self.master_seed, replication, horizon_index);
        let horizon = self.horizons[horizon_index as usize];
        match &self.spec {
            ExperimentSpec::TailRatio { policy, .. } => {
                match sample_h(policy, &self.marks, &mut rng) {
                    Ok(sample) => Ok(vec![
                        Value::opt(sample.max),
                        Value::Int(sample.count),
                        Value::Int(0),
                        Value::Missing,
                        Value::Missing,
                    ]),
                    Err(SimError::IterationCap { state, .. }) => Ok(vec![
                        Value::Missing,
                        Value::Int(state.draws),
                        Value::Int(1),
                        Value::opt(state.partial_max),
                        Value::opt(state.pending_threshold),
                    ]),
                    Err(e) => Err(e),
                }
            }
            ExperimentSpec::ClusterSizeLaw { fertility, .. } => {
                let ancestral = self.marks.sample(&mut rng);
                let cluster = sample_hawkes_cluster(fertility, &self.marks, ancestral, &mut rng)?;
                let max_generation = cluster
                    .points
                    .iter()
                    .map(|p| u64::from(p.generation))
                    .max()
                    .unwrap_or(0);
                Ok(vec![
                    Value::Int(cluster.total_size()),
                    Value::Int(max_generation),
                ])
            }
            ExperimentSpec::HittingTimeEquivalence { fertility } => {
                let ancestral = self.marks.sample(&mut rng);
                let cluster = sample_hawkes_cluster(fertility, &self.marks, ancestral, &mut rng)?;
                let zeta = sample_hitting_time(fertility, &self.marks, &mut rng)?;
                Ok(vec![Value::Int(cluster.total_size()), Value::Int(zeta)])
            }
            ExperimentSpec::ProcessMaxima { parent, mechanism } => {
                let summary = match mechanism {
                    Mechanism::Cluster(m) => {
                        simulate_process_streaming(parent, m, &self.marks, horizon, &mut rng)?
                    }
                    Mechanism::Hawkes(m) => {
                        simulate_process_streaming(parent, m, &self.marks, horizon, &mut rng)?
                    }
                };
                Ok(vec![
                    Value::opt(summary.running_max),
                    Value::Float(summary.tau_max),
                    Value::opt(summary.leftover_max),
                    Value::Float(summary.next_cluster_max),
                    Value::Int(summary.leftover_count),
                    Value::Int(summary.first_passage),
                ])
            }
            ExperimentSpec::HawkesCrossCheck { fertility, nu } => {
                let thinned =
                    simulate_by_thinning(fertility, &self.marks, *nu, horizon, &mut rng)?;
                let parent = clustermax::cluster::ParentProcess::new(
                    clustermax::cluster::RenewalLaw::Exponential { rate: *nu },
                )
                .expect("validated rate");
                let mech = clustermax::hawkes::HawkesMechanism::new(*fertility);
                let summary =
                    simulate_process_streaming(&parent, &mech, &self.marks, horizon, &mut rng)?;
                Ok(vec![
                    Value::Int(thinned.len() as u64),
                    Value::Int(summary.points_in_window),
                ])
            }
            ExperimentSpec::LeftoverTrend {
                parent, mechanism, ..
            } => {
                let summary = match mechanism {
                    Mechanism::Cluster(m) => {
                        simulate_process_streaming(parent, m, &self.marks, horizon, &mut rng)?
                    }
                    Mechanism::Hawkes(m) => {
                        simulate_process_streaming(parent, m, &self.marks, horizon, &mut rng)?
                    }
                };
                Ok(vec![
                    Value::Int(summary.leftover_count),
                    Value::Int(summary.first_passage),
                ])
            }
        }
    }

    pub fn summarize(&self, table: &ResultTable) -> Result<RunSummary, AggregateError> {
        match &self.spec {
            ExperimentSpec::TailRatio {
                x_values,
                adjustment,
                expect,
                ..
            } => self.summarize_tail_ratio(table, x_values, *adjustment, *expect),
            ExperimentSpec::ClusterSizeLaw {
                fertility,
                mark_free,
            } => self.summarize_cluster_size(table, fertility.kappa(), *mark_free),
            ExperimentSpec::HittingTimeEquivalence { .. } => self.summarize_hitting_time(table),
            ExperimentSpec::ProcessMaxima { parent, mechanism } => {
                self.summarize_process_maxima(table, parent.nu(), mechanism.mean_cluster_size())
            }
            ExperimentSpec::HawkesCrossCheck { fertility, nu } => {
                self.summarize_cross_check(table, fertility.kappa(), *nu)
            }
            ExperimentSpec::LeftoverTrend { closed_form, .. } => {
                self.summarize_leftover_trend(table, *closed_form)
            }
        }
    }

    fn summarize_tail_ratio(
        &self,
        table: &ResultTable,
        x_values: &[f64],
        adjustment: f64,
        expect: Expectation,
    ) -> Result<RunSummary, AggregateError> {
        let (seq, limit) = standard_sequences(self.marks.family());
        let adj = AdjustedSequences::new(seq, adjustment).expect("validated adjustment");
        let reps = table.replications as f64;
        let mut per_point = Vec::new();
        let mut trends = Vec::new();
        let mut all_within = true;
        let mut plots = Vec::new();

        for (x_idx, x) in x_values.iter().enumerate() {
            let mut points = Vec::new();
            for (h_idx, n_f) in self.horizons.iter().enumerate() {
                let n = *n_f as u64;
                let threshold = adj.threshold(n, *x);
                let mut exceed = 0u64;
                let mut capped = 0u64;
                for (rep, row) in table.horizon_rows(h_idx).iter().enumerate() {
                    let is_capped = row[2] == Value::Int(1);
                    let hit = if !is_capped {
                        row[0].as_float().is_some_and(|h| h > threshold)
                    } else {
                        capped += 1;
                        let partial_hit = row[3].as_float().is_some_and(|m| m > threshold);
                        let pending_hit = row[4].as_float().is_some_and(|w| w >= threshold);
                        if !(partial_hit || pending_hit) {
                            return Err(AggregateError::UnresolvedCap {
                                replication: rep as u32,
                                horizon_index: h_idx as u32,
                            });
                        }
                        true
                    };
                    if hit {
                        exceed += 1;
                    }
                }
                let p_hat = exceed as f64 / reps;
                let estimate = n as f64 * p_hat;
                let std_error = n as f64 * (p_hat * (1.0 - p_hat) / reps).sqrt();
                let target = limit.tail_measure(*x).expect("x validated in support");
                // Agreement is judged against the standard error under the
                // null (target exceedance probability), which stays honest
                // at low expected exceedance counts.
                let p0 = target / n as f64;
                let null_se = n as f64 * (p0 * (1.0 - p0) / reps).sqrt();
                let within = (estimate - target).abs() <= 3.0 * null_se + 1e-12;
                all_within &= within;
                points.push(TrendPoint {
                    scale: n as f64,
                    estimate,
                    std_error,
                });
                per_point.push(json!({
                    "n": n,
                    "x": x,
                    "threshold": threshold,
                    "estimate": estimate,
                    "stdError": std_error,
                    "target": target,
                    "withinThreeSe": within,
                    "cappedResolved": capped,
                }));
            }
            let verdict = if points.len() >= 3 {
                Some(trend_report(&points).map_err(|e| AggregateError::Stats(e.to_string()))?)
            } else {
                None
            };
            trends.push(json!({ "x": x, "verdict": verdict }));
            let mut plot = String::new();
            for p in &points {
                plot.push_str(&format!("{} {}\n", p.scale, p.estimate));
            }
            plots.push((format!("plots/tail_ratio_x{x_idx}.dat"), plot));
        }

        let pass = match expect {
            Expectation::Converge => all_within,
            Expectation::Diverge => trends.iter().all(|t| {
                t.get("verdict")
                    .and_then(|v| v.as_str())
                    .map(|v| v == "increasing")
                    .unwrap_or(false)
            }),
        };
        let json = json!({
            "experiment": self.kind.name(),
            "adjustment": adjustment,
            "expect": match expect { Expectation::Converge => "converge", Expectation::Diverge => "diverge" },
            "points": per_point,
            "trends": trends,
            "pass": pass,
        });
        Ok(RunSummary { pass, json, plots })
    }

    fn summarize_cluster_size(
        &self,
        table: &ResultTable,
        kappa: f64,
        mark_free: bool,
    ) -> Result<RunSummary, AggregateError> {
        let sizes: Vec<u64> = table
            .horizon_rows(0)
            .iter()
            .map(|row| match row[0] {
                Value::Int(s) => s,
                _ => unreachable!("totalSize is integral"),
            })
            .collect();
        let est = mean_with_se(&sizes.iter().map(|s| *s as f64).collect::<Vec<_>>());
        let target = 1.0 / (1.0 - kappa);
        let rel_err = (est.mean - target).abs() / target;
        let mean_pass = rel_err <= 0.01;

        let borel = if mark_free {
            Some(
                discrete_gof(&sizes, |n| borel_pmf(kappa, n), 1..=20)
                    .map_err(|e| AggregateError::Stats(e.to_string()))?,
            )
        } else {
            None
        };
        let borel_pass = borel
            .as_ref()
            .map(|r| r.chi_square.pass && r.tv_distance < 0.01)
            .unwrap_or(true);
        let pass = mean_pass && borel_pass;

        let mut plot = String::new();
        let n = sizes.len() as f64;
        for k in 1..=20u64 {
            let emp = sizes.iter().filter(|s| **s == k).count() as f64 / n;
            plot.push_str(&format!("{k} {emp}\n"));
        }
        let mut target_plot = String::new();
        if mark_free {
            for k in 1..=20u64 {
                target_plot.push_str(&format!("{k} {}\n", borel_pmf(kappa, k)));
            }
        }
        let mut plots = vec![("plots/size_pmf.dat".to_string(), plot)];
        if mark_free {
            plots.push(("plots/size_pmf_target.dat".to_string(), target_plot));
        }

        let json = json!({
            "experiment": self.kind.name(),
            "kappa": kappa,
            "meanSize": est.mean,
            "meanStdError": est.std_error,
            "target": target,
            "relativeError": rel_err,
            "meanWithinOnePercent": mean_pass,
            "borel": borel.as_ref().map(|r| json!({
                "chiSquare": r.chi_square,
                "tvDistance": r.tv_distance,
                "cells": r.cells,
            })),
            "pass": pass,
        });
        Ok(RunSummary { pass, json, plots })
    }

    fn summarize_hitting_time(&self, table: &ResultTable) -> Result<RunSummary, AggregateError> {
        let mut sizes = Vec::new();
        let mut zetas = Vec::new();
        for row in table.horizon_rows(0) {
            match (row[0], row[1]) {
                (Value::Int(s), Value::Int(z)) => {
                    sizes.push(s);
                    zetas.push(z);
                }
                _ => unreachable!("integral columns"),
            }
        }
        let chi2 = discrete_homogeneity(&sizes, &zetas, 1..=20)
            .map_err(|e| AggregateError::Stats(e.to_string()))?;
        let size_mean = mean_with_se(&sizes.iter().map(|s| *s as f64).collect::<Vec<_>>());
        let zeta_mean = mean_with_se(&zetas.iter().map(|z| *z as f64).collect::<Vec<_>>());
        let pass = chi2.pass;
        let json = json!({
            "experiment": self.kind.name(),
            "homogeneity": chi2,
            "meanTotalSize": size_mean.mean,
            "meanZeta": zeta_mean.mean,
            "pass": pass,
        });
        Ok(RunSummary {
            pass,
            json,
            plots: Vec::new(),
        })
    }

    fn summarize_process_maxima(
        &self,
        table: &ResultTable,
        nu: f64,
        mean_cluster_size: f64,
    ) -> Result<RunSummary, AggregateError> {
        let (seq, limit) = standard_sequences(self.marks.family());
        let adj = AdjustedSequences::new(seq, mean_cluster_size).expect("mean cluster size >= 1");
        let mut per_horizon = Vec::new();
        let mut plots = Vec::new();
        let mut pass = true;

        for (h_idx, t) in self.horizons.iter().enumerate() {
            let n_index = (nu * t).floor() as u64;
            let scale = adj.scale(n_index);
            let center = adj.center(n_index);
            let raw_scale = seq.scale(n_index);
            let raw_center = seq.center(n_index);

            let rows = table.horizon_rows(h_idx);
            let mut normalized = Vec::with_capacity(rows.len());
            let mut unadjusted = Vec::with_capacity(rows.len());
            let mut missing = 0u64;
            let mut identity_failures = 0u64;
            let mut leftovers = Vec::with_capacity(rows.len());
            for row in rows {
                match row[0].as_float() {
                    Some(m_t) => {
                        normalized.push((m_t - center) / scale);
                        unadjusted.push((m_t - raw_center) / raw_scale);
                    }
                    None => missing += 1,
                }
                // M^τ(t) must recombine exactly from its three parts.
                let m_tau = row[1].as_float().expect("mTau always present");
                let h_tau = row[3].as_float().expect("hTau always present");
                let recombined = [row[0].as_float(), Some(h_tau), row[2].as_float()]
                    .into_iter()
                    .flatten()
                    .fold(f64::NEG_INFINITY, f64::max);
                if recombined != m_tau {
                    identity_failures += 1;
                }
                if let Value::Int(j) = row[4] {
                    leftovers.push(j as f64);
                }
            }

            let emp = EmpiricalDistribution::from_samples(normalized)
                .map_err(|e| AggregateError::Stats(e.to_string()))?;
            let ks_adjusted = ks_one_sample(&emp, |y| limit.cdf(y))
                .map_err(|e| AggregateError::Stats(e.to_string()))?;
            let emp_unadj = EmpiricalDistribution::from_samples(unadjusted)
                .map_err(|e| AggregateError::Stats(e.to_string()))?;
            let ks_unadjusted = ks_statistic(&emp_unadj, &|y: f64| limit.cdf(y));
            let adjustment_matters = ks_adjusted.statistic < ks_unadjusted;
            let leftover_mean = mean_with_se(&leftovers);

            pass &= ks_adjusted.pass && adjustment_matters && identity_failures == 0;
            per_horizon.push(json!({
                "t": t,
                "nIndex": n_index,
                "meanClusterSize": mean_cluster_size,
                "ksAdjusted": ks_adjusted,
                "ksUnadjustedStatistic": ks_unadjusted,
                "adjustmentMatters": adjustment_matters,
                "identityFailures": identity_failures,
                "emptyRunningMax": missing,
                "meanLeftoverCount": leftover_mean.mean,
            }));

            let mut ecdf = String::new();
            let n = emp.len() as f64;
            for (i, x) in emp.sorted_values().iter().enumerate() {
                ecdf.push_str(&format!("{x} {}\n", (i + 1) as f64 / n));
            }
            plots.push((format!("plots/ecdf_t{t}.dat"), ecdf));
            let lo = emp.sorted_values()[0];
            let hi = emp.sorted_values()[emp.len() - 1];
            let mut target = String::new();
            for i in 0..=200 {
                let x = lo + (hi - lo) * i as f64 / 200.0;
                target.push_str(&format!("{x} {}\n", limit.cdf(x)));
            }
            plots.push((format!("plots/target_t{t}.dat"), target));
        }

        let json = json!({
            "experiment": self.kind.name(),
            "limit": limit.name(),
            "horizons": per_horizon,
            "pass": pass,
        });
        Ok(RunSummary { pass, json, plots })
    }

    fn summarize_cross_check(
        &self,
        table: &ResultTable,
        kappa: f64,
        nu: f64,
    ) -> Result<RunSummary, AggregateError> {
        let mut per_horizon = Vec::new();
        let mut pass = true;
        for (h_idx, t) in self.horizons.iter().enumerate() {
            let rows = table.horizon_rows(h_idx);
            let thinning: Vec<f64> = rows
                .iter()
                .map(|r| r[0].as_float().expect("count present"))
                .collect();
            let branching: Vec<f64> = rows
                .iter()
                .map(|r| r[1].as_float().expect("count present"))
                .collect();
            let mean_test = welch_mean_test(&thinning, &branching);
            let var_test = variance_equality_test(&thinning, &branching);
            let target = nu * t / (1.0 - kappa);
            let thin_mean = mean_with_se(&thinning);
            let branch_mean = mean_with_se(&branching);
            let thin_rel = (thin_mean.mean - target).abs() / target;
            let branch_rel = (branch_mean.mean - target).abs() / target;
            let ok = mean_test.pass && var_test.pass && thin_rel <= 0.01 && branch_rel <= 0.01;
            pass &= ok;
            per_horizon.push(json!({
                "t": t,
                "targetMeanCount": target,
                "thinningMean": thin_mean.mean,
                "branchingMean": branch_mean.mean,
                "thinningRelativeError": thin_rel,
                "branchingRelativeError": branch_rel,
                "meanTest": mean_test,
                "varianceTest": var_test,
                "pass": ok,
            }));
        }
        let json = json!({
            "experiment": self.kind.name(),
            "kappa": kappa,
            "nu": nu,
            "horizons": per_horizon,
            "pass": pass,
        });
        Ok(RunSummary {
            pass,
            json,
            plots: Vec::new(),
        })
    }

    fn summarize_leftover_trend(
        &self,
        table: &ResultTable,
        closed_form: Option<LeftoverClosedForm>,
    ) -> Result<RunSummary, AggregateError> {
        let mut points = Vec::new();
        let mut per_horizon = Vec::new();
        let mut closed_form_pass = true;
        for (h_idx, t) in self.horizons.iter().enumerate() {
            let js: Vec<f64> = table
                .horizon_rows(h_idx)
                .iter()
                .map(|r| r[0].as_float().expect("jT present"))
                .collect();
            let count_est = mean_with_se(&js);
            let fractions: Vec<f64> = js.iter().map(|j| j / t).collect();
            let frac_est = mean_with_se(&fractions);
            points.push(TrendPoint {
                scale: *t,
                estimate: frac_est.mean,
                std_error: frac_est.std_error,
            });
            let expected = closed_form.map(|cf| cf.expected(*t));
            if let Some(e) = expected {
                let ok = (count_est.mean - e).abs() <= 3.0 * count_est.std_error;
                closed_form_pass &= ok;
            }
            per_horizon.push(json!({
                "t": t,
                "meanLeftoverCount": count_est.mean,
                "meanLeftoverFraction": frac_est.mean,
                "fractionStdError": frac_est.std_error,
                "closedFormExpected": expected,
            }));
        }
        let verdict =
            trend_report(&points).map_err(|e| AggregateError::Stats(e.to_string()))?;
        let pass = verdict == TrendVerdict::Decreasing && closed_form_pass;

        let mut plot = String::new();
        for p in &points {
            plot.push_str(&format!("{} {}\n", p.scale, p.estimate));
        }
        let json = json!({
            "experiment": self.kind.name(),
            "horizons": per_horizon,
            "verdict": verdict,
            "closedFormPass": closed_form.map(|_| closed_form_pass),
            "pass": pass,
        });
        Ok(RunSummary {
            pass,
            json,
            plots: vec![("plots/leftover_trend.dat".to_string(), plot)],
        })
    }
}
