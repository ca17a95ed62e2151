//! Run orchestration: fans the task grid out over a worker pool, writes
//! results.csv / summary.json / manifest.json / plot data, and maps failures
//! to exit codes.
//!
//! Tasks are indexed deterministically (horizon-major) and collected by
//! index, and aggregation is single-threaded, so the worker count can never
//! change any numeric output.

use crate::config::{ConfigError, ValidatedConfig};
use crate::experiments::{AggregateError, ResultTable, Value};
use clustermax::error::SimError;
use clustermax::rng::{RandomStream, SEED_DERIVATION_RULE};
use rayon::prelude::*;
use serde_json::json;
use sha2::{Digest, Sha256};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Environment variable consulted for the output directory when `--out` is
/// absent.
pub const OUTPUT_ENV_VAR: &str = "CLUSTERMAX_OUT";

const DEFAULT_OUTPUT_DIR: &str = "clustermax-out";

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(
        "iteration cap exceeded in replication {replication} (horizon index {horizon_index}, \
         seedHigh {seed_high}, seedLow {seed_low}): {source}"
    )]
    Cap {
        replication: u32,
        horizon_index: u32,
        seed_high: u64,
        seed_low: u64,
        source: SimError,
    },
    #[error("aggregation failed: {0}")]
    Aggregate(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl RunError {
    /// Process exit code: 2 for validation, 3 for cap errors, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Cap { .. } => 3,
            RunError::Aggregate(_) | RunError::Io { .. } => 1,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub workers: Option<usize>,
    pub out_override: Option<PathBuf>,
}

#[derive(Debug)]
pub struct RunOutcome {
    /// True when every asserted invariant and goodness-of-fit report passed.
    pub all_pass: bool,
    pub output_dir: PathBuf,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Resolution order for the output directory: `--out`, then the environment
/// variable, then the config's `output` key, then a fixed default.
pub fn resolve_output_dir(config: &ValidatedConfig, options: &RunOptions) -> PathBuf {
    if let Some(out) = &options.out_override {
        return out.clone();
    }
    if let Ok(env_out) = std::env::var(OUTPUT_ENV_VAR) {
        if !env_out.is_empty() {
            return PathBuf::from(env_out);
        }
    }
    config
        .output
        .clone()
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR))
}

/// Runs a validated config to completion, writing all artifacts.
pub fn run(config: &ValidatedConfig, options: &RunOptions) -> Result<RunOutcome, RunError> {
    let started_at = chrono::Utc::now();
    let out_dir = resolve_output_dir(config, options);
    fs::create_dir_all(&out_dir).map_err(io_err(&out_dir))?;

    let reps = config.replications as usize;
    let n_horizons = config.horizons.len();
    let n_tasks = reps * n_horizons;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.workers.unwrap_or(0))
        .build()
        .expect("worker pool");
    let results: Vec<Result<Vec<Value>, SimError>> = pool.install(|| {
        (0..n_tasks)
            .into_par_iter()
            .map(|task| {
                let h_idx = (task / reps) as u32;
                let rep = (task % reps) as u32;
                config.run_task(rep, h_idx)
            })
            .collect()
    });

    // Scan in task order so the reported failure is deterministic.
    let mut rows = Vec::with_capacity(n_tasks);
    for (task, result) in results.into_iter().enumerate() {
        let h_idx = (task / reps) as u32;
        let rep = (task % reps) as u32;
        match result {
            Ok(row) => rows.push(row),
            Err(source) => {
                return Err(RunError::Cap {
                    replication: rep,
                    horizon_index: h_idx,
                    seed_high: config.master_seed,
                    seed_low: RandomStream::stream_id(rep, h_idx),
                    source,
                })
            }
        }
    }
    let table = ResultTable {
        rows,
        replications: config.replications,
        horizons: n_horizons,
    };

    write_results_csv(config, &table, &out_dir)?;

    let summary = config.summarize(&table).map_err(|e| match e {
        AggregateError::UnresolvedCap {
            replication,
            horizon_index,
        } => RunError::Cap {
            replication,
            horizon_index,
            seed_high: config.master_seed,
            seed_low: RandomStream::stream_id(replication, horizon_index),
            source: SimError::IterationCap {
                cap: clustermax::error::ITERATION_CAP,
                state: clustermax::error::CapState {
                    partial_max: None,
                    draws: clustermax::error::ITERATION_CAP,
                    pending_threshold: None,
                },
            },
        },
        AggregateError::Stats(msg) => RunError::Aggregate(msg),
    })?;

    let summary_path = out_dir.join("summary.json");
    fs::write(
        &summary_path,
        serde_json::to_string_pretty(&summary.json).expect("summary serializes") + "\n",
    )
    .map_err(io_err(&summary_path))?;

    for (rel_path, contents) in &summary.plots {
        let path = out_dir.join(rel_path);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(io_err(dir))?;
        }
        fs::write(&path, contents).map_err(io_err(&path))?;
    }

    let manifest = json!({
        "configHash": config_hash(config),
        "masterSeed": config.master_seed,
        "toolVersion": env!("CARGO_PKG_VERSION"),
        "perReplicationSeeds": SEED_DERIVATION_RULE,
        "experiment": config.kind.name(),
        "replications": config.replications,
        "horizons": config.horizons,
        "startedAt": started_at.to_rfc3339(),
        "finishedAt": chrono::Utc::now().to_rfc3339(),
    });
    let manifest_path = out_dir.join("manifest.json");
    fs::write(
        &manifest_path,
        serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n",
    )
    .map_err(io_err(&manifest_path))?;

    Ok(RunOutcome {
        all_pass: summary.pass,
        output_dir: out_dir,
    })
}

fn write_results_csv(
    config: &ValidatedConfig,
    table: &ResultTable,
    out_dir: &Path,
) -> Result<(), RunError> {
    let path = out_dir.join("results.csv");
    let file = fs::File::create(&path).map_err(io_err(&path))?;
    let mut w = std::io::BufWriter::new(file);
    let mut write = || -> std::io::Result<()> {
        write!(w, "experiment,horizon,replication,seedHigh,seedLow")?;
        for col in config.value_columns() {
            write!(w, ",{col}")?;
        }
        writeln!(w)?;
        let reps = table.replications as usize;
        for (task, row) in table.rows.iter().enumerate() {
            let h_idx = task / reps;
            let rep = task % reps;
            write!(
                w,
                "{},{},{},{},{}",
                config.kind.name(),
                config.horizons[h_idx],
                rep,
                config.master_seed,
                RandomStream::stream_id(rep as u32, h_idx as u32)
            )?;
            for value in row {
                write!(w, ",{value}")?;
            }
            writeln!(w)?;
        }
        w.flush()
    };
    write().map_err(io_err(&path))
}

/// SHA-256 of the canonicalized config (seed override already applied).
pub fn config_hash(config: &ValidatedConfig) -> String {
    let mut hasher = Sha256::new();
    hasher.update(config.canonical.as_bytes());
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
