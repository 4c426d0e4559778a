//! CSV / JSON export of experiment results.
//!
//! Layout below the output directory:
//!
//! ```text
//! summary.csv                     experiment,variant,mean,std,median,n_successful,n_runs
//! test_rewards.csv                variant,seed,reference,reward
//! curves/<VARIANT>_seed<k>.csv    episode,reward
//! trajectories/<VARIANT>.csv      step,omega_in_rpm,omega_ref_rpm,t_cl
//! checkpoints/<VARIANT>_seed<k>.ckpt
//! pi_report.json
//! manifest.json
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::drivetrain::rad_s_to_rpm;
use crate::error::{Error, Result};
use crate::harness::config::{ExperimentConfig, SeedLayout, Variant, SEED_BLOCK};
use crate::harness::experiment::{illustrative_trace, ExperimentResult, Summary};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub experiment: String,
    pub variant: Variant,
    pub mean: f64,
    pub std: f64,
    pub median: f64,
    pub n_successful: usize,
    pub n_runs: usize,
}

impl SummaryRow {
    pub fn summary(&self) -> Summary {
        Summary {
            mean: self.mean,
            std: self.std,
            median: self.median,
            n_successful: self.n_successful,
            n_runs: self.n_runs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardRow {
    pub variant: Variant,
    pub seed: usize,
    pub reference: usize,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceCsvRow {
    pub step: usize,
    pub omega_in_rpm: f64,
    pub omega_ref_rpm: f64,
    pub t_cl: f64,
}

/// Per-seed record in the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRun {
    pub variant: Variant,
    pub seed: usize,
    pub learner_seed: Option<u64>,
    pub failure: Option<String>,
    pub best_episode: Option<usize>,
    pub checkpoint: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub package: String,
    pub version: String,
    pub config: ExperimentConfig,
    pub seed_base: u64,
    pub seed_block: u64,
    pub train_reference_seeds: [u64; 2],
    pub eval_reference_seed: u64,
    pub test_reference_seeds: [u64; 2],
    pub runs: Vec<ManifestRun>,
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Config(format!("{}: {other:?}", path.display())),
    }
}

/// Writes serializable rows as CSV with a header line.
pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    for row in rows {
        w.serialize(row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    r.deserialize().map(|row| row.map_err(|e| csv_err(path, e))).collect()
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Config(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn mkdir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

pub fn summary_rows(result: &ExperimentResult) -> Vec<SummaryRow> {
    result
        .results
        .iter()
        .map(|r| SummaryRow {
            experiment: result.config.experiment.name().to_string(),
            variant: r.variant,
            mean: r.summary.mean,
            std: r.summary.std,
            median: r.summary.median,
            n_successful: r.summary.n_successful,
            n_runs: r.summary.n_runs,
        })
        .collect()
}

pub fn build_manifest(cfg: &ExperimentConfig, result: &ExperimentResult) -> Manifest {
    let layout = SeedLayout::new(cfg.master_seed);
    let mut runs = Vec::new();
    for r in &result.results {
        for s in &r.seeds {
            let learned = r.variant != Variant::Pi;
            runs.push(ManifestRun {
                variant: r.variant,
                seed: s.seed,
                learner_seed: learned.then(|| layout.learner(r.variant, s.seed)),
                failure: s.failure.clone(),
                best_episode: s.best_index.map(|i| s.curve[i].episode),
                checkpoint: s
                    .best_policy
                    .as_ref()
                    .map(|_| format!("checkpoints/{}_seed{}.ckpt", r.variant, s.seed)),
            });
        }
    }
    Manifest {
        package: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.clone(),
        seed_base: layout.base,
        seed_block: SEED_BLOCK,
        train_reference_seeds: [
            layout.train_reference(0),
            layout.train_reference(cfg.episodes.max(1) - 1),
        ],
        eval_reference_seed: layout.eval_reference(),
        test_reference_seeds: [layout.test_reference(0), layout.test_reference(cfg.test_refs - 1)],
        runs,
    }
}

/// Writes all artifacts of `result` below `dir`.
pub fn export(result: &ExperimentResult, dir: &Path) -> Result<()> {
    let cfg = &result.config;
    mkdir(dir)?;
    write_csv(&dir.join("summary.csv"), &summary_rows(result))?;

    let mut rewards = Vec::new();
    for r in &result.results {
        for s in r.seeds.iter().filter(|s| s.succeeded()) {
            for (i, reward) in s.test_rewards.iter().enumerate() {
                rewards.push(RewardRow {
                    variant: r.variant,
                    seed: s.seed,
                    reference: i,
                    reward: *reward,
                });
            }
        }
    }
    write_csv(&dir.join("test_rewards.csv"), &rewards)?;

    let curves = dir.join("curves");
    let checkpoints = dir.join("checkpoints");
    let trajectories = dir.join("trajectories");
    mkdir(&curves)?;
    mkdir(&checkpoints)?;
    mkdir(&trajectories)?;
    let sets = crate::harness::experiment::ReferenceSets::build(cfg)?;
    for r in &result.results {
        for s in &r.seeds {
            if r.variant != Variant::Pi {
                write_csv(&curves.join(format!("{}_seed{}.csv", r.variant, s.seed)), &s.curve)?;
            }
            if let Some(p) = &s.best_policy {
                p.save(&checkpoints.join(format!("{}_seed{}.ckpt", r.variant, s.seed)))?;
            }
        }
        if let Some(trace) = illustrative_trace(cfg, r, &sets.test[0])? {
            let rows: Vec<TraceCsvRow> = trace
                .rows
                .iter()
                .map(|row| TraceCsvRow {
                    step: row.step,
                    omega_in_rpm: rad_s_to_rpm(row.omega_in),
                    omega_ref_rpm: rad_s_to_rpm(row.omega_ref),
                    t_cl: row.t_cl,
                })
                .collect();
            write_csv(&trajectories.join(format!("{}.csv", r.variant)), &rows)?;
        }
        if let Some(report) = &r.pi {
            write_json(&dir.join("pi_report.json"), report)?;
        }
    }
    write_json(&dir.join("manifest.json"), &build_manifest(cfg, result))
}

/// Reloads `summary.csv` and checks every row against the raw test rewards.
pub fn load_verified_summary(dir: &Path) -> Result<Vec<SummaryRow>> {
    let summary: Vec<SummaryRow> = read_csv(&dir.join("summary.csv"))?;
    let rewards: Vec<RewardRow> = read_csv(&dir.join("test_rewards.csv"))?;
    for row in &summary {
        let pooled: Vec<f64> = rewards
            .iter()
            .filter(|r| r.variant == row.variant)
            .map(|r| r.reward)
            .collect();
        let again = Summary::from_rewards(&pooled, row.n_successful, row.n_runs);
        let same = |a: f64, b: f64| a == b || (a.is_nan() && b.is_nan());
        if !(same(again.mean, row.mean) && same(again.std, row.std) && same(again.median, row.median)) {
            return Err(Error::Config(format!(
                "summary of {} does not match its raw rewards",
                row.variant
            )));
        }
    }
    Ok(summary)
}

/// Output directory of one experiment below a root directory.
pub fn experiment_dir(root: &Path, cfg: &ExperimentConfig) -> PathBuf {
    root.join(cfg.experiment.name())
}
