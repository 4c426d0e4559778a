use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use tracking_ppo::drivetrain::rad_s_to_rpm;
use tracking_ppo::env::TrackingEnv;
use tracking_ppo::harness::config::{ExperimentConfig, ExperimentKind, Preset, Variant};
use tracking_ppo::harness::experiment::{evaluate_actor, run_experiment, run_seed, ReferenceSets, Summary};
use tracking_ppo::harness::export::{experiment_dir, export, write_csv};
use tracking_ppo::pi::tune;
use tracking_ppo::policy::GaussianPolicy;
use tracking_ppo::references::generate;
use tracking_ppo::{Error, Result};

#[derive(Parser)]
#[command(
    name = "tracking-ppo",
    version,
    about = "Drive-train speed tracking with PPO and PI controllers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Flat TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// smooth | jumps | offset
    #[arg(long)]
    experiment: Option<ExperimentKind>,
    /// desk | full
    #[arg(long)]
    preset: Option<Preset>,
    #[arg(long)]
    seeds: Option<usize>,
    #[arg(long)]
    master_seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "results")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Train one seed of a learned variant.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        variant: Variant,
        #[arg(long, default_value_t = 0)]
        seed: usize,
    },
    /// Tune the PI baseline.
    TunePi {
        #[command(flatten)]
        common: Common,
    },
    /// Evaluate a saved actor on the test references.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        variant: Variant,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Run full experiments and export all results.
    Experiment {
        #[command(flatten)]
        common: Common,
        /// Restrict to these variants (comma separated).
        #[arg(long, value_delimiter = ',')]
        variant: Vec<Variant>,
    },
    /// Write generated references as CSV (rpm).
    ExportRefs {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 10)]
        count: usize,
    },
}

fn load_config(common: &Common, experiment: ExperimentKind) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    cfg.experiment = experiment;
    if let Some(p) = common.preset {
        cfg.apply_preset(p);
    }
    if let Some(s) = common.seeds {
        cfg.seeds = s;
    }
    if let Some(m) = common.master_seed {
        cfg.master_seed = m;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn config_experiment(common: &Common) -> Result<ExperimentKind> {
    match (common.experiment, &common.config) {
        (Some(e), _) => Ok(e),
        (None, Some(path)) => Ok(ExperimentConfig::load(path)?.experiment),
        (None, None) => Ok(ExperimentKind::Smooth),
    }
}

fn mkdir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn print_summary(label: &str, s: &Summary) {
    println!(
        "{label:<8} mean {:>12.6} std {:>12.6} median {:>12.6} ({}/{} runs)",
        s.mean, s.std, s.median, s.n_successful, s.n_runs
    );
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train { common, variant, seed } => {
            let cfg = load_config(&common, config_experiment(&common)?)?;
            let env = TrackingEnv::new(cfg.env_config())?;
            let sets = ReferenceSets::build(&cfg)?;
            let result = run_seed(&cfg, variant, seed, &sets, &env)?;
            mkdir(&common.out)?;
            write_csv(
                &common.out.join(format!("{variant}_seed{seed}_curve.csv")),
                &result.curve,
            )?;
            if let Some(p) = &result.best_policy {
                p.save(&common.out.join(format!("{variant}_seed{seed}.ckpt")))?;
            }
            if let Some(f) = &result.failure {
                return Err(Error::Diverged {
                    episode: 0,
                    detail: f.clone(),
                });
            }
            let s = Summary::from_rewards(&result.test_rewards, 1, 1);
            print_summary(variant.name(), &s);
        }
        Command::TunePi { common } => {
            let cfg = load_config(&common, config_experiment(&common)?)?;
            let env = TrackingEnv::new(cfg.env_config())?;
            let sets = ReferenceSets::build(&cfg)?;
            let report = tune(&sets.pi_tune, &env, cfg.pi_law(), &cfg.grid_spec(), &cfg.refine_spec())?;
            mkdir(&common.out)?;
            let path = common.out.join("pi_report.json");
            let text = serde_json::to_string_pretty(&report).map_err(|e| Error::Config(e.to_string()))?;
            std::fs::write(&path, text + "\n").map_err(|e| Error::Io { path, source: e })?;
            println!(
                "k_p {:.6} k_i {:.6} cost {:.6} (grid best {:.6} at {:.4}/{:.4})",
                report.gains.k_p,
                report.gains.k_i,
                report.cost,
                report.grid_best.cost,
                report.grid_best.k_p,
                report.grid_best.k_i
            );
        }
        Command::Evaluate {
            common,
            variant,
            checkpoint,
        } => {
            let cfg = load_config(&common, config_experiment(&common)?)?;
            let spec = variant
                .argument_spec()
                .ok_or_else(|| Error::Config("evaluate needs a learned variant".into()))?;
            let env = TrackingEnv::new(cfg.env_config())?;
            let sets = ReferenceSets::build(&cfg)?;
            let policy = GaussianPolicy::load(&checkpoint)?;
            let rewards = evaluate_actor(&policy, spec, &sets.test, &env)?;
            print_summary(variant.name(), &Summary::from_rewards(&rewards, 1, 1));
        }
        Command::Experiment { common, variant } => {
            let kinds = match common.experiment {
                Some(e) => vec![e],
                None => ExperimentKind::ALL.to_vec(),
            };
            for kind in kinds {
                let mut cfg = load_config(&common, kind)?;
                if !variant.is_empty() {
                    cfg.variants = variant.clone();
                }
                log::info!("experiment {kind}: {:?}", cfg.variant_list());
                let result = run_experiment(&cfg)?;
                export(&result, &experiment_dir(&common.out, &cfg))?;
                println!("[{kind}]");
                for r in &result.results {
                    print_summary(r.variant.name(), &r.summary);
                }
            }
        }
        Command::ExportRefs { common, count } => {
            #[derive(Serialize)]
            struct Row {
                reference: usize,
                seed: u64,
                step: usize,
                omega_ref_rpm: f64,
            }
            let cfg = load_config(&common, config_experiment(&common)?)?;
            let layout = cfg.seed_layout();
            let rc = cfg.reference_config();
            let mut rows = Vec::new();
            for i in 0..count {
                let seed = layout.test_reference(i);
                let traj = generate(cfg.experiment.reference_class(), &rc, seed)?;
                for (step, v) in traj.values.iter().enumerate() {
                    rows.push(Row {
                        reference: i,
                        seed,
                        step,
                        omega_ref_rpm: rad_s_to_rpm(*v),
                    });
                }
            }
            mkdir(&common.out)?;
            write_csv(&common.out.join(format!("references_{}.csv", cfg.experiment)), &rows)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
