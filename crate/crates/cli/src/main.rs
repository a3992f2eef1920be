use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use golearn::experiments::{
    bound_scan, cmd_dataset, estimate, fk_solve, grad_check, train_custom, train_gmm,
    train_mb_robustness, BoundScanConfig, EstimateConfig, ExperimentConfig, FkSolveConfig,
    GmmConfig, GradCheckConfig, MbConfig, Report,
};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

#[derive(Parser)]
#[command(
    name = "golearn",
    version,
    about = "Goal-oriented learning of Langevin surrogates"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON config; omitted fields take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Artifact directory (default: out/<command>).
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Full-size settings instead of the desk-scale defaults.
    #[arg(long, global = true)]
    paper_scale: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Error, divergences and bounds across the double-well family.
    BoundScan,
    /// Train surrogates (mixture study, Müller–Brown robustness, or custom).
    Train {
        /// Experiment used when no config is given.
        #[arg(long, value_enum, default_value_t = Experiment::Gmm)]
        experiment: Experiment,
    },
    /// Build the Müller–Brown state pools and training subsets.
    Dataset,
    /// Monte Carlo moments of an observable.
    Estimate,
    /// Exit-time moments from the backward equations.
    FkSolve,
    /// Analytic gradients against finite differences.
    GradCheck,
}

#[derive(Clone, Copy, ValueEnum)]
enum Experiment {
    Gmm,
    MbRobustness,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::BoundScan => "bound-scan",
            Command::Train { .. } => "train",
            Command::Dataset => "dataset",
            Command::Estimate => "estimate",
            Command::FkSolve => "fk-solve",
            Command::GradCheck => "grad-check",
        }
    }
}

/// Overlays `patch` onto `base`, recursing into objects.
fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

fn read_json(f: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(f).with_context(|| format!("reading {}", f.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", f.display()))
}

/// Config file fields override the defaults, so partial (also nested) configs work.
fn overlay<T: DeserializeOwned + Serialize>(default: T, file: Option<&Path>) -> Result<T> {
    let Some(f) = file else { return Ok(default) };
    let mut base = serde_json::to_value(&default)?;
    merge(&mut base, read_json(f)?);
    serde_json::from_value(base).with_context(|| format!("invalid config {}", f.display()))
}

fn load<T: DeserializeOwned + Serialize + Default>(file: Option<&Path>) -> Result<T> {
    overlay(T::default(), file)
}

fn gmm_default(full: bool) -> GmmConfig {
    let c = GmmConfig::default();
    if full {
        c.paper_scale()
    } else {
        c
    }
}

fn mb_default(full: bool) -> MbConfig {
    let c = MbConfig::default();
    if full {
        c.paper_scale()
    } else {
        c
    }
}

fn experiment_config(
    file: Option<&Path>,
    fallback: Experiment,
    full: bool,
) -> Result<ExperimentConfig> {
    let tag = match file {
        Some(f) => read_json(f)?
            .get("experiment")
            .and_then(Value::as_str)
            .map(str::to_owned),
        None => None,
    };
    let default = match tag.as_deref() {
        Some("bound_scan_dw") => ExperimentConfig::BoundScanDw(Default::default()),
        Some("train_gmm") => ExperimentConfig::TrainGmm(gmm_default(full)),
        Some("train_mb_robustness") => ExperimentConfig::TrainMbRobustness(mb_default(full)),
        // Custom runs have no meaningful defaults; parse as given.
        Some(_) => return Ok(serde_json::from_value(read_json(file.unwrap())?)?),
        None => match fallback {
            Experiment::Gmm => ExperimentConfig::TrainGmm(gmm_default(full)),
            Experiment::MbRobustness => ExperimentConfig::TrainMbRobustness(mb_default(full)),
        },
    };
    overlay(default, file)
}

fn gmm(mut c: GmmConfig, cli: &Cli) -> GmmConfig {
    if let Some(s) = cli.seed {
        c.train.seed = s;
    }
    c
}

fn mb(mut c: MbConfig, cli: &Cli) -> MbConfig {
    if let Some(s) = cli.seed {
        c.seed = s;
    }
    c
}

fn run(cli: &Cli, out: &Path) -> Result<Report> {
    let cfg = cli.config.as_deref();
    let report = match &cli.command {
        Command::BoundScan => bound_scan(&load::<BoundScanConfig>(cfg)?, out)?.1,
        Command::Train { experiment } => {
            match experiment_config(cfg, *experiment, cli.paper_scale)? {
                ExperimentConfig::BoundScanDw(c) => bound_scan(&c, out)?.1,
                ExperimentConfig::TrainGmm(c) => train_gmm(&gmm(c, cli), out)?.2,
                ExperimentConfig::TrainMbRobustness(c) => train_mb_robustness(&mb(c, cli), out)?.1,
                ExperimentConfig::Custom(mut c) => {
                    if let Some(s) = cli.seed {
                        c.train.seed = s;
                    }
                    train_custom(&c, out)?
                }
            }
        }
        Command::Dataset => {
            cmd_dataset(&mb(overlay(mb_default(cli.paper_scale), cfg)?, cli), out)?.1
        }
        Command::Estimate => {
            let mut c: EstimateConfig = load(cfg)?;
            if let Some(s) = cli.seed {
                c.seed = s;
            }
            estimate(&c, out)?
        }
        Command::FkSolve => fk_solve(&load::<FkSolveConfig>(cfg)?, out)?,
        Command::GradCheck => {
            let mut c: GradCheckConfig = load(cfg)?;
            if let Some(s) = cli.seed {
                c.seed = s;
            }
            grad_check(&c, out)?
        }
    };
    Ok(report)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let name = cli.command.name();
    let out = cli
        .out_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from("out").join(name));
    let start = Instant::now();
    let result = std::fs::create_dir_all(&out)
        .with_context(|| format!("creating {}", out.display()))
        .and_then(|_| run(&cli, &out))
        .and_then(|mut r| {
            r.finish(&out, name)?;
            Ok(r)
        });
    match result {
        Ok(report) => {
            for c in &report.checks {
                println!(
                    "{} {}: {}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.detail
                );
            }
            eprintln!(
                "{name}: {} artifacts in {} ({:.1}s)",
                report.files.len(),
                out.display(),
                start.elapsed().as_secs_f64()
            );
            if report.all_passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merge_overrides_nested_fields_only() {
        let mut base = serde_json::json!({"a": 1, "b": {"c": 2, "d": [1, 2]}});
        merge(
            &mut base,
            serde_json::json!({"b": {"c": 5, "d": [3]}, "e": true}),
        );
        assert_eq!(
            base,
            serde_json::json!({"a": 1, "b": {"c": 5, "d": [3]}, "e": true})
        );
    }

    #[test]
    fn partial_gmm_config_keeps_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("c.json");
        std::fs::write(
            &f,
            r#"{"experiment": "train_gmm", "train": {"max_iters": 7}}"#,
        )
        .unwrap();
        match experiment_config(Some(&f), Experiment::MbRobustness, false).unwrap() {
            ExperimentConfig::TrainGmm(c) => {
                assert_eq!(c.train.max_iters, 7);
                assert_eq!(c.train.loss.n_path, GmmConfig::default().train.loss.n_path);
            }
            other => panic!("{other:?}"),
        }
        match experiment_config(None, Experiment::Gmm, true).unwrap() {
            ExperimentConfig::TrainGmm(c) => assert_eq!(c.train.max_iters, 500),
            other => panic!("{other:?}"),
        }
    }
}
