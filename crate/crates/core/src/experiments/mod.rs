//! Config-driven experiments. Each command writes CSV/JSON artifacts into an
//! output directory and returns a [`Report`] of asserted properties.

mod bound_scan;
mod gmm;
mod mb;
mod tools;

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::Result;

pub use bound_scan::{bound_scan, BoundScanConfig, BoundScanRow};
pub use gmm::{train_gmm, GmmConfig, GmmSummaryRow};
pub use mb::{
    build_datasets, cmd_dataset, gibbs_mean_energy_2d, train_mb_robustness, DatasetConfig,
    Datasets, MbConfig, MbFinalRow, MbSummaryRow, SetLabel,
};
pub use tools::{
    estimate, fk_solve, grad_check, grad_check_rows, train_custom, CustomTrainConfig,
    EstimateConfig, FkSolveConfig, GradCheckConfig, NamedCheck,
};

/// Top-level config of the `train` command, selected by the `experiment` tag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "snake_case")]
pub enum ExperimentConfig {
    BoundScanDw(BoundScanConfig),
    TrainGmm(GmmConfig),
    TrainMbRobustness(MbConfig),
    Custom(CustomTrainConfig),
}

/// Version tag of every CSV schema written here; bumped on column changes.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Report {
    pub checks: Vec<Check>,
    pub files: Vec<PathBuf>,
}

impl Report {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check::new(name, passed, detail));
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    /// Writes `checks.csv` and a `manifest.json` listing the artifacts.
    pub fn finish(&mut self, out_dir: &Path, command: &str) -> Result<()> {
        let file = out_dir.join("checks.csv");
        let mut w = csv::Writer::from_writer(create(&file)?);
        w.write_record(["name", "passed", "detail"])?;
        for c in &self.checks {
            w.write_record([
                c.name.as_str(),
                if c.passed { "true" } else { "false" },
                c.detail.as_str(),
            ])?;
        }
        w.flush()?;
        self.files.push(file);
        let manifest = serde_json::json!({
            "command": command,
            "schema_version": SCHEMA_VERSION,
            "all_passed": self.all_passed(),
            "files": self.files.iter().map(|f| f.file_name().map(|n| n.to_string_lossy().into_owned())).collect::<Vec<_>>(),
        });
        let mf = out_dir.join("manifest.json");
        serde_json::to_writer_pretty(create(&mf)?, &manifest)?;
        self.files.push(mf);
        Ok(())
    }
}

pub(crate) fn create(file: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = file.parent() {
        std::fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(file)?))
}

pub(crate) fn write_json<T: Serialize>(file: &Path, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(create(file)?, value)?;
    Ok(())
}

/// Linear-interpolation quantile of unsorted data.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v: Vec<f64> = values.to_vec();
    v.sort_by(f64::total_cmp);
    if v.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn experiment_config_tagging() {
        let c: ExperimentConfig = serde_json::from_str(
            r#"{"experiment": "train_mb_robustness", "trials": 3, "m_phi": "auto"}"#,
        )
        .unwrap();
        match c {
            ExperimentConfig::TrainMbRobustness(m) => assert_eq!((m.trials, m.epochs), (3, 200)),
            other => panic!("{other:?}"),
        }
        let g = ExperimentConfig::TrainGmm(GmmConfig::default());
        let back: ExperimentConfig =
            serde_json::from_str(&serde_json::to_string(&g).unwrap()).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn quantiles() {
        let v = [4.0, 1.0, 3.0, 2.0];
        assert_eq!(quantile(&v, 0.5), 2.5);
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 1.0), 4.0);
        assert_eq!(quantile(&[7.0], 0.25), 7.0);
        assert!(quantile(&[], 0.5).is_nan());
    }

    #[test]
    fn report_writes_checks_and_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let mut r = Report::default();
        r.check("a", true, "fine");
        r.check("b", false, "x, \"quoted\"");
        assert!(!r.all_passed());
        r.finish(dir.path(), "test").unwrap();
        let text = std::fs::read_to_string(dir.path().join("checks.csv")).unwrap();
        assert!(text.starts_with("name,passed,detail\na,true,fine\n"));
        let m: serde_json::Value =
            serde_json::from_reader(File::open(dir.path().join("manifest.json")).unwrap()).unwrap();
        assert_eq!(m["all_passed"], false);
    }
}
