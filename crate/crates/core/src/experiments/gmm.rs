use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{create, write_json, Report};
use crate::error::Result;
use crate::losses::{LossKind, LossSpec, MPhi, Oracle1D};
use crate::observables::ObservableSpec;
use crate::optimize::{train, Optimizer, TrainConfig, TrainFailure, TrainTrace};
use crate::potentials::{AnyPotential, GaussianMixture};
use crate::sde::{LmcConfig, Region};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GmmConfig {
    /// Template shared by every run; `loss.kind` is set per run.
    pub train: TrainConfig,
    pub losses: Vec<LossKind>,
    /// Replace `𝓜_φ` by the oracle second moment of the reference.
    pub m_phi_from_reference: bool,
    pub reference: GaussianMixture,
    pub initial: GaussianMixture,
    /// Required relative error reduction of the reverse goal-oriented run.
    pub reduction_target: f64,
    /// Slack allowed in the bound `GO ≥ ½ err²` for solver round-off.
    pub bound_tol: f64,
}

impl Default for GmmConfig {
    fn default() -> Self {
        let t_cap = 10_000.0;
        Self {
            train: TrainConfig {
                loss: LossSpec {
                    kind: LossKind::GoR,
                    m_phi: MPhi::AUTO,
                    t: t_cap,
                    n_path: 500,
                    dt: 1e-2,
                    observable: Some(ObservableSpec::first_exit(
                        Region::Interval {
                            lo: None,
                            hi: Some(1.0),
                        },
                        t_cap,
                    )),
                },
                optimizer: Optimizer::Adagrad,
                learning_rate: 0.2,
                max_iters: 200,
                eps_theta: 0.0,
                eps_loss: 0.0,
                n_samp: 1000,
                lmc: LmcConfig {
                    n_steps: 100_000,
                    dt: 1e-3,
                    burn_in: None,
                },
                beta: 1.0,
                x0: vec![-1.0],
                lmc_x0: vec![-1.0],
                seed: 2024,
                oracle: Some(Oracle1D {
                    beta: 1.0,
                    x0: -1.0,
                    x_exit: 1.0,
                    n_grid: 4001,
                    n_quad: 200,
                    search: (-6.0, 6.0),
                }),
            },
            losses: vec![LossKind::RerF, LossKind::RerR, LossKind::GoF, LossKind::GoR],
            m_phi_from_reference: true,
            reference: GaussianMixture::reference(),
            initial: GaussianMixture::initial(),
            reduction_target: 0.5,
            bound_tol: 1e-8,
        }
    }
}

impl GmmConfig {
    /// Iteration count, path batch, time step and chain length of the full study.
    pub fn paper_scale(mut self) -> Self {
        self.train.max_iters = 500;
        self.train.loss.n_path = 1000;
        self.train.loss.dt = 1e-3;
        self.train.lmc.n_steps = 1_000_000;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmSummaryRow {
    pub loss_kind: LossKind,
    pub iterates: usize,
    pub initial_abs_error: f64,
    pub final_abs_error: f64,
    pub final_mean: f64,
    pub final_second_moment: f64,
    pub failed: Option<String>,
}

fn summarize(kind: LossKind, trace: &TrainTrace, failed: Option<String>) -> GmmSummaryRow {
    let o0 = trace.records.first().and_then(|r| r.oracle);
    let o1 = trace.records.last().and_then(|r| r.oracle);
    GmmSummaryRow {
        loss_kind: kind,
        iterates: trace.records.len(),
        initial_abs_error: o0.map_or(f64::NAN, |o| o.abs_error),
        final_abs_error: o1.map_or(f64::NAN, |o| o.abs_error),
        final_mean: o1.map_or(f64::NAN, |o| o.m1),
        final_second_moment: o1.map_or(f64::NAN, |o| o.m2),
        failed,
    }
}

/// Trains the mixture surrogate with each configured loss and checks the
/// error bound along every trace and the ordering of the final errors.
pub fn train_gmm(
    cfg: &GmmConfig,
    out_dir: &Path,
) -> Result<(Vec<GmmSummaryRow>, Vec<TrainTrace>, Report)> {
    let reference = AnyPotential::GaussianMixture(cfg.reference.clone());
    let initial = AnyPotential::GaussianMixture(cfg.initial.clone());
    let mut template = cfg.train.clone();
    if cfg.m_phi_from_reference {
        if let Some(o) = template.oracle {
            template.loss.m_phi = MPhi::Value(o.exit_moments(&reference)?.1);
        }
    }
    let runs: Vec<(LossKind, std::result::Result<_, TrainFailure>)> = cfg
        .losses
        .par_iter()
        .map(|&kind| {
            let mut c = template.clone();
            c.loss.kind = kind;
            (kind, train(&c, &reference, &initial, None))
        })
        .collect();

    let mut report = Report::default();
    write_json(&out_dir.join("gmm_config.json"), cfg)?;
    report.files.push(out_dir.join("gmm_config.json"));
    let mut summary = Vec::new();
    let mut traces = Vec::new();
    for (kind, run) in runs {
        let (trace, failed) = match run {
            Ok(run) => {
                let ck = out_dir.join(format!("gmm_checkpoint_{}.json", kind.as_str()));
                run.checkpoint.save(&ck)?;
                report.files.push(ck);
                (run.trace, None)
            }
            Err(f) => (f.trace, Some(f.error.to_string())),
        };
        report.check(
            format!("{}_completed", kind.as_str()),
            failed.is_none(),
            failed
                .clone()
                .unwrap_or_else(|| format!("{} iterates", trace.records.len())),
        );
        let file = out_dir.join(format!("gmm_trace_{}.csv", kind.as_str()));
        trace.write_csv(create(&file)?)?;
        report.files.push(file);
        // ½(μ − μ̃)² ≤ deterministic GO loss, both directions, every iterate.
        let mut worst = f64::INFINITY;
        let mut n = 0;
        for o in trace.records.iter().filter_map(|r| r.oracle) {
            let half_sq = 0.5 * o.abs_error * o.abs_error;
            worst = worst
                .min(o.go_forward - half_sq)
                .min(o.go_reverse - half_sq);
            n += 1;
        }
        report.check(
            format!("{}_go_loss_bounds_error", kind.as_str()),
            n > 0 && worst >= -cfg.bound_tol,
            format!("min(GO − ½err²) = {worst:e} over {n} iterates"),
        );
        summary.push(summarize(kind, &trace, failed));
        traces.push(trace);
    }

    let file = out_dir.join("gmm_summary.csv");
    let mut w = csv::Writer::from_writer(create(&file)?);
    w.write_record([
        "loss_kind",
        "iterates",
        "initial_abs_error",
        "final_abs_error",
        "final_mean",
        "final_second_moment",
        "failed",
    ])?;
    for s in &summary {
        w.write_record([
            s.loss_kind.as_str().to_string(),
            s.iterates.to_string(),
            s.initial_abs_error.to_string(),
            s.final_abs_error.to_string(),
            s.final_mean.to_string(),
            s.final_second_moment.to_string(),
            s.failed.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    report.files.push(file);

    let row = |k: LossKind| summary.iter().find(|s| s.loss_kind == k);
    if let Some(go) = row(LossKind::GoR) {
        let ratio = go.final_abs_error / go.initial_abs_error;
        report.check(
            "go_r_error_reduction",
            ratio <= 1.0 - cfg.reduction_target,
            format!(
                "|error| {:.4} -> {:.4} (ratio {ratio:.3})",
                go.initial_abs_error, go.final_abs_error
            ),
        );
        if let Some(rf) = row(LossKind::RerF) {
            report.check(
                "rer_f_not_better_than_go_r",
                rf.final_abs_error >= go.final_abs_error,
                format!(
                    "final |error|: rer_f {:.4}, go_r {:.4}",
                    rf.final_abs_error, go.final_abs_error
                ),
            );
        }
    }
    Ok((summary, traces, report))
}
