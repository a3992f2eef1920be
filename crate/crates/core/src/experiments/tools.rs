use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{create, write_json, Report};
use crate::error::{Error, Result};
use crate::fk::{solve_exit_moments, Grid1D};
use crate::gradients::{
    fd_gradient_check, grad_go_loss, grad_rer_reverse, grad_second_moment, reference_drifts,
    rer_gradient, reweighted_reverse_rer, reweighted_second_moment, write_grad_check_csv, FdMode,
    GradCheckRow,
};
use crate::info::mean_and_se;
use crate::io::{read_states_csv, save_path_cache, write_path_csv};
use crate::losses::{go_loss_from_parts, Direction, Oracle1D};
use crate::observables::{
    moments_of_paths, simulate_observable_paths, write_moments_csv, ObservableSpec,
};
use crate::optimize::{resume, train, Checkpoint, TrainConfig};
use crate::potentials::{scalar_drift, AnyPotential, DoubleWell, Potential};
use crate::quadrature::{sample_gibbs_1d, GibbsQuadrature};
use crate::rng::{derive_seed, RngStream};
use crate::sde::{Region, SdeSystem};

fn double_well(theta: f64) -> AnyPotential {
    AnyPotential::DoubleWell(DoubleWell::new(theta))
}

fn default_exit() -> ObservableSpec {
    ObservableSpec::first_exit(
        Region::Interval {
            lo: None,
            hi: Some(1.0),
        },
        1000.0,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimateConfig {
    pub potential: AnyPotential,
    /// Take the model from a training checkpoint instead.
    pub checkpoint: Option<PathBuf>,
    pub beta: f64,
    pub x0: Vec<f64>,
    pub observable: ObservableSpec,
    pub dt: f64,
    pub n_paths: usize,
    pub seed: u64,
    /// Also write the binary path cache and the first path as CSV.
    pub save_paths: bool,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        Self {
            potential: double_well(0.5),
            checkpoint: None,
            beta: 1.0,
            x0: vec![-1.0],
            observable: default_exit(),
            dt: 1e-2,
            n_paths: 1000,
            seed: 1,
            save_paths: false,
        }
    }
}

/// Monte Carlo moments of an observable.
pub fn estimate(cfg: &EstimateConfig, out_dir: &Path) -> Result<Report> {
    let model = match &cfg.checkpoint {
        Some(f) => Checkpoint::load(f)?.model,
        None => cfg.potential.clone(),
    };
    let sys = SdeSystem::from_potential(Arc::new(model), cfg.beta, cfg.x0.clone())?;
    let paths = simulate_observable_paths(&sys, &cfg.observable, cfg.dt, cfg.n_paths, cfg.seed)?;
    let m = moments_of_paths(&cfg.observable, &paths)?;
    let mut report = Report::default();
    let file = out_dir.join("estimate.csv");
    write_moments_csv(&[(0, m)], create(&file)?)?;
    report.files.push(file);
    if cfg.save_paths {
        let file = out_dir.join("paths.bin");
        save_path_cache(&paths, &file)?;
        report.files.push(file);
        let file = out_dir.join("path_0.csv");
        write_path_csv(&paths[0], create(&file)?)?;
        report.files.push(file);
    }
    report.check(
        "moments_finite",
        m.mean.is_finite() && m.second_moment.is_finite(),
        format!(
            "mean {} ± {}, capped {}",
            m.mean, m.std_error_mean, m.capped_fraction
        ),
    );
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FkSolveConfig {
    pub potential: AnyPotential,
    pub beta: f64,
    pub x0: f64,
    pub x_exit: f64,
    pub n_grid: usize,
    /// Two-sided Dirichlet interval `[x_min, x_exit]`; otherwise a reflecting
    /// truncation far in the left tail.
    pub x_min: Option<f64>,
}

impl Default for FkSolveConfig {
    fn default() -> Self {
        Self {
            potential: double_well(0.5),
            beta: 1.0,
            x0: -1.0,
            x_exit: 1.0,
            n_grid: 4001,
            x_min: None,
        }
    }
}

/// Exit-time moments from the backward equations, with a grid-refinement check.
pub fn fk_solve(cfg: &FkSolveConfig, out_dir: &Path) -> Result<Report> {
    let b = scalar_drift(&cfg.potential);
    let grid = match cfg.x_min {
        Some(lo) => Grid1D::new(
            lo,
            cfg.x_exit,
            cfg.n_grid,
            crate::fk::LeftBoundary::Dirichlet,
        )?,
        None => Grid1D::for_exit(
            &crate::potentials::scalar_value(&cfg.potential),
            cfg.beta,
            cfg.x_exit,
            cfg.n_grid,
        )?,
    };
    let coarse = solve_exit_moments(&b, cfg.beta, &grid)?;
    let fine = solve_exit_moments(&b, cfg.beta, &grid.refined())?;
    let (m1, m2) = coarse.at(cfg.x0);
    let (f1, f2) = fine.at(cfg.x0);
    let mut report = Report::default();
    let file = out_dir.join("fk_moments.csv");
    coarse.write_csv(create(&file)?)?;
    report.files.push(file);
    let file = out_dir.join("fk_summary.json");
    write_json(
        &file,
        &serde_json::json!({
            "x0": cfg.x0, "m1": m1, "m2": m2, "m1_refined": f1, "m2_refined": f2,
            "x_min": grid.x_min, "x_max": grid.x_max, "n_grid": grid.n_nodes,
        }),
    )?;
    report.files.push(file);
    report.check("jensen", m2 >= m1 * m1, format!("m1 = {m1}, m2 = {m2}"));
    let rel = ((m1 - f1) / f1).abs();
    report.check(
        "grid_refinement_stable",
        rel < 1e-3,
        format!("relative change under refinement {rel:e}"),
    );
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GradCheckConfig {
    pub reference: AnyPotential,
    /// One-dimensional surrogate at which gradients are checked.
    pub model: AnyPotential,
    pub oracle: Oracle1D,
    pub observable: ObservableSpec,
    pub t: f64,
    pub dt: f64,
    pub n_path: usize,
    pub n_samp: usize,
    pub h_deterministic: f64,
    pub h_stochastic: f64,
    pub tol_deterministic: f64,
    pub tol_stochastic: f64,
    /// Coordinates with `|fd| < floor·max|fd|` are compared against that floor.
    pub floor: f64,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            reference: double_well(0.5),
            model: double_well(0.2),
            oracle: Oracle1D {
                beta: 1.0,
                x0: -1.0,
                x_exit: 1.0,
                n_grid: 4001,
                n_quad: 200,
                search: (-6.0, 6.0),
            },
            observable: default_exit(),
            t: 1000.0,
            dt: 1e-2,
            n_path: 1000,
            n_samp: 1000,
            h_deterministic: 1e-6,
            h_stochastic: 1e-4,
            tol_deterministic: 1e-5,
            tol_stochastic: 5e-2,
            floor: 1e-3,
            seed: 3,
        }
    }
}

/// Rows for one named gradient check plus its verdict.
pub struct NamedCheck {
    pub name: &'static str,
    pub rows: Vec<GradCheckRow>,
    pub tol: f64,
}

/// Analytic gradients against central differences: exact quadrature rates,
/// and Monte Carlo estimators against common-random-number differences of the
/// same estimator (paths and states frozen, reweighted to the shifted `θ`).
pub fn grad_check_rows(cfg: &GradCheckConfig) -> Result<Vec<NamedCheck>> {
    let o = &cfg.oracle;
    let (r, s) = (&cfg.reference, &cfg.model);
    let theta = s.params().to_vec();
    let beta = o.beta;
    let mut out = Vec::new();

    for (name, dir) in [
        ("rer_forward_quadrature", Direction::Forward),
        ("rer_reverse_quadrature", Direction::Reverse),
    ] {
        let q = match dir {
            Direction::Forward => o.gibbs(r)?,
            Direction::Reverse => o.gibbs(s)?,
        };
        let xs: Vec<Vec<f64>> = q.nodes.iter().map(|&x| vec![x]).collect();
        let b = reference_drifts(r, &xs);
        let g = rer_gradient(dir, s, &b, &xs, Some(&q.probs), beta)?;
        let (bounds, n) = (q.bounds, q.nodes.len());
        let mut loss = |t: &[f64]| -> Result<f64> {
            let st = s.with_params(t)?;
            let q = match dir {
                Direction::Forward => q.clone(),
                Direction::Reverse => {
                    GibbsQuadrature::new(&crate::potentials::scalar_value(&st), beta, n, bounds)?
                }
            };
            Ok(rer_gradient(Direction::Forward, &st, &b, &xs, Some(&q.probs), beta)?.value)
        };
        let rows = fd_gradient_check(
            &mut loss,
            &theta,
            cfg.h_deterministic,
            &g.grad,
            FdMode::Deterministic,
            cfg.floor,
        )?;
        out.push(NamedCheck {
            name,
            rows,
            tol: cfg.tol_deterministic,
        });
    }

    // Second moment of the observable under the surrogate.
    let model = Arc::new(s.clone());
    let sys = SdeSystem::from_potential(model.clone(), beta, cfg_x0(o))?;
    let paths = simulate_observable_paths(
        &sys,
        &cfg.observable,
        cfg.dt,
        cfg.n_path,
        derive_seed(cfg.seed, &[1]),
    )?;
    let (dm2, dm2_se) = grad_second_moment(&cfg.observable, s, &paths, sys.sigma)?;
    let mut loss = |t: &[f64]| {
        reweighted_second_moment(&cfg.observable, s, &s.with_params(t)?, &paths, sys.sigma)
    };
    let rows = fd_gradient_check(
        &mut loss,
        &theta,
        cfg.h_stochastic,
        &dm2,
        FdMode::CommonRandomNumbers,
        cfg.floor,
    )?;
    out.push(NamedCheck {
        name: "second_moment_crn",
        rows,
        tol: cfg.tol_stochastic,
    });

    // Reverse rate on exact draws from the surrogate's Gibbs measure.
    let mut rng = RngStream::new(derive_seed(cfg.seed, &[2]), 0).rng();
    let bounds = o.gibbs(s)?.bounds;
    let xs: Vec<Vec<f64>> = sample_gibbs_1d(
        &crate::potentials::scalar_value(s),
        beta,
        bounds,
        cfg.n_samp,
        &mut rng,
    )?
    .into_iter()
    .map(|x| vec![x])
    .collect();
    let b = reference_drifts(r, &xs);
    let g = grad_rer_reverse(s, r, &xs, beta)?;
    let mut loss = |t: &[f64]| reweighted_reverse_rer(s, &s.with_params(t)?, &b, &xs, beta);
    let rows = fd_gradient_check(
        &mut loss,
        &theta,
        cfg.h_stochastic,
        &g,
        FdMode::CommonRandomNumbers,
        cfg.floor,
    )?;
    out.push(NamedCheck {
        name: "rer_reverse_mc_crn",
        rows,
        tol: cfg.tol_stochastic,
    });

    // Assembled forward goal-oriented gradient, 𝓜_φ fixed at the reference value.
    let m_phi = o.exit_moments(r)?.1;
    let q = o.gibbs(r)?;
    let xs_f: Vec<Vec<f64>> = sample_gibbs_1d(
        &crate::potentials::scalar_value(r),
        beta,
        q.bounds,
        cfg.n_samp,
        &mut rng,
    )?
    .into_iter()
    .map(|x| vec![x])
    .collect();
    let b_f = reference_drifts(r, &xs_f);
    let h = rer_gradient(Direction::Forward, s, &b_f, &xs_f, None, beta)?;
    let m2 = reweighted_second_moment(&cfg.observable, s, s, &paths, sys.sigma)?;
    let est = grad_go_loss(cfg.t, m_phi, m2, &dm2, &dm2_se, &h);
    let mut loss = |t: &[f64]| -> Result<f64> {
        let st = s.with_params(t)?;
        let m2 = reweighted_second_moment(&cfg.observable, s, &st, &paths, sys.sigma)?;
        let h = rer_gradient(Direction::Forward, &st, &b_f, &xs_f, None, beta)?.value;
        Ok(go_loss_from_parts(cfg.t, m_phi, m2, h).value)
    };
    let rows = fd_gradient_check(
        &mut loss,
        &theta,
        cfg.h_stochastic,
        &est.grad,
        FdMode::CommonRandomNumbers,
        cfg.floor,
    )?;
    out.push(NamedCheck {
        name: "go_forward_crn",
        rows,
        tol: cfg.tol_stochastic,
    });

    // Score-function estimator for V_θ = θx²/2 against −1/(βθ²); rows carry
    // the estimate and its standard error instead of a difference quotient.
    let th = 1.5;
    let v = |x: f64| th * x * x / 2.0;
    let xs = sample_gibbs_1d(&v, beta, (-12.0, 12.0), cfg.n_samp.max(10_000), &mut rng)?;
    let gv: Vec<f64> = xs.iter().map(|x| x * x / 2.0).collect();
    let mean_gv = gv.iter().sum::<f64>() / gv.len() as f64;
    let terms: Vec<f64> = xs
        .iter()
        .zip(&gv)
        .map(|(x, g)| x * x * (-beta * (g - mean_gv)))
        .collect();
    let e = mean_and_se(&terms);
    let exact = -1.0 / (beta * th * th);
    out.push(NamedCheck {
        name: "score_function_gaussian",
        rows: vec![GradCheckRow {
            coordinate: 0,
            analytic: e.value,
            fd: exact,
            rel_err: (e.value - exact).abs() / (3.0 * e.std_error),
            mode: FdMode::Deterministic,
        }],
        // rel_err here is the deviation in units of 3 SE.
        tol: 1.0,
    });
    Ok(out)
}

fn cfg_x0(o: &Oracle1D) -> Vec<f64> {
    vec![o.x0]
}

pub fn grad_check(cfg: &GradCheckConfig, out_dir: &Path) -> Result<Report> {
    if cfg.model.dim() != 1 {
        return Err(Error::config("gradient checks use one-dimensional models"));
    }
    let mut report = Report::default();
    for c in grad_check_rows(cfg)? {
        let file = out_dir.join(format!("grad_check_{}.csv", c.name));
        write_grad_check_csv(&c.rows, create(&file)?)?;
        report.files.push(file);
        let worst = c.rows.iter().map(|r| r.rel_err).fold(0.0f64, f64::max);
        report.check(
            c.name,
            worst <= c.tol,
            format!("max rel err {worst:e} (tol {:e})", c.tol),
        );
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CustomTrainConfig {
    pub train: TrainConfig,
    pub reference: AnyPotential,
    pub initial: AnyPotential,
    /// States CSV (`index,x_1,..`) used as the forward dataset.
    #[serde(default)]
    pub dataset: Option<PathBuf>,
    /// Continue from a checkpoint written by an earlier run.
    #[serde(default)]
    pub resume_from: Option<PathBuf>,
}

pub fn train_custom(cfg: &CustomTrainConfig, out_dir: &Path) -> Result<Report> {
    let dataset = cfg
        .dataset
        .as_ref()
        .map(|f| read_states_csv(std::fs::File::open(f)?))
        .transpose()?;
    let run = match &cfg.resume_from {
        Some(f) => resume(Checkpoint::load(f)?, &cfg.reference, dataset, usize::MAX),
        None => train(&cfg.train, &cfg.reference, &cfg.initial, dataset),
    };
    let mut report = Report::default();
    let (trace, failed) = match run {
        Ok(run) => {
            let file = out_dir.join("checkpoint.json");
            run.checkpoint.save(&file)?;
            report.files.push(file);
            (run.trace, None)
        }
        Err(f) => (f.trace, Some(f.error.to_string())),
    };
    let file = out_dir.join(format!("trace_{}.csv", trace.kind.as_str()));
    trace.write_csv(create(&file)?)?;
    report.files.push(file);
    report.check(
        "completed",
        failed.is_none(),
        failed.unwrap_or_else(|| format!("{} iterates", trace.records.len())),
    );
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grad_checks_pass() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = GradCheckConfig {
            n_path: 300,
            ..Default::default()
        };
        let report = grad_check(&cfg, dir.path()).unwrap();
        assert!(report.all_passed(), "{:?}", report.checks);
        assert_eq!(report.files.len(), 6);
    }

    #[test]
    fn fk_solve_brownian_interval() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = FkSolveConfig {
            potential: AnyPotential::Quadratic(crate::potentials::Quadratic::new(1, 0.0)),
            x0: 0.0,
            x_exit: 1.0,
            x_min: Some(-1.0),
            n_grid: 2001,
            ..Default::default()
        };
        let report = fk_solve(&cfg, dir.path()).unwrap();
        assert!(report.all_passed());
        let s: serde_json::Value = serde_json::from_reader(
            std::fs::File::open(dir.path().join("fk_summary.json")).unwrap(),
        )
        .unwrap();
        assert!((s["m1"].as_f64().unwrap() - 0.5).abs() < 5e-5);
    }

    #[test]
    fn estimate_writes_cache() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = EstimateConfig {
            n_paths: 50,
            save_paths: true,
            ..Default::default()
        };
        let report = estimate(&cfg, dir.path()).unwrap();
        assert!(report.all_passed());
        let paths = crate::io::load_path_cache(&dir.path().join("paths.bin")).unwrap();
        assert_eq!(paths.len(), 50);
    }
}
