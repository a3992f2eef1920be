use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{create, write_json, Report};
use crate::error::{Error, Result};
use crate::info::{gibbs_kl, go_error_bound, DivergenceReport};
use crate::losses::{Direction, Oracle1D};
use crate::potentials::{scalar_value, AnyPotential, DoubleWell};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoundScanConfig {
    pub reference_theta: f64,
    pub theta_min: f64,
    pub theta_max: f64,
    pub theta_step: f64,
    pub oracle: Oracle1D,
    /// Bound on every divergence and on the error at the reference parameter.
    pub optimum_tol: f64,
}

impl Default for BoundScanConfig {
    fn default() -> Self {
        Self {
            reference_theta: 0.5,
            theta_min: 0.0,
            theta_max: 1.0,
            theta_step: 0.05,
            oracle: Oracle1D {
                beta: 1.0,
                x0: -1.0,
                x_exit: 1.0,
                n_grid: 4001,
                n_quad: 200,
                search: (-6.0, 6.0),
            },
            optimum_tol: 1e-6,
        }
    }
}

impl BoundScanConfig {
    pub fn thetas(&self) -> Result<Vec<f64>> {
        if !(self.theta_step > 0.0 && self.theta_max >= self.theta_min) {
            return Err(Error::config("theta grid needs step > 0 and max ≥ min"));
        }
        let n = ((self.theta_max - self.theta_min) / self.theta_step + 1e-9).floor() as usize;
        // Grid points are snapped to the step so the reference value is hit exactly.
        Ok((0..=n)
            .map(|i| {
                let t = self.theta_min + self.theta_step * i as f64;
                (t / self.theta_step).round() * self.theta_step
            })
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundScanRow {
    pub theta: f64,
    pub m1: f64,
    pub m2: f64,
    pub report: DivergenceReport,
}

fn scan_row(
    cfg: &BoundScanConfig,
    reference: &AnyPotential,
    m: (f64, f64),
    theta: f64,
) -> Result<BoundScanRow> {
    let o = &cfg.oracle;
    let sur = AnyPotential::DoubleWell(DoubleWell::new(theta));
    let (m1, m2) = o.exit_moments(&sur)?;
    let pkl_f = o.path_kl(Direction::Forward, reference, &sur)?;
    let pkl_r = o.path_kl(Direction::Reverse, reference, &sur)?;
    let (vr, vs) = (scalar_value(reference), scalar_value(&sur));
    Ok(BoundScanRow {
        theta,
        m1,
        m2,
        report: DivergenceReport {
            rer_forward: o.rer(Direction::Forward, reference, &sur)?,
            rer_reverse: o.rer(Direction::Reverse, reference, &sur)?,
            path_kl_forward: pkl_f,
            path_kl_reverse: pkl_r,
            gibbs_kl_forward: gibbs_kl(&vr, &vs, o.beta, o.n_quad, o.search)?,
            gibbs_kl_reverse: gibbs_kl(&vs, &vr, o.beta, o.n_quad, o.search)?,
            go_bound_forward: go_error_bound(m.1, m2, pkl_f)?,
            go_bound_reverse: go_error_bound(m.1, m2, pkl_r)?,
            // The exit time is unbounded, so the sup-norm bound is vacuous.
            ckp_bound: None,
            abs_error_observable: Some((m.0 - m1).abs()),
        },
    })
}

fn write_rows(rows: &[BoundScanRow], file: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(file)?);
    w.write_record([
        "theta",
        "mean_exit_time",
        "second_moment",
        "abs_error",
        "rer_f",
        "rer_r",
        "path_kl_f",
        "path_kl_r",
        "gibbs_kl_f",
        "gibbs_kl_r",
        "go_bound_f",
        "go_bound_r",
    ])?;
    for r in rows {
        let d = &r.report;
        w.write_record(
            [
                r.theta,
                r.m1,
                r.m2,
                d.abs_error_observable.unwrap_or(f64::NAN),
                d.rer_forward,
                d.rer_reverse,
                d.path_kl_forward,
                d.path_kl_reverse,
                d.gibbs_kl_forward,
                d.gibbs_kl_reverse,
                d.go_bound_forward,
                d.go_bound_reverse,
            ]
            .map(|v| v.to_string()),
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Oracle error and divergences of the double-well family across `θ`, with
/// the goal-oriented bound asserted at every grid point.
pub fn bound_scan(cfg: &BoundScanConfig, out_dir: &Path) -> Result<(Vec<BoundScanRow>, Report)> {
    let reference = AnyPotential::DoubleWell(DoubleWell::new(cfg.reference_theta));
    let m_ref = cfg.oracle.exit_moments(&reference)?;
    let rows = cfg
        .thetas()?
        .into_par_iter()
        .map(|t| scan_row(cfg, &reference, m_ref, t))
        .collect::<Result<Vec<_>>>()?;
    let mut report = Report::default();
    let file = out_dir.join("bound_scan.csv");
    write_rows(&rows, &file)?;
    report.files.push(file);
    let cfg_file = out_dir.join("bound_scan_config.json");
    write_json(&cfg_file, cfg)?;
    report.files.push(cfg_file);

    let err = |r: &BoundScanRow| r.report.abs_error_observable.unwrap_or(f64::NAN);
    for (name, bound) in [
        (
            "go_f_bound_dominates_error",
            (|d: &DivergenceReport| d.go_bound_forward) as fn(&DivergenceReport) -> f64,
        ),
        ("go_r_bound_dominates_error", |d: &DivergenceReport| {
            d.go_bound_reverse
        }),
    ] {
        let violations: Vec<f64> = rows
            .iter()
            .filter(|r| !(bound(&r.report) >= err(r)))
            .map(|r| r.theta)
            .collect();
        report.check(
            name,
            violations.is_empty(),
            if violations.is_empty() {
                format!("{} grid points", rows.len())
            } else {
                format!("violated at theta = {violations:?}")
            },
        );
    }
    match rows
        .iter()
        .find(|r| (r.theta - cfg.reference_theta).abs() < 1e-12)
    {
        Some(r) => {
            let d = &r.report;
            let worst = [
                err(r),
                d.rer_forward,
                d.rer_reverse,
                d.path_kl_forward,
                d.path_kl_reverse,
                d.gibbs_kl_forward,
                d.gibbs_kl_reverse,
                d.go_bound_forward,
                d.go_bound_reverse,
            ]
            .into_iter()
            .fold(0.0f64, |a, v| a.max(v.abs()));
            report.check(
                "zero_at_reference",
                worst <= cfg.optimum_tol,
                format!("max divergence/error at reference = {worst:e}"),
            );
        }
        None => report.check(
            "zero_at_reference",
            false,
            "reference parameter not on the grid",
        ),
    }
    let kl_below = rows.iter().any(|r| {
        let d = &r.report;
        [
            d.path_kl_forward,
            d.path_kl_reverse,
            d.gibbs_kl_forward,
            d.gibbs_kl_reverse,
        ]
        .iter()
        .any(|&k| k < err(r))
    });
    report.check(
        "some_kl_below_error",
        kl_below,
        "a KL curve falls below the error somewhere on the grid",
    );
    Ok((rows, report))
}
