use std::collections::HashSet;
use std::path::Path;
use std::sync::Arc;

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{create, quantile, write_json, Report};
use crate::error::{Error, Result};
use crate::info::mean_and_se;
use crate::losses::{LossKind, LossSpec, MPhi};
use crate::observables::{estimate_moments, MomentEstimate, ObservableSpec};
use crate::optimize::{train, Optimizer, TrainConfig, TrainTrace};
use crate::potentials::{AnyPotential, MlpConfig, MlpPotential, MullerBrown, Potential};
use crate::quadrature::gauss_legendre_on;
use crate::rng::{derive_seed, RngStream};
use crate::sde::{LmcConfig, Region, SdeSystem};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    pub pool_size: usize,
    pub lmc_dt: f64,
    /// Chain steps between stored states.
    pub thin: usize,
    pub burn_in: usize,
    pub set_a_start: Vec<f64>,
    pub set_b_start: Vec<f64>,
    /// Set B keeps only states with `y ≥ set_b_y_min` (the deep basin side).
    pub set_b_y_min: f64,
    /// Gauss–Legendre nodes per axis for the energy oracle.
    pub quad_nodes: usize,
    pub quad_box: [(f64, f64); 2],
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            pool_size: 100_000,
            lmc_dt: 1e-3,
            thin: 100,
            burn_in: 10_000,
            set_a_start: vec![-0.55, 0.45],
            set_b_start: MullerBrown::DEEP_MINIMUM.to_vec(),
            set_b_y_min: 1.0,
            quad_nodes: 200,
            quad_box: [(-2.5, 1.8), (-1.2, 2.8)],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MbConfig {
    pub scale: f64,
    pub beta: f64,
    pub x0: Vec<f64>,
    pub ellipse_center: Vec<f64>,
    pub ellipse_semi_axes: Vec<f64>,
    pub t_cap: f64,
    pub dt: f64,
    pub n_path: usize,
    pub n_samp: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub trials: usize,
    /// Explicit per-trial seeds; derived from `seed` when absent.
    pub trial_seeds: Option<Vec<u64>>,
    pub seed: u64,
    pub mlp: MlpConfig,
    pub init_seed: u64,
    pub losses: Vec<LossKind>,
    pub m_phi: MPhi,
    pub n_eval_paths: usize,
    pub n_ref_paths: usize,
    /// Observable re-evaluated every this many epochs (and at the last).
    pub eval_every: usize,
    /// Largest tolerated B/A error ratio of the goal-oriented loss.
    pub go_ratio_limit: f64,
    pub dataset: DatasetConfig,
}

impl Default for MbConfig {
    fn default() -> Self {
        // Quartic confinement centred on the dataset box.
        let center = vec![-0.35, 0.8];
        Self {
            scale: 0.03,
            beta: 1.0,
            x0: vec![-0.55, 0.45],
            ellipse_center: MullerBrown::INTERMEDIATE_MINIMUM.to_vec(),
            ellipse_semi_axes: vec![0.15, 0.10],
            t_cap: 100.0,
            dt: 1e-2,
            n_path: 50,
            n_samp: 1000,
            epochs: 200,
            learning_rate: 1e-2,
            trials: 2,
            trial_seeds: None,
            seed: 7,
            mlp: MlpConfig {
                input_dim: 2,
                hidden: vec![20],
                quartic_coeff: 0.2,
                quartic_center: center,
            },
            init_seed: 1,
            losses: vec![LossKind::Em, LossKind::Fm, LossKind::GoF],
            m_phi: MPhi::AUTO,
            n_eval_paths: 1000,
            n_ref_paths: 20_000,
            eval_every: 20,
            go_ratio_limit: 3.0,
            dataset: DatasetConfig::default(),
        }
    }
}

impl MbConfig {
    pub fn paper_scale(mut self) -> Self {
        self.trials = 10;
        self.epochs = 1000;
        self.n_samp = 5000;
        self.n_path = 100;
        self.t_cap = 10_000.0;
        self.mlp.hidden = vec![20, 20];
        self.eval_every = 50;
        self
    }

    pub fn potential(&self) -> AnyPotential {
        AnyPotential::MullerBrown(MullerBrown::scaled(self.scale))
    }

    pub fn observable(&self) -> ObservableSpec {
        ObservableSpec::first_hit(
            Region::Ellipse {
                center: self.ellipse_center.clone(),
                semi_axes: self.ellipse_semi_axes.clone(),
            },
            self.t_cap,
        )
    }

    pub fn trial_seed(&self, trial: usize) -> u64 {
        match &self.trial_seeds {
            Some(s) => s[trial],
            None => derive_seed(self.seed, &[0x7419, trial as u64]),
        }
    }

    fn validate(&self) -> Result<()> {
        if let Some(s) = &self.trial_seeds {
            if s.len() < self.trials {
                return Err(Error::config(format!(
                    "{} trial seeds for {} trials",
                    s.len(),
                    self.trials
                )));
            }
        }
        if self.trials == 0 || self.epochs == 0 || self.eval_every == 0 {
            return Err(Error::config(
                "trials, epochs and eval_every must be positive",
            ));
        }
        if self.n_samp > self.dataset.pool_size {
            return Err(Error::config("n_samp exceeds the pool size"));
        }
        self.observable().validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SetLabel {
    A,
    B,
}

impl SetLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            SetLabel::A => "a",
            SetLabel::B => "b",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Datasets {
    pub set_a: Vec<Vec<f64>>,
    pub set_b: Vec<Vec<f64>>,
}

impl Datasets {
    pub fn pool(&self, label: SetLabel) -> &[Vec<f64>] {
        match label {
            SetLabel::A => &self.set_a,
            SetLabel::B => &self.set_b,
        }
    }
}

/// Thinned Langevin chain; only states passing `keep` are stored.
fn thinned_chain(
    sys: &SdeSystem,
    cfg: &DatasetConfig,
    rng: RngStream,
    keep: impl Fn(&[f64]) -> bool,
) -> Result<Vec<Vec<f64>>> {
    use crate::rng::NoiseSource;
    let m = sys.dim;
    let mut noise = rng.normals();
    let mut x = sys.x0.clone();
    let (mut xi, mut scratch) = (vec![0.0; m], vec![0.0; m]);
    let mut out = Vec::with_capacity(cfg.pool_size);
    let limit = cfg.burn_in + 100 * cfg.thin * cfg.pool_size;
    let mut k = 0;
    while out.len() < cfg.pool_size {
        if k >= limit {
            return Err(Error::InsufficientChain {
                available: out.len(),
                requested: cfg.pool_size,
            });
        }
        noise.fill(&mut xi);
        sys.step_in_place(&mut x, &mut scratch, cfg.lmc_dt, &xi, k)?;
        k += 1;
        if k > cfg.burn_in && (k - cfg.burn_in).is_multiple_of(cfg.thin) && keep(&x) {
            out.push(x.clone());
        }
    }
    Ok(out)
}

/// Set A: a thinned reference chain from `set_a_start`. Set B: a chain from
/// the deep well restricted to the half-plane `y ≥ set_b_y_min`.
pub fn build_datasets(cfg: &MbConfig) -> Result<Datasets> {
    let d = &cfg.dataset;
    let pot = Arc::new(cfg.potential());
    let sys_a = SdeSystem::from_potential(pot.clone(), cfg.beta, d.set_a_start.clone())?;
    let sys_b = SdeSystem::from_potential(pot, cfg.beta, d.set_b_start.clone())?;
    let y_min = d.set_b_y_min;
    let (a, b) = rayon::join(
        || {
            thinned_chain(
                &sys_a,
                d,
                RngStream::new(derive_seed(cfg.seed, &[0xa]), 0),
                |_| true,
            )
        },
        || {
            thinned_chain(
                &sys_b,
                d,
                RngStream::new(derive_seed(cfg.seed, &[0xb]), 0),
                |x| x[1] >= y_min,
            )
        },
    );
    Ok(Datasets {
        set_a: a?,
        set_b: b?,
    })
}

/// `E_π[V]` for a 2-D Gibbs density on a box by tensor Gauss–Legendre.
pub fn gibbs_mean_energy_2d(
    v: &dyn Potential,
    beta: f64,
    n: usize,
    bx: [(f64, f64); 2],
) -> Result<f64> {
    let (xs, wx) = gauss_legendre_on(n, bx[0].0, bx[0].1);
    let (ys, wy) = gauss_legendre_on(n, bx[1].0, bx[1].1);
    let mut vals = Vec::with_capacity(n * n);
    for (x, a) in xs.iter().zip(&wx) {
        for (y, b) in ys.iter().zip(&wy) {
            vals.push((a * b, v.value(&[*x, *y])));
        }
    }
    let vmin = vals.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let (mut z, mut ev) = (0.0, 0.0);
    for (w, val) in vals {
        let p = w * (-beta * (val - vmin)).exp();
        z += p;
        ev += p * val;
    }
    if !(z > 0.0) {
        return Err(Error::ZeroMass);
    }
    Ok(ev / z)
}

fn subset_indices(pool: usize, n: usize, seed: u64) -> Vec<usize> {
    let mut rng = RngStream::new(seed, 0x5b5e).rng();
    let mut idx = index::sample(&mut rng, pool, n).into_vec();
    idx.sort_unstable();
    idx
}

fn subset_seed(cfg: &MbConfig, trial: usize, label: SetLabel) -> u64 {
    derive_seed(cfg.trial_seed(trial), &[0x5e7, label as u64])
}

fn write_states(
    file: &Path,
    pot: &dyn Potential,
    pool: &[Vec<f64>],
    idx: Option<&[usize]>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(file)?);
    w.write_record(["index", "x_1", "x_2", "V", "b_1", "b_2"])?;
    let mut b = [0.0; 2];
    let rows: Box<dyn Iterator<Item = usize>> = match idx {
        Some(i) => Box::new(i.iter().copied()),
        None => Box::new(0..pool.len()),
    };
    for i in rows {
        let x = &pool[i];
        pot.drift(x, &mut b);
        w.write_record([
            i.to_string(),
            x[0].to_string(),
            x[1].to_string(),
            pot.value(x).to_string(),
            b[0].to_string(),
            b[1].to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Builds Sets A and B, draws one subset of each per trial, writes them with
/// paired energies and drifts, and checks the construction.
pub fn cmd_dataset(cfg: &MbConfig, out_dir: &Path) -> Result<(Datasets, Report)> {
    cfg.validate()?;
    let data = build_datasets(cfg)?;
    let pot = cfg.potential();
    let mut report = Report::default();
    for label in [SetLabel::A, SetLabel::B] {
        let pool = data.pool(label);
        let file = out_dir.join(format!("set_{}_pool.csv", label.as_str()));
        write_states(&file, &pot, pool, None)?;
        report.files.push(file);
        let mut sizes_ok = true;
        for t in 0..cfg.trials {
            let idx = subset_indices(pool.len(), cfg.n_samp, subset_seed(cfg, t, label));
            let unique: HashSet<usize> = idx.iter().copied().collect();
            sizes_ok &= idx.len() == cfg.n_samp && unique.len() == cfg.n_samp;
            let file = out_dir.join(format!("set_{}_subset_trial{t}.csv", label.as_str()));
            write_states(&file, &pot, pool, Some(&idx))?;
            report.files.push(file);
        }
        report.check(
            format!("set_{}_subsets_exact_and_unique", label.as_str()),
            sizes_ok,
            format!("{} subsets of {}", cfg.trials, cfg.n_samp),
        );
    }
    let seeds: Vec<serde_json::Value> = (0..cfg.trials)
        .map(|t| {
            serde_json::json!({
                "trial": t,
                "trial_seed": cfg.trial_seed(t),
                "subset_seed_a": subset_seed(cfg, t, SetLabel::A),
                "subset_seed_b": subset_seed(cfg, t, SetLabel::B),
            })
        })
        .collect();
    let file = out_dir.join("dataset.json");
    write_json(&file, &serde_json::json!({ "config": cfg, "seeds": seeds }))?;
    report.files.push(file);

    let energies: Vec<f64> = {
        let idx = subset_indices(
            data.set_a.len(),
            cfg.n_samp,
            subset_seed(cfg, 0, SetLabel::A),
        );
        idx.iter().map(|&i| pot.value(&data.set_a[i])).collect()
    };
    let e = mean_and_se(&energies);
    let exact = gibbs_mean_energy_2d(&pot, cfg.beta, cfg.dataset.quad_nodes, cfg.dataset.quad_box)?;
    report.check(
        "set_a_mean_energy_matches_quadrature",
        (e.value - exact).abs() <= 3.0 * e.std_error,
        format!(
            "sample {:.5} ± {:.5}, quadrature {exact:.5}",
            e.value, e.std_error
        ),
    );
    let region = cfg.observable().region.expect("hitting region");
    let outside = data
        .set_b
        .iter()
        .filter(|x| x[1] < cfg.dataset.set_b_y_min)
        .count();
    let inside = data.set_b.iter().filter(|x| region.contains(x)).count();
    report.check(
        "set_b_confined",
        outside == 0 && inside == 0,
        format!("{outside} states below y_min, {inside} inside the target ellipse"),
    );
    Ok((data, report))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MbFinalRow {
    pub trial: usize,
    pub set: SetLabel,
    pub loss_kind: LossKind,
    pub epoch: usize,
    pub mean: f64,
    pub variance: f64,
    pub half_sq_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MbSummaryRow {
    pub set: SetLabel,
    pub loss_kind: LossKind,
    pub epoch: usize,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub variance_median: f64,
}

struct TrialRun {
    trial: usize,
    set: SetLabel,
    kind: LossKind,
    trace: TrainTrace,
    evals: Vec<MbFinalRow>,
    failed: Option<String>,
}

fn evaluate_iterates(
    cfg: &MbConfig,
    template: &AnyPotential,
    trace: &TrainTrace,
    reference: &MomentEstimate,
    id: (usize, SetLabel, LossKind),
) -> Result<Vec<MbFinalRow>> {
    let spec = cfg.observable();
    let last = trace.records.len().saturating_sub(1);
    trace
        .records
        .iter()
        .enumerate()
        .filter(|(i, r)| r.iter % cfg.eval_every == 0 || *i == last)
        .map(|(_, r)| {
            let model = template.with_params(&r.theta)?;
            let sys = SdeSystem::from_potential(Arc::new(model), cfg.beta, cfg.x0.clone())?;
            // Common evaluation noise across runs and iterates.
            let m = estimate_moments(
                &spec,
                &sys,
                cfg.n_eval_paths,
                cfg.dt,
                derive_seed(cfg.seed, &[0xe7a1]),
            )?;
            Ok(MbFinalRow {
                trial: id.0,
                set: id.1,
                loss_kind: id.2,
                epoch: r.iter,
                mean: m.mean,
                variance: m.variance,
                half_sq_error: 0.5 * (reference.mean - m.mean).powi(2),
            })
        })
        .collect()
}

fn summary_rows(evals: &[MbFinalRow], cfg: &MbConfig) -> Vec<MbSummaryRow> {
    let mut out = Vec::new();
    for set in [SetLabel::A, SetLabel::B] {
        for &kind in &cfg.losses {
            let mut epochs: Vec<usize> = evals
                .iter()
                .filter(|e| e.set == set && e.loss_kind == kind)
                .map(|e| e.epoch)
                .collect();
            epochs.sort_unstable();
            epochs.dedup();
            for epoch in epochs {
                let sel: Vec<&MbFinalRow> = evals
                    .iter()
                    .filter(|e| e.set == set && e.loss_kind == kind && e.epoch == epoch)
                    .collect();
                let err: Vec<f64> = sel.iter().map(|e| e.half_sq_error).collect();
                let var: Vec<f64> = sel.iter().map(|e| e.variance).collect();
                out.push(MbSummaryRow {
                    set,
                    loss_kind: kind,
                    epoch,
                    median: quantile(&err, 0.5),
                    q1: quantile(&err, 0.25),
                    q3: quantile(&err, 0.75),
                    variance_median: quantile(&var, 0.5),
                });
            }
        }
    }
    out
}

/// Trains the network surrogate with every loss on subsets of Sets A and B
/// and compares how much each loss's final observable error grows from A to B.
pub fn train_mb_robustness(cfg: &MbConfig, out_dir: &Path) -> Result<(Vec<MbSummaryRow>, Report)> {
    let (data, mut report) = cmd_dataset(cfg, out_dir)?;
    let reference = cfg.potential();
    let spec = cfg.observable();
    let ref_sys = SdeSystem::from_potential(Arc::new(reference.clone()), cfg.beta, cfg.x0.clone())?;
    let ref_m = estimate_moments(
        &spec,
        &ref_sys,
        cfg.n_ref_paths,
        cfg.dt,
        derive_seed(cfg.seed, &[0x4ef]),
    )?;
    let file = out_dir.join("mb_reference.json");
    write_json(&file, &ref_m)?;
    report.files.push(file);

    let init = AnyPotential::Mlp(MlpPotential::init(cfg.mlp.clone(), cfg.init_seed));
    let jobs: Vec<(usize, SetLabel, LossKind)> = (0..cfg.trials)
        .flat_map(|t| {
            [SetLabel::A, SetLabel::B]
                .into_iter()
                .flat_map(move |s| cfg.losses.iter().map(move |&k| (t, s, k)))
        })
        .collect();
    let runs: Vec<TrialRun> = jobs
        .par_iter()
        .map(|&(trial, set, kind)| {
            let pool = data.pool(set);
            let idx = subset_indices(pool.len(), cfg.n_samp, subset_seed(cfg, trial, set));
            let subset: Vec<Vec<f64>> = idx.iter().map(|&i| pool[i].clone()).collect();
            let tc = TrainConfig {
                loss: LossSpec {
                    kind,
                    m_phi: cfg.m_phi,
                    t: cfg.t_cap,
                    n_path: cfg.n_path,
                    dt: cfg.dt,
                    observable: Some(spec.clone()),
                },
                optimizer: Optimizer::Adagrad,
                learning_rate: cfg.learning_rate,
                max_iters: cfg.epochs,
                eps_theta: 0.0,
                eps_loss: 0.0,
                n_samp: cfg.n_samp,
                lmc: LmcConfig {
                    n_steps: cfg.dataset.pool_size,
                    dt: cfg.dataset.lmc_dt,
                    burn_in: None,
                },
                beta: cfg.beta,
                x0: cfg.x0.clone(),
                lmc_x0: cfg.x0.clone(),
                seed: cfg.trial_seed(trial),
                oracle: None,
            };
            let (trace, failed) = match train(&tc, &reference, &init, Some(subset)) {
                Ok(r) => (r.trace, None),
                Err(f) => (f.trace, Some(f.error.to_string())),
            };
            let (evals, failed) =
                match evaluate_iterates(cfg, &init, &trace, &ref_m, (trial, set, kind)) {
                    Ok(e) => (e, failed),
                    Err(e) => (Vec::new(), failed.or(Some(e.to_string()))),
                };
            TrialRun {
                trial,
                set,
                kind,
                trace,
                evals,
                failed,
            }
        })
        .collect();

    let mut evals = Vec::new();
    for r in &runs {
        let file = out_dir.join(format!(
            "mb_trace_{}_{}_trial{}.csv",
            r.set.as_str(),
            r.kind.as_str(),
            r.trial
        ));
        r.trace.write_csv(create(&file)?)?;
        report.files.push(file);
        if let Some(msg) = &r.failed {
            report.check(
                format!(
                    "{}_{}_trial{}_completed",
                    r.set.as_str(),
                    r.kind.as_str(),
                    r.trial
                ),
                false,
                msg.clone(),
            );
        } else {
            // Only completed runs enter the final statistics.
            evals.extend(r.evals.iter().cloned());
        }
    }
    let file = out_dir.join("mb_eval.csv");
    let mut w = csv::Writer::from_writer(create(&file)?);
    w.write_record([
        "trial",
        "set",
        "loss_kind",
        "epoch",
        "mean",
        "variance",
        "half_sq_error",
    ])?;
    for e in &evals {
        w.write_record([
            e.trial.to_string(),
            e.set.as_str().to_string(),
            e.loss_kind.as_str().to_string(),
            e.epoch.to_string(),
            e.mean.to_string(),
            e.variance.to_string(),
            e.half_sq_error.to_string(),
        ])?;
    }
    w.flush()?;
    report.files.push(file);

    let summary = summary_rows(&evals, cfg);
    let file = out_dir.join("mb_summary.csv");
    let mut w = csv::Writer::from_writer(create(&file)?);
    w.write_record([
        "set",
        "loss_kind",
        "epoch",
        "median",
        "q1",
        "q3",
        "variance_median",
    ])?;
    for s in &summary {
        w.write_record([
            s.set.as_str().to_string(),
            s.loss_kind.as_str().to_string(),
            s.epoch.to_string(),
            s.median.to_string(),
            s.q1.to_string(),
            s.q3.to_string(),
            s.variance_median.to_string(),
        ])?;
    }
    w.flush()?;
    report.files.push(file);

    // Median final error under B over median final error under A.
    let final_median = |set: SetLabel, kind: LossKind| {
        summary
            .iter()
            .filter(|s| s.set == set && s.loss_kind == kind)
            .max_by_key(|s| s.epoch)
            .map(|s| s.median)
    };
    let ratios: Vec<(LossKind, f64, f64, f64)> = cfg
        .losses
        .iter()
        .filter_map(|&k| {
            let (a, b) = (final_median(SetLabel::A, k)?, final_median(SetLabel::B, k)?);
            Some((k, a, b, b / a))
        })
        .collect();
    let file = out_dir.join("mb_ratios.csv");
    let mut w = csv::Writer::from_writer(create(&file)?);
    w.write_record([
        "loss_kind",
        "final_median_a",
        "final_median_b",
        "ratio_b_over_a",
    ])?;
    for (k, a, b, r) in &ratios {
        w.write_record([
            k.as_str().to_string(),
            a.to_string(),
            b.to_string(),
            r.to_string(),
        ])?;
    }
    w.flush()?;
    report.files.push(file);

    let ratio = |k: LossKind| ratios.iter().find(|r| r.0 == k).map(|r| r.3);
    if let Some(go) = ratio(LossKind::GoF) {
        for other in [LossKind::Em, LossKind::Fm] {
            if let Some(o) = ratio(other) {
                report.check(
                    format!("go_f_ratio_le_{}_ratio", other.as_str()),
                    go <= o,
                    format!(
                        "B/A final error ratio: go_f {go:.4}, {} {o:.4}",
                        other.as_str()
                    ),
                );
            }
        }
        report.check(
            "go_f_ratio_within_limit",
            go <= cfg.go_ratio_limit,
            format!("go_f B/A ratio {go:.4}, limit {}", cfg.go_ratio_limit),
        );
    }
    Ok((summary, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> MbConfig {
        MbConfig {
            n_samp: 50,
            epochs: 2,
            n_path: 8,
            t_cap: 5.0,
            trials: 1,
            n_eval_paths: 20,
            n_ref_paths: 50,
            eval_every: 1,
            dataset: DatasetConfig {
                pool_size: 500,
                thin: 20,
                burn_in: 100,
                quad_nodes: 60,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn set_b_respects_predicate_and_subsets_are_distinct() {
        let cfg = tiny();
        let d = build_datasets(&cfg).unwrap();
        assert_eq!(d.set_a.len(), 500);
        assert!(d.set_b.iter().all(|x| x[1] >= 1.0));
        let idx = subset_indices(500, 50, 3);
        assert_eq!(idx.len(), 50);
        assert!(idx.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn gaussian_energy_oracle() {
        // V = |x|²/2 in 2-D: E[V] = 1/β.
        let q = AnyPotential::Quadratic(crate::potentials::Quadratic::new(2, 1.0));
        let e = gibbs_mean_energy_2d(&q, 2.0, 80, [(-8.0, 8.0), (-8.0, 8.0)]).unwrap();
        assert!((e - 0.5).abs() < 1e-10, "{e}");
    }

    #[test]
    fn tiny_robustness_run_writes_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny();
        let (summary, report) = train_mb_robustness(&cfg, dir.path()).unwrap();
        assert!(!summary.is_empty());
        assert!(
            !report.checks.iter().any(|c| c.name.ends_with("_completed")),
            "{:?}",
            report.checks
        );
        for f in [
            "mb_eval.csv",
            "mb_summary.csv",
            "mb_ratios.csv",
            "set_a_pool.csv",
            "dataset.json",
        ] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
    }

    #[test]
    fn mismatched_seed_list_is_rejected() {
        let cfg = MbConfig {
            trial_seeds: Some(vec![1]),
            trials: 2,
            ..tiny()
        };
        assert!(matches!(cfg.validate(), Err(Error::InvalidConfig(_))));
    }
}
