//! First-order training loops for all six losses.
//!
//! Forward losses use one fixed dataset drawn from the reference invariant
//! measure; reverse losses redraw their states from the current surrogate at
//! every iteration. Goal-oriented losses additionally simulate a fresh path
//! batch under the surrogate each iteration. All randomness of iteration `k`
//! derives from `(seed, k)`, so a run resumed from a checkpoint replays the
//! uninterrupted run exactly.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gradients::{
    grad_em, grad_fm, grad_go_loss, grad_second_moment_from_parts, reference_drifts, rer_gradient,
};
use crate::losses::{
    em_loss, fm_loss, go_loss_from_parts, Direction, LossKind, LossSpec, Oracle1D,
};
use crate::observables::{simulate_functional, PathFunctional};
use crate::potentials::{AnyPotential, Potential};
use crate::rng::{derive_seed, RngStream};
use crate::sde::{sample_invariant_lmc, LmcConfig, SdeSystem};

const ADAGRAD_EPS: f64 = 1e-8;
const DIVERGED: f64 = 1e12;

// Labels for per-iteration seed derivation.
const DATASET: u64 = 0xd47a;
const STATES: u64 = 0x57a7;
const PATHS: u64 = 0x9a75;

/// `acc += g⊙g; θ −= γ g / (√acc + 1e−8)`.
pub fn adagrad_step(theta: &mut [f64], grad: &[f64], accumulator: &mut [f64], gamma: f64) {
    for ((t, g), a) in theta.iter_mut().zip(grad).zip(accumulator.iter_mut()) {
        *a += g * g;
        *t -= gamma * g / (a.sqrt() + ADAGRAD_EPS);
    }
}

pub fn sgd_step(theta: &mut [f64], grad: &[f64], gamma: f64) {
    for (t, g) in theta.iter_mut().zip(grad) {
        *t -= gamma * g;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    Sgd,
    Adagrad,
}

fn default_optimizer() -> Optimizer {
    Optimizer::Adagrad
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub loss: LossSpec,
    #[serde(default = "default_optimizer")]
    pub optimizer: Optimizer,
    pub learning_rate: f64,
    pub max_iters: usize,
    #[serde(default)]
    pub eps_theta: f64,
    #[serde(default)]
    pub eps_loss: f64,
    pub n_samp: usize,
    pub lmc: LmcConfig,
    pub beta: f64,
    /// Start of the observable paths.
    pub x0: Vec<f64>,
    /// Start of the Langevin chains that produce state batches.
    pub lmc_x0: Vec<f64>,
    pub seed: u64,
    /// Deterministic diagnostics recorded at every iterate (1-D exit problems).
    #[serde(default)]
    pub oracle: Option<Oracle1D>,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters < 1 {
            return Err(Error::config("max_iters must be at least 1"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::config("learning rate must be positive"));
        }
        if !(self.eps_theta >= 0.0 && self.eps_loss >= 0.0) {
            return Err(Error::config("tolerances must be nonnegative"));
        }
        if !(self.beta > 0.0) {
            return Err(Error::config("beta must be positive"));
        }
        if self.n_samp == 0 {
            return Err(Error::EmptyDataset);
        }
        self.loss.validate()
    }
}

/// Oracle values at one iterate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleRecord {
    pub m1: f64,
    pub m2: f64,
    pub abs_error: f64,
    /// Deterministic goal-oriented losses with `𝓜_φ` = reference second moment.
    pub go_forward: f64,
    pub go_reverse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iter: usize,
    pub theta: Vec<f64>,
    pub loss: f64,
    pub second_moment_term: Option<f64>,
    pub rer_term: Option<f64>,
    pub m_phi: Option<f64>,
    pub observable_mean: Option<f64>,
    pub observable_var: Option<f64>,
    pub grad_norm: f64,
    pub g1_norm: Option<f64>,
    pub g2_norm: Option<f64>,
    pub oracle: Option<OracleRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub kind: LossKind,
    pub records: Vec<TraceRecord>,
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

impl TrainTrace {
    /// One row per iterate; the leading eight columns are the loss schema.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let d = self.records.first().map_or(0, |r| r.theta.len());
        let mut out = csv::Writer::from_writer(w);
        let mut header: Vec<String> = [
            "iter",
            "loss_kind",
            "value",
            "second_moment_term",
            "rer_term",
            "m_phi",
            "observable_mean",
            "observable_var",
            "grad_norm",
            "g1_norm",
            "g2_norm",
            "oracle_m1",
            "oracle_m2",
            "oracle_abs_error",
            "oracle_go_f",
            "oracle_go_r",
        ]
        .map(String::from)
        .to_vec();
        header.extend((1..=d).map(|i| format!("theta_{i}")));
        out.write_record(&header)?;
        for r in &self.records {
            let o = r.oracle;
            let mut row = vec![
                r.iter.to_string(),
                self.kind.as_str().to_string(),
                r.loss.to_string(),
                opt(r.second_moment_term),
                opt(r.rer_term),
                opt(r.m_phi),
                opt(r.observable_mean),
                opt(r.observable_var),
                r.grad_norm.to_string(),
                opt(r.g1_norm),
                opt(r.g2_norm),
                opt(o.map(|o| o.m1)),
                opt(o.map(|o| o.m2)),
                opt(o.map(|o| o.abs_error)),
                opt(o.map(|o| o.go_forward)),
                opt(o.map(|o| o.go_reverse)),
            ];
            row.extend(r.theta.iter().map(|t| t.to_string()));
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }
}

/// Everything needed to continue a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub config: TrainConfig,
    /// Index of the next iteration to run.
    pub next_iter: usize,
    pub model: AnyPotential,
    pub accumulator: Vec<f64>,
    pub prev_loss: Option<f64>,
    pub finished: bool,
    pub trace: TrainTrace,
}

impl Checkpoint {
    pub fn save(&self, file: &Path) -> Result<()> {
        let f = std::io::BufWriter::new(std::fs::File::create(file)?);
        serde_json::to_writer_pretty(f, self)?;
        Ok(())
    }

    pub fn load(file: &Path) -> Result<Self> {
        Ok(serde_json::from_reader(std::io::BufReader::new(
            std::fs::File::open(file)?,
        ))?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxIters,
    SmallStep,
    SmallLossChange,
}

#[derive(Debug)]
pub struct TrainRun {
    pub trace: TrainTrace,
    pub checkpoint: Checkpoint,
    pub stop: StopReason,
}

/// Error raised mid-run, with the trace recorded up to that point.
#[derive(Debug, thiserror::Error)]
#[error("training aborted after {} iterates: {error}", trace.records.len())]
pub struct TrainFailure {
    pub error: Error,
    pub trace: TrainTrace,
}

/// Loss, gradient and diagnostics of one iterate.
struct Evaluation {
    record: TraceRecord,
    grad: Vec<f64>,
}

/// Forward dataset with reference potential values and drifts.
struct FixedData {
    states: Vec<Vec<f64>>,
    v_ref: Vec<f64>,
    b_ref: Vec<Vec<f64>>,
}

struct Context<'a> {
    config: &'a TrainConfig,
    reference: &'a AnyPotential,
    fixed: Option<FixedData>,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Draws `n_samp` states from the invariant measure of `model` by LMC.
pub fn sample_states(
    model: &AnyPotential,
    beta: f64,
    x0: &[f64],
    lmc: &LmcConfig,
    n_samp: usize,
    rng: RngStream,
) -> Result<Vec<Vec<f64>>> {
    let sys = SdeSystem::from_potential(Arc::new(model.clone()), beta, x0.to_vec())?;
    sample_invariant_lmc(&sys, lmc.n_steps, lmc.dt, n_samp, lmc.burn_in(), rng)
}

/// Forward dataset of a run: the supplied one, or an LMC draw from the reference.
pub fn forward_dataset(config: &TrainConfig, reference: &AnyPotential) -> Result<Vec<Vec<f64>>> {
    sample_states(
        reference,
        config.beta,
        &config.lmc_x0,
        &config.lmc,
        config.n_samp,
        RngStream::new(derive_seed(config.seed, &[DATASET]), 0),
    )
}

impl Context<'_> {
    fn evaluate(&self, iter: usize, model: &AnyPotential) -> Result<Evaluation> {
        let cfg = self.config;
        let kind = cfg.loss.kind;
        let beta = cfg.beta;
        let resampled;
        let (states, v_ref, b_ref): (&[Vec<f64>], Option<&[f64]>, _) = match kind.direction() {
            Direction::Forward => {
                let f = self.fixed.as_ref().expect("forward dataset prepared");
                (&f.states, Some(&f.v_ref), f.b_ref.clone())
            }
            Direction::Reverse => {
                resampled = sample_states(
                    model,
                    beta,
                    &cfg.lmc_x0,
                    &cfg.lmc,
                    cfg.n_samp,
                    RngStream::new(derive_seed(cfg.seed, &[STATES, iter as u64]), 0),
                )?;
                let b = reference_drifts(self.reference, &resampled);
                (&resampled, None, b)
            }
        };
        let mut record = TraceRecord {
            iter,
            theta: model.params().to_vec(),
            loss: 0.0,
            second_moment_term: None,
            rer_term: None,
            m_phi: None,
            observable_mean: None,
            observable_var: None,
            grad_norm: 0.0,
            g1_norm: None,
            g2_norm: None,
            oracle: None,
        };
        let grad = match kind {
            LossKind::Em => {
                let v = v_ref.expect("forward");
                record.loss = em_loss(v, model, states)?;
                grad_em(v, model, states)?
            }
            LossKind::Fm => {
                record.loss = fm_loss(&b_ref, model, states)?;
                grad_fm(&b_ref, model, states)?
            }
            LossKind::RerF | LossKind::RerR => {
                let g = rer_gradient(kind.direction(), model, &b_ref, states, None, beta)?;
                record.loss = 4.0 * g.value;
                record.rer_term = Some(g.value);
                g.grad.iter().map(|v| 4.0 * v).collect()
            }
            LossKind::GoF | LossKind::GoR => {
                let spec = &cfg.loss;
                let obs = spec.observable.as_ref().expect("validated");
                let sys = SdeSystem::from_potential(Arc::new(model.clone()), beta, cfg.x0.clone())?;
                let batch = derive_seed(cfg.seed, &[PATHS, iter as u64]);
                let paths: Vec<PathFunctional> = (0..spec.n_path)
                    .into_par_iter()
                    .map(|i| {
                        let mut noise = RngStream::for_path(batch, i).normals();
                        simulate_functional(
                            &sys,
                            obs,
                            spec.dt,
                            &mut noise,
                            Some(model as &dyn Potential),
                        )
                        .map_err(|e| e.in_path(i))
                    })
                    .collect::<Result<_>>()?;
                let phis: Vec<f64> = paths.iter().map(|p| p.phi).collect();
                let marts: Vec<Vec<f64>> = paths
                    .into_iter()
                    .map(|p| p.martingale.expect("requested"))
                    .collect();
                let n = phis.len() as f64;
                let mean = phis.iter().sum::<f64>() / n;
                let m2 = phis.iter().map(|p| p * p).sum::<f64>() / n;
                let (dm2, dm2_se) = grad_second_moment_from_parts(&phis, &marts, model.n_params());
                let h = rer_gradient(kind.direction(), model, &b_ref, states, None, beta)?;
                let m_phi = spec.m_phi.resolve(m2);
                let loss = go_loss_from_parts(spec.t, m_phi, m2, h.value);
                let est = grad_go_loss(spec.t, m_phi, m2, &dm2, &dm2_se, &h);
                record.loss = loss.value;
                record.second_moment_term = Some(m2);
                record.rer_term = Some(h.value);
                record.m_phi = Some(m_phi);
                record.observable_mean = Some(mean);
                record.observable_var = Some((m2 - mean * mean) * n / (n - 1.0));
                record.g1_norm = Some(norm(&est.g1));
                record.g2_norm = Some(norm(&est.g2));
                est.grad
            }
        };
        if !(record.loss.is_finite() && record.loss <= DIVERGED) {
            return Err(Error::DivergedLoss {
                value: record.loss,
                iter,
            });
        }
        record.grad_norm = norm(&grad);
        if let Some(o) = cfg.oracle.filter(|_| model.dim() == 1) {
            let f = o.evaluate(Direction::Forward, self.reference, model, cfg.loss.t)?;
            let r = o.rer(Direction::Reverse, self.reference, model)?;
            record.oracle = Some(OracleRecord {
                m1: f.m1_sur,
                m2: f.m2_sur,
                abs_error: f.abs_error,
                go_forward: f.go_loss,
                go_reverse: go_loss_from_parts(cfg.loss.t, f.m2_ref, f.m2_sur, r).value,
            });
        }
        Ok(Evaluation { record, grad })
    }
}

/// Runs `config.max_iters` iterations from `initial` (or stops early on the
/// tolerances). `dataset` overrides the forward dataset.
pub fn train(
    config: &TrainConfig,
    reference: &AnyPotential,
    initial: &AnyPotential,
    dataset: Option<Vec<Vec<f64>>>,
) -> Result<TrainRun, TrainFailure> {
    let start = Checkpoint {
        config: config.clone(),
        next_iter: 0,
        model: initial.clone(),
        accumulator: vec![0.0; initial.n_params()],
        prev_loss: None,
        finished: false,
        trace: TrainTrace {
            kind: config.loss.kind,
            records: Vec::new(),
        },
    };
    resume(start, reference, dataset, config.max_iters)
}

/// Continues a run until iteration `until` (capped at `max_iters`).
pub fn resume(
    checkpoint: Checkpoint,
    reference: &AnyPotential,
    dataset: Option<Vec<Vec<f64>>>,
    until: usize,
) -> Result<TrainRun, TrainFailure> {
    let Checkpoint {
        config,
        next_iter,
        mut model,
        mut accumulator,
        mut prev_loss,
        finished,
        mut trace,
    } = checkpoint;
    let fail = |error: Error, trace: &TrainTrace| TrainFailure {
        error,
        trace: trace.clone(),
    };
    config.validate().map_err(|e| fail(e, &trace))?;
    let fixed = match config.loss.kind.direction() {
        Direction::Forward => {
            let xs = match dataset {
                Some(d) if d.is_empty() => return Err(fail(Error::EmptyDataset, &trace)),
                Some(d) => d,
                None => forward_dataset(&config, reference).map_err(|e| fail(e, &trace))?,
            };
            let v_ref = xs.iter().map(|x| reference.value(x)).collect();
            let b_ref = reference_drifts(reference, &xs);
            Some(FixedData {
                states: xs,
                v_ref,
                b_ref,
            })
        }
        Direction::Reverse => None,
    };
    let ctx = Context {
        config: &config,
        reference,
        fixed,
    };
    let k_max = config.max_iters;
    let until = until.min(k_max);
    let mut stop = StopReason::MaxIters;
    let mut done = finished;
    let mut k = next_iter;
    while !done && k < until {
        let eval = ctx.evaluate(k, &model).map_err(|e| fail(e, &trace))?;
        let mut theta = model.params().to_vec();
        match config.optimizer {
            Optimizer::Sgd => sgd_step(&mut theta, &eval.grad, config.learning_rate),
            Optimizer::Adagrad => adagrad_step(
                &mut theta,
                &eval.grad,
                &mut accumulator,
                config.learning_rate,
            ),
        }
        let step: f64 = norm(
            &theta
                .iter()
                .zip(model.params())
                .map(|(a, b)| a - b)
                .collect::<Vec<_>>(),
        );
        let loss = eval.record.loss;
        trace.records.push(eval.record);
        model = model.with_params(&theta).map_err(|e| fail(e, &trace))?;
        k += 1;
        if step < config.eps_theta {
            stop = StopReason::SmallStep;
            done = true;
        } else if prev_loss.is_some_and(|p| (loss - p).abs() < config.eps_loss) {
            stop = StopReason::SmallLossChange;
            done = true;
        } else if k == k_max {
            done = true;
        }
        prev_loss = Some(loss);
    }
    if done && !finished {
        // Diagnostics of the final iterate; no update follows.
        let eval = ctx.evaluate(k, &model).map_err(|e| fail(e, &trace))?;
        trace.records.push(eval.record);
    }
    Ok(TrainRun {
        checkpoint: Checkpoint {
            config: config.clone(),
            next_iter: k,
            model,
            accumulator,
            prev_loss,
            finished: done,
            trace: trace.clone(),
        },
        trace,
        stop,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::MPhi;
    use crate::observables::ObservableSpec;
    use crate::potentials::{DoubleWell, GaussianMixture};
    use crate::sde::Region;

    #[test]
    fn adagrad_examples() {
        let (mut t, mut a) = (vec![0.0], vec![0.0]);
        adagrad_step(&mut t, &[2.0], &mut a, 0.2);
        assert!((t[0] + 0.2).abs() < 1e-8);
        let before = t.clone();
        adagrad_step(&mut t, &[0.0], &mut a, 0.2);
        assert_eq!(t, before);
        let (mut t, mut a) = (vec![0.0, 0.0], vec![0.0, 0.0]);
        adagrad_step(&mut t, &[1.0, 1.0], &mut a, 0.2);
        let t1 = t.clone();
        adagrad_step(&mut t, &[1.0, 1.0], &mut a, 0.2);
        for i in 0..2 {
            assert!(((t1[i] - t[i]) - 0.2 / 2f64.sqrt()).abs() < 1e-8);
        }
    }

    fn dw_config(kind: LossKind, iters: usize) -> TrainConfig {
        TrainConfig {
            loss: LossSpec {
                kind,
                m_phi: MPhi::AUTO,
                t: 50.0,
                n_path: 64,
                dt: 1e-2,
                observable: Some(ObservableSpec::first_exit(
                    Region::Interval {
                        lo: None,
                        hi: Some(1.0),
                    },
                    50.0,
                )),
            },
            optimizer: Optimizer::Adagrad,
            learning_rate: 0.1,
            max_iters: iters,
            eps_theta: 0.0,
            eps_loss: 0.0,
            n_samp: 200,
            lmc: LmcConfig {
                n_steps: 4000,
                dt: 1e-2,
                burn_in: None,
            },
            beta: 1.0,
            x0: vec![-1.0],
            lmc_x0: vec![-1.0],
            seed: 11,
            oracle: Some(Oracle1D {
                beta: 1.0,
                x0: -1.0,
                x_exit: 1.0,
                n_grid: 1001,
                n_quad: 100,
                search: (-5.0, 5.0),
            }),
        }
    }

    fn dw(theta: f64) -> AnyPotential {
        AnyPotential::DoubleWell(DoubleWell::new(theta))
    }

    #[test]
    fn huge_step_tolerance_stops_after_one_update() {
        let mut cfg = dw_config(LossKind::RerF, 50);
        cfg.eps_theta = 1e9;
        let run = train(&cfg, &dw(0.5), &dw(0.1), None).unwrap();
        assert_eq!(run.stop, StopReason::SmallStep);
        assert_eq!(run.trace.records.len(), 2);
        assert!(run.trace.records.len() <= cfg.max_iters + 1);
    }

    #[test]
    fn start_at_optimum_stays_there() {
        let cfg = dw_config(LossKind::RerF, 5);
        let run = train(&cfg, &dw(0.5), &dw(0.5), None).unwrap();
        assert!(run
            .trace
            .records
            .iter()
            .all(|r| r.theta == vec![0.5] && r.loss == 0.0));
    }

    #[test]
    fn every_loss_kind_runs_and_logs() {
        for kind in LossKind::ALL {
            let cfg = dw_config(kind, 3);
            let run = train(&cfg, &dw(0.5), &dw(0.1), None).unwrap();
            let recs = &run.trace.records;
            assert_eq!(recs.len(), 4, "{kind:?}");
            assert!(recs.windows(2).all(|w| w[1].iter == w[0].iter + 1));
            assert_eq!(recs[0].g1_norm.is_some(), kind.is_go());
            assert!(recs.iter().all(|r| r.oracle.is_some()));
            let mut buf = Vec::new();
            run.trace.write_csv(&mut buf).unwrap();
            let text = String::from_utf8(buf).unwrap();
            assert!(text.starts_with(
                "iter,loss_kind,value,second_moment_term,rer_term,m_phi,observable_mean,observable_var,"
            ));
            assert_eq!(text.lines().count(), 5);
        }
    }

    #[test]
    fn replay_and_resume_are_exact() {
        for kind in [LossKind::GoR, LossKind::GoF] {
            let cfg = dw_config(kind, 4);
            let full = train(&cfg, &dw(0.5), &dw(0.1), None).unwrap();
            let again = train(&cfg, &dw(0.5), &dw(0.1), None).unwrap();
            assert_eq!(full.trace, again.trace);
            let first = {
                let start = Checkpoint {
                    config: cfg.clone(),
                    next_iter: 0,
                    model: dw(0.1),
                    accumulator: vec![0.0],
                    prev_loss: None,
                    finished: false,
                    trace: TrainTrace {
                        kind,
                        records: vec![],
                    },
                };
                resume(start, &dw(0.5), None, 2).unwrap()
            };
            assert!(!first.checkpoint.finished);
            let dir = tempfile::tempdir().unwrap();
            let file = dir.path().join("ck.json");
            first.checkpoint.save(&file).unwrap();
            let loaded = Checkpoint::load(&file).unwrap();
            assert_eq!(loaded, first.checkpoint);
            let rest = resume(loaded, &dw(0.5), None, usize::MAX).unwrap();
            assert_eq!(rest.trace, full.trace);
        }
    }

    #[test]
    fn deterministic_descent_on_quadrature_loss() {
        // Small SGD steps on the exact forward rate never increase it.
        let o = dw_config(LossKind::RerF, 1).oracle.unwrap();
        let q = o.gibbs(&dw(0.5)).unwrap();
        let xs: Vec<Vec<f64>> = q.nodes.iter().map(|&x| vec![x]).collect();
        let b = reference_drifts(&dw(0.5), &xs);
        let mut theta = vec![0.05];
        let mut last = f64::INFINITY;
        for _ in 0..30 {
            let g = rer_gradient(
                Direction::Forward,
                &dw(theta[0]),
                &b,
                &xs,
                Some(&q.probs),
                1.0,
            )
            .unwrap();
            assert!(g.value <= last + 1e-15);
            last = g.value;
            sgd_step(&mut theta, &g.grad, 0.5);
        }
        assert!((theta[0] - 0.5).abs() < 0.1, "{theta:?}");
    }

    #[test]
    fn divergence_is_reported_with_partial_trace() {
        let mut cfg = dw_config(LossKind::Fm, 50);
        cfg.optimizer = Optimizer::Sgd;
        cfg.learning_rate = 1e3;
        cfg.oracle = None;
        let err = train(&cfg, &dw(0.5), &dw(0.1), None).unwrap_err();
        assert!(
            matches!(
                err.error,
                Error::DivergedLoss { .. } | Error::NonFiniteDrift { .. }
            ),
            "{err}"
        );
        assert!(!err.trace.records.is_empty());
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = dw_config(LossKind::Em, 0);
        assert!(matches!(
            train(&cfg, &dw(0.5), &dw(0.1), None).unwrap_err().error,
            Error::InvalidConfig(_)
        ));
        cfg.max_iters = 1;
        cfg.learning_rate = 0.0;
        assert!(train(&cfg, &dw(0.5), &dw(0.1), None).is_err());
        cfg.learning_rate = 0.1;
        assert!(matches!(
            train(&cfg, &dw(0.5), &dw(0.1), Some(vec![]))
                .unwrap_err()
                .error,
            Error::EmptyDataset
        ));
    }

    #[test]
    fn gmm_reverse_go_moves_toward_reference() {
        let mut cfg = dw_config(LossKind::GoR, 15);
        cfg.learning_rate = 0.2;
        cfg.loss.dt = 2e-2;
        cfg.loss.t = 100.0;
        cfg.loss.observable = Some(ObservableSpec::first_exit(
            Region::Interval {
                lo: None,
                hi: Some(1.0),
            },
            100.0,
        ));
        if let Some(o) = cfg.oracle.as_mut() {
            o.search = (-6.0, 6.0);
            o.n_grid = 2001;
        }
        let r = AnyPotential::GaussianMixture(GaussianMixture::reference());
        let s = AnyPotential::GaussianMixture(GaussianMixture::initial());
        let run = train(&cfg, &r, &s, None).unwrap();
        let recs = &run.trace.records;
        let (e0, e1) = (
            recs[0].oracle.unwrap().abs_error,
            recs.last().unwrap().oracle.unwrap().abs_error,
        );
        assert!(e1 < e0, "{e0} -> {e1}");
    }
}
