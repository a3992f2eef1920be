//! Training losses: energy matching, force matching, relative entropy rate
//! and the goal-oriented losses, plus a deterministic 1-D oracle evaluation.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::fk::{path_kl_exit, solve_exit_moments, Grid1D};
use crate::info::{relative_entropy_rate, Measure};
use crate::observables::{check_fresh, evaluate_functional, ObservableSpec};
use crate::potentials::{fingerprint, scalar_drift, scalar_value, Potential};
use crate::quadrature::GibbsQuadrature;
use crate::sde::PathSample;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    Reverse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Em,
    Fm,
    RerF,
    RerR,
    GoF,
    GoR,
}

impl LossKind {
    pub const ALL: [LossKind; 6] = [
        LossKind::Em,
        LossKind::Fm,
        LossKind::RerF,
        LossKind::RerR,
        LossKind::GoF,
        LossKind::GoR,
    ];

    pub fn direction(self) -> Direction {
        match self {
            LossKind::RerR | LossKind::GoR => Direction::Reverse,
            _ => Direction::Forward,
        }
    }

    pub fn is_go(self) -> bool {
        matches!(self, LossKind::GoF | LossKind::GoR)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LossKind::Em => "em",
            LossKind::Fm => "fm",
            LossKind::RerF => "rer_f",
            LossKind::RerR => "rer_r",
            LossKind::GoF => "go_f",
            LossKind::GoR => "go_r",
        }
    }
}

/// The constant `𝓜_φ`, fixed or taken as twice the current surrogate estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MPhi {
    Value(f64),
    Auto(AutoTag),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AutoTag {
    Auto,
}

impl MPhi {
    pub const AUTO: MPhi = MPhi::Auto(AutoTag::Auto);
    pub const AUTO_FACTOR: f64 = 2.0;

    pub fn resolve(self, surrogate_second_moment: f64) -> f64 {
        match self {
            MPhi::Value(v) => v,
            MPhi::Auto(_) => Self::AUTO_FACTOR * surrogate_second_moment,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossSpec {
    pub kind: LossKind,
    pub m_phi: MPhi,
    /// Horizon `T` multiplying the goal-oriented loss.
    pub t: f64,
    pub n_path: usize,
    pub dt: f64,
    pub observable: Option<ObservableSpec>,
}

impl LossSpec {
    pub fn validate(&self) -> Result<()> {
        if self.kind.is_go() {
            let obs = self
                .observable
                .as_ref()
                .ok_or_else(|| Error::config("goal-oriented losses need an observable"))?;
            obs.validate()?;
            if !(self.t > 0.0 && self.dt > 0.0) || self.n_path < 2 {
                return Err(Error::config(
                    "goal-oriented losses need T > 0, dt > 0 and n_path ≥ 2",
                ));
            }
            if let MPhi::Value(v) = self.m_phi {
                if v < 0.0 {
                    return Err(Error::NegativeInput {
                        name: "m_phi",
                        value: v,
                    });
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GoComponents {
    /// Surrogate second moment `Ẽ[φ²]`.
    pub second_moment_term: f64,
    /// `H = ½ E‖σ⁻¹(b − b̃)‖²`.
    pub rer_term: f64,
    pub m_phi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossValue {
    pub value: f64,
    pub components: Option<GoComponents>,
}

fn nonempty(n: usize) -> Result<()> {
    if n == 0 {
        Err(Error::EmptyDataset)
    } else {
        Ok(())
    }
}

/// `mean |V(x_j) − Ṽ(x_j)|²`.
pub fn em_loss<P: Potential + ?Sized>(
    v_ref: &[f64],
    model: &P,
    states: &[Vec<f64>],
) -> Result<f64> {
    nonempty(states.len())?;
    check_dim(states.len(), v_ref.len())?;
    Ok(states
        .iter()
        .zip(v_ref)
        .map(|(x, v)| (v - model.value(x)).powi(2))
        .sum::<f64>()
        / states.len() as f64)
}

/// Mean of `|b(x_j) − b̃(x_j)|²` — the per-state squared drift gaps, averaged.
fn mean_sq_gap<P: Potential + ?Sized>(
    b_ref: &[Vec<f64>],
    model: &P,
    states: &[Vec<f64>],
) -> Result<f64> {
    nonempty(states.len())?;
    check_dim(states.len(), b_ref.len())?;
    let mut bt = vec![0.0; model.dim()];
    let mut total = 0.0;
    for (x, b) in states.iter().zip(b_ref) {
        check_dim(model.dim(), x.len())?;
        model.drift(x, &mut bt);
        total += b.iter().zip(&bt).map(|(a, c)| (a - c).powi(2)).sum::<f64>();
    }
    Ok(total / states.len() as f64)
}

/// `mean ‖b(x_j) − b̃(x_j)‖²`.
pub fn fm_loss<P: Potential + ?Sized>(
    b_ref: &[Vec<f64>],
    model: &P,
    states: &[Vec<f64>],
) -> Result<f64> {
    mean_sq_gap(b_ref, model, states)
}

/// `β · mean ‖∇V(x_j) − ∇Ṽ(x_j)‖²`, i.e. four times the empirical rate.
pub fn rer_loss<P: Potential + ?Sized>(
    b_ref: &[Vec<f64>],
    model: &P,
    states: &[Vec<f64>],
    beta: f64,
) -> Result<f64> {
    Ok(beta * mean_sq_gap(b_ref, model, states)?)
}

/// Empirical `H = (β/4) mean ‖b − b̃‖²`.
pub fn empirical_rer<P: Potential + ?Sized>(
    b_ref: &[Vec<f64>],
    model: &P,
    states: &[Vec<f64>],
    beta: f64,
) -> Result<f64> {
    Ok(beta / 4.0 * mean_sq_gap(b_ref, model, states)?)
}

/// `T(𝓜_φ + m̃₂)·H`, i.e. `T/2·(𝓜_φ + m̃₂)·mean‖σ⁻¹(b − b̃)‖²`.
pub fn go_loss_from_parts(t: f64, m_phi: f64, second_moment: f64, rer: f64) -> LossValue {
    LossValue {
        value: t / 2.0 * (m_phi + second_moment) * 2.0 * rer,
        components: Some(GoComponents {
            second_moment_term: second_moment,
            rer_term: rer,
            m_phi,
        }),
    }
}

/// Inexact goal-oriented loss on a state batch and a path batch simulated
/// under the current surrogate.
pub fn go_loss_inexact<P: Potential + ?Sized>(
    spec: &LossSpec,
    b_ref: &[Vec<f64>],
    model: &P,
    states: &[Vec<f64>],
    paths: &[PathSample],
    beta: f64,
) -> Result<LossValue> {
    spec.validate()?;
    let obs = spec.observable.as_ref().expect("validated");
    nonempty(paths.len())?;
    check_fresh(paths, fingerprint(model.params()))?;
    let m2 = paths
        .iter()
        .map(|p| evaluate_functional(obs, p).map(|v| v * v))
        .sum::<Result<f64>>()?
        / paths.len() as f64;
    let h = empirical_rer(b_ref, model, states, beta)?;
    Ok(go_loss_from_parts(spec.t, spec.m_phi.resolve(m2), m2, h))
}

/// Deterministic quantities for a 1-D exit problem: Feynman–Kac moments and
/// Gauss–Legendre Gibbs expectations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Oracle1D {
    pub beta: f64,
    pub x0: f64,
    /// Exit boundary of `B = (−∞, x_exit]`.
    pub x_exit: f64,
    pub n_grid: usize,
    pub n_quad: usize,
    /// Window scanned for Gibbs truncation bounds.
    pub search: (f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleEval {
    pub m1_ref: f64,
    pub m2_ref: f64,
    pub m1_sur: f64,
    pub m2_sur: f64,
    pub rer: f64,
    pub go_loss: f64,
    pub abs_error: f64,
}

impl Oracle1D {
    pub fn grid<P: Potential + ?Sized>(&self, model: &P) -> Result<Grid1D> {
        Grid1D::for_exit(&scalar_value(model), self.beta, self.x_exit, self.n_grid)
    }

    /// `(E[τ], E[τ²])` from `x0`.
    pub fn exit_moments<P: Potential + ?Sized>(&self, model: &P) -> Result<(f64, f64)> {
        check_dim(1, model.dim())?;
        let grid = self.grid(model)?;
        Ok(solve_exit_moments(&scalar_drift(model), self.beta, &grid)?.at(self.x0))
    }

    pub fn gibbs<P: Potential + ?Sized>(&self, model: &P) -> Result<GibbsQuadrature> {
        GibbsQuadrature::auto(&scalar_value(model), self.beta, self.n_quad, self.search)
    }

    /// Forward rate under the reference Gibbs measure, reverse under the surrogate's.
    pub fn rer<R: Potential + ?Sized, S: Potential + ?Sized>(
        &self,
        direction: Direction,
        reference: &R,
        surrogate: &S,
    ) -> Result<f64> {
        let q = match direction {
            Direction::Forward => self.gibbs(reference)?,
            Direction::Reverse => self.gibbs(surrogate)?,
        };
        let b = crate::sde::FnDrift::new(1, |x: &[f64], o: &mut [f64]| reference.drift(x, o));
        let bt = crate::sde::FnDrift::new(1, |x: &[f64], o: &mut [f64]| surrogate.drift(x, o));
        Ok(relative_entropy_rate(&b, &bt, Measure::Quadrature(&q), self.beta)?.value)
    }

    /// Path KL up to the exit time; forward under the reference process.
    pub fn path_kl<R: Potential + ?Sized, S: Potential + ?Sized>(
        &self,
        direction: Direction,
        reference: &R,
        surrogate: &S,
    ) -> Result<f64> {
        let (br, bs) = (scalar_drift(reference), scalar_drift(surrogate));
        match direction {
            Direction::Forward => {
                path_kl_exit(&br, &bs, self.beta, &self.grid(reference)?, self.x0)
            }
            Direction::Reverse => {
                path_kl_exit(&bs, &br, self.beta, &self.grid(surrogate)?, self.x0)
            }
        }
    }

    /// Deterministic goal-oriented loss with `𝓜_φ = E[τ²]` of the reference.
    pub fn evaluate<R: Potential + ?Sized, S: Potential + ?Sized>(
        &self,
        direction: Direction,
        reference: &R,
        surrogate: &S,
        t: f64,
    ) -> Result<OracleEval> {
        let (m1_ref, m2_ref) = self.exit_moments(reference)?;
        let (m1_sur, m2_sur) = self.exit_moments(surrogate)?;
        let rer = self.rer(direction, reference, surrogate)?;
        Ok(OracleEval {
            m1_ref,
            m2_ref,
            m1_sur,
            m2_sur,
            rer,
            go_loss: go_loss_from_parts(t, m2_ref, m2_sur, rer).value,
            abs_error: (m1_ref - m1_sur).abs(),
        })
    }
}
