//! Overdamped Langevin systems `dX = b(X) dt + σ dW` with `σ = √(2/β)`,
//! Euler–Maruyama paths and Langevin Monte Carlo chains.

use std::fmt;
use std::sync::Arc;

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::potentials::{fingerprint, Potential};
use crate::rng::{NoiseSource, RngStream};

/// A state-dependent vector field.
pub trait Drift: Send + Sync {
    fn dim(&self) -> usize;
    fn eval(&self, x: &[f64], out: &mut [f64]);
}

impl<P: Potential> Drift for P {
    fn dim(&self) -> usize {
        Potential::dim(self)
    }
    fn eval(&self, x: &[f64], out: &mut [f64]) {
        self.drift(x, out)
    }
}

/// Drift given by a closure, for analytic test systems.
pub struct FnDrift<F> {
    dim: usize,
    f: F,
}

impl<F> FnDrift<F>
where
    F: Fn(&[f64], &mut [f64]) + Send + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F> Drift for FnDrift<F>
where
    F: Fn(&[f64], &mut [f64]) + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, x: &[f64], out: &mut [f64]) {
        (self.f)(x, out)
    }
}

#[derive(Clone)]
pub struct SdeSystem {
    pub drift: Arc<dyn Drift>,
    pub beta: f64,
    pub sigma: f64,
    pub dim: usize,
    pub x0: Vec<f64>,
    /// Fingerprint of the parameters behind `drift`, if it is a model.
    pub fingerprint: Option<u64>,
}

impl fmt::Debug for SdeSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SdeSystem")
            .field("beta", &self.beta)
            .field("sigma", &self.sigma)
            .field("dim", &self.dim)
            .field("x0", &self.x0)
            .finish_non_exhaustive()
    }
}

impl SdeSystem {
    pub fn new(drift: Arc<dyn Drift>, beta: f64, x0: Vec<f64>) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::config(format!("beta must be positive, got {beta}")));
        }
        let dim = drift.dim();
        if dim == 0 {
            return Err(Error::config("state dimension must be at least 1"));
        }
        check_dim(dim, x0.len())?;
        Ok(Self {
            drift,
            beta,
            sigma: (2.0 / beta).sqrt(),
            dim,
            x0,
            fingerprint: None,
        })
    }

    pub fn from_potential<P: Potential + 'static>(
        model: Arc<P>,
        beta: f64,
        x0: Vec<f64>,
    ) -> Result<Self> {
        let fp = fingerprint(model.params());
        let mut sys = Self::new(model, beta, x0)?;
        sys.fingerprint = Some(fp);
        Ok(sys)
    }

    pub fn with_x0(&self, x0: Vec<f64>) -> Result<Self> {
        check_dim(self.dim, x0.len())?;
        Ok(Self { x0, ..self.clone() })
    }

    fn drift_checked(&self, x: &[f64], out: &mut [f64], step: usize) -> Result<()> {
        self.drift.eval(x, out);
        if out.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFiniteDrift { step, path: None })
        }
    }

    /// One Euler–Maruyama update in place; `scratch` holds the drift.
    pub(crate) fn step_in_place(
        &self,
        x: &mut [f64],
        scratch: &mut [f64],
        dt: f64,
        xi: &[f64],
        step: usize,
    ) -> Result<()> {
        self.drift_checked(x, scratch, step)?;
        let amp = dt.sqrt() * self.sigma;
        for ((x, b), z) in x.iter_mut().zip(scratch.iter()).zip(xi) {
            *x += dt * b + amp * z;
        }
        Ok(())
    }
}

/// `x + δ·b(x) + √δ·σ·ξ`.
pub fn euler_maruyama_step(x: &[f64], system: &SdeSystem, dt: f64, xi: &[f64]) -> Result<Vec<f64>> {
    check_dim(system.dim, x.len())?;
    check_dim(system.dim, xi.len())?;
    if !(dt > 0.0) {
        return Err(Error::config(format!("dt must be positive, got {dt}")));
    }
    let mut out = x.to_vec();
    let mut scratch = vec![0.0; system.dim];
    system.step_in_place(&mut out, &mut scratch, dt, xi, 0)?;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Region {
    /// `lo ≤ x ≤ hi` in 1-D; a missing end is unbounded.
    Interval { lo: Option<f64>, hi: Option<f64> },
    /// Closed axis-aligned ellipse.
    Ellipse {
        center: Vec<f64>,
        semi_axes: Vec<f64>,
    },
}

impl Region {
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Region::Interval { lo, hi } => {
                lo.is_none_or(|lo| x[0] >= lo) && hi.is_none_or(|hi| x[0] <= hi)
            }
            Region::Ellipse { center, semi_axes } => {
                let r: f64 = x
                    .iter()
                    .zip(center)
                    .zip(semi_axes)
                    .map(|((x, c), a)| ((x - c) / a).powi(2))
                    .sum();
                r <= 1.0
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "region", rename_all = "snake_case")]
pub enum StopRule {
    Never,
    /// Stop at the first grid state outside the region.
    Exit(Region),
    /// Stop at the first grid state inside the region.
    Hit(Region),
}

impl StopRule {
    pub fn fires(&self, x: &[f64]) -> bool {
        match self {
            StopRule::Never => false,
            StopRule::Exit(r) => !r.contains(x),
            StopRule::Hit(r) => r.contains(x),
        }
    }
}

/// Number of steps covering `[0, t_cap]`, rounding up.
pub fn cap_steps(t_cap: f64, dt: f64) -> Result<usize> {
    if !(t_cap > 0.0 && dt > 0.0) {
        return Err(Error::config(format!(
            "cap time and step must be positive (T = {t_cap}, dt = {dt})"
        )));
    }
    let k = t_cap / dt;
    // Absorb rounding noise such as 10 / 1e-3 = 10000.000000000002.
    let rounded = k.round();
    Ok(if (k - rounded).abs() < 1e-9 * k.max(1.0) {
        rounded as usize
    } else {
        k.ceil() as usize
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSample {
    pub dim: usize,
    pub dt: f64,
    /// Flattened `X_0..X_K`, `dim` entries each.
    pub states: Vec<f64>,
    /// Flattened `ξ_0..ξ_{K-1}`; `None` when increments were discarded.
    pub noise: Option<Vec<f64>>,
    pub stop_index: usize,
    pub capped: bool,
    pub rule: StopRule,
    pub fingerprint: Option<u64>,
}

impl PathSample {
    pub fn len(&self) -> usize {
        self.states.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn state(&self, k: usize) -> &[f64] {
        &self.states[k * self.dim..(k + 1) * self.dim]
    }

    pub fn xi(&self, k: usize) -> Option<&[f64]> {
        self.noise
            .as_ref()
            .map(|n| &n[k * self.dim..(k + 1) * self.dim])
    }

    /// Stopped time `δ·stop_index`.
    pub fn stop_time(&self) -> f64 {
        self.dt * self.stop_index as f64
    }
}

/// Simulates until the stopping rule fires or `T_cap` is reached.
pub fn simulate_path<N: NoiseSource>(
    system: &SdeSystem,
    rule: &StopRule,
    t_cap: f64,
    dt: f64,
    noise: &mut N,
) -> Result<PathSample> {
    let k_max = cap_steps(t_cap, dt)?;
    let m = system.dim;
    let mut states = system.x0.clone();
    let mut increments = Vec::new();
    let mut x = system.x0.clone();
    let mut xi = vec![0.0; m];
    let mut scratch = vec![0.0; m];
    let mut k = 0;
    while k < k_max && !rule.fires(&x) {
        noise.fill(&mut xi);
        system.step_in_place(&mut x, &mut scratch, dt, &xi, k)?;
        states.extend_from_slice(&x);
        increments.extend_from_slice(&xi);
        k += 1;
    }
    Ok(PathSample {
        dim: m,
        dt,
        states,
        noise: Some(increments),
        stop_index: k,
        capped: k == k_max && !rule.fires(&x),
        rule: rule.clone(),
        fingerprint: system.fingerprint,
    })
}

/// `n` independent paths; path `i` uses stream `batch_seed ^ i`.
pub fn simulate_batch(
    system: &SdeSystem,
    rule: &StopRule,
    t_cap: f64,
    dt: f64,
    n: usize,
    batch_seed: u64,
) -> Result<Vec<PathSample>> {
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut noise = RngStream::for_path(batch_seed, i).normals();
            simulate_path(system, rule, t_cap, dt, &mut noise).map_err(|e| e.in_path(i))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LmcConfig {
    pub n_steps: usize,
    pub dt: f64,
    /// Defaults to 10% of `n_steps`.
    pub burn_in: Option<usize>,
}

impl LmcConfig {
    pub fn burn_in(&self) -> usize {
        self.burn_in.unwrap_or(self.n_steps / 10)
    }
}

/// Unadjusted Langevin chain; returns the post-burn-in states `X_{burn_in+1}..X_{n_steps}`.
pub fn lmc_chain(
    system: &SdeSystem,
    n_steps: usize,
    dt: f64,
    burn_in: usize,
    rng: RngStream,
) -> Result<Vec<Vec<f64>>> {
    let m = system.dim;
    let mut noise = rng.normals();
    let mut x = system.x0.clone();
    let mut xi = vec![0.0; m];
    let mut scratch = vec![0.0; m];
    let mut out = Vec::with_capacity(n_steps.saturating_sub(burn_in));
    for k in 0..n_steps {
        noise.fill(&mut xi);
        system.step_in_place(&mut x, &mut scratch, dt, &xi, k)?;
        if k >= burn_in {
            out.push(x.clone());
        }
    }
    Ok(out)
}

/// Runs one chain and draws `n_samp` of its post-burn-in states without replacement.
pub fn sample_invariant_lmc(
    system: &SdeSystem,
    n_steps: usize,
    dt: f64,
    n_samp: usize,
    burn_in: usize,
    rng: RngStream,
) -> Result<Vec<Vec<f64>>> {
    let available = n_steps.saturating_sub(burn_in);
    if available < n_samp {
        return Err(Error::InsufficientChain {
            available,
            requested: n_samp,
        });
    }
    let chain = lmc_chain(system, n_steps, dt, burn_in, rng)?;
    let mut pick_rng = RngStream::new(rng.seed, rng.stream_id ^ 0x5eed_5eed).rng();
    let picks = index::sample(&mut pick_rng, available, n_samp);
    Ok(picks.into_iter().map(|i| chain[i].clone()).collect())
}
