//! Path functionals `φ_τ`, their Monte Carlo moments, and the Itô sums
//! `M = Σ_t (σ⁻¹ J(X_t))ᵀ √δ ξ_t` used by the gradient estimators.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potentials::Potential;
use crate::rng::{NoiseSource, RngStream};
use crate::sde::{cap_steps, simulate_batch, PathSample, Region, SdeSystem, StopRule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservableKind {
    FirstExit,
    FirstHit,
    /// `∫₀^τ f(X_s) ds`, stopped on leaving `region` if one is given.
    TimeIntegral,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Integrand {
    #[default]
    One,
    Coordinate {
        index: usize,
    },
    Square {
        index: usize,
    },
}

impl Integrand {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match *self {
            Integrand::One => 1.0,
            Integrand::Coordinate { index } => x[index],
            Integrand::Square { index } => x[index] * x[index],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableSpec {
    pub kind: ObservableKind,
    pub region: Option<Region>,
    pub t_cap: f64,
    #[serde(default)]
    pub integrand: Integrand,
}

impl ObservableSpec {
    pub fn first_exit(region: Region, t_cap: f64) -> Self {
        Self {
            kind: ObservableKind::FirstExit,
            region: Some(region),
            t_cap,
            integrand: Integrand::One,
        }
    }

    pub fn first_hit(region: Region, t_cap: f64) -> Self {
        Self {
            kind: ObservableKind::FirstHit,
            region: Some(region),
            t_cap,
            integrand: Integrand::One,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_cap > 0.0) {
            return Err(Error::config(format!(
                "observable cap must be positive, got {}",
                self.t_cap
            )));
        }
        if self.kind != ObservableKind::TimeIntegral && self.region.is_none() {
            return Err(Error::config("exit and hitting observables need a region"));
        }
        Ok(())
    }

    pub fn stop_rule(&self) -> StopRule {
        match (&self.kind, &self.region) {
            (ObservableKind::FirstHit, Some(r)) => StopRule::Hit(r.clone()),
            (_, Some(r)) => StopRule::Exit(r.clone()),
            (_, None) => StopRule::Never,
        }
    }
}

/// Left-endpoint sum `δ Σ_{k < stop} f(X_k)`; equals `δ·stop_index` for `f ≡ 1`.
pub fn evaluate_functional(spec: &ObservableSpec, path: &PathSample) -> Result<f64> {
    if path.rule != spec.stop_rule() {
        return Err(Error::SpecMismatch);
    }
    Ok(functional_unchecked(spec, path))
}

fn functional_unchecked(spec: &ObservableSpec, path: &PathSample) -> f64 {
    match spec.integrand {
        Integrand::One => path.stop_time().min(spec.t_cap),
        f => {
            path.dt
                * (0..path.stop_index)
                    .map(|k| f.eval(path.state(k)))
                    .sum::<f64>()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub mean: f64,
    pub second_moment: f64,
    /// `second_moment − mean²`.
    pub variance: f64,
    pub std_error_mean: f64,
    /// Standard error of the second-moment estimate.
    pub std_error_second: f64,
    pub n_paths: usize,
    pub capped_fraction: f64,
}

impl MomentEstimate {
    pub fn from_values(values: &[f64], capped: usize) -> Result<Self> {
        let n = values.len();
        if n < 2 {
            return Err(Error::config("moment estimates need at least two samples"));
        }
        let nf = n as f64;
        let mean = values.iter().sum::<f64>() / nf;
        let second = values.iter().map(|v| v * v).sum::<f64>() / nf;
        let variance = second - mean * mean;
        let var_sq = values.iter().map(|v| (v * v - second).powi(2)).sum::<f64>() / (nf - 1.0);
        Ok(Self {
            mean,
            second_moment: second,
            variance,
            std_error_mean: (variance.max(0.0) / (nf - 1.0)).sqrt(),
            std_error_second: (var_sq / nf).sqrt(),
            n_paths: n,
            capped_fraction: capped as f64 / nf,
        })
    }
}

pub fn estimate_moments(
    spec: &ObservableSpec,
    system: &SdeSystem,
    n_paths: usize,
    dt: f64,
    batch_seed: u64,
) -> Result<MomentEstimate> {
    spec.validate()?;
    let stats: Vec<PathFunctional> = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let mut noise = RngStream::for_path(batch_seed, i).normals();
            simulate_functional(system, spec, dt, &mut noise, None).map_err(|e| e.in_path(i))
        })
        .collect::<Result<_>>()?;
    let values: Vec<f64> = stats.iter().map(|s| s.phi).collect();
    MomentEstimate::from_values(&values, stats.iter().filter(|s| s.capped).count())
}

/// Moments from already simulated paths.
pub fn moments_of_paths(spec: &ObservableSpec, paths: &[PathSample]) -> Result<MomentEstimate> {
    let values = paths
        .iter()
        .map(|p| evaluate_functional(spec, p))
        .collect::<Result<Vec<_>>>()?;
    MomentEstimate::from_values(&values, paths.iter().filter(|p| p.capped).count())
}

/// `Σ_{t < stop} σ⁻¹ √δ · J(X_t)ᵀ ξ_t`, where `jt_vec(x, ξ, out)` writes `J(x)ᵀξ`.
pub fn accumulate_martingale(
    path: &PathSample,
    d: usize,
    jt_vec: impl Fn(&[f64], &[f64], &mut [f64]),
    sigma: f64,
) -> Result<Vec<f64>> {
    if path.noise.is_none() {
        return Err(Error::MissingNoise);
    }
    let scale = path.dt.sqrt() / sigma;
    let mut acc = vec![0.0; d];
    let mut buf = vec![0.0; d];
    for k in 0..path.stop_index {
        let xi = path.xi(k).expect("noise checked above");
        jt_vec(path.state(k), xi, &mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += scale * b;
        }
    }
    Ok(acc)
}

/// [`accumulate_martingale`] with `J = ∂_θ b̃_θ` of `model`.
pub fn model_martingale<P: Potential + ?Sized>(
    path: &PathSample,
    model: &P,
    sigma: f64,
) -> Result<Vec<f64>> {
    accumulate_martingale(
        path,
        model.n_params(),
        |x, v, o| model.jacobian_t_vec(x, v, o),
        sigma,
    )
}

/// Functional value and (optionally) martingale of one path, computed on the
/// fly without storing the trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct PathFunctional {
    pub phi: f64,
    pub stop_index: usize,
    pub capped: bool,
    pub martingale: Option<Vec<f64>>,
}

pub fn simulate_functional<N: NoiseSource>(
    system: &SdeSystem,
    spec: &ObservableSpec,
    dt: f64,
    noise: &mut N,
    martingale_model: Option<&dyn Potential>,
) -> Result<PathFunctional> {
    let k_max = cap_steps(spec.t_cap, dt)?;
    let rule = spec.stop_rule();
    let m = system.dim;
    let mut x = system.x0.clone();
    let mut xi = vec![0.0; m];
    let mut scratch = vec![0.0; m];
    let mut mart = martingale_model.map(|p| (p, vec![0.0; p.n_params()], vec![0.0; p.n_params()]));
    let scale = dt.sqrt() / system.sigma;
    let mut phi = 0.0;
    let mut k = 0;
    while k < k_max && !rule.fires(&x) {
        if spec.integrand != Integrand::One {
            phi += dt * spec.integrand.eval(&x);
        }
        noise.fill(&mut xi);
        if let Some((p, acc, buf)) = mart.as_mut() {
            p.jacobian_t_vec(&x, &xi, buf);
            for (a, b) in acc.iter_mut().zip(buf.iter()) {
                *a += scale * b;
            }
        }
        system.step_in_place(&mut x, &mut scratch, dt, &xi, k)?;
        k += 1;
    }
    if spec.integrand == Integrand::One {
        phi = (dt * k as f64).min(spec.t_cap);
    }
    Ok(PathFunctional {
        phi,
        stop_index: k,
        capped: k == k_max && !rule.fires(&x),
        martingale: mart.map(|(_, acc, _)| acc),
    })
}

/// Rows `(iter, mean, second_moment, variance, se, capped_fraction)`.
pub fn write_moments_csv<W: Write>(rows: &[(usize, MomentEstimate)], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "iter",
        "mean",
        "second_moment",
        "variance",
        "se",
        "capped_fraction",
    ])?;
    for (it, m) in rows {
        out.write_record([
            it.to_string(),
            m.mean.to_string(),
            m.second_moment.to_string(),
            m.variance.to_string(),
            m.std_error_mean.to_string(),
            m.capped_fraction.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Checks that every path was simulated under the model with `fingerprint`.
pub(crate) fn check_fresh(paths: &[PathSample], fingerprint: u64) -> Result<()> {
    if paths.iter().all(|p| p.fingerprint == Some(fingerprint)) {
        Ok(())
    } else {
        Err(Error::StalePath)
    }
}

/// Simulates `n` paths of `spec` under `system`.
pub fn simulate_observable_paths(
    system: &SdeSystem,
    spec: &ObservableSpec,
    dt: f64,
    n: usize,
    batch_seed: u64,
) -> Result<Vec<PathSample>> {
    spec.validate()?;
    simulate_batch(system, &spec.stop_rule(), spec.t_cap, dt, n, batch_seed)
}
