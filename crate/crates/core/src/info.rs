//! Divergences between a reference and a surrogate diffusion, and the error
//! bounds built from them.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::quadrature::{gibbs_bounds, GibbsQuadrature};
use crate::rng::{NoiseSource, RngStream};
use crate::sde::{cap_steps, Drift, SdeSystem, StopRule};

/// A value together with its Monte Carlo standard error (zero if exact).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

/// Expectation measure for a relative entropy rate.
#[derive(Debug, Clone, Copy)]
pub enum Measure<'a> {
    /// Normalized 1-D Gibbs quadrature.
    Quadrature(&'a GibbsQuadrature),
    /// Equally weighted samples.
    Samples(&'a [Vec<f64>]),
}

/// `‖σ⁻¹(b − b̃)(x)‖² = (β/2)|b − b̃|²`.
pub(crate) fn scaled_gap(
    b: &dyn Drift,
    b_tilde: &dyn Drift,
    x: &[f64],
    beta: f64,
    buf: &mut [f64],
    buf2: &mut [f64],
) -> f64 {
    b.eval(x, buf);
    b_tilde.eval(x, buf2);
    beta / 2.0
        * buf
            .iter()
            .zip(buf2.iter())
            .map(|(a, c)| (a - c).powi(2))
            .sum::<f64>()
}

/// `H = ½ E_π ‖σ⁻¹(b − b̃)‖²` with `σ = √(2/β)`.
pub fn relative_entropy_rate(
    b: &dyn Drift,
    b_tilde: &dyn Drift,
    pi: Measure<'_>,
    beta: f64,
) -> Result<Estimate> {
    check_dim(b.dim(), b_tilde.dim())?;
    let m = b.dim();
    let (mut u, mut v) = (vec![0.0; m], vec![0.0; m]);
    match pi {
        Measure::Quadrature(q) => {
            check_dim(1, m)?;
            let mass: f64 = q.probs.iter().sum();
            if (mass - 1.0).abs() > 1e-6 {
                return Err(Error::UnnormalizedDensity { mass });
            }
            let value = q
                .nodes
                .iter()
                .zip(&q.probs)
                .map(|(&x, p)| p * 0.5 * scaled_gap(b, b_tilde, &[x], beta, &mut u, &mut v))
                .sum();
            Ok(Estimate {
                value,
                std_error: 0.0,
            })
        }
        Measure::Samples(xs) => {
            if xs.is_empty() {
                return Err(Error::EmptyDataset);
            }
            let terms: Vec<f64> = xs
                .iter()
                .map(|x| 0.5 * scaled_gap(b, b_tilde, x, beta, &mut u, &mut v))
                .collect();
            Ok(mean_and_se(&terms))
        }
    }
}

pub(crate) fn mean_and_se(xs: &[f64]) -> Estimate {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Estimate {
        value: mean,
        std_error: (var / n).sqrt(),
    }
}

/// Initial states for [`path_kl_mc`].
#[derive(Debug, Clone, Copy)]
pub enum PathStart<'a> {
    /// Every path starts at the reference system's `x0`.
    Fixed,
    /// Path `i` starts at `states[i % len]`.
    Stationary(&'a [Vec<f64>]),
}

/// `E[½ Σ_{t<τ} δ ‖σ⁻¹(b − b̃)(X_t)‖²]` over paths of `system_ref`, stopped by
/// `rule` or at `t_cap`.
#[allow(clippy::too_many_arguments)]
pub fn path_kl_mc(
    system_ref: &SdeSystem,
    b_tilde: &dyn Drift,
    rule: &StopRule,
    t_cap: f64,
    dt: f64,
    n_paths: usize,
    start: PathStart<'_>,
    batch_seed: u64,
) -> Result<Estimate> {
    check_dim(system_ref.dim, b_tilde.dim())?;
    let k_max = cap_steps(t_cap, dt)?;
    if let PathStart::Stationary(xs) = start {
        if xs.is_empty() {
            return Err(Error::EmptyDataset);
        }
    }
    let m = system_ref.dim;
    let beta = system_ref.beta;
    let terms: Vec<f64> = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let mut x = match start {
                PathStart::Fixed => system_ref.x0.clone(),
                PathStart::Stationary(xs) => xs[i % xs.len()].clone(),
            };
            let mut noise = RngStream::for_path(batch_seed, i).normals();
            let (mut xi, mut scratch) = (vec![0.0; m], vec![0.0; m]);
            let (mut u, mut v) = (vec![0.0; m], vec![0.0; m]);
            let mut acc = 0.0;
            let mut k = 0;
            while k < k_max && !rule.fires(&x) {
                acc += 0.5
                    * dt
                    * scaled_gap(system_ref.drift.as_ref(), b_tilde, &x, beta, &mut u, &mut v);
                noise.fill(&mut xi);
                system_ref
                    .step_in_place(&mut x, &mut scratch, dt, &xi, k)
                    .map_err(|e| e.in_path(i))?;
                k += 1;
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    Ok(mean_and_se(&terms))
}

/// `KL(π_a ‖ π_b)` for Gibbs densities `∝ e^{-βV}` on a common truncated
/// interval (the union of both truncations within `search`).
pub fn gibbs_kl(
    v_a: &dyn Fn(f64) -> f64,
    v_b: &dyn Fn(f64) -> f64,
    beta: f64,
    n_nodes: usize,
    search: (f64, f64),
) -> Result<f64> {
    let (a0, a1) = gibbs_bounds(v_a, beta, search);
    let (b0, b1) = gibbs_bounds(v_b, beta, search);
    let bounds = (a0.min(b0), a1.max(b1));
    let qa = GibbsQuadrature::new(v_a, beta, n_nodes, bounds)?;
    let qb = GibbsQuadrature::new(v_b, beta, n_nodes, bounds)?;
    for q in [&qa, &qb] {
        if q.normalization_error() > 1e-6 {
            return Err(Error::UnnormalizedDensity {
                mass: q.probs.iter().sum(),
            });
        }
    }
    // log π_a − log π_b = β(V_b − V_a) + log Z_b − log Z_a.
    let kl = qa.expect(|x| beta * (v_b(x) - v_a(x))) + qb.log_z - qa.log_z;
    Ok(kl.max(0.0))
}

/// `√(E[φ²] + Ẽ[φ²]) · √(2 KL)`.
pub fn go_error_bound(second_moment_ref: f64, second_moment_sur: f64, path_kl: f64) -> Result<f64> {
    for (name, value) in [
        ("second_moment_ref", second_moment_ref),
        ("second_moment_sur", second_moment_sur),
        ("path_kl", path_kl),
    ] {
        if value < 0.0 {
            return Err(Error::NegativeInput { name, value });
        }
    }
    Ok((second_moment_ref + second_moment_sur).sqrt() * (2.0 * path_kl).sqrt())
}

/// `‖φ‖_∞ · √(2 KL)`.
pub fn ckp_bound(ess_sup_phi: f64, path_kl: f64) -> f64 {
    ess_sup_phi.abs() * (2.0 * path_kl.max(0.0)).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceReport {
    pub rer_forward: f64,
    pub rer_reverse: f64,
    pub path_kl_forward: f64,
    pub path_kl_reverse: f64,
    pub gibbs_kl_forward: f64,
    pub gibbs_kl_reverse: f64,
    pub go_bound_forward: f64,
    pub go_bound_reverse: f64,
    pub ckp_bound: Option<f64>,
    pub abs_error_observable: Option<f64>,
}
