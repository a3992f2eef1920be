//! Parametric potentials `V_θ` and their derivatives.
//!
//! The drift of every overdamped Langevin system here is `b = -∇ₓV`. The
//! gradient estimators additionally need `∇_θ V` and the mixed Jacobian
//! `J_θ = ∂_θ b_θ = -∂_θ ∇ₓ V_θ` (an `m × d` matrix, stored row-major).

mod double_well;
mod gmm;
mod mlp;
mod muller_brown;
mod quadratic;

use std::fmt;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Result};

pub use double_well::DoubleWell;
pub use gmm::GaussianMixture;
pub use mlp::{MlpConfig, MlpPotential};
pub use muller_brown::MullerBrown;
pub use quadratic::Quadratic;

pub trait Potential: Send + Sync + fmt::Debug {
    /// State dimension `m`.
    fn dim(&self) -> usize;

    /// Trainable parameters `θ` (empty for fixed reference potentials).
    fn params(&self) -> &[f64];

    fn n_params(&self) -> usize {
        self.params().len()
    }

    fn value(&self, x: &[f64]) -> f64;

    /// Writes `-∇ₓV(x)` into `out` (length `m`).
    fn drift(&self, x: &[f64], out: &mut [f64]);

    /// Writes `∇_θ V(x)` into `out` (length `d`).
    fn grad_params(&self, x: &[f64], out: &mut [f64]);

    /// Writes `J_θ(x)` row-major into `out` (length `m·d`); entry `(k, j)` is
    /// `∂ b_k / ∂θ_j`.
    fn jacobian(&self, x: &[f64], out: &mut [f64]);

    /// Writes `J_θ(x)ᵀ v` into `out` (length `d`).
    fn jacobian_t_vec(&self, x: &[f64], v: &[f64], out: &mut [f64]) {
        let (m, d) = (self.dim(), self.n_params());
        let mut jac = vec![0.0; m * d];
        self.jacobian(x, &mut jac);
        out.fill(0.0);
        for (k, vk) in v.iter().enumerate() {
            for (o, j) in out.iter_mut().zip(&jac[k * d..(k + 1) * d]) {
                *o += vk * j;
            }
        }
    }
}

/// Serializable union of every potential family in the crate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AnyPotential {
    DoubleWell(DoubleWell),
    GaussianMixture(GaussianMixture),
    Mlp(MlpPotential),
    MullerBrown(MullerBrown),
    Quadratic(Quadratic),
}

macro_rules! dispatch {
    ($self:ident, $p:ident => $e:expr) => {
        match $self {
            AnyPotential::DoubleWell($p) => $e,
            AnyPotential::GaussianMixture($p) => $e,
            AnyPotential::Mlp($p) => $e,
            AnyPotential::MullerBrown($p) => $e,
            AnyPotential::Quadratic($p) => $e,
        }
    };
}

impl AnyPotential {
    /// Same model family and hyper-parameters, new `θ`.
    pub fn with_params(&self, theta: &[f64]) -> Result<Self> {
        check_dim(self.n_params(), theta.len())?;
        let mut out = self.clone();
        match &mut out {
            AnyPotential::DoubleWell(p) => p.theta = theta[0],
            AnyPotential::GaussianMixture(p) => p.theta.copy_from_slice(theta),
            AnyPotential::Mlp(p) => p.set_params(theta),
            AnyPotential::MullerBrown(_) => {}
            AnyPotential::Quadratic(p) => p.stiffness[0] = theta[0],
        }
        Ok(out)
    }

    pub fn name(&self) -> &'static str {
        match self {
            AnyPotential::DoubleWell(_) => "double_well",
            AnyPotential::GaussianMixture(_) => "gaussian_mixture",
            AnyPotential::Mlp(_) => "mlp",
            AnyPotential::MullerBrown(_) => "muller_brown",
            AnyPotential::Quadratic(_) => "quadratic",
        }
    }
}

impl Potential for AnyPotential {
    fn dim(&self) -> usize {
        dispatch!(self, p => p.dim())
    }
    fn params(&self) -> &[f64] {
        dispatch!(self, p => p.params())
    }
    fn value(&self, x: &[f64]) -> f64 {
        dispatch!(self, p => p.value(x))
    }
    fn drift(&self, x: &[f64], out: &mut [f64]) {
        dispatch!(self, p => p.drift(x, out))
    }
    fn grad_params(&self, x: &[f64], out: &mut [f64]) {
        dispatch!(self, p => p.grad_params(x, out))
    }
    fn jacobian(&self, x: &[f64], out: &mut [f64]) {
        dispatch!(self, p => p.jacobian(x, out))
    }
    fn jacobian_t_vec(&self, x: &[f64], v: &[f64], out: &mut [f64]) {
        dispatch!(self, p => p.jacobian_t_vec(x, v, out))
    }
}

/// Stable 64-bit fingerprint of a parameter vector, used to detect paths that
/// were simulated under a stale `θ`.
pub fn fingerprint(theta: &[f64]) -> u64 {
    theta.iter().fold(0xcbf2_9ce4_8422_2325_u64, |h, t| {
        crate::rng::mix64(h ^ t.to_bits())
    })
}

pub fn value<P: Potential + ?Sized>(model: &P, x: &[f64]) -> Result<f64> {
    check_dim(model.dim(), x.len())?;
    Ok(model.value(x))
}

pub fn drift<P: Potential + ?Sized>(model: &P, x: &[f64]) -> Result<Vec<f64>> {
    check_dim(model.dim(), x.len())?;
    let mut out = vec![0.0; model.dim()];
    model.drift(x, &mut out);
    Ok(out)
}

pub fn grad_theta_value<P: Potential + ?Sized>(model: &P, x: &[f64]) -> Result<Vec<f64>> {
    check_dim(model.dim(), x.len())?;
    let mut out = vec![0.0; model.n_params()];
    model.grad_params(x, &mut out);
    Ok(out)
}

/// `J_θ(x)` as an `m × d` matrix.
pub fn jacobian<P: Potential + ?Sized>(model: &P, x: &[f64]) -> Result<Array2<f64>> {
    check_dim(model.dim(), x.len())?;
    let (m, d) = (model.dim(), model.n_params());
    let mut out = vec![0.0; m * d];
    model.jacobian(x, &mut out);
    Ok(Array2::from_shape_vec((m, d), out).expect("shape matches buffer"))
}

/// `x ↦ V(x)` for a 1-D model.
pub fn scalar_value<P: Potential + ?Sized>(model: &P) -> impl Fn(f64) -> f64 + '_ {
    move |x| model.value(&[x])
}

/// `x ↦ b(x)` for a 1-D model.
pub fn scalar_drift<P: Potential + ?Sized>(model: &P) -> impl Fn(f64) -> f64 + '_ {
    move |x| {
        let mut o = [0.0];
        model.drift(&[x], &mut o);
        o[0]
    }
}

#[cfg(test)]
pub(crate) mod testing {
    //! Central-difference oracles shared by the per-model tests.
    use super::*;

    pub fn fd_drift(p: &AnyPotential, x: &[f64], h: f64) -> Vec<f64> {
        (0..x.len())
            .map(|k| {
                let mut xp = x.to_vec();
                let mut xm = x.to_vec();
                xp[k] += h;
                xm[k] -= h;
                -(p.value(&xp) - p.value(&xm)) / (2.0 * h)
            })
            .collect()
    }

    pub fn fd_grad_params(p: &AnyPotential, x: &[f64], h: f64) -> Vec<f64> {
        let theta = p.params().to_vec();
        (0..theta.len())
            .map(|j| {
                let mut tp = theta.clone();
                let mut tm = theta.clone();
                tp[j] += h;
                tm[j] -= h;
                let vp = p.with_params(&tp).unwrap().value(x);
                let vm = p.with_params(&tm).unwrap().value(x);
                (vp - vm) / (2.0 * h)
            })
            .collect()
    }

    /// Row-major `m × d` finite-difference Jacobian of the drift in `θ`.
    pub fn fd_jacobian(p: &AnyPotential, x: &[f64], h: f64) -> Vec<f64> {
        let (m, d) = (p.dim(), p.n_params());
        let theta = p.params().to_vec();
        let mut out = vec![0.0; m * d];
        for j in 0..d {
            let mut tp = theta.clone();
            let mut tm = theta.clone();
            tp[j] += h;
            tm[j] -= h;
            let bp = drift(&p.with_params(&tp).unwrap(), x).unwrap();
            let bm = drift(&p.with_params(&tm).unwrap(), x).unwrap();
            for k in 0..m {
                out[k * d + j] = (bp[k] - bm[k]) / (2.0 * h);
            }
        }
        out
    }

    pub fn assert_close(a: &[f64], b: &[f64], rel: f64, abs: f64, what: &str) {
        assert_eq!(a.len(), b.len(), "{what}: length");
        for (i, (x, y)) in a.iter().zip(b).enumerate() {
            let tol = abs + rel * x.abs().max(y.abs());
            assert!((x - y).abs() <= tol, "{what}[{i}]: {x} vs {y} (tol {tol})");
        }
    }
}

#[cfg(test)]
mod tests {
    use super::testing::*;
    use super::*;

    fn models() -> Vec<(AnyPotential, Vec<Vec<f64>>)> {
        let gmm = GaussianMixture::reference();
        let mlp = MlpPotential::init(
            MlpConfig {
                input_dim: 2,
                hidden: vec![5, 4],
                quartic_coeff: 0.2,
                quartic_center: vec![-0.1, 0.8],
            },
            3,
        );
        vec![
            (
                AnyPotential::DoubleWell(DoubleWell::new(0.3)),
                vec![vec![-1.3], vec![0.2], vec![0.9]],
            ),
            (
                AnyPotential::GaussianMixture(gmm),
                vec![vec![-1.1], vec![-0.2], vec![0.7], vec![1.4]],
            ),
            (
                AnyPotential::Mlp(mlp),
                vec![vec![-0.5, 0.4], vec![0.3, 1.2], vec![0.0, 0.0]],
            ),
            (
                AnyPotential::MullerBrown(MullerBrown::scaled(0.03)),
                vec![vec![-0.55, 0.45], vec![0.6, 0.1]],
            ),
            (
                AnyPotential::Quadratic(Quadratic::new(2, 1.7)),
                vec![vec![0.4, -0.3]],
            ),
        ]
    }

    #[test]
    fn drift_matches_finite_differences() {
        for (p, xs) in models() {
            for x in xs {
                let b = drift(&p, &x).unwrap();
                assert_close(&b, &fd_drift(&p, &x, 1e-5), 1e-6, 1e-7, p.name());
            }
        }
    }

    #[test]
    fn grad_params_matches_finite_differences() {
        for (p, xs) in models() {
            for x in xs {
                let g = grad_theta_value(&p, &x).unwrap();
                assert_close(&g, &fd_grad_params(&p, &x, 1e-6), 1e-6, 1e-8, p.name());
            }
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        for (p, xs) in models() {
            let tol = if matches!(p, AnyPotential::Mlp(_)) {
                1e-4
            } else {
                1e-6
            };
            for x in xs {
                let j = jacobian(&p, &x).unwrap();
                let fd = fd_jacobian(&p, &x, 1e-6);
                assert_close(j.as_slice().unwrap(), &fd, tol, 1e-7, p.name());
            }
        }
    }

    #[test]
    fn jacobian_t_vec_agrees_with_matrix() {
        for (p, xs) in models() {
            let (m, d) = (p.dim(), p.n_params());
            for x in xs {
                let v: Vec<f64> = (0..m).map(|k| 0.7 - 0.4 * k as f64).collect();
                let j = jacobian(&p, &x).unwrap();
                let want: Vec<f64> = (0..d)
                    .map(|c| (0..m).map(|k| j[[k, c]] * v[k]).sum())
                    .collect();
                let mut got = vec![0.0; d];
                p.jacobian_t_vec(&x, &v, &mut got);
                assert_close(&got, &want, 1e-12, 1e-12, p.name());
            }
        }
    }

    #[test]
    fn dim_mismatch_is_reported() {
        let p = AnyPotential::DoubleWell(DoubleWell::new(0.0));
        assert!(matches!(
            value(&p, &[1.0, 2.0]),
            Err(crate::Error::DimMismatch {
                expected: 1,
                got: 2
            })
        ));
        assert!(drift(&p, &[]).is_err());
        assert!(jacobian(&p, &[0.0, 0.0]).is_err());
        assert!(p.with_params(&[0.1, 0.2]).is_err());
    }

    #[test]
    fn models_confine_on_their_boxes() {
        let boxes: Vec<(AnyPotential, f64, f64)> = vec![
            (AnyPotential::DoubleWell(DoubleWell::new(0.5)), -4.0, 4.0),
            (
                AnyPotential::GaussianMixture(GaussianMixture::reference()),
                -4.0,
                4.0,
            ),
            (
                AnyPotential::GaussianMixture(GaussianMixture::initial()),
                -5.0,
                3.0,
            ),
        ];
        for (p, lo, hi) in boxes {
            let vmin = (0..=400)
                .map(|i| p.value(&[lo + (hi - lo) * i as f64 / 400.0]))
                .fold(f64::INFINITY, f64::min);
            assert!(p.value(&[lo]) - vmin > 28.0, "{} at {lo}", p.name());
            assert!(p.value(&[hi]) - vmin > 28.0, "{} at {hi}", p.name());
        }
        let mb = MullerBrown::scaled(0.03);
        let vmin = mb.value(&[-0.558, 1.442]);
        for corner in [[-3.5, -2.0], [3.0, -2.5], [-3.5, 4.0], [3.0, 4.0]] {
            assert!(mb.value(&corner) - vmin > 28.0, "{corner:?}");
        }
    }

    #[test]
    fn fingerprint_tracks_parameters() {
        assert_eq!(fingerprint(&[0.1, 0.2]), fingerprint(&[0.1, 0.2]));
        assert_ne!(fingerprint(&[0.1, 0.2]), fingerprint(&[0.2, 0.1]));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn drift_and_value_lipschitz_in_theta(
                x in -2.0f64..2.0,
                j in 0usize..6,
                eps in 1e-7f64..1e-4,
            ) {
                let p = AnyPotential::GaussianMixture(GaussianMixture::reference());
                let mut t = p.params().to_vec();
                t[j] += eps;
                let q = p.with_params(&t).unwrap();
                let dv = (q.value(&[x]) - p.value(&[x])).abs();
                let db = (drift(&q, &[x]).unwrap()[0] - drift(&p, &[x]).unwrap()[0]).abs();
                // Local Lipschitz constants on |x| ≤ 2 for the reference mixture.
                prop_assert!(dv <= 1e3 * eps);
                prop_assert!(db <= 1e4 * eps);
            }
        }
    }
}
