//! Gradient estimators for the training losses and a finite-difference checker.
//!
//! Second moments are differentiated with the Girsanov weight
//! `∇_θ Ẽ[φ²] = Ẽ[φ² M]`, `M = Σ_t (σ⁻¹J_θ(X_t))ᵀ √δ ξ_t`. Reverse rates use the
//! Gibbs score `∇_θ log π̃_θ = −β(∇_θṼ − E_π̃[∇_θṼ])`, centered on the same batch.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::info::mean_and_se;
use crate::losses::Direction;
use crate::observables::{check_fresh, evaluate_functional, model_martingale, ObservableSpec};
use crate::potentials::{fingerprint, Potential};
use crate::sde::{Drift, PathSample};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientEstimate {
    pub grad: Vec<f64>,
    /// `H · ∇_θ m̃₂`.
    pub g1: Vec<f64>,
    /// `(𝓜_φ + m̃₂) · ∇_θ H`.
    pub g2: Vec<f64>,
    pub std_error: Vec<f64>,
}

/// Per-coordinate mean and standard error of a batch of vectors.
fn vector_mean_se(rows: &[Vec<f64>], d: usize) -> (Vec<f64>, Vec<f64>) {
    (0..d)
        .map(|j| {
            let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            let e = mean_and_se(&col);
            (e.value, e.std_error)
        })
        .unzip()
}

/// `mean_i φ_i² M_i` over paths simulated at the current `θ`, with standard errors.
pub fn grad_second_moment<P: Potential + ?Sized>(
    spec: &ObservableSpec,
    model: &P,
    paths: &[PathSample],
    sigma: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if paths.is_empty() {
        return Err(Error::EmptyDataset);
    }
    check_fresh(paths, fingerprint(model.params()))?;
    let rows = paths
        .iter()
        .map(|p| {
            let phi = evaluate_functional(spec, p)?;
            let m = model_martingale(p, model, sigma)?;
            Ok(m.into_iter().map(|v| phi * phi * v).collect())
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    Ok(vector_mean_se(&rows, model.n_params()))
}

/// Same estimator from streamed `(φ, M)` pairs.
pub fn grad_second_moment_from_parts(
    phis: &[f64],
    martingales: &[Vec<f64>],
    d: usize,
) -> (Vec<f64>, Vec<f64>) {
    let rows: Vec<Vec<f64>> = phis
        .iter()
        .zip(martingales)
        .map(|(phi, m)| m.iter().map(|v| phi * phi * v).collect())
        .collect();
    vector_mean_se(&rows, d)
}

/// Rate `H` and its gradient on weighted states.
#[derive(Debug, Clone, PartialEq)]
pub struct RerGradient {
    pub value: f64,
    pub grad: Vec<f64>,
}

/// `H = ½ Σ w_j ‖σ⁻¹(b − b̃)(x_j)‖²` and `∇_θ H`; `b_ref[j] = b(x_j)`. Uniform
/// weights when `weights` is `None`. In the reverse direction the states are
/// taken to follow `π̃_θ` and the centered Gibbs score term is added.
pub fn rer_gradient<P: Potential + ?Sized>(
    direction: Direction,
    model: &P,
    b_ref: &[Vec<f64>],
    states: &[Vec<f64>],
    weights: Option<&[f64]>,
    beta: f64,
) -> Result<RerGradient> {
    let n = states.len();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    check_dim(n, b_ref.len())?;
    if let Some(w) = weights {
        check_dim(n, w.len())?;
    }
    let (m, d) = (model.dim(), model.n_params());
    let w = |j: usize| weights.map_or(1.0 / n as f64, |w| w[j]);
    let mut bt = vec![0.0; m];
    let mut v = vec![0.0; m];
    let mut jt = vec![0.0; d];
    let mut gv = vec![0.0; d];
    let mut value = 0.0;
    let mut grad = vec![0.0; d];
    // Score pieces: Σ w s_j ∇Ṽ_j and Σ w ∇Ṽ_j with s_j = ½‖σ⁻¹u_j‖².
    let mut s_gv = vec![0.0; d];
    let mut mean_gv = vec![0.0; d];
    for (j, (x, b)) in states.iter().zip(b_ref).enumerate() {
        check_dim(m, x.len())?;
        model.drift(x, &mut bt);
        let mut s = 0.0;
        for k in 0..m {
            let diff = bt[k] - b[k];
            s += diff * diff;
            v[k] = beta / 2.0 * diff;
        }
        s *= beta / 4.0;
        value += w(j) * s;
        model.jacobian_t_vec(x, &v, &mut jt);
        for (g, t) in grad.iter_mut().zip(&jt) {
            *g += w(j) * t;
        }
        if direction == Direction::Reverse {
            model.grad_params(x, &mut gv);
            for k in 0..d {
                s_gv[k] += w(j) * s * gv[k];
                mean_gv[k] += w(j) * gv[k];
            }
        }
    }
    if direction == Direction::Reverse {
        for k in 0..d {
            grad[k] += -beta * (s_gv[k] - value * mean_gv[k]);
        }
    }
    Ok(RerGradient { value, grad })
}

/// `mean J_θᵀ (β/2)(b̃_θ − b)` over θ-independent states.
pub fn grad_rer_forward<P: Potential + ?Sized>(
    model: &P,
    b_ref: &[Vec<f64>],
    states: &[Vec<f64>],
    beta: f64,
) -> Result<Vec<f64>> {
    Ok(rer_gradient(Direction::Forward, model, b_ref, states, None, beta)?.grad)
}

/// Reverse-rate gradient on states drawn from `π̃_θ`; the reference drift is
/// evaluated on the batch.
pub fn grad_rer_reverse<P: Potential + ?Sized>(
    model: &P,
    drift_ref: &dyn Drift,
    states: &[Vec<f64>],
    beta: f64,
) -> Result<Vec<f64>> {
    let b_ref = reference_drifts(drift_ref, states);
    Ok(rer_gradient(Direction::Reverse, model, &b_ref, states, None, beta)?.grad)
}

pub fn reference_drifts(drift_ref: &dyn Drift, states: &[Vec<f64>]) -> Vec<Vec<f64>> {
    states
        .iter()
        .map(|x| {
            let mut o = vec![0.0; drift_ref.dim()];
            drift_ref.eval(x, &mut o);
            o
        })
        .collect()
}

/// `T(H ∇m̃₂ + (𝓜_φ + m̃₂)∇H)`, with `𝓜_φ` held fixed.
pub fn grad_go_loss(
    t: f64,
    m_phi: f64,
    second_moment: f64,
    grad_second_moment: &[f64],
    grad_second_moment_se: &[f64],
    rer: &RerGradient,
) -> GradientEstimate {
    let g1: Vec<f64> = grad_second_moment.iter().map(|g| rer.value * g).collect();
    let g2: Vec<f64> = rer
        .grad
        .iter()
        .map(|g| (m_phi + second_moment) * g)
        .collect();
    let grad = g1.iter().zip(&g2).map(|(a, b)| t * (a + b)).collect();
    let std_error = grad_second_moment_se
        .iter()
        .map(|s| t * rer.value * s)
        .collect();
    GradientEstimate {
        grad,
        g1,
        g2,
        std_error,
    }
}

/// `∇ mean |V − Ṽ|² = −2 mean (V − Ṽ) ∇_θṼ`.
pub fn grad_em<P: Potential + ?Sized>(
    v_ref: &[f64],
    model: &P,
    states: &[Vec<f64>],
) -> Result<Vec<f64>> {
    if states.is_empty() {
        return Err(Error::EmptyDataset);
    }
    check_dim(states.len(), v_ref.len())?;
    let d = model.n_params();
    let mut g = vec![0.0; d];
    let mut gv = vec![0.0; d];
    let n = states.len() as f64;
    for (x, v) in states.iter().zip(v_ref) {
        let r = v - model.value(x);
        model.grad_params(x, &mut gv);
        for (a, b) in g.iter_mut().zip(&gv) {
            *a += -2.0 * r * b / n;
        }
    }
    Ok(g)
}

/// `∇ mean ‖b − b̃‖² = 2 mean J_θᵀ(b̃ − b)`.
pub fn grad_fm<P: Potential + ?Sized>(
    b_ref: &[Vec<f64>],
    model: &P,
    states: &[Vec<f64>],
) -> Result<Vec<f64>> {
    // H uses (β/4)|u|², so β = 4 turns it into the plain mean square.
    rer_gradient(Direction::Forward, model, b_ref, states, None, 4.0).map(|r| r.grad)
}

/// Frozen-path reweighting: the surrogate second moment at `θ'` estimated on
/// paths simulated at `θ`, `mean φ² exp(log LR)`. Its derivative at `θ' = θ`
/// is exactly [`grad_second_moment`] on the same paths.
pub fn reweighted_second_moment<P: Potential + ?Sized, Q: Potential + ?Sized>(
    spec: &ObservableSpec,
    sampled_under: &P,
    evaluate_at: &Q,
    paths: &[PathSample],
    sigma: f64,
) -> Result<f64> {
    if paths.is_empty() {
        return Err(Error::EmptyDataset);
    }
    check_fresh(paths, fingerprint(sampled_under.params()))?;
    let m = sampled_under.dim();
    let (mut b0, mut b1) = (vec![0.0; m], vec![0.0; m]);
    let mut total = 0.0;
    for p in paths {
        let phi = evaluate_functional(spec, p)?;
        let mut log_lr = 0.0;
        for k in 0..p.stop_index {
            let x = p.state(k);
            let xi = p.xi(k).ok_or(Error::MissingNoise)?;
            sampled_under.drift(x, &mut b0);
            evaluate_at.drift(x, &mut b1);
            for c in 0..m {
                let w = (b1[c] - b0[c]) / sigma;
                log_lr += p.dt.sqrt() * w * xi[c] - 0.5 * p.dt * w * w;
            }
        }
        total += phi * phi * log_lr.exp();
    }
    Ok(total / paths.len() as f64)
}

/// Self-normalized importance reweighting of a reverse-rate batch drawn from
/// `π̃` at `sampled_under` to `evaluate_at`: weights `∝ e^{−β(Ṽ' − Ṽ)}`.
pub fn reweighted_reverse_rer<P: Potential + ?Sized, Q: Potential + ?Sized>(
    sampled_under: &P,
    evaluate_at: &Q,
    b_ref: &[Vec<f64>],
    states: &[Vec<f64>],
    beta: f64,
) -> Result<f64> {
    let logw: Vec<f64> = states
        .iter()
        .map(|x| -beta * (evaluate_at.value(x) - sampled_under.value(x)))
        .collect();
    let top = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logw.iter().map(|l| (l - top).exp()).collect();
    let z: f64 = w.iter().sum();
    let w: Vec<f64> = w.iter().map(|v| v / z).collect();
    Ok(rer_gradient(
        Direction::Forward,
        evaluate_at,
        b_ref,
        states,
        Some(&w),
        beta,
    )?
    .value)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FdMode {
    Deterministic,
    CommonRandomNumbers,
}

impl FdMode {
    pub fn as_str(self) -> &'static str {
        match self {
            FdMode::Deterministic => "deterministic",
            FdMode::CommonRandomNumbers => "common_random_numbers",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckRow {
    pub coordinate: usize,
    pub analytic: f64,
    pub fd: f64,
    pub rel_err: f64,
    pub mode: FdMode,
}

/// Central differences of `loss` around `theta`. In CRN mode the closure must
/// reuse its frozen randomness across calls.
pub fn fd_gradient(
    loss: &mut dyn FnMut(&[f64]) -> Result<f64>,
    theta: &[f64],
    h: f64,
) -> Result<Vec<f64>> {
    if !(h > 0.0) {
        return Err(Error::config(format!("step must be positive, got {h}")));
    }
    (0..theta.len())
        .map(|i| {
            let mut tp = theta.to_vec();
            let mut tm = theta.to_vec();
            tp[i] += h;
            tm[i] -= h;
            Ok((loss(&tp)? - loss(&tm)?) / (2.0 * h))
        })
        .collect()
}

/// Compares `analytic` with central differences; the relative error of each
/// coordinate is measured against `max(|fd_i|, floor·‖fd‖_∞)`.
pub fn fd_gradient_check(
    loss: &mut dyn FnMut(&[f64]) -> Result<f64>,
    theta: &[f64],
    h: f64,
    analytic: &[f64],
    mode: FdMode,
    floor: f64,
) -> Result<Vec<GradCheckRow>> {
    check_dim(theta.len(), analytic.len())?;
    let fd = fd_gradient(loss, theta, h)?;
    let scale = fd.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    Ok(fd
        .iter()
        .zip(analytic)
        .enumerate()
        .map(|(i, (&f, &a))| {
            let denom = f.abs().max(floor * scale).max(f64::MIN_POSITIVE);
            GradCheckRow {
                coordinate: i,
                analytic: a,
                fd: f,
                rel_err: if a == f { 0.0 } else { (a - f).abs() / denom },
                mode,
            }
        })
        .collect())
}

/// Rows `(coordinate, analytic, fd, rel_err, mode)`.
pub fn write_grad_check_csv<W: Write>(rows: &[GradCheckRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["coordinate", "analytic", "fd", "rel_err", "mode"])?;
    for r in rows {
        out.write_record([
            r.coordinate.to_string(),
            r.analytic.to_string(),
            r.fd.to_string(),
            r.rel_err.to_string(),
            r.mode.as_str().to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::losses::{em_loss, empirical_rer, fm_loss, go_loss_from_parts, Oracle1D};
    use crate::potentials::{AnyPotential, DoubleWell, GaussianMixture};
    use crate::sde::{simulate_batch, Region, SdeSystem};

    fn oracle() -> Oracle1D {
        Oracle1D {
            beta: 1.0,
            x0: -1.0,
            x_exit: 1.0,
            n_grid: 4001,
            n_quad: 200,
            search: (-6.0, 6.0),
        }
    }

    fn dw_states(n: usize) -> Vec<Vec<f64>> {
        (0..n)
            .map(|i| vec![-2.0 + 4.0 * i as f64 / (n - 1) as f64])
            .collect()
    }

    #[test]
    fn fd_of_quadratic_loss_is_exact() {
        let theta = [0.3, -1.2, 2.0];
        let rows = fd_gradient_check(
            &mut |t| Ok(t.iter().map(|v| v * v).sum::<f64>() / 2.0),
            &theta,
            1e-3,
            &theta,
            FdMode::Deterministic,
            0.0,
        )
        .unwrap();
        assert!(rows.iter().all(|r| r.rel_err < 1e-10));
        let mut buf = Vec::new();
        write_grad_check_csv(&rows, &mut buf).unwrap();
        assert!(String::from_utf8(buf)
            .unwrap()
            .starts_with("coordinate,analytic,fd,rel_err,mode\n"));
    }

    #[test]
    fn batch_gradients_are_exact_derivatives() {
        let r = DoubleWell::new(0.5);
        let xs = dw_states(25);
        let b = reference_drifts(&r, &xs);
        let v: Vec<f64> = xs.iter().map(|x| r.value(x)).collect();
        let beta = 1.3;
        for theta in [0.1, 0.8] {
            let s = AnyPotential::DoubleWell(DoubleWell::new(theta));
            let at = |t: &[f64]| s.with_params(t).unwrap();
            type Loss<'a> = Box<dyn FnMut(&[f64]) -> Result<f64> + 'a>;
            let checks: Vec<(Vec<f64>, Loss)> = vec![
                (
                    grad_rer_forward(&s, &b, &xs, beta).unwrap(),
                    Box::new(|t: &[f64]| empirical_rer(&b, &at(t), &xs, beta)),
                ),
                (
                    grad_fm(&b, &s, &xs).unwrap(),
                    Box::new(|t: &[f64]| fm_loss(&b, &at(t), &xs)),
                ),
                (
                    grad_em(&v, &s, &xs).unwrap(),
                    Box::new(|t: &[f64]| em_loss(&v, &at(t), &xs)),
                ),
            ];
            for (g, mut f) in checks {
                let rows =
                    fd_gradient_check(f.as_mut(), &[theta], 1e-5, &g, FdMode::Deterministic, 0.0)
                        .unwrap();
                assert!(rows[0].rel_err < 1e-8, "{rows:?}");
            }
        }
    }

    #[test]
    fn zero_gradients_at_reference() {
        let r = DoubleWell::new(0.5);
        let xs = dw_states(10);
        let b = reference_drifts(&r, &xs);
        assert_eq!(grad_rer_forward(&r, &b, &xs, 1.0).unwrap(), vec![0.0]);
        assert_eq!(grad_rer_reverse(&r, &r, &xs, 1.0).unwrap(), vec![0.0]);
        let rg = rer_gradient(Direction::Forward, &r, &b, &xs, None, 1.0).unwrap();
        let est = grad_go_loss(10.0, 3.0, 2.0, &[0.7], &[0.1], &rg);
        assert_eq!(est.grad, vec![0.0]);
    }

    #[test]
    fn go_assembly_identity() {
        let rg = RerGradient {
            value: 0.3,
            grad: vec![1.0, -2.0],
        };
        let est = grad_go_loss(7.0, 1.5, 2.5, &[0.4, 0.9], &[0.0, 0.0], &rg);
        for k in 0..2 {
            assert_eq!(est.grad[k], 7.0 * (est.g1[k] + est.g2[k]));
        }
        assert!((est.g1[1] - 0.27).abs() < 1e-15 && (est.g2[1] + 8.0).abs() < 1e-15);
    }

    #[test]
    fn quadrature_rer_gradients_match_finite_differences() {
        let o = oracle();
        let r = GaussianMixture::reference();
        let s = AnyPotential::GaussianMixture(GaussianMixture::initial());
        let theta = s.params().to_vec();
        for dir in [Direction::Forward, Direction::Reverse] {
            let q = match dir {
                Direction::Forward => o.gibbs(&r).unwrap(),
                Direction::Reverse => o.gibbs(&s).unwrap(),
            };
            let xs: Vec<Vec<f64>> = q.nodes.iter().map(|&x| vec![x]).collect();
            let b = reference_drifts(&r, &xs);
            let g = rer_gradient(dir, &s, &b, &xs, Some(&q.probs), 1.0).unwrap();
            let bounds = q.bounds;
            let mut loss = |t: &[f64]| -> Result<f64> {
                let st = s.with_params(t)?;
                let q = match dir {
                    Direction::Forward => q.clone(),
                    Direction::Reverse => crate::quadrature::GibbsQuadrature::new(
                        &crate::potentials::scalar_value(&st),
                        1.0,
                        200,
                        bounds,
                    )?,
                };
                let xs: Vec<Vec<f64>> = q.nodes.iter().map(|&x| vec![x]).collect();
                Ok(rer_gradient(Direction::Forward, &st, &b, &xs, Some(&q.probs), 1.0)?.value)
            };
            let rows = fd_gradient_check(
                &mut loss,
                &theta,
                1e-6,
                &g.grad,
                FdMode::Deterministic,
                1e-3,
            )
            .unwrap();
            assert!(rows.iter().all(|r| r.rel_err < 1e-5), "{dir:?}: {rows:?}");
        }
    }

    #[test]
    fn deterministic_go_loss_gradient_matches_fd() {
        let o = oracle();
        let r = DoubleWell::new(0.5);
        let s = AnyPotential::DoubleWell(DoubleWell::new(0.2));
        let t = 10.0;
        let (_, m2_ref) = o.exit_moments(&r).unwrap();
        let q = o.gibbs(&r).unwrap();
        let xs: Vec<Vec<f64>> = q.nodes.iter().map(|&x| vec![x]).collect();
        let b = reference_drifts(&r, &xs);
        let loss = |th: &[f64]| -> Result<f64> {
            let st = s.with_params(th)?;
            let (_, m2) = o.exit_moments(&st)?;
            let h = rer_gradient(Direction::Forward, &st, &b, &xs, Some(&q.probs), 1.0)?.value;
            Ok(go_loss_from_parts(t, m2_ref, m2, h).value)
        };
        // ∇m̃₂ from a fine central difference of the oracle; the rest analytic.
        let rg = rer_gradient(Direction::Forward, &s, &b, &xs, Some(&q.probs), 1.0).unwrap();
        let (_, m2) = o.exit_moments(&s).unwrap();
        let eps = 1e-4;
        let dm2 = (o
            .exit_moments(&s.with_params(&[0.2 + eps]).unwrap())
            .unwrap()
            .1
            - o.exit_moments(&s.with_params(&[0.2 - eps]).unwrap())
                .unwrap()
                .1)
            / (2.0 * eps);
        let est = grad_go_loss(t, m2_ref, m2, &[dm2], &[0.0], &rg);
        let mut l = loss;
        let rows =
            fd_gradient_check(&mut l, &[0.2], 1e-3, &est.grad, FdMode::Deterministic, 0.0).unwrap();
        assert!(rows[0].rel_err < 1e-5, "{rows:?}");
    }

    #[test]
    fn score_function_gradient_of_gaussian_second_moment() {
        // V_θ = θx²/2: E[x²] = 1/(βθ), so d/dθ E[x²] = −1/(βθ²).
        let (theta, beta, n) = (1.5, 1.0, 20_000);
        let v = |x: f64| theta * x * x / 2.0;
        let mut rng = crate::rng::RngStream::new(8, 0).rng();
        let xs = crate::quadrature::sample_gibbs_1d(&v, beta, (-10.0, 10.0), n, &mut rng).unwrap();
        let gv: Vec<f64> = xs.iter().map(|x| x * x / 2.0).collect();
        let mean_gv = gv.iter().sum::<f64>() / n as f64;
        let terms: Vec<f64> = xs
            .iter()
            .zip(&gv)
            .map(|(x, g)| x * x * (-beta * (g - mean_gv)))
            .collect();
        let e = mean_and_se(&terms);
        let want = -1.0 / (beta * theta * theta);
        assert!(
            (e.value - want).abs() < 3.0 * e.std_error,
            "{e:?} vs {want}"
        );
    }

    #[test]
    fn second_moment_gradient_matches_frozen_path_reweighting() {
        let model = Arc::new(AnyPotential::DoubleWell(DoubleWell::new(0.5)));
        let sys = SdeSystem::from_potential(model.clone(), 1.0, vec![-1.0]).unwrap();
        let spec = ObservableSpec::first_exit(
            Region::Interval {
                lo: None,
                hi: Some(1.0),
            },
            100.0,
        );
        let paths = simulate_batch(&sys, &spec.stop_rule(), spec.t_cap, 1e-2, 200, 4).unwrap();
        let (g, _) = grad_second_moment(&spec, model.as_ref(), &paths, sys.sigma).unwrap();
        let mut loss = |t: &[f64]| {
            let m = model.with_params(t)?;
            reweighted_second_moment(&spec, model.as_ref(), &m, &paths, sys.sigma)
        };
        let rows = fd_gradient_check(
            &mut loss,
            &[0.5],
            1e-4,
            &g,
            FdMode::CommonRandomNumbers,
            0.0,
        )
        .unwrap();
        assert!(rows[0].rel_err < 1e-6, "{rows:?}");
        let stale = AnyPotential::DoubleWell(DoubleWell::new(0.3));
        assert!(matches!(
            grad_second_moment(&spec, &stale, &paths, sys.sigma),
            Err(Error::StalePath)
        ));
    }

    #[test]
    fn reverse_batch_gradient_matches_importance_reweighting() {
        let r = DoubleWell::new(0.5);
        let s = AnyPotential::DoubleWell(DoubleWell::new(0.1));
        let xs = dw_states(40);
        let b = reference_drifts(&r, &xs);
        let g = grad_rer_reverse(&s, &r, &xs, 1.0).unwrap();
        let mut loss = |t: &[f64]| reweighted_reverse_rer(&s, &s.with_params(t)?, &b, &xs, 1.0);
        let rows = fd_gradient_check(
            &mut loss,
            &[0.1],
            1e-5,
            &g,
            FdMode::CommonRandomNumbers,
            0.0,
        )
        .unwrap();
        assert!(rows[0].rel_err < 1e-7, "{rows:?}");
    }

    #[test]
    fn constant_observable_gradient_has_zero_mean() {
        let model = Arc::new(AnyPotential::DoubleWell(DoubleWell::new(0.5)));
        let sys = SdeSystem::from_potential(model.clone(), 1.0, vec![-1.0]).unwrap();
        // Capped before anything exits: φ ≡ T_cap.
        let spec = ObservableSpec::first_exit(
            Region::Interval {
                lo: None,
                hi: Some(50.0),
            },
            0.5,
        );
        let paths = simulate_batch(&sys, &spec.stop_rule(), spec.t_cap, 1e-2, 4000, 6).unwrap();
        let (g, se) = grad_second_moment(&spec, model.as_ref(), &paths, sys.sigma).unwrap();
        assert!(g[0].abs() < 3.0 * se[0], "{g:?} ± {se:?}");
    }
}
