//! Exit-time moments from the Feynman–Kac boundary-value problem in 1-D.
//!
//! With generator `L = β⁻¹ d²/dx² + b d/dx`, the exit-time moments solve
//! `L m1 = −1` and `L m2 = −2 m1` with `m = 0` where the process exits.
//! Expectations of additive functionals `∫₀^τ g(X_s) ds` solve `L k = −g`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeftBoundary {
    /// Artificial truncation with a zero-derivative condition.
    NoFlux,
    /// The process also exits at `x_min`.
    Dirichlet,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    pub x_min: f64,
    /// The exit boundary.
    pub x_max: f64,
    pub n_nodes: usize,
    pub left: LeftBoundary,
}

impl Grid1D {
    pub fn new(x_min: f64, x_max: f64, n_nodes: usize, left: LeftBoundary) -> Result<Self> {
        if !(x_min < x_max) || n_nodes < 3 {
            return Err(Error::config(format!(
                "grid needs x_min < x_max and ≥ 3 nodes (got [{x_min}, {x_max}], {n_nodes})"
            )));
        }
        Ok(Self {
            x_min,
            x_max,
            n_nodes,
            left,
        })
    }

    /// Grid for exit through `x_exit` from the left, truncated where the
    /// Gibbs density of `v` has fallen below `e^{-30}` of its running minimum.
    pub fn for_exit(
        v: &dyn Fn(f64) -> f64,
        beta: f64,
        x_exit: f64,
        n_nodes: usize,
    ) -> Result<Self> {
        let step = 1e-3;
        let mut vmin = v(x_exit);
        let mut x = x_exit;
        for _ in 0..200_000 {
            x -= step;
            let vx = v(x);
            vmin = vmin.min(vx);
            if beta * (vx - vmin) > 30.0 {
                return Self::new(x, x_exit, n_nodes, LeftBoundary::NoFlux);
            }
        }
        Err(Error::config(
            "potential does not confine to the left of the exit point",
        ))
    }

    pub fn h(&self) -> f64 {
        (self.x_max - self.x_min) / (self.n_nodes - 1) as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        let h = self.h();
        (0..self.n_nodes)
            .map(|i| self.x_min + h * i as f64)
            .collect()
    }

    pub fn refined(&self) -> Self {
        Self {
            n_nodes: 2 * self.n_nodes - 1,
            ..*self
        }
    }
}

/// Solves `β⁻¹ u'' + b u' = rhs` on the grid with `u(x_max) = 0` and the
/// configured left condition; `drift` and `rhs` are nodal values.
pub fn solve_generator(grid: &Grid1D, beta: f64, drift: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = grid.n_nodes;
    let h = grid.h();
    let diff = 1.0 / (beta * h * h);
    let first = match grid.left {
        LeftBoundary::NoFlux => 0,
        LeftBoundary::Dirichlet => 1,
    };
    let rows = n - 1 - first;
    let mut lower = vec![0.0; rows];
    let mut diag = vec![0.0; rows];
    let mut upper = vec![0.0; rows];
    let mut r = vec![0.0; rows];
    for row in 0..rows {
        let i = row + first;
        let adv = drift[i] / (2.0 * h);
        let (a, c) = (diff - adv, diff + adv);
        diag[row] = -2.0 * diff;
        r[row] = rhs[i];
        if i == 0 {
            // Ghost node u_{-1} = u_1.
            upper[row] = a + c;
        } else {
            lower[row] = a;
            upper[row] = c;
        }
    }
    let sol = thomas(&lower, &diag, &upper, &r)?;
    let mut u = vec![0.0; n];
    u[first..first + rows].copy_from_slice(&sol);
    Ok(u)
}

/// Tridiagonal solve; `lower[0]` and `upper[n-1]` are ignored.
pub fn thomas(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let tiny = 1e-300;
    let mut denom = diag[0];
    if denom.abs() < tiny || !denom.is_finite() {
        return Err(Error::SingularSystem { row: 0 });
    }
    c[0] = upper[0] / denom;
    d[0] = rhs[0] / denom;
    for i in 1..n {
        denom = diag[i] - lower[i] * c[i - 1];
        if denom.abs() < tiny || !denom.is_finite() {
            return Err(Error::SingularSystem { row: i });
        }
        c[i] = upper[i] / denom;
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    Ok(d)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExitMoments {
    pub grid: Grid1D,
    pub m1: Vec<f64>,
    pub m2: Vec<f64>,
}

impl ExitMoments {
    /// `(E[τ], E[τ²])` from `x0` by linear interpolation.
    pub fn at(&self, x0: f64) -> (f64, f64) {
        (
            interp(&self.grid, &self.m1, x0),
            interp(&self.grid, &self.m2, x0),
        )
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["x", "m1", "m2"])?;
        for ((x, a), b) in self.grid.nodes().iter().zip(&self.m1).zip(&self.m2) {
            out.write_record([x.to_string(), a.to_string(), b.to_string()])?;
        }
        out.flush()?;
        Ok(())
    }
}

pub fn interp(grid: &Grid1D, u: &[f64], x: f64) -> f64 {
    let h = grid.h();
    let s = ((x - grid.x_min) / h).clamp(0.0, (grid.n_nodes - 1) as f64);
    let i = (s.floor() as usize).min(grid.n_nodes - 2);
    let t = s - i as f64;
    u[i] * (1.0 - t) + u[i + 1] * t
}

fn nodal_drift(grid: &Grid1D, drift: &dyn Fn(f64) -> f64) -> Result<Vec<f64>> {
    let b: Vec<f64> = grid.nodes().iter().map(|&x| drift(x)).collect();
    if let Some(i) = b.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteDrift {
            step: i,
            path: None,
        });
    }
    Ok(b)
}

/// Fraction of the grid's Gibbs mass in the first cell, from `log π = β∫b`.
pub fn left_cell_mass(grid: &Grid1D, beta: f64, drift: &[f64]) -> f64 {
    let h = grid.h();
    let mut logp = vec![0.0; grid.n_nodes];
    for i in 1..grid.n_nodes {
        logp[i] = logp[i - 1] + beta * h * (drift[i - 1] + drift[i]) / 2.0;
    }
    let top = logp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let p: Vec<f64> = logp.iter().map(|l| (l - top).exp()).collect();
    let total: f64 = p.windows(2).map(|w| (w[0] + w[1]) * h / 2.0).sum();
    (p[0] + p[1]) * h / 2.0 / total
}

pub fn solve_exit_moments(
    drift: &dyn Fn(f64) -> f64,
    beta: f64,
    grid: &Grid1D,
) -> Result<ExitMoments> {
    if !(beta > 0.0) {
        return Err(Error::config(format!("beta must be positive, got {beta}")));
    }
    let b = nodal_drift(grid, drift)?;
    if grid.left == LeftBoundary::NoFlux {
        let mass = left_cell_mass(grid, beta, &b);
        if mass > 1e-6 {
            return Err(Error::BoundaryTooClose { mass });
        }
    }
    let ones = vec![-1.0; grid.n_nodes];
    let m1 = solve_generator(grid, beta, &b, &ones)?;
    let rhs2: Vec<f64> = m1.iter().map(|m| -2.0 * m).collect();
    let m2 = solve_generator(grid, beta, &b, &rhs2)?;
    Ok(ExitMoments {
        grid: *grid,
        m1,
        m2,
    })
}

/// `E[∫₀^τ g(X_s) ds]` as a grid function, under the process with `drift`.
pub fn additive_functional(
    drift: &dyn Fn(f64) -> f64,
    g: &dyn Fn(f64) -> f64,
    beta: f64,
    grid: &Grid1D,
) -> Result<Vec<f64>> {
    let b = nodal_drift(grid, drift)?;
    let rhs: Vec<f64> = grid.nodes().iter().map(|&x| -g(x)).collect();
    solve_generator(grid, beta, &b, &rhs)
}

/// Path KL up to the exit time, `E[∫₀^τ (β/4)|b − b̃|² ds]`, taken under the
/// process driven by `drift_under`.
pub fn path_kl_exit(
    drift_under: &dyn Fn(f64) -> f64,
    drift_other: &dyn Fn(f64) -> f64,
    beta: f64,
    grid: &Grid1D,
    x0: f64,
) -> Result<f64> {
    let g = |x: f64| beta / 4.0 * (drift_under(x) - drift_other(x)).powi(2);
    let k = additive_functional(drift_under, &g, beta, grid)?;
    Ok(interp(grid, &k, x0).max(0.0))
}
