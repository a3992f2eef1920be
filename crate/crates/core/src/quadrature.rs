//! Gauss–Legendre rules and Gibbs-weighted expectations in one dimension.

use crate::error::{Error, Result};

/// Gibbs tails below `exp(-TAIL)` of the peak are dropped (`e^{-27.63} ≈ 1e-12`).
const TAIL: f64 = 27.631_021_115_928_547;

/// `n`-point Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "need at least one node");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_n.
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, z);
        if d != 0.0 {
            dp = d;
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// `(P_n(z), P_n'(z))` by the three-term recurrence.
fn legendre(n: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let n = n as f64;
    (p1, n * (z * p1 - p0) / (z * z - 1.0))
}

/// Nodes and weights mapped to `[a, b]`.
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let (mid, half) = ((a + b) / 2.0, (b - a) / 2.0);
    (
        x.iter().map(|x| mid + half * x).collect(),
        w.iter().map(|w| half * w).collect(),
    )
}

/// Interval where `β(V − V_min) ≤ 27.63`, located by scanning `search` on a
/// fine grid and padding by one scan step.
pub fn gibbs_bounds(v: &dyn Fn(f64) -> f64, beta: f64, search: (f64, f64)) -> (f64, f64) {
    let n = 20_000;
    let step = (search.1 - search.0) / n as f64;
    let xs: Vec<f64> = (0..=n).map(|i| search.0 + step * i as f64).collect();
    let vs: Vec<f64> = xs.iter().map(|&x| v(x)).collect();
    let vmin = vs
        .iter()
        .copied()
        .filter(|v| v.is_finite())
        .fold(f64::INFINITY, f64::min);
    let inside = |i: usize| beta * (vs[i] - vmin) <= TAIL;
    let first = (0..=n).find(|&i| inside(i)).unwrap_or(0);
    let last = (0..=n).rev().find(|&i| inside(i)).unwrap_or(n);
    (
        (xs[first] - step).max(search.0),
        (xs[last] + step).min(search.1),
    )
}

/// Normalized Gibbs weights `∝ w_i e^{-βV(x_i)}` on a Gauss–Legendre rule.
#[derive(Debug, Clone)]
pub struct GibbsQuadrature {
    pub nodes: Vec<f64>,
    /// Probability weights; they sum to one.
    pub probs: Vec<f64>,
    /// `log ∫ e^{-βV}` over the bounds.
    pub log_z: f64,
    pub bounds: (f64, f64),
}

impl GibbsQuadrature {
    pub fn new(
        v: &dyn Fn(f64) -> f64,
        beta: f64,
        n_nodes: usize,
        bounds: (f64, f64),
    ) -> Result<Self> {
        if n_nodes < 2 {
            return Err(Error::config("quadrature needs at least two nodes"));
        }
        let (nodes, w) = gauss_legendre_on(n_nodes, bounds.0, bounds.1);
        let bv: Vec<f64> = nodes.iter().map(|&x| beta * v(x)).collect();
        let shift = bv.iter().copied().fold(f64::INFINITY, f64::min);
        if !shift.is_finite() {
            return Err(Error::ZeroMass);
        }
        let raw: Vec<f64> = w
            .iter()
            .zip(&bv)
            .map(|(w, bv)| w * (shift - bv).exp())
            .collect();
        let z: f64 = raw.iter().sum();
        if !(z > 0.0 && z.is_finite()) {
            return Err(Error::ZeroMass);
        }
        Ok(Self {
            probs: raw.iter().map(|r| r / z).collect(),
            log_z: z.ln() - shift,
            nodes,
            bounds,
        })
    }

    /// Bounds chosen by [`gibbs_bounds`] inside `search`.
    pub fn auto(
        v: &dyn Fn(f64) -> f64,
        beta: f64,
        n_nodes: usize,
        search: (f64, f64),
    ) -> Result<Self> {
        Self::new(v, beta, n_nodes, gibbs_bounds(v, beta, search))
    }

    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.probs)
            .map(|(&x, p)| p * f(x))
            .sum()
    }

    /// `|Σ p_i − 1|`, which should be at rounding level.
    pub fn normalization_error(&self) -> f64 {
        (self.probs.iter().sum::<f64>() - 1.0).abs()
    }
}

/// `∫ f e^{-βV} / ∫ e^{-βV}` over `bounds` with `n_nodes` Gauss–Legendre points.
pub fn gauss_legendre_expect(
    f: impl Fn(f64) -> f64,
    v: &dyn Fn(f64) -> f64,
    beta: f64,
    n_nodes: usize,
    bounds: (f64, f64),
) -> Result<f64> {
    Ok(GibbsQuadrature::new(v, beta, n_nodes, bounds)?.expect(f))
}

/// Draws `n` exact samples of `∝ e^{-βV}` on `bounds` by inverting a
/// trapezoidal CDF on a fine grid.
pub fn sample_gibbs_1d(
    v: &dyn Fn(f64) -> f64,
    beta: f64,
    bounds: (f64, f64),
    n: usize,
    rng: &mut impl rand::Rng,
) -> Result<Vec<f64>> {
    let m = 20_000;
    let h = (bounds.1 - bounds.0) / m as f64;
    let xs: Vec<f64> = (0..=m).map(|i| bounds.0 + h * i as f64).collect();
    let bv: Vec<f64> = xs.iter().map(|&x| beta * v(x)).collect();
    let shift = bv.iter().copied().fold(f64::INFINITY, f64::min);
    let p: Vec<f64> = bv.iter().map(|b| (shift - b).exp()).collect();
    let mut cdf = vec![0.0; m + 1];
    for i in 1..=m {
        cdf[i] = cdf[i - 1] + (p[i - 1] + p[i]) * h / 2.0;
    }
    let total = cdf[m];
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::ZeroMass);
    }
    Ok((0..n)
        .map(|_| {
            let u = rng.random::<f64>() * total;
            let i = cdf.partition_point(|&c| c < u).clamp(1, m);
            // Linear density on the cell: solve the quadratic for the offset.
            let (c0, p0, p1) = (cdf[i - 1], p[i - 1], p[i]);
            let target = u - c0;
            let slope = (p1 - p0) / h;
            let t = if slope.abs() < 1e-14 * p0.max(1e-300) {
                target / p0.max(1e-300)
            } else {
                ((p0 * p0 + 2.0 * slope * target).max(0.0).sqrt() - p0) / slope
            };
            xs[i - 1] + t.clamp(0.0, h)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(5);
        // Exact up to degree 9.
        let int: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(8)).sum();
        assert!((int - 2.0 / 9.0).abs() < 1e-14);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        let (x, w) = gauss_legendre(200);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-12);
        assert!(x.windows(2).all(|p| p[0] < p[1]));
    }

    #[test]
    fn mapped_rule_integrates_exp() {
        let (x, w) = gauss_legendre_on(30, 0.0, 2.0);
        let int: f64 = x.iter().zip(&w).map(|(x, w)| w * x.exp()).sum();
        assert!((int - (2f64.exp() - 1.0)).abs() < 1e-13);
    }

    #[test]
    fn gaussian_moments() {
        let v = |x: f64| x * x / 2.0;
        let b = gibbs_bounds(&v, 1.0, (-20.0, 20.0));
        assert!(b.0 < -7.0 && b.1 > 7.0 && b.0 > -8.0);
        let one = gauss_legendre_expect(|_| 1.0, &v, 1.0, 200, b).unwrap();
        assert!((one - 1.0).abs() < 1e-14);
        let m2 = gauss_legendre_expect(|x| x * x, &v, 1.0, 200, b).unwrap();
        assert!((m2 - 1.0).abs() < 1e-10, "{m2}");
        let m1 = gauss_legendre_expect(|x| x, &v, 1.0, 200, b).unwrap();
        assert!(m1.abs() < 1e-12);
    }

    #[test]
    fn log_partition_of_gaussian() {
        let v = |x: f64| 2.0 * x * x;
        let q = GibbsQuadrature::auto(&v, 1.0, 200, (-10.0, 10.0)).unwrap();
        // ∫ e^{-2x²} = √(π/2).
        assert!((q.log_z - (std::f64::consts::PI / 2.0).sqrt().ln()).abs() < 1e-10);
        assert!(q.normalization_error() < 1e-14);
    }

    #[test]
    fn gibbs_sampler_matches_gaussian() {
        let v = |x: f64| x * x / 2.0;
        let mut rng = crate::rng::RngStream::new(4, 0).rng();
        let xs = sample_gibbs_1d(&v, 1.0, (-8.0, 8.0), 20_000, &mut rng).unwrap();
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| x * x).sum::<f64>() / n - mean * mean;
        assert!(mean.abs() < 3.0 / n.sqrt());
        assert!((var - 1.0).abs() < 3.0 * (2.0 / n).sqrt());
    }

    #[test]
    fn underflow_reports_zero_mass() {
        let v = |_: f64| f64::INFINITY;
        assert!(matches!(
            gauss_legendre_expect(|_| 1.0, &v, 1.0, 10, (0.0, 1.0)),
            Err(Error::ZeroMass)
        ));
    }
}
