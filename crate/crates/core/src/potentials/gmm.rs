use serde::{Deserialize, Serialize};

use super::Potential;

/// Two-component Gaussian mixture confined by a quartic,
/// `V_θ(x) = Σᵢ wᵢ exp(−(x−cᵢ)²/(2νᵢ²)) + A(x − c̄)⁴`, with
/// `θ = (w₁, w₂, c₁, c₂, log ν₁, log ν₂)` and `c̄ = (c₁ + c₂)/2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianMixture {
    pub theta: [f64; 6],
    #[serde(default = "default_confinement")]
    pub confinement: f64,
}

fn default_confinement() -> f64 {
    0.2
}

impl GaussianMixture {
    pub fn new(theta: [f64; 6], confinement: f64) -> Self {
        Self { theta, confinement }
    }

    /// `θ* = (1, 1, −1, 1, log 0.2, log 0.2)`.
    pub fn reference() -> Self {
        let s = 0.2f64.ln();
        Self::new([1.0, 1.0, -1.0, 1.0, s, s], 0.2)
    }

    /// `θ₀ = (1, 1, −1, −1, log 0.75, log 0.75)`.
    pub fn initial() -> Self {
        let s = 0.75f64.ln();
        Self::new([1.0, 1.0, -1.0, -1.0, s, s], 0.2)
    }

    fn center(&self) -> f64 {
        0.5 * (self.theta[2] + self.theta[3])
    }

    /// Per-component `(w, g, r, inv_var)` with `g = exp(−r²/(2ν²))`, `r = x − c`.
    fn components(&self, x: f64) -> [(f64, f64, f64, f64); 2] {
        let t = &self.theta;
        std::array::from_fn(|i| {
            let inv_var = (-2.0 * t[4 + i]).exp();
            let r = x - t[2 + i];
            (t[i], (-0.5 * r * r * inv_var).exp(), r, inv_var)
        })
    }
}

impl Potential for GaussianMixture {
    fn dim(&self) -> usize {
        1
    }

    fn params(&self) -> &[f64] {
        &self.theta
    }

    fn value(&self, x: &[f64]) -> f64 {
        let x = x[0];
        let s = x - self.center();
        self.components(x)
            .iter()
            .map(|(w, g, _, _)| w * g)
            .sum::<f64>()
            + self.confinement * s * s * s * s
    }

    fn drift(&self, x: &[f64], out: &mut [f64]) {
        let x = x[0];
        let s = x - self.center();
        out[0] = self
            .components(x)
            .iter()
            .map(|(w, g, r, iv)| w * g * r * iv)
            .sum::<f64>()
            - 4.0 * self.confinement * s * s * s;
    }

    fn grad_params(&self, x: &[f64], out: &mut [f64]) {
        let x = x[0];
        let s = x - self.center();
        let quartic_dc = -2.0 * self.confinement * s * s * s;
        for (i, (w, g, r, iv)) in self.components(x).into_iter().enumerate() {
            out[i] = g;
            out[2 + i] = w * g * r * iv + quartic_dc;
            out[4 + i] = w * g * r * r * iv;
        }
    }

    fn jacobian(&self, x: &[f64], out: &mut [f64]) {
        let x = x[0];
        let s = x - self.center();
        let quartic_dc = 6.0 * self.confinement * s * s;
        for (i, (w, g, r, iv)) in self.components(x).into_iter().enumerate() {
            let q = r * iv;
            out[i] = g * q;
            out[2 + i] = w * g * (q * q - iv) + quartic_dc;
            out[4 + i] = w * g * q * (r * r * iv - 2.0);
        }
    }
}
