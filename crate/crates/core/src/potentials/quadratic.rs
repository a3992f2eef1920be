use serde::{Deserialize, Serialize};

use super::Potential;

/// Isotropic quadratic `V_θ(x) = θ‖x‖²/2`; its Gibbs law is `N(0, 1/(βθ))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quadratic {
    pub dim: usize,
    /// Single-element vector holding `θ`.
    pub stiffness: [f64; 1],
}

impl Quadratic {
    pub fn new(dim: usize, stiffness: f64) -> Self {
        Self {
            dim,
            stiffness: [stiffness],
        }
    }
}

impl Potential for Quadratic {
    fn dim(&self) -> usize {
        self.dim
    }

    fn params(&self) -> &[f64] {
        &self.stiffness
    }

    fn value(&self, x: &[f64]) -> f64 {
        0.5 * self.stiffness[0] * x.iter().map(|v| v * v).sum::<f64>()
    }

    fn drift(&self, x: &[f64], out: &mut [f64]) {
        for (o, v) in out.iter_mut().zip(x) {
            *o = -self.stiffness[0] * v;
        }
    }

    fn grad_params(&self, x: &[f64], out: &mut [f64]) {
        out[0] = 0.5 * x.iter().map(|v| v * v).sum::<f64>();
    }

    fn jacobian(&self, x: &[f64], out: &mut [f64]) {
        for (o, v) in out.iter_mut().zip(x) {
            *o = -v;
        }
    }
}
