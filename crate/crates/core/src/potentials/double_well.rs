use serde::{Deserialize, Serialize};

use super::Potential;

/// Asymmetric double well `V_θ(x) = x⁴ − 2x² + θ(x³/3 + x² + x)` on ℝ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoubleWell {
    pub theta: f64,
}

impl DoubleWell {
    pub fn new(theta: f64) -> Self {
        Self { theta }
    }
}

impl Potential for DoubleWell {
    fn dim(&self) -> usize {
        1
    }

    fn params(&self) -> &[f64] {
        std::slice::from_ref(&self.theta)
    }

    fn value(&self, x: &[f64]) -> f64 {
        let x = x[0];
        let x2 = x * x;
        x2 * x2 - 2.0 * x2 + self.theta * (x2 * x / 3.0 + x2 + x)
    }

    fn drift(&self, x: &[f64], out: &mut [f64]) {
        let x = x[0];
        out[0] = -(4.0 * x * x * x - 4.0 * x + self.theta * (x + 1.0) * (x + 1.0));
    }

    fn grad_params(&self, x: &[f64], out: &mut [f64]) {
        let x = x[0];
        out[0] = x * x * x / 3.0 + x * x + x;
    }

    fn jacobian(&self, x: &[f64], out: &mut [f64]) {
        out[0] = -(x[0] + 1.0) * (x[0] + 1.0);
    }
}
