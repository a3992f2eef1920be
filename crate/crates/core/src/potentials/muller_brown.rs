use serde::{Deserialize, Serialize};

use super::Potential;

const AMP: [f64; 4] = [-200.0, -100.0, -170.0, 15.0];
const A: [f64; 4] = [-1.0, -1.0, -6.5, 0.7];
const B: [f64; 4] = [0.0, 0.0, 11.0, 0.6];
const C: [f64; 4] = [-10.0, -10.0, -6.5, 0.7];
const X0: [f64; 4] = [1.0, 0.0, -0.5, -1.0];
const Y0: [f64; 4] = [0.0, 0.5, 1.5, 1.0];

/// Four-term Müller–Brown surface, `scale · V_MB(x, y) + shift`.
///
/// Minima of the unscaled surface: (−0.558, 1.442), (0.623, 0.028) and the
/// intermediate well at (−0.050, 0.467).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MullerBrown {
    pub scale: f64,
    #[serde(default)]
    pub shift: f64,
}

impl MullerBrown {
    pub fn scaled(scale: f64) -> Self {
        Self { scale, shift: 0.0 }
    }

    pub const INTERMEDIATE_MINIMUM: [f64; 2] = [-0.05001, 0.46669];
    pub const DEEP_MINIMUM: [f64; 2] = [-0.55822, 1.44173];

    fn terms(&self, x: &[f64], mut f: impl FnMut(usize, f64, f64, f64)) {
        for k in 0..4 {
            let dx = x[0] - X0[k];
            let dy = x[1] - Y0[k];
            let e = AMP[k] * (A[k] * dx * dx + B[k] * dx * dy + C[k] * dy * dy).exp();
            f(k, e, dx, dy);
        }
    }
}

impl Potential for MullerBrown {
    fn dim(&self) -> usize {
        2
    }

    fn params(&self) -> &[f64] {
        &[]
    }

    fn value(&self, x: &[f64]) -> f64 {
        let mut v = 0.0;
        self.terms(x, |_, e, _, _| v += e);
        self.scale * v + self.shift
    }

    fn drift(&self, x: &[f64], out: &mut [f64]) {
        let (mut gx, mut gy) = (0.0, 0.0);
        self.terms(x, |k, e, dx, dy| {
            gx += e * (2.0 * A[k] * dx + B[k] * dy);
            gy += e * (B[k] * dx + 2.0 * C[k] * dy);
        });
        out[0] = -self.scale * gx;
        out[1] = -self.scale * gy;
    }

    fn grad_params(&self, _x: &[f64], _out: &mut [f64]) {}

    fn jacobian(&self, _x: &[f64], _out: &mut [f64]) {}
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_minima_are_critical_points() {
        let p = MullerBrown::scaled(1.0);
        for m in [MullerBrown::INTERMEDIATE_MINIMUM, MullerBrown::DEEP_MINIMUM] {
            let mut b = [0.0; 2];
            p.drift(&m, &mut b);
            assert!(b[0].abs() < 0.05 && b[1].abs() < 0.05, "{m:?}: {b:?}");
        }
        assert!((p.value(&MullerBrown::DEEP_MINIMUM) + 146.70).abs() < 0.01);
        assert!((p.value(&MullerBrown::INTERMEDIATE_MINIMUM) + 80.77).abs() < 0.01);
    }
}
