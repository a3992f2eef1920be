use rand::Rng;
use rand_distr::Uniform;
use serde::{Deserialize, Serialize};

use super::Potential;
use crate::rng::RngStream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub input_dim: usize,
    /// Widths of the tanh hidden layers.
    pub hidden: Vec<usize>,
    /// Coefficient `A` of the confining term `A‖x − x_c‖⁴`.
    pub quartic_coeff: f64,
    pub quartic_center: Vec<f64>,
}

impl MlpConfig {
    pub fn n_params(&self) -> usize {
        let mut fan_in = self.input_dim;
        let mut n = 0;
        for &w in &self.hidden {
            n += w * fan_in + w;
            fan_in = w;
        }
        n + fan_in + 1
    }
}

/// Tanh feed-forward network with a scalar output plus a quartic confinement.
///
/// Parameters are flattened layer by layer as `W_l` (row-major, `out × in`)
/// followed by `b_l`, then the output weights and output bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpPotential {
    pub config: MlpConfig,
    pub theta: Vec<f64>,
}

struct Layer {
    rows: usize,
    cols: usize,
    w: usize,
    b: usize,
}

impl MlpPotential {
    pub fn new(config: MlpConfig, theta: Vec<f64>) -> Self {
        assert_eq!(theta.len(), config.n_params(), "parameter count");
        Self { config, theta }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init(config: MlpConfig, seed: u64) -> Self {
        let mut rng = RngStream::new(seed, 0x6d6c70).rng();
        let mut theta = Vec::with_capacity(config.n_params());
        let mut fan_in = config.input_dim;
        for &w in config.hidden.iter().chain(std::iter::once(&1)) {
            let limit = (6.0 / (fan_in + w) as f64).sqrt();
            let dist = Uniform::new_inclusive(-limit, limit).expect("finite limits");
            theta.extend((0..w * fan_in).map(|_| rng.sample(dist)));
            theta.extend(std::iter::repeat_n(0.0, w));
            fan_in = w;
        }
        Self::new(config, theta)
    }

    pub(super) fn set_params(&mut self, theta: &[f64]) {
        self.theta.copy_from_slice(theta);
    }

    fn layers(&self) -> Vec<Layer> {
        let mut out = Vec::with_capacity(self.config.hidden.len() + 1);
        let mut off = 0;
        let mut fan_in = self.config.input_dim;
        for &w in self.config.hidden.iter().chain(std::iter::once(&1)) {
            out.push(Layer {
                rows: w,
                cols: fan_in,
                w: off,
                b: off + w * fan_in,
            });
            off += w * fan_in + w;
            fan_in = w;
        }
        out
    }

    /// Hidden activations `h_0 = x, h_1, …, h_L` and the network output.
    fn forward(&self, layers: &[Layer], x: &[f64]) -> (Vec<Vec<f64>>, f64) {
        let mut hs = Vec::with_capacity(layers.len());
        hs.push(x.to_vec());
        let (hidden, out) = layers.split_at(layers.len() - 1);
        for l in hidden {
            let prev = hs.last().expect("input present");
            let h = (0..l.rows)
                .map(|i| {
                    let row = &self.theta[l.w + i * l.cols..l.w + (i + 1) * l.cols];
                    let z = self.theta[l.b + i] + dot(row, prev);
                    z.tanh()
                })
                .collect();
            hs.push(h);
        }
        let o = &out[0];
        let y = self.theta[o.b] + dot(&self.theta[o.w..o.w + o.cols], hs.last().unwrap());
        (hs, y)
    }

    /// Backpropagated `δ_l = ∂y/∂z_l` for each hidden layer, and `∂y/∂x`.
    fn backward(&self, layers: &[Layer], hs: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<f64>) {
        let n_hidden = layers.len() - 1;
        let o = &layers[n_hidden];
        let mut g = self.theta[o.w..o.w + o.cols].to_vec();
        let mut deltas = vec![Vec::new(); n_hidden];
        for l in (0..n_hidden).rev() {
            let lay = &layers[l];
            let h = &hs[l + 1];
            let delta: Vec<f64> = g.iter().zip(h).map(|(g, h)| g * (1.0 - h * h)).collect();
            let mut prev = vec![0.0; lay.cols];
            for (i, d) in delta.iter().enumerate() {
                let row = &self.theta[lay.w + i * lay.cols..lay.w + (i + 1) * lay.cols];
                for (p, w) in prev.iter_mut().zip(row) {
                    *p += w * d;
                }
            }
            deltas[l] = delta;
            g = prev;
        }
        (deltas, g)
    }

    fn quartic_grad(&self, x: &[f64], out: &mut [f64]) {
        let c = &self.config.quartic_center;
        let r2: f64 = x.iter().zip(c).map(|(x, c)| (x - c) * (x - c)).sum();
        for ((o, x), c) in out.iter_mut().zip(x).zip(c) {
            *o = 4.0 * self.config.quartic_coeff * r2 * (x - c);
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(a, b)| a * b).sum()
}

impl Potential for MlpPotential {
    fn dim(&self) -> usize {
        self.config.input_dim
    }

    fn params(&self) -> &[f64] {
        &self.theta
    }

    fn value(&self, x: &[f64]) -> f64 {
        let (_, y) = self.forward(&self.layers(), x);
        let c = &self.config.quartic_center;
        let r2: f64 = x.iter().zip(c).map(|(x, c)| (x - c) * (x - c)).sum();
        y + self.config.quartic_coeff * r2 * r2
    }

    fn drift(&self, x: &[f64], out: &mut [f64]) {
        let layers = self.layers();
        let (hs, _) = self.forward(&layers, x);
        let (_, gx) = self.backward(&layers, &hs);
        self.quartic_grad(x, out);
        for (o, g) in out.iter_mut().zip(&gx) {
            *o = -(*o + g);
        }
    }

    fn grad_params(&self, x: &[f64], out: &mut [f64]) {
        let layers = self.layers();
        let (hs, _) = self.forward(&layers, x);
        let (deltas, _) = self.backward(&layers, &hs);
        for (l, lay) in layers[..layers.len() - 1].iter().enumerate() {
            for i in 0..lay.rows {
                let d = deltas[l][i];
                for j in 0..lay.cols {
                    out[lay.w + i * lay.cols + j] = d * hs[l][j];
                }
                out[lay.b + i] = d;
            }
        }
        let o = layers.last().unwrap();
        out[o.w..o.w + o.cols].copy_from_slice(hs.last().unwrap());
        out[o.b] = 1.0;
    }

    fn jacobian(&self, x: &[f64], out: &mut [f64]) {
        let (m, d) = (self.dim(), self.n_params());
        let mut e = vec![0.0; m];
        let mut row = vec![0.0; d];
        for k in 0..m {
            e.fill(0.0);
            e[k] = 1.0;
            self.jacobian_t_vec(x, &e, &mut row);
            out[k * d..(k + 1) * d].copy_from_slice(&row);
        }
    }

    /// Forward-over-reverse: differentiate the backprop graph along `v`.
    fn jacobian_t_vec(&self, x: &[f64], v: &[f64], out: &mut [f64]) {
        let layers = self.layers();
        let n_hidden = layers.len() - 1;
        let (hs, _) = self.forward(&layers, x);
        let (deltas, _) = self.backward(&layers, &hs);

        // Tangents of the activations along v.
        let mut dhs: Vec<Vec<f64>> = Vec::with_capacity(n_hidden + 1);
        dhs.push(v.to_vec());
        for (l, lay) in layers[..n_hidden].iter().enumerate() {
            let prev = &dhs[l];
            let dh = (0..lay.rows)
                .map(|i| {
                    let row = &self.theta[lay.w + i * lay.cols..lay.w + (i + 1) * lay.cols];
                    let h = hs[l + 1][i];
                    (1.0 - h * h) * dot(row, prev)
                })
                .collect();
            dhs.push(dh);
        }

        // Tangent of the backward pass; ∂y/∂h_L = w_out does not depend on x.
        let o = &layers[n_hidden];
        let mut g = self.theta[o.w..o.w + o.cols].to_vec();
        let mut dg = vec![0.0; o.cols];
        for l in (0..n_hidden).rev() {
            let lay = &layers[l];
            let (h, dh) = (&hs[l + 1], &dhs[l + 1]);
            let delta = &deltas[l];
            let ddelta: Vec<f64> = (0..lay.rows)
                .map(|i| dg[i] * (1.0 - h[i] * h[i]) - 2.0 * g[i] * h[i] * dh[i])
                .collect();
            for i in 0..lay.rows {
                for j in 0..lay.cols {
                    out[lay.w + i * lay.cols + j] = -(ddelta[i] * hs[l][j] + delta[i] * dhs[l][j]);
                }
                out[lay.b + i] = -ddelta[i];
            }
            let mut prev_g = vec![0.0; lay.cols];
            let mut prev_dg = vec![0.0; lay.cols];
            for i in 0..lay.rows {
                let row = &self.theta[lay.w + i * lay.cols..lay.w + (i + 1) * lay.cols];
                for j in 0..lay.cols {
                    prev_g[j] += row[j] * delta[i];
                    prev_dg[j] += row[j] * ddelta[i];
                }
            }
            g = prev_g;
            dg = prev_dg;
        }
        for (o_, dh) in out[o.w..o.w + o.cols].iter_mut().zip(&dhs[n_hidden]) {
            *o_ = -dh;
        }
        out[o.b] = 0.0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_counts() {
        let one = MlpConfig {
            input_dim: 2,
            hidden: vec![20],
            quartic_coeff: 0.2,
            quartic_center: vec![0.0, 0.0],
        };
        assert_eq!(one.n_params(), 81);
        let two = MlpConfig {
            hidden: vec![20, 20],
            ..one
        };
        assert_eq!(two.n_params(), 501);
        assert_eq!(MlpPotential::init(two, 1).theta.len(), 501);
    }

    #[test]
    fn init_is_seeded() {
        let cfg = MlpConfig {
            input_dim: 2,
            hidden: vec![4],
            quartic_coeff: 0.0,
            quartic_center: vec![0.0, 0.0],
        };
        assert_eq!(
            MlpPotential::init(cfg.clone(), 9),
            MlpPotential::init(cfg.clone(), 9)
        );
        assert_ne!(
            MlpPotential::init(cfg.clone(), 9),
            MlpPotential::init(cfg, 10)
        );
    }
}
