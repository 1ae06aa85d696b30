use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

use super::GradientOracle;
use crate::rng::{stream_rng, Stream};

/// One-hidden-layer tanh network with a two-way softmax and mean
/// cross-entropy loss.
///
/// Parameters are flattened as `W1 (h×d, row-major) | b1 (h) | W2 (2×h,
/// row-major) | b2 (2)`.
#[derive(Debug, Clone)]
pub struct MlpOracle {
    inputs: Vec<f64>,
    classes: Vec<usize>,
    input_dim: usize,
    hidden: usize,
}

impl MlpOracle {
    /// Two interleaved spirals in the first two input coordinates; any
    /// further coordinates are pure noise features.
    pub fn spiral(hidden: usize, samples: usize, input_dim: usize, seed: u64) -> Self {
        let mut rng = stream_rng(seed, Stream::Data);
        let per_class = samples.div_ceil(2);
        let mut inputs = Vec::with_capacity(samples * input_dim);
        let mut classes = Vec::with_capacity(samples);
        for i in 0..samples {
            let c = i % 2;
            let t = (i / 2) as f64 / per_class as f64;
            let radius = 0.1 + 0.9 * t;
            let noise: f64 = rng.sample(StandardNormal);
            let angle = 3.0 * PI * t + c as f64 * PI + 0.1 * noise;
            inputs.push(radius * angle.cos());
            inputs.push(radius * angle.sin());
            for _ in 2..input_dim {
                inputs.push(0.1 * rng.sample::<f64, _>(StandardNormal));
            }
            classes.push(c);
        }
        MlpOracle {
            inputs,
            classes,
            input_dim,
            hidden,
        }
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    fn input(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.input_dim..(i + 1) * self.input_dim]
    }

    fn offsets(&self) -> (usize, usize, usize) {
        let w1 = self.hidden * self.input_dim;
        (w1, w1 + self.hidden, w1 + self.hidden + 2 * self.hidden)
    }

    /// Hidden activations and the two logits.
    fn forward(&self, x: &[f64], i: usize) -> (Vec<f64>, [f64; 2]) {
        let (b1, w2, b2) = self.offsets();
        let a = self.input(i);
        let d = self.input_dim;
        let h: Vec<f64> = (0..self.hidden)
            .map(|j| {
                let row = &x[j * d..(j + 1) * d];
                let z: f64 = row.iter().zip(a).map(|(w, v)| w * v).sum::<f64>() + x[b1 + j];
                z.tanh()
            })
            .collect();
        let mut logits = [x[b2], x[b2 + 1]];
        for (c, l) in logits.iter_mut().enumerate() {
            let row = &x[w2 + c * self.hidden..w2 + (c + 1) * self.hidden];
            *l += row.iter().zip(&h).map(|(w, v)| w * v).sum::<f64>();
        }
        (h, logits)
    }
}

fn softmax2(logits: [f64; 2]) -> [f64; 2] {
    let m = logits[0].max(logits[1]);
    let e = [(logits[0] - m).exp(), (logits[1] - m).exp()];
    let s = e[0] + e[1];
    [e[0] / s, e[1] / s]
}

impl GradientOracle for MlpOracle {
    fn dim(&self) -> usize {
        self.offsets().2 + 2
    }

    fn num_samples(&self) -> usize {
        self.classes.len()
    }

    fn loss(&self, x: &[f64]) -> f64 {
        let t = self.classes.len();
        (0..t)
            .map(|i| {
                let (_, logits) = self.forward(x, i);
                let m = logits[0].max(logits[1]);
                let lse = m + ((logits[0] - m).exp() + (logits[1] - m).exp()).ln();
                lse - logits[self.classes[i]]
            })
            .sum::<f64>()
            / t as f64
    }

    fn add_sample_gradient(&self, x: &[f64], i: usize, weight: f64, out: &mut [f64]) {
        let (b1, w2, b2) = self.offsets();
        let (h, logits) = self.forward(x, i);
        let mut dlogit = softmax2(logits);
        dlogit[self.classes[i]] -= 1.0;
        let a = self.input(i);
        let d = self.input_dim;
        for c in 0..2 {
            out[b2 + c] += weight * dlogit[c];
            for j in 0..self.hidden {
                out[w2 + c * self.hidden + j] += weight * dlogit[c] * h[j];
            }
        }
        for j in 0..self.hidden {
            let back = dlogit[0] * x[w2 + j] + dlogit[1] * x[w2 + self.hidden + j];
            let dz = weight * back * (1.0 - h[j] * h[j]);
            out[b1 + j] += dz;
            for (k, &ak) in a.iter().enumerate() {
                out[j * d + k] += dz * ak;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_weights_give_ln2() {
        let o = MlpOracle::spiral(8, 40, 2, 0);
        assert_eq!(o.dim(), 8 * 2 + 8 + 16 + 2);
        assert!((o.loss(&vec![0.0; o.dim()]) - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn extra_input_dims_add_weights() {
        let o = MlpOracle::spiral(3, 10, 5, 0);
        assert_eq!(o.dim(), 3 * 5 + 3 + 6 + 2);
    }
}
