//! Dense tanh networks with hand-written backpropagation, stored as one flat
//! parameter vector so optimizers, reductions and checkpoints see a slice.

use crate::scalar::Scalar;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum OutputActivation {
    Identity,
    Tanh,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Mlp<T: Scalar> {
    /// Layer widths, input first.
    pub sizes: Vec<usize>,
    pub output: OutputActivation,
    /// Per layer: row-major weights (out x in) followed by biases.
    pub params: Vec<T>,
}

/// Activations of every layer from one forward pass, input included.
#[derive(Clone, Debug)]
pub struct Trace<T> {
    pub acts: Vec<Vec<T>>,
}

impl<T> Trace<T> {
    pub fn output(&self) -> &[T] {
        self.acts.last().expect("non-empty trace")
    }
}

#[derive(Clone, Copy)]
struct Layer {
    w: usize,
    b: usize,
    n_in: usize,
    n_out: usize,
}

pub fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl<T: Scalar> Mlp<T> {
    pub fn zeros(sizes: &[usize], output: OutputActivation) -> Self {
        assert!(sizes.len() >= 2, "need input and output widths");
        Self {
            sizes: sizes.to_vec(),
            output,
            params: vec![T::zero(); param_count(sizes)],
        }
    }

    /// Glorot-uniform weights and zero biases. The last layer is scaled by
    /// `out_scale`, which lets policy heads start near zero.
    pub fn new(sizes: &[usize], output: OutputActivation, out_scale: f64, rng: &mut impl Rng) -> Self {
        let mut m = Self::zeros(sizes, output);
        let layers = m.layers();
        let last = layers.len() - 1;
        for (k, l) in layers.into_iter().enumerate() {
            let limit = (6.0 / (l.n_in + l.n_out) as f64).sqrt() * if k == last { out_scale } else { 1.0 };
            for p in &mut m.params[l.w..l.b] {
                *p = T::c(rng.random_range(-limit..=limit));
            }
        }
        m
    }

    pub fn input_len(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_len(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    fn layers(&self) -> Vec<Layer> {
        let mut off = 0;
        self.sizes
            .windows(2)
            .map(|w| {
                let l = Layer {
                    w: off,
                    b: off + w[0] * w[1],
                    n_in: w[0],
                    n_out: w[1],
                };
                off = l.b + w[1];
                l
            })
            .collect()
    }

    fn activate(&self, last: bool, z: T) -> T {
        if last && self.output == OutputActivation::Identity {
            z
        } else {
            z.tanh()
        }
    }

    pub fn forward(&self, x: &[T]) -> Vec<T> {
        let t = self.trace(x);
        t.acts.into_iter().last().unwrap()
    }

    pub fn trace(&self, x: &[T]) -> Trace<T> {
        assert_eq!(x.len(), self.input_len(), "input width");
        let layers = self.layers();
        let n = layers.len();
        let mut acts = Vec::with_capacity(n + 1);
        acts.push(x.to_vec());
        for (k, l) in layers.iter().enumerate() {
            let input = &acts[k];
            let w = &self.params[l.w..l.b];
            let b = &self.params[l.b..l.b + l.n_out];
            let out: Vec<T> = (0..l.n_out)
                .map(|o| {
                    let row = &w[o * l.n_in..(o + 1) * l.n_in];
                    let z = row.iter().zip(input).fold(b[o], |acc, (&wi, &xi)| acc + wi * xi);
                    self.activate(k + 1 == n, z)
                })
                .collect();
            acts.push(out);
        }
        Trace { acts }
    }

    /// Accumulates dLoss/dparams into `grad` given dLoss/doutput. Returns
    /// dLoss/dinput when `want_input` is set.
    pub fn backward(&self, trace: &Trace<T>, d_out: &[T], grad: &mut [T], want_input: bool) -> Option<Vec<T>> {
        assert_eq!(grad.len(), self.params.len(), "gradient length");
        let layers = self.layers();
        let n = layers.len();
        let mut delta: Vec<T> = d_out.to_vec();
        for k in (0..n).rev() {
            let l = layers[k];
            let out = &trace.acts[k + 1];
            let input = &trace.acts[k];
            let linear = k + 1 == n && self.output == OutputActivation::Identity;
            if !linear {
                for (d, &a) in delta.iter_mut().zip(out) {
                    *d = *d * (T::one() - a * a);
                }
            }
            for o in 0..l.n_out {
                let d = delta[o];
                if d == T::zero() {
                    continue;
                }
                let row = &mut grad[l.w + o * l.n_in..l.w + (o + 1) * l.n_in];
                for (g, &xi) in row.iter_mut().zip(input) {
                    *g = *g + d * xi;
                }
                grad[l.b + o] = grad[l.b + o] + d;
            }
            if k == 0 && !want_input {
                return None;
            }
            let w = &self.params[l.w..l.b];
            let mut d_in = vec![T::zero(); l.n_in];
            for (o, &d) in delta.iter().enumerate() {
                if d == T::zero() {
                    continue;
                }
                for (di, &wi) in d_in.iter_mut().zip(&w[o * l.n_in..(o + 1) * l.n_in]) {
                    *di = *di + d * wi;
                }
            }
            delta = d_in;
        }
        Some(delta)
    }
}

/// Adam with bias correction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Adam<T: Scalar> {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
    m: Vec<T>,
    v: Vec<T>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(n: usize) -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: vec![T::zero(); n],
            v: vec![T::zero(); n],
        }
    }

    pub fn step(&mut self, params: &mut [T], grad: &[T], lr: f64) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grad.len(), self.m.len());
        self.t += 1;
        let (b1, b2) = (T::c(self.beta1), T::c(self.beta2));
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        let step = T::c(lr * c2.sqrt() / c1);
        let eps = T::c(self.eps * c2.sqrt());
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = b1 * self.m[i] + (T::one() - b1) * g;
            self.v[i] = b2 * self.v[i] + (T::one() - b2) * g * g;
            params[i] = params[i] - step * self.m[i] / (self.v[i].sqrt() + eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn loss(m: &Mlp<f64>, x: &[f64]) -> f64 {
        m.forward(x).iter().enumerate().map(|(i, y)| (i as f64 + 1.0) * y * y).sum::<f64>() * 0.5
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for out in [OutputActivation::Identity, OutputActivation::Tanh] {
            let m = Mlp::<f64>::new(&[4, 6, 5, 3], out, 1.0, &mut rng);
            let x = [0.3, -0.7, 1.1, 0.05];
            let tr = m.trace(&x);
            let d_out: Vec<f64> = tr.output().iter().enumerate().map(|(i, y)| (i as f64 + 1.0) * y).collect();
            let mut g = vec![0.0; m.params.len()];
            let d_in = m.backward(&tr, &d_out, &mut g, true).unwrap();
            let h = 1e-6;
            for i in 0..m.params.len() {
                let (mut a, mut b) = (m.clone(), m.clone());
                a.params[i] += h;
                b.params[i] -= h;
                let fd = (loss(&a, &x) - loss(&b, &x)) / (2.0 * h);
                assert!((fd - g[i]).abs() <= 1e-6 * (1.0 + fd.abs()), "param {i}: {fd} vs {}", g[i]);
            }
            for j in 0..x.len() {
                let (mut xa, mut xb) = (x, x);
                xa[j] += h;
                xb[j] -= h;
                let fd = (loss(&m, &xa) - loss(&m, &xb)) / (2.0 * h);
                assert!((fd - d_in[j]).abs() <= 1e-6 * (1.0 + fd.abs()));
            }
        }
    }

    #[test]
    fn zero_net_outputs_zero() {
        let m = Mlp::<f32>::zeros(&[3, 4, 2], OutputActivation::Identity);
        assert_eq!(m.forward(&[1.0, 2.0, 3.0]), vec![0.0, 0.0]);
    }

    #[test]
    fn adam_descends_quadratic() {
        let mut p = vec![3.0f64, -2.0];
        let mut opt = Adam::new(2);
        for _ in 0..2000 {
            let g: Vec<f64> = p.iter().map(|x| 2.0 * x).collect();
            opt.step(&mut p, &g, 0.01);
        }
        assert!(p.iter().all(|x| x.abs() < 1e-2));
    }
}
