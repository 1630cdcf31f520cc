//! Intrinsic curiosity: an encoder, a forward model predicting the next
//! encoding from (encoding, action), and an inverse model predicting the
//! action from both encodings. The forward model's error is the bonus.

use crate::mlp::{Mlp, OutputActivation};
use crate::scalar::Scalar;
use rand::Rng;
use serde::{Deserialize, Serialize};

const FORWARD_WEIGHT: f64 = 0.2;
const INVERSE_WEIGHT: f64 = 0.8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Curiosity<T: Scalar> {
    pub encoder: Mlp<T>,
    pub forward_model: Mlp<T>,
    pub inverse_model: Mlp<T>,
    pub strength: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct CuriositySample<'a, T> {
    pub obs: &'a [T],
    /// Squashed action in [-1, 1].
    pub action: &'a [T],
    pub next_obs: &'a [T],
}

#[derive(Clone, Debug, PartialEq)]
pub struct CuriosityGrad<T> {
    pub encoder: Vec<T>,
    pub forward_model: Vec<T>,
    pub inverse_model: Vec<T>,
}

impl<T: Scalar> CuriosityGrad<T> {
    pub fn zeros_like(c: &Curiosity<T>) -> Self {
        Self {
            encoder: vec![T::zero(); c.encoder.params.len()],
            forward_model: vec![T::zero(); c.forward_model.params.len()],
            inverse_model: vec![T::zero(); c.inverse_model.params.len()],
        }
    }

    pub fn add(&mut self, o: &Self) {
        for (a, b) in [
            (&mut self.encoder, &o.encoder),
            (&mut self.forward_model, &o.forward_model),
            (&mut self.inverse_model, &o.inverse_model),
        ] {
            a.iter_mut().zip(b).for_each(|(x, &y)| *x = *x + y);
        }
    }

    pub fn scale(&mut self, k: T) {
        for v in [&mut self.encoder, &mut self.forward_model, &mut self.inverse_model] {
            v.iter_mut().for_each(|x| *x = *x * k);
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CuriositySums {
    pub n: usize,
    pub forward: f64,
    pub inverse: f64,
}

impl CuriositySums {
    pub fn add(&mut self, o: &Self) {
        self.n += o.n;
        self.forward += o.forward;
        self.inverse += o.inverse;
    }

    /// Mean of 0.2 * forward + 0.8 * inverse.
    pub fn total(&self) -> f64 {
        (FORWARD_WEIGHT * self.forward + INVERSE_WEIGHT * self.inverse) / self.n.max(1) as f64
    }
}

fn sizes(input: usize, units: usize, layers: usize, output: usize) -> Vec<usize> {
    let mut s = vec![input];
    s.extend(std::iter::repeat_n(units, layers.saturating_sub(1)));
    s.push(output);
    s
}

fn half_sq_dist<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum::<T>() * T::c(0.5)
}

impl<T: Scalar> Curiosity<T> {
    /// `units x layers` encoder (tanh throughout); forward and inverse models
    /// share the width.
    pub fn new(obs_len: usize, act_len: usize, units: usize, layers: usize, strength: f64, rng: &mut impl Rng) -> Self {
        Self {
            encoder: Mlp::new(&sizes(obs_len, units, layers, units), OutputActivation::Tanh, 1.0, rng),
            forward_model: Mlp::new(&sizes(units + act_len, units, layers, units), OutputActivation::Identity, 1.0, rng),
            inverse_model: Mlp::new(&sizes(2 * units, units, layers, act_len), OutputActivation::Identity, 1.0, rng),
            strength,
        }
    }

    fn predict(&self, enc: &[T], action: &[T]) -> Vec<T> {
        let mut x = enc.to_vec();
        x.extend_from_slice(action);
        self.forward_model.forward(&x)
    }

    /// `strength * 0.5 * |forward(enc(obs), action) - enc(next_obs)|^2`, never negative.
    pub fn intrinsic_reward(&self, obs: &[T], action: &[T], next_obs: &[T]) -> f64 {
        let e = self.encoder.forward(obs);
        let e_next = self.encoder.forward(next_obs);
        self.strength * half_sq_dist(&self.predict(&e, action), &e_next).as_f64()
    }

    /// Adds the gradient of the summed loss `0.2 * forward + 0.8 * inverse`
    /// into `grad`. Gradients reach the encoder through both models.
    pub fn accumulate(&self, samples: &[CuriositySample<'_, T>], grad: &mut CuriosityGrad<T>) -> CuriositySums {
        let units = self.encoder.output_len();
        let fw = T::c(FORWARD_WEIGHT);
        let iw = T::c(INVERSE_WEIGHT);
        let mut sums = CuriositySums::default();
        for s in samples {
            let te = self.encoder.trace(s.obs);
            let tn = self.encoder.trace(s.next_obs);
            let (e, en) = (te.output(), tn.output());

            let mut fx = e.to_vec();
            fx.extend_from_slice(s.action);
            let tf = self.forward_model.trace(&fx);
            let diff: Vec<T> = tf.output().iter().zip(en).map(|(&p, &y)| p - y).collect();
            sums.forward += half_sq_dist(tf.output(), en).as_f64();

            let mut ix = e.to_vec();
            ix.extend_from_slice(en);
            let ti = self.inverse_model.trace(&ix);
            sums.inverse += half_sq_dist(ti.output(), s.action).as_f64();
            sums.n += 1;

            let d_pred: Vec<T> = diff.iter().map(|&d| fw * d).collect();
            let d_fx = self.forward_model.backward(&tf, &d_pred, &mut grad.forward_model, true).unwrap();
            let d_inv: Vec<T> = ti.output().iter().zip(s.action).map(|(&q, &a)| iw * (q - a)).collect();
            let d_ix = self.inverse_model.backward(&ti, &d_inv, &mut grad.inverse_model, true).unwrap();

            let d_e: Vec<T> = (0..units).map(|k| d_fx[k] + d_ix[k]).collect();
            let d_en: Vec<T> = (0..units).map(|k| d_ix[units + k] - fw * diff[k]).collect();
            self.encoder.backward(&te, &d_e, &mut grad.encoder, false);
            self.encoder.backward(&tn, &d_en, &mut grad.encoder, false);
        }
        sums
    }

    pub fn loss(&self, samples: &[CuriositySample<'_, T>]) -> f64 {
        let mut g = CuriosityGrad::zeros_like(self);
        self.accumulate(samples, &mut g).total()
    }
}
