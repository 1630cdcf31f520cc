//! Tanh-squashed Gaussian actor with a separate critic, and the clipped
//! surrogate loss with its analytic gradient.

use crate::mlp::{Mlp, OutputActivation};
use crate::scalar::Scalar;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;
const HALF_LN_2PI: f64 = 0.918_938_533_204_672_7;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct PolicyNet<T: Scalar> {
    pub actor: Mlp<T>,
    /// State-independent; clamped to [LOG_STD_MIN, LOG_STD_MAX] when used.
    pub log_std: Vec<T>,
    pub critic: Mlp<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ActionSample<T> {
    /// Gaussian draw before squashing; the trainer stores this.
    pub pre_squash: Vec<T>,
    /// `tanh(pre_squash)`, always within [-1, 1].
    pub action: Vec<T>,
    pub log_prob: T,
}

fn layer_sizes(input: usize, hidden: usize, layers: usize, output: usize) -> Vec<usize> {
    let mut s = vec![input];
    s.extend(std::iter::repeat_n(hidden, layers));
    s.push(output);
    s
}

/// `sum_j log(1 - tanh(u_j)^2)` in a form that stays finite for large |u|.
pub fn squash_log_det<T: Scalar>(pre: &[T]) -> T {
    let ln2 = T::c(std::f64::consts::LN_2);
    let two = T::c(2.0);
    pre.iter()
        .map(|&u| {
            let x = -two * u;
            let softplus = x.max(T::zero()) + (-x.abs()).exp().ln_1p();
            two * (ln2 - u - softplus)
        })
        .sum()
}

impl<T: Scalar> PolicyNet<T> {
    pub fn new(obs_len: usize, act_len: usize, hidden: usize, layers: usize, rng: &mut impl Rng) -> Self {
        Self {
            actor: Mlp::new(&layer_sizes(obs_len, hidden, layers, act_len), OutputActivation::Identity, 0.01, rng),
            log_std: vec![T::zero(); act_len],
            critic: Mlp::new(&layer_sizes(obs_len, hidden, layers, 1), OutputActivation::Identity, 1.0, rng),
        }
    }

    pub fn zeros(obs_len: usize, act_len: usize, hidden: usize, layers: usize) -> Self {
        Self {
            actor: Mlp::zeros(&layer_sizes(obs_len, hidden, layers, act_len), OutputActivation::Identity),
            log_std: vec![T::zero(); act_len],
            critic: Mlp::zeros(&layer_sizes(obs_len, hidden, layers, 1), OutputActivation::Identity),
        }
    }

    pub fn obs_len(&self) -> usize {
        self.actor.input_len()
    }

    pub fn act_len(&self) -> usize {
        self.log_std.len()
    }

    pub fn clamped_log_std(&self) -> Vec<T> {
        let (lo, hi) = (T::c(LOG_STD_MIN), T::c(LOG_STD_MAX));
        self.log_std.iter().map(|&l| l.max(lo).min(hi)).collect()
    }

    pub fn value(&self, obs: &[T]) -> T {
        self.critic.forward(obs)[0]
    }

    pub fn log_prob_given_mean(&self, mean: &[T], pre: &[T]) -> T {
        let ls = self.clamped_log_std();
        let half = T::c(0.5);
        let gauss: T = (0..mean.len())
            .map(|j| {
                let z = (pre[j] - mean[j]) / ls[j].exp();
                -half * z * z - ls[j] - T::c(HALF_LN_2PI)
            })
            .sum();
        gauss - squash_log_det(pre)
    }

    pub fn log_prob(&self, obs: &[T], pre: &[T]) -> T {
        self.log_prob_given_mean(&self.actor.forward(obs), pre)
    }

    /// Entropy of the Gaussian before squashing.
    pub fn entropy(&self) -> T {
        self.clamped_log_std().into_iter().map(|l| l + T::c(0.5 + HALF_LN_2PI)).sum()
    }

    /// Deterministic mode returns the squashed mean.
    pub fn act(&self, obs: &[T], rng: &mut impl Rng, deterministic: bool) -> ActionSample<T> {
        let mean = self.actor.forward(obs);
        let pre: Vec<T> = if deterministic {
            mean.clone()
        } else {
            let ls = self.clamped_log_std();
            mean.iter()
                .zip(&ls)
                .map(|(&m, &l)| m + l.exp() * T::c(rng.sample::<f64, _>(StandardNormal)))
                .collect()
        };
        let log_prob = self.log_prob_given_mean(&mean, &pre);
        ActionSample {
            action: pre.iter().map(|u| u.tanh()).collect(),
            pre_squash: pre,
            log_prob,
        }
    }
}

/// Gradient buffers shaped like a [`PolicyNet`].
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyGrad<T> {
    pub actor: Vec<T>,
    pub log_std: Vec<T>,
    pub critic: Vec<T>,
}

impl<T: Scalar> PolicyGrad<T> {
    pub fn zeros_like(net: &PolicyNet<T>) -> Self {
        Self {
            actor: vec![T::zero(); net.actor.params.len()],
            log_std: vec![T::zero(); net.log_std.len()],
            critic: vec![T::zero(); net.critic.params.len()],
        }
    }

    pub fn add(&mut self, o: &Self) {
        for (a, b) in [(&mut self.actor, &o.actor), (&mut self.log_std, &o.log_std), (&mut self.critic, &o.critic)] {
            a.iter_mut().zip(b).for_each(|(x, &y)| *x = *x + y);
        }
    }

    pub fn scale(&mut self, k: T) {
        for v in [&mut self.actor, &mut self.log_std, &mut self.critic] {
            v.iter_mut().for_each(|x| *x = *x * k);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.actor.iter().chain(&self.log_std).chain(&self.critic).all(|x| x.is_finite())
    }
}

/// One stored transition as the loss sees it.
#[derive(Clone, Copy, Debug)]
pub struct PpoSample<'a, T> {
    pub obs: &'a [T],
    pub pre_squash: &'a [T],
    pub old_log_prob: T,
    pub advantage: T,
    pub ret: T,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossWeights {
    pub epsilon: f64,
    pub beta: f64,
    pub value_coef: f64,
}

/// Per-term sums over a set of samples; divide by `n` for means.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossSums {
    pub n: usize,
    pub policy: f64,
    pub value: f64,
    pub entropy: f64,
    pub clipped: usize,
}

impl LossSums {
    pub fn add(&mut self, o: &Self) {
        self.n += o.n;
        self.policy += o.policy;
        self.value += o.value;
        self.entropy += o.entropy;
        self.clipped += o.clipped;
    }

    /// Mean of policy + value_coef * value - beta * entropy.
    pub fn total(&self, w: &LossWeights) -> f64 {
        let n = self.n.max(1) as f64;
        (self.policy + w.value_coef * self.value - w.beta * self.entropy) / n
    }
}

/// Adds the gradient of the summed per-sample loss
/// `-min(r A, clip(r) A) + c_v (V - R)^2 - beta H` into `grad`.
pub fn accumulate_ppo<T: Scalar>(
    net: &PolicyNet<T>,
    samples: &[PpoSample<'_, T>],
    w: &LossWeights,
    grad: &mut PolicyGrad<T>,
) -> LossSums {
    let ls = net.clamped_log_std();
    let (lo, hi) = (T::c(LOG_STD_MIN), T::c(LOG_STD_MAX));
    let free: Vec<bool> = net.log_std.iter().map(|&l| l > lo && l < hi).collect();
    let entropy = net.entropy();
    let mut sums = LossSums::default();
    for s in samples {
        let tr = net.actor.trace(s.obs);
        let mean = tr.output();
        let logp = net.log_prob_given_mean(mean, s.pre_squash);
        let ratio = (logp - s.old_log_prob).exp();
        let a = s.advantage;
        let surr1 = ratio * a;
        let clipped = ratio.max(T::c(1.0 - w.epsilon)).min(T::c(1.0 + w.epsilon));
        let surr2 = clipped * a;
        let d_logp = if surr1 <= surr2 { -a * ratio } else { T::zero() };
        if surr2 < surr1 {
            sums.clipped += 1;
        }
        sums.policy += (-surr1.min(surr2)).as_f64();

        let mut d_mean = vec![T::zero(); mean.len()];
        for j in 0..mean.len() {
            let sd = ls[j].exp();
            let z = (s.pre_squash[j] - mean[j]) / sd;
            d_mean[j] = d_logp * z / sd;
            if free[j] {
                grad.log_std[j] = grad.log_std[j] + d_logp * (z * z - T::one()) - T::c(w.beta);
            }
        }
        net.actor.backward(&tr, &d_mean, &mut grad.actor, false);

        let vt = net.critic.trace(s.obs);
        let v = vt.output()[0];
        let err = v - s.ret;
        sums.value += (err * err).as_f64();
        net.critic.backward(&vt, &[T::c(2.0 * w.value_coef) * err], &mut grad.critic, false);

        sums.entropy += entropy.as_f64();
        sums.n += 1;
    }
    sums
}

/// Loss value only; used by finite-difference checks.
pub fn ppo_loss<T: Scalar>(net: &PolicyNet<T>, samples: &[PpoSample<'_, T>], w: &LossWeights) -> f64 {
    let mut g = PolicyGrad::zeros_like(net);
    accumulate_ppo(net, samples, w, &mut g).total(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_net_gives_mid_actions() {
        let net = PolicyNet::<f64>::zeros(4, 3, 8, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = net.act(&[0.1, 0.2, 0.3, 0.4], &mut rng, true);
        assert_eq!(s.action, vec![0.0; 3]);
    }

    #[test]
    fn samples_are_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut net = PolicyNet::<f32>::new(4, 2, 8, 2, &mut rng);
        net.log_std = vec![2.0, 2.0];
        for _ in 0..500 {
            let s = net.act(&[1.0, -1.0, 0.5, 0.0], &mut rng, false);
            assert!(s.action.iter().all(|a| (-1.0..=1.0).contains(a)));
            assert!(s.log_prob.is_finite());
        }
    }

    #[test]
    fn squash_log_det_matches_direct_form() {
        for u in [-3.0f64, -0.5, 0.0, 0.7, 2.5] {
            let direct = (1.0 - u.tanh().powi(2)).ln();
            assert!((squash_log_det(&[u]) - direct).abs() < 1e-12);
        }
        assert!(squash_log_det(&[40.0f64]).is_finite());
    }

    #[test]
    fn ratio_clip_uses_bound() {
        // ratio 1.5, A > 0, eps 0.2 -> contribution -1.2 A, zero gradient
        let net = PolicyNet::<f64>::zeros(1, 1, 2, 1);
        let pre = [0.3];
        let logp = net.log_prob(&[0.0], &pre);
        let s = PpoSample { obs: &[0.0], pre_squash: &pre, old_log_prob: logp - 1.5f64.ln(), advantage: 2.0, ret: 0.0 };
        let w = LossWeights { epsilon: 0.2, beta: 0.0, value_coef: 0.0 };
        let mut g = PolicyGrad::zeros_like(&net);
        let sums = accumulate_ppo(&net, &[s], &w, &mut g);
        assert!((sums.policy + 1.2 * 2.0).abs() < 1e-12);
        assert_eq!(sums.clipped, 1);
        assert!(g.actor.iter().all(|&x| x == 0.0));
    }
}
