use crate::scalar::Scalar;
use serde::{Deserialize, Serialize};

const CLIP: f64 = 5.0;

/// Running per-feature mean and variance, merged with Chan's parallel update.
/// Statistics are kept in `f64` regardless of the network width.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunningNorm {
    pub count: f64,
    pub mean: Vec<f64>,
    pub m2: Vec<f64>,
}

impl RunningNorm {
    pub fn new(n: usize) -> Self {
        Self {
            count: 0.0,
            mean: vec![0.0; n],
            m2: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    pub fn update(&mut self, x: &[f64]) {
        self.update_batch(std::slice::from_ref(&x));
    }

    pub fn update_batch<R: AsRef<[f64]>>(&mut self, rows: &[R]) {
        if rows.is_empty() {
            return;
        }
        let n = rows.len() as f64;
        let d = self.len();
        let mut mean = vec![0.0; d];
        for r in rows {
            for (m, &x) in mean.iter_mut().zip(r.as_ref()) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut m2 = vec![0.0; d];
        for r in rows {
            for ((s, &x), &m) in m2.iter_mut().zip(r.as_ref()).zip(&mean) {
                *s += (x - m) * (x - m);
            }
        }
        let total = self.count + n;
        for i in 0..d {
            let delta = mean[i] - self.mean[i];
            self.mean[i] += delta * n / total;
            self.m2[i] += m2[i] + delta * delta * self.count * n / total;
        }
        self.count = total;
    }

    /// Population variance.
    pub fn variance(&self) -> Vec<f64> {
        if self.count == 0.0 {
            return vec![1.0; self.len()];
        }
        self.m2.iter().map(|s| s / self.count).collect()
    }

    pub fn normalize<T: Scalar>(&self, x: &[f64]) -> Vec<T> {
        let var = self.variance();
        x.iter()
            .zip(&self.mean)
            .zip(&var)
            .map(|((&v, &m), &s)| T::c(((v - m) / (s + 1e-8).sqrt()).clamp(-CLIP, CLIP)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fresh_normalizer_is_identity_within_clip() {
        let n = RunningNorm::new(2);
        let y: Vec<f64> = n.normalize(&[0.5, -7.0]);
        assert!((y[0] - 0.5).abs() < 1e-6);
        assert_eq!(y[1], -5.0);
    }
}
