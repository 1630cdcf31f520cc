use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GaeError {
    #[error("length mismatch: {rewards} rewards, {values} values (need rewards + 1), {dones} dones")]
    LengthMismatch { rewards: usize, values: usize, dones: usize },
}

/// Generalized advantage estimation over one trajectory slice.
///
/// `values` holds one more entry than `rewards`: the bootstrap value of the
/// state after the last step (ignored when that step is terminal).
/// Returns `(advantages, returns)` with `returns = advantages + values`.
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    gamma: f64,
    lambda: f64,
) -> Result<(Vec<f64>, Vec<f64>), GaeError> {
    let n = rewards.len();
    if values.len() != n + 1 || dones.len() != n {
        return Err(GaeError::LengthMismatch {
            rewards: n,
            values: values.len(),
            dones: dones.len(),
        });
    }
    let mut adv = vec![0.0; n];
    let mut next = 0.0;
    for t in (0..n).rev() {
        let live = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * values[t + 1] * live - values[t];
        next = delta + gamma * lambda * live * next;
        adv[t] = next;
    }
    let ret = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((adv, ret))
}

/// Zero mean, unit variance; a constant vector maps to zeros.
pub fn normalize_advantages(adv: &mut [f64]) {
    if adv.is_empty() {
        return;
    }
    let n = adv.len() as f64;
    let mean = adv.iter().sum::<f64>() / n;
    let var = adv.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
    let sd = var.sqrt() + 1e-8;
    for a in adv.iter_mut() {
        *a = (*a - mean) / sd;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lambda_zero_is_td_error() {
        let r = [1.0, 2.0, 3.0];
        let v = [0.5, 0.1, -0.2, 0.7];
        let d = [false, false, false];
        let (a, _) = compute_gae(&r, &v, &d, 0.9, 0.0).unwrap();
        for t in 0..3 {
            assert_eq!(a[t], r[t] + 0.9 * v[t + 1] - v[t]);
        }
    }

    #[test]
    fn monte_carlo_endpoint() {
        let r = [1.0, -2.0, 0.5, 4.0];
        let v = [0.3, 0.2, 0.1, 0.0, 99.0];
        let d = [false, false, false, true];
        let (a, ret) = compute_gae(&r, &v, &d, 1.0, 1.0).unwrap();
        for t in 0..4 {
            let g: f64 = r[t..].iter().sum();
            assert!((a[t] - (g - v[t])).abs() < 1e-12);
            assert!((ret[t] - g).abs() < 1e-12);
        }
    }

    #[test]
    fn length_mismatch() {
        assert!(compute_gae(&[1.0], &[0.0], &[false], 0.9, 0.9).is_err());
    }

    #[test]
    fn normalized_has_unit_moments() {
        let mut a = vec![1.0, 2.0, 3.0, 10.0];
        normalize_advantages(&mut a);
        let m: f64 = a.iter().sum::<f64>() / 4.0;
        let v: f64 = a.iter().map(|x| x * x).sum::<f64>() / 4.0;
        assert!(m.abs() < 1e-12);
        assert!((v - 1.0).abs() < 1e-6);
    }
}
