use rand::seq::SliceRandom;
use rand::Rng;
use statrs::distribution::{ContinuousCDF, StudentsT};

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unbiased sample variance.
pub fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() as f64 - 1.0)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Welch {
    pub t: f64,
    pub df: f64,
    /// Two-sided.
    pub p: f64,
}

/// Welch's unequal-variance t-test. `None` when either sample has fewer
/// than two values.
pub fn welch(a: &[f64], b: &[f64]) -> Option<Welch> {
    if a.len() < 2 || b.len() < 2 {
        return None;
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (sa, sb) = (variance(a) / na, variance(b) / nb);
    let diff = mean(a) - mean(b);
    let se2 = sa + sb;
    if se2 == 0.0 {
        let p = if diff == 0.0 { 1.0 } else { 0.0 };
        return Some(Welch { t: if diff == 0.0 { 0.0 } else { diff.signum() * f64::INFINITY }, df: na + nb - 2.0, p });
    }
    let t = diff / se2.sqrt();
    let df = se2 * se2 / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    let p = (2.0 * dist.cdf(-t.abs())).min(1.0);
    Some(Welch { t, df, p })
}

/// |Welch t| without the distribution lookup; zero spread counts as no
/// evidence unless the means differ.
fn abs_t(a: &[f64], b: &[f64]) -> f64 {
    let se2 = variance(a) / a.len() as f64 + variance(b) / b.len() as f64;
    let diff = (mean(a) - mean(b)).abs();
    if se2 == 0.0 {
        return if diff == 0.0 { 0.0 } else { f64::INFINITY };
    }
    diff / se2.sqrt()
}

/// Two-sided studentized permutation test: the statistic is |Welch t|, which
/// keeps the test valid when the group variances and sizes differ.
pub fn permutation_p(a: &[f64], b: &[f64], rounds: usize, rng: &mut impl Rng) -> f64 {
    let observed = abs_t(a, b);
    let mut pool: Vec<f64> = a.iter().chain(b).copied().collect();
    let mut hits = 0;
    for _ in 0..rounds {
        pool.shuffle(rng);
        let (x, y) = pool.split_at(a.len());
        if abs_t(x, y) >= observed * (1.0 - 1e-12) {
            hits += 1;
        }
    }
    (hits + 1) as f64 / (rounds + 1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_values() {
        // reference values from scipy.stats.ttest_ind(a, b, equal_var=False)
        let a = [19.8, 20.4, 19.6, 17.8, 18.5, 18.9, 18.3, 18.9, 19.5, 22.0];
        let b = [
            28.2, 26.6, 20.1, 23.3, 25.2, 22.1, 17.7, 27.6, 20.6, 13.7, 23.2, 17.5, 20.6, 18.0, 23.9, 21.6, 24.3, 20.4,
            23.9, 13.3,
        ];
        let w = welch(&a, &b).unwrap();
        assert!((w.t + 2.225_512_039_969_852).abs() < 1e-9, "{w:?}");
        assert!((w.df - 24.524_634_944_257_343).abs() < 1e-9, "{w:?}");
        assert!((w.p - 0.035_484_530_830_010_325).abs() < 1e-7, "{w:?}");
    }

    #[test]
    fn identical_samples() {
        let a = [1.0, 2.0, 3.0];
        assert_eq!(welch(&a, &a).unwrap().p, 1.0);
        assert_eq!(welch(&[2.0, 2.0], &[2.0, 2.0]).unwrap().p, 1.0);
        assert!(welch(&[1.0], &a).is_none());
    }
}
