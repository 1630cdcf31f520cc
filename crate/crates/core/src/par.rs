//! Per-item fan-out that runs on rayon when the `parallel` feature is on and
//! the caller asks for it, and as a plain loop otherwise. Outputs keep input
//! order either way, so results do not depend on the mode.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExecMode {
    Sequential,
    Parallel,
}

impl Default for ExecMode {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            ExecMode::Parallel
        } else {
            ExecMode::Sequential
        }
    }
}

impl ExecMode {
    /// Whether work will actually fan out.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == ExecMode::Parallel
    }
}

pub fn map_range<T, F>(mode: ExecMode, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if mode == ExecMode::Parallel {
        use rayon::prelude::*;
        return (0..n).into_par_iter().with_min_len(64).map(f).collect();
    }
    let _ = mode;
    (0..n).map(f).collect()
}

pub fn for_each_mut<T, F>(mode: ExecMode, items: &mut [T], f: F)
where
    T: Send,
    F: Fn(&mut T) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if mode == ExecMode::Parallel {
        use rayon::prelude::*;
        items.par_iter_mut().with_min_len(64).for_each(f);
        return;
    }
    let _ = mode;
    items.iter_mut().for_each(f);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree() {
        let a = map_range(ExecMode::Sequential, 1000, |i| (i as f64).sqrt());
        let b = map_range(ExecMode::Parallel, 1000, |i| (i as f64).sqrt());
        assert_eq!(a, b);
    }
}
