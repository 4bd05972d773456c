//! Data-parallel map with a sequential fallback.
//!
//! With the `parallel` feature, [`ExecutionMode::Parallel`] runs on the
//! current rayon pool; without it every mode runs sequentially. Results are
//! always returned in index order.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecutionMode {
    #[default]
    Parallel,
    Sequential,
}

impl ExecutionMode {
    /// Whether this build can actually run in parallel.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == ExecutionMode::Parallel
    }
}

pub fn map_indexed<T, F>(mode: ExecutionMode, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if mode.is_parallel() {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = mode;
    (0..n).map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree_and_keep_order() {
        let f = |i: usize| (i as f64).sqrt();
        assert_eq!(map_indexed(ExecutionMode::Parallel, 1000, f), map_indexed(ExecutionMode::Sequential, 1000, f));
        assert_eq!(map_indexed(ExecutionMode::Sequential, 3, |i| i), vec![0, 1, 2]);
    }
}
