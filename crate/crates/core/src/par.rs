//! Data-parallel helpers.
//!
//! With the `parallel` feature (default) work items are spread over a rayon
//! pool; without it every helper runs sequentially. Results are always
//! collected in index order, so outputs do not depend on scheduling.

use serde::{Deserialize, Serialize};

/// How per-item work (voxels, sequences) is scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Execution {
    Sequential,
    /// Use a pool with the given number of workers; `None` uses the global pool.
    Parallel(Option<usize>),
    #[default]
    Auto,
}

impl Execution {
    pub fn workers(n: usize) -> Self {
        if n <= 1 {
            Execution::Sequential
        } else {
            Execution::Parallel(Some(n))
        }
    }
}

/// Map `f` over `0..n`, returning results in index order.
pub fn map_indexed<T, F>(exec: Execution, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    imp::map_indexed(exec, n, f)
}

#[cfg(feature = "parallel")]
mod imp {
    use super::Execution;
    use rayon::prelude::*;

    pub fn map_indexed<T, F>(exec: Execution, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match exec {
            Execution::Sequential => (0..n).map(f).collect(),
            Execution::Auto | Execution::Parallel(None) => (0..n).into_par_iter().map(f).collect(),
            Execution::Parallel(Some(workers)) => {
                match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
                    Ok(pool) => pool.install(|| (0..n).into_par_iter().map(&f).collect()),
                    Err(e) => {
                        log::warn!("could not build a {workers}-worker pool ({e}); using the global pool");
                        (0..n).into_par_iter().map(f).collect()
                    }
                }
            }
        }
    }
}

#[cfg(not(feature = "parallel"))]
mod imp {
    use super::Execution;

    pub fn map_indexed<T, F>(_exec: Execution, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..n).map(f).collect()
    }
}
