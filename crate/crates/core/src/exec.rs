//! Sequential / parallel execution switch.
//!
//! Every data-parallel loop in the crate is written once against
//! [`ExecMode::map`]. With the `parallel` feature disabled,
//! [`ExecMode::Parallel`] silently degrades to sequential iteration so the
//! results are identical either way; only wall-clock time differs.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExecMode {
    Sequential,
    #[default]
    Parallel,
}

impl ExecMode {
    /// Whether work will actually be spread over threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == ExecMode::Parallel
    }

    /// Order-preserving map over a slice.
    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == ExecMode::Parallel {
            use rayon::prelude::*;
            return items.par_iter().map(f).collect();
        }
        items.iter().map(f).collect()
    }

    /// Order-preserving map over `0..n`.
    pub fn map_range<R, F>(self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == ExecMode::Parallel {
            use rayon::prelude::*;
            return (0..n).into_par_iter().map(f).collect();
        }
        (0..n).map(f).collect()
    }

    /// Runs three closures, concurrently when parallel.
    pub fn join3<A, B, C, FA, FB, FC>(self, fa: FA, fb: FB, fc: FC) -> (A, B, C)
    where
        A: Send,
        B: Send,
        C: Send,
        FA: FnOnce() -> A + Send,
        FB: FnOnce() -> B + Send,
        FC: FnOnce() -> C + Send,
    {
        #[cfg(feature = "parallel")]
        if self == ExecMode::Parallel {
            let (a, (b, c)) = rayon::join(fa, || rayon::join(fb, fc));
            return (a, b, c);
        }
        (fa(), fb(), fc())
    }
}
