//! Data-parallel helpers with a sequential fallback.

use serde::{Deserialize, Serialize};

/// How per-rung work inside one MCS is scheduled. Results never depend on it.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    Sequential,
    /// Uses the current rayon pool; same as `Sequential` without the
    /// `parallel` feature.
    #[default]
    Parallel,
}

/// Calls `f` on matching elements of `a` and `b`.
pub fn for_each_pair_mut<A, B, F>(a: &mut [A], b: &mut [B], exec: Execution, f: F)
where
    A: Send,
    B: Send,
    F: Fn(&mut A, &mut B) + Sync + Send,
{
    debug_assert_eq!(a.len(), b.len());
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            a.par_iter_mut().zip(b.par_iter_mut()).for_each(|(x, y)| f(x, y));
        }
        _ => a.iter_mut().zip(b.iter_mut()).for_each(|(x, y)| f(x, y)),
    }
}

/// Maps `f` over `items`, preserving order.
pub fn map<T, U, F>(items: &[T], exec: Execution, f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            items.par_iter().map(f).collect()
        }
        _ => items.iter().map(f).collect(),
    }
}
