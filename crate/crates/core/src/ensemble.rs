//! Order-preserving parallel map over path indices.

use rayon::prelude::*;

/// Evaluate `f(0), …, f(n-1)` on the current rayon pool. Results come back in
/// index order regardless of scheduling, so reductions over them are
/// reproducible for any thread count.
pub fn par_map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}
