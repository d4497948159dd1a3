//! Data-parallel entry points with a sequential fallback.
//!
//! With the default `parallel` feature the indexed maps run on rayon; without
//! it they compile to plain loops. Both paths fill one output slot per index,
//! so results are bitwise identical regardless of thread count, and the `_seq`
//! variants stay available under the feature for benchmark comparison.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Collect `f(0..n)` into a vector, one slot per index.
pub fn map_indexed<U: Send>(n: usize, f: impl Fn(usize) -> U + Sync + Send) -> Vec<U> {
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Sequential twin of [`map_indexed`].
pub fn map_indexed_seq<U>(n: usize, f: impl Fn(usize) -> U) -> Vec<U> {
    (0..n).map(f).collect()
}

/// Overwrite each slot of `out` from its index.
pub fn fill_indexed<T: Send>(out: &mut [T], f: impl Fn(usize) -> T + Sync + Send) {
    #[cfg(feature = "parallel")]
    {
        out.par_iter_mut().enumerate().for_each(|(i, slot)| *slot = f(i));
    }
    #[cfg(not(feature = "parallel"))]
    {
        for (i, slot) in out.iter_mut().enumerate() {
            *slot = f(i);
        }
    }
}

/// Sequential twin of [`fill_indexed`].
pub fn fill_indexed_seq<T>(out: &mut [T], f: impl Fn(usize) -> T) {
    for (i, slot) in out.iter_mut().enumerate() {
        *slot = f(i);
    }
}
