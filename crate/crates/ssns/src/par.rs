//! Thin shim over rayon so every hot loop has a sequential twin.
//!
//! With the `parallel` feature the closures run on the global rayon pool;
//! without it the exact same code runs on the calling thread.  Callers that
//! reduce floating-point values must do so over the chunk/index structure
//! provided here (never via an unordered reduction) so that results are
//! bitwise identical in both modes.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Map `0..n` through `f`, collecting results in index order.
pub fn map_range_collect<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Apply `f` to consecutive chunks of `data`, passing the chunk index.
pub fn for_each_chunk_mut<T, F>(data: &mut [T], chunk: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        data.par_chunks_mut(chunk)
            .enumerate()
            .for_each(|(i, c)| f(i, c));
    }
    #[cfg(not(feature = "parallel"))]
    {
        for (i, c) in data.chunks_mut(chunk).enumerate() {
            f(i, c);
        }
    }
}

/// Like [`for_each_chunk_mut`] but with per-worker scratch state.
pub fn for_each_chunk_mut_with<T, S, I, F>(data: &mut [T], chunk: usize, init: I, f: F)
where
    T: Send,
    S: Send,
    I: Fn() -> S + Sync + Send,
    F: Fn(&mut S, usize, &mut [T]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        data.par_chunks_mut(chunk)
            .enumerate()
            .for_each_init(&init, |s, (i, c)| f(s, i, c));
    }
    #[cfg(not(feature = "parallel"))]
    {
        let mut s = init();
        for (i, c) in data.chunks_mut(chunk).enumerate() {
            f(&mut s, i, c);
        }
    }
}
