//! Thin seam between rayon and plain iteration.
//!
//! Every solver phase is a gather: slot `i` of the output is a pure function
//! of a read-only snapshot, so sequential and parallel execution produce
//! bitwise-identical results. The `parallel` feature (default on) routes
//! these through rayon; without it (e.g. wasm builds) the same loops run
//! sequentially.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Overwrite each slot of `out` with `f(i)`.
pub fn fill_indexed<T, F>(out: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
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

/// In-place update of each slot with access to its index.
pub fn update_indexed<T, F>(out: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize, &mut T) + Sync,
{
    #[cfg(feature = "parallel")]
    {
        out.par_iter_mut().enumerate().for_each(|(i, slot)| f(i, slot));
    }
    #[cfg(not(feature = "parallel"))]
    {
        for (i, slot) in out.iter_mut().enumerate() {
            f(i, slot);
        }
    }
}

/// Collect `f(i)` for `i in 0..n` into a fresh Vec.
pub fn map_collect<T, F>(n: usize, f: F) -> Vec<T>
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

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fill_matches_sequential() {
        let mut a = vec![0usize; 257];
        fill_indexed(&mut a, |i| i * i);
        assert!(a.iter().enumerate().all(|(i, &v)| v == i * i));
        let b = map_collect(257, |i| i * i);
        assert_eq!(a, b);
    }
}
