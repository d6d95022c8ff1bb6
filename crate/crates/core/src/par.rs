//! Row-parallel loop helpers.
//!
//! Every data-parallel loop in the crate goes through these helpers. With the
//! `parallel` feature they dispatch rows to rayon; without it (or inside
//! [`sequential`]) they run in order on the calling thread. Reductions always
//! collect per-row partial sums and add them in row order, so results are
//! bitwise identical between the two paths.

use std::cell::Cell;

thread_local! {
    static FORCE_SEQUENTIAL: Cell<bool> = const { Cell::new(false) };
}

/// Run `f` with all row loops on the current thread forced sequential.
pub fn sequential<R>(f: impl FnOnce() -> R) -> R {
    struct Reset(bool);
    impl Drop for Reset {
        fn drop(&mut self) {
            FORCE_SEQUENTIAL.with(|c| c.set(self.0));
        }
    }
    let _reset = Reset(FORCE_SEQUENTIAL.with(|c| c.replace(true)));
    f()
}

/// Whether row loops on this thread will use the thread pool.
pub fn is_parallel() -> bool {
    cfg!(feature = "parallel") && !FORCE_SEQUENTIAL.with(|c| c.get())
}

/// Apply `f(row_index, row)` to each `row_len` chunk of `data`.
pub(crate) fn for_each_row<T, F>(data: &mut [T], row_len: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if is_parallel() {
        use rayon::prelude::*;
        data.par_chunks_mut(row_len)
            .enumerate()
            .for_each(|(i, row)| f(i, row));
        return;
    }
    data.chunks_mut(row_len)
        .enumerate()
        .for_each(|(i, row)| f(i, row));
}

/// Like [`for_each_row`] but with a per-worker scratch value built by `init`.
pub(crate) fn for_each_row_with<T, S, I, F>(data: &mut [T], row_len: usize, init: I, f: F)
where
    T: Send,
    I: Fn() -> S + Sync + Send,
    F: Fn(&mut S, &mut [T]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if is_parallel() {
        use rayon::prelude::*;
        data.par_chunks_mut(row_len)
            .for_each_init(&init, |s, row| f(s, row));
        return;
    }
    let mut scratch = init();
    data.chunks_mut(row_len).for_each(|row| f(&mut scratch, row));
}

/// Build a vector of `rows * row_len` values from a per-row generator.
pub(crate) fn build_rows<T, F>(rows: usize, row_len: usize, f: F) -> Vec<T>
where
    T: Send + Default + Clone,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    let mut out = vec![T::default(); rows * row_len];
    for_each_row(&mut out, row_len, f);
    out
}

/// Deterministic sum of `f(row)` over `rows` rows.
pub(crate) fn sum_rows<F>(rows: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let partials: Vec<f64> = map_indices(rows, f);
    partials.iter().sum()
}

/// `(0..count).map(f).collect()`, in parallel when enabled. Order preserved.
pub fn map_indices<R, F>(count: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if is_parallel() {
        use rayon::prelude::*;
        return (0..count).into_par_iter().map(f).collect();
    }
    (0..count).map(f).collect()
}
