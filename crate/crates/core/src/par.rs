//! Parallel map helpers. `NO_PARALLEL=1` forces serial execution; results are
//! identical either way because every closure is pure and outputs are
//! collected in index order.

use std::sync::OnceLock;

use rayon::prelude::*;

pub fn serial() -> bool {
    static SERIAL: OnceLock<bool> = OnceLock::new();
    *SERIAL.get_or_init(|| {
        std::env::var("NO_PARALLEL")
            .map(|v| v == "1")
            .unwrap_or(false)
    })
}

pub fn map_range<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    if serial() {
        (0..n).map(f).collect()
    } else {
        (0..n).into_par_iter().map(f).collect()
    }
}

pub fn map_slice<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    if serial() {
        items.iter().map(f).collect()
    } else {
        items.par_iter().map(f).collect()
    }
}

/// Splits `0..n` into contiguous chunks and maps each chunk.
pub fn map_chunks<R, F>(n: usize, chunk: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(std::ops::Range<usize>) -> R + Sync + Send,
{
    let chunk = chunk.max(1);
    let count = n.div_ceil(chunk);
    map_range(count, |c| f(c * chunk..((c + 1) * chunk).min(n)))
}
