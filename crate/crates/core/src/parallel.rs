//! Optional chunked parallelism for element loops.
//!
//! The thread count defaults to 1, which keeps every reduction sequential and
//! bitwise reproducible. With `n > 1` threads, each sweep is split into `n`
//! contiguous chunks whose partial results are combined in chunk order, so the
//! output is still deterministic for a fixed thread count. The CLI wires this
//! to the `CAVSOLVE_THREADS` environment variable.

use std::sync::atomic::{AtomicUsize, Ordering};

static THREADS: AtomicUsize = AtomicUsize::new(1);

/// Set the number of threads used by element sweeps (clamped to at least 1).
pub fn set_threads(n: usize) {
    THREADS.store(n.max(1), Ordering::Relaxed);
}

/// Current thread count for element sweeps.
pub fn threads() -> usize {
    THREADS.load(Ordering::Relaxed)
}

/// Split `0..len` into one contiguous range per thread and map each range on
/// its own thread. Results come back in chunk order.
pub(crate) fn map_chunks<R, F>(len: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(std::ops::Range<usize>) -> R + Sync,
{
    let n = threads().min(len.max(1));
    if n <= 1 {
        return vec![f(0..len)];
    }
    let chunk = len.div_ceil(n);
    let ranges: Vec<_> = (0..n)
        .map(|i| (i * chunk).min(len)..((i + 1) * chunk).min(len))
        .collect();
    std::thread::scope(|scope| {
        let handles: Vec<_> = ranges
            .into_iter()
            .map(|r| {
                let f = &f;
                scope.spawn(move || f(r))
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    })
}
