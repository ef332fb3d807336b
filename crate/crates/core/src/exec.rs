//! Ordered data-parallel maps.
//!
//! With the `parallel` feature the maps run on rayon; without it, or when
//! `workers == 1`, they run sequentially. Results always come back in input
//! order, so any reduction done by the caller sees the same sequence of
//! partial results whatever the worker count.

/// `0` means "use every available core".
pub type Workers = usize;

/// Whether parallel execution is compiled in.
pub const PARALLEL_ENABLED: bool = cfg!(feature = "parallel");

pub fn map_indexed<R, F>(n: usize, workers: Workers, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if workers != 1 && n > 1 {
        use rayon::prelude::*;
        return in_pool(workers, || (0..n).into_par_iter().map(&f).collect());
    }
    let _ = workers;
    (0..n).map(f).collect()
}

/// Map `f` over consecutive chunks of `items` of length `chunk`.
pub fn map_chunks<T, R, F>(items: &[T], chunk: usize, workers: Workers, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&[T]) -> R + Sync + Send,
{
    let chunk = chunk.max(1);
    #[cfg(feature = "parallel")]
    if workers != 1 && items.len() > chunk {
        use rayon::prelude::*;
        return in_pool(workers, || items.par_chunks(chunk).map(&f).collect());
    }
    let _ = workers;
    items.chunks(chunk).map(f).collect()
}

#[cfg(feature = "parallel")]
fn in_pool<R: Send>(workers: Workers, op: impl FnOnce() -> R + Send) -> R {
    if workers == 0 {
        return op();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(op),
        Err(_) => op(),
    }
}
