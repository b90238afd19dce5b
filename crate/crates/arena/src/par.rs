//! Data-parallel map used by sweeps and Monte-Carlo loops.
//!
//! With the `parallel` feature the map runs on a rayon pool whose size can be
//! capped through `ASGD_ARENA_THREADS`; without it the same closure runs
//! sequentially. Output order always follows input order.

pub const THREADS_ENV: &str = "ASGD_ARENA_THREADS";

/// Thread cap requested through the environment, if any.
pub fn thread_cap() -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&t| t > 0)
}

#[cfg(feature = "parallel")]
pub fn map<T, R, F>(items: Vec<T>, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync + Send,
{
    use rayon::prelude::*;
    match thread_cap() {
        Some(cap) => match rayon::ThreadPoolBuilder::new().num_threads(cap).build() {
            Ok(pool) => pool.install(|| items.into_par_iter().map(&f).collect()),
            Err(_) => items.into_iter().map(f).collect(),
        },
        None => items.into_par_iter().map(f).collect(),
    }
}

#[cfg(not(feature = "parallel"))]
pub fn map<T, R, F>(items: Vec<T>, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync + Send,
{
    sequential_map(items, f)
}

/// Sequential reference path, always available for comparison benches.
pub fn sequential_map<T, R, F>(items: Vec<T>, f: F) -> Vec<R>
where
    F: Fn(T) -> R,
{
    items.into_iter().map(f).collect()
}

/// Map over `0..count`.
pub fn map_range<R, F>(count: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    map((0..count).collect(), f)
}
