//! Optional sample-level parallelism, controlled by the `CMCO_THREADS`
//! environment variable (default 1). Each sample's computation is seeded
//! independently of iteration order and results are collected in index
//! order, so outputs are identical at any thread count.

use cmco::error::{CmcoError, Result};

pub const THREADS_ENV: &str = "CMCO_THREADS";

pub fn thread_count() -> Result<usize> {
    match std::env::var(THREADS_ENV) {
        Err(std::env::VarError::NotPresent) => Ok(1),
        Err(e) => Err(CmcoError::InvalidConfig(format!("{THREADS_ENV}: {e}"))),
        Ok(raw) => raw
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n >= 1)
            .ok_or_else(|| {
                CmcoError::InvalidConfig(format!(
                    "{THREADS_ENV} must be a positive integer, got {raw:?}"
                ))
            }),
    }
}

/// Map over sample indices `0..n`, serially or on a rayon pool.
pub fn map_samples<T: Send>(
    n: usize,
    f: impl Fn(usize) -> Result<T> + Sync + Send,
) -> Result<Vec<T>> {
    let threads = thread_count()?;
    if threads <= 1 {
        (0..n).map(f).collect()
    } else {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| CmcoError::InvalidConfig(format!("thread pool: {e}")))?;
        pool.install(|| (0..n).into_par_iter().map(f).collect())
    }
}
