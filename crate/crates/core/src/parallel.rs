//! Thread-pool sizing for the FFT and diagnostics loops.

use crate::error::{Error, Result};

pub const THREADS_ENV: &str = "MHD25_THREADS";

/// Caps the global rayon pool at `MHD25_THREADS` when it is set. Returns
/// the cap, or `None` when the default (all cores) is kept. Must run before
/// any parallel work.
pub fn init_thread_pool_from_env() -> Result<Option<usize>> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(None);
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Error::InvalidConfig(format!("{THREADS_ENV} must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::InvalidConfig(format!("cannot size the thread pool: {e}")))?;
    Ok(Some(n))
}
