//! Support vector classification with a simulated quantum fidelity kernel,
//! binary-weight training through QUBO annealing, and COBYLA tuning of the
//! kernel parameters.

pub mod anneal;
pub mod cli;
pub mod datagen;
pub mod error;
pub mod kernel;
pub mod linalg;
pub mod optimize;
pub mod qkernel;
pub mod qubo;

pub use error::{Error, Result};

/// Environment variable capping worker threads; `0` or unset means one per core.
pub const THREADS_ENV: &str = "TRIQSVM_THREADS";

/// Configures the global rayon pool from [`THREADS_ENV`]. Later calls are no-ops.
pub fn init_thread_pool() -> Result<()> {
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) => v.trim().parse::<usize>().map_err(|_| {
            Error::InvalidParameter(format!(
                "{THREADS_ENV} must be a non-negative integer, got `{v}`"
            ))
        })?,
        Err(_) => 0,
    };
    // An already-initialised pool is fine.
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global();
    Ok(())
}
