//! Command-line experiment runner: training runs, invariant checks and the
//! singular-exponent solver.

pub mod config;
pub mod singular;
pub mod train;
pub mod verify;

/// Caps the global thread pool at `RECONN_THREADS` when it is set.
pub fn configure_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("RECONN_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| anyhow::anyhow!("RECONN_THREADS must be a positive integer, got {v:?}"))?;
        if n == 0 {
            anyhow::bail!("RECONN_THREADS must be positive");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}
