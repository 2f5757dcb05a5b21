//! Runtime switch between rayon-backed and sequential execution.
//!
//! The `parallel` feature compiles in rayon; this module adds a runtime
//! toggle on top so benchmarks can compare both paths in one binary and the
//! `ROBUST_CORESET_THREADS` env var can cap the pool. Results never depend
//! on the path taken: every parallel reduction here is order-independent.

use std::sync::atomic::{AtomicBool, Ordering};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Derive an independent RNG stream from a base seed and a stage label, so
/// stages scheduled in parallel draw the same randomness as a serial run.
pub fn stream_rng(seed: u64, stage: &str) -> ChaCha8Rng {
    // FNV-1a over the stage label, mixed into the seed.
    let mut h: u64 = 0xcbf29ce484222325;
    for b in stage.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    ChaCha8Rng::seed_from_u64(seed ^ h)
}

static PARALLEL: AtomicBool = AtomicBool::new(true);

/// Enable or disable data parallelism at runtime. Returns the old value.
pub fn set_parallel(on: bool) -> bool {
    PARALLEL.swap(on, Ordering::SeqCst)
}

/// Whether parallel execution is both compiled in and currently enabled.
pub fn parallel_enabled() -> bool {
    cfg!(feature = "parallel") && PARALLEL.load(Ordering::SeqCst)
}

/// Apply the `ROBUST_CORESET_THREADS` env var: 0 or unset = auto,
/// 1 = force sequential, n>1 = build a global rayon pool with n threads.
/// Called once by binaries; safe to call again (pool build errors ignored).
pub fn init_threads_from_env() {
    let Ok(val) = std::env::var("ROBUST_CORESET_THREADS") else {
        return;
    };
    let Ok(n) = val.trim().parse::<usize>() else {
        return;
    };
    match n {
        0 => {}
        1 => {
            set_parallel(false);
        }
        n => {
            #[cfg(feature = "parallel")]
            {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            let _ = n;
        }
    }
}

/// Map over indices 0..len, in parallel when enabled.
pub fn map_indexed<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel_enabled() {
        use rayon::prelude::*;
        return (0..len).into_par_iter().map(f).collect();
    }
    (0..len).map(f).collect()
}

/// Fold the results of `f(0..len)` with an associative, commutative combine.
pub fn reduce_indexed<T, F, G>(len: usize, identity: T, f: F, combine: G) -> T
where
    T: Send + Sync + Clone,
    F: Fn(usize) -> T + Sync + Send,
    G: Fn(T, T) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel_enabled() {
        use rayon::prelude::*;
        return (0..len)
            .into_par_iter()
            .map(f)
            .reduce(|| identity.clone(), &combine);
    }
    (0..len).map(f).fold(identity, combine)
}
