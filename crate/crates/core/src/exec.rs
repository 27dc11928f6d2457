//! Data-parallel helpers. With the `parallel` feature, work is spread over the
//! rayon pool; without it, or when a caller asks for sequential execution,
//! everything runs on the calling thread. Results are always returned in
//! index order, so output never depends on scheduling.

/// How independent work items are executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// Whether this build can actually run in parallel.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// `(0..n).map(f).collect()`, possibly in parallel.
pub fn map_indices<R, F>(n: usize, exec: Execution, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}

/// Splitmix64 finalizer; derives independent seeds from a root seed and a
/// path of indices (epoch, particle, purpose, ...).
pub fn derive_seed(root: u64, path: &[u64]) -> u64 {
    let mut x = root ^ 0x9E37_79B9_7F4A_7C15;
    for &p in path {
        x = mix(x ^ mix(p.wrapping_add(0xD1B5_4A32_D192_ED03)));
    }
    mix(x)
}

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
