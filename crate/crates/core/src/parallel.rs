//! Order-preserving data parallelism, serial without the `parallel` feature.

/// `(0..n).map(f)` collected in index order.
#[cfg(feature = "parallel")]
pub fn map_indexed<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    (0..n).map(f).collect()
}

/// Caps the worker count of all parallel sections; call once at startup.
#[cfg(feature = "parallel")]
pub fn set_threads(n: usize) -> Result<(), String> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

#[cfg(not(feature = "parallel"))]
pub fn set_threads(_n: usize) -> Result<(), String> {
    Ok(())
}
