//! Mesh-less solver for the generalized Graetz problem in layered cylindrical
//! and planar ducts.
//!
//! The transverse eigenproblem is solved through closure functions: exact
//! log-polynomial coefficients of the power series of each eigen-profile in
//! the eigenvalue. Temperature fields are then assembled from the resulting
//! modes in closed form.

pub mod closure;
pub mod domain;
pub mod error;
pub mod fields;
pub mod logpoly;
pub mod oracle;
pub mod scalar;
pub mod spectrum;

pub use error::{Error, Result};

/// Round-trip decimal formatting (17 significant digits) used by every CSV writer.
pub fn fmt_sci(x: f64) -> String {
    format!("{x:.16e}")
}

/// Order-preserving parallel map over scoped threads.
pub(crate) fn par_map<T: Sync, U: Send>(items: &[T], f: impl Fn(&T) -> U + Sync) -> Vec<U> {
    let workers = std::thread::available_parallelism()
        .map_or(1, |n| n.get())
        .min(items.len().max(1));
    if workers <= 1 {
        return items.iter().map(f).collect();
    }
    let chunk = items.len().div_ceil(workers);
    std::thread::scope(|s| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|c| s.spawn(|| c.iter().map(&f).collect::<Vec<U>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("worker panicked"))
            .collect()
    })
}
