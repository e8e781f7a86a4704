//! Damped-wave spectral analysis on a lumpy torus of revolution.

#[cfg(feature = "cli")]
pub mod cli;
pub mod error;
pub mod evolution;
pub mod geometry;
pub mod hfio;
pub mod jet;
pub mod linalg;
pub mod quad;
pub mod quantize;
pub mod quasimode;
pub mod resolvent;
pub mod spectral_oracle;
pub mod transfer;
pub mod wkb;

pub use error::{Error, Result};

/// Order-preserving map, parallel when the `parallel` feature is on.
pub fn par_map<T: Sync, U: Send>(items: &[T], f: impl Fn(&T) -> U + Sync + Send) -> Vec<U> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}
