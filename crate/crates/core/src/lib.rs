//! Leave-one-out singular subspace perturbation bounds and the spectral
//! clustering procedures built on them.
//!
//! The crate is `no_std` (it needs `alloc`) and holds only pure numerical
//! code. File formats, the command line and the Monte Carlo driver live in
//! the companion `loocluster` crate.
//!
//! Modules:
//! - [`linalg`]: dense column-major matrices, thin SVD, subspace distances.
//! - [`perturb`]: Wedin and leave-one-out bounds and the exact distance they bound.
//! - [`mixture`]: mixture-model instance generation and gate diagnostics.
//! - [`cluster`]: k-means, spectral clustering variants, the likelihood
//!   ratio test, the misclustering loss and entrywise diagnostics.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod cluster;
pub mod error;
pub mod linalg;
pub mod mixture;
pub mod perturb;

pub use error::{Error, Result};
pub use linalg::{Matrix, SubspaceBasis, Svd};
