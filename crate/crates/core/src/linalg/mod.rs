//! Dense real-matrix kernel: thin SVD, norms, projections onto orthonormal
//! bases, leave-one-column-out slicing and subspace distances.

mod lanczos;
mod matrix;
mod subspace;
mod svd;

pub use matrix::{axpy, dot, norm2, squared_distance, Matrix};
pub use subspace::{
    project_split, projector_distance, projector_distance_explicit, projector_distance_spectral,
    SubspaceBasis,
};
pub use svd::{
    dense_svd, numerical_rank, operator_norm, singular_values, thin_svd, Svd, ITERATIONS_PER_DIM,
    RANK_TOLERANCE,
};
