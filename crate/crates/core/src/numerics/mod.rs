//! Dense linear-algebra and small convex-solver kernels.
//!
//! Everything here is self-contained: the matrices in this artifact have at
//! most a few dozen rows (K tasks times G groups), so a Gram-matrix Jacobi
//! eigendecomposition covers the SVD needs exactly.

mod matrix;
mod minnorm;
mod rng;
mod svd;

pub use matrix::Matrix;
pub use minnorm::{
    frank_wolfe_min_norm, min_norm_point_2, project_to_simplex, SimplexWeights,
};
pub use rng::Rng;
pub use svd::{
    jacobi_symmetric_eigen, qr_orthonormalize, random_orthonormal, randomized_range_basis,
    thin_svd,
};

/// Default relative singular-value cutoff separating rank deficiency from
/// 64-bit roundoff.
pub const DEFAULT_REL_CUTOFF: f64 = 1e-8;
