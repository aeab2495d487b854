//! Orthonormal basis of the gradient subspace and projection against it.
//!
//! The basis is rebuilt from the stacked gradient matrix at every training
//! step; four construction methods back the decomposition ablation.

use crate::error::{Error, Result};
use crate::numerics::{
    qr_orthonormalize, random_orthonormal, randomized_range_basis, thin_svd, Matrix, Rng,
    DEFAULT_REL_CUTOFF,
};

/// How the orthonormal basis is constructed from the stacked gradients.
#[derive(Debug, Clone, PartialEq)]
pub enum BasisMethod {
    /// Right-singular vectors of the stacked gradient matrix.
    Svd,
    /// Modified Gram-Schmidt over the rows, in row order.
    Qr,
    /// Data-independent random orthonormal rows of the given dimension.
    Random { r: usize },
    /// Randomized range finder with sketch size `target_r + oversample`.
    RandDec { target_r: usize, oversample: usize },
}

impl BasisMethod {
    /// Parse a config string; `r` is the stacked row count K·G used to size
    /// the data-independent and sketched variants.
    pub fn from_name(name: &str, rows: usize, cols: usize) -> Result<Self> {
        match name {
            "svd" => Ok(BasisMethod::Svd),
            "qr" => Ok(BasisMethod::Qr),
            "random" => Ok(BasisMethod::Random { r: rows.min(cols) }),
            "randdec" => Ok(BasisMethod::RandDec { target_r: rows, oversample: 4 }),
            other => Err(Error::Config(format!("unknown basis method '{other}'"))),
        }
    }
}

/// Row-orthonormal basis of the gradient subspace, tagged with how it was
/// built and the row count of the matrix it came from.
#[derive(Debug, Clone)]
pub struct OrthogonalBasis {
    vectors: Matrix,
    method: BasisMethod,
    source_rank: usize,
}

impl OrthogonalBasis {
    pub fn vectors(&self) -> &Matrix {
        &self.vectors
    }

    pub fn method(&self) -> &BasisMethod {
        &self.method
    }

    pub fn source_rank(&self) -> usize {
        self.source_rank
    }

    /// Number of basis vectors r.
    pub fn rank(&self) -> usize {
        self.vectors.rows()
    }

    /// Ambient dimension D.
    pub fn dim(&self) -> usize {
        self.vectors.cols()
    }
}

/// Build the basis of the span of the rows of `M` (or a random subspace for
/// [`BasisMethod::Random`]).
pub fn build_basis(m: &Matrix, method: &BasisMethod, rng: &mut Rng) -> Result<OrthogonalBasis> {
    if m.rows() == 0 {
        return Err(Error::InvalidInput("build_basis: empty gradient matrix".into()));
    }
    m.check_finite("build_basis")?;
    let vectors = match method {
        BasisMethod::Svd => thin_svd(m, DEFAULT_REL_CUTOFF)?.1,
        BasisMethod::Qr => qr_orthonormalize(m, DEFAULT_REL_CUTOFF)?,
        BasisMethod::Random { r } => random_orthonormal((*r).min(m.cols()), m.cols(), rng)?,
        BasisMethod::RandDec { target_r, oversample } => {
            randomized_range_basis(m, *target_r, *oversample, rng)?
        }
    };
    Ok(OrthogonalBasis { vectors, method: method.clone(), source_rank: m.rows() })
}

/// Coordinates of `g` on the basis: p[u] = b_u · g.
pub fn project(basis: &OrthogonalBasis, g: &[f64]) -> Result<Vec<f64>> {
    if g.len() != basis.dim() {
        return Err(Error::InvalidInput(format!(
            "project: vector length {} does not match basis dimension {}",
            g.len(),
            basis.dim()
        )));
    }
    Ok(basis.vectors.matvec(g))
}

/// Σ_u p[u]·b_u back in the ambient space.
pub fn reconstruct(basis: &OrthogonalBasis, p: &[f64]) -> Result<Vec<f64>> {
    if p.len() != basis.rank() {
        return Err(Error::InvalidInput(format!(
            "reconstruct: coordinate length {} does not match basis rank {}",
            p.len(),
            basis.rank()
        )));
    }
    Ok(basis.vectors.rows_combination(p))
}
