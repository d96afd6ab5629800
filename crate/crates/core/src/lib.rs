//! Edge-symbol analysis for the conductivity operator near a conical point.
//!
//! The crate discretises the model operator `σ₀(∂_r² − |ξ|²)` on the half-line
//! on graded meshes, tracks its smallest singular values under refinement to
//! decide Fredholm behaviour in weighted spaces `K^{s,γ}`, builds bordered
//! (boundary / coboundary) augmentations, computes radial Dirichlet-to-Neumann
//! spectra, and checks the finite-dimensional splitting lemma.

pub mod algebraic;
pub mod calderon;
pub mod edgesym;
pub mod fredholm;
pub mod linalg;
pub mod mesh;
pub mod report;
pub mod wspace;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("mesh too coarse: {0}")]
    MeshTooCoarse(String),
    #[error("rule not finite at r = {r}")]
    NonFiniteRule { r: f64 },
    #[error("singular system: {0}")]
    Singular(String),
    #[error("cannot classify: {0}")]
    Unclassifiable(String),
    #[error("operator not certified: {0}")]
    NotCertified(String),
    #[error("orthogonality violated: {0}")]
    Orthogonality(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("profile error: {0}")]
    Profile(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
