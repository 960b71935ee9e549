use thiserror::Error;

use crate::lattice::Vec3;

pub type Result<T> = std::result::Result<T, Error>;

/// One problem found while validating a run configuration.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct ConfigIssue {
    pub path: String,
    pub message: String,
}

impl std::fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("lattice vectors are degenerate (|det| = {det:e})")]
    DegenerateLattice { det: f64 },

    #[error("unit cell is not neutral: zero-mode coefficient {coefficient:e}")]
    NonNeutralCell { coefficient: f64 },

    #[error("Coulomb kernel is singular at q+K = {wavevector:?} with nonzero coefficient")]
    CoulombSingularity { wavevector: Vec3 },

    #[error("eigensolver failed at q = {q:?}: {message}")]
    EigensolverFailure { q: Vec3, message: String },

    #[error("system is not an insulator (gap = {gap:e} hartree)")]
    NotAnInsulator { gap: f64 },

    #[error("SCF did not converge in {iterations} iterations (last residual {last:e})")]
    ScfNotConverged {
        iterations: usize,
        last: f64,
        history: Vec<f64>,
    },

    #[error("wavevector {q:?} is not commensurate with the q-grid")]
    IncommensurateQ { q: Vec3 },

    #[error("energy denominator {denominator:e} below half the gap")]
    GapViolated { denominator: f64 },

    #[error("contour node {node} lies within {distance:e} of the spectrum")]
    ContourTouchesSpectrum { node: usize, distance: f64 },

    #[error("local-field body matrix is numerically singular (condition number {condition:e})")]
    SingularBody { condition: f64 },

    #[error("perturbation too large for the linear regime: {norm:e} >= {bound:e}")]
    PerturbationTooLarge { norm: f64, bound: f64 },

    #[error("time step too coarse: dt * max transition frequency = {product}")]
    StepTooCoarse { product: f64 },

    #[error("corrector did not converge at step {step} (change {change:e})")]
    CorrectorNotConverged { step: usize, change: f64 },

    #[error("invalid configuration ({} issue(s))", .0.len())]
    ConfigInvalid(Vec<ConfigIssue>),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("linear algebra failure: {0}")]
    Linalg(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl From<ndarray_linalg::error::LinalgError> for Error {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        Error::Linalg(e.to_string())
    }
}
