use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Why a sample falls outside the general-position set where the spectral
/// chart is defined. Monte Carlo drivers count these instead of retrying.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DegenerateReason {
    /// The lower-right block has an eigenvalue on the unit circle.
    UnitCircleDelta,
    /// Two circle points (or two eigenvalues of the Cayley block) collide.
    EigCollision,
    /// The first coordinate of a normalized eigenvector vanishes.
    ZeroFirstCoordinate,
    /// `I + U` is numerically singular.
    UPlusOneSingular,
    /// `χ(t_k) + I` does not have a one-dimensional kernel.
    KernelDimension,
    /// Arguments tie or sit on the boundary of the ordering region.
    TieOrBoundary,
}

impl DegenerateReason {
    pub fn as_str(self) -> &'static str {
        match self {
            DegenerateReason::UnitCircleDelta => "UnitCircleDelta",
            DegenerateReason::EigCollision => "EigCollision",
            DegenerateReason::ZeroFirstCoordinate => "ZeroFirstCoordinate",
            DegenerateReason::UPlusOneSingular => "UPlusOneSingular",
            DegenerateReason::KernelDimension => "KernelDimension",
            DegenerateReason::TieOrBoundary => "TieOrBoundary",
        }
    }
}

impl fmt::Display for DegenerateReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("singular matrix at stage `{stage}` (smallest singular value {sigma_min:.3e})")]
    Singularity { stage: &'static str, sigma_min: f64 },

    #[error("degenerate spectrum: eigenvalue gap {gap:.3e}")]
    DegenerateSpectrum { gap: f64 },

    #[error("matrix is not Hermitian (defect {0:.3e})")]
    NotHermitian(f64),

    #[error("matrix is not anti-Hermitian (defect {0:.3e})")]
    NotAntiHermitian(f64),

    #[error("matrix is not unitary (defect {0:.3e})")]
    NotUnitary(f64),

    #[error("pole of the characteristic function at λ = {lambda}")]
    Pole { lambda: Complex64 },

    #[error("degenerate sample: {0}")]
    DegenerateSample(DegenerateReason),

    #[error("reconstruction failed: {0}")]
    Reconstruction(String),

    #[error("density domain error: {0}")]
    Domain(String),

    #[error("MCMC chain stuck: acceptance rate {0:.4} after adaptation")]
    ChainStuck(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    /// The degeneracy reason, if this error marks a measure-zero sample.
    pub fn degenerate_reason(&self) -> Option<DegenerateReason> {
        match self {
            Error::DegenerateSample(r) => Some(*r),
            _ => None,
        }
    }
}
