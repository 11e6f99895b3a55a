//! Numerical thresholds shared across the crate.
//!
//! Certification thresholds sit about two orders above double-precision noise
//! for the matrix sizes this crate targets (n + m ≤ 8).

/// Smallest admissible singular value before an inversion is refused.
pub const SINGULAR: f64 = 1e-12;

/// Max-entry defect tolerated by unitarity and Hermiticity certificates.
pub const UNITARITY: f64 = 1e-10;

/// Minimum gap between Hermitian eigenvalues.
pub const EIG_GAP: f64 = 1e-8;

/// Margin used for general-position tests (unit-circle eigenvalues, kernel
/// certificates, vanishing first coordinates).
pub const DEGENERATE: f64 = 1e-8;

/// Minimum separation of arguments in the ordered chart, and from arg 0.
pub const ORDER_GAP: f64 = 1e-10;

/// Runtime-adjustable thresholds. `Default` gives the constants above.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Tolerances {
    pub singular: f64,
    pub unitarity: f64,
    pub eig_gap: f64,
    pub degenerate: f64,
    pub order_gap: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            singular: SINGULAR,
            unitarity: UNITARITY,
            eig_gap: EIG_GAP,
            degenerate: DEGENERATE,
            order_gap: ORDER_GAP,
        }
    }
}
