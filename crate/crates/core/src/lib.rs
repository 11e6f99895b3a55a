//! Characteristic functions of block unitary matrices, spectral coordinates
//! of conjugacy classes of U(n+m) under U(m), and the radial part of Haar
//! measure in those coordinates.
//!
//! The crate is organized bottom-up:
//!
//! - [`matrix`]: dense complex matrices, Haar sampling, Cayley transform.
//! - [`charfn`]: evaluation of `χ(λ) = α + λβ(1 − λδ)⁻¹γ`.
//! - [`spectral`]: the coordinates `(t, C, U)` and their inverse map.
//! - [`density`]: closed-form densities in log scale.
//! - [`verify`]: Monte Carlo checks of the densities against Haar sampling.

pub mod charfn;
pub mod density;
pub mod error;
pub mod matrix;
pub mod spectral;
pub mod tol;
pub mod verify;

pub use charfn::{lemma2_chain, CharFunction};
pub use density::{DensityValue, MainDensity, Reference};
pub use error::{DegenerateReason, Error, Result};
pub use matrix::{cayley, haar_unitary, hermitian_eig, BlockMatrix, BlockUnitary, ComplexMatrix, C64};
pub use spectral::{extract_direct, extract_via_cayley, reconstruct, SpectralData};
pub use tol::Tolerances;
