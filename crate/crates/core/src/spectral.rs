//! Spectral coordinates `(t, C, U)` of a block unitary modulo conjugation by
//! the lower block.
//!
//! The circle points `t_k` are the solutions of `det(χ(t) + I) = 0`; `c_k`
//! spans the kernel of `χ(t_k) + I`, scaled so that
//! `⟨χ′(t_k)c_k, c_k⟩ = −1/t_k` and rotated so `c_k¹ > 0`; and `U = χ(−1)`.
//! Points are ordered by strictly decreasing argument in `(0, 2π)`.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::charfn::CharFunction;
use crate::error::{DegenerateReason, Error, Result};
use crate::matrix::{cayley, hermitian_eig, BlockUnitary, ComplexMatrix, C64, I, ONE};
use crate::tol::{self, Tolerances};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpectral", into = "RawSpectral")]
pub struct SpectralData {
    n: usize,
    m: usize,
    t: Vec<C64>,
    c: ComplexMatrix,
    u: ComplexMatrix,
}

#[derive(Serialize, Deserialize)]
struct RawSpectral {
    n: usize,
    m: usize,
    t: Vec<[f64; 2]>,
    #[serde(rename = "C")]
    c: ComplexMatrix,
    #[serde(rename = "U")]
    u: ComplexMatrix,
}

impl TryFrom<RawSpectral> for SpectralData {
    type Error = Error;

    fn try_from(raw: RawSpectral) -> Result<Self> {
        let t = raw.t.iter().map(|[re, im]| C64::new(*re, *im)).collect();
        let sd = SpectralData { n: raw.n, m: raw.m, t, c: raw.c, u: raw.u };
        sd.validate(&Tolerances::default())?;
        Ok(sd)
    }
}

impl From<SpectralData> for RawSpectral {
    fn from(sd: SpectralData) -> Self {
        RawSpectral { n: sd.n, m: sd.m, t: sd.t.iter().map(|z| [z.re, z.im]).collect(), c: sd.c, u: sd.u }
    }
}

/// Argument in `[0, 2π)`.
pub fn arg_2pi(z: C64) -> f64 {
    let a = z.arg();
    if a < 0.0 {
        a + TAU
    } else {
        a
    }
}

impl SpectralData {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn t(&self) -> &[C64] {
        &self.t
    }

    /// Arguments of the circle points, descending, in `(0, 2π)`.
    pub fn angles(&self) -> Vec<f64> {
        self.t.iter().map(|&z| arg_2pi(z)).collect()
    }

    pub fn c(&self) -> &ComplexMatrix {
        &self.c
    }

    pub fn u(&self) -> &ComplexMatrix {
        &self.u
    }

    /// Checks the chart invariants that do not need a realization: shapes,
    /// unit modulus and strict ordering of `t`, positive real first row of C,
    /// unitarity of U.
    pub fn validate(&self, tols: &Tolerances) -> Result<()> {
        let (n, m) = (self.n, self.m);
        if n == 0 || m == 0 {
            return Err(Error::InvalidArgument(format!("block sizes must be positive, got ({n}, {m})")));
        }
        if self.t.len() != m || self.c.rows() != n || self.c.cols() != m || self.u.rows() != n || self.u.cols() != n {
            return Err(Error::Shape(format!(
                "spectral data for ({n}, {m}) has {} points, C {}x{}, U {}x{}",
                self.t.len(),
                self.c.rows(),
                self.c.cols(),
                self.u.rows(),
                self.u.cols()
            )));
        }
        if !self.c.is_finite() || !self.u.is_finite() || self.t.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidArgument("non-finite spectral data".into()));
        }
        if let Some(z) = self.t.iter().find(|z| (z.norm() - 1.0).abs() > tols.unitarity) {
            return Err(Error::Domain(format!("|t| = {} is off the unit circle", z.norm())));
        }
        let angles = self.angles();
        let ordered = angles.windows(2).all(|w| w[0] - w[1] >= tols.order_gap);
        let inside = angles[0] < TAU - tols.order_gap && angles[m - 1] >= tols.order_gap;
        if !ordered || !inside {
            return Err(Error::DegenerateSample(DegenerateReason::TieOrBoundary));
        }
        for k in 0..m {
            let c1 = self.c[(0, k)];
            if c1.im.abs() > 1e-12 || c1.re < tols.degenerate {
                return Err(Error::DegenerateSample(DegenerateReason::ZeroFirstCoordinate));
            }
        }
        let defect = self.u.unitarity_defect();
        if !(defect <= tols.unitarity) {
            return Err(Error::NotUnitary(defect));
        }
        Ok(())
    }

    /// The general-position conditions beyond [`validate`](Self::validate):
    /// `t_k ≠ −1` and `I + U` invertible.
    pub fn check_general_position(&self, tols: &Tolerances) -> Result<()> {
        if self.t.iter().any(|&z| (ONE + z).norm() <= tols.order_gap) {
            return Err(Error::DegenerateSample(DegenerateReason::TieOrBoundary));
        }
        let s = (&ComplexMatrix::identity(self.n) + &self.u).min_singular_value();
        if !(s >= tols.singular) {
            return Err(Error::DegenerateSample(DegenerateReason::UPlusOneSingular));
        }
        Ok(())
    }

    /// Largest fieldwise discrepancy; infinite when the shapes differ.
    pub fn max_field_diff(&self, other: &Self) -> f64 {
        if self.n != other.n || self.m != other.m {
            return f64::INFINITY;
        }
        let dt = self.t.iter().zip(&other.t).fold(0.0, |acc: f64, (a, b)| acc.max((a - b).norm()));
        dt.max(self.c.max_abs_diff(&other.c)).max(self.u.max_abs_diff(&other.u))
    }

    /// `max_k |t_k ⟨χ′(t_k)c_k, c_k⟩ + 1|` for the characteristic function
    /// of a realization of this data.
    pub fn normalization_residual(&self, f: &CharFunction) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for k in 0..self.m {
            let ck = self.c.column(k);
            let q = quadratic_form(&f.derivative(self.t[k])?, &ck);
            worst = worst.max((self.t[k] * q + ONE).norm());
        }
        Ok(worst)
    }
}

/// `⟨Mv, v⟩ = v* M v`.
pub fn quadratic_form(mat: &ComplexMatrix, v: &[C64]) -> C64 {
    mat.mul_vec(v).iter().zip(v).map(|(a, b)| a * b.conj()).sum()
}

/// Puts raw coordinates in canonical form: circle points sorted by strictly
/// decreasing argument in `(0, 2π)`, columns of C permuted along, and each
/// column rotated so its first entry is real and positive.
pub fn canonicalize(t: &[C64], c: &ComplexMatrix, u: &ComplexMatrix) -> Result<SpectralData> {
    canonicalize_with(t, c, u, &Tolerances::default())
}

pub fn canonicalize_with(t: &[C64], c: &ComplexMatrix, u: &ComplexMatrix, tols: &Tolerances) -> Result<SpectralData> {
    let m = t.len();
    let n = u.rows();
    if c.rows() != n || c.cols() != m || !u.is_square() || m == 0 || n == 0 {
        return Err(Error::Shape(format!("cannot canonicalize {m} points with C {}x{} and U {}x{}", c.rows(), c.cols(), u.rows(), u.cols())));
    }
    if let Some(z) = t.iter().find(|z| (z.norm() - 1.0).abs() > tols.unitarity) {
        return Err(Error::Domain(format!("|t| = {} is off the unit circle", z.norm())));
    }
    let angles: Vec<f64> = t.iter().map(|&z| arg_2pi(z)).collect();
    if angles.iter().any(|&a| a < tols.order_gap || a > TAU - tols.order_gap) {
        return Err(Error::DegenerateSample(DegenerateReason::TieOrBoundary));
    }
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| angles[b].total_cmp(&angles[a]));
    if order.windows(2).any(|w| angles[w[0]] - angles[w[1]] < tols.order_gap) {
        return Err(Error::DegenerateSample(DegenerateReason::TieOrBoundary));
    }
    let mut out = ComplexMatrix::zeros(n, m);
    let mut t_sorted = Vec::with_capacity(m);
    for (k, &src) in order.iter().enumerate() {
        let col = c.column(src);
        let r = col[0].norm();
        if !(r >= tols.degenerate) {
            return Err(Error::DegenerateSample(DegenerateReason::ZeroFirstCoordinate));
        }
        let phase = col[0].conj() / r;
        let mut rotated: Vec<C64> = col.iter().map(|z| z * phase).collect();
        rotated[0] = C64::new(r, 0.0);
        out.set_column(k, &rotated);
        t_sorted.push(t[src] / t[src].norm());
    }
    Ok(SpectralData { n, m, t: t_sorted, c: out, u: u.clone() })
}

fn degenerate(reason: DegenerateReason) -> Error {
    Error::DegenerateSample(reason)
}

fn check_delta_off_circle(g: &BlockUnitary, tols: &Tolerances) -> Result<()> {
    let eig = g.delta().eigenvalues()?;
    if eig.iter().any(|z| (z.norm() - 1.0).abs() < tols.degenerate) {
        return Err(degenerate(DegenerateReason::UnitCircleDelta));
    }
    Ok(())
}

/// Extracts `(t, C, U)` directly from the characteristic function.
///
/// The circle points are the reciprocals of the eigenvalues of
/// `S = δ − γ(I + α)⁻¹β`, since `det(χ(t) + I) = det(I + α) · det(I − tS)`.
/// Each one is certified by the smallest singular value of `χ(t_k) + I`,
/// whose right singular vector gives the unnormalized `c_k`.
pub fn extract_direct(g: &BlockUnitary) -> Result<SpectralData> {
    extract_direct_with(g, &Tolerances::default())
}

pub fn extract_direct_with(g: &BlockUnitary, tols: &Tolerances) -> Result<SpectralData> {
    let (n, m) = (g.n(), g.m());
    check_delta_off_circle(g, tols)?;
    let f = CharFunction::of_unitary(g);

    let one_plus_alpha = &ComplexMatrix::identity(n) + &g.alpha();
    if !(one_plus_alpha.min_singular_value() >= tols.singular) {
        return Err(degenerate(DegenerateReason::KernelDimension));
    }
    let schur = &g.delta() - &(&g.gamma() * &one_plus_alpha.solve(&g.beta())?);
    let s = schur.eigenvalues()?;
    if s.iter().any(|z| (z.norm() - 1.0).abs() > tols.degenerate.sqrt()) {
        return Err(degenerate(DegenerateReason::KernelDimension));
    }
    let t: Vec<C64> = s.iter().map(|z| z.conj() / z.norm()).collect();
    for a in 0..m {
        for b in a + 1..m {
            if (t[a] - t[b]).norm() < tols.eig_gap {
                return Err(degenerate(DegenerateReason::EigCollision));
            }
        }
    }

    let id_n = ComplexMatrix::identity(n);
    let mut c = ComplexMatrix::zeros(n, m);
    for (k, &tk) in t.iter().enumerate() {
        let shifted = &f.eval(tk)? + &id_n;
        let kernel = shifted.kernel_estimate();
        if !(kernel.sigma_min <= tols.degenerate) || kernel.sigma_next <= 100.0 * tols.degenerate {
            return Err(degenerate(DegenerateReason::KernelDimension));
        }
        let v = kernel.vector;
        let r = -tk * quadratic_form(&f.derivative(tk)?, &v);
        if !(r.re > 0.0) || r.im.abs() > 1e-6 * r.re {
            return Err(degenerate(DegenerateReason::KernelDimension));
        }
        let scale = 1.0 / r.re.sqrt();
        c.set_column(k, &v.iter().map(|z| z * scale).collect::<Vec<_>>());
    }
    let u = f.eval(-ONE)?;
    canonicalize_with(&t, &c, &u, tols)
}

/// Extracts `(t, C, U)` through the Cayley transform: with
/// `−i·cayley(g) = [[A, B], [B*, D]]` and `D = V diag(μ) V*`,
/// `t_k = (1 + iμ_k)/(1 − iμ_k)`, `c_k ∝ (1 + t_k)(BV)_k / 2` and
/// `U = −I + 2(I + iA)⁻¹`.
pub fn extract_via_cayley(g: &BlockUnitary) -> Result<SpectralData> {
    extract_via_cayley_with(g, &Tolerances::default())
}

pub fn extract_via_cayley_with(g: &BlockUnitary, tols: &Tolerances) -> Result<SpectralData> {
    check_delta_off_circle(g, tols)?;
    let k = cayley(g.matrix())?.scale(-I).hermitian_part();
    chart_from_cayley_block(&k, g.n(), g.m(), tols)
}

/// Chart coordinates of the Hermitian matrix `K = [[A, B], [B*, D]]`, i.e.
/// of the unitary `cayley(iK)`.
pub fn chart_from_cayley_block(k: &ComplexMatrix, n: usize, m: usize, tols: &Tolerances) -> Result<SpectralData> {
    let a = k.block(0, 0, n, n);
    let b = k.block(0, n, n, m);
    let d = k.block(n, n, m, m);
    let (mu, v) = hermitian_eig(&d).map_err(|e| match e {
        Error::DegenerateSpectrum { .. } => degenerate(DegenerateReason::EigCollision),
        other => other,
    })?;
    let bv = &b * &v;
    let mut t = Vec::with_capacity(m);
    let mut c = ComplexMatrix::zeros(n, m);
    for (j, &mu_j) in mu.iter().enumerate() {
        let tj = (ONE + I * mu_j) / (ONE - I * mu_j);
        let half = (ONE + tj) * 0.5;
        c.set_column(j, &bv.column(j).iter().map(|z| z * half).collect::<Vec<_>>());
        t.push(tj);
    }
    let u = cayley(&a.scale(I))?;
    canonicalize_with(&t, &c, &u, tols)
}

/// The canonical block unitary with the given coordinates: invert the
/// Cayley chain with `b_k = 2c_k/|1 + t_k|` (first row of B real positive).
pub fn reconstruct(sd: &SpectralData) -> Result<BlockUnitary> {
    let (n, m) = (sd.n, sd.m);
    for &tk in &sd.t {
        if (ONE + tk).norm() <= tol::ORDER_GAP {
            return Err(Error::Reconstruction("t_k = -1 has no finite Cayley coordinate".into()));
        }
    }
    let id_n = ComplexMatrix::identity(n);
    if !((&id_n + &sd.u).min_singular_value() >= tol::SINGULAR) {
        return Err(Error::Reconstruction("I + U is singular".into()));
    }
    let ia = cayley(&sd.u).map_err(|e| Error::Reconstruction(e.to_string()))?;
    let a = ia.scale(-I).hermitian_part();
    let mut b = ComplexMatrix::zeros(n, m);
    let mut mu = Vec::with_capacity(m);
    for (k, &tk) in sd.t.iter().enumerate() {
        mu.push((-I * (tk - ONE) / (tk + ONE)).re);
        let scale = 2.0 / (ONE + tk).norm();
        b.set_column(k, &sd.c.column(k).iter().map(|z| z * scale).collect::<Vec<_>>());
    }
    let d = ComplexMatrix::from_diagonal(&mu.iter().map(|&x| C64::new(x, 0.0)).collect::<Vec<_>>());
    let k = ComplexMatrix::from_blocks(&a, &b, &b.adjoint(), &d)?;
    let g = cayley(&k.scale(I)).map_err(|e| Error::Reconstruction(e.to_string()))?;
    BlockUnitary::with_tolerance(g, n, m, 1e-9).map_err(|e| Error::Reconstruction(e.to_string()))
}
