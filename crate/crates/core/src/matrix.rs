//! Dense complex matrices and the handful of decompositions the rest of the
//! crate is built on.
//!
//! `ComplexMatrix` is a thin newtype over `nalgebra::DMatrix<Complex64>`; the
//! factorizations (LU, QR, SVD, Schur, Hermitian eigen) are nalgebra's. What
//! lives here is the contract layer: singularity thresholds, eigenvalue
//! ordering, determinant bookkeeping in log-magnitude form, Haar sampling and
//! the Cayley transform.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::tol;

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    inner: DMatrix<C64>,
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ComplexMatrix {}x{} [", self.rows(), self.cols())?;
        for i in 0..self.rows() {
            if i > 0 {
                f.write_str("; ")?;
            }
            for j in 0..self.cols() {
                if j > 0 {
                    f.write_str(", ")?;
                }
                let z = self[(i, j)];
                write!(f, "{:.6}{:+.6}i", z.re, z.im)?;
            }
        }
        f.write_str("]")
    }
}

/// Determinant held as `phase · exp(ln_abs)`, so large exponents in density
/// formulas never leave log scale. A singular matrix has `ln_abs = -inf`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogDet {
    pub ln_abs: f64,
    pub phase: C64,
}

impl LogDet {
    pub fn value(&self) -> C64 {
        self.phase * self.ln_abs.exp()
    }

    pub fn is_singular(&self) -> bool {
        self.ln_abs == f64::NEG_INFINITY
    }
}

/// Smallest singular value together with the matching right singular vector.
#[derive(Debug, Clone)]
pub struct KernelEstimate {
    pub sigma_min: f64,
    /// Second smallest singular value (`+inf` for 1×1 input).
    pub sigma_next: f64,
    pub vector: Vec<C64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { inner: DMatrix::zeros(rows, cols) }
    }

    pub fn identity(k: usize) -> Self {
        Self { inner: DMatrix::identity(k, k) }
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl FnMut(usize, usize) -> C64) -> Self {
        Self { inner: DMatrix::from_fn(rows, cols, f) }
    }

    /// Builds a matrix from entries listed row by row.
    pub fn from_row_slice(rows: usize, cols: usize, data: &[C64]) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { inner: DMatrix::from_row_slice(rows, cols, data) })
    }

    /// Real matrix from nested rows; panics on ragged input (test helper).
    pub fn from_real_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        Self::from_fn(r, c, |i, j| C64::new(rows[i][j], 0.0))
    }

    pub fn from_diagonal(diag: &[C64]) -> Self {
        let k = diag.len();
        Self::from_fn(k, k, |i, j| if i == j { diag[i] } else { ZERO })
    }

    pub fn from_columns(rows: usize, columns: &[Vec<C64>]) -> Self {
        Self::from_fn(rows, columns.len(), |i, j| columns[j][i])
    }

    pub fn scalar(z: C64) -> Self {
        Self::from_diagonal(&[z])
    }

    pub fn from_inner(inner: DMatrix<C64>) -> Self {
        Self { inner }
    }

    pub fn as_inner(&self) -> &DMatrix<C64> {
        &self.inner
    }

    pub fn into_inner(self) -> DMatrix<C64> {
        self.inner
    }

    pub fn rows(&self) -> usize {
        self.inner.nrows()
    }

    pub fn cols(&self) -> usize {
        self.inner.ncols()
    }

    pub fn is_square(&self) -> bool {
        self.rows() == self.cols()
    }

    /// Entries in row-major order.
    pub fn to_row_major(&self) -> Vec<C64> {
        let mut out = Vec::with_capacity(self.rows() * self.cols());
        for i in 0..self.rows() {
            for j in 0..self.cols() {
                out.push(self[(i, j)]);
            }
        }
        out
    }

    pub fn column(&self, j: usize) -> Vec<C64> {
        self.inner.column(j).iter().copied().collect()
    }

    pub fn set_column(&mut self, j: usize, values: &[C64]) {
        for (i, v) in values.iter().enumerate() {
            self.inner[(i, j)] = *v;
        }
    }

    pub fn diagonal(&self) -> Vec<C64> {
        self.inner.diagonal().iter().copied().collect()
    }

    pub fn adjoint(&self) -> Self {
        Self { inner: self.inner.adjoint() }
    }

    pub fn trace(&self) -> C64 {
        self.inner.trace()
    }

    pub fn scale(&self, z: C64) -> Self {
        Self { inner: &self.inner * z }
    }

    pub fn map(&self, f: impl FnMut(C64) -> C64) -> Self {
        Self { inner: self.inner.map(f) }
    }

    pub fn is_finite(&self) -> bool {
        self.inner.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.inner.iter().fold(0.0, |acc, z| acc.max(z.norm()))
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(
            (self.rows(), self.cols()),
            (other.rows(), other.cols()),
            "max_abs_diff on mismatched shapes"
        );
        self.inner
            .iter()
            .zip(other.inner.iter())
            .fold(0.0, |acc, (a, b)| acc.max((a - b).norm()))
    }

    /// Sub-block copy starting at `(r0, c0)`.
    pub fn block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Self {
        Self { inner: self.inner.view((r0, c0), (rows, cols)).into_owned() }
    }

    /// Assembles `[[a, b], [c, d]]`.
    pub fn from_blocks(a: &Self, b: &Self, c: &Self, d: &Self) -> Result<Self> {
        if a.rows() != b.rows() || c.rows() != d.rows() || a.cols() != c.cols() || b.cols() != d.cols() {
            return Err(Error::Shape(format!(
                "blocks {}x{}, {}x{}, {}x{}, {}x{} are not conformable",
                a.rows(),
                a.cols(),
                b.rows(),
                b.cols(),
                c.rows(),
                c.cols(),
                d.rows(),
                d.cols()
            )));
        }
        let (r1, c1) = (a.rows(), a.cols());
        let rows = r1 + c.rows();
        let cols = c1 + b.cols();
        Ok(Self::from_fn(rows, cols, |i, j| match (i < r1, j < c1) {
            (true, true) => a[(i, j)],
            (true, false) => b[(i, j - c1)],
            (false, true) => c[(i - r1, j)],
            (false, false) => d[(i - r1, j - c1)],
        }))
    }

    pub fn mul_vec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(self.cols(), v.len(), "mul_vec dimension mismatch");
        (0..self.rows())
            .map(|i| (0..self.cols()).map(|j| self[(i, j)] * v[j]).sum())
            .collect()
    }

    /// `‖M*M − I‖_max`.
    pub fn unitarity_defect(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let gram = self.inner.adjoint() * &self.inner;
        let id = DMatrix::<C64>::identity(self.rows(), self.rows());
        (gram - id).iter().fold(0.0, |acc, z| acc.max(z.norm()))
    }

    /// `‖M − M*‖_max`.
    pub fn hermiticity_defect(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        (&self.inner - self.inner.adjoint()).iter().fold(0.0, |acc, z| acc.max(z.norm()))
    }

    /// `‖M + M*‖_max`.
    pub fn anti_hermiticity_defect(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        (&self.inner + self.inner.adjoint()).iter().fold(0.0, |acc, z| acc.max(z.norm()))
    }

    /// Singular values, descending.
    pub fn singular_values(&self) -> Vec<f64> {
        let mut s: Vec<f64> = self.inner.clone().singular_values().iter().copied().collect();
        s.sort_by(|a, b| b.total_cmp(a));
        s
    }

    pub fn min_singular_value(&self) -> f64 {
        self.inner.clone().singular_values().iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn operator_norm(&self) -> f64 {
        self.inner.clone().singular_values().iter().copied().fold(0.0, f64::max)
    }

    /// Smallest singular value and its right singular vector (unit norm).
    pub fn kernel_estimate(&self) -> KernelEstimate {
        let svd = self.inner.clone().svd(false, true);
        let sv = &svd.singular_values;
        let mut order: Vec<usize> = (0..sv.len()).collect();
        order.sort_by(|&a, &b| sv[a].total_cmp(&sv[b]));
        let imin = order[0];
        let v_t = svd.v_t.as_ref().expect("requested v_t");
        let vector = v_t.row(imin).iter().map(|z| z.conj()).collect();
        KernelEstimate {
            sigma_min: sv[imin],
            sigma_next: order.get(1).map_or(f64::INFINITY, |&k| sv[k]),
            vector,
        }
    }

    fn require_square(&self, what: &str) -> Result<()> {
        if self.is_square() {
            Ok(())
        } else {
            Err(Error::Shape(format!("{what} needs a square matrix, got {}x{}", self.rows(), self.cols())))
        }
    }

    /// Inverse, refused when the smallest singular value is below the
    /// singularity threshold.
    pub fn inverse_checked(&self, stage: &'static str) -> Result<Self> {
        self.require_square(stage)?;
        let sigma_min = self.min_singular_value();
        if !(sigma_min >= tol::SINGULAR) {
            return Err(Error::Singularity { stage, sigma_min });
        }
        self.inner
            .clone()
            .lu()
            .try_inverse()
            .map(Self::from_inner)
            .ok_or(Error::Singularity { stage, sigma_min })
    }

    /// Solves `self · X = rhs` by partial-pivot LU, without a conditioning
    /// check. Callers certify conditioning themselves.
    pub fn solve(&self, rhs: &Self) -> Result<Self> {
        self.require_square("solve")?;
        if rhs.rows() != self.rows() {
            return Err(Error::Shape(format!("rhs has {} rows, expected {}", rhs.rows(), self.rows())));
        }
        self.inner
            .clone()
            .lu()
            .solve(&rhs.inner)
            .map(Self::from_inner)
            .ok_or(Error::Singularity { stage: "solve", sigma_min: 0.0 })
    }

    /// Determinant from a pivoted LU factorization, in log-magnitude/phase form.
    pub fn log_det(&self) -> LogDet {
        assert!(self.is_square(), "log_det of a non-square matrix");
        let lu = self.inner.clone().lu();
        let mut phase: C64 = lu.p().determinant();
        let mut ln_abs = 0.0;
        for z in lu.u().diagonal().iter() {
            let r = z.norm();
            if r == 0.0 {
                return LogDet { ln_abs: f64::NEG_INFINITY, phase: ZERO };
            }
            ln_abs += r.ln();
            phase *= z / r;
        }
        LogDet { ln_abs, phase: phase / phase.norm() }
    }

    pub fn det(&self) -> C64 {
        self.log_det().value()
    }

    /// Eigenvalues of a general square matrix (complex Schur form).
    pub fn eigenvalues(&self) -> Result<Vec<C64>> {
        self.require_square("eigenvalues")?;
        self.inner
            .clone()
            .schur()
            .eigenvalues()
            .map(|v| v.iter().copied().collect())
            .ok_or_else(|| Error::Shape("Schur iteration did not converge".into()))
    }

    /// `(M + M*) / 2`, used to strip rounding asymmetry.
    pub fn hermitian_part(&self) -> Self {
        Self { inner: (&self.inner + self.inner.adjoint()) * C64::new(0.5, 0.0) }
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, idx: (usize, usize)) -> &C64 {
        &self.inner[idx]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, idx: (usize, usize)) -> &mut C64 {
        &mut self.inner[idx]
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix { inner: &self.inner * &rhs.inner }
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix { inner: &self.inner + &rhs.inner }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix { inner: &self.inner - &rhs.inner }
    }
}

impl Neg for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn neg(self) -> ComplexMatrix {
        ComplexMatrix { inner: -&self.inner }
    }
}

#[derive(Serialize, Deserialize)]
struct MatrixJson {
    rows: usize,
    cols: usize,
    data: Vec<[f64; 2]>,
}

impl Serialize for ComplexMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MatrixJson {
            rows: self.rows(),
            cols: self.cols(),
            data: self.to_row_major().into_iter().map(|z| [z.re, z.im]).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ComplexMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = MatrixJson::deserialize(d)?;
        if raw.rows == 0 || raw.cols == 0 {
            return Err(serde::de::Error::custom("matrix dimensions must be positive"));
        }
        let data: Vec<C64> = raw.data.iter().map(|[re, im]| C64::new(*re, *im)).collect();
        ComplexMatrix::from_row_slice(raw.rows, raw.cols, &data).map_err(serde::de::Error::custom)
    }
}

/// A square matrix with a declared `(n, m)` partition
/// `[[α, β], [γ, δ]]`, α of size n×n and δ of size m×m.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockMatrix {
    g: ComplexMatrix,
    n: usize,
    m: usize,
}

impl BlockMatrix {
    pub fn new(g: ComplexMatrix, n: usize, m: usize) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::InvalidArgument(format!("block sizes must be positive, got ({n}, {m})")));
        }
        if g.rows() != n + m || g.cols() != n + m {
            return Err(Error::Shape(format!(
                "{}x{} matrix cannot carry an ({n}, {m}) partition",
                g.rows(),
                g.cols()
            )));
        }
        Ok(Self { g, n, m })
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.g
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn alpha(&self) -> ComplexMatrix {
        self.g.block(0, 0, self.n, self.n)
    }

    pub fn beta(&self) -> ComplexMatrix {
        self.g.block(0, self.n, self.n, self.m)
    }

    pub fn gamma(&self) -> ComplexMatrix {
        self.g.block(self.n, 0, self.m, self.n)
    }

    pub fn delta(&self) -> ComplexMatrix {
        self.g.block(self.n, self.n, self.m, self.m)
    }

    /// Conjugation by `diag(1_n, u)`, the U(m) action the characteristic
    /// function is invariant under.
    pub fn conjugate_lower(&self, u: &ComplexMatrix) -> Result<Self> {
        if u.rows() != self.m || u.cols() != self.m {
            return Err(Error::Shape(format!("conjugator must be {0}x{0}", self.m)));
        }
        let n = self.n;
        let id = ComplexMatrix::identity(n);
        let z_nm = ComplexMatrix::zeros(n, self.m);
        let z_mn = ComplexMatrix::zeros(self.m, n);
        let left = ComplexMatrix::from_blocks(&id, &z_nm, &z_mn, u)?;
        let right = ComplexMatrix::from_blocks(&id, &z_nm, &z_mn, &u.adjoint())?;
        Self::new(&(&left * &self.g) * &right, n, self.m)
    }
}

/// A block matrix certified unitary.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockUnitary {
    blocks: BlockMatrix,
}

impl BlockUnitary {
    pub fn new(g: ComplexMatrix, n: usize, m: usize) -> Result<Self> {
        Self::with_tolerance(g, n, m, tol::UNITARITY)
    }

    pub fn with_tolerance(g: ComplexMatrix, n: usize, m: usize, tolerance: f64) -> Result<Self> {
        let blocks = BlockMatrix::new(g, n, m)?;
        let defect = blocks.g.unitarity_defect();
        if !(defect <= tolerance) {
            return Err(Error::NotUnitary(defect));
        }
        Ok(Self { blocks })
    }

    /// Haar-distributed element of U(n+m) with the given partition.
    pub fn haar<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> Self {
        let g = haar_unitary(n + m, rng);
        Self { blocks: BlockMatrix::new(g, n, m).expect("sizes are consistent") }
    }

    pub fn blocks(&self) -> &BlockMatrix {
        &self.blocks
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.blocks.g
    }

    pub fn n(&self) -> usize {
        self.blocks.n
    }

    pub fn m(&self) -> usize {
        self.blocks.m
    }

    pub fn alpha(&self) -> ComplexMatrix {
        self.blocks.alpha()
    }

    pub fn beta(&self) -> ComplexMatrix {
        self.blocks.beta()
    }

    pub fn gamma(&self) -> ComplexMatrix {
        self.blocks.gamma()
    }

    pub fn delta(&self) -> ComplexMatrix {
        self.blocks.delta()
    }

    pub fn conjugate_lower(&self, u: &ComplexMatrix) -> Result<Self> {
        let blocks = self.blocks.conjugate_lower(u)?;
        Self::with_tolerance(blocks.g, blocks.n, blocks.m, 10.0 * tol::UNITARITY)
    }
}

/// Standard complex Gaussian: real and imaginary parts N(0, 1/2).
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Haar-distributed k×k unitary.
///
/// Ginibre fill, QR, then the columns of Q are rotated by the phases of
/// diag(R) so the triangular factor has a positive real diagonal. Without
/// the phase correction the result is not Haar.
pub fn haar_unitary<R: Rng + ?Sized>(k: usize, rng: &mut R) -> ComplexMatrix {
    assert!(k >= 1, "haar_unitary needs k >= 1");
    let z = DMatrix::from_fn(k, k, |_, _| complex_gaussian(rng));
    let qr = z.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..k {
        let d = r[(j, j)];
        let norm = d.norm();
        let ph = if norm > 0.0 { d / norm } else { ONE };
        for i in 0..k {
            q[(i, j)] *= ph;
        }
    }
    ComplexMatrix::from_inner(q)
}

/// Cayley transform `−I + 2(I + M)⁻¹`.
///
/// Involutive; exchanges unitary and anti-Hermitian matrices. Refused when
/// `I + M` has a singular value below the singularity threshold, i.e. when
/// M has eigenvalue −1 to working precision.
pub fn cayley(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    cayley_at(m, "cayley")
}

/// [`cayley`] with the failing stage named in the error.
pub fn cayley_at(m: &ComplexMatrix, stage: &'static str) -> Result<ComplexMatrix> {
    if !m.is_square() {
        return Err(Error::Shape(format!("cayley needs a square matrix, got {}x{}", m.rows(), m.cols())));
    }
    let k = m.rows();
    let id = ComplexMatrix::identity(k);
    let inv = (&id + m).inverse_checked(stage)?;
    Ok(&inv.scale(C64::new(2.0, 0.0)) - &id)
}

/// Eigendecomposition of a Hermitian matrix with strictly descending
/// eigenvalues; `H = V diag(μ) V*`.
pub fn hermitian_eig(h: &ComplexMatrix) -> Result<(Vec<f64>, ComplexMatrix)> {
    if !h.is_square() {
        return Err(Error::Shape(format!("hermitian_eig needs a square matrix, got {}x{}", h.rows(), h.cols())));
    }
    let defect = h.hermiticity_defect();
    if !(defect <= tol::UNITARITY) {
        return Err(Error::NotHermitian(defect));
    }
    let eig = h.hermitian_part().into_inner().symmetric_eigen();
    let k = h.rows();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mu: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let gap = mu.windows(2).map(|w| w[0] - w[1]).fold(f64::INFINITY, f64::min);
    if gap < tol::EIG_GAP {
        return Err(Error::DegenerateSpectrum { gap });
    }
    let v = ComplexMatrix::from_fn(k, k, |i, j| eig.eigenvectors[(i, order[j])]);
    Ok((mu, v))
}

/// `det [[a, b], [c, d]] = det a · det(d − c a⁻¹ b)`.
pub fn block_det(a: &ComplexMatrix, b: &ComplexMatrix, c: &ComplexMatrix, d: &ComplexMatrix) -> Result<C64> {
    block_log_det(a, b, c, d).map(|ld| ld.value())
}

/// Log form of [`block_det`].
pub fn block_log_det(a: &ComplexMatrix, b: &ComplexMatrix, c: &ComplexMatrix, d: &ComplexMatrix) -> Result<LogDet> {
    if !a.is_square() || !d.is_square() || b.rows() != a.rows() || c.cols() != a.cols() || b.cols() != d.cols() || c.rows() != d.rows() {
        return Err(Error::Shape("block_det blocks are not conformable".into()));
    }
    let sigma_min = a.min_singular_value();
    if !(sigma_min >= tol::SINGULAR) {
        return Err(Error::Singularity { stage: "block_det", sigma_min });
    }
    let a_inv_b = a.solve(b)?;
    let schur = d - &(c * &a_inv_b);
    let da = a.log_det();
    let ds = schur.log_det();
    Ok(LogDet { ln_abs: da.ln_abs + ds.ln_abs, phase: da.phase * ds.phase })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
        ComplexMatrix::from_fn(rows, cols, |_, _| complex_gaussian(rng))
    }

    #[test]
    fn haar_k1_has_unit_modulus() {
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let u = haar_unitary(1, &mut rng);
            assert!((u[(0, 0)].norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn haar_k4_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let u = haar_unitary(4, &mut rng);
        assert!(u.unitarity_defect() <= 1e-10);
    }

    #[test]
    fn haar_trace_second_moment_is_one() {
        // E|tr g|² = 1 on U(k) for every k ≥ 1.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|_| haar_unitary(3, &mut rng).trace().norm_sqr()).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se = (var / n as f64).sqrt();
        assert!((mean - 1.0).abs() <= 3.0 * se, "mean {mean} se {se}");
    }

    #[test]
    fn haar_is_left_invariant_in_trace_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let k = 3;
        let v = haar_unitary(k, &mut rng);
        let n = 10_000;
        let mut plain = Vec::with_capacity(n);
        let mut shifted = Vec::with_capacity(n);
        for _ in 0..n {
            plain.push(haar_unitary(k, &mut rng).trace());
            shifted.push((&v * &haar_unitary(k, &mut rng)).trace());
        }
        let moments = |xs: &[C64], f: &dyn Fn(C64) -> f64| {
            let ys: Vec<f64> = xs.iter().map(|&z| f(z)).collect();
            let mean = ys.iter().sum::<f64>() / ys.len() as f64;
            let var = ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (ys.len() - 1) as f64;
            (mean, (var / ys.len() as f64).sqrt())
        };
        let stats: [&dyn Fn(C64) -> f64; 3] = [&|z| z.re, &|z| z.im, &|z| z.norm_sqr()];
        for f in stats {
            let (m1, s1) = moments(&plain, f);
            let (m2, s2) = moments(&shifted, f);
            let z = (m1 - m2) / (s1 * s1 + s2 * s2).sqrt();
            assert!(z.abs() <= 4.0, "z = {z}");
        }
    }

    #[test]
    fn cayley_of_identity_is_zero() {
        let h = cayley(&ComplexMatrix::identity(3)).unwrap();
        assert!(h.max_abs() < 1e-15);
    }

    #[test]
    fn cayley_of_minus_identity_is_singular() {
        let err = cayley(&ComplexMatrix::identity(2).scale(c(-1.0, 0.0))).unwrap_err();
        assert!(matches!(err, Error::Singularity { .. }));
    }

    #[test]
    fn cayley_of_i_is_minus_i() {
        let h = cayley(&ComplexMatrix::scalar(I)).unwrap();
        assert!((h[(0, 0)] - c(0.0, -1.0)).norm() < 1e-15);
    }

    #[test]
    fn hermitian_eig_diagonal() {
        let h = ComplexMatrix::from_real_rows(&[&[2.0, 0.0], &[0.0, 1.0]]);
        let (mu, v) = hermitian_eig(&h).unwrap();
        assert_eq!(mu, vec![2.0, 1.0]);
        for i in 0..2 {
            assert!((v[(i, i)].norm() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn hermitian_eig_swap_matrix() {
        let h = ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let (mu, v) = hermitian_eig(&h).unwrap();
        assert!((mu[0] - 1.0).abs() < 1e-14 && (mu[1] + 1.0).abs() < 1e-14);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        // up to phase: |v_0| = (s, s), v_1 ∝ (1, -1)
        assert!((v[(0, 0)].norm() - s).abs() < 1e-14 && (v[(1, 0)].norm() - s).abs() < 1e-14);
        assert!((v[(0, 1)] + v[(1, 1)]).norm() < 1e-14);
        assert!(v.unitarity_defect() < 1e-14);
    }

    #[test]
    fn hermitian_eig_rejects_repeated() {
        let err = hermitian_eig(&ComplexMatrix::identity(2)).unwrap_err();
        assert!(matches!(err, Error::DegenerateSpectrum { .. }));
    }

    #[test]
    fn hermitian_eig_rejects_non_hermitian() {
        let h = ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]);
        assert!(matches!(hermitian_eig(&h), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn block_det_identity() {
        let id = ComplexMatrix::identity(2);
        let z = ComplexMatrix::zeros(2, 2);
        let d = block_det(&id, &z, &z, &id).unwrap();
        assert!((d - ONE).norm() < 1e-15);
    }

    #[test]
    fn block_det_scalar_hand_value() {
        let a = ComplexMatrix::from_real_rows(&[&[2.0]]);
        let b = ComplexMatrix::from_real_rows(&[&[1.0]]);
        let d = block_det(&a, &b, &b, &b).unwrap();
        assert!((d - ONE).norm() < 1e-15);
    }

    #[test]
    fn block_det_singular_leading_block() {
        let a = ComplexMatrix::zeros(1, 1);
        let b = ComplexMatrix::identity(1);
        assert!(matches!(block_det(&a, &b, &b, &b), Err(Error::Singularity { .. })));
    }

    #[test]
    fn block_det_matches_dense_3_plus_2() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let a = random_matrix(3, 3, &mut rng);
            let b = random_matrix(3, 2, &mut rng);
            let cc = random_matrix(2, 3, &mut rng);
            let d = random_matrix(2, 2, &mut rng);
            let dense = ComplexMatrix::from_blocks(&a, &b, &cc, &d).unwrap().det();
            let blk = block_det(&a, &b, &cc, &d).unwrap();
            assert!((dense - blk).norm() <= 1e-10 * dense.norm());
        }
    }

    #[test]
    fn log_det_matches_small_hand_values() {
        let m = ComplexMatrix::from_row_slice(2, 2, &[c(1.0, 1.0), c(2.0, 0.0), c(0.0, 1.0), c(3.0, 0.0)]).unwrap();
        // (1+i)·3 − 2i = 3 + i
        assert!((m.det() - c(3.0, 1.0)).norm() < 1e-14);
        assert!(ComplexMatrix::zeros(2, 2).log_det().is_singular());
    }

    #[test]
    fn json_round_trip_within_tolerance() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = random_matrix(2, 3, &mut rng);
        let s = serde_json::to_string(&m).unwrap();
        assert!(s.starts_with("{\"rows\":2,\"cols\":3,\"data\":[["));
        let back: ComplexMatrix = serde_json::from_str(&s).unwrap();
        for (a, b) in m.to_row_major().iter().zip(back.to_row_major()) {
            assert!((a - b).norm() <= 1e-15 * a.norm().max(1e-300));
        }
    }

    #[test]
    fn json_rejects_wrong_entry_count() {
        let bad = r#"{"rows":2,"cols":2,"data":[[1,0],[0,0],[0,0]]}"#;
        assert!(serde_json::from_str::<ComplexMatrix>(bad).is_err());
    }

    #[test]
    fn block_unitary_rejects_non_unitary() {
        let g = ComplexMatrix::from_real_rows(&[&[1.0, 1.0], &[0.0, 1.0]]);
        assert!(matches!(BlockUnitary::new(g, 1, 1), Err(Error::NotUnitary(_))));
    }

    #[test]
    fn block_accessors_partition() {
        let g = ComplexMatrix::from_fn(5, 5, |i, j| c((10 * i + j) as f64, 0.0));
        let b = BlockMatrix::new(g, 3, 2).unwrap();
        assert_eq!(b.alpha()[(2, 2)], c(22.0, 0.0));
        assert_eq!(b.beta()[(0, 1)], c(4.0, 0.0));
        assert_eq!(b.gamma()[(1, 0)], c(40.0, 0.0));
        assert_eq!(b.delta()[(1, 1)], c(44.0, 0.0));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn cayley_is_an_involution(seed in any::<u64>(), k in 1usize..=8) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = haar_unitary(k, &mut rng);
            let id = ComplexMatrix::identity(k);
            prop_assume!((&id + &g).min_singular_value() > 1e-3);
            let back = cayley(&cayley(&g).unwrap()).unwrap();
            prop_assert!(back.max_abs_diff(&g) <= 1e-9);
        }

        #[test]
        fn cayley_transports_types(seed in any::<u64>(), k in 1usize..=8) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = haar_unitary(k, &mut rng);
            let id = ComplexMatrix::identity(k);
            prop_assume!((&id + &g).min_singular_value() > 1e-3);
            let h = cayley(&g).unwrap();
            prop_assert!(h.anti_hermiticity_defect() <= 1e-9);
            let herm = random_matrix(k, k, &mut rng).hermitian_part();
            let x = herm.scale(I);
            let u = cayley(&x).unwrap();
            prop_assert!(u.unitarity_defect() <= 1e-9);
        }

        #[test]
        fn block_det_equals_dense(seed in any::<u64>(), p in 1usize..=4, q in 1usize..=4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_matrix(p, p, &mut rng);
            prop_assume!(a.min_singular_value() > 1e-3);
            let b = random_matrix(p, q, &mut rng);
            let cc = random_matrix(q, p, &mut rng);
            let d = random_matrix(q, q, &mut rng);
            let dense = ComplexMatrix::from_blocks(&a, &b, &cc, &d).unwrap().det();
            let blk = block_det(&a, &b, &cc, &d).unwrap();
            prop_assert!((dense - blk).norm() <= 1e-10 * dense.norm().max(1e-300));
        }
    }
}
