//! Closed-form densities, all in natural-log scale and tagged with the
//! reference measure they are taken against.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{ComplexMatrix, C64, I, ONE};
use crate::spectral::SpectralData;
use crate::tol;

/// Reference measure a log density is taken against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Reference {
    /// `dσ_n(U) × ∏ c_k¹ dc_k¹ × ∏ dRe c_k^j dIm c_k^j × ∏ dθ_k` on the
    /// ordered chart, σ_n probability Haar.
    MainSpectral,
    /// Lebesgue measure on the k² real coordinates of an anti-Hermitian matrix.
    HuaLebesgue,
    /// Lebesgue measure on the eigenvalues.
    WeylLebesgue,
    /// Lebesgue on (A, B) times Lebesgue on the eigenvalues of the lower block.
    AbmLebesgue,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityValue {
    pub log_value: f64,
    pub reference: Reference,
}

/// `ln k!`
pub fn ln_factorial(k: usize) -> f64 {
    (2..=k).map(|j| (j as f64).ln()).sum()
}

/// `Σ_{j=a}^{b} ln j!`, zero when the range is empty.
pub fn ln_superfactorial(a: usize, b: usize) -> f64 {
    (a.max(1)..=b).map(ln_factorial).sum()
}

fn ln_pi() -> f64 {
    std::f64::consts::PI.ln()
}

/// The constant as printed alongside the main formula:
/// `2^{−m} π^{−mn} ∏_{j=1}^{m+n−1} j! / (∏_{j=1}^{n−1} j! ∏_{j=1}^{m} j!)`.
pub fn log_theta_const(n: usize, m: usize) -> f64 {
    let (nf, mf) = (n as f64, m as f64);
    -mf * 2f64.ln() - mf * nf * ln_pi() + ln_superfactorial(1, m + n - 1)
        - ln_superfactorial(1, n - 1)
        - ln_superfactorial(1, m)
}

pub fn theta_const(n: usize, m: usize) -> f64 {
    log_theta_const(n, m).exp()
}

/// The constant that makes the main density a probability density on the
/// ordered chart: `2^m m!` times the printed one, i.e.
/// `π^{−mn} ∏_{j<m+n} j! / (∏_{j<n} j! ∏_{j<m} j!)`.
pub fn log_chart_const(n: usize, m: usize) -> f64 {
    log_theta_const(n, m) + m as f64 * 2f64.ln() + ln_factorial(m)
}

/// `ln τ_k`, `τ_k = 2^{k²−k} π^{−k(k+1)/2} ∏_{j=1}^{k−1} j!`.
pub fn log_tau(k: usize) -> f64 {
    let kf = k as f64;
    (kf * kf - kf) * 2f64.ln() - kf * (kf + 1.0) / 2.0 * ln_pi() + ln_superfactorial(1, k - 1)
}

/// Which normalizing constant multiplies the main density.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DensityConstant {
    /// Normalized on the ordered chart.
    #[default]
    Chart,
    /// The printed `θ_{n,m}`; integrates to `2^{−m}/m!`.
    Printed,
}

/// Range of the Vandermonde product over the circle points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VandermondeIndex {
    /// All pairs `k < l ≤ m`.
    #[default]
    M,
    /// Pairs `k < l ≤ min(n, m)`: the upper index read literally as n.
    Literal,
}

/// Deliberate corruptions used as negative controls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mutation {
    /// Omit the `|det(1 + U)|^{2m}` factor.
    DropDetU,
}

/// Variant of the main density to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MainDensity {
    pub constant: DensityConstant,
    pub vandermonde: VandermondeIndex,
    pub mutation: Option<Mutation>,
}

impl MainDensity {
    pub fn printed() -> Self {
        Self { constant: DensityConstant::Printed, ..Self::default() }
    }

    pub fn log_constant(&self, n: usize, m: usize) -> f64 {
        match self.constant {
            DensityConstant::Chart => log_chart_const(n, m),
            DensityConstant::Printed => log_theta_const(n, m),
        }
    }

    /// Log density of the radial part of Haar measure at `sd`:
    /// `const · |det(1 + T + C*(1 + U)C)|^{−2n−2m} · |det(1 + U)|^{2m}
    ///  · ∏|1 + t_k|^{2m+2n} · ∏_{k<l}|t_k − t_l|²`.
    pub fn log_density(&self, sd: &SpectralData) -> Result<DensityValue> {
        let (n, m) = (sd.n(), sd.m());
        let t = sd.t();
        let mut log_value = self.log_constant(n, m);
        let power = (2 * n + 2 * m) as f64;
        for &tk in t {
            let r = (ONE + tk).norm();
            if r <= tol::SINGULAR {
                return Err(Error::Domain(format!("|1 + t| = {r:.3e}")));
            }
            log_value += power * r.ln();
        }
        let id_n = ComplexMatrix::identity(n);
        let one_plus_u = &id_n + sd.u();
        let core = &(&ComplexMatrix::identity(m) + &ComplexMatrix::from_diagonal(t))
            + &(&sd.c().adjoint() * &(&one_plus_u * sd.c()));
        let ld_core = core.log_det();
        if ld_core.is_singular() || !ld_core.ln_abs.is_finite() {
            return Err(Error::Domain("det(1 + T + C*(1 + U)C) vanishes".into()));
        }
        log_value -= power * ld_core.ln_abs;
        if self.mutation != Some(Mutation::DropDetU) {
            let ld_u = one_plus_u.log_det();
            if ld_u.is_singular() || !ld_u.ln_abs.is_finite() {
                return Err(Error::Domain("det(1 + U) vanishes".into()));
            }
            log_value += 2.0 * m as f64 * ld_u.ln_abs;
        }
        let upper = match self.vandermonde {
            VandermondeIndex::M => m,
            VandermondeIndex::Literal => n.min(m),
        };
        for k in 0..upper {
            for l in k + 1..upper {
                log_value += 2.0 * (t[k] - t[l]).norm().ln();
            }
        }
        Ok(DensityValue { log_value, reference: Reference::MainSpectral })
    }
}

/// [`MainDensity::log_density`] with the default (normalized) variant.
pub fn main_log_density(sd: &SpectralData) -> Result<DensityValue> {
    MainDensity::default().log_density(sd)
}

/// Density of the Cayley image of probability Haar on U(k):
/// `τ_k det(1 − X²)^{−k}` for anti-Hermitian X.
pub fn hua_log_density(x: &ComplexMatrix, k: usize) -> Result<DensityValue> {
    if x.rows() != k || x.cols() != k {
        return Err(Error::Shape(format!("expected {k}x{k}, got {}x{}", x.rows(), x.cols())));
    }
    let defect = x.anti_hermiticity_defect();
    if !(defect <= tol::UNITARITY) {
        return Err(Error::NotAntiHermitian(defect));
    }
    // 1 − X² = (1 − X)(1 − X)* is positive definite; |det(1 − X)|² is its determinant.
    let ld = (&ComplexMatrix::identity(k) - x).log_det();
    Ok(DensityValue { log_value: log_tau(k) - 2.0 * k as f64 * ld.ln_abs, reference: Reference::HuaLebesgue })
}

fn check_descending(mu: &[f64]) -> Result<()> {
    if mu.iter().any(|x| !x.is_finite()) {
        return Err(Error::Domain("non-finite eigenvalue".into()));
    }
    if mu.windows(2).any(|w| !(w[0] > w[1])) {
        return Err(Error::Domain("eigenvalues must be strictly descending".into()));
    }
    Ok(())
}

/// `π^{m(m−1)/2} / ∏_{j≤m} j! · ∏_{k<l}|μ_k − μ_l|²`, the eigenvalue
/// factor of Lebesgue measure on m×m Hermitian matrices (unordered
/// convention).
pub fn weyl_log_density(mu: &[f64]) -> Result<DensityValue> {
    check_descending(mu)?;
    let m = mu.len();
    let mut log_value = (m * m.saturating_sub(1)) as f64 / 2.0 * ln_pi() - ln_superfactorial(1, m);
    for k in 0..m {
        for l in k + 1..m {
            log_value += 2.0 * (mu[k] - mu[l]).abs().ln();
        }
    }
    Ok(DensityValue { log_value, reference: Reference::WeylLebesgue })
}

/// `τ_{n+m} |det(1 + i[[A, B], [B*, M]])|^{−2n−2m}` times the Weyl factor of
/// `M = diag(μ)`.
pub fn abm_log_density(a: &ComplexMatrix, b: &ComplexMatrix, mu: &[f64]) -> Result<DensityValue> {
    let n = a.rows();
    let m = mu.len();
    if !a.is_square() || b.rows() != n || b.cols() != m {
        return Err(Error::Shape(format!("A {}x{}, B {}x{}, {} eigenvalues", a.rows(), a.cols(), b.rows(), b.cols(), m)));
    }
    let defect = a.hermiticity_defect();
    if !(defect <= tol::UNITARITY) {
        return Err(Error::NotHermitian(defect));
    }
    let weyl = weyl_log_density(mu)?;
    let d = ComplexMatrix::from_diagonal(&mu.iter().map(|&x| C64::new(x, 0.0)).collect::<Vec<_>>());
    let k = ComplexMatrix::from_blocks(a, b, &b.adjoint(), &d)?;
    let ld = (&ComplexMatrix::identity(n + m) + &k.scale(I)).log_det();
    if ld.is_singular() || !ld.ln_abs.is_finite() {
        return Err(Error::Domain("determinant underflow".into()));
    }
    let log_value = log_tau(n + m) - (2 * (n + m)) as f64 * ld.ln_abs + weyl.log_value;
    Ok(DensityValue { log_value, reference: Reference::AbmLebesgue })
}
