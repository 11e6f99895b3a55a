//! Characteristic functions `χ(λ) = α + λβ(1 − λδ)⁻¹γ` of block matrices.

use crate::error::{Error, Result};
use crate::matrix::{cayley_at, BlockMatrix, BlockUnitary, ComplexMatrix, C64, ONE, ZERO};
use crate::tol;

/// Realization-backed evaluator for the characteristic function of a block
/// matrix. The underlying matrix is usually unitary, but the formulas only
/// need the partition, so anti-Hermitian realizations (used by the Cayley
/// chain) are accepted too.
#[derive(Debug, Clone, PartialEq)]
pub struct CharFunction {
    blocks: BlockMatrix,
}

/// Numerator and denominator of `det χ(λ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetParts {
    /// `det [[α, −λβ], [γ, 1 − λδ]]`
    pub numerator: C64,
    /// `det (1 − λδ)`
    pub denominator: C64,
}

impl DetParts {
    pub fn ratio(&self) -> C64 {
        self.numerator / self.denominator
    }
}

/// Dense coefficients, lowest degree first.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    pub coeffs: Vec<C64>,
}

impl Polynomial {
    pub fn eval(&self, x: C64) -> C64 {
        self.coeffs.iter().rev().fold(ZERO, |acc, &c| acc * x + c)
    }

    /// Drops coefficients above `degree`.
    pub fn truncated(&self, degree: usize) -> Self {
        Self { coeffs: self.coeffs.iter().take(degree + 1).copied().collect() }
    }

    /// Largest coefficient modulus strictly above `degree`.
    pub fn excess_above(&self, degree: usize) -> f64 {
        self.coeffs.iter().skip(degree + 1).fold(0.0, |acc, c| acc.max(c.norm()))
    }

    /// Interpolates the polynomial of degree `< nodes` that takes the sampled
    /// values at `r·ωʲ`, `ω = exp(2πi/nodes)`.
    pub fn interpolate_on_circle(radius: f64, nodes: usize, mut f: impl FnMut(C64) -> Result<C64>) -> Result<Self> {
        let omega = |j: usize| C64::from_polar(1.0, 2.0 * std::f64::consts::PI * j as f64 / nodes as f64);
        let values = (0..nodes).map(|j| f(omega(j) * radius)).collect::<Result<Vec<_>>>()?;
        let coeffs = (0..nodes)
            .map(|k| {
                let s: C64 = (0..nodes).map(|j| values[j] * omega((j * k) % nodes).conj()).sum();
                s / (nodes as f64 * radius.powi(k as i32))
            })
            .collect();
        Ok(Self { coeffs })
    }
}

impl CharFunction {
    pub fn new(g: BlockUnitary) -> Self {
        Self { blocks: g.blocks().clone() }
    }

    pub fn of_unitary(g: &BlockUnitary) -> Self {
        Self { blocks: g.blocks().clone() }
    }

    pub fn from_blocks(blocks: BlockMatrix) -> Self {
        Self { blocks }
    }

    pub fn blocks(&self) -> &BlockMatrix {
        &self.blocks
    }

    pub fn n(&self) -> usize {
        self.blocks.n()
    }

    pub fn m(&self) -> usize {
        self.blocks.m()
    }

    fn resolvent_base(&self, lambda: C64) -> Result<ComplexMatrix> {
        let m = self.m();
        let base = &ComplexMatrix::identity(m) - &self.blocks.delta().scale(lambda);
        if !(base.min_singular_value() >= tol::SINGULAR) {
            return Err(Error::Pole { lambda });
        }
        Ok(base)
    }

    /// `χ(λ)`. At `λ = 0` returns α without any solve.
    pub fn eval(&self, lambda: C64) -> Result<ComplexMatrix> {
        if lambda == ZERO {
            return Ok(self.blocks.alpha());
        }
        let base = self.resolvent_base(lambda)?;
        let x = base.solve(&self.blocks.gamma())?;
        Ok(&self.blocks.alpha() + &(&self.blocks.beta() * &x).scale(lambda))
    }

    /// `χ′(λ) = βRγ + λβRδRγ` with `R = (1 − λδ)⁻¹`.
    pub fn derivative(&self, lambda: C64) -> Result<ComplexMatrix> {
        let base = self.resolvent_base(lambda)?;
        let x = base.solve(&self.blocks.gamma())?;
        let y = base.solve(&(&self.blocks.delta() * &x))?;
        Ok(&self.blocks.beta() * &(&x + &y.scale(lambda)))
    }

    /// Numerator and denominator of the determinant ratio, without the pole
    /// check (both are polynomials in λ).
    pub fn det_parts_unchecked(&self, lambda: C64) -> Result<DetParts> {
        let (n, m) = (self.n(), self.m());
        let lower_right = &ComplexMatrix::identity(m) - &self.blocks.delta().scale(lambda);
        let assembled = ComplexMatrix::from_blocks(
            &self.blocks.alpha(),
            &self.blocks.beta().scale(-lambda),
            &self.blocks.gamma(),
            &lower_right,
        )?;
        debug_assert_eq!(assembled.rows(), n + m);
        Ok(DetParts { numerator: assembled.det(), denominator: lower_right.det() })
    }

    pub fn det_parts(&self, lambda: C64) -> Result<DetParts> {
        self.resolvent_base(lambda)?;
        self.det_parts_unchecked(lambda)
    }

    /// `det χ(λ)` as a ratio of two determinants of size n+m and m.
    pub fn det_ratio(&self, lambda: C64) -> Result<C64> {
        self.det_parts(lambda).map(|p| p.ratio())
    }

    /// Elimination form: solve `x = γp + λδx`, return `q = αp + λβx`.
    pub fn graph_eval(&self, lambda: C64, p: &[C64]) -> Result<Vec<C64>> {
        if p.len() != self.n() {
            return Err(Error::Shape(format!("vector of length {} for n = {}", p.len(), self.n())));
        }
        let base = self.resolvent_base(lambda)?;
        let gp = ComplexMatrix::from_columns(self.m(), &[self.blocks.gamma().mul_vec(p)]);
        let x = base.solve(&gp)?.column(0);
        let ap = self.blocks.alpha().mul_vec(p);
        let bx = self.blocks.beta().mul_vec(&x);
        Ok(ap.iter().zip(&bx).map(|(a, b)| a + lambda * b).collect())
    }

    /// Reciprocals of the nonzero eigenvalues of δ: the only places χ can
    /// have a pole.
    pub fn candidate_poles(&self) -> Result<Vec<C64>> {
        Ok(self
            .blocks
            .delta()
            .eigenvalues()?
            .into_iter()
            .filter(|z| z.norm() > tol::SINGULAR)
            .map(|z| ONE / z)
            .collect())
    }

    /// Numerator and denominator of `det χ` recovered as polynomials by
    /// interpolation at `m + 2` points of the circle `|λ| = radius`. For a
    /// genuine realization both have degree at most m, so the top
    /// coefficient is zero up to rounding.
    pub fn det_polynomials(&self, radius: f64) -> Result<(Polynomial, Polynomial)> {
        let nodes = self.m() + 2;
        let num = Polynomial::interpolate_on_circle(radius, nodes, |l| Ok(self.det_parts_unchecked(l)?.numerator))?;
        let den = Polynomial::interpolate_on_circle(radius, nodes, |l| Ok(self.det_parts_unchecked(l)?.denominator))?;
        Ok((num, den))
    }
}

/// Evaluates `χ_g(t)` the long way round: `H = cayley(g)`, `φ` the
/// characteristic function of H, `ψ = cayley ∘ φ`, returned at
/// `(t + 1)/(t − 1)`.
///
/// Failures name the stage: `"cayley(g)"`, `"phi(s)"` or `"cayley(phi)"`.
pub fn lemma2_chain(g: &BlockUnitary, t: C64) -> Result<ComplexMatrix> {
    if (t - ONE).norm() <= tol::SINGULAR {
        return Err(Error::Domain("t = 1 maps to infinity".into()));
    }
    let h = cayley_at(g.matrix(), "cayley(g)")?;
    let phi = CharFunction::from_blocks(BlockMatrix::new(h, g.n(), g.m())?);
    let s = (t + ONE) / (t - ONE);
    let value = phi.eval(s).map_err(|e| match e {
        Error::Pole { .. } => Error::Singularity { stage: "phi(s)", sigma_min: 0.0 },
        other => other,
    })?;
    cayley_at(&value, "cayley(phi)")
}
