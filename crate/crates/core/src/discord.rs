//! Gaussian discord between the mechanical and atomic modes, computed from
//! the 4×4 covariance of `(δq_m, δp_m, δq_d, δp_d)`.
//!
//! The entropy function below needs symplectic eigenvalues of at least 1, so
//! inputs in the dynamics convention (vacuum variance 1/2) are doubled first.

use nalgebra::{Matrix2, Matrix4};

use crate::covariance::CovMatrix6;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VacuumConvention {
    /// Vacuum variance 1/2 per quadrature.
    HalfVacuum,
    /// Vacuum variance 1 per quadrature.
    UnitVacuum,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovMatrix4 {
    m: Matrix4<f64>,
    convention: VacuumConvention,
}

impl CovMatrix4 {
    pub fn new(m: Matrix4<f64>, convention: VacuumConvention) -> Self {
        Self { m, convention }
    }

    pub fn matrix(&self) -> &Matrix4<f64> {
        &self.m
    }

    pub fn convention(&self) -> VacuumConvention {
        self.convention
    }

    pub fn block_a(&self) -> Matrix2<f64> {
        self.m.fixed_view::<2, 2>(0, 0).into_owned()
    }

    pub fn block_b(&self) -> Matrix2<f64> {
        self.m.fixed_view::<2, 2>(2, 2).into_owned()
    }

    /// Cross block, rows from mode A and columns from mode B.
    pub fn block_c(&self) -> Matrix2<f64> {
        self.m.fixed_view::<2, 2>(0, 2).into_owned()
    }

    /// Doubles the matrix; fails if it is already in the unit convention.
    pub fn rescale_to_unit_vacuum(&self) -> Result<Self> {
        match self.convention {
            VacuumConvention::HalfVacuum => Ok(Self {
                m: self.m * 2.0,
                convention: VacuumConvention::UnitVacuum,
            }),
            VacuumConvention::UnitVacuum => Err(Error::InvalidArgument(
                "covariance is already in the unit-vacuum convention".into(),
            )),
        }
    }

    fn to_unit(self) -> Self {
        match self.convention {
            VacuumConvention::HalfVacuum => {
                self.rescale_to_unit_vacuum().expect("half-vacuum input")
            }
            VacuumConvention::UnitVacuum => self,
        }
    }

    /// `(α, β, γ, δ) = (det A, det B, det C, det V)`.
    pub fn invariants(&self) -> Invariants {
        Invariants {
            alpha: self.block_a().determinant(),
            beta: self.block_b().determinant(),
            gamma: self.block_c().determinant(),
            delta: self.m.determinant(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Invariants {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
}

/// Mechanical and atomic rows/columns of `V`, in the half-vacuum convention.
pub fn reduce(v: &CovMatrix6) -> CovMatrix4 {
    CovMatrix4::new(
        v.matrix().fixed_view::<4, 4>(0, 0).into_owned(),
        VacuumConvention::HalfVacuum,
    )
}

/// Radicands more negative than this (relative to `Σ²`) are an error.
const RADICAND_TOLERANCE: f64 = 1e-12;

/// `(ν₊, ν₋)` from the invariants of a unit-vacuum matrix.
pub fn symplectic_eigenvalues(v: &CovMatrix4) -> Result<(f64, f64)> {
    if v.convention != VacuumConvention::UnitVacuum {
        return Err(Error::InvalidArgument(
            "symplectic eigenvalues expect the unit-vacuum convention".into(),
        ));
    }
    let inv = v.invariants();
    let sigma = inv.alpha + inv.beta + 2.0 * inv.gamma;
    let mut radicand = sigma * sigma - 4.0 * inv.delta;
    if radicand < 0.0 {
        if radicand < -RADICAND_TOLERANCE * sigma * sigma.max(1.0) {
            return Err(Error::Degenerate(format!(
                "negative radicand {radicand:e} in symplectic eigenvalues"
            )));
        }
        radicand = 0.0;
    }
    let root = radicand.sqrt();
    let plus = ((sigma + root) / 2.0).max(0.0).sqrt();
    let minus = ((sigma - root) / 2.0).max(0.0).sqrt();
    Ok((plus, minus))
}

/// `(ν₊, ν₋)` as the moduli of the eigenvalues of `iΩV`, via a general eigen-solve.
pub fn symplectic_spectrum(v: &CovMatrix4) -> (f64, f64) {
    let mut omega = Matrix4::zeros();
    omega[(0, 1)] = 1.0;
    omega[(1, 0)] = -1.0;
    omega[(2, 3)] = 1.0;
    omega[(3, 2)] = -1.0;
    let ev = (omega * v.m).complex_eigenvalues();
    let mut mods: Vec<f64> = ev.iter().map(|z| z.norm()).collect();
    mods.sort_by(f64::total_cmp);
    // Eigenvalues come in ±iν pairs.
    (0.5 * (mods[2] + mods[3]), 0.5 * (mods[0] + mods[1]))
}

/// True when `ν₋ ≥ 1 - tol` in the unit convention.
pub fn is_physical(v: &CovMatrix4, tol: f64) -> bool {
    let unit = v.to_unit();
    matches!(symplectic_eigenvalues(&unit), Ok((_, minus)) if minus >= 1.0 - tol)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LogBase {
    #[default]
    Two,
    E,
}

impl LogBase {
    fn log(self, x: f64) -> f64 {
        match self {
            LogBase::Two => x.log2(),
            LogBase::E => x.ln(),
        }
    }
}

impl std::str::FromStr for LogBase {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "2" | "two" => Ok(Self::Two),
            "e" | "natural" => Ok(Self::E),
            other => Err(format!("unknown log base `{other}` (expected 2 or e)")),
        }
    }
}

/// Sign of the `f(√ε)` term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EpsilonSign {
    /// `+f(√ε)`: vanishes on product states.
    #[default]
    Plus,
    /// `-f(√ε)`, kept for comparison.
    Minus,
}

impl std::str::FromStr for EpsilonSign {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "plus" | "+" => Ok(Self::Plus),
            "minus" | "-" => Ok(Self::Minus),
            other => Err(format!(
                "unknown epsilon sign `{other}` (expected plus or minus)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DiscordOptions {
    pub log_base: LogBase,
    pub sign: EpsilonSign,
}

/// Arguments in `[1 - SNAP, 1)` are treated as exactly 1. Near-pure states
/// lose about half their digits in `ν` and `√ε`, so this is wider than the
/// physicality tolerance.
const SNAP: f64 = 1e-6;

/// `f(x) = ((x+1)/2) log((x+1)/2) - ((x-1)/2) log((x-1)/2)`, with `f(1) = 0`.
pub fn entropy_function(x: f64, base: LogBase) -> f64 {
    let x = if x < 1.0 && x >= 1.0 - SNAP { 1.0 } else { x };
    let a = 0.5 * (x + 1.0);
    let b = 0.5 * (x - 1.0);
    let tb = if b == 0.0 { 0.0 } else { b * base.log(b) };
    a * base.log(a) - tb
}

/// The conditional-entropy parameter ε from the four invariants.
pub fn epsilon(inv: &Invariants) -> f64 {
    let Invariants {
        alpha,
        beta,
        gamma,
        delta,
    } = *inv;
    let g2 = gamma * gamma;
    let lhs = (delta - alpha * beta).powi(2);
    let rhs = (beta + 1.0) * g2 * (alpha + delta);
    if lhs <= rhs && (beta - 1.0).abs() > 1e-12 {
        let bm = beta - 1.0;
        let inner = (g2 + bm * (delta - alpha)).max(0.0);
        (2.0 * g2 + bm * (delta - alpha) + 2.0 * gamma.abs() * inner.sqrt()) / (bm * bm)
    } else {
        let ab = alpha * beta;
        let disc = (g2 * g2 + (delta - ab).powi(2) - 2.0 * g2 * (delta + ab)).max(0.0);
        (ab - g2 + delta - disc.sqrt()) / (2.0 * beta)
    }
}

/// Negative results down to this value are reported as 0.
const CLAMP: f64 = 1e-10;

/// Gaussian discord with measurement on mode B; half-vacuum inputs are rescaled first.
pub fn gaussian_discord(v: &CovMatrix4, opts: &DiscordOptions) -> Result<f64> {
    let unit = v.to_unit();
    if unit.block_c().iter().all(|c| *c == 0.0) {
        return Ok(0.0);
    }
    let inv = unit.invariants();
    let (nu_plus, nu_minus) = symplectic_eigenvalues(&unit)?;
    let eps = epsilon(&inv);
    let f = |x: f64| entropy_function(x, opts.log_base);
    let tail = f(eps.max(0.0).sqrt());
    let d = f(inv.beta.sqrt()) - f(nu_minus) - f(nu_plus)
        + match opts.sign {
            EpsilonSign::Plus => tail,
            EpsilonSign::Minus => -tail,
        };
    if !d.is_finite() {
        return Err(Error::Degenerate(format!(
            "non-finite discord for invariants {inv:?}"
        )));
    }
    Ok(if (-CLAMP..0.0).contains(&d) { 0.0 } else { d })
}
