//! The four orthonormal systems: standard Laguerre functions ℒ_k^α on
//! (0,∞), Laguerre functions of Hermite type φ_k^α(u) = √(2u) ℒ_k^α(u²),
//! generalized Hermite functions h_k^λ on ℝ, and Jacobi trigonometric
//! functions φ_k^{α,β} on (0,π).
//!
//! All evaluation runs a three-term recurrence on the normalized functions,
//! so no Γ-ratio or polynomial value is ever formed on its own.

mod deriv;

pub use deriv::{derivative_terms, eval_deriv_1d, eval_deriv_upto, Term, MAX_DERIVATIVE_ORDER, MAX_EXACT_ORDER};
pub(crate) use deriv::eval_terms;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::specfun::ln_gamma;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    LaguerreStd,
    LaguerreHermite,
    GeneralizedHermite,
    JacobiTrig,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::LaguerreStd => "laguerre-std",
            Family::LaguerreHermite => "laguerre-hermite",
            Family::GeneralizedHermite => "generalized-hermite",
            Family::JacobiTrig => "jacobi",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "laguerre-std" | "laguerre" => Ok(Family::LaguerreStd),
            "laguerre-hermite" | "hermite-type" => Ok(Family::LaguerreHermite),
            "generalized-hermite" | "gen-hermite" => Ok(Family::GeneralizedHermite),
            "jacobi" | "jacobi-trig" => Ok(Family::JacobiTrig),
            _ => Err(Error::Parse(format!("unknown system {s:?}"))),
        }
    }
}

/// One coordinate of a system: the family with its type parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum System1D {
    LaguerreStd { alpha: f64 },
    LaguerreHermite { alpha: f64 },
    GeneralizedHermite { lambda: f64 },
    JacobiTrig { alpha: f64, beta: f64 },
}

impl fmt::Display for System1D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            System1D::LaguerreStd { alpha } | System1D::LaguerreHermite { alpha } => {
                write!(f, "{}(alpha={alpha})", self.family())
            }
            System1D::GeneralizedHermite { lambda } => write!(f, "{}(lambda={lambda})", self.family()),
            System1D::JacobiTrig { alpha, beta } => write!(f, "{}(alpha={alpha},beta={beta})", self.family()),
        }
    }
}

impl System1D {
    pub fn laguerre_std(alpha: f64) -> Result<Self> {
        Self::LaguerreStd { alpha }.validated()
    }
    pub fn laguerre_hermite(alpha: f64) -> Result<Self> {
        Self::LaguerreHermite { alpha }.validated()
    }
    pub fn generalized_hermite(lambda: f64) -> Result<Self> {
        Self::GeneralizedHermite { lambda }.validated()
    }
    pub fn jacobi(alpha: f64, beta: f64) -> Result<Self> {
        Self::JacobiTrig { alpha, beta }.validated()
    }

    pub fn validated(self) -> Result<Self> {
        let ok = match self {
            System1D::LaguerreStd { alpha } => alpha > -1.0,
            System1D::LaguerreHermite { alpha } => alpha >= -0.5,
            System1D::GeneralizedHermite { lambda } => lambda >= 0.0,
            System1D::JacobiTrig { alpha, beta } => alpha >= -0.5 && beta >= -0.5,
        };
        let finite = match self {
            System1D::JacobiTrig { alpha, beta } => alpha.is_finite() && beta.is_finite(),
            _ => self.alpha().is_finite(),
        };
        if ok && finite {
            Ok(self)
        } else {
            domain(format!("parameters out of range for {self:?}"))
        }
    }

    pub fn family(&self) -> Family {
        match self {
            System1D::LaguerreStd { .. } => Family::LaguerreStd,
            System1D::LaguerreHermite { .. } => Family::LaguerreHermite,
            System1D::GeneralizedHermite { .. } => Family::GeneralizedHermite,
            System1D::JacobiTrig { .. } => Family::JacobiTrig,
        }
    }

    /// The first type parameter (λ for generalized Hermite).
    pub fn alpha(&self) -> f64 {
        match *self {
            System1D::LaguerreStd { alpha }
            | System1D::LaguerreHermite { alpha }
            | System1D::JacobiTrig { alpha, .. } => alpha,
            System1D::GeneralizedHermite { lambda } => lambda,
        }
    }

    pub fn beta(&self) -> f64 {
        match *self {
            System1D::JacobiTrig { beta, .. } => beta,
            _ => 0.0,
        }
    }

    /// Open domain interval.
    pub fn domain(&self) -> (f64, f64) {
        match self {
            System1D::LaguerreStd { .. } | System1D::LaguerreHermite { .. } => (0.0, f64::INFINITY),
            System1D::GeneralizedHermite { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            System1D::JacobiTrig { .. } => (0.0, std::f64::consts::PI),
        }
    }

    /// Whether the functions extend smoothly to the endpoint 0 (or through 0).
    pub fn smooth_at_zero(&self) -> bool {
        match *self {
            System1D::LaguerreHermite { alpha } => is_natural(alpha + 0.5),
            System1D::GeneralizedHermite { lambda } => is_natural(lambda) && (lambda as u64) % 2 == 0,
            _ => false,
        }
    }

    /// Parameters raised by `s` in every slot (the index/parameter shift of
    /// the derivative recurrences).
    pub(crate) fn shifted(&self, s: usize) -> System1D {
        let s = s as f64;
        match *self {
            System1D::LaguerreStd { alpha } => System1D::LaguerreStd { alpha: alpha + s },
            System1D::LaguerreHermite { alpha } => System1D::LaguerreHermite { alpha: alpha + s },
            System1D::GeneralizedHermite { lambda } => System1D::GeneralizedHermite { lambda: lambda + s },
            System1D::JacobiTrig { alpha, beta } => System1D::JacobiTrig { alpha: alpha + s, beta: beta + s },
        }
    }

    pub(crate) fn check_point(&self, u: f64) -> Result<()> {
        if !u.is_finite() {
            return domain(format!("non-finite point {u}"));
        }
        let (lo, hi) = self.domain();
        let inside = u > lo && u < hi;
        let endpoint_ok = u == 0.0 && self.smooth_at_zero();
        if inside || endpoint_ok {
            Ok(())
        } else {
            domain(format!("point {u} outside the domain of {}", self.family()))
        }
    }
}

fn is_natural(x: f64) -> bool {
    x >= 0.0 && x.fract() == 0.0
}

/// k′ = max(4k + 2α + 2, 2).
pub fn k_prime(k: usize, alpha: f64) -> f64 {
    (4.0 * k as f64 + 2.0 * alpha + 2.0).max(2.0)
}

/// A d-dimensional tensor-product system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemSpec {
    pub family: Family,
    pub alpha: Vec<f64>,
    #[serde(default)]
    pub beta: Vec<f64>,
    #[serde(default)]
    pub lambda: Vec<f64>,
    pub d: usize,
}

impl SystemSpec {
    pub fn new(family: Family, alpha: Vec<f64>, beta: Vec<f64>, lambda: Vec<f64>) -> Result<Self> {
        let d = match family {
            Family::GeneralizedHermite => lambda.len(),
            _ => alpha.len(),
        };
        if d == 0 {
            return domain("dimension must be positive");
        }
        let check = |v: &Vec<f64>| -> Result<()> {
            if v.len() != d {
                return Err(Error::Shape { expected: d, got: v.len() });
            }
            Ok(())
        };
        match family {
            Family::JacobiTrig => {
                check(&alpha)?;
                check(&beta)?;
            }
            Family::GeneralizedHermite => check(&lambda)?,
            _ => check(&alpha)?,
        }
        let spec = SystemSpec { family, alpha, beta, lambda, d };
        for i in 0..d {
            spec.coordinate(i).validated()?;
        }
        Ok(spec)
    }

    /// Same one-dimensional system in every coordinate.
    pub fn isotropic(sys: System1D, d: usize) -> Self {
        let family = sys.family();
        let (alpha, beta, lambda) = match sys {
            System1D::GeneralizedHermite { lambda } => (vec![], vec![], vec![lambda; d]),
            System1D::JacobiTrig { alpha, beta } => (vec![alpha; d], vec![beta; d], vec![]),
            other => (vec![other.alpha(); d], vec![], vec![]),
        };
        SystemSpec { family, alpha, beta, lambda, d }
    }

    pub fn one_d(sys: System1D) -> Self {
        Self::isotropic(sys, 1)
    }

    pub fn coordinate(&self, i: usize) -> System1D {
        match self.family {
            Family::LaguerreStd => System1D::LaguerreStd { alpha: self.alpha[i] },
            Family::LaguerreHermite => System1D::LaguerreHermite { alpha: self.alpha[i] },
            Family::GeneralizedHermite => System1D::GeneralizedHermite { lambda: self.lambda[i] },
            Family::JacobiTrig => System1D::JacobiTrig { alpha: self.alpha[i], beta: self.beta[i] },
        }
    }

    pub fn coordinates(&self) -> Vec<System1D> {
        (0..self.d).map(|i| self.coordinate(i)).collect()
    }

    /// |α| = Σ α_i.
    pub fn alpha_length(&self) -> f64 {
        self.alpha.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MultiIndex(pub Vec<usize>);

impl MultiIndex {
    pub fn length(&self) -> usize {
        self.0.iter().sum()
    }
    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl DomainBox {
    pub fn of(spec: &SystemSpec) -> Self {
        let (lower, upper) = spec.coordinates().iter().map(|c| c.domain()).unzip();
        DomainBox { lower, upper }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.lower.len()
            && x.iter().zip(self.lower.iter().zip(&self.upper)).all(|(v, (lo, hi))| v > lo && v < hi)
    }
}

const RESCALE: f64 = 1e150;

/// ℓ_k(x) e^{log_pref} for k = 0..=kmax, where ℓ_k = √(k!/Γ(k+α+1)) L_k^α(x).
fn laguerre_normalized(alpha: f64, x: f64, log_pref: f64, out: &mut [f64]) {
    let mut lg = log_pref - 0.5 * ln_gamma(alpha + 1.0);
    let mut p0 = 0.0;
    let mut p1 = 1.0;
    out[0] = lg.exp();
    for k in 1..out.len() {
        let km = (k - 1) as f64;
        let p2 = ((2.0 * km + alpha + 1.0 - x) * p1 - (km * (km + alpha)).sqrt() * p0)
            / ((km + 1.0) * (km + alpha + 1.0)).sqrt();
        p0 = p1;
        p1 = p2;
        if p1.abs() > RESCALE {
            p0 /= RESCALE;
            p1 /= RESCALE;
            lg += RESCALE.ln();
        }
        out[k] = if p1 == 0.0 { 0.0 } else { p1.signum() * (lg + p1.abs().ln()).exp() };
    }
}

fn laguerre_std_upto(alpha: f64, u: f64, out: &mut [f64]) {
    laguerre_normalized(alpha, u, -0.5 * u + 0.5 * alpha * u.ln(), out);
}

/// Hermite-type values for u ≥ 0, with the u → 0⁺ limit at u = 0.
fn hermite_type_upto(alpha: f64, u: f64, out: &mut [f64]) {
    let e = alpha + 0.5;
    if u == 0.0 && e > 0.0 {
        out.iter_mut().for_each(|v| *v = 0.0);
        return;
    }
    let power = if e == 0.0 { 0.0 } else { e * u.ln() };
    laguerre_normalized(alpha, u * u, 0.5 * std::f64::consts::LN_2 - 0.5 * u * u + power, out);
}

fn generalized_hermite_upto(lambda: f64, u: f64, out: &mut [f64]) {
    let n = out.len();
    let m_even = n.div_ceil(2);
    let m_odd = n / 2;
    let a = u.abs();
    let mut even = vec![0.0; m_even];
    hermite_type_upto(lambda - 0.5, a, &mut even);
    let mut odd = vec![0.0; m_odd];
    if m_odd > 0 {
        hermite_type_upto(lambda + 0.5, a, &mut odd);
    }
    let sgn = if u > 0.0 { 1.0 } else if u < 0.0 { -1.0 } else { 0.0 };
    let r = std::f64::consts::FRAC_1_SQRT_2;
    for (k, slot) in out.iter_mut().enumerate() {
        let m = k / 2;
        let s = if m % 2 == 0 { r } else { -r };
        *slot = if k % 2 == 0 { s * even[m] } else { s * sgn * odd[m] };
    }
}

/// Jacobi recurrence coefficient a_k (k ≥ 1) of the orthonormal polynomials.
fn jacobi_a(k: usize, alpha: f64, beta: f64) -> f64 {
    let kf = k as f64;
    let ab = alpha + beta;
    let c = 2.0 * kf + ab;
    if k == 1 {
        return 2.0 / (2.0 + ab) * ((1.0 + alpha) * (1.0 + beta) / (3.0 + ab)).sqrt();
    }
    2.0 / c * (kf * (kf + alpha) * (kf + beta) * (kf + ab) / ((c - 1.0) * (c + 1.0))).sqrt()
}

fn jacobi_b(k: usize, alpha: f64, beta: f64) -> f64 {
    let ab = alpha + beta;
    if k == 0 {
        return (beta - alpha) / (ab + 2.0);
    }
    let c = 2.0 * k as f64 + ab;
    (beta * beta - alpha * alpha) / (c * (c + 2.0))
}

fn jacobi_upto(alpha: f64, beta: f64, theta: f64, out: &mut [f64]) {
    let (s, c) = (0.5 * theta).sin_cos();
    let x = theta.cos();
    let log_c0 = 0.5 * (ln_gamma(alpha + beta + 2.0) - ln_gamma(alpha + 1.0) - ln_gamma(beta + 1.0));
    let pref = ((alpha + 0.5) * s.ln() + (beta + 0.5) * c.ln() + log_c0).exp();
    let mut p0 = 0.0;
    let mut p1 = 1.0;
    out[0] = pref;
    let mut a_prev = 0.0;
    for k in 1..out.len() {
        let a_k = jacobi_a(k, alpha, beta);
        let p2 = ((x - jacobi_b(k - 1, alpha, beta)) * p1 - a_prev * p0) / a_k;
        p0 = p1;
        p1 = p2;
        a_prev = a_k;
        out[k] = pref * p1;
    }
}

/// φ_0(u), …, φ_kmax(u) in one recurrence pass.
pub fn eval_upto(sys: &System1D, kmax: usize, u: f64) -> Result<Vec<f64>> {
    sys.validated()?;
    sys.check_point(u)?;
    let mut out = vec![0.0; kmax + 1];
    fill_upto(sys, u, &mut out);
    Ok(out)
}

/// Unchecked batch evaluation; callers guarantee parameters and point.
pub(crate) fn fill_upto(sys: &System1D, u: f64, out: &mut [f64]) {
    match *sys {
        System1D::LaguerreStd { alpha } => laguerre_std_upto(alpha, u, out),
        System1D::LaguerreHermite { alpha } => hermite_type_upto(alpha, u, out),
        System1D::GeneralizedHermite { lambda } => generalized_hermite_upto(lambda, u, out),
        System1D::JacobiTrig { alpha, beta } => jacobi_upto(alpha, beta, u, out),
    }
}

/// φ_k(u) for a one-dimensional system.
pub fn eval_1d(sys: &System1D, k: usize, u: f64) -> Result<f64> {
    Ok(eval_upto(sys, k, u)?[k])
}

/// Π_i φ_{n_i}(x_i).
pub fn eval_tensor(spec: &SystemSpec, n: &MultiIndex, x: &[f64]) -> Result<f64> {
    if n.dim() != spec.d {
        return Err(Error::Shape { expected: spec.d, got: n.dim() });
    }
    if x.len() != spec.d {
        return Err(Error::Shape { expected: spec.d, got: x.len() });
    }
    let mut prod = 1.0;
    for (i, (&k, &xi)) in n.0.iter().zip(x).enumerate() {
        prod *= eval_1d(&spec.coordinate(i), k, xi)?;
    }
    Ok(prod)
}
