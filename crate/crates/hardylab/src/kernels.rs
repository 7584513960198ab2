//! Kernels R_r(x, y) = Σ_n r^{|n|} φ_n(x) φ_n(y): closed forms for the
//! Laguerre-type families, a truncated spectral sum for every family, the
//! Hermite-type heat kernel, and L² norms of u-derivatives.

use serde::{Deserialize, Serialize};

use crate::bases::{self, eval_deriv_upto, Family, System1D, SystemSpec};
use crate::error::{domain, Error, Result};
use crate::numdiff::richardson_derivative;
use crate::quadrature::{integrate_adaptive, QuadOptions, Singularity};
use crate::specfun::ln_reduced_scaled;

/// sup_u |φ_k(u)|² ≤ HERMITE_SUP_SQ (k+1)^{−1/6} for Hermite-type functions.
pub const HERMITE_SUP_SQ: f64 = 1.128_379_167_095_512_6;

const MAX_SPECTRAL_TERMS: usize = 2_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelQuery {
    pub system: SystemSpec,
    pub r: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl KernelQuery {
    pub fn validate(&self) -> Result<()> {
        check_r(self.r)?;
        for pts in [&self.x, &self.y] {
            if pts.len() != self.system.d {
                return Err(Error::Shape { expected: self.system.d, got: pts.len() });
            }
            for (i, &u) in pts.iter().enumerate() {
                self.system.coordinate(i).check_point(u)?;
            }
        }
        Ok(())
    }
}

/// Per-coordinate cutoff K_max and the largest acceptable tail bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralTruncation {
    pub k_max: usize,
    pub tail_bound: f64,
}

impl SpectralTruncation {
    /// Fixed cutoff with no tail requirement.
    pub fn fixed(k_max: usize) -> Self {
        Self { k_max, tail_bound: f64::INFINITY }
    }

    /// Smallest cutoff whose tail bound is ≤ tol.
    pub fn for_tolerance(sys: &System1D, r: f64, tol: f64) -> Result<Self> {
        check_r(r)?;
        if !(tol > 0.0) {
            return domain(format!("tolerance must be positive, got {tol}"));
        }
        let mut k = 0;
        loop {
            let t = tail_bound(sys, r, k);
            if t <= tol {
                return Ok(Self { k_max: k, tail_bound: tol });
            }
            if !t.is_finite() || k >= MAX_SPECTRAL_TERMS {
                return Err(Error::TruncationInsufficient { achieved: t, requested: tol });
            }
            k += 1;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralValue {
    pub value: f64,
    pub k_max: usize,
    pub tail_bound: f64,
}

fn check_r(r: f64) -> Result<()> {
    if r > 0.0 && r < 1.0 {
        Ok(())
    } else {
        domain(format!("r must lie in (0, 1), got {r}"))
    }
}

/// Bound B_k on sup_u |φ_k(u)|².
pub fn sup_sq_bound(sys: &System1D, k: usize) -> f64 {
    match *sys {
        System1D::LaguerreStd { alpha } => {
            if alpha >= 0.0 {
                1.0
            } else {
                f64::INFINITY
            }
        }
        System1D::LaguerreHermite { .. } => HERMITE_SUP_SQ * ((k + 1) as f64).powf(-1.0 / 6.0),
        System1D::GeneralizedHermite { .. } => 0.5 * HERMITE_SUP_SQ * ((k / 2 + 1) as f64).powf(-1.0 / 6.0),
        System1D::JacobiTrig { alpha, beta } => (1.0 + alpha.max(beta).max(0.0)).cbrt(),
    }
}

/// Σ_{k>K} r^k B_k, bounded by B_{K+1} r^{K+1} / (1 − r) since B_k is non-increasing.
pub fn tail_bound(sys: &System1D, r: f64, k_max: usize) -> f64 {
    let b = sup_sq_bound(sys, k_max + 1);
    if !b.is_finite() {
        return f64::INFINITY;
    }
    b * ((k_max + 1) as f64 * r.ln()).exp() / (1.0 - r)
}

/// ln of the standard Laguerre kernel at (u, v) ≥ 0, in the grouped form
/// (1−r)^{−1−α} (uv)^{α/2} exp(−(1+r)(√u−√v)²/(2(1−r)) − (1−r)√(uv)/(1+√r)²) Ĩ_α(z).
fn ln_std_kernel(alpha: f64, r: f64, u: f64, v: f64) -> f64 {
    let (a, b) = (u.sqrt(), v.sqrt());
    let ab = a * b;
    let sr = r.sqrt();
    let z = 2.0 * sr * ab / (1.0 - r);
    let power = if alpha == 0.0 { 0.0 } else { alpha * ab.ln() };
    let expo = -(1.0 + r) / (2.0 * (1.0 - r)) * (a - b) * (a - b) - (1.0 - r) / ((1.0 + sr) * (1.0 + sr)) * ab;
    -(1.0 + alpha) * (1.0 - r).ln() + power + expo + ln_reduced_scaled(alpha, z)
}

/// Hermite-type kernel 2√(uv) R_std(u², v²) for u, v ≥ 0.
fn hermite_kernel(alpha: f64, r: f64, u: f64, v: f64) -> f64 {
    let e = alpha + 0.5;
    if e == 0.0 {
        // cosh form: 2/(√π √(1−r)) exp(−(1+r)(u²+v²)/(2(1−r))) cosh(2√r uv/(1−r))
        let sr = r.sqrt();
        let g = (1.0 - sr) * (1.0 - sr) / (1.0 - r) * u * v;
        let plus = -(1.0 + r) / (2.0 * (1.0 - r)) * (u - v) * (u - v) - g;
        let minus = -(1.0 + r) / (2.0 * (1.0 - r)) * (u + v) * (u + v) + g;
        let c = 1.0 / (std::f64::consts::PI.sqrt() * (1.0 - r).sqrt());
        return c * (plus.exp() + minus.exp());
    }
    if u == 0.0 || v == 0.0 {
        return 0.0;
    }
    let sr = r.sqrt();
    let z = 2.0 * sr * u * v / (1.0 - r);
    let expo = -(1.0 + r) / (2.0 * (1.0 - r)) * (u - v) * (u - v) - (1.0 - r) / ((1.0 + sr) * (1.0 + sr)) * u * v;
    let ln = std::f64::consts::LN_2 - (1.0 + alpha) * (1.0 - r).ln() + e * (u * v).ln() + expo
        + ln_reduced_scaled(alpha, z);
    ln.exp()
}

/// Closed-form R_r(u, v) for the Laguerre-type and generalized Hermite families.
pub fn kernel_closed_1d(sys: &System1D, r: f64, u: f64, v: f64) -> Result<f64> {
    let sys = sys.validated()?;
    check_r(r)?;
    sys.check_point(u)?;
    sys.check_point(v)?;
    Ok(match sys {
        System1D::LaguerreStd { alpha } => ln_std_kernel(alpha, r, u, v).exp(),
        System1D::LaguerreHermite { alpha } => hermite_kernel(alpha, r, u, v),
        System1D::GeneralizedHermite { lambda } => {
            let r2 = r * r;
            let (a, b) = (u.abs(), v.abs());
            let even = hermite_kernel(lambda - 0.5, r2, a, b);
            let s = (u * v).signum();
            let odd = if u * v == 0.0 { 0.0 } else { s * r * hermite_kernel(lambda + 0.5, r2, a, b) };
            0.5 * (even + odd)
        }
        System1D::JacobiTrig { .. } => {
            return Err(Error::UnsupportedClosedForm(
                "no closed-form Jacobi kernel; use kernel_spectral".into(),
            ))
        }
    })
}

/// Σ_{k ≤ K_max} r^k φ_k(u) φ_k(v) with its tail bound.
pub fn kernel_spectral(sys: &System1D, r: f64, u: f64, v: f64, trunc: &SpectralTruncation) -> Result<SpectralValue> {
    check_r(r)?;
    let tail = tail_bound(sys, r, trunc.k_max);
    if tail > trunc.tail_bound {
        return Err(Error::TruncationInsufficient { achieved: tail, requested: trunc.tail_bound });
    }
    let pu = bases::eval_upto(sys, trunc.k_max, u)?;
    let pv = bases::eval_upto(sys, trunc.k_max, v)?;
    let mut sum = 0.0;
    let mut rk = 1.0;
    for (a, b) in pu.iter().zip(&pv) {
        sum += rk * a * b;
        rk *= r;
    }
    Ok(SpectralValue { value: sum, k_max: trunc.k_max, tail_bound: tail })
}

/// Closed form when available, otherwise the spectral sum at tail ≤ 1e−15.
pub fn kernel_1d(sys: &System1D, r: f64, u: f64, v: f64) -> Result<f64> {
    match kernel_closed_1d(sys, r, u, v) {
        Err(Error::UnsupportedClosedForm(_)) => {
            let trunc = SpectralTruncation::for_tolerance(sys, r, 1e-15)?;
            Ok(kernel_spectral(sys, r, u, v, &trunc)?.value)
        }
        other => other,
    }
}

/// Product of one-dimensional kernels. Coordinates without a closed form
/// use `trunc`, or a 1e−15 tail when `trunc` is `None`.
pub fn kernel_tensor(spec: &SystemSpec, r: f64, x: &[f64], y: &[f64], trunc: Option<&SpectralTruncation>) -> Result<f64> {
    check_r(r)?;
    for pts in [x, y] {
        if pts.len() != spec.d {
            return Err(Error::Shape { expected: spec.d, got: pts.len() });
        }
    }
    let mut prod = 1.0;
    for (i, sys) in spec.coordinates().iter().enumerate() {
        let k = match (sys.family(), trunc) {
            (Family::JacobiTrig, Some(t)) => kernel_spectral(sys, r, x[i], y[i], t)?.value,
            _ => kernel_1d(sys, r, x[i], y[i])?,
        };
        prod *= k;
    }
    Ok(prod)
}

fn hermite_alphas(spec: &SystemSpec) -> Result<Vec<f64>> {
    spec.coordinates()
        .iter()
        .map(|s| match *s {
            System1D::LaguerreHermite { alpha } => Ok(alpha),
            _ => domain("the heat kernel is defined for Hermite-type Laguerre systems"),
        })
        .collect()
}

fn check_t(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        domain(format!("t must be positive, got {t}"))
    }
}

/// G_t(x, y) = e^{−2t(|α|+d)} R_{e^{−4t}}(x, y).
pub fn heat_kernel(spec: &SystemSpec, t: f64, x: &[f64], y: &[f64]) -> Result<f64> {
    check_t(t)?;
    let alphas = hermite_alphas(spec)?;
    let alpha_len: f64 = alphas.iter().sum();
    let r = (-4.0 * t).exp();
    let scale = (-2.0 * t * (alpha_len + spec.d as f64)).exp();
    Ok(scale * kernel_tensor(spec, r, x, y, None)?)
}

/// The explicit product
/// (sinh 2t)^{−d} exp(−½ coth 2t (|x|²+|y|²)) Π √(x_i y_i) I_{α_i}(x_i y_i / sinh 2t).
pub fn heat_kernel_explicit(spec: &SystemSpec, t: f64, x: &[f64], y: &[f64]) -> Result<f64> {
    check_t(t)?;
    let alphas = hermite_alphas(spec)?;
    for pts in [x, y] {
        if pts.len() != spec.d {
            return Err(Error::Shape { expected: spec.d, got: pts.len() });
        }
    }
    let sh = (2.0 * t).sinh();
    let coth = 1.0 / (2.0 * t).tanh();
    let mut ln = 0.0;
    for (i, &alpha) in alphas.iter().enumerate() {
        let (u, v) = (x[i], y[i]);
        spec.coordinate(i).check_point(u)?;
        spec.coordinate(i).check_point(v)?;
        let e = alpha + 0.5;
        let uv = u * v;
        if uv == 0.0 && e > 0.0 {
            return Ok(0.0);
        }
        let z = uv / sh;
        // √(uv) I_α(z) = (uv)^{α+½} (2 sinh 2t)^{−α} e^z Ĩ_α(z)
        let power = if e == 0.0 { 0.0 } else { e * uv.ln() };
        ln += -sh.ln() - 0.5 * coth * (u * u + v * v) + power - alpha * (2.0 * sh).ln() + z + ln_reduced_scaled(alpha, z);
    }
    Ok(ln.exp())
}

/// Route for ∥∂_u^j R_r(u, ·)∥_{L²}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DerivPath {
    /// Parseval: (Σ_k r^{2k} φ_k^{(j)}(u)²)^{1/2}.
    Spectral,
    /// Richardson differences of the kernel in u, then quadrature in v.
    FiniteDifference,
}

pub const MAX_KERNEL_DERIV_ORDER: usize = 3;

/// Cutoff K with r^{2K} (K+1)^{2j+2} ≤ 1e−20.
pub(crate) fn parseval_cutoff(r: f64, j: usize) -> usize {
    let lr = r.ln();
    let mut k = 1usize;
    while 2.0 * k as f64 * lr + (2 * j + 2) as f64 * ((k + 1) as f64).ln() > -46.0 {
        k += 1;
    }
    k
}

fn kernel_deriv_l2_spectral(sys: &System1D, r: f64, j: usize, u: f64) -> Result<f64> {
    let k = parseval_cutoff(r, j);
    let d = eval_deriv_upto(sys, k, j, u)?;
    let mut sum = 0.0;
    let r2 = r * r;
    let mut rk = 1.0;
    for v in d {
        sum += rk * v * v;
        rk *= r2;
    }
    Ok(sum.sqrt())
}

/// u-step for the finite-difference path: a fraction of the kernel's
/// diagonal width, kept inside the domain.
pub fn fd_step(sys: &System1D, r: f64, j: usize, u: f64) -> f64 {
    let w = (1.0 - r).sqrt();
    let room = (j + 1) as f64;
    match *sys {
        System1D::LaguerreStd { .. } => (0.2 * w * u.sqrt()).min(u / room),
        System1D::LaguerreHermite { .. } | System1D::GeneralizedHermite { .. } => {
            let h = 0.2 * w;
            if sys.smooth_at_zero() || u == 0.0 {
                h
            } else {
                h.min(u.abs() / room)
            }
        }
        System1D::JacobiTrig { .. } => (0.1 * (1.0 - r)).min(u / room).min((std::f64::consts::PI - u) / room),
    }
}

/// v-intervals carrying the L² mass of R_r(u, ·), with endpoint exponents of |R|².
fn l2_ranges(sys: &System1D, r: f64, u: f64) -> Vec<(f64, f64, Singularity)> {
    let w = (100.0 * (1.0 - r) / (1.0 + r)).sqrt();
    match *sys {
        System1D::LaguerreStd { alpha } => {
            let a = u.sqrt();
            let lo = (a - w).max(0.0);
            let sing = if lo == 0.0 { Singularity::left(alpha) } else { Singularity::none() };
            vec![(lo * lo, (a + w) * (a + w), sing)]
        }
        System1D::LaguerreHermite { alpha } => {
            let lo = (u - w).max(0.0);
            let sing = if lo == 0.0 { Singularity::left(2.0 * alpha + 1.0) } else { Singularity::none() };
            vec![(lo, u + w, sing)]
        }
        System1D::GeneralizedHermite { lambda } => {
            let m = u.abs() + w;
            let sing = if sys.smooth_at_zero() { Singularity::none() } else { Singularity::left(2.0 * lambda) };
            let mirror = Singularity { left: None, right: sing.left };
            vec![(-m, 0.0, mirror), (0.0, m, sing)]
        }
        System1D::JacobiTrig { alpha, beta } => {
            vec![(0.0, std::f64::consts::PI, Singularity::both(2.0 * alpha + 1.0, 2.0 * beta + 1.0))]
        }
    }
}

fn kernel_deriv_l2_fd(sys: &System1D, r: f64, j: usize, u: f64, quad_tol: f64) -> Result<f64> {
    kernel_deriv_l2_fd_step(sys, r, j, u, quad_tol, fd_step(sys, r, j, u))
}

/// The finite-difference path at an explicit u-step h.
pub fn kernel_deriv_l2_fd_step(sys: &System1D, r: f64, j: usize, u: f64, quad_tol: f64, h: f64) -> Result<f64> {
    let jacobi_trunc = match sys {
        System1D::JacobiTrig { .. } => Some(SpectralTruncation::for_tolerance(sys, r, 1e-16)?),
        _ => None,
    };
    let kern = |w: f64, v: f64| -> f64 {
        match &jacobi_trunc {
            Some(t) => kernel_spectral(sys, r, w, v, t).map(|s| s.value).unwrap_or(f64::NAN),
            None => kernel_closed_1d(sys, r, w, v).unwrap_or(f64::NAN),
        }
    };
    let mut total = 0.0;
    for (a, b, sing) in l2_ranges(sys, r, u) {
        let opts = QuadOptions::new(quad_tol, quad_tol).with_singularity(sing).with_min_panels(8);
        let res = integrate_adaptive(
            |v| {
                let d = if j == 0 { kern(u, v) } else { richardson_derivative(|w| kern(w, v), u, j, h, 4) };
                d * d
            },
            a,
            b,
            &opts,
        )?;
        total += res.value;
    }
    Ok(total.sqrt())
}

/// ∥∂_u^j R_r(u, ·)∥_{L²(domain)} for j ≤ 3 along the chosen path.
pub fn kernel_deriv_l2(sys: &System1D, r: f64, j: usize, u: f64, quad_tol: f64, path: DerivPath) -> Result<f64> {
    let sys = sys.validated()?;
    check_r(r)?;
    sys.check_point(u)?;
    if j > MAX_KERNEL_DERIV_ORDER {
        return Err(Error::UnsupportedOrder { order: j, max: MAX_KERNEL_DERIV_ORDER });
    }
    match path {
        DerivPath::Spectral => kernel_deriv_l2_spectral(&sys, r, j, u),
        DerivPath::FiniteDifference => kernel_deriv_l2_fd(&sys, r, j, u, quad_tol),
    }
}

/// φ_0(u)φ_0(v), the r → 0 limit of every kernel.
pub fn ground_product(sys: &System1D, u: f64, v: f64) -> Result<f64> {
    Ok(bases::eval_1d(sys, 0, u)? * bases::eval_1d(sys, 0, v)?)
}
