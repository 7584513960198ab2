//! Scalar special functions: ln Γ, Laguerre and Jacobi polynomials, and the
//! exponentially scaled modified Bessel function e^{−z} I_ν(z).

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::error::{domain, Error, Result};
use crate::quadrature::{integrate_adaptive, QuadOptions, Singularity};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_741_780_329_736_4;

fn ln_factorials() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = vec![0.0; 171];
        for n in 2..171 {
            t[n] = t[n - 1] + (n as f64).ln();
        }
        t
    })
}

fn lanczos_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const P: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_59,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    let z = x - 1.0;
    let mut acc = P[0];
    for (i, p) in P.iter().enumerate().skip(1) {
        acc += p / (z + i as f64);
    }
    let t = z + G + 0.5;
    (2.0 * PI).sqrt() * t.powf(z + 0.5) * (-t).exp() * acc
}

fn stirling_ln_gamma(x: f64) -> f64 {
    // Bernoulli terms B_{2n} / (2n (2n−1))
    const C: [f64; 8] = [
        1.0 / 12.0,
        -1.0 / 360.0,
        1.0 / 1260.0,
        -1.0 / 1680.0,
        1.0 / 1188.0,
        -691.0 / 360_360.0,
        1.0 / 156.0,
        -3617.0 / 122_400.0,
    ];
    let x2 = 1.0 / (x * x);
    let mut series = 0.0;
    let mut pow = 1.0 / x;
    for c in C {
        series += c * pow;
        pow *= x2;
    }
    (x - 0.5) * x.ln() - x + LN_SQRT_2PI + series
}

/// ln Γ(u) for u > 0, without argument checking.
pub(crate) fn ln_gamma(u: f64) -> f64 {
    if u.fract() == 0.0 && u < 171.0 {
        return ln_factorials()[u as usize - 1];
    }
    if u < 0.5 {
        return ln_gamma(u + 1.0) - u.ln();
    }
    if u < 3.0 {
        return lanczos_gamma(u).ln();
    }
    if u < 15.0 {
        let mut prod = 1.0;
        let mut x = u;
        while x < 15.0 {
            prod *= x;
            x += 1.0;
        }
        return stirling_ln_gamma(x) - prod.ln();
    }
    stirling_ln_gamma(u)
}

/// ln Γ(u), relative error ≤ 1e−13 away from the zeros at u = 1, 2.
pub fn log_gamma(u: f64) -> Result<f64> {
    if !(u > 0.0) || !u.is_finite() {
        return domain(format!("log_gamma requires u > 0, got {u}"));
    }
    Ok(ln_gamma(u))
}

/// L_k^α(u) by the three-term recurrence.
pub fn laguerre_poly(k: usize, alpha: f64, u: f64) -> Result<f64> {
    if !(alpha > -1.0) {
        return domain(format!("laguerre_poly requires alpha > -1, got {alpha}"));
    }
    if !(u >= 0.0) {
        return domain(format!("laguerre_poly requires u >= 0, got {u}"));
    }
    let mut p0 = 1.0;
    if k == 0 {
        return Ok(p0);
    }
    let mut p1 = 1.0 + alpha - u;
    for n in 1..k {
        let nf = n as f64;
        let p2 = ((2.0 * nf + 1.0 + alpha - u) * p1 - (nf + alpha) * p0) / (nf + 1.0);
        p0 = p1;
        p1 = p2;
    }
    Ok(p1)
}

/// P_k^{(α,β)}(x) by the three-term recurrence.
pub fn jacobi_poly(k: usize, alpha: f64, beta: f64, x: f64) -> Result<f64> {
    if !(alpha > -1.0 && beta > -1.0) {
        return domain(format!("jacobi_poly requires alpha, beta > -1, got ({alpha}, {beta})"));
    }
    if !(-1.0..=1.0).contains(&x) {
        return domain(format!("jacobi_poly requires x in [-1, 1], got {x}"));
    }
    let mut p0 = 1.0;
    if k == 0 {
        return Ok(p0);
    }
    let ab = alpha + beta;
    let mut p1 = (alpha + 1.0) + (ab + 2.0) * (x - 1.0) / 2.0;
    for n in 1..k {
        let n = n as f64;
        let c = 2.0 * n + ab;
        let a1 = 2.0 * (n + 1.0) * (n + ab + 1.0) * c;
        let a2 = (c + 1.0) * (alpha * alpha - beta * beta);
        let a3 = c * (c + 1.0) * (c + 2.0);
        let a4 = 2.0 * (n + alpha) * (n + beta) * (c + 2.0);
        let p2 = ((a2 + a3 * x) * p1 - a4 * p0) / a1;
        p0 = p1;
        p1 = p2;
    }
    Ok(p1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BesselEvalMode {
    Series,
    Asymptotic,
    IntegralOracle,
}

/// Branch selection for the production path: series below
/// max(threshold, 2ν²), Hankel expansion above.
pub fn select_mode(nu: f64, z: f64, switch_threshold: f64) -> BesselEvalMode {
    if z < switch_threshold.max(2.0 * nu * nu) {
        BesselEvalMode::Series
    } else {
        BesselEvalMode::Asymptotic
    }
}

pub const DEFAULT_SWITCH_THRESHOLD: f64 = 30.0;

fn check_bessel_args(nu: f64, z: f64) -> Result<()> {
    if !(nu >= -0.5) {
        return domain(format!("bessel order must be >= -1/2, got {nu}"));
    }
    if !(z >= 0.0) || !z.is_finite() {
        return domain(format!("bessel argument must be finite and >= 0, got {z}"));
    }
    Ok(())
}

/// e^{−z} Σ_m (z/2)^{2m} / (m! Γ(m+ν+1)) as (mantissa, log-scale).
fn reduced_series(nu: f64, z: f64) -> (f64, f64) {
    const RESCALE: f64 = 1e200;
    let q = 0.25 * z * z;
    let mut log_scale = -ln_gamma(nu + 1.0) - z;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut m = 0.0;
    loop {
        term *= q / ((m + 1.0) * (m + 1.0 + nu));
        sum += term;
        m += 1.0;
        if term <= 1e-17 * sum && m > q.sqrt() {
            break;
        }
        if sum > RESCALE {
            sum /= RESCALE;
            term /= RESCALE;
            log_scale += RESCALE.ln();
        }
    }
    (sum, log_scale)
}

/// Hankel large-argument sum: √(2πz) e^{−z} I_ν(z).
fn hankel_sum(nu: f64, z: f64) -> f64 {
    let mu = 4.0 * nu * nu;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut prev = f64::INFINITY;
    for k in 1..200 {
        let kf = k as f64;
        let odd = 2.0 * kf - 1.0;
        term *= -(mu - odd * odd) / (8.0 * kf * z);
        if term == 0.0 {
            break;
        }
        if term.abs() >= prev {
            break;
        }
        sum += term;
        prev = term.abs();
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

/// e^{−z} I_ν(z) / (z/2)^ν, an entire function of z; equals 1/Γ(ν+1) at 0.
pub fn bessel_i_reduced_scaled(nu: f64, z: f64) -> Result<f64> {
    check_bessel_args(nu, z)?;
    Ok(reduced_scaled(nu, z))
}

/// Unchecked reduced form, also valid for −1 < ν < −½.
pub(crate) fn reduced_scaled(nu: f64, z: f64) -> f64 {
    ln_reduced_scaled(nu, z).exp()
}

/// ln of the reduced form; the reduced form is positive for ν > −1.
pub(crate) fn ln_reduced_scaled(nu: f64, z: f64) -> f64 {
    if z == 0.0 {
        return -ln_gamma(nu + 1.0);
    }
    match select_mode(nu, z, DEFAULT_SWITCH_THRESHOLD) {
        BesselEvalMode::Series => {
            let (s, ls) = reduced_series(nu, z);
            s.ln() + ls
        }
        _ => hankel_sum(nu, z).ln() - 0.5 * (2.0 * PI * z).ln() - nu * (0.5 * z).ln(),
    }
}

/// e^{−z} I_ν(z) on the production path.
pub fn bessel_i_scaled(nu: f64, z: f64) -> Result<f64> {
    check_bessel_args(nu, z)?;
    let mode = select_mode(nu, z, DEFAULT_SWITCH_THRESHOLD);
    bessel_i_scaled_mode(nu, z, mode)
}

/// e^{−z} I_ν(z) with an explicitly chosen branch.
pub fn bessel_i_scaled_mode(nu: f64, z: f64, mode: BesselEvalMode) -> Result<f64> {
    check_bessel_args(nu, z)?;
    if z == 0.0 {
        if nu == 0.0 {
            return Ok(1.0);
        }
        if nu > 0.0 {
            return Ok(0.0);
        }
        return domain("I_ν(0) is infinite for ν < 0");
    }
    match mode {
        BesselEvalMode::Series => {
            let (s, ls) = reduced_series(nu, z);
            Ok(s * (ls + nu * (0.5 * z).ln()).exp())
        }
        BesselEvalMode::Asymptotic => Ok(hankel_sum(nu, z) / (2.0 * PI * z).sqrt()),
        BesselEvalMode::IntegralOracle => bessel_i_integral_scaled(nu, z),
    }
}

/// e^{−z} I_ν(z) from the Poisson-type integral
/// I_ν(z) = (z/2)^ν / (√π Γ(ν+½)) ∫_{−1}^{1} e^{−zs} (1−s²)^{ν−½} ds,
/// with the two-point measure at ν = −½.
pub fn bessel_i_integral_scaled(nu: f64, z: f64) -> Result<f64> {
    check_bessel_args(nu, z)?;
    if nu == -0.5 {
        if z == 0.0 {
            return domain("I_{-1/2}(0) is infinite");
        }
        return Ok((1.0 + (-2.0 * z).exp()) / (2.0 * PI * z).sqrt());
    }
    if z == 0.0 {
        return bessel_i_scaled_mode(nu, 0.0, BesselEvalMode::Series);
    }
    let opts = QuadOptions::new(0.0, 1e-13).with_max_panels(5_000);
    let e = nu - 0.5;
    let integral = if nu < 0.5 {
        // s = −1 + t² on the left half, s = 1 − t² on the right half
        let left = integrate_adaptive(
            |t| {
                let t2 = t * t;
                2.0 * (-z * t2).exp() * t.powf(2.0 * nu) * (2.0 - t2).powf(e)
            },
            0.0,
            1.0,
            &opts.with_singularity(Singularity::left(2.0 * nu)),
        )?;
        let right = integrate_adaptive(
            |t| {
                let t2 = t * t;
                2.0 * (-z * (2.0 - t2)).exp() * t.powf(2.0 * nu) * (2.0 - t2).powf(e)
            },
            0.0,
            1.0,
            &opts.with_singularity(Singularity::left(2.0 * nu)),
        )?;
        left.value + right.value
    } else {
        let sing = if e.fract() == 0.0 { Singularity::none() } else { Singularity::both(e, e) };
        integrate_adaptive(
            |s| (-z * (1.0 + s)).exp() * ((1.0 - s) * (1.0 + s)).powf(e),
            -1.0,
            1.0,
            &opts.with_singularity(sing),
        )
        .map_err(|err| match err {
            Error::Budget { estimate, .. } => Error::Tolerance {
                what: "bessel integral".into(),
                achieved: estimate,
                requested: 1e-13,
            },
            other => other,
        })?
        .value
    };
    let log_pref = nu * (0.5 * z).ln() - 0.5 * PI.ln() - ln_gamma(nu + 0.5);
    Ok(integral * log_pref.exp())
}

/// I_ν(z) from the integral representation. Overflows past z ≈ 700; use
/// [`bessel_i_integral_scaled`] for large arguments.
pub fn bessel_i_integral(nu: f64, z: f64) -> Result<f64> {
    Ok(bessel_i_integral_scaled(nu, z)? * z.exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn gamma_examples() {
        assert_eq!(log_gamma(1.0).unwrap(), 0.0);
        assert_eq!(log_gamma(2.0).unwrap(), 0.0);
        assert!(rel(log_gamma(0.5).unwrap(), PI.sqrt().ln()) < 1e-14);
        assert!(rel(log_gamma(10.0).unwrap(), 362_880f64.ln()) < 1e-15);
        assert!(log_gamma(0.0).is_err());
        assert!(log_gamma(-1.5).is_err());
    }

    #[test]
    fn low_degree_polynomials() {
        assert_eq!(laguerre_poly(0, 0.3, 2.0).unwrap(), 1.0);
        assert_eq!(laguerre_poly(1, 0.3, 2.0).unwrap(), 1.0 + 0.3 - 2.0);
        assert_eq!(jacobi_poly(0, 0.3, -0.2, 0.4).unwrap(), 1.0);
        let (a, b, x) = (0.3, -0.2, 0.4);
        assert!((jacobi_poly(1, a, b, x).unwrap() - ((a + 1.0) + (a + b + 2.0) * (x - 1.0) / 2.0)).abs() < 1e-15);
        assert!(laguerre_poly(3, -1.0, 1.0).is_err());
        assert!(jacobi_poly(3, 0.0, -1.2, 0.0).is_err());
    }

    #[test]
    fn bessel_half_integer() {
        for &z in &[1e-3f64, 0.5, 1.0, 7.0, 29.0, 31.0, 200.0, 1e5, 1e8] {
            let exact = (1.0 - (-2.0 * z).exp()) / (2.0 * PI * z).sqrt();
            assert!(rel(bessel_i_scaled(0.5, z).unwrap(), exact) < 1e-13, "z={z}");
        }
        assert_eq!(bessel_i_scaled(0.0, 0.0).unwrap(), 1.0);
        assert!(bessel_i_scaled(-0.7, 1.0).is_err());
    }

    #[test]
    fn branches_agree_on_overlap() {
        for &nu in &[-0.5, 0.0, 0.7, 1.5, 3.0] {
            for &z in &[20.0, 25.0, 30.0, 35.0, 45.0] {
                let s = bessel_i_scaled_mode(nu, z, BesselEvalMode::Series).unwrap();
                let a = bessel_i_scaled_mode(nu, z, BesselEvalMode::Asymptotic).unwrap();
                assert!(rel(a, s) < 1e-12, "nu={nu} z={z}: {s} vs {a}");
            }
        }
    }

    #[test]
    fn integral_oracle_examples() {
        let z: f64 = 1.3;
        let v = bessel_i_integral(-0.5, z).unwrap();
        assert!(rel(v, (2.0 / (PI * z)).sqrt() * z.cosh()) < 1e-14);
        let v = bessel_i_integral(0.5, 1.0).unwrap();
        assert!(rel(v, (2.0 / PI).sqrt() * 1f64.sinh()) < 1e-12);
        let v = bessel_i_integral(2.5, 30.0).unwrap() * (-30f64).exp();
        assert!(rel(bessel_i_scaled(2.5, 30.0).unwrap(), v) < 1e-10);
    }
}
