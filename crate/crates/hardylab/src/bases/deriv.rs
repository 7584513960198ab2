//! Derivatives by repeated application of the first-derivative recurrences
//!
//!   (ℒ_k^α)'   = −√k u^{−1/2} ℒ_{k−1}^{α+1} + ½(α/u − 1) ℒ_k^α
//!   (φ_k^α)'   = −2√k φ_{k−1}^{α+1} + ((2α+1)/(2u) − u) φ_k^α
//!   (φ_k^{α,β})' = −√(k(k+α+β+1)) φ_{k−1}^{α+1,β+1}
//!                  + ((2α+1)/4 · cot(θ/2) − (2β+1)/4 · tan(θ/2)) φ_k^{α,β}
//!
//! Each derivative is a finite list of terms c · w(u) · φ_{k−s}^{(shifted by s)},
//! where w is u^p for the Laguerre families and sin^p(θ/2) cos^q(θ/2) for Jacobi.

use super::{fill_upto, System1D};
use crate::error::{domain, Error, Result};
use crate::numdiff::richardson_derivative;

pub const MAX_EXACT_ORDER: usize = 4;
pub const MAX_DERIVATIVE_ORDER: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Term {
    pub coef: f64,
    /// Power of u, or of sin(θ/2) for Jacobi.
    pub p: f64,
    /// Power of cos(θ/2) for Jacobi; zero otherwise.
    pub q: f64,
    /// Index and parameter shift.
    pub shift: usize,
}

fn push(terms: &mut Vec<Term>, t: Term) {
    if t.coef == 0.0 {
        return;
    }
    if let Some(e) = terms.iter_mut().find(|e| e.p == t.p && e.q == t.q && e.shift == t.shift) {
        e.coef += t.coef;
    } else {
        terms.push(t);
    }
}

fn differentiate(sys: &System1D, k: usize, terms: &[Term]) -> Vec<Term> {
    let mut out = Vec::with_capacity(terms.len() * 4);
    for t in terms {
        if t.shift > k {
            continue;
        }
        let kap = (k - t.shift) as f64;
        let s = t.shift as f64;
        let c = t.coef;
        match *sys {
            System1D::LaguerreStd { alpha } => {
                let a = alpha + s;
                push(&mut out, Term { coef: c * t.p, p: t.p - 1.0, ..*t });
                if kap > 0.0 {
                    push(&mut out, Term { coef: -c * kap.sqrt(), p: t.p - 0.5, shift: t.shift + 1, ..*t });
                }
                push(&mut out, Term { coef: 0.5 * c * a, p: t.p - 1.0, ..*t });
                push(&mut out, Term { coef: -0.5 * c, ..*t });
            }
            System1D::LaguerreHermite { alpha } => {
                let a = alpha + s;
                push(&mut out, Term { coef: c * t.p, p: t.p - 1.0, ..*t });
                if kap > 0.0 {
                    push(&mut out, Term { coef: -2.0 * c * kap.sqrt(), shift: t.shift + 1, ..*t });
                }
                push(&mut out, Term { coef: 0.5 * c * (2.0 * a + 1.0), p: t.p - 1.0, ..*t });
                push(&mut out, Term { coef: -c, p: t.p + 1.0, ..*t });
            }
            System1D::JacobiTrig { alpha, beta } => {
                let (a, b) = (alpha + s, beta + s);
                // d/dθ sin^p cos^q = (p/2) sin^{p−1} cos^{q+1} − (q/2) sin^{p+1} cos^{q−1}
                let up = Term { p: t.p - 1.0, q: t.q + 1.0, ..*t };
                let down = Term { p: t.p + 1.0, q: t.q - 1.0, ..*t };
                push(&mut out, Term { coef: 0.5 * c * t.p, ..up });
                push(&mut out, Term { coef: -0.5 * c * t.q, ..down });
                if kap > 0.0 {
                    let kab = (kap * (kap + a + b + 1.0)).sqrt();
                    push(&mut out, Term { coef: -c * kab, shift: t.shift + 1, ..*t });
                }
                push(&mut out, Term { coef: 0.25 * c * (2.0 * a + 1.0), ..up });
                push(&mut out, Term { coef: -0.25 * c * (2.0 * b + 1.0), ..down });
            }
            System1D::GeneralizedHermite { .. } => unreachable!("handled through the Hermite-type factor"),
        }
    }
    out
}

/// Term list for d^j/du^j [w₀(u) φ_k(u)], starting from `start` (normally
/// the single term 1·φ_k).
pub fn derivative_terms(sys: &System1D, k: usize, j: usize, start: &[Term]) -> Vec<Term> {
    let mut terms = start.to_vec();
    for _ in 0..j {
        terms = differentiate(sys, k, &terms);
    }
    terms
}

pub(crate) fn unit_term() -> Term {
    Term { coef: 1.0, p: 0.0, q: 0.0, shift: 0 }
}

fn weight(sys: &System1D, t: &Term, u: f64) -> f64 {
    match sys {
        System1D::JacobiTrig { .. } => {
            let (s, c) = (0.5 * u).sin_cos();
            s.powf(t.p) * c.powf(t.q)
        }
        _ => {
            if t.p == 0.0 {
                1.0
            } else {
                u.powf(t.p)
            }
        }
    }
}

/// Evaluates Σ c · w(u) · φ_{k−s}^{+s}(u) for a term list.
pub(crate) fn eval_terms(sys: &System1D, k: usize, terms: &[Term], u: f64) -> f64 {
    let mut acc = 0.0;
    let max_shift = terms.iter().map(|t| t.shift).max().unwrap_or(0).min(k);
    let mut cache: Vec<Option<f64>> = vec![None; max_shift + 1];
    for t in terms {
        if t.shift > k {
            continue;
        }
        let phi = *cache[t.shift].get_or_insert_with(|| {
            let shifted = sys.shifted(t.shift);
            let mut buf = vec![0.0; k - t.shift + 1];
            fill_upto(&shifted, u, &mut buf);
            buf[k - t.shift]
        });
        acc += t.coef * weight(sys, t, u) * phi;
    }
    acc
}

fn hermite_factor(lambda: f64, k: usize) -> (System1D, usize, f64) {
    let m = k / 2;
    let sign = if m % 2 == 0 { 1.0 } else { -1.0 } * std::f64::consts::FRAC_1_SQRT_2;
    let alpha = if k % 2 == 0 { lambda - 0.5 } else { lambda + 0.5 };
    (System1D::LaguerreHermite { alpha }, m, sign)
}

fn exact_derivative(sys: &System1D, k: usize, j: usize, u: f64) -> f64 {
    match *sys {
        System1D::GeneralizedHermite { lambda } => {
            let (inner, m, sign) = hermite_factor(lambda, k);
            let a = u.abs();
            let d = eval_terms(&inner, m, &derivative_terms(&inner, m, j, &[unit_term()]), a);
            // h(u) = sign · sgn(u)^{k mod 2} φ(|u|)
            let parity = (k % 2 + j) % 2;
            let sgn = if u < 0.0 && parity == 1 { -1.0 } else { 1.0 };
            sign * sgn * d
        }
        _ => eval_terms(sys, k, &derivative_terms(sys, k, j, &[unit_term()]), u),
    }
}

/// Value of the smooth extension through 0 (odd/even continuation).
fn extended_value(sys: &System1D, k: usize, x: f64) -> f64 {
    match *sys {
        System1D::LaguerreHermite { alpha } => {
            let mut buf = vec![0.0; k + 1];
            fill_upto(sys, x.abs(), &mut buf);
            let n = (alpha + 0.5) as i64;
            if x < 0.0 && n % 2 == 1 {
                -buf[k]
            } else {
                buf[k]
            }
        }
        _ => {
            let mut buf = vec![0.0; k + 1];
            fill_upto(sys, x, &mut buf);
            buf[k]
        }
    }
}

/// j-th derivative of φ_k at u; exact term expansion for j ≤ 4, Richardson
/// finite differences of the fourth derivative for 4 < j ≤ 6.
pub fn eval_deriv_1d(sys: &System1D, k: usize, j: usize, u: f64) -> Result<f64> {
    sys.validated()?;
    sys.check_point(u)?;
    if j > MAX_DERIVATIVE_ORDER {
        return Err(Error::UnsupportedOrder { order: j, max: MAX_DERIVATIVE_ORDER });
    }
    if u == 0.0 {
        // only reachable for the smooth extensions; the term expansion is
        // singular termwise at 0, so differentiate the extension numerically
        let h = 0.05 / (k as f64 + 1.0).sqrt();
        return Ok(richardson_derivative(|x| extended_value(sys, k, x), 0.0, j, h, 5));
    }
    if j <= MAX_EXACT_ORDER {
        return Ok(exact_derivative(sys, k, j, u));
    }
    let (lo, hi) = sys.domain();
    let scale = match sys {
        System1D::JacobiTrig { .. } => 1.0 / (k as f64 + 1.0),
        System1D::LaguerreStd { .. } => u.sqrt() / (k as f64 + 1.0).sqrt(),
        _ => 1.0 / (k as f64 + 1.0).sqrt(),
    };
    let h = (0.05 * scale).min(0.2 * (u - lo)).min(0.2 * (hi - u));
    if !(h > 0.0) {
        return domain("point too close to the endpoint for finite differences");
    }
    Ok(richardson_derivative(|x| exact_derivative(sys, k, MAX_EXACT_ORDER, x), u, j - MAX_EXACT_ORDER, h, 4))
}

/// Derivatives φ_k^{(j)}(u) for k = 0..=kmax, sharing one recurrence pass per
/// parameter shift.
pub fn eval_deriv_upto(sys: &System1D, kmax: usize, j: usize, u: f64) -> Result<Vec<f64>> {
    sys.validated()?;
    sys.check_point(u)?;
    if j > MAX_EXACT_ORDER || u == 0.0 {
        return (0..=kmax).map(|k| eval_deriv_1d(sys, k, j, u)).collect();
    }
    if let System1D::GeneralizedHermite { .. } = sys {
        return (0..=kmax).map(|k| eval_deriv_1d(sys, k, j, u)).collect();
    }
    let shifted: Vec<Vec<f64>> = (0..=j)
        .map(|s| {
            let mut buf = vec![0.0; kmax + 1];
            fill_upto(&sys.shifted(s), u, &mut buf);
            buf
        })
        .collect();
    let mut out = vec![0.0; kmax + 1];
    let start = [unit_term()];
    for (k, slot) in out.iter_mut().enumerate() {
        let terms = derivative_terms(sys, k, j, &start);
        *slot = terms
            .iter()
            .filter(|t| t.shift <= k)
            .map(|t| t.coef * weight(sys, t, u) * shifted[t.shift][k - t.shift])
            .sum();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bases::eval_1d;

    #[test]
    fn first_derivative_matches_recurrence_example() {
        let sys = System1D::laguerre_std(0.7).unwrap();
        let (k, u) = (5, 1.7);
        let lm = eval_1d(&System1D::laguerre_std(1.7).unwrap(), k - 1, u).unwrap();
        let l = eval_1d(&sys, k, u).unwrap();
        let expect = -(k as f64).sqrt() * u.powf(-0.5) * lm + 0.5 * (0.7 / u - 1.0) * l;
        assert!((eval_deriv_1d(&sys, k, 1, u).unwrap() - expect).abs() < 1e-14);
        assert_eq!(eval_deriv_1d(&sys, k, 0, u).unwrap(), l);
    }

    #[test]
    fn order_limit() {
        let sys = System1D::laguerre_std(0.0).unwrap();
        assert!(matches!(eval_deriv_1d(&sys, 2, 7, 1.0), Err(Error::UnsupportedOrder { .. })));
        assert!(eval_deriv_1d(&sys, 2, 5, 1.0).unwrap().is_finite());
    }

    #[test]
    fn batch_matches_single() {
        for sys in [
            System1D::laguerre_std(0.7).unwrap(),
            System1D::laguerre_hermite(0.5).unwrap(),
            System1D::jacobi(0.5, 1.0).unwrap(),
            System1D::generalized_hermite(0.5).unwrap(),
        ] {
            let u = 0.8;
            let all = eval_deriv_upto(&sys, 15, 3, u).unwrap();
            for (k, v) in all.iter().enumerate() {
                let single = eval_deriv_1d(&sys, k, 3, u).unwrap();
                assert!((v - single).abs() <= 1e-12 * single.abs().max(1.0), "{sys:?} k={k}");
            }
        }
    }
}
