//! Admissible exponents and Hardy sums Σ_n |⟨f, φ_n⟩|^s / (|n|+1)^E.

use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::atoms::ProductAtom;
use crate::bases::{Family, SystemSpec};
use crate::error::{domain, Error, Result};
use crate::quadrature::CoefficientCache;
use crate::rational::{self, q, qi, Q};

/// Exponent γ with ∥∂^j R_r∥ ≲ (1−r)^{−γ(1+2j)} type growth: ½ for the
/// standard Laguerre and Jacobi systems, ¼ for the Hermite-type ones.
pub fn gamma_for(family: Family) -> Q {
    match family {
        Family::LaguerreStd | Family::JacobiTrig => q(1, 2),
        Family::LaguerreHermite | Family::GeneralizedHermite => q(1, 4),
    }
}

fn check_ps(p: &Q, s: &Q) -> Result<()> {
    if !(p > &Q::zero() && p <= &Q::one()) {
        return domain(format!("p must lie in (0, 1], got {}", rational::format(p)));
    }
    if !(s >= p && s <= &qi(2)) {
        return domain(format!("s must lie in [p, 2], got {}", rational::format(s)));
    }
    Ok(())
}

/// E = (2−p) s d γ / p + (2−s) d / 2.
pub fn admissible_exponent(p: &Q, s: &Q, d: usize, gamma: &Q) -> Result<Q> {
    check_ps(p, s)?;
    if d == 0 {
        return domain("dimension must be positive");
    }
    let d = qi(d as i64);
    Ok((qi(2) - p) * s * &d * gamma / p + (qi(2) - s) * d / qi(2))
}

/// The exponent as stated for each concrete system.
pub fn theorem_exponent(family: Family, p: &Q, s: &Q, d: usize) -> Result<Q> {
    check_ps(p, s)?;
    if d == 0 {
        return domain("dimension must be positive");
    }
    let d = qi(d as i64);
    Ok(match family {
        Family::LaguerreStd | Family::JacobiTrig => &d + s * &d * (Q::one() / p - Q::one()),
        Family::LaguerreHermite | Family::GeneralizedHermite => &d + &d * s / (qi(4) * p) * (qi(2) - qi(3) * p),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct HardyExponentParams {
    pub p: Q,
    pub s: Q,
    pub d: usize,
    pub gamma: Q,
    pub e: Q,
}

impl HardyExponentParams {
    /// Parameters with E from the admissible-exponent formula.
    pub fn new(p: Q, s: Q, d: usize, gamma: Q) -> Result<Self> {
        let e = admissible_exponent(&p, &s, d, &gamma)?;
        Ok(Self { p, s, d, gamma, e })
    }

    pub fn for_system(spec: &SystemSpec, p: Q, s: Q) -> Result<Self> {
        Self::new(p, s, spec.d, gamma_for(spec.family))
    }

    /// The same parameters with E replaced (for sums below the exponent).
    pub fn with_exponent(mut self, e: Q) -> Self {
        self.e = e;
        self
    }

    pub fn s_f64(&self) -> f64 {
        rational::to_f64(&self.s)
    }

    pub fn e_f64(&self) -> f64 {
        rational::to_f64(&self.e)
    }

    pub fn record(&self) -> ParamsRecord {
        ParamsRecord {
            p: rational::format(&self.p),
            s: rational::format(&self.s),
            d: self.d,
            gamma: rational::format(&self.gamma),
            e: rational::format(&self.e),
            e_value: self.e_f64(),
        }
    }
}

/// Serialized parameters; rationals as "n/d" strings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsRecord {
    pub p: String,
    pub s: String,
    pub d: usize,
    pub gamma: String,
    #[serde(rename = "E")]
    pub e: String,
    #[serde(rename = "E_value")]
    pub e_value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HardySumResult {
    pub partial_sum: f64,
    /// Bound on Σ_{|n| > K_max}; infinite when `tail_unbounded`.
    pub tail_bound: f64,
    #[serde(rename = "K_max")]
    pub k_max: usize,
    pub tail_unbounded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardySumRecord {
    pub system: SystemSpec,
    pub params: ParamsRecord,
    #[serde(rename = "K_max")]
    pub k_max: usize,
    pub partial_sum: f64,
    pub tail_bound: f64,
    pub tail_unbounded: bool,
}

impl HardySumRecord {
    pub fn new(system: &SystemSpec, params: &HardyExponentParams, res: &HardySumResult) -> Self {
        Self {
            system: system.clone(),
            params: params.record(),
            k_max: res.k_max,
            partial_sum: res.partial_sum,
            tail_bound: res.tail_bound,
            tail_unbounded: res.tail_unbounded,
        }
    }
}

/// Pairwise summation in index order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        n if n <= 8 => xs.iter().sum(),
        n => {
            let (a, b) = xs.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

/// Shell sums Σ_{|n|=m} Π_i w_i(n_i) for m = 0..=k_max.
pub fn shell_sums(weights: &[Vec<f64>], k_max: usize) -> Result<Vec<f64>> {
    let Some(first) = weights.first() else {
        return domain("at least one coordinate is required");
    };
    for w in weights {
        if w.len() < k_max + 1 {
            return Err(Error::Shape { expected: k_max + 1, got: w.len() });
        }
    }
    let mut acc: Vec<f64> = first[..=k_max].to_vec();
    for w in &weights[1..] {
        acc = (0..=k_max)
            .into_par_iter()
            .map(|m| {
                let terms: Vec<f64> = (0..=m).map(|i| acc[i] * w[m - i]).collect();
                pairwise_sum(&terms)
            })
            .collect();
    }
    Ok(acc)
}

fn binom_f64(n: f64, d: usize) -> f64 {
    (0..d).fold(1.0, |acc, i| acc * (n - i as f64) / (i + 1) as f64)
}

/// Number of n ∈ ℕ^d with |n| ≤ m.
fn count_upto(m: f64, d: usize) -> f64 {
    binom_f64(m + d as f64, d)
}

const EXPLICIT_BLOCKS: u32 = 60;

/// Σ over |n| > k_max of (#block)^{1−s/2} ∥a∥₂^s (lo+1)^{−E} over the
/// dyadic blocks [lo, hi], with a geometric bound past 2^60.
pub fn tail_bound(k_max: usize, d: usize, s: f64, e: f64, l2_norm: f64) -> (f64, bool) {
    let df = d as f64;
    let growth = df * (1.0 - s / 2.0);
    if e <= growth {
        return (f64::INFINITY, true);
    }
    if l2_norm == 0.0 {
        return (0.0, false);
    }
    let ns = l2_norm.powf(s);
    let mut total = 0.0;
    let mut lo = k_max as f64 + 1.0;
    let mut m = lo.log2().floor() as u32;
    while m < EXPLICIT_BLOCKS {
        let hi = 2f64.powi(m as i32 + 1) - 1.0;
        let count = count_upto(hi, d) - count_upto(lo - 1.0, d);
        total += count.powf(1.0 - s / 2.0) * ns * (lo + 1.0).powf(-e);
        m += 1;
        lo = hi + 1.0;
    }
    // blocks [2^m, 2^{m+1}) for m ≥ M: #block ≤ (2^{m+1}(1 + d 2^{−M−1}))^d / d!
    let mf = m as f64;
    let fact: f64 = (1..=d).map(|i| i as f64).product();
    let c = ((1.0 + df * 2f64.powf(-mf - 1.0)).powf(df) * 2f64.powf(df) / fact).powf(1.0 - s / 2.0) * ns;
    let ratio = 2f64.powf(growth - e);
    total += c * 2f64.powf(mf * (growth - e)) / (1.0 - ratio);
    (total, false)
}

/// Hardy sum from per-coordinate coefficient sequences ⟨a_i, φ_k⟩ of a
/// product function with ∥a∥₂ = `l2_norm`.
pub fn hardy_sum_from_coefficients(
    coeffs: &[Vec<f64>],
    l2_norm: f64,
    s: f64,
    e: f64,
    k_max: usize,
) -> Result<HardySumResult> {
    let weights: Vec<Vec<f64>> = coeffs.iter().map(|c| c.iter().map(|x| x.abs().powf(s)).collect()).collect();
    let shells = shell_sums(&weights, k_max)?;
    let terms: Vec<f64> = shells.iter().enumerate().map(|(m, v)| v * ((m + 1) as f64).powf(-e)).collect();
    let (tail, unbounded) = tail_bound(k_max, coeffs.len(), s, e, l2_norm);
    Ok(HardySumResult { partial_sum: pairwise_sum(&terms), tail_bound: tail, k_max, tail_unbounded: unbounded })
}

/// Per-coordinate coefficients ⟨a_i, φ_k⟩, k ≤ k_max.
pub fn atom_coefficients(
    spec: &SystemSpec,
    atom: &ProductAtom,
    k_max: usize,
    tol: f64,
    cache: &CoefficientCache,
) -> Result<Vec<Vec<f64>>> {
    if atom.dim() != spec.d {
        return Err(Error::Shape { expected: spec.d, got: atom.dim() });
    }
    (0..spec.d)
        .into_par_iter()
        .map(|i| cache.coefficients_upto(&spec.coordinate(i), k_max, &atom.factors[i], tol))
        .collect()
}

/// Σ_{|n| ≤ K_max} |⟨a, φ_n⟩|^s / (|n|+1)^E with the dyadic tail bound.
pub fn hardy_sum(
    spec: &SystemSpec,
    atom: &ProductAtom,
    params: &HardyExponentParams,
    k_max: usize,
    tol: f64,
    cache: &CoefficientCache,
) -> Result<HardySumResult> {
    if params.d != spec.d {
        return Err(Error::Shape { expected: spec.d, got: params.d });
    }
    let coeffs = atom_coefficients(spec, atom, k_max, tol, cache)?;
    hardy_sum_from_coefficients(&coeffs, atom.l2_norm(), params.s_f64(), params.e_f64(), k_max)
}
