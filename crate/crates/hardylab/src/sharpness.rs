//! Counterexample experiments: coefficients of the atoms a_K against the
//! low modes, growth of the deficient-exponent Hardy sum S_ε(K), and the
//! lower-bound ratio r(K).

use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::atoms::{build_counterexample_atom, moment_order, ProductAtom};
use crate::bases::{Family, System1D, SystemSpec};
use crate::error::{Error, Result};
use crate::fit::{loglog_fit, LineFit};
use crate::hardy::{admissible_exponent, gamma_for, hardy_sum_from_coefficients};
use crate::quadrature::inner_products_upto;
use crate::rational::{self, q, qi, Q};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Route {
    /// Size estimate on the functions themselves.
    Direct,
    /// Size estimate on the (P+1)-st derivatives.
    Derivative,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SharpnessDerivation {
    pub tau: Q,
    /// τ of the size estimate on the functions themselves.
    pub direct_tau: Q,
    pub gamma: Q,
    pub threshold: Q,
    pub threshold_satisfied: bool,
    /// τ equals the threshold and 1/p is not an integer: log growth at ε = 0.
    pub boundary: bool,
    pub route: Route,
}

/// (4γ − 2pγ − p) / (2p).
pub fn sharpness_threshold(p: &Q, gamma: &Q) -> Q {
    (qi(4) * gamma - qi(2) * p * gamma - p) / (qi(2) * p)
}

fn as_natural(x: &Q) -> Option<usize> {
    if x.is_integer() && x >= &Q::zero() {
        x.to_integer().to_usize()
    } else {
        None
    }
}

fn unsupported<T>(msg: String) -> Result<T> {
    Err(Error::UnsupportedParameters(msg))
}

/// τ, γ, the threshold test and the applicable route for a 1-d system.
pub fn derive_sharpness_params(sys: &System1D, p: &Q) -> Result<SharpnessDerivation> {
    let sys = sys.validated()?;
    let big_p = moment_order(p, 1)?;
    let gamma = gamma_for(sys.family());
    let threshold = sharpness_threshold(p, &gamma);
    let alpha = rational::from_f64_decimal(sys.alpha())?;
    let half = q(1, 2);
    let (direct_tau, ell) = match sys.family() {
        Family::LaguerreStd => {
            if alpha < Q::zero() {
                return unsupported(format!("no size estimate for standard Laguerre with alpha = {}", sys.alpha()));
            }
            (&alpha / qi(2), &alpha / qi(2))
        }
        Family::LaguerreHermite => (&alpha / qi(2), &alpha + &half),
        Family::JacobiTrig => (&alpha + &half, &alpha + &half),
        Family::GeneralizedHermite => {
            return unsupported("generalized Hermite sharpness is inherited from the Hermite-type system".into())
        }
    };
    let one_over_p_integer = p.recip().is_integer();
    if direct_tau > threshold {
        return Ok(SharpnessDerivation {
            tau: direct_tau.clone(),
            direct_tau,
            gamma,
            threshold,
            threshold_satisfied: true,
            boundary: false,
            route: Route::Direct,
        });
    }
    let j = big_p + 1;
    if let Some(l) = as_natural(&ell).filter(|&l| l <= j) {
        let up = qi(((j - l) as i64 + 1) / 2);
        let tau = match sys.family() {
            Family::LaguerreStd => &direct_tau + qi((j - l) as i64),
            Family::LaguerreHermite => &direct_tau + up,
            _ => &direct_tau + qi(2) * up,
        };
        if tau > threshold {
            return Ok(SharpnessDerivation {
                tau,
                direct_tau,
                gamma,
                threshold,
                threshold_satisfied: false,
                boundary: false,
                route: Route::Derivative,
            });
        }
    }
    if direct_tau == threshold && !one_over_p_integer {
        return Ok(SharpnessDerivation {
            tau: direct_tau.clone(),
            direct_tau,
            gamma,
            threshold,
            threshold_satisfied: false,
            boundary: true,
            route: Route::Direct,
        });
    }
    unsupported(format!(
        "tau = {} does not exceed the threshold {} and no derivative estimate applies",
        rational::format(&direct_tau),
        rational::format(&threshold)
    ))
}

/// Domain scale c with (0, c) inside the domain.
pub fn default_scale(family: Family) -> f64 {
    match family {
        Family::JacobiTrig => std::f64::consts::FRAC_PI_2,
        _ => 1.0,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SharpnessParams {
    pub system: SystemSpec,
    pub p: Q,
    pub s: Q,
    pub epsilon: f64,
    pub k_grid: Vec<usize>,
    pub delta: Q,
    pub c: f64,
    pub tau: Q,
    pub gamma: Q,
    pub route: Route,
    /// Coefficients are computed for k ≤ k_cap_factor · K.
    pub k_cap_factor: usize,
}

impl SharpnessParams {
    /// Parameters with τ, γ and the route derived from the system, the
    /// default δ = 1/(8(P+1)) and the default domain scale.
    pub fn new(system: SystemSpec, p: Q, s: Q, epsilon: f64, k_grid: Vec<usize>) -> Result<Self> {
        let sys = system.coordinate(0);
        if system.coordinates().iter().any(|c| c != &sys) {
            return unsupported("sharpness runs need identical coordinates".into());
        }
        let der = derive_sharpness_params(&sys, &p)?;
        let big_p = moment_order(&p, 1)?;
        let params = Self {
            c: default_scale(sys.family()),
            system,
            p,
            s,
            epsilon,
            k_grid,
            delta: q(1, 8 * (big_p as i64 + 1)),
            tau: der.tau,
            gamma: der.gamma,
            route: der.route,
            k_cap_factor: 4,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn with_delta(mut self, delta: Q) -> Self {
        self.delta = delta;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let big_p = moment_order(&self.p, 1)?;
        if !(self.delta > Q::zero() && self.delta <= q(1, 2 * (big_p as i64 + 1))) {
            return Err(Error::Domain(format!("delta out of range: {}", rational::format(&self.delta))));
        }
        if self.k_grid.is_empty() || self.k_grid.windows(2).any(|w| w[0] >= w[1]) || self.k_grid[0] == 0 {
            return Err(Error::Domain("K grid must be non-empty, positive and increasing".into()));
        }
        if !(self.epsilon >= 0.0) || !(self.c > 0.0) || self.k_cap_factor == 0 {
            return Err(Error::Domain("epsilon must be >= 0, c > 0 and the cap factor positive".into()));
        }
        for &k in &self.k_grid {
            if self.a_scale(k) < 1.0 {
                return Err(Error::Domain(format!("A = K^(2 gamma)/c < 1 at K = {k}")));
            }
        }
        admissible_exponent(&self.p, &self.s, self.system.d, &self.gamma)?;
        Ok(())
    }

    pub fn a_scale(&self, k: usize) -> f64 {
        (k as f64).powf(2.0 * rational::to_f64(&self.gamma)) / self.c
    }

    /// E of the admissible-exponent formula in dimension d.
    pub fn exponent(&self) -> Q {
        admissible_exponent(&self.p, &self.s, self.system.d, &self.gamma).expect("validated parameters")
    }

    /// 2γ/p − ½ − τ − γ, the K-power in the coefficient lower bound.
    pub fn lower_bound_power(&self) -> Q {
        qi(2) * &self.gamma / &self.p - q(1, 2) - &self.tau - &self.gamma
    }

    /// sd(2γ/p − ½ − τ − γ) − (E − ε) + sdτ + d.
    pub fn predicted_slope(&self) -> f64 {
        let sd = &self.s * qi(self.system.d as i64);
        let exact = &sd * self.lower_bound_power() - self.exponent() + &sd * &self.tau + qi(self.system.d as i64);
        rational::to_f64(&exact) + self.epsilon
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharpnessRow {
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "A")]
    pub a_scale: f64,
    #[serde(rename = "S_eps")]
    pub s_eps: f64,
    pub tail: f64,
    /// min_{k ≤ K} |⟨a_K, φ_k⟩| / ((k+1)^τ K^{2γ/p−½−τ−γ}).
    pub r_min: f64,
    pub r_argmin: usize,
    /// Whether ⟨a_K, φ_k⟩, k ≤ K, share one sign.
    pub sign_coherent: bool,
    pub flag: Option<String>,
}

impl SharpnessRow {
    fn failed(k: usize, a_scale: f64, err: &Error) -> Self {
        Self {
            k,
            a_scale,
            s_eps: f64::NAN,
            tail: f64::NAN,
            r_min: f64::NAN,
            r_argmin: 0,
            sign_coherent: false,
            flag: Some(err.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharpnessReport {
    pub system: SystemSpec,
    pub p: String,
    pub s: String,
    pub epsilon: f64,
    pub delta: String,
    pub c: f64,
    pub tau: String,
    pub gamma: String,
    pub route: Route,
    #[serde(rename = "E")]
    pub exponent: String,
    pub predicted_slope: f64,
    pub rows: Vec<SharpnessRow>,
    /// Fit of ln S_ε against ln K with the smallest K dropped.
    pub fit: Option<LineFit>,
    pub slope_band95: f64,
    pub slope_half_delta: Option<f64>,
    pub delta_unstable: bool,
}

impl SharpnessReport {
    pub fn slope(&self) -> Option<f64> {
        self.fit.map(|f| f.slope)
    }

    /// max/min of r(K) over the unflagged rows.
    pub fn r_spread(&self) -> f64 {
        let r: Vec<f64> = self.rows.iter().filter(|r| r.flag.is_none()).map(|r| r.r_min).collect();
        let lo = r.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = r.iter().cloned().fold(0.0, f64::max);
        hi / lo
    }
}

fn sharpness_row(params: &SharpnessParams, sys: &System1D, k: usize, tol: f64) -> Result<SharpnessRow> {
    let a_scale = params.a_scale(k);
    let atom = build_counterexample_atom(&params.p, a_scale, &params.delta)?;
    let k_cap = params.k_cap_factor * k;
    let coeffs = inner_products_upto(sys, k_cap, &atom, tol)?.values;
    let d = params.system.d;
    let product = ProductAtom::isotropic(atom, d);
    let all: Vec<Vec<f64>> = vec![coeffs.clone(); d];
    let s = rational::to_f64(&params.s);
    let e = rational::to_f64(&params.exponent()) - params.epsilon;
    let sum = hardy_sum_from_coefficients(&all, product.l2_norm(), s, e, k_cap)?;
    let tau = rational::to_f64(&params.tau);
    let scale = (k as f64).powf(rational::to_f64(&params.lower_bound_power()));
    let (mut r_min, mut r_argmin) = (f64::INFINITY, 0);
    for (i, c) in coeffs.iter().take(k + 1).enumerate() {
        let r = c.abs() / (((i + 1) as f64).powf(tau) * scale);
        if r < r_min {
            r_min = r;
            r_argmin = i;
        }
    }
    let first = coeffs[0].signum();
    let sign_coherent = coeffs.iter().take(k + 1).all(|c| c.signum() == first && *c != 0.0);
    Ok(SharpnessRow {
        k,
        a_scale,
        s_eps: sum.partial_sum,
        tail: sum.tail_bound,
        r_min,
        r_argmin,
        sign_coherent,
        flag: None,
    })
}

fn rows_for(params: &SharpnessParams, tol: f64) -> Vec<SharpnessRow> {
    let sys = params.system.coordinate(0);
    params
        .k_grid
        .par_iter()
        .map(|&k| sharpness_row(params, &sys, k, tol).unwrap_or_else(|e| SharpnessRow::failed(k, params.a_scale(k), &e)))
        .collect()
}

fn fit_rows(rows: &[SharpnessRow]) -> Option<LineFit> {
    let usable: Vec<&SharpnessRow> = rows.iter().skip(1).filter(|r| r.flag.is_none()).collect();
    let x: Vec<f64> = usable.iter().map(|r| r.k as f64).collect();
    let y: Vec<f64> = usable.iter().map(|r| r.s_eps).collect();
    loglog_fit(&x, &y)
}

/// Runs the experiment over the K grid, then again at δ/2 to test the
/// slope's sensitivity to δ.
pub fn run_sharpness(params: &SharpnessParams, tol: f64) -> Result<SharpnessReport> {
    params.validate()?;
    let rows = rows_for(params, tol);
    let fit = fit_rows(&rows);
    let band = fit.map(|f| f.slope_band95()).unwrap_or(f64::NAN);
    let half = params.clone().with_delta(&params.delta / qi(2));
    let slope_half_delta = fit_rows(&rows_for(&half, tol)).map(|f| f.slope);
    let delta_unstable = match (fit, slope_half_delta) {
        (Some(f), Some(h)) => !((f.slope - h).abs() < band.max(f64::EPSILON)),
        _ => true,
    };
    Ok(SharpnessReport {
        system: params.system.clone(),
        p: rational::format(&params.p),
        s: rational::format(&params.s),
        epsilon: params.epsilon,
        delta: rational::format(&params.delta),
        c: params.c,
        tau: rational::format(&params.tau),
        gamma: rational::format(&params.gamma),
        route: params.route,
        exponent: rational::format(&params.exponent()),
        predicted_slope: params.predicted_slope(),
        rows,
        fit,
        slope_band95: band,
        slope_half_delta,
        delta_unstable,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivation_examples() {
        let one = qi(1);
        let d = derive_sharpness_params(&System1D::laguerre_std(2.0).unwrap(), &one).unwrap();
        assert_eq!((d.tau.clone(), d.gamma.clone(), d.route), (qi(1), q(1, 2), Route::Direct));
        assert!(d.threshold_satisfied);
        let h = derive_sharpness_params(&System1D::laguerre_hermite(-0.5).unwrap(), &one).unwrap();
        assert_eq!(h.direct_tau, q(-1, 4));
        assert_eq!(h.threshold, q(-1, 4));
        assert!(!h.threshold_satisfied);
        assert_eq!(h.route, Route::Derivative);
        assert_eq!(h.tau, q(3, 4));
        let j = derive_sharpness_params(&System1D::jacobi(0.5, 0.5).unwrap(), &one).unwrap();
        assert_eq!((j.tau, j.route), (qi(1), Route::Direct));
        let b = derive_sharpness_params(&System1D::laguerre_std(1.0).unwrap(), &q(2, 3)).unwrap();
        assert!(b.boundary);
        assert!(derive_sharpness_params(&System1D::generalized_hermite(0.0).unwrap(), &one).is_err());
    }
}
