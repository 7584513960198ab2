//! Piecewise-constant (p,q)-atoms and the extremal atoms a_K used to show the
//! exponent E cannot be lowered.
//!
//! The counterexample atom on (0, 1/A) is
//!   2^{−(P+2)} A^{1/p} × { −1 on (0, δ/A), C_j on (jδ/A, (j+1)δ/A), C_{P+1} on ((P+1)δ/A, 1/A) }
//! with P = ⌊1/p − 1⌋ and constants chosen so every moment of order ≤ P
//! vanishes.

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{domain, Error, Result};
use crate::rational::{self, q, qi, to_f64, Q};

/// Exact description behind a scaled atom: breakpoints are `x_scale · β_i`
/// and values are `amplitude · v_i` with β, v rational.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactShape {
    pub breakpoints: Vec<Q>,
    pub values: Vec<Q>,
    pub x_scale: f64,
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseConstant1D {
    /// b₀ < b₁ < … < b_m.
    pub breakpoints: Vec<f64>,
    /// values[i] on (b_i, b_{i+1}).
    pub values: Vec<f64>,
    pub exact: Option<ExactShape>,
}

impl PiecewiseConstant1D {
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if breakpoints.len() != values.len() + 1 {
            return Err(Error::Shape { expected: values.len() + 1, got: breakpoints.len() });
        }
        if values.is_empty() {
            return domain("an atom needs at least one piece");
        }
        if breakpoints.windows(2).any(|w| !(w[0] < w[1])) || breakpoints.iter().any(|b| !b.is_finite()) {
            return domain("breakpoints must be finite and strictly increasing");
        }
        if values.iter().any(|v| !v.is_finite()) {
            return domain("values must be finite");
        }
        Ok(Self { breakpoints, values, exact: None })
    }

    pub fn pieces(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.values.iter().enumerate().map(|(i, &v)| (self.breakpoints[i], self.breakpoints[i + 1], v))
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m: f64, v| m.max(v.abs()))
    }

    pub fn l2_norm(&self) -> f64 {
        self.pieces().map(|(a, b, v)| v * v * (b - a)).sum::<f64>().sqrt()
    }

    /// Smallest interval containing the support.
    pub fn support(&self) -> Option<(f64, f64)> {
        let mut it = self.pieces().filter(|p| p.2 != 0.0);
        let first = it.next()?;
        let last = it.last().unwrap_or(first);
        Some((first.0, last.1))
    }

    /// Hex SHA-256 of the breakpoint and value bit patterns.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        for b in &self.breakpoints {
            h.update(b.to_bits().to_le_bytes());
        }
        h.update([0xff]);
        for v in &self.values {
            h.update(v.to_bits().to_le_bytes());
        }
        hex::encode(h.finalize())
    }

    /// ∫ a(u) uⁿ du in floating point, and ∫ |a(u)| |u|ⁿ du for scale.
    fn moment_f64(&self, n: usize) -> (f64, f64) {
        let e = (n + 1) as i32;
        let mut signed = 0.0;
        let mut abs = 0.0;
        for (a, b, v) in self.pieces() {
            let piece = (b.powi(e) - a.powi(e)) / e as f64;
            signed += v * piece;
            abs += v.abs() * piece.abs();
        }
        (signed, abs)
    }

    /// Exact moment in units of amplitude · x_scale^{n+1}.
    fn moment_exact(shape: &ExactShape, n: usize) -> Q {
        let e = n + 1;
        let mut acc = Q::zero();
        for (i, v) in shape.values.iter().enumerate() {
            let a = num_traits::pow(shape.breakpoints[i].clone(), e);
            let b = num_traits::pow(shape.breakpoints[i + 1].clone(), e);
            acc += v * (b - a);
        }
        acc / qi(e as i64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProductAtom {
    pub factors: Vec<PiecewiseConstant1D>,
}

impl ProductAtom {
    pub fn isotropic(a: PiecewiseConstant1D, d: usize) -> Self {
        Self { factors: vec![a; d] }
    }
    pub fn dim(&self) -> usize {
        self.factors.len()
    }
    pub fn l2_norm(&self) -> f64 {
        self.factors.iter().map(|f| f.l2_norm()).product()
    }
    pub fn sup_norm(&self) -> f64 {
        self.factors.iter().map(|f| f.sup_norm()).product()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Lq {
    #[serde(rename = "2")]
    Two,
    #[serde(rename = "inf")]
    Infinity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomReport {
    /// |∫ a xⁿ| / ∫ |a| |x|ⁿ for every admissible multi-index, in
    /// lexicographic order of (|n|, n).
    pub moment_residuals: Vec<f64>,
    /// ‖a‖_q |B|^{1/p − 1/q} for the smallest (1-d) or circumscribed (d > 1) ball.
    pub sup_norm_ratio: f64,
    /// (|B| / |box|)^{1/p − 1/q}; 1 in dimension one.
    pub ball_slack: f64,
    /// Moments were evaluated in rational arithmetic.
    pub exact: bool,
    pub is_atom: bool,
}

const ATOM_TOL: f64 = 1e-12;

/// Number of vanishing moments required: ⌊d(1/p − 1)⌋.
pub fn moment_order(p: &Q, d: usize) -> Result<usize> {
    if !(p > &Q::zero() && p <= &Q::one()) {
        return domain(format!("p must lie in (0, 1], got {}", rational::format(p)));
    }
    let v = (qi(d as i64) * (p.recip() - Q::one())).floor().to_integer();
    v.to_usize().ok_or_else(|| Error::Domain("moment order overflow".into()))
}

fn binomial(n: usize, k: usize) -> BigInt {
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

fn check_delta(p_order: usize, delta: &Q) -> Result<()> {
    let max = q(1, 2 * (p_order as i64 + 1));
    if !(delta > &Q::zero() && delta <= &max) {
        return domain(format!(
            "delta must lie in (0, {}], got {}",
            rational::format(&max),
            rational::format(delta)
        ));
    }
    Ok(())
}

/// C_i = Σ_{ℓ=0}^{i} C(P+1, ℓ) (−1)^{ℓ−1} / (1 − ℓδ), i = 1..=P+1.
pub fn counterexample_constants(p_order: usize, delta: &Q) -> Result<Vec<Q>> {
    check_delta(p_order, delta)?;
    let mut out = Vec::with_capacity(p_order + 1);
    let mut partial = Q::zero();
    for l in 0..=p_order + 1 {
        let sign = if l % 2 == 1 { Q::one() } else { -Q::one() };
        let term = sign * Q::from_integer(binomial(p_order + 1, l)) / (Q::one() - qi(l as i64) * delta);
        partial += term;
        if l >= 1 {
            out.push(partial.clone());
        }
    }
    Ok(out)
}

/// Residuals of the moment conditions, for k = 0..=P:
/// Σ_{i=1}^{P} C_i δ^{k+1}((i+1)^{k+1} − i^{k+1}) + C_{P+1}(1 − ((P+1)δ)^{k+1}) − δ^{k+1}.
pub fn moment_system_residuals(p_order: usize, delta: &Q, c: &[Q]) -> Result<Vec<Q>> {
    if c.len() != p_order + 1 {
        return Err(Error::Shape { expected: p_order + 1, got: c.len() });
    }
    let mut res = Vec::with_capacity(p_order + 1);
    for k in 0..=p_order {
        let e = k + 1;
        let dk = num_traits::pow(delta.clone(), e);
        let mut acc = Q::zero();
        for i in 1..=p_order {
            let span = num_traits::pow(qi(i as i64 + 1), e) - num_traits::pow(qi(i as i64), e);
            acc += &c[i - 1] * &dk * span;
        }
        acc += &c[p_order] * (Q::one() - num_traits::pow(qi(p_order as i64 + 1) * delta, e));
        res.push(acc - dk);
    }
    Ok(res)
}

/// The extremal atom supported in (0, 1/A).
pub fn build_counterexample_atom(p: &Q, a_scale: f64, delta: &Q) -> Result<PiecewiseConstant1D> {
    let p_order = moment_order(p, 1)?;
    if !(a_scale >= 1.0) || !a_scale.is_finite() {
        return domain(format!("A must be finite and >= 1, got {a_scale}"));
    }
    let c = counterexample_constants(p_order, delta)?;
    let mut beta: Vec<Q> = (0..=p_order + 1).map(|j| qi(j as i64) * delta).collect();
    beta.push(Q::one());
    let mut vals = vec![-Q::one()];
    vals.extend(c);
    let amplitude = 2f64.powi(-(p_order as i32 + 2)) * a_scale.powf(1.0 / to_f64(p));
    let x_scale = 1.0 / a_scale;
    let breakpoints: Vec<f64> = beta.iter().map(|b| to_f64(b) * x_scale).collect();
    let values: Vec<f64> = vals.iter().map(|v| to_f64(v) * amplitude).collect();
    let mut atom = PiecewiseConstant1D::new(breakpoints, values)?;
    atom.exact = Some(ExactShape { breakpoints: beta, values: vals, x_scale, amplitude });
    Ok(atom)
}

fn residuals_1d(atom: &PiecewiseConstant1D, order: usize) -> (Vec<f64>, bool) {
    match &atom.exact {
        Some(shape) => {
            let res = (0..=order)
                .map(|n| {
                    let m = PiecewiseConstant1D::moment_exact(shape, n);
                    if m.is_zero() {
                        0.0
                    } else {
                        let (_, abs) = atom.moment_f64(n);
                        let scale = shape.amplitude * shape.x_scale.powi(n as i32 + 1);
                        (to_f64(&m.abs()) * scale / abs).abs()
                    }
                })
                .collect();
            (res, true)
        }
        None => {
            let res = (0..=order)
                .map(|n| {
                    let (s, a) = atom.moment_f64(n);
                    if a == 0.0 {
                        0.0
                    } else {
                        s.abs() / a
                    }
                })
                .collect();
            (res, false)
        }
    }
}

fn lq_exponent(p: &Q, q: Lq) -> f64 {
    let inv_p = 1.0 / to_f64(p);
    match q {
        Lq::Two => inv_p - 0.5,
        Lq::Infinity => inv_p,
    }
}

/// Checks the (p,q)-atom conditions of a one-dimensional atom.
pub fn validate_atom(atom: &PiecewiseConstant1D, p: &Q, q: Lq) -> Result<AtomReport> {
    let order = moment_order(p, 1)?;
    let (moment_residuals, exact) = residuals_1d(atom, order);
    let (lo, hi) = atom.support().unwrap_or((0.0, 0.0));
    let measure = hi - lo;
    let norm = match q {
        Lq::Two => atom.l2_norm(),
        Lq::Infinity => atom.sup_norm(),
    };
    let sup_norm_ratio = if norm == 0.0 { 0.0 } else { norm * measure.powf(lq_exponent(p, q)) };
    let is_atom = moment_residuals.iter().all(|r| *r <= ATOM_TOL) && sup_norm_ratio <= 1.0 + ATOM_TOL;
    Ok(AtomReport { moment_residuals, sup_norm_ratio, ball_slack: 1.0, exact, is_atom })
}

/// Multi-indices of length ≤ `order` in dimension d, ordered by (|n|, n).
pub fn multi_indices(d: usize, order: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for total in 0..=order {
        let mut cur = vec![0usize; d];
        fill_indices(&mut out, &mut cur, 0, total);
    }
    out
}

fn fill_indices(out: &mut Vec<Vec<usize>>, cur: &mut Vec<usize>, pos: usize, left: usize) {
    if pos + 1 == cur.len() {
        cur[pos] = left;
        out.push(cur.clone());
        return;
    }
    for v in (0..=left).rev() {
        cur[pos] = v;
        fill_indices(out, cur, pos + 1, left - v);
    }
}

/// Checks a tensor-product atom against its circumscribed ball; the
/// box-to-ball volume slack is reported instead of counted as failure.
pub fn validate_product_atom(atom: &ProductAtom, p: &Q, q: Lq) -> Result<AtomReport> {
    let d = atom.dim();
    if d == 0 {
        return domain("empty product atom");
    }
    let order = moment_order(p, d)?;
    let per: Vec<(Vec<f64>, bool)> = atom.factors.iter().map(|f| residuals_1d(f, order)).collect();
    let exact = per.iter().all(|r| r.1);
    // a product moment vanishes iff some factor moment vanishes; its relative
    // residual is the product of the factor ratios
    let moment_residuals: Vec<f64> = multi_indices(d, order)
        .iter()
        .map(|n| n.iter().enumerate().map(|(i, &ni)| per[i].0[ni]).product())
        .collect();
    let mut box_vol = 1.0;
    let mut diag2 = 0.0;
    for f in &atom.factors {
        let (lo, hi) = f.support().unwrap_or((0.0, 0.0));
        box_vol *= hi - lo;
        diag2 += (hi - lo) * (hi - lo);
    }
    let radius = 0.5 * diag2.sqrt();
    let df = d as f64;
    let ball = std::f64::consts::PI.powf(df / 2.0) * radius.powf(df)
        / crate::specfun::ln_gamma(df / 2.0 + 1.0).exp();
    let norm = match q {
        Lq::Two => atom.l2_norm(),
        Lq::Infinity => atom.sup_norm(),
    };
    let ex = lq_exponent(p, q);
    let sup_norm_ratio = if norm == 0.0 { 0.0 } else { norm * ball.powf(ex) };
    let ball_slack = if box_vol > 0.0 { (ball / box_vol).powf(ex) } else { 1.0 };
    let is_atom = moment_residuals.iter().all(|r: &f64| *r <= ATOM_TOL)
        && sup_norm_ratio <= (1.0 + ATOM_TOL) * ball_slack;
    Ok(AtomReport { moment_residuals, sup_norm_ratio, ball_slack, exact, is_atom })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CLastRow {
    pub delta: String,
    pub c_last: String,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CLastScaling {
    pub p_order: usize,
    pub rows: Vec<CLastRow>,
    /// max/min of |C_{P+1}| / δ^{P+1} over the grid.
    pub bracket_ratio: f64,
    /// Every C_{P+1} has sign (−1)^P.
    pub sign_ok: bool,
}

/// Tabulates |C_{P+1}| / δ^{P+1}, which stays in a fixed bracket as δ → 0.
pub fn c_last_scaling(p_order: usize, deltas: &[Q]) -> Result<CLastScaling> {
    if deltas.is_empty() {
        return domain("empty delta grid");
    }
    let mut rows = Vec::new();
    let mut ratios = Vec::new();
    let mut sign_ok = true;
    for delta in deltas {
        let c = counterexample_constants(p_order, delta)?;
        let last = c[p_order].clone();
        let want_positive = p_order % 2 == 0;
        sign_ok &= if want_positive { last.is_positive() } else { last.is_negative() };
        let ratio_q = last.abs() / num_traits::pow(delta.clone(), p_order + 1);
        let ratio = to_f64(&ratio_q);
        ratios.push(ratio);
        rows.push(CLastRow { delta: rational::format(delta), c_last: rational::format(&last), ratio });
    }
    let max = ratios.iter().cloned().fold(f64::MIN, f64::max);
    let min = ratios.iter().cloned().fold(f64::MAX, f64::min);
    Ok(CLastScaling { p_order, rows, bracket_ratio: max / min, sign_ok })
}

/// 17-significant-digit decimal string; parses back to the same f64.
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomJson {
    pub p: String,
    #[serde(rename = "A")]
    pub a: f64,
    pub delta: String,
    pub breakpoints: Vec<String>,
    pub values: Vec<String>,
}

pub fn atom_to_json(atom: &PiecewiseConstant1D, p: &Q, a_scale: f64, delta: &Q) -> AtomJson {
    AtomJson {
        p: rational::format(p),
        a: a_scale,
        delta: rational::format(delta),
        breakpoints: atom.breakpoints.iter().map(|&b| format_f64(b)).collect(),
        values: atom.values.iter().map(|&v| format_f64(v)).collect(),
    }
}

/// Rebuilds an atom from its JSON record. The exact shape is recovered by
/// rebuilding from (p, A, δ) when the stored numbers match that construction.
pub fn atom_from_json(rec: &AtomJson) -> Result<PiecewiseConstant1D> {
    let parse = |s: &String| s.parse::<f64>().map_err(|_| Error::Parse(format!("bad number {s:?}")));
    let breakpoints = rec.breakpoints.iter().map(parse).collect::<Result<Vec<_>>>()?;
    let values = rec.values.iter().map(parse).collect::<Result<Vec<_>>>()?;
    let mut atom = PiecewiseConstant1D::new(breakpoints, values)?;
    if let (Ok(p), Ok(delta)) = (rational::parse(&rec.p), rational::parse(&rec.delta)) {
        if let Ok(rebuilt) = build_counterexample_atom(&p, rec.a, &delta) {
            if rebuilt.breakpoints == atom.breakpoints && rebuilt.values == atom.values {
                atom.exact = rebuilt.exact;
            }
        }
    }
    Ok(atom)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants_for_small_orders() {
        let c = counterexample_constants(0, &q(1, 10)).unwrap();
        assert_eq!(c, vec![q(1, 9)]);
        let c = counterexample_constants(1, &q(1, 10)).unwrap();
        assert_eq!(c, vec![q(11, 9), q(-1, 36)]);
        assert!(counterexample_constants(1, &q(1, 3)).is_err());
        assert!(counterexample_constants(0, &q(0, 1)).is_err());
    }

    #[test]
    fn example_atom_values() {
        let atom = build_counterexample_atom(&qi(1), 1.0, &q(1, 10)).unwrap();
        assert_eq!(atom.breakpoints, vec![0.0, 0.1, 1.0]);
        assert_eq!(atom.values[0], -0.25);
        assert!((atom.values[1] - 1.0 / 36.0).abs() < 1e-17);
        let rep = validate_atom(&atom, &qi(1), Lq::Infinity).unwrap();
        assert!(rep.exact && rep.is_atom);
        assert_eq!(rep.moment_residuals, vec![0.0]);
    }

    #[test]
    fn c_last_example() {
        let s = c_last_scaling(1, &[q(1, 10)]).unwrap();
        assert_eq!(s.rows[0].c_last, "-1/36");
        assert!((s.rows[0].ratio - 100.0 / 36.0).abs() < 1e-14);
        assert!(s.sign_ok);
    }

    #[test]
    fn json_round_trip() {
        let atom = build_counterexample_atom(&q(1, 3), 7.5, &q(1, 16)).unwrap();
        let js = atom_to_json(&atom, &q(1, 3), 7.5, &q(1, 16));
        let text = serde_json::to_string(&js).unwrap();
        let back = atom_from_json(&serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back.breakpoints, atom.breakpoints);
        assert_eq!(back.values, atom.values);
        assert!(back.exact.is_some());
    }

    #[test]
    fn index_enumeration() {
        assert_eq!(multi_indices(2, 1), vec![vec![0, 0], vec![1, 0], vec![0, 1]]);
        assert_eq!(multi_indices(3, 2).len(), 10);
    }
}
