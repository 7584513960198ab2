//! Adaptive Gauss-Kronrod (G7/K15) quadrature with endpoint grading, and the
//! inner products ⟨a, φ_k⟩ of piecewise-constant atoms against basis
//! functions.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::Arc;

use dashmap::DashMap;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::atoms::{PiecewiseConstant1D, ProductAtom};
use crate::bases::{self, System1D, SystemSpec};
use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error_estimate: f64,
    pub panels_used: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VecQuadResult {
    pub values: Vec<f64>,
    pub error_estimates: Vec<f64>,
    pub panels_used: usize,
}

/// Declared algebraic endpoint behaviour: f(u) ~ (u − a)^σ near a.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Singularity {
    pub left: Option<f64>,
    pub right: Option<f64>,
}

impl Singularity {
    pub fn none() -> Self {
        Self::default()
    }
    pub fn left(sigma: f64) -> Self {
        Self { left: Some(sigma), right: None }
    }
    pub fn both(left: f64, right: f64) -> Self {
        Self { left: Some(left), right: Some(right) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_panels: usize,
    /// Initial number of equal panels per segment.
    pub min_panels: usize,
    pub singularity: Singularity,
}

impl QuadOptions {
    pub fn new(abs_tol: f64, rel_tol: f64) -> Self {
        Self {
            abs_tol,
            rel_tol,
            max_panels: 20_000,
            min_panels: 1,
            singularity: Singularity::none(),
        }
    }
    pub fn with_singularity(mut self, s: Singularity) -> Self {
        self.singularity = s;
        self
    }
    pub fn with_min_panels(mut self, n: usize) -> Self {
        self.min_panels = n.max(1);
        self
    }
    pub fn with_max_panels(mut self, n: usize) -> Self {
        self.max_panels = n.max(1);
        self
    }
}

/// Grading exponent m for u = a + L t^m: makes t^{m(σ+1)−1} at least C¹.
fn grading_power(sigma: f64) -> Option<f64> {
    if sigma >= 1.0 || (sigma >= 0.0 && sigma.fract() == 0.0) {
        return None;
    }
    Some((2.0 / (sigma + 1.0)).ceil().max(2.0))
}

#[derive(Debug, Clone, Copy)]
enum Segment {
    Linear { a: f64, b: f64 },
    GradedLeft { a: f64, len: f64, m: f64 },
    GradedRight { b: f64, len: f64, m: f64 },
}

impl Segment {
    fn t_range(&self) -> (f64, f64) {
        match *self {
            Segment::Linear { a, b } => (a, b),
            _ => (0.0, 1.0),
        }
    }

    #[inline]
    fn map(&self, t: f64) -> (f64, f64) {
        match *self {
            Segment::Linear { .. } => (t, 1.0),
            Segment::GradedLeft { a, len, m } => {
                let tm1 = t.powf(m - 1.0);
                (a + len * tm1 * t, len * m * tm1)
            }
            Segment::GradedRight { b, len, m } => {
                let tm1 = t.powf(m - 1.0);
                (b - len * tm1 * t, len * m * tm1)
            }
        }
    }
}

fn segments(a: f64, b: f64, sing: Singularity) -> Vec<Segment> {
    let gl = sing.left.and_then(grading_power);
    let gr = sing.right.and_then(grading_power);
    match (gl, gr) {
        (None, None) => vec![Segment::Linear { a, b }],
        (Some(m), None) => vec![Segment::GradedLeft { a, len: b - a, m }],
        (None, Some(m)) => vec![Segment::GradedRight { b, len: b - a, m }],
        (Some(ml), Some(mr)) => {
            let mid = 0.5 * (a + b);
            vec![
                Segment::GradedLeft { a, len: mid - a, m: ml },
                Segment::GradedRight { b, len: b - mid, m: mr },
            ]
        }
    }
}

struct Panel {
    seg: usize,
    t0: f64,
    t1: f64,
    value: Vec<f64>,
    error: Vec<f64>,
    floor: Vec<f64>,
    worst: f64,
}

#[derive(PartialEq)]
struct HeapKey(f64, usize);

impl Eq for HeapKey {}

impl PartialOrd for HeapKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then(other.1.cmp(&self.1))
    }
}

fn gk15<F: FnMut(f64, &mut [f64])>(
    f: &mut F,
    seg: &Segment,
    t0: f64,
    t1: f64,
    m: usize,
    scratch: &mut [f64],
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let c = 0.5 * (t0 + t1);
    let h = 0.5 * (t1 - t0);
    // scratch layout: 15 nodes × m components
    let mut eval = |t: f64, slot: usize, scratch: &mut [f64]| -> Result<()> {
        let (u, w) = seg.map(t);
        let out = &mut scratch[slot * m..(slot + 1) * m];
        f(u, out);
        for v in out.iter_mut() {
            *v *= w;
            if !v.is_finite() {
                return Err(Error::Tolerance {
                    what: format!("non-finite integrand at u = {u}"),
                    achieved: f64::INFINITY,
                    requested: 0.0,
                });
            }
        }
        Ok(())
    };
    eval(c, 0, scratch)?;
    for i in 0..7 {
        eval(c - h * XGK[i], 1 + 2 * i, scratch)?;
        eval(c + h * XGK[i], 2 + 2 * i, scratch)?;
    }
    let mut value = vec![0.0; m];
    let mut error = vec![0.0; m];
    let mut floor = vec![0.0; m];
    for comp in 0..m {
        let fc = scratch[comp];
        let mut resk = WGK[7] * fc;
        let mut resg = WG[3] * fc;
        let mut resabs = WGK[7] * fc.abs();
        for i in 0..7 {
            let f1 = scratch[(1 + 2 * i) * m + comp];
            let f2 = scratch[(2 + 2 * i) * m + comp];
            resk += WGK[i] * (f1 + f2);
            resabs += WGK[i] * (f1.abs() + f2.abs());
            if i % 2 == 1 {
                resg += WG[i / 2] * (f1 + f2);
            }
        }
        let mean = 0.5 * resk;
        let mut resasc = WGK[7] * (fc - mean).abs();
        for i in 0..7 {
            let f1 = scratch[(1 + 2 * i) * m + comp];
            let f2 = scratch[(2 + 2 * i) * m + comp];
            resasc += WGK[i] * ((f1 - mean).abs() + (f2 - mean).abs());
        }
        let hh = h.abs();
        let resk = resk * h;
        resabs *= hh;
        resasc *= hh;
        let mut err = (resk - resg * h).abs();
        if resasc != 0.0 && err != 0.0 {
            err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
        }
        let noise = 50.0 * f64::EPSILON * resabs;
        if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
            err = err.max(noise);
        }
        value[comp] = resk;
        error[comp] = err;
        floor[comp] = noise;
    }
    Ok((value, error, floor))
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Vector-valued adaptive integration of f: ℝ → ℝ^m over (a, b).
///
/// Convergence is declared when every component's error estimate is below
/// max(abs_tol, rel_tol · max_i |value_i|).
pub fn integrate_adaptive_vec<F: FnMut(f64, &mut [f64])>(
    mut f: F,
    m: usize,
    a: f64,
    b: f64,
    opts: &QuadOptions,
) -> Result<VecQuadResult> {
    if !(a.is_finite() && b.is_finite()) || !(a < b) {
        return Err(Error::Domain(format!("invalid interval ({a}, {b})")));
    }
    if m == 0 {
        return Ok(VecQuadResult { values: vec![], error_estimates: vec![], panels_used: 0 });
    }
    let segs = segments(a, b, opts.singularity);
    let mut scratch = vec![0.0; 15 * m];
    let mut panels: Vec<Panel> = Vec::new();
    let mut heap = BinaryHeap::new();
    let mut total = vec![0.0; m];
    let mut total_err = vec![0.0; m];
    let mut total_floor = vec![0.0; m];
    for (si, seg) in segs.iter().enumerate() {
        let (t0, t1) = seg.t_range();
        let n = opts.min_panels.max(1);
        for p in 0..n {
            let lo = t0 + (t1 - t0) * p as f64 / n as f64;
            let hi = if p + 1 == n { t1 } else { t0 + (t1 - t0) * (p + 1) as f64 / n as f64 };
            let (v, e, fl) = gk15(&mut f, seg, lo, hi, m, &mut scratch)?;
            for c in 0..m {
                total[c] += v[c];
                total_err[c] += e[c];
                total_floor[c] += fl[c];
            }
            let worst = max_abs(&e);
            heap.push(HeapKey(worst, panels.len()));
            panels.push(Panel { seg: si, t0: lo, t1: hi, value: v, error: e, floor: fl, worst });
        }
    }
    let mut live = panels.len();
    loop {
        let tol = opts.abs_tol.max(opts.rel_tol * max_abs(&total));
        let err = max_abs(&total_err);
        // a tolerance below the accumulated round-off of the rule is met once
        // only round-off remains
        if total_err.iter().zip(&total_floor).all(|(e, fl)| *e <= tol.max(1.01 * fl)) {
            break;
        }
        if live >= opts.max_panels {
            return Err(Error::Budget { budget: opts.max_panels, estimate: err });
        }
        let HeapKey(_, idx) = match heap.pop() {
            Some(k) => k,
            None => break,
        };
        let (seg_i, t0, t1) = (panels[idx].seg, panels[idx].t0, panels[idx].t1);
        let mid = 0.5 * (t0 + t1);
        if !(mid > t0 && mid < t1) || (t1 - t0) <= 4.0 * f64::EPSILON * t0.abs().max(t1.abs()) {
            return Err(Error::Tolerance {
                what: "panel width at round-off level".into(),
                achieved: err,
                requested: tol,
            });
        }
        let seg = segs[seg_i];
        let (v1, e1, f1) = gk15(&mut f, &seg, t0, mid, m, &mut scratch)?;
        let (v2, e2, f2) = gk15(&mut f, &seg, mid, t1, m, &mut scratch)?;
        for c in 0..m {
            total[c] += v1[c] + v2[c] - panels[idx].value[c];
            total_err[c] += e1[c] + e2[c] - panels[idx].error[c];
            total_floor[c] += f1[c] + f2[c] - panels[idx].floor[c];
        }
        panels[idx].worst = -1.0;
        let w1 = max_abs(&e1);
        let w2 = max_abs(&e2);
        heap.push(HeapKey(w1, panels.len()));
        panels.push(Panel { seg: seg_i, t0, t1: mid, value: v1, error: e1, floor: f1, worst: w1 });
        heap.push(HeapKey(w2, panels.len()));
        panels.push(Panel { seg: seg_i, t0: mid, t1, value: v2, error: e2, floor: f2, worst: w2 });
        live += 1;
    }
    // re-sum over live panels to drop accumulated update drift
    let mut values = vec![0.0; m];
    let mut errs = vec![0.0; m];
    for p in panels.iter().filter(|p| p.worst >= 0.0) {
        for c in 0..m {
            values[c] += p.value[c];
            errs[c] += p.error[c];
        }
    }
    Ok(VecQuadResult { values, error_estimates: errs, panels_used: live })
}

/// Scalar adaptive G7K15 integration over (a, b).
pub fn integrate_adaptive<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    opts: &QuadOptions,
) -> Result<QuadResult> {
    let r = integrate_adaptive_vec(|u, out: &mut [f64]| out[0] = f(u), 1, a, b, opts)?;
    Ok(QuadResult { value: r.values[0], error_estimate: r.error_estimates[0], panels_used: r.panels_used })
}

/// Rough count of sign changes of φ_k on (a, b), used as the panel floor.
fn oscillations(sys: &System1D, k: usize, a: f64, b: f64) -> f64 {
    let kf = k as f64;
    match sys {
        System1D::LaguerreStd { alpha } => {
            let kp = bases::k_prime(k, *alpha);
            kp.sqrt() * (b.max(0.0).sqrt() - a.max(0.0).sqrt()) / std::f64::consts::PI
        }
        System1D::LaguerreHermite { alpha } => bases::k_prime(k, *alpha).sqrt() * (b - a) / std::f64::consts::PI,
        System1D::GeneralizedHermite { .. } => (2.0 * kf + 2.0).sqrt() * (b - a) / std::f64::consts::PI,
        System1D::JacobiTrig { .. } => (kf + 1.0) * (b - a) / std::f64::consts::PI,
    }
}

/// Algebraic behaviour of φ_k at the ends of (a, b) when they touch a
/// non-smooth point of the system.
fn piece_singularity(sys: &System1D, k: usize, a: f64, b: f64) -> Singularity {
    let mut s = Singularity::none();
    match *sys {
        System1D::LaguerreStd { alpha } if a == 0.0 => s.left = Some(0.5 * alpha),
        System1D::LaguerreHermite { alpha } if a == 0.0 => s.left = Some(alpha + 0.5),
        System1D::JacobiTrig { alpha, beta } => {
            if a == 0.0 {
                s.left = Some(alpha + 0.5);
            }
            if b == std::f64::consts::PI {
                s.right = Some(beta + 0.5);
            }
        }
        System1D::GeneralizedHermite { lambda } if !sys.smooth_at_zero() => {
            let e = if k % 2 == 0 { lambda } else { lambda + 1.0 };
            if a == 0.0 {
                s.left = Some(e);
            }
            if b == 0.0 {
                s.right = Some(e);
            }
        }
        _ => {}
    }
    s
}

/// Pieces of the atom clipped to the system's domain and split at 0 for the
/// generalized Hermite system.
fn atom_pieces(sys: &System1D, atom: &PiecewiseConstant1D) -> Result<Vec<(f64, f64, f64)>> {
    let (lo, hi) = sys.domain();
    let mut out = Vec::new();
    for (a, b, v) in atom.pieces() {
        if a < lo || b > hi {
            return Err(Error::Domain(format!("atom piece ({a}, {b}) leaves the domain ({lo}, {hi})")));
        }
        if v == 0.0 {
            continue;
        }
        if matches!(sys, System1D::GeneralizedHermite { .. }) && a < 0.0 && b > 0.0 {
            out.push((a, 0.0, v));
            out.push((0.0, b, v));
        } else {
            out.push((a, b, v));
        }
    }
    Ok(out)
}

fn eval_unchecked(sys: &System1D, k: usize, u: f64, buf: &mut Vec<f64>) -> f64 {
    buf.resize(k + 1, 0.0);
    bases::fill_upto(sys, u, buf);
    buf[k]
}

/// ⟨a, φ_k⟩ for a piecewise-constant atom. `tol` bounds the error relative
/// to ‖a‖₁.
pub fn inner_product(sys: &System1D, k: usize, atom: &PiecewiseConstant1D, tol: f64) -> Result<QuadResult> {
    sys.validated()?;
    let mut value = 0.0;
    let mut err = 0.0;
    let mut panels = 0;
    let mut buf = Vec::new();
    for (a, b, v) in atom_pieces(sys, atom)? {
        let floor = 1 + oscillations(sys, k, a, b).ceil() as usize;
        let opts = QuadOptions::new(tol * (b - a), tol)
            .with_min_panels(floor)
            .with_singularity(piece_singularity(sys, k, a, b));
        let r = integrate_adaptive(|u| eval_unchecked(sys, k, u, &mut buf), a, b, &opts)?;
        value += v * r.value;
        err += v.abs() * r.error_estimate;
        panels += r.panels_used;
    }
    Ok(QuadResult { value, error_estimate: err, panels_used: panels })
}

/// ⟨a, φ_k⟩ for every k ≤ kmax from a single vector-valued quadrature.
pub fn inner_products_upto(
    sys: &System1D,
    kmax: usize,
    atom: &PiecewiseConstant1D,
    tol: f64,
) -> Result<VecQuadResult> {
    sys.validated()?;
    let m = kmax + 1;
    let mut values = vec![0.0; m];
    let mut errs = vec![0.0; m];
    let mut panels = 0;
    for (a, b, v) in atom_pieces(sys, atom)? {
        let floor = 1 + oscillations(sys, kmax, a, b).ceil() as usize;
        // the most singular endpoint behaviour over all k decides the grading
        let s0 = piece_singularity(sys, 0, a, b);
        let s1 = piece_singularity(sys, 1.min(kmax), a, b);
        let pick = |x: Option<f64>, y: Option<f64>| match (x, y) {
            (Some(x), Some(y)) => Some(x.min(y)),
            (x, y) => x.or(y),
        };
        let sing = Singularity { left: pick(s0.left, s1.left), right: pick(s0.right, s1.right) };
        let opts = QuadOptions::new(tol * (b - a), tol).with_min_panels(floor).with_singularity(sing);
        let r = integrate_adaptive_vec(|u, out: &mut [f64]| bases::fill_upto(sys, u, out), m, a, b, &opts)?;
        for k in 0..m {
            values[k] += v * r.values[k];
            errs[k] += v.abs() * r.error_estimates[k];
        }
        panels += r.panels_used;
    }
    Ok(VecQuadResult { values, error_estimates: errs, panels_used: panels })
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub struct CacheKey {
    pub family: bases::Family,
    pub alpha_bits: u64,
    pub beta_bits: u64,
    pub k: usize,
    pub atom_hash: String,
    pub tol_bits: u64,
}

impl CacheKey {
    pub fn new(sys: &System1D, k: usize, atom: &PiecewiseConstant1D, tol: f64) -> Self {
        Self::with_hash(sys, k, atom.content_hash(), tol)
    }
    fn with_hash(sys: &System1D, k: usize, atom_hash: String, tol: f64) -> Self {
        CacheKey {
            family: sys.family(),
            alpha_bits: sys.alpha().to_bits(),
            beta_bits: sys.beta().to_bits(),
            k,
            atom_hash,
            tol_bits: tol.to_bits(),
        }
    }
}

/// Concurrent memo of one-dimensional coefficients ⟨a, φ_k⟩.
#[derive(Debug, Default, Clone)]
pub struct CoefficientCache {
    map: Arc<DashMap<CacheKey, f64>>,
}

#[derive(serde::Serialize, serde::Deserialize)]
struct CacheEntry {
    key: CacheKey,
    value: f64,
}

impl CoefficientCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn get(&self, key: &CacheKey) -> Option<f64> {
        self.map.get(key).map(|v| *v)
    }

    pub fn insert(&self, key: CacheKey, value: f64) {
        self.map.insert(key, value);
    }

    /// Coefficients for k = 0..=kmax, computed in one batch when any is missing.
    pub fn coefficients_upto(
        &self,
        sys: &System1D,
        kmax: usize,
        atom: &PiecewiseConstant1D,
        tol: f64,
    ) -> Result<Vec<f64>> {
        let hash = atom.content_hash();
        let keys: Vec<CacheKey> = (0..=kmax).map(|k| CacheKey::with_hash(sys, k, hash.clone(), tol)).collect();
        let cached: Vec<Option<f64>> = keys.iter().map(|k| self.get(k)).collect();
        if cached.iter().all(Option::is_some) {
            return Ok(cached.into_iter().map(Option::unwrap).collect());
        }
        let fresh = inner_products_upto(sys, kmax, atom, tol)?.values;
        for (key, v) in keys.into_iter().zip(&fresh) {
            self.map.insert(key, *v);
        }
        Ok(fresh)
    }

    /// Entries sorted by key, as JSON.
    pub fn to_json(&self) -> String {
        let mut entries: Vec<CacheEntry> =
            self.map.iter().map(|e| CacheEntry { key: e.key().clone(), value: *e.value() }).collect();
        entries.sort_by(|a, b| a.key.cmp(&b.key));
        serde_json::to_string(&entries).expect("cache entries serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let entries: Vec<CacheEntry> =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("coefficient cache: {e}")))?;
        let cache = Self::new();
        for e in entries {
            cache.insert(e.key, e.value);
        }
        Ok(cache)
    }
}

/// Identifier of an atom for cache keys and run records.
pub fn atom_digest(atom: &ProductAtom) -> String {
    let mut h = Sha256::new();
    for f in &atom.factors {
        h.update(f.content_hash().as_bytes());
    }
    hex::encode(h.finalize())
}

/// ⟨A, φ_n⟩ = Π_i ⟨a_i, φ_{n_i}⟩ for a product atom.
pub fn coefficients_tensor(
    spec: &SystemSpec,
    n: &bases::MultiIndex,
    atom: &ProductAtom,
    tol: f64,
    cache: &CoefficientCache,
) -> Result<f64> {
    if n.dim() != spec.d {
        return Err(Error::Shape { expected: spec.d, got: n.dim() });
    }
    if atom.dim() != spec.d {
        return Err(Error::Shape { expected: spec.d, got: atom.dim() });
    }
    let factors: Vec<f64> = (0..spec.d)
        .into_par_iter()
        .map(|i| {
            let sys = spec.coordinate(i);
            let key = CacheKey::new(&sys, n.0[i], &atom.factors[i], tol);
            if let Some(v) = cache.get(&key) {
                return Ok(v);
            }
            let v = inner_product(&sys, n.0[i], &atom.factors[i], tol)?.value;
            cache.insert(key, v);
            Ok(v)
        })
        .collect::<Result<_>>()?;
    Ok(factors.iter().product())
}
