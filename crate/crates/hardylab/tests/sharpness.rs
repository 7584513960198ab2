use hardylab::bases::{System1D, SystemSpec};
use hardylab::rational::{q, qi};
use hardylab::sharpness::*;
use hardylab::Error;

const GRID: [usize; 5] = [16, 32, 64, 128, 256];
const TOL: f64 = 1e-11;

fn run(sys: System1D, p: hardylab::rational::Q, eps: f64, grid: &[usize]) -> SharpnessReport {
    let params = SharpnessParams::new(SystemSpec::one_d(sys), p, qi(1), eps, grid.to_vec()).unwrap();
    run_sharpness(&params, TOL).unwrap()
}

fn assert_growth(rep: &SharpnessReport, eps: f64) {
    assert!(rep.rows.iter().all(|r| r.flag.is_none()), "{:?}", rep.rows);
    let slope = rep.slope().unwrap();
    assert!((slope - eps).abs() <= 0.15, "slope {slope}");
    assert!((rep.predicted_slope - eps).abs() < 1e-12);
    assert!(rep.rows.iter().all(|r| r.r_min > 0.0));
    assert!(rep.r_spread() <= 10.0, "r spread {}", rep.r_spread());
}

#[test]
fn laguerre_direct_route() {
    let rep = run(System1D::laguerre_std(2.0).unwrap(), qi(1), 0.2, &GRID);
    assert_eq!(rep.route, Route::Direct);
    assert_growth(&rep, 0.2);
    assert!(rep.rows.iter().all(|r| r.sign_coherent));
    // halving δ moves the slope by less than its confidence band
    assert!(!rep.delta_unstable, "{} vs {:?} ± {}", rep.slope().unwrap(), rep.slope_half_delta, rep.slope_band95);
}

#[test]
fn jacobi_direct_route() {
    let rep = run(System1D::jacobi(0.5, 0.5).unwrap(), qi(1), 0.2, &GRID);
    assert_eq!(rep.route, Route::Direct);
    assert_growth(&rep, 0.2);
    assert!(rep.rows.iter().all(|r| r.sign_coherent));
    let moved = (rep.slope().unwrap() - rep.slope_half_delta.unwrap()).abs();
    assert!(moved < 0.01, "slope moved by {moved} under δ/2");
}

#[test]
fn hermite_derivative_route() {
    let rep = run(System1D::laguerre_hermite(-0.5).unwrap(), qi(1), 0.2, &GRID);
    assert_eq!(rep.route, Route::Derivative);
    assert_eq!(rep.tau, "3/4");
    assert_growth(&rep, 0.2);
}

#[test]
fn boundary_log_divergence() {
    let grid = [32, 64, 128, 256, 512];
    let sys = System1D::laguerre_std(1.0).unwrap();
    let der = derive_sharpness_params(&sys, &q(2, 3)).unwrap();
    assert!(der.boundary && der.tau == der.threshold);
    let rep = run(sys, q(2, 3), 0.0, &grid);
    let ratios: Vec<f64> = rep.rows.iter().map(|r| r.s_eps / (r.k as f64).ln()).collect();
    let hi = ratios.iter().cloned().fold(0.0, f64::max);
    let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(lo > 0.0 && hi / lo <= 3.0, "{ratios:?}");
    // S₀ keeps growing
    assert!(rep.rows.windows(2).all(|w| w[1].s_eps > w[0].s_eps));
}

#[test]
fn tensor_growth_matches_prediction() {
    let spec = SystemSpec::isotropic(System1D::laguerre_std(2.0).unwrap(), 2);
    let params = SharpnessParams::new(spec, qi(1), qi(1), 0.2, vec![16, 32, 64, 128]).unwrap();
    assert!((params.predicted_slope() - 0.2).abs() < 1e-12);
    let rep = run_sharpness(&params, TOL).unwrap();
    let slope = rep.slope().unwrap();
    assert!((slope - rep.predicted_slope).abs() <= 0.2, "slope {slope}");
}

#[test]
fn parameter_validation() {
    let spec = SystemSpec::one_d(System1D::laguerre_std(2.0).unwrap());
    let p = SharpnessParams::new(spec.clone(), qi(1), qi(1), 0.2, vec![16, 32]).unwrap();
    assert_eq!(p.delta, q(1, 8));
    assert_eq!(p.a_scale(16), 16.0);
    assert!(run_sharpness(&p.clone().with_delta(q(3, 4)), TOL).is_err());
    assert!(matches!(SharpnessParams::new(spec.clone(), qi(1), qi(1), 0.2, vec![32, 16]), Err(Error::Domain(_))));
    let mut small = p.clone();
    small.c = 100.0;
    assert!(matches!(small.validate(), Err(Error::Domain(_))));
    let gh = SystemSpec::one_d(System1D::generalized_hermite(1.0).unwrap());
    assert!(SharpnessParams::new(gh, qi(1), qi(1), 0.2, vec![16]).is_err());
}

#[test]
fn threshold_arithmetic() {
    assert_eq!(sharpness_threshold(&qi(1), &q(1, 2)), qi(0));
    assert_eq!(sharpness_threshold(&qi(1), &q(1, 4)), q(-1, 4));
    assert_eq!(sharpness_threshold(&q(2, 3), &q(1, 2)), q(1, 2));
    let j = derive_sharpness_params(&System1D::jacobi(0.5, 0.5).unwrap(), &qi(1)).unwrap();
    assert_eq!((j.tau, j.gamma, j.route), (qi(1), q(1, 2), Route::Direct));
}

#[test]
fn report_serializes() {
    let rep = run(System1D::laguerre_std(2.0).unwrap(), qi(1), 0.2, &[8, 16, 32]);
    let v = serde_json::to_value(&rep).unwrap();
    assert_eq!(v["rows"][0]["K"], 8);
    assert_eq!(v["E"], "1");
    let back: SharpnessReport = serde_json::from_value(v).unwrap();
    assert_eq!(back.rows.len(), 3);
}
