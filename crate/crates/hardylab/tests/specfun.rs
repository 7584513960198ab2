use hardylab::rational::{q, qi, to_f64, Q};
use hardylab::specfun::*;
use num_traits::{One, Signed, Zero};
use proptest::prelude::*;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

#[test]
fn log_gamma_reference_values() {
    // mpmath loggamma at 30 digits
    let table = [
        (0.1, 2.252_712_651_734_206),
        (1.5, -0.120_782_237_635_245_22),
        (3.7, 1.428_072_326_665_388),
        (25.3, 55.746_181_183_584_59),
        (171.5, 709.143_163_030_928_2),
        (1e4, 82_099.717_496_442_38),
    ];
    for (u, want) in table {
        assert!(rel(log_gamma(u).unwrap(), want) <= 1e-13, "u={u}");
    }
}

#[test]
fn bessel_reference_values() {
    // mpmath e^{−z} I_ν(z) at 30 digits
    let table = [
        (0.0, 1.0, 0.465_759_607_593_640_4),
        (0.7, 12.5, 0.111_713_200_829_344_4),
        (3.0, 1e-3, 2.081_251_171_397_724_6e-11),
        (1.5, 250.0, 0.025_130_399_919_320_794),
    ];
    for (nu, z, want) in table {
        assert!(rel(bessel_i_scaled(nu, z).unwrap(), want) <= 1e-12, "nu={nu} z={z}");
    }
}

/// C(k+a, k−i) = Π_{m=i+1}^{k} (m+a) / (k−i)!.
fn gen_binom(k: usize, a: &Q, i: usize) -> Q {
    let mut acc = Q::one();
    for m in (i + 1)..=k {
        acc *= qi(m as i64) + a;
    }
    for m in 1..=(k - i) {
        acc /= qi(m as i64);
    }
    acc
}

/// Σ_i (−1)^i C(k+α, k−i) u^i / i!, and the sum of absolute terms.
fn laguerre_series(k: usize, alpha: &Q, u: &Q) -> (Q, Q) {
    let mut sum = Q::zero();
    let mut abs = Q::zero();
    let mut pow = Q::one();
    for i in 0..=k {
        if i > 0 {
            pow = pow * u / qi(i as i64);
        }
        let t = gen_binom(k, alpha, i) * &pow;
        abs += t.abs();
        if i % 2 == 0 {
            sum += t;
        } else {
            sum -= t;
        }
    }
    (sum, abs)
}

/// Σ_s C(k+α, k−s) C(k+β, s) ((x−1)/2)^s ((x+1)/2)^{k−s}.
fn jacobi_series(k: usize, alpha: &Q, beta: &Q, x: &Q) -> (Q, Q) {
    let half = q(1, 2);
    let xm = (x - qi(1)) * &half;
    let xp = (x + qi(1)) * &half;
    let mut sum = Q::zero();
    let mut abs = Q::zero();
    for s in 0..=k {
        let mut t = gen_binom(k, alpha, s) * gen_binom(k, beta, k - s);
        for _ in 0..s {
            t *= &xm;
        }
        for _ in 0..(k - s) {
            t *= &xp;
        }
        abs += t.abs();
        sum += t;
    }
    (sum, abs)
}

#[test]
fn laguerre_matches_exact_series() {
    let alphas = [qi(0), q(1, 2), q(-1, 3), q(7, 2)];
    let points = [q(0, 1), q(1, 1), q(3, 7), q(5, 2), q(12, 1)];
    for k in 0..=10 {
        for a in &alphas {
            for u in &points {
                let (exact, scale) = laguerre_series(k, a, u);
                let got = laguerre_poly(k, to_f64(a), to_f64(u)).unwrap();
                assert!(
                    (got - to_f64(&exact)).abs() <= 1e-13 * to_f64(&scale),
                    "k={k} a={a} u={u}: {got} vs {}",
                    to_f64(&exact)
                );
            }
        }
    }
    let (exact, _) = laguerre_series(5, &qi(0), &qi(1));
    assert!(rel(laguerre_poly(5, 0.0, 1.0).unwrap(), to_f64(&exact)) < 1e-14);
}

#[test]
fn jacobi_matches_exact_series() {
    let params = [(qi(0), qi(0)), (q(1, 2), q(-1, 2)), (q(3, 2), q(1, 4)), (q(-1, 3), q(2, 1))];
    let points = [q(-1, 1), q(-3, 4), q(0, 1), q(1, 3), q(9, 10), q(1, 1)];
    for k in 0..=10 {
        for (a, b) in &params {
            for x in &points {
                let (exact, scale) = jacobi_series(k, a, b, x);
                let got = jacobi_poly(k, to_f64(a), to_f64(b), to_f64(x)).unwrap();
                assert!(
                    (got - to_f64(&exact)).abs() <= 1e-13 * to_f64(&scale),
                    "k={k} a={a} b={b} x={x}: {got} vs {}",
                    to_f64(&exact)
                );
            }
        }
    }
}

#[test]
fn jacobi_reflection() {
    for k in 0..=10 {
        for &(a, b) in &[(0.5, -0.5), (1.3, 0.2), (-0.7, 2.5)] {
            for &x in &[-0.9, -0.25, 0.0, 0.4, 0.95] {
                let lhs = jacobi_poly(k, a, b, -x).unwrap();
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                let rhs = sign * jacobi_poly(k, b, a, x).unwrap();
                assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()), "k={k} a={a} b={b} x={x}");
            }
        }
    }
}

fn log_grid(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    let n = ((hi / lo).log10() * per_decade as f64).round() as usize;
    (0..=n).map(|i| lo * 10f64.powf(i as f64 / per_decade as f64)).collect()
}

#[test]
fn scaled_matches_integral_oracle() {
    for &nu in &[-0.5, 0.0, 0.7, 1.5, 3.0] {
        for z in log_grid(1e-4, 1e4, 3) {
            let s = bessel_i_scaled(nu, z).unwrap();
            let o = bessel_i_integral_scaled(nu, z).unwrap();
            assert!(rel(o, s) <= 1e-8, "nu={nu} z={z}: {s} vs {o}");
        }
    }
}

#[test]
fn integral_oracle_examples() {
    let z: f64 = 2.0;
    let atomic = bessel_i_integral(-0.5, z).unwrap();
    assert!(rel(atomic, (2.0 / (std::f64::consts::PI * z)).sqrt() * z.cosh()) < 1e-14);
    // I₀(1) = Σ (1/4)^m/(m!)²
    let mut series = 0.0;
    let mut t = 1.0;
    for m in 0..30 {
        if m > 0 {
            t *= 0.25 / (m * m) as f64;
        }
        series += t;
    }
    assert!(rel(bessel_i_integral(0.0, 1.0).unwrap(), series) < 1e-12);
}

#[test]
fn recurrence_in_scaled_form() {
    for &nu in &[0.5, 1.0, 1.7, 3.0, 7.5] {
        for z in log_grid(1e-3, 1e4, 4) {
            let lhs = 2.0 * nu / z * bessel_i_scaled(nu, z).unwrap();
            let rhs = bessel_i_scaled(nu - 1.0, z).unwrap() - bessel_i_scaled(nu + 1.0, z).unwrap();
            assert!(rel(rhs, lhs) <= 1e-9, "nu={nu} z={z}: {lhs} vs {rhs}");
        }
    }
}

#[test]
fn no_overflow_at_large_arguments() {
    for &nu in &[-0.5, 0.0, 2.0, 10.0] {
        let v = bessel_i_scaled(nu, 1e8).unwrap();
        let leading = 1.0 / (2.0 * std::f64::consts::PI * 1e8f64).sqrt();
        assert!(rel(v, leading) < 1e-6, "nu={nu}");
    }
}

proptest! {
    #[test]
    fn scaled_bessel_bounded_and_monotone_in_order(nu in 0.0f64..6.0, z in 1e-6f64..1e5) {
        let a = bessel_i_scaled(nu, z).unwrap();
        let b = bessel_i_scaled(nu + 0.5, z).unwrap();
        prop_assert!(a > 0.0 && a <= 1.0);
        prop_assert!(b <= a);
    }

    #[test]
    fn mode_switch_is_seamless(nu in -0.5f64..4.0, dz in -3.0f64..3.0) {
        let z = DEFAULT_SWITCH_THRESHOLD.max(2.0 * nu * nu) + dz;
        let s = bessel_i_scaled_mode(nu, z, BesselEvalMode::Series).unwrap();
        let a = bessel_i_scaled_mode(nu, z, BesselEvalMode::Asymptotic).unwrap();
        prop_assert!(rel(a, s) < 1e-10);
    }

    #[test]
    fn log_gamma_recurrence(u in 0.01f64..100.0) {
        let lhs = log_gamma(u + 1.0).unwrap();
        let rhs = log_gamma(u).unwrap() + u.ln();
        prop_assert!((lhs - rhs).abs() <= 1e-13 * (1.0 + lhs.abs()));
    }
}
