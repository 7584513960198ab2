use hardylab::atoms::*;
use hardylab::rational::{q, qi, to_f64, Q};
use hardylab::Error;
use num_traits::{One, Signed, Zero};
use proptest::prelude::*;

/// Solves the moment system ∫ a uⁿ = 0, n ≤ P, for C₁..C_{P+1} by exact
/// Gaussian elimination on the piece integrals.
fn eliminate(p_order: usize, delta: &Q) -> Vec<Q> {
    let m = p_order + 1;
    let mut b: Vec<Q> = (0..=m).map(|j| qi(j as i64) * delta).collect();
    b.push(Q::one());
    // pieces 1..=m carry the unknowns; piece 0 carries −1
    let integral = |piece: usize, n: usize| -> Q {
        let e = n + 1;
        (num_traits::pow(b[piece + 1].clone(), e) - num_traits::pow(b[piece].clone(), e)) / qi(e as i64)
    };
    let mut rows: Vec<Vec<Q>> = (0..m)
        .map(|n| {
            let mut row: Vec<Q> = (1..=m).map(|i| integral(i, n)).collect();
            row.push(integral(0, n));
            row
        })
        .collect();
    for col in 0..m {
        let piv = (col..m).find(|&r| !rows[r][col].is_zero()).expect("nonsingular");
        rows.swap(col, piv);
        let pv = rows[col][col].clone();
        for x in rows[col].iter_mut() {
            *x = &*x / &pv;
        }
        for r in 0..m {
            if r != col && !rows[r][col].is_zero() {
                let f = rows[r][col].clone();
                for c in 0..=m {
                    let v = &rows[col][c] * &f;
                    rows[r][c] -= v;
                }
            }
        }
    }
    rows.into_iter().map(|r| r[m].clone()).collect()
}

#[test]
fn constants_examples() {
    assert_eq!(counterexample_constants(0, &q(1, 10)).unwrap(), vec![q(1, 9)]);
    assert_eq!(counterexample_constants(1, &q(1, 10)).unwrap(), vec![q(11, 9), q(-1, 36)]);
    assert_eq!(eliminate(0, &q(1, 10)), vec![q(1, 9)]);
    assert_eq!(eliminate(1, &q(1, 10)), vec![q(11, 9), q(-1, 36)]);
}

#[test]
fn closed_form_matches_elimination() {
    for p_order in 0..=4 {
        let max = 2 * (p_order as i64 + 1);
        for den in [max, max + 1, 3 * max, 64, 101] {
            let delta = q(1, den);
            if den < max {
                continue;
            }
            let c = counterexample_constants(p_order, &delta).unwrap();
            assert_eq!(c, eliminate(p_order, &delta), "P={p_order} delta=1/{den}");
        }
        let odd = q(3, 7 * max);
        assert_eq!(counterexample_constants(p_order, &odd).unwrap(), eliminate(p_order, &odd));
    }
}

#[test]
fn zeroth_moment_identity() {
    for p_order in 0..=4 {
        for den in [2 * (p_order as i64 + 1), 40, 128] {
            let delta = q(1, den);
            let c = counterexample_constants(p_order, &delta).unwrap();
            let mut lhs = Q::zero();
            for ci in &c[..p_order] {
                lhs += ci * &delta;
            }
            lhs += &c[p_order] * (Q::one() - qi(p_order as i64 + 1) * &delta);
            assert_eq!(lhs, delta);
        }
    }
}

#[test]
fn residuals_vanish_exactly() {
    for p_order in 0..=4 {
        for den in [8, 16, 32, 64] {
            let delta = q(1, den);
            let Ok(c) = counterexample_constants(p_order, &delta) else {
                assert!(den < 2 * (p_order as i64 + 1));
                continue;
            };
            let res = moment_system_residuals(p_order, &delta, &c).unwrap();
            assert!(res.iter().all(Zero::is_zero), "P={p_order} delta=1/{den}");
        }
    }
}

#[test]
fn delta_out_of_range() {
    assert!(matches!(counterexample_constants(1, &q(1, 3)), Err(Error::Domain(_))));
    assert!(matches!(counterexample_constants(0, &qi(0)), Err(Error::Domain(_))));
    assert!(matches!(build_counterexample_atom(&q(1, 2), 0.5, &q(1, 10)), Err(Error::Domain(_))));
    assert!(matches!(build_counterexample_atom(&q(3, 2), 1.0, &q(1, 10)), Err(Error::Domain(_))));
}

#[test]
fn atom_example_p_one() {
    let a = build_counterexample_atom(&qi(1), 1.0, &q(1, 10)).unwrap();
    assert_eq!(a.breakpoints, vec![0.0, 0.1, 1.0]);
    assert_eq!(a.values, vec![-0.25, 0.25 / 9.0]);
    let rep = validate_atom(&a, &qi(1), Lq::Infinity).unwrap();
    assert!(rep.is_atom && rep.exact);
}

#[test]
fn atom_example_p_six_tenths() {
    let p = q(3, 5);
    let a = build_counterexample_atom(&p, 4.0, &q(1, 20)).unwrap();
    let rep = validate_atom(&a, &p, Lq::Infinity).unwrap();
    assert_eq!(rep.moment_residuals, vec![0.0]);
    assert!(rep.exact && rep.is_atom);
    assert!(rep.sup_norm_ratio <= 1.0);
    let rep2 = validate_atom(&a, &p, Lq::Two).unwrap();
    assert!(rep2.is_atom);
}

#[test]
fn perturbed_atom_detected() {
    let p = q(2, 5);
    let a = build_counterexample_atom(&p, 2.0, &q(1, 16)).unwrap();
    let mut values = a.values.clone();
    values[1] *= 1.0 + 1e-3;
    let bad = PiecewiseConstant1D::new(a.breakpoints.clone(), values).unwrap();
    let rep = validate_atom(&bad, &p, Lq::Infinity).unwrap();
    assert!(!rep.is_atom);
    assert!(rep.moment_residuals.iter().any(|r| *r > 1e-6));
}

#[test]
fn zero_function() {
    let z = PiecewiseConstant1D::new(vec![0.0, 1.0], vec![0.0]).unwrap();
    let rep = validate_atom(&z, &q(1, 2), Lq::Infinity).unwrap();
    assert!(rep.moment_residuals.iter().all(|r| *r == 0.0));
    assert_eq!(rep.sup_norm_ratio, 0.0);
    assert!(rep.is_atom);
}

#[test]
fn value_bound() {
    for p_order in 0..=4usize {
        let p = q(2, 2 * p_order as i64 + 3);
        assert_eq!(moment_order(&p, 1).unwrap(), p_order);
        let a_scale = 3.0;
        let a = build_counterexample_atom(&p, a_scale, &q(1, 64)).unwrap();
        let cap = a_scale.powf(1.0 / to_f64(&p));
        assert!(a.sup_norm() <= cap * (1.0 + 1e-15));
        assert_eq!(a.breakpoints.last(), Some(&(1.0 / a_scale)));
    }
}

#[test]
fn c_last_examples() {
    let t = c_last_scaling(1, &[q(1, 10)]).unwrap();
    assert!((t.rows[0].ratio - 100.0 / 36.0).abs() < 1e-14);
    assert_eq!(t.rows[0].c_last, "-1/36");
    let grid = [q(1, 8), q(1, 16), q(1, 32), q(1, 64)];
    for p_order in 0..=2 {
        let t = c_last_scaling(p_order, &grid).unwrap();
        assert!(t.bracket_ratio <= 4.0, "P={p_order}: {}", t.bracket_ratio);
        assert!(t.sign_ok);
    }
    // δ = 1/8 is still pre-asymptotic at P = 3: 117.03/28.17
    let t = c_last_scaling(3, &grid).unwrap();
    assert!((t.bracket_ratio - 4.155_029_296_875).abs() < 1e-12 && t.sign_ok);
    for p_order in 3..=4 {
        let t = c_last_scaling(p_order, &[q(1, 16), q(1, 32), q(1, 64), q(1, 128)]).unwrap();
        assert!(t.bracket_ratio <= 4.0 && t.sign_ok);
    }
}

#[test]
fn c_last_bracket_tightens() {
    // the ratio converges as δ → 0, so brackets on finer grids shrink towards 1
    for p_order in 0..=4 {
        let coarse = c_last_scaling(p_order, &[q(1, 16 * (p_order as i64 + 1)), q(1, 32 * (p_order as i64 + 1))]).unwrap();
        let fine = c_last_scaling(p_order, &[q(1, 256 * (p_order as i64 + 1)), q(1, 512 * (p_order as i64 + 1))]).unwrap();
        assert!(fine.bracket_ratio < coarse.bracket_ratio && fine.bracket_ratio < 1.1, "P={p_order}");
    }
}

#[test]
fn product_atom_validates() {
    for (p, d) in [(q(3, 5), 2), (q(2, 3), 3), (q(2, 5), 2)] {
        let a = build_counterexample_atom(&p, 2.0, &q(1, 32)).unwrap();
        let prod = ProductAtom::isotropic(a, d);
        let rep = validate_product_atom(&prod, &p, Lq::Infinity).unwrap();
        assert!(rep.is_atom, "p={p} d={d}: {rep:?}");
        assert_eq!(rep.moment_residuals.len(), multi_indices(d, moment_order(&p, d).unwrap()).len());
        assert!(rep.ball_slack >= 1.0);
    }
}

#[test]
fn json_round_trip() {
    let p = q(2, 7);
    let delta = q(1, 48);
    let a = build_counterexample_atom(&p, 5.5, &delta).unwrap();
    let rec = atom_to_json(&a, &p, 5.5, &delta);
    let text = serde_json::to_string(&rec).unwrap();
    assert!(text.contains("\"delta\":\"1/48\""));
    let back: AtomJson = serde_json::from_str(&text).unwrap();
    let b = atom_from_json(&back).unwrap();
    assert_eq!(a.breakpoints, b.breakpoints);
    assert_eq!(a.values, b.values);
    assert!(b.exact.is_some());
    for v in &rec.values {
        assert_eq!(format_f64(v.parse().unwrap()), *v);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn exact_residuals_and_constant_bound(p_order in 0usize..=4, num in 1i64..5, extra in 0i64..200) {
        let den = 2 * (p_order as i64 + 1) * num + extra;
        let delta = q(num, den);
        let c = counterexample_constants(p_order, &delta).unwrap();
        let res = moment_system_residuals(p_order, &delta, &c).unwrap();
        prop_assert!(res.iter().all(Zero::is_zero));
        let cap = qi(1 << (p_order + 2));
        prop_assert!(c.iter().all(|ci| ci.abs() <= cap));
        let last_positive = c[p_order].is_positive();
        prop_assert_eq!(last_positive, p_order % 2 == 0);
    }

    #[test]
    fn built_atoms_validate(p_order in 0usize..=4, a_scale in 1.0f64..50.0, den in 10i64..200) {
        let p = q(2, 2 * p_order as i64 + 3);
        let a = build_counterexample_atom(&p, a_scale, &q(1, den)).unwrap();
        let rep = validate_atom(&a, &p, Lq::Infinity).unwrap();
        prop_assert!(rep.exact && rep.is_atom);
        prop_assert!(rep.moment_residuals.iter().all(|r| *r == 0.0));
    }

    #[test]
    fn products_of_atoms_are_atoms(p_order in 0usize..=2, d in 1usize..=3, a_scale in 1.0f64..10.0) {
        let p = q(2, 2 * p_order as i64 + 3);
        let a = build_counterexample_atom(&p, a_scale, &q(1, 40)).unwrap();
        prop_assert!(validate_atom(&a, &p, Lq::Infinity).unwrap().is_atom);
        let rep = validate_product_atom(&ProductAtom::isotropic(a, d), &p, Lq::Infinity).unwrap();
        prop_assert!(rep.is_atom);
    }
}
