#![allow(clippy::needless_range_loop)]

use galcol::quadrature::gauss_legendre_unit;
use galcol::time_kernel::{coupling_table, eval_basis, hermite_interpolate, hermite_quadrature_k3, HermiteBasis};
use num_rational::Ratio;
use proptest::prelude::*;

fn cubic(c: [f64; 4], t: f64) -> (f64, f64) {
    let v = c[0] + t * (c[1] + t * (c[2] + t * c[3]));
    let d = c[1] + t * (2.0 * c[2] + t * 3.0 * c[3]);
    (v, d)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn hermite_rule_integrates_cubics(c in prop::array::uniform4(-10.0f64..10.0)) {
        let (gl, dl) = cubic(c, -1.0);
        let (gr, dr) = cubic(c, 1.0);
        // ∫_{-1}^{1} of the cubic: odd powers vanish
        let exact = 2.0 * c[0] + 2.0 * c[2] / 3.0;
        prop_assert!((hermite_quadrature_k3(gl, gr, dl, dr) - exact).abs() <= 1e-12);
    }

    #[test]
    fn interpolation_reproduces_cubics(c in prop::array::uniform4(-5.0f64..5.0), t0 in -3.0f64..3.0, tau in 0.01f64..2.0, th in 0.0f64..1.0) {
        let data = hermite_interpolate(|t| cubic(c, t), t0, tau).unwrap();
        let (v, d) = cubic(c, t0 + th * tau);
        prop_assert!((data.eval(th, tau, 0) - v).abs() <= 1e-9 * (1.0 + v.abs()));
        prop_assert!((data.eval(th, tau, 1) - d).abs() <= 1e-8 * (1.0 + d.abs()));
    }

    #[test]
    fn basis_is_a_partition_of_unity_for_values(t in 0.0f64..1.0) {
        let v = HermiteBasis::new().values(t);
        prop_assert!((v[0] + v[2] - 1.0).abs() <= 1e-15);
    }
}

#[test]
fn cardinality_conditions_are_exact_in_rationals() {
    let b = HermiteBasis::new();
    let zero = Ratio::from_integer(0);
    let one = Ratio::from_integer(1);
    // (node, derivative order) of the degree of freedom owned by each basis function
    let owners = [(zero, 0u8), (zero, 1), (one, 0), (one, 1)];
    for l in 0..4 {
        for (k, &(t, d)) in owners.iter().enumerate() {
            let want = if k == l { one } else { zero };
            assert_eq!(b.eval_exact(l, t, d), want, "basis {l} at dof {k}");
        }
    }
}

#[test]
fn coupling_table_matches_rational_constants() {
    let t = coupling_table();
    let r = |n: i64, d: i64| Ratio::new(n, d);
    let s = [r(1, 2), r(1, 12), r(1, 2), r(-1, 12)];
    for i in 0..4 {
        assert_eq!(t.s_exact(i), s[i]);
    }
    let m = [
        [r(13, 35), r(11, 210), r(9, 70), r(-13, 420)],
        [r(11, 210), r(1, 105), r(13, 420), r(-1, 140)],
        [r(9, 70), r(13, 420), r(13, 35), r(-11, 210)],
        [r(-13, 420), r(-1, 140), r(-11, 210), r(1, 105)],
    ];
    for i in 0..4 {
        for j in 0..4 {
            assert_eq!(t.m_exact(i, j), m[i][j], "m[{i}][{j}]");
            assert_eq!(t.m_exact(i, j), t.m_exact(j, i));
        }
    }
}

#[test]
fn coupling_table_agrees_with_gauss_integration() {
    let t = coupling_table();
    let b = HermiteBasis::new();
    let gauss = gauss_legendre_unit(4);
    for i in 0..4 {
        let s: f64 = gauss.iter().map(|&(x, w)| w * b.eval(i, x, 0)).sum();
        assert!((s - t.s[i]).abs() < 1e-15);
        for j in 0..4 {
            let m: f64 = gauss.iter().map(|&(x, w)| w * b.eval(i, x, 0) * b.eval(j, x, 0)).sum();
            assert!((m - t.m[i][j]).abs() < 1e-15, "m[{i}][{j}]: {m} vs {}", t.m[i][j]);
        }
    }
}

#[test]
fn basis_evaluation_rejects_bad_arguments() {
    assert!(eval_basis(4, 0.5, 0).is_err());
    assert!(eval_basis(0, 1.5, 0).is_err());
    assert!(eval_basis(0, 0.5, 2).is_err());
    assert!((eval_basis(1, 0.5, 0).unwrap() - 0.125).abs() < 1e-15);
}
