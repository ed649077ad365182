use fbms_core::green_functions::expansion_constant_c;
use fbms_core::matching_solver::*;
use proptest::prelude::*;

#[test]
fn g_n_examples() {
    for n in [3usize, 10] {
        assert_eq!(g_n_eval(1.0, n).unwrap(), 1.0 - n as f64 / 2.0);
        assert!(g_n_eval(1e-8, n).unwrap() > 0.0);
        assert!(g_n_eval(1e8, n).unwrap() < 0.0);
    }
    assert!(g_n_eval(0.0, 4).is_err());
    assert!(g_n_eval(-1.0, 4).is_err());
}

#[test]
fn invert_examples() {
    for n in [3usize, 12, 30] {
        assert!((invert_gn(1.0 - n as f64 / 2.0, n).unwrap() - 1.0).abs() < 1e-13);
        let mut prev = f64::INFINITY;
        for k in -20..20 {
            let t = invert_gn(k as f64, n).unwrap();
            assert!(t < prev);
            prev = t;
        }
    }
}

#[test]
fn genus0_scale_is_twice_the_unbalanced_exponential() {
    let p = solve_matching(10, Genus::Zero).unwrap();
    let literal = (-5.0 + expansion_constant_c(10).unwrap()).exp();
    assert!((literal - 8.05e-4).abs() < 5e-7);
    assert!((genus0_unbalanced_scale(10).unwrap() - literal).abs() < 1e-18);
    assert!((p.eps - 2.0 * literal).abs() < 1e-16);
    assert_eq!(p.tau, p.eps);
    assert!(p.balance_residuals()[1] < 1e-12);
}

#[test]
fn genus1_balance_equations_hold() {
    for n in 3..=40 {
        let p = solve_matching(n, Genus::One).unwrap();
        let [a, b] = p.balance_residuals();
        assert!(a < 1e-10 && b < 1e-10, "n={n}: {a} {b}");
        let d = p.d_n.unwrap();
        let et = p.eps_tilde.unwrap();
        assert!((p.eps - d * et).abs() <= 1e-15 * p.eps);
        assert!((et - 2.0 * (-1.0 - 0.5 * n as f64 * d).exp()).abs() <= 1e-15 * et);
        assert_eq!(p.tau, p.eps);
        assert!((p.tau_tilde.unwrap() - et / n as f64).abs() < 1e-18);
        assert!(d > 0.0);
        if n >= 8 {
            assert!(et < (-(n as f64) / 4.0).exp());
        }
    }
}

#[test]
fn scales_decrease_with_n() {
    let mut prev = (1.0, 1.0, 1.0);
    for n in 6..=40 {
        let p0 = solve_matching(n, Genus::Zero).unwrap();
        let p1 = solve_matching(n, Genus::One).unwrap();
        let cur = (p0.eps, p1.eps, p1.eps_tilde.unwrap());
        assert!(cur.0 < prev.0 && cur.1 < prev.1 && cur.2 < prev.2, "n={n}");
        assert!(cur.0 < 1.0 && cur.1 < 1.0 && cur.2 < 1.0);
        prev = cur;
    }
}

#[test]
fn balance_residuals_do_not_grow_with_n() {
    let worst = (6..=40)
        .map(|n| {
            let r = solve_matching(n, Genus::One).unwrap().balance_residuals();
            r[0].max(r[1])
        })
        .fold(0.0, f64::max);
    assert!(worst < 1e-13, "{worst}");
}

#[test]
fn reference_scales() {
    let p = solve_matching(8, Genus::One).unwrap();
    assert!((p.d_n.unwrap() - 1.48).abs() < 0.01);
    assert!((p.eps_tilde.unwrap() - 1.97e-3).abs() < 0.03e-3);
    let p = solve_matching(12, Genus::One).unwrap();
    assert!((p.eps - 2.3e-4).abs() < 0.1e-4);
    assert!((p.eps_tilde.unwrap() - 1.6e-4).abs() < 0.1e-4);
}

#[test]
fn sstar_bracket_and_monotonicity() {
    let f = |s: f64| s * s.tanh();
    assert!(f(1.0) < 1.0 && f(1.5) > 1.0);
    let mut prev = 0.0;
    for i in 1..2000 {
        let v = f(i as f64 * 0.005);
        assert!(v > prev);
        prev = v;
    }
    let s = critical_catenoid_sstar();
    assert!((s * s.tanh() - 1.0).abs() <= 1e-14);
    // oracle: plain bisection
    let (mut lo, mut hi) = (1.0f64, 1.5f64);
    for _ in 0..80 {
        let m = 0.5 * (lo + hi);
        if f(m) < 1.0 {
            lo = m
        } else {
            hi = m
        }
    }
    assert!((s - lo).abs() < 1e-14);
    assert!((s - 1.1996786).abs() < 1e-7);
}

#[test]
fn matched_expansion_genus1_n12() {
    let p = solve_matching(12, Genus::One).unwrap();
    let near0 = verify_matched_expansion(&p, ExpansionRegion::Puncture).unwrap();
    assert!(near0.slope >= 1.9, "{near0:?}");
    assert!(near0.constant_ratio <= 10.0);
    let near1 = verify_matched_expansion(&p, ExpansionRegion::RootM).unwrap();
    assert!(near1.slope >= 0.9, "{near1:?}");
    assert!(near1.constant_ratio <= 10.0);
    assert_eq!(near1.radii.len(), 8);
    assert!((near1.radii[0] - 4.0 * p.eps).abs() < 1e-15);
}

#[test]
fn matched_expansion_root_passes_for_both_genera() {
    for n in [8usize, 12, 16] {
        for g in [Genus::Zero, Genus::One] {
            let p = solve_matching(n, g).unwrap();
            let f = verify_matched_expansion(&p, ExpansionRegion::RootM).unwrap();
            assert!(f.slope >= 0.9 && f.constant_ratio <= 10.0, "n={n} {g:?} {f:?}");
        }
    }
    let p = solve_matching(12, Genus::Zero).unwrap();
    assert!(verify_matched_expansion(&p, ExpansionRegion::Puncture).is_err());
}

proptest! {
    #[test]
    fn g_n_strictly_decreasing(t1 in 1e-6f64..1e3, f in 1.0001f64..10.0, n in 3usize..64) {
        let t2 = t1 * f;
        prop_assert!(g_n_eval(t2, n).unwrap() < g_n_eval(t1, n).unwrap());
    }

    #[test]
    fn invert_round_trip(y in -1e3f64..1e3, n in 3usize..64) {
        let t = invert_gn(y, n).unwrap();
        prop_assert!((g_n_eval(t, n).unwrap() - y).abs() <= 1e-12 * (1.0 + y.abs()));
    }
}
