use fbms_core::ball_geometry::{calx_jet, eval_a, eval_b};
use fbms_core::graph_operator::*;
use fbms_core::jet::{CJet, Jet};
use num_complex::Complex64;
use proptest::prelude::*;

/// Mean curvature of `(x, y) ↦ 𝒳(x + iy, u(x, y))` from its Euclidean fundamental forms.
fn embedded_h(x: f64, y: f64, u: &dyn Fn(Jet, Jet) -> Jet) -> f64 {
    let (jx, jy) = (Jet::var_u(x), Jet::var_v(y));
    let p = calx_jet(&CJet::from_parts(jx, jy), u(jx, jy));
    let xu = [p[0].du, p[1].du, p[2].du];
    let xv = [p[0].dv, p[1].dv, p[2].dv];
    let n = [
        xu[1] * xv[2] - xu[2] * xv[1],
        xu[2] * xv[0] - xu[0] * xv[2],
        xu[0] * xv[1] - xu[1] * xv[0],
    ];
    let nn = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
    let d = |a: [f64; 3], b: [f64; 3]| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    let (e, f, g) = (d(xu, xu), d(xu, xv), d(xv, xv));
    let l = (p[0].duu * n[0] + p[1].duu * n[1] + p[2].duu * n[2]) / nn;
    let m = (p[0].duv * n[0] + p[1].duv * n[1] + p[2].duv * n[2]) / nn;
    let q = (p[0].dvv * n[0] + p[1].dvv * n[1] + p[2].dvv * n[2]) / nn;
    (g * l - 2.0 * f * m + e * q) / (e * g - f * f)
}

fn bump(x: Jet, y: Jet) -> Jet {
    (x * x * 0.3 - y * 0.2 + x * y * 0.5 + 0.05 + (x * 2.0).sin() * y.cos() * 0.2).scale(0.4)
}

fn bump_f(x: f64, y: f64) -> f64 {
    0.4 * (0.3 * x * x - 0.2 * y + 0.5 * x * y + 0.05 + 0.2 * (2.0 * x).sin() * y.cos())
}

#[test]
fn zero_and_constant_fields() {
    let z = DiskField::zeros(16, 16, 1).unwrap();
    assert_eq!(mean_curvature_graph(&z).unwrap().sup_norm(), 0.0);
    for c in [-0.7, 0.2, 0.9] {
        let u = DiskField::from_fn(12, 16, 3, |_, _| c).unwrap();
        let h = mean_curvature_graph(&u).unwrap();
        for v in h.values() {
            assert!((v - 2.0 * f64::sinh(c)).abs() < 1e-10);
        }
    }
}

#[test]
fn pointwise_formula_matches_embedding() {
    for &(x, y) in &[(0.1, 0.2), (-0.5, 0.3), (0.7, -0.6), (0.0, 0.0)] {
        let (jx, jy) = (Jet::var_u(x), Jet::var_v(y));
        let jt = bump(jx, jy);
        let h = graph_mean_curvature_at(Complex64::new(x, y), jt);
        let oracle = embedded_h(x, y, &bump);
        assert!((h - oracle).abs() < 1e-12, "{h} vs {oracle}");
    }
    for c in [-0.5, 0.3] {
        let h = embedded_h(0.2, -0.4, &|_, _| Jet::constant(c));
        assert!((h - 2.0 * f64::sinh(c)).abs() < 1e-12);
    }
}

#[test]
fn discrete_curvature_converges_at_second_order() {
    let err = |nr: usize| {
        let u = DiskField::from_fn(nr, 32, 1, bump_f).unwrap();
        let h = mean_curvature_graph(&u).unwrap();
        let mut e: f64 = 0.0;
        for i in 0..nr {
            for j in 0..32 {
                let z = u.node(i, j);
                e = e.max((h.get(i, j) - embedded_h(z.re, z.im, &bump)).abs());
            }
        }
        e
    };
    let (e1, e2) = (err(16), err(32));
    assert!(e1 < 5e-2 && e2 < e1 / 3.0, "{e1} {e2}");
}

#[test]
fn linearized_operator_examples() {
    let nr = 40;
    let one = DiskField::from_fn(nr, 16, 1, |_, _| 1.0).unwrap();
    for v in linearized_graph_operator(&one).values() {
        assert!((v - 2.0).abs() < 1e-10);
    }
    let coord = |nr: usize| {
        let f = DiskField::from_fn(nr, 16, 1, |x, y| x / (0.5 * (1.0 + x * x + y * y))).unwrap();
        linearized_graph_operator(&f).sup_norm()
    };
    let (a, b) = (coord(20), coord(40));
    assert!(a < 5e-2 && b < a / 3.5, "{a} {b}");
    let harm = DiskField::from_fn(nr, 16, 1, |x, y| (x * x - y * y) / (0.5 * (1.0 + x * x + y * y))).unwrap();
    assert!(linearized_graph_operator(&harm).sup_norm() < 1e-2);
}

#[test]
fn linearization_by_richardson() {
    let v = DiskField::from_fn(24, 16, 1, |x, y| 0.3 * x * y + 0.2 * x - 0.1 * (x * x + y * y)).unwrap();
    let lin = linearized_graph_operator(&v);
    let quot = |t: f64| {
        let h = mean_curvature_graph(&v.map(|a| t * a)).unwrap();
        h.values().iter().map(|x| x / t).collect::<Vec<_>>()
    };
    let (q1, q2) = (quot(1e-2), quot(5e-3));
    let mut e_plain: f64 = 0.0;
    let mut e_rich: f64 = 0.0;
    for k in 0..lin.values().len() {
        e_plain = e_plain.max((q2[k] - lin.values()[k]).abs());
        e_rich = e_rich.max(((4.0 * q2[k] - q1[k]) / 3.0 - lin.values()[k]).abs());
    }
    assert!(e_plain < 1e-3, "{e_plain}");
    assert!(e_rich < 1e-5, "{e_rich}");
}

#[test]
fn nonlinear_remainder_is_cubic() {
    let v = DiskField::from_fn(20, 16, 1, |x, y| 0.5 * x - 0.3 * y * y + 0.2).unwrap();
    let lin = linearized_graph_operator(&v);
    let rem = |t: f64| {
        let h = mean_curvature_graph(&v.map(|a| t * a)).unwrap();
        h.values().iter().zip(lin.values()).fold(0.0f64, |m, (a, b)| m.max((a - t * b).abs()))
    };
    let ratio = rem(0.1) / rem(0.05);
    assert!((ratio - 8.0).abs() < 0.5, "{ratio}");
}

#[test]
fn area_of_flat_disk_and_first_variation() {
    let z = DiskField::zeros(16, 16, 2).unwrap();
    assert!((area_functional(&z).unwrap() - std::f64::consts::PI).abs() < 1e-12);
    let v = DiskField::from_fn(16, 16, 2, |x, y| 1.0 + 0.3 * x * y).unwrap();
    let t = 1e-4;
    let d = (area_functional(&v.map(|a| t * a)).unwrap() - area_functional(&v.map(|a| -t * a)).unwrap())
        / (2.0 * t);
    assert!(d.abs() < 1e-9, "{d}");
}

#[test]
fn first_variation_formula_with_neumann_data() {
    // ∂_r u = 0 on |z| = 1, so the boundary term vanishes.
    let uf = |x: f64, y: f64| {
        let r2 = x * x + y * y;
        0.1 * (1.0 - 0.5 * r2) * (0.8 * r2 + 0.5 * (x * x - y * y))
    };
    let vf = |x: f64, y: f64| 0.5 + x * x - 0.3 * y * y;
    let check = |nr: usize| {
        let u = DiskField::from_fn(nr, 32, 1, uf).unwrap();
        let v = DiskField::from_fn(nr, 32, 1, vf).unwrap();
        let t = 1e-5;
        let plus = u.with_values(u.values().iter().zip(v.values()).map(|(a, b)| a + t * b).collect()).unwrap();
        let minus = u.with_values(u.values().iter().zip(v.values()).map(|(a, b)| a - t * b).collect()).unwrap();
        let fd = (area_functional(&plus).unwrap() - area_functional(&minus).unwrap()) / (2.0 * t);
        let h = mean_curvature_graph(&u).unwrap();
        let integrand: Vec<f64> = (0..u.values().len())
            .map(|k| {
                let z = u.node(k / 32, k % 32);
                let a = eval_a(z, u.values()[k]);
                h.values()[k] * v.values()[k] * a.powi(3) * eval_b(z)
            })
            .collect();
        let exact = -u.with_values(integrand).unwrap().integrate();
        (fd - exact).abs() / exact.abs()
    };
    let (e1, e2) = (check(24), check(48));
    assert!(e1 < 0.5 && e2 < e1 / 3.5, "{e1} {e2}");
}

#[test]
fn normal_is_unit_and_flux_identity() {
    let u = DiskField::from_fn(16, 16, 1, bump_f).unwrap();
    let jets = u.cartesian_jets();
    for i in [0usize, 5, 15] {
        for j in [0usize, 7] {
            let z = u.node(i, j);
            let n = unit_normal_graph(&u, i, j).unwrap();
            let x3 = u.get(i, j);
            assert!((chart_metric_norm(z, x3, n) - 1.0).abs() < 1e-10);
            let jt = jets[i * 16 + j];
            let (a, b) = (eval_a(z, x3), eval_b(z));
            let w = (1.0 + b * b * (jt.du * jt.du + jt.dv * jt.dv)).sqrt();
            // g(N, ∂x3) = A²B² N₃ and da = A² W dx.
            let flux = a * a * b * b * n[2] * a * a * w;
            assert!((flux - a.powi(3) * b).abs() < 1e-12);
        }
    }
    let z = DiskField::zeros(8, 8, 1).unwrap();
    let n = unit_normal_graph(&z, 2, 3).unwrap();
    assert_eq!(n[0], 0.0);
    assert_eq!(n[1], 0.0);
    assert!(n[2] > 0.0);
}

#[test]
fn orthogonality_defect_examples() {
    let cap = DiskField::from_fn(12, 16, 1, |_, _| 0.4).unwrap();
    assert!(orthogonality_defect(&cap.boundary_samples()).unwrap() <= 1e-10);
    let tilt = DiskField::from_fn(12, 16, 1, |x, _| 0.2 * x).unwrap();
    let dt = orthogonality_defect(&tilt.boundary_samples()).unwrap();
    // Oracle: at z = 1, T = ∂_r 𝒳 + 0.2 ∂_x3 𝒳 and the sphere normal is the point itself.
    let p = calx_jet(&CJet::from_parts(Jet::var_u(1.0), Jet::constant(0.0)), Jet::var_u(1.0).scale(0.2));
    let t = [p[0].du, p[1].du, p[2].du];
    let q = [p[0].v, p[1].v, p[2].v];
    let dot = t[0] * q[0] + t[1] * q[1] + t[2] * q[2];
    let nt = (t[0] * t[0] + t[1] * t[1] + t[2] * t[2]).sqrt();
    let nq = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2]).sqrt();
    let expected = 1.0 - dot.abs() / (nt * nq);
    assert!(expected > 1e-3);
    assert!((dt - expected).abs() < 1e-10, "{dt} {expected}");
    let neumann = |nr: usize| {
        let u = DiskField::from_fn(nr, 16, 1, |x, y| {
            let r2 = x * x + y * y;
            0.3 * (r2 - 0.5 * r2 * r2)
        })
        .unwrap();
        orthogonality_defect(&u.boundary_samples()).unwrap()
    };
    let (a, b) = (neumann(10), neumann(20));
    assert!(a < 1e-4 && b < a / 4.0, "{a} {b}");
    assert!(orthogonality_defect(&[([0.0; 3], [1.0, 0.0, 0.0])]).is_err());
}

#[test]
fn symmetry_equivariance() {
    let n = 6;
    let u = DiskField::from_fn(16, 36, 1, |x, y| 0.2 * x * x - 0.1 * x * y + 0.15 * y).unwrap();
    let h = mean_curvature_graph(&u).unwrap();
    let lhs = mean_curvature_graph(&u.rotated(n).unwrap()).unwrap();
    let rhs = h.rotated(n).unwrap();
    let diff = |a: &DiskField, b: &DiskField| {
        a.values().iter().zip(b.values()).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
    };
    assert!(diff(&lhs, &rhs) < 1e-10);
    let lhs = mean_curvature_graph(&u.conjugated()).unwrap();
    assert!(diff(&lhs, &h.conjugated()) < 1e-10);
    let lhs = mean_curvature_graph(&u.map(|v| -v)).unwrap();
    assert!(diff(&lhs, &h.map(|v| -v)) < 1e-10);
}

#[test]
fn symmetrize_enforces_declared_group() {
    let mut u = DiskField::from_fn(8, 24, 1, |x, y| x + 0.3 * y + x * y).unwrap();
    u.symmetry = DiskSymmetry { conjugation: true, rotation: Some(3), odd_pairing: true };
    assert!(u.symmetry_defect().unwrap() > 1e-3);
    let s = u.symmetrize().unwrap();
    assert!(s.symmetry_defect().unwrap() < 1e-12);
}

#[test]
fn self_adjoint_on_robin_modes() {
    // V_k = (r^k + c r^{k+2}) cos kφ with ∂_r V = V on r = 1; v = V/B.
    let mode = |k: i32| {
        let c = (1.0 - k as f64) / (k as f64 + 3.0);
        move |x: f64, y: f64| {
            let r = x.hypot(y);
            let phi = y.atan2(x);
            let b = 0.5 * (1.0 + r * r);
            (r.powi(k) + c * r.powi(k + 2)) * (k as f64 * phi).cos() / b
        }
    };
    let defect = |nr: usize| {
        let mut worst: f64 = 0.0;
        for (k1, k2) in [(0, 0), (2, 2), (3, 3), (0, 4)] {
            let v = DiskField::from_fn(nr, 32, 1, mode(k1)).unwrap();
            let w = DiskField::from_fn(nr, 32, 1, mode(k2)).unwrap();
            let bw = |f: &DiskField, g: &DiskField| {
                let vals: Vec<f64> = (0..f.values().len())
                    .map(|k| f.values()[k] * g.values()[k] * eval_b(f.node(k / 32, k % 32)))
                    .collect();
                f.with_values(vals).unwrap().integrate()
            };
            let lv = linearized_graph_operator(&v);
            let lw = linearized_graph_operator(&w);
            let (a, b) = (bw(&lv, &w), bw(&v, &lw));
            worst = worst.max((a - b).abs() / (a.abs() + b.abs() + 1.0));
        }
        worst
    };
    let (a, b) = (defect(24), defect(48));
    assert!(a < 5e-2 && (b < a / 2.5 || b < 1e-10), "{a} {b}");
}

#[test]
fn invalid_fields_are_rejected() {
    let steep = DiskField::from_fn(10, 8, 1, |x, _| 3.0 * x).unwrap();
    assert!(mean_curvature_graph(&steep).is_err());
    let nan = DiskField::from_fn(10, 8, 1, |_, _| f64::NAN).unwrap();
    assert!(mean_curvature_graph(&nan).is_err());
    assert!(DiskField::zeros(3, 8, 1).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10))]
    #[test]
    fn linearization_consistency(c in prop::array::uniform6(-1.0f64..1.0)) {
        let f = move |x: f64, y: f64| c[0] + c[1] * x + c[2] * y + c[3] * x * x + c[4] * x * y + c[5] * y * y;
        let v = DiskField::from_fn(16, 16, 1, f).unwrap();
        let scale = v.sup_norm().max(1e-3);
        let v = v.map(|a| 0.5 * a / scale);
        let lin = linearized_graph_operator(&v);
        let t = 1e-3;
        let h = mean_curvature_graph(&v.map(|a| t * a)).unwrap();
        let err = h.values().iter().zip(lin.values()).fold(0.0f64, |m, (a, b)| m.max((a / t - b).abs()));
        prop_assert!(err < 1e-3, "{}", err);
    }
}

