use fbms_core::ball_geometry::{calx_jet, cap_mean_curvature, eval_a, eval_b, pullback_factors};
use fbms_core::curvature_validator::*;
use fbms_core::jet::{CJet, Jet};
use fbms_core::matching_solver::Genus;
use fbms_core::surface_builder::{RegionKind, Resolution, ResolutionPreset, SurfaceAtlas};
use num_complex::Complex64;
use proptest::prelude::*;
use std::f64::consts::PI;

fn default_res() -> Resolution {
    Resolution::new(ResolutionPreset::Default)
}

fn means(v: Vec<fbms_core::Result<FundamentalForms>>) -> Vec<f64> {
    v.into_iter().map(|f| f.unwrap().mean).collect()
}

#[test]
fn euclidean_catenoid_is_minimal() {
    let cat = |u: f64, v: f64| Ok([u.cosh() * v.cos(), u.cosh() * v.sin(), u]);
    let samples: Vec<_> = (0..9).map(|k| (-1.0 + 0.25 * k as f64, 0.7 * k as f64)).collect();
    let h = 1e-3;
    let hs = means(parametric_mean_curvature(&cat, AmbientChart::Euclidean, &samples, h, CurvatureRoute::EuclideanDirect).unwrap());
    for v in hs {
        assert!(v.abs() <= 1e-5, "{v}");
    }
}

#[test]
fn cap_leaf_mean_curvature_is_two_sinh() {
    // Analytic jets: the upward normal of (z, c) has H = 2 sinh c exactly.
    for c in [-0.7, -0.1, 0.0, 0.2, 0.9] {
        for z in [Complex64::new(0.0, 0.0), Complex64::new(0.3, -0.4), Complex64::new(-0.6, 0.5)] {
            let zj = CJet::from_parts(Jet::var_u(z.re), Jet::var_v(z.im));
            let f = FundamentalForms::from_embedding(&calx_jet(&zj, Jet::constant(c))).unwrap();
            assert!((f.mean - cap_mean_curvature(c)).abs() <= 1e-10, "c={c} z={z}: {}", f.mean);
            assert!((f.mean - 2.0 * c.sinh()).abs() <= 1e-10);
        }
    }
}

#[test]
fn cap_leaf_through_both_routes() {
    for c in [-0.5, 0.3, 1.1] {
        let leaf = move |u: f64, v: f64| Ok([u, v, c]);
        let samples = [(0.1, 0.2), (-0.5, 0.3), (0.7, -0.1)];
        let h = 1e-3;
        let e = means(parametric_mean_curvature(&leaf, AmbientChart::Conformal, &samples, h, CurvatureRoute::EuclideanDirect).unwrap());
        let p = means(parametric_mean_curvature(&leaf, AmbientChart::Conformal, &samples, h, CurvatureRoute::PullbackGtilde).unwrap());
        for (a, b) in e.iter().zip(&p) {
            assert!((a - 2.0 * f64::sinh(c)).abs() <= 1e-5, "{a}");
            assert!((b - 2.0 * f64::sinh(c)).abs() <= 1e-9, "{b}");
        }
    }
}

#[test]
fn unit_sphere_octant() {
    // (u, v) ↦ (sin u cos v, sin u sin v, cos u) has inward normal, so H = −2 in the sum convention.
    let sphere = |u: f64, v: f64| Ok([u.sin() * v.cos(), u.sin() * v.sin(), u.cos()]);
    let samples = [(0.4, 0.3), (0.9, 1.2), (1.3, 0.1)];
    let hs = parametric_mean_curvature(&sphere, AmbientChart::Euclidean, &samples, 1e-3, CurvatureRoute::EuclideanDirect).unwrap();
    for f in hs {
        let f = f.unwrap();
        assert!((f.mean.abs() - 2.0).abs() <= 1e-5);
        assert!((f.gauss() - 1.0).abs() <= 1e-5);
    }
    let flipped = |u: f64, v: f64| sphere(v, u);
    let hs = means(parametric_mean_curvature(&flipped, AmbientChart::Euclidean, &[(0.3, 0.8)], 1e-3, CurvatureRoute::EuclideanDirect).unwrap());
    let hs0 = means(parametric_mean_curvature(&sphere, AmbientChart::Euclidean, &[(0.8, 0.3)], 1e-3, CurvatureRoute::EuclideanDirect).unwrap());
    assert!((hs[0] + hs0[0]).abs() <= 1e-5, "orientation reversal flips H");
}

#[test]
fn degenerate_samples_are_flagged_individually() {
    let fold = |u: f64, v: f64| Ok([u * u, v, 0.0]);
    let out = parametric_mean_curvature(&fold, AmbientChart::Euclidean, &[(0.0, 0.0), (1.0, 0.0)], 1e-3, CurvatureRoute::EuclideanDirect).unwrap();
    assert!(out[0].is_err() && out[1].is_ok());
    let flat = |_u: f64, _v: f64| Ok([0.1, 0.2, 0.3]);
    let out = parametric_mean_curvature(&flat, AmbientChart::Euclidean, &[(0.0, 0.0), (1.0, 0.0)], 1e-3, CurvatureRoute::EuclideanDirect).unwrap();
    assert!(out.iter().all(|r| r.is_err()));
    let plane = |u: f64, v: f64| Ok([u, v, 0.0]);
    let out = parametric_mean_curvature(&plane, AmbientChart::Euclidean, &[(0.0, 0.0)], 1e-3, CurvatureRoute::EuclideanDirect).unwrap();
    assert_eq!(out[0].as_ref().unwrap().mean, 0.0);
}

#[test]
fn route_chart_mismatch_is_an_error() {
    let leaf = |u: f64, v: f64| Ok([u, v, 0.0]);
    let s = [(0.1, 0.1)];
    assert!(parametric_mean_curvature(&leaf, AmbientChart::Euclidean, &s, 1e-3, CurvatureRoute::PullbackGtilde).is_err());
    assert!(parametric_mean_curvature(&leaf, AmbientChart::Conformal, &s, 1e-3, CurvatureRoute::PullbackGm).is_err());
    let hp = AmbientChart::HalfPlane { m: 1, n: 5 };
    assert!(parametric_mean_curvature(&leaf, hp, &s, 1e-3, CurvatureRoute::PullbackGm).is_err());
    assert!(parametric_mean_curvature(&leaf, AmbientChart::Conformal, &s, 0.0, CurvatureRoute::EuclideanDirect).is_err());
}

// ---------------------------------------------------------------------------
// Christoffel symbols

/// Metric diagonal `(g11, g22, g33)` at `y` from the factor functions.
fn diag(metric: ChartMetric, y: [f64; 3]) -> [f64; 3] {
    let z = Complex64::new(y[0], y[1]);
    let (l, m) = match metric {
        ChartMetric::Gtilde => (eval_a(z, y[2]), eval_b(z)),
        ChartMetric::Gm => pullback_factors(z, y[2]),
    };
    [l * l, l * l, l * l * m * m]
}

/// Christoffel symbols from centred differences of the metric.
fn christoffel_fd(metric: ChartMetric, y: [f64; 3]) -> [[[f64; 3]; 3]; 3] {
    let e = 1e-6;
    let mut dg = [[0.0; 3]; 3]; // dg[i][k] = ∂_i g_kk
    for i in 0..3 {
        let (mut p, mut m) = (y, y);
        p[i] += e;
        m[i] -= e;
        let (gp, gm) = (diag(metric, p), diag(metric, m));
        for k in 0..3 {
            dg[i][k] = (gp[k] - gm[k]) / (2.0 * e);
        }
    }
    let g = diag(metric, y);
    let mut out = [[[0.0; 3]; 3]; 3];
    for k in 0..3 {
        for i in 0..3 {
            for j in 0..3 {
                // Γ^k_ij = ½ g^kk (∂_i g_kj + ∂_j g_ki − ∂_k g_ij) for a diagonal metric
                let mut v = 0.0;
                if k == j {
                    v += dg[i][k];
                }
                if k == i {
                    v += dg[j][k];
                }
                if i == j {
                    v -= dg[k][i];
                }
                out[k][i][j] = 0.5 * v / g[k];
            }
        }
    }
    out
}

#[test]
fn christoffel_zero_pattern() {
    let pts = [[0.1, -0.2, 0.05], [-0.3, 0.4, -0.2], [0.0, 0.0, 0.0], [0.5, 0.1, 0.3]];
    for metric in [ChartMetric::Gm, ChartMetric::Gtilde] {
        for y in pts {
            let g = christoffel(metric, y);
            assert!(g[0][1][2].abs() <= 1e-12 && g[0][2][1].abs() <= 1e-12);
            assert!(g[1][0][2].abs() <= 1e-12 && g[1][2][0].abs() <= 1e-12);
            assert!(g[2][0][1].abs() <= 1e-12 && g[2][1][0].abs() <= 1e-12);
        }
    }
}

#[test]
fn christoffel_matches_metric_differences() {
    let pts = [[0.1, -0.2, 0.05], [-0.3, 0.4, -0.2], [0.5, 0.1, 0.3]];
    for metric in [ChartMetric::Gm, ChartMetric::Gtilde] {
        for y in pts {
            let (a, b) = (christoffel(metric, y), christoffel_fd(metric, y));
            for k in 0..3 {
                for i in 0..3 {
                    for j in 0..3 {
                        assert!((a[k][i][j] - b[k][i][j]).abs() <= 1e-7, "{metric:?} Γ[{k}][{i}][{j}] at {y:?}");
                        assert_eq!(a[k][i][j], a[k][j][i]);
                    }
                }
            }
        }
    }
}

#[test]
fn gm_christoffel_hand_values_at_origin() {
    let g = christoffel(ChartMetric::Gm, [0.0, 0.0, 0.0]);
    // ∂a/∂ξ3 = 0 on ξ3 = 0
    assert!(g[0][0][2].abs() <= 1e-15);
    // Γ¹₃₃ = −(b²/a ∂a/∂ξ1 + b ∂b/∂ξ1); at ζ = 0: a = 2, b = 1, ∂a/∂ξ1 = 4, ∂b/∂ξ1 = 0
    let e = 1e-6;
    let (ap, bp) = pullback_factors(Complex64::new(e, 0.0), 0.0);
    let (am, bm) = pullback_factors(Complex64::new(-e, 0.0), 0.0);
    let (a, b) = pullback_factors(Complex64::new(0.0, 0.0), 0.0);
    let (da, db) = ((ap - am) / (2.0 * e), (bp - bm) / (2.0 * e));
    assert!((a - 2.0).abs() < 1e-15 && (b - 1.0).abs() < 1e-15 && (da - 4.0).abs() < 1e-6 && db.abs() < 1e-9);
    let hand = -(b * b / a * da + b * db);
    assert!((g[0][2][2] - hand).abs() <= 1e-8, "{} vs {hand}", g[0][2][2]);
    assert!((g[0][2][2] + 2.0).abs() <= 1e-12);
}

proptest! {
    #[test]
    fn christoffel_zero_pattern_holds_everywhere(x in -0.6f64..0.6, y in -0.6f64..0.6, h in -0.5f64..0.5) {
        for metric in [ChartMetric::Gm, ChartMetric::Gtilde] {
            let g = christoffel(metric, [x, y, h]);
            prop_assert!(g[0][1][2].abs() <= 1e-12 && g[1][0][2].abs() <= 1e-12 && g[2][0][1].abs() <= 1e-12);
        }
    }

    #[test]
    fn routes_agree_on_conformal_graphs(c0 in -0.3f64..0.3, c1 in -0.5f64..0.5, c2 in -0.5f64..0.5, u in -0.5f64..0.5, v in -0.5f64..0.5) {
        let map = move |a: f64, b: f64| Ok([a, b, c0 + c1 * a * b + c2 * (a * a - b * b)]);
        let h = 1e-3;
        let e = parametric_mean_curvature(&map, AmbientChart::Conformal, &[(u, v)], h, CurvatureRoute::EuclideanDirect).unwrap();
        let p = parametric_mean_curvature(&map, AmbientChart::Conformal, &[(u, v)], h, CurvatureRoute::PullbackGtilde).unwrap();
        let (e, p) = (e[0].as_ref().unwrap(), p[0].as_ref().unwrap());
        prop_assert!((e.mean - p.mean).abs() <= 1e-5 * (1.0 + p.mean.abs()), "{} vs {}", e.mean, p.mean);
        for k in 0..3 {
            prop_assert!((e.normal[k] - p.normal[k]).abs() <= 1e-5);
        }
    }

    #[test]
    fn routes_agree_in_the_bridge_chart(c0 in -0.2f64..0.2, c1 in -0.5f64..0.5, s in 0.0f64..1.5, t in 1.7f64..4.5) {
        // half-plane chart at z = 1; samples in polar (σ, θ)-like coordinates
        let map = move |a: f64, b: f64| {
            let zeta = Complex64::from_polar(0.05 * a.cosh(), b);
            Ok([zeta.re, zeta.im, c0 * a + c1 * zeta.re * zeta.im])
        };
        let n = 9;
        let chart = AmbientChart::HalfPlane { m: n, n };
        let e = parametric_mean_curvature(&map, chart, &[(s, t)], 1e-4, CurvatureRoute::EuclideanDirect).unwrap();
        let p = parametric_mean_curvature(&map, chart, &[(s, t)], 1e-4, CurvatureRoute::PullbackGm).unwrap();
        let (e, p) = (e[0].as_ref().unwrap(), p[0].as_ref().unwrap());
        prop_assert!((e.mean - p.mean).abs() <= 1e-4 * (1.0 + p.mean.abs()), "{} vs {}", e.mean, p.mean);
    }
}

// ---------------------------------------------------------------------------
// Approximate surface

#[test]
fn bridge_second_fundamental_form_tends_to_the_catenoid() {
    // h/ε → dθ² − dσ² at fixed (σ, θ), entrywise within 10 ε cosh σ.
    for n in [8usize, 12, 16] {
        let atlas = SurfaceAtlas::new(n, Genus::Zero, default_res()).unwrap();
        let eps = atlas.params().eps;
        for s in [0.0, 0.5, 1.0] {
            for th in [1.8, 2.5, PI] {
                let f = atlas.base.bridge_node(Jet::var_u(s), Jet::var_v(th)).unwrap().forms(Jet::constant(0.0)).unwrap();
                let tol = 10.0 * eps * f64::cosh(s);
                assert!((f.h[0][0] / eps + 1.0).abs() <= tol, "n={n} σ={s}: {:?}", f.h);
                assert!((f.h[0][1] / eps).abs() <= tol);
                assert!((f.h[1][1] / eps - 1.0).abs() <= tol);
            }
        }
    }
}

#[test]
fn overlapping_charts_agree() {
    // The same physical point seen from the bridge (or neck) chart and from the disk chart.
    for genus in [Genus::Zero, Genus::One] {
        let atlas = SurfaceAtlas::new(12, genus, default_res()).unwrap();
        let p = *atlas.params();
        let [blo, bhi] = atlas.layout().bridge_band;
        for k in 0..=6 {
            let rho = blo + (bhi - blo) * k as f64 / 6.0;
            let sigma = (rho / p.eps).acosh();
            for th in [1.9, 2.6] {
                let hb = atlas.base.bridge_node(Jet::var_u(sigma), Jet::var_v(th)).unwrap().forms(Jet::constant(0.0)).unwrap();
                let zeta = Complex64::from_polar(0.5 * rho, th);
                let z = (1.0 + zeta) / (1.0 - zeta);
                let hd = atlas
                    .base
                    .disk_node(CJet::from_parts(Jet::var_u(z.re), Jet::var_v(z.im)))
                    .unwrap()
                    .forms(Jet::constant(0.0))
                    .unwrap();
                assert!((hb.mean - hd.mean).abs() <= 1e-8 * (1.0 + hd.mean.abs()), "{} vs {}", hb.mean, hd.mean);
            }
        }
        if let (Some(et), Some([nlo, nhi])) = (p.eps_tilde, atlas.layout().neck_band) {
            for k in 0..=6 {
                let r = nlo + (nhi - nlo) * k as f64 / 6.0;
                let s = (r / et).acosh();
                let hn = atlas.base.neck_node(Jet::var_u(s), Jet::var_v(0.1)).unwrap().forms(Jet::constant(0.0)).unwrap();
                let z = Complex64::from_polar(r, 0.1);
                let hd = atlas
                    .base
                    .disk_node(CJet::from_parts(Jet::var_u(z.re), Jet::var_v(z.im)))
                    .unwrap()
                    .forms(Jet::constant(0.0))
                    .unwrap();
                assert!((hn.mean - hd.mean).abs() <= 1e-7 * (1.0 + hd.mean.abs()), "{} vs {}", hn.mean, hd.mean);
            }
        }
    }
}

#[test]
fn bridge_estimate_is_uniform_in_n() {
    let r = validate_region_estimate(EstimateRegion::Bridge, Genus::Zero, &[8, 12, 16], default_res()).unwrap();
    assert_eq!(r.rows.len(), 3);
    assert!(r.spread < 2.0, "{r:?}");
    assert!(r.rows.iter().all(|row| row.samples > 0 && row.value.is_finite()));
}

#[test]
fn neck_estimate_slope() {
    let r = validate_region_estimate(EstimateRegion::Neck, Genus::One, &[12, 16, 20, 24], default_res()).unwrap();
    let slope = r.fitted_slope.unwrap();
    assert!(slope >= 0.9, "{slope}");
    assert!(validate_region_estimate(EstimateRegion::Neck, Genus::Zero, &[12], default_res()).is_err());
}

#[test]
fn graph_estimate_is_bounded_for_genus_one() {
    let r = validate_region_estimate(EstimateRegion::Graph, Genus::One, &[8, 12, 16], default_res()).unwrap();
    assert!(r.spread < 2.0, "{r:?}");
    assert!(r.rows.iter().all(|row| row.value < 10.0));
}

#[test]
fn linearization_matches_principal_parts() {
    let ts = [1e-2, 1e-3];
    let atlas = SurfaceAtlas::new(16, Genus::One, default_res()).unwrap();
    for region in [RegionKind::NeckCatenoid, RegionKind::BridgeCatenoid, RegionKind::Graph] {
        let r = linearization_consistency(&atlas, region, &ts).unwrap();
        assert!(r.samples > 0);
        assert!(r.relative_defects.iter().all(|d| *d < 0.1), "{region:?}: {:?}", r.relative_defects);
    }
    assert!(linearization_consistency(&atlas, RegionKind::NeckGluing, &ts).is_err());
    let g0 = SurfaceAtlas::new(16, Genus::Zero, default_res()).unwrap();
    assert!(linearization_consistency(&g0, RegionKind::NeckCatenoid, &ts).is_err());
}

#[test]
fn graph_linearization_defect_decays_with_n() {
    let d: Vec<f64> = [8usize, 12, 16]
        .iter()
        .map(|&n| {
            let atlas = SurfaceAtlas::new(n, Genus::Zero, default_res()).unwrap();
            linearization_consistency(&atlas, RegionKind::Graph, &[1e-3]).unwrap().relative_defects[0]
        })
        .collect();
    assert!(d[0] > d[1] && d[1] > d[2], "{d:?}");
}
