use fbms_core::ball_geometry::{eval_a, eval_b, lambda_m};
use fbms_core::jet::{CJet, Jet};
use fbms_core::matching_solver::{matched_green, solve_matching, Genus, MatchingParams};
use fbms_core::surface_builder::*;
use fbms_core::FbmsError;
use num_complex::Complex64;
use proptest::prelude::*;
use std::f64::consts::PI;
use std::sync::OnceLock;

fn default_res() -> Resolution {
    Resolution::new(ResolutionPreset::Default)
}

fn built(genus: Genus) -> &'static BuiltSurface {
    static G0: OnceLock<BuiltSurface> = OnceLock::new();
    static G1: OnceLock<BuiltSurface> = OnceLock::new();
    let cell = if genus == Genus::Zero { &G0 } else { &G1 };
    cell.get_or_init(|| build_surface(12, genus, default_res()).unwrap())
}

fn params(n: usize, genus: Genus) -> MatchingParams {
    solve_matching(n, genus).unwrap()
}

/// Matched Green function over `B`, via the series route of the matching solver.
fn green_over_b(p: &MatchingParams, z: Complex64) -> f64 {
    matched_green(p, z).unwrap() / (0.5 * (1.0 + z.norm_sqr()))
}

#[test]
fn genus0_n12_topology_and_diagnostics() {
    let r = &built(Genus::Zero).report;
    assert_eq!(r.topology.euler_characteristic, -10);
    assert_eq!(r.topology.boundary_loops, 12);
    assert_eq!(r.topology.nonmanifold_edges, 0);
    assert_eq!((r.expected_euler_characteristic, r.expected_boundary_loops), (-10, 12));
    assert!(r.boundary_sphere_defect <= 1e-10, "{}", r.boundary_sphere_defect);
    assert!(r.symmetry_defect <= 1e-10, "{}", r.symmetry_defect);
    assert!(r.height_equivariance_defect <= 1e-10, "{}", r.height_equivariance_defect);
    assert!(r.orthogonality_defect <= 5e-3, "{}", r.orthogonality_defect);
    assert_eq!(r.self_intersections, 0);
}

#[test]
fn genus1_n12_topology_and_diagnostics() {
    let r = &built(Genus::One).report;
    assert_eq!(r.topology.euler_characteristic, -12);
    assert_eq!(r.topology.boundary_loops, 12);
    assert_eq!(r.topology.nonmanifold_edges, 0);
    assert!(r.boundary_sphere_defect <= 1e-10);
    assert!(r.symmetry_defect <= 1e-10);
    assert!(r.height_equivariance_defect <= 1e-10);
    assert!(r.orthogonality_defect <= 5e-3);
    assert_eq!(r.self_intersections, 0);
}

#[test]
fn euler_characteristic_across_n() {
    for (n, g) in [(8, Genus::Zero), (9, Genus::Zero), (8, Genus::One), (10, Genus::One)] {
        let atlas = SurfaceAtlas::new(n, g, Resolution::new(ResolutionPreset::Coarse)).unwrap();
        let t = build_mesh(&atlas, None).unwrap().topology();
        let genus = g.as_int() as i64;
        assert_eq!(t.euler_characteristic, 2 - 2 * genus - n as i64, "n={n} {g:?}");
        assert_eq!(t.boundary_loops, n);
        assert_eq!(expected_topology(n, g), (t.euler_characteristic, n));
    }
}

#[test]
fn orthogonality_converges_under_refinement() {
    let atlas = |k| SurfaceAtlas::new(8, Genus::Zero, default_res().refined(k)).unwrap();
    let d1 = build_mesh(&atlas(1), None).unwrap().orthogonality_defect();
    let d2 = build_mesh(&atlas(2), None).unwrap().orthogonality_defect();
    assert!(d1 <= 5e-3);
    assert!(d2 <= 0.5 * d1, "{d1} -> {d2}");
}

#[test]
fn infeasible_neck_reports_the_inequality() {
    match SurfaceAtlas::new(3, Genus::One, default_res()) {
        Err(FbmsError::Infeasible(msg)) => assert!(msg.contains('≤') && msg.contains("n = 3"), "{msg}"),
        other => panic!("expected infeasible, got {other:?}"),
    }
}

#[test]
fn layout_bands() {
    let p = params(12, Genus::One);
    let l = chart_layout(&p).unwrap();
    let e23 = p.eps.powf(2.0 / 3.0);
    let h = p.eps_tilde.unwrap().sqrt();
    assert!((l.bridge_band[0] - 0.5 * e23).abs() < 1e-15 && (l.bridge_band[1] - 2.0 * e23).abs() < 1e-15);
    let nb = l.neck_band.unwrap();
    assert!((nb[0] - 0.5 * h).abs() < 1e-15 && (nb[1] - 2.0 * h).abs() < 1e-15);
    assert!(l.rho_hole > 2.0 * e23 && l.rho_mesh > l.rho_hole && l.rho_bridge > l.rho_mesh);
    assert!(chart_layout(&params(12, Genus::Zero)).unwrap().neck_band.is_none());
}

// ---------------------------------------------------------------------------
// Cutoffs

#[test]
fn cutoff_plateau_examples() {
    let p = params(12, Genus::One);
    let h = p.eps_tilde.unwrap().sqrt();
    let e23 = p.eps.powf(2.0 / 3.0);
    assert_eq!(cutoff_eval(CutoffProfile::Eta0, 0.25 * h, &p).unwrap(), 1.0);
    assert_eq!(cutoff_eval(CutoffProfile::Eta0, 2.5 * h, &p).unwrap(), 0.0);
    assert_eq!(cutoff_eval(CutoffProfile::EtaBar, 2.0 * e23, &p).unwrap(), 0.0);
    assert_eq!(cutoff_eval(CutoffProfile::EtaBar, p.eps, &p).unwrap(), 1.0);
    assert_eq!(cutoff_eval(CutoffProfile::Kappa0, 1.9 * h, &p).unwrap(), 1.0);
    assert_eq!(cutoff_eval(CutoffProfile::Kappa0, 3.1 * h, &p).unwrap(), 0.0);
    assert_eq!(cutoff_eval(CutoffProfile::KappaBar, 1.9 * e23, &p).unwrap(), 1.0);
    assert_eq!(cutoff_eval(CutoffProfile::KappaBar, 3.1 * e23, &p).unwrap(), 0.0);
    assert_eq!(cutoff_eval(CutoffProfile::Theta, -1.5, &p).unwrap(), 0.0);
    assert_eq!(cutoff_eval(CutoffProfile::Theta, 1.5, &p).unwrap(), 1.0);
    assert!((cutoff_eval(CutoffProfile::Theta, 0.0, &p).unwrap() - 0.5).abs() < 1e-15);
}

#[test]
fn cutoff_errors() {
    let p0 = params(12, Genus::Zero);
    let p1 = params(12, Genus::One);
    assert!(cutoff_eval(CutoffProfile::Eta0, -0.1, &p1).is_err());
    assert!(cutoff_eval(CutoffProfile::EtaBar, f64::NAN, &p1).is_err());
    assert!(cutoff_eval(CutoffProfile::Eta0, 0.1, &p0).is_err());
    assert!(cutoff_eval(CutoffProfile::Xi0, 0.1, &p0).is_err());
    assert!(cutoff_eval(CutoffProfile::EtaBar, 0.1, &p0).is_ok());
}

/// Band edges in `x` where each profile leaves its plateaus.
fn band(profile: CutoffProfile, p: &MatchingParams) -> (f64, f64) {
    let h = p.eps_tilde.unwrap().sqrt();
    let e23 = p.eps.powf(2.0 / 3.0);
    match profile {
        CutoffProfile::Eta0 => (0.5 * h, 2.0 * h),
        CutoffProfile::EtaBar => (0.5 * e23, 2.0 * e23),
        CutoffProfile::Kappa0 => (2.0 * h, 3.0 * h),
        CutoffProfile::KappaBar => (2.0 * e23, 3.0 * e23),
        CutoffProfile::Theta => (-1.0, 1.0),
        _ => unreachable!(),
    }
}

const BANDED: [CutoffProfile; 5] = [
    CutoffProfile::Eta0,
    CutoffProfile::EtaBar,
    CutoffProfile::Kappa0,
    CutoffProfile::KappaBar,
    CutoffProfile::Theta,
];

#[test]
fn cutoff_derivatives_vanish_at_plateau_edges() {
    let p = params(12, Genus::One);
    for prof in BANDED {
        let (lo, hi) = band(prof, &p);
        let w = hi - lo;
        for x in [lo, hi] {
            let [_, d1, d2] = cutoff_derivs(prof, x, &p).unwrap();
            assert!((d1 * w).abs() <= 1e-8 && (d2 * w * w).abs() <= 1e-8, "{prof:?} at {x}");
        }
        // one-sided differences from inside the band, in the scaled variable
        let ht = 1e-5;
        let f = |t: f64| cutoff_eval(prof, lo + t * w, &p).unwrap();
        assert!(((f(ht) - f(0.0)) / ht).abs() <= 1e-8, "{prof:?}");
        assert!(((f(1.0) - f(1.0 - ht)) / ht).abs() <= 1e-8, "{prof:?}");
    }
}

#[test]
fn cutoff_derivatives_match_differences() {
    let p = params(12, Genus::One);
    let check = |prof: CutoffProfile, x: f64, e: f64, s1: f64| {
        let f = |y: f64| cutoff_eval(prof, y, &p).unwrap();
        let [_, d1, d2] = cutoff_derivs(prof, x, &p).unwrap();
        let fd1 = (f(x + e) - f(x - e)) / (2.0 * e);
        let fd2 = (f(x + e) - 2.0 * f(x) + f(x - e)) / (e * e);
        assert!((d1 - fd1).abs() <= 1e-5 * s1.max(d1.abs()), "{prof:?} d1 at {x}");
        assert!((d2 - fd2).abs() <= 1e-3 * (s1 * s1).max(d2.abs()), "{prof:?} d2 at {x}");
    };
    for prof in BANDED {
        let (lo, hi) = band(prof, &p);
        for k in 1..40 {
            check(prof, lo + (hi - lo) * k as f64 / 40.0, 1e-4 * (hi - lo), 1.0 / (hi - lo));
        }
    }
    // the partition profiles switch over one e-fold, so sample in log x
    for prof in [CutoffProfile::Xi0, CutoffProfile::XiBar] {
        for k in 0..200 {
            let x = 10f64.powf(-14.0 + 14.0 * k as f64 / 200.0);
            check(prof, x, 1e-4 * x, 1.0 / x);
        }
    }
}

proptest! {
    #[test]
    fn cutoffs_are_monotone_and_bounded(a in 0.0f64..1.0, b in 0.0f64..1.0, k in 0usize..5) {
        let p = params(12, Genus::One);
        let prof = BANDED[k];
        let (lo, hi) = band(prof, &p);
        let (x, y) = (lo + (a * 1.4 - 0.2) * (hi - lo), lo + (b * 1.4 - 0.2) * (hi - lo));
        prop_assume!(prof == CutoffProfile::Theta || (x >= 0.0 && y >= 0.0));
        let (fx, fy) = (cutoff_eval(prof, x, &p).unwrap(), cutoff_eval(prof, y, &p).unwrap());
        prop_assert!((0.0..=1.0).contains(&fx));
        let increasing = prof == CutoffProfile::Theta;
        if x <= y {
            let ordered = if increasing { fx <= fy } else { fx >= fy };
            prop_assert!(ordered);
        }
    }

    #[test]
    fn partition_profiles_increase(a in 1e-9f64..1.0, b in 1e-9f64..1.0) {
        let p = params(12, Genus::One);
        for prof in [CutoffProfile::Xi0, CutoffProfile::XiBar] {
            let (x, y) = (a.min(b), a.max(b));
            let (fx, fy) = (cutoff_eval(prof, x, &p).unwrap(), cutoff_eval(prof, y, &p).unwrap());
            prop_assert!(fx <= fy && (0.0..=1.0).contains(&fx));
        }
    }
}

// ---------------------------------------------------------------------------
// Profiles

#[test]
fn bridge_profile_plateaus() {
    for g in [Genus::Zero, Genus::One] {
        let p = params(12, g);
        for theta in [PI / 2.0, 2.3, PI] {
            let rho = 1.3 * p.eps;
            let cat = -0.5 * p.eps * (rho / p.eps).acosh();
            assert_eq!(bridge_profile(rho, theta, 0, &p).unwrap(), cat);
            assert_eq!(bridge_profile(p.eps, theta, 0, &p).unwrap(), 0.0);

            let rho = 4.0 * p.eps.powf(2.0 / 3.0);
            let z = lambda_m(Complex64::from_polar(0.5 * rho, theta), 0, p.n).unwrap();
            let expected = 0.5 * green_over_b(&p, z);
            let got = bridge_profile(rho, theta, 0, &p).unwrap();
            assert!((got - expected).abs() <= 1e-10 * expected.abs().max(p.eps), "{got} vs {expected}");
        }
    }
}

#[test]
fn bridge_profile_rejects_points_off_chart() {
    let p = params(12, Genus::Zero);
    assert!(matches!(bridge_profile(0.5 * p.eps, PI, 0, &p), Err(FbmsError::OutOfChart(_))));
    assert!(bridge_profile(2.0 * p.eps, 0.2, 0, &p).is_err());
    assert!(bridge_profile(f64::NAN, PI, 0, &p).is_err());
}

#[test]
fn bridge_mid_zone_mismatch_scales_like_eps_rho() {
    // |½𝒢̄ − G_cat| / (ε^{1−β} ρ) over the blend band stays bounded as n grows.
    for g in [Genus::Zero, Genus::One] {
        let mut ratios = Vec::new();
        for n in [8usize, 12, 16] {
            let p = params(n, g);
            let e23 = p.eps.powf(2.0 / 3.0);
            let mut worst: f64 = 0.0;
            for k in 0..=16 {
                let rho = e23 * (0.5 + 1.5 * k as f64 / 16.0);
                for theta in [1.6, 2.4, PI] {
                    let z = lambda_m(Complex64::from_polar(0.5 * rho, theta), 0, n).unwrap();
                    let graph = 0.5 * green_over_b(&p, z);
                    let cat = -0.5 * p.eps * (rho / p.eps).acosh();
                    worst = worst.max((graph - cat).abs() / (p.eps.powf(0.9) * rho));
                }
            }
            ratios.push(worst);
        }
        assert!(ratios.iter().all(|&r| r < 3.0), "{g:?}: {ratios:?}");
    }
}

#[test]
fn neck_profile_plateaus_and_errors() {
    let p = params(12, Genus::One);
    let et = p.eps_tilde.unwrap();
    let r = 3.0 * et;
    assert_eq!(neck_profile(r, 0.3, &p).unwrap(), -2.0 * et * (r / et).acosh());
    let r = 2.5 * et.sqrt();
    let z = Complex64::from_polar(r, 0.3);
    let got = neck_profile(r, 0.3, &p).unwrap();
    let expected = green_over_b(&p, z);
    assert!((got - expected).abs() <= 1e-10 * expected.abs(), "{got} vs {expected}");
    assert!(matches!(neck_profile(0.5 * et, 0.0, &p), Err(FbmsError::OutOfChart(_))));
    assert!(neck_profile(0.1, 0.0, &params(12, Genus::Zero)).is_err());
}

#[test]
fn neck_matching_order_ladder() {
    // The Green function and twice the catenoid graph agree on the blend band
    // up to the r² term of 1/B and the ε̃³/r² term of arccosh, both O(ε̃²).
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for n in [8usize, 12, 16] {
        let p = params(n, Genus::One);
        let et = p.eps_tilde.unwrap();
        let mut worst: f64 = 0.0;
        for k in 0..=16 {
            let r = et.sqrt() * (0.5 + 1.5 * k as f64 / 16.0);
            let g = green_over_b(&p, Complex64::from_polar(r, 0.1));
            worst = worst.max((g + 2.0 * et * (r / et).acosh()).abs());
        }
        xs.push(et.ln());
        ys.push(worst.ln());
    }
    let slope = (ys[2] - ys[0]) / (xs[2] - xs[0]);
    assert!((1.7..=2.3).contains(&slope), "slope {slope}");
}

#[test]
fn neck_profile_has_only_multiples_of_n_harmonics() {
    let p = params(12, Genus::One);
    let n = p.n;
    let et = p.eps_tilde.unwrap();
    for r in [3.0 * et, et.sqrt(), 0.3] {
        let m = 4 * n;
        let vals: Vec<f64> = (0..m).map(|k| neck_profile(r, 2.0 * PI * k as f64 / m as f64, &p).unwrap()).collect();
        let scale = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        for mode in 1..m / 2 {
            let c: Complex64 = vals
                .iter()
                .enumerate()
                .map(|(k, v)| v * Complex64::from_polar(1.0, -2.0 * PI * (mode * k) as f64 / m as f64))
                .sum::<Complex64>()
                / m as f64;
            if mode % n != 0 {
                assert!(c.norm() <= 1e-12 * scale, "r={r} mode {mode}: {}", c.norm());
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Atlas and perturbations

#[test]
fn regions_cover_the_fundamental_sector() {
    for g in [Genus::Zero, Genus::One] {
        let atlas = SurfaceAtlas::new(12, g, default_res()).unwrap();
        let p = *atlas.params();
        let l = *atlas.layout();
        let sector = PI / p.n as f64;
        let r_min = p.eps_tilde.map_or(1e-3, |e| 1.01 * e);
        for a in 0..=200 {
            let r = r_min * (1.0 / r_min).powf(a as f64 / 200.0);
            for b in 0..=20 {
                let z = Complex64::from_polar(r.min(1.0), sector * b as f64 / 20.0);
                let rho = atlas.base.bridge_radius(z).unwrap();
                if rho <= p.eps {
                    continue;
                }
                let kinds = atlas.base.regions_at(z).unwrap();
                assert!(!kinds.is_empty(), "z = {z}");
                let in_band = |x: f64, b: [f64; 2]| (x - b[0]).abs() < 1e-12 || (x - b[1]).abs() < 1e-12;
                let on_edge = in_band(rho, l.bridge_band) || l.neck_band.is_some_and(|nb| in_band(r, nb));
                if !on_edge {
                    assert_eq!(kinds.len(), 1, "z = {z}: {kinds:?}");
                }
            }
        }
        let kinds: Vec<_> = atlas.regions.iter().map(|r| r.kind).collect();
        assert_eq!(kinds.contains(&RegionKind::NeckCatenoid), g == Genus::One);
        assert_eq!(kinds.iter().filter(|k| **k == RegionKind::BridgeCatenoid).count(), 12);
    }
}

#[test]
fn neck_displacement_field_has_half_norm() {
    // ‖Ξ̃‖ in A²(|dz|² + B²dx3²) is ½ + O(ε̃) across the neck blend band.
    for n in [12usize, 16] {
        let atlas = SurfaceAtlas::new(n, Genus::One, default_res()).unwrap();
        let et = atlas.params().eps_tilde.unwrap();
        let [lo, hi] = atlas.layout().neck_band.unwrap();
        for k in 0..=10 {
            let r = lo + (hi - lo) * k as f64 / 10.0;
            let s = (r / et).acosh();
            let g = atlas.base.neck_node(Jet::constant(s), Jet::constant(0.2)).unwrap();
            let z = g.c.v;
            let norm = eval_a(z, g.h.v) * (g.dc.v.norm_sqr() + eval_b(z).powi(2) * g.dh.v.powi(2)).sqrt();
            assert!((norm - 0.5).abs() <= 10.0 * et, "n={n} r={r}: {norm}");
        }
    }
}

#[test]
fn zero_perturbation_is_identity() {
    let b = built(Genus::One);
    let zero = PerturbationField::zeros(&b.atlas);
    assert_eq!(build_mesh(&b.atlas, Some(&zero)).unwrap(), b.mesh);
    let samples = perturb_surface(&b.atlas, &zero).unwrap();
    for s in samples.iter().filter(|s| s.sheet == Sheet::Upper) {
        let g = match s.chart {
            ChartId::Bridge(_) => {
                let nt = b.atlas.bridge.nt;
                b.atlas.bridge_node(s.node / (nt + 1), s.node % (nt + 1)).unwrap()
            }
            _ => {
                let na = b.atlas.radial.na;
                b.atlas.radial_node(s.node / na, s.node % na).unwrap()
            }
        };
        assert_eq!(s.position, g.position(0.0));
        assert_eq!(s.mean_curvature, g.forms(Jet::constant(0.0)).unwrap().mean);
    }
}

fn smooth_field(atlas: &SurfaceAtlas, amp: f64) -> PerturbationField {
    let n = atlas.params().n as i32;
    PerturbationField::from_fn(atlas, |z| amp * (1.0 + 0.5 * z.norm_sqr()) * (1.0 + 0.3 * z.powi(n).re))
}

#[test]
fn perturbed_boundary_stays_on_sphere() {
    for g in [Genus::Zero, Genus::One] {
        let atlas = SurfaceAtlas::new(12, g, default_res()).unwrap();
        let w = smooth_field(&atlas, 1e-4 * atlas.params().eps_tilde.unwrap_or(1.0).min(1.0));
        let w = PerturbationField { bridge: w.bridge.iter().map(|v| v.min(0.5 * atlas.params().eps)).collect(), ..w };
        let mesh = build_mesh(&atlas, Some(&w)).unwrap();
        assert!(mesh.boundary_sphere_defect() <= 1e-10, "{g:?}: {}", mesh.boundary_sphere_defect());
        let moved = mesh.positions.iter().zip(&build_mesh(&atlas, None).unwrap().positions).any(|(a, b)| a != b);
        assert!(moved);
        let samples = perturb_surface(&atlas, &w).unwrap();
        let nt = atlas.bridge.nt;
        let nr = atlas.radial.nr;
        let na = atlas.radial.na;
        let boundary = samples.iter().filter(|s| match s.chart {
            ChartId::Bridge(_) => s.node % (nt + 1) == 0,
            _ => s.node / na == nr - 1,
        });
        let mut count = 0;
        for s in boundary {
            let r = s.position.iter().map(|c| c * c).sum::<f64>().sqrt();
            assert!((r - 1.0).abs() <= 1e-10, "{s:?}");
            count += 1;
        }
        assert!(count > 0);
    }
}

#[test]
fn smallness_violation_is_rejected() {
    let atlas = SurfaceAtlas::new(12, Genus::Zero, default_res()).unwrap();
    let mut w = PerturbationField::zeros(&atlas);
    w.bridge[0] = 1.0;
    match perturb_surface(&atlas, &w) {
        Err(FbmsError::InvalidField(msg)) => assert!(msg.contains("window"), "{msg}"),
        other => panic!("{other:?}"),
    }
    let mut w = PerturbationField::zeros(&atlas);
    w.radial[5] = 2.0;
    assert!(build_mesh(&atlas, Some(&w)).is_err());
    let mut w = PerturbationField::zeros(&atlas);
    w.radial.pop();
    assert!(perturb_surface(&atlas, &w).is_err());
}

#[test]
fn samples_are_unit_normal_and_inside_the_ball() {
    let b = built(Genus::Zero);
    let w = smooth_field(&b.atlas, 1e-5);
    for s in perturb_surface(&b.atlas, &w).unwrap() {
        let r = s.position.iter().map(|c| c * c).sum::<f64>().sqrt();
        let nn = s.normal.iter().map(|c| c * c).sum::<f64>().sqrt();
        assert!(r <= 1.0 + 1e-12);
        assert!((nn - 1.0).abs() <= 1e-12);
        assert!(s.mean_curvature.is_finite());
    }
}

#[test]
fn lower_sheet_mirrors_upper_sheet() {
    // Flipping the embedding jets gives the lower sheet with its own parameter
    // orientation; its normal is −Fν and its mean curvature −H.
    let b = built(Genus::One);
    let w = smooth_field(&b.atlas, 1e-7);
    let samples = perturb_surface(&b.atlas, &w).unwrap();
    let half = samples.len() / 2;
    assert_eq!(samples.len(), 2 * half);
    let na = b.atlas.radial.na;
    for (u, l) in samples[..half].iter().zip(&samples[half..]) {
        assert_eq!((u.sheet, l.sheet), (Sheet::Upper, Sheet::Lower));
        assert_eq!((u.chart, u.node, u.region), (l.chart, l.node, l.region));
        assert!((u.mean_curvature + l.mean_curvature).abs() <= 1e-10 * u.mean_curvature.abs().max(1.0));
        if u.chart == ChartId::Disk && u.node % 7 == 0 {
            let g = b.atlas.radial_node(u.node / na, u.node % na).unwrap();
            let wj = fbms_core::grid::fd_jet(&b.atlas.radial, &w.radial, u.node / na, u.node % na);
            let mut e = g.embed(wj);
            e[2] = -e[2];
            let f = fbms_core::curvature_validator::FundamentalForms::from_embedding(&e).unwrap();
            assert!((f.mean - l.mean_curvature).abs() <= 1e-9 * f.mean.abs().max(1.0));
            for k in 0..3 {
                assert!((f.normal[k] - l.normal[k]).abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn sample_regions_follow_the_bands() {
    let b = built(Genus::One);
    let samples = perturb_surface(&b.atlas, &PerturbationField::zeros(&b.atlas)).unwrap();
    for kind in [RegionKind::NeckCatenoid, RegionKind::NeckGluing, RegionKind::BridgeCatenoid, RegionKind::BridgeGluing, RegionKind::Graph] {
        assert!(samples.iter().any(|s| s.region == kind), "{kind:?} missing");
    }
    let l = b.atlas.layout();
    for s in &samples {
        let z = Complex64::new(s.z[0], s.z[1]);
        if s.region == RegionKind::NeckCatenoid {
            assert!(z.norm() <= l.neck_band.unwrap()[0] + 1e-15);
        }
    }
}

#[test]
fn symmetry_group_acts_by_isometries() {
    let g = SymmetryGroup::new(7);
    let els = g.elements();
    assert_eq!(els.len(), 28);
    let p = [0.3, -0.2, 0.4];
    let r = |q: [f64; 3]| q.iter().map(|c| c * c).sum::<f64>();
    for e in els {
        let q = g.apply(e, p);
        assert!((r(q) - r(p)).abs() < 1e-15);
    }
    let q = g.apply((1, false, false), [1.0, 0.0, 0.0]);
    assert!((q[0] - (2.0 * PI / 7.0).cos()).abs() < 1e-15 && (q[1] - (2.0 * PI / 7.0).sin()).abs() < 1e-15);
}

#[test]
fn height_is_equivariant_at_nodes() {
    let atlas = &built(Genus::Zero).atlas;
    let omega = Complex64::from_polar(1.0, 2.0 * PI / 12.0);
    for z in [Complex64::new(0.4, 0.05), Complex64::new(0.8, 0.2)] {
        let h = atlas.base.height(&CJet::constant(z)).unwrap().v;
        for g in [z * omega, z.conj(), z.conj() * omega.powi(5)] {
            assert!((atlas.base.height(&CJet::constant(g)).unwrap().v - h).abs() <= 1e-12);
        }
    }
}

#[test]
fn obj_output_is_byte_stable() {
    let b = built(Genus::Zero);
    let write = || {
        let mesh = build_mesh(&b.atlas, None).unwrap();
        let mut out = Vec::new();
        mesh.write_obj(&mut out, "test").unwrap();
        out
    };
    let a = write();
    assert_eq!(a, write());
    let text = String::from_utf8(a).unwrap();
    for name in ["o gr", "o glum", "o catm"] {
        assert!(text.lines().any(|l| l == name), "{name}");
    }
    assert!(text.lines().any(|l| l.starts_with("vn ")));
}
