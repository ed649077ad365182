//! Named validation checks, grouped into suites.

use crate::config::Suite;
use fbms_core::ball_geometry::{calx_jet, cap_mean_curvature};
use fbms_core::curvature_validator::{validate_region_estimate, EstimateRegion, FundamentalForms};
use fbms_core::global_solver::{initial_residual, solve_corrector, SolveMode, SolverOptions};
use fbms_core::graph_operator::{linearized_graph_operator, DiskField};
use fbms_core::green_functions::{expansion_constant_c, green_gn, green_gn_tilde, GreenSeries};
use fbms_core::jet::{CJet, Jet};
use fbms_core::linear_analysis::{
    jacobi_kernel_check, jacobi_mode_solve, robin_chi, solve_robin_disk, solve_robin_radial, WeightChoice,
    WeightedNormSpec,
};
use fbms_core::matching_solver::{least_squares_line, solve_matching, verify_matched_expansion, ExpansionRegion, Genus};
use fbms_core::surface_builder::{
    build_mesh, expected_topology, PerturbationField, Resolution, SurfaceAtlas,
};
use fbms_core::Result;
use num_complex::Complex64;
use serde::Serialize;
use std::sync::Arc;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Cmp {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "==")]
    Eq,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub suite: Suite,
    pub value: f64,
    pub threshold: f64,
    pub cmp: Cmp,
    pub pass: bool,
}

impl Check {
    pub fn new(suite: Suite, name: impl Into<String>, value: f64, cmp: Cmp, threshold: f64) -> Self {
        let pass = match cmp {
            Cmp::Le => value <= threshold,
            Cmp::Lt => value < threshold,
            Cmp::Ge => value >= threshold,
            Cmp::Eq => value == threshold,
        };
        Check { name: name.into(), suite, value, threshold, cmp, pass }
    }
}

/// Inputs shared by the suites.
#[derive(Clone, Debug)]
pub struct SuiteInputs {
    pub ns: Vec<usize>,
    pub resolution: Resolution,
    pub perturb_cutoff: f64,
    pub solver: SolverOptions,
}

pub fn run_suite(suite: Suite, inp: &SuiteInputs) -> Result<Vec<Check>> {
    match suite {
        Suite::Identities => identities(),
        Suite::Green => green_matching(),
        Suite::Construction => construction(&inp.ns, inp.resolution, inp.perturb_cutoff),
        Suite::Estimates => estimates(inp.resolution),
        Suite::Linear => linear(),
        Suite::Corrector => corrector(inp.resolution, &inp.solver),
    }
}

fn sech2(s: f64) -> f64 {
    1.0 / s.cosh().powi(2)
}

/// One-sided fourth-order derivative at `x` from samples at `x − kh`.
fn left_derivative(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (25.0 * f(x) - 48.0 * f(x - h) + 36.0 * f(x - 2.0 * h) - 16.0 * f(x - 3.0 * h) + 3.0 * f(x - 4.0 * h)) / (12.0 * h)
}

pub fn identities() -> Result<Vec<Check>> {
    let s = Suite::Identities;
    let k = jacobi_kernel_check(-0.5)?;
    let mut out = vec![
        Check::new(s, "jacobi_kernel.sigma_tanh_minus_one", k.residual_sigma_tanh, Cmp::Le, 1e-10),
        Check::new(s, "jacobi_kernel.tanh", k.residual_tanh, Cmp::Le, 1e-10),
    ];

    let n = 9;
    let mut robin = 0.0f64;
    for phi in [0.3, 1.1, 2.9] {
        let g = |r: f64| green_gn_tilde(Complex64::from_polar(r, phi), n).unwrap_or(f64::NAN);
        let dr = left_derivative(g, 1.0, 1e-3);
        robin = robin.max((n as f64 * dr - g(1.0)).abs());
    }
    out.push(Check::new(s, "green_tilde.robin_at_boundary", robin, Cmp::Le, 1e-8));

    let mut cap = 0.0f64;
    for c in [-0.7, -0.1, 0.0, 0.4, 0.9] {
        for z in [Complex64::new(0.0, 0.0), Complex64::new(0.3, -0.4), Complex64::new(-0.6, 0.5)] {
            let zj = CJet::from_parts(Jet::var_u(z.re), Jet::var_v(z.im));
            let f = FundamentalForms::from_embedding(&calx_jet(&zj, Jet::constant(c)))?;
            cap = cap.max((f.mean - 2.0 * c.sinh()).abs()).max((cap_mean_curvature(c) - 2.0 * c.sinh()).abs());
        }
    }
    out.push(Check::new(s, "cap_leaf.mean_curvature_two_sinh", cap, Cmp::Le, 1e-10));

    // x₁/B is a Jacobi field of the flat disk; the discrete operator kills it at second order.
    let coord = |nr: usize| -> Result<f64> {
        let f = DiskField::from_fn(nr, 16, 1, |x, y| x / (0.5 * (1.0 + x * x + y * y)))?;
        Ok(linearized_graph_operator(&f).sup_norm())
    };
    let (a, b) = (coord(20)?, coord(40)?);
    out.push(Check::new(s, "graph_operator.coordinate_field_residual", b, Cmp::Le, 5e-2));
    out.push(Check::new(s, "graph_operator.coordinate_field_order", a / b, Cmp::Ge, 3.5));
    Ok(out)
}

/// `c(n)` recovered from the small-`t` behaviour of `G_n((1 − t)ⁿ) + n/2 + log t`.
pub fn extrapolated_c(n: usize) -> Result<f64> {
    let nf = n as f64;
    let series = GreenSeries::new(n)?;
    let mut rows = vec![];
    let mut rhs = vec![];
    for i in 0..14 {
        let t = 1e-4 * 1.5f64.powi(i);
        let w = Complex64::new((1.0 - t).powi(n as i32), 0.0);
        rhs.push(green_gn(w, &series)?.value + nf / 2.0 + t.ln());
        let s = nf * t;
        rows.push([1.0, s * s.ln(), s, s * s * s.ln(), s * s]);
    }
    let mut a = [[0.0f64; 5]; 5];
    let mut b = [0.0f64; 5];
    for (r, y) in rows.iter().zip(&rhs) {
        for i in 0..5 {
            b[i] += r[i] * y;
            for j in 0..5 {
                a[i][j] += r[i] * r[j];
            }
        }
    }
    for i in 0..5 {
        for k in i + 1..5 {
            let f = a[k][i] / a[i][i];
            for j in i..5 {
                a[k][j] -= f * a[i][j];
            }
            b[k] -= f * b[i];
        }
    }
    let mut x = [0.0f64; 5];
    for i in (0..5).rev() {
        let s: f64 = b[i] - (i + 1..5).map(|j| a[i][j] * x[j]).sum::<f64>();
        x[i] = s / a[i][i];
    }
    Ok(x[0])
}

pub fn green_matching() -> Result<Vec<Check>> {
    let s = Suite::Green;
    let c10 = (extrapolated_c(10)? - expansion_constant_c(10)?).abs();
    let mut out = vec![Check::new(s, "expansion_constant.c10_limit", c10, Cmp::Le, 1e-6)];

    let mut balance = 0.0f64;
    for n in 8..=32 {
        for g in [Genus::Zero, Genus::One] {
            let r = solve_matching(n, g)?.balance_residuals();
            balance = balance.max(r[0]).max(r[1]);
        }
    }
    out.push(Check::new(s, "matching.balance_residual_n8_32", balance, Cmp::Le, 1e-10));

    let mut bridge = f64::INFINITY;
    let mut neck = f64::INFINITY;
    for n in [8, 12, 16] {
        for g in [Genus::Zero, Genus::One] {
            let p = solve_matching(n, g)?;
            bridge = bridge.min(verify_matched_expansion(&p, ExpansionRegion::RootM)?.slope);
            if g == Genus::One {
                neck = neck.min(verify_matched_expansion(&p, ExpansionRegion::Puncture)?.slope);
            }
        }
    }
    out.push(Check::new(s, "matching.bridge_expansion_slope", bridge, Cmp::Ge, 0.9));
    out.push(Check::new(s, "matching.neck_expansion_slope", neck, Cmp::Ge, 1.9));
    Ok(out)
}

/// Bump that is flat inside `r < 0.6` and equal to `a r²` past `r = 0.8`; it breaks
/// the boundary condition without touching the catenoidal charts.
fn boundary_bump(atlas: &SurfaceAtlas, a: f64) -> PerturbationField {
    let mut w = PerturbationField::from_fn(atlas, |z| {
        let r = z.norm();
        let t = ((r - 0.6) / 0.2).clamp(0.0, 1.0);
        a * r * r * t * t * (3.0 - 2.0 * t)
    });
    w.bridge.iter_mut().for_each(|v| *v = 0.0);
    w
}

pub fn construction(ns: &[usize], resolution: Resolution, perturb: f64) -> Result<Vec<Check>> {
    let s = Suite::Construction;
    let mut out = vec![];
    let mesh_for = |atlas: &SurfaceAtlas| {
        let w = (perturb > 0.0).then(|| boundary_bump(atlas, perturb));
        build_mesh(atlas, w.as_ref())
    };
    for &n in ns {
        for g in [Genus::Zero, Genus::One] {
            let atlas = SurfaceAtlas::new(n, g, resolution)?;
            let mesh = mesh_for(&atlas)?;
            let t = mesh.topology();
            let (chi, loops) = expected_topology(n, g);
            let tag = format!("construction.n{n}.genus{}", g.as_int());
            out.push(Check::new(s, format!("{tag}.boundary_loops"), t.boundary_loops as f64, Cmp::Eq, loops as f64));
            out.push(Check::new(s, format!("{tag}.euler_characteristic"), t.euler_characteristic as f64, Cmp::Eq, chi as f64));
            out.push(Check::new(s, format!("{tag}.orthogonality_defect"), mesh.orthogonality_defect(), Cmp::Le, 5e-3));
            out.push(Check::new(s, format!("{tag}.symmetry_defect"), mesh.symmetry_defect(&atlas.symmetry), Cmp::Le, 1e-10));
        }
    }
    if let Some(&n) = ns.first() {
        let d = |k: usize| -> Result<f64> {
            let atlas = SurfaceAtlas::new(n, Genus::Zero, resolution.refined(k))?;
            Ok(mesh_for(&atlas)?.orthogonality_defect())
        };
        let ratio = d(2)? / d(1)?;
        out.push(Check::new(s, format!("construction.n{n}.genus0.orthogonality_refinement_ratio"), ratio, Cmp::Le, 0.5));
    }
    Ok(out)
}

pub fn estimates(resolution: Resolution) -> Result<Vec<Check>> {
    let s = Suite::Estimates;
    let bridge = validate_region_estimate(EstimateRegion::Bridge, Genus::Zero, &[8, 12, 16], resolution)?;
    let neck = validate_region_estimate(EstimateRegion::Neck, Genus::One, &[12, 16, 20, 24], resolution)?;
    let graph = validate_region_estimate(EstimateRegion::Graph, Genus::One, &[8, 12, 16], resolution)?;
    let graph_max = graph.rows.iter().map(|r| r.value).fold(0.0, f64::max);
    Ok(vec![
        Check::new(s, "estimate.bridge_spread", bridge.spread, Cmp::Lt, 2.0),
        Check::new(s, "estimate.neck_slope", neck.fitted_slope.unwrap_or(f64::NAN), Cmp::Ge, 0.9),
        Check::new(s, "estimate.graph_spread", graph.spread, Cmp::Lt, 2.0),
        Check::new(s, "estimate.graph_max", graph_max, Cmp::Le, 10.0),
    ])
}

pub fn linear() -> Result<Vec<Check>> {
    let s = Suite::Linear;
    let spec = WeightedNormSpec::new(0.1, 0.3, WeightChoice::Full)?;

    // W = r² + (2n − 1) + (r² + b r⁴) cos 2φ satisfies ∂_r W = W/n at r = 1.
    let n = 5;
    let nf = n as f64;
    let b = (1.0 / nf - 2.0) / (4.0 - 1.0 / nf);
    let exact = |x: f64, y: f64| {
        let r2 = x * x + y * y;
        let c2 = if r2 > 0.0 { (x * x - y * y) / r2 } else { 0.0 };
        r2 + (2.0 * nf - 1.0) + (r2 + b * r2 * r2) * c2
    };
    let err = |nr: usize| -> Result<f64> {
        let f = DiskField::from_fn(nr, 16, 1, |x, y| 4.0 + 12.0 * b * (x * x - y * y))?;
        let d = solve_robin_disk(&f, n, &spec)?;
        let np = f.nphi();
        let vals = d.regular.values();
        Ok((0..vals.len()).fold(0.0f64, |m, k| {
            let z = d.regular.node(k / np, k % np);
            let w = vals[k] + nf * d.c0_star + d.c1_star.unwrap_or(0.0) * robin_chi(z);
            m.max((w - exact(z.re, z.im)).abs())
        }))
    };
    let (e1, e2) = (err(20)?, err(40)?);

    let c0 = solve_robin_radial(&|_| 1.0, 2)?.c0_star;

    let jm = jacobi_mode_solve(Arc::new(sech2), 0, -0.9)?;
    let jacobi = [0.0, 0.3, 1.0, 2.5, 7.0]
        .iter()
        .map(|&x: &f64| (jm.eval(x) - 0.5 * x * x.tanh()).abs())
        .fold(0.0, f64::max);

    let mut cs = vec![];
    for n in [4usize, 8, 16, 32] {
        let f = DiskField::from_fn(48, 16, n, move |x, y| 1.0 + Complex64::new(x, y).powu(n as u32).re)?;
        cs.push(solve_robin_disk(&f, n, &spec)?.norm_ratio.unwrap_or(f64::NAN));
    }
    let hi = cs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = cs.iter().cloned().fold(f64::INFINITY, f64::min);

    Ok(vec![
        Check::new(s, "robin.manufactured_error", e2, Cmp::Le, 1e-2),
        Check::new(s, "robin.manufactured_order", e1 / e2, Cmp::Ge, 3.5),
        Check::new(s, "robin.radial_c0_star_n2", (c0 - 0.375).abs(), Cmp::Le, 1e-12),
        Check::new(s, "jacobi.mode_zero_closed_form", jacobi, Cmp::Le, 1e-8),
        Check::new(s, "robin.weighted_constant_spread", hi / lo, Cmp::Lt, 3.0),
    ])
}

pub fn corrector(resolution: Resolution, base: &SolverOptions) -> Result<Vec<Check>> {
    let s = Suite::Corrector;
    let mut out = vec![];
    for g in [Genus::Zero, Genus::One] {
        let tag = format!("corrector.n12.genus{}", g.as_int());
        let atlas = SurfaceAtlas::new(12, g, resolution)?;
        let newton = SolverOptions { mode: SolveMode::Newton, ..*base };
        let (_, r) = solve_corrector(&atlas, &newton)?;
        let best = r.residuals.iter().take(5).cloned().fold(f64::INFINITY, f64::min);
        out.push(Check::new(s, format!("{tag}.newton_reduction"), r.initial_residual / best, Cmp::Ge, 10.0));
        let drift = r.final_orthogonality_defect - r.initial_orthogonality_defect;
        out.push(Check::new(s, format!("{tag}.orthogonality_drift"), drift, Cmp::Le, 1e-6));

        let banach = SolverOptions { mode: SolveMode::Banach, ..*base };
        let (_, r) = solve_corrector(&atlas, &banach)?;
        let ratio = r.contraction.map_or(f64::NAN, |c| c.max_ratio);
        out.push(Check::new(s, format!("{tag}.contraction_factor"), ratio, Cmp::Le, 0.5));

        let mut xs = vec![];
        let mut ys = vec![];
        for n in [8, 12, 16, 24] {
            let a = SurfaceAtlas::new(n, g, resolution)?;
            xs.push(a.params().eps.ln());
            ys.push(initial_residual(&a, base.nu)?.ln());
        }
        let (slope, _) = least_squares_line(&xs, &ys);
        out.push(Check::new(s, format!("corrector.genus{}.residual_eps_slope", g.as_int()), slope, Cmp::Ge, 1.0));
    }
    Ok(out)
}
