//! Corrector solve on the overset grids.
//!
//! The unknown is the normal graph `w` sampled on the polar and bridge grids.
//! Every active node carries the equation `γ² H(w) = 0`; polar nodes inside
//! the bridge chart and the outer ring of the bridge grid carry interpolation
//! equations tying the two grids together. Newton's method solves this system
//! directly; the Banach mode iterates the fixed-point map built from the
//! partition-of-unity approximate inverse [`ApproxInverse`].

use crate::ball_geometry::eval_b;
use crate::cutoff::step_down;
use crate::error::{FbmsError, Result};
use crate::graph_operator::DiskField;
use crate::green_functions::{expansion_constant_c, gamma_fn, GammaKind};
use crate::grid::{fd_jet, interp_eval, interp_weights, stencil_weights, GhostMap};
use crate::jet::Jet;
use crate::linear_analysis::{
    jacobi_mode_solve, robin_chi, solve_robin_disk_with, weight_gamma, JacobiModeSolution, JacobiSolution,
    JacobiVariant, RealFn, WeightChoice, WeightedNormSpec,
};
use crate::matching_solver::{Genus, MatchingParams};
use crate::surface_builder::{build_mesh, check_smallness, perturb_surface, NodeGeometry, PerturbationField, Sheet, SurfaceAtlas};
use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

/// Normal graph over the approximate surface, one value per node of each grid.
pub type GlobalField = PerturbationField;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SolveMode {
    #[default]
    Newton,
    Banach,
}

impl std::str::FromStr for SolveMode {
    type Err = FbmsError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "newton" => Ok(SolveMode::Newton),
            "banach" => Ok(SolveMode::Banach),
            _ => Err(FbmsError::InvalidParameter(format!("unknown solve mode '{s}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub mode: SolveMode,
    /// Stop once the weighted residual is at most this.
    pub tol: f64,
    pub max_iter: usize,
    pub nu: f64,
    pub delta: f64,
    pub alpha: f64,
    /// Pairs sampled for the contraction estimate of the Banach map.
    pub contraction_pairs: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            mode: SolveMode::Newton,
            tol: 1e-10,
            max_iter: 8,
            nu: 0.1,
            delta: -0.9,
            alpha: 0.3,
            contraction_pairs: 3,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        WeightedNormSpec::new(self.nu, self.alpha, WeightChoice::Cosh { delta: self.delta })?;
        if !(self.tol >= 0.0) {
            return Err(FbmsError::InvalidParameter(format!("tol = {}", self.tol)));
        }
        Ok(())
    }
}

/// Weight used by the residual norms of a construction.
pub fn residual_weight(genus: Genus) -> WeightChoice {
    match genus {
        Genus::Zero => WeightChoice::Boundary,
        Genus::One => WeightChoice::Full,
    }
}

// ---------------------------------------------------------------------------
// Discretization

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum GridKind {
    Radial,
    Bridge,
}

#[derive(Clone, Debug)]
enum RowKind {
    Active { geo: NodeGeometry, gamma2: f64, scale: f64 },
    /// `w_k − Σ c_l w_l = 0` over global unknown indices.
    Interp(Vec<(usize, f64)>),
}

#[derive(Clone, Debug)]
struct Row {
    grid: GridKind,
    i: usize,
    j: usize,
    /// `γ` at the node, for the weighted norms.
    gamma: f64,
    kind: RowKind,
}

/// Sparse matrix stored by rows, with global unknown indices.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SparseRows {
    pub rows: Vec<Vec<(usize, f64)>>,
}

impl SparseRows {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|r| r.iter().map(|&(k, v)| v * x[k]).sum()).collect()
    }

    /// Sparse LU factorization of the square matrix.
    pub fn factor(&self) -> Result<SparseLu> {
        let n = self.rows.len();
        let trip: Vec<Triplet<usize, usize, f64>> = self
            .rows
            .iter()
            .enumerate()
            .flat_map(|(r, row)| row.iter().map(move |&(c, v)| Triplet::new(r, c, v)))
            .collect();
        let mat = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &trip)
            .map_err(|e| FbmsError::Linear(format!("assembly: {e:?}")))?;
        let lu = mat.sp_lu().map_err(|e| FbmsError::Linear(format!("sparse LU: {e:?}")))?;
        Ok(SparseLu { n, lu })
    }
}

pub struct SparseLu {
    n: usize,
    lu: faer::sparse::linalg::solvers::Lu<usize, f64>,
}

impl SparseLu {
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let mut rhs = faer::Mat::<f64>::from_fn(self.n, 1, |i, _| b[i]);
        self.lu.solve_in_place(&mut rhs);
        let x: Vec<f64> = (0..self.n).map(|i| rhs[(i, 0)]).collect();
        if x.iter().any(|v| !v.is_finite()) {
            return Err(FbmsError::Linear("non-finite solution of the Newton system".into()));
        }
        Ok(x)
    }
}

fn push_merged(row: &mut Vec<(usize, f64)>, k: usize, v: f64) {
    match row.iter_mut().find(|(kk, _)| *kk == k) {
        Some(e) => e.1 += v,
        None => row.push((k, v)),
    }
}

/// Rows, weights and interpolation stencils of the overset system of an atlas.
pub struct Discretization<'a> {
    pub atlas: &'a SurfaceAtlas,
    pub nu: f64,
    rows: Vec<Row>,
    n_radial: usize,
}

impl<'a> Discretization<'a> {
    pub fn new(atlas: &'a SurfaceAtlas, nu: f64) -> Result<Self> {
        let r = &atlas.radial;
        let b = &atlas.bridge;
        let p = *atlas.params();
        let choice = residual_weight(p.genus);
        let n_radial = r.len();
        let radial_rows: Vec<Row> = (0..r.len())
            .into_par_iter()
            .map(|k| -> Result<Row> {
                let (i, j) = (k / r.na, k % r.na);
                let z = r.z(i, j);
                let gamma = weight_gamma(z, p.n, choice);
                let kind = if atlas.is_hole(i, j) {
                    let zeta = (z - 1.0) / (z + 1.0);
                    let (x, y) = b.locate(zeta);
                    RowKind::Interp(interp_weights(b, x, y).into_iter().map(|(l, c)| (n_radial + l, c)).collect())
                } else {
                    let scale = match p.genus {
                        Genus::Zero => 1.0,
                        Genus::One => r.radius(i),
                    };
                    RowKind::Active { geo: atlas.radial_node(i, j)?, gamma2: gamma * gamma, scale }
                };
                Ok(Row { grid: GridKind::Radial, i, j, gamma, kind })
            })
            .collect::<Result<_>>()?;
        let bridge_rows: Vec<Row> = (0..b.len())
            .into_par_iter()
            .map(|k| -> Result<Row> {
                let (i, j) = (k / (b.nt + 1), k % (b.nt + 1));
                let zeta = b.zeta(i, j);
                let z = (1.0 + zeta) / (1.0 - zeta);
                let gamma = weight_gamma(z, p.n, choice);
                let kind = if i == b.ns - 1 {
                    let (x, y) = r.locate(z);
                    RowKind::Interp(interp_weights(r, x, y))
                } else {
                    RowKind::Active {
                        geo: atlas.bridge_node(i, j)?,
                        gamma2: gamma * gamma,
                        scale: p.eps * b.sigma(i).cosh(),
                    }
                };
                Ok(Row { grid: GridKind::Bridge, i, j, gamma, kind })
            })
            .collect::<Result<_>>()?;
        let mut rows = radial_rows;
        rows.extend(bridge_rows);
        Ok(Discretization { atlas, nu, rows, n_radial })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn active_count(&self) -> usize {
        self.rows.iter().filter(|r| matches!(r.kind, RowKind::Active { .. })).count()
    }

    pub fn is_active(&self, k: usize) -> bool {
        matches!(self.rows[k].kind, RowKind::Active { .. })
    }

    /// `γ` at each unknown.
    pub fn gammas(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.gamma).collect()
    }

    /// Disk point of each unknown (bridge nodes through `λ`).
    pub fn node_z(&self, k: usize) -> Complex64 {
        let row = &self.rows[k];
        match row.grid {
            GridKind::Radial => self.atlas.radial.z(row.i, row.j),
            GridKind::Bridge => {
                let zeta = self.atlas.bridge.zeta(row.i, row.j);
                (1.0 + zeta) / (1.0 - zeta)
            }
        }
    }

    pub fn to_vec(&self, w: &GlobalField) -> Vec<f64> {
        let mut v = w.radial.clone();
        v.extend_from_slice(&w.bridge);
        v
    }

    pub fn to_field(&self, v: &[f64]) -> GlobalField {
        PerturbationField { radial: v[..self.n_radial].to_vec(), bridge: v[self.n_radial..].to_vec() }
    }

    fn split<'v>(&self, v: &'v [f64]) -> (&'v [f64], &'v [f64]) {
        v.split_at(self.n_radial)
    }

    fn jet_at(&self, row: &Row, w: &[f64]) -> Jet {
        let (wr, wb) = self.split(w);
        match row.grid {
            GridKind::Radial => fd_jet(&self.atlas.radial, wr, row.i, row.j),
            GridKind::Bridge => fd_jet(&self.atlas.bridge, wb, row.i, row.j),
        }
    }

    /// Residual of every row: `γ² H` at active nodes, interpolation defects elsewhere.
    pub fn residual(&self, w: &[f64]) -> Result<Vec<f64>> {
        self.rows
            .par_iter()
            .enumerate()
            .map(|(k, row)| match &row.kind {
                RowKind::Active { geo, gamma2, .. } => Ok(gamma2 * geo.forms(self.jet_at(row, w))?.mean),
                RowKind::Interp(c) => Ok(w[k] - interp_eval(c, w)),
            })
            .collect()
    }

    /// Jacobian of [`Self::residual`] at `w`, by central differences in the jet components.
    pub fn jacobian(&self, w: &[f64]) -> Result<SparseRows> {
        let rows = self
            .rows
            .par_iter()
            .enumerate()
            .map(|(k, row)| -> Result<Vec<(usize, f64)>> {
                match &row.kind {
                    RowKind::Interp(c) => {
                        let mut out = vec![(k, 1.0)];
                        for &(l, v) in c {
                            push_merged(&mut out, l, -v);
                        }
                        Ok(out)
                    }
                    RowKind::Active { geo, gamma2, scale } => {
                        let j0 = self.jet_at(row, w).to_array();
                        let mut dh = [0.0; 6];
                        for (c, d) in dh.iter_mut().enumerate() {
                            let h = 1e-6 * scale;
                            let mut a = j0;
                            a[c] += h;
                            let hp = geo.forms(Jet::from_array(a))?.mean;
                            a[c] = j0[c] - h;
                            let hm = geo.forms(Jet::from_array(a))?.mean;
                            *d = gamma2 * (hp - hm) / (2.0 * h);
                        }
                        let (g, off): (&dyn GhostMap, usize) = match row.grid {
                            GridKind::Radial => (&self.atlas.radial, 0),
                            GridKind::Bridge => (&self.atlas.bridge, self.n_radial),
                        };
                        let (hu, hv) = g.steps();
                        let st = stencil_weights(hu, hv);
                        let mut out = Vec::with_capacity(9);
                        for di in 0..3 {
                            for dj in 0..3 {
                                let coef: f64 = (0..6).map(|c| dh[c] * st[c][di][dj]).sum();
                                if coef != 0.0 {
                                    let node = g.node(row.i as isize + di as isize - 1, row.j as isize + dj as isize - 1);
                                    push_merged(&mut out, off + node, coef);
                                }
                            }
                        }
                        Ok(out)
                    }
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SparseRows { rows })
    }

    /// `sup γ^{−ν} |f|` over the active rows.
    pub fn weighted_sup(&self, f: &[f64]) -> f64 {
        self.rows
            .iter()
            .zip(f)
            .filter(|(r, _)| matches!(r.kind, RowKind::Active { .. }))
            .fold(0.0f64, |m, (r, v)| m.max(r.gamma.powf(-self.nu) * v.abs()))
    }

    /// `sup γ^{−ν} |w|` over all nodes.
    pub fn field_norm(&self, w: &[f64]) -> f64 {
        self.rows.iter().zip(w).fold(0.0f64, |m, (r, v)| m.max(r.gamma.powf(-self.nu) * v.abs()))
    }

    /// Largest interpolation-row defect.
    pub fn interface_defect(&self, f: &[f64]) -> f64 {
        self.rows
            .iter()
            .zip(f)
            .filter(|(r, _)| matches!(r.kind, RowKind::Interp(_)))
            .fold(0.0f64, |m, (_, v)| m.max(v.abs()))
    }

    /// Discrete Hölder quotient of `γ^{−ν} f` between grid neighbours, scaled by `min(γ)^α`.
    pub fn holder_surrogate(&self, f: &[f64], alpha: f64) -> f64 {
        let r = &self.atlas.radial;
        let b = &self.atlas.bridge;
        let mut best: f64 = 0.0;
        let mut pair = |ka: usize, kb: usize| {
            if !(self.is_active(ka) && self.is_active(kb)) {
                return;
            }
            let (ga, gb) = (self.rows[ka].gamma, self.rows[kb].gamma);
            let d = (self.node_z(ka) - self.node_z(kb)).norm();
            if d > 0.0 {
                let q = (ga.powf(-self.nu) * f[ka] - gb.powf(-self.nu) * f[kb]).abs() / d.powf(alpha);
                best = best.max(q * ga.min(gb).powf(alpha));
            }
        };
        for i in 0..r.nr {
            for j in 0..r.na {
                if i + 1 < r.nr {
                    pair(r.idx(i, j), r.idx(i + 1, j));
                }
                if j + 1 < r.na {
                    pair(r.idx(i, j), r.idx(i, j + 1));
                }
            }
        }
        for i in 0..b.ns {
            for j in 0..=b.nt {
                let k = self.n_radial + b.idx(i, j);
                if i + 1 < b.ns {
                    pair(k, self.n_radial + b.idx(i + 1, j));
                }
                if j < b.nt {
                    pair(k, self.n_radial + b.idx(i, j + 1));
                }
            }
        }
        best
    }
}

/// `γ² H(w)` on both grids.
pub fn assemble_residual(atlas: &SurfaceAtlas, w: &GlobalField) -> Result<GlobalField> {
    check_smallness(atlas, w)?;
    let disc = Discretization::new(atlas, SolverOptions::default().nu)?;
    let v = disc.to_vec(w);
    Ok(disc.to_field(&disc.residual(&v)?))
}

/// `sup γ^{−ν}|γ²(H(tw) − H(0)) − t 𝓛w|` along a ladder of `t`.
pub fn quadratic_remainder(atlas: &SurfaceAtlas, w: &GlobalField, ts: &[f64]) -> Result<Vec<f64>> {
    let disc = Discretization::new(atlas, SolverOptions::default().nu)?;
    let wv = disc.to_vec(w);
    let zero = vec![0.0; disc.len()];
    let f0 = disc.residual(&zero)?;
    let lw = disc.jacobian(&zero)?.matvec(&wv);
    ts.iter()
        .map(|&t| {
            let wt: Vec<f64> = wv.iter().map(|v| t * v).collect();
            check_smallness(atlas, &disc.to_field(&wt))?;
            let ft = disc.residual(&wt)?;
            let q: Vec<f64> = (0..ft.len()).map(|k| ft[k] - f0[k] - t * lw[k]).collect();
            Ok(disc.weighted_sup(&q))
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Partition of unity

/// Radii of the partition of unity and of the cutoffs applied to the catenoid solutions.
///
/// The bridge piece is supported in `ρ < bridge[1]` and its solution is cut off in
/// `eta_bridge`; the neck piece is supported in `|z| < neck[1]` and cut off in `eta_neck`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PartitionOfUnity {
    pub bridge: [f64; 2],
    pub neck: Option<[f64; 2]>,
    pub eta_bridge: [f64; 2],
    pub eta_neck: Option<[f64; 2]>,
}

impl PartitionOfUnity {
    pub fn new(atlas: &SurfaceAtlas) -> Self {
        let l = atlas.layout();
        let p = atlas.params();
        let neck = p.eps_tilde.map(|et| {
            let h = et.sqrt();
            let top = 0.5 * (3.0 * h + 1.0 - 1.2 * l.rho_bridge);
            [3.0 * h, (4.5 * h).min(top)]
        });
        PartitionOfUnity {
            bridge: [0.3 * l.rho_hole, 0.45 * l.rho_hole],
            neck,
            eta_bridge: [0.5 * l.rho_hole, 0.9 * l.rho_hole],
            eta_neck: neck.map(|[_, b]| [1.1 * b, 1.8 * b]),
        }
    }

    /// `(φ_gr, φ_0, φ_B)` at a disk point.
    pub fn weights(&self, atlas: &SurfaceAtlas, z: Complex64) -> Result<[f64; 3]> {
        let rho = atlas.base.bridge_radius(z)?;
        let pb = step_down(rho, self.bridge[0], self.bridge[1])[0];
        let p0 = self.neck.map_or(0.0, |[a, b]| step_down(z.norm(), a, b)[0]);
        Ok([1.0 - pb - p0, p0, pb])
    }
}

/// Pieces `φ_i f` of a field.
#[derive(Clone, Debug, PartialEq)]
pub struct PartitionComponents {
    pub graph: GlobalField,
    pub neck: Option<GlobalField>,
    pub bridge: GlobalField,
}

impl PartitionComponents {
    pub fn sum(&self) -> GlobalField {
        let add = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x + y).collect::<Vec<_>>();
        let mut radial = add(&self.graph.radial, &self.bridge.radial);
        let mut bridge = add(&self.graph.bridge, &self.bridge.bridge);
        if let Some(nk) = &self.neck {
            radial = add(&radial, &nk.radial);
            bridge = add(&bridge, &nk.bridge);
        }
        PerturbationField { radial, bridge }
    }
}

/// Split `f` with the partition of unity, node by node on both grids.
pub fn partition_decompose(atlas: &SurfaceAtlas, f: &GlobalField) -> Result<PartitionComponents> {
    if f.radial.len() != atlas.radial.len() || f.bridge.len() != atlas.bridge.len() {
        return Err(FbmsError::InvalidField("field does not match the atlas grids".into()));
    }
    let pu = PartitionOfUnity::new(atlas);
    let r = &atlas.radial;
    let b = &atlas.bridge;
    let mut comps = [
        PerturbationField::zeros(atlas),
        PerturbationField::zeros(atlas),
        PerturbationField::zeros(atlas),
    ];
    for k in 0..r.len() {
        let w = pu.weights(atlas, r.z(k / r.na, k % r.na))?;
        for c in 0..3 {
            comps[c].radial[k] = w[c] * f.radial[k];
        }
    }
    for k in 0..b.len() {
        let zeta = b.zeta(k / (b.nt + 1), k % (b.nt + 1));
        let w = pu.weights(atlas, (1.0 + zeta) / (1.0 - zeta))?;
        for c in 0..3 {
            comps[c].bridge[k] = w[c] * f.bridge[k];
        }
    }
    let [graph, neck, bridge] = comps;
    Ok(PartitionComponents { graph, neck: pu.neck.map(|_| neck), bridge })
}

/// `ϑ(t)`: 0 for `t < −1`, 1 for `t > 1`.
pub fn sheet_cutoff(t: f64) -> f64 {
    1.0 - step_down(t, -1.0, 1.0)[0]
}

/// Sheet split of a catenoid-chart component in its parameter `t` (`s` or `σ`):
/// `(ϑ(t) f, (1 − ϑ(t)) f)`.
pub fn sheet_split(values: &[f64], params: &[f64]) -> (Vec<f64>, Vec<f64>) {
    values
        .iter()
        .zip(params)
        .map(|(&v, &t)| {
            let th = sheet_cutoff(t);
            (th * v, (1.0 - th) * v)
        })
        .unzip()
}

// ---------------------------------------------------------------------------
// Deficiency matching

/// Constants entering the kernel matching.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeficiencyInputs {
    pub n: usize,
    pub c0_star: f64,
    pub c1_star: f64,
    pub d0_star: f64,
    pub d1_star: f64,
    /// `s_ε̃ = arccosh(1/ε̃)`; absent for genus zero.
    pub s_eps_tilde: Option<f64>,
    pub c_n: f64,
    /// Value of the outer `Γ_n` at the centre, multiplying `b1` in the neck equation.
    pub center_gamma: f64,
    /// Offset between the bridge parameter and `log|z − 1|`, `σ ≈ log|z − 1| + shift`.
    pub bridge_shift: f64,
}

impl DeficiencyInputs {
    /// Inputs in the reduced normalization: `center_gamma = −n/2`, no bridge shift.
    pub fn reduced(n: usize, c: [f64; 4], s_eps_tilde: Option<f64>) -> Result<Self> {
        Ok(DeficiencyInputs {
            n,
            c0_star: c[0],
            c1_star: c[1],
            d0_star: c[2],
            d1_star: c[3],
            s_eps_tilde,
            c_n: expansion_constant_c(n)?,
            center_gamma: -0.5 * n as f64,
            bridge_shift: 0.0,
        })
    }

    /// Inputs matching the charts of an atlas: `Γ_n(0) = −n` and `shift = arccosh(1/ε)`.
    pub fn for_params(p: &MatchingParams, c: [f64; 4]) -> Result<Self> {
        Ok(DeficiencyInputs {
            center_gamma: -(p.n as f64),
            bridge_shift: (1.0 / p.eps).acosh(),
            ..Self::reduced(p.n, c, p.eps_tilde.map(|et| (1.0 / et).acosh()))?
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeficiencyMatch {
    pub a0: f64,
    pub a1: f64,
    pub b0: f64,
    pub b1: f64,
    pub c0_star: f64,
    pub c1_star: f64,
    pub d0_star: f64,
    pub d1_star: f64,
    /// Determinant of the reduced system in `(b0, b1)`.
    pub determinant: f64,
    /// Largest equation residual after substitution.
    pub residual: f64,
}

/// Residuals of the matching equations at a candidate solution.
///
/// Neck: `a0 − 2n b0` and `c0* n + Γ₀ b1 − 2n b0 + 2n b0 s_ε̃ − 2n b0 − d0*`.
/// Bridge: `a1 − b1` and `c0* n + c1* + b1 (c(n) − n/2) − b0 n − b1 (1 − shift) − d1*`.
pub fn matching_equations(inp: &DeficiencyInputs, m: &DeficiencyMatch) -> Vec<f64> {
    let nf = inp.n as f64;
    let mut out = Vec::with_capacity(4);
    if let Some(s) = inp.s_eps_tilde {
        out.push(m.a0 - 2.0 * nf * m.b0);
        out.push(
            inp.c0_star * nf + inp.center_gamma * m.b1 - 2.0 * nf * m.b0 + 2.0 * nf * m.b0 * s - 2.0 * nf * m.b0
                - inp.d0_star,
        );
    }
    out.push(m.a1 - m.b1);
    out.push(
        inp.c0_star * nf + inp.c1_star + m.b1 * (inp.c_n - nf / 2.0) - m.b0 * nf - m.b1 * (1.0 - inp.bridge_shift)
            - inp.d1_star,
    );
    out
}

/// Solve the matching system for `(a0, a1, b0, b1)`; genus zero has `a0 = b0 = 0`.
pub fn deficiency_match(inp: &DeficiencyInputs) -> Result<DeficiencyMatch> {
    if inp.n < 3 {
        return Err(FbmsError::InvalidParameter(format!("n = {} < 3", inp.n)));
    }
    let nf = inp.n as f64;
    let k = inp.c_n - nf / 2.0 - 1.0 + inp.bridge_shift;
    let r2 = inp.d1_star - inp.c0_star * nf - inp.c1_star;
    let (b0, b1, det) = match inp.s_eps_tilde {
        Some(s) => {
            // [2n(s − 2), Γ₀; −n, k] (b0, b1) = (d0* − c0* n, r2)
            let (a11, a12, a21, a22) = (2.0 * nf * (s - 2.0), inp.center_gamma, -nf, k);
            let r1 = inp.d0_star - inp.c0_star * nf;
            let det = a11 * a22 - a12 * a21;
            if det.abs() < 1e-12 * (a11.abs() * a22.abs() + (a12 * a21).abs()) {
                return Err(FbmsError::Linear(format!("singular matching system (det = {det:e})")));
            }
            ((r1 * a22 - a12 * r2) / det, (a11 * r2 - a21 * r1) / det, det)
        }
        None => {
            if k.abs() < 1e-14 {
                return Err(FbmsError::Linear(format!("singular matching system (det = {k:e})")));
            }
            (0.0, r2 / k, k)
        }
    };
    let mut m = DeficiencyMatch {
        a0: 2.0 * nf * b0,
        a1: b1,
        b0,
        b1,
        c0_star: inp.c0_star,
        c1_star: inp.c1_star,
        d0_star: inp.d0_star,
        d1_star: inp.d1_star,
        determinant: det,
        residual: 0.0,
    };
    m.residual = matching_equations(inp, &m).iter().fold(0.0f64, |a, v| a.max(v.abs()));
    Ok(m)
}

// ---------------------------------------------------------------------------
// Approximate inverse

/// Fold a disk point into the sector `0 ≤ arg z ≤ π/n`.
pub fn fold_to_sector(z: Complex64, n: usize) -> Complex64 {
    let period = 2.0 * PI / n as f64;
    let mut a = z.arg().rem_euclid(period);
    if a > 0.5 * period {
        a = period - a;
    }
    Complex64::from_polar(z.norm(), a)
}

fn lagrange_nonuniform(xs: &[f64], x: f64) -> [f64; 4] {
    let mut w = [1.0; 4];
    for a in 0..4 {
        for b in 0..4 {
            if a != b {
                w[a] *= (x - xs[b]) / (xs[a] - xs[b]);
            }
        }
    }
    w
}

/// Cubic interpolation of samples `ys` at increasing abscissae `xs`, zero outside `[xs[0], xs[last]]`.
fn interp_1d(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let n = xs.len();
    if x < xs[0] || x > xs[n - 1] || n < 4 {
        return 0.0;
    }
    let k = xs.partition_point(|&v| v <= x).clamp(2, n - 2);
    let s = k - 2;
    let w = lagrange_nonuniform(&xs[s..s + 4], x);
    (0..4).map(|a| w[a] * ys[s + a]).sum()
}

fn lagrange4(t: f64) -> [f64; 4] {
    [
        -t * (t - 1.0) * (t - 2.0) / 6.0,
        (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
        -(t + 1.0) * t * (t - 2.0) / 2.0,
        (t + 1.0) * t * (t - 1.0) / 6.0,
    ]
}

/// Bicubic evaluation of a disk field at any point of the closed disk.
///
/// The radial stencil is one-sided at the rim, so no boundary condition is assumed there.
fn disk_eval(d: &DiskField, z: Complex64) -> f64 {
    let (nr, np) = (d.nr() as isize, d.nphi() as isize);
    let x = z.norm() / d.dr() - 0.5;
    let y = z.arg().rem_euclid(2.0 * PI / d.fold() as f64) / d.dphi();
    let half = (PI / d.dphi()).round() as isize;
    let i0 = (x.floor() as isize).min(nr - 3);
    let j0 = y.floor();
    let (wx, wy) = (lagrange4(x - i0 as f64), lagrange4(y - j0));
    let mut acc = 0.0;
    for (a, wa) in wx.iter().enumerate() {
        let mut i = i0 + a as isize - 1;
        let mut shift = 0;
        if i < 0 {
            i = -1 - i;
            shift = half;
        }
        for (b, wb) in wy.iter().enumerate() {
            let j = (j0 as isize + b as isize - 1 + shift).rem_euclid(np);
            acc += wa * wb * d.get(i as usize, j as usize);
        }
    }
    acc
}

/// Even cosine coefficients of one bridge ring: `f(θ) = Σ_k c_k cos(2kθ)` on `[π/2, π]`.
fn bridge_ring_modes(vals: &[f64]) -> Vec<f64> {
    let nt = vals.len() - 1;
    (0..=nt)
        .map(|k| {
            let mut s = 0.0;
            for (j, v) in vals.iter().enumerate() {
                let wgt = if j == 0 || j == nt { 0.5 } else { 1.0 };
                s += wgt * v * (PI * (k * j) as f64 / nt as f64).cos();
            }
            let c = 2.0 * s / nt as f64 * if k == 0 || k == nt { 0.5 } else { 1.0 };
            if k % 2 == 1 {
                -c
            } else {
                c
            }
        })
        .collect()
}

/// Cosine coefficients of one polar ring: `f(φ) = Σ_k c_k cos(k n φ)`.
fn radial_ring_modes(vals: &[f64]) -> Vec<f64> {
    let na = vals.len();
    (0..na)
        .map(|k| {
            let s: f64 = vals
                .iter()
                .enumerate()
                .map(|(j, v)| v * (PI * k as f64 * (j as f64 + 0.5) / na as f64).cos())
                .sum();
            s * if k == 0 { 1.0 } else { 2.0 } / na as f64
        })
        .collect()
}

/// `t (1 − tanh t)`, the gap between `1 − t tanh t` and its asymptote `1 − t`.
fn kernel_tail(t: f64) -> f64 {
    2.0 * t / (1.0 + (2.0 * t).exp())
}

/// Mode-wise solution of a Jacobi problem with tabulated Fourier data.
fn jacobi_from_table(
    variant: JacobiVariant,
    params: &[f64],
    modes: &[Vec<f64>],
    wavenumber: impl Fn(usize) -> i64,
    delta: f64,
) -> Result<JacobiSolution> {
    let xs = Arc::new(params.to_vec());
    let mut out: Vec<JacobiModeSolution> = Vec::new();
    let nm = modes.first().map_or(0, Vec::len);
    for m in 0..nm {
        let ys: Arc<Vec<f64>> = Arc::new(modes.iter().map(|row| row[m]).collect());
        if ys.iter().all(|v| v.abs() < 1e-300) {
            continue;
        }
        let (xs, ys2) = (xs.clone(), ys.clone());
        let f: RealFn = Arc::new(move |s: f64| interp_1d(&xs, &ys2, s.abs()));
        out.push(jacobi_mode_solve(f, wavenumber(m), delta)?);
    }
    let (kernel_coeff, d_star) = out
        .iter()
        .find(|m| m.j == 0)
        .map(|m| (m.kernel_coeff, m.d_star.unwrap_or(0.0)))
        .unwrap_or((0.0, 0.0));
    Ok(JacobiSolution { variant, modes: out, kernel_coeff, d_star })
}

/// Geometry-only data of a node used by the approximate inverse.
#[derive(Clone, Debug)]
struct NodeData {
    /// Transported points of the two sheets on the disk.
    z_plus: Complex64,
    z_minus: Option<Complex64>,
    /// Catenoid parameter and angle in the neck or bridge chart.
    chart: Option<(GridKind, f64, f64)>,
    phi: [f64; 3],
    xi_minus: f64,
    eta_neck: f64,
    eta_bridge: f64,
    kappa_neck: f64,
    kappa_bridge: f64,
    /// `[1/B, χ_n/B, Γ̃_n, Γ_n]` at `z_plus`.
    outer: [f64; 4],
    /// `u(t) − (1 − t)` for the neck and bridge kernels `u(t) = 1 − t tanh t`.
    u_neck: f64,
    u_bridge: f64,
    /// `2ε̃² cosh² s / γ²` or `ε² cosh² σ / γ²` on the catenoid charts.
    cat_scale: f64,
}

/// Diagnostics of one application of the approximate inverse.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ApproxInverseReport {
    pub deficiency: DeficiencyMatch,
    pub robin_residual: f64,
    pub neck_kernel_coeff: Option<f64>,
    pub bridge_kernel_coeff: f64,
}

/// Partition-of-unity approximate inverse of `γ²𝓛` at `w = 0`.
pub struct ApproxInverse<'d, 'a> {
    pub disc: &'d Discretization<'a>,
    pub lin: SparseRows,
    pub partition: PartitionOfUnity,
    nodes: Vec<NodeData>,
    disk_shape: (usize, usize),
    spec: WeightedNormSpec,
    delta: f64,
}

impl<'d, 'a> ApproxInverse<'d, 'a> {
    pub fn new(disc: &'d Discretization<'a>, lin: SparseRows, opts: &SolverOptions) -> Result<Self> {
        let atlas = disc.atlas;
        let p: MatchingParams = *atlas.params();
        let l = *atlas.layout();
        let partition = PartitionOfUnity::new(atlas);
        let n = p.n;
        let s_et = p.eps_tilde.map(|et| (1.0 / et).acosh());
        let sigma_e = (2.0 / p.eps).acosh();
        let nodes = (0..disc.len())
            .into_par_iter()
            .map(|k| -> Result<NodeData> {
                let row = &disc.rows[k];
                let z = disc.node_z(k);
                let (z_plus, z_minus, chart) = match (row.grid, p.genus) {
                    (GridKind::Radial, Genus::Zero) => (z, None, None),
                    (GridKind::Radial, Genus::One) => {
                        let s = atlas.radial.radial_param(row.i).v;
                        let phi = atlas.radial.angle(row.j);
                        let se = s_et.unwrap_or(0.0);
                        let zp = if row.i == atlas.radial.nr - 1 {
                            z
                        } else {
                            Complex64::from_polar((s - se).exp().min(1.0), phi)
                        };
                        (zp, Some(Complex64::from_polar((-s - se).exp(), phi)), Some((GridKind::Radial, s, phi)))
                    }
                    (GridKind::Bridge, _) => {
                        let sigma = atlas.bridge.sigma(row.i);
                        let theta = atlas.bridge.theta(row.j);
                        let tr = |t: f64| {
                            let zeta = Complex64::from_polar((t - sigma_e).exp(), theta);
                            (1.0 + zeta) / (1.0 - zeta)
                        };
                        (tr(sigma), Some(tr(-sigma)), Some((GridKind::Bridge, sigma, theta)))
                    }
                };
                let phi = partition.weights(atlas, z)?;
                let rho = atlas.base.bridge_radius(z)?;
                let r = z.norm();
                let [blo, bhi] = l.bridge_band;
                let (xi_minus, eta_neck, kappa_neck) = match (l.neck_band, partition.eta_neck) {
                    (Some([nlo, nhi]), Some([elo, ehi])) if row.grid == GridKind::Radial => {
                        let h = nhi / 2.0;
                        (step_down(r, nlo, nhi)[0], step_down(r, elo, ehi)[0], step_down(r, 2.0 * h, 3.0 * h)[0])
                    }
                    _ => (0.0, 0.0, 0.0),
                };
                let xi_minus = if row.grid == GridKind::Bridge { step_down(rho, blo, bhi)[0] } else { xi_minus };
                let eta_bridge = step_down(rho, partition.eta_bridge[0], partition.eta_bridge[1])[0];
                let kappa_bridge = step_down(rho, KAPPA_BRIDGE[0] * l.rho_hole, KAPPA_BRIDGE[1] * l.rho_hole)[0];
                let zo = fold_to_sector(z_plus, n);
                let b = eval_b(zo);
                let outer = [
                    1.0 / b,
                    robin_chi(zo.powu(n as u32)) / b,
                    if p.genus == Genus::One && zo.norm() > 0.0 { gamma_fn(zo, n, GammaKind::Tilde)? } else { 0.0 },
                    if (zo - 1.0).norm() > 1e-12 { gamma_fn(zo, n, GammaKind::Plain)? } else { 0.0 },
                ];
                let gamma2 = row.gamma * row.gamma;
                // Kernel minus its logarithmic asymptote in the log coordinate of the transported point.
                let bridge_tail = || {
                    let sb = (rho / p.eps).max(1.0).acosh();
                    (2.0 * rho / p.eps).ln() - sb * sb.tanh()
                };
                let (u_neck, u_bridge, cat_scale) = match chart {
                    Some((GridKind::Radial, s, _)) => {
                        let et = p.eps_tilde.unwrap_or(0.0);
                        (kernel_tail(s), bridge_tail(), 2.0 * (et * s.cosh()).powi(2) / gamma2)
                    }
                    Some((GridKind::Bridge, sg, _)) => (0.0, kernel_tail(sg), (p.eps * sg.cosh()).powi(2) / gamma2),
                    _ => (0.0, bridge_tail(), 0.0),
                };
                Ok(NodeData {
                    z_plus,
                    z_minus,
                    chart,
                    phi,
                    xi_minus,
                    eta_neck,
                    eta_bridge,
                    kappa_neck,
                    kappa_bridge,
                    outer,
                    u_neck,
                    u_bridge,
                    cat_scale,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let (nr, na) = atlas.resolution.solver_radial(Genus::Zero);
        let spec = WeightedNormSpec::new(opts.nu, opts.alpha, residual_weight(p.genus))?;
        Ok(ApproxInverse {
            disc,
            lin,
            partition,
            nodes,
            disk_shape: (nr, 4 * na),
            spec,
            delta: opts.delta,
        })
    }

    /// Fill interpolation rows with the interpolated values of `f` so that `f` reads as one function.
    fn fill_interfaces(&self, f: &[f64]) -> Vec<f64> {
        let mut g = f.to_vec();
        let order = |grid: GridKind| self.disc.rows.iter().enumerate().filter(move |(_, r)| r.grid == grid);
        for grid in [GridKind::Bridge, GridKind::Radial] {
            for (k, row) in order(grid) {
                if let RowKind::Interp(c) = &row.kind {
                    g[k] = interp_eval(c, &g);
                }
            }
        }
        g
    }

    /// Sample a filled field at a disk point.
    fn sample(&self, g: &[f64], z: Complex64) -> f64 {
        let atlas = self.disc.atlas;
        let z = fold_to_sector(z, atlas.params().n);
        let l = atlas.layout();
        let zeta = (z - 1.0) / (z + 1.0);
        let (wr, wb) = self.disc.split(g);
        if 2.0 * zeta.norm() < 0.5 * (l.rho_hole + l.rho_bridge) {
            let (x, y) = atlas.bridge.locate(zeta);
            interp_eval(&interp_weights(&atlas.bridge, x, y), wb)
        } else {
            let (x, y) = atlas.radial.locate(z);
            interp_eval(&interp_weights(&atlas.radial, x, y), wr)
        }
    }

    /// `M_app f` and its diagnostics.
    pub fn apply(&self, f: &[f64]) -> Result<(Vec<f64>, ApproxInverseReport)> {
        let atlas = self.disc.atlas;
        let p = *atlas.params();
        let n = p.n;
        let g = self.fill_interfaces(f);
        let weight = residual_weight(p.genus);

        // graph piece: Δ(B w) = φ_gr f / γ² with ∂_r w = 0
        let (nr, nphi) = self.disk_shape;
        let rhs = DiskField::from_fn(nr, nphi, n, |x, y| {
            let z = Complex64::new(x, y);
            let pg = self.partition.weights(atlas, z).map(|w| w[0]).unwrap_or(0.0);
            if pg == 0.0 {
                return 0.0;
            }
            let gm = weight_gamma(z, n, weight);
            pg * self.sample(&g, z) / (gm * gm)
        })?;
        let dec = solve_robin_disk_with(&rhs, n, 1.0, &self.spec).map_err(|e| tag("graph", e))?;
        let np = rhs.nphi();
        let big_w = dec.regular.with_values(
            (0..dec.regular.values().len())
                .map(|k| {
                    let zk = dec.regular.node(k / np, k % np);
                    dec.regular.values()[k] + n as f64 * dec.c0_star + dec.c1_star.unwrap_or(0.0) * robin_chi(zk)
                })
                .collect(),
        )?;
        let w0 = n as f64 * dec.c0_star;
        let w1 = big_w.get(nr - 1, 0);
        let psi = |z: Complex64| {
            let zf = fold_to_sector(z, n);
            let b = eval_b(zf);
            (disk_eval(&big_w, zf) - w0 - (w1 - w0) * robin_chi(zf.powu(n as u32))) / b
        };

        // catenoid pieces
        let neck_sol = if p.genus == Genus::One {
            let r = &atlas.radial;
            let mut params = Vec::with_capacity(r.nr);
            let mut modes = Vec::with_capacity(r.nr);
            for i in 0..r.nr {
                params.push(r.radial_param(i).v);
                let vals: Vec<f64> = (0..r.na)
                    .map(|j| {
                        let k = r.idx(i, j);
                        let nd = &self.nodes[k];
                        nd.phi[1] * g[k] * nd.cat_scale
                    })
                    .collect();
                modes.push(radial_ring_modes(&vals));
            }
            let nn = n as i64;
            Some(
                jacobi_from_table(JacobiVariant::NeckScaled(n), &params, &modes, |m| m as i64 * nn, self.delta)
                    .map_err(|e| tag("neck", e))?,
            )
        } else {
            None
        };
        let bridge_sol = {
            let b = &atlas.bridge;
            let off = self.disc.n_radial;
            let mut params = Vec::with_capacity(b.ns);
            let mut modes = Vec::with_capacity(b.ns);
            for i in 0..b.ns {
                params.push(b.sigma(i));
                let vals: Vec<f64> = (0..=b.nt)
                    .map(|j| {
                        let k = off + b.idx(i, j);
                        let nd = &self.nodes[k];
                        nd.phi[2] * g[k] * nd.cat_scale
                    })
                    .collect();
                modes.push(bridge_ring_modes(&vals));
            }
            jacobi_from_table(JacobiVariant::HalfBridge, &params, &modes, |m| 2 * m as i64, self.delta)
                .map_err(|e| tag("bridge", e))?
        };

        // kernel matching
        let c0_star = 2.0 * w0 / n as f64;
        let c1_star = w1 - 2.0 * w0;
        let d0_star = neck_sol.as_ref().map_or(0.0, |s| s.d_star);
        let d1_star = bridge_sol.d_star;
        let inputs = DeficiencyInputs::for_params(&p, [c0_star, c1_star, d0_star, d1_star])?;
        let dm = deficiency_match(&inputs)?;

        let mut out: Vec<f64> = self
            .nodes
            .par_iter()
            .map(|nd| {
                let mut w = psi(nd.z_plus);
                if let Some(zm) = nd.z_minus {
                    if nd.xi_minus > 0.0 {
                        w += nd.xi_minus * psi(zm);
                    }
                }
                match nd.chart {
                    Some((GridKind::Radial, s, phi)) if nd.eta_neck > 0.0 => {
                        if let Some(sol) = &neck_sol {
                            w += nd.eta_neck * (sol.eval_unscaled(s, phi) - sol.d_star);
                        }
                    }
                    Some((GridKind::Bridge, sg, th)) if nd.eta_bridge > 0.0 => {
                        w += nd.eta_bridge * (bridge_sol.eval_unscaled(sg, th) - bridge_sol.d_star);
                    }
                    _ => {}
                }
                // With the matching conditions the outer form carries `a ū + d*` up to its
                // logarithmic asymptote; the cutoffs only restore the bounded remainder.
                let inner = nd.kappa_neck * dm.a0 * nd.u_neck + nd.kappa_bridge * dm.a1 * nd.u_bridge;
                let o = nd.outer;
                let outer = w0 * o[0] + (w1 - w0) * o[1] + dm.b0 * o[2] + dm.b1 * o[3];
                w + inner + outer
            })
            .collect();
        for grid in [GridKind::Bridge, GridKind::Radial] {
            for (k, row) in self.disc.rows.iter().enumerate() {
                if row.grid != grid {
                    continue;
                }
                if let RowKind::Interp(c) = &row.kind {
                    out[k] = interp_eval(c, &out) + f[k];
                }
            }
        }
        Ok((
            out,
            ApproxInverseReport {
                deficiency: dm,
                robin_residual: dec.residual,
                neck_kernel_coeff: neck_sol.map(|s| s.kernel_coeff),
                bridge_kernel_coeff: bridge_sol.kernel_coeff,
            },
        ))
    }

    /// `‖γ²𝓛 M_app f − f‖ / ‖f‖` in the weighted sup norm.
    pub fn defect(&self, f: &[f64]) -> Result<f64> {
        let (w, _) = self.apply(f)?;
        let lw = self.lin.matvec(&w);
        let d: Vec<f64> = lw.iter().zip(f).map(|(a, b)| a - b).collect();
        Ok(self.disc.weighted_sup(&d) / self.disc.weighted_sup(f).max(1e-300))
    }

    /// `M_app ∘ (Id + R_app)^{−1}` with `R_app = γ²𝓛 M_app − Id`, truncated Richardson series.
    pub fn refined(&self, f: &[f64]) -> Result<(Vec<f64>, usize)> {
        let mut x = f.to_vec();
        let mut terms = 1;
        let (mut mx, _) = self.apply(&x)?;
        while terms < RICHARDSON_TERMS {
            let lmx = self.lin.matvec(&mx);
            let next: Vec<f64> = (0..x.len()).map(|k| f[k] - (lmx[k] - x[k])).collect();
            let change = next.iter().zip(&x).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            let size = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            x = next;
            terms += 1;
            mx = self.apply(&x)?.0;
            if change <= 1e-12 * size {
                break;
            }
        }
        Ok((mx, terms))
    }
}

/// Relative change of the residual below which a fixed-point iteration has stalled.
pub const STAGNATION: f64 = 1e-6;

/// Band of the bridge kernel cutoff, in units of the hole radius.
pub const KAPPA_BRIDGE: [f64; 2] = [0.3, 0.6];

/// Terms of the truncated inversion of `Id + R_app`.
pub const RICHARDSON_TERMS: usize = 8;

fn tag(region: &str, e: FbmsError) -> FbmsError {
    match e {
        FbmsError::NotConverged(m) => FbmsError::NotConverged(format!("{region}: {m}")),
        FbmsError::InvalidField(m) => FbmsError::InvalidField(format!("{region}: {m}")),
        FbmsError::Linear(m) => FbmsError::Linear(format!("{region}: {m}")),
        FbmsError::InvalidParameter(m) => FbmsError::InvalidParameter(format!("{region}: {m}")),
        other => other,
    }
}

/// `M_app f` for a field of residual rows, with the weighted defect `‖γ²𝓛M_app f − f‖/‖f‖`.
pub fn apply_approx_inverse(atlas: &SurfaceAtlas, f: &GlobalField, opts: &SolverOptions) -> Result<(GlobalField, f64)> {
    let disc = Discretization::new(atlas, opts.nu)?;
    let lin = disc.jacobian(&vec![0.0; disc.len()])?;
    let inv = ApproxInverse::new(&disc, lin, opts)?;
    let fv = disc.to_vec(f);
    let (w, _) = inv.apply(&fv)?;
    let lw = inv.lin.matvec(&w);
    let d: Vec<f64> = lw.iter().zip(&fv).map(|(a, b)| a - b).collect();
    let ratio = disc.weighted_sup(&d) / disc.weighted_sup(&fv).max(1e-300);
    Ok((disc.to_field(&w), ratio))
}

// ---------------------------------------------------------------------------
// Corrector

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    /// Iteration budget exhausted without divergence.
    MaxIterations,
    /// No further decrease possible at the discretization's roundoff floor.
    Stalled,
    Diverged,
}

/// Measured Lipschitz ratios of the Banach map on sampled pairs.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ContractionReport {
    pub ball_radius: f64,
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
    /// `‖γ²𝓛M_app f − f‖/‖f‖` at `f = γ²H(0)`.
    pub approx_inverse_defect: f64,
    pub richardson_terms: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolveReport {
    pub mode: SolveMode,
    pub status: SolveStatus,
    pub options: SolverOptions,
    pub params: MatchingParams,
    /// `sup γ^{−ν}|γ²H(0)|`.
    pub initial_residual: f64,
    /// Weighted residual after each iteration.
    pub residuals: Vec<f64>,
    pub monotone: bool,
    pub interface_defect: f64,
    pub holder_surrogate: f64,
    pub correction_sup: f64,
    pub initial_orthogonality_defect: f64,
    pub final_orthogonality_defect: f64,
    pub self_intersections: usize,
    pub symmetry_defect: f64,
    /// Average of `H` over the upper-sheet samples of the final surface.
    pub mean_curvature_mean: f64,
    pub deficiency: Option<DeficiencyMatch>,
    pub contraction: Option<ContractionReport>,
    pub unknowns: usize,
    pub active_rows: usize,
    pub jacobian_nnz: usize,
    pub linear_solves: usize,
}

impl SolveReport {
    pub fn reduction(&self) -> f64 {
        let last = self.residuals.last().copied().unwrap_or(self.initial_residual);
        self.initial_residual / last.max(1e-300)
    }
}

struct IterState {
    residuals: Vec<f64>,
    status: SolveStatus,
    linear_solves: usize,
    nnz: usize,
}

fn newton(disc: &Discretization, w: &mut Vec<f64>, r0: f64, opts: &SolverOptions) -> Result<IterState> {
    let mut f = disc.residual(w)?;
    let mut r = r0;
    let mut st = IterState { residuals: Vec::new(), status: SolveStatus::MaxIterations, linear_solves: 0, nnz: 0 };
    if r <= opts.tol {
        st.status = SolveStatus::Converged;
        return Ok(st);
    }
    for _ in 0..opts.max_iter {
        let jac = disc.jacobian(w)?;
        st.nnz = jac.nnz();
        let rhs: Vec<f64> = f.iter().map(|v| -v).collect();
        let dw = jac.factor()?.solve(&rhs)?;
        st.linear_solves += 1;
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..6 {
            let trial: Vec<f64> = w.iter().zip(&dw).map(|(a, b)| a + t * b).collect();
            if check_smallness(disc.atlas, &disc.to_field(&trial)).is_ok() {
                let ft = disc.residual(&trial)?;
                let rt = disc.weighted_sup(&ft);
                if rt.is_finite() && rt < r {
                    accepted = Some((trial, ft, rt));
                    break;
                }
            }
            t *= 0.5;
        }
        match accepted {
            Some((trial, ft, rt)) => {
                *w = trial;
                f = ft;
                r = rt;
                st.residuals.push(r);
                if r <= opts.tol {
                    st.status = SolveStatus::Converged;
                    return Ok(st);
                }
            }
            None => {
                st.status = if r < 1e-6 * r0 { SolveStatus::Stalled } else { SolveStatus::Diverged };
                return Ok(st);
            }
        }
    }
    Ok(st)
}

/// Deterministic smooth symmetric probe fields for the contraction estimate.
fn probe_field(disc: &Discretization, which: usize) -> Vec<f64> {
    let n = disc.atlas.params().n as f64;
    let f = |z: Complex64| -> f64 {
        let (r, a) = (z.norm(), z.arg());
        match which % 3 {
            0 => 1.0 - 0.5 * r * r,
            1 => r.powi(2) * (n * a).cos(),
            _ => (PI * r).cos() * (1.0 + 0.3 * (2.0 * n * a).cos()),
        }
    };
    let v: Vec<f64> = (0..disc.len()).map(|k| f(disc.node_z(k))).collect();
    let s = disc.field_norm(&v);
    v.iter().map(|x| x / s).collect()
}

fn banach(
    disc: &Discretization,
    w: &mut Vec<f64>,
    r0: f64,
    opts: &SolverOptions,
) -> Result<(IterState, DeficiencyMatch, ContractionReport)> {
    let zero = vec![0.0; disc.len()];
    let lin = disc.jacobian(&zero)?;
    let nnz = lin.nnz();
    let inv = ApproxInverse::new(disc, lin, opts)?;
    let f0 = disc.residual(&zero)?;
    let (_, rep) = inv.apply(&f0)?;
    let defect = inv.defect(&f0)?;
    let mut terms_used = 0;
    // 𝓐(w) = −M(γ²H(w) − γ²𝓛w)
    let map = |w: &[f64], terms: &mut usize| -> Result<Vec<f64>> {
        check_smallness(disc.atlas, &disc.to_field(w))?;
        let fw = disc.residual(w)?;
        let lw = inv.lin.matvec(w);
        let g: Vec<f64> = fw.iter().zip(&lw).map(|(a, b)| a - b).collect();
        let (mg, t) = inv.refined(&g)?;
        *terms = (*terms).max(t);
        Ok(mg.iter().map(|v| -v).collect())
    };
    let mut st = IterState { residuals: Vec::new(), status: SolveStatus::MaxIterations, linear_solves: 0, nnz };
    let mut r = r0;
    let mut growth = 0;
    let mut first: Option<Vec<f64>> = None;
    if r <= opts.tol {
        st.status = SolveStatus::Converged;
    } else {
        for _ in 0..opts.max_iter {
            let next = match map(w, &mut terms_used) {
                Ok(v) => v,
                Err(FbmsError::InvalidField(_)) => {
                    st.status = SolveStatus::Diverged;
                    break;
                }
                Err(e) => return Err(e),
            };
            if first.is_none() {
                first = Some(next.clone());
            }
            if check_smallness(disc.atlas, &disc.to_field(&next)).is_err() {
                st.status = SolveStatus::Diverged;
                break;
            }
            let rn = disc.weighted_sup(&disc.residual(&next)?);
            *w = next;
            st.residuals.push(rn);
            growth = if rn > r * (1.0 + STAGNATION) { growth + 1 } else { 0 };
            let stalled = (rn - r).abs() <= STAGNATION * r;
            r = rn;
            if !r.is_finite() || growth >= 2 {
                st.status = SolveStatus::Diverged;
                break;
            }
            if r <= opts.tol {
                st.status = SolveStatus::Converged;
                break;
            }
            if stalled {
                st.status = SolveStatus::Stalled;
                break;
            }
        }
    }
    // contraction on pairs inside the ball of radius 2‖𝓐(0)‖
    let a0 = match first {
        Some(v) => v,
        None => map(&zero, &mut terms_used)?,
    };
    let radius = 2.0 * disc.field_norm(&a0);
    let mut ratios = Vec::new();
    for k in 0..opts.contraction_pairs {
        let (pa, pb) = (probe_field(disc, k), probe_field(disc, k + 1));
        let wa: Vec<f64> = pa.iter().map(|v| 0.5 * radius * v).collect();
        let wb: Vec<f64> = pb.iter().map(|v| -0.5 * radius * v).collect();
        let (ma, mb) = (map(&wa, &mut terms_used)?, map(&wb, &mut terms_used)?);
        let num: Vec<f64> = ma.iter().zip(&mb).map(|(a, b)| a - b).collect();
        let den: Vec<f64> = wa.iter().zip(&wb).map(|(a, b)| a - b).collect();
        ratios.push(disc.field_norm(&num) / disc.field_norm(&den));
    }
    let max_ratio = ratios.iter().copied().fold(0.0, f64::max);
    Ok((
        st,
        rep.deficiency,
        ContractionReport { ball_radius: radius, ratios, max_ratio, approx_inverse_defect: defect, richardson_terms: terms_used },
    ))
}

/// Solve `H(w) = 0` for the normal graph over the approximate surface.
pub fn solve_corrector(atlas: &SurfaceAtlas, opts: &SolverOptions) -> Result<(GlobalField, SolveReport)> {
    opts.validate()?;
    let disc = Discretization::new(atlas, opts.nu)?;
    let mut w = vec![0.0; disc.len()];
    let f0 = disc.residual(&w)?;
    let r0 = disc.weighted_sup(&f0);
    let (st, deficiency, contraction) = match opts.mode {
        SolveMode::Newton => (newton(&disc, &mut w, r0, opts)?, None, None),
        SolveMode::Banach => {
            let (st, d, c) = banach(&disc, &mut w, r0, opts)?;
            (st, Some(d), Some(c))
        }
    };
    let field = disc.to_field(&w);
    let f = disc.residual(&w)?;
    let mesh0 = build_mesh(atlas, None)?;
    let mesh = build_mesh(atlas, Some(&field))?;
    let samples = perturb_surface(atlas, &field)?;
    let upper: Vec<f64> = samples.iter().filter(|s| s.sheet == Sheet::Upper).map(|s| s.mean_curvature).collect();
    let monotone = st.residuals.iter().fold((r0, true), |(prev, ok), &v| (v, ok && v <= prev)).1;
    let report = SolveReport {
        mode: opts.mode,
        status: st.status,
        options: *opts,
        params: *atlas.params(),
        initial_residual: r0,
        residuals: st.residuals,
        monotone,
        interface_defect: disc.interface_defect(&f),
        holder_surrogate: disc.holder_surrogate(&f, opts.alpha),
        correction_sup: field.sup_norm(),
        initial_orthogonality_defect: mesh0.orthogonality_defect(),
        final_orthogonality_defect: mesh.orthogonality_defect(),
        self_intersections: mesh.self_intersections(),
        symmetry_defect: mesh.symmetry_defect(&atlas.symmetry),
        mean_curvature_mean: upper.iter().sum::<f64>() / upper.len().max(1) as f64,
        deficiency,
        contraction,
        unknowns: disc.len(),
        active_rows: disc.active_count(),
        jacobian_nnz: st.nnz,
        linear_solves: st.linear_solves,
    };
    Ok((field, report))
}

/// Weighted residual of the unperturbed surface, `sup γ^{−ν}|γ²H(0)|`.
pub fn initial_residual(atlas: &SurfaceAtlas, nu: f64) -> Result<f64> {
    let disc = Discretization::new(atlas, nu)?;
    let f0 = disc.residual(&vec![0.0; disc.len()])?;
    Ok(disc.weighted_sup(&f0))
}
