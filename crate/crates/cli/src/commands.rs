//! The three batch commands.

use crate::checks::{run_suite, SuiteInputs};
use crate::config::{Mode, RunConfig};
use crate::report::{to_json, Manifest, Report, MANIFEST_SCHEMA, SCHEMA_VERSION, TOOL_VERSION};
use crate::{CliError, Exit};
use fbms_core::global_solver::{solve_corrector, SolveStatus};
use fbms_core::matching_solver::{solve_matching, Genus, MatchingParams};
use fbms_core::surface_builder::{build_mesh, mesh_report, SurfaceAtlas, TriangleMesh};
use std::fs;
use std::path::Path;

pub const OBJ_FILE: &str = "surface.obj";
pub const REPORT_FILE: &str = "report.json";
pub const MANIFEST_FILE: &str = "manifest.json";

pub fn run(mode: Mode, cfg: &RunConfig) -> Result<Exit, CliError> {
    cfg.validate()?;
    match mode {
        Mode::Build => cmd_build(cfg),
        Mode::Validate => cmd_validate(cfg),
        Mode::Solve => cmd_solve(cfg),
    }
}

fn write(dir: &Path, name: &str, contents: &[u8]) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), contents)?;
    Ok(())
}

fn write_obj(cfg: &RunConfig, mesh: &TriangleMesh) -> Result<(), CliError> {
    let mut buf = Vec::new();
    let header = format!("fbms {TOOL_VERSION} n={} genus={}", cfg.n, cfg.genus);
    mesh.write_obj(&mut buf, &header)?;
    write(&cfg.out, OBJ_FILE, &buf)
}

fn write_manifest(cfg: &RunConfig, mode: Mode, params: &[MatchingParams], files: Vec<&'static str>) -> Result<(), CliError> {
    let m = Manifest {
        schema: MANIFEST_SCHEMA,
        schema_version: SCHEMA_VERSION,
        tool_version: TOOL_VERSION,
        command: mode.name(),
        config: cfg,
        params: params.to_vec(),
        files,
    };
    write(&cfg.out, MANIFEST_FILE, to_json(&m)?.as_bytes())
}

pub fn cmd_build(cfg: &RunConfig) -> Result<Exit, CliError> {
    let atlas = SurfaceAtlas::new(cfg.n, cfg.genus(), cfg.resolution())?;
    let mesh = build_mesh(&atlas, None)?;
    let mr = mesh_report(&atlas, &mesh)?;
    let params = vec![*atlas.params()];
    let mut report = Report::new("build", cfg, params.clone());
    report.passed = mr.topology.euler_characteristic == mr.expected_euler_characteristic
        && mr.topology.boundary_loops == mr.expected_boundary_loops;
    report.mesh = Some(mr);
    write_obj(cfg, &mesh)?;
    write(&cfg.out, REPORT_FILE, to_json(&report)?.as_bytes())?;
    write_manifest(cfg, Mode::Build, &params, vec![OBJ_FILE, REPORT_FILE])?;
    Ok(Exit::Success)
}

pub fn cmd_validate(cfg: &RunConfig) -> Result<Exit, CliError> {
    let inputs = SuiteInputs {
        ns: cfg.validate.ns.clone(),
        resolution: cfg.resolution(),
        perturb_cutoff: cfg.validate.perturb_cutoff,
        solver: cfg.solver.options(),
    };
    let mut checks = vec![];
    for suite in cfg.suites() {
        checks.extend(run_suite(suite, &inputs)?);
    }
    let mut params = vec![];
    let mut keys: Vec<(usize, Genus)> = vec![(cfg.n, cfg.genus())];
    for &n in &cfg.validate.ns {
        keys.extend([(n, Genus::Zero), (n, Genus::One)]);
    }
    for (n, g) in keys {
        if let Ok(p) = solve_matching(n, g) {
            if !params.contains(&p) {
                params.push(p);
            }
        }
    }
    let failed: Vec<&str> = checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
    for name in &failed {
        eprintln!("check failed: {name}");
    }
    let passed = failed.is_empty();
    let mut report = Report::new("validate", cfg, params.clone());
    report.passed = passed;
    report.checks = Some(checks);
    write(&cfg.out, REPORT_FILE, to_json(&report)?.as_bytes())?;
    write_manifest(cfg, Mode::Validate, &params, vec![REPORT_FILE])?;
    Ok(if passed { Exit::Success } else { Exit::ChecksFailed })
}

pub fn cmd_solve(cfg: &RunConfig) -> Result<Exit, CliError> {
    let atlas = SurfaceAtlas::new(cfg.n, cfg.genus(), cfg.resolution())?;
    let (w, sr) = solve_corrector(&atlas, &cfg.solver.options())?;
    let exit = match sr.status {
        SolveStatus::Converged => Exit::Success,
        SolveStatus::MaxIterations | SolveStatus::Stalled => Exit::MaxIterations,
        SolveStatus::Diverged => Exit::Diverged,
    };
    let params = vec![*atlas.params()];
    let mut report = Report::new("solve", cfg, params.clone());
    let mut files = vec![REPORT_FILE];
    if exit != Exit::Diverged {
        let mesh = build_mesh(&atlas, Some(&w))?;
        report.mesh = Some(mesh_report(&atlas, &mesh)?);
        write_obj(cfg, &mesh)?;
        files.insert(0, OBJ_FILE);
    }
    report.passed = exit == Exit::Success;
    report.solve = Some(sr);
    write(&cfg.out, REPORT_FILE, to_json(&report)?.as_bytes())?;
    write_manifest(cfg, Mode::Solve, &params, files)?;
    Ok(exit)
}
