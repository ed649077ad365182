//! Run configuration: a TOML file plus command-line overrides.

use crate::CliError;
use fbms_core::global_solver::{SolveMode, SolverOptions};
use fbms_core::matching_solver::Genus;
use fbms_core::surface_builder::{Resolution, ResolutionPreset};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Build,
    Validate,
    Solve,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Build => "build",
            Mode::Validate => "validate",
            Mode::Solve => "solve",
        }
    }
}

/// Validation suites, in report order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Identities,
    Green,
    Construction,
    Estimates,
    Linear,
    Corrector,
}

impl Suite {
    pub const DEFAULT: [Suite; 5] = [Suite::Identities, Suite::Green, Suite::Construction, Suite::Estimates, Suite::Linear];
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub method: SolveMode,
    pub tol: f64,
    pub max_iter: usize,
    pub nu: f64,
    pub delta: f64,
    pub alpha: f64,
    pub contraction_pairs: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        let o = SolverOptions::default();
        SolverSection {
            method: o.mode,
            tol: o.tol,
            max_iter: o.max_iter,
            nu: o.nu,
            delta: o.delta,
            alpha: o.alpha,
            contraction_pairs: o.contraction_pairs,
        }
    }
}

impl SolverSection {
    pub fn options(&self) -> SolverOptions {
        SolverOptions {
            mode: self.method,
            tol: self.tol,
            max_iter: self.max_iter,
            nu: self.nu,
            delta: self.delta,
            alpha: self.alpha,
            contraction_pairs: self.contraction_pairs,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidateSection {
    /// Sweep used by the construction suite.
    pub ns: Vec<usize>,
    pub suites: Vec<Suite>,
    /// Amplitude of a boundary-layer bump added to the surfaces of the
    /// construction suite. Nonzero values exist to exercise the failure path.
    pub perturb_cutoff: f64,
}

impl Default for ValidateSection {
    fn default() -> Self {
        ValidateSection { ns: vec![8, 12, 16], suites: Suite::DEFAULT.to_vec(), perturb_cutoff: 0.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub n: usize,
    pub genus: u32,
    pub resolution: ResolutionPreset,
    pub mode: Option<Mode>,
    pub out: PathBuf,
    pub solver: SolverSection,
    pub validate: ValidateSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            n: 12,
            genus: 0,
            resolution: ResolutionPreset::Default,
            mode: None,
            out: PathBuf::from("out"),
            solver: SolverSection::default(),
            validate: ValidateSection::default(),
        }
    }
}

/// Values given on the command line; each one replaces the file value.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub n: Option<usize>,
    pub genus: Option<u32>,
    pub resolution: Option<ResolutionPreset>,
    pub out: Option<PathBuf>,
    pub method: Option<SolveMode>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
}

const MAX_N: usize = 256;

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Usage(format!("config: {}", e.message())))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn apply(mut self, mode: Mode, o: &Overrides) -> Self {
        self.mode = Some(mode);
        if let Some(n) = o.n {
            self.n = n;
        }
        if let Some(g) = o.genus {
            self.genus = g;
        }
        if let Some(r) = o.resolution {
            self.resolution = r;
        }
        if let Some(out) = &o.out {
            self.out = out.clone();
        }
        if let Some(m) = o.method {
            self.solver.method = m;
        }
        if let Some(t) = o.tol {
            self.solver.tol = t;
        }
        if let Some(k) = o.max_iter {
            self.solver.max_iter = k;
        }
        self
    }

    /// Checks run before any computation.
    pub fn validate(&self) -> Result<(), CliError> {
        let usage = |m: String| Err(CliError::Usage(m));
        if !(2..=MAX_N).contains(&self.n) {
            return usage(format!("n = {} not in [2, {MAX_N}]", self.n));
        }
        if self.genus > 1 {
            return usage(format!("genus = {} not in {{0, 1}}", self.genus));
        }
        if let Some(&n) = self.validate.ns.iter().find(|&&n| !(2..=MAX_N).contains(&n)) {
            return usage(format!("validate.ns contains {n}, not in [2, {MAX_N}]"));
        }
        if self.validate.suites.is_empty() {
            return usage("validate.suites is empty".into());
        }
        if !(self.validate.perturb_cutoff.is_finite() && self.validate.perturb_cutoff >= 0.0) {
            return usage(format!("validate.perturb_cutoff = {}", self.validate.perturb_cutoff));
        }
        if self.solver.max_iter == 0 {
            return usage("solver.max_iter must be positive".into());
        }
        if self.solver.contraction_pairs == 0 {
            return usage("solver.contraction_pairs must be positive".into());
        }
        self.solver.options().validate().map_err(|e| CliError::Usage(format!("solver: {e}")))
    }

    pub fn genus(&self) -> Genus {
        Genus::from_int(self.genus).expect("validated genus")
    }

    pub fn resolution(&self) -> Resolution {
        Resolution::new(self.resolution)
    }

    pub fn suites(&self) -> Vec<Suite> {
        let mut s = self.validate.suites.clone();
        s.sort();
        s.dedup();
        s
    }
}
