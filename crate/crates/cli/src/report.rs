//! Versioned JSON artifacts.

use crate::checks::Check;
use crate::config::RunConfig;
use crate::CliError;
use fbms_core::global_solver::SolveReport;
use fbms_core::matching_solver::MatchingParams;
use fbms_core::surface_builder::MeshReport;
use serde::Serialize;

pub const REPORT_SCHEMA: &str = "fbms-report";
pub const MANIFEST_SCHEMA: &str = "fbms-manifest";
pub const SCHEMA_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Serialize)]
pub struct Report<'a> {
    pub schema: &'static str,
    pub schema_version: u32,
    pub tool_version: &'static str,
    pub command: &'static str,
    pub config: &'a RunConfig,
    pub params: Vec<MatchingParams>,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mesh: Option<MeshReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checks: Option<Vec<Check>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solve: Option<SolveReport>,
}

impl<'a> Report<'a> {
    pub fn new(command: &'static str, config: &'a RunConfig, params: Vec<MatchingParams>) -> Self {
        Report {
            schema: REPORT_SCHEMA,
            schema_version: SCHEMA_VERSION,
            tool_version: TOOL_VERSION,
            command,
            config,
            params,
            passed: false,
            mesh: None,
            checks: None,
            solve: None,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub schema: &'static str,
    pub schema_version: u32,
    pub tool_version: &'static str,
    pub command: &'static str,
    pub config: &'a RunConfig,
    pub params: Vec<MatchingParams>,
    pub files: Vec<&'static str>,
}

pub fn to_json<T: Serialize>(v: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| CliError::Internal(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// Reads the schema header of a report or manifest, rejecting versions this build does not know.
pub fn read_header(text: &str) -> Result<(String, u32), CliError> {
    let v: serde_json::Value = serde_json::from_str(text).map_err(|e| CliError::Internal(format!("invalid JSON: {e}")))?;
    let schema = v.get("schema").and_then(|s| s.as_str()).unwrap_or_default().to_string();
    if schema != REPORT_SCHEMA && schema != MANIFEST_SCHEMA {
        return Err(CliError::Internal(format!("unknown schema '{schema}'")));
    }
    let version = v.get("schema_version").and_then(|s| s.as_u64());
    match version {
        Some(k) if k == SCHEMA_VERSION as u64 => Ok((schema, SCHEMA_VERSION)),
        Some(k) => Err(CliError::Internal(format!("unsupported {schema} version {k}, expected {SCHEMA_VERSION}"))),
        None => Err(CliError::Internal("missing schema_version".into())),
    }
}
