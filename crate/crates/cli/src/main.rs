use clap::{Args, Parser, Subcommand};
use fbms_cli::commands::run;
use fbms_cli::config::{Mode, Overrides, RunConfig};
use fbms_cli::Exit;
use fbms_core::global_solver::SolveMode;
use fbms_core::surface_builder::ResolutionPreset;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "fbms", version, about = "Free boundary minimal surfaces in the unit ball")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build the approximate surface and export its mesh.
    Build(RunArgs),
    /// Run the validation suites and write a report of named checks.
    Validate(RunArgs),
    /// Solve for the corrector and export the corrected mesh.
    Solve(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    genus: Option<u32>,
    /// coarse, default or fine
    #[arg(long)]
    resolution: Option<ResolutionPreset>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// newton or banach
    #[arg(long)]
    method: Option<SolveMode>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { Exit::Usage.code() } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let (mode, args) = match cli.cmd {
        Cmd::Build(a) => (Mode::Build, a),
        Cmd::Validate(a) => (Mode::Validate, a),
        Cmd::Solve(a) => (Mode::Solve, a),
    };
    let overrides = Overrides {
        n: args.n,
        genus: args.genus,
        resolution: args.resolution,
        out: args.out,
        method: args.method,
        tol: args.tol,
        max_iter: args.max_iter,
    };
    let result = match &args.config {
        Some(path) => RunConfig::load(path),
        None => Ok(RunConfig::default()),
    }
    .map(|c| c.apply(mode, &overrides))
    .and_then(|cfg| run(mode, &cfg));
    let exit = match result {
        Ok(e) => e,
        Err(e) => {
            eprintln!("fbms: {e}");
            e.exit()
        }
    };
    ExitCode::from(exit.code() as u8)
}
