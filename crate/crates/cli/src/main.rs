mod commands;
mod config;
mod output;

use clap::{Args, Parser, Subcommand};
use config::Config;
use dftfunclab::LabError;
use output::{Format, RunManifest};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

pub const EXIT_ASSERTION: u8 = 2;
pub const EXIT_CONVERGENCE: u8 = 3;
pub const EXIT_INPUT: u8 = 4;

#[derive(Parser, Debug)]
#[command(name = "dftfunclab", version, about = "Numerical laboratory for universal density functionals")]
pub struct Cli {
    /// Flat `key = value` file with `[section]` headers; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker cap (0 = all cores); falls back to DFTFUNCLAB_THREADS.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, value_parser = ["json", "csv"])]
    format: Option<String>,
    /// Write the primary output here instead of stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Write a run manifest (parameters, digests, timing) to this path.
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    /// Re-run a manifest and compare its input and output digests.
    #[arg(long, conflicts_with = "config")]
    replay: Option<PathBuf>,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Table of closed-form and quadrature constants.
    Constants,
    /// Epstein zeta function of a unit-covolume lattice.
    Zeta(ZetaArgs),
    /// Finite-crystal energies over a sweep of box sides.
    Crystal(CrystalArgs),
    #[command(subcommand)]
    Sce(SceCommand),
    #[command(subcommand)]
    Kinetic(KineticCommand),
    #[command(subcommand)]
    Fock(FockCommand),
    #[command(subcommand)]
    Bounds(BoundsCommand),
    /// Full acceptance suite.
    Verify(VerifyArgs),
}

#[derive(Args, Debug)]
pub struct ZetaArgs {
    #[arg(long)]
    pub lattice: Option<String>,
    #[arg(long)]
    pub s: Option<String>,
    #[arg(long)]
    pub tol: Option<String>,
    /// direct, ewald or auto
    #[arg(long)]
    pub method: Option<String>,
}

#[derive(Args, Debug)]
pub struct CrystalArgs {
    /// floating, clamped or modified
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub lattice: Option<String>,
    /// Riesz exponent; ignored when --kernel is given.
    #[arg(long)]
    pub s: Option<String>,
    #[arg(long)]
    pub kernel: Option<String>,
    /// Comma-separated box sides.
    #[arg(long = "L")]
    pub sides: Option<String>,
    /// Fluid layer thickness for the modified crystal.
    #[arg(long)]
    pub margin: Option<String>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub fit: Option<String>,
    /// Inverse powers of L used by the fit.
    #[arg(long = "fit-powers")]
    pub fit_powers: Option<String>,
}

#[derive(Subcommand, Debug)]
pub enum SceCommand {
    /// Multi-marginal transport for a density file.
    Solve(SceSolveArgs),
}

#[derive(Args, Debug)]
pub struct SceSolveArgs {
    #[arg(long)]
    pub density: Option<String>,
    #[arg(long)]
    pub n: Option<String>,
    #[arg(long)]
    pub kernel: Option<String>,
    /// lp or sinkhorn
    #[arg(long)]
    pub solver: Option<String>,
    /// open or periodic
    #[arg(long)]
    pub boundary: Option<String>,
    /// Write the coupling plan to this JSON file.
    #[arg(long)]
    pub emit: Option<String>,
}

#[derive(Subcommand, Debug)]
pub enum KineticCommand {
    /// Grand-canonical kinetic functional on a periodic grid.
    Tgc(TgcArgs),
    /// Explicit trial states and their inequality slacks.
    Trial(TrialArgs),
}

#[derive(Args, Debug)]
pub struct TgcArgs {
    #[arg(long)]
    pub density: Option<String>,
    #[arg(long)]
    pub tol: Option<String>,
}

#[derive(Args, Debug)]
pub struct TrialArgs {
    /// fermi, marchyoung or layercake
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub density: Option<String>,
    #[arg(long)]
    pub n: Option<String>,
    /// Layer-cake profile width.
    #[arg(long)]
    pub width: Option<String>,
    /// Free Fermi sea: grid cells.
    #[arg(long)]
    pub cells: Option<String>,
    /// Free Fermi sea: ring length.
    #[arg(long)]
    pub length: Option<String>,
    /// Free Fermi sea: density.
    #[arg(long)]
    pub rho0: Option<String>,
}

#[derive(Subcommand, Debug)]
pub enum FockCommand {
    /// Legendre dual of the lattice functional at a given occupation profile.
    Dual(FockDualArgs),
    /// Sector ground energies at a potential and their convexity in N.
    Scan(FockScanArgs),
}

#[derive(Args, Debug)]
pub struct FockDualArgs {
    #[arg(long)]
    pub sites: Option<String>,
    #[arg(long)]
    pub kernel: Option<String>,
    #[arg(long)]
    pub g: Option<String>,
    /// Density file; its row count fixes the number of sites.
    #[arg(long)]
    pub density: Option<String>,
    /// Comma-separated site occupations (alternative to --density).
    #[arg(long)]
    pub rho: Option<String>,
    /// gc or l
    #[arg(long)]
    pub mode: Option<String>,
}

#[derive(Args, Debug)]
pub struct FockScanArgs {
    #[arg(long)]
    pub sites: Option<String>,
    #[arg(long)]
    pub kernel: Option<String>,
    #[arg(long)]
    pub g: Option<String>,
    /// Comma-separated site potential.
    #[arg(long)]
    pub potential: Option<String>,
}

#[derive(Subcommand, Debug)]
pub enum BoundsCommand {
    /// Local-density error term and bracket for a density file.
    Lda(LdaArgs),
    /// Scaling exponent of the optimized error under dilation.
    Probe(ProbeArgs),
}

#[derive(Args, Debug)]
pub struct LdaArgs {
    #[arg(long)]
    pub density: Option<String>,
    #[arg(long = "C")]
    pub constant: Option<String>,
    /// quantum or classical
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub optimize: Option<String>,
    /// Fixed smoothing scale when not optimizing.
    #[arg(long)]
    pub epsilon: Option<String>,
    /// Spin degeneracy.
    #[arg(long)]
    pub q: Option<String>,
}

#[derive(Args, Debug)]
pub struct ProbeArgs {
    #[arg(long)]
    pub mode: Option<String>,
    /// Particle-number sweep `start:stop:factor`.
    #[arg(long = "N")]
    pub particles: Option<String>,
    #[arg(long = "C")]
    pub constant: Option<String>,
    /// Profile file (three-dimensional); defaults to a unit Gaussian.
    #[arg(long)]
    pub density: Option<String>,
    #[arg(long)]
    pub cells: Option<String>,
    #[arg(long = "half-width")]
    pub half_width: Option<String>,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// Comma-separated criterion numbers (default: all).
    #[arg(long)]
    pub criteria: Option<String>,
}

fn exit_code(err: &LabError) -> u8 {
    match err {
        LabError::Assertion(_) => EXIT_ASSERTION,
        LabError::Convergence { .. } => EXIT_CONVERGENCE,
        LabError::Input(_) | LabError::Budget(_) | LabError::Infeasible(_) => EXIT_INPUT,
    }
}

fn thread_cap(flag: Option<usize>) -> Result<usize, LabError> {
    if let Some(t) = flag {
        return Ok(t);
    }
    match std::env::var("DFTFUNCLAB_THREADS") {
        Ok(v) if !v.trim().is_empty() => v.trim().parse().map_err(|_| LabError::Input(format!("DFTFUNCLAB_THREADS=`{v}` is not a count"))),
        _ => Ok(0),
    }
}

fn parse(argv: &[String]) -> Result<Cli, ExitCode> {
    Cli::try_parse_from(argv).map_err(|e| {
        let code = if e.use_stderr() { EXIT_INPUT } else { 0 };
        let _ = e.print();
        ExitCode::from(code)
    })
}

fn run(cli: Cli) -> Result<u8, LabError> {
    let threads = thread_cap(cli.threads)?;
    dftfunclab::parallel::init_global_threads(threads);
    if let Some(path) = &cli.replay {
        return replay(path);
    }
    let config = match &cli.config {
        Some(p) => Config::parse(&std::fs::read_to_string(p).map_err(|e| LabError::Input(format!("{}: {e}", p.display())))?)?,
        None => Config::default(),
    };
    let format: Format = cli.format.as_deref().unwrap_or("json").parse()?;
    let command = cli.command.ok_or_else(|| LabError::Input("missing subcommand (see --help)".into()))?;
    let start = Instant::now();
    let mut ctx = commands::Context::new(config);
    let emission = commands::dispatch(&mut ctx, command)?;
    let primary = emission.render(format)?;
    match &cli.output {
        Some(p) => output::write_file(p, &primary)?,
        None => print!("{primary}"),
    }
    let mut output_digests = std::collections::BTreeMap::new();
    output_digests.insert("primary".to_string(), output::sha256_hex(primary.as_bytes()));
    for (path, text) in &emission.side_files {
        output::write_file(path, text)?;
        output_digests.insert(path.display().to_string(), output::sha256_hex(text.as_bytes()));
    }
    if let Some(p) = &cli.manifest {
        let mut args = Vec::new();
        if format == Format::Csv {
            args.extend(["--format".to_string(), "csv".to_string()]);
        }
        args.extend(ctx.words.iter().cloned());
        args.extend(emission.inputs.iter().map(|(k, v)| format!("--{k}={v}")));
        RunManifest {
            subcommand: ctx.words.join(" "),
            args,
            parameters: emission.inputs.clone(),
            input_digests: ctx.input_digests.clone(),
            output_digests,
            seed: output::SEED,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            threads,
            wall_time_seconds: start.elapsed().as_secs_f64(),
            tolerance_outcomes: emission.assertions.clone(),
        }
        .save(p)?;
    }
    if emission.failed() {
        for a in emission.assertions.iter().filter(|a| !a.passed) {
            eprintln!("assertion failed: {} (value {:e}, tolerance {:e})", a.name, a.value, a.tolerance);
        }
        return Ok(EXIT_ASSERTION);
    }
    Ok(0)
}

/// Re-runs a manifest from its recorded arguments and compares every digest.
fn replay(path: &std::path::Path) -> Result<u8, LabError> {
    let manifest = RunManifest::load(path)?;
    let mut argv = vec!["dftfunclab".to_string()];
    argv.extend(manifest.args.iter().cloned());
    let cli = Cli::try_parse_from(&argv).map_err(|e| LabError::Input(format!("manifest arguments: {e}")))?;
    let format: Format = cli.format.as_deref().unwrap_or("json").parse()?;
    let command = cli.command.ok_or_else(|| LabError::Input("manifest has no subcommand".into()))?;
    let mut ctx = commands::Context::new(Config::default());
    let emission = commands::dispatch(&mut ctx, command)?;
    let primary = emission.render(format)?;
    let mut mismatches = Vec::new();
    if ctx.input_digests != manifest.input_digests {
        return Err(LabError::Input("input files changed since the manifest was written".into()));
    }
    if manifest.output_digests.get("primary") != Some(&output::sha256_hex(primary.as_bytes())) {
        mismatches.push("primary".to_string());
    }
    for (p, text) in &emission.side_files {
        let key = p.display().to_string();
        if manifest.output_digests.get(&key) != Some(&output::sha256_hex(text.as_bytes())) {
            mismatches.push(key);
        }
    }
    print!("{primary}");
    if mismatches.is_empty() {
        eprintln!("replay reproduced {} output digest(s)", manifest.output_digests.len());
        Ok(0)
    } else {
        eprintln!("replay digest mismatch: {}", mismatches.join(", "));
        Ok(EXIT_ASSERTION)
    }
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = match parse(&argv) {
        Ok(c) => c,
        Err(code) => return code,
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
