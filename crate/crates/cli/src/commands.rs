use crate::config::{parse_geometric, parse_list, Config, Resolver};
use crate::output::{sha256_hex, Assertion, Emission, Table};
use crate::{BoundsCommand, Command, FockCommand, KineticCommand, SceCommand};
use dftfunclab::bounds::{self, DensityIntegrals, ErrorMode};
use dftfunclab::fock::{self, DualMode, FockOptions, LatticeSystem};
use dftfunclab::kinetic::{self, DensityMatrix, PeriodicOperator, TgcOptions};
use dftfunclab::lattice::{self, CrystalMode, ZetaMethod};
use dftfunclab::model::{pair_cost_matrix, parse_density_csv, Boundary, DiscreteDensity, Grid, InteractionKernel, Lattice, LatticeName};
use dftfunclab::sce::{self, MmotOptions, Solver};
use dftfunclab::{constants, verify, LabError, Result};
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::path::PathBuf;

/// Slack tolerance for inequality checks reported by the commands.
const SLACK_TOL: f64 = 1e-9;

pub struct Context {
    config: Config,
    pub input_digests: BTreeMap<String, String>,
    /// Subcommand words, e.g. `["sce", "solve"]`.
    pub words: Vec<String>,
}

impl Context {
    pub fn new(config: Config) -> Self {
        Context { config, input_digests: BTreeMap::new(), words: Vec::new() }
    }
}

/// Reads a density file and records its digest.
fn read_density(digests: &mut BTreeMap<String, String>, path: &str, boundary: Boundary) -> Result<DiscreteDensity> {
    let text = std::fs::read_to_string(path).map_err(|e| LabError::Input(format!("{path}: {e}")))?;
    digests.insert(path.to_string(), sha256_hex(text.as_bytes()));
    parse_density_csv(&text, boundary)
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable result")
}

fn boundary(text: &str) -> Result<Boundary> {
    match text {
        "open" => Ok(Boundary::Open),
        "periodic" => Ok(Boundary::Periodic),
        _ => Err(LabError::Input(format!("unknown boundary `{text}`"))),
    }
}

fn kernel(text: &str) -> Result<InteractionKernel> {
    InteractionKernel::parse(text)
}

pub fn dispatch(ctx: &mut Context, command: Command) -> Result<Emission> {
    match command {
        Command::Constants => {
            ctx.words = vec!["constants".into()];
            constants_cmd()
        }
        Command::Zeta(a) => {
            ctx.words = vec!["zeta".into()];
            zeta_cmd(ctx, a)
        }
        Command::Crystal(a) => {
            ctx.words = vec!["crystal".into()];
            crystal_cmd(ctx, a)
        }
        Command::Sce(SceCommand::Solve(a)) => {
            ctx.words = vec!["sce".into(), "solve".into()];
            sce_solve(ctx, a)
        }
        Command::Kinetic(KineticCommand::Tgc(a)) => {
            ctx.words = vec!["kinetic".into(), "tgc".into()];
            kinetic_tgc(ctx, a)
        }
        Command::Kinetic(KineticCommand::Trial(a)) => {
            ctx.words = vec!["kinetic".into(), "trial".into()];
            kinetic_trial(ctx, a)
        }
        Command::Fock(FockCommand::Dual(a)) => {
            ctx.words = vec!["fock".into(), "dual".into()];
            fock_dual(ctx, a)
        }
        Command::Fock(FockCommand::Scan(a)) => {
            ctx.words = vec!["fock".into(), "scan".into()];
            fock_scan(ctx, a)
        }
        Command::Bounds(BoundsCommand::Lda(a)) => {
            ctx.words = vec!["bounds".into(), "lda".into()];
            bounds_lda(ctx, a)
        }
        Command::Bounds(BoundsCommand::Probe(a)) => {
            ctx.words = vec!["bounds".into(), "probe".into()];
            bounds_probe(ctx, a)
        }
        Command::Verify(a) => {
            ctx.words = vec!["verify".into()];
            verify_cmd(ctx, a)
        }
    }
}

fn constants_cmd() -> Result<Emission> {
    let table = constants::constant_table()?;
    Ok(Emission::new("constants", BTreeMap::new(), to_value(&table)))
}

fn zeta_cmd(ctx: &mut Context, a: crate::ZetaArgs) -> Result<Emission> {
    let mut r = Resolver::new(&ctx.config, "zeta");
    let name: LatticeName = r.value("lattice", a.lattice, "Z1")?;
    let s: f64 = r.required("s", a.s)?;
    let tol: f64 = r.value("tol", a.tol, "1e-10")?;
    let method: ZetaMethod = r.value("method", a.method, "auto")?;
    let z = lattice::epstein_zeta(&Lattice::new(name), s, tol, method)?;
    let mut e = Emission::new("zeta", r.resolved, to_value(&z));
    e.tolerances.insert("tol".into(), tol);
    Ok(e)
}

fn crystal_cmd(ctx: &mut Context, a: crate::CrystalArgs) -> Result<Emission> {
    let mut r = Resolver::new(&ctx.config, "crystal");
    let mode: CrystalMode = r.value("mode", a.mode, "floating")?;
    let name: LatticeName = r.value("lattice", a.lattice, "Z1")?;
    let lat = Lattice::new(name);
    let kernel_text: Option<String> = r.optional("kernel", a.kernel)?;
    let kern = match kernel_text {
        Some(k) => kernel(&k)?,
        None => {
            let s: f64 = r.required("s", a.s)?;
            if lat.dim() == 3 && s == 1.0 {
                InteractionKernel::Coulomb3d
            } else {
                InteractionKernel::Riesz { s }
            }
        }
    };
    let sides = r.list("L", a.sides, "4,8,16,32")?;
    let margin: f64 = r.value("margin", a.margin, "2")?;
    let fit: bool = r.value("fit", a.fit, "false")?;
    let powers = r.list("fit-powers", a.fit_powers, "1")?;
    let mut rows = Vec::new();
    let mut table = Table { columns: vec!["L".into(), "value".into(), "error_estimate".into()], rows: Vec::new() };
    for &side in &sides {
        let (value, error, detail) = match mode {
            CrystalMode::Floating => {
                let b = lattice::floating_indirect(&lat, side, &kern)?;
                (b.per_volume, b.error, to_value(&b))
            }
            CrystalMode::Clamped => {
                let b = lattice::jellium_clamped(&lat, side, &kern)?;
                (b.per_volume, b.error, to_value(&b))
            }
            CrystalMode::Modified => {
                let b = lattice::floating_modified(&lat, side, margin, &kern)?;
                (b.per_particle, b.error * b.container_side.powi(lat.dim() as i32) / b.particles as f64, to_value(&b))
            }
        };
        table.rows.push(vec![side, value, error]);
        rows.push(json!({ "L": side, "value": value, "error_estimate": error, "breakdown": detail }));
    }
    let fit_value = if fit {
        let values: Vec<f64> = table.rows.iter().map(|row| row[1]).collect();
        Some(lattice::fit_inverse_powers(&sides, &values, &powers)?)
    } else {
        None
    };
    let outputs = json!({ "kernel": to_value(&kern), "rows": rows, "fit": fit_value.as_ref().map(to_value) });
    let mut e = Emission::new("crystal", r.resolved, outputs);
    e.table = Some(table);
    Ok(e)
}

fn plan_document(res: &sce::MmotResult) -> Value {
    let tuples: Vec<&Vec<usize>> = res.plan.tuples.iter().map(|(t, _)| t).collect();
    let masses: Vec<f64> = res.plan.tuples.iter().map(|(_, m)| *m).collect();
    json!({
        "particles": res.plan.particles,
        "cells": res.plan.cells,
        "tuples": tuples,
        "masses": masses,
        "potential": res.potential.values,
        "value": res.value,
        "gap": res.gap,
    })
}

fn sce_solve(ctx: &mut Context, a: crate::SceSolveArgs) -> Result<Emission> {
    let mut r = Resolver::new(&ctx.config, "sce");
    let path: String = r.required("density", a.density)?;
    let bnd: String = r.value("boundary", a.boundary, "open")?;
    let n: usize = r.required("n", a.n)?;
    let kern: String = r.value("kernel", a.kernel, "riesz:1")?;
    let solver: Solver = r.value("solver", a.solver, "lp")?;
    let emit: Option<String> = r.optional("emit", a.emit)?;
    let resolved = r.resolved;
    let rho = read_density(&mut ctx.input_digests, &path, boundary(&bnd)?)?;
    let kern = kernel(&kern)?;
    let opts = MmotOptions::default();
    let res = sce::solve_mmot(&rho, n, &kern, solver, &opts)?;
    let costs = pair_cost_matrix(&rho.grid, &kern)?;
    let support = sce::verify_support(&res.plan, &res.potential, &costs, 1e-7);
    let outputs = json!({
        "value": res.value,
        "dual_value": res.dual_value,
        "gap": res.gap,
        "potential": res.potential.values,
        "support": to_value(&support),
    });
    let mut e = Emission::new("sce solve", resolved, outputs);
    e.iterations = Some(res.iterations);
    e.gap = Some(res.gap);
    e.tolerances.insert("support".into(), 1e-7);
    if solver == Solver::Lp {
        e.tolerances.insert("relative_gap".into(), 1e-9);
        e.assertions.push(Assertion::at_most("relative duality gap", res.gap, 1e-9));
        e.assertions.push(Assertion { passed: support.passed, ..Assertion::at_most("complementary slackness", support.max_support_excess, 1e-7) });
    }
    if let Some(p) = emit {
        let text = serde_json::to_string_pretty(&plan_document(&res)).expect("plan serializes") + "\n";
        e.side_files.push((PathBuf::from(p), text));
    }
    Ok(e)
}

fn matrix_slacks(gamma: &DensityMatrix) -> Result<(Value, Vec<Assertion>)> {
    let op = PeriodicOperator::new(&gamma.grid)?;
    let energy = gamma.energy(&op);
    let ho = kinetic::hoffmann_ostenhof_check(gamma, &op);
    let lt = kinetic::lieb_thirring_check(gamma, &op, 1.0)?;
    let rho = gamma.density()?;
    // only meaningful when the support is a proper sub-interval (a hard wall)
    let walled = rho.masses.iter().any(|&m| m <= 0.0);
    let ly = walled.then(|| kinetic::li_yau_check(&rho, energy));
    let (lo, hi) = gamma.spectrum_range();
    let slacks = json!({
        "hoffmann_ostenhof": ho,
        "lieb_thirring": lt,
        "li_yau": ly,
        "spectrum": [lo, hi],
    });
    let mut assertions = vec![
        Assertion::slack("Hoffmann-Ostenhof", ho, SLACK_TOL),
        Assertion::slack("Lieb-Thirring (proven constant)", lt, SLACK_TOL),
        Assertion::slack("0 <= gamma", lo, SLACK_TOL),
        Assertion::slack("gamma <= 1", 1.0 - hi, SLACK_TOL),
    ];
    if let Some(ly) = ly {
        assertions.push(Assertion::slack("Li-Yau", ly, SLACK_TOL));
    }
    Ok((slacks, assertions))
}

fn kinetic_tgc(ctx: &mut Context, a: crate::TgcArgs) -> Result<Emission> {
    let mut r = Resolver::new(&ctx.config, "kinetic");
    let path: String = r.required("density", a.density)?;
    let tol: f64 = r.value("tol", a.tol, "1e-9")?;
    let resolved = r.resolved;
    let rho = read_density(&mut ctx.input_digests, &path, Boundary::Periodic)?;
    let opts = TgcOptions { tol, ..TgcOptions::default() };
    let res = kinetic::solve_tgc(&rho, &opts)?;
    if !res.report.converged {
        return Err(LabError::Convergence { message: "kinetic dual did not close the gap".into(), residual: res.report.gap });
    }
    let (slacks, assertions) = matrix_slacks(&res.gamma)?;
    let outputs = json!({
        "value": res.value,
        "primal": res.report.primal,
        "dual": res.report.dual,
        "gap": res.report.gap,
        "potential": res.report.potential,
        "slacks": slacks,
    });
    let mut e = Emission::new("kinetic tgc", resolved, outputs);
    e.iterations = Some(res.report.iterations);
    e.gap = Some(res.report.gap);
    e.tolerances.insert("tol".into(), tol);
    e.tolerances.insert("slack".into(), SLACK_TOL);
    e.assertions = assertions;
    Ok(e)
}

fn kinetic_trial(ctx: &mut Context, a: crate::TrialArgs) -> Result<Emission> {
    let mut r = Resolver::new(&ctx.config, "kinetic");
    let mode: String = r.value("mode", a.mode, "fermi")?;
    let (outputs, gamma, mut extra) = match mode.as_str() {
        "fermi" => {
            let cells: usize = r.value("cells", a.cells, "64")?;
            let length: f64 = r.value("length", a.length, "10")?;
            let rho0: f64 = r.value("rho0", a.rho0, "1")?;
            let grid = Grid::line(cells, length, Boundary::Periodic)?;
            let gamma = kinetic::free_fermi(&grid, rho0)?;
            let op = PeriodicOperator::new(&grid)?;
            let energy = gamma.energy(&op);
            let per_length = energy / length;
            let target = constants::thomas_fermi_constant(1) * rho0.powi(3);
            (json!({ "energy": energy, "energy_per_length": per_length, "thomas_fermi": target }), gamma, Vec::new())
        }
        "marchyoung" => {
            let path: String = r.required("density", a.density)?;
            let rho = read_density(&mut ctx.input_digests, &path, Boundary::Periodic)?;
            let n: usize = r.value("n", a.n, &format!("{}", rho.total().round()))?;
            let res = kinetic::march_young(&rho, n)?;
            let slack = vec![
                Assertion::slack("orbital bound", res.slack, SLACK_TOL),
                Assertion::at_most("orthonormality error", res.orthonormality_error, 1e-8),
            ];
            (to_value(&res), res.gamma.clone(), slack)
        }
        "layercake" => {
            let path: String = r.required("density", a.density)?;
            let width: f64 = r.value("width", a.width, "1")?;
            let rho = read_density(&mut ctx.input_digests, &path, Boundary::Periodic)?;
            let res = kinetic::layer_cake_dm(&rho, width)?;
            let slack = vec![Assertion::slack("gradient-corrected upper bound", res.upper_report - res.energy, SLACK_TOL)];
            (to_value(&res), res.gamma.clone(), slack)
        }
        other => return Err(LabError::Input(format!("unknown trial mode `{other}`"))),
    };
    let (slacks, mut assertions) = matrix_slacks(&gamma)?;
    assertions.append(&mut extra);
    let mut e = Emission::new("kinetic trial", r.resolved, json!({ "state": outputs, "slacks": slacks }));
    e.tolerances.insert("slack".into(), SLACK_TOL);
    e.assertions = assertions;
    Ok(e)
}

fn fock_dual(ctx: &mut Context, a: crate::FockDualArgs) -> Result<Emission> {
    let mut r = Resolver::new(&ctx.config, "fock");
    let path: Option<String> = r.optional("density", a.density)?;
    let listed: Option<String> = r.optional("rho", a.rho)?;
    let kern: String = r.value("kernel", a.kernel, "riesz:1")?;
    let g: f64 = r.value("g", a.g, "1")?;
    let mode: DualMode = r.value("mode", a.mode, "gc")?;
    let rho: Vec<f64> = match (path, listed) {
        (Some(p), None) => {
            let d = read_density(&mut ctx.input_digests, &p, Boundary::Periodic)?;
            d.masses
        }
        (None, Some(text)) => parse_list(&text).map_err(|e| LabError::Input(format!("--rho: {e}")))?,
        _ => return Err(LabError::Input("give exactly one of --density and --rho".into())),
    };
    let sites: usize = r.value("sites", a.sites, &rho.len().to_string())?;
    if sites != rho.len() {
        return Err(LabError::Input(format!("{} occupations for {sites} sites", rho.len())));
    }
    let resolved = r.resolved;
    let sys = LatticeSystem::new(sites, sites as f64, &kernel(&kern)?, g)?;
    let opts = FockOptions::default();
    let res = fock::levy_lieb_dual(&sys, &rho, mode, &opts)?;
    let outputs = json!({
        "value": res.value,
        "primal": res.primal,
        "gap": res.gap,
        "potential": res.potential,
        "sector_weights": res.sector_weights,
    });
    let mut e = Emission::new("fock dual", resolved, outputs);
    e.gap = Some(res.gap);
    e.iterations = Some(res.trace.len());
    e.tolerances.insert("gap".into(), opts.gap_tol);
    e.assertions.push(Assertion::slack("weak duality", res.primal - res.value, SLACK_TOL));
    Ok(e)
}

fn fock_scan(ctx: &mut Context, a: crate::FockScanArgs) -> Result<Emission> {
    let mut r = Resolver::new(&ctx.config, "fock");
    let kern: String = r.value("kernel", a.kernel, "riesz:1")?;
    let g: f64 = r.value("g", a.g, "1")?;
    let potential = r.list("potential", a.potential, "")?;
    let sites: usize = r.value("sites", a.sites, &potential.len().max(1).to_string())?;
    let v = if potential.is_empty() { vec![0.0; sites] } else { potential };
    if v.len() != sites {
        return Err(LabError::Input(format!("{} potential values for {sites} sites", v.len())));
    }
    let sys = LatticeSystem::new(sites, sites as f64, &kernel(&kern)?, g)?;
    let report = fock::convexity_scan(&sys, &v)?;
    let mut e = Emission::new("fock scan", r.resolved, to_value(&report));
    e.table = Some(Table {
        columns: vec!["N".into(), "energy".into()],
        rows: report.energies.iter().enumerate().map(|(n, &en)| vec![n as f64, en]).collect(),
    });
    Ok(e)
}

fn bounds_lda(ctx: &mut Context, a: crate::LdaArgs) -> Result<Emission> {
    let mut r = Resolver::new(&ctx.config, "bounds");
    let path: String = r.required("density", a.density)?;
    let constant: f64 = r.value("C", a.constant, "1")?;
    let mode: ErrorMode = r.value("mode", a.mode, "quantum")?;
    let optimize: bool = r.value("optimize", a.optimize, "true")?;
    let epsilon: Option<f64> = r.optional("epsilon", a.epsilon)?;
    let q: f64 = r.value("q", a.q, "1")?;
    let resolved = r.resolved;
    let rho = read_density(&mut ctx.input_digests, &path, Boundary::Open)?;
    let integrals = DensityIntegrals::of(&rho)?;
    let series = bounds::lda_error_series(&integrals, constant, mode);
    let chosen = if optimize {
        to_value(&bounds::optimize_series(&series))
    } else {
        let eps = epsilon.ok_or_else(|| LabError::Input("--epsilon is required without --optimize".into()))?;
        json!({ "epsilon": eps, "value": bounds::lda_error(&rho, eps, constant, mode)?, "terms": series.breakdown(eps) })
    };
    let bracket = if rho.grid.dim() == 3 { Some(to_value(&bounds::lda_bracket(&rho, constant, q, mode)?)) } else { None };
    let outputs = json!({ "integrals": to_value(&integrals), "error": chosen, "bracket": bracket });
    Ok(Emission::new("bounds lda", resolved, outputs))
}

fn bounds_probe(ctx: &mut Context, a: crate::ProbeArgs) -> Result<Emission> {
    let mut r = Resolver::new(&ctx.config, "bounds");
    let mode: ErrorMode = r.value("mode", a.mode, "quantum")?;
    let sweep: String = r.value("N", a.particles, "1e3:1e9:10")?;
    let constant: f64 = r.value("C", a.constant, "1")?;
    let path: Option<String> = r.optional("density", a.density)?;
    let particles = parse_geometric(&sweep)?;
    let profile = match path {
        Some(p) => {
            let resolved_rho = read_density(&mut ctx.input_digests, &p, Boundary::Open)?;
            DensityIntegrals::of(&resolved_rho)?
        }
        None => {
            let cells: usize = r.value("cells", a.cells, "32")?;
            let half: f64 = r.value("half-width", a.half_width, "7")?;
            DensityIntegrals::of(&bounds::gaussian_profile(cells, half)?)?
        }
    };
    let probe = bounds::exponent_probe(&profile, &particles, constant, mode)?;
    let table = Table {
        columns: vec!["N".into(), "epsilon".into(), "error".into()],
        rows: (0..probe.particles.len()).map(|i| vec![probe.particles[i], probe.epsilons[i], probe.values[i]]).collect(),
    };
    let mut e = Emission::new("bounds probe", r.resolved, to_value(&probe));
    e.table = Some(table);
    Ok(e)
}

fn verify_cmd(ctx: &mut Context, a: crate::VerifyArgs) -> Result<Emission> {
    let mut r = Resolver::new(&ctx.config, "verify");
    let list = r.list("criteria", a.criteria, "1,2,3,4,5,6,7,8,9,10")?;
    let mut ids = Vec::new();
    for x in list {
        if x.fract() != 0.0 || !verify::CRITERIA.contains(&(x as u8)) {
            return Err(LabError::Input(format!("no criterion {x}")));
        }
        ids.push(x as u8);
    }
    let report = verify::run(&ids)?;
    for (c, secs) in report.criteria.iter().zip(&report.elapsed_seconds) {
        eprintln!("{} criterion {:>2} ({}) [{:.1}s]", if c.passed { "PASS" } else { "FAIL" }, c.id, c.title, secs);
    }
    let mut e = Emission::new("verify", r.resolved, to_value(&report));
    e.assertions = report
        .criteria
        .iter()
        .map(|c| Assertion { name: format!("criterion {}", c.id), value: if c.passed { 1.0 } else { 0.0 }, tolerance: 0.0, passed: c.passed })
        .collect();
    Ok(e)
}
