//! Spinless fermions on a small periodic ring: sector Hamiltonians in the
//! occupation basis, ground energies, and the Legendre duals that define the
//! convex canonical and grand-canonical functionals on the lattice.

use crate::dual::{self, AscentOptions, SmoothEval, SmoothedDual, StageRecord};
use crate::error::{input, LabError, Result};
use crate::kinetic::PeriodicOperator;
use crate::model::{Boundary, Grid, InteractionKernel};
use crate::sce::{self, lp, MmotOptions};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

pub const MAX_SITES: usize = 12;

/// Occupation-number basis of one particle-number sector.
#[derive(Debug, Clone)]
struct Sector {
    states: Vec<u32>,
    /// `H` without external potential.
    base: DMatrix<f64>,
}

#[derive(Debug, Clone)]
pub struct LatticeSystem {
    pub grid: Grid,
    pub kinetic: DMatrix<f64>,
    /// Pair interaction between distinct sites (diagonal unused).
    pub interaction: DMatrix<f64>,
    pub coupling: f64,
    sectors: Vec<Sector>,
}

fn hop_sign(state: u32, i: usize, j: usize) -> f64 {
    let (lo, hi) = if i < j { (i, j) } else { (j, i) };
    let mask = if hi - lo <= 1 { 0 } else { ((1u32 << (hi - lo - 1)) - 1) << (lo + 1) };
    if (state & mask).count_ones() % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

fn sector_states(sites: usize, n: usize) -> Vec<u32> {
    (0u32..(1u32 << sites)).filter(|s| s.count_ones() as usize == n).collect()
}

impl LatticeSystem {
    pub fn new(sites: usize, length: f64, kernel: &InteractionKernel, coupling: f64) -> Result<Self> {
        if sites == 0 || sites > MAX_SITES {
            return input(format!("the ring needs 1..={MAX_SITES} sites"));
        }
        if !(coupling >= 0.0) {
            return input("coupling must be nonnegative");
        }
        kernel.validate()?;
        let grid = Grid::line(sites, length, Boundary::Periodic)?;
        let kinetic = PeriodicOperator::new(&grid)?.matrix;
        let interaction = DMatrix::from_fn(sites, sites, |i, j| if i == j { 0.0 } else { kernel.eval(grid.distance(i, j)) });
        let mut sys = LatticeSystem { grid, kinetic, interaction, coupling, sectors: Vec::new() };
        sys.sectors = (0..=sites).map(|n| sys.build_sector(n)).collect();
        Ok(sys)
    }

    pub fn sites(&self) -> usize {
        self.grid.len()
    }

    fn build_sector(&self, n: usize) -> Sector {
        let m = self.sites();
        let states = sector_states(m, n);
        let dim = states.len();
        let index: std::collections::HashMap<u32, usize> = states.iter().enumerate().map(|(k, &s)| (s, k)).collect();
        let mut base = DMatrix::zeros(dim, dim);
        for (a, &s) in states.iter().enumerate() {
            let mut diag = 0.0;
            for i in 0..m {
                if s >> i & 1 == 1 {
                    diag += self.kinetic[(i, i)];
                    for j in i + 1..m {
                        if s >> j & 1 == 1 {
                            diag += self.coupling * self.interaction[(i, j)];
                        }
                    }
                }
            }
            base[(a, a)] = diag;
            // c_i† c_j for occupied j, empty i
            for j in 0..m {
                if s >> j & 1 == 0 {
                    continue;
                }
                for i in 0..m {
                    if i == j || s >> i & 1 == 1 {
                        continue;
                    }
                    let t = (s & !(1 << j)) | (1 << i);
                    let b = index[&t];
                    base[(b, a)] += self.kinetic[(i, j)] * hop_sign(s, i, j);
                }
            }
        }
        Sector { states, base }
    }

    fn occupation(&self, state: u32, i: usize) -> f64 {
        (state >> i & 1) as f64
    }

    fn sector_hamiltonian(&self, sector: &Sector, v: &[f64]) -> DMatrix<f64> {
        let mut h = sector.base.clone();
        for (a, &s) in sector.states.iter().enumerate() {
            h[(a, a)] += (0..self.sites()).map(|i| v[i] * self.occupation(s, i)).sum::<f64>();
        }
        h
    }

    /// Hamiltonian of the `n`-particle sector with site potential `v`.
    pub fn hamiltonian(&self, v: &[f64], n: usize) -> Result<DMatrix<f64>> {
        self.check_potential(v)?;
        if n > self.sites() {
            return input("particle number exceeds the site count");
        }
        Ok(self.sector_hamiltonian(&self.sectors[n], v))
    }

    /// Occupation bitstrings of the `n`-particle sector, in basis order.
    pub fn basis(&self, n: usize) -> Vec<u32> {
        self.sectors[n].states.clone()
    }

    fn check_potential(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.sites() {
            return input("potential length differs from the site count");
        }
        Ok(())
    }

    fn density_of(&self, sector: &Sector, vec: &[f64]) -> Vec<f64> {
        let mut rho = vec![0.0; self.sites()];
        for (a, &s) in sector.states.iter().enumerate() {
            let p = vec[a] * vec[a];
            for (i, r) in rho.iter_mut().enumerate() {
                *r += p * self.occupation(s, i);
            }
        }
        rho
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SectorGround {
    pub energy: f64,
    /// Density of the uniform mixture over the ground space.
    pub density: Vec<f64>,
    pub degeneracy: usize,
}

/// Bottom of the spectrum of the `n`-particle sector.
pub fn sector_ground(system: &LatticeSystem, v: &[f64], n: usize) -> Result<SectorGround> {
    let h = system.hamiltonian(v, n)?;
    let sector = &system.sectors[n];
    let e = SymmetricEigen::new(h);
    let e0 = e.eigenvalues.min();
    let tol = 1e-9 * (1.0 + e0.abs());
    let ground: Vec<usize> = (0..e.eigenvalues.len()).filter(|&a| e.eigenvalues[a] <= e0 + tol).collect();
    let mut density = vec![0.0; system.sites()];
    for &a in &ground {
        let col: Vec<f64> = e.eigenvectors.column(a).iter().copied().collect();
        for (r, x) in density.iter_mut().zip(system.density_of(sector, &col)) {
            *r += x / ground.len() as f64;
        }
    }
    Ok(SectorGround { energy: e0, density, degeneracy: ground.len() })
}

/// Ground energies `E_n[v]` for `n = 0..=M`.
pub fn spectrum_table(system: &LatticeSystem, v: &[f64]) -> Result<Vec<f64>> {
    (0..=system.sites()).map(|n| sector_ground(system, v, n).map(|g| g.energy)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DualMode {
    /// Fixed particle number (the convex canonical functional).
    Canonical,
    /// Mixtures over particle numbers.
    Grand,
}

impl std::str::FromStr for DualMode {
    type Err = LabError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "canonical" | "l" => Ok(DualMode::Canonical),
            "gc" | "grand" => Ok(DualMode::Grand),
            _ => input(format!("unknown mode `{s}`")),
        }
    }
}

struct Decomposed {
    /// Per sector: eigenvalues and eigenvectors of `H_n(v)`.
    parts: Vec<(usize, DVector<f64>, DMatrix<f64>)>,
}

struct FockDual<'a> {
    system: &'a LatticeSystem,
    sectors: Vec<usize>,
    rho: &'a [f64],
}

impl FockDual<'_> {
    fn decompose(&self, v: &[f64]) -> Decomposed {
        let parts = self
            .sectors
            .iter()
            .map(|&n| {
                let e = SymmetricEigen::new(self.system.sector_hamiltonian(&self.system.sectors[n], v));
                (n, e.eigenvalues, e.eigenvectors)
            })
            .collect();
        Decomposed { parts }
    }

    fn exact(&self, v: &[f64]) -> f64 {
        let d = self.decompose(v);
        let e0 = d.parts.iter().map(|(_, ev, _)| ev.min()).fold(f64::INFINITY, f64::min);
        e0 - v.iter().zip(self.rho).map(|(a, b)| a * b).sum::<f64>()
    }

    /// Free energy and the Boltzmann weights of every eigenstate, sector by sector.
    /// Weights are formed from gaps to the ground energy so they stay accurate as `τ → 0`.
    fn boltzmann(parts: &Decomposed, tau: f64) -> (f64, Vec<Vec<f64>>) {
        let e0 = parts.parts.iter().map(|(_, ev, _)| ev.min()).fold(f64::INFINITY, f64::min);
        let raw: Vec<Vec<f64>> = parts.parts.iter().map(|(_, ev, _)| ev.iter().map(|&e| (-(e - e0) / tau).exp()).collect()).collect();
        let z: f64 = raw.iter().flatten().sum();
        let weights = raw.into_iter().map(|w| w.into_iter().map(|p| p / z).collect()).collect();
        (e0 - tau * z.ln(), weights)
    }
}

impl SmoothedDual for FockDual<'_> {
    fn dim(&self) -> usize {
        self.rho.len()
    }

    fn smoothed(&self, v: &DVector<f64>, tau: f64) -> SmoothEval {
        let m = self.dim();
        let vs: Vec<f64> = v.iter().copied().collect();
        let dec = self.decompose(&vs);
        let (f, weights) = Self::boltzmann(&dec, tau);
        let value = f - vs.iter().zip(self.rho).map(|(a, b)| a * b).sum::<f64>();
        let mut mean = vec![0.0; m];
        let mut hess = DMatrix::zeros(m, m);
        for ((n, ev, u), p) in dec.parts.iter().zip(&weights) {
            let sector = &self.system.sectors[*n];
            let pmax = p.iter().copied().fold(0.0, f64::max);
            let sig: Vec<usize> = (0..p.len()).filter(|&a| p[a] > 1e-16 * pmax.max(1e-300) && p[a] > 1e-300).collect();
            if sig.is_empty() {
                continue;
            }
            let occ: Vec<Vec<f64>> = (0..m).map(|i| sector.states.iter().map(|&s| self.system.occupation(s, i)).collect()).collect();
            // q[i][(a, b)] = (n_i)_{ab} for b in the significant set
            let q: Vec<DMatrix<f64>> = (0..m)
                .map(|i| {
                    let mut scaled = DMatrix::zeros(u.nrows(), sig.len());
                    for (c, &b) in sig.iter().enumerate() {
                        for r in 0..u.nrows() {
                            scaled[(r, c)] = occ[i][r] * u[(r, b)];
                        }
                    }
                    u.transpose() * scaled
                })
                .collect();
            let in_sig: Vec<bool> = {
                let mut f = vec![false; p.len()];
                for &b in &sig {
                    f[b] = true;
                }
                f
            };
            for (c, &b) in sig.iter().enumerate() {
                for i in 0..m {
                    mean[i] += p[b] * q[i][(b, c)];
                }
                for a in 0..p.len() {
                    let w = if in_sig[a] { 1.0 } else { 2.0 };
                    let dab = w * dual::fermi_divided_difference(ev[a], ev[b], p[a], p[b], tau);
                    let dab = if (ev[a] - ev[b]).abs() > 1e-10 * tau.max(ev[a].abs()).max(1e-300) {
                        dab
                    } else {
                        -w * p[b] / tau
                    };
                    if dab == 0.0 {
                        continue;
                    }
                    for i in 0..m {
                        let qi = q[i][(a, c)];
                        if qi == 0.0 {
                            continue;
                        }
                        for j in i..m {
                            hess[(i, j)] += dab * qi * q[j][(a, c)];
                        }
                    }
                }
            }
        }
        for i in 0..m {
            for j in i..m {
                hess[(i, j)] += mean[i] * mean[j] / tau;
                hess[(j, i)] = hess[(i, j)];
            }
        }
        let grad = DVector::from_iterator(m, mean.iter().zip(self.rho).map(|(a, b)| a - b));
        SmoothEval { value, grad, hess }
    }
}

/// A state with known energy (without external potential) and density.
#[derive(Debug, Clone)]
struct Candidate {
    energy: f64,
    density: Vec<f64>,
}

fn candidates_at(dualp: &FockDual, v: &[f64], tau: f64) -> Vec<Candidate> {
    let dec = dualp.decompose(v);
    let system = dualp.system;
    let (_, weights) = FockDual::boltzmann(&dec, tau);
    let m = system.sites();
    let mut out = Vec::new();
    let mut gibbs_e = 0.0;
    let mut gibbs_rho = vec![0.0; m];
    for ((n, ev, u), p) in dec.parts.iter().zip(&weights) {
        let sector = &system.sectors[*n];
        for a in 0..ev.len() {
            let col: Vec<f64> = u.column(a).iter().copied().collect();
            let rho = system.density_of(sector, &col);
            let energy = ev[a] - rho.iter().zip(v).map(|(r, x)| r * x).sum::<f64>();
            gibbs_e += p[a] * energy;
            for (g, r) in gibbs_rho.iter_mut().zip(&rho) {
                *g += p[a] * r;
            }
            out.push(Candidate { energy, density: rho });
        }
    }
    out.push(Candidate { energy: gibbs_e, density: gibbs_rho });
    out
}

fn basis_candidates(dualp: &FockDual) -> Vec<Candidate> {
    let system = dualp.system;
    let m = system.sites();
    let mut out = Vec::new();
    for &n in &dualp.sectors {
        let sector = &system.sectors[n];
        for (a, &s) in sector.states.iter().enumerate() {
            out.push(Candidate {
                energy: sector.base[(a, a)],
                density: (0..m).map(|i| system.occupation(s, i)).collect(),
            });
        }
    }
    out
}

/// Cheapest mixture of candidate states with density exactly `rho`, or `None`
/// when the simplex solution does not reproduce `rho` to working precision.
/// With a fixed particle number the normalization row is implied by the
/// site rows and is left out.
fn mixture_upper_bound(cands: &[Candidate], rho: &[f64], normalize: bool) -> Result<Option<f64>> {
    let m = rho.len();
    let columns = cands
        .iter()
        .map(|c| {
            let mut col: Vec<(usize, f64)> = c.density.iter().enumerate().filter(|(_, &x)| x != 0.0).map(|(i, &x)| (i, x)).collect();
            if normalize {
                col.push((m, 1.0));
            }
            col
        })
        .collect();
    let mut rhs = rho.to_vec();
    if normalize {
        rhs.push(1.0);
    }
    let program = lp::LinearProgram { rows: rhs.len(), columns, costs: cands.iter().map(|c| c.energy).collect(), rhs };
    let sol = match lp::solve(&program, &lp::LpOptions::default()) {
        Ok(sol) => sol,
        Err(LabError::Infeasible(_)) => return Ok(None),
        Err(e) => return Err(e),
    };
    let weight: f64 = sol.x.iter().sum();
    let mut residual = (weight - 1.0).abs();
    for i in 0..m {
        let r: f64 = sol.x.iter().zip(cands).map(|(x, c)| x * c.density[i]).sum();
        residual = residual.max((r - rho[i]).abs());
    }
    let negative = sol.x.iter().copied().fold(0.0, f64::min);
    Ok((residual < 1e-11 && negative > -1e-13).then_some(sol.primal))
}

#[derive(Debug, Clone, Serialize)]
pub struct DualResult {
    pub mode: DualMode,
    /// Certified lower bound (best exact dual value).
    pub value: f64,
    /// Upper bound from a mixture of computed states with density `ρ`.
    pub primal: f64,
    pub gap: f64,
    pub potential: Vec<f64>,
    /// Thermal weight of each particle-number sector at the final temperature.
    pub sector_weights: Vec<(usize, f64)>,
    pub trace: Vec<StageRecord>,
}

#[derive(Debug, Clone, Copy)]
pub struct FockOptions {
    pub ascent: AscentOptions,
    /// Stop once `primal - dual` falls below this (absolute).
    pub gap_tol: f64,
}

impl Default for FockOptions {
    fn default() -> Self {
        FockOptions { ascent: AscentOptions { tau_start: 1.0, tau_min: 1e-9, ..AscentOptions::default() }, gap_tol: 1e-9 }
    }
}

/// Legendre dual `sup_v (E[v] - ⟨v, ρ⟩)` of the canonical or grand-canonical
/// ground energy, with a primal mixture certificate.
pub fn levy_lieb_dual(system: &LatticeSystem, rho: &[f64], mode: DualMode, opts: &FockOptions) -> Result<DualResult> {
    let m = system.sites();
    if rho.len() != m {
        return input("density length differs from the site count");
    }
    if rho.iter().any(|&r| !(-1e-12..=1.0 + 1e-12).contains(&r)) {
        return input("site occupations must lie in [0, 1]");
    }
    let total: f64 = rho.iter().sum();
    let sectors: Vec<usize> = match mode {
        DualMode::Canonical => {
            let n = total.round();
            if (total - n).abs() > 1e-9 {
                return input(format!("canonical mode needs an integer mass, got {total}"));
            }
            vec![n as usize]
        }
        DualMode::Grand => (0..=m).collect(),
    };
    let problem = FockDual { system, sectors, rho };
    let scale = system.kinetic.diagonal().max().abs() + system.coupling * system.interaction.amax();
    let ascent = AscentOptions { tau_start: opts.ascent.tau_start.max(scale), ..opts.ascent };
    let mut v = DVector::zeros(m);
    let mut best_dual = f64::NEG_INFINITY;
    let mut best_v = vec![0.0; m];
    let normalize = mode == DualMode::Grand;
    let basis = basis_candidates(&problem);
    let mut primal = mixture_upper_bound(&basis, rho, normalize)?.unwrap_or(f64::INFINITY);
    let gap_tol = opts.gap_tol;
    let mut last_tau = ascent.tau_start;
    let mut failure = None;
    let trace = dual::anneal(&problem, &mut v, &ascent, |v, tau| {
        let vs: Vec<f64> = v.iter().copied().collect();
        let d = problem.exact(&vs);
        if d > best_dual {
            best_dual = d;
            best_v = vs.clone();
        }
        last_tau = tau;
        let mut pool = basis.clone();
        pool.extend(candidates_at(&problem, &vs, tau));
        match mixture_upper_bound(&pool, rho, normalize) {
            Ok(p) => primal = primal.min(p.unwrap_or(f64::INFINITY)),
            Err(e) => failure = Some(e),
        }
        primal - best_dual <= gap_tol
    });
    if let Some(e) = failure {
        return Err(e);
    }
    let dec = problem.decompose(&best_v);
    let (_, weights) = FockDual::boltzmann(&dec, last_tau);
    let sector_weights = dec.parts.iter().zip(&weights).map(|((n, _, _), p)| (*n, p.iter().sum::<f64>())).collect();
    Ok(DualResult { mode, value: best_dual, primal, gap: primal - best_dual, potential: best_v, sector_weights, trace })
}

/// Lower convex hull of `n ↦ E_n` evaluated at real `λ ∈ [0, n_max]`.
pub fn convex_hull_value(energies: &[f64], lambda: f64) -> f64 {
    let hull = lower_hull(energies);
    for w in hull.windows(2) {
        let (a, b) = (w[0], w[1]);
        if lambda >= a as f64 - 1e-12 && lambda <= b as f64 + 1e-12 {
            let t = (lambda - a as f64) / (b - a) as f64;
            return (1.0 - t) * energies[a] + t * energies[b];
        }
    }
    energies[hull[0]]
}

/// Indices of the vertices of the lower convex hull.
pub fn lower_hull(energies: &[f64]) -> Vec<usize> {
    let mut hull: Vec<usize> = Vec::new();
    for k in 0..energies.len() {
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            // drop b when it lies on or above the chord from a to k
            let cross = (energies[b] - energies[a]) * (k - a) as f64 - (energies[k] - energies[a]) * (b - a) as f64;
            if cross >= -1e-12 * (1.0 + energies[b].abs()) {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(k);
    }
    hull
}

/// Points `k ≥ 2` whose increment `E_k - E_{k-1}` equals the running maximum
/// of the increments from `n = 2` on, as in the textbook description of the hull.
pub fn increment_record_set(energies: &[f64]) -> Vec<usize> {
    let mut out = Vec::new();
    let mut running = f64::NEG_INFINITY;
    for k in 2..energies.len() {
        let inc = energies[k] - energies[k - 1];
        running = running.max(inc);
        if (inc - running).abs() <= 1e-12 * (1.0 + running.abs()) {
            out.push(k);
        }
    }
    out
}

/// Two-point interpolation between the nearest record points around `λ`.
pub fn record_set_interpolation(energies: &[f64], lambda: f64) -> Option<f64> {
    let set = increment_record_set(energies);
    let left = set.iter().copied().filter(|&k| (k as f64) < lambda).max()?;
    let right = set.iter().copied().filter(|&k| (k as f64) > lambda).min()?;
    let slope = (energies[left] - energies[right]) / (left as f64 - right as f64);
    Some(energies[left] + slope * (lambda - left as f64))
}

#[derive(Debug, Clone, Serialize)]
pub struct ThetaCheck {
    pub base: usize,
    pub theta: f64,
    /// Mixture optimum over sector energies at mass `base + θ`.
    pub mixture: f64,
    pub interpolation: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvexityReport {
    pub energies: Vec<f64>,
    pub convex: bool,
    pub hull_vertices: Vec<usize>,
    pub record_set: Vec<usize>,
    /// Whether the record-set interpolation reproduces the hull at every half-integer mass.
    pub record_rule_matches_hull: bool,
    pub theta_checks: Vec<ThetaCheck>,
}

/// `min Σ α_n E_n` over probability vectors with `Σ n α_n = λ`.
pub fn sector_mixture_minimum(energies: &[f64], lambda: f64) -> Result<f64> {
    let columns = (0..energies.len()).map(|n| if n == 0 { vec![(1, 1.0)] } else { vec![(0, n as f64), (1, 1.0)] }).collect();
    let program = lp::LinearProgram { rows: 2, columns, costs: energies.to_vec(), rhs: vec![lambda, 1.0] };
    Ok(lp::solve(&program, &lp::LpOptions::default())?.primal)
}

pub fn convexity_report(energies: &[f64]) -> Result<ConvexityReport> {
    let k = energies.len();
    let convex = (1..k.saturating_sub(1)).all(|n| energies[n] - energies[n - 1] <= energies[n + 1] - energies[n] + 1e-10);
    let hull_vertices = lower_hull(energies);
    let record_set = increment_record_set(energies);
    let record_rule_matches_hull = (0..k.saturating_sub(1)).all(|n| {
        let lambda = n as f64 + 0.5;
        match record_set_interpolation(energies, lambda) {
            Some(x) => (x - convex_hull_value(energies, lambda)).abs() < 1e-9 * (1.0 + x.abs()),
            None => false,
        }
    });
    let mut theta_checks = Vec::new();
    if convex {
        for base in 0..k.saturating_sub(1) {
            for &theta in &[0.25, 0.5, 0.75] {
                let mixture = sector_mixture_minimum(energies, base as f64 + theta)?;
                let interpolation = (1.0 - theta) * energies[base] + theta * energies[base + 1];
                theta_checks.push(ThetaCheck { base, theta, mixture, interpolation });
            }
        }
    }
    Ok(ConvexityReport { energies: energies.to_vec(), convex, hull_vertices, record_set, record_rule_matches_hull, theta_checks })
}

/// Discrete convexity of `n ↦ E_n[v]` and the grand-canonical interpolation.
pub fn convexity_scan(system: &LatticeSystem, v: &[f64]) -> Result<ConvexityReport> {
    convexity_report(&spectrum_table(system, v)?)
}

#[derive(Debug, Clone, Serialize)]
pub struct CouplingRow {
    pub coupling: f64,
    pub value: f64,
    pub gap: f64,
    pub per_coupling: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CouplingTable {
    pub rows: Vec<CouplingRow>,
    /// Convex kinetic value on the same ring.
    pub kinetic: f64,
    /// Classical strictly correlated value on the sites (double occupancy excluded).
    pub classical: f64,
}

/// Grand-canonical dual along a coupling schedule, with both endpoint oracles.
pub fn coupling_limits(
    sites: usize,
    length: f64,
    kernel: &InteractionKernel,
    rho: &[f64],
    schedule: &[f64],
    opts: &FockOptions,
) -> Result<CouplingTable> {
    let mut rows = Vec::new();
    for &g in schedule {
        let sys = LatticeSystem::new(sites, length, kernel, g)?;
        let r = levy_lieb_dual(&sys, rho, DualMode::Grand, opts)?;
        rows.push(CouplingRow { coupling: g, value: r.value, gap: r.gap, per_coupling: if g > 0.0 { r.value / g } else { f64::NAN } });
    }
    let grid = Grid::line(sites, length, Boundary::Periodic)?;
    let density = crate::model::DiscreteDensity::new(grid, rho.to_vec())?;
    let kinetic = crate::kinetic::solve_tgc(&density, &Default::default())?.value;
    let sys = LatticeSystem::new(sites, length, kernel, 1.0)?;
    let classical = lattice_classical(&sys, rho)?;
    Ok(CouplingTable { rows, kinetic, classical })
}

/// Grand-canonical strictly correlated value on the lattice sites with unit coupling.
pub fn lattice_classical(system: &LatticeSystem, rho: &[f64]) -> Result<f64> {
    let m = system.sites();
    let mut costs = system.interaction.clone();
    for i in 0..m {
        costs[(i, i)] = f64::INFINITY;
    }
    Ok(sce::solve_gc_with_costs(rho, &costs, m, &MmotOptions::default())?.value)
}

/// `½ Σ_{i≠j} g W_ij ρ_i ρ_j` (on-site pairs do not occur for fermions).
pub fn lattice_hartree(system: &LatticeSystem, rho: &[f64]) -> f64 {
    let m = system.sites();
    let mut acc = 0.0;
    for i in 0..m {
        for j in 0..m {
            if i != j {
                acc += system.interaction[(i, j)] * rho[i] * rho[j];
            }
        }
    }
    0.5 * system.coupling * acc
}

#[derive(Debug, Clone, Serialize)]
pub struct ExchangeCorrelation {
    pub value: f64,
    /// Interval `[value - lower_slack, value + upper_slack]` from the two duality gaps.
    pub lower: f64,
    pub upper: f64,
    pub functional: f64,
    pub kinetic: f64,
    pub hartree: f64,
}

/// `F_GC - T_GC - hartree`, with the duality gaps of both solves propagated.
pub fn exchange_correlation_gc(system: &LatticeSystem, rho: &[f64], opts: &FockOptions) -> Result<ExchangeCorrelation> {
    let f = levy_lieb_dual(system, rho, DualMode::Grand, opts)?;
    let density = crate::model::DiscreteDensity::new(system.grid.clone(), rho.to_vec())?;
    let t = crate::kinetic::solve_tgc(&density, &Default::default())?;
    let hartree = lattice_hartree(system, rho);
    let value = f.value - t.value - hartree;
    Ok(ExchangeCorrelation {
        value,
        lower: f.value - t.report.primal - hartree,
        upper: f.primal - t.report.dual - hartree,
        functional: f.value,
        kinetic: t.value,
        hartree,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn empty_sector_and_free_fermions() {
        let sys = LatticeSystem::new(5, 5.0, &InteractionKernel::Riesz { s: 1.0 }, 0.0).unwrap();
        let v = [0.3, -0.2, 0.5, 0.0, -0.7];
        let g0 = sector_ground(&sys, &v, 0).unwrap();
        assert_eq!(g0.energy, 0.0);
        let mut one = sys.kinetic.clone();
        for i in 0..5 {
            one[(i, i)] += v[i];
        }
        let mut ev: Vec<f64> = SymmetricEigen::new(one).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        for n in 1..=5 {
            let e = sector_ground(&sys, &v, n).unwrap().energy;
            assert_relative_eq!(e, ev[..n].iter().sum::<f64>(), epsilon = 1e-10);
        }
    }

    #[test]
    fn hull_and_record_rule() {
        let e = [0.0, 0.0, 5.0, 5.0];
        assert_eq!(lower_hull(&e), vec![0, 1, 3]);
        assert_relative_eq!(convex_hull_value(&e, 2.0), 2.5);
        let r = convexity_report(&e).unwrap();
        assert!(!r.convex);
        assert!(!r.record_rule_matches_hull);
        let convex = [0.0, -1.0, -1.5, -1.0, 1.0];
        let rc = convexity_report(&convex).unwrap();
        assert!(rc.convex);
        for c in &rc.theta_checks {
            assert!((c.mixture - c.interpolation).abs() < 1e-12);
        }
    }

    #[test]
    fn hopping_sign_counts_intermediate_fermions() {
        assert_eq!(hop_sign(0b0101, 1, 0), 1.0);
        assert_eq!(hop_sign(0b0110, 0, 3), 1.0);
        assert_eq!(hop_sign(0b0010, 0, 3), -1.0);
    }
}
