//! Classical strictly correlated limit: symmetric multi-marginal transport on
//! cell grids, its grand-canonical relaxation, the exact one-dimensional
//! monotone solution, and the classical bounds around it.

pub mod lp;
mod monge;
mod sinkhorn;

pub use monge::{monge_1d, quantile, MongeResult, MongeSegment};
pub use sinkhorn::{solve_sinkhorn, SinkhornOptions};

use crate::error::{input, LabError, Result};
use crate::model::{kernel_matrix, pair_cost_matrix, DiscreteDensity, InteractionKernel};
use nalgebra::DMatrix;
use serde::Serialize;
use std::collections::BTreeMap;

/// Symmetric N-particle plan stored on sorted index tuples.
///
/// The mass attached to a sorted tuple is the total probability of all its
/// permutations, so masses sum to one and the one-particle density is
/// `ρ_i = Σ_T mass(T) · #{k : T_k = i}`.
#[derive(Debug, Clone, Serialize)]
pub struct CouplingPlan {
    pub particles: usize,
    pub cells: usize,
    pub tuples: Vec<(Vec<usize>, f64)>,
}

impl CouplingPlan {
    pub fn from_masses(particles: usize, cells: usize, entries: impl IntoIterator<Item = (Vec<usize>, f64)>) -> Self {
        let mut map: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
        for (mut t, m) in entries {
            t.sort_unstable();
            *map.entry(t).or_insert(0.0) += m;
        }
        CouplingPlan { particles, cells, tuples: map.into_iter().filter(|(_, m)| *m > 0.0).collect() }
    }

    pub fn total_mass(&self) -> f64 {
        self.tuples.iter().map(|(_, m)| m).sum()
    }

    /// Particle density per cell (masses, summing to `N`).
    pub fn density(&self) -> Vec<f64> {
        let mut rho = vec![0.0; self.cells];
        for (t, m) in &self.tuples {
            for &i in t {
                rho[i] += m;
            }
        }
        rho
    }

    pub fn cost(&self, costs: &DMatrix<f64>) -> f64 {
        self.tuples.iter().map(|(t, m)| m * tuple_cost(t, costs)).sum()
    }
}

/// Kantorovich potential `v`, feasible when `Σ_{j<k} c + Σ_j v ≥ 0` on all tuples.
#[derive(Debug, Clone, Serialize)]
pub struct KantorovichPotential {
    pub values: Vec<f64>,
    /// `-Σ_i v_i m_i`.
    pub objective: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Solver {
    Lp,
    Sinkhorn,
}

impl std::str::FromStr for Solver {
    type Err = LabError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lp" => Ok(Solver::Lp),
            "sinkhorn" => Ok(Solver::Sinkhorn),
            _ => input(format!("unknown solver `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MmotOptions {
    /// Largest admissible `M^N`.
    pub budget: usize,
    pub lp: lp::LpOptions,
    pub sinkhorn: SinkhornOptions,
}

impl Default for MmotOptions {
    fn default() -> Self {
        MmotOptions { budget: 200_000, lp: lp::LpOptions::default(), sinkhorn: SinkhornOptions::default() }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MmotResult {
    pub solver: Solver,
    pub value: f64,
    pub dual_value: f64,
    pub gap: f64,
    pub iterations: usize,
    pub plan: CouplingPlan,
    pub potential: KantorovichPotential,
}

pub(crate) fn tuple_cost(t: &[usize], costs: &DMatrix<f64>) -> f64 {
    let mut c = 0.0;
    for a in 0..t.len() {
        for b in a + 1..t.len() {
            c += costs[(t[a], t[b])];
        }
    }
    c
}

/// All nondecreasing index tuples of length `n` over `0..m`, in lexicographic order.
pub fn sorted_tuples(m: usize, n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if n == 0 {
        out.push(Vec::new());
        return out;
    }
    if m == 0 {
        return out;
    }
    let mut t = vec![0usize; n];
    loop {
        out.push(t.clone());
        let mut k = n;
        while k > 0 && t[k - 1] == m - 1 {
            k -= 1;
        }
        if k == 0 {
            return out;
        }
        let next = t[k - 1] + 1;
        for x in &mut t[k - 1..] {
            *x = next;
        }
    }
}

fn check_budget(cells: usize, n: usize, budget: usize) -> Result<()> {
    let size = (cells as f64).powi(n as i32);
    if size > budget as f64 {
        return Err(LabError::Budget(format!("M^N = {cells}^{n} exceeds the budget {budget}")));
    }
    Ok(())
}

fn check_mass(rho: &DiscreteDensity, n: usize) -> Result<()> {
    let total = rho.total();
    if (total - n as f64).abs() > 1e-9 * (n as f64).max(1.0) {
        return input(format!("density mass {total} does not match N = {n}"));
    }
    Ok(())
}

/// Solves the symmetric N-marginal problem with marginal `ρ`.
pub fn solve_mmot(rho: &DiscreteDensity, n: usize, kernel: &InteractionKernel, solver: Solver, opts: &MmotOptions) -> Result<MmotResult> {
    if n == 0 {
        return input("N must be at least 1");
    }
    check_mass(rho, n)?;
    let m = rho.grid.len();
    check_budget(m, n, opts.budget)?;
    let costs = pair_cost_matrix(&rho.grid, kernel)?;
    match solver {
        Solver::Lp => solve_lp(rho, n, &costs, opts),
        Solver::Sinkhorn => solve_sinkhorn(rho, n, &costs, &opts.sinkhorn),
    }
}

fn solve_lp(rho: &DiscreteDensity, n: usize, costs: &DMatrix<f64>, opts: &MmotOptions) -> Result<MmotResult> {
    let m = rho.grid.len();
    let mut tuples = Vec::new();
    let mut columns = Vec::new();
    let mut cvec = Vec::new();
    for t in sorted_tuples(m, n) {
        let c = tuple_cost(&t, costs);
        if !c.is_finite() {
            continue;
        }
        columns.push(count_column(&t));
        cvec.push(c);
        tuples.push(t);
    }
    let program = lp::LinearProgram { rows: m, columns, costs: cvec, rhs: rho.masses.clone() };
    let sol = lp::solve(&program, &opts.lp)?;
    let plan = CouplingPlan::from_masses(n, m, tuples.into_iter().zip(sol.x.iter().copied()).filter(|(_, x)| *x > 0.0));
    let values: Vec<f64> = sol.duals.iter().map(|y| -y).collect();
    let objective = -values.iter().zip(&rho.masses).map(|(v, m)| v * m).sum::<f64>();
    Ok(MmotResult {
        solver: Solver::Lp,
        value: sol.primal,
        dual_value: sol.dual,
        gap: sol.relative_gap(),
        iterations: sol.iterations,
        plan,
        potential: KantorovichPotential { values, objective },
    })
}

fn count_column(t: &[usize]) -> Vec<(usize, f64)> {
    let mut col: Vec<(usize, f64)> = Vec::with_capacity(t.len());
    for &i in t {
        match col.last_mut() {
            Some((j, v)) if *j == i => *v += 1.0,
            _ => col.push((i, 1.0)),
        }
    }
    col
}

/// One particle-number sector of a grand-canonical plan.
#[derive(Debug, Clone, Serialize)]
pub struct SectorPlan {
    pub particles: usize,
    pub mass: f64,
    pub plan: CouplingPlan,
}

#[derive(Debug, Clone, Serialize)]
pub struct GrandCanonicalResult {
    pub value: f64,
    pub dual_value: f64,
    pub gap: f64,
    pub sectors: Vec<SectorPlan>,
    pub potential: KantorovichPotential,
    /// Multiplier of the normalization constraint.
    pub normalization_dual: f64,
    /// Largest particle number carrying positive mass.
    pub largest_active_sector: usize,
}

/// Grand-canonical relaxation: a probability over sectors `n = 0..=n_max`
/// whose summed one-particle densities reproduce `ρ`.
pub fn solve_gc_mmot(rho: &DiscreteDensity, n_max: usize, kernel: &InteractionKernel, opts: &MmotOptions) -> Result<GrandCanonicalResult> {
    let total = rho.total();
    if total > n_max as f64 + 1e-9 {
        return input(format!("density mass {total} exceeds n_max = {n_max}"));
    }
    let costs = pair_cost_matrix(&rho.grid, kernel)?;
    solve_gc_with_costs(&rho.masses, &costs, n_max, opts)
}

/// Grand-canonical problem for explicit pair costs; an infinite entry forbids
/// the pair (an infinite diagonal forbids double occupancy).
pub fn solve_gc_with_costs(masses: &[f64], costs: &DMatrix<f64>, n_max: usize, opts: &MmotOptions) -> Result<GrandCanonicalResult> {
    let m = masses.len();
    let mass_row = m;
    let mut columns = Vec::new();
    let mut cvec = Vec::new();
    let mut labels: Vec<(usize, Vec<usize>)> = Vec::new();
    for n in 0..=n_max {
        check_budget(m, n, opts.budget)?;
        for t in sorted_tuples(m, n) {
            let c = tuple_cost(&t, costs);
            if !c.is_finite() {
                continue;
            }
            let mut col = count_column(&t);
            col.push((mass_row, 1.0));
            columns.push(col);
            cvec.push(c);
            labels.push((n, t));
        }
    }
    let mut rhs = masses.to_vec();
    rhs.push(1.0);
    let program = lp::LinearProgram { rows: m + 1, columns, costs: cvec, rhs };
    let sol = lp::solve(&program, &opts.lp)?;
    let mut per_sector: Vec<Vec<(Vec<usize>, f64)>> = vec![Vec::new(); n_max + 1];
    for ((n, t), &x) in labels.into_iter().zip(&sol.x) {
        if x > 0.0 {
            per_sector[n].push((t, x));
        }
    }
    let sectors: Vec<SectorPlan> = per_sector
        .into_iter()
        .enumerate()
        .map(|(n, entries)| {
            let plan = CouplingPlan::from_masses(n, m, entries);
            SectorPlan { particles: n, mass: plan.total_mass(), plan }
        })
        .collect();
    let largest_active_sector = sectors.iter().filter(|s| s.mass > 1e-12).map(|s| s.particles).max().unwrap_or(0);
    let values: Vec<f64> = sol.duals[..m].iter().map(|y| -y).collect();
    let objective = -values.iter().zip(masses).map(|(v, m)| v * m).sum::<f64>();
    Ok(GrandCanonicalResult {
        value: sol.primal,
        dual_value: sol.dual,
        gap: sol.relative_gap(),
        sectors,
        potential: KantorovichPotential { values, objective },
        normalization_dual: sol.duals[m],
        largest_active_sector,
    })
}

/// `½ Σ_{ij} m_i m_j c_ij` with cell self-averages on the diagonal.
pub fn hartree(rho: &DiscreteDensity, kernel: &InteractionKernel) -> Result<f64> {
    let c = kernel_matrix(&rho.grid, kernel)?;
    let m = &rho.masses;
    let mut acc = 0.0;
    for i in 0..m.len() {
        if m[i] == 0.0 {
            continue;
        }
        let row: f64 = (0..m.len()).map(|j| c[(i, j)] * m[j]).sum();
        acc += m[i] * row;
    }
    Ok(0.5 * acc)
}

/// Strictly correlated energy minus the Hartree term.
pub fn indirect_energy(rho: &DiscreteDensity, n: usize, kernel: &InteractionKernel, opts: &MmotOptions) -> Result<f64> {
    let h = hartree(rho, kernel)?;
    Ok(solve_mmot(rho, n, kernel, Solver::Lp, opts)?.value - h)
}

/// Energy of the uncorrelated product state, `(1 - 1/N)` times the Hartree term.
pub fn decorrelated_upper(rho: &DiscreteDensity, n: usize, kernel: &InteractionKernel) -> Result<f64> {
    if n == 0 {
        return input("N must be at least 1");
    }
    Ok((1.0 - 1.0 / n as f64) * hartree(rho, kernel)?)
}

/// `hartree - w(0) ∫ρ / 2`, a lower bound for kernels of positive type.
pub fn onsager_lower(rho: &DiscreteDensity, kernel: &InteractionKernel) -> Result<f64> {
    if !kernel.nonnegative_fourier() {
        return input("the Onsager bound needs a kernel with nonnegative Fourier transform");
    }
    let w0 = kernel.value_at_zero().ok_or_else(|| LabError::Input("kernel has no finite value at 0".into()))?;
    Ok(hartree(rho, kernel)? - 0.5 * w0 * rho.total())
}

#[derive(Debug, Clone, Serialize)]
pub struct LiebOxfordReport {
    pub ratio: f64,
    pub indirect: f64,
    pub power_integral: f64,
    pub lower: f64,
    pub upper: Option<f64>,
}

/// `-E_ind / ∫ρ^{1+s/d}`, with the indirect energy from the exact solver
/// (the monotone plan in one dimension, the LP otherwise).
pub fn lieb_oxford_ratio(rho: &DiscreteDensity, kernel: &InteractionKernel, opts: &MmotOptions) -> Result<LiebOxfordReport> {
    let s = kernel.riesz_exponent().filter(|s| *s > 0.0).ok_or_else(|| LabError::Input("Lieb-Oxford ratio needs a riesz kernel".into()))?;
    let d = rho.grid.dim();
    let bracket = crate::constants::lo_constant_bracket(s, d)?;
    let n = rho.total().round() as usize;
    check_mass(rho, n)?;
    let value = if d == 1 { monge_1d(rho, n, kernel)?.value } else { solve_mmot(rho, n, kernel, Solver::Lp, opts)?.value };
    let indirect = value - hartree(rho, kernel)?;
    let power_integral = rho.integral_power(1.0 + s / d as f64);
    Ok(LiebOxfordReport { ratio: -indirect / power_integral, indirect, power_integral, lower: bracket.lower, upper: bracket.upper })
}

#[derive(Debug, Clone, Serialize)]
pub struct SupportReport {
    /// Smallest `c(T) + Σ v` over all tuples (dual feasibility when ≥ 0).
    pub min_slack: f64,
    /// Largest excess over `min_slack` among tuples carrying plan mass.
    pub max_support_excess: f64,
    pub violations: Vec<(Vec<usize>, f64)>,
    pub passed: bool,
}

/// Checks that the plan lives on the minimizers of `c(T) + Σ_k v(T_k)`.
pub fn verify_support(plan: &CouplingPlan, potential: &KantorovichPotential, costs: &DMatrix<f64>, tol: f64) -> SupportReport {
    let slack = |t: &[usize]| tuple_cost(t, costs) + t.iter().map(|&i| potential.values[i]).sum::<f64>();
    let min_slack = sorted_tuples(plan.cells, plan.particles)
        .iter()
        .map(|t| slack(t))
        .filter(|v| v.is_finite())
        .fold(f64::INFINITY, f64::min);
    let mut max_excess: f64 = 0.0;
    let mut violations = Vec::new();
    for (t, m) in &plan.tuples {
        if *m <= tol {
            continue;
        }
        let excess = slack(t) - min_slack;
        max_excess = max_excess.max(excess);
        if excess > tol {
            violations.push((t.clone(), excess));
        }
    }
    let passed = violations.is_empty() && min_slack >= -tol;
    SupportReport { min_slack, max_support_excess: max_excess, violations, passed }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Boundary, Grid};
    use approx::assert_relative_eq;

    fn line(masses: &[f64]) -> DiscreteDensity {
        let grid = Grid::line(masses.len(), masses.len() as f64, Boundary::Open).unwrap();
        DiscreteDensity::new(grid, masses.to_vec()).unwrap()
    }

    #[test]
    fn tuple_enumeration_counts() {
        assert_eq!(sorted_tuples(4, 2).len(), 10);
        assert_eq!(sorted_tuples(5, 3).len(), 35);
        assert_eq!(sorted_tuples(3, 0), vec![Vec::<usize>::new()]);
    }

    #[test]
    fn two_cells_pair_off() {
        let rho = line(&[1.0, 1.0]);
        let k = InteractionKernel::Riesz { s: 1.0 };
        let r = solve_mmot(&rho, 2, &k, Solver::Lp, &MmotOptions::default()).unwrap();
        assert_relative_eq!(r.value, 1.0, epsilon = 1e-12);
        assert_eq!(r.plan.tuples, vec![(vec![0, 1], 1.0)]);
        assert!(r.gap < 1e-12);
    }

    #[test]
    fn mass_mismatch_is_an_input_error() {
        let rho = line(&[1.0, 0.5]);
        let k = InteractionKernel::Riesz { s: 0.5 };
        assert!(matches!(solve_mmot(&rho, 2, &k, Solver::Lp, &MmotOptions::default()), Err(LabError::Input(_))));
    }

    #[test]
    fn hartree_two_cells() {
        let rho = line(&[1.0, 1.0]);
        let k = InteractionKernel::Riesz { s: 0.5 };
        let wbar = 8.0 / 3.0;
        assert_relative_eq!(hartree(&rho, &k).unwrap(), wbar + 1.0, epsilon = 1e-12);
    }

    #[test]
    fn one_particle_gc_has_zero_energy() {
        let rho = line(&[0.25, 0.5, 0.25]);
        let r = solve_gc_mmot(&rho, 3, &InteractionKernel::Riesz { s: 0.5 }, &MmotOptions::default()).unwrap();
        assert!(r.value.abs() < 1e-12);
    }

    #[test]
    fn support_check_flags_perturbed_potential() {
        let rho = line(&[0.5, 0.7, 0.3, 0.5]);
        let k = InteractionKernel::Riesz { s: 0.5 };
        let r = solve_mmot(&rho, 2, &k, Solver::Lp, &MmotOptions::default()).unwrap();
        let costs = pair_cost_matrix(&rho.grid, &k).unwrap();
        assert!(verify_support(&r.plan, &r.potential, &costs, 1e-7).passed);
        let mut bad = r.potential.clone();
        bad.values[1] += 0.3;
        bad.values[2] -= 0.4;
        assert!(!verify_support(&r.plan, &bad, &costs, 1e-7).passed);
    }
}
