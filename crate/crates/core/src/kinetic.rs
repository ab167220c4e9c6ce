//! Convex kinetic functional on periodic grids: dual ascent for the
//! grand-canonical minimization, explicit trial states, and the kinetic
//! inequalities evaluated on any density matrix.

use crate::constants::{lt_constant_lower_bound, thomas_fermi_constant};
use crate::dual::{self, AscentOptions, SmoothEval, SmoothedDual, StageRecord};
use crate::error::{input, LabError, Result};
use crate::model::{Boundary, DiscreteDensity, Grid};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;
use std::f64::consts::PI;

/// `-Δ/2` on a periodic grid, diagonal in plane waves `k = 2πm/ℓ`.
#[derive(Debug, Clone)]
pub struct PeriodicOperator {
    pub grid: Grid,
    pub matrix: DMatrix<f64>,
}

fn axis_modes(cells: usize) -> impl Iterator<Item = i64> {
    let lo = -((cells / 2) as i64);
    (0..cells as i64).map(move |j| lo + j)
}

impl PeriodicOperator {
    pub fn new(grid: &Grid) -> Result<Self> {
        if grid.boundary != Boundary::Periodic {
            return input("kinetic operators need a periodic grid");
        }
        let d = grid.dim();
        let n = grid.len();
        // Kernel as a function of the index difference, summed over all momenta.
        let mut by_offset = vec![0.0; n];
        let modes: Vec<Vec<(f64, usize)>> = (0..d)
            .map(|a| {
                axis_modes(grid.cells[a])
                    .map(|m| (2.0 * PI * m as f64 / grid.lengths[a], grid.cells[a]))
                    .collect()
            })
            .collect();
        let total_modes = n;
        for (off, slot) in by_offset.iter_mut().enumerate() {
            let idx = grid.multi_index(off);
            let mut acc = 0.0;
            for mode in 0..total_modes {
                let mi = grid.multi_index(mode);
                let mut k2 = 0.0;
                let mut phase = 0.0;
                for a in 0..d {
                    let (k, cells) = modes[a][mi[a]];
                    k2 += k * k;
                    phase += 2.0 * PI * (axis_modes(cells).nth(mi[a]).unwrap() as f64) * idx[a] as f64 / cells as f64;
                }
                acc += 0.5 * k2 * phase.cos();
            }
            *slot = acc / n as f64;
        }
        let mut matrix = DMatrix::zeros(n, n);
        for i in 0..n {
            let ii = grid.multi_index(i);
            for j in 0..n {
                let jj = grid.multi_index(j);
                let diff: Vec<usize> = (0..d).map(|a| (ii[a] + grid.cells[a] - jj[a]) % grid.cells[a]).collect();
                matrix[(i, j)] = by_offset[grid.linear_index(&diff)];
            }
        }
        Ok(PeriodicOperator { grid: grid.clone(), matrix })
    }

    /// `½∫|∇√ρ|²` with spectral differentiation of the interpolant of `√ρ`.
    pub fn weizsacker(&self, masses: &[f64]) -> f64 {
        let s = DVector::from_iterator(masses.len(), masses.iter().map(|m| m.max(0.0).sqrt()));
        s.dot(&(&self.matrix * &s))
    }
}

/// Real symmetric one-body density matrix on grid sites; `γ_ii` is the cell mass.
#[derive(Debug, Clone, Serialize)]
pub struct DensityMatrix {
    #[serde(skip)]
    pub grid: Grid,
    #[serde(skip)]
    pub matrix: DMatrix<f64>,
}

impl DensityMatrix {
    pub fn masses(&self) -> Vec<f64> {
        self.matrix.diagonal().iter().copied().collect()
    }
    pub fn density(&self) -> Result<DiscreteDensity> {
        DiscreteDensity::new(self.grid.clone(), self.masses().iter().map(|m| m.max(0.0)).collect())
    }
    pub fn trace(&self) -> f64 {
        self.matrix.trace()
    }
    pub fn energy(&self, op: &PeriodicOperator) -> f64 {
        (&op.matrix.transpose() * &self.matrix).trace()
    }
    /// Smallest and largest eigenvalue.
    pub fn spectrum_range(&self) -> (f64, f64) {
        let ev = SymmetricEigen::new(self.matrix.clone()).eigenvalues;
        (ev.min(), ev.max())
    }
    pub fn asymmetry(&self) -> f64 {
        (&self.matrix - self.matrix.transpose()).amax()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DualAscentReport {
    pub potential: Vec<f64>,
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
    pub converged: bool,
    pub repair_weight: f64,
    pub trace: Vec<StageRecord>,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct TgcOptions {
    /// Target for `primal - dual` relative to `1 + |primal|`.
    pub tol: f64,
    pub ascent: AscentOptions,
}

impl Default for TgcOptions {
    fn default() -> Self {
        TgcOptions { tol: 1e-9, ascent: AscentOptions::default() }
    }
}

#[derive(Debug, Clone)]
pub struct TgcResult {
    pub value: f64,
    pub gamma: DensityMatrix,
    pub report: DualAscentReport,
}

/// Smoothed dual `v ↦ Σ_j -τ log(1+e^{-λ_j/τ}) - ⟨v, m⟩`, `λ_j` the spectrum of `K + diag(v)`.
struct KineticDual<'a> {
    k: &'a DMatrix<f64>,
    masses: &'a [f64],
}

struct Spectrum {
    values: DVector<f64>,
    vectors: DMatrix<f64>,
}

impl KineticDual<'_> {
    fn spectrum(&self, v: &DVector<f64>) -> Spectrum {
        let mut h = self.k.clone();
        for i in 0..v.len() {
            h[(i, i)] += v[i];
        }
        let e = SymmetricEigen::new(h);
        Spectrum { values: e.eigenvalues, vectors: e.eigenvectors }
    }

    fn exact(&self, v: &DVector<f64>) -> f64 {
        let s = self.spectrum(v);
        s.values.iter().map(|&l| l.min(0.0)).sum::<f64>() - v.iter().zip(self.masses).map(|(a, b)| a * b).sum::<f64>()
    }

    /// Fermi-Dirac state at temperature `tau`.
    fn state(&self, v: &DVector<f64>, tau: f64) -> DMatrix<f64> {
        let s = self.spectrum(v);
        let occ: Vec<f64> = s.values.iter().map(|&l| dual::fermi(l, tau)).collect();
        let mut scaled = s.vectors.clone();
        for (j, f) in occ.iter().enumerate() {
            scaled.column_mut(j).scale_mut(*f);
        }
        &scaled * s.vectors.transpose()
    }
}

impl SmoothedDual for KineticDual<'_> {
    fn dim(&self) -> usize {
        self.masses.len()
    }
    fn smoothed(&self, v: &DVector<f64>, tau: f64) -> SmoothEval {
        let n = self.dim();
        let s = self.spectrum(v);
        let occ: Vec<f64> = s.values.iter().map(|&l| dual::fermi(l, tau)).collect();
        let value = s.values.iter().map(|&l| dual::soft_negative_part(l, tau)).sum::<f64>()
            - v.iter().zip(self.masses).map(|(a, b)| a * b).sum::<f64>();
        let u = &s.vectors;
        let mut grad = DVector::zeros(n);
        for i in 0..n {
            grad[i] = (0..n).map(|j| occ[j] * u[(i, j)] * u[(i, j)]).sum::<f64>() - self.masses[i];
        }
        let mut dd = DMatrix::zeros(n, n);
        for j in 0..n {
            for l in 0..n {
                dd[(j, l)] = dual::fermi_divided_difference(s.values[j], s.values[l], occ[j], occ[l], tau);
            }
        }
        // H_ab = Σ_{jl} D_jl U_aj U_al U_bj U_bl
        let mut hess = DMatrix::zeros(n, n);
        let mut p = DVector::zeros(n);
        for a in 0..n {
            for b in a..n {
                for j in 0..n {
                    p[j] = u[(a, j)] * u[(b, j)];
                }
                let val = p.dot(&(&dd * &p));
                hess[(a, b)] = val;
                hess[(b, a)] = val;
            }
        }
        SmoothEval { value, grad, hess }
    }
}

/// Mixes `γ` with a diagonal state so that the diagonal equals `target` exactly.
/// Returns the repaired matrix and the mixing weight.
fn repair_marginal(gamma: &DMatrix<f64>, target: &[f64]) -> (DMatrix<f64>, f64) {
    let n = target.len();
    let mut theta: f64 = 0.0;
    for i in 0..n {
        let d = gamma[(i, i)].clamp(0.0, 1.0);
        let m = target[i];
        if d > m && d > 0.0 {
            theta = theta.max(1.0 - m / d);
        }
        if m > d && d < 1.0 {
            theta = theta.max((m - d) / (1.0 - d));
        }
    }
    let theta = theta.min(1.0);
    let mut out = gamma * (1.0 - theta);
    if theta > 0.0 {
        for i in 0..n {
            let r = (target[i] - (1.0 - theta) * gamma[(i, i)]) / theta;
            out[(i, i)] += theta * r;
        }
    }
    for i in 0..n {
        out[(i, i)] = target[i];
    }
    (out, theta)
}

/// Congruence `DγD` with `D = diag(√(m/γ_ii))`, then the smallest diagonal
/// admixture that restores `γ ≤ 1`. Relative errors on cells of tiny mass
/// cost little here, unlike in [`repair_marginal`].
fn rescale_marginal(gamma: &DMatrix<f64>, target: &[f64]) -> Option<(DMatrix<f64>, f64)> {
    let n = target.len();
    let mut scale = vec![0.0; n];
    for i in 0..n {
        let d = gamma[(i, i)];
        if !(d > 0.0) {
            return None;
        }
        scale[i] = (target[i] / d).sqrt();
    }
    let sym = DMatrix::from_fn(n, n, |i, j| 0.5 * (gamma[(i, j)] + gamma[(j, i)]) * scale[i] * scale[j]);
    let top = SymmetricEigen::new(sym.clone()).eigenvalues.max();
    let m_max = target.iter().copied().fold(0.0, f64::max);
    let alpha = if top > 1.0 { (1.0 - m_max) / (top - m_max) } else { 1.0 };
    if !(alpha > 0.0) {
        return None;
    }
    let mut out = sym * alpha;
    for i in 0..n {
        out[(i, i)] = target[i];
    }
    Some((out, 1.0 - alpha))
}

/// Cheaper of the two exact-marginal repairs.
fn best_repair(k: &DMatrix<f64>, gamma: &DMatrix<f64>, target: &[f64]) -> (DMatrix<f64>, f64) {
    let mix = repair_marginal(gamma, target);
    match rescale_marginal(gamma, target) {
        Some(sc) if (k * &sc.0).trace() < (k * &mix.0).trace() => sc,
        _ => mix,
    }
}

fn check_kinetic_density(rho: &DiscreteDensity) -> Result<()> {
    if rho.grid.boundary != Boundary::Periodic {
        return input("kinetic functionals are defined on periodic grids");
    }
    if let Some((i, m)) = rho.masses.iter().enumerate().find(|(_, &m)| m > 1.0 + 1e-12) {
        return input(format!("cell {i} carries mass {m} > 1, which no density matrix 0 ≤ γ ≤ 1 can reproduce"));
    }
    Ok(())
}

/// `T_GC[ρ] = min { Tr(Kγ) : 0 ≤ γ ≤ 1, diag γ = m }` with a certified bracket.
pub fn solve_tgc(rho: &DiscreteDensity, opts: &TgcOptions) -> Result<TgcResult> {
    check_kinetic_density(rho)?;
    let op = PeriodicOperator::new(&rho.grid)?;
    let n = rho.grid.len();
    let active: Vec<usize> = (0..n).filter(|&i| rho.masses[i] > 0.0).collect();
    let zero_report = |trace| DualAscentReport {
        potential: vec![0.0; n],
        primal: 0.0,
        dual: 0.0,
        gap: 0.0,
        converged: true,
        repair_weight: 0.0,
        trace,
        iterations: 0,
    };
    if active.is_empty() {
        let gamma = DensityMatrix { grid: rho.grid.clone(), matrix: DMatrix::zeros(n, n) };
        return Ok(TgcResult { value: 0.0, gamma, report: zero_report(Vec::new()) });
    }
    let na = active.len();
    let k = DMatrix::from_fn(na, na, |a, b| op.matrix[(active[a], active[b])]);
    let masses: Vec<f64> = active.iter().map(|&i| rho.masses[i]).collect();
    let problem = KineticDual { k: &k, masses: &masses };
    let kdiag = k.diagonal().max();
    let ascent = AscentOptions { tau_start: opts.ascent.tau_start.max(kdiag), ..opts.ascent };
    let mut v = DVector::zeros(na);

    struct Best {
        primal: f64,
        gamma: DMatrix<f64>,
        theta: f64,
        v: DVector<f64>,
    }
    let mut best: Option<Best> = None;
    let mut best_dual = f64::NEG_INFINITY;
    let tol = opts.tol;
    let trace = dual::anneal(&problem, &mut v, &ascent, |v, tau| {
        let d = problem.exact(v);
        best_dual = best_dual.max(d);
        let (gamma, theta) = best_repair(&k, &problem.state(v, tau), &masses);
        let primal = (&k * &gamma).trace();
        if best.as_ref().map_or(true, |b| primal < b.primal) {
            best = Some(Best { primal, gamma, theta, v: v.clone() });
        }
        let b = best.as_ref().unwrap();
        b.primal - best_dual <= tol * (1.0 + b.primal.abs())
    });
    let b = best.expect("at least one stage");
    let gap = b.primal - best_dual;
    let mut full = DMatrix::zeros(n, n);
    for (a, &i) in active.iter().enumerate() {
        for (c, &j) in active.iter().enumerate() {
            full[(i, j)] = 0.5 * (b.gamma[(a, c)] + b.gamma[(c, a)]);
        }
    }
    let mut potential = vec![0.0; n];
    for (a, &i) in active.iter().enumerate() {
        potential[i] = b.v[a];
    }
    let iterations = trace.iter().map(|s| s.newton_steps).sum();
    let report = DualAscentReport {
        potential,
        primal: b.primal,
        dual: best_dual,
        gap,
        converged: gap <= tol * (1.0 + b.primal.abs()),
        repair_weight: b.theta,
        trace,
        iterations,
    };
    Ok(TgcResult { value: b.primal, gamma: DensityMatrix { grid: rho.grid.clone(), matrix: full }, report })
}

/// Projector onto the `N = ρ₀ |Λ|` plane waves of lowest momentum.
pub fn free_fermi(grid: &Grid, rho0: f64) -> Result<DensityMatrix> {
    if grid.boundary != Boundary::Periodic {
        return input("the free Fermi sea lives on a periodic grid");
    }
    let count = rho0 * grid.volume();
    let n = count.round();
    if (count - n).abs() > 1e-9 || n < 0.0 {
        return input(format!("ρ₀·|Λ| = {count} is not an integer"));
    }
    let n = n as usize;
    let sites = grid.len();
    if n > sites {
        return input("more particles than plane waves on the grid");
    }
    let d = grid.dim();
    let mut modes: Vec<(f64, Vec<i64>)> = (0..sites)
        .map(|i| {
            let idx = grid.multi_index(i);
            let m: Vec<i64> = (0..d).map(|a| idx[a] as i64 - (grid.cells[a] / 2) as i64).collect();
            let k2 = (0..d).map(|a| (2.0 * PI * m[a] as f64 / grid.lengths[a]).powi(2)).sum::<f64>();
            (k2, m)
        })
        .collect();
    modes.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    if n > 0 && n < sites && (modes[n].0 - modes[n - 1].0).abs() < 1e-12 * (1.0 + modes[n].0) {
        return input(format!("N = {n} does not close a momentum shell"));
    }
    let filled = &modes[..n];
    let mut matrix = DMatrix::zeros(sites, sites);
    for i in 0..sites {
        let ii = grid.multi_index(i);
        for j in 0..sites {
            let jj = grid.multi_index(j);
            let mut acc = 0.0;
            for (_, m) in filled {
                let phase: f64 = (0..d).map(|a| 2.0 * PI * m[a] as f64 * (ii[a] as f64 - jj[a] as f64) / grid.cells[a] as f64).sum();
                acc += phase.cos();
            }
            matrix[(i, j)] = acc / sites as f64;
        }
    }
    Ok(DensityMatrix { grid: grid.clone(), matrix })
}

/// Choice of the `N` winding numbers of the orbitals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WindingSet {
    /// `{-⌊N/2⌋, …}` integers, the extra one above zero for even `N`.
    IntegerUpward,
    /// Integers shifted by one half, symmetric about zero; needs `ρ` to vanish at the cell edge.
    HalfInteger,
}

#[derive(Debug, Clone, Serialize)]
pub struct MarchYoungResult {
    pub value: f64,
    pub windings: Vec<f64>,
    pub winding_set: WindingSet,
    /// `c_TF(1)∫ρ³ + ½∫|(√ρ)'|²`.
    pub bound: f64,
    pub slack: f64,
    /// Largest deviation of the orbital Gram matrix from the identity.
    pub orthonormality_error: f64,
    #[serde(skip)]
    pub gamma: DensityMatrix,
}

/// Cumulative mass `∫_0^x ρ` of the trigonometric interpolant at the grid sites.
fn cumulative_mass(grid: &Grid, masses: &[f64]) -> Vec<f64> {
    let m = masses.len();
    let l = grid.lengths[0];
    let h = l / m as f64;
    let x0 = grid.origin[0];
    let xs: Vec<f64> = (0..m).map(|i| x0 + (i as f64 + 0.5) * h).collect();
    // ρ(x) = Σ_k c_k e^{ikx} with c_k = (1/ℓ) Σ_i m_i e^{-ik x_i}
    let ks: Vec<i64> = axis_modes(m).collect();
    let mut out = vec![0.0; m];
    let total: f64 = masses.iter().sum();
    for (i, &x) in xs.iter().enumerate() {
        let mut acc = total / l * (x - x0);
        for &kk in &ks {
            if kk == 0 || (m % 2 == 0 && kk == -((m / 2) as i64)) {
                continue;
            }
            let k = 2.0 * PI * kk as f64 / l;
            let (mut re, mut im) = (0.0, 0.0);
            for (j, &xj) in xs.iter().enumerate() {
                re += masses[j] * (k * xj).cos();
                im -= masses[j] * (k * xj).sin();
            }
            re /= l;
            im /= l;
            // ∫_{x0}^{x} c e^{ikt} dt = c (e^{ikx} - e^{ikx0}) / (ik)
            let (dre, dim) = ((k * x).cos() - (k * x0).cos(), (k * x).sin() - (k * x0).sin());
            let pre = re * dre - im * dim;
            let pim = re * dim + im * dre;
            acc += pim / k;
            let _ = pre;
        }
        out[i] = acc;
    }
    out
}

/// Orbitals `√(ρ/N) e^{2πi n F(x)/N}` with `F` the cumulative mass.
pub fn march_young(rho: &DiscreteDensity, n: usize) -> Result<MarchYoungResult> {
    check_kinetic_density(rho)?;
    if rho.grid.dim() != 1 {
        return input("the orbital construction is one-dimensional");
    }
    if n == 0 || (rho.total() - n as f64).abs() > 1e-9 * n as f64 {
        return input(format!("density mass {} is not N = {n}", rho.total()));
    }
    let masses = &rho.masses;
    let peak = masses.iter().copied().fold(0.0, f64::max);
    let first = masses.iter().position(|&m| m > 0.0).unwrap();
    let last = masses.iter().rposition(|&m| m > 0.0).unwrap();
    if masses[first..=last].iter().any(|&m| m <= 0.0) {
        return input("density vanishes inside its support; the phase is undefined there");
    }
    let edge = masses[0].max(masses[masses.len() - 1]);
    let winding_set = if n % 2 == 0 && edge <= 1e-10 * peak { WindingSet::HalfInteger } else { WindingSet::IntegerUpward };
    let windings: Vec<f64> = match winding_set {
        WindingSet::HalfInteger => (0..n).map(|j| j as f64 - (n as f64 - 1.0) / 2.0).collect(),
        WindingSet::IntegerUpward => (0..n).map(|j| j as f64 - ((n - 1) / 2) as f64).collect(),
    };
    let op = PeriodicOperator::new(&rho.grid)?;
    let cum = cumulative_mass(&rho.grid, masses);
    let sites = masses.len();
    let orbitals: Vec<(DVector<f64>, DVector<f64>)> = windings
        .iter()
        .map(|&w| {
            let re = DVector::from_fn(sites, |i, _| (masses[i] / n as f64).sqrt() * (2.0 * PI * w * cum[i] / n as f64).cos());
            let im = DVector::from_fn(sites, |i, _| (masses[i] / n as f64).sqrt() * (2.0 * PI * w * cum[i] / n as f64).sin());
            (re, im)
        })
        .collect();
    let mut value = 0.0;
    let mut gamma = DMatrix::zeros(sites, sites);
    for (re, im) in &orbitals {
        value += re.dot(&(&op.matrix * re)) + im.dot(&(&op.matrix * im));
        gamma += re * re.transpose() + im * im.transpose();
    }
    let mut orthonormality_error: f64 = 0.0;
    for a in 0..n {
        for b in 0..n {
            let (ra, ia) = &orbitals[a];
            let (rb, ib) = &orbitals[b];
            let re = ra.dot(rb) + ia.dot(ib);
            let im = ra.dot(ib) - ia.dot(rb);
            let target = if a == b { 1.0 } else { 0.0 };
            orthonormality_error = orthonormality_error.max(((re - target).powi(2) + im * im).sqrt());
        }
    }
    let bound = thomas_fermi_constant(1) * rho.integral_power(3.0) + op.weizsacker(masses);
    Ok(MarchYoungResult {
        value,
        windings,
        winding_set,
        bound,
        slack: bound - value,
        orthonormality_error,
        gamma: DensityMatrix { grid: rho.grid.clone(), matrix: gamma },
    })
}

/// Weight profile `η_δ = δ^{-1} 1[a, a+δ]` with `a = δ/(e^δ - 1)`, so that
/// `∫η = ∫η/t = 1`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EtaProfile {
    pub width: f64,
    pub start: f64,
}

impl EtaProfile {
    pub fn new(width: f64) -> Result<Self> {
        if !(width > 0.0) || width > 50.0 {
            return input("η width must lie in (0, 50]");
        }
        Ok(EtaProfile { width, start: width / width.exp_m1() })
    }
    pub fn end(&self) -> f64 {
        self.start + self.width
    }
    pub fn mass(&self) -> f64 {
        1.0
    }
    pub fn inverse_moment(&self) -> f64 {
        (self.end() / self.start).ln() / self.width
    }
    /// `ε(δ) = ∫ η(u) u² du - 1`, the relative excess on a constant density.
    pub fn excess(&self) -> f64 {
        (self.end().powi(3) - self.start.powi(3)) / (3.0 * self.width) - 1.0
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LayerCakeResult {
    pub energy: f64,
    pub eta: EtaProfile,
    pub epsilon: f64,
    /// Smallest `κ' ≥ 0` for which the gradient-corrected upper bound covers the energy.
    pub kappa_prime: f64,
    /// `c_TF(1+ε)∫ρ³ + κ'(1+ε)/ε ∫|(√ρ)'|²` at that `κ'`.
    pub upper_report: f64,
    pub mass_error: f64,
    pub max_eigenvalue: f64,
    #[serde(skip)]
    pub gamma: DensityMatrix,
}

/// Filling projector of the periodic line at density `t`, as `A + t B` on the
/// interval of `t` containing `t_mid`.
fn fermi_projector_affine(sites: usize, length: f64, t_mid: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let c = t_mid * length;
    if c >= sites as f64 - 1.0 {
        return Err(LabError::Budget("layer-cake levels exceed the plane waves resolved by the grid".into()));
    }
    let wave = |m: usize| -> DMatrix<f64> {
        DMatrix::from_fn(sites, sites, |i, j| {
            let phase = 2.0 * PI * m as f64 * (i as f64 - j as f64) / sites as f64;
            if m == 0 {
                1.0 / sites as f64
            } else {
                2.0 * phase.cos() / sites as f64
            }
        })
    };
    let mut a = DMatrix::zeros(sites, sites);
    let b;
    if c < 1.0 {
        b = wave(0) * length;
    } else {
        let shell = ((c - 1.0) / 2.0).floor() as usize + 1;
        for m in 0..shell {
            a += wave(m);
        }
        // modes of the partial shell carry (c - (2 shell - 1)) / 2 each
        let w = wave(shell);
        a -= &w * ((2 * shell - 1) as f64 / 2.0);
        b = w * (length / 2.0);
    }
    Ok((a, b))
}

/// Layer-cake trial state `∫ (dt/t) √η(t/ρ) P_t √η(t/ρ)`, assembled exactly.
pub fn layer_cake_dm(rho: &DiscreteDensity, width: f64) -> Result<LayerCakeResult> {
    check_kinetic_density(rho)?;
    if rho.grid.dim() != 1 {
        return input("the layer-cake state is built on the periodic line");
    }
    let eta = EtaProfile::new(width)?;
    let sites = rho.grid.len();
    let length = rho.grid.lengths[0];
    let h = length / sites as f64;
    let values: Vec<f64> = rho.masses.iter().map(|m| m / h).collect();
    let mut breaks: Vec<f64> = vec![];
    for &r in &values {
        if r > 0.0 {
            breaks.push(eta.start * r);
            breaks.push(eta.end() * r);
        }
    }
    let t_max = breaks.iter().copied().fold(0.0, f64::max);
    let mut shell_count = 1.0;
    while shell_count / length < t_max {
        breaks.push(shell_count / length);
        shell_count += 2.0;
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * b.abs());
    let mut gamma = DMatrix::zeros(sites, sites);
    for w in breaks.windows(2) {
        let (t1, t2) = (w[0], w[1]);
        if t2 <= t1 || t1 <= 0.0 {
            continue;
        }
        let mid = 0.5 * (t1 + t2);
        let weights: Vec<f64> = values
            .iter()
            .map(|&r| if r > 0.0 && mid / r > eta.start && mid / r < eta.end() { (1.0 / eta.width).sqrt() } else { 0.0 })
            .collect();
        if weights.iter().all(|&x| x == 0.0) {
            continue;
        }
        let (a, b) = fermi_projector_affine(sites, length, mid)?;
        let block = a * (t2 / t1).ln() + b * (t2 - t1);
        for i in 0..sites {
            if weights[i] == 0.0 {
                continue;
            }
            for j in 0..sites {
                if weights[j] != 0.0 {
                    gamma[(i, j)] += weights[i] * weights[j] * block[(i, j)];
                }
            }
        }
    }
    let gamma = DensityMatrix { grid: rho.grid.clone(), matrix: gamma };
    let op = PeriodicOperator::new(&rho.grid)?;
    let energy = gamma.energy(&op);
    let mass_error = gamma.masses().iter().zip(&rho.masses).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let (_, max_eigenvalue) = gamma.spectrum_range();
    let epsilon = eta.excess();
    let main = thomas_fermi_constant(1) * (1.0 + epsilon) * rho.integral_power(3.0);
    let gradient = 2.0 * op.weizsacker(&rho.masses);
    let implied = if gradient > 0.0 { (energy - main) * epsilon / ((1.0 + epsilon) * gradient) } else { 0.0 };
    let kappa_prime = implied.max(0.0);
    let upper_report = main + kappa_prime * (1.0 + epsilon) / epsilon * gradient;
    Ok(LayerCakeResult { energy, eta, epsilon, kappa_prime, upper_report, mass_error, max_eigenvalue, gamma })
}

/// `Tr(Kγ) - ½∫|∇√ρ_γ|²`.
pub fn hoffmann_ostenhof_check(gamma: &DensityMatrix, op: &PeriodicOperator) -> f64 {
    gamma.energy(op) - op.weizsacker(&gamma.masses())
}

/// `Tr(Kγ) - c_TF 1.456^{-2/d} q^{-2/d} ∫ρ^{1+2/d}` with the proven constant.
pub fn lieb_thirring_check(gamma: &DensityMatrix, op: &PeriodicOperator, q: f64) -> Result<f64> {
    let d = gamma.grid.dim();
    let rho = gamma.density()?;
    Ok(gamma.energy(op) - lt_constant_lower_bound(d) * q.powf(-2.0 / d as f64) * rho.integral_power(1.0 + 2.0 / d as f64))
}

/// `T - c_TF(d) |Ω|^{-2/d} (∫ρ)^{1+2/d}` with `Ω` the union of cells carrying mass.
pub fn li_yau_check(rho: &DiscreteDensity, kinetic: f64) -> f64 {
    let d = rho.grid.dim() as f64;
    let support = rho.masses.iter().filter(|&&m| m > 0.0).count() as f64 * rho.grid.cell_volume();
    let n = rho.total();
    if n == 0.0 {
        return kinetic;
    }
    kinetic - thomas_fermi_constant(rho.grid.dim()) * support.powf(-2.0 / d) * n.powf(1.0 + 2.0 / d)
}

#[derive(Debug, Clone, Serialize)]
pub struct KineticBracket {
    pub lower: f64,
    pub upper: f64,
    pub local_term: f64,
    pub gradient_term: f64,
}

/// Gradient-corrected local bracket
/// `q^{-2/d} c_TF (1∓ε) ∫ρ^{1+2/d}` minus `κ ε^{-3-4/d} G`, plus `κ'(1+ε)/ε G`, `G = ∫|∇√ρ|²`.
pub fn lda_kinetic_bracket(rho: &DiscreteDensity, eps: f64, kappa: f64, kappa_prime: f64, q: f64) -> Result<KineticBracket> {
    if !(eps > 0.0 && eps < 1.0) {
        return input("ε must lie in (0, 1)");
    }
    let d = rho.grid.dim() as f64;
    let op = PeriodicOperator::new(&rho.grid)?;
    let local_term = thomas_fermi_constant(rho.grid.dim()) * q.powf(-2.0 / d) * rho.integral_power(1.0 + 2.0 / d);
    let gradient_term = 2.0 * op.weizsacker(&rho.masses);
    Ok(KineticBracket {
        lower: (1.0 - eps) * local_term - kappa / eps.powf(3.0 + 4.0 / d) * gradient_term,
        upper: (1.0 + eps) * local_term + kappa_prime * (1.0 + eps) / eps * gradient_term,
        local_term,
        gradient_term,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn ring(cells: usize, length: f64) -> Grid {
        Grid::line(cells, length, Boundary::Periodic).unwrap()
    }

    #[test]
    fn operator_has_plane_wave_spectrum() {
        let op = PeriodicOperator::new(&ring(8, 2.0)).unwrap();
        let ev = SymmetricEigen::new(op.matrix.clone()).eigenvalues;
        let mut ev: Vec<f64> = ev.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        assert!(ev[0].abs() < 1e-12);
        assert_relative_eq!(ev[1], 0.5 * PI * PI, max_relative = 1e-12);
        assert_relative_eq!(ev[7], 0.5 * (4.0 * PI).powi(2), max_relative = 1e-12);
    }

    #[test]
    fn free_fermi_three_particles() {
        let g = ring(16, 3.0);
        let gamma = free_fermi(&g, 1.0).unwrap();
        let op = PeriodicOperator::new(&g).unwrap();
        assert_relative_eq!(gamma.energy(&op), 4.0 * PI * PI / 9.0, max_relative = 1e-12);
        for m in gamma.masses() {
            assert_relative_eq!(m, 3.0 / 16.0, epsilon = 1e-13);
        }
        assert!(free_fermi(&g, 2.0 / 3.0).is_err());
    }

    #[test]
    fn marginal_repair_is_exact() {
        let g = DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.1, 0.3]);
        let (r, theta) = repair_marginal(&g, &[0.45, 0.35]);
        assert_relative_eq!(r[(0, 0)], 0.45);
        assert_relative_eq!(r[(1, 1)], 0.35);
        assert!(theta > 0.0 && theta < 0.2);
        let (r, _) = rescale_marginal(&g, &[0.45, 0.35]).unwrap();
        assert_relative_eq!(r[(0, 0)], 0.45);
        assert_relative_eq!(r[(1, 1)], 0.35);
        assert!(SymmetricEigen::new(r).eigenvalues.iter().all(|&l| (-1e-15..=1.0 + 1e-15).contains(&l)));
    }

    #[test]
    fn eta_profile_moments() {
        let e = EtaProfile::new(0.5).unwrap();
        assert_relative_eq!(e.inverse_moment(), 1.0, epsilon = 1e-14);
        assert!(e.excess() > 0.0);
    }

    #[test]
    fn constant_density_layer_cake_approaches_the_sea() {
        let g = ring(64, 9.0);
        let rho = DiscreteDensity::new(g, vec![9.0 / 64.0; 64]).unwrap();
        let lc = layer_cake_dm(&rho, 0.05).unwrap();
        assert!(lc.mass_error < 1e-12);
        assert!(lc.max_eigenvalue <= 1.0 + 1e-10);
        let per_length = lc.energy / 9.0;
        assert!((per_length - PI * PI / 6.0).abs() < 0.2, "{per_length}");
    }
}
