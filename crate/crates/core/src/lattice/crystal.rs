use crate::error::{input, LabError, Result};
use crate::model::{InteractionKernel, Lattice, LinearKernel};
use crate::parallel;
use crate::quadrature::{integrate_separable, BoxConv, Estimate, QuadOptions, SeparableTerm};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use std::collections::HashMap;

/// Lattice points inside the open cube `C_L = (-L/2, L/2)^d`.
///
/// The lattice is translated by `B (δ,…,δ)` with `δ = frac((L-1)/2)` so that
/// cubic lattices with integer `L` fill the cube with exactly `L^d` points.
#[derive(Debug, Clone, Serialize)]
pub struct FiniteCrystal {
    pub side: f64,
    pub shift: f64,
    /// Integer coordinates `z` of the points `B (z + δ)`.
    pub coords: Vec<Vec<i64>>,
    pub points: Vec<Vec<f64>>,
}

impl FiniteCrystal {
    pub fn len(&self) -> usize {
        self.points.len()
    }
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

pub fn finite_crystal(lattice: &Lattice, side: f64) -> Result<FiniteCrystal> {
    if !(side > 0.0) || !side.is_finite() {
        return input("crystal side must be positive");
    }
    let d = lattice.dim();
    let shift = ((side - 1.0) / 2.0).rem_euclid(1.0);
    let inv = lattice.basis.clone().try_inverse().expect("invertible basis");
    let inv_norm: f64 = (0..d).map(|i| (0..d).map(|j| inv[(i, j)].abs()).sum::<f64>()).fold(0.0, f64::max);
    let reach = (inv_norm * side / 2.0).ceil() as i64 + 1;
    let width = (2 * reach + 1) as usize;
    let half = side / 2.0 - 1e-12;
    let mut coords = Vec::new();
    let mut points = Vec::new();
    let mut z = vec![0i64; d];
    for idx in 0..width.pow(d as u32) {
        let mut rem = idx;
        for a in (0..d).rev() {
            z[a] = (rem % width) as i64 - reach;
            rem /= width;
        }
        let zf: Vec<f64> = z.iter().map(|&k| k as f64 + shift).collect();
        let p = lattice.point(&zf);
        if p.iter().all(|x| x.abs() < half) {
            coords.push(z.clone());
            points.push(p);
        }
    }
    Ok(FiniteCrystal { side, shift, coords, points })
}

/// `½ Σ_{i≠j} w(|x_i - x_j|)`.
pub fn pair_sum(points: &[Vec<f64>], kernel: &InteractionKernel) -> f64 {
    let n = points.len();
    let rows = parallel::map_range(n, |i| {
        let mut acc = 0.0;
        for j in 0..n {
            if j != i {
                let r: f64 = points[i].iter().zip(&points[j]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                acc += kernel.eval(r);
            }
        }
        acc
    });
    0.5 * rows.iter().sum::<f64>()
}

/// `½ ∬_{C_L × C_L} |x - y|^{-s}`.
pub fn box_self_integral(d: usize, s: f64, side: f64) -> Result<f64> {
    if !(1..=3).contains(&d) || !(s > 0.0 && s < d as f64) || !(side > 0.0) {
        return input("box_self_integral needs d in 1..=3, 0 < s < d, L > 0");
    }
    if d == 1 {
        return Ok(side.powf(2.0 - s) / ((1.0 - s) * (2.0 - s)));
    }
    let kernel = InteractionKernel::Riesz { s };
    let axes = vec![BoxConv::centered(0.0, side).conv(&BoxConv::centered(0.0, side)); d];
    let terms = [SeparableTerm { coef: 1.0, axes }];
    Ok(0.5 * integrate_separable(&LinearKernel { kernel: &kernel, basis: None }, &terms, &QuadOptions::default()).value)
}

/// Energy terms of a finite crystal.
#[derive(Debug, Clone, Serialize)]
pub struct CrystalEnergyBreakdown {
    pub side: f64,
    pub particles: usize,
    /// `½ Σ_{i≠j} w(ℓ_i - ℓ_j)`.
    pub pair_term: f64,
    /// `½ ∬_{Ω_L²} w`.
    pub continuum_term: f64,
    /// Point-background term `Σ_j ∫_{Ω_L} w(ℓ_j - y) dy` (clamped jellium only).
    pub cross_term: Option<f64>,
    /// Total energy divided by the normalizing volume.
    pub per_volume: f64,
    /// Propagated quadrature error of `per_volume`.
    pub error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CrystalMode {
    Floating,
    Clamped,
    Modified,
}

impl std::str::FromStr for CrystalMode {
    type Err = LabError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "floating" => Ok(CrystalMode::Floating),
            "clamped" | "jellium" => Ok(CrystalMode::Clamped),
            "modified" => Ok(CrystalMode::Modified),
            _ => input(format!("unknown crystal mode `{s}`")),
        }
    }
}

/// Largest cube side accepted in three dimensions.
pub const MAX_SIDE_3D: f64 = 8.0;

fn check_crystal_kernel(lattice: &Lattice, kernel: &InteractionKernel, side: f64) -> Result<()> {
    let d = lattice.dim();
    match kernel {
        InteractionKernel::NegAbs if d == 1 => {}
        InteractionKernel::NegAbs => return input("the -|r| kernel is one-dimensional"),
        k => match k.riesz_exponent() {
            Some(s) if s > 0.0 && s < d as f64 => {}
            _ => return input("crystal energies need riesz(s) with 0 < s < d, or -|r| in d = 1"),
        },
    }
    if d == 3 && side > MAX_SIDE_3D {
        return Err(LabError::Budget(format!("three-dimensional crystals are capped at L <= {MAX_SIDE_3D}")));
    }
    Ok(())
}

/// Cell-pair data shared by the floating and clamped energies.
struct CellPairs {
    /// Ordered difference multiplicities `#{(i,j): z_i - z_j = δ}`.
    mult: Vec<(Vec<i64>, f64)>,
}

fn cell_pairs(crystal: &FiniteCrystal) -> CellPairs {
    let mut map: HashMap<Vec<i64>, f64> = HashMap::new();
    for a in &crystal.coords {
        for b in &crystal.coords {
            let key: Vec<i64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
            *map.entry(key).or_insert(0.0) += 1.0;
        }
    }
    let mut mult: Vec<(Vec<i64>, f64)> = map.into_iter().collect();
    mult.sort_by(|a, b| a.0.cmp(&b.0));
    CellPairs { mult }
}

/// Canonical representative of an offset under the symmetries of the integrals.
fn canonical(delta: &[i64], cubic: bool) -> Vec<i64> {
    if cubic {
        let mut v: Vec<i64> = delta.iter().map(|x| x.abs()).collect();
        v.sort();
        v
    } else {
        let neg: Vec<i64> = delta.iter().map(|x| -x).collect();
        if neg > delta.to_vec() {
            neg
        } else {
            delta.to_vec()
        }
    }
}

fn tent_term(delta: &[i64]) -> SeparableTerm {
    SeparableTerm {
        coef: 1.0,
        axes: delta.iter().map(|&k| BoxConv::centered(k as f64, 1.0).conv(&BoxConv::centered(0.0, 1.0))).collect(),
    }
}

fn cell_term(delta: &[i64]) -> SeparableTerm {
    SeparableTerm { coef: 1.0, axes: delta.iter().map(|&k| BoxConv::centered(k as f64, 1.0)).collect() }
}

fn offset_integrals(
    lattice: &Lattice,
    kernel: &InteractionKernel,
    pairs: &CellPairs,
    make: fn(&[i64]) -> SeparableTerm,
    include_zero: bool,
) -> HashMap<Vec<i64>, Estimate> {
    let cubic = lattice.is_cubic();
    let mut reps: Vec<Vec<i64>> = pairs
        .mult
        .iter()
        .filter(|(d, _)| include_zero || d.iter().any(|&k| k != 0))
        .map(|(d, _)| canonical(d, cubic))
        .collect();
    reps.sort();
    reps.dedup();
    let basis = if cubic { None } else { Some(&lattice.basis) };
    let opts = QuadOptions { estimate_error: true, ..QuadOptions::default() };
    let values = parallel::map_slice(&reps, |delta| {
        let lk = LinearKernel { kernel, basis };
        let inner = opts;
        integrate_separable(&lk, &[make(delta)], &inner)
    });
    reps.into_iter().zip(values).collect()
}

fn pair_term(lattice: &Lattice, kernel: &InteractionKernel, pairs: &CellPairs) -> f64 {
    let mut total = 0.0;
    for (delta, m) in &pairs.mult {
        if delta.iter().all(|&k| k == 0) {
            continue;
        }
        let zf: Vec<f64> = delta.iter().map(|&k| k as f64).collect();
        let r: f64 = lattice.point(&zf).iter().map(|x| x * x).sum::<f64>().sqrt();
        total += m * kernel.eval(r);
    }
    0.5 * total
}

fn weighted_sum(pairs: &CellPairs, table: &HashMap<Vec<i64>, Estimate>, cubic: bool, skip_zero: bool) -> Estimate {
    let mut value = 0.0;
    let mut error = 0.0;
    for (delta, m) in &pairs.mult {
        if skip_zero && delta.iter().all(|&k| k == 0) {
            continue;
        }
        let e = table[&canonical(delta, cubic)];
        value += m * e.value;
        error += m * e.error;
    }
    Estimate { value, error }
}

/// Indirect energy of the translation-averaged (floating) crystal divided by `N`.
pub fn floating_indirect(lattice: &Lattice, side: f64, kernel: &InteractionKernel) -> Result<CrystalEnergyBreakdown> {
    check_crystal_kernel(lattice, kernel, side)?;
    let crystal = finite_crystal(lattice, side)?;
    let pairs = cell_pairs(&crystal);
    let psi = offset_integrals(lattice, kernel, &pairs, tent_term, true);
    let pair = pair_term(lattice, kernel, &pairs);
    let dbl = weighted_sum(&pairs, &psi, lattice.is_cubic(), false);
    let n = crystal.len() as f64;
    Ok(CrystalEnergyBreakdown {
        side,
        particles: crystal.len(),
        pair_term: pair,
        continuum_term: 0.5 * dbl.value,
        cross_term: None,
        per_volume: (pair - 0.5 * dbl.value) / n,
        error: 0.5 * dbl.error / n,
    })
}

/// Jellium energy of the crystal clamped at the cell centers, divided by `N`.
pub fn jellium_clamped(lattice: &Lattice, side: f64, kernel: &InteractionKernel) -> Result<CrystalEnergyBreakdown> {
    check_crystal_kernel(lattice, kernel, side)?;
    let crystal = finite_crystal(lattice, side)?;
    let pairs = cell_pairs(&crystal);
    let psi = offset_integrals(lattice, kernel, &pairs, tent_term, true);
    let phi = offset_integrals(lattice, kernel, &pairs, cell_term, true);
    let pair = pair_term(lattice, kernel, &pairs);
    let cubic = lattice.is_cubic();
    let dbl = weighted_sum(&pairs, &psi, cubic, false);
    let cross = weighted_sum(&pairs, &phi, cubic, false);
    let n = crystal.len() as f64;
    Ok(CrystalEnergyBreakdown {
        side,
        particles: crystal.len(),
        pair_term: pair,
        continuum_term: 0.5 * dbl.value,
        cross_term: Some(cross.value),
        per_volume: (pair - cross.value + 0.5 * dbl.value) / n,
        error: (cross.error + 0.5 * dbl.error) / n,
    })
}

/// Breakdown of the fluid-wrapped floating crystal.
#[derive(Debug, Clone, Serialize)]
pub struct ModifiedCrystalBreakdown {
    pub side: f64,
    pub container_side: f64,
    pub particles: usize,
    pub fluid_particles: usize,
    pub jellium_total: f64,
    /// `½ D(ν, ν)` of the neutral boundary layer `ν = 1_Ω - 1_Ω * 1_Q`.
    pub boundary_layer: f64,
    /// `E_y D(a_y, a_y) / (2M)` from the fluid self-interaction.
    pub fluid_correlation: f64,
    pub per_volume: f64,
    /// Total energy divided by the crystal particle count.
    pub per_particle: f64,
    pub error: f64,
}

/// Indirect energy per container volume of the crystal wrapped in an
/// incompressible fluid layer, for cubic lattices.
///
/// With `a_y = 1_{C'} - 1_{Ω+y}` the translation average is exact:
/// `E = J - ½ D(ν,ν) - E_y D(a_y,a_y)/(2M)`, where `J` is the clamped
/// jellium energy and `E_y D(a_y,a_y) = D(C',C') - 2 D(C', 1_Ω*1_Q) + D(Ω,Ω)`.
pub fn floating_modified(lattice: &Lattice, side: f64, margin: f64, kernel: &InteractionKernel) -> Result<ModifiedCrystalBreakdown> {
    check_crystal_kernel(lattice, kernel, side)?;
    if !lattice.is_cubic() {
        return input("the fluid-wrapped crystal is implemented for cubic lattices");
    }
    if (side - side.round()).abs() > 1e-12 || side < 1.0 {
        return input("the fluid-wrapped crystal needs an integer side");
    }
    let d = lattice.dim();
    let diam = (d as f64).sqrt();
    if !(margin > diam) {
        return input(format!("margin {margin} must exceed the cell diameter {diam:.4}"));
    }
    let inner = side.powi(d as i32);
    let fluid = ((side + margin).powi(d as i32) - inner).ceil();
    let outer_side = (inner + fluid).powf(1.0 / d as f64);
    let jel = jellium_clamped(lattice, side, kernel)?;
    let jellium_total = jel.per_volume * jel.particles as f64;

    let omega = BoxConv::centered(0.0, side);
    let cell = BoxConv::centered(0.0, 1.0);
    let outer = BoxConv::centered(0.0, outer_side);
    let smeared = omega.conv(&cell);
    let sym = |coef: f64, a: &BoxConv, b: &BoxConv| SeparableTerm { coef, axes: vec![a.conv(&b.reflect()); d] };
    let lk = LinearKernel { kernel, basis: None };
    let opts = QuadOptions { estimate_error: true, ..QuadOptions::default() };
    let layer_terms = [sym(1.0, &omega, &omega), sym(-2.0, &omega, &smeared), sym(1.0, &smeared, &smeared)];
    let layer = integrate_separable(&lk, &layer_terms, &opts);
    let fluid_terms = [sym(1.0, &outer, &outer), sym(-2.0, &outer, &smeared), sym(1.0, &omega, &omega)];
    let fluid_self = integrate_separable(&lk, &fluid_terms, &opts);
    let boundary_layer = 0.5 * layer.value;
    let fluid_correlation = fluid_self.value / (2.0 * fluid);
    let vol = outer_side.powi(d as i32);
    Ok(ModifiedCrystalBreakdown {
        side,
        container_side: outer_side,
        particles: jel.particles,
        fluid_particles: fluid as usize,
        jellium_total,
        boundary_layer,
        fluid_correlation,
        per_volume: (jellium_total - boundary_layer - fluid_correlation) / vol,
        per_particle: (jellium_total - boundary_layer - fluid_correlation) / jel.particles as f64,
        error: (jel.error * jel.particles as f64 + 0.5 * layer.error + fluid_self.error / (2.0 * fluid)) / vol,
    })
}

/// Least-squares fit `value ≈ a + Σ_k b_k L^{-p_k}`.
#[derive(Debug, Clone, Serialize)]
pub struct InverseFit {
    pub limit: f64,
    pub coefficients: Vec<f64>,
    pub powers: Vec<f64>,
    /// Root-mean-square residual of the fit.
    pub residual: f64,
    /// Spread of the limit between this fit and the fit with one power fewer.
    pub limit_spread: f64,
}

fn solve_fit(sides: &[f64], values: &[f64], powers: &[f64]) -> (Vec<f64>, f64) {
    let n = sides.len();
    let k = powers.len() + 1;
    let mut a = DMatrix::zeros(n, k);
    for (i, &l) in sides.iter().enumerate() {
        a[(i, 0)] = 1.0;
        for (j, &p) in powers.iter().enumerate() {
            a[(i, j + 1)] = l.powf(-p);
        }
    }
    let b = DVector::from_column_slice(values);
    let svd = a.clone().svd(true, true);
    let x = svd.solve(&b, 1e-14).expect("svd solve");
    let r = &a * &x - &b;
    ((0..k).map(|i| x[i]).collect(), (r.norm_squared() / n as f64).sqrt())
}

pub fn fit_inverse_powers(sides: &[f64], values: &[f64], powers: &[f64]) -> Result<InverseFit> {
    if sides.len() != values.len() || sides.len() < powers.len() + 1 {
        return input("not enough points for the requested fit");
    }
    let (coef, residual) = solve_fit(sides, values, powers);
    let limit_spread = if powers.is_empty() {
        0.0
    } else {
        let m = powers.len() - 1;
        let tail = sides.len() - (m + 1);
        let (c2, _) = solve_fit(&sides[tail..], &values[tail..], &powers[..m]);
        (c2[0] - coef[0]).abs()
    };
    Ok(InverseFit { limit: coef[0], coefficients: coef[1..].to_vec(), powers: powers.to_vec(), residual, limit_spread })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::LatticeName;
    use approx::assert_relative_eq;

    #[test]
    fn crystal_counts() {
        let z1 = finite_crystal(&Lattice::new(LatticeName::Z1), 3.0).unwrap();
        assert_eq!(z1.points, vec![vec![-1.0], vec![0.0], vec![1.0]]);
        assert_eq!(finite_crystal(&Lattice::new(LatticeName::Z3), 2.0).unwrap().len(), 8);
        let bcc = finite_crystal(&Lattice::new(LatticeName::BCC), 10.0).unwrap();
        assert!((bcc.len() as f64 / 1000.0 - 1.0).abs() < 0.1);
    }

    #[test]
    fn pair_sums() {
        let k = InteractionKernel::Riesz { s: 1.0 };
        assert_relative_eq!(pair_sum(&[vec![0.0], vec![1.0], vec![2.0]], &k), 2.5);
        let k2 = InteractionKernel::Riesz { s: 2.0 };
        assert_relative_eq!(pair_sum(&[vec![0.0, 0.0], vec![0.0, 2.0]], &k2), 0.25);
    }

    #[test]
    fn box_integral_scaling() {
        assert_relative_eq!(box_self_integral(1, 0.5, 1.0).unwrap(), 4.0 / 3.0, epsilon = 1e-14);
        let a = box_self_integral(2, 0.7, 1.0).unwrap();
        let b = box_self_integral(2, 0.7, 2.5).unwrap();
        assert_relative_eq!(b, 2.5f64.powf(4.0 - 0.7) * a, max_relative = 1e-11);
    }

    #[test]
    fn one_dimensional_coulomb_crystal_is_exact() {
        let z1 = Lattice::new(LatticeName::Z1);
        for side in [4.0, 7.0] {
            let f = floating_indirect(&z1, side, &InteractionKernel::NegAbs).unwrap();
            assert_relative_eq!(f.per_volume, 1.0 / 6.0, epsilon = 1e-12);
            let j = jellium_clamped(&z1, side, &InteractionKernel::NegAbs).unwrap();
            assert_relative_eq!(j.per_volume, 1.0 / 12.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn fit_recovers_polynomial_limit() {
        let sides = [8.0, 16.0, 32.0, 64.0];
        let vals: Vec<f64> = sides.iter().map(|l| 2.0 + 3.0 / l - 1.0 / (l * l)).collect();
        let fit = fit_inverse_powers(&sides, &vals, &[1.0, 2.0]).unwrap();
        assert_relative_eq!(fit.limit, 2.0, epsilon = 1e-10);
    }
}
