use super::{tuple_cost, CouplingPlan};
use crate::error::{input, Result};
use crate::model::{pair_cost_matrix, DiscreteDensity, InteractionKernel};
use serde::Serialize;

/// Interval of the quantile parameter on which every particle stays in one cell.
#[derive(Debug, Clone, Serialize)]
pub struct MongeSegment {
    pub lo: f64,
    pub hi: f64,
    /// Cell of particle `k` (0-based) for parameters in `(lo, hi)`.
    pub cells: Vec<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MongeResult {
    pub value: f64,
    pub segments: Vec<MongeSegment>,
    pub plan: CouplingPlan,
}

/// Inverse cumulative distribution of a piecewise-constant 1D density.
pub fn quantile(rho: &DiscreteDensity, mass: f64) -> f64 {
    let h = rho.grid.spacing()[0];
    let x0 = rho.grid.origin[0];
    let mut acc = 0.0;
    for (i, &m) in rho.masses.iter().enumerate() {
        if m > 0.0 && acc + m >= mass {
            return x0 + h * (i as f64 + (mass - acc) / m);
        }
        acc += m;
    }
    x0 + rho.grid.lengths[0]
}

/// Monotone (comonotone) plan of a one-dimensional density with `∫ρ = N`:
/// particle `k` sits at the quantile of level `k + t`, `t ∈ [0, 1)`.
///
/// On a cell grid the plan is piecewise constant in `t`, so the cost integral
/// is evaluated exactly over the breakpoints where some particle changes cell.
pub fn monge_1d(rho: &DiscreteDensity, n: usize, kernel: &InteractionKernel) -> Result<MongeResult> {
    if rho.grid.dim() != 1 {
        return input("the monotone plan is one-dimensional");
    }
    let total = rho.total();
    if n == 0 || (total - n as f64).abs() > 1e-9 * n as f64 {
        return input(format!("density mass {total} is not the particle number {n}"));
    }
    let costs = pair_cost_matrix(&rho.grid, kernel)?;
    let m = rho.masses.len();
    let mut cum = Vec::with_capacity(m + 1);
    cum.push(0.0);
    for &x in &rho.masses {
        cum.push(cum.last().unwrap() + x);
    }
    // Normalize rounding so the last partial sum is exactly N.
    let scale = n as f64 / cum[m];
    for c in &mut cum {
        *c *= scale;
    }
    let mut breaks = vec![0.0, 1.0];
    for k in 0..n {
        for &c in &cum {
            let t = c - k as f64;
            if t > 0.0 && t < 1.0 {
                breaks.push(t);
            }
        }
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
    let mut segments = Vec::new();
    let mut value = 0.0;
    for w in breaks.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if hi - lo <= 0.0 {
            continue;
        }
        let mid = 0.5 * (lo + hi);
        let cells: Vec<usize> = (0..n)
            .map(|k| (cum.partition_point(|&c| c <= k as f64 + mid).saturating_sub(1)).min(m - 1))
            .collect();
        value += (hi - lo) * tuple_cost(&cells, &costs);
        segments.push(MongeSegment { lo, hi, cells });
    }
    if !value.is_finite() {
        return Err(crate::error::LabError::Infeasible(
            "the monotone plan stacks two particles in one cell of a non-integrable kernel".into(),
        ));
    }
    let plan = CouplingPlan::from_masses(n, m, segments.iter().map(|s| (s.cells.clone(), s.hi - s.lo)));
    Ok(MongeResult { value, segments, plan })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Boundary, Grid};
    use approx::assert_relative_eq;

    #[test]
    fn uniform_density_is_the_floating_crystal() {
        for (n, s) in [(3usize, 0.5), (4, 1.0), (5, 0.3)] {
            let grid = Grid::line(n * 4, n as f64, Boundary::Open).unwrap();
            let rho = DiscreteDensity::new(grid, vec![0.25; n * 4]).unwrap();
            let r = monge_1d(&rho, n, &InteractionKernel::Riesz { s }).unwrap();
            let mut expect = 0.0;
            for j in 0..n {
                for k in j + 1..n {
                    expect += ((k - j) as f64).powf(-s);
                }
            }
            assert_relative_eq!(r.value, expect, max_relative = 1e-13);
        }
    }

    #[test]
    fn single_particle_costs_nothing() {
        let grid = Grid::line(3, 1.0, Boundary::Open).unwrap();
        let rho = DiscreteDensity::new(grid, vec![0.2, 0.5, 0.3]).unwrap();
        assert_eq!(monge_1d(&rho, 1, &InteractionKernel::Riesz { s: 0.5 }).unwrap().value, 0.0);
    }

    #[test]
    fn quantile_inverts_the_distribution() {
        let grid = Grid::line(4, 2.0, Boundary::Open).unwrap();
        let rho = DiscreteDensity::new(grid, vec![0.5, 0.0, 1.0, 0.5]).unwrap();
        assert_relative_eq!(quantile(&rho, 0.25), 0.25);
        assert_relative_eq!(quantile(&rho, 1.0), 1.25);
        assert_relative_eq!(quantile(&rho, 2.0), 2.0);
    }
}
