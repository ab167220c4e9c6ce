//! Entropic cross-check: log-domain Sinkhorn over ordered tuples with one
//! potential shared by all marginals, annealed in the temperature.

use super::{CouplingPlan, KantorovichPotential, MmotResult, Solver};
use crate::error::{LabError, Result};
use crate::model::DiscreteDensity;
use nalgebra::DMatrix;

#[derive(Debug, Clone, Copy)]
pub struct SinkhornOptions {
    /// Final temperature relative to the largest finite pair cost.
    pub final_epsilon: f64,
    pub max_iterations: usize,
    pub marginal_tol: f64,
}

impl Default for SinkhornOptions {
    fn default() -> Self {
        SinkhornOptions { final_epsilon: 2e-4, max_iterations: 20_000, marginal_tol: 1e-10 }
    }
}

fn log_sum_exp(values: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.collect();
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

pub fn solve_sinkhorn(rho: &DiscreteDensity, n: usize, costs: &DMatrix<f64>, opts: &SinkhornOptions) -> Result<MmotResult> {
    let active: Vec<usize> = (0..rho.masses.len()).filter(|&i| rho.masses[i] > 0.0).collect();
    let k = active.len();
    let target: Vec<f64> = active.iter().map(|&i| rho.masses[i] / n as f64).collect();
    let count = k.pow(n as u32);
    let decode = |mut idx: usize| -> Vec<usize> {
        let mut t = vec![0; n];
        for slot in t.iter_mut().rev() {
            *slot = idx % k;
            idx /= k;
        }
        t
    };
    let tuple_costs: Vec<f64> = (0..count)
        .map(|idx| {
            let t = decode(idx);
            let mut c = 0.0;
            for a in 0..n {
                for b in a + 1..n {
                    c += costs[(active[t[a]], active[t[b]])];
                }
            }
            c
        })
        .collect();
    let scale = tuple_costs.iter().filter(|c| c.is_finite()).fold(0.0f64, |a, c| a.max(c.abs())).max(1e-12);
    let block = count / k.max(1);
    let mut u = vec![0.0; k];
    let mut eps = scale;
    let eps_min = opts.final_epsilon * scale;
    let mut iterations = 0;
    let mut err = f64::INFINITY;
    // `logs[i]` is log Σ over tuples starting at i of exp((Σ_{j≥1} u - c)/ε).
    let tail_logs = |u: &[f64], eps: f64| -> Vec<f64> {
        (0..k)
            .map(|i| {
                log_sum_exp((0..block).map(|r| {
                    let idx = i * block + r;
                    let t = decode(idx);
                    (t[1..].iter().map(|&j| u[j]).sum::<f64>() - tuple_costs[idx]) / eps
                }))
            })
            .collect()
    };
    loop {
        for _ in 0..opts.max_iterations {
            let logs = tail_logs(&u, eps);
            err = (0..k).map(|i| ((u[i] / eps + logs[i]).exp() - target[i]).abs()).sum();
            iterations += 1;
            if err < opts.marginal_tol {
                break;
            }
            for i in 0..k {
                let fresh = eps * (target[i].ln() - logs[i]);
                u[i] = 0.5 * (u[i] + fresh);
            }
        }
        if eps <= eps_min {
            break;
        }
        eps = (eps * 0.5).max(eps_min);
    }
    if !(err < 1e-6) {
        return Err(LabError::Convergence { message: "sinkhorn marginals did not converge".into(), residual: err });
    }
    let mut value = 0.0;
    let mut entries = Vec::new();
    for (idx, &c) in tuple_costs.iter().enumerate() {
        if !c.is_finite() {
            continue;
        }
        let t = decode(idx);
        let p = ((t.iter().map(|&j| u[j]).sum::<f64>() - c) / eps).exp();
        if p > 0.0 {
            value += p * c;
            entries.push((t.iter().map(|&j| active[j]).collect::<Vec<_>>(), p));
        }
    }
    let mut values = vec![0.0; rho.masses.len()];
    for (j, &i) in active.iter().enumerate() {
        values[i] = -u[j];
    }
    let objective = -values.iter().zip(&rho.masses).map(|(v, m)| v * m).sum::<f64>();
    Ok(MmotResult {
        solver: Solver::Sinkhorn,
        value,
        dual_value: objective,
        gap: (value - objective).abs() / (1.0 + value.abs()),
        iterations,
        plan: CouplingPlan::from_masses(n, rho.masses.len(), entries),
        potential: KantorovichPotential { values, objective },
    })
}
