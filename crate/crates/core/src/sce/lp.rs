//! Revised simplex for `min cᵀx  s.t.  A x = b, x ≥ 0` with sparse columns.
//!
//! Two phases with one artificial per row. Pricing is Dantzig's rule; after a
//! run of degenerate pivots the solver switches to Bland's rule until the
//! objective moves again. Ties in the ratio test go to the smallest basic index,
//! so the returned vertex is deterministic.

use crate::error::{LabError, Result};
use nalgebra::DMatrix;

#[derive(Debug, Clone)]
pub struct LinearProgram {
    pub rows: usize,
    /// Sparse columns as `(row, value)` pairs.
    pub columns: Vec<Vec<(usize, f64)>>,
    pub costs: Vec<f64>,
    pub rhs: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct LpOptions {
    pub max_iterations: usize,
    pub refactor_every: usize,
    pub degenerate_streak: usize,
}

impl Default for LpOptions {
    fn default() -> Self {
        LpOptions { max_iterations: 200_000, refactor_every: 64, degenerate_streak: 40 }
    }
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Vec<f64>,
    /// Row multipliers `y` with `Aᵀy ≤ c` at optimality.
    pub duals: Vec<f64>,
    pub primal: f64,
    pub dual: f64,
    pub iterations: usize,
    /// Most negative reduced cost over all columns (dual infeasibility).
    pub min_reduced_cost: f64,
}

impl LpSolution {
    pub fn relative_gap(&self) -> f64 {
        (self.primal - self.dual).abs() / (1.0 + self.primal.abs())
    }
}

struct Tableau<'a> {
    lp: &'a LinearProgram,
    sign: Vec<f64>,
    b: Vec<f64>,
    basis: Vec<usize>,
    binv: DMatrix<f64>,
    xb: Vec<f64>,
    iterations: usize,
}

impl<'a> Tableau<'a> {
    fn n(&self) -> usize {
        self.lp.columns.len()
    }

    fn column(&self, j: usize) -> Vec<(usize, f64)> {
        if j < self.n() {
            self.lp.columns[j].iter().map(|&(i, v)| (i, v * self.sign[i])).collect()
        } else {
            vec![(j - self.n(), 1.0)]
        }
    }

    fn ftran(&self, j: usize) -> Vec<f64> {
        let m = self.lp.rows;
        let mut u = vec![0.0; m];
        for (i, v) in self.column(j) {
            for (k, uk) in u.iter_mut().enumerate() {
                *uk += self.binv[(k, i)] * v;
            }
        }
        u
    }

    fn refactor(&mut self) -> Result<()> {
        let m = self.lp.rows;
        let mut bmat = DMatrix::zeros(m, m);
        for (k, &j) in self.basis.iter().enumerate() {
            for (i, v) in self.column(j) {
                bmat[(i, k)] = v;
            }
        }
        self.binv = bmat.lu().try_inverse().ok_or_else(|| LabError::Convergence {
            message: "singular basis during refactorization".into(),
            residual: f64::NAN,
        })?;
        for k in 0..m {
            self.xb[k] = (0..m).map(|i| self.binv[(k, i)] * self.b[i]).sum::<f64>().max(0.0);
        }
        Ok(())
    }

    fn duals(&self, cost: &dyn Fn(usize) -> f64) -> Vec<f64> {
        let m = self.lp.rows;
        let cb: Vec<f64> = self.basis.iter().map(|&j| cost(j)).collect();
        (0..m).map(|i| (0..m).map(|k| cb[k] * self.binv[(k, i)]).sum()).collect()
    }

    fn reduced(&self, j: usize, y: &[f64], cost: &dyn Fn(usize) -> f64) -> f64 {
        cost(j) - self.column(j).iter().map(|&(i, v)| y[i] * v).sum::<f64>()
    }

    fn pivot(&mut self, r: usize, q: usize, u: &[f64]) {
        let m = self.lp.rows;
        let t = self.xb[r] / u[r];
        for k in 0..m {
            if k != r {
                self.xb[k] = (self.xb[k] - t * u[k]).max(0.0);
            }
        }
        self.xb[r] = t.max(0.0);
        let piv = u[r];
        for c in 0..m {
            self.binv[(r, c)] /= piv;
        }
        for k in 0..m {
            if k != r && u[k] != 0.0 {
                let f = u[k];
                for c in 0..m {
                    let delta = f * self.binv[(r, c)];
                    self.binv[(k, c)] -= delta;
                }
            }
        }
        self.basis[r] = q;
    }

    fn run(&mut self, cost: &dyn Fn(usize) -> f64, allowed: &dyn Fn(usize) -> bool, opts: &LpOptions, scale: f64) -> Result<()> {
        let m = self.lp.rows;
        let total = self.n() + m;
        let tol = 1e-11 * scale;
        let mut streak = 0usize;
        let mut bland = false;
        let mut in_basis = vec![false; total];
        for &j in &self.basis {
            in_basis[j] = true;
        }
        let mut since_refactor = 0usize;
        loop {
            if self.iterations >= opts.max_iterations {
                return Err(LabError::Convergence { message: "simplex iteration cap reached".into(), residual: f64::NAN });
            }
            if since_refactor >= opts.refactor_every {
                self.refactor()?;
                since_refactor = 0;
            }
            let y = self.duals(cost);
            let mut entering = None;
            let mut best = -tol;
            for j in 0..total {
                if in_basis[j] || !allowed(j) {
                    continue;
                }
                let d = self.reduced(j, &y, cost);
                if bland {
                    if d < -tol {
                        entering = Some(j);
                        break;
                    }
                } else if d < best {
                    best = d;
                    entering = Some(j);
                }
            }
            let Some(q) = entering else { return Ok(()) };
            let u = self.ftran(q);
            let mut leave: Option<(usize, f64)> = None;
            for (k, &uk) in u.iter().enumerate() {
                if uk > 1e-9 {
                    let t = self.xb[k] / uk;
                    match leave {
                        None => leave = Some((k, t)),
                        Some((r, tr)) => {
                            if t < tr - 1e-12 * (1.0 + tr) || (t <= tr + 1e-12 * (1.0 + tr) && self.basis[k] < self.basis[r]) {
                                leave = Some((k, t));
                            }
                        }
                    }
                }
            }
            let Some((r, t)) = leave else {
                return Err(LabError::Input("linear program is unbounded".into()));
            };
            if t <= 1e-14 {
                streak += 1;
                if streak > opts.degenerate_streak {
                    bland = true;
                }
            } else {
                streak = 0;
                bland = false;
            }
            in_basis[self.basis[r]] = false;
            in_basis[q] = true;
            self.pivot(r, q, &u);
            self.iterations += 1;
            since_refactor += 1;
        }
    }
}

pub fn solve(lp: &LinearProgram, opts: &LpOptions) -> Result<LpSolution> {
    let m = lp.rows;
    let n = lp.columns.len();
    if lp.costs.len() != n || lp.rhs.len() != m {
        return Err(LabError::Input("linear program dimensions disagree".into()));
    }
    let sign: Vec<f64> = lp.rhs.iter().map(|&b| if b < 0.0 { -1.0 } else { 1.0 }).collect();
    let b: Vec<f64> = lp.rhs.iter().zip(&sign).map(|(v, s)| v * s).collect();
    let mut tab = Tableau {
        lp,
        sign: sign.clone(),
        b: b.clone(),
        basis: (n..n + m).collect(),
        binv: DMatrix::identity(m, m),
        xb: b.clone(),
        iterations: 0,
    };
    let bscale = 1.0 + b.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let cscale = 1.0 + lp.costs.iter().fold(0.0f64, |a, v| a.max(v.abs()));

    let phase1 = |j: usize| if j >= n { 1.0 } else { 0.0 };
    tab.run(&phase1, &|_| true, opts, 1.0)?;
    tab.refactor()?;
    let infeasibility: f64 = tab.basis.iter().zip(&tab.xb).filter(|(&j, _)| j >= n).map(|(_, &x)| x).sum();
    if infeasibility > 1e-9 * bscale {
        return Err(LabError::Infeasible(format!("marginal constraints cannot be met (residual {infeasibility:.3e})")));
    }
    // Drive zero-level artificials out of the basis where a structural column can replace them.
    for r in 0..m {
        if tab.basis[r] < n {
            continue;
        }
        let mut best: Option<(usize, f64)> = None;
        for j in 0..n {
            if tab.basis.contains(&j) {
                continue;
            }
            let alpha: f64 = tab.column(j).iter().map(|&(i, v)| tab.binv[(r, i)] * v).sum();
            if alpha.abs() > 1e-9 && best.map_or(true, |(_, a)| alpha.abs() > a) {
                best = Some((j, alpha.abs()));
            }
        }
        if let Some((q, _)) = best {
            let u = tab.ftran(q);
            tab.xb[r] = 0.0;
            tab.pivot(r, q, &u);
        }
    }
    let costs = &lp.costs;
    let phase2 = |j: usize| if j >= n { 0.0 } else { costs[j] };
    tab.run(&phase2, &|j| j < n, opts, cscale)?;
    tab.refactor()?;

    let y_scaled = tab.duals(&phase2);
    let mut x = vec![0.0; n];
    for (k, &j) in tab.basis.iter().enumerate() {
        if j < n {
            x[j] = tab.xb[k];
        }
    }
    let min_reduced_cost = (0..n).map(|j| tab.reduced(j, &y_scaled, &phase2)).fold(f64::INFINITY, f64::min);
    let duals: Vec<f64> = y_scaled.iter().zip(&sign).map(|(y, s)| y * s).collect();
    let primal = x.iter().zip(costs).map(|(a, c)| a * c).sum();
    let dual = duals.iter().zip(&lp.rhs).map(|(a, c)| a * c).sum();
    Ok(LpSolution { x, duals, primal, dual, iterations: tab.iterations, min_reduced_cost })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn dense(a: &[&[f64]], c: &[f64], b: &[f64]) -> LinearProgram {
        let rows = a.len();
        let columns = (0..c.len())
            .map(|j| (0..rows).filter(|&i| a[i][j] != 0.0).map(|i| (i, a[i][j])).collect())
            .collect();
        LinearProgram { rows, columns, costs: c.to_vec(), rhs: b.to_vec() }
    }

    #[test]
    fn small_transport_problem() {
        // 2x2 transport with supplies (1,2), demands (2,1); optimum 1*1 + 1*0 + 1*0 ... checked by hand
        let lp = dense(
            &[&[1.0, 1.0, 0.0, 0.0], &[0.0, 0.0, 1.0, 1.0], &[1.0, 0.0, 1.0, 0.0], &[0.0, 1.0, 0.0, 1.0]],
            &[4.0, 1.0, 2.0, 3.0],
            &[1.0, 2.0, 2.0, 1.0],
        );
        let sol = solve(&lp, &LpOptions::default()).unwrap();
        // x = (0,1,2,0): cost 1 + 4 = 5
        assert_relative_eq!(sol.primal, 5.0, epsilon = 1e-12);
        assert!(sol.relative_gap() < 1e-12);
        assert!(sol.min_reduced_cost > -1e-12);
    }

    #[test]
    fn negative_rhs_and_infeasibility() {
        let lp = dense(&[&[-1.0, -1.0]], &[1.0, 2.0], &[-3.0]);
        let sol = solve(&lp, &LpOptions::default()).unwrap();
        assert_relative_eq!(sol.primal, 3.0, epsilon = 1e-12);
        assert_relative_eq!(sol.dual, 3.0, epsilon = 1e-12);
        let bad = dense(&[&[1.0, 1.0], &[1.0, 1.0]], &[1.0, 1.0], &[1.0, 2.0]);
        assert!(matches!(solve(&bad, &LpOptions::default()), Err(LabError::Infeasible(_))));
    }

    #[test]
    fn redundant_rows_are_tolerated() {
        let lp = dense(&[&[1.0, 1.0, 1.0], &[2.0, 2.0, 2.0]], &[3.0, 1.0, 2.0], &[1.0, 2.0]);
        let sol = solve(&lp, &LpOptions::default()).unwrap();
        assert_relative_eq!(sol.primal, 1.0, epsilon = 1e-12);
        assert!(sol.relative_gap() < 1e-12);
    }
}
