//! Newton ascent on temperature-smoothed concave duals with geometric annealing.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

/// Value, gradient and (negative semidefinite) Hessian of a smoothed dual.
pub struct SmoothEval {
    pub value: f64,
    pub grad: DVector<f64>,
    pub hess: DMatrix<f64>,
}

pub trait SmoothedDual {
    fn dim(&self) -> usize;
    fn smoothed(&self, v: &DVector<f64>, tau: f64) -> SmoothEval;
}

#[derive(Debug, Clone, Copy)]
pub struct AscentOptions {
    pub tau_start: f64,
    pub tau_min: f64,
    pub tau_factor: f64,
    pub newton_per_stage: usize,
    /// Stage stops once the gradient sup-norm drops below this.
    pub grad_tol: f64,
}

impl Default for AscentOptions {
    fn default() -> Self {
        AscentOptions { tau_start: 1.0, tau_min: 1e-8, tau_factor: 0.5, newton_per_stage: 60, grad_tol: 1e-12 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StageRecord {
    pub tau: f64,
    pub smoothed_value: f64,
    pub grad_norm: f64,
    pub newton_steps: usize,
}

fn newton_direction(eval: &SmoothEval) -> DVector<f64> {
    let n = eval.grad.len();
    let neg = -&eval.hess;
    let scale = (0..n).map(|i| neg[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
    let mut mu = 1e-12 * scale;
    for _ in 0..40 {
        let mut a = neg.clone();
        for i in 0..n {
            a[(i, i)] += mu;
        }
        if let Some(ch) = a.cholesky() {
            return ch.solve(&eval.grad);
        }
        mu *= 10.0;
    }
    eval.grad.clone() / scale
}

/// Runs one annealing stage at fixed `tau`; returns the number of accepted steps.
pub fn newton_stage<P: SmoothedDual + ?Sized>(problem: &P, v: &mut DVector<f64>, tau: f64, opts: &AscentOptions) -> (SmoothEval, usize) {
    let mut eval = problem.smoothed(v, tau);
    let mut steps = 0;
    for _ in 0..opts.newton_per_stage {
        if eval.grad.amax() < opts.grad_tol {
            break;
        }
        let dir = newton_direction(&eval);
        let slope = eval.grad.dot(&dir);
        if !(slope > 0.0) {
            break;
        }
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial = &*v + &dir * t;
            let e = problem.smoothed(&trial, tau);
            if e.value >= eval.value + 1e-4 * t * slope {
                accepted = Some((trial, e));
                break;
            }
            t *= 0.5;
        }
        match accepted {
            Some((trial, e)) => {
                let gain = e.value - eval.value;
                *v = trial;
                eval = e;
                steps += 1;
                if gain <= 1e-16 * (1.0 + eval.value.abs()) {
                    break;
                }
            }
            None => break,
        }
    }
    (eval, steps)
}

/// Anneals `tau` geometrically; `stop` is consulted after every stage with the
/// current potential and temperature and ends the run when it returns true.
pub fn anneal<P: SmoothedDual + ?Sized>(
    problem: &P,
    v: &mut DVector<f64>,
    opts: &AscentOptions,
    mut stop: impl FnMut(&DVector<f64>, f64) -> bool,
) -> Vec<StageRecord> {
    let mut trace = Vec::new();
    let mut tau = opts.tau_start;
    loop {
        let (eval, steps) = newton_stage(problem, v, tau, opts);
        trace.push(StageRecord { tau, smoothed_value: eval.value, grad_norm: eval.grad.amax(), newton_steps: steps });
        if stop(v, tau) || tau <= opts.tau_min {
            return trace;
        }
        tau = (tau * opts.tau_factor).max(opts.tau_min);
    }
}

/// Fermi-Dirac occupation `1/(1+e^{x/τ})` and the smoothed negative part
/// `-τ log(1+e^{-x/τ})`, evaluated without overflow.
pub fn fermi(x: f64, tau: f64) -> f64 {
    let z = x / tau;
    if z > 0.0 {
        let e = (-z).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + z.exp())
    }
}

pub fn soft_negative_part(x: f64, tau: f64) -> f64 {
    let z = x / tau;
    if z > 0.0 {
        -tau * (-z).exp().ln_1p()
    } else {
        x - tau * z.exp().ln_1p()
    }
}

/// Divided differences of the occupation for the Hessian of a spectral sum.
pub fn fermi_divided_difference(a: f64, b: f64, fa: f64, fb: f64, tau: f64) -> f64 {
    if (a - b).abs() > 1e-10 * tau.max(a.abs()).max(1e-300) {
        (fa - fb) / (a - b)
    } else {
        -fa * (1.0 - fa) / tau
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Quadratic;
    impl SmoothedDual for Quadratic {
        fn dim(&self) -> usize {
            2
        }
        fn smoothed(&self, v: &DVector<f64>, _tau: f64) -> SmoothEval {
            let target = DVector::from_vec(vec![1.0, -2.0]);
            let d = v - &target;
            SmoothEval { value: -d.norm_squared(), grad: -2.0 * d, hess: DMatrix::identity(2, 2) * -2.0 }
        }
    }

    #[test]
    fn newton_finds_the_maximum() {
        let mut v = DVector::zeros(2);
        let trace = anneal(&Quadratic, &mut v, &AscentOptions { tau_start: 1e-8, ..Default::default() }, |_, _| false);
        assert_eq!(trace.len(), 1);
        assert!((v[0] - 1.0).abs() < 1e-12 && (v[1] + 2.0).abs() < 1e-12);
    }

    #[test]
    fn smoothed_negative_part_bounds() {
        for &x in &[-3.0, -1e-3, 0.0, 2e-3, 5.0] {
            let s = soft_negative_part(x, 0.01);
            assert!(s <= x.min(0.0) + 1e-15);
            assert!(s >= x.min(0.0) - 0.01 * 2f64.ln() - 1e-15);
        }
        assert!((fermi(0.0, 1.0) - 0.5).abs() < 1e-15);
    }
}
