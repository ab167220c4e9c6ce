//! Composite bound evaluators: Thomas-Fermi-Dirac-type lower bound, the
//! gradient-corrected upper bound, the local-density error functionals with
//! their ε-optimization, and the scaling-exponent probes.

use crate::constants::{self, LO_COULOMB_LOWER};
use crate::error::{input, LabError, Result};
use crate::model::{Boundary, DiscreteDensity, Grid, InteractionKernel};
use crate::sce;
use rustfft::{num_complex::Complex, FftPlanner};
use serde::Serialize;
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientMethod {
    Spectral,
    CentralDifference,
}

/// Gradient of `f` on the grid, one vector per axis.
pub fn grid_gradient(grid: &Grid, f: &[f64]) -> Result<(Vec<Vec<f64>>, GradientMethod)> {
    if f.len() != grid.len() {
        return input("field length differs from the grid");
    }
    let d = grid.dim();
    let method = match grid.boundary {
        Boundary::Periodic => GradientMethod::Spectral,
        Boundary::Open => GradientMethod::CentralDifference,
    };
    if method == GradientMethod::CentralDifference && grid.cells.iter().any(|&m| m < 3) {
        return input("central differences need at least three cells per axis");
    }
    let mut planner = FftPlanner::<f64>::new();
    let mut out = Vec::with_capacity(d);
    for axis in 0..d {
        let m = grid.cells[axis];
        let h = grid.lengths[axis] / m as f64;
        let stride: usize = grid.cells[axis + 1..].iter().product();
        let mut g = vec![0.0; f.len()];
        let line_starts = (0..f.len()).filter(|&i| (i / stride) % m == 0);
        let fft = planner.plan_fft_forward(m);
        let ifft = planner.plan_fft_inverse(m);
        for start in line_starts {
            let line: Vec<f64> = (0..m).map(|k| f[start + k * stride]).collect();
            let deriv = match method {
                GradientMethod::Spectral => {
                    let mut buf: Vec<Complex<f64>> = line.iter().map(|&x| Complex::new(x, 0.0)).collect();
                    fft.process(&mut buf);
                    for (k, c) in buf.iter_mut().enumerate() {
                        let wave = if 2 * k < m { k as f64 } else if 2 * k == m { 0.0 } else { k as f64 - m as f64 };
                        let factor = 2.0 * PI * wave / grid.lengths[axis];
                        *c = Complex::new(-c.im * factor, c.re * factor);
                    }
                    ifft.process(&mut buf);
                    buf.iter().map(|c| c.re / m as f64).collect::<Vec<_>>()
                }
                GradientMethod::CentralDifference => (0..m)
                    .map(|k| {
                        if k == 0 {
                            (-3.0 * line[0] + 4.0 * line[1] - line[2]) / (2.0 * h)
                        } else if k == m - 1 {
                            (3.0 * line[m - 1] - 4.0 * line[m - 2] + line[m - 3]) / (2.0 * h)
                        } else {
                            (line[k + 1] - line[k - 1]) / (2.0 * h)
                        }
                    })
                    .collect(),
            };
            for (k, v) in deriv.into_iter().enumerate() {
                g[start + k * stride] = v;
            }
        }
        out.push(g);
    }
    Ok((out, method))
}

/// The density integrals entering every bound of this module.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DensityIntegrals {
    pub dim: usize,
    pub mass: f64,
    pub square: f64,
    /// `∫ρ^{4/3}`
    pub four_thirds: f64,
    /// `∫|∇√ρ|²`
    pub weizsacker: f64,
    /// `∫|∇√ρ|⁴`
    pub sqrt_quartic: f64,
    /// `∫|∇ρ^{1/3}|⁴`
    pub cbrt_quartic: f64,
    /// `∫|∇ρ|`
    pub gradient_l1: f64,
    pub method: GradientMethod,
}

impl DensityIntegrals {
    pub fn of(rho: &DiscreteDensity) -> Result<Self> {
        let grid = &rho.grid;
        let h = grid.cell_volume();
        let values = rho.values();
        if values.iter().any(|&v| v < 0.0) {
            return input("density must be nonnegative");
        }
        let norm_power = |p: f64, q: f64| -> Result<(f64, GradientMethod)> {
            let f: Vec<f64> = values.iter().map(|v| v.powf(p)).collect();
            let (g, method) = grid_gradient(grid, &f)?;
            let total = (0..f.len()).map(|i| g.iter().map(|axis| axis[i] * axis[i]).sum::<f64>().powf(q / 2.0)).sum::<f64>() * h;
            Ok((total, method))
        };
        let (weizsacker, method) = norm_power(0.5, 2.0)?;
        Ok(DensityIntegrals {
            dim: grid.dim(),
            mass: rho.total(),
            square: rho.integral_power(2.0),
            four_thirds: rho.integral_power(4.0 / 3.0),
            weizsacker,
            sqrt_quartic: norm_power(0.5, 4.0)?.0,
            cbrt_quartic: norm_power(1.0 / 3.0, 4.0)?.0,
            gradient_l1: norm_power(1.0, 1.0)?.0,
            method,
        })
    }

    /// Integrals of `ρ(N^{-1/3}·)` in three dimensions, by exact scaling.
    pub fn dilated(&self, n: f64) -> Self {
        let third = n.cbrt();
        DensityIntegrals {
            mass: n * self.mass,
            square: n * self.square,
            four_thirds: n * self.four_thirds,
            weizsacker: third * self.weizsacker,
            sqrt_quartic: self.sqrt_quartic / third,
            cbrt_quartic: self.cbrt_quartic / third,
            gradient_l1: third * third * self.gradient_l1,
            ..*self
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Parameter {
    pub name: String,
    pub value: f64,
    /// Whether the value is a proven constant (as opposed to a free parameter or a conjecture).
    pub proven: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub epsilon: Option<f64>,
    pub terms: Vec<(String, f64)>,
    pub parameters: Vec<Parameter>,
    pub method: GradientMethod,
}

impl BoundReport {
    pub fn term_total(&self) -> f64 {
        self.terms.iter().map(|(_, v)| v).sum()
    }
}

fn param(name: &str, value: f64, proven: bool) -> Parameter {
    Parameter { name: name.into(), value, proven }
}

fn interaction_exponent(kernel: &InteractionKernel, d: usize) -> Result<f64> {
    match kernel {
        InteractionKernel::Coulomb3d if d == 3 => Ok(1.0),
        InteractionKernel::Riesz { s } if *s > 0.0 && *s < d as f64 => Ok(*s),
        _ => input("bounds need a Riesz kernel with 0 < s < d"),
    }
}

/// `c_LT q^{-2/d} ∫ρ^{1+2/d} + hartree - c_LO ∫ρ^{1+s/d}` with the proven constants.
/// A proven Lieb-Oxford constant is only shipped for Coulomb in three dimensions;
/// `lo_constant` supplies one otherwise.
pub fn tfd_lower(rho: &DiscreteDensity, kernel: &InteractionKernel, q: f64, lo_constant: Option<f64>) -> Result<BoundReport> {
    let d = rho.grid.dim();
    let s = interaction_exponent(kernel, d)?;
    check_q(q)?;
    let bracket = constants::lo_constant_bracket(s, d)?;
    let (c_lo, proven) = match (lo_constant, bracket.upper) {
        (Some(c), _) => (c, false),
        (None, Some(c)) => (c, true),
        (None, None) => return input(format!("no proven Lieb-Oxford constant for s = {s}, d = {d}; pass one explicitly")),
    };
    let c_lt = constants::lt_constant_lower_bound(d);
    let kinetic = c_lt * q.powf(-2.0 / d as f64) * rho.integral_power(1.0 + 2.0 / d as f64);
    let hartree = sce::hartree(rho, kernel)?;
    let exchange = -c_lo * rho.integral_power(1.0 + s / d as f64);
    let method = grid_method(&rho.grid);
    Ok(BoundReport {
        lower: Some(kinetic + hartree + exchange),
        upper: None,
        epsilon: None,
        terms: vec![("kinetic".into(), kinetic), ("hartree".into(), hartree), ("exchange".into(), exchange)],
        parameters: vec![param("c_lt", c_lt, true), param("c_lo", c_lo, proven), param("q", q, true)],
        method,
    })
}

/// `c_TF(1+ε) q^{-2/d} ∫ρ^{1+2/d} + κ'(1+ε)/ε ∫|∇√ρ|² + hartree`.
pub fn tfvw_upper(rho: &DiscreteDensity, kernel: &InteractionKernel, q: f64, epsilon: f64, kappa_prime: f64) -> Result<BoundReport> {
    let d = rho.grid.dim();
    check_q(q)?;
    if !(epsilon > 0.0) || !(kappa_prime >= 0.0) {
        return input("need ε > 0 and κ' ≥ 0");
    }
    let integrals = DensityIntegrals::of(rho)?;
    let c_tf = constants::thomas_fermi_constant(d);
    let local = c_tf * (1.0 + epsilon) * q.powf(-2.0 / d as f64) * rho.integral_power(1.0 + 2.0 / d as f64);
    let gradient = kappa_prime * (1.0 + epsilon) / epsilon * integrals.weizsacker;
    let hartree = sce::hartree(rho, kernel)?;
    Ok(BoundReport {
        lower: None,
        upper: Some(local + gradient + hartree),
        epsilon: Some(epsilon),
        terms: vec![("local".into(), local), ("gradient".into(), gradient), ("hartree".into(), hartree)],
        parameters: vec![param("c_tf", c_tf, true), param("kappa_prime", kappa_prime, false), param("q", q, true)],
        method: integrals.method,
    })
}

fn check_q(q: f64) -> Result<()> {
    if !(q >= 1.0) {
        return input("spin multiplicity q must be at least 1");
    }
    Ok(())
}

fn grid_method(grid: &Grid) -> GradientMethod {
    match grid.boundary {
        Boundary::Periodic => GradientMethod::Spectral,
        Boundary::Open => GradientMethod::CentralDifference,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorMode {
    Quantum,
    Classical,
}

impl std::str::FromStr for ErrorMode {
    type Err = LabError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quantum" => Ok(ErrorMode::Quantum),
            "classical" => Ok(ErrorMode::Classical),
            _ => input(format!("unknown mode `{s}`")),
        }
    }
}

/// Sum of monomials `Σ c_k ε^{p_k}` with nonnegative coefficients.
#[derive(Debug, Clone, Serialize)]
pub struct EpsilonSeries {
    pub terms: Vec<(String, f64, f64)>,
}

impl EpsilonSeries {
    pub fn value(&self, eps: f64) -> f64 {
        self.terms.iter().map(|(_, c, p)| c * eps.powf(*p)).sum()
    }

    /// First and second derivatives in `t = ln ε`.
    fn log_derivatives(&self, eps: f64) -> (f64, f64) {
        self.terms.iter().fold((0.0, 0.0), |(a, b), (_, c, p)| {
            let v = c * eps.powf(*p);
            (a + p * v, b + p * p * v)
        })
    }

    pub fn breakdown(&self, eps: f64) -> Vec<(String, f64)> {
        self.terms.iter().map(|(n, c, p)| (n.clone(), c * eps.powf(*p))).collect()
    }
}

/// The error functional of the local density approximation as a series in ε.
pub fn lda_error_series(integrals: &DensityIntegrals, constant: f64, mode: ErrorMode) -> EpsilonSeries {
    let c = constant;
    let terms = match mode {
        ErrorMode::Quantum => vec![
            ("mass".into(), integrals.mass + integrals.square, 1.0),
            ("weizsacker".into(), c * integrals.weizsacker, 0.0),
            ("weizsacker_inverse".into(), c * integrals.weizsacker, -1.0),
            ("quartic".into(), c * integrals.sqrt_quartic, -15.0),
        ],
        ErrorMode::Classical => vec![
            ("mass".into(), integrals.mass + integrals.four_thirds, 1.0),
            ("quartic".into(), c * integrals.cbrt_quartic, -7.0),
        ],
    };
    EpsilonSeries { terms }
}

pub fn lda_error(rho: &DiscreteDensity, epsilon: f64, constant: f64, mode: ErrorMode) -> Result<f64> {
    if !(epsilon > 0.0) || !(constant >= 0.0) {
        return input("need ε > 0 and C ≥ 0");
    }
    Ok(lda_error_series(&DensityIntegrals::of(rho)?, constant, mode).value(epsilon))
}

pub const EPSILON_RANGE: (f64, f64) = (1e-10, 1e6);

#[derive(Debug, Clone, Serialize)]
pub struct EpsilonOptimum {
    pub epsilon: f64,
    pub value: f64,
    /// `d value / d ln ε` at the optimum.
    pub log_slope: f64,
    pub at_bound: bool,
}

/// Minimizes a series over `ln ε` on [`EPSILON_RANGE`]. Every monomial is convex
/// in `ln ε`, so golden section brackets the minimum and Newton polishes it.
pub fn optimize_series(series: &EpsilonSeries) -> EpsilonOptimum {
    let (mut lo, mut hi) = (EPSILON_RANGE.0.ln(), EPSILON_RANGE.1.ln());
    let f = |t: f64| series.value(t.exp());
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - ratio * (hi - lo);
    let mut b = lo + ratio * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    for _ in 0..200 {
        if hi - lo < 1e-6 {
            break;
        }
        if fa <= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - ratio * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + ratio * (hi - lo);
            fb = f(b);
        }
    }
    let (tmin, tmax) = (EPSILON_RANGE.0.ln(), EPSILON_RANGE.1.ln());
    let mut t = 0.5 * (lo + hi);
    for _ in 0..50 {
        let (d1, d2) = series.log_derivatives(t.exp());
        if d2 <= 0.0 {
            break;
        }
        let next = (t - d1 / d2).clamp(tmin, tmax);
        if (next - t).abs() < 1e-15 * (1.0 + t.abs()) {
            t = next;
            break;
        }
        t = next;
    }
    let eps = t.exp();
    let (log_slope, _) = series.log_derivatives(eps);
    let at_bound = (t - tmin).abs() < 1e-9 || (t - tmax).abs() < 1e-9;
    EpsilonOptimum { epsilon: eps, value: series.value(eps), log_slope, at_bound }
}

pub fn optimize_epsilon(rho: &DiscreteDensity, constant: f64, mode: ErrorMode) -> Result<(EpsilonOptimum, BoundReport)> {
    let integrals = DensityIntegrals::of(rho)?;
    let series = lda_error_series(&integrals, constant, mode);
    let best = optimize_series(&series);
    let report = BoundReport {
        lower: None,
        upper: Some(best.value),
        epsilon: Some(best.epsilon),
        terms: series.breakdown(best.epsilon),
        parameters: vec![param("C", constant, false)],
        method: integrals.method,
    };
    Ok((best, report))
}

/// Two-sided local-density estimate for Coulomb in three dimensions: the
/// uniform-gas bracket integrated over `ρ`, widened by the ε-optimized error.
pub fn lda_bracket(rho: &DiscreteDensity, constant: f64, q: f64, mode: ErrorMode) -> Result<BoundReport> {
    if rho.grid.dim() != 3 {
        return input("the local-density bracket is implemented for three dimensions");
    }
    let (best, err) = optimize_epsilon(rho, constant, mode)?;
    let hartree = sce::hartree(rho, &InteractionKernel::Coulomb3d)?;
    let h = rho.grid.cell_volume();
    let (mut lo, mut hi) = (0.0, 0.0);
    let mut parameters = err.parameters.clone();
    match mode {
        ErrorMode::Quantum => {
            for v in rho.values() {
                let (a, b) = constants::f_bracket(v, q)?;
                lo += a * h;
                hi += b * h;
            }
            parameters.push(param("q", q, true));
        }
        ErrorMode::Classical => {
            let i43 = rho.integral_power(4.0 / 3.0);
            lo = -constants::lieb_narnhofer_constant() * i43;
            hi = -LO_COULOMB_LOWER * i43;
            parameters.push(param("c_ueg_upper", constants::lieb_narnhofer_constant(), true));
            parameters.push(param("c_ueg_lower", LO_COULOMB_LOWER, true));
        }
    }
    let mut terms = vec![("hartree".into(), hartree), ("local_lower".into(), lo), ("local_upper".into(), hi)];
    terms.extend(err.terms.iter().cloned());
    Ok(BoundReport {
        lower: Some(hartree + lo - best.value),
        upper: Some(hartree + hi + best.value),
        epsilon: Some(best.epsilon),
        terms,
        parameters,
        method: err.method,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ExponentProbe {
    pub mode: ErrorMode,
    pub particles: Vec<f64>,
    pub values: Vec<f64>,
    pub epsilons: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
}

/// Log-log slope of the optimized error under `ρ ↦ ρ(N^{-1/3}·)`.
pub fn exponent_probe(profile: &DensityIntegrals, particles: &[f64], constant: f64, mode: ErrorMode) -> Result<ExponentProbe> {
    if profile.dim != 3 {
        return input("the dilation probe is three-dimensional");
    }
    if particles.len() < 2 || particles.iter().any(|&n| !(n > 0.0)) {
        return input("need at least two positive particle numbers");
    }
    let (mut values, mut epsilons) = (Vec::new(), Vec::new());
    for &n in particles {
        let best = optimize_series(&lda_error_series(&profile.dilated(n), constant, mode));
        values.push(best.value);
        epsilons.push(best.epsilon);
    }
    let xs: Vec<f64> = particles.iter().map(|n| n.ln()).collect();
    let ys: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let k = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / k, ys.iter().sum::<f64>() / k);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    Ok(ExponentProbe { mode, particles: particles.to_vec(), values, epsilons, slope, intercept: my - slope * mx })
}

/// Unit-mass isotropic Gaussian of unit variance on an open cube.
pub fn gaussian_profile(cells: usize, half_width: f64) -> Result<DiscreteDensity> {
    let grid = Grid::with_origin(vec![cells; 3], vec![2.0 * half_width; 3], vec![-half_width; 3], Boundary::Open)?;
    let norm = (2.0 * PI).powf(-1.5);
    crate::model::density_from_function(&grid, |x| norm * (-0.5 * x.iter().map(|c| c * c).sum::<f64>()).exp())
}

/// `hartree - (c_LN + ε)∫ρ^{4/3} - (0.001206/ε³)∫|∇ρ|` at the ε minimizing the correction.
pub fn lewin_lieb_gradient_lower(rho: &DiscreteDensity) -> Result<BoundReport> {
    if rho.grid.dim() != 3 {
        return input("the gradient-corrected indirect bound is three-dimensional");
    }
    let integrals = DensityIntegrals::of(rho)?;
    let coefficient = 0.001206;
    let series = EpsilonSeries {
        terms: vec![("four_thirds".into(), integrals.four_thirds, 1.0), ("gradient".into(), coefficient * integrals.gradient_l1, -3.0)],
    };
    let best = optimize_series(&series);
    let hartree = sce::hartree(rho, &InteractionKernel::Coulomb3d)?;
    let local = -constants::lieb_narnhofer_constant() * integrals.four_thirds;
    let mut terms = vec![("hartree".into(), hartree), ("local".into(), local)];
    terms.extend(series.breakdown(best.epsilon).into_iter().map(|(n, v)| (n, -v)));
    Ok(BoundReport {
        lower: Some(hartree + local - best.value),
        upper: None,
        epsilon: Some(best.epsilon),
        terms,
        parameters: vec![param("c_ln", constants::lieb_narnhofer_constant(), true), param("gradient_coefficient", coefficient, true)],
        method: integrals.method,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn spectral_derivative_of_a_mode() {
        let grid = Grid::line(32, 2.0, Boundary::Periodic).unwrap();
        let f: Vec<f64> = (0..32).map(|i| (PI * grid.center(i)[0]).sin()).collect();
        let (g, m) = grid_gradient(&grid, &f).unwrap();
        assert_eq!(m, GradientMethod::Spectral);
        for i in 0..32 {
            assert!((g[0][i] - PI * (PI * grid.center(i)[0]).cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn two_term_series_closed_form() {
        let s = EpsilonSeries { terms: vec![("a".into(), 1.0, 1.0), ("b".into(), 9.0, -1.0)] };
        let best = optimize_series(&s);
        assert_relative_eq!(best.epsilon, 3.0, epsilon = 1e-10);
        assert_relative_eq!(best.value, 6.0, epsilon = 1e-12);
        assert!(best.log_slope.abs() < 1e-8 * best.value);
    }

    #[test]
    fn pure_linear_series_hits_lower_bound() {
        let s = EpsilonSeries { terms: vec![("a".into(), 2.0, 1.0)] };
        let best = optimize_series(&s);
        assert!(best.at_bound);
        assert_relative_eq!(best.epsilon, EPSILON_RANGE.0, max_relative = 1e-9);
    }

    #[test]
    fn gaussian_gradient_integrals_converge_at_second_order() {
        // ∫|∇√ρ|² = 3/4 and ∫|∇√ρ|⁴ = (15/512) π^{-3/2} for the unit Gaussian
        let quartic = 15.0 / 512.0 * PI.powf(-1.5);
        let errors: Vec<(f64, f64)> = [32, 64]
            .iter()
            .map(|&cells| {
                let i = DensityIntegrals::of(&gaussian_profile(cells, 8.0).unwrap()).unwrap();
                assert!((i.mass - 1.0).abs() < 1e-3);
                ((i.weizsacker - 0.75).abs(), (i.sqrt_quartic - quartic).abs())
            })
            .collect();
        for k in 0..2 {
            let (coarse, fine) = if k == 0 { (errors[0].0, errors[1].0) } else { (errors[0].1, errors[1].1) };
            let ratio = coarse / fine;
            assert!(ratio > 3.5 && ratio < 4.5, "{k}: {coarse} {fine} {ratio}");
        }
    }
}
