//! Closed-form constants and the two-sided bracket for the uniform-gas energy.

use crate::error::{input, LabError, Result};
use crate::lattice::{epstein_zeta, ZetaMethod};
use crate::model::{Lattice, LatticeName};
use crate::special::{bessel_j, gauss_interval, gauss_radial, gamma, sphere_area};
use serde::Serialize;
use std::f64::consts::PI;

/// Proven lower end of the Lieb-Oxford constant for Coulomb in 3D.
pub const LO_COULOMB_LOWER: f64 = 1.4442;
/// Proven upper end of the Lieb-Oxford constant for Coulomb in 3D.
pub const LO_COULOMB_UPPER: f64 = 1.6358;
/// Ratio base in the best proven Lieb-Thirring constant.
pub const LT_RATIO_BASE: f64 = 1.456;

#[derive(Debug, Clone, Serialize)]
pub struct ConstantReport {
    pub name: String,
    pub value: f64,
    pub formula: String,
    pub anchor: String,
}

/// `c_TF(d) = 2π² d/(d+2) (d/|S^{d-1}|)^{2/d}`.
pub fn thomas_fermi_constant(d: usize) -> f64 {
    let df = d as f64;
    2.0 * PI * PI * df / (df + 2.0) * (df / sphere_area(d)).powf(2.0 / df)
}

/// Fermi momentum of the free gas at unit density, one spin state.
pub fn fermi_momentum(d: usize) -> f64 {
    (2.0 * (d as f64 + 2.0) * thomas_fermi_constant(d) / d as f64).sqrt()
}

fn bessel_half(d: usize, t: f64) -> f64 {
    match d {
        1 => (2.0 / (PI * t)).sqrt() * t.sin(),
        2 => bessel_j(1, t),
        3 => (2.0 / (PI * t)).sqrt() * (t.sin() / t - t.cos()),
        _ => unreachable!(),
    }
}

/// Exchange coefficient `c_D(s, d)` of the free Fermi gas by radial quadrature.
///
/// Uses `|1̂_B(r)|² = k_F^d r^{-d} J_{d/2}(k_F r)²` so that
/// `c_D = |S^{d-1}| k_F^{d+s} / (2 (2π)^d) ∫_0^∞ J_{d/2}(t)² t^{-1-s} dt`.
pub fn dirac_constant(s: f64, d: usize, quadrature_order: usize) -> Result<f64> {
    if !(1..=3).contains(&d) {
        return input("dirac_constant supports d = 1, 2, 3");
    }
    if !(s > 0.0 && s < d as f64) {
        return input("dirac_constant needs 0 < s < d");
    }
    let n = quadrature_order.max(8);
    let integral = |cutoff: f64| -> f64 {
        // [0, 1]: t^{d-1-s} times the smooth factor J²/t^d.
        let rule = gauss_radial(n, d as f64 - 1.0 - s);
        let head: f64 = rule
            .nodes
            .iter()
            .zip(&rule.weights)
            .map(|(&t, &w)| w * bessel_half(d, t).powi(2) / t.powi(d as i32))
            .sum();
        let panel = 0.5 * PI;
        let panels = ((cutoff - 1.0) / panel).ceil() as usize;
        let mut body = 0.0;
        for k in 0..panels {
            let a = 1.0 + k as f64 * panel;
            let b = (a + panel).min(cutoff);
            body += gauss_interval(n, a, b, |t| bessel_half(d, t).powi(2) * t.powf(-1.0 - s));
        }
        // Tail from J² ≈ (1 + sin(2t - νπ))/(π t) with ν = d/2.
        let nu = 0.5 * d as f64;
        let mean = cutoff.powf(-1.0 - s) / (PI * (1.0 + s));
        let osc = (2.0 * cutoff - nu * PI).cos() / (2.0 * PI * cutoff.powf(2.0 + s));
        head + body + mean + osc
    };
    let coarse = integral(500.0);
    let fine = integral(2000.0);
    let residual = (fine - coarse).abs();
    let pref = sphere_area(d) * fermi_momentum(d).powf(d as f64 + s) / (2.0 * (2.0 * PI).powi(d as i32));
    if residual * pref > 1e-6 {
        return Err(LabError::Convergence { message: "dirac_constant radial tail".into(), residual: residual * pref });
    }
    Ok(pref * fine)
}

/// `(3/5)(9π/2)^{1/3}`.
pub fn lieb_narnhofer_constant() -> f64 {
    0.6 * (4.5 * PI).cbrt()
}

/// Proven lower bound `c_TF(d) 1.456^{-2/d}` on the Lieb-Thirring constant.
pub fn lt_constant_lower_bound(d: usize) -> f64 {
    thomas_fermi_constant(d) * LT_RATIO_BASE.powf(-2.0 / d as f64)
}

#[derive(Debug, Clone, Copy, Serialize, PartialEq)]
pub struct LoBracket {
    pub lower: f64,
    pub upper: Option<f64>,
}

/// Known bracket on the optimal Lieb-Oxford constant `c_LO(s, d)`.
///
/// Besides the Coulomb case, the lower end is `-min ζ_L(s)` over the
/// shipped lattices of dimension `d`; no upper end is known.
pub fn lo_constant_bracket(s: f64, d: usize) -> Result<LoBracket> {
    if !(1..=3).contains(&d) || !(s > 0.0 && s < d as f64) {
        return input("lo_constant_bracket needs d in 1..=3 and 0 < s < d");
    }
    if d == 3 && (s - 1.0).abs() < 1e-15 {
        return Ok(LoBracket { lower: LO_COULOMB_LOWER, upper: Some(LO_COULOMB_UPPER) });
    }
    let names: &[LatticeName] = match d {
        1 => &[LatticeName::Z1],
        2 => &[LatticeName::TRI, LatticeName::Z2],
        _ => &[LatticeName::BCC, LatticeName::FCC, LatticeName::Z3],
    };
    let mut best = f64::INFINITY;
    for &n in names {
        let z = epstein_zeta(&Lattice::new(n), s, 1e-12, ZetaMethod::Auto)?;
        best = best.min(z.value);
    }
    Ok(LoBracket { lower: -best, upper: None })
}

fn check_density(rho0: f64, q: f64) -> Result<()> {
    if !(rho0 >= 0.0) || !rho0.is_finite() {
        return input("density must be nonnegative");
    }
    if !(q >= 1.0) {
        return input("spin multiplicity q must be at least 1");
    }
    Ok(())
}

/// Two-sided bound on the uniform-gas energy per volume (Coulomb, d = 3).
pub fn f_bracket(rho0: f64, q: f64) -> Result<(f64, f64)> {
    check_density(rho0, q)?;
    let kin = thomas_fermi_constant(3) * q.powf(-2.0 / 3.0) * rho0.powf(5.0 / 3.0);
    let lower = kin - lieb_narnhofer_constant() * rho0.powf(4.0 / 3.0);
    let upper = kin - dirac_exact_coulomb() * q.powf(-1.0 / 3.0) * rho0.powf(4.0 / 3.0);
    Ok((lower, upper))
}

/// `c_D(1,3) = (3/4)(6/π)^{1/3}` in closed form.
pub fn dirac_exact_coulomb() -> f64 {
    0.75 * (6.0 / PI).cbrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Small,
    Large,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Asymptote {
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Leading behavior of the uniform-gas energy at small or large density.
///
/// At small density the unknown coefficient is replaced by the midpoint of
/// its proven bracket `[-1.4508, -1.4442]`, which is returned alongside.
pub fn f_asymptote(rho0: f64, q: f64, regime: Regime) -> Result<Asymptote> {
    check_density(rho0, q)?;
    match regime {
        Regime::Small => {
            let p = rho0.powf(4.0 / 3.0);
            let lo = -lieb_narnhofer_constant();
            let hi = -LO_COULOMB_LOWER;
            Ok(Asymptote { value: 0.5 * (lo + hi) * p, lower: lo * p, upper: hi * p })
        }
        Regime::Large => {
            let (lower, upper) = f_bracket(rho0, q)?;
            Ok(Asymptote { value: upper, lower, upper })
        }
    }
}

/// Table emitted by the `constants` command.
pub fn constant_table() -> Result<Vec<ConstantReport>> {
    let row = |name: &str, value: f64, formula: &str, anchor: &str| ConstantReport {
        name: name.into(),
        value,
        formula: formula.into(),
        anchor: anchor.into(),
    };
    Ok(vec![
        row("c_TF(1)", thomas_fermi_constant(1), "pi^2/6", "free Fermi gas kinetic coefficient, d=1"),
        row("c_TF(2)", thomas_fermi_constant(2), "pi", "free Fermi gas kinetic coefficient, d=2"),
        row("c_TF(3)", thomas_fermi_constant(3), "(3/10)(6 pi^2)^(2/3)", "free Fermi gas kinetic coefficient, d=3"),
        row("c_D(1,3)", dirac_constant(1.0, 3, 24)?, "(3/4)(6/pi)^(1/3)", "free Fermi gas exchange coefficient, radial quadrature"),
        row("lieb_narnhofer", lieb_narnhofer_constant(), "(3/5)(9 pi/2)^(1/3)", "lower bound on the uniform-gas coefficient"),
        row("c_LT_lower(1)", lt_constant_lower_bound(1), "c_TF(1) 1.456^(-2)", "proven Lieb-Thirring constant, d=1"),
        row("c_LT_lower(3)", lt_constant_lower_bound(3), "c_TF(3) 1.456^(-2/3)", "proven Lieb-Thirring constant, d=3"),
        row("c_LO_lower(1,3)", LO_COULOMB_LOWER, "-zeta_BCC(1)", "proven Lieb-Oxford bracket, lower end"),
        row("c_LO_upper(1,3)", LO_COULOMB_UPPER, "1.6358", "proven Lieb-Oxford bracket, upper end"),
    ])
}

/// Weber-Schafheitlin value of `∫_0^∞ J_ν(t)² t^{-λ} dt`, used as a check.
pub fn bessel_square_moment(nu: f64, lambda: f64) -> f64 {
    gamma(lambda) * gamma(nu + 0.5 * (1.0 - lambda))
        / (2f64.powf(lambda) * gamma(0.5 * (1.0 + lambda)).powi(2) * gamma(nu + 0.5 * (1.0 + lambda)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn thomas_fermi_values() {
        assert_relative_eq!(thomas_fermi_constant(1), PI * PI / 6.0, epsilon = 1e-13);
        assert_relative_eq!(thomas_fermi_constant(2), PI, epsilon = 1e-13);
        assert_relative_eq!(thomas_fermi_constant(3), 0.3 * (6.0 * PI * PI).powf(2.0 / 3.0), epsilon = 1e-12);
    }

    #[test]
    fn dirac_matches_bessel_moment() {
        for &(s, d) in &[(0.5, 1usize), (1.0, 2), (0.5, 2), (1.0, 3), (0.5, 3), (2.0, 3)] {
            let nu = 0.5 * d as f64;
            let pref = sphere_area(d) * fermi_momentum(d).powf(d as f64 + s) / (2.0 * (2.0 * PI).powi(d as i32));
            let exact = pref * bessel_square_moment(nu, 1.0 + s);
            let got = dirac_constant(s, d, 24).unwrap();
            assert_relative_eq!(got, exact, max_relative = 1e-6);
        }
    }

    #[test]
    fn dirac_one_dimensional_real_space_value() {
        // ½∫ |sin(πx)/(πx)|² |x|^{-1/2} dx = 4/3 (high-precision real-space evaluation)
        assert_relative_eq!(dirac_constant(0.5, 1, 24).unwrap(), 4.0 / 3.0, max_relative = 1e-6);
    }

    #[test]
    fn dirac_small_s_tends_to_half() {
        let v = dirac_constant(0.02, 3, 24).unwrap();
        assert!((v - 0.5).abs() < 0.03, "{v}");
    }

    #[test]
    fn f_bracket_ordering_and_zero() {
        assert_eq!(f_bracket(0.0, 1.0).unwrap(), (0.0, 0.0));
        let (l, u) = f_bracket(1.0, 1.0).unwrap();
        assert_relative_eq!(l, thomas_fermi_constant(3) - lieb_narnhofer_constant(), epsilon = 1e-14);
        assert_relative_eq!(u, thomas_fermi_constant(3) - dirac_exact_coulomb(), epsilon = 1e-14);
        assert!(f_bracket(-1.0, 1.0).is_err());
    }

    #[test]
    fn lieb_narnhofer_inversion() {
        let v = lieb_narnhofer_constant();
        assert_relative_eq!((v * 5.0 / 3.0).powi(3), 4.5 * PI, epsilon = 1e-12);
        assert!(v > LO_COULOMB_LOWER);
    }
}
