use crate::error::{input, LabError, Result};
use crate::model::{Lattice, LatticeName};
use crate::parallel;
use crate::special::{gamma, gauss_legendre, upper_incomplete_gamma};
use nalgebra::DMatrix;
use serde::Serialize;
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ZetaMethod {
    Direct,
    Ewald,
    /// Direct summation for `s > d`, Ewald otherwise.
    Auto,
}

impl std::str::FromStr for ZetaMethod {
    type Err = LabError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(ZetaMethod::Direct),
            "ewald" => Ok(ZetaMethod::Ewald),
            "auto" => Ok(ZetaMethod::Auto),
            _ => input(format!("unknown zeta method `{s}`")),
        }
    }
}

/// `ζ_L(s) = ½ Σ_{ℓ ≠ 0} |ℓ|^{-s}` (analytically continued below `s = d`).
#[derive(Debug, Clone, Serialize)]
pub struct ZetaResult {
    pub lattice: LatticeName,
    pub s: f64,
    pub value: f64,
    pub method: ZetaMethod,
    pub error: f64,
}

pub fn epstein_zeta(lattice: &Lattice, s: f64, tol: f64, method: ZetaMethod) -> Result<ZetaResult> {
    let d = lattice.dim() as f64;
    if !(s > 0.0) || !s.is_finite() {
        return input("zeta exponent must be positive");
    }
    if (s - d).abs() < 1e-12 {
        return input("s = d is the pole of the Epstein zeta function");
    }
    if !(tol > 0.0) {
        return input("tolerance must be positive");
    }
    let method = match method {
        ZetaMethod::Auto if s > d => ZetaMethod::Direct,
        ZetaMethod::Auto => ZetaMethod::Ewald,
        m => m,
    };
    let (value, error) = match method {
        ZetaMethod::Direct => {
            if s <= d {
                return input("direct summation needs s > d");
            }
            zeta_direct(lattice, s, tol)?
        }
        _ => {
            let a = zeta_ewald(lattice, s, 1.0);
            let b = zeta_ewald(lattice, s, 2.0);
            (a, (a - b).abs())
        }
    };
    if error > tol.max(1e-14 * value.abs()) * 10.0 {
        return Err(LabError::Convergence { message: format!("zeta({s}) tolerance {tol:e} not reached"), residual: error });
    }
    Ok(ZetaResult { lattice: lattice.name, s, value, method, error })
}

fn smallest_singular_value(b: &DMatrix<f64>) -> f64 {
    b.clone().svd(false, false).singular_values.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Visits `B z` for every nonzero `z` with `|B z|² <= r2max`.
fn lattice_points(b: &DMatrix<f64>, r2max: f64) -> Vec<f64> {
    let d = b.nrows();
    let reach = (r2max.sqrt() / smallest_singular_value(b)).ceil() as i64;
    let side = (2 * reach + 1) as usize;
    let total = side.pow(d as u32);
    let mut out = Vec::new();
    let mut z = vec![0i64; d];
    for mut idx in 0..total {
        for a in 0..d {
            z[a] = (idx % side) as i64 - reach;
            idx /= side;
        }
        if z.iter().all(|&k| k == 0) {
            continue;
        }
        let r2: f64 = (0..d)
            .map(|i| {
                let x: f64 = (0..d).map(|j| b[(i, j)] * z[j] as f64).sum();
                x * x
            })
            .sum();
        if r2 <= r2max {
            out.push(r2);
        }
    }
    out.sort_by(|a, b| b.partial_cmp(a).unwrap());
    out
}

/// Ewald evaluation with splitting parameter `tau` (unit covolume).
pub fn zeta_ewald(lattice: &Lattice, s: f64, tau: f64) -> f64 {
    let d = lattice.dim() as f64;
    let a = 0.5 * s;
    let xmax = 64.0;
    let real: f64 = lattice_points(&lattice.basis, xmax / (PI * tau))
        .iter()
        .map(|&r2| (PI * r2).powf(-a) * upper_incomplete_gamma(a, PI * tau * r2))
        .sum();
    let dual = lattice.dual_basis();
    let recip: f64 = lattice_points(&dual, xmax * tau / PI)
        .iter()
        .map(|&k2| (PI * k2).powf(a - 0.5 * d) * upper_incomplete_gamma(0.5 * d - a, PI * k2 / tau))
        .sum();
    let corr = tau.powf(a - 0.5 * d) / (a - 0.5 * d) - tau.powf(a) / a;
    0.5 * PI.powf(a) / gamma(a) * (real + recip + corr)
}

/// Surface integral of `g` over the boundary of `[-1,1]^d` (faces only).
fn cube_faces_integral(d: usize, g: &dyn Fn(&[f64]) -> f64) -> f64 {
    if d == 1 {
        return g(&[1.0]) + g(&[-1.0]);
    }
    let rule = gauss_legendre(24);
    let n = rule.nodes.len();
    let mut total = 0.0;
    let mut x = vec![0.0; d];
    for axis in 0..d {
        for &side in &[-1.0, 1.0] {
            let count = n.pow(d as u32 - 1);
            for mut idx in 0..count {
                let mut w = 1.0;
                for a in 0..d {
                    if a == axis {
                        x[a] = side;
                        continue;
                    }
                    let j = idx % n;
                    idx /= n;
                    x[a] = rule.nodes[j];
                    w *= rule.weights[j];
                }
                total += w * g(&x);
            }
        }
    }
    total
}

/// Cube-shell summation plus a continuum tail with the midpoint-rule
/// Laplacian correction; the error is estimated from the `R`-dependence.
fn zeta_direct(lattice: &Lattice, s: f64, tol: f64) -> Result<(f64, f64)> {
    let d = lattice.dim();
    let b = &lattice.basis;
    let g = b.transpose() * b;
    let tr = g.trace();
    let quad = |z: &[f64]| -> (f64, Vec<f64>) {
        let gz: Vec<f64> = (0..d).map(|i| (0..d).map(|j| g[(i, j)] * z[j]).sum()).collect();
        let q: f64 = (0..d).map(|i| z[i] * gz[i]).sum();
        (q, gz)
    };
    let f_face = cube_faces_integral(d, &|z| quad(z).0.powf(-0.5 * s));
    let lap_face = cube_faces_integral(d, &|z| {
        let (q, gz) = quad(z);
        let gz2: f64 = gz.iter().map(|x| x * x).sum();
        s * (s + 2.0) * q.powf(-0.5 * s - 2.0) * gz2 - s * q.powf(-0.5 * s - 1.0) * tr
    });
    let df = d as f64;
    let sum_to = |r: i64| -> f64 {
        let shells: Vec<f64> = parallel::map_range(r as usize, |k| shell_sum(b, s, k as i64 + 1));
        let head: f64 = shells.iter().rev().sum();
        let a = r as f64 + 0.5;
        let tail = a.powf(df - s) / (s - df) * f_face - a.powf(df - s - 2.0) / (s + 2.0 - df) * lap_face / 24.0;
        0.5 * (head + tail)
    };
    let mut r = match d {
        1 => 256,
        2 => 32,
        _ => 12,
    };
    let cap = match d {
        1 => 1 << 16,
        2 => 1024,
        _ => 96,
    };
    let mut prev = sum_to(r / 2);
    loop {
        let cur = sum_to(r);
        let err = (cur - prev).abs() / (2f64.powf(s + 4.0 - df) - 1.0);
        if err <= tol || r >= cap {
            return Ok((cur, err));
        }
        prev = cur;
        r *= 2;
    }
}

/// `Σ_{|z|_∞ = k} |B z|^{-s}`, summed in a fixed order.
fn shell_sum(b: &DMatrix<f64>, s: f64, k: i64) -> f64 {
    let d = b.nrows();
    let side = (2 * k + 1) as usize;
    let mut total = 0.0;
    let mut z = vec![0i64; d];
    for mut idx in 0..side.pow(d as u32) {
        for a in 0..d {
            z[a] = (idx % side) as i64 - k;
            idx /= side;
        }
        if z.iter().map(|x| x.abs()).max().unwrap() != k {
            continue;
        }
        let r2: f64 = (0..d)
            .map(|i| {
                let x: f64 = (0..d).map(|j| b[(i, j)] * z[j] as f64).sum();
                x * x
            })
            .sum();
        total += r2.powf(-0.5 * s);
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn riemann_zeta_two() {
        let z1 = Lattice::new(LatticeName::Z1);
        let direct = epstein_zeta(&z1, 2.0, 1e-12, ZetaMethod::Direct).unwrap();
        assert_relative_eq!(direct.value, PI * PI / 6.0, epsilon = 1e-10);
        assert_relative_eq!(zeta_ewald(&z1, 2.0, 1.0), PI * PI / 6.0, epsilon = 1e-12);
    }

    #[test]
    fn ewald_is_independent_of_splitting() {
        let l = Lattice::new(LatticeName::BCC);
        let a = zeta_ewald(&l, 1.0, 0.4);
        for &t in &[0.7, 1.0, 2.0, 4.0] {
            assert_relative_eq!(zeta_ewald(&l, 1.0, t), a, epsilon = 1e-12);
        }
    }

    #[test]
    fn direct_agrees_with_ewald_above_dimension() {
        for name in [LatticeName::Z2, LatticeName::TRI, LatticeName::Z3, LatticeName::FCC] {
            let l = Lattice::new(name);
            let d = l.dim() as f64;
            for s in [d + 1.0, d + 2.0] {
                let direct = epstein_zeta(&l, s, 1e-11, ZetaMethod::Direct).unwrap().value;
                assert_relative_eq!(direct, zeta_ewald(&l, s, 1.0), epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn pole_is_rejected() {
        assert!(epstein_zeta(&Lattice::new(LatticeName::Z2), 2.0, 1e-8, ZetaMethod::Auto).is_err());
    }
}
