//! Special functions and Gauss rules used throughout the crate.

use nalgebra::{DMatrix, SymmetricEigen};
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

pub use statrs::function::gamma::{gamma, ln_gamma};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Surface area of the unit sphere in dimension `d`.
pub fn sphere_area(d: usize) -> f64 {
    let h = d as f64 / 2.0;
    2.0 * PI.powf(h) / gamma(h)
}

/// Exponential integral `E1(x)` for `x > 0`.
pub fn exp_integral_e1(x: f64) -> f64 {
    if x <= 1.0 {
        let mut sum = 0.0;
        let mut term = 1.0;
        for n in 1..200 {
            term *= -x / n as f64;
            let add = -term / n as f64;
            sum += add;
            if add.abs() < 1e-17 * sum.abs().max(1e-300) {
                break;
            }
        }
        -EULER_GAMMA - x.ln() + sum
    } else {
        upper_gamma_cf(0.0, x)
    }
}

/// Continued fraction for the upper incomplete gamma function (modified Lentz).
fn upper_gamma_cf(a: f64, x: f64) -> f64 {
    let tiny = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..10_000 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < tiny {
            d = tiny;
        }
        c = b + an / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (-x + a * x.ln()).exp() * h
}

/// Lower incomplete gamma series `γ(a, x)` for `a > 0`.
fn lower_gamma_series(a: f64, x: f64) -> f64 {
    let mut sum = 1.0 / a;
    let mut term = 1.0 / a;
    let mut ap = a;
    for _ in 0..10_000 {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * 1e-17 {
            break;
        }
    }
    sum * (-x + a * x.ln()).exp()
}

/// Upper incomplete gamma function `Γ(a, x)` for real `a` and `x > 0`.
///
/// Negative `a` is reached by downward recurrence from a positive order
/// (or from `E1` when `a` is a non-positive integer).
pub fn upper_incomplete_gamma(a: f64, x: f64) -> f64 {
    assert!(x > 0.0, "upper_incomplete_gamma needs x > 0");
    if x > 1.5 {
        return upper_gamma_cf(a, x);
    }
    if a > 0.0 {
        return gamma(a) - lower_gamma_series(a, x);
    }
    let is_int = (a - a.round()).abs() < 1e-14;
    let (mut order, mut value) = if is_int {
        (0.0, exp_integral_e1(x))
    } else {
        let k = (-a).floor() + 1.0;
        let start = a + k;
        (start, gamma(start) - lower_gamma_series(start, x))
    };
    let target = if is_int { a.round() } else { a };
    while order > target + 0.5 {
        let lower = order - 1.0;
        value = (value - x.powf(lower) * (-x).exp()) / lower;
        order = lower;
    }
    value
}

/// Bessel function of the first kind of integer order, from its integral
/// representation (the periodic trapezoid rule is spectrally accurate).
pub fn bessel_j(n: i32, x: f64) -> f64 {
    let k = (x.abs() as usize) + 64;
    let mut sum = 0.0;
    for j in 0..k {
        let theta = PI * (j as f64 + 0.5) / k as f64;
        sum += (n as f64 * theta - x * theta.sin()).cos();
    }
    sum / k as f64
}

/// Nodes and weights of a Gauss rule.
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

type RuleKey = (usize, u64, u64);

fn rule_cache() -> &'static Mutex<HashMap<RuleKey, Arc<GaussRule>>> {
    static CACHE: OnceLock<Mutex<HashMap<RuleKey, Arc<GaussRule>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Gauss-Jacobi rule on `[-1, 1]` for weight `(1-x)^alpha (1+x)^beta`
/// (Golub-Welsch). Results are cached.
pub fn gauss_jacobi(n: usize, alpha: f64, beta: f64) -> Arc<GaussRule> {
    assert!(n >= 1 && alpha > -1.0 && beta > -1.0);
    let key = (n, alpha.to_bits(), beta.to_bits());
    if let Some(rule) = rule_cache().lock().unwrap().get(&key) {
        return rule.clone();
    }
    let ab = alpha + beta;
    let mut t = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        let k = i as f64;
        t[(i, i)] = if i == 0 {
            (beta - alpha) / (ab + 2.0)
        } else {
            (beta * beta - alpha * alpha) / ((2.0 * k + ab) * (2.0 * k + ab + 2.0))
        };
        if i + 1 < n {
            let m = k + 1.0;
            let s = 2.0 * m + ab;
            let b2 = if i == 0 {
                4.0 * (1.0 + alpha) * (1.0 + beta) / ((2.0 + ab).powi(2) * (3.0 + ab))
            } else {
                4.0 * m * (m + alpha) * (m + beta) * (m + ab) / (s * s * (s + 1.0) * (s - 1.0))
            };
            t[(i, i + 1)] = b2.sqrt();
            t[(i + 1, i)] = b2.sqrt();
        }
    }
    let mu0 = (ab + 1.0) * 2f64.ln() + ln_gamma(alpha + 1.0) + ln_gamma(beta + 1.0)
        - ln_gamma(ab + 2.0);
    let mu0 = mu0.exp();
    let eig = SymmetricEigen::new(t);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| (eig.eigenvalues[i], mu0 * eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let rule = Arc::new(GaussRule {
        nodes: pairs.iter().map(|p| p.0).collect(),
        weights: pairs.iter().map(|p| p.1).collect(),
    });
    rule_cache().lock().unwrap().insert(key, rule.clone());
    rule
}

/// Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> Arc<GaussRule> {
    gauss_jacobi(n, 0.0, 0.0)
}

/// Rule on `[0, 1]` for the weight `x^alpha`.
pub fn gauss_radial(n: usize, alpha: f64) -> GaussRule {
    let base = gauss_jacobi(n, 0.0, alpha);
    let scale = 2f64.powf(-alpha - 1.0);
    GaussRule {
        nodes: base.nodes.iter().map(|t| 0.5 * (1.0 + t)).collect(),
        weights: base.weights.iter().map(|w| w * scale).collect(),
    }
}

/// Integrates `f` over `[a, b]` with an `n`-point Gauss-Legendre rule.
pub fn gauss_interval(n: usize, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
    let rule = gauss_legendre(n);
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    rule.nodes
        .iter()
        .zip(&rule.weights)
        .map(|(t, w)| w * f(mid + half * t))
        .sum::<f64>()
        * half
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn legendre_integrates_polynomials_exactly() {
        let r = gauss_legendre(6);
        let s: f64 = r.nodes.iter().zip(&r.weights).map(|(x, w)| w * x.powi(10)).sum();
        assert_relative_eq!(s, 2.0 / 11.0, epsilon = 1e-14);
    }

    #[test]
    fn radial_rule_handles_singular_weight() {
        // ∫_0^1 x^{-1/2}(1 - x) dx = 2 - 2/3
        let r = gauss_radial(4, -0.5);
        let s: f64 = r.nodes.iter().zip(&r.weights).map(|(x, w)| w * (1.0 - x)).sum();
        assert_relative_eq!(s, 4.0 / 3.0, epsilon = 1e-14);
    }

    #[test]
    fn chebyshev_weights_are_uniform() {
        let r = gauss_jacobi(5, -0.5, -0.5);
        for w in &r.weights {
            assert_relative_eq!(*w, PI / 5.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn incomplete_gamma_reference_values() {
        // (x, Γ(1/2, x), Γ(-1/2, x)) at 30-digit precision
        let table = [
            (0.1, 1.16046248479374423, 3.40176933669161526),
            (0.7, 0.419581604377174248, 0.34790271537865917),
            (1.5, 0.147582513204096419, 0.0692049993179049743),
            (2.0, 0.0806471179603176908, 0.0300987571001864663),
            (9.0, 0.0000391543864735595092, 3.9644297773340146e-6),
        ];
        for &(x, half, neg_half) in &table {
            assert_relative_eq!(upper_incomplete_gamma(1.0, x), (-x).exp(), max_relative = 1e-13);
            assert_relative_eq!(upper_incomplete_gamma(0.5, x), half, max_relative = 1e-13);
            assert_relative_eq!(upper_incomplete_gamma(-0.5, x), neg_half, max_relative = 1e-12);
        }
    }


    #[test]
    fn e1_matches_continued_fraction_at_switch() {
        let a = exp_integral_e1(1.0);
        assert_relative_eq!(a, 0.219_383_934_395_520_3, epsilon = 1e-14);
        assert_relative_eq!(upper_incomplete_gamma(-1.0, 0.5), (-0.5f64).exp() / 0.5 - exp_integral_e1(0.5), max_relative = 1e-13);
    }

    #[test]
    fn bessel_matches_half_integer_forms() {
        // J_1 against the series at moderate argument
        let x: f64 = 3.7;
        let mut series = 0.0;
        let mut term = x / 2.0;
        for k in 0..40 {
            series += term;
            term *= -(x * x / 4.0) / ((k as f64 + 1.0) * (k as f64 + 2.0));
        }
        assert_relative_eq!(bessel_j(1, x), series, epsilon = 1e-14);
    }

    #[test]
    fn sphere_areas() {
        assert_relative_eq!(sphere_area(1), 2.0, epsilon = 1e-14);
        assert_relative_eq!(sphere_area(2), 2.0 * PI, epsilon = 1e-14);
        assert_relative_eq!(sphere_area(3), 4.0 * PI, epsilon = 1e-13);
    }
}
