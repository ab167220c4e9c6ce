//! Integration of separable piecewise-polynomial weights against kernels
//! that are singular only at the origin.
//!
//! The integrand is `K(z) * Σ_t c_t Π_i p_{t,i}(z_i)` where every axis
//! factor is a convolution of boxes. The domain is cut along all
//! breakpoints and the coordinate planes through the origin. Boxes with
//! the origin at a corner are split into a small cube, integrated in
//! pyramid (Duffy) coordinates with a Gauss-Jacobi radial rule, and a
//! regular remainder. Regular boxes are bisected until they are small
//! compared with their distance to the origin.

use crate::parallel;
use crate::special::{gauss_legendre, gauss_radial, GaussRule};

/// Kernel evaluated in integration coordinates.
pub trait Kernel: Sync {
    fn eval(&self, z: &[f64]) -> f64;
    /// Degree `p` with `K(t z) = t^p K(z)` for `t > 0`, when homogeneous.
    fn degree(&self) -> Option<f64>;
    /// Smooth kernels skip the near-origin refinement of regular boxes.
    fn smooth(&self) -> bool {
        false
    }
}

/// Convolution of boxes `1_[start, start+w_0] * 1_[0, w_1] * ...` on one axis.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxConv {
    pub start: f64,
    pub widths: Vec<f64>,
}

impl BoxConv {
    /// Indicator of `[center - width/2, center + width/2]`.
    pub fn centered(center: f64, width: f64) -> Self {
        BoxConv { start: center - 0.5 * width, widths: vec![width] }
    }

    pub fn interval(lo: f64, hi: f64) -> Self {
        BoxConv { start: lo, widths: vec![hi - lo] }
    }

    pub fn conv(&self, other: &BoxConv) -> BoxConv {
        let mut widths = self.widths.clone();
        widths.extend_from_slice(&other.widths);
        BoxConv { start: self.start + other.start, widths }
    }

    /// The reflected profile `x -> p(-x)`.
    pub fn reflect(&self) -> BoxConv {
        let total: f64 = self.widths.iter().sum();
        BoxConv { start: -self.start - total, widths: self.widths.clone() }
    }

    pub fn support(&self) -> (f64, f64) {
        (self.start, self.start + self.widths.iter().sum::<f64>())
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        let n = self.widths.len();
        let mut out = Vec::with_capacity(1 << n);
        for mask in 0..(1usize << n) {
            let s: f64 = (0..n).filter(|k| mask >> k & 1 == 1).map(|k| self.widths[k]).sum();
            out.push(self.start + s);
        }
        out
    }

    pub fn eval(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if x <= lo || x >= hi {
            return 0.0;
        }
        let n = self.widths.len();
        let y = x - self.start;
        if n == 1 {
            return 1.0;
        }
        let mut fact = 1.0;
        for k in 1..n {
            fact *= k as f64;
        }
        let mut acc = 0.0;
        for mask in 0..(1usize << n) {
            let mut t = y;
            let mut sign = 1.0;
            for k in 0..n {
                if mask >> k & 1 == 1 {
                    t -= self.widths[k];
                    sign = -sign;
                }
            }
            if t > 0.0 {
                acc += sign * t.powi(n as i32 - 1);
            }
        }
        acc / fact
    }

    fn degree(&self) -> usize {
        self.widths.len() - 1
    }
}

/// One separable term `coef * Π_i axes[i](z_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparableTerm {
    pub coef: f64,
    pub axes: Vec<BoxConv>,
}

/// Quadrature controls.
#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    /// Tensor Gauss order on regular boxes.
    pub order: usize,
    /// Admissibility ratio `diam <= eta * dist` for regular boxes.
    pub eta: f64,
    /// Recompute with a raised order and report the difference.
    pub estimate_error: bool,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions { order: 8, eta: 0.5, estimate_error: false }
    }
}

/// Value with a quadrature error estimate (zero when not requested).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

struct Rules {
    line: std::sync::Arc<GaussRule>,
    angle: std::sync::Arc<GaussRule>,
    radial_order: usize,
}

fn unique_sorted(mut v: Vec<f64>) -> Vec<f64> {
    for x in v.iter_mut() {
        if x.abs() <= 1e-12 {
            *x = 0.0;
        }
    }
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut out: Vec<f64> = Vec::with_capacity(v.len());
    for x in v {
        match out.last() {
            Some(&y) if (x - y).abs() <= 1e-12 * (1.0 + x.abs()) => {}
            _ => out.push(x),
        }
    }
    out
}

/// Integrates `K(z) Σ_t c_t Π_i p_{t,i}(z_i)` over `R^d`.
pub fn integrate_separable(
    kernel: &dyn Kernel,
    terms: &[SeparableTerm],
    opts: &QuadOptions,
) -> Estimate {
    let base = integrate_with(kernel, terms, opts, opts.order);
    if !opts.estimate_error {
        return Estimate { value: base, error: 0.0 };
    }
    let fine = integrate_with(kernel, terms, opts, opts.order + 4);
    Estimate { value: fine, error: (fine - base).abs() }
}

fn integrate_with(kernel: &dyn Kernel, terms: &[SeparableTerm], opts: &QuadOptions, order: usize) -> f64 {
    if terms.is_empty() {
        return 0.0;
    }
    let d = terms[0].axes.len();
    let rules = Rules {
        line: gauss_legendre(order),
        angle: gauss_legendre(order + 4),
        radial_order: order + 2,
    };
    let mut cuts: Vec<Vec<f64>> = Vec::with_capacity(d);
    for axis in 0..d {
        let mut pts = vec![0.0];
        for t in terms {
            pts.extend(t.axes[axis].breakpoints());
        }
        cuts.push(unique_sorted(pts));
    }
    let counts: Vec<usize> = cuts.iter().map(|c| c.len() - 1).collect();
    let total: usize = counts.iter().product();
    let boxes: Vec<(Vec<f64>, Vec<f64>)> = (0..total)
        .filter_map(|mut idx| {
            let mut lo = vec![0.0; d];
            let mut hi = vec![0.0; d];
            for axis in 0..d {
                let k = idx % counts[axis];
                idx /= counts[axis];
                lo[axis] = cuts[axis][k];
                hi[axis] = cuts[axis][k + 1];
            }
            let mid: Vec<f64> = (0..d).map(|a| 0.5 * (lo[a] + hi[a])).collect();
            let alive = terms.iter().any(|t| {
                (0..d).all(|a| {
                    let (s0, s1) = t.axes[a].support();
                    mid[a] > s0 && mid[a] < s1
                })
            });
            alive.then_some((lo, hi))
        })
        .collect();
    let parts = parallel::map_slice(&boxes, |(lo, hi)| piece(kernel, terms, &rules, opts.eta, lo, hi));
    parts.into_iter().sum()
}

fn weight_at(terms: &[SeparableTerm], z: &[f64]) -> f64 {
    terms
        .iter()
        .map(|t| t.coef * t.axes.iter().zip(z).map(|(p, &x)| p.eval(x)).product::<f64>())
        .sum()
}

/// One polynomial piece: origin at a corner, or away from it.
fn piece(kernel: &dyn Kernel, terms: &[SeparableTerm], rules: &Rules, eta: f64, lo: &[f64], hi: &[f64]) -> f64 {
    let d = lo.len();
    let corner = (0..d).all(|a| lo[a] == 0.0 || hi[a] == 0.0);
    if !corner {
        return regular(kernel, terms, rules, eta, lo, hi);
    }
    let sign: Vec<f64> = (0..d).map(|a| if lo[a] == 0.0 { 1.0 } else { -1.0 }).collect();
    let ext: Vec<f64> = (0..d).map(|a| hi[a] - lo[a]).collect();
    let c = ext.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut total = pyramid_cube(kernel, terms, rules, &sign, c);
    // Remainder of the box outside the cube [0,c]^d, as disjoint slabs.
    for a in 0..d {
        if ext[a] <= c * (1.0 + 1e-14) {
            continue;
        }
        let mut slo = vec![0.0; d];
        let mut shi = vec![0.0; d];
        for b in 0..d {
            let (l, h) = if b < a {
                (0.0, c)
            } else if b == a {
                (c, ext[b])
            } else {
                (0.0, ext[b])
            };
            let (l, h) = if sign[b] > 0.0 { (l, h) } else { (-h, -l) };
            slo[b] = l;
            shi[b] = h;
        }
        total += regular(kernel, terms, rules, eta, &slo, &shi);
    }
    total
}

fn pyramid_cube(kernel: &dyn Kernel, terms: &[SeparableTerm], rules: &Rules, sign: &[f64], c: f64) -> f64 {
    let d = sign.len();
    let (alpha, homogeneous) = match kernel.degree() {
        Some(p) => (d as f64 - 1.0 + p, true),
        None => (d as f64 - 1.0, false),
    };
    let max_deg: usize = terms
        .iter()
        .map(|t| t.axes.iter().map(|p| p.degree()).sum::<usize>())
        .max()
        .unwrap_or(0);
    let radial = gauss_radial(rules.radial_order.max(max_deg / 2 + 2), alpha);
    let ang = &rules.angle;
    let na = ang.nodes.len();
    let mut total = 0.0;
    let mut u = vec![0.0; d];
    let mut z = vec![0.0; d];
    for k in 0..d {
        let nt = na.pow(d as u32 - 1);
        for idx in 0..nt {
            let mut rem = idx;
            let mut wt = 1.0;
            for a in 0..d {
                if a == k {
                    u[a] = sign[a];
                    continue;
                }
                let j = rem % na;
                rem /= na;
                u[a] = sign[a] * 0.5 * (1.0 + ang.nodes[j]);
                wt *= 0.5 * ang.weights[j];
            }
            let ku = if homogeneous { kernel.eval(&u) } else { 1.0 };
            let mut inner = 0.0;
            for (rho, w) in radial.nodes.iter().zip(&radial.weights) {
                let r = c * rho;
                for a in 0..d {
                    z[a] = r * u[a];
                }
                let kv = if homogeneous { 1.0 } else { kernel.eval(&z) };
                inner += w * kv * weight_at(terms, &z);
            }
            total += wt * ku * inner;
        }
    }
    total * c.powf(alpha + 1.0)
}

fn regular(kernel: &dyn Kernel, terms: &[SeparableTerm], rules: &Rules, eta: f64, lo: &[f64], hi: &[f64]) -> f64 {
    let d = lo.len();
    let mut dist2 = 0.0;
    let mut diam2 = 0.0;
    let mut widest = 0;
    for a in 0..d {
        let g = if lo[a] > 0.0 {
            lo[a]
        } else if hi[a] < 0.0 {
            -hi[a]
        } else {
            0.0
        };
        dist2 += g * g;
        let w = hi[a] - lo[a];
        diam2 += w * w;
        if w > hi[widest] - lo[widest] {
            widest = a;
        }
    }
    let singular = !kernel.smooth();
    if singular && diam2 > eta * eta * dist2 && diam2 > 1e-24 {
        let mid = 0.5 * (lo[widest] + hi[widest]);
        let mut h1 = hi.to_vec();
        h1[widest] = mid;
        let mut l2 = lo.to_vec();
        l2[widest] = mid;
        return regular(kernel, terms, rules, eta, lo, &h1) + regular(kernel, terms, rules, eta, &l2, hi);
    }
    tensor_gauss(kernel, terms, &rules.line, lo, hi)
}

fn tensor_gauss(kernel: &dyn Kernel, terms: &[SeparableTerm], rule: &GaussRule, lo: &[f64], hi: &[f64]) -> f64 {
    let d = lo.len();
    let n = rule.nodes.len();
    let nodes: Vec<Vec<f64>> = (0..d)
        .map(|a| rule.nodes.iter().map(|t| 0.5 * (lo[a] + hi[a]) + 0.5 * (hi[a] - lo[a]) * t).collect())
        .collect();
    // Per-term, per-axis profile values at the nodes.
    let prof: Vec<Vec<Vec<f64>>> = terms
        .iter()
        .map(|t| (0..d).map(|a| nodes[a].iter().map(|&x| t.axes[a].eval(x)).collect()).collect())
        .collect();
    let mut z = vec![0.0; d];
    let mut total = 0.0;
    let count = n.pow(d as u32);
    for idx in 0..count {
        let mut rem = idx;
        let mut w = 1.0;
        let mut js = [0usize; 3];
        for a in 0..d {
            let j = rem % n;
            rem /= n;
            js[a] = j;
            z[a] = nodes[a][j];
            w *= rule.weights[j];
        }
        let mut p = 0.0;
        for (t, pv) in terms.iter().zip(&prof) {
            let mut prod = t.coef;
            for a in 0..d {
                prod *= pv[a][js[a]];
            }
            p += prod;
        }
        if p != 0.0 {
            total += w * p * kernel.eval(&z);
        }
    }
    let vol: f64 = (0..d).map(|a| 0.5 * (hi[a] - lo[a])).product();
    total * vol
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    struct Riesz(f64);
    impl Kernel for Riesz {
        fn eval(&self, z: &[f64]) -> f64 {
            z.iter().map(|x| x * x).sum::<f64>().powf(-0.5 * self.0)
        }
        fn degree(&self) -> Option<f64> {
            Some(-self.0)
        }
    }

    fn tent(h: f64) -> BoxConv {
        BoxConv::centered(0.0, h).conv(&BoxConv::centered(0.0, h))
    }

    #[test]
    fn box_conv_tent_values() {
        let t = tent(1.0);
        assert_relative_eq!(t.eval(0.0), 1.0, epsilon = 1e-15);
        assert_relative_eq!(t.eval(0.25), 0.75, epsilon = 1e-15);
        assert_relative_eq!(t.eval(-0.9), 0.1, epsilon = 1e-14);
        assert_eq!(t.eval(1.2), 0.0);
    }

    #[test]
    fn box_conv_integrates_to_product_of_widths() {
        let p = BoxConv::interval(-0.3, 0.9).conv(&BoxConv::centered(0.0, 2.0)).conv(&BoxConv::centered(1.0, 0.5));
        let bps = unique_sorted(p.breakpoints());
        let mut s = 0.0;
        for w in bps.windows(2) {
            s += crate::special::gauss_interval(4, w[0], w[1], |x| p.eval(x));
        }
        assert_relative_eq!(s, 1.2 * 2.0 * 0.5, epsilon = 1e-13);
    }

    #[test]
    fn singular_cell_average_1d_closed_form() {
        // ∬_[0,1]^2 |x-y|^{-1/2} = 8/3
        let terms = vec![SeparableTerm { coef: 1.0, axes: vec![tent(1.0)] }];
        let v = integrate_separable(&Riesz(0.5), &terms, &QuadOptions::default()).value;
        assert_relative_eq!(v, 8.0 / 3.0, epsilon = 1e-13);
    }

    #[test]
    fn coulomb_potential_of_square_at_corner() {
        // ∫_[0,1]^2 |z|^{-1} dz = 2 ln(1 + √2)
        let terms = vec![SeparableTerm { coef: 1.0, axes: vec![BoxConv::interval(0.0, 1.0); 2] }];
        let v = integrate_separable(&Riesz(1.0), &terms, &QuadOptions::default()).value;
        assert_relative_eq!(v, 2.0 * (1.0 + 2f64.sqrt()).ln(), epsilon = 1e-12);
    }

    #[test]
    fn regular_offset_cell_matches_point_value_far_away() {
        let terms = vec![SeparableTerm {
            coef: 1.0,
            axes: vec![BoxConv::centered(40.0, 1.0), BoxConv::centered(0.0, 1.0), BoxConv::centered(0.0, 1.0)],
        }];
        let v = integrate_separable(&Riesz(1.0), &terms, &QuadOptions::default()).value;
        // harmonic kernel: the cell average equals the point value up to O(r^-5)
        assert_relative_eq!(v, 1.0 / 40.0, max_relative = 1e-7);
    }
}
