//! Grids, densities, interaction kernels and lattices.

use crate::error::{input, LabError, Result};
use crate::quadrature::{self, BoxConv, QuadOptions, SeparableTerm};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Periodic,
    Open,
}

/// Regular grid of cells. Linear indices run lexicographically with the
/// first axis slowest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub cells: Vec<usize>,
    pub lengths: Vec<f64>,
    pub origin: Vec<f64>,
    pub boundary: Boundary,
}

impl Grid {
    pub fn new(cells: Vec<usize>, lengths: Vec<f64>, boundary: Boundary) -> Result<Self> {
        let d = cells.len();
        Self::with_origin(cells, lengths, vec![0.0; d], boundary)
    }

    pub fn with_origin(cells: Vec<usize>, lengths: Vec<f64>, origin: Vec<f64>, boundary: Boundary) -> Result<Self> {
        let d = cells.len();
        if !(1..=3).contains(&d) || lengths.len() != d || origin.len() != d {
            return input("grid dimension must be 1, 2 or 3 with matching lengths");
        }
        if cells.iter().any(|&m| m == 0) {
            return input("every axis needs at least one cell");
        }
        if lengths.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
            return input("axis lengths must be positive");
        }
        Ok(Grid { cells, lengths, origin, boundary })
    }

    /// Uniform 1D grid on `[0, length]`.
    pub fn line(cells: usize, length: f64, boundary: Boundary) -> Result<Self> {
        Self::new(vec![cells], vec![length], boundary)
    }

    pub fn dim(&self) -> usize {
        self.cells.len()
    }

    pub fn len(&self) -> usize {
        self.cells.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self) -> Vec<f64> {
        self.cells.iter().zip(&self.lengths).map(|(&m, &l)| l / m as f64).collect()
    }

    /// Cell volume `h`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().iter().product()
    }

    pub fn volume(&self) -> f64 {
        self.lengths.iter().product()
    }

    pub fn multi_index(&self, mut i: usize) -> Vec<usize> {
        let d = self.dim();
        let mut out = vec![0; d];
        for a in (0..d).rev() {
            out[a] = i % self.cells[a];
            i /= self.cells[a];
        }
        out
    }

    pub fn linear_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.cells).fold(0, |acc, (&k, &m)| acc * m + k)
    }

    pub fn center(&self, i: usize) -> Vec<f64> {
        let h = self.spacing();
        self.multi_index(i)
            .iter()
            .enumerate()
            .map(|(a, &k)| self.origin[a] + (k as f64 + 0.5) * h[a])
            .collect()
    }

    /// Displacement between two cell centers (minimum image when periodic).
    pub fn displacement(&self, i: usize, j: usize) -> Vec<f64> {
        let (a, b) = (self.center(i), self.center(j));
        (0..self.dim())
            .map(|k| {
                let mut x = a[k] - b[k];
                if self.boundary == Boundary::Periodic {
                    let l = self.lengths[k];
                    x -= l * (x / l).round();
                }
                x
            })
            .collect()
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.displacement(i, j).iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

/// Nonnegative cell masses on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteDensity {
    pub grid: Grid,
    pub masses: Vec<f64>,
}

impl DiscreteDensity {
    pub fn new(grid: Grid, masses: Vec<f64>) -> Result<Self> {
        if masses.len() != grid.len() {
            return input(format!("{} masses for {} cells", masses.len(), grid.len()));
        }
        if let Some(i) = masses.iter().position(|m| !(*m >= 0.0) || !m.is_finite()) {
            return input(format!("negative or non-finite mass {} at cell {}", masses[i], i));
        }
        Ok(DiscreteDensity { grid, masses })
    }

    /// Density with pointwise values `rho_i` (converted to masses).
    pub fn from_values(grid: Grid, values: &[f64]) -> Result<Self> {
        let h = grid.cell_volume();
        Self::new(grid, values.iter().map(|v| v * h).collect())
    }

    pub fn total(&self) -> f64 {
        self.masses.iter().sum()
    }

    pub fn values(&self) -> Vec<f64> {
        let h = self.grid.cell_volume();
        self.masses.iter().map(|m| m / h).collect()
    }

    /// Midpoint rule for `∫ rho^p`.
    pub fn integral_power(&self, p: f64) -> f64 {
        let h = self.grid.cell_volume();
        self.values().iter().map(|v| h * v.powf(p)).sum()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        DiscreteDensity { grid: self.grid.clone(), masses: self.masses.iter().map(|m| m * factor).collect() }
    }
}

/// Samples `profile` at cell centers: `m_i = profile(center_i) h`.
pub fn density_from_function(grid: &Grid, profile: impl Fn(&[f64]) -> f64) -> Result<DiscreteDensity> {
    let h = grid.cell_volume();
    let mut masses = Vec::with_capacity(grid.len());
    for i in 0..grid.len() {
        let c = grid.center(i);
        let v = profile(&c);
        if !(v >= 0.0) || !v.is_finite() {
            return Err(LabError::Input(format!("profile value {v} at {c:?} is negative or not finite")));
        }
        masses.push(v * h);
    }
    DiscreteDensity::new(grid.clone(), masses)
}

/// Dilation `rho -> lambda^d rho(lambda x)`: lengths shrink by `lambda`, masses are kept.
pub fn rescale_density(rho: &DiscreteDensity, lambda: f64) -> Result<DiscreteDensity> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return input("dilation factor must be positive");
    }
    let g = &rho.grid;
    let grid = Grid::with_origin(
        g.cells.clone(),
        g.lengths.iter().map(|l| l / lambda).collect(),
        g.origin.iter().map(|o| o / lambda).collect(),
        g.boundary,
    )?;
    DiscreteDensity::new(grid, rho.masses.clone())
}

/// Pair interaction `w(r)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InteractionKernel {
    /// `|r|^{-s}`
    Riesz { s: f64 },
    /// `1/|r|` in three dimensions.
    Coulomb3d,
    /// `-|r|`, the one-dimensional Coulomb kernel.
    NegAbs,
    /// `exp(-alpha |r|^2)`, positive definite.
    Gaussian { alpha: f64 },
    /// Piecewise-linear table on increasing radii, constant beyond the ends.
    Tabulated { r: Vec<f64>, w: Vec<f64> },
    /// Identically zero.
    Zero,
}

impl InteractionKernel {
    /// Parses `riesz:S`, `coulomb`, `negabs`, `gaussian:A`, `zero`.
    pub fn parse(spec: &str) -> Result<Self> {
        let (name, arg) = match spec.split_once(':') {
            Some((n, a)) => (n.trim(), Some(a.trim())),
            None => (spec.trim(), None),
        };
        let num = |a: Option<&str>| -> Result<f64> {
            a.ok_or_else(|| LabError::Input(format!("kernel `{spec}` needs a parameter")))?
                .parse::<f64>()
                .map_err(|e| LabError::Input(format!("kernel parameter: {e}")))
        };
        let k = match name {
            "riesz" => InteractionKernel::Riesz { s: num(arg)? },
            "coulomb" | "coulomb3d" => InteractionKernel::Coulomb3d,
            "negabs" | "neg_abs" => InteractionKernel::NegAbs,
            "gaussian" => InteractionKernel::Gaussian { alpha: num(arg)? },
            "zero" => InteractionKernel::Zero,
            _ => return input(format!("unknown kernel `{spec}`")),
        };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            InteractionKernel::Riesz { s } if !(*s > 0.0) => input("riesz exponent must be positive"),
            InteractionKernel::Gaussian { alpha } if !(*alpha > 0.0) => input("gaussian width must be positive"),
            InteractionKernel::Tabulated { r, w } => {
                if r.len() != w.len() || r.len() < 2 || r.windows(2).any(|p| p[1] <= p[0]) {
                    input("tabulated kernel needs increasing radii and matching values")
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    pub fn eval(&self, r: f64) -> f64 {
        match self {
            InteractionKernel::Riesz { s } => r.powf(-s),
            InteractionKernel::Coulomb3d => 1.0 / r,
            InteractionKernel::NegAbs => -r,
            InteractionKernel::Gaussian { alpha } => (-alpha * r * r).exp(),
            InteractionKernel::Tabulated { r: rs, w } => {
                if r <= rs[0] {
                    return w[0];
                }
                if r >= rs[rs.len() - 1] {
                    return w[w.len() - 1];
                }
                let k = rs.partition_point(|&x| x <= r) - 1;
                let t = (r - rs[k]) / (rs[k + 1] - rs[k]);
                w[k] * (1.0 - t) + w[k + 1] * t
            }
            InteractionKernel::Zero => 0.0,
        }
    }

    /// Exponent `s` of a power-law kernel (`NegAbs` counts as `s = -1`).
    pub fn riesz_exponent(&self) -> Option<f64> {
        match self {
            InteractionKernel::Riesz { s } => Some(*s),
            InteractionKernel::Coulomb3d => Some(1.0),
            InteractionKernel::NegAbs => Some(-1.0),
            _ => None,
        }
    }

    /// Homogeneity degree of `w` when it is a power law.
    pub fn degree(&self) -> Option<f64> {
        match self {
            InteractionKernel::Zero => Some(0.0),
            _ => self.riesz_exponent().map(|s| -s),
        }
    }

    /// Flag for kernels with nonnegative Fourier transform.
    pub fn nonnegative_fourier(&self) -> bool {
        matches!(self, InteractionKernel::Gaussian { .. } | InteractionKernel::Zero)
    }

    /// `w(0)` when finite.
    pub fn value_at_zero(&self) -> Option<f64> {
        match self {
            InteractionKernel::Gaussian { .. } => Some(1.0),
            InteractionKernel::NegAbs | InteractionKernel::Zero => Some(0.0),
            InteractionKernel::Tabulated { w, .. } => Some(w[0]),
            _ => None,
        }
    }

    /// Whether the kernel is locally integrable in dimension `d`.
    pub fn integrable_in(&self, d: usize) -> bool {
        self.riesz_exponent().map_or(true, |s| s < d as f64)
    }

    fn smooth(&self) -> bool {
        matches!(self, InteractionKernel::Gaussian { .. } | InteractionKernel::Zero)
    }
}

/// A kernel composed with a linear map, `z -> w(|B z|)`.
pub struct LinearKernel<'a> {
    pub kernel: &'a InteractionKernel,
    pub basis: Option<&'a DMatrix<f64>>,
}

impl quadrature::Kernel for LinearKernel<'_> {
    fn eval(&self, z: &[f64]) -> f64 {
        let r2 = match self.basis {
            None => z.iter().map(|x| x * x).sum::<f64>(),
            Some(b) => {
                let d = z.len();
                (0..d)
                    .map(|i| {
                        let x: f64 = (0..d).map(|j| b[(i, j)] * z[j]).sum();
                        x * x
                    })
                    .sum()
            }
        };
        self.kernel.eval(r2.sqrt())
    }
    fn degree(&self) -> Option<f64> {
        self.kernel.degree()
    }
    fn smooth(&self) -> bool {
        self.kernel.smooth()
    }
}

/// `∬_{cell × cell} w(x - y) dx dy` for an axis-aligned cell with the given widths.
pub fn cell_pair_integral(widths: &[f64], kernel: &InteractionKernel) -> f64 {
    let axes = widths.iter().map(|&h| BoxConv::centered(0.0, h).conv(&BoxConv::centered(0.0, h))).collect();
    let terms = [SeparableTerm { coef: 1.0, axes }];
    quadrature::integrate_separable(&LinearKernel { kernel, basis: None }, &terms, &QuadOptions::default()).value
}

/// Self-average `w̄(c,c)` of a cell. One-dimensional power laws use the closed form.
pub fn cell_self_average(widths: &[f64], kernel: &InteractionKernel) -> f64 {
    if widths.len() == 1 {
        if let Some(s) = kernel.riesz_exponent() {
            let h = widths[0];
            if s < 1.0 {
                return 2.0 * h.powf(-s) / ((1.0 - s) * (2.0 - s));
            }
        }
    }
    let vol: f64 = widths.iter().product();
    cell_pair_integral(widths, kernel) / (vol * vol)
}

/// Pair-cost matrix with point values off the diagonal and `w̄` on it.
/// Non-integrable kernels get an infinite diagonal (repeated cells excluded).
pub fn pair_cost_matrix(grid: &Grid, kernel: &InteractionKernel) -> Result<DMatrix<f64>> {
    kernel.validate()?;
    let n = grid.len();
    let diag = if kernel.integrable_in(grid.dim()) {
        cell_self_average(&grid.spacing(), kernel)
    } else {
        f64::INFINITY
    };
    let mut c = DMatrix::zeros(n, n);
    for i in 0..n {
        c[(i, i)] = diag;
        for j in 0..i {
            let r = grid.distance(i, j);
            if r == 0.0 {
                return input("two distinct cells share a center");
            }
            let w = kernel.eval(r);
            c[(i, j)] = w;
            c[(j, i)] = w;
        }
    }
    Ok(c)
}

/// Kernel matrix for classical functionals; non-integrable power laws are rejected.
pub fn kernel_matrix(grid: &Grid, kernel: &InteractionKernel) -> Result<DMatrix<f64>> {
    if !kernel.integrable_in(grid.dim()) {
        return input(format!(
            "kernel {kernel:?} is not locally integrable in dimension {}; classical solvers need s < d",
            grid.dim()
        ));
    }
    pair_cost_matrix(grid, kernel)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LatticeName {
    Z1,
    Z2,
    Z3,
    BCC,
    FCC,
    TRI,
}

impl std::str::FromStr for LatticeName {
    type Err = LabError;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_uppercase().as_str() {
            "Z1" => LatticeName::Z1,
            "Z2" => LatticeName::Z2,
            "Z3" => LatticeName::Z3,
            "BCC" => LatticeName::BCC,
            "FCC" => LatticeName::FCC,
            "TRI" => LatticeName::TRI,
            _ => return input(format!("unknown lattice `{s}`")),
        })
    }
}

/// Bravais lattice with unit covolume; basis vectors are the matrix columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    pub name: LatticeName,
    pub basis: DMatrix<f64>,
}

impl Lattice {
    pub fn new(name: LatticeName) -> Self {
        let basis = match name {
            LatticeName::Z1 => DMatrix::identity(1, 1),
            LatticeName::Z2 => DMatrix::identity(2, 2),
            LatticeName::Z3 => DMatrix::identity(3, 3),
            LatticeName::TRI => {
                let a = (2.0 / 3f64.sqrt()).sqrt();
                DMatrix::from_column_slice(2, 2, &[a, 0.0, 0.5 * a, 0.5 * a * 3f64.sqrt()])
            }
            LatticeName::BCC => {
                let c = 0.5 * 2f64.powf(1.0 / 3.0);
                DMatrix::from_column_slice(3, 3, &[-c, c, c, c, -c, c, c, c, -c])
            }
            LatticeName::FCC => {
                let c = 0.5 * 4f64.powf(1.0 / 3.0);
                DMatrix::from_column_slice(3, 3, &[0.0, c, c, c, 0.0, c, c, c, 0.0])
            }
        };
        Lattice { name, basis }
    }

    pub fn dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn covolume(&self) -> f64 {
        self.basis.determinant().abs()
    }

    pub fn point(&self, z: &[f64]) -> Vec<f64> {
        let d = self.dim();
        (0..d).map(|i| (0..d).map(|j| self.basis[(i, j)] * z[j]).sum()).collect()
    }

    /// Basis of the dual lattice, `B^{-T}`.
    pub fn dual_basis(&self) -> DMatrix<f64> {
        self.basis.clone().try_inverse().expect("lattice basis is invertible").transpose()
    }

    pub fn is_cubic(&self) -> bool {
        matches!(self.name, LatticeName::Z1 | LatticeName::Z2 | LatticeName::Z3)
    }

    /// Whether the centered parallelepiped cell has an isotropic second moment.
    pub fn cell_quadrupole_isotropic(&self) -> bool {
        let m = &self.basis * self.basis.transpose();
        let d = self.dim();
        let tr = m.trace() / d as f64;
        (0..d).all(|i| (0..d).all(|j| (m[(i, j)] - if i == j { tr } else { 0.0 }).abs() < 1e-12))
    }
}

/// Reads a density CSV (`x,rho`, `x,y,rho` or `x,y,z,rho`) with uniformly
/// spaced, lexicographically increasing cell centers.
pub fn parse_density_csv(text: &str, boundary: Boundary) -> Result<DiscreteDensity> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
    let header = lines.next().ok_or_else(|| LabError::Input("empty density file".into()))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let d = match cols.as_slice() {
        ["x", "rho"] => 1,
        ["x", "y", "rho"] => 2,
        ["x", "y", "z", "rho"] => 3,
        _ => return input(format!("unexpected density header `{header}`")),
    };
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (n, line) in lines.enumerate() {
        let vals: std::result::Result<Vec<f64>, _> = line.split(',').map(|t| t.trim().parse::<f64>()).collect();
        let vals = vals.map_err(|e| LabError::Input(format!("row {}: {e}", n + 2)))?;
        if vals.len() != d + 1 {
            return input(format!("row {} has {} columns, expected {}", n + 2, vals.len(), d + 1));
        }
        if let Some(prev) = rows.last() {
            if prev[..d].partial_cmp(&vals[..d]) != Some(std::cmp::Ordering::Less) {
                return input(format!("row {} breaks lexicographic order", n + 2));
            }
        }
        rows.push(vals);
    }
    if rows.is_empty() {
        return input("density file has no rows");
    }
    let mut cells = Vec::with_capacity(d);
    let mut lengths = Vec::with_capacity(d);
    let mut origin = Vec::with_capacity(d);
    let mut axes: Vec<Vec<f64>> = Vec::with_capacity(d);
    for a in 0..d {
        let mut xs: Vec<f64> = rows.iter().map(|r| r[a]).collect();
        xs.sort_by(|p, q| p.partial_cmp(q).unwrap());
        xs.dedup();
        let h = if xs.len() > 1 { xs[1] - xs[0] } else { 1.0 };
        for w in xs.windows(2) {
            if ((w[1] - w[0]) - h).abs() > 1e-9 * h.abs().max(1.0) {
                return input(format!("axis {a} is not uniformly spaced"));
            }
        }
        cells.push(xs.len());
        lengths.push(h * xs.len() as f64);
        origin.push(xs[0] - 0.5 * h);
        axes.push(xs);
    }
    let grid = Grid::with_origin(cells, lengths, origin, boundary)?;
    if rows.len() != grid.len() {
        return input(format!("{} rows for a {}-cell grid", rows.len(), grid.len()));
    }
    let values: Vec<f64> = rows.iter().map(|r| r[d]).collect();
    if let Some(r) = rows.iter().find(|r| r[d] < 0.0) {
        return input(format!("negative density at {:?}", &r[..d]));
    }
    DiscreteDensity::from_values(grid, &values)
}

/// Writes a density in the CSV layout read by [`parse_density_csv`].
pub fn density_to_csv(rho: &DiscreteDensity) -> String {
    let d = rho.grid.dim();
    let mut out = String::from(["x,rho", "x,y,rho", "x,y,z,rho"][d - 1]);
    out.push('\n');
    for (i, v) in rho.values().iter().enumerate() {
        for x in rho.grid.center(i) {
            out.push_str(&format!("{x:?},"));
        }
        out.push_str(&format!("{v:?}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn midpoint_masses() {
        let g = Grid::line(3, 3.0, Boundary::Open).unwrap();
        let rho = density_from_function(&g, |_| 1.0).unwrap();
        assert_eq!(rho.masses, vec![1.0, 1.0, 1.0]);
        let g = Grid::line(2, 1.0, Boundary::Open).unwrap();
        let rho = density_from_function(&g, |x| 2.0 * x[0]).unwrap();
        assert_relative_eq!(rho.masses[0], 0.25);
        assert_relative_eq!(rho.masses[1], 0.75);
        assert!(density_from_function(&g, |x| x[0] - 0.5).is_err());
    }

    #[test]
    fn rescale_uniform() {
        let g = Grid::line(4, 2.0, Boundary::Open).unwrap();
        let rho = density_from_function(&g, |_| 1.0).unwrap();
        let r2 = rescale_density(&rho, 2.0).unwrap();
        assert_relative_eq!(r2.grid.lengths[0], 1.0);
        for v in r2.values() {
            assert_relative_eq!(v, 2.0, epsilon = 1e-14);
        }
        assert!(rescale_density(&rho, 0.0).is_err());
    }

    #[test]
    fn index_round_trip() {
        let g = Grid::new(vec![3, 4, 5], vec![1.0, 2.0, 3.0], Boundary::Open).unwrap();
        for i in 0..g.len() {
            assert_eq!(g.linear_index(&g.multi_index(i)), i);
        }
    }

    #[test]
    fn kernel_matrix_examples() {
        let g = Grid::line(2, 2.0, Boundary::Open).unwrap();
        let k = kernel_matrix(&g, &InteractionKernel::Riesz { s: 0.5 }).unwrap();
        assert_relative_eq!(k[(0, 1)], 1.0);
        assert_relative_eq!(k[(0, 0)], 8.0 / 3.0, epsilon = 1e-14);
        assert!(kernel_matrix(&g, &InteractionKernel::Riesz { s: 1.0 }).is_err());
        let p = pair_cost_matrix(&g, &InteractionKernel::Riesz { s: 1.0 }).unwrap();
        assert_eq!(p[(0, 1)], 1.0);
        assert!(p[(0, 0)].is_infinite());
    }

    #[test]
    fn quadrature_self_average_matches_closed_form_1d() {
        let q = cell_pair_integral(&[0.7], &InteractionKernel::Riesz { s: 0.5 }) / 0.49;
        assert_relative_eq!(q, cell_self_average(&[0.7], &InteractionKernel::Riesz { s: 0.5 }), epsilon = 1e-12);
    }

    #[test]
    fn lattices_have_unit_covolume() {
        for n in [LatticeName::Z1, LatticeName::Z2, LatticeName::Z3, LatticeName::BCC, LatticeName::FCC, LatticeName::TRI] {
            assert_relative_eq!(Lattice::new(n).covolume(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn csv_round_trip() {
        let g = Grid::with_origin(vec![3, 2], vec![1.5, 1.0], vec![-0.5, 0.0], Boundary::Open).unwrap();
        let rho = density_from_function(&g, |x| 1.0 + x[0] * x[0] + x[1]).unwrap();
        let back = parse_density_csv(&density_to_csv(&rho), Boundary::Open).unwrap();
        assert_eq!(back.grid.cells, rho.grid.cells);
        for (a, b) in back.masses.iter().zip(&rho.masses) {
            assert_relative_eq!(a, b, epsilon = 1e-14);
        }
    }
}
