//! Uniform rectilinear grids on the unit interval and the unit square.
//!
//! Only interior nodes carry values. The homogeneous Dirichlet boundary is
//! implicit: every stencil that reaches past the last interior node reads a
//! zero. Interior nodes are numbered with the first axis running fastest,
//! `k = i + nx * j`.

use crate::error::{Error, Result};
use crate::stencil::EdgeStencil;

/// A uniform grid on `(0,1)` or `(0,1)^2` with `h = 1/(n+1)` per axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Grid {
    dim: usize,
    counts: [usize; 2],
}

impl Grid {
    /// Smallest accepted number of interior nodes per axis.
    pub const MIN_NODES: usize = 3;

    pub fn new(dim: usize, counts: &[usize]) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::Config(format!("dim must be 1 or 2, got {dim}")));
        }
        if counts.len() != dim {
            return Err(Error::Config(format!(
                "expected {dim} node counts, got {}",
                counts.len()
            )));
        }
        if let Some(&n) = counts.iter().find(|&&n| n < Self::MIN_NODES) {
            return Err(Error::Config(format!(
                "each axis needs at least {} interior nodes, got {n}",
                Self::MIN_NODES
            )));
        }
        let mut c = [1, 1];
        c[..dim].copy_from_slice(counts);
        Ok(Self { dim, counts: c })
    }

    pub fn line(n: usize) -> Result<Self> {
        Self::new(1, &[n])
    }

    pub fn square(nx: usize, ny: usize) -> Result<Self> {
        Self::new(2, &[nx, ny])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Interior node count along `axis`.
    pub fn count(&self, axis: usize) -> usize {
        self.counts[axis]
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts[..self.dim]
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        1.0 / (self.counts[axis] + 1) as f64
    }

    /// Volume of the cell attached to one node, `h^dim`.
    pub fn cell_volume(&self) -> f64 {
        (0..self.dim).map(|a| self.spacing(a)).product()
    }

    pub fn len(&self) -> usize {
        self.counts[0] * self.counts[1]
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i + self.counts[0] * j
    }

    /// Physical coordinates of interior node `k`; the second entry is 0 in 1D.
    pub fn coords(&self, k: usize) -> [f64; 2] {
        let i = k % self.counts[0];
        let j = k / self.counts[0];
        let x = (i + 1) as f64 * self.spacing(0);
        let y = if self.dim == 2 {
            (j + 1) as f64 * self.spacing(1)
        } else {
            0.0
        };
        [x, y]
    }

    pub(crate) fn stencil(&self) -> EdgeStencil {
        EdgeStencil::new(self)
    }
}

/// Values on the interior nodes of a [`Grid`]; the boundary value is 0.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    pub(crate) values: Vec<f64>,
}

impl GridFunction {
    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Self {
            grid,
            values: vec![c; grid.len()],
        }
    }

    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidInput(format!(
                "grid has {} interior nodes but {} values were given",
                grid.len(),
                values.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite value {} at node {k}",
                values[k]
            )));
        }
        Ok(Self { grid, values })
    }

    /// Samples `f` at the interior node coordinates.
    pub fn from_fn(grid: Grid, f: impl Fn([f64; 2]) -> f64) -> Self {
        let values = (0..grid.len()).map(|k| f(grid.coords(k))).collect();
        Self { grid, values }
    }

    /// Product of `sin(pi x_axis)` over the axes: positive inside, zero on the boundary.
    pub fn sine_bump(grid: Grid) -> Self {
        let dim = grid.dim();
        Self::from_fn(grid, |x| {
            (0..dim)
                .map(|a| (std::f64::consts::PI * x[a]).sin())
                .product()
        })
    }

    pub(crate) fn from_raw(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.map(|v| v * c)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_raw(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    /// Nodewise `f(x, value)`.
    pub fn map_with_coords(&self, f: impl Fn([f64; 2], f64) -> f64) -> Self {
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(k, &v)| f(self.grid.coords(k), v))
            .collect();
        Self::from_raw(self.grid, values)
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(self.grid, other.grid, "grid mismatch");
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Self::from_raw(self.grid, values)
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Quadrature inner product `h^dim * sum f_i g_i`.
    pub fn dot(&self, other: &Self) -> f64 {
        assert_eq!(self.grid, other.grid, "grid mismatch");
        self.grid.cell_volume()
            * self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a * b)
                .sum::<f64>()
    }

    /// `max |f - g|` over interior nodes.
    pub fn sup_distance(&self, other: &Self) -> f64 {
        assert_eq!(self.grid, other.grid, "grid mismatch");
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Sup-norm over interior nodes.
pub fn norm_sup(f: &GridFunction) -> f64 {
    f.values.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Discrete `L^q` norm `(h^dim * sum |f_i|^q)^(1/q)`.
pub fn norm_lq(f: &GridFunction, q: f64) -> Result<f64> {
    if !(q > 1.0) {
        return Err(Error::InvalidInput(format!("L^q norm needs q > 1, got {q}")));
    }
    let s: f64 = f.values.iter().map(|v| v.abs().powf(q)).sum();
    Ok((s * f.grid.cell_volume()).powf(1.0 / q))
}

/// `L^2` norm, the one used for residuals throughout the crate.
pub fn norm_l2(f: &GridFunction) -> f64 {
    l2_of_slice(&f.values, f.grid.cell_volume())
}

pub(crate) fn l2_of_slice(v: &[f64], cell_volume: f64) -> f64 {
    (v.iter().map(|x| x * x).sum::<f64>() * cell_volume).sqrt()
}

/// Discrete gradient seminorm `(sum_edges w_e |grad f|_e^p)^(1/p)`.
///
/// Edges include the ones touching the boundary. In 2D the edge gradient
/// combines the edge-normal difference with the average of the four
/// adjacent tangential differences, and each edge family carries half of
/// the cell volume, so both families together integrate `|grad f|^p` once.
pub fn seminorm_grad_p(f: &GridFunction, p: f64) -> Result<f64> {
    check_exponent(p)?;
    Ok(f.grid.stencil().p_sum(&f.values, p).powf(1.0 / p))
}

pub(crate) fn check_exponent(p: f64) -> Result<()> {
    if p.is_finite() && p >= 2.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("exponent p must be >= 2, got {p}")))
    }
}
