//! Piecewise constant gradients shared by the seminorm, the energy and the
//! p-Laplacian.
//!
//! In 1D every edge between two grid points (boundary points included)
//! carries the forward difference. In 2D every cell is split into two
//! triangles along each diagonal and each triangle carries the gradient of
//! the linear interpolant, so the two triangulations are averaged. Either
//! way a piece `e` has a gradient `G_e u = (first, second)` linear in the
//! interior values, and the gradient energy is `sum_e w_e |G_e u|^p / p`.
//! The discrete p-Laplacian is minus its derivative divided by `h^dim`, so
//! the operator and the energy are exactly compatible. For `p = 2` both
//! reduce to the standard three- and five-point Laplacians.

use crate::grid::Grid;
use crate::linalg::SymBanded;

#[derive(Debug, Clone, Copy)]
struct Edge {
    n_normal: u8,
    n_tangential: u8,
    normal_nodes: [usize; 2],
    normal_coefs: [f64; 2],
    tangential_nodes: [usize; 4],
    tangential_coefs: [f64; 4],
}

impl Edge {
    fn normal(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        (0..self.n_normal as usize).map(|i| (self.normal_nodes[i], self.normal_coefs[i]))
    }

    fn tangential(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        (0..self.n_tangential as usize)
            .map(|i| (self.tangential_nodes[i], self.tangential_coefs[i]))
    }

    #[inline]
    fn components(&self, u: &[f64]) -> (f64, f64) {
        let n = self.normal().map(|(k, c)| c * u[k]).sum();
        let t = self.tangential().map(|(k, c)| c * u[k]).sum();
        (n, t)
    }
}

#[derive(Debug, Clone)]
pub(crate) struct EdgeStencil {
    edges: Vec<Edge>,
    weight: f64,
    len: usize,
    bandwidth: usize,
}

struct EdgeBuilder {
    normal: Vec<(usize, f64)>,
    tangential: Vec<(usize, f64)>,
}

impl EdgeBuilder {
    fn finish(self) -> Edge {
        let mut e = Edge {
            n_normal: self.normal.len() as u8,
            n_tangential: self.tangential.len() as u8,
            normal_nodes: [0; 2],
            normal_coefs: [0.0; 2],
            tangential_nodes: [0; 4],
            tangential_coefs: [0.0; 4],
        };
        for (i, (k, c)) in self.normal.into_iter().enumerate() {
            e.normal_nodes[i] = k;
            e.normal_coefs[i] = c;
        }
        for (i, (k, c)) in self.tangential.into_iter().enumerate() {
            e.tangential_nodes[i] = k;
            e.tangential_coefs[i] = c;
        }
        e
    }
}

impl EdgeStencil {
    pub(crate) fn new(grid: &Grid) -> Self {
        if grid.dim() == 1 {
            Self::new_1d(grid)
        } else {
            Self::new_2d(grid)
        }
    }

    fn new_1d(grid: &Grid) -> Self {
        let n = grid.count(0);
        let h = grid.spacing(0);
        // edge e joins points e-1 and e in interior numbering; -1 and n are boundary
        let edges = (0..=n)
            .map(|e| {
                let mut normal = Vec::with_capacity(2);
                if e >= 1 {
                    normal.push((e - 1, -1.0 / h));
                }
                if e < n {
                    normal.push((e, 1.0 / h));
                }
                EdgeBuilder {
                    normal,
                    tangential: Vec::new(),
                }
                .finish()
            })
            .collect();
        Self {
            edges,
            weight: h,
            len: n,
            bandwidth: 1,
        }
    }

    fn new_2d(grid: &Grid) -> Self {
        let (nx, ny) = (grid.count(0), grid.count(1));
        let (hx, hy) = (grid.spacing(0), grid.spacing(1));
        let node = |i: isize, j: isize| -> Option<usize> {
            (i >= 0 && j >= 0 && (i as usize) < nx && (j as usize) < ny)
                .then(|| i as usize + nx * j as usize)
        };
        let mut edges = Vec::with_capacity(4 * (nx + 1) * (ny + 1));
        let dx = |from: Option<usize>, to: Option<usize>| [(from, -1.0 / hx), (to, 1.0 / hx)];
        let dy = |from: Option<usize>, to: Option<usize>| [(from, -1.0 / hy), (to, 1.0 / hy)];

        // Each cell [i, i+1] x [j, j+1] is cut into two triangles along either
        // diagonal; both triangulations are averaged.
        for j in -1..ny as isize {
            for i in -1..nx as isize {
                let (a, b) = (node(i, j), node(i + 1, j));
                let (c, d) = (node(i, j + 1), node(i + 1, j + 1));
                edges.push(Self::collect(&dx(a, b), &dy(b, d)));
                edges.push(Self::collect(&dx(c, d), &dy(a, c)));
                edges.push(Self::collect(&dx(a, b), &dy(a, c)));
                edges.push(Self::collect(&dx(c, d), &dy(b, d)));
            }
        }
        edges.retain(|e: &Edge| e.n_normal + e.n_tangential > 0);

        let bandwidth = edges
            .iter()
            .map(|e: &Edge| {
                let nodes: Vec<usize> = e.normal().chain(e.tangential()).map(|(k, _)| k).collect();
                let lo = nodes.iter().min().copied().unwrap_or(0);
                let hi = nodes.iter().max().copied().unwrap_or(0);
                hi - lo
            })
            .max()
            .unwrap_or(0);

        Self {
            edges,
            weight: 0.25 * hx * hy,
            len: nx * ny,
            bandwidth,
        }
    }

    fn collect(normal: &[(Option<usize>, f64)], tangential: &[(Option<usize>, f64)]) -> Edge {
        let keep = |taps: &[(Option<usize>, f64)]| -> Vec<(usize, f64)> {
            taps.iter().filter_map(|&(k, c)| k.map(|k| (k, c))).collect()
        };
        EdgeBuilder {
            normal: keep(normal),
            tangential: keep(tangential),
        }
        .finish()
    }

    #[cfg(test)]
    pub(crate) fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    /// `sum_e w_e |G_e u|^p`.
    pub(crate) fn p_sum(&self, u: &[f64], p: f64) -> f64 {
        self.edges
            .iter()
            .map(|e| {
                let (n, t) = e.components(u);
                (n * n + t * t).powf(0.5 * p)
            })
            .sum::<f64>()
            * self.weight
    }

    /// Adds `scale * d/du [sum_e w_e |G_e u|^p / p]` into `out`.
    pub(crate) fn add_gradient(&self, u: &[f64], p: f64, scale: f64, out: &mut [f64]) {
        let half = 0.5 * (p - 2.0);
        for e in &self.edges {
            let (n, t) = e.components(u);
            let g2 = n * n + t * t;
            if g2 == 0.0 && p > 2.0 {
                continue;
            }
            let s = scale * self.weight * g2.powf(half);
            for (k, c) in e.normal() {
                out[k] += s * n * c;
            }
            for (k, c) in e.tangential() {
                out[k] += s * t * c;
            }
        }
    }

    /// Per node, `scale` times the sum of the absolute terms that
    /// `add_gradient` accumulates there. Sets the round-off level.
    pub(crate) fn add_gradient_magnitude(&self, u: &[f64], p: f64, scale: f64, out: &mut [f64]) {
        let half = 0.5 * (p - 2.0);
        for e in &self.edges {
            let (n, t) = e.components(u);
            let g2 = n * n + t * t;
            if g2 == 0.0 && p > 2.0 {
                continue;
            }
            let s = scale * self.weight * g2.powf(half);
            for (k, c) in e.normal() {
                out[k] += (s * n * c).abs();
            }
            for (k, c) in e.tangential() {
                out[k] += (s * t * c).abs();
            }
        }
    }

    /// Adds `scale` times the Hessian of the gradient energy, with
    /// `|G|^2` replaced by `|G|^2 + eps^2` in the coefficients.
    pub(crate) fn add_hessian(&self, u: &[f64], p: f64, eps: f64, scale: f64, out: &mut SymBanded) {
        let eps2 = eps * eps;
        let mut taps: Vec<(usize, f64, f64)> = Vec::with_capacity(6);
        for e in &self.edges {
            let (n, t) = e.components(u);
            let r2 = n * n + t * t + eps2;
            let (s1, s2) = if p == 2.0 {
                (1.0, 0.0)
            } else if r2 == 0.0 {
                continue;
            } else {
                let s1 = r2.powf(0.5 * (p - 2.0));
                (s1, (p - 2.0) * s1 / r2)
            };
            let w = scale * self.weight;
            taps.clear();
            // (node, normal coefficient, tangential coefficient)
            for (k, c) in e.normal() {
                taps.push((k, c, 0.0));
            }
            for (k, c) in e.tangential() {
                if let Some(tap) = taps.iter_mut().find(|tap| tap.0 == k) {
                    tap.2 += c;
                } else {
                    taps.push((k, 0.0, c));
                }
            }
            for a in 0..taps.len() {
                let (ka, na, ta) = taps[a];
                let proj_a = n * na + t * ta;
                for &(kb, nb, tb) in &taps[..=a] {
                    let proj_b = n * nb + t * tb;
                    let v = w * (s1 * (na * nb + ta * tb) + s2 * proj_a * proj_b);
                    out.add(ka, kb, v);
                }
            }
        }
    }

    pub(crate) fn empty_matrix(&self) -> SymBanded {
        SymBanded::zeros(self.len, self.bandwidth)
    }
}
