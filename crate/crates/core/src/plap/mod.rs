//! The discrete p-Laplacian, the nonlinear Poisson solve `(-Delta_p)^{-1}`
//! and the energy `E(u) = (1/p) int |grad u|^p - lambda int F(x, u)`.

pub(crate) mod newton;
pub mod nonlinearity;

pub use nonlinearity::{FrozenWeight, Nonlinearity, Reaction};

use crate::error::{Error, Result};
use crate::grid::{check_exponent, l2_of_slice, Grid, GridFunction};
use crate::linalg::SymBanded;
use crate::stencil::EdgeStencil;
use newton::{Functional, NewtonSettings};

/// `|s|^(p-1) sgn(s)`.
pub fn phi_p(s: f64, p: f64) -> f64 {
    if s == 0.0 {
        0.0
    } else {
        s.abs().powf(p - 1.0).copysign(s)
    }
}

/// Iteration controls shared by the nonlinear solvers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverControls {
    /// Target for the discrete `L^2` norm of the equation residual.
    pub tol_residual: f64,
    /// Outer iteration cap (Picard, power iteration, or Newton when it is the only loop).
    pub max_iter: usize,
    /// Picard damping `alpha` in `(0, 1]`.
    pub damping: f64,
    /// Regularization used only inside Newton Jacobians.
    pub eps_jacobian: f64,
    /// Newton iteration cap for inner solves.
    pub newton_max_iter: usize,
}

impl Default for SolverControls {
    fn default() -> Self {
        Self {
            tol_residual: 1e-9,
            max_iter: 50_000,
            damping: 0.5,
            eps_jacobian: 1e-8,
            newton_max_iter: 100,
        }
    }
}

impl SolverControls {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol_residual > 0.0) {
            return Err(Error::Config("tol_residual must be positive".into()));
        }
        if self.max_iter == 0 || self.newton_max_iter == 0 {
            return Err(Error::Config("iteration caps must be positive".into()));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::Config(format!(
                "damping must lie in (0, 1], got {}",
                self.damping
            )));
        }
        if !(self.eps_jacobian >= 0.0) {
            return Err(Error::Config("eps_jacobian must be >= 0".into()));
        }
        Ok(())
    }
}

/// Smallest residual worth asking for at `u`: a multiple of machine
/// precision times the size of the terms that cancel in `Delta_p u + source`.
pub(crate) fn residual_floor(st: &EdgeStencil, grid: &Grid, u: &[f64], p: f64, source: &[f64]) -> f64 {
    let mut m: Vec<f64> = source.iter().map(|v| v.abs()).collect();
    st.add_gradient_magnitude(u, p, 1.0 / grid.cell_volume(), &mut m);
    1e3 * f64::EPSILON * l2_of_slice(&m, grid.cell_volume())
}

/// Flux-form `Delta_p f`: minus the derivative of the discrete gradient
/// energy, divided by the nodal volume. In 1D this is
/// `(phi_p(D_{i+1/2} f) - phi_p(D_{i-1/2} f)) / h`.
pub fn apply_p_laplacian(f: &GridFunction, p: f64) -> Result<GridFunction> {
    check_exponent(p)?;
    let grid = *f.grid();
    let st = grid.stencil();
    Ok(GridFunction::from_raw(grid, laplacian_values(&st, &grid, f.values(), p)))
}

pub(crate) fn laplacian_values(st: &EdgeStencil, grid: &Grid, u: &[f64], p: f64) -> Vec<f64> {
    let mut out = vec![0.0; u.len()];
    st.add_gradient(u, p, -1.0 / grid.cell_volume(), &mut out);
    out
}

/// Solution of `-Delta_p u = rhs` with its diagnostics.
#[derive(Debug, Clone)]
pub struct PoissonSolution {
    pub u: GridFunction,
    pub residual: f64,
    pub iterations: usize,
}

struct PoissonFunctional<'a> {
    st: &'a EdgeStencil,
    rhs: &'a [f64],
    p: f64,
    cell: f64,
}

impl Functional for PoissonFunctional<'_> {
    fn len(&self) -> usize {
        self.rhs.len()
    }

    fn value(&self, u: &[f64]) -> f64 {
        let lin: f64 = u.iter().zip(self.rhs).map(|(a, b)| a * b).sum();
        self.st.p_sum(u, self.p) / self.p - self.cell * lin
    }

    fn gradient(&self, u: &[f64], out: &mut [f64]) {
        for (o, r) in out.iter_mut().zip(self.rhs) {
            *o = -self.cell * r;
        }
        self.st.add_gradient(u, self.p, 1.0, out);
    }

    fn hessian(&self, u: &[f64], eps: f64, out: &mut SymBanded) {
        self.st.add_hessian(u, self.p, eps, 1.0, out);
    }

    fn empty_hessian(&self) -> SymBanded {
        self.st.empty_matrix()
    }

    fn residual_norm(&self, grad: &[f64]) -> f64 {
        l2_of_slice(grad, self.cell) / self.cell
    }
}

/// Solves `-Delta_p u = rhs`, the unique minimizer of
/// `(1/p) sum w_e |G_e u|^p - h^dim sum rhs u`.
pub fn solve_p_poisson(
    rhs: &GridFunction,
    p: f64,
    controls: &SolverControls,
) -> Result<GridFunction> {
    solve_p_poisson_from(rhs, p, controls, None).map(|s| s.u)
}

/// As [`solve_p_poisson`], optionally warm-started. The start is rescaled
/// along its ray to the best multiple before Newton begins.
pub fn solve_p_poisson_from(
    rhs: &GridFunction,
    p: f64,
    controls: &SolverControls,
    guess: Option<&GridFunction>,
) -> Result<PoissonSolution> {
    check_exponent(p)?;
    controls.validate()?;
    let grid = *rhs.grid();
    if let Some(g) = guess {
        if g.grid() != &grid {
            return Err(Error::InvalidInput("initial guess lives on another grid".into()));
        }
    }
    let st = grid.stencil();
    let cell = grid.cell_volume();
    let functional = PoissonFunctional {
        st: &st,
        rhs: rhs.values(),
        p,
        cell,
    };

    if rhs.values().iter().all(|&v| v == 0.0) {
        return Ok(PoissonSolution {
            u: GridFunction::zeros(grid),
            residual: 0.0,
            iterations: 0,
        });
    }

    let mut u = match guess {
        Some(g) if g.values().iter().any(|&v| v != 0.0) => g.values().to_vec(),
        _ => laplace_start(&st, rhs.values()),
    };
    rescale_along_ray(&st, rhs.values(), p, cell, &mut u);

    let tol = controls
        .tol_residual
        .max(residual_floor(&st, &grid, &u, p, rhs.values()));
    let outcome = newton::minimize(
        &functional,
        &mut u,
        NewtonSettings {
            tol,
            max_iter: controls.newton_max_iter.max(controls_newton_floor(p)),
            eps_jacobian: controls.eps_jacobian,
        },
    );
    if !outcome.converged {
        return Err(Error::NoConvergence {
            solver: "p-Poisson Newton",
            iterations: outcome.iterations,
            residual: outcome.residual,
        });
    }
    Ok(PoissonSolution {
        u: GridFunction::from_raw(grid, u),
        residual: outcome.residual,
        iterations: outcome.iterations,
    })
}

fn controls_newton_floor(_p: f64) -> usize {
    20
}

/// Solution of the `p = 2` problem with the same right-hand side.
fn laplace_start(st: &EdgeStencil, rhs: &[f64]) -> Vec<f64> {
    let mut a = st.empty_matrix();
    let zero = vec![0.0; rhs.len()];
    st.add_hessian(&zero, 2.0, 0.0, 1.0, &mut a);
    let mut u = rhs.to_vec();
    match a.cholesky() {
        Ok(c) => c.solve_in_place(&mut u),
        Err(_) => u.iter_mut().for_each(|v| *v = 0.0),
    }
    u
}

/// Replaces `u` by `c u` with `c` minimizing the Poisson functional on the ray.
fn rescale_along_ray(st: &EdgeStencil, rhs: &[f64], p: f64, cell: f64, u: &mut [f64]) {
    let a = st.p_sum(u, p);
    let b = cell * u.iter().zip(rhs).map(|(x, r)| x * r).sum::<f64>();
    if a > 0.0 && b > 0.0 {
        let c = (b / a).powf(1.0 / (p - 1.0));
        u.iter_mut().for_each(|v| *v *= c);
    }
}

fn check_nonnegative(f: &GridFunction, what: &str) -> Result<()> {
    if let Some(k) = f.values().iter().position(|&v| v < 0.0) {
        return Err(Error::InvalidInput(format!(
            "{what} needs a nonnegative function; value {} at node {k}",
            f.values()[k]
        )));
    }
    Ok(())
}

/// Nodal values of `F(x, f(x)) = int_0^f(x) g(x, s) s^(p-1) ds`.
pub fn big_f(g: &Nonlinearity, f: &GridFunction, p: f64) -> Result<GridFunction> {
    check_exponent(p)?;
    check_nonnegative(f, "F")?;
    Ok(f.map_with_coords(|x, v| g.primitive(x, v, p)))
}

/// `E(f) = (1/p) |f|_{1,p}^p - lambda h^dim sum F(x_i, f_i)`.
pub fn energy(f: &GridFunction, lambda: f64, g: &Nonlinearity, p: f64) -> Result<f64> {
    check_exponent(p)?;
    check_nonnegative(f, "the energy")?;
    let grid = *f.grid();
    Ok(energy_of(&grid.stencil(), &grid, f.values(), lambda, g, p))
}

/// Energy for any reaction, with the negative-argument extension.
pub(crate) fn energy_of<R: Reaction + ?Sized>(
    st: &EdgeStencil,
    grid: &Grid,
    u: &[f64],
    lambda: f64,
    reaction: &R,
    p: f64,
) -> f64 {
    st.p_sum(u, p) / p - lambda * grid.cell_volume() * primitive_sum(grid, u, reaction, p)
}

pub(crate) fn primitive_sum<R: Reaction + ?Sized>(grid: &Grid, u: &[f64], reaction: &R, p: f64) -> f64 {
    u.iter()
        .enumerate()
        .map(|(k, &v)| reaction.primitive(k, grid.coords(k), v, p))
        .sum()
}

/// Nodal `lambda g(x, u) phi_p(u)`.
pub(crate) fn reaction_values<R: Reaction + ?Sized>(
    grid: &Grid,
    u: &[f64],
    lambda: f64,
    reaction: &R,
    p: f64,
) -> Vec<f64> {
    u.iter()
        .enumerate()
        .map(|(k, &v)| lambda * reaction.coefficient(k, grid.coords(k), v) * phi_p(v, p))
        .collect()
}

/// Discrete `L^2` norm of `Delta_p u + lambda g(u) phi_p(u)`.
pub fn equilibrium_residual(u: &GridFunction, lambda: f64, g: &Nonlinearity, p: f64) -> Result<f64> {
    check_exponent(p)?;
    let grid = *u.grid();
    Ok(residual_of(&grid.stencil(), &grid, u.values(), lambda, g, p))
}

pub(crate) fn residual_of<R: Reaction + ?Sized>(
    st: &EdgeStencil,
    grid: &Grid,
    u: &[f64],
    lambda: f64,
    reaction: &R,
    p: f64,
) -> f64 {
    let lap = laplacian_values(st, grid, u, p);
    let react = reaction_values(grid, u, lambda, reaction, p);
    let r: Vec<f64> = lap.iter().zip(&react).map(|(a, b)| a + b).collect();
    l2_of_slice(&r, grid.cell_volume())
}
