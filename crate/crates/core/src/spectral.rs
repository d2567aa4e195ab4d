//! Principal eigenpair of `-Delta_p psi = mu rho phi_p(psi)` and the
//! thresholds `lambda_min(g) = mu_0(g_0)`, `lambda_max(g) = mu_0(g_inf)`.

use crate::error::{Error, Result};
use crate::grid::{check_exponent, norm_sup, Grid, GridFunction};
use crate::plap::{
    laplacian_values, phi_p, residual_floor, solve_p_poisson_from, Nonlinearity, SolverControls,
};
use crate::grid::l2_of_slice;
use crate::stencil::EdgeStencil;

/// A nonnegative weight with at least one positive node.
#[derive(Debug, Clone, PartialEq)]
pub struct Weight {
    values: GridFunction,
}

impl Weight {
    pub fn new(values: GridFunction) -> Result<Self> {
        if let Some(k) = values.values().iter().position(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "weight must be finite and nonnegative; value {} at node {k}",
                values.values()[k]
            )));
        }
        if !values.values().iter().any(|&v| v > 0.0) {
            return Err(Error::InvalidInput("weight vanishes at every node".into()));
        }
        Ok(Self { values })
    }

    pub fn constant(grid: Grid, c: f64) -> Result<Self> {
        Self::new(GridFunction::constant(grid, c))
    }

    /// `g_0(x) = g(x, 0)` at the nodes.
    pub fn g_zero(g: &Nonlinearity, grid: Grid) -> Result<Self> {
        Self::new(GridFunction::from_fn(grid, |x| g.g0(x)))
    }

    /// `g_inf(x)` at the nodes; `None` when it vanishes identically.
    pub fn g_infinity(g: &Nonlinearity, grid: Grid) -> Result<Option<Self>> {
        let f = GridFunction::from_fn(grid, |x| g.ginf(x));
        if f.values().iter().all(|&v| v == 0.0) {
            Ok(None)
        } else {
            Self::new(f).map(Some)
        }
    }

    /// `g_delta(x) = g(x, delta)` at the nodes.
    pub fn g_delta(g: &Nonlinearity, grid: Grid, delta: f64) -> Result<Self> {
        if !(delta >= 0.0) {
            return Err(Error::InvalidInput(format!("delta must be >= 0, got {delta}")));
        }
        Self::new(GridFunction::from_fn(grid, |x| g.g(x, delta)))
    }

    pub fn values(&self) -> &GridFunction {
        &self.values
    }

    pub fn grid(&self) -> &Grid {
        self.values.grid()
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.values.scaled(c))
    }
}

#[derive(Debug, Clone)]
pub struct EigenResult {
    pub mu0: f64,
    /// Positive, with sup-norm 1.
    pub psi0: GridFunction,
    pub residual: f64,
    pub iterations: usize,
}

/// `lambda_max` is `f64::INFINITY` when `g_inf` vanishes identically.
#[derive(Debug, Clone)]
pub struct Thresholds {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub psi_min: GridFunction,
    pub psi_max: Option<GridFunction>,
}

impl Thresholds {
    pub fn lambda_max_is_infinite(&self) -> bool {
        self.lambda_max.is_infinite()
    }

    /// `(lambda_min + lambda_max) / 2`, or `2 lambda_min` when `lambda_max` is infinite.
    pub fn mid(&self) -> f64 {
        if self.lambda_max_is_infinite() {
            2.0 * self.lambda_min
        } else {
            0.5 * (self.lambda_min + self.lambda_max)
        }
    }
}

/// `|w|_{1,p}^p / (h^dim sum rho |w|^p)`.
pub fn rayleigh_quotient(w: &GridFunction, rho: &Weight, p: f64) -> Result<f64> {
    check_exponent(p)?;
    if w.grid() != rho.grid() {
        return Err(Error::InvalidInput("function and weight live on different grids".into()));
    }
    let grid = *w.grid();
    Ok(quotient(&grid, w.values(), rho.values.values(), p)?)
}

fn quotient(grid: &Grid, w: &[f64], rho: &[f64], p: f64) -> Result<f64> {
    let den = grid.cell_volume()
        * w.iter()
            .zip(rho)
            .map(|(v, r)| r * v.abs().powf(p))
            .sum::<f64>();
    if !(den > 0.0) {
        return Err(Error::InvalidInput("Rayleigh quotient has a zero denominator".into()));
    }
    Ok(grid.stencil().p_sum(w, p) / den)
}

/// Residual `|Delta_p psi + mu rho phi_p(psi)|_2`.
fn eigen_residual(st: &EdgeStencil, grid: &Grid, psi: &[f64], rho: &[f64], mu: f64, p: f64) -> f64 {
    let mut r = laplacian_values(st, grid, psi, p);
    for ((ri, &v), &w) in r.iter_mut().zip(psi).zip(rho) {
        *ri += mu * w * phi_p(v, p);
    }
    l2_of_slice(&r, grid.cell_volume())
}

const MU_RELATIVE_CHANGE: f64 = 1e-8;

/// Principal eigenpair by inverse power iteration in the positive cone.
pub fn principal_eigenvalue(rho: &Weight, p: f64, controls: &SolverControls) -> Result<EigenResult> {
    principal_eigenvalue_from(rho, p, controls, None)
}

/// As [`principal_eigenvalue`], starting from `guess` (positive) instead
/// of the sine bump.
pub fn principal_eigenvalue_from(
    rho: &Weight,
    p: f64,
    controls: &SolverControls,
    guess: Option<&GridFunction>,
) -> Result<EigenResult> {
    check_exponent(p)?;
    controls.validate()?;
    let grid = *rho.grid();
    let w = rho.values.values();

    let mut psi = match guess {
        Some(g) => {
            if g.grid() != &grid || g.min() <= 0.0 {
                return Err(Error::InvalidInput(
                    "eigen start must be positive on the weight's grid".into(),
                ));
            }
            g.scaled(1.0 / norm_sup(g))
        }
        None => GridFunction::sine_bump(grid),
    };
    let mut mu = quotient(&grid, psi.values(), w, p)?;
    let st = grid.stencil();
    let inner = SolverControls {
        tol_residual: controls.tol_residual * 1e-3,
        ..*controls
    };
    let mut poisson_guess: Option<GridFunction> = None;
    let mut residual = f64::INFINITY;

    for it in 1..=controls.max_iter {
        let rhs = GridFunction::from_raw(
            grid,
            psi.values().iter().zip(w).map(|(&v, &r)| r * phi_p(v, p)).collect(),
        );
        let sol = solve_p_poisson_from(&rhs, p, &inner, poisson_guess.as_ref())?;
        let top = norm_sup(&sol.u);
        if !(top > 0.0) {
            return Err(Error::LostPositivity { node: 0, value: 0.0 });
        }
        let next = sol.u.scaled(1.0 / top);
        poisson_guess = Some(sol.u);

        if let Some((node, &value)) = next
            .values()
            .iter()
            .enumerate()
            .find(|(_, &v)| !(v > 0.0))
        {
            return Err(Error::LostPositivity { node, value });
        }

        let mu_next = quotient(&grid, next.values(), w, p)?;
        let change = (mu_next - mu).abs() / mu_next;
        psi = next;
        mu = mu_next;
        residual = eigen_residual(&st, &grid, psi.values(), w, mu, p);
        let source: Vec<f64> = psi.values().iter().zip(w).map(|(&v, &r)| mu * r * phi_p(v, p)).collect();
        let tol = controls
            .tol_residual
            .max(residual_floor(&st, &grid, psi.values(), p, &source));
        if residual <= tol && change < MU_RELATIVE_CHANGE {
            return Ok(EigenResult {
                mu0: mu,
                psi0: psi,
                residual,
                iterations: it,
            });
        }
    }
    Err(Error::NoConvergence {
        solver: "inverse power iteration",
        iterations: controls.max_iter,
        residual,
    })
}

/// `lambda_min = mu_0(g_0)` and `lambda_max = mu_0(g_inf)` (infinite when `g_inf = 0`).
pub fn thresholds(
    g: &Nonlinearity,
    p: f64,
    grid: Grid,
    controls: &SolverControls,
) -> Result<Thresholds> {
    let low = principal_eigenvalue(&Weight::g_zero(g, grid)?, p, controls)?;
    let (lambda_max, psi_max) = match Weight::g_infinity(g, grid)? {
        Some(w) => {
            let high = principal_eigenvalue_from(&w, p, controls, Some(&low.psi0))?;
            (high.mu0, Some(high.psi0))
        }
        None => (f64::INFINITY, None),
    };
    if !(low.mu0 < lambda_max) {
        return Err(Error::Integrity(format!(
            "lambda_min = {} is not below lambda_max = {lambda_max}",
            low.mu0
        )));
    }
    Ok(Thresholds {
        lambda_min: low.mu0,
        lambda_max,
        psi_min: low.psi0,
        psi_max,
    })
}
