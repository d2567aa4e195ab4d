//! Positive equilibria `-Delta_p u = lambda g(x, u) phi_p(u)` and the branch
//! `lambda -> e_lambda` on `(lambda_min, lambda_max)`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{check_exponent, norm_sup, seminorm_grad_p, Grid, GridFunction};
use crate::plap::{
    reaction_values, residual_floor, residual_of, solve_p_poisson_from, Nonlinearity,
    SolverControls,
};
use crate::spectral::{thresholds, Thresholds};
use crate::stencil::EdgeStencil;

/// Sup-norm below which an equilibrium counts as the trivial one.
pub const TRIVIAL_CUTOFF: f64 = 1e-6;
/// Sup-norm at which the iteration is declared to escape to infinity.
pub const ESCAPE_CAP: f64 = 1e6;

const MAX_HALVINGS: usize = 4;
const STALL_WINDOW: usize = 50;
/// Nontrivial convergence also needs the residual small relative to the
/// reaction term, so tiny non-equilibria are not accepted.
const RELATIVE_RESIDUAL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    Trivial,
    Nontrivial,
}

#[derive(Debug, Clone)]
pub struct EquilibriumResult {
    pub lambda: f64,
    pub u: GridFunction,
    pub residual: f64,
    pub iterations: usize,
    pub classification: Classification,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchSample {
    pub lambda: f64,
    pub seminorm: f64,
    pub sup_norm: f64,
    pub residual: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub struct BranchResult {
    pub samples: Vec<BranchSample>,
    pub thresholds: Thresholds,
    /// First scheduled `lambda` at which the sup-norm passed [`ESCAPE_CAP`].
    pub escaped_at: Option<f64>,
}

fn check_start(init: &GridFunction, grid: &Grid) -> Result<()> {
    if init.grid() != grid {
        return Err(Error::InvalidInput("start lives on another grid".into()));
    }
    if let Some(k) = init.values().iter().position(|&v| v < 0.0) {
        return Err(Error::InvalidInput(format!(
            "start must be nonnegative; value {} at node {k}",
            init.values()[k]
        )));
    }
    Ok(())
}

/// Multiplier `c` minimizing the energy along the ray through `u`, when the
/// minimizer is positive and finite.
fn ray_minimizer(
    st: &EdgeStencil,
    coords: &[[f64; 2]],
    volume: f64,
    u: &[f64],
    lambda: f64,
    g: &Nonlinearity,
    p: f64,
) -> Option<f64> {
    let a = st.p_sum(u, p);
    let up: Vec<f64> = u.iter().map(|v| v.max(0.0).powf(p)).collect();
    // d/dc E(c u) = c^(p-1) (a - b(c)) with b(c) = lambda h^d sum g(x, c u) u^p
    let b = |c: f64| -> f64 {
        lambda
            * volume
            * u.iter()
                .zip(&up)
                .zip(coords)
                .map(|((&v, &w), &x)| g.g(x, c * v) * w)
                .sum::<f64>()
    };
    let b_inf = lambda * volume * up.iter().zip(coords).map(|(w, &x)| g.ginf(x) * w).sum::<f64>();
    if !(a > 0.0) || a >= b(0.0) || a <= b_inf {
        return None;
    }
    let (mut lo, mut hi) = (1e-3f64.ln(), 1e3f64.ln());
    if b(lo.exp()) <= a {
        return Some(lo.exp());
    }
    if b(hi.exp()) >= a {
        return Some(hi.exp());
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if b(mid.exp()) > a {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some((0.5 * (lo + hi)).exp())
}

/// Damped Picard iteration `u <- (1 - a) u + a S(lambda g(u) phi_p(u))`,
/// `S = (-Delta_p)^{-1}`, followed each step by the rescaling of `u` to the
/// energy minimizer on its ray. The damping is halved (up to four times)
/// when the residual stops improving.
pub fn solve_equilibrium(
    lambda: f64,
    g: &Nonlinearity,
    p: f64,
    init: &GridFunction,
    controls: &SolverControls,
) -> Result<EquilibriumResult> {
    check_exponent(p)?;
    controls.validate()?;
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidInput(format!("lambda must be positive, got {lambda}")));
    }
    let grid = *init.grid();
    check_start(init, &grid)?;
    let st = grid.stencil();
    let coords: Vec<[f64; 2]> = (0..grid.len()).map(|k| grid.coords(k)).collect();
    let inner = SolverControls {
        tol_residual: controls.tol_residual * 1e-2,
        ..*controls
    };

    let mut u = init.values().to_vec();
    let mut alpha = controls.damping;
    let mut halvings = 0;
    let mut best = (f64::INFINITY, u.clone());
    let mut stale = 0;
    let mut poisson_guess: Option<GridFunction> = None;
    let mut residual = f64::INFINITY;
    let mut last_sup = 0.0;
    let mut growth_streak = 0;
    let mut iterations = 0;

    for it in 0..=controls.max_iter {
        iterations = it;
        let sup = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        growth_streak = if sup > last_sup { growth_streak + 1 } else { 0 };
        last_sup = sup;
        if !sup.is_finite() || sup > ESCAPE_CAP {
            return Err(Error::Escaped {
                sup_norm: sup,
                cap: ESCAPE_CAP,
            });
        }
        residual = residual_of(&st, &grid, &u, lambda, g, p);
        if sup < TRIVIAL_CUTOFF {
            return Ok(EquilibriumResult {
                lambda,
                u: GridFunction::from_raw(grid, u),
                residual,
                iterations: it,
                classification: Classification::Trivial,
            });
        }
        let source = reaction_values(&grid, &u, lambda, g, p);
        let tol = controls
            .tol_residual
            .max(residual_floor(&st, &grid, &u, p, &source))
            .min(RELATIVE_RESIDUAL * crate::grid::l2_of_slice(&source, grid.cell_volume()));
        if residual <= tol {
            if let Some(k) = u.iter().position(|&v| !(v > 0.0)) {
                return Err(Error::LostPositivity { node: k, value: u[k] });
            }
            return Ok(EquilibriumResult {
                lambda,
                u: GridFunction::from_raw(grid, u),
                residual,
                iterations: it,
                classification: Classification::Nontrivial,
            });
        }
        if it == controls.max_iter {
            break;
        }

        if residual < best.0 {
            best = (residual, u.clone());
            stale = 0;
        } else {
            stale += 1;
            // steady growth is divergence in progress, not oscillation
            if stale >= STALL_WINDOW && growth_streak < stale {
                if halvings == MAX_HALVINGS {
                    break;
                }
                halvings += 1;
                alpha *= 0.5;
                u.clone_from(&best.1);
                stale = 0;
                poisson_guess = None;
                continue;
            }
        }

        let rhs = GridFunction::from_raw(grid, source);
        let s = solve_p_poisson_from(&rhs, p, &inner, poisson_guess.as_ref())?;
        for (v, &w) in u.iter_mut().zip(s.u.values()) {
            *v = (1.0 - alpha) * *v + alpha * w.max(0.0);
        }
        poisson_guess = Some(s.u);
        if let Some(c) = ray_minimizer(&st, &coords, grid.cell_volume(), &u, lambda, g, p) {
            u.iter_mut().for_each(|v| *v *= c);
        }
    }
    Err(Error::NoConvergence {
        solver: "damped Picard",
        iterations,
        residual: residual.min(best.0),
    })
}

/// Largest pairwise sup-distance between the nontrivial equilibria reached
/// from `starts`. Trivial outcomes are left out of the comparison.
pub fn verify_uniqueness(
    lambda: f64,
    g: &Nonlinearity,
    p: f64,
    starts: &[GridFunction],
    controls: &SolverControls,
) -> Result<f64> {
    if starts.is_empty() {
        return Err(Error::InvalidInput("at least one start is needed".into()));
    }
    let results: Vec<EquilibriumResult> = starts
        .par_iter()
        .map(|s| solve_equilibrium(lambda, g, p, s, controls))
        .collect::<Result<_>>()?;
    let nontrivial: Vec<&GridFunction> = results
        .iter()
        .filter(|r| r.classification == Classification::Nontrivial)
        .map(|r| &r.u)
        .collect();
    let mut worst = 0.0f64;
    for (i, a) in nontrivial.iter().enumerate() {
        for b in &nontrivial[i + 1..] {
            worst = worst.max(a.sup_distance(b));
        }
    }
    Ok(worst)
}

/// Twenty-four geometric points in `[1.02 lambda_min, 0.98 lambda_max]`, or
/// `[1.02 lambda_min, 4 lambda_min]` when `lambda_max` is infinite.
pub fn default_schedule(t: &Thresholds) -> Vec<f64> {
    let lo = 1.02 * t.lambda_min;
    let hi = if t.lambda_max_is_infinite() {
        4.0 * t.lambda_min
    } else {
        0.98 * t.lambda_max
    };
    geometric_schedule(lo, hi, 24)
}

pub fn geometric_schedule(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let r = (hi / lo).ln() / (count - 1) as f64;
    (0..count).map(|k| lo * (r * k as f64).exp()).collect()
}

/// Computes the thresholds on `grid`, then continues the branch along
/// `schedule` (the default schedule when `None`).
pub fn trace_branch(
    g: &Nonlinearity,
    p: f64,
    grid: Grid,
    schedule: Option<&[f64]>,
    controls: &SolverControls,
) -> Result<BranchResult> {
    let t = thresholds(g, p, grid, controls)?;
    trace_branch_with(g, p, t, schedule, controls)
}

/// Continuation with known thresholds. The first solve starts from
/// `0.1 psi_min`, every later one from the previous equilibrium.
pub fn trace_branch_with(
    g: &Nonlinearity,
    p: f64,
    thresholds: Thresholds,
    schedule: Option<&[f64]>,
    controls: &SolverControls,
) -> Result<BranchResult> {
    let schedule = match schedule {
        Some(s) => s.to_vec(),
        None => default_schedule(&thresholds),
    };
    if schedule.is_empty() {
        return Err(Error::Config("empty lambda schedule".into()));
    }
    if schedule.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Config("lambda schedule must be strictly increasing".into()));
    }
    let (first, last) = (schedule[0], schedule[schedule.len() - 1]);
    if !(first > thresholds.lambda_min && last < thresholds.lambda_max) {
        return Err(Error::Config(format!(
            "lambda schedule [{first}, {last}] must lie inside ({}, {})",
            thresholds.lambda_min, thresholds.lambda_max
        )));
    }

    let mut seed = thresholds.psi_min.scaled(0.1);
    let mut samples = Vec::with_capacity(schedule.len());
    let mut escaped_at = None;
    for &lambda in &schedule {
        match solve_equilibrium(lambda, g, p, &seed, controls) {
            Ok(r) => {
                samples.push(BranchSample {
                    lambda,
                    seminorm: seminorm_grad_p(&r.u, p)?,
                    sup_norm: norm_sup(&r.u),
                    residual: r.residual,
                    iterations: r.iterations,
                });
                if r.classification == Classification::Nontrivial {
                    seed = r.u;
                }
            }
            Err(Error::Escaped { .. }) => {
                escaped_at = Some(lambda);
                break;
            }
            Err(e) => {
                return Err(Error::Continuation {
                    lambda,
                    source: Box::new(e),
                })
            }
        }
    }
    Ok(BranchResult {
        samples,
        thresholds,
        escaped_at,
    })
}

#[cfg(test)]
fn weak_form(u: &[f64], lambda: f64, g: &Nonlinearity, grid: &Grid, p: f64) -> Vec<f64> {
    u.iter()
        .enumerate()
        .map(|(k, &v)| lambda * g.g(grid.coords(k), v) * crate::plap::phi_p(v, p))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plap::apply_p_laplacian;

    fn setup(n: usize) -> (Grid, Nonlinearity, Thresholds) {
        let grid = Grid::line(n).unwrap();
        let g = Nonlinearity::one_plus_exp(1.0, 1.0, 1.0).unwrap();
        let t = thresholds(&g, 3.0, grid, &SolverControls::default()).unwrap();
        (grid, g, t)
    }

    #[test]
    fn below_lambda_min_is_trivial() {
        let (_, g, t) = setup(127);
        let ctl = SolverControls::default();
        let r = solve_equilibrium(0.8 * t.lambda_min, &g, 3.0, &t.psi_min.scaled(3.0), &ctl).unwrap();
        assert_eq!(r.classification, Classification::Trivial);
    }

    #[test]
    fn mid_lambda_equilibrium_is_positive_and_solves_the_equation() {
        let (_, g, t) = setup(127);
        let ctl = SolverControls::default();
        let lambda = t.mid();
        let r = solve_equilibrium(lambda, &g, 3.0, &t.psi_min.scaled(0.5), &ctl).unwrap();
        assert_eq!(r.classification, Classification::Nontrivial);
        assert!(r.u.min() > 0.0);
        let lap = apply_p_laplacian(&r.u, 3.0).unwrap();
        let react = GridFunction::from_raw(*r.u.grid(), weak_form(r.u.values(), lambda, &g, r.u.grid(), 3.0));
        assert!(crate::grid::norm_l2(&lap.add(&react)) <= ctl.tol_residual * 1.0001);
    }

    #[test]
    fn uniqueness_from_several_starts() {
        let (_, g, t) = setup(127);
        let ctl = SolverControls::default();
        let starts = vec![t.psi_min.scaled(0.5), t.psi_min.scaled(2.0), t.psi_min.scaled(20.0)];
        let d = verify_uniqueness(t.mid(), &g, 3.0, &starts, &ctl).unwrap();
        assert!(d <= 10.0 * ctl.tol_residual, "{d}");
        assert_eq!(verify_uniqueness(t.mid(), &g, 3.0, &starts[..1], &ctl).unwrap(), 0.0);
        assert_eq!(
            verify_uniqueness(0.5 * t.lambda_min, &g, 3.0, &starts, &ctl).unwrap(),
            0.0
        );
    }

    #[test]
    fn schedule_validation() {
        let (_, g, t) = setup(31);
        let ctl = SolverControls::default();
        let outside = [0.5 * t.lambda_min, t.mid()];
        assert!(matches!(
            trace_branch_with(&g, 3.0, t.clone(), Some(&outside), &ctl),
            Err(Error::Config(_))
        ));
        let unordered = [t.mid(), 1.1 * t.lambda_min];
        assert!(trace_branch_with(&g, 3.0, t.clone(), Some(&unordered), &ctl).is_err());
        let s = default_schedule(&t);
        assert_eq!(s.len(), 24);
        assert!((s[0] / t.lambda_min - 1.02).abs() < 1e-12);
        assert!((s[23] / t.lambda_max - 0.98).abs() < 1e-12);
    }

    #[test]
    fn above_lambda_max_escapes() {
        let (_, g, t) = setup(63);
        let ctl = SolverControls::default();
        let r = solve_equilibrium(1.5 * t.lambda_max, &g, 3.0, &t.psi_min.scaled(0.5), &ctl);
        assert!(matches!(r, Err(Error::Escaped { .. })), "{r:?}");
    }
}
