//! Damped Newton minimization on the grid unknowns.
//!
//! The Jacobian is regularized (`|G|^2 -> |G|^2 + eps^2` in the edge
//! coefficients) while the gradient stays exact, so converged iterates solve
//! the unregularized equations. A stalled line search raises `eps` by three
//! decades, which turns the step into a Laplacian-preconditioned descent.

use crate::linalg::SymBanded;

pub(crate) trait Functional {
    fn len(&self) -> usize;
    fn value(&self, u: &[f64]) -> f64;
    /// Gradient of `value`.
    fn gradient(&self, u: &[f64], out: &mut [f64]);
    fn hessian(&self, u: &[f64], eps: f64, out: &mut SymBanded);
    fn empty_hessian(&self) -> SymBanded;
    /// The reported residual norm for a given gradient.
    fn residual_norm(&self, grad: &[f64]) -> f64;
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct NewtonSettings {
    pub tol: f64,
    pub max_iter: usize,
    pub eps_jacobian: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct NewtonOutcome {
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

const MAX_STALLS: usize = 4;
const ARMIJO: f64 = 1e-4;

pub(crate) fn minimize<F: Functional>(
    f: &F,
    u: &mut Vec<f64>,
    settings: NewtonSettings,
) -> NewtonOutcome {
    let n = f.len();
    let mut grad = vec![0.0; n];
    let mut trial_grad = vec![0.0; n];
    let mut dir = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut hess = f.empty_hessian();

    f.gradient(u, &mut grad);
    let mut residual = f.residual_norm(&grad);
    let mut value = f.value(u);
    let mut stalls = 0usize;
    let mut eps = settings.eps_jacobian;
    let mut iterations = 0;

    for it in 0..settings.max_iter {
        iterations = it;
        if residual <= settings.tol {
            return NewtonOutcome {
                residual,
                iterations: it,
                converged: true,
            };
        }

        hess.clear();
        f.hessian(u, eps, &mut hess);
        let Some(chol) = factor_with_shift(&hess) else {
            break;
        };
        dir.iter_mut().zip(&grad).for_each(|(d, g)| *d = -g);
        chol.solve_in_place(&mut dir);
        let slope: f64 = dir.iter().zip(&grad).map(|(d, g)| d * g).sum();
        if !(slope < 0.0) {
            break;
        }

        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..50 {
            trial
                .iter_mut()
                .zip(u.iter().zip(&dir))
                .for_each(|(t, (x, d))| *t = x + alpha * d);
            let tv = f.value(&trial);
            let armijo = tv <= value + ARMIJO * alpha * slope;
            let mut resid_ok = false;
            if !armijo && alpha == 1.0 && tv.is_finite() {
                // Close to the solution the energy decrease drowns in
                // round-off; accept a full step that halves the residual.
                f.gradient(&trial, &mut trial_grad);
                resid_ok = f.residual_norm(&trial_grad) < 0.5 * residual;
            }
            if armijo || resid_ok {
                std::mem::swap(u, &mut trial);
                value = tv;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }

        if accepted {
            f.gradient(u, &mut grad);
            residual = f.residual_norm(&grad);
            if eps > settings.eps_jacobian {
                eps = (eps * 1e-3).max(settings.eps_jacobian);
            }
        } else {
            stalls += 1;
            if stalls > MAX_STALLS {
                break;
            }
            eps = (eps * 1e3).max(1e-6);
        }
        if !value.is_finite() {
            break;
        }
    }

    NewtonOutcome {
        residual,
        iterations: iterations + 1,
        converged: residual <= settings.tol,
    }
}

/// Cholesky with a growing diagonal shift when the matrix is not positive
/// definite; the shifted direction is still a descent direction.
fn factor_with_shift(h: &SymBanded) -> Option<crate::linalg::BandedCholesky> {
    if let Ok(c) = h.clone().cholesky() {
        return Some(c);
    }
    let scale = (0..h.len()).map(|i| h.diag(i).abs()).fold(0.0, f64::max).max(1e-300);
    let mut shift = 1e-10 * scale;
    for _ in 0..30 {
        let mut shifted = h.clone();
        for i in 0..h.len() {
            shifted.add_diagonal(i, shift);
        }
        if let Ok(c) = shifted.cholesky() {
            return Some(c);
        }
        shift *= 10.0;
    }
    None
}
