//! Oracles and fixtures shared by the integration tests. Nothing here calls
//! into the solvers under test.

#![allow(dead_code)]

use std::f64::consts::PI;

use plapflow::{Grid, GridFunction, Nonlinearity};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn baseline_g() -> Nonlinearity {
    Nonlinearity::one_plus_exp(1.0, 1.0, 1.0).unwrap()
}

pub fn line(n: usize) -> Grid {
    Grid::line(n).unwrap()
}

/// `|s|^(q-2) s`.
fn phi(s: f64, q: f64) -> f64 {
    s.abs().powf(q - 2.0) * s
}

/// Shooting for `(phi_p(psi'))' + mu phi_p(psi) = 0`, `psi(0) = 0`,
/// `psi'(0) = 1`: the first zero of `psi` in `(0, inf)`, integrated with
/// RK4 in the variables `(psi, w = phi_p(psi'))`.
fn first_zero(mu: f64, p: f64, steps: usize) -> f64 {
    let q = p / (p - 1.0);
    let rhs = |y: [f64; 2]| [phi(y[1], q), -mu * phi(y[0], p)];
    let dt = 2.0 / steps as f64;
    let mut y = [0.0, 1.0];
    let mut t = 0.0;
    for _ in 0..steps {
        let k1 = rhs(y);
        let k2 = rhs([y[0] + 0.5 * dt * k1[0], y[1] + 0.5 * dt * k1[1]]);
        let k3 = rhs([y[0] + 0.5 * dt * k2[0], y[1] + 0.5 * dt * k2[1]]);
        let k4 = rhs([y[0] + dt * k3[0], y[1] + dt * k3[1]]);
        let next = [
            y[0] + dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
            y[1] + dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        ];
        if next[0] <= 0.0 && t > 0.0 {
            // linear interpolation of the crossing
            return t + dt * y[0] / (y[0] - next[0]);
        }
        y = next;
        t += dt;
    }
    f64::INFINITY
}

/// `mu_0` of `-Delta_p` on `(0, 1)` with unit weight, by bisection on the
/// shooting parameter.
pub fn shooting_eigenvalue(p: f64) -> f64 {
    let (mut lo, mut hi) = (1.0f64, 1e4f64);
    for _ in 0..80 {
        let mid = (lo * hi).sqrt();
        if first_zero(mid, p, 400_000) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo * hi).sqrt()
}

/// `(p - 1) (2 pi / (p sin(pi / p)))^p`, the closed form for the same problem.
pub fn closed_form_eigenvalue(p: f64) -> f64 {
    (p - 1.0) * (2.0 * PI / (p * (PI / p).sin())).powf(p)
}

fn gauss_legendre_8() -> ([f64; 8], [f64; 8]) {
    (
        [
            -0.960_289_856_497_536_2,
            -0.796_666_477_413_626_7,
            -0.525_532_409_916_329,
            -0.183_434_642_495_649_8,
            0.183_434_642_495_649_8,
            0.525_532_409_916_329,
            0.796_666_477_413_626_7,
            0.960_289_856_497_536_2,
        ],
        [
            0.101_228_536_290_376_3,
            0.222_381_034_453_374_5,
            0.313_706_645_877_887_3,
            0.362_683_783_378_362,
            0.362_683_783_378_362,
            0.313_706_645_877_887_3,
            0.222_381_034_453_374_5,
            0.101_228_536_290_376_3,
        ],
    )
}

/// Composite 8-point Gauss rule on `[0, 1]` with `panels` panels.
fn unit_rule(panels: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre_8();
    let h = 1.0 / panels as f64;
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    for k in 0..panels {
        for i in 0..8 {
            nodes.push(h * (k as f64 + 0.5 * (x[i] + 1.0)));
            weights.push(0.5 * h * w[i]);
        }
    }
    (nodes, weights)
}

/// Ritz upper bound for `mu_0` of `-Delta_p` on the unit square with unit
/// weight: the Rayleigh quotient minimized over `sum c_ij sin(i pi x) sin(j pi y)`
/// with odd `i, j <= max_mode`, integrals by composite Gauss quadrature.
pub fn ritz_eigenvalue_2d(p: f64, max_mode: usize) -> f64 {
    let modes: Vec<(usize, usize)> = (1..=max_mode)
        .step_by(2)
        .flat_map(|i| (1..=max_mode).step_by(2).map(move |j| (i, j)))
        .collect();
    let m = modes.len();
    let (xs, ws) = unit_rule(24);
    let nq = xs.len();
    // per axis tables of sin(k pi x) and k pi cos(k pi x)
    let table = |f: &dyn Fn(f64, f64) -> f64| -> Vec<Vec<f64>> {
        (0..=max_mode)
            .map(|k| xs.iter().map(|&x| f(k as f64 * PI, x)).collect())
            .collect()
    };
    let s = table(&|k, x| (k * x).sin());
    let c = table(&|k, x| k * (k * x).cos());

    let evaluate = |coef: &[f64], grad: &mut [f64]| -> f64 {
        let mut top = 0.0;
        let mut bottom = 0.0;
        let mut dtop = vec![0.0; m];
        let mut dbottom = vec![0.0; m];
        for a in 0..nq {
            for b in 0..nq {
                let w = ws[a] * ws[b];
                let (mut u, mut ux, mut uy) = (0.0, 0.0, 0.0);
                for (k, &(i, j)) in modes.iter().enumerate() {
                    u += coef[k] * s[i][a] * s[j][b];
                    ux += coef[k] * c[i][a] * s[j][b];
                    uy += coef[k] * s[i][a] * c[j][b];
                }
                let g2 = ux * ux + uy * uy;
                let gp = g2.powf(0.5 * p);
                let gpm2 = g2.powf(0.5 * p - 1.0);
                let up = u.abs().powf(p);
                top += w * gp;
                bottom += w * up;
                let fu = phi(u, p);
                for (k, &(i, j)) in modes.iter().enumerate() {
                    dtop[k] += w * p * gpm2 * (ux * c[i][a] * s[j][b] + uy * s[i][a] * c[j][b]);
                    dbottom[k] += w * p * fu * s[i][a] * s[j][b];
                }
            }
        }
        let r = top / bottom;
        for k in 0..m {
            grad[k] = (dtop[k] - r * dbottom[k]) / bottom;
        }
        r
    };

    let mut coef = vec![0.0; m];
    coef[0] = 1.0;
    let mut grad = vec![0.0; m];
    let mut r = evaluate(&coef, &mut grad);
    let mut step = 1e-3;
    for _ in 0..400 {
        let norm: f64 = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if norm < 1e-10 {
            break;
        }
        let mut trial_grad = vec![0.0; m];
        loop {
            let trial: Vec<f64> = coef.iter().zip(&grad).map(|(c, g)| c - step * g).collect();
            let rt = evaluate(&trial, &mut trial_grad);
            if rt < r {
                coef = trial;
                r = rt;
                grad.clone_from(&trial_grad);
                step *= 1.5;
                break;
            }
            step *= 0.5;
            if step < 1e-14 {
                return r;
            }
        }
    }
    r
}

/// Nonnegative function on the grid: a sine bump perturbed by random
/// nodal factors in `[0.5, 1.5)`, scaled by `amp`.
pub fn random_bump(grid: Grid, rng: &mut ChaCha8Rng, amp: f64) -> GridFunction {
    let values: Vec<f64> = GridFunction::sine_bump(grid)
        .values()
        .iter()
        .map(|v| amp * v * (0.5 + rng.gen::<f64>()))
        .collect();
    GridFunction::from_values(grid, values).unwrap()
}

/// Random signed nodal values with a few random low modes mixed in.
pub fn random_signed(grid: Grid, rng: &mut ChaCha8Rng) -> GridFunction {
    let modes: Vec<(f64, f64, f64)> = (0..4)
        .map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(1..6) as f64, rng.gen_range(1..6) as f64))
        .collect();
    let noise = rng.gen_range(0.0..0.5);
    let dim = grid.dim();
    let values: Vec<f64> = (0..grid.len())
        .map(|k| {
            let x = grid.coords(k);
            let smooth: f64 = modes
                .iter()
                .map(|&(a, i, j)| {
                    let sy = if dim == 2 { (j * PI * x[1]).sin() } else { 1.0 };
                    a * (i * PI * x[0]).sin() * sy
                })
                .sum();
            smooth + noise * rng.gen_range(-1.0..1.0)
        })
        .collect();
    GridFunction::from_values(grid, values).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    rng.gen_range(lo..hi)
}

/// Smooth positive function: the sine bump modulated by a few random low
/// modes, scaled by `amp`.
pub fn random_smooth_bump(grid: Grid, rng: &mut ChaCha8Rng, amp: f64) -> GridFunction {
    let modes: Vec<(f64, f64)> = (0..3)
        .map(|_| (rng.gen_range(-0.15..0.15), rng.gen_range(1..5) as f64))
        .collect();
    let bump = GridFunction::sine_bump(grid);
    let values = bump
        .values()
        .iter()
        .enumerate()
        .map(|(k, &b)| {
            let x = grid.coords(k);
            let m: f64 = modes.iter().map(|&(a, j)| a * (j * PI * x[0]).cos()).sum();
            amp * b * (1.0 + m)
        })
        .collect();
    GridFunction::from_values(grid, values).unwrap()
}
