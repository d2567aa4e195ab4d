//! Comparison, blow-up and instability experiments built on the integrator.

use super::{classify_sample, run, Integrator, Outcome, StepControls, StepRecord, TrajectoryRecord};
use crate::error::{Error, Result};
use crate::grid::{check_exponent, norm_sup, GridFunction};
use crate::plap::{FrozenWeight, Nonlinearity, SolverControls};
use crate::spectral::{principal_eigenvalue, Thresholds, Weight};

#[derive(Debug, Clone)]
pub struct ComparisonReport {
    /// `max over (t, node) of (w - v)^+`.
    pub max_violation: f64,
    /// Smallest value of `v` over the run.
    pub min_v: f64,
    pub v_outcome: Outcome,
    pub w_outcome: Outcome,
    pub v_blowup_time: Option<f64>,
    pub w_blowup_time: Option<f64>,
    /// `v` blew up no later than `w` (vacuous when `w` did not blow up in the run).
    pub v_not_later: bool,
    /// Accepted steps of the `v` run, for the dissipation check.
    pub v_steps: Vec<StepRecord>,
    pub steps: usize,
}

/// Co-evolves `v` (reaction `g`) and `w` (frozen weight `gamma`) with a
/// common step sequence and records how far the ordering `w <= v` fails.
/// Requires `0 <= gamma <= g_inf` and `v0 >= w0 >= 0`.
#[allow(clippy::too_many_arguments)]
pub fn compare_evolutions(
    v0: &GridFunction,
    w0: &GridFunction,
    gamma: &GridFunction,
    lambda: f64,
    g: &Nonlinearity,
    p: f64,
    solver: &SolverControls,
    step: &StepControls,
) -> Result<ComparisonReport> {
    check_exponent(p)?;
    solver.validate()?;
    step.validate()?;
    let grid = *v0.grid();
    if w0.grid() != &grid || gamma.grid() != &grid {
        return Err(Error::InvalidInput("v0, w0 and gamma must share a grid".into()));
    }
    for k in 0..grid.len() {
        let x = grid.coords(k);
        let (gk, vk, wk) = (gamma.values()[k], v0.values()[k], w0.values()[k]);
        if !(gk >= 0.0 && gk <= g.ginf(x)) {
            return Err(Error::InvalidInput(format!(
                "need 0 <= gamma <= g_inf; gamma = {gk}, g_inf = {} at node {k}",
                g.ginf(x)
            )));
        }
        if !(vk >= wk && wk >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "need v0 >= w0 >= 0; v0 = {vk}, w0 = {wk} at node {k}"
            )));
        }
    }

    let frozen = FrozenWeight { gamma: gamma.values() };
    let iv = Integrator::new(grid, lambda, g, p, *solver);
    let iw = Integrator::new(grid, lambda, &frozen, p, *solver);
    let cell = grid.cell_volume();

    let mut v = v0.values().to_vec();
    let mut w = w0.values().to_vec();
    let (mut ev, mut ew) = (iv.energy(&v), iw.energy(&w));
    let mut t = 0.0;
    let mut dt = step.dt_init;
    let violation = |v: &[f64], w: &[f64]| {
        v.iter().zip(w).map(|(a, b)| (b - a).max(0.0)).fold(0.0, f64::max)
    };
    let mut max_violation = violation(&v, &w);
    let mut min_v = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut v_outcome = classify_sample(&iv.sample(0.0, &v, ev, 0.0, iv.rate(&v)), p, step);
    let mut w_outcome = classify_sample(&iw.sample(0.0, &w, ew, 0.0, iw.rate(&w)), p, step);
    v_outcome = v_outcome.filter(|o| *o == Outcome::Decayed);
    w_outcome = w_outcome.filter(|o| *o == Outcome::Decayed);
    let mut v_steps = Vec::new();
    let mut steps = 0;

    let dissipative = |e: f64, old: &[f64], new: &[f64], e_old: f64, dt: f64, t: f64| {
        let d2: f64 = new.iter().zip(old).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() * cell;
        let rec = StepRecord {
            t: t + dt,
            dt,
            energy_before: e_old,
            energy_after: e,
            dissipation: d2 / dt,
            newton_iterations: 0,
        };
        (e.is_finite() && rec.satisfies_dissipation(solver.tol_residual)).then_some(rec)
    };

    // both finished, or v blew up (w can only follow later)
    let done = |vo: &Option<Outcome>, wo: &Option<Outcome>| {
        matches!(vo, Some(Outcome::BlewUp { .. })) || (vo.is_some() && wo.is_some())
    };
    while !done(&v_outcome, &w_outcome) {
        if t >= step.horizon || steps >= step.max_steps {
            break;
        }
        let next_v = if v_outcome.is_some() {
            Some((v.clone(), None))
        } else {
            iv.step(&v, dt).and_then(|(nv, _, _)| {
                dissipative(iv.energy(&nv), &v, &nv, ev, dt, t).map(|r| (nv, Some(r)))
            })
        };
        let next_w = next_v.as_ref().and_then(|_| {
            if w_outcome.is_some() {
                Some((w.clone(), None))
            } else {
                iw.step(&w, dt).and_then(|(nw, _, _)| {
                    dissipative(iw.energy(&nw), &w, &nw, ew, dt, t).map(|r| (nw, Some(r)))
                })
            }
        });
        let (Some((nv, rv)), Some((nw, rw))) = (next_v, next_w) else {
            dt *= 0.5;
            if dt < step.dt_min {
                return Err(Error::StepCollapse {
                    t,
                    dt_min: step.dt_min,
                    reason: "co-evolution could not advance both solutions".into(),
                });
            }
            continue;
        };
        t += dt;
        steps += 1;
        if let Some(r) = rv {
            ev = r.energy_after;
            let s = iv.sample(t, &nv, ev, dt, (r.dissipation / dt).sqrt());
            v_outcome = classify_sample(&s, p, step);
            v_steps.push(r);
        }
        if let Some(r) = rw {
            ew = r.energy_after;
            let s = iw.sample(t, &nw, ew, dt, (r.dissipation / dt).sqrt());
            w_outcome = classify_sample(&s, p, step);
        }
        v = nv;
        w = nw;
        max_violation = max_violation.max(violation(&v, &w));
        min_v = v.iter().cloned().fold(min_v, f64::min);
        dt = (dt * 1.5).min(step.dt_max);
    }

    let time = |o: &Option<Outcome>| match o {
        Some(Outcome::BlewUp { t_estimate }) => Some(*t_estimate),
        _ => None,
    };
    let (tv, tw) = (time(&v_outcome), time(&w_outcome));
    let v_not_later = match (tv, tw) {
        (Some(a), Some(b)) => a <= b,
        (None, Some(_)) => false,
        _ => true,
    };
    Ok(ComparisonReport {
        max_violation,
        min_v,
        v_outcome: v_outcome.unwrap_or(Outcome::HorizonReached),
        w_outcome: w_outcome.unwrap_or(Outcome::HorizonReached),
        v_blowup_time: tv,
        w_blowup_time: tw,
        v_not_later,
        v_steps,
        steps,
    })
}

#[derive(Debug, Clone)]
pub struct BlowupProbeReport {
    pub mu0: f64,
    pub lambda: f64,
    /// `lambda > mu0`.
    pub predicted_blowup: bool,
    pub trajectory: TrajectoryRecord,
    /// Blow-up when predicted, decay otherwise.
    pub consistent: bool,
}

/// Evolves `w_t = Delta_p w + lambda gamma phi_p(w)` from `w0 != 0`.
pub fn blowup_probe(
    gamma: &Weight,
    lambda: f64,
    w0: &GridFunction,
    p: f64,
    solver: &SolverControls,
    step: &StepControls,
) -> Result<BlowupProbeReport> {
    if norm_sup(w0) == 0.0 {
        return Err(Error::InvalidInput("the probe needs nonzero initial data".into()));
    }
    if w0.grid() != gamma.grid() {
        return Err(Error::InvalidInput("w0 and gamma must share a grid".into()));
    }
    let mu0 = principal_eigenvalue(gamma, p, solver)?.mu0;
    let frozen = FrozenWeight {
        gamma: gamma.values().values(),
    };
    let trajectory = run(w0, lambda, &frozen, p, solver, step, |_, _| {})?;
    let predicted_blowup = lambda > mu0;
    let consistent = match trajectory.outcome {
        Outcome::BlewUp { .. } => predicted_blowup,
        Outcome::Decayed => !predicted_blowup,
        _ => false,
    };
    Ok(BlowupProbeReport {
        mu0,
        lambda,
        predicted_blowup,
        trajectory,
        consistent,
    })
}

#[derive(Debug, Clone)]
pub struct InstabilityReport {
    pub delta: f64,
    /// `mu_0(g_delta)`.
    pub mu_delta: f64,
    /// First time with sup-norm above `delta`.
    pub exceeded_at: Option<f64>,
    pub trajectory: TrajectoryRecord,
}

/// Starts at `(delta / 4) psi_min` and follows the solution away from the
/// trivial equilibrium. Requires `lambda > mu_0(g_delta)`.
pub fn trivial_instability_probe(
    lambda: f64,
    g: &Nonlinearity,
    p: f64,
    delta: f64,
    thresholds: &Thresholds,
    solver: &SolverControls,
    step: &StepControls,
) -> Result<InstabilityReport> {
    if !(delta > 0.0) {
        return Err(Error::InvalidInput(format!("delta must be positive, got {delta}")));
    }
    if !(lambda > thresholds.lambda_min) {
        return Err(Error::Precondition(format!(
            "lambda = {lambda} must exceed lambda_min = {}; no delta works",
            thresholds.lambda_min
        )));
    }
    let grid = *thresholds.psi_min.grid();
    let mu_delta = principal_eigenvalue(&Weight::g_delta(g, grid, delta)?, p, solver)?.mu0;
    if !(lambda > mu_delta) {
        return Err(Error::Precondition(format!(
            "lambda = {lambda} does not exceed mu_0(g_delta) = {mu_delta} for delta = {delta}; try delta = {}",
            delta / 10.0
        )));
    }
    let v0 = thresholds.psi_min.scaled(0.25 * delta);
    let mut exceeded_at = None;
    let trajectory = run(&v0, lambda, g, p, solver, step, |t, v| {
        if exceeded_at.is_none() && v.iter().any(|&x| x > delta) {
            exceeded_at = Some(t);
        }
    })?;
    Ok(InstabilityReport {
        delta,
        mu_delta,
        exceeded_at,
        trajectory,
    })
}
