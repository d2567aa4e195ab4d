//! Adaptive backward Euler for `v_t = Delta_p v + lambda g(x, v) phi_p(v)`.
//!
//! Each step minimizes `h^dim |w - v|^2 / (2 dt) + E(w)`, so a step is a
//! minimizing movement of the energy. A step is kept only when it
//! dissipates at least `(1 - eta) |w - v|^2 / dt` of energy; otherwise the
//! step size is halved.

mod probes;

pub use probes::{
    blowup_probe, compare_evolutions, trivial_instability_probe, BlowupProbeReport,
    ComparisonReport, InstabilityReport,
};

use crate::equilibria::TRIVIAL_CUTOFF;
use crate::error::{Error, Result};
use crate::grid::{check_exponent, l2_of_slice, Grid, GridFunction};
use crate::linalg::SymBanded;
use crate::plap::newton::{self, Functional, NewtonSettings};
use crate::plap::{
    energy_of, phi_p, reaction_values, residual_floor, residual_of, Nonlinearity, Reaction,
    SolverControls,
};
use crate::stencil::EdgeStencil;

/// Dissipation slack: accepted steps satisfy
/// `E(v+) - E(v) <= -(1 - ETA) |v+ - v|_2^2 / dt` up to round-off.
pub const ETA: f64 = 0.1;

const GROWTH: f64 = 1.5;
const STEP_RELATIVE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControls {
    pub dt_init: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    /// Sup-norm beyond which the solution counts as blown up.
    pub blowup_threshold: f64,
    /// Final time `T`.
    pub horizon: f64,
    /// Bound on `|v+ - v|_2 / dt`, relative to `min(1, |v|_2^(p-1))`.
    pub stationarity_tol: f64,
    pub max_steps: usize,
}

impl Default for StepControls {
    fn default() -> Self {
        Self {
            dt_init: 1e-3,
            dt_min: 1e-12,
            dt_max: 1e6,
            blowup_threshold: 1e6,
            horizon: 1e9,
            stationarity_tol: 1e-8,
            max_steps: 200_000,
        }
    }
}

impl StepControls {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.dt_init,
            self.dt_min,
            self.dt_max,
            self.blowup_threshold,
            self.horizon,
            self.stationarity_tol,
        ];
        if !all.iter().all(|v| *v > 0.0 && v.is_finite()) {
            return Err(Error::Config("step controls must be positive and finite".into()));
        }
        if !(self.dt_min <= self.dt_init && self.dt_init <= self.dt_max) {
            return Err(Error::Config(format!(
                "need dt_min <= dt_init <= dt_max, got {} / {} / {}",
                self.dt_min, self.dt_init, self.dt_max
            )));
        }
        if self.max_steps == 0 {
            return Err(Error::Config("max_steps must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Outcome {
    Decayed,
    ConvergedToEquilibrium,
    BlewUp { t_estimate: f64 },
    HorizonReached,
}

impl Outcome {
    pub fn label(&self) -> &'static str {
        match self {
            Outcome::Decayed => "decayed",
            Outcome::ConvergedToEquilibrium => "converged_to_equilibrium",
            Outcome::BlewUp { .. } => "blew_up",
            Outcome::HorizonReached => "horizon_reached",
        }
    }
}

/// State summary at an accepted time level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub sup_norm: f64,
    pub grad_p_seminorm: f64,
    pub energy: f64,
    /// Step that produced this level; 0 for the initial state.
    pub dt: f64,
    /// `|v+ - v|_2 / dt`, or the norm of the right-hand side at `t = 0`.
    pub rate: f64,
    pub l2_norm: f64,
}

/// One accepted step, as checked by the dissipation test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub t: f64,
    pub dt: f64,
    pub energy_before: f64,
    pub energy_after: f64,
    /// `|v+ - v|_2^2 / dt`.
    pub dissipation: f64,
    pub newton_iterations: usize,
}

impl StepRecord {
    /// Round-off allowance used in the dissipation test.
    pub fn slack(&self, tol: f64) -> f64 {
        10.0 * tol * self.energy_before.abs().max(self.energy_after.abs()).max(1.0)
    }

    pub fn satisfies_dissipation(&self, tol: f64) -> bool {
        self.energy_after - self.energy_before <= -(1.0 - ETA) * self.dissipation + self.slack(tol)
    }
}

#[derive(Debug, Clone)]
pub struct TrajectoryRecord {
    pub samples: Vec<Sample>,
    pub steps: Vec<StepRecord>,
    pub outcome: Outcome,
    pub final_state: GridFunction,
    /// Smallest nodal value over all accepted states.
    pub min_value: f64,
    pub rejected_steps: usize,
    pub lambda: f64,
    pub p: f64,
    pub tol_residual: f64,
    pub stationarity_tol: f64,
    pub blowup_threshold: f64,
    pub horizon: f64,
}

impl TrajectoryRecord {
    pub fn dt_history(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.dt).collect()
    }

    pub fn final_sample(&self) -> &Sample {
        self.samples.last().expect("a trajectory has its initial sample")
    }
}

/// Result of one backward Euler step.
#[derive(Debug, Clone)]
pub struct StepResult {
    pub v: GridFunction,
    pub residual: f64,
    pub iterations: usize,
    pub energy_before: f64,
    pub energy_after: f64,
}

pub(crate) struct Integrator<'a, R: Reaction + ?Sized> {
    pub grid: Grid,
    pub st: EdgeStencil,
    pub coords: Vec<[f64; 2]>,
    pub lambda: f64,
    pub reaction: &'a R,
    pub p: f64,
    pub solver: SolverControls,
}

struct StepFunctional<'a, R: Reaction + ?Sized> {
    it: &'a Integrator<'a, R>,
    v: &'a [f64],
    dt: f64,
}

impl<R: Reaction + ?Sized> Functional for StepFunctional<'_, R> {
    fn len(&self) -> usize {
        self.v.len()
    }

    fn value(&self, w: &[f64]) -> f64 {
        let it = self.it;
        let cell = it.grid.cell_volume();
        let kinetic: f64 = w.iter().zip(self.v).map(|(a, b)| (a - b) * (a - b)).sum();
        0.5 * cell * kinetic / self.dt + energy_of(&it.st, &it.grid, w, it.lambda, it.reaction, it.p)
    }

    fn gradient(&self, w: &[f64], out: &mut [f64]) {
        let it = self.it;
        let cell = it.grid.cell_volume();
        for (k, o) in out.iter_mut().enumerate() {
            let r = it.lambda * it.reaction.coefficient(k, it.coords[k], w[k]) * phi_p(w[k], it.p);
            *o = cell * ((w[k] - self.v[k]) / self.dt - r);
        }
        it.st.add_gradient(w, it.p, 1.0, out);
    }

    fn hessian(&self, w: &[f64], eps: f64, out: &mut SymBanded) {
        let it = self.it;
        let cell = it.grid.cell_volume();
        it.st.add_hessian(w, it.p, eps, 1.0, out);
        for (k, &wk) in w.iter().enumerate() {
            let x = it.coords[k];
            let g = it.reaction.coefficient(k, x, wk);
            let dg = it.reaction.coefficient_derivative(k, x, wk);
            let d = dg * phi_p(wk, it.p) + (it.p - 1.0) * g * wk.abs().powf(it.p - 2.0);
            out.add_diagonal(k, cell * (1.0 / self.dt - it.lambda * d));
        }
    }

    fn empty_hessian(&self) -> SymBanded {
        self.it.st.empty_matrix()
    }

    fn residual_norm(&self, grad: &[f64]) -> f64 {
        let cell = self.it.grid.cell_volume();
        l2_of_slice(grad, cell) / cell
    }
}

impl<'a, R: Reaction + ?Sized> Integrator<'a, R> {
    pub fn new(grid: Grid, lambda: f64, reaction: &'a R, p: f64, solver: SolverControls) -> Self {
        Self {
            grid,
            st: grid.stencil(),
            coords: (0..grid.len()).map(|k| grid.coords(k)).collect(),
            lambda,
            reaction,
            p,
            solver,
        }
    }

    pub fn energy(&self, v: &[f64]) -> f64 {
        energy_of(&self.st, &self.grid, v, self.lambda, self.reaction, self.p)
    }

    /// `|Delta_p v + lambda g(v) phi_p(v)|_2`.
    pub fn rate(&self, v: &[f64]) -> f64 {
        residual_of(&self.st, &self.grid, v, self.lambda, self.reaction, self.p)
    }

    /// One backward Euler step; `None` when Newton does not converge.
    pub fn step(&self, v: &[f64], dt: f64) -> Option<(Vec<f64>, f64, usize)> {
        let f = StepFunctional { it: self, v, dt };
        let mut source = reaction_values(&self.grid, v, self.lambda, self.reaction, self.p);
        for (s, &vk) in source.iter_mut().zip(v) {
            *s = s.abs() + 2.0 * vk.abs() / dt;
        }
        // relative to the current rate, so slow dynamics still move
        let tol = self
            .solver
            .tol_residual
            .min(STEP_RELATIVE_TOL * self.rate(v))
            .max(residual_floor(&self.st, &self.grid, v, self.p, &source));
        let mut w = v.to_vec();
        let out = newton::minimize(
            &f,
            &mut w,
            NewtonSettings {
                tol,
                max_iter: self.solver.newton_max_iter,
                eps_jacobian: self.solver.eps_jacobian,
            },
        );
        (out.converged && w.iter().all(|x| x.is_finite())).then_some((w, out.residual, out.iterations))
    }

    fn sample(&self, t: f64, v: &[f64], energy: f64, dt: f64, rate: f64) -> Sample {
        Sample {
            t,
            sup_norm: v.iter().fold(0.0f64, |m, x| m.max(x.abs())),
            grad_p_seminorm: self.st.p_sum(v, self.p).powf(1.0 / self.p),
            energy,
            dt,
            rate,
            l2_norm: l2_of_slice(v, self.grid.cell_volume()),
        }
    }
}

fn check_state(v: &GridFunction, name: &str) -> Result<()> {
    if let Some(k) = v.values().iter().position(|&x| x < 0.0) {
        return Err(Error::InvalidInput(format!(
            "{name} must be nonnegative; value {} at node {k}",
            v.values()[k]
        )));
    }
    Ok(())
}

/// One backward Euler step of size `dt`, without the acceptance test.
pub fn step_implicit(
    v: &GridFunction,
    dt: f64,
    lambda: f64,
    g: &Nonlinearity,
    p: f64,
    controls: &SolverControls,
) -> Result<StepResult> {
    check_exponent(p)?;
    controls.validate()?;
    check_state(v, "v")?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidInput(format!("dt must be positive, got {dt}")));
    }
    let grid = *v.grid();
    let it = Integrator::new(grid, lambda, g, p, *controls);
    let energy_before = it.energy(v.values());
    let (w, residual, iterations) = it.step(v.values(), dt).ok_or(Error::NoConvergence {
        solver: "backward Euler Newton",
        iterations: controls.newton_max_iter,
        residual: f64::NAN,
    })?;
    let energy_after = it.energy(&w);
    Ok(StepResult {
        v: GridFunction::from_raw(grid, w),
        residual,
        iterations,
        energy_before,
        energy_after,
    })
}

/// Classification of a state after an accepted step.
pub(crate) fn classify_sample(s: &Sample, p: f64, step: &StepControls) -> Option<Outcome> {
    if s.sup_norm > step.blowup_threshold {
        return Some(Outcome::BlewUp { t_estimate: s.t });
    }
    if s.sup_norm < TRIVIAL_CUTOFF && s.rate < step.stationarity_tol {
        return Some(Outcome::Decayed);
    }
    if s.sup_norm >= TRIVIAL_CUTOFF && s.rate < step.stationarity_tol * s.l2_norm.powf(p - 1.0).min(1.0) {
        return Some(Outcome::ConvergedToEquilibrium);
    }
    None
}

/// Shared time-stepping loop; `observe` sees every accepted state.
pub(crate) fn run<R: Reaction + ?Sized>(
    v0: &GridFunction,
    lambda: f64,
    reaction: &R,
    p: f64,
    solver: &SolverControls,
    step: &StepControls,
    mut observe: impl FnMut(f64, &[f64]),
) -> Result<TrajectoryRecord> {
    check_exponent(p)?;
    solver.validate()?;
    step.validate()?;
    check_state(v0, "v0")?;
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidInput(format!("lambda must be positive, got {lambda}")));
    }
    let grid = *v0.grid();
    let it = Integrator::new(grid, lambda, reaction, p, *solver);

    let mut v = v0.values().to_vec();
    let mut t = 0.0;
    let mut dt = step.dt_init;
    let mut energy = it.energy(&v);
    let first = it.sample(0.0, &v, energy, 0.0, it.rate(&v));
    let mut samples = vec![first];
    let mut steps = Vec::new();
    let mut min_value = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut rejected = 0;
    observe(0.0, &v);

    let mut outcome = classify_sample(&first, p, step).filter(|o| *o == Outcome::Decayed);
    while outcome.is_none() {
        if t >= step.horizon || steps.len() >= step.max_steps {
            outcome = Some(Outcome::HorizonReached);
            break;
        }
        let attempt = it.step(&v, dt).and_then(|(w, _, iters)| {
            let e = it.energy(&w);
            let d2: f64 = w.iter().zip(&v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() * grid.cell_volume();
            let rec = StepRecord {
                t: t + dt,
                dt,
                energy_before: energy,
                energy_after: e,
                dissipation: d2 / dt,
                newton_iterations: iters,
            };
            (e.is_finite() && rec.satisfies_dissipation(solver.tol_residual)).then_some((w, rec))
        });
        let Some((w, rec)) = attempt else {
            rejected += 1;
            dt *= 0.5;
            if dt < step.dt_min {
                if blowing_up(&samples) {
                    outcome = Some(Outcome::BlewUp { t_estimate: t });
                    break;
                }
                return Err(Error::StepCollapse {
                    t,
                    dt_min: step.dt_min,
                    reason: "Newton or the dissipation test kept failing without growth of the solution"
                        .into(),
                });
            }
            continue;
        };

        t = rec.t;
        energy = rec.energy_after;
        let s = it.sample(t, &w, energy, dt, (rec.dissipation / dt).sqrt());
        min_value = w.iter().cloned().fold(min_value, f64::min);
        observe(t, &w);
        v = w;
        samples.push(s);
        steps.push(rec);
        outcome = classify_sample(&s, p, step);
        if rec.newton_iterations <= 12 {
            dt = (dt * GROWTH).min(step.dt_max);
        }
    }

    Ok(TrajectoryRecord {
        samples,
        steps,
        outcome: outcome.unwrap_or(Outcome::HorizonReached),
        final_state: GridFunction::from_raw(grid, v),
        min_value,
        rejected_steps: rejected,
        lambda,
        p,
        tol_residual: solver.tol_residual,
        stationarity_tol: step.stationarity_tol,
        blowup_threshold: step.blowup_threshold,
        horizon: step.horizon,
    })
}

/// Steady growth of the sup-norm over the last few accepted levels, well
/// above the initial size.
fn blowing_up(samples: &[Sample]) -> bool {
    let n = samples.len();
    if n < 6 {
        return false;
    }
    let recent = &samples[n - 6..];
    let growing = recent.windows(2).all(|w| w[1].sup_norm > w[0].sup_norm);
    growing && recent[5].sup_norm > 1e3 * samples[0].sup_norm.max(1.0)
}

/// Backward Euler trajectory from `v0` until decay, stationarity, blow-up
/// or the horizon.
pub fn evolve(
    v0: &GridFunction,
    lambda: f64,
    g: &Nonlinearity,
    p: f64,
    solver: &SolverControls,
    step: &StepControls,
) -> Result<TrajectoryRecord> {
    run(v0, lambda, g, p, solver, step, |_, _| {})
}

/// Re-derives the outcome from the recorded samples. With a candidate
/// equilibrium, convergence additionally needs the final state within
/// `10 stationarity_tol` of it in sup-norm.
pub fn classify_asymptotics(
    traj: &TrajectoryRecord,
    e_candidate: Option<&GridFunction>,
) -> Result<Outcome> {
    if traj.samples.is_empty() {
        return Err(Error::Integrity("trajectory has no samples".into()));
    }
    for w in traj.samples.windows(2) {
        if !(w[1].t > w[0].t) {
            return Err(Error::Integrity(format!("time not increasing at t = {}", w[0].t)));
        }
    }
    if let Some(s) = traj.samples.iter().find(|s| !(s.sup_norm >= 0.0)) {
        return Err(Error::Integrity(format!("negative sup-norm at t = {}", s.t)));
    }
    for s in &traj.steps {
        if s.energy_after > s.energy_before + s.slack(traj.tol_residual) {
            return Err(Error::Integrity(format!(
                "energy rose from {} to {} at t = {}",
                s.energy_before, s.energy_after, s.t
            )));
        }
    }

    let step = StepControls {
        blowup_threshold: traj.blowup_threshold,
        stationarity_tol: traj.stationarity_tol,
        ..StepControls::default()
    };
    let last = traj.final_sample();
    let derived = match classify_sample(last, traj.p, &step) {
        Some(o) => o,
        None => match traj.outcome {
            // blow-up detected through step collapse leaves no threshold crossing
            Outcome::BlewUp { t_estimate } if blowing_up(&traj.samples) => {
                Outcome::BlewUp { t_estimate }
            }
            _ => Outcome::HorizonReached,
        },
    };
    if derived == Outcome::ConvergedToEquilibrium {
        if let Some(e) = e_candidate {
            if traj.final_state.sup_distance(e) > 10.0 * traj.stationarity_tol {
                return Ok(Outcome::HorizonReached);
            }
        }
    }
    Ok(derived)
}
