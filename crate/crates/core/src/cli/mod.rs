//! Experiment orchestration behind the `plapflow` binary: configuration,
//! the subcommand runners, the trichotomy table and CSV output.

mod config;
mod csv_out;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

pub use config::{
    parse_config, random_positive, read_values, Anchor, ExperimentConfig, Family, GammaSpec,
    InitialSpec, LambdaSpec, NonlinearitySpec, ScheduleSpec, SecondStart, WeightSpec,
};
pub use csv_out::{emit_csv, CsvRecord, EigenProfile, Profile};

use crate::dynamics::{compare_evolutions, evolve, ComparisonReport, Outcome, TrajectoryRecord};
use crate::equilibria::{
    default_schedule, geometric_schedule, solve_equilibrium, trace_branch_with, BranchResult,
    BranchSample, Classification,
};
use crate::error::{Error, Result, StageContext};
use crate::grid::{norm_sup, seminorm_grad_p, GridFunction};
use crate::spectral::{principal_eigenvalue, thresholds, Thresholds};

/// Final grad-p seminorm below which a decayed run counts as decayed.
pub const DECAY_SEMINORM: f64 = 1e-5;
/// Sup-distance to the independently solved equilibrium for the middle regime.
pub const EQUILIBRIUM_DISTANCE: f64 = 1e-5;
/// Comparison runs pass with ordering violations and negative values below this.
pub const ORDER_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Eigen,
    Equilibrium,
    Branch,
    Evolve,
    Compare,
    Trichotomy,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Eigen => "eigen",
            Command::Equilibrium => "equilibrium",
            Command::Branch => "branch",
            Command::Evolve => "evolve",
            Command::Compare => "compare",
            Command::Trichotomy => "trichotomy",
        }
    }
}

/// What a subcommand printed, whether its checks passed, and the files it wrote.
#[derive(Debug, Clone)]
pub struct CommandOutput {
    pub text: String,
    pub passed: bool,
    pub files: Vec<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Decay,
    Converge,
    BlowUp,
}

impl Regime {
    pub const ALL: [Regime; 3] = [Regime::Decay, Regime::Converge, Regime::BlowUp];

    pub fn label(&self) -> &'static str {
        match self {
            Regime::Decay => "a: 0.5*lambda_min",
            Regime::Converge => "b: mid",
            Regime::BlowUp => "c: 1.5*lambda_max",
        }
    }

    fn tag(&self) -> &'static str {
        match self {
            Regime::Decay => "a",
            Regime::Converge => "b",
            Regime::BlowUp => "c",
        }
    }

    pub fn expected(&self) -> &'static str {
        match self {
            Regime::Decay => "decayed",
            Regime::Converge => "converged_to_equilibrium",
            Regime::BlowUp => "blew_up",
        }
    }

    fn lambda(&self, t: &Thresholds) -> Option<f64> {
        match self {
            Regime::Decay => Some(0.5 * t.lambda_min),
            Regime::Converge => Some(t.mid()),
            Regime::BlowUp if t.lambda_max_is_infinite() => None,
            Regime::BlowUp => Some(1.5 * t.lambda_max),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrichotomyRow {
    pub regime: Regime,
    /// `None` when the regime does not apply (infinite `lambda_max`).
    pub lambda: Option<f64>,
    pub outcome: Option<Outcome>,
    pub final_sup_norm: f64,
    pub final_seminorm: f64,
    pub final_time: f64,
    /// Sup-distance to the equilibrium solved directly (middle regime only).
    pub equilibrium_distance: Option<f64>,
    /// `None` for not applicable.
    pub passed: Option<bool>,
    pub trajectory: Option<TrajectoryRecord>,
}

impl TrichotomyRow {
    fn not_applicable(regime: Regime) -> Self {
        Self {
            regime,
            lambda: None,
            outcome: None,
            final_sup_norm: f64::NAN,
            final_seminorm: f64::NAN,
            final_time: f64::NAN,
            equilibrium_distance: None,
            passed: None,
            trajectory: None,
        }
    }

    pub fn t_estimate(&self) -> Option<f64> {
        match self.outcome {
            Some(Outcome::BlewUp { t_estimate }) => Some(t_estimate),
            _ => None,
        }
    }

    pub fn status(&self) -> &'static str {
        match self.passed {
            Some(true) => "pass",
            Some(false) => "FAIL",
            None => "n/a",
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrichotomyReport {
    pub thresholds: Thresholds,
    pub rows: Vec<TrichotomyRow>,
}

impl TrichotomyReport {
    /// All applicable rows passed.
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.passed != Some(false))
    }

    pub fn to_text(&self) -> String {
        let t = &self.thresholds;
        let mut s = String::new();
        let _ = writeln!(s, "lambda_min = {:.10e}", t.lambda_min);
        let _ = writeln!(s, "lambda_max = {:.10e}", t.lambda_max);
        for r in &self.rows {
            match (r.lambda, r.outcome) {
                (Some(l), Some(o)) => {
                    let _ = write!(
                        s,
                        "{:<20} lambda = {:.6e}  outcome = {:<26} t = {:.4e}  sup = {:.4e}  grad_p = {:.4e}",
                        r.regime.label(),
                        l,
                        o.label(),
                        r.final_time,
                        r.final_sup_norm,
                        r.final_seminorm
                    );
                    if let Some(te) = r.t_estimate() {
                        let _ = write!(s, "  t_estimate = {te:.6e}");
                    }
                    if let Some(d) = r.equilibrium_distance {
                        let _ = write!(s, "  |v - e|_sup = {d:.3e}");
                    }
                    let _ = writeln!(s, "  [{}]", r.status());
                }
                _ => {
                    let _ = writeln!(s, "{:<20} lambda_max is infinite  [n/a]", r.regime.label());
                }
            }
        }
        let _ = writeln!(s, "trichotomy: {}", if self.passed() { "pass" } else { "FAIL" });
        s
    }
}

/// Thresholds, then the three regimes from the configured `v0`, run
/// concurrently. The middle row is checked against `solve_equilibrium`.
pub fn run_trichotomy(cfg: &ExperimentConfig) -> Result<TrichotomyReport> {
    let grid = cfg.grid()?;
    let g = cfg.nonlinearity()?;
    let t = thresholds(&g, cfg.p, grid, &cfg.solver).stage("thresholds")?;
    let v0 = cfg.v0.build(grid, &t)?;
    if norm_sup(&v0) == 0.0 {
        return Err(Error::Config("v0 must not vanish identically".into()));
    }
    let rows = Regime::ALL
        .par_iter()
        .map(|&regime| -> Result<TrichotomyRow> {
            let Some(lambda) = regime.lambda(&t) else {
                return Ok(TrichotomyRow::not_applicable(regime));
            };
            let stage = format!("regime {}", regime.tag());
            let traj = evolve(&v0, lambda, &g, cfg.p, &cfg.solver, &cfg.step).stage(&stage)?;
            let last = traj.final_sample();
            let (final_sup_norm, final_seminorm, final_time) =
                (last.sup_norm, last.grad_p_seminorm, last.t);
            let outcome = traj.outcome;
            let (passed, equilibrium_distance) = match regime {
                Regime::Decay => (
                    outcome == Outcome::Decayed && final_seminorm < DECAY_SEMINORM,
                    None,
                ),
                Regime::Converge => {
                    let start = t.psi_min.scaled(0.5);
                    let e = solve_equilibrium(lambda, &g, cfg.p, &start, &cfg.solver)
                        .stage("regime b equilibrium")?;
                    let d = traj.final_state.sup_distance(&e.u);
                    let ok = outcome == Outcome::ConvergedToEquilibrium
                        && e.classification == Classification::Nontrivial
                        && d < EQUILIBRIUM_DISTANCE;
                    (ok, Some(d))
                }
                Regime::BlowUp => (
                    matches!(outcome, Outcome::BlewUp { t_estimate } if t_estimate.is_finite()),
                    None,
                ),
            };
            Ok(TrichotomyRow {
                regime,
                lambda: Some(lambda),
                outcome: Some(outcome),
                final_sup_norm,
                final_seminorm,
                final_time,
                equilibrium_distance,
                passed: Some(passed),
                trajectory: Some(traj),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TrichotomyReport { thresholds: t, rows })
}

fn resolve_schedule(cfg: &ExperimentConfig, t: &Thresholds) -> Result<Vec<f64>> {
    match &cfg.schedule {
        config::ScheduleSpec::Default => Ok(default_schedule(t)),
        config::ScheduleSpec::Geometric { lo, hi, count } => {
            let (lo, hi) = (lo.resolve(t)?, hi.resolve(t)?);
            if !(lo > 0.0 && hi >= lo) {
                return Err(Error::Config(format!(
                    "schedule: need 0 < lo <= hi, got lo = {lo}, hi = {hi}"
                )));
            }
            Ok(geometric_schedule(lo, hi, *count))
        }
        config::ScheduleSpec::List(v) => Ok(v.clone()),
    }
}

fn gamma_values(cfg: &ExperimentConfig, grid: crate::grid::Grid) -> Result<GridFunction> {
    let g = cfg.nonlinearity()?;
    Ok(match cfg.gamma {
        GammaSpec::GInfinity(f) => GridFunction::from_fn(grid, |x| f * g.ginf(x)),
        GammaSpec::Constant(c) => GridFunction::constant(grid, c),
    })
}

fn write(record: &(impl CsvRecord + ?Sized), dir: &Path, name: &str, files: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(name);
    emit_csv(record, &path)?;
    files.push(path);
    Ok(())
}

/// Runs one subcommand and writes its CSV files into `out_dir`.
pub fn run_command(cmd: Command, cfg: &ExperimentConfig, out_dir: &Path) -> Result<CommandOutput> {
    std::fs::create_dir_all(out_dir)?;
    let grid = cfg.grid()?;
    let g = cfg.nonlinearity()?;
    let p = cfg.p;
    let mut files = Vec::new();
    let mut text = String::new();
    let mut passed = true;
    match cmd {
        Command::Eigen => {
            let rho = cfg.weight.build(grid, &g)?;
            let r = principal_eigenvalue(&rho, p, &cfg.solver).stage("eigen")?;
            let _ = writeln!(text, "mu0 = {:.16e}", r.mu0);
            let _ = writeln!(text, "residual = {:.3e}", r.residual);
            let _ = writeln!(text, "iterations = {}", r.iterations);
            write(&EigenProfile(&r), out_dir, "eigen_psi.csv", &mut files)?;
        }
        Command::Equilibrium => {
            let t = thresholds(&g, p, grid, &cfg.solver).stage("thresholds")?;
            let lambda = cfg.lambda.resolve(&t)?;
            let init = cfg.v0.build(grid, &t)?;
            let e = solve_equilibrium(lambda, &g, p, &init, &cfg.solver).stage("equilibrium")?;
            let sample = BranchSample {
                lambda,
                seminorm: seminorm_grad_p(&e.u, p)?,
                sup_norm: norm_sup(&e.u),
                residual: e.residual,
                iterations: e.iterations,
            };
            let _ = writeln!(
                text,
                "lambda = {lambda:.10e} ({:?})  seminorm = {:.10e}  sup = {:.10e}  residual = {:.3e}  iterations = {}",
                e.classification, sample.seminorm, sample.sup_norm, sample.residual, sample.iterations
            );
            write(&[sample][..], out_dir, "equilibrium.csv", &mut files)?;
            write(&Profile(&e.u, "u"), out_dir, "equilibrium_u.csv", &mut files)?;
        }
        Command::Branch => {
            let t = thresholds(&g, p, grid, &cfg.solver).stage("thresholds")?;
            let schedule = resolve_schedule(cfg, &t)?;
            let b: BranchResult =
                trace_branch_with(&g, p, t, Some(&schedule), &cfg.solver).stage("branch")?;
            let _ = writeln!(
                text,
                "lambda_min = {:.10e}  lambda_max = {:.10e}  samples = {}",
                b.thresholds.lambda_min,
                b.thresholds.lambda_max,
                b.samples.len()
            );
            if let Some(l) = b.escaped_at {
                let _ = writeln!(text, "branch escaped at lambda = {l:.10e}");
            }
            write(&b.samples[..], out_dir, "branch.csv", &mut files)?;
        }
        Command::Evolve => {
            let t = thresholds(&g, p, grid, &cfg.solver).stage("thresholds")?;
            let lambda = cfg.lambda.resolve(&t)?;
            let v0 = cfg.v0.build(grid, &t)?;
            let traj = evolve(&v0, lambda, &g, p, &cfg.solver, &cfg.step).stage("evolve")?;
            let last = traj.final_sample();
            let _ = writeln!(
                text,
                "lambda = {lambda:.10e}  outcome = {}  t = {:.6e}  sup = {:.6e}  grad_p = {:.6e}  steps = {}  rejected = {}",
                traj.outcome.label(),
                last.t,
                last.sup_norm,
                last.grad_p_seminorm,
                traj.steps.len(),
                traj.rejected_steps
            );
            if let Outcome::BlewUp { t_estimate } = traj.outcome {
                let _ = writeln!(text, "t_estimate = {t_estimate:.10e}");
            }
            write(&traj, out_dir, "trajectory.csv", &mut files)?;
        }
        Command::Compare => {
            let t = thresholds(&g, p, grid, &cfg.solver).stage("thresholds")?;
            let lambda = cfg.lambda.resolve(&t)?;
            let v0 = cfg.v0.build(grid, &t)?;
            let w0 = match &cfg.w0 {
                SecondStart::ScaledV0(f) => v0.scaled(*f),
                SecondStart::Other(spec) => spec.build(grid, &t)?,
            };
            let gamma = gamma_values(cfg, grid)?;
            let r: ComparisonReport =
                compare_evolutions(&v0, &w0, &gamma, lambda, &g, p, &cfg.solver, &cfg.step)
                    .stage("compare")?;
            passed = r.max_violation <= ORDER_TOL && r.min_v >= -ORDER_TOL;
            let _ = writeln!(
                text,
                "lambda = {lambda:.10e}  max_violation = {:.3e}  min_v = {:.3e}  v: {}  w: {}  steps = {}  [{}]",
                r.max_violation,
                r.min_v,
                r.v_outcome.label(),
                r.w_outcome.label(),
                r.steps,
                if passed { "pass" } else { "FAIL" }
            );
            write(&r, out_dir, "compare.csv", &mut files)?;
        }
        Command::Trichotomy => {
            let report = run_trichotomy(cfg)?;
            passed = report.passed();
            text.push_str(&report.to_text());
            write(&report, out_dir, "trichotomy.csv", &mut files)?;
            for r in &report.rows {
                if let Some(traj) = &r.trajectory {
                    let name = format!("trajectory_{}.csv", r.regime.tag());
                    write(traj, out_dir, &name, &mut files)?;
                }
            }
        }
    }
    Ok(CommandOutput { text, passed, files })
}
