//! `key=value` experiment configuration.
//!
//! One pair per line, `#` starts a comment, later keys override earlier
//! ones. Symbolic values (`mid`, `0.5*lambda_min`, `0.5*psi_min`) are kept
//! symbolic until the thresholds of the same run are known.

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dynamics::StepControls;
use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction};
use crate::plap::{Nonlinearity, SolverControls};
use crate::spectral::{Thresholds, Weight};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    OnePlusExp,
    PowerDecay,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonlinearitySpec {
    pub family: Family,
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl NonlinearitySpec {
    pub fn build(&self) -> Result<Nonlinearity> {
        match self.family {
            Family::OnePlusExp => Nonlinearity::one_plus_exp(self.a, self.b, self.c),
            Family::PowerDecay => Nonlinearity::power_decay(self.a, self.b, self.c),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Anchor {
    LambdaMin,
    LambdaMax,
    Mid,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaSpec {
    Value(f64),
    Scaled { factor: f64, anchor: Anchor },
}

impl LambdaSpec {
    pub fn resolve(&self, t: &Thresholds) -> Result<f64> {
        match *self {
            LambdaSpec::Value(v) => Ok(v),
            LambdaSpec::Scaled { factor, anchor } => {
                let base = match anchor {
                    Anchor::LambdaMin => t.lambda_min,
                    Anchor::Mid => t.mid(),
                    Anchor::LambdaMax if t.lambda_max_is_infinite() => {
                        return Err(Error::Config(
                            "lambda refers to lambda_max, which is infinite for this g".into(),
                        ))
                    }
                    Anchor::LambdaMax => t.lambda_max,
                };
                Ok(factor * base)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialSpec {
    /// `eps * psi_min`
    PsiMin(f64),
    /// Sine bump times independent `U(0.5, 1.5)` factors per node, scaled.
    RandomPositive { seed: u64, scale: f64 },
    File(PathBuf),
}

impl InitialSpec {
    pub fn build(&self, grid: Grid, t: &Thresholds) -> Result<GridFunction> {
        let f = match self {
            InitialSpec::PsiMin(eps) => t.psi_min.scaled(*eps),
            InitialSpec::RandomPositive { seed, scale } => random_positive(grid, *seed, *scale),
            InitialSpec::File(path) => read_values(grid, path)?,
        };
        if f.grid() != &grid {
            return Err(Error::Config("initial data does not match the grid".into()));
        }
        if f.min() < 0.0 {
            return Err(Error::Config("initial data must be nonnegative".into()));
        }
        Ok(f)
    }
}

/// `scale * sin-bump(x) * (0.5 + U(0, 1))`, reproducible from `seed`.
pub fn random_positive(grid: Grid, seed: u64, scale: f64) -> GridFunction {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = GridFunction::sine_bump(grid)
        .into_values()
        .into_iter()
        .map(|v| scale * v * (0.5 + rng.gen::<f64>()))
        .collect();
    GridFunction::from_values(grid, values).expect("length matches the grid")
}

/// Nodal values, one per line (or the last column of a CSV with header).
pub fn read_values(grid: Grid, path: &PathBuf) -> Result<GridFunction> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut values = Vec::new();
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
        let last = line.rsplit(',').next().unwrap_or(line).trim();
        match last.parse::<f64>() {
            Ok(v) => values.push(v),
            Err(_) if values.is_empty() => continue,
            Err(_) => {
                return Err(Error::Config(format!(
                    "{}: cannot parse value {last:?}",
                    path.display()
                )))
            }
        }
    }
    GridFunction::from_values(grid, values)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone, PartialEq)]
pub enum WeightSpec {
    Constant(f64),
    GZero,
    GInfinity,
    File(PathBuf),
}

impl WeightSpec {
    pub fn build(&self, grid: Grid, g: &Nonlinearity) -> Result<Weight> {
        match self {
            WeightSpec::Constant(c) => Weight::constant(grid, *c),
            WeightSpec::GZero => Weight::g_zero(g, grid),
            WeightSpec::GInfinity => Weight::g_infinity(g, grid)?
                .ok_or_else(|| Error::Config("g_inf vanishes; it is not a valid weight".into())),
            WeightSpec::File(path) => Weight::new(read_values(grid, path)?),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScheduleSpec {
    Default,
    Geometric { lo: LambdaSpec, hi: LambdaSpec, count: usize },
    List(Vec<f64>),
}

/// The frozen weight of the comparison problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GammaSpec {
    /// `factor * g_inf`
    GInfinity(f64),
    Constant(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub enum SecondStart {
    /// `factor * v0`
    ScaledV0(f64),
    Other(InitialSpec),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub dim: usize,
    pub n: Vec<usize>,
    pub p: f64,
    pub g: NonlinearitySpec,
    pub lambda: LambdaSpec,
    pub v0: InitialSpec,
    pub weight: WeightSpec,
    pub schedule: ScheduleSpec,
    pub gamma: GammaSpec,
    pub w0: SecondStart,
    pub delta: f64,
    pub solver: SolverControls,
    pub step: StepControls,
    pub output: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dim: 1,
            n: vec![255],
            p: 3.0,
            g: NonlinearitySpec {
                family: Family::OnePlusExp,
                a: 1.0,
                b: 1.0,
                c: 1.0,
            },
            lambda: LambdaSpec::Scaled {
                factor: 1.0,
                anchor: Anchor::Mid,
            },
            v0: InitialSpec::PsiMin(0.5),
            weight: WeightSpec::Constant(1.0),
            schedule: ScheduleSpec::Default,
            gamma: GammaSpec::GInfinity(1.0),
            w0: SecondStart::ScaledV0(1.0),
            delta: 0.01,
            solver: SolverControls::default(),
            step: StepControls::default(),
            output: None,
        }
    }
}

impl ExperimentConfig {
    pub fn grid(&self) -> Result<Grid> {
        match (self.dim, self.n.as_slice()) {
            (1, [n]) => Grid::line(*n),
            (2, [n]) => Grid::square(*n, *n),
            (2, [nx, ny]) => Grid::square(*nx, *ny),
            (d, n) => Err(Error::Config(format!("n = {n:?} does not fit dim = {d}"))),
        }
    }

    pub fn nonlinearity(&self) -> Result<Nonlinearity> {
        self.g.build()
    }

    fn validate(&self) -> Result<()> {
        if self.dim != 1 && self.dim != 2 {
            return Err(Error::Config(format!("dim must be 1 or 2, got {}", self.dim)));
        }
        let floor = 2f64.max(self.dim as f64);
        if !(self.p > floor) || !self.p.is_finite() {
            return Err(Error::Config(format!(
                "p = {} violates p > max(2, dim) = {floor}",
                self.p
            )));
        }
        self.grid()?;
        let g = self.nonlinearity()?;
        let x = [0.5, 0.5];
        if !(g.g0(x) > g.ginf(x) && g.ginf(x) >= 0.0) {
            return Err(Error::Config("need g_0 > g_inf >= 0".into()));
        }
        if let LambdaSpec::Value(v) = self.lambda {
            if !(v > 0.0) {
                return Err(Error::Config(format!("lambda must be positive, got {v}")));
            }
        }
        if !(self.delta > 0.0) {
            return Err(Error::Config("delta must be positive".into()));
        }
        self.solver.validate()?;
        self.step.validate()?;
        Ok(())
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let num = |v: &str| -> Result<f64> {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("{key}: expected a number, got {v:?}")))
        };
        let int = |v: &str| -> Result<usize> {
            v.trim()
                .parse::<usize>()
                .map_err(|_| Error::Config(format!("{key}: expected an integer, got {v:?}")))
        };
        match key {
            "dim" => self.dim = int(value)?,
            "n" => {
                self.n = value
                    .split(|c| c == ',' || c == 'x')
                    .map(int)
                    .collect::<Result<_>>()?
            }
            "p" => self.p = num(value)?,
            "g" => self.g = parse_g(value)?,
            "lambda" => self.lambda = parse_lambda(value)?,
            "v0" => self.v0 = parse_initial(value)?,
            "w0" => self.w0 = parse_second(value)?,
            "weight" => self.weight = parse_weight(value)?,
            "schedule" => self.schedule = parse_schedule(value)?,
            "gamma" => self.gamma = parse_gamma(value)?,
            "delta" => self.delta = num(value)?,
            "tol" | "tol_residual" => self.solver.tol_residual = num(value)?,
            "max_iter" => self.solver.max_iter = int(value)?,
            "newton_max_iter" => self.solver.newton_max_iter = int(value)?,
            "damping" => self.solver.damping = num(value)?,
            "eps_jacobian" => self.solver.eps_jacobian = num(value)?,
            "dt_init" => self.step.dt_init = num(value)?,
            "dt_min" => self.step.dt_min = num(value)?,
            "dt_max" => self.step.dt_max = num(value)?,
            "blowup_threshold" => self.step.blowup_threshold = num(value)?,
            "T" | "horizon" => self.step.horizon = num(value)?,
            "stationarity_tol" => self.step.stationarity_tol = num(value)?,
            "max_steps" => self.step.max_steps = int(value)?,
            "output" => self.output = Some(PathBuf::from(value.trim())),
            other => return Err(Error::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }
}

/// Parses and validates a configuration.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::default();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key=value, got {line:?}", no + 1)))?;
        cfg.set(key.trim(), value.trim())
            .map_err(|e| match e {
                Error::Config(m) => Error::Config(format!("line {}: {m}", no + 1)),
                other => other,
            })?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn parse_g(value: &str) -> Result<NonlinearitySpec> {
    let mut parts = value.split_whitespace();
    let family = match parts.next() {
        Some("one_plus_exp") => Family::OnePlusExp,
        Some("power_decay") => Family::PowerDecay,
        other => {
            return Err(Error::Config(format!(
                "g: unknown family {other:?}; use one_plus_exp or power_decay"
            )))
        }
    };
    let mut spec = NonlinearitySpec {
        family,
        a: 1.0,
        b: 1.0,
        c: 1.0,
    };
    for part in parts {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("g: expected name=value, got {part:?}")))?;
        let v: f64 = v
            .parse()
            .map_err(|_| Error::Config(format!("g: {k} is not a number: {v:?}")))?;
        match k {
            "a" => spec.a = v,
            "b" => spec.b = v,
            "c" => spec.c = v,
            _ => return Err(Error::Config(format!("g: unknown parameter {k:?}"))),
        }
    }
    spec.build()?;
    Ok(spec)
}

/// `<factor>*<name>` or `<name>`; `None` when `value` is not of that form.
fn scaled_symbol<'a>(value: &'a str, names: &[&str]) -> Result<Option<(f64, &'a str)>> {
    let (factor, name) = match value.split_once('*') {
        Some((f, n)) => {
            let f = f
                .trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("bad factor in {value:?}")))?;
            (f, n.trim())
        }
        None => (1.0, value.trim()),
    };
    Ok(names.contains(&name).then_some((factor, name)))
}

fn parse_lambda(value: &str) -> Result<LambdaSpec> {
    if let Ok(v) = value.trim().parse::<f64>() {
        return Ok(LambdaSpec::Value(v));
    }
    match scaled_symbol(value, &["lambda_min", "lambda_max", "mid"])? {
        Some((factor, name)) => Ok(LambdaSpec::Scaled {
            factor,
            anchor: match name {
                "lambda_min" => Anchor::LambdaMin,
                "lambda_max" => Anchor::LambdaMax,
                _ => Anchor::Mid,
            },
        }),
        None => Err(Error::Config(format!(
            "lambda: expected a number, mid, or <factor>*lambda_min|lambda_max|mid, got {value:?}"
        ))),
    }
}

fn parse_initial(value: &str) -> Result<InitialSpec> {
    let v = value.trim();
    if let Some(path) = v.strip_prefix("file:") {
        return Ok(InitialSpec::File(PathBuf::from(path.trim())));
    }
    let (head, scale) = match v.split_once(')') {
        Some((h, rest)) if h.starts_with("random_positive(") => {
            let scale = match rest.trim().strip_prefix('*') {
                Some(s) => s
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Config(format!("v0: bad scale in {v:?}")))?,
                None if rest.trim().is_empty() => 0.5,
                None => return Err(Error::Config(format!("v0: trailing text in {v:?}"))),
            };
            (Some(h), scale)
        }
        _ => (None, 0.0),
    };
    if let Some(h) = head {
        let seed = h["random_positive(".len()..]
            .trim()
            .parse::<u64>()
            .map_err(|_| Error::Config(format!("v0: bad seed in {v:?}")))?;
        return Ok(InitialSpec::RandomPositive { seed, scale });
    }
    match scaled_symbol(v, &["psi_min"])? {
        Some((eps, _)) if eps >= 0.0 => Ok(InitialSpec::PsiMin(eps)),
        _ => Err(Error::Config(format!(
            "v0: expected <eps>*psi_min, random_positive(<seed>), or file:<path>, got {v:?}"
        ))),
    }
}

fn parse_second(value: &str) -> Result<SecondStart> {
    match scaled_symbol(value, &["v0"])? {
        Some((f, _)) => Ok(SecondStart::ScaledV0(f)),
        None => parse_initial(value).map(SecondStart::Other),
    }
}

fn parse_weight(value: &str) -> Result<WeightSpec> {
    let v = value.trim();
    if let Some(path) = v.strip_prefix("file:") {
        return Ok(WeightSpec::File(PathBuf::from(path.trim())));
    }
    match v {
        "one" => Ok(WeightSpec::Constant(1.0)),
        "g0" => Ok(WeightSpec::GZero),
        "ginf" => Ok(WeightSpec::GInfinity),
        _ => v
            .parse::<f64>()
            .map(WeightSpec::Constant)
            .map_err(|_| Error::Config(format!("weight: expected one, g0, ginf, a number or file:<path>, got {v:?}"))),
    }
}

fn parse_gamma(value: &str) -> Result<GammaSpec> {
    let v = value.trim();
    if v == "zero" {
        return Ok(GammaSpec::Constant(0.0));
    }
    if let Ok(c) = v.parse::<f64>() {
        return Ok(GammaSpec::Constant(c));
    }
    match scaled_symbol(v, &["ginf"])? {
        Some((f, _)) => Ok(GammaSpec::GInfinity(f)),
        None => Err(Error::Config(format!(
            "gamma: expected zero, a number or <factor>*ginf, got {v:?}"
        ))),
    }
}

fn parse_schedule(value: &str) -> Result<ScheduleSpec> {
    let v = value.trim();
    if v == "default" {
        return Ok(ScheduleSpec::Default);
    }
    if let Some(rest) = v.strip_prefix("geometric") {
        let parts: Vec<&str> = rest.split_whitespace().collect();
        if parts.len() != 3 {
            return Err(Error::Config(
                "schedule: expected geometric <lo> <hi> <count>".into(),
            ));
        }
        let count = parts[2]
            .parse::<usize>()
            .map_err(|_| Error::Config(format!("schedule: bad count {:?}", parts[2])))?;
        if count == 0 {
            return Err(Error::Config("schedule: count must be positive".into()));
        }
        return Ok(ScheduleSpec::Geometric {
            lo: parse_lambda(parts[0])?,
            hi: parse_lambda(parts[1])?,
            count,
        });
    }
    v.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("schedule: bad value {s:?}")))
        })
        .collect::<Result<Vec<_>>>()
        .map(ScheduleSpec::List)
}
