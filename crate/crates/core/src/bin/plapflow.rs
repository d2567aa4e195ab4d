use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use plapflow::cli::{parse_config, run_command, Command};
use plapflow::Error;

/// Names the output directory when neither `--output` nor `output=` is given.
const OUT_DIR_ENV: &str = "PLAPFLOW_OUT_DIR";

#[derive(Parser)]
#[command(name = "plapflow", version, about = "p-Laplacian gradient flow experiments")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Principal eigenvalue of -Delta_p with a weight.
    Eigen(Overrides),
    /// One positive equilibrium at a given lambda.
    Equilibrium(Overrides),
    /// Equilibrium branch along a lambda schedule.
    Branch(Overrides),
    /// Backward Euler trajectory.
    Evolve(Overrides),
    /// Comparison of the full problem with a frozen-weight problem.
    Compare(Overrides),
    /// Decay, convergence and blow-up regimes from one initial state.
    Trichotomy(Overrides),
}

/// Every flag overrides the config key of the same name.
#[derive(Args, Default)]
struct Overrides {
    /// key=value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Extra KEY=VALUE lines, applied after the file and the other flags.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    dim: Option<String>,
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    p: Option<String>,
    #[arg(long)]
    g: Option<String>,
    #[arg(long)]
    lambda: Option<String>,
    #[arg(long)]
    v0: Option<String>,
    #[arg(long)]
    w0: Option<String>,
    #[arg(long)]
    weight: Option<String>,
    #[arg(long)]
    schedule: Option<String>,
    #[arg(long)]
    gamma: Option<String>,
    #[arg(long)]
    delta: Option<String>,
    #[arg(long)]
    tol: Option<String>,
    #[arg(long = "max_iter", alias = "max-iter")]
    max_iter: Option<String>,
    #[arg(long = "newton_max_iter", alias = "newton-max-iter")]
    newton_max_iter: Option<String>,
    #[arg(long)]
    damping: Option<String>,
    #[arg(long = "eps_jacobian", alias = "eps-jacobian")]
    eps_jacobian: Option<String>,
    #[arg(long = "dt_init", alias = "dt-init")]
    dt_init: Option<String>,
    #[arg(long = "dt_min", alias = "dt-min")]
    dt_min: Option<String>,
    #[arg(long = "dt_max", alias = "dt-max")]
    dt_max: Option<String>,
    #[arg(long = "blowup_threshold", alias = "blowup-threshold")]
    blowup_threshold: Option<String>,
    #[arg(long = "T")]
    horizon: Option<String>,
    #[arg(long = "stationarity_tol", alias = "stationarity-tol")]
    stationarity_tol: Option<String>,
    #[arg(long = "max_steps", alias = "max-steps")]
    max_steps: Option<String>,
    #[arg(long)]
    output: Option<String>,
}

impl Overrides {
    fn lines(&self) -> Vec<String> {
        let flags = [
            ("dim", &self.dim),
            ("n", &self.n),
            ("p", &self.p),
            ("g", &self.g),
            ("lambda", &self.lambda),
            ("v0", &self.v0),
            ("w0", &self.w0),
            ("weight", &self.weight),
            ("schedule", &self.schedule),
            ("gamma", &self.gamma),
            ("delta", &self.delta),
            ("tol", &self.tol),
            ("max_iter", &self.max_iter),
            ("newton_max_iter", &self.newton_max_iter),
            ("damping", &self.damping),
            ("eps_jacobian", &self.eps_jacobian),
            ("dt_init", &self.dt_init),
            ("dt_min", &self.dt_min),
            ("dt_max", &self.dt_max),
            ("blowup_threshold", &self.blowup_threshold),
            ("T", &self.horizon),
            ("stationarity_tol", &self.stationarity_tol),
            ("max_steps", &self.max_steps),
            ("output", &self.output),
        ];
        flags
            .into_iter()
            .filter_map(|(k, v)| v.as_ref().map(|v| format!("{k}={v}")))
            .chain(self.set.iter().cloned())
            .collect()
    }
}

fn run(cmd: Command, o: &Overrides) -> Result<bool, Error> {
    let mut text = match &o.config {
        Some(path) => std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?,
        None => String::new(),
    };
    for line in o.lines() {
        if line.contains('\n') {
            return Err(Error::Config(format!("override {line:?} spans several lines")));
        }
        text.push('\n');
        text.push_str(&line);
    }
    let cfg = parse_config(&text)?;
    let out_dir = cfg
        .output
        .clone()
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    let out = run_command(cmd, &cfg, &out_dir)?;
    // a closed pipe (e.g. `| head`) is not a failure of the run
    let mut stdout = std::io::stdout().lock();
    let _ = stdout.write_all(out.text.as_bytes());
    for f in &out.files {
        let _ = writeln!(stdout, "wrote {}", f.display());
    }
    Ok(out.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cmd, o) = match &cli.command {
        Sub::Eigen(o) => (Command::Eigen, o),
        Sub::Equilibrium(o) => (Command::Equilibrium, o),
        Sub::Branch(o) => (Command::Branch, o),
        Sub::Evolve(o) => (Command::Evolve, o),
        Sub::Compare(o) => (Command::Compare, o),
        Sub::Trichotomy(o) => (Command::Trichotomy, o),
    };
    match run(cmd, o) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("plapflow {}: {e}", cmd.name());
            ExitCode::from(if e.is_config() { 3 } else { 2 })
        }
    }
}
