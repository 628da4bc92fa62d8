//! Command-line front end.
//!
//! Exit codes: 0 on success (or when every check passes), 1 on a failed
//! check or numerical failure, 2 on a usage error. Output files are written
//! only once the command has succeeded.

mod config;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

pub use config::{
    load_config, read_config_file, resolve, Command, PartialConfig, RunConfig, UsageError,
    DEFAULT_GAMMA, DEFAULT_SEED, DEFAULT_THETA, DEFAULT_T_END,
};

use crate::chart::ContactPoint;
use crate::dynamics::{integrate, HHatProfile, RelaxationFlow, RelaxationSide};
use crate::error::Error;
use crate::legendre::{embed_from_phi, embed_from_psi};
use crate::potential::{
    build_potential, hessian_inverse_duality_check, legendre_transform, LegendreDual,
    PotentialSpec, SharedPotential,
};
use crate::statmech::spin_equivalence_check_with;
use crate::verify::run_suite;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "contact-relax",
    version,
    about = "Contact relaxation flows, Legendre duality and metric identity checks"
)]
pub struct Cli {
    /// JSON config file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: CliCommand,
}

#[derive(Debug, Subcommand)]
pub enum CliCommand {
    /// Integrate a relaxation flow and write its trajectory as CSV.
    Simulate(SimulateArgs),
    /// Run identity suites and print a JSON report.
    Verify(VerifyArgs),
    /// Legendre transform of a potential at `p`, with embedding residuals.
    Legendre(LegendreArgs),
    /// Spin relaxation under the contact flow and the master equation.
    SpinDemo(SpinDemoArgs),
}

#[derive(Debug, Default, Args)]
pub struct PotentialArgs {
    /// Registered potential: quadratic, spin or spin-dual.
    #[arg(long)]
    pub potential: Option<String>,
    /// Diagonal of the quadratic form.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub diag: Option<Vec<f64>>,
}

impl PotentialArgs {
    fn spec(&self) -> Option<PotentialSpec> {
        match (&self.potential, &self.diag) {
            (None, None) => None,
            (name, diag) => Some(PotentialSpec {
                name: name.clone().unwrap_or_default(),
                diag: diag.clone(),
                matrix: None,
            }),
        }
    }
}

#[derive(Debug, Default, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub potential: PotentialArgs,
    /// `gamma:<g1>[,<g2>...]` for `hhat = g1 Delta + g2 Delta^2 + ...`.
    #[arg(long)]
    pub profile: Option<String>,
    /// Which generating function the flow relaxes toward.
    #[arg(long, value_parser = parse_side)]
    pub side: Option<RelaxationSide>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x0: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub p0: Option<Vec<f64>>,
    #[arg(long, allow_hyphen_values = true)]
    pub z0: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub t_end: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub dt: Option<f64>,
    /// Output CSV; stdout if absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Default, Args)]
pub struct VerifyArgs {
    /// chart, potential, legendre, dynamics, metric, statmech or all.
    #[arg(long)]
    pub suite: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output JSON; stdout if absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Default, Args)]
pub struct LegendreArgs {
    #[command(flatten)]
    pub potential: PotentialArgs,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub p: Option<Vec<f64>>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Default, Args)]
pub struct SpinDemoArgs {
    /// Inverse temperature times field; the fixed coordinate `x`.
    #[arg(long, allow_hyphen_values = true)]
    pub theta: Option<f64>,
    /// Relaxation rate of `hhat = gamma Delta`.
    #[arg(long, allow_hyphen_values = true)]
    pub gamma: Option<f64>,
    /// Initial mean spin.
    #[arg(long, allow_hyphen_values = true)]
    pub p0: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub t_end: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_side(s: &str) -> Result<RelaxationSide, String> {
    match s {
        "psi" => Ok(RelaxationSide::Psi),
        "phi" => Ok(RelaxationSide::Phi),
        other => Err(format!("expected `psi` or `phi`, got `{other}`")),
    }
}

fn profile_coefficients(s: &str) -> Result<Vec<f64>, UsageError> {
    let body = s.trim().strip_prefix("gamma:").ok_or_else(|| {
        UsageError(format!(
            "profile must look like `gamma:<g1>[,<g2>...]`, got `{s}`"
        ))
    })?;
    body.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| UsageError(format!("bad profile coefficient `{t}` in `{s}`")))
        })
        .collect()
}

impl CliCommand {
    fn kind(&self) -> Command {
        match self {
            CliCommand::Simulate(_) => Command::Simulate,
            CliCommand::Verify(_) => Command::Verify,
            CliCommand::Legendre(_) => Command::Legendre,
            CliCommand::SpinDemo(_) => Command::SpinDemo,
        }
    }

    /// Flag values as a partial config.
    pub fn flags(&self) -> Result<PartialConfig, UsageError> {
        Ok(match self {
            CliCommand::Simulate(a) => PartialConfig {
                potential: a.potential.spec(),
                profile: a.profile.as_deref().map(profile_coefficients).transpose()?,
                side: a.side,
                x0: a.x0.clone(),
                p0: a.p0.clone(),
                z0: a.z0,
                dt: a.dt,
                t_end: a.t_end,
                out: a.out.clone(),
                ..Default::default()
            },
            CliCommand::Verify(a) => PartialConfig {
                suite: a.suite.clone(),
                seed: a.seed,
                out: a.out.clone(),
                ..Default::default()
            },
            CliCommand::Legendre(a) => PartialConfig {
                potential: a.potential.spec(),
                p: a.p.clone(),
                out: a.out.clone(),
                ..Default::default()
            },
            CliCommand::SpinDemo(a) => PartialConfig {
                theta: a.theta,
                profile: a.gamma.map(|g| vec![g]),
                p0: a.p0.map(|p| vec![p]),
                dt: a.dt,
                t_end: a.t_end,
                out: a.out.clone(),
                ..Default::default()
            },
        })
    }
}

/// Failure of a command after a valid invocation.
#[derive(Debug)]
pub enum RunError {
    Usage(UsageError),
    Numeric {
        context: &'static str,
        source: Error,
    },
    Io(std::io::Error),
    ChecksFailed(usize),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Usage(e) => write!(f, "usage error: {e}"),
            RunError::Numeric { context, source } => write!(f, "{context}: {source}"),
            RunError::Io(e) => write!(f, "i/o error: {e}"),
            RunError::ChecksFailed(n) => write!(f, "{n} check(s) failed"),
        }
    }
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Usage(_) => EXIT_USAGE,
            _ => EXIT_FAILURE,
        }
    }
}

impl From<UsageError> for RunError {
    fn from(e: UsageError) -> Self {
        RunError::Usage(e)
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e)
    }
}

fn numeric(context: &'static str) -> impl FnOnce(Error) -> RunError {
    move |source| match source {
        Error::InvalidProfile(msg) | Error::InvalidArgument(msg) => {
            RunError::Usage(UsageError(msg))
        }
        Error::DimensionMismatch { expected, found } => RunError::Usage(UsageError(format!(
            "{context}: dimension mismatch, expected {expected} got {found}"
        ))),
        source => RunError::Numeric { context, source },
    }
}

/// Writes `bytes` to `out` or to `stdout`.
fn emit(out: Option<&Path>, bytes: &[u8], stdout: &mut dyn Write) -> Result<(), RunError> {
    match out {
        Some(path) => std::fs::write(path, bytes)?,
        None => stdout.write_all(bytes)?,
    }
    Ok(())
}

fn potential_of(cfg: &RunConfig) -> Result<SharedPotential, RunError> {
    let spec = cfg.potential.as_ref().expect("validated");
    build_potential(spec).map_err(|e| RunError::Usage(UsageError(e.to_string())))
}

fn simulate(
    cfg: &RunConfig,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<(), RunError> {
    let pot = potential_of(cfg)?;
    let (x0, p0) = (
        cfg.x0.as_deref().expect("validated"),
        cfg.p0.as_deref().expect("validated"),
    );
    if x0.len() != pot.dim() || p0.len() != pot.dim() {
        return Err(UsageError(format!(
            "potential `{}` has dimension {} but x0 has {} and p0 has {} entries",
            pot.name(),
            pot.dim(),
            x0.len(),
            p0.len()
        ))
        .into());
    }
    let hhat = HHatProfile::polynomial(cfg.profile.clone()).map_err(numeric("profile"))?;
    let flow = match cfg.side {
        RelaxationSide::Psi => RelaxationFlow::psi(pot, hhat),
        RelaxationSide::Phi => RelaxationFlow::phi(pot, hhat),
    };
    let pt0 = ContactPoint::new(x0, p0, cfg.z0).map_err(numeric("initial point"))?;
    let traj = integrate(&flow, &pt0, cfg.t_end, cfg.dt).map_err(numeric("simulate"))?;
    let mut buf = Vec::new();
    traj.write_csv(&mut buf)?;
    emit(cfg.out.as_deref(), &buf, stdout)?;
    let last = traj.diagnostics.last().expect("nonempty trajectory");
    writeln!(
        stderr,
        "simulate: {} steps, final h = {:e}, final delta = {:e}",
        traj.len() - 1,
        last.h,
        last.delta
    )?;
    Ok(())
}

fn verify(cfg: &RunConfig, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), RunError> {
    let report = run_suite(cfg.suite, cfg.seed).map_err(numeric("verify"))?;
    let mut json = report.to_json();
    json.push('\n');
    emit(cfg.out.as_deref(), json.as_bytes(), stdout)?;
    let failed: Vec<_> = report.failures().collect();
    for f in &failed {
        writeln!(
            stderr,
            "FAIL {} residual {:e} tolerance {:e}",
            f.check, f.max_residual, f.tolerance
        )?;
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(RunError::ChecksFailed(failed.len()))
    }
}

#[derive(Serialize)]
struct LegendreOutput {
    potential: String,
    p: Vec<f64>,
    x_star: Vec<f64>,
    phi: f64,
    newton_iterations: usize,
    newton_residual: f64,
    embedded_from_psi: ContactPoint,
    embedded_from_phi: ContactPoint,
    embedding_coincidence: f64,
    hessian_inverse_duality: f64,
}

fn legendre(cfg: &RunConfig, stdout: &mut dyn Write) -> Result<(), RunError> {
    let pot = potential_of(cfg)?;
    let p = cfg.p.as_deref().expect("validated");
    if p.len() != pot.dim() {
        return Err(UsageError(format!(
            "potential `{}` has dimension {} but p has {} entries",
            pot.name(),
            pot.dim(),
            p.len()
        ))
        .into());
    }
    let (phi, solve) =
        legendre_transform(pot.as_ref(), p, None).map_err(numeric("legendre transform"))?;
    let dual = LegendreDual::new(pot.clone());
    let from_psi = embed_from_psi(pot.as_ref(), &solve.x_star).map_err(numeric("psi embedding"))?;
    let from_phi = embed_from_phi(&dual, p).map_err(numeric("phi embedding"))?;
    let duality = hessian_inverse_duality_check(pot.as_ref(), &solve.x_star)
        .map_err(numeric("hessian duality"))?;
    let out = LegendreOutput {
        potential: pot.name().to_string(),
        p: p.to_vec(),
        x_star: solve.x_star.clone(),
        phi,
        newton_iterations: solve.iterations,
        newton_residual: solve.residual_norm,
        embedding_coincidence: from_psi.max_abs_diff(&from_phi),
        embedded_from_psi: from_psi,
        embedded_from_phi: from_phi,
        hessian_inverse_duality: duality,
    };
    let mut json = serde_json::to_string_pretty(&out).expect("serializable");
    json.push('\n');
    emit(cfg.out.as_deref(), json.as_bytes(), stdout)
}

fn spin_demo(
    cfg: &RunConfig,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<(), RunError> {
    let p0 = cfg.p0.as_ref().map_or(0.0, |p| p[0]);
    if !(p0 > -1.0 && p0 < 1.0) {
        return Err(UsageError(format!(
            "`p0` is a mean spin and must lie in (-1, 1), got {p0}"
        ))
        .into());
    }
    let run = spin_equivalence_check_with(cfg.profile[0], p0, cfg.theta, cfg.t_end, cfg.dt)
        .map_err(numeric("spin-demo"))?;
    let mut buf = Vec::new();
    run.write_csv(&mut buf)?;
    emit(cfg.out.as_deref(), &buf, stdout)?;
    writeln!(
        stderr,
        "spin-demo: max |p_contact - sigma_master| = {:e}",
        run.max_deviation
    )?;
    Ok(())
}

/// Executes a resolved configuration.
pub fn execute(
    cfg: &RunConfig,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<(), RunError> {
    match cfg.command {
        Command::Simulate => simulate(cfg, stdout, stderr),
        Command::Verify => verify(cfg, stdout, stderr),
        Command::Legendre => legendre(cfg, stdout),
        Command::SpinDemo => spin_demo(cfg, stdout, stderr),
    }
}

/// Executes `cfg` and returns the process exit code.
pub fn run(cfg: &RunConfig, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    match execute(cfg, stdout, stderr) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn main_with_args<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                stderr.write_all(text.as_bytes())
            } else {
                stdout.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let cfg = cli
        .command
        .flags()
        .and_then(|flags| load_config(cli.command.kind(), cli.config.as_deref(), flags));
    match cfg {
        Ok(cfg) => run(&cfg, stdout, stderr),
        Err(e) => {
            let _ = writeln!(stderr, "usage error: {e}");
            EXIT_USAGE
        }
    }
}
