//! Command-line driver: configuration, orchestration and report emission.
//!
//! Exit status: 0 when every check passes, 1 when a check fails, 2 for
//! configuration errors and 3 for numerical or output errors.

pub mod commands;
pub mod config;
pub mod report;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::{run, Check, Command, DiffusionOp, HaarOp, Rate};
pub use config::{Format, RunConfig, Settings};
pub use report::Report;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "PATHSPACE_OUT_DIR";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("output error: {0}")]
    Output(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) | CliError::Output(_) => 3,
        }
    }
}

impl From<pathspace::Error> for CliError {
    fn from(e: pathspace::Error) -> Self {
        match e.root() {
            pathspace::Error::Argument(_) => CliError::Config(e.to_string()),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "pathspace", version, about = "Path-space functional inequality experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Cmd,
    #[command(flatten)]
    pub opts: Opts,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Sample horizontal Brownian paths and dump them.
    Simulate,
    /// Check a functional inequality on the test suite.
    Verify {
        #[arg(value_enum)]
        check: Check,
    },
    /// Tabulate the curvature-to-rate functions.
    Rates {
        #[arg(value_enum)]
        rate: Rate,
    },
    /// Haar basis utilities.
    Haar {
        #[arg(value_enum)]
        op: HaarOp,
    },
    /// Diagonal diffusion operators on the Haar basis.
    Diffusion {
        #[arg(value_enum)]
        op: DiffusionOp,
    },
}

impl Cmd {
    pub fn command(&self) -> Command {
        match *self {
            Cmd::Simulate => Command::Simulate,
            Cmd::Verify { check } => Command::Verify(check),
            Cmd::Rates { rate } => Command::Rates(rate),
            Cmd::Haar { op } => Command::Haar(op),
            Cmd::Diffusion { op } => Command::Diffusion(op),
        }
    }
}

/// Options shared by all commands; values are validated when applied.
#[derive(Debug, Args)]
pub struct Opts {
    /// euclidean:N, sphere2, hyperbolic2 or logsurface:A,B
    #[arg(long, global = true)]
    manifold: Option<String>,
    #[arg(long, global = true)]
    paths: Option<String>,
    #[arg(long, global = true)]
    steps: Option<String>,
    #[arg(long, global = true)]
    seed: Option<String>,
    /// Worker threads (0 = all cores); never changes results
    #[arg(long, global = true)]
    workers: Option<String>,
    /// default, linear or gaussian
    #[arg(long, global = true)]
    suite: Option<String>,
    /// Confidence multiplier on standard errors
    #[arg(long, global = true)]
    ci: Option<String>,
    /// Discretisation slack
    #[arg(long, global = true)]
    slack: Option<String>,
    /// Haar truncation level
    #[arg(long, global = true)]
    level: Option<String>,
    /// Dimension of the Haar basis
    #[arg(long, global = true)]
    n: Option<String>,
    /// parametric or manifold curvature profile
    #[arg(long, global = true)]
    profile: Option<String>,
    #[arg(long, global = true)]
    c1: Option<String>,
    #[arg(long, global = true)]
    c2: Option<String>,
    #[arg(long, global = true)]
    delta1: Option<String>,
    #[arg(long, global = true)]
    delta2: Option<String>,
    /// analytic or mc tail probabilities
    #[arg(long, global = true)]
    tail: Option<String>,
    #[arg(long, global = true)]
    tail_c1: Option<String>,
    #[arg(long, global = true)]
    tail_c2: Option<String>,
    #[arg(long, global = true)]
    c3: Option<String>,
    /// Comma-separated evaluation points
    #[arg(long, global = true)]
    r: Option<String>,
    #[arg(long, global = true)]
    r1: Option<String>,
    #[arg(long, global = true)]
    radius: Option<String>,
    #[arg(long, global = true)]
    eigen_c: Option<String>,
    #[arg(long, global = true)]
    eigen_delta: Option<String>,
    #[arg(long, global = true)]
    ball_radius: Option<String>,
    #[arg(long, global = true)]
    draws: Option<String>,
    #[arg(long, global = true)]
    sum_levels: Option<String>,
    /// Output file; defaults to $PATHSPACE_OUT_DIR/<command>.<ext>, else stdout
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Flat key=value file applied after the flags
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

impl Opts {
    fn overrides(&self) -> Vec<(&'static str, &String)> {
        let pairs = [
            ("manifold", &self.manifold),
            ("paths", &self.paths),
            ("steps", &self.steps),
            ("seed", &self.seed),
            ("workers", &self.workers),
            ("suite", &self.suite),
            ("ci", &self.ci),
            ("slack", &self.slack),
            ("level", &self.level),
            ("n", &self.n),
            ("profile", &self.profile),
            ("c1", &self.c1),
            ("c2", &self.c2),
            ("delta1", &self.delta1),
            ("delta2", &self.delta2),
            ("tail", &self.tail),
            ("tail_c1", &self.tail_c1),
            ("tail_c2", &self.tail_c2),
            ("c3", &self.c3),
            ("r", &self.r),
            ("r1", &self.r1),
            ("radius", &self.radius),
            ("eigen_c", &self.eigen_c),
            ("eigen_delta", &self.eigen_delta),
            ("ball_radius", &self.ball_radius),
            ("draws", &self.draws),
            ("sum_levels", &self.sum_levels),
        ];
        pairs.into_iter().filter_map(|(k, v)| v.as_ref().map(|v| (k, v))).collect()
    }

    /// Defaults, then flags, then the config file.
    pub fn settings(&self) -> Result<Settings, CliError> {
        let mut s = Settings::default();
        for (k, v) in self.overrides() {
            s.set(k, v).map_err(|m| CliError::Config(format!("--{}: {m}", k.replace('_', "-"))))?;
        }
        if let Some(f) = self.format {
            s.format = f;
        }
        if let Some(o) = &self.out {
            s.out = Some(o.clone());
        }
        if let Some(path) = &self.config {
            s.apply_file(path)?;
        }
        Ok(s)
    }
}

fn extension(f: Format) -> &'static str {
    match f {
        Format::Json => "jsonl",
        Format::Csv => "csv",
        Format::Svg => "svg",
    }
}

/// Parses `args`, runs the command and emits the report; returns the exit status.
pub fn main_with<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = if code == 0 { write!(stdout, "{e}") } else { write!(stderr, "{e}") };
            return code;
        }
    };
    let outcome = cli.opts.settings().and_then(|settings| {
        let command = cli.command.command();
        let report = run(command, &settings)?;
        let out = settings.out.clone().or_else(|| {
            std::env::var_os(OUT_DIR_ENV).map(|dir| {
                let name = command.label().replace(' ', "-");
                PathBuf::from(dir).join(format!("{name}.{}", extension(settings.format)))
            })
        });
        if let Some(text) = report::emit(&report, settings.format, out.as_deref())? {
            stdout.write_all(text.as_bytes()).map_err(|e| CliError::Output(e.to_string()))?;
        } else if let Some(p) = &out {
            let _ = writeln!(stderr, "wrote {}", p.display());
        }
        Ok(report)
    });
    match outcome {
        Ok(report) if report.passed() => 0,
        Ok(report) => {
            for r in report.payload.results.iter().filter(|r| !r.pass) {
                let _ = writeln!(stderr, "check failed: {} (margin {:?})", r.id, r.margin);
            }
            1
        }
        Err(e) => {
            let _ = writeln!(stderr, "{e}");
            e.exit_code()
        }
    }
}
