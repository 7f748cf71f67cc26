//! Run configuration: defaults, command-line overrides and flat `key=value` files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use pathspace::geometry::{ManifoldKind, ManifoldModel};
use pathspace::inequalities::MCConfig;
use pathspace::malliavin::suite::SUITE_NAMES;

use crate::CliError;

/// Everything that determines the results of a run. Embedded in every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub manifold: String,
    pub paths: usize,
    pub steps: usize,
    pub seed: u64,
    pub suite: String,
    pub ci: f64,
    pub slack: f64,
    /// Haar truncation level.
    pub level: u32,
    /// Dimension of the Haar basis for `haar gram`.
    pub n: usize,
    /// `parametric` or `manifold`.
    pub profile: String,
    pub c1: f64,
    pub c2: f64,
    pub delta1: f64,
    pub delta2: f64,
    /// `analytic` or `mc`.
    pub tail: String,
    pub tail_c1: f64,
    pub tail_c2: f64,
    pub c3: f64,
    /// Evaluation points of `r`; empty selects a built-in grid.
    pub r: Vec<f64>,
    pub r1: f64,
    pub radius: f64,
    pub eigen_c: f64,
    pub eigen_delta: f64,
    pub ball_radius: Option<f64>,
    pub draws: usize,
    pub sum_levels: u32,
}

impl Default for RunConfig {
    fn default() -> Self {
        let mc = MCConfig::default();
        RunConfig {
            manifold: "sphere2".into(),
            paths: mc.paths,
            steps: mc.steps,
            seed: mc.seed,
            suite: "default".into(),
            ci: mc.ci,
            slack: mc.slack,
            level: pathspace::cmspace::DEFAULT_LEVEL,
            n: 1,
            profile: "parametric".into(),
            c1: 1.0,
            c2: 1.0,
            delta1: 0.0,
            delta2: 0.0,
            tail: "analytic".into(),
            tail_c1: 1.0,
            tail_c2: 0.5,
            c3: 1.0,
            r: Vec::new(),
            r1: 0.5,
            radius: 4.0,
            eigen_c: 1.0,
            eigen_delta: 0.5,
            ball_radius: None,
            draws: 1000,
            sum_levels: 20,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    Svg,
}

/// Resolved settings: the reported config plus knobs that never change results.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub run: RunConfig,
    pub workers: usize,
    pub format: Format,
    pub out: Option<PathBuf>,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            run: RunConfig::default(),
            workers: 0,
            format: Format::Json,
            out: None,
        }
    }
}

fn num<T: std::str::FromStr>(value: &str) -> Result<T, String> {
    value.trim().parse().map_err(|_| format!("cannot parse {value:?}"))
}

fn real(value: &str) -> Result<f64, String> {
    let v: f64 = num(value)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{value:?} is not finite"))
    }
}

impl Settings {
    /// Applies one `key = value` override. Keys use `_` or `-` interchangeably.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let r = &mut self.run;
        let value = value.trim();
        match key.trim().replace('-', "_").as_str() {
            "manifold" => r.manifold = value.to_string(),
            "paths" => r.paths = num(value)?,
            "steps" => r.steps = num(value)?,
            "seed" => r.seed = num(value)?,
            "workers" => self.workers = num(value)?,
            "suite" => r.suite = value.to_string(),
            "ci" => r.ci = real(value)?,
            "slack" => r.slack = real(value)?,
            "level" => r.level = num(value)?,
            "n" => r.n = num(value)?,
            "profile" => r.profile = value.to_string(),
            "c1" => r.c1 = real(value)?,
            "c2" => r.c2 = real(value)?,
            "delta1" => r.delta1 = real(value)?,
            "delta2" => r.delta2 = real(value)?,
            "tail" => r.tail = value.to_string(),
            "tail_c1" => r.tail_c1 = real(value)?,
            "tail_c2" => r.tail_c2 = real(value)?,
            "c3" => r.c3 = real(value)?,
            "r" => {
                r.r = value
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(real)
                    .collect::<Result<_, _>>()?
            }
            "r1" => r.r1 = real(value)?,
            "radius" => r.radius = real(value)?,
            "eigen_c" => r.eigen_c = real(value)?,
            "eigen_delta" => r.eigen_delta = real(value)?,
            "ball_radius" => r.ball_radius = if value.is_empty() { None } else { Some(real(value)?) },
            "draws" => r.draws = num(value)?,
            "sum_levels" => r.sum_levels = num(value)?,
            "format" => {
                self.format = <Format as clap::ValueEnum>::from_str(value, true).map_err(|_| format!("unknown format {value:?}"))?
            }
            "out" => self.out = Some(PathBuf::from(value)),
            _ => return Err("unknown key".into()),
        }
        Ok(())
    }

    /// Applies a flat `key=value` file; `#` starts a comment.
    pub fn apply_file_text(&mut self, text: &str, origin: &str) -> Result<(), CliError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let at = |key: &str, msg: &str| CliError::Config(format!("{origin}:{}: key {key:?}: {msg}", i + 1));
            let (key, value) = line.split_once('=').ok_or_else(|| at(line, "expected key=value"))?;
            self.set(key, value).map_err(|m| at(key.trim(), &m))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config file {}: {e}", path.display())))?;
        self.apply_file_text(&text, &path.display().to_string())
    }
}

impl RunConfig {
    pub fn model(&self) -> Result<ManifoldModel, CliError> {
        let kind: ManifoldKind = self.manifold.parse()?;
        Ok(ManifoldModel::from_kind(kind)?)
    }

    pub fn mc(&self, workers: usize) -> MCConfig {
        MCConfig {
            paths: self.paths,
            steps: self.steps,
            seed: self.seed,
            workers,
            slack: self.slack,
            ci: self.ci,
        }
    }

    /// Checks the fields shared by every command.
    pub fn validate(&self) -> Result<(), CliError> {
        self.model()?;
        if !SUITE_NAMES.contains(&self.suite.as_str()) {
            return Err(CliError::Config(format!("unknown suite {:?}; expected one of {SUITE_NAMES:?}", self.suite)));
        }
        if !["parametric", "manifold"].contains(&self.profile.as_str()) {
            return Err(CliError::Config(format!("profile must be parametric or manifold, got {:?}", self.profile)));
        }
        if !["analytic", "mc"].contains(&self.tail.as_str()) {
            return Err(CliError::Config(format!("tail must be analytic or mc, got {:?}", self.tail)));
        }
        if self.level > 16 || self.sum_levels > 40 {
            return Err(CliError::Config("level must be <= 16 and sum_levels <= 40".into()));
        }
        Ok(())
    }
}
