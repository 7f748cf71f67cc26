//! Command implementations. Each returns a [`Report`]; nothing here touches the filesystem.

use std::collections::BTreeMap;

use pathspace::cmspace::{haar_vector, mode_count, synthesize_haar};
use pathspace::diffusion::{
    apply_sqrt, ea_samples, floor_check, summability, wedge_bound_check, BallWeight, DiagonalOperator, Verdict,
};
use pathspace::geometry::CurvatureProfile;
use pathspace::inequalities::rates::{fit_log_exponent, super_poincare_beta, RatePipeline, TailMode};
use pathspace::inequalities::{
    collect_samples, lsi_damped_report, poincare_report, sample_rho, weighted_lsi_report, InequalityReport, MCConfig,
};
use pathspace::malliavin::suite::suite_by_name;
use pathspace::mc::{Estimate, PathStream};
use pathspace::pathsim::{rho, roll_path, TimeGrid};

use crate::config::{RunConfig, Settings};
use crate::report::{Metadata, Payload, Report, ResultRow, Table, SCHEMA_VERSION};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Check {
    Lsi,
    WeightedLsi,
    Poincare,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Rate {
    Theta,
    Alpha,
    Beta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum HaarOp {
    Gram,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum DiffusionOp {
    Check,
    Ea,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Verify(Check),
    Rates(Rate),
    Haar(HaarOp),
    Diffusion(DiffusionOp),
}

impl Command {
    pub fn label(&self) -> String {
        match self {
            Command::Simulate => "simulate".into(),
            Command::Verify(c) => format!("verify {}", sub(c)),
            Command::Rates(r) => format!("rates {}", sub(r)),
            Command::Haar(h) => format!("haar {}", sub(h)),
            Command::Diffusion(d) => format!("diffusion {}", sub(d)),
        }
    }
}

#[derive(Default)]
struct Body {
    results: Vec<ResultRow>,
    tables: BTreeMap<String, Table>,
    notes: Vec<String>,
}

fn sub<V: clap::ValueEnum>(v: &V) -> String {
    v.to_possible_value().map(|p| p.get_name().to_string()).unwrap_or_default()
}

/// Runs `command` and assembles its report.
pub fn run(command: Command, settings: &Settings) -> Result<Report, CliError> {
    let cfg = &settings.run;
    cfg.validate()?;
    let mc = cfg.mc(settings.workers);
    let body = match command {
        Command::Simulate => simulate(cfg, &mc)?,
        Command::Verify(c) => verify(cfg, &mc, c)?,
        Command::Rates(r) => rates(cfg, &mc, r)?,
        Command::Haar(HaarOp::Gram) => haar_gram(cfg)?,
        Command::Diffusion(DiffusionOp::Check) => diffusion_check(cfg, &mc)?,
        Command::Diffusion(DiffusionOp::Ea) => diffusion_ea(cfg, &mc)?,
    };
    Ok(Report {
        payload: Payload {
            schema_version: SCHEMA_VERSION,
            command: command.label(),
            config: cfg.clone(),
            seed: cfg.seed,
            results: body.results,
            tables: body.tables,
            notes: body.notes,
        },
        metadata: Metadata::now(settings.workers),
    })
}

fn simulate(cfg: &RunConfig, mc: &MCConfig) -> Result<Body, CliError> {
    let model = cfg.model()?;
    let grid = TimeGrid::new(cfg.steps)?;
    let amb = model.ambient_dim();
    let mut columns = vec!["path".to_string(), "step".into(), "t".into()];
    columns.extend((0..amb).map(|i| format!("x{i}")));
    for j in 0..model.dim() {
        columns.extend((0..amb).map(|i| format!("e{j}_{i}")));
    }
    let paths = pathspace::mc::map_paths(cfg.paths, mc.workers, |i| roll_path(&model, grid, cfg.seed, i))?;
    let mut table = Table {
        columns,
        ..Table::default()
    };
    let mut radii = Vec::with_capacity(paths.len());
    for (i, p) in paths.iter().enumerate() {
        radii.push(rho(&model, p));
        for k in 0..=grid.steps() {
            let mut row = vec![i as f64, k as f64, grid.node(k)];
            row.extend_from_slice(p.point(k));
            row.extend_from_slice(p.frame_flat(k));
            table.push(&row);
        }
    }
    let r = Estimate::from_samples(&radii);
    let mut body = Body::default();
    body.results.push(ResultRow::value("rho-mean", r.mean, r.se));
    body.tables.insert("paths".into(), table);
    Ok(body)
}

fn inequality_rows(report: &InequalityReport) -> Vec<ResultRow> {
    let mut rows = vec![ResultRow::check(
        report.id.clone(),
        (report.lhs.mean, report.lhs.se),
        (report.rhs.mean, report.rhs.se),
        report.margin,
        report.pass,
    )];
    for f in &report.functions {
        rows.push(ResultRow::check(
            format!("{}:{}", report.id, f.name),
            (f.lhs.mean, f.lhs.se),
            (f.rhs.mean, f.rhs.se),
            f.margin,
            f.pass,
        ));
    }
    if report.id == "poincare" {
        let c = report.fitted_constant.unwrap_or(f64::NAN);
        rows.push(ResultRow::value("poincare:fitted-constant", c, 0.0));
    }
    rows
}

fn verify(cfg: &RunConfig, mc: &MCConfig, check: Check) -> Result<Body, CliError> {
    let model = cfg.model()?;
    let suite = suite_by_name(&model, &cfg.suite)?;
    let samples = collect_samples(&model, &suite, mc)?;
    let report = match check {
        Check::Lsi => lsi_damped_report(&samples, mc),
        Check::WeightedLsi => weighted_lsi_report(&samples, mc),
        Check::Poincare => poincare_report(&samples, mc),
    };
    let mut body = Body {
        results: inequality_rows(&report),
        ..Body::default()
    };
    body.notes.extend(report.warnings.iter().cloned());
    for f in &report.functions {
        if let Some(flag) = &f.flag {
            body.notes.push(format!("{}: {flag}", f.name));
        }
    }
    Ok(body)
}

fn profile(cfg: &RunConfig) -> Result<CurvatureProfile, CliError> {
    Ok(match cfg.profile.as_str() {
        "manifold" => cfg.model()?.profile(),
        _ => CurvatureProfile::parametric(cfg.c1, cfg.c2, cfg.delta1, cfg.delta2)?,
    })
}

fn tail_mode(cfg: &RunConfig, mc: &MCConfig) -> Result<TailMode, CliError> {
    Ok(match cfg.tail.as_str() {
        "mc" => TailMode::monte_carlo(sample_rho(&cfg.model()?, mc)?),
        _ => TailMode::Analytic {
            c1: cfg.tail_c1,
            c2: cfg.tail_c2,
        },
    })
}

/// `ln r` grid used when no `r` values are given: down to about `e^{−680}`.
fn default_ln_rs() -> Vec<f64> {
    (0..60).map(|i| -(2.0_f64).ln() - 11.5 * i as f64).collect()
}

/// `|ln r|`-exponent fits only use `r ≤ e^{−46}`.
const FIT_LN_R_MAX: f64 = -46.0;
/// Allowed distance between the fitted and the predicted exponent.
const EXPONENT_TOLERANCE: f64 = 0.15;

fn rates(cfg: &RunConfig, mc: &MCConfig, which: Rate) -> Result<Body, CliError> {
    let mut body = Body::default();
    if which == Rate::Beta {
        let rs = if cfg.r.is_empty() { vec![1.0] } else { cfg.r.clone() };
        for &r in &rs {
            let b = super_poincare_beta(r, cfg.c3, cfg.delta1, cfg.delta2)?;
            body.results.push(ResultRow::value(format!("beta(r={r})"), b, 0.0));
        }
        let mut t = Table::new(&["r", "beta"]).plotted(true, true);
        for i in 0..=40 {
            let r = 10f64.powf(-2.0 + 4.0 * i as f64 / 40.0);
            t.push(&[r, super_poincare_beta(r, cfg.c3, cfg.delta1, cfg.delta2)?]);
        }
        body.tables.insert("beta".into(), t);
        return Ok(body);
    }
    let prof = profile(cfg)?;
    let pipeline = RatePipeline::new(prof, tail_mode(cfg, mc)?)?;
    match which {
        Rate::Theta => {
            let big = cfg.radius;
            let mut t = Table::new(&["r", "theta", "g_R"]).plotted(false, false);
            for i in 0..=200 {
                let r = 1.5 * big * i as f64 / 200.0;
                let g = if big > cfg.r1 { pipeline.g_r(r, big, cfg.r1)? } else { f64::NAN };
                t.push(&[r, pipeline.theta(r, cfg.r1)?, g]);
            }
            body.tables.insert("theta".into(), t);
            let mut tail = Table::new(&["R", "tail"]).plotted(false, true);
            for i in 0..=100 {
                let r = big * i as f64 / 100.0;
                tail.push(&[r, pipeline.tail.log_tail(r).map_or(f64::NAN, f64::exp)]);
            }
            body.tables.insert("tail".into(), tail);
            body.results.push(ResultRow::value(format!("theta(R={big})"), pipeline.theta(big, cfg.r1)?, 0.0));
            let d = pipeline.divergence_check(10.0)?;
            body.results.push(ResultRow::check(
                "theta-divergence",
                (d.samples.last().map_or(f64::NAN, |s| s.1), 0.0),
                (10f64.ln(), 0.0),
                d.samples.last().map_or(f64::NAN, |s| s.1 - 10f64.ln()),
                d.holds,
            ));
            let mut dt = Table::new(&["R", "ln_ratio"]).plotted(true, false);
            for (r, v) in &d.samples {
                dt.push(&[*r, *v]);
            }
            body.tables.insert("divergence".into(), dt);
        }
        Rate::Alpha => {
            let ln_rs: Vec<f64> = if cfg.r.is_empty() {
                default_ln_rs()
            } else {
                cfg.r.iter().map(|r| r.ln()).collect()
            };
            let rows = pipeline.weak_lsi_rate_ln(&ln_rs);
            let mut t = Table::new(&["abs_ln_r", "alpha", "radius", "inner_radius"]).plotted(true, true);
            for (row, l) in rows.iter().zip(&ln_rs) {
                t.push_opt(vec![Some(-l), row.alpha, row.radius, row.inner_radius]);
            }
            body.tables.insert("alpha".into(), t);
            match fit_log_exponent(&rows, &ln_rs, FIT_LN_R_MAX) {
                Ok(fit) => {
                    let target = prof.growth_exponent() / 2.0;
                    let gap = (fit.exponent - target).abs();
                    body.results.push(ResultRow::check(
                        "alpha-exponent",
                        (fit.exponent, 0.0),
                        (target, 0.0),
                        EXPONENT_TOLERANCE - gap,
                        gap <= EXPONENT_TOLERANCE,
                    ));
                    body.results.push(ResultRow::value("alpha-log-constant", fit.log_constant, 0.0));
                }
                Err(e) => body.notes.push(format!("exponent fit skipped: {e}")),
            }
            let witnesses = pipeline.monotonicity_witnesses(&rows);
            let held = witnesses.iter().filter(|w| w.holds).count();
            body.results.push(ResultRow::check(
                "lambda-monotonicity",
                (held as f64, 0.0),
                (witnesses.len() as f64, 0.0),
                held as f64 - witnesses.len() as f64,
                held == witnesses.len() && !witnesses.is_empty(),
            ));
            let mut wt = Table::new(&["r_small", "r_large", "radius", "holds"]);
            for w in &witnesses {
                wt.push(&[w.r_small, w.r_large, w.radius, if w.holds { 1.0 } else { 0.0 }]);
            }
            body.tables.insert("monotonicity".into(), wt);
        }
        Rate::Beta => unreachable!(),
    }
    Ok(body)
}

/// Tolerance on the Haar Gram matrix.
const GRAM_TOLERANCE: f64 = 1e-12;

fn haar_gram(cfg: &RunConfig) -> Result<Body, CliError> {
    let grid = TimeGrid::new(cfg.steps)?;
    let count = mode_count(cfg.n, cfg.level);
    let basis: Vec<_> = (1..=count).map(|m| haar_vector(grid, cfg.n, m)).collect::<Result<_, _>>()?;
    let mut t = Table::new(&["row", "col", "value"]);
    let mut worst = 0.0_f64;
    for (a, ha) in basis.iter().enumerate() {
        for (b, hb) in basis.iter().enumerate() {
            let g = ha.inner(hb)?;
            worst = worst.max((g - if a == b { 1.0 } else { 0.0 }).abs());
            t.push(&[(a + 1) as f64, (b + 1) as f64, g]);
        }
    }
    let mut body = Body::default();
    body.results.push(ResultRow::check(
        "gram-deviation",
        (worst, 0.0),
        (GRAM_TOLERANCE, 0.0),
        GRAM_TOLERANCE - worst,
        worst < GRAM_TOLERANCE,
    ));
    body.tables.insert("gram".into(), t);
    Ok(body)
}

fn operator(cfg: &RunConfig) -> Result<DiagonalOperator, CliError> {
    let op = DiagonalOperator::power(cfg.eigen_c, cfg.eigen_delta)?;
    Ok(match cfg.ball_radius {
        Some(r) => op.with_ball(r)?,
        None => op,
    })
}

/// Tolerance on the Parseval identity.
const PARSEVAL_TOLERANCE: f64 = 1e-10;

fn diffusion_check(cfg: &RunConfig, mc: &MCConfig) -> Result<Body, CliError> {
    let model = cfg.model()?;
    let n = model.dim();
    let op = operator(cfg)?;
    let level = cfg.level;
    let grid = TimeGrid::new(cfg.steps)?;
    grid.check_haar_level(level)?;
    let modes = mode_count(n, level);
    let mut body = Body::default();

    let mut worst = 0.0_f64;
    for d in 0..16u64 {
        let mut s = PathStream::new(cfg.seed, d, modes);
        let mut c = vec![0.0; modes];
        s.normals(0, 1.0, &mut c);
        let h = synthesize_haar(grid, n, &c)?;
        let q = op.quadratic_form(&c)?;
        let sq = apply_sqrt(&op, &h, level)?;
        worst = worst.max((sq.vector.norm_sq() - q).abs() / (1.0 + q));
    }
    body.results.push(ResultRow::check(
        "parseval",
        (worst, 0.0),
        (PARSEVAL_TOLERANCE, 0.0),
        PARSEVAL_TOLERANCE - worst,
        worst <= PARSEVAL_TOLERANCE,
    ));

    let (mut excess, mut all) = (f64::NEG_INFINITY, true);
    for d in 0..cfg.draws as u64 {
        let mut s = PathStream::new(cfg.seed ^ 0x5eed, d, n + 1);
        let mut z = vec![0.0; n + 1];
        s.normals(0, 1.0, &mut z);
        // t uniform on the level grid nodes, including both ends
        let nodes = 1u64 << (level + 1);
        let t = ((z[0].abs() * 1e6) as u64 % (nodes + 1)) as f64 / nodes as f64;
        let w = wedge_bound_check(&op, t, &z[1..], level)?;
        excess = excess.max(w.lhs - w.rhs);
        all &= w.pass;
    }
    body.results.push(ResultRow::check(
        "wedge-bound",
        (excess, 0.0),
        (0.0, 0.0),
        -excess,
        all,
    ));

    let weight = match cfg.ball_radius {
        Some(r) => {
            let tail = pathspace::inequalities::tail_probability(&model, r, mc)?;
            BallWeight::Path {
                ball_probability: 1.0 - tail.mean,
            }
        }
        None => BallWeight::Deterministic,
    };
    let s = summability(&op, n, cfg.sum_levels, weight)?;
    body.results.push(ResultRow::check(
        "summability",
        (s.partial_sum, 0.0),
        (s.tail_bound.unwrap_or(f64::NAN), 0.0),
        f64::NAN,
        s.verdict == Verdict::Converges,
    ));
    body.notes.push(format!("summability verdict: {:?}", s.verdict).to_lowercase());
    let mut t = Table::new(&["k", "worst_block", "full_block"]).plotted(false, true);
    for (k, (w, f)) in s.worst_blocks.iter().zip(&s.full_blocks).enumerate() {
        t.push(&[k as f64, *w, *f]);
    }
    body.tables.insert("blocks".into(), t);
    Ok(body)
}

fn diffusion_ea(cfg: &RunConfig, mc: &MCConfig) -> Result<Body, CliError> {
    let model = cfg.model()?;
    let op = operator(cfg)?;
    let suite = suite_by_name(&model, &cfg.suite)?;
    let eps = op.floor(model.dim(), cfg.level)?;
    let radius = cfg.ball_radius.unwrap_or(f64::INFINITY);
    let mut body = Body::default();
    for f in &suite {
        let s = ea_samples(&model, &op, f, mc, cfg.level)?;
        let ea = Estimate::from_samples(&s.ea);
        let inside: Vec<f64> = s
            .energy
            .iter()
            .zip(&s.rho)
            .map(|(e, r)| if *r <= radius { eps * e } else { 0.0 })
            .collect();
        let floor = Estimate::from_samples(&inside);
        let fc = floor_check(&s, radius, eps);
        body.results.push(ResultRow::check(
            format!("ea:{}", f.name()),
            (ea.mean, ea.se),
            (floor.mean, floor.se),
            ea.mean - floor.mean,
            fc.pass,
        ));
    }
    body.notes.push(format!("epsilon = {eps}"));
    Ok(body)
}
