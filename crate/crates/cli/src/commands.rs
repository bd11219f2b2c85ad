//! The four subcommands. Each one writes its CSV artifacts into the output
//! directory and reports whether every check it ran passed.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::PathBuf;

use anyhow::{Context, Result};
use avgsgd_core::bounds::{bound_curve, check_applicable, derive_constants, BoundCurve, DerivedConstants};
use avgsgd_core::problems::{assumption_audit, constants_for, default_grid, AuditReport};
use avgsgd_core::report::{csv_writer, format_float};
use avgsgd_core::verify::{dominance_check, run_replicates, DominanceReport, ErrorCurves, RunOptions};
use avgsgd_core::{
    AssumptionConstants, GeometricMedian, LinearRegression, LogisticRegression, Problem, Provenance, TheoremId,
};

use crate::config::{ExperimentConfig, ProblemKind};

/// Command-line overrides applied on top of the configuration file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    /// Multiplies every bound curve before the dominance test; a test hook
    /// for forcing failures.
    pub debug_scale_bounds: Option<f64>,
}

/// Result of a command that ran to completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Passed,
    Failed,
}

impl Outcome {
    fn from_pass(pass: bool) -> Self {
        if pass {
            Outcome::Passed
        } else {
            Outcome::Failed
        }
    }
}

/// Configuration with the command-line overrides applied.
pub struct Session {
    pub config: ExperimentConfig,
    pub out_dir: PathBuf,
    pub threads: Option<usize>,
    pub scale: Option<f64>,
}

impl Session {
    pub fn new(mut config: ExperimentConfig, overrides: &Overrides) -> Result<Self> {
        if let Some(seed) = overrides.seed {
            config.run.seed = seed;
        }
        if let Some(out) = &overrides.out {
            config.output.dir = out.clone();
        }
        if let Some(f) = overrides.debug_scale_bounds {
            anyhow::ensure!(f > 0.0 && f.is_finite(), "--debug-scale-bounds must be positive, got {f}");
        }
        let out_dir = config.output.dir.clone();
        Ok(Self {
            config,
            out_dir,
            threads: overrides.threads,
            scale: overrides.debug_scale_bounds,
        })
    }

    fn create(&self, name: &str) -> Result<BufWriter<File>> {
        fs::create_dir_all(&self.out_dir)
            .with_context(|| format!("cannot create output directory {}", self.out_dir.display()))?;
        let path = self.out_dir.join(name);
        let file = File::create(&path).with_context(|| format!("cannot create {}", path.display()))?;
        Ok(BufWriter::new(file))
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }
}

/// Runs `body` with the configured problem as a concrete type.
fn with_problem<T>(config: &ExperimentConfig, body: impl ProblemVisitor<T>) -> Result<T> {
    let p = &config.problem;
    let theta = config.optimum();
    match p.kind {
        ProblemKind::Linreg => {
            let radius = p.radius.unwrap_or_else(|| {
                let dist = distance(&config.theta0(), &theta);
                (2.0 * dist).max(1.0)
            });
            body.visit(&LinearRegression::new(theta, p.design_sd, p.noise_sd, radius)?)
        }
        ProblemKind::Logistic => body.visit(&LogisticRegression::new(theta, p.bound)?),
        ProblemKind::Median => body.visit(&GeometricMedian::new(theta, p.tau)?),
    }
}

/// A computation generic over the problem type.
trait ProblemVisitor<T> {
    fn visit<P: Problem>(self, problem: &P) -> Result<T>;
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Problem constants at the configured start plus everything derived from
/// them, with every requested theorem checked for applicability.
pub struct Prepared {
    pub constants: AssumptionConstants,
    pub derived: DerivedConstants,
    pub theorems: Vec<TheoremId>,
}

struct Prepare<'a>(&'a ExperimentConfig);

impl ProblemVisitor<Prepared> for Prepare<'_> {
    fn visit<P: Problem>(self, problem: &P) -> Result<Prepared> {
        let config = self.0;
        let constants = constants_for(problem, &config.theta0(), &config.constants_options())?;
        let derived = derive_constants(&constants, &config.schedule())?;
        let theorems = config.theorems();
        for &t in &theorems {
            check_applicable(t, &derived)?;
        }
        Ok(Prepared {
            constants,
            derived,
            theorems,
        })
    }
}

pub fn prepare(config: &ExperimentConfig) -> Result<Prepared> {
    with_problem(config, Prepare(config))
}

fn bound_file(t: TheoremId) -> String {
    format!("bound_{}.csv", t.token())
}

fn write_constants_ledger(ctx: &Session, prepared: &Prepared) -> Result<()> {
    let mut w = csv_writer(ctx.create("constants.csv")?);
    w.write_record(["kind", "name", "value", "provenance"])?;
    let k = &prepared.constants;
    for (name, value) in k.values() {
        let prov = if name == "L_delta" {
            // L_delta inherits from the local strong-convexity inputs.
            if ["lambda_0", "r_lambda0", "C_lambda0"]
                .iter()
                .any(|f| k.provenance_of(f) == Provenance::EmpiricalWithMargin)
            {
                Provenance::EmpiricalWithMargin
            } else {
                Provenance::Exact
            }
        } else {
            k.provenance_of(name)
        };
        w.write_record(["assumption", name, &format_float(value), &prov.to_string()])?;
    }
    let derived_prov = if k.any_empirical() {
        Provenance::EmpiricalWithMargin
    } else {
        Provenance::Exact
    };
    for (name, value) in prepared.derived.fields() {
        w.write_record(["derived", name, &format_float(value), &derived_prov.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

fn compute_curves(ctx: &Session, prepared: &Prepared) -> Result<Vec<BoundCurve>> {
    let checkpoints = ctx.config.checkpoints()?;
    prepared
        .theorems
        .iter()
        .map(|&t| bound_curve(t, &checkpoints, &prepared.derived).map_err(Into::into))
        .collect()
}

/// Evaluates every requested bound and writes `constants.csv` plus one
/// `bound_<theorem>.csv` per theorem. Nothing is written if any bound is
/// inapplicable or cannot be evaluated.
pub fn cmd_bounds(ctx: &Session) -> Result<Outcome> {
    let prepared = prepare(&ctx.config)?;
    let curves = compute_curves(ctx, &prepared)?;
    write_constants_ledger(ctx, &prepared)?;
    for curve in &curves {
        curve.write_csv(ctx.create(&bound_file(curve.theorem))?)?;
    }
    Ok(Outcome::Passed)
}

struct Run<'a>(&'a Session);

impl ProblemVisitor<ErrorCurves> for Run<'_> {
    fn visit<P: Problem>(self, problem: &P) -> Result<ErrorCurves> {
        let ctx = self.0;
        let c = &ctx.config;
        let opts = RunOptions {
            checkpoints: c.checkpoints()?,
            replicates: c.run.replicates,
            master_seed: c.run.seed,
            subopt_budget: c.run.subopt_budget,
            threads: ctx.threads,
        };
        Ok(run_replicates(problem, &c.schedule(), &c.theta0(), &opts)?)
    }
}

/// Simulates the configured replicates and writes `errors.csv`.
pub fn cmd_run(ctx: &Session) -> Result<Outcome> {
    let curves = simulate(ctx)?;
    curves.write_csv(ctx.create("errors.csv")?)?;
    Ok(Outcome::Passed)
}

pub fn simulate(ctx: &Session) -> Result<ErrorCurves> {
    with_problem(&ctx.config, Run(ctx))
}

/// Bounds, simulation and one dominance test per theorem. Writes the
/// artifacts of `bounds` and `run` plus `dominance_<theorem>.csv`,
/// `plot_<theorem>.csv` and `verify_summary.csv`. Passes iff every tested
/// checkpoint of every theorem passes.
pub fn cmd_verify(ctx: &Session) -> Result<Outcome> {
    let (_, reports) = verify_reports(ctx)?;
    let mut w = csv_writer(ctx.create("verify_summary.csv")?);
    w.write_record(["theorem", "quantity", "checkpoints_tested", "confidence", "pass"])?;
    for r in &reports {
        w.write_record([
            r.theorem.token().to_string(),
            r.quantity.as_str().to_string(),
            r.rows.len().to_string(),
            format_float(r.confidence),
            r.passed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(Outcome::from_pass(reports.iter().all(|r| r.passed)))
}

/// The dominance reports of `cmd_verify`, also writing every artifact.
pub fn verify_reports(ctx: &Session) -> Result<(Prepared, Vec<DominanceReport>)> {
    // Everything that can fail cheaply happens before the simulation.
    let prepared = prepare(&ctx.config)?;
    let curves = compute_curves(ctx, &prepared)?;
    write_constants_ledger(ctx, &prepared)?;
    for curve in &curves {
        curve.write_csv(ctx.create(&bound_file(curve.theorem))?)?;
    }

    let errors = simulate(ctx)?;
    errors.write_csv(ctx.create("errors.csv")?)?;

    let min = ctx.config.verify.min_checkpoint;
    let tested = errors.restricted(min);
    let mut reports = Vec::with_capacity(curves.len());
    for curve in &curves {
        let curve = restrict_curve(curve, min);
        let curve = match ctx.scale {
            Some(f) => curve.scaled(f),
            None => curve,
        };
        let report = dominance_check(&tested, &curve, ctx.config.verify.confidence)?;
        let token = curve.theorem.token();
        report.write_csv(ctx.create(&format!("dominance_{token}.csv"))?)?;
        report.write_plot_csv(ctx.create(&format!("plot_{token}.csv"))?)?;
        reports.push(report);
    }
    Ok((prepared, reports))
}

fn restrict_curve(curve: &BoundCurve, min: u64) -> BoundCurve {
    let (checkpoints, values) = curve
        .checkpoints
        .iter()
        .zip(&curve.values)
        .filter(|(n, _)| **n >= min)
        .map(|(n, v)| (*n, *v))
        .unzip();
    BoundCurve {
        checkpoints,
        values,
        ..curve.clone()
    }
}

struct Audit<'a>(&'a Session);

impl ProblemVisitor<AuditReport> for Audit<'_> {
    fn visit<P: Problem>(self, problem: &P) -> Result<AuditReport> {
        let c = &self.0.config;
        let constants = constants_for(problem, &c.theta0(), &c.constants_options())?;
        let grid = default_grid(problem, c.run.seed);
        Ok(assumption_audit(problem, &constants, &grid, c.audit.budget, c.run.seed)?)
    }
}

/// Audits the structural inequalities on the default grid and writes
/// `audit.csv`.
pub fn cmd_audit(ctx: &Session) -> Result<Outcome> {
    let report = with_problem(&ctx.config, Audit(ctx))?;
    write_audit(&report, ctx)?;
    Ok(Outcome::from_pass(report.passed()))
}

fn write_audit(report: &AuditReport, ctx: &Session) -> Result<()> {
    let mut w = csv_writer(ctx.create("audit.csv")?);
    w.write_record(["check", "worst_margin", "worst_point", "grid_size", "budget", "pass"])?;
    for c in &report.checks {
        let point = c
            .worst_point
            .iter()
            .map(|v| format_float(*v))
            .collect::<Vec<_>>()
            .join(" ");
        w.write_record([
            c.kind.as_str().to_string(),
            format_float(c.worst_margin),
            point,
            report.grid_size.to_string(),
            report.budget.to_string(),
            c.passed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
