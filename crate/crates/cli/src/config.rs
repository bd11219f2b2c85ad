//! Experiment configuration: one TOML file with flat dotted keys such as
//! `problem.kind = "linreg"` and `schedule.alpha = 0.75`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use avgsgd_core::verify::geometric_checkpoints;
use avgsgd_core::{ConstantsOptions, StepSchedule, TheoremId};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    Linreg,
    Logistic,
    Median,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub kind: ProblemKind,
    pub dimension: usize,
    /// Optimum (linreg, logistic) or location (median); zeros when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<Vec<f64>>,
    /// Linreg: standard deviation `s` of each design coordinate.
    #[serde(default = "one")]
    pub design_sd: f64,
    /// Linreg: standard deviation of the additive noise.
    #[serde(default = "one")]
    pub noise_sd: f64,
    /// Linreg: radius around the optimum on which `L_Sigma` is certified;
    /// defaults to `max(1, 2 |theta0 - theta|)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    /// Logistic: radius `B` of the feature ball.
    #[serde(default = "one")]
    pub bound: f64,
    /// Median: scale `tau` of the Gaussian.
    #[serde(default = "one")]
    pub tau: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    pub c_gamma: f64,
    pub alpha: f64,
}

/// `"geometric"` or an explicit increasing list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Checkpoints {
    Policy(String),
    Explicit(Vec<u64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Starting point; the optimum when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta0: Option<Vec<f64>>,
    pub horizon: u64,
    pub replicates: usize,
    #[serde(default = "geometric")]
    pub checkpoints: Checkpoints,
    #[serde(default)]
    pub seed: u64,
    /// Monte-Carlo budget per suboptimality estimate.
    #[serde(default = "default_subopt_budget")]
    pub subopt_budget: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsConfig {
    pub theorems: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    #[serde(default = "default_confidence")]
    pub confidence: f64,
    /// Checkpoints below this index are reported but not tested.
    #[serde(default = "one_u64")]
    pub min_checkpoint: u64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            confidence: default_confidence(),
            min_checkpoint: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsConfig {
    #[serde(default = "default_safety")]
    pub safety_factor: f64,
    #[serde(default = "default_constants_budget")]
    pub budget: usize,
    #[serde(default = "default_constants_seed")]
    pub seed: u64,
}

impl Default for ConstantsConfig {
    fn default() -> Self {
        let d = ConstantsOptions::default();
        Self {
            safety_factor: d.safety_factor,
            budget: d.budget,
            seed: d.seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditConfig {
    #[serde(default = "default_audit_budget")]
    pub budget: usize,
}

impl Default for AuditConfig {
    fn default() -> Self {
        Self {
            budget: default_audit_budget(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: "out".into() }
    }
}

/// A complete experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemConfig,
    pub schedule: ScheduleConfig,
    pub run: RunConfig,
    pub bounds: BoundsConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
    #[serde(default)]
    pub constants: ConstantsConfig,
    #[serde(default)]
    pub audit: AuditConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn one() -> f64 {
    1.0
}
fn one_u64() -> u64 {
    1
}
fn geometric() -> Checkpoints {
    Checkpoints::Policy("geometric".into())
}
fn default_subopt_budget() -> usize {
    1000
}
fn default_confidence() -> f64 {
    0.99
}
fn default_safety() -> f64 {
    ConstantsOptions::default().safety_factor
}
fn default_constants_budget() -> usize {
    ConstantsOptions::default().budget
}
fn default_constants_seed() -> u64 {
    ConstantsOptions::default().seed
}
fn default_audit_budget() -> usize {
    100_000
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: ExperimentConfig = toml::from_str(text).context("malformed configuration")?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        Self::from_toml_str(&text).with_context(|| format!("in {}", path.display()))
    }

    /// Serializes as `section.key = value` lines in a fixed order, which
    /// parses back to the same configuration.
    pub fn to_flat_toml(&self) -> Result<String> {
        let value = toml::Value::try_from(self).context("cannot serialize configuration")?;
        let mut out = String::new();
        flatten("", &value, &mut out);
        Ok(out)
    }

    fn validate(&self) -> Result<()> {
        let p = &self.problem;
        ensure!(p.dimension >= 1, "problem.dimension must be >= 1");
        if let Some(theta) = &p.theta {
            ensure!(
                theta.len() == p.dimension,
                "problem.theta has {} entries, expected problem.dimension = {}",
                theta.len(),
                p.dimension
            );
        }
        if let Some(theta0) = &self.run.theta0 {
            ensure!(
                theta0.len() == p.dimension,
                "run.theta0 has {} entries, expected problem.dimension = {}",
                theta0.len(),
                p.dimension
            );
        }
        StepSchedule::new(self.schedule.c_gamma, self.schedule.alpha)?;
        ensure!(self.run.replicates >= 2, "run.replicates must be >= 2");
        ensure!(self.run.horizon >= 1, "run.horizon must be >= 1");
        ensure!(self.run.subopt_budget >= 1, "run.subopt_budget must be >= 1");
        ensure!(!self.bounds.theorems.is_empty(), "bounds.theorems must not be empty");
        for t in &self.bounds.theorems {
            t.parse::<TheoremId>()?;
        }
        ensure!(
            self.verify.confidence > 0.5 && self.verify.confidence < 1.0,
            "verify.confidence must lie in (0.5, 1)"
        );
        self.checkpoints()?;
        Ok(())
    }

    pub fn schedule(&self) -> StepSchedule {
        StepSchedule::new(self.schedule.c_gamma, self.schedule.alpha).expect("validated schedule")
    }

    pub fn theorems(&self) -> Vec<TheoremId> {
        self.bounds
            .theorems
            .iter()
            .map(|t| t.parse().expect("validated theorem id"))
            .collect()
    }

    pub fn optimum(&self) -> Vec<f64> {
        self.problem
            .theta
            .clone()
            .unwrap_or_else(|| vec![0.0; self.problem.dimension])
    }

    pub fn theta0(&self) -> Vec<f64> {
        self.run.theta0.clone().unwrap_or_else(|| self.optimum())
    }

    pub fn checkpoints(&self) -> Result<Vec<u64>> {
        let horizon = self.run.horizon;
        match &self.run.checkpoints {
            Checkpoints::Policy(p) if p == "geometric" => {
                let mut cps = geometric_checkpoints(horizon);
                if cps.last() != Some(&horizon) {
                    cps.push(horizon);
                }
                Ok(cps)
            }
            Checkpoints::Policy(p) => bail!("unknown checkpoint policy {p:?}; use \"geometric\" or a list"),
            Checkpoints::Explicit(list) => {
                ensure!(!list.is_empty(), "run.checkpoints must not be empty");
                ensure!(list[0] >= 1, "checkpoints must be >= 1");
                ensure!(
                    list.windows(2).all(|w| w[0] < w[1]),
                    "run.checkpoints must be strictly increasing"
                );
                ensure!(
                    *list.last().unwrap() <= horizon,
                    "run.checkpoints exceed run.horizon = {horizon}"
                );
                Ok(list.clone())
            }
        }
    }

    pub fn constants_options(&self) -> ConstantsOptions {
        ConstantsOptions {
            safety_factor: self.constants.safety_factor,
            budget: self.constants.budget,
            seed: self.constants.seed,
        }
    }
}

fn flatten(prefix: &str, value: &toml::Value, out: &mut String) {
    match value {
        toml::Value::Table(table) => {
            for (key, v) in table {
                let path = if prefix.is_empty() {
                    key.clone()
                } else {
                    format!("{prefix}.{key}")
                };
                flatten(&path, v, out);
            }
        }
        leaf => {
            let _ = writeln!(out, "{prefix} = {leaf}");
        }
    }
}
