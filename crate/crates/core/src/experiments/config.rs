use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::fit::AgentHyper;
use super::synthetic::Generator;
use crate::error::{Error, Result};
use crate::evaluation::Regime;
use crate::graphon::Graphon;

/// Bumped whenever an output schema (CSV header or JSON layout) changes.
pub const ARTIFACT_VERSION: &str = "1.0.0";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Replicates for synthetic runs; random splits per dataset and regime
    /// for real runs.
    pub replicates: usize,
    pub output_dir: PathBuf,
    /// Only used by `real`; defaults when the table is absent.
    #[serde(default)]
    pub agents: AgentHyper,
    pub experiment: Experiment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    S1(SyntheticConfig),
    S2(LearningCurveConfig),
    S3(PhaseConfig),
    S4(TailConfig),
    Real(RealConfig),
    Report(ReportConfig),
    Audit(AuditConfig),
}

impl Experiment {
    pub fn verb(&self) -> &'static str {
        match self {
            Experiment::S1(_) => "s1",
            Experiment::S2(_) => "s2",
            Experiment::S3(_) => "s3",
            Experiment::S4(_) => "s4",
            Experiment::Real(_) => "real",
            Experiment::Report(_) => "report",
            Experiment::Audit(_) => "audit",
        }
    }
}

/// Dyad split used by the synthetic learning experiments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DyadFractions {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticConfig {
    pub n: usize,
    pub dyads: DyadFractions,
    pub ridge_lambda: f64,
    pub generator: Generator,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearningCurveConfig {
    pub n_grid: Vec<usize>,
    pub dyads: DyadFractions,
    pub ridge_lambda: f64,
    pub generator: Generator,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseConfig {
    pub n: usize,
    pub lambda_grid: Vec<f64>,
    /// Nonnegative combination `Σ weights[j]·parts[j]` that is swept.
    pub weights: Vec<f64>,
    pub parts: Vec<Graphon>,
    /// Giant fraction that marks the empirical onset.
    pub onset_threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TailConfig {
    pub pi_grid: Vec<f64>,
    pub gamma_light: f64,
    pub gamma_heavy: f64,
    pub k_min: usize,
    pub k_max: usize,
    pub sample_size: usize,
    pub hill_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dataset {
    pub name: String,
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RealConfig {
    pub datasets: Vec<Dataset>,
    pub regimes: Vec<Regime>,
    pub ridge_lambda: f64,
    /// Paired gaps are reported as `metric(compare[0]) − metric(compare[1])`.
    pub compare: [String; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportConfig {
    /// A metrics CSV as written by the real experiment.
    pub metrics: PathBuf,
    pub compare: [String; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditConfig {
    pub datasets: Vec<Dataset>,
    pub regimes: Vec<Regime>,
}

const DEFAULT_SEED: &str = "seed = 20240917\noutput_dir = \"results\"\n";

const DEFAULT_AGENTS: &str = "[agents]\nsbm_k = 5\nrdpg_d = 3\ndeghist_bins = 10\n";

/// Mixture data-generating graphon shared by `s1` and `s2`: 0.4·SBM(two
/// equal blocks, 0.8 within / 0.1 between) + 0.35·logistic low rank on a
/// circle + 0.25·capped product weights. Agents see sharpened versions of
/// each component.
const DEFAULT_GENERATOR: &str = r#"sbm_within = 0.8
sbm_between = 0.1
lowrank_pieces = 8
lowrank_radius = 1.5
lowrank_intercept = -0.3
product_pieces = 8
product_lo = 0.3
product_hi = 1.0
mixture = [0.4, 0.35, 0.25]
sharpen = 2.0
"#;

/// Built-in configuration text for a CLI verb.
pub fn default_config_text(verb: &str) -> Result<String> {
    let body = match verb {
        "s1" => format!(
            "replicates = 20\n\n[experiment.s1]\nn = 1000\nridge_lambda = 1.0\n\n[experiment.s1.dyads]\ntrain = 0.4\nval = 0.1\ntest = 0.5\n\n[experiment.s1.generator]\n{DEFAULT_GENERATOR}"
        ),
        "s2" => format!(
            "replicates = 10\n\n[experiment.s2]\nn_grid = [200, 400, 800, 1200]\nridge_lambda = 1.0\n\n[experiment.s2.dyads]\ntrain = 0.4\nval = 0.1\ntest = 0.5\n\n[experiment.s2.generator]\n{DEFAULT_GENERATOR}"
        ),
        "s3" => r#"replicates = 10

[experiment.s3]
n = 5000
lambda_grid = [1.0, 1.2, 1.4, 1.6, 1.8, 2.0, 2.2, 2.4, 2.6, 2.8, 3.0, 3.2, 3.4, 3.6, 3.8, 4.0]
weights = [0.5, 0.5]
onset_threshold = 0.05

[[experiment.s3.parts]]
kind = "block"
boundaries = [0.0, 0.5, 1.0]
probs = [[0.7, 0.25], [0.25, 0.7]]

[[experiment.s3.parts]]
kind = "constant"
p = 0.45
"#
        .to_string(),
        "s4" => r#"replicates = 20

[experiment.s4]
pi_grid = [0.0, 0.1, 0.3, 0.5]
gamma_light = 13.7
gamma_heavy = 5.0
k_min = 50
k_max = 100000
sample_size = 100000
hill_fraction = 0.05
"#
        .to_string(),
        "real" => r#"replicates = 5

[experiment.real]
datasets = []
ridge_lambda = 1.0
compare = ["CV_BestAgent", "BPS_LS"]

[[experiment.real.regimes]]
regime = "edge_holdout"
negpos_ratio = 3.0
test_frac = 0.2
val_frac = 0.1

[[experiment.real.regimes]]
regime = "node_holdout"
frac = 0.1
negpos_ratio = 3.0
val_frac = 0.1

[[experiment.real.regimes]]
regime = "uniform_dyads"
train_frac = 0.05
val_frac = 0.01
test_frac = 0.05
"#
        .to_string(),
        "report" => r#"replicates = 1

[experiment.report]
metrics = "results/real_metrics.csv"
compare = ["CV_BestAgent", "BPS_LS"]
"#
        .to_string(),
        "audit" => r#"replicates = 5

[experiment.audit]
datasets = []

[[experiment.audit.regimes]]
regime = "edge_holdout"
negpos_ratio = 3.0
test_frac = 0.2
val_frac = 0.1

[[experiment.audit.regimes]]
regime = "node_holdout"
frac = 0.1
negpos_ratio = 3.0
val_frac = 0.1

[[experiment.audit.regimes]]
regime = "uniform_dyads"
train_frac = 0.05
val_frac = 0.01
test_frac = 0.05
"#
        .to_string(),
        other => return Err(Error::Config(format!("unknown experiment '{other}'"))),
    };
    // top-level keys must precede the first table
    let (replicates, tables) = body.split_once("\n\n").expect("default body layout");
    Ok(format!("{DEFAULT_SEED}{replicates}\n\n{DEFAULT_AGENTS}\n{tables}"))
}

impl ExperimentConfig {
    /// Parses and validates.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg = ExperimentConfig::parse(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parses without the semantic checks, for configs that are completed
    /// programmatically (e.g. datasets added from the command line).
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("invalid configuration: {e}")))
    }

    pub fn default_for(verb: &str) -> Result<Self> {
        ExperimentConfig::from_toml(&default_config_text(verb)?)
    }

    /// Reads a TOML config, or the resolved config stored in a run manifest
    /// (`.json`) to repeat that run.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        if path.extension().is_some_and(|e| e == "json") {
            let m: super::RunManifest = serde_json::from_str(&text)?;
            return ExperimentConfig::from_toml(&m.config);
        }
        ExperimentConfig::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot serialize configuration: {e}")))
    }

    /// Hex SHA-256 of the canonical TOML rendering.
    pub fn sha256(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(self.to_toml()?.as_bytes())))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.replicates == 0 {
            return bad("replicates must be at least 1");
        }
        self.agents.validate()?;
        let frac_ok = |d: &DyadFractions| {
            [d.train, d.val, d.test].iter().all(|&f| f > 0.0 && f < 1.0) && d.train + d.val + d.test <= 1.0 + 1e-12
        };
        match &self.experiment {
            Experiment::S1(c) => {
                if c.n < 10 || !frac_ok(&c.dyads) || c.ridge_lambda < 0.0 {
                    return bad("s1 needs n >= 10, dyad fractions in (0,1) summing to at most 1, ridge_lambda >= 0");
                }
                c.generator.validate()?;
            }
            Experiment::S2(c) => {
                if c.n_grid.is_empty() || c.n_grid.iter().any(|&n| n < 10) || !frac_ok(&c.dyads) || c.ridge_lambda < 0.0
                {
                    return bad("s2 needs a nonempty n_grid with n >= 10 and valid dyad fractions");
                }
                c.generator.validate()?;
            }
            Experiment::S3(c) => {
                if c.n < 2 || c.lambda_grid.is_empty() || c.lambda_grid.iter().any(|&l| !(l > 0.0)) {
                    return bad("s3 needs n >= 2 and a nonempty positive lambda_grid");
                }
                if c.parts.is_empty() || c.parts.len() != c.weights.len() || c.weights.iter().any(|&w| !(w >= 0.0)) {
                    return bad("s3 needs nonnegative weights, one per part");
                }
                if !(c.onset_threshold > 0.0 && c.onset_threshold < 1.0) {
                    return bad("s3 onset_threshold must lie in (0,1)");
                }
            }
            Experiment::S4(c) => {
                if c.pi_grid.is_empty() || c.pi_grid.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                    return bad("s4 pi_grid values must lie in [0,1]");
                }
                if !(c.gamma_light > 0.0 && c.gamma_heavy > 0.0) || c.k_min == 0 || c.k_max <= c.k_min {
                    return bad("s4 needs positive exponents and 1 <= k_min < k_max");
                }
                if c.sample_size < 2 || !(c.hill_fraction > 0.0 && c.hill_fraction < 1.0) {
                    return bad("s4 needs sample_size >= 2 and hill_fraction in (0,1)");
                }
            }
            Experiment::Real(c) => {
                if c.datasets.is_empty() || c.regimes.is_empty() {
                    return bad("real needs at least one dataset and one regime");
                }
                if c.ridge_lambda < 0.0 {
                    return bad("ridge_lambda must be nonnegative");
                }
            }
            Experiment::Report(_) => {}
            Experiment::Audit(c) => {
                if c.datasets.is_empty() || c.regimes.is_empty() {
                    return bad("audit needs at least one dataset and one regime");
                }
            }
        }
        Ok(())
    }
}
