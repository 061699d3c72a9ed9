//! Observed-network protocol: split, audit, fit agents on the training
//! graph only, synthesize and score; plus paired-gap reporting.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{AuditConfig, Dataset, RealConfig, ReportConfig};
use super::fit::{agent_features, fit_agents_to_graph, AgentHyper};
use super::io::{load_edge_list, LoadOptions, LoadedGraph};
use super::synthetic::{score_methods, ReplicateScores};
use super::{csv_bytes, json_bytes, RunOutput};
use crate::error::{Error, Result};
use crate::evaluation::{
    audit, make_split, paired_gaps_from_values, AuditReport, LabeledDyad, PairedGapReport, Regime, SplitKey, SplitSpec,
    UnitMetrics, GAP_METRICS,
};
use crate::sampling::derive_seed;
use crate::synthesis::DyadSample;

pub const METRICS_HEADER: [&str; 12] = [
    "dataset",
    "regime",
    "split",
    "seed",
    "method",
    "n_test",
    "positive_rate",
    "brier",
    "logloss",
    "auc",
    "ap",
    "ece",
];

/// Seed of split `s` of regime `q` on dataset `d`; shared by `real` and
/// `audit` so both see identical splits.
pub fn split_seed(seed: u64, d: usize, q: usize, s: usize, regimes: usize, splits: usize) -> u64 {
    derive_seed(seed, ((d * regimes + q) * splits + s) as u64)
}

fn load_all(datasets: &[Dataset]) -> Result<Vec<LoadedGraph>> {
    datasets
        .iter()
        .map(|d| {
            load_edge_list(&d.path, LoadOptions::default())
                .map_err(|e| Error::Config(format!("dataset '{}' ({}): {e}", d.name, d.path.display())))
        })
        .collect::<Result<_>>()
        .map_err(|e| e.at_stage("load"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitAudit {
    pub dataset: String,
    pub regime: String,
    pub split: usize,
    pub seed: u64,
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub passed: bool,
    pub report: AuditReport,
}

fn split_and_audit(
    name: &str,
    g: &LoadedGraph,
    regime: &Regime,
    s: usize,
    seed: u64,
) -> Result<(SplitSpec, SplitAudit)> {
    let split = make_split(&g.graph, regime, seed).map_err(|e| e.at_stage("split"))?;
    let report = audit(&split, &g.graph);
    let a = SplitAudit {
        dataset: name.to_string(),
        regime: regime.name().to_string(),
        split: s,
        seed,
        n_train: split.train.len(),
        n_val: split.val.len(),
        n_test: split.test.len(),
        passed: report.passed(),
        report,
    };
    Ok((split, a))
}

/// Fits agents on the training graph and scores every method on the test
/// dyads of one split.
pub fn evaluate_split(split: &SplitSpec, hyper: &AgentHyper, ridge_lambda: f64) -> Result<ReplicateScores> {
    let agents = fit_agents_to_graph(&split.train_graph, hyper, Some(&split.train), split.seed)
        .map_err(|e| e.at_stage("fit_agents"))?;
    let names: Vec<&str> = agents.iter().map(|a| a.name()).collect();
    let samples = |d: &[LabeledDyad]| -> Result<Vec<DyadSample>> {
        d.iter()
            .zip(agent_features(&agents, d))
            .map(|(t, f)| DyadSample::new((t.i, t.j), &f, t.label))
            .collect()
    };
    let (train, val, test) = (samples(&split.train)?, samples(&split.val)?, samples(&split.test)?);
    score_methods(&names, &train, &val, &test, ridge_lambda, false).map_err(|e| e.at_stage("synthesis"))
}

struct Job<'a> {
    d: usize,
    regime: &'a Regime,
    s: usize,
    seed: u64,
}

fn jobs<'a>(n_datasets: usize, regimes: &'a [Regime], splits: usize, seed: u64) -> Vec<Job<'a>> {
    let mut out = Vec::new();
    for d in 0..n_datasets {
        for (q, regime) in regimes.iter().enumerate() {
            for s in 0..splits {
                out.push(Job {
                    d,
                    regime,
                    s,
                    seed: split_seed(seed, d, q, s, regimes.len(), splits),
                });
            }
        }
    }
    out
}

fn gap_files(prefix: &str, by_regime: &BTreeMap<String, PairedGapReport>) -> Result<Vec<(String, Vec<u8>)>> {
    let mut files = Vec::new();
    for (regime, rep) in by_regime {
        files.push((format!("{prefix}_gaps_{regime}.json"), rep.to_json()?.into_bytes()));
        let mut csv = Vec::new();
        rep.write_csv(&mut csv)?;
        files.push((format!("{prefix}_gaps_{regime}.csv"), csv));
    }
    Ok(files)
}

/// Metric rows keyed by (regime, method), as `(unit, values)` lists.
type MethodUnits = BTreeMap<(String, String), Vec<(SplitKey, UnitMetrics)>>;

fn gaps_by_regime(
    units: &MethodUnits,
    regimes: &[String],
    compare: &[String; 2],
) -> Result<BTreeMap<String, PairedGapReport>> {
    let mut out = BTreeMap::new();
    for regime in regimes {
        let side = |m: &String| {
            units
                .get(&(regime.clone(), m.clone()))
                .ok_or_else(|| Error::invalid(format!("no '{m}' rows for regime {regime}")))
        };
        let (a, b) = (side(&compare[0])?, side(&compare[1])?);
        out.insert(regime.clone(), paired_gaps_from_values(a, b)?);
    }
    Ok(out)
}

pub fn run_real(c: &RealConfig, hyper: &AgentHyper, splits: usize, seed: u64) -> Result<RunOutput> {
    let graphs = load_all(&c.datasets)?;
    let js = jobs(graphs.len(), &c.regimes, splits, seed);
    let results: Vec<(SplitAudit, ReplicateScores)> = js
        .par_iter()
        .map(|j| {
            let (split, a) = split_and_audit(&c.datasets[j.d].name, &graphs[j.d], j.regime, j.s, j.seed)?;
            a.report.ensure().map_err(|e| e.at_stage("audit"))?;
            let scores = evaluate_split(&split, hyper, c.ridge_lambda)?;
            Ok((a, scores))
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    let mut units: MethodUnits = BTreeMap::new();
    for (a, scores) in &results {
        for (m, r) in scores {
            rows.push(vec![
                a.dataset.clone(),
                a.regime.clone(),
                a.split.to_string(),
                a.seed.to_string(),
                m.clone(),
                r.n.to_string(),
                r.positive_rate.to_string(),
                r.brier.to_string(),
                r.logloss.to_string(),
                r.auc.to_string(),
                r.ap.to_string(),
                r.ece.to_string(),
            ]);
            let vals = GAP_METRICS
                .iter()
                .map(|k| (k.to_string(), r.metric(k).unwrap()))
                .collect();
            units
                .entry((a.regime.clone(), m.clone()))
                .or_default()
                .push((SplitKey::new(a.dataset.clone(), a.split), vals));
        }
    }
    let regimes: Vec<String> = c.regimes.iter().map(|r| r.name().to_string()).collect();
    let gaps = gaps_by_regime(&units, &regimes, &c.compare).map_err(|e| e.at_stage("evaluate"))?;
    let audits: Vec<&SplitAudit> = results.iter().map(|(a, _)| a).collect();
    let mut files = vec![
        ("real_metrics.csv".to_string(), csv_bytes(&METRICS_HEADER, &rows)?),
        ("real_audit.json".to_string(), json_bytes(&audits)?),
    ];
    files.extend(gap_files("real", &gaps)?);
    Ok(RunOutput {
        files,
        replicate_seeds: js.iter().map(|j| j.seed).collect(),
    })
}

/// Reads a metrics CSV in the `real_metrics.csv` layout.
pub fn read_metrics_csv(path: impl AsRef<Path>) -> Result<MethodUnits> {
    let mut rdr = csv::Reader::from_path(path.as_ref())?;
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::Parse {
            line: 1,
            message: format!("missing column '{name}'"),
        })
    };
    let (cd, cr, cs, cm) = (col("dataset")?, col("regime")?, col("split")?, col("method")?);
    let metric_cols: Vec<(usize, &str)> = GAP_METRICS.iter().map(|m| Ok((col(m)?, *m))).collect::<Result<_>>()?;
    let mut out: MethodUnits = BTreeMap::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = k + 2;
        let field = |c: usize| rec.get(c).unwrap_or("");
        let num = |c: usize| -> Result<f64> {
            field(c).parse::<f64>().map_err(|_| Error::Parse {
                line,
                message: format!("'{}' is not a number", field(c)),
            })
        };
        let split = field(cs).parse::<usize>().map_err(|_| Error::Parse {
            line,
            message: format!("'{}' is not a split index", field(cs)),
        })?;
        let vals = metric_cols
            .iter()
            .map(|&(c, m)| Ok((m.to_string(), num(c)?)))
            .collect::<Result<_>>()?;
        out.entry((field(cr).to_string(), field(cm).to_string()))
            .or_default()
            .push((SplitKey::new(field(cd), split), vals));
    }
    Ok(out)
}

pub fn run_report(c: &ReportConfig) -> Result<RunOutput> {
    let units = read_metrics_csv(&c.metrics).map_err(|e| e.at_stage("load"))?;
    let mut regimes: Vec<String> = units.keys().map(|(r, _)| r.clone()).collect();
    regimes.dedup();
    if regimes.is_empty() {
        return Err(Error::invalid("metrics file has no rows").at_stage("load"));
    }
    let gaps = gaps_by_regime(&units, &regimes, &c.compare).map_err(|e| e.at_stage("evaluate"))?;
    Ok(RunOutput {
        files: gap_files("report", &gaps)?,
        replicate_seeds: Vec::new(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditSummary {
    pub passed: bool,
    pub splits: Vec<SplitAudit>,
}

/// Builds every configured split and audits it; the run fails with a
/// leakage error if any check fails.
pub fn run_audit(c: &AuditConfig, splits: usize, seed: u64) -> Result<(RunOutput, AuditSummary)> {
    let graphs = load_all(&c.datasets)?;
    let js = jobs(graphs.len(), &c.regimes, splits, seed);
    let audits: Vec<SplitAudit> = js
        .par_iter()
        .map(|j| Ok(split_and_audit(&c.datasets[j.d].name, &graphs[j.d], j.regime, j.s, j.seed)?.1))
        .collect::<Result<_>>()?;
    let summary = AuditSummary {
        passed: audits.iter().all(|a| a.passed),
        splits: audits,
    };
    if let Some(bad) = summary.splits.iter().find(|a| !a.passed) {
        let err = bad.report.ensure().unwrap_err();
        return Err(
            Error::Leakage(format!("{} {} split {}: {err}", bad.dataset, bad.regime, bad.split)).at_stage("audit"),
        );
    }
    Ok((
        RunOutput {
            files: vec![("audit.json".into(), json_bytes(&summary)?)],
            replicate_seeds: js.iter().map(|j| j.seed).collect(),
        },
        summary,
    ))
}
