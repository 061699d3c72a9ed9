//! Synthetic experiments: span vs simplex (`s1`), learning curve (`s2`),
//! sparse phase transition (`s3`) and mixture tail exponents (`s4`).

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{DyadFractions, LearningCurveConfig, PhaseConfig, SyntheticConfig, TailConfig};
use super::{csv_bytes, json_bytes, RunOutput};
use crate::agents::logit;
use crate::error::{Error, Result};
use crate::evaluation::{
    cv_best_agent, make_split, score_metrics, stack_logistic, LabeledDyad, MetricReport, Regime, DEFAULT_BINS,
};
use crate::graphon::{sigmoid, spectral_bracket, Graphon, Partition, SpectralBracket};
use crate::netstats::{hill_tail_exponent, DegreePmf};
use crate::sampling::{derive_seed, mean_sd, phase_sweep, rng_for, sample_graph, PHASE_SPECTRAL_GRID};
use crate::synthesis::{fit_ls, fit_ridge, fit_simplex, predict_clipped, DyadSample};

/// Mixture generator for the learning experiments. The truth is
/// `Σ mixture[c]·component[c]`; agent `c` sees a sharpened copy of component
/// `c` alone (logits scaled by `sharpen` for the two logistic components,
/// weights raised to `sharpen` for the product component).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Generator {
    pub sbm_within: f64,
    pub sbm_between: f64,
    pub lowrank_pieces: usize,
    pub lowrank_radius: f64,
    pub lowrank_intercept: f64,
    pub product_pieces: usize,
    pub product_lo: f64,
    pub product_hi: f64,
    pub mixture: [f64; 3],
    pub sharpen: f64,
}

pub const AGENT_NAMES: [&str; 3] = ["Block", "LowRank", "Product"];

impl Generator {
    pub fn validate(&self) -> Result<()> {
        let open = |p: f64| p > 0.0 && p < 1.0;
        let ok = open(self.sbm_within)
            && open(self.sbm_between)
            && self.lowrank_pieces >= 1
            && self.product_pieces >= 1
            && self.product_lo > 0.0
            && self.product_lo <= self.product_hi
            && self.product_hi <= 1.0
            && self.mixture.iter().all(|&m| m >= 0.0)
            && self.mixture.iter().sum::<f64>() <= 1.0 + 1e-12
            && self.sharpen > 0.0
            && self.lowrank_radius.is_finite()
            && self.lowrank_intercept.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid generator {self:?}")))
        }
    }

    fn product_weights(&self) -> Vec<f64> {
        let k = self.product_pieces;
        (0..k)
            .map(|i| {
                let t = if k == 1 { 0.0 } else { i as f64 / (k - 1) as f64 };
                self.product_lo + t * (self.product_hi - self.product_lo)
            })
            .collect()
    }

    fn positions(&self, scale: f64) -> Vec<Vec<f64>> {
        let l = self.lowrank_pieces;
        (0..l)
            .map(|k| {
                let a = 2.0 * PI * k as f64 / l as f64;
                vec![
                    scale * self.lowrank_radius * a.cos(),
                    scale * self.lowrank_radius * a.sin(),
                ]
            })
            .collect()
    }

    fn components(&self, sharpen: f64) -> Result<Vec<Graphon>> {
        let (w, b) = (self.sbm_within, self.sbm_between);
        let block = Graphon::equal_blocks(vec![
            vec![logit_sharpen(w, sharpen), logit_sharpen(b, sharpen)],
            vec![logit_sharpen(b, sharpen), logit_sharpen(w, sharpen)],
        ])?;
        let lr = Graphon::logistic_low_rank(
            Partition::uniform(self.lowrank_pieces).breaks().to_vec(),
            self.positions(sharpen.sqrt()),
            sharpen * self.lowrank_intercept,
        )?;
        let pw = Graphon::product_weight(
            Partition::uniform(self.product_pieces).breaks().to_vec(),
            self.product_weights().iter().map(|t| t.powf(sharpen)).collect(),
        )?;
        Ok(vec![block, lr, pw])
    }

    pub fn truth(&self) -> Result<Graphon> {
        Graphon::weighted_sum(&self.mixture, &self.components(1.0)?)
    }

    pub fn agents(&self) -> Result<Vec<Graphon>> {
        self.components(self.sharpen)
    }
}

fn logit_sharpen(p: f64, k: f64) -> f64 {
    sigmoid(k * logit(p))
}

/// Scores for one replicate, in method order.
pub type ReplicateScores = Vec<(String, MetricReport)>;

fn dyad_samples(dyads: &[LabeledDyad], latents: &[f64], agents: &[Graphon]) -> Result<Vec<DyadSample>> {
    dyads
        .iter()
        .map(|d| {
            let (x, y) = (latents[d.i], latents[d.j]);
            let preds: Vec<f64> = agents.iter().map(|a| a.evaluate(x, y)).collect();
            DyadSample::new((d.i, d.j), &preds, d.label)
        })
        .collect()
}

/// Scores every method on held-out dyads. Shared by the synthetic and real
/// pipelines; agent columns come first in `features`.
pub(crate) fn score_methods(
    agent_names: &[&str],
    train: &[DyadSample],
    val: &[DyadSample],
    test: &[DyadSample],
    ridge_lambda: f64,
    oracle_best: bool,
) -> Result<ReplicateScores> {
    let labels: Vec<bool> = test.iter().map(|s| s.label).collect();
    let score = |preds: Vec<f64>| score_metrics(&preds, &labels, DEFAULT_BINS);
    let predict = |w: &crate::synthesis::WeightVector| -> Result<Vec<f64>> {
        test.iter().map(|s| predict_clipped(w, &s.features)).collect()
    };
    let mut out = Vec::new();
    out.push(("BPS_LS".to_string(), score(predict(&fit_ls(train)?)?)?));
    out.push((
        "BPS_Ridge".to_string(),
        score(predict(&fit_ridge(train, ridge_lambda)?)?)?,
    ));
    out.push(("BPS_Simplex".to_string(), score(predict(&fit_simplex(train)?)?)?));
    let agent_scores: Vec<MetricReport> = (0..agent_names.len())
        .map(|a| score(test.iter().map(|s| s.features[a + 1]).collect()))
        .collect::<Result<_>>()?;
    let cv = cv_best_agent(val)?;
    out.push(("CV_BestAgent".to_string(), agent_scores[cv].clone()));
    let stack = stack_logistic(train)?;
    out.push((
        "Stack_Logistic".to_string(),
        score(test.iter().map(|s| stack.predict(&s.features)).collect())?,
    ));
    if oracle_best {
        let best = (0..agent_scores.len())
            .min_by(|&a, &b| agent_scores[a].logloss.total_cmp(&agent_scores[b].logloss))
            .unwrap();
        out.push(("BestAgent".to_string(), agent_scores[best].clone()));
    }
    for (name, s) in agent_names.iter().zip(agent_scores) {
        out.push((name.to_string(), s));
    }
    Ok(out)
}

/// One learning replicate: sample a graph of size `n`, split its dyads
/// uniformly, feed agents the true latent positions and score the methods.
pub fn learning_replicate(
    gen: &Generator,
    n: usize,
    dyads: DyadFractions,
    ridge_lambda: f64,
    seed: u64,
) -> Result<ReplicateScores> {
    let truth = gen.truth()?;
    let agents = gen.agents()?;
    let g = sample_graph(&truth, n, seed).map_err(|e| e.at_stage("sample"))?;
    let regime = Regime::UniformDyads {
        train_frac: dyads.train,
        val_frac: dyads.val,
        test_frac: dyads.test,
    };
    let split = make_split(&g, &regime, derive_seed(seed, 1)).map_err(|e| e.at_stage("split"))?;
    let feats = |d: &[LabeledDyad]| dyad_samples(d, &g.latents, &agents);
    let (train, val, test) = (feats(&split.train)?, feats(&split.val)?, feats(&split.test)?);
    score_methods(&AGENT_NAMES, &train, &val, &test, ridge_lambda, true).map_err(|e| e.at_stage("synthesis"))
}

const REPLICATE_HEADER: [&str; 8] = ["replicate", "seed", "method", "brier", "logloss", "auc", "ap", "ece"];

fn metric_fields(r: &MetricReport) -> [String; 5] {
    [r.brier, r.logloss, r.auc, r.ap, r.ece].map(|v| v.to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub replicates: usize,
    /// `(mean, se)` per metric, se from the sample standard deviation.
    pub metrics: BTreeMap<String, (f64, f64)>,
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let (m, sd) = mean_sd(xs);
    (m, sd / (xs.len() as f64).sqrt())
}

fn summarize(reps: &[ReplicateScores]) -> Vec<MethodSummary> {
    let methods: Vec<String> = reps[0].iter().map(|(m, _)| m.clone()).collect();
    methods
        .iter()
        .enumerate()
        .map(|(k, m)| {
            let metrics = ["brier", "logloss", "auc", "ap", "ece"]
                .iter()
                .map(|name| {
                    let xs: Vec<f64> = reps.iter().map(|r| r[k].1.metric(name).unwrap()).collect();
                    (name.to_string(), mean_se(&xs))
                })
                .collect();
            MethodSummary {
                method: m.clone(),
                replicates: reps.len(),
                metrics,
            }
        })
        .collect()
}

fn find<'a>(rep: &'a ReplicateScores, method: &str) -> &'a MetricReport {
    &rep.iter().find(|(m, _)| m == method).unwrap().1
}

/// Replicates in which `a` has strictly lower Brier and log-loss than `b`.
pub fn wins(reps: &[ReplicateScores], a: &str, b: &str) -> usize {
    reps.iter()
        .filter(|r| {
            let (x, y) = (find(r, a), find(r, b));
            x.brier < y.brier && x.logloss < y.logloss
        })
        .count()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct S1Summary {
    pub n: usize,
    pub replicates: usize,
    pub methods: Vec<MethodSummary>,
    /// Replicates where BPS_LS beats BestAgent in both Brier and log-loss.
    pub ls_beats_best_agent: usize,
    pub ls_beats_simplex: usize,
}

pub fn run_s1(c: &SyntheticConfig, replicates: usize, seed: u64) -> Result<RunOutput> {
    let seeds: Vec<u64> = (0..replicates as u64).map(|r| derive_seed(seed, r)).collect();
    let reps: Vec<ReplicateScores> = seeds
        .par_iter()
        .map(|&s| learning_replicate(&c.generator, c.n, c.dyads, c.ridge_lambda, s))
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for (r, (rep, s)) in reps.iter().zip(&seeds).enumerate() {
        for (m, rpt) in rep {
            let mut row = vec![r.to_string(), s.to_string(), m.clone()];
            row.extend(metric_fields(rpt));
            rows.push(row);
        }
    }
    let summary = S1Summary {
        n: c.n,
        replicates,
        methods: summarize(&reps),
        ls_beats_best_agent: wins(&reps, "BPS_LS", "BestAgent"),
        ls_beats_simplex: wins(&reps, "BPS_LS", "BPS_Simplex"),
    };
    Ok(RunOutput {
        files: vec![
            ("s1_replicates.csv".into(), csv_bytes(&REPLICATE_HEADER, &rows)?),
            ("s1_summary.json".into(), json_bytes(&summary)?),
        ],
        replicate_seeds: seeds,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct S2Result {
    pub n_grid: Vec<usize>,
    /// Replicate scores per grid point.
    pub replicates: Vec<Vec<ReplicateScores>>,
}

impl S2Result {
    pub fn summary(&self, n_index: usize) -> Vec<MethodSummary> {
        summarize(&self.replicates[n_index])
    }
}

pub fn learning_curve(c: &LearningCurveConfig, replicates: usize, seed: u64) -> Result<(S2Result, Vec<u64>)> {
    let r = replicates as u64;
    let jobs: Vec<(usize, u64)> = (0..c.n_grid.len())
        .flat_map(|k| (0..r).map(move |i| (k, derive_seed(seed, k as u64 * r + i))))
        .collect();
    let flat: Vec<ReplicateScores> = jobs
        .par_iter()
        .map(|&(k, s)| learning_replicate(&c.generator, c.n_grid[k], c.dyads, c.ridge_lambda, s))
        .collect::<Result<_>>()?;
    let replicates = flat.chunks(replicates).map(<[_]>::to_vec).collect();
    Ok((
        S2Result {
            n_grid: c.n_grid.clone(),
            replicates,
        },
        jobs.iter().map(|j| j.1).collect(),
    ))
}

pub fn run_s2(c: &LearningCurveConfig, replicates: usize, seed: u64) -> Result<RunOutput> {
    let (res, seeds) = learning_curve(c, replicates, seed)?;
    let mut rows = Vec::new();
    let mut summary_rows = Vec::new();
    for (k, &n) in res.n_grid.iter().enumerate() {
        for (r, rep) in res.replicates[k].iter().enumerate() {
            for (m, rpt) in rep {
                let mut row = vec![
                    n.to_string(),
                    r.to_string(),
                    seeds[k * replicates + r].to_string(),
                    m.clone(),
                ];
                row.extend(metric_fields(rpt));
                rows.push(row);
            }
        }
        for s in res.summary(k) {
            let (mb, sb) = s.metrics["brier"];
            let (ml, sl) = s.metrics["logloss"];
            summary_rows.push(vec![
                n.to_string(),
                s.method,
                mb.to_string(),
                sb.to_string(),
                ml.to_string(),
                sl.to_string(),
            ]);
        }
    }
    let header: Vec<&str> = std::iter::once("n").chain(REPLICATE_HEADER).collect();
    Ok(RunOutput {
        files: vec![
            ("s2_replicates.csv".into(), csv_bytes(&header, &rows)?),
            (
                "s2_summary.csv".into(),
                csv_bytes(
                    &["n", "method", "mean_brier", "se_brier", "mean_logloss", "se_logloss"],
                    &summary_rows,
                )?,
            ),
        ],
        replicate_seeds: seeds,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct S3Summary {
    pub n: usize,
    pub replicates: usize,
    pub rho_bps: f64,
    pub lambda_c: f64,
    pub bracket: SpectralBracket,
    /// `(1/upper, 1/lower)`.
    pub lambda_c_bounds: (f64, f64),
    pub onset_threshold: f64,
    pub empirical_onset: Option<f64>,
}

pub fn run_s3(c: &PhaseConfig, replicates: usize, seed: u64) -> Result<RunOutput> {
    let w = Graphon::weighted_sum(&c.weights, &c.parts)?;
    let bracket = spectral_bracket(&c.weights, &c.parts, PHASE_SPECTRAL_GRID)?;
    let curve = phase_sweep(&w, &c.lambda_grid, c.n, replicates, seed).map_err(|e| e.at_stage("sample"))?;
    let mut csv = Vec::new();
    curve.write_csv(&mut csv)?;
    let summary = S3Summary {
        n: c.n,
        replicates,
        rho_bps: curve.rho_bps,
        lambda_c: curve.lambda_c,
        lambda_c_bounds: bracket.lambda_c_bounds(),
        bracket,
        onset_threshold: c.onset_threshold,
        empirical_onset: curve.onset(c.onset_threshold),
    };
    let seeds = (0..(c.lambda_grid.len() * replicates) as u64)
        .map(|k| derive_seed(seed, k))
        .collect();
    Ok(RunOutput {
        files: vec![
            ("s3_curve.csv".into(), csv),
            ("s3_summary.json".into(), json_bytes(&summary)?),
        ],
        replicate_seeds: seeds,
    })
}

/// Hill estimates of the tail exponent of degree samples from
/// `(1 − π)·PL(γ_light) + π·PL(γ_heavy)`, per `π` and replicate.
pub fn tail_sweep(c: &TailConfig, replicates: usize, seed: u64) -> Result<(Vec<Vec<f64>>, Vec<u64>)> {
    let light = DegreePmf::power_law(c.gamma_light, c.k_min, c.k_max)?;
    let heavy = DegreePmf::power_law(c.gamma_heavy, c.k_min, c.k_max)?;
    let r = replicates as u64;
    let seeds: Vec<u64> = (0..c.pi_grid.len() as u64 * r).map(|k| derive_seed(seed, k)).collect();
    let mut out = Vec::with_capacity(c.pi_grid.len());
    for (k, &pi) in c.pi_grid.iter().enumerate() {
        let pmf = DegreePmf::mixture(&[light.clone(), heavy.clone()], &[1.0 - pi, pi])?;
        let est: Vec<f64> = seeds[k * replicates..(k + 1) * replicates]
            .par_iter()
            .map(|&s| {
                let mut rng = rng_for(s, 0);
                let xs: Vec<f64> = pmf
                    .sample(&mut rng, c.sample_size)
                    .into_iter()
                    .map(|d| d as f64)
                    .collect();
                hill_tail_exponent(&xs, c.hill_fraction)
            })
            .collect::<Result<_>>()?;
        out.push(est);
    }
    Ok((out, seeds))
}

pub fn run_s4(c: &TailConfig, replicates: usize, seed: u64) -> Result<RunOutput> {
    let (est, seeds) = tail_sweep(c, replicates, seed).map_err(|e| e.at_stage("sample"))?;
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for (k, &pi) in c.pi_grid.iter().enumerate() {
        for (r, g) in est[k].iter().enumerate() {
            rows.push(vec![
                pi.to_string(),
                r.to_string(),
                seeds[k * replicates + r].to_string(),
                g.to_string(),
            ]);
        }
        let (m, sd) = mean_sd(&est[k]);
        let gamma_min = if pi > 0.0 {
            c.gamma_light.min(c.gamma_heavy)
        } else {
            c.gamma_light
        };
        summary.push(vec![
            pi.to_string(),
            m.to_string(),
            sd.to_string(),
            replicates.to_string(),
            gamma_min.to_string(),
        ]);
    }
    Ok(RunOutput {
        files: vec![
            (
                "s4_replicates.csv".into(),
                csv_bytes(&["pi", "replicate", "seed", "gamma_hat"], &rows)?,
            ),
            (
                "s4_summary.csv".into(),
                csv_bytes(&["pi", "mean_gamma_hat", "sd_gamma_hat", "reps", "gamma_min"], &summary)?,
            ),
        ],
        replicate_seeds: seeds,
    })
}
