use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::metrics::MetricReport;
use crate::error::{Error, Result};

/// Normal-approximation multiplier for the 95% interval.
pub const Z_95: f64 = 1.96;
pub const GAP_METRICS: [&str; 5] = ["logloss", "brier", "auc", "ap", "ece"];

/// One evaluation unit: a split of a dataset.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SplitKey {
    pub dataset: String,
    pub split: usize,
}

impl SplitKey {
    pub fn new(dataset: impl Into<String>, split: usize) -> Self {
        SplitKey {
            dataset: dataset.into(),
            split,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapSummary {
    pub metric: String,
    pub count: usize,
    pub mean: f64,
    /// `sd / √S` with the sample standard deviation; NaN for a single unit.
    pub se: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// Fraction of units with `Δ > 0`; ties are not wins.
    pub win_rate: f64,
}

impl GapSummary {
    pub fn from_gaps(metric: &str, gaps: &[f64]) -> Self {
        let s = gaps.len() as f64;
        let mean = gaps.iter().sum::<f64>() / s;
        let se = if gaps.len() > 1 {
            (gaps.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / (s - 1.0)).sqrt() / s.sqrt()
        } else {
            f64::NAN
        };
        GapSummary {
            metric: metric.to_string(),
            count: gaps.len(),
            mean,
            se,
            ci_lo: mean - Z_95 * se,
            ci_hi: mean + Z_95 * se,
            win_rate: gaps.iter().filter(|&&g| g > 0.0).count() as f64 / s,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedGapReport {
    /// `Δ = metric(A) − metric(B)` per unit and metric.
    pub gaps: Vec<(SplitKey, BTreeMap<String, f64>)>,
    pub pooled: Vec<GapSummary>,
    pub per_dataset: BTreeMap<String, Vec<GapSummary>>,
}

impl PairedGapReport {
    pub fn pooled_metric(&self, metric: &str) -> Option<&GapSummary> {
        self.pooled.iter().find(|g| g.metric == metric)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Summary CSV `scope,metric,count,mean,se,ci_lo,ci_hi,win_rate`; the
    /// pooled scope is `all`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["scope", "metric", "count", "mean", "se", "ci_lo", "ci_hi", "win_rate"])?;
        let rows = std::iter::once(("all", &self.pooled)).chain(self.per_dataset.iter().map(|(k, v)| (k.as_str(), v)));
        for (scope, sums) in rows {
            for g in sums {
                w.write_record([
                    scope.to_string(),
                    g.metric.clone(),
                    g.count.to_string(),
                    g.mean.to_string(),
                    g.se.to_string(),
                    g.ci_lo.to_string(),
                    g.ci_hi.to_string(),
                    g.win_rate.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Per-unit metric values keyed by metric name.
pub type UnitMetrics = BTreeMap<String, f64>;

fn keyed<'a, T>(xs: &'a [(SplitKey, T)]) -> Result<BTreeMap<&'a SplitKey, &'a T>> {
    let mut m = BTreeMap::new();
    for (k, r) in xs {
        if m.insert(k, r).is_some() {
            return Err(Error::invalid(format!("duplicate split key {k:?}")));
        }
    }
    Ok(m)
}

fn report_values(r: &MetricReport) -> UnitMetrics {
    GAP_METRICS
        .iter()
        .map(|m| (m.to_string(), r.metric(m).unwrap()))
        .collect()
}

/// Paired gaps on identical units. Both sides must cover exactly the same
/// split keys.
pub fn paired_gaps(a: &[(SplitKey, MetricReport)], b: &[(SplitKey, MetricReport)]) -> Result<PairedGapReport> {
    let conv = |xs: &[(SplitKey, MetricReport)]| -> Vec<(SplitKey, UnitMetrics)> {
        xs.iter().map(|(k, r)| (k.clone(), report_values(r))).collect()
    };
    paired_gaps_from_values(&conv(a), &conv(b))
}

/// [`paired_gaps`] on stored metric values; every unit must carry all of
/// [`GAP_METRICS`].
pub fn paired_gaps_from_values(
    a: &[(SplitKey, UnitMetrics)],
    b: &[(SplitKey, UnitMetrics)],
) -> Result<PairedGapReport> {
    let (ma, mb) = (keyed(a)?, keyed(b)?);
    if ma.is_empty() {
        return Err(Error::invalid("no splits to compare"));
    }
    if ma.keys().ne(mb.keys()) {
        return Err(Error::invalid("split keys differ between the two methods"));
    }
    let get = |u: &UnitMetrics, m: &str| -> Result<f64> {
        u.get(m)
            .copied()
            .ok_or_else(|| Error::invalid(format!("metric '{m}' missing for a unit")))
    };
    let gaps: Vec<(SplitKey, BTreeMap<String, f64>)> = ma
        .iter()
        .map(|(k, ra)| {
            let rb = mb[k];
            let d = GAP_METRICS
                .iter()
                .map(|m| Ok((m.to_string(), get(ra, m)? - get(rb, m)?)))
                .collect::<Result<_>>()?;
            Ok(((*k).clone(), d))
        })
        .collect::<Result<_>>()?;
    let summarize = |units: &[&(SplitKey, BTreeMap<String, f64>)]| -> Vec<GapSummary> {
        GAP_METRICS
            .iter()
            .map(|m| {
                let xs: Vec<f64> = units.iter().map(|(_, d)| d[*m]).collect();
                GapSummary::from_gaps(m, &xs)
            })
            .collect()
    };
    let all: Vec<_> = gaps.iter().collect();
    let mut per_dataset = BTreeMap::new();
    for ds in gaps
        .iter()
        .map(|(k, _)| k.dataset.clone())
        .collect::<std::collections::BTreeSet<_>>()
    {
        let units: Vec<_> = gaps.iter().filter(|(k, _)| k.dataset == ds).collect();
        per_dataset.insert(ds, summarize(&units));
    }
    Ok(PairedGapReport {
        pooled: summarize(&all),
        per_dataset,
        gaps,
    })
}
