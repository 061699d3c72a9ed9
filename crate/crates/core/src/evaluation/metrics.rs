use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// Probability floor for log-loss.
pub const LOGLOSS_EPS: f64 = 1e-12;
pub const DEFAULT_BINS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityBin {
    pub lo: f64,
    pub hi: f64,
    pub mean_prediction: f64,
    pub empirical_rate: f64,
    pub count: usize,
}

/// Murphy decomposition over equal-width bins. With forecasts replaced by
/// their bin means, `binned_brier = reliability − resolution + uncertainty`
/// exactly; the raw Brier score adds the within-bin terms:
/// `brier = binned_brier + within_bin_variance − 2 · within_bin_covariance`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Murphy {
    pub reliability: f64,
    pub resolution: f64,
    pub uncertainty: f64,
    pub binned_brier: f64,
    pub within_bin_variance: f64,
    pub within_bin_covariance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub n: usize,
    pub positive_rate: f64,
    pub brier: f64,
    pub logloss: f64,
    /// NaN when only one class is present.
    pub auc: f64,
    /// NaN when there are no positives.
    pub ap: f64,
    pub ece: f64,
    pub murphy: Murphy,
    pub reliability_bins: Vec<ReliabilityBin>,
}

impl MetricReport {
    pub fn metric(&self, name: &str) -> Option<f64> {
        Some(match name {
            "brier" => self.brier,
            "logloss" => self.logloss,
            "auc" => self.auc,
            "ap" => self.ap,
            "ece" => self.ece,
            _ => return None,
        })
    }

    /// Reliability-diagram CSV: `bin,lo,hi,mean_prediction,empirical_rate,count`.
    pub fn write_bins_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["bin", "lo", "hi", "mean_prediction", "empirical_rate", "count"])?;
        for (b, r) in self.reliability_bins.iter().enumerate() {
            w.write_record([
                b.to_string(),
                r.lo.to_string(),
                r.hi.to_string(),
                r.mean_prediction.to_string(),
                r.empirical_rate.to_string(),
                r.count.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn y(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

pub fn brier(preds: &[f64], labels: &[bool]) -> f64 {
    preds.iter().zip(labels).map(|(p, &l)| (p - y(l)).powi(2)).sum::<f64>() / preds.len() as f64
}

pub fn logloss(preds: &[f64], labels: &[bool]) -> f64 {
    preds
        .iter()
        .zip(labels)
        .map(|(&p, &l)| {
            let p = p.clamp(LOGLOSS_EPS, 1.0 - LOGLOSS_EPS);
            if l {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum::<f64>()
        / preds.len() as f64
}

/// Rank-sum AUC with midranks for ties.
pub fn auc(preds: &[f64], labels: &[bool]) -> f64 {
    let n1 = labels.iter().filter(|&&l| l).count();
    let n0 = labels.len() - n1;
    if n1 == 0 || n0 == 0 {
        return f64::NAN;
    }
    let mut idx: Vec<usize> = (0..preds.len()).collect();
    idx.sort_by(|&a, &b| preds[a].total_cmp(&preds[b]));
    let mut rank_sum = 0.0;
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && preds[idx[end]] == preds[idx[start]] {
            end += 1;
        }
        // ranks start+1..=end share their average
        let mid = (start + 1 + end) as f64 / 2.0;
        rank_sum += mid * idx[start..end].iter().filter(|&&i| labels[i]).count() as f64;
        start = end;
    }
    let n1f = n1 as f64;
    (rank_sum - n1f * (n1f + 1.0) / 2.0) / (n1f * n0 as f64)
}

/// Average precision by step integration of the precision–recall curve,
/// with tied scores entering as one threshold.
pub fn average_precision(preds: &[f64], labels: &[bool]) -> f64 {
    let total_pos = labels.iter().filter(|&&l| l).count();
    if total_pos == 0 {
        return f64::NAN;
    }
    let mut idx: Vec<usize> = (0..preds.len()).collect();
    idx.sort_by(|&a, &b| preds[b].total_cmp(&preds[a]));
    let (mut tp, mut fp, mut ap) = (0usize, 0usize, 0.0);
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && preds[idx[end]] == preds[idx[start]] {
            end += 1;
        }
        let pos = idx[start..end].iter().filter(|&&i| labels[i]).count();
        tp += pos;
        fp += end - start - pos;
        if pos > 0 {
            ap += (tp as f64 / (tp + fp) as f64) * (pos as f64 / total_pos as f64);
        }
        start = end;
    }
    ap
}

/// Equal-width bin index `min(⌊p·B⌋, B−1)`.
pub fn bin_index(p: f64, bins: usize) -> usize {
    ((p * bins as f64).floor() as usize).min(bins - 1)
}

pub fn score_metrics(preds: &[f64], labels: &[bool], bins: usize) -> Result<MetricReport> {
    check_len(preds.len(), labels.len())?;
    if preds.is_empty() {
        return Err(Error::invalid("no predictions to score"));
    }
    if bins == 0 {
        return Err(Error::invalid("need at least one calibration bin"));
    }
    if let Some(p) = preds.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::invalid(format!("prediction {p} outside [0,1]")));
    }
    let n = preds.len();
    let nf = n as f64;
    let mut count = vec![0usize; bins];
    let mut psum = vec![0.0; bins];
    let mut osum = vec![0.0; bins];
    for (&p, &l) in preds.iter().zip(labels) {
        let b = bin_index(p, bins);
        count[b] += 1;
        psum[b] += p;
        osum[b] += y(l);
    }
    let pbar: Vec<f64> = (0..bins)
        .map(|b| if count[b] > 0 { psum[b] / count[b] as f64 } else { 0.0 })
        .collect();
    let obar: Vec<f64> = (0..bins)
        .map(|b| if count[b] > 0 { osum[b] / count[b] as f64 } else { 0.0 })
        .collect();
    let base = osum.iter().sum::<f64>() / nf;
    let (mut rel, mut res, mut ece) = (0.0, 0.0, 0.0);
    for b in 0..bins {
        if count[b] == 0 {
            continue;
        }
        let wgt = count[b] as f64 / nf;
        rel += wgt * (pbar[b] - obar[b]).powi(2);
        res += wgt * (obar[b] - base).powi(2);
        ece += wgt * (pbar[b] - obar[b]).abs();
    }
    let (mut wbv, mut wbc, mut binned) = (0.0, 0.0, 0.0);
    for (&p, &l) in preds.iter().zip(labels) {
        let b = bin_index(p, bins);
        wbv += (p - pbar[b]).powi(2);
        wbc += (p - pbar[b]) * (y(l) - obar[b]);
        binned += (pbar[b] - y(l)).powi(2);
    }
    let reliability_bins = (0..bins)
        .map(|b| ReliabilityBin {
            lo: b as f64 / bins as f64,
            hi: (b + 1) as f64 / bins as f64,
            mean_prediction: pbar[b],
            empirical_rate: obar[b],
            count: count[b],
        })
        .collect();
    Ok(MetricReport {
        n,
        positive_rate: base,
        brier: brier(preds, labels),
        logloss: logloss(preds, labels),
        auc: auc(preds, labels),
        ap: average_precision(preds, labels),
        ece,
        murphy: Murphy {
            reliability: rel,
            resolution: res,
            uncertainty: base * (1.0 - base),
            binned_brier: binned / nf,
            within_bin_variance: wbv / nf,
            within_bin_covariance: wbc / nf,
        },
        reliability_bins,
    })
}
