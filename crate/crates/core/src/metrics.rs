//! Regression errors, balanced accuracy, the Brix-Color-Hinge score,
//! thresholded harvest decisions and Pearson correlation with Fisher-z
//! confidence intervals.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Two-sided 95% standard normal quantile.
pub const Z_CRIT_95: f64 = 1.959964;

/// Default °Brix harvest threshold.
pub const HARVEST_THRESHOLD: f64 = 17.0;

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::LengthMismatch { left: a, right: b });
    }
    if a == 0 {
        return Err(Error::EmptyInput("metric needs at least one value"));
    }
    Ok(())
}

pub fn mae(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check_lengths(pred.len(), truth.len())?;
    Ok(pred.iter().zip(truth).map(|(p, t)| (p - t).abs()).sum::<f64>() / pred.len() as f64)
}

pub fn rmse(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check_lengths(pred.len(), truth.len())?;
    let mse = pred.iter().zip(truth).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / pred.len() as f64;
    Ok(mse.sqrt())
}

/// Mean per-class recall over the classes present in `truth`.
pub fn balanced_accuracy(pred: &[u8], truth: &[u8]) -> Result<f64> {
    check_lengths(pred.len(), truth.len())?;
    if let Some(bad) = pred.iter().chain(truth).find(|c| !(1..=6).contains(*c)) {
        return Err(Error::InvalidInput(format!("color class {bad} outside 1..6")));
    }
    let mut per_class: BTreeMap<u8, (usize, usize)> = BTreeMap::new();
    for (p, t) in pred.iter().zip(truth) {
        let e = per_class.entry(*t).or_default();
        e.1 += 1;
        if p == t {
            e.0 += 1;
        }
    }
    let recall_sum: f64 = per_class.values().map(|&(hit, n)| hit as f64 / n as f64).sum();
    Ok(recall_sum / per_class.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BchParams {
    /// Hinge degree.
    pub rho: f64,
    /// °Brix MAE threshold.
    pub t_brix: f64,
    /// Balanced-accuracy threshold.
    pub t_color: f64,
}

impl Default for BchParams {
    fn default() -> Self {
        Self {
            rho: 2.0,
            t_brix: 2.5,
            t_color: 0.8,
        }
    }
}

impl BchParams {
    pub fn new(rho: f64, t_brix: f64, t_color: f64) -> Result<Self> {
        let p = Self { rho, t_brix, t_color };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_color > 0.0 && self.t_color <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "t_color must be in (0, 1], got {}",
                self.t_color
            )));
        }
        if !(self.t_brix > 0.0) || !self.t_brix.is_finite() {
            return Err(Error::InvalidInput(format!(
                "t_brix must be positive, got {}",
                self.t_brix
            )));
        }
        if !(self.rho > 0.0) || !self.rho.is_finite() {
            return Err(Error::InvalidInput(format!("rho must be positive, got {}", self.rho)));
        }
        Ok(())
    }

    /// Normalization between the °Brix and color terms.
    pub fn eta(&self) -> f64 {
        self.t_brix / self.t_color
    }
}

/// Brix-Color-Hinge model selection score (lower is better).
pub fn bch_score(a_color: f64, l_brix: f64, params: &BchParams) -> f64 {
    let eta = params.eta();
    let color_hinge = (-eta * (a_color - params.t_color)).max(0.0).powf(params.rho);
    let brix_hinge = (l_brix - params.t_brix).max(0.0).powf(params.rho);
    eta * (1.0 - a_color) + l_brix + color_hinge + brix_hinge
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HarvestReport {
    pub threshold: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub fdr: f64,
    pub fnr: f64,
    /// False when nothing was predicted positive (precision reported as 0).
    pub precision_defined: bool,
    /// False when nothing is truly positive (recall reported as 0).
    pub recall_defined: bool,
}

impl HarvestReport {
    pub fn from_counts(threshold: f64, tp: usize, fp: usize, fn_: usize, tn: usize) -> Self {
        let ratio = |num: usize, den: usize| if den == 0 { None } else { Some(num as f64 / den as f64) };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let mut report = Self::from_ratios(threshold, precision.unwrap_or(0.0), recall.unwrap_or(0.0));
        report.tp = tp;
        report.fp = fp;
        report.fn_ = fn_;
        report.tn = tn;
        report.precision_defined = precision.is_some();
        report.recall_defined = recall.is_some();
        report
    }

    /// Derive the complementary rates from a precision/recall pair alone.
    pub fn from_ratios(threshold: f64, precision: f64, recall: f64) -> Self {
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Self {
            threshold,
            tp: 0,
            fp: 0,
            fn_: 0,
            tn: 0,
            precision,
            recall,
            f1,
            fdr: 1.0 - precision,
            fnr: 1.0 - recall,
            precision_defined: true,
            recall_defined: true,
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

/// Harvest decisions: a value is positive (ripe) when `value >= threshold`.
pub fn harvest_metrics(pred: &[f64], truth: &[f64], threshold: f64) -> Result<HarvestReport> {
    harvest_metrics_with(pred, threshold, truth, threshold)
}

/// Like [`harvest_metrics`] but with a separate cut for predictions and truth,
/// e.g. a human color score at 6 against Brix at 17. The report carries the
/// prediction threshold.
pub fn harvest_metrics_with(
    pred: &[f64],
    pred_threshold: f64,
    truth: &[f64],
    truth_threshold: f64,
) -> Result<HarvestReport> {
    if pred.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: pred.len(),
            right: truth.len(),
        });
    }
    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    for (p, t) in pred.iter().zip(truth) {
        match (*p >= pred_threshold, *t >= truth_threshold) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    Ok(HarvestReport::from_counts(pred_threshold, tp, fp, fn_, tn))
}

/// Sample Pearson correlation coefficient.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: x.len(),
        });
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::DegenerateVariance(
            "pearson needs non-zero variance in both inputs",
        ));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub r: f64,
    pub n: usize,
    pub p_value: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

fn z_quantile(level: f64) -> f64 {
    if (level - 0.95).abs() < 1e-12 {
        return Z_CRIT_95;
    }
    let normal = Normal::standard();
    normal.inverse_cdf(0.5 + level / 2.0)
}

/// Fisher-z confidence interval for `r` and the two-sided p-value against r = 0.
pub fn fisher_ci(r: f64, n: usize, level: f64) -> Result<CorrelationReport> {
    if !(r.abs() < 1.0) {
        return Err(Error::InvalidInput(format!("|r| must be < 1, got {r}")));
    }
    if n <= 3 {
        return Err(Error::InvalidInput(format!("Fisher interval needs n > 3, got {n}")));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidInput(format!(
            "confidence level must be in (0, 1), got {level}"
        )));
    }
    let z = r.atanh();
    let se = 1.0 / ((n - 3) as f64).sqrt();
    let zc = z_quantile(level);
    let stat = (z / se).abs();
    let p_value = (2.0 * (1.0 - Normal::standard().cdf(stat))).min(1.0);
    Ok(CorrelationReport {
        r,
        n,
        p_value,
        ci_low: (z - zc * se).tanh(),
        ci_high: (z + zc * se).tanh(),
    })
}

/// Pearson r plus its 95% Fisher interval. Perfect correlation collapses the
/// interval onto r with p = 0.
pub fn correlation_report(x: &[f64], y: &[f64]) -> Result<CorrelationReport> {
    let r = pearson(x, y)?;
    if r.abs() >= 1.0 || x.len() <= 3 {
        return Ok(CorrelationReport {
            r,
            n: x.len(),
            p_value: if r.abs() >= 1.0 { 0.0 } else { f64::NAN },
            ci_low: if r.abs() >= 1.0 { r } else { -1.0 },
            ci_high: if r.abs() >= 1.0 { r } else { 1.0 },
        });
    }
    fisher_ci(r, x.len(), 0.95)
}
