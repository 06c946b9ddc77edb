//! Classification and group-fairness metrics.
//!
//! Values are fractions in `[0, 1]`; presentation layers scale to percent.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Predictions {
    pub y_hat: Vec<u8>,
    pub y_true: Vec<u8>,
    pub sensitive: Vec<u8>,
    /// Nodes the metrics are computed on.
    pub eval_idx: Vec<usize>,
}

impl Predictions {
    pub fn new(
        y_hat: Vec<u8>,
        y_true: Vec<u8>,
        sensitive: Vec<u8>,
        eval_idx: Vec<usize>,
    ) -> Result<Self> {
        if y_hat.len() != y_true.len() || y_hat.len() != sensitive.len() {
            return Err(Error::shape(
                "Predictions",
                y_hat.len(),
                format!("{} / {}", y_true.len(), sensitive.len()),
            ));
        }
        if eval_idx.is_empty() {
            return Err(Error::Degenerate("empty evaluation set".into()));
        }
        if eval_idx.iter().any(|&i| i >= y_hat.len()) {
            return Err(Error::InvalidArgument(
                "evaluation index out of range".into(),
            ));
        }
        Ok(Self {
            y_hat,
            y_true,
            sensitive,
            eval_idx,
        })
    }

    fn iter(&self) -> impl Iterator<Item = (u8, u8, u8)> + '_ {
        self.eval_idx
            .iter()
            .map(|&i| (self.y_hat[i], self.y_true[i], self.sensitive[i]))
    }
}

pub fn accuracy(p: &Predictions) -> f64 {
    let correct = p.iter().filter(|(h, t, _)| h == t).count();
    correct as f64 / p.eval_idx.len() as f64
}

/// Binary F1 of class 1. Zero when there are neither positive predictions
/// nor positive labels.
pub fn f1_binary(p: &Predictions) -> f64 {
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (h, t, _) in p.iter() {
        match (h, t) {
            (1, 1) => tp += 1,
            (1, 0) => fp += 1,
            (0, 1) => fn_ += 1,
            _ => {}
        }
    }
    let denom = 2 * tp + fp + fn_;
    if denom == 0 {
        0.0
    } else {
        2.0 * tp as f64 / denom as f64
    }
}

/// `|P(y_hat=1 | s=0) - P(y_hat=1 | s=1)|`.
pub fn demographic_parity(p: &Predictions) -> Result<f64> {
    let mut pos = [0usize; 2];
    let mut tot = [0usize; 2];
    for (h, _, s) in p.iter() {
        tot[s as usize] += 1;
        pos[s as usize] += h as usize;
    }
    if tot[0] == 0 || tot[1] == 0 {
        return Err(Error::Degenerate(
            "demographic parity needs both sensitive groups".into(),
        ));
    }
    Ok((pos[0] as f64 / tot[0] as f64 - pos[1] as f64 / tot[1] as f64).abs())
}

/// `|P(y_hat=1 | y=1, s=0) - P(y_hat=1 | y=1, s=1)|`.
pub fn equal_opportunity(p: &Predictions) -> Result<f64> {
    let mut pos = [0usize; 2];
    let mut tot = [0usize; 2];
    for (h, t, s) in p.iter() {
        if t == 1 {
            tot[s as usize] += 1;
            pos[s as usize] += h as usize;
        }
    }
    if tot[0] == 0 || tot[1] == 0 {
        return Err(Error::Degenerate(
            "equal opportunity needs a positive node in both sensitive groups".into(),
        ));
    }
    Ok((pos[0] as f64 / tot[0] as f64 - pos[1] as f64 / tot[1] as f64).abs())
}

/// Metrics of one run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedMetrics {
    pub seed: u64,
    pub acc: f64,
    pub f1: f64,
    pub dp: f64,
    pub eo: f64,
}

impl SeedMetrics {
    pub fn evaluate(p: &Predictions, seed: u64) -> Result<Self> {
        Ok(Self {
            seed,
            acc: accuracy(p),
            f1: f1_binary(p),
            dp: demographic_parity(p)?,
            eo: equal_opportunity(p)?,
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricValues {
    pub acc: f64,
    pub f1: f64,
    pub dp: f64,
    pub eo: f64,
}

impl MetricValues {
    pub fn percent(&self) -> Self {
        Self {
            acc: 100.0 * self.acc,
            f1: 100.0 * self.f1,
            dp: 100.0 * self.dp,
            eo: 100.0 * self.eo,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub per_seed: Vec<SeedMetrics>,
    pub mean: MetricValues,
    /// Population standard deviation.
    pub std: MetricValues,
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn aggregate_seeds(runs: &[SeedMetrics]) -> Result<MetricsReport> {
    if runs.is_empty() {
        return Err(Error::InvalidArgument("no runs to aggregate".into()));
    }
    let (acc_m, acc_s) = mean_std(runs.iter().map(|r| r.acc));
    let (f1_m, f1_s) = mean_std(runs.iter().map(|r| r.f1));
    let (dp_m, dp_s) = mean_std(runs.iter().map(|r| r.dp));
    let (eo_m, eo_s) = mean_std(runs.iter().map(|r| r.eo));
    Ok(MetricsReport {
        per_seed: runs.to_vec(),
        mean: MetricValues {
            acc: acc_m,
            f1: f1_m,
            dp: dp_m,
            eo: eo_m,
        },
        std: MetricValues {
            acc: acc_s,
            f1: f1_s,
            dp: dp_s,
            eo: eo_s,
        },
    })
}
