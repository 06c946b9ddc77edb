//! Sensitive-information leakage probes and Monte-Carlo checks of the
//! linear intensity model.
//!
//! A probe is a logistic regression predicting `s` from a representation.
//! Its leakage score is the mean probability it assigns to each node's true
//! sensitive value on held-out nodes: 0.5 means no recoverable signal, 1.0
//! means `s` is fully recoverable.

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::neutralizer::{neutralize, Estimator};
use crate::numerics::DenseMatrix;
use crate::rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub train_fraction: f64,
    pub iterations: usize,
    pub l2: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            train_fraction: 0.7,
            iterations: 1000,
            l2: 1e-4,
        }
    }
}

/// Logistic regression on standardized features.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbeModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    center: Vec<f64>,
    scale: Vec<f64>,
    pub train_idx: Vec<usize>,
    pub test_idx: Vec<usize>,
    pub seed: u64,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Random `fraction` / rest split of `0..n`, stratified by `groups`.
fn probe_split(groups: &[u8], fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut r = rng::stream(seed, "probe-split", 0);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for g in 0..2u8 {
        let mut idx: Vec<usize> = (0..groups.len()).filter(|&i| groups[i] == g).collect();
        idx.shuffle(&mut r);
        let cut =
            ((idx.len() as f64 * fraction).round() as usize).clamp(1.min(idx.len()), idx.len());
        train.extend_from_slice(&idx[..cut]);
        test.extend_from_slice(&idx[cut..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

impl ProbeModel {
    fn logit(&self, row: &[f64]) -> f64 {
        self.bias
            + row
                .iter()
                .zip(&self.center)
                .zip(&self.scale)
                .zip(&self.weights)
                .map(|(((x, c), s), w)| w * (x - c) / s)
                .sum::<f64>()
    }

    /// `P(s = 1 | x)` per row.
    pub fn predict_proba(&self, features: &DenseMatrix) -> Vec<f64> {
        (0..features.rows())
            .map(|i| sigmoid(self.logit(features.row(i))))
            .collect()
    }
}

pub fn fit_probe(features: &DenseMatrix, sensitive: &[u8], seed: u64) -> Result<ProbeModel> {
    fit_probe_with(features, sensitive, seed, &ProbeConfig::default())
}

/// Full-batch gradient descent on the L2-regularized logistic loss over the
/// probe-train rows. The step is `1 / L` for the standardized design.
pub fn fit_probe_with(
    features: &DenseMatrix,
    sensitive: &[u8],
    seed: u64,
    cfg: &ProbeConfig,
) -> Result<ProbeModel> {
    if features.rows() != sensitive.len() {
        return Err(Error::shape("fit_probe", features.rows(), sensitive.len()));
    }
    if !sensitive.contains(&0) || !sensitive.contains(&1) {
        return Err(Error::Degenerate(
            "probe needs both sensitive groups".into(),
        ));
    }
    let (train_idx, test_idx) = probe_split(sensitive, cfg.train_fraction, seed);
    if test_idx.is_empty() {
        return Err(Error::Degenerate("probe test set is empty".into()));
    }
    let d = features.cols();
    let m = train_idx.len() as f64;
    let mut center = vec![0.0; d];
    let mut scale = vec![0.0; d];
    for &i in &train_idx {
        for (c, x) in center.iter_mut().zip(features.row(i)) {
            *c += x / m;
        }
    }
    for &i in &train_idx {
        for ((s, x), c) in scale.iter_mut().zip(features.row(i)).zip(&center) {
            *s += (x - c) * (x - c) / m;
        }
    }
    for s in &mut scale {
        *s = if *s > 1e-24 { s.sqrt() } else { 1.0 };
    }
    let z = DenseMatrix::from_fn(train_idx.len(), d, |r, c| {
        (features.get(train_idx[r], c) - center[c]) / scale[c]
    });
    let y: Vec<f64> = train_idx.iter().map(|&i| f64::from(sensitive[i])).collect();

    let lr = 4.0 / (d as f64 + 1.0 + 4.0 * cfg.l2);
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut gw = vec![0.0; d];
    for _ in 0..cfg.iterations {
        gw.iter_mut().for_each(|g| *g = 0.0);
        let mut gb = 0.0;
        for r in 0..z.rows() {
            let row = z.row(r);
            let p = sigmoid(b + row.iter().zip(&w).map(|(x, w)| x * w).sum::<f64>());
            let e = (p - y[r]) / m;
            gb += e;
            for (g, x) in gw.iter_mut().zip(row) {
                *g += e * x;
            }
        }
        for (wi, gi) in w.iter_mut().zip(&gw) {
            *wi -= lr * (gi + cfg.l2 * *wi);
        }
        b -= lr * gb;
    }
    Ok(ProbeModel {
        weights: w,
        bias: b,
        center,
        scale,
        train_idx,
        test_idx,
        seed,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProbeGroup {
    /// `x_i`
    #[serde(rename = "raw")]
    Raw,
    /// `x_i + mean_{j in N_i} x_j`
    #[serde(rename = "raw+mp")]
    RawMp,
    /// `x~_i = x_i + delta * MLP(x_i)`
    #[serde(rename = "neutral")]
    Neutral,
    /// `x~_i + mean_{j in N_i} x~_j`
    #[serde(rename = "neutral+mp")]
    NeutralMp,
}

impl ProbeGroup {
    pub const ALL: [ProbeGroup; 4] = [
        ProbeGroup::Raw,
        ProbeGroup::RawMp,
        ProbeGroup::Neutral,
        ProbeGroup::NeutralMp,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ProbeGroup::Raw => "raw",
            ProbeGroup::RawMp => "raw+mp",
            ProbeGroup::Neutral => "neutral",
            ProbeGroup::NeutralMp => "neutral+mp",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub group: ProbeGroup,
    pub score: f64,
    pub n_probe_test: usize,
    pub seed: u64,
}

/// Mean probability of the true sensitive value over the probe-test rows.
pub fn probe_score(model: &ProbeModel, features: &DenseMatrix, sensitive: &[u8]) -> f64 {
    let p1 = model.predict_proba(&features.select_rows(&model.test_idx));
    let total: f64 = model
        .test_idx
        .iter()
        .zip(&p1)
        .map(|(&i, &p)| if sensitive[i] == 1 { p } else { 1.0 - p })
        .sum();
    total / model.test_idx.len() as f64
}

/// Conditional entropy estimate `-mean log P(s|x)` on probe-test rows, with
/// probabilities clamped at `1e-12`.
pub fn conditional_entropy(model: &ProbeModel, features: &DenseMatrix, sensitive: &[u8]) -> f64 {
    let p1 = model.predict_proba(&features.select_rows(&model.test_idx));
    let total: f64 = model
        .test_idx
        .iter()
        .zip(&p1)
        .map(|(&i, &p)| {
            let q = if sensitive[i] == 1 { p } else { 1.0 - p };
            -q.max(1e-12).ln()
        })
        .sum();
    total / model.test_idx.len() as f64
}

/// `h_i + (1/|N_i|) sum_{j in N_i} h_j`, unweighted; isolated nodes keep `h_i`.
pub fn add_neighbor_mean(g: &Graph, h: &DenseMatrix) -> Result<DenseMatrix> {
    if h.rows() != g.n_nodes() {
        return Err(Error::shape("add_neighbor_mean", g.n_nodes(), h.rows()));
    }
    let mut out = h.clone();
    for i in 0..g.n_nodes() {
        let nbrs = g.neighbors(i).0;
        if nbrs.is_empty() {
            continue;
        }
        let inv = 1.0 / nbrs.len() as f64;
        for &j in nbrs {
            for (o, v) in out.row_mut(i).iter_mut().zip(h.row(j)) {
                *o += inv * v;
            }
        }
    }
    Ok(out)
}

fn report(
    group: ProbeGroup,
    features: &DenseMatrix,
    sensitive: &[u8],
    seed: u64,
) -> Result<ProbeReport> {
    let model = fit_probe(features, sensitive, seed)?;
    Ok(ProbeReport {
        group,
        score: probe_score(&model, features, sensitive),
        n_probe_test: model.test_idx.len(),
        seed,
    })
}

/// Leakage of raw and neutralized features, each with and without one
/// round of mean aggregation. Uses layer 0 of `est`.
pub fn four_group_comparison(
    g: &Graph,
    est: &Estimator,
    delta: f64,
    seed: u64,
) -> Result<[ProbeReport; 4]> {
    let x = g.features();
    let s = g.sensitive();
    let neutral = neutralize(x, &est.estimate(0, x)?, delta)?;
    Ok([
        report(ProbeGroup::Raw, x, s, seed)?,
        report(ProbeGroup::RawMp, &add_neighbor_mean(g, x)?, s, seed)?,
        report(ProbeGroup::Neutral, &neutral, s, seed)?,
        report(
            ProbeGroup::NeutralMp,
            &add_neighbor_mean(g, &neutral)?,
            s,
            seed,
        )?,
    ])
}

/// Parameters of the Gaussian intensity model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoryConfig {
    /// Mean intensity of the true sensitive value.
    pub mu_c: f64,
    /// Mean intensity of the other value.
    pub mu_ic: f64,
    pub sigma: f64,
    pub p_same: f64,
    pub p_diff: f64,
    pub n_samples: usize,
    pub seed: u64,
}

impl Default for TheoryConfig {
    fn default() -> Self {
        Self {
            mu_c: 1.0,
            mu_ic: 0.0,
            sigma: 1.0,
            p_same: 0.8,
            p_diff: 0.2,
            n_samples: 100_000,
            seed: 0,
        }
    }
}

impl TheoryConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(Error::InvalidArgument("n_samples must be > 0".into()));
        }
        if !(self.sigma > 0.0) {
            return Err(Error::InvalidArgument("sigma must be > 0".into()));
        }
        let probs_ok = (0.0..=1.0).contains(&self.p_same) && (0.0..=1.0).contains(&self.p_diff);
        if !probs_ok || (self.p_same + self.p_diff - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(
                "p_same and p_diff must be probabilities summing to 1".into(),
            ));
        }
        Ok(())
    }
}

/// Sample mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub se: f64,
}

impl McEstimate {
    fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = if xs.len() > 1 {
            xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Self {
            mean,
            se: (var / n).sqrt(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapComparison {
    /// `E[D(s|x) - D(s_bar|x)]`
    pub gap_before: McEstimate,
    /// Same gap after `x' = x + x_neigh`.
    pub gap_after: McEstimate,
    /// Paired difference `gap_after - gap_before`.
    pub gap_increase: McEstimate,
}

const SHARD: usize = 16_384;

/// Draws, per sample, the intensity gaps of the node itself, a
/// same-group neighbor and an other-group neighbor, each measured for the
/// node's own sensitive value. Shards are seeded independently and merged
/// in order.
fn sample_gaps(cfg: &TheoryConfig, purpose: &str) -> Vec<[f64; 3]> {
    let normal = Normal::new(0.0, cfg.sigma).expect("sigma > 0");
    let mut out = Vec::with_capacity(cfg.n_samples);
    let mut shard = 0u64;
    while out.len() < cfg.n_samples {
        let mut r = rng::stream(cfg.seed, purpose, shard);
        let take = SHARD.min(cfg.n_samples - out.len());
        for _ in 0..take {
            let mut draw = |true_mean: f64, other_mean: f64| {
                (true_mean + normal.sample(&mut r)) - (other_mean + normal.sample(&mut r))
            };
            let own = draw(cfg.mu_c, cfg.mu_ic);
            let same = draw(cfg.mu_c, cfg.mu_ic);
            // an other-group neighbor's true value is the node's opposite value
            let diff = draw(cfg.mu_ic, cfg.mu_c);
            out.push([own, same, diff]);
        }
        shard += 1;
    }
    out
}

/// Monte-Carlo check that one round of mean message passing
/// (`x' = x + p_same x_same + p_diff x_diff`) widens the intensity gap.
pub fn theorem1_montecarlo(cfg: &TheoryConfig) -> Result<GapComparison> {
    cfg.validate()?;
    let samples = sample_gaps(cfg, "theory-mp");
    let before: Vec<f64> = samples.iter().map(|s| s[0]).collect();
    let after: Vec<f64> = samples
        .iter()
        .map(|s| s[0] + cfg.p_same * s[1] + cfg.p_diff * s[2])
        .collect();
    let increase: Vec<f64> = after.iter().zip(&before).map(|(a, b)| a - b).collect();
    Ok(GapComparison {
        gap_before: McEstimate::from_samples(&before),
        gap_after: McEstimate::from_samples(&after),
        gap_increase: McEstimate::from_samples(&increase),
    })
}

/// Monte-Carlo gap of the neutralized representation `x + delta * x_diff`.
pub fn eq6_check(cfg: &TheoryConfig, delta: f64) -> Result<McEstimate> {
    cfg.validate()?;
    if !delta.is_finite() {
        return Err(Error::InvalidArgument("delta must be finite".into()));
    }
    let samples = sample_gaps(cfg, "theory-neutral");
    let gaps: Vec<f64> = samples.iter().map(|s| s[0] + delta * s[2]).collect();
    Ok(McEstimate::from_samples(&gaps))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_cluster(n: usize, sep: f64) -> (DenseMatrix, Vec<u8>) {
        let s: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
        let x = DenseMatrix::from_fn(n, 1, |r, _| if s[r] == 1 { sep } else { -sep });
        (x, s)
    }

    #[test]
    fn separable_scores_high() {
        let (x, s) = two_cluster(200, 1.0);
        let m = fit_probe(&x, &s, 0).unwrap();
        assert!(probe_score(&m, &x, &s) > 0.95);
        assert!(conditional_entropy(&m, &x, &s) < 0.1);
    }

    #[test]
    fn constant_features_recover_prior() {
        let n = 1000;
        let s: Vec<u8> = (0..n).map(|i| u8::from(i % 10 < 7)).collect();
        let x = DenseMatrix::filled(n, 3, 2.5);
        let m = fit_probe(&x, &s, 1).unwrap();
        // predicted P(s=1) is the train prior p, so the score is p^2 + (1-p)^2
        let p = 0.7;
        let score = probe_score(&m, &x, &s);
        assert!(
            (score - (p * p + (1.0 - p) * (1.0 - p))).abs() < 0.01,
            "{score}"
        );
    }

    #[test]
    fn refit_is_deterministic() {
        let (x, s) = two_cluster(100, 0.3);
        let a = fit_probe(&x, &s, 9).unwrap();
        let b = fit_probe(&x, &s, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_group_errors() {
        assert!(fit_probe(&DenseMatrix::zeros(4, 1), &[1, 1, 1, 1], 0).is_err());
    }

    #[test]
    fn theory_config_errors() {
        let c = TheoryConfig {
            n_samples: 0,
            ..TheoryConfig::default()
        };
        assert!(theorem1_montecarlo(&c).is_err());
        let c = TheoryConfig {
            p_same: 0.7,
            p_diff: 0.7,
            ..TheoryConfig::default()
        };
        assert!(eq6_check(&c, 0.5).is_err());
    }

    #[test]
    fn eq6_endpoints() {
        let c = TheoryConfig::default();
        let at0 = eq6_check(&c, 0.0).unwrap();
        assert!((at0.mean - 1.0).abs() < 4.0 * at0.se);
        let at1 = eq6_check(&c, 1.0).unwrap();
        assert!(at1.mean.abs() < 4.0 * at1.se);
    }

    #[test]
    fn neighbor_mean_isolated_node_unchanged() {
        let g = Graph::new(
            DenseMatrix::from_rows(&[[1.0], [3.0], [5.0]]).unwrap(),
            vec![0, 1, 0],
            vec![None; 3],
            &[(0, 1, 1.0)],
        )
        .unwrap();
        let out = add_neighbor_mean(&g, g.features()).unwrap();
        assert_eq!(out.data(), &[4.0, 4.0, 5.0]);
    }
}
