//! Synthetic homophilous graphs with a controllable sensitive bias.
//!
//! Generation follows a two-step process:
//! 1. each node draws its sensitive value from a Bernoulli prior and its
//!    features from the Gaussian of its group,
//! 2. each node draws `Poisson(avg_degree / 2)` neighbors; every draw is a
//!    same-group node with probability `p_same` and an other-group node
//!    otherwise, uniformly within the chosen group. Edges are undirected,
//!    so the expected degree is close to `avg_degree`.
//!
//! Labels come from the leading `task_dims` feature columns, averaged with
//! the neighborhood the same way one round of message passing would, and
//! optionally shifted toward the sensitive value.

use std::collections::BTreeSet;

use rand::Rng as _;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Edge, Graph};
use crate::numerics::DenseMatrix;
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum LabelRule {
    /// `y = 1[score > 0]`.
    FeatureThreshold,
    /// `y = 1[score + rho * (2s - 1) > 0]` with `score` standardized, so
    /// labels lean toward the sensitive value.
    SensitiveCorrelated { rho: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_nodes: usize,
    pub feature_dim: usize,
    /// Probability that a node has `s = 1`.
    pub group_prior: f64,
    pub mu0: Vec<f64>,
    pub mu1: Vec<f64>,
    pub feature_sigma: f64,
    pub avg_degree: f64,
    pub p_same: f64,
    /// Leading feature columns that carry the label signal.
    pub task_dims: usize,
    pub label_rule: LabelRule,
    /// Standard deviation of Gaussian noise added to the label score.
    pub label_noise: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        let task = 4;
        let sens = 4;
        let mut mu0 = vec![0.0; task];
        let mut mu1 = vec![0.0; task];
        mu0.extend(std::iter::repeat_n(-0.5, sens));
        mu1.extend(std::iter::repeat_n(0.5, sens));
        Self {
            n_nodes: 2000,
            feature_dim: task + sens,
            group_prior: 0.5,
            mu0,
            mu1,
            feature_sigma: 1.0,
            avg_degree: 10.0,
            p_same: 0.8,
            task_dims: task,
            label_rule: LabelRule::SensitiveCorrelated { rho: 0.3 },
            label_noise: 1.5,
            seed: 0,
        }
    }
}

impl SynthConfig {
    /// Small instance for tests.
    pub fn small(n_nodes: usize, seed: u64) -> Self {
        Self {
            n_nodes,
            avg_degree: 4.0,
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.n_nodes < 2 {
            return bad("synthetic graph needs at least 2 nodes".into());
        }
        if self.mu0.len() != self.feature_dim || self.mu1.len() != self.feature_dim {
            return bad(format!(
                "mu0/mu1 must have feature_dim = {} entries",
                self.feature_dim
            ));
        }
        if !(self.group_prior > 0.0 && self.group_prior < 1.0) {
            return bad(format!(
                "group_prior {} must lie in (0, 1)",
                self.group_prior
            ));
        }
        if !(self.feature_sigma > 0.0) {
            return bad("feature_sigma must be > 0".into());
        }
        if !(self.avg_degree >= 1.0) {
            return bad("avg_degree must be >= 1".into());
        }
        if !(0.0..=1.0).contains(&self.p_same) {
            return bad(format!("p_same {} must lie in [0, 1]", self.p_same));
        }
        if self.task_dims > self.feature_dim {
            return bad("task_dims exceeds feature_dim".into());
        }
        if !(self.label_noise >= 0.0) {
            return bad("label_noise must be >= 0".into());
        }
        Ok(())
    }
}

const MAX_PRIOR_ATTEMPTS: u64 = 16;
const MAX_NEIGHBOR_RETRIES: usize = 16;

pub fn generate(cfg: &SynthConfig) -> Result<Graph> {
    cfg.validate()?;
    let n = cfg.n_nodes;

    let sensitive = (0..MAX_PRIOR_ATTEMPTS)
        .map(|attempt| {
            let mut r = rng::stream(cfg.seed, "synth-prior", attempt);
            (0..n)
                .map(|_| u8::from(r.random::<f64>() < cfg.group_prior))
                .collect::<Vec<u8>>()
        })
        .find(|s| s.contains(&0) && s.contains(&1))
        .ok_or_else(|| {
            Error::Degenerate("a sensitive group stayed empty after resampling".into())
        })?;

    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut r = rng::stream(cfg.seed, "synth-features", 0);
    let mut features = DenseMatrix::zeros(n, cfg.feature_dim);
    for i in 0..n {
        let mu = if sensitive[i] == 1 {
            &cfg.mu1
        } else {
            &cfg.mu0
        };
        for (f, v) in features.row_mut(i).iter_mut().enumerate() {
            *v = mu[f] + cfg.feature_sigma * normal.sample(&mut r);
        }
    }

    let groups: [Vec<usize>; 2] = [
        (0..n).filter(|&i| sensitive[i] == 0).collect(),
        (0..n).filter(|&i| sensitive[i] == 1).collect(),
    ];
    let poisson = Poisson::new(cfg.avg_degree / 2.0)
        .map_err(|e| Error::InvalidArgument(format!("degree distribution: {e}")))?;
    let mut r = rng::stream(cfg.seed, "synth-edges", 0);
    let mut edge_set: BTreeSet<(usize, usize)> = BTreeSet::new();
    for i in 0..n {
        let draws = poisson.sample(&mut r) as usize;
        for _ in 0..draws {
            let same = r.random::<f64>() < cfg.p_same;
            let pool = &groups[if same { sensitive[i] } else { 1 - sensitive[i] } as usize];
            for _ in 0..MAX_NEIGHBOR_RETRIES {
                let j = pool[r.random_range(0..pool.len())];
                if j != i && edge_set.insert((i.min(j), i.max(j))) {
                    break;
                }
            }
        }
    }
    let edges: Vec<Edge> = edge_set.into_iter().map(|(u, v)| (u, v, 1.0)).collect();
    let unlabeled = Graph::new(features.clone(), sensitive.clone(), vec![None; n], &edges)?;

    let labels = make_labels(
        cfg,
        &unlabeled,
        &mut rng::stream(cfg.seed, "synth-labels", 0),
    );
    Graph::new(
        features,
        sensitive,
        labels.into_iter().map(Some).collect(),
        &edges,
    )
}

fn make_labels(cfg: &SynthConfig, g: &Graph, r: &mut rng::Rng) -> Vec<u8> {
    let n = g.n_nodes();
    let x = g.features();
    let scale = 1.0 / (cfg.feature_sigma * (cfg.task_dims.max(1) as f64).sqrt());
    let own: Vec<f64> = (0..n)
        .map(|i| {
            (0..cfg.task_dims)
                .map(|f| x.get(i, f) - 0.5 * (cfg.mu0[f] + cfg.mu1[f]))
                .sum::<f64>()
                * scale
        })
        .collect();
    let mut score: Vec<f64> = (0..n)
        .map(|i| {
            let nbrs = g.neighbors(i).0;
            if nbrs.is_empty() {
                own[i]
            } else {
                own[i] + nbrs.iter().map(|&j| own[j]).sum::<f64>() / nbrs.len() as f64
            }
        })
        .collect();
    let mean = score.iter().sum::<f64>() / n as f64;
    let sd = (score.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
    let sd = if sd > 0.0 { sd } else { 1.0 };
    for v in &mut score {
        *v = (*v - mean) / sd;
    }
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let s = g.sensitive();
    (0..n)
        .map(|i| {
            let shift = match cfg.label_rule {
                LabelRule::FeatureThreshold => 0.0,
                LabelRule::SensitiveCorrelated { rho } => rho * (2.0 * f64::from(s[i]) - 1.0),
            };
            let noise = if cfg.label_noise > 0.0 {
                cfg.label_noise * normal.sample(r)
            } else {
                0.0
            };
            u8::from(score[i] + shift + noise > 0.0)
        })
        .collect()
}

/// One graph per `p_same`, all sharing `base.seed`.
pub fn bias_sweep(base: &SynthConfig, p_same_values: &[f64]) -> Result<Vec<Graph>> {
    p_same_values
        .iter()
        .map(|&p| {
            generate(&SynthConfig {
                p_same: p,
                ..base.clone()
            })
        })
        .collect()
}

/// Fraction of undirected edges joining nodes of the same sensitive group.
pub fn homogeneous_edge_fraction(g: &Graph) -> f64 {
    let edges = g.undirected_edges();
    if edges.is_empty() {
        return 0.0;
    }
    let s = g.sensitive();
    edges.iter().filter(|&&(u, v, _)| s[u] == s[v]).count() as f64 / edges.len() as f64
}
