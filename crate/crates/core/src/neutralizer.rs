//! Heterogeneous-neighbor features and the neutralization variants.
//!
//! For node `i` with neighbors of the other sensitive group `N_i^diff`, the
//! target `h_i^diff` is the unweighted mean of their rows. An MLP learns to
//! predict it from `h_i` alone, which lets nodes without such neighbors
//! borrow the mapping, and the layer input becomes `h_i + delta * MLP(h_i)`.
//!
//! - [`Variant::G`]: multiply the weight of every cross-group edge by `1 + delta`.
//! - [`Variant::F`]: neutralize raw features once, before training.
//! - [`Variant::Full`]: neutralize every layer input during training.

use std::fmt;
use std::rc::Rc;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::encoders::LayerHook;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::mlp::Mlp;
use crate::numerics::{AdamConfig, DenseMatrix, ParamStore, Tape, Var};
use crate::rng::{self, Rng};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Plain encoder.
    None,
    /// Edge reweighting before training.
    G,
    /// Feature neutralization before training.
    F,
    /// Per-layer neutralization plus discriminator, trained jointly.
    Full,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::None => "none",
            Variant::G => "g",
            Variant::F => "f",
            Variant::Full => "full",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" | "vanilla" => Ok(Variant::None),
            "g" => Ok(Variant::G),
            "f" => Ok(Variant::F),
            "full" => Ok(Variant::Full),
            other => Err(Error::InvalidArgument(format!("unknown variant {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NeutralizeConfig {
    pub delta: f64,
    /// Overrides `delta` per encoder layer when present.
    pub per_layer_delta: Option<Vec<f64>>,
    pub variant: Variant,
}

impl Default for NeutralizeConfig {
    fn default() -> Self {
        Self {
            delta: 1.0,
            per_layer_delta: None,
            variant: Variant::Full,
        }
    }
}

impl NeutralizeConfig {
    pub fn vanilla() -> Self {
        Self {
            delta: 0.0,
            per_layer_delta: None,
            variant: Variant::None,
        }
    }

    pub fn validate(&self, n_layers: usize) -> Result<()> {
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "delta {} must be >= 0",
                self.delta
            )));
        }
        if let Some(d) = &self.per_layer_delta {
            if d.len() != n_layers {
                return Err(Error::InvalidArgument(format!(
                    "per_layer_delta has {} entries for {n_layers} layers",
                    d.len()
                )));
            }
            if d.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
                return Err(Error::InvalidArgument(
                    "per-layer deltas must be >= 0".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn delta_for(&self, layer: usize) -> f64 {
        self.per_layer_delta
            .as_ref()
            .map_or(self.delta, |d| d[layer])
    }

    pub fn deltas(&self, n_layers: usize) -> Vec<f64> {
        (0..n_layers).map(|k| self.delta_for(k)).collect()
    }
}

/// Mean features of each node's heterogeneous neighbors.
#[derive(Clone, Debug, PartialEq)]
pub struct HeteroTarget {
    pub targets: DenseMatrix,
    /// False where the node has no heterogeneous neighbor; such rows are
    /// zero and excluded from every loss.
    pub has_target: Vec<bool>,
}

impl HeteroTarget {
    pub fn eligible(&self) -> Vec<usize> {
        (0..self.has_target.len())
            .filter(|&i| self.has_target[i])
            .collect()
    }
}

pub fn hetero_mean(g: &Graph, h: &DenseMatrix) -> Result<HeteroTarget> {
    if h.rows() != g.n_nodes() {
        return Err(Error::shape("hetero_mean", g.n_nodes(), h.rows()));
    }
    let s = g.sensitive();
    let mut targets = DenseMatrix::zeros(h.rows(), h.cols());
    let mut has_target = vec![false; h.rows()];
    for i in 0..g.n_nodes() {
        let mut count = 0usize;
        let (nbrs, _) = g.neighbors(i);
        for &j in nbrs {
            if s[j] != s[i] {
                count += 1;
                for (t, v) in targets.row_mut(i).iter_mut().zip(h.row(j)) {
                    *t += v;
                }
            }
        }
        if count > 0 {
            has_target[i] = true;
            let inv = 1.0 / count as f64;
            for t in targets.row_mut(i) {
                *t *= inv;
            }
        }
    }
    Ok(HeteroTarget {
        targets,
        has_target,
    })
}

/// Cross-group edges get weight `1 + delta`, same-group edges weight 1.
pub fn reweight_edges(g: &Graph, delta: f64) -> Result<Graph> {
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "delta {delta} must be >= 0"
        )));
    }
    if delta == 0.0 {
        return Ok(g.clone());
    }
    let s = g.sensitive();
    let mut weights = Vec::with_capacity(g.n_directed_edges());
    for i in 0..g.n_nodes() {
        for &j in g.neighbors(i).0 {
            weights.push(if s[i] != s[j] { 1.0 + delta } else { 1.0 });
        }
    }
    g.with_weights(weights)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimatorConfig {
    pub epochs: usize,
    pub lr: f64,
    pub weight_decay: f64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            lr: 0.01,
            weight_decay: 0.0,
        }
    }
}

/// One three-layer MLP per encoder layer, mapping `H^k` to an estimate of
/// `H^k`'s heterogeneous-neighbor mean. Hidden widths equal the input width.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimator {
    store: ParamStore,
    mlps: Vec<Mlp>,
}

impl Estimator {
    /// `widths[k]` is the width of `H^k`.
    pub fn new(widths: &[usize], rng: &mut Rng) -> Self {
        let mut store = ParamStore::new();
        let mlps = widths
            .iter()
            .enumerate()
            .map(|(k, &d)| Mlp::new(&mut store, &format!("estimator.{k}"), &[d, d, d, d], rng))
            .collect();
        Self { store, mlps }
    }

    pub fn n_layers(&self) -> usize {
        self.mlps.len()
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn mlp(&self, k: usize) -> &Mlp {
        &self.mlps[k]
    }

    /// `MLP^k(h)` without recording.
    pub fn estimate(&self, k: usize, h: &DenseMatrix) -> Result<DenseMatrix> {
        self.mlps[k].apply(&self.store, h)
    }

    pub fn forward(&self, tape: &mut Tape, vars: &[Var], k: usize, h: Var) -> Result<Var> {
        self.mlps[k].forward(tape, vars, h)
    }

    /// Mean squared distance between `MLP^k(h_i)` and the target over
    /// eligible nodes. Errors when no node is eligible.
    pub fn loss(
        &self,
        tape: &mut Tape,
        vars: &[Var],
        k: usize,
        h: Var,
        target: &HeteroTarget,
    ) -> Result<Var> {
        let rows = target.eligible();
        if rows.is_empty() {
            return Err(Error::Degenerate(
                "no node has a heterogeneous neighbor".into(),
            ));
        }
        let pred = self.forward(tape, vars, k, h)?;
        tape.mse_rows(pred, Rc::new(target.targets.clone()), &rows)
    }
}

/// Fits layer `k` of `est` to the heterogeneous means of `h` on `g`.
/// Returns the loss before each step.
pub fn fit_estimator(
    g: &Graph,
    h: &DenseMatrix,
    est: &mut Estimator,
    k: usize,
    cfg: &EstimatorConfig,
) -> Result<Vec<f64>> {
    let target = hetero_mean(g, h)?;
    if target.eligible().is_empty() {
        return Err(Error::Degenerate(
            "cannot fit the estimator: no node has a heterogeneous neighbor".into(),
        ));
    }
    let adam = AdamConfig::new(cfg.lr, cfg.weight_decay);
    let mut losses = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        let mut tape = Tape::new();
        let vars = est.store.bind(&mut tape, true);
        let x = tape.constant(h.clone());
        let loss = est.loss(&mut tape, &vars, k, x, &target)?;
        losses.push(tape.scalar(loss));
        let grads = tape.backward(loss)?;
        est.store.set_grads(&vars, &grads);
        est.store.adam_step(&adam)?;
    }
    Ok(losses)
}

/// `h + delta * estimate`, leaving `h` untouched.
pub fn neutralize(h: &DenseMatrix, estimate: &DenseMatrix, delta: f64) -> Result<DenseMatrix> {
    if delta == 0.0 {
        if h.shape() != estimate.shape() {
            return Err(Error::shape(
                "neutralize",
                format!("{:?}", h.shape()),
                format!("{:?}", estimate.shape()),
            ));
        }
        return Ok(h.clone());
    }
    let mut out = h.clone();
    out.axpy(delta, estimate)?;
    Ok(out)
}

/// Result of feature-level preprocessing.
#[derive(Clone, Debug)]
pub struct Neutralized {
    pub graph: Graph,
    pub estimator: Estimator,
    pub fit_losses: Vec<f64>,
}

/// Fits a layer-0 estimator on raw features and replaces them by
/// `x + delta * MLP(x)`. Topology and weights are untouched.
pub fn preprocess_fairsin_f(
    g: &Graph,
    delta: f64,
    cfg: &EstimatorConfig,
    seed: u64,
) -> Result<Neutralized> {
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "delta {delta} must be >= 0"
        )));
    }
    let [zeros, ones] = g.group_sizes();
    if zeros == 0 || ones == 0 {
        return Err(Error::Degenerate(
            "feature neutralization needs both sensitive groups".into(),
        ));
    }
    let mut estimator = Estimator::new(&[g.n_features()], &mut rng::stream(seed, "estimator-f", 0));
    let fit_losses = fit_estimator(g, g.features(), &mut estimator, 0, cfg)?;
    let est = estimator.estimate(0, g.features())?;
    let graph = g.with_features(neutralize(g.features(), &est, delta)?)?;
    Ok(Neutralized {
        graph,
        estimator,
        fit_losses,
    })
}

/// Layer hook computing `H~^k = H^k + delta^k MLP^k(H^k)` on the tape. It
/// keeps the handles of `H^k` and `MLP^k(H^k)` for the estimator losses.
pub struct NeutralizeHook<'a> {
    estimator: &'a Estimator,
    vars: &'a [Var],
    deltas: Vec<f64>,
    pub inputs: Vec<Var>,
    pub estimates: Vec<Var>,
}

impl<'a> NeutralizeHook<'a> {
    pub fn new(estimator: &'a Estimator, vars: &'a [Var], deltas: Vec<f64>) -> Self {
        Self {
            estimator,
            vars,
            deltas,
            inputs: Vec::new(),
            estimates: Vec::new(),
        }
    }
}

impl LayerHook for NeutralizeHook<'_> {
    fn apply(&mut self, tape: &mut Tape, layer: usize, h: Var) -> Result<Var> {
        let est = self.estimator.forward(tape, self.vars, layer, h)?;
        self.inputs.push(h);
        self.estimates.push(est);
        let delta = self.deltas[layer];
        if delta == 0.0 {
            return Ok(h);
        }
        let scaled = tape.scale(est, delta)?;
        tape.add(h, scaled)
    }
}
