//! GCN, GIN and GraphSAGE encoders with a linear classification head.
//!
//! Each layer first passes its input through a [`LayerHook`], which may
//! replace `H^k` by a transformed matrix of the same shape before message
//! passing. The identity hook gives the plain encoder.

use std::fmt;
use std::rc::Rc;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::mlp::{Linear, Mlp};
use crate::numerics::{ParamStore, SparseMatrix, Tape, Var};
use crate::rng::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncoderKind {
    Gcn,
    Gin,
    Sage,
}

impl EncoderKind {
    pub const ALL: [EncoderKind; 3] = [EncoderKind::Gcn, EncoderKind::Gin, EncoderKind::Sage];
}

impl fmt::Display for EncoderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EncoderKind::Gcn => "gcn",
            EncoderKind::Gin => "gin",
            EncoderKind::Sage => "sage",
        })
    }
}

impl FromStr for EncoderKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gcn" => Ok(EncoderKind::Gcn),
            "gin" => Ok(EncoderKind::Gin),
            "sage" | "graphsage" => Ok(EncoderKind::Sage),
            other => Err(Error::InvalidArgument(format!("unknown encoder {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EncoderConfig {
    pub kind: EncoderKind,
    pub n_layers: usize,
    pub hidden_dim: usize,
    pub dropout_p: f64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            kind: EncoderKind::Gcn,
            n_layers: 2,
            hidden_dim: 16,
            dropout_p: 0.2,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_layers == 0 || self.hidden_dim == 0 {
            return Err(Error::InvalidArgument(
                "encoder needs n_layers >= 1 and hidden_dim >= 1".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(Error::InvalidArgument(format!(
                "dropout {} outside [0, 1)",
                self.dropout_p
            )));
        }
        Ok(())
    }
}

/// `D^-1/2 (W + I) D^-1/2` where `D` is the row sum of `W + I`.
pub fn normalize_adjacency(g: &Graph) -> SparseMatrix {
    let n = g.n_nodes();
    let deg: Vec<f64> = (0..n)
        .map(|i| 1.0 + g.neighbors(i).1.iter().sum::<f64>())
        .collect();
    with_self_loops(g, |i, j, w| w / (deg[i] * deg[j]).sqrt())
}

/// `W + I`: sum aggregation with the node itself at weight one.
pub fn sum_aggregator(g: &Graph) -> SparseMatrix {
    with_self_loops(g, |_, _, w| w)
}

/// Weighted neighbor mean `D_w^-1 W`. Isolated nodes aggregate to zero.
pub fn mean_aggregator(g: &Graph) -> SparseMatrix {
    let n = g.n_nodes();
    let mut values = Vec::with_capacity(g.n_directed_edges());
    for i in 0..n {
        let ws = g.neighbors(i).1;
        let total: f64 = ws.iter().sum();
        values.extend(ws.iter().map(|w| w / total));
    }
    SparseMatrix::new(n, n, g.offsets().to_vec(), g.targets().to_vec(), values)
        .expect("graph CSR is valid")
}

/// CSR of `W + I` with each entry mapped by `f(i, j, w)`, columns ascending.
fn with_self_loops(g: &Graph, f: impl Fn(usize, usize, f64) -> f64) -> SparseMatrix {
    let n = g.n_nodes();
    let mut offsets = Vec::with_capacity(n + 1);
    let mut indices = Vec::with_capacity(g.n_directed_edges() + n);
    let mut values = Vec::with_capacity(g.n_directed_edges() + n);
    offsets.push(0);
    for i in 0..n {
        let (nbrs, ws) = g.neighbors(i);
        let mut placed = false;
        for (&j, &w) in nbrs.iter().zip(ws) {
            if !placed && j > i {
                indices.push(i);
                values.push(f(i, i, 1.0));
                placed = true;
            }
            indices.push(j);
            values.push(f(i, j, w));
        }
        if !placed {
            indices.push(i);
            values.push(f(i, i, 1.0));
        }
        offsets.push(indices.len());
    }
    SparseMatrix::new(n, n, offsets, indices, values).expect("valid CSR")
}

/// Graph operator used by an encoder kind, precomputed once per graph.
#[derive(Clone, Debug)]
pub struct Propagation {
    kind: EncoderKind,
    op: Rc<SparseMatrix>,
}

impl Propagation {
    pub fn new(g: &Graph, kind: EncoderKind) -> Self {
        let op = match kind {
            EncoderKind::Gcn => normalize_adjacency(g),
            EncoderKind::Gin => sum_aggregator(g),
            EncoderKind::Sage => mean_aggregator(g),
        };
        Self {
            kind,
            op: Rc::new(op),
        }
    }

    pub fn kind(&self) -> EncoderKind {
        self.kind
    }

    pub fn operator(&self) -> &SparseMatrix {
        &self.op
    }
}

/// Supplies the layer input `H~^k` from `H^k`.
pub trait LayerHook {
    fn apply(&mut self, tape: &mut Tape, layer: usize, h: Var) -> Result<Var>;
}

pub struct IdentityHook;

impl LayerHook for IdentityHook {
    fn apply(&mut self, _tape: &mut Tape, _layer: usize, h: Var) -> Result<Var> {
        Ok(h)
    }
}

/// Dropout is only applied in training mode.
pub enum Mode<'a> {
    Eval,
    Train(&'a mut Rng),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
enum Layer {
    Gcn(Linear),
    /// Two-layer MLP over `(1 + eps) h_i + sum_j w_ij h_j` with `eps = 0`.
    Gin(Mlp),
    /// Linear map of `[h_i | mean_j h_j]`.
    Sage(Linear),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Encoder {
    cfg: EncoderConfig,
    in_dim: usize,
    layers: Vec<Layer>,
    head: Linear,
}

impl Encoder {
    /// Registers encoder and head parameters in `store`.
    pub fn new(
        cfg: &EncoderConfig,
        in_dim: usize,
        store: &mut ParamStore,
        rng: &mut Rng,
    ) -> Result<Self> {
        cfg.validate()?;
        let hd = cfg.hidden_dim;
        let layers = (0..cfg.n_layers)
            .map(|k| {
                let d_in = if k == 0 { in_dim } else { hd };
                let name = format!("encoder.{k}");
                match cfg.kind {
                    EncoderKind::Gcn => Layer::Gcn(Linear::new(store, &name, d_in, hd, rng)),
                    EncoderKind::Gin => Layer::Gin(Mlp::new(store, &name, &[d_in, hd, hd], rng)),
                    EncoderKind::Sage => Layer::Sage(Linear::new(store, &name, 2 * d_in, hd, rng)),
                }
            })
            .collect();
        let head = Linear::new(store, "head", hd, 2, rng);
        Ok(Self {
            cfg: cfg.clone(),
            in_dim,
            layers,
            head,
        })
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.cfg
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    /// Width of `H^k` (input of layer `k`).
    pub fn layer_width(&self, k: usize) -> usize {
        if k == 0 {
            self.in_dim
        } else {
            self.cfg.hidden_dim
        }
    }

    pub fn out_dim(&self) -> usize {
        self.cfg.hidden_dim
    }

    /// Runs all layers and returns `H^K`.
    pub fn encode(
        &self,
        tape: &mut Tape,
        vars: &[Var],
        prop: &Propagation,
        x: Var,
        hook: &mut dyn LayerHook,
        mut mode: Mode<'_>,
    ) -> Result<Var> {
        if prop.kind != self.cfg.kind {
            return Err(Error::InvalidArgument(format!(
                "propagation built for {} used with a {} encoder",
                prop.kind, self.cfg.kind
            )));
        }
        let mut h = x;
        for (k, layer) in self.layers.iter().enumerate() {
            let shape = tape.value(h).shape();
            if shape.1 != self.layer_width(k) {
                return Err(Error::shape(
                    "encode layer input",
                    self.layer_width(k),
                    shape.1,
                ));
            }
            let mut ht = hook.apply(tape, k, h)?;
            if tape.value(ht).shape() != shape {
                return Err(Error::shape(
                    "layer hook output",
                    format!("{shape:?}"),
                    format!("{:?}", tape.value(ht).shape()),
                ));
            }
            if k > 0 {
                if let Mode::Train(rng) = &mut mode {
                    ht = tape.dropout(ht, self.cfg.dropout_p, *rng)?;
                }
            }
            h = self.layer_forward(tape, vars, prop, layer, ht)?;
        }
        Ok(h)
    }

    fn layer_forward(
        &self,
        tape: &mut Tape,
        vars: &[Var],
        prop: &Propagation,
        layer: &Layer,
        h: Var,
    ) -> Result<Var> {
        let pre = match layer {
            Layer::Gcn(lin) => {
                let hw = tape.matmul(h, vars[lin.weight().index()])?;
                let agg = tape.spmm(prop.op.clone(), hw)?;
                tape.add_row(agg, vars[lin.bias().index()])?
            }
            Layer::Gin(mlp) => {
                let agg = tape.spmm(prop.op.clone(), h)?;
                mlp.forward(tape, vars, agg)?
            }
            Layer::Sage(lin) => {
                let agg = tape.spmm(prop.op.clone(), h)?;
                let cat = tape.concat(h, agg)?;
                lin.forward(tape, vars, cat)?
            }
        };
        tape.relu(pre)
    }

    /// Logits `n x 2` from `H^K`.
    pub fn classify(&self, tape: &mut Tape, vars: &[Var], h: Var) -> Result<Var> {
        self.head.forward(tape, vars, h)
    }

    pub fn head(&self) -> &Linear {
        &self.head
    }
}
