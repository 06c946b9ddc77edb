//! Training for the vanilla encoder, the two data-centric variants and the
//! full model.
//!
//! The full model alternates, once per epoch and in this order:
//! 1. estimators `phi^k`: minimize `sum_k L_F^k - adv * L_D`
//! 2. encoder and head: minimize `L_T - adv * L_D`
//! 3. discriminator `psi`: minimize `L_D`
//!
//! Each step is one Adam update on a fresh full-batch forward pass. Step 3
//! reuses the evaluation-mode forward that also scores validation accuracy,
//! so it sees `H^K` as produced by the freshly updated encoder.
//!
//! Randomness is split into purpose-keyed streams (initialization of each
//! component, dropout per epoch and step). Disabling both neutralization
//! and the discriminator therefore reproduces a vanilla run bit for bit.

use std::path::Path;
use std::rc::Rc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::encoders::{Encoder, EncoderConfig, IdentityHook, Mode, Propagation};
use crate::error::{Error, Result};
use crate::graph::{Graph, Split};
use crate::metrics::{accuracy, Predictions, SeedMetrics};
use crate::mlp::Mlp;
use crate::neutralizer::{
    fit_estimator, hetero_mean, preprocess_fairsin_f, reweight_edges, Estimator, EstimatorConfig,
    NeutralizeConfig, NeutralizeHook, Variant,
};
use crate::numerics::{AdamConfig, DenseMatrix, ParamStore, Tape, Var};
use crate::rng::{self, Rng};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr_encoder: f64,
    pub lr_estimator: f64,
    pub lr_discriminator: f64,
    pub weight_decay: f64,
    /// Coefficient on `L_D` in the estimator and encoder objectives.
    pub adv_weight: f64,
    pub encoder: EncoderConfig,
    pub neutralize: NeutralizeConfig,
    pub no_neutral: bool,
    pub no_discri: bool,
    /// Estimator fitting epochs for the feature-level variant.
    pub estimator_epochs: usize,
    /// Per-layer estimator pre-fitting epochs before alternating training.
    pub estimator_warmup: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            lr_encoder: 0.01,
            lr_estimator: 0.01,
            lr_discriminator: 0.01,
            weight_decay: 1e-4,
            adv_weight: 1.0,
            encoder: EncoderConfig::default(),
            neutralize: NeutralizeConfig::default(),
            no_neutral: false,
            no_discri: false,
            estimator_epochs: 200,
            estimator_warmup: 0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidArgument("epochs must be >= 1".into()));
        }
        for (name, lr) in [
            ("lr_encoder", self.lr_encoder),
            ("lr_estimator", self.lr_estimator),
            ("lr_discriminator", self.lr_discriminator),
        ] {
            if !(lr > 0.0 && lr.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be > 0")));
            }
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::InvalidArgument("weight_decay must be >= 0".into()));
        }
        if !(self.adv_weight >= 0.0 && self.adv_weight.is_finite()) {
            return Err(Error::InvalidArgument("adv_weight must be >= 0".into()));
        }
        self.encoder.validate()?;
        self.neutralize.validate(self.encoder.n_layers)
    }

    fn uses_estimator(&self) -> bool {
        self.neutralize.variant == Variant::Full && !self.no_neutral
    }

    fn uses_discriminator(&self) -> bool {
        self.neutralize.variant == Variant::Full && !self.no_discri
    }
}

/// Hex SHA-256 of the JSON serialization of `value`.
pub fn config_hash<T: Serialize>(value: &T) -> Result<String> {
    let bytes = serde_json::to_vec(value)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Adversary mapping `H^K` to one sensitive-attribute logit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Discriminator {
    store: ParamStore,
    mlp: Mlp,
}

impl Discriminator {
    /// Two layers, `width -> width -> 1`.
    pub fn new(width: usize, rng: &mut Rng) -> Self {
        let mut store = ParamStore::new();
        let mlp = Mlp::new(&mut store, "discriminator", &[width, width, 1], rng);
        Self { store, mlp }
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn in_dim(&self) -> usize {
        self.mlp.in_dim()
    }

    pub fn forward(&self, tape: &mut Tape, vars: &[Var], h: Var) -> Result<Var> {
        self.mlp.forward(tape, vars, h)
    }

    /// Mean BCE of the logits against `targets` over `rows`.
    pub fn loss(
        &self,
        tape: &mut Tape,
        vars: &[Var],
        h: Var,
        targets: &[f64],
        rows: &[usize],
    ) -> Result<Var> {
        let logits = self.forward(tape, vars, h)?;
        tape.bce_with_logits(logits, targets, rows)
    }

    pub fn apply(&self, h: &DenseMatrix) -> Result<DenseMatrix> {
        self.mlp.apply(&self.store, h)
    }
}

/// Graph transformation applied before the encoder sees the data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Preprocess {
    None,
    Reweight { delta: f64 },
    Features { delta: f64, estimator: Estimator },
}

impl Preprocess {
    pub fn apply(&self, g: &Graph) -> Result<Graph> {
        match self {
            Preprocess::None => Ok(g.clone()),
            Preprocess::Reweight { delta } => reweight_edges(g, *delta),
            Preprocess::Features { delta, estimator } => {
                let est = estimator.estimate(0, g.features())?;
                g.with_features(crate::neutralizer::neutralize(g.features(), &est, *delta)?)
            }
        }
    }
}

/// Every parameter needed for inference.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub preprocess: Preprocess,
    pub encoder: Encoder,
    pub params: ParamStore,
    pub estimator: Option<Estimator>,
    pub deltas: Vec<f64>,
    pub discriminator: Option<Discriminator>,
}

/// Output of an evaluation-mode forward pass.
#[derive(Clone, Debug)]
pub struct Forward {
    /// `H^K`
    pub hidden: DenseMatrix,
    pub logits: DenseMatrix,
}

impl Model {
    /// Forward pass on an already preprocessed graph, no dropout.
    pub fn forward(&self, g: &Graph, prop: &Propagation) -> Result<Forward> {
        let mut tape = Tape::new();
        let vars = self.params.bind(&mut tape, false);
        let x = tape.constant(g.features().clone());
        let h = match &self.estimator {
            Some(est) => {
                let est_vars = est.store().bind(&mut tape, false);
                let mut hook = NeutralizeHook::new(est, &est_vars, self.deltas.clone());
                self.encoder
                    .encode(&mut tape, &vars, prop, x, &mut hook, Mode::Eval)?
            }
            None => {
                self.encoder
                    .encode(&mut tape, &vars, prop, x, &mut IdentityHook, Mode::Eval)?
            }
        };
        let logits = self.encoder.classify(&mut tape, &vars, h)?;
        Ok(Forward {
            hidden: tape.value(h).clone(),
            logits: tape.value(logits).clone(),
        })
    }

    /// Copy without transient gradients, as it would be reloaded from disk.
    pub fn snapshot(&self) -> Model {
        let mut m = self.clone();
        m.params.zero_grads();
        if let Some(est) = &mut m.estimator {
            est.store_mut().zero_grads();
        }
        if let Some(d) = &mut m.discriminator {
            d.store_mut().zero_grads();
        }
        m
    }

    /// Predicted class per node of the raw graph `g`.
    pub fn predict_labels(&self, g: &Graph) -> Result<Vec<u8>> {
        let g = self.preprocess.apply(g)?;
        let prop = Propagation::new(&g, self.encoder.config().kind);
        Ok(argmax_labels(&self.forward(&g, &prop)?.logits))
    }
}

fn argmax_labels(logits: &DenseMatrix) -> Vec<u8> {
    logits.argmax_rows().into_iter().map(|c| c as u8).collect()
}

/// Predictions of `model` on `eval_idx` of the raw graph `g`.
pub fn predict(g: &Graph, model: &Model, eval_idx: &[usize]) -> Result<Predictions> {
    Predictions::new(
        model.predict_labels(g)?,
        g.labels().to_vec(),
        g.sensitive().to_vec(),
        eval_idx.to_vec(),
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Step {
    Estimator,
    Encoder,
    Discriminator,
}

/// Losses and bookkeeping of one epoch. Absent terms are `None`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochReport {
    pub epoch: usize,
    /// Task loss in the encoder step.
    pub l_t: f64,
    /// Per-layer estimator losses in the estimator step.
    pub l_f: Option<Vec<f64>>,
    /// Discriminator loss before its update.
    pub l_d: Option<f64>,
    /// Discriminator loss after its update, on the same `H^K`.
    pub l_d_after: Option<f64>,
    pub val_acc: f64,
    pub steps: Vec<Step>,
    pub seconds: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    /// Estimators trainable.
    Estimator,
    /// Encoder and head trainable.
    Encoder,
}

/// A recorded forward pass, optionally extended with the loss terms of one
/// phase.
pub struct Objective {
    pub tape: Tape,
    pub encoder_vars: Vec<Var>,
    pub estimator_vars: Vec<Var>,
    pub discriminator_vars: Vec<Var>,
    /// `H^k` per layer, before neutralization (empty without estimator).
    pub layer_inputs: Vec<Var>,
    /// `MLP^k(H^k)` per layer.
    pub estimates: Vec<Var>,
    pub hidden: Var,
    pub logits: Var,
    pub l_t: Option<Var>,
    pub l_f: Vec<Var>,
    pub l_d: Option<Var>,
    /// Weighted total minimized in this phase.
    pub total: Option<Var>,
}

/// Owns the model and optimizer state of one run.
pub struct Trainer {
    cfg: TrainConfig,
    graph: Graph,
    prop: Propagation,
    split: Split,
    labels: Vec<usize>,
    /// Sensitive targets of the training nodes, in `split.train` order.
    train_sensitive: Vec<f64>,
    train_local: Vec<usize>,
    hetero_rows: Vec<usize>,
    model: Model,
    epoch: usize,
    /// Evaluation forward of the current parameters, recorded with the
    /// estimators trainable so the next estimator step can reuse it.
    pending: Option<Objective>,
}

fn check_finite(value: f64, epoch: usize, term: &str) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite {
            epoch,
            term: term.to_string(),
        })
    }
}

fn check_split(g: &Graph, split: &Split) -> Result<()> {
    split.validate(g)?;
    let has = |idx: &[usize], f: &dyn Fn(usize) -> bool| idx.iter().any(|&i| f(i));
    let s = g.sensitive();
    let y = g.labels();
    for v in 0..2u8 {
        if !has(&split.train, &|i| y[i] == v) {
            return Err(Error::Degenerate(format!(
                "no training node with label {v}"
            )));
        }
        if !has(&split.train, &|i| s[i] == v) {
            return Err(Error::Degenerate(format!(
                "no training node with sensitive value {v}"
            )));
        }
        if !has(&split.test, &|i| s[i] == v && y[i] == 1) {
            return Err(Error::Degenerate(format!(
                "no positive test node with sensitive value {v}"
            )));
        }
    }
    if split.val.is_empty() {
        return Err(Error::Degenerate("empty validation set".into()));
    }
    Ok(())
}

impl Trainer {
    /// Applies the configured preprocessing and initializes all parameters.
    pub fn new(g: &Graph, split: &Split, cfg: &TrainConfig) -> Result<Self> {
        cfg.validate()?;
        check_split(g, split)?;
        let seed = cfg.seed;
        let delta = cfg.neutralize.delta;
        let preprocess = match cfg.neutralize.variant {
            Variant::G => Preprocess::Reweight { delta },
            Variant::F => {
                let est_cfg = EstimatorConfig {
                    epochs: cfg.estimator_epochs,
                    lr: cfg.lr_estimator,
                    weight_decay: cfg.weight_decay,
                };
                let n = preprocess_fairsin_f(g, delta, &est_cfg, seed)?;
                Preprocess::Features {
                    delta,
                    estimator: n.estimator,
                }
            }
            Variant::None | Variant::Full => Preprocess::None,
        };
        let graph = preprocess.apply(g)?;
        let prop = Propagation::new(&graph, cfg.encoder.kind);

        let mut params = ParamStore::new();
        let encoder = Encoder::new(
            &cfg.encoder,
            graph.n_features(),
            &mut params,
            &mut rng::stream(seed, "encoder-init", 0),
        )?;
        let widths: Vec<usize> = (0..cfg.encoder.n_layers)
            .map(|k| encoder.layer_width(k))
            .collect();
        let estimator = cfg
            .uses_estimator()
            .then(|| Estimator::new(&widths, &mut rng::stream(seed, "estimator-init", 0)));
        let discriminator = cfg.uses_discriminator().then(|| {
            Discriminator::new(
                encoder.out_dim(),
                &mut rng::stream(seed, "discriminator-init", 0),
            )
        });
        let hetero_rows = hetero_mean(&graph, graph.features())?.eligible();
        if estimator.is_some() && hetero_rows.is_empty() {
            return Err(Error::Degenerate(
                "no node has a heterogeneous neighbor".into(),
            ));
        }
        let model = Model {
            preprocess,
            encoder,
            params,
            estimator,
            deltas: cfg.neutralize.deltas(cfg.encoder.n_layers),
            discriminator,
        };
        let sensitive: Vec<f64> = graph.sensitive().iter().map(|&s| f64::from(s)).collect();
        let mut trainer = Self {
            cfg: cfg.clone(),
            labels: graph.labels().iter().map(|&y| usize::from(y)).collect(),
            train_sensitive: split.train.iter().map(|&i| sensitive[i]).collect(),
            train_local: (0..split.train.len()).collect(),
            graph,
            prop,
            split: split.clone(),
            hetero_rows,
            model,
            epoch: 0,
            pending: None,
        };
        trainer.warm_up_estimator()?;
        Ok(trainer)
    }

    fn warm_up_estimator(&mut self) -> Result<()> {
        if self.cfg.estimator_warmup == 0 || self.model.estimator.is_none() {
            return Ok(());
        }
        let est_cfg = EstimatorConfig {
            epochs: self.cfg.estimator_warmup,
            lr: self.cfg.lr_estimator,
            weight_decay: self.cfg.weight_decay,
        };
        for k in 0..self.cfg.encoder.n_layers {
            // layer k sees H^k produced with the already fitted layers below
            let rec = self.record(None, Mode::Eval)?;
            let h = rec.tape.value(rec.layer_inputs[k]).clone();
            let est = self.model.estimator.as_mut().expect("checked above");
            fit_estimator(&self.graph, &h, est, k, &est_cfg)?;
        }
        Ok(())
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn model_mut(&mut self) -> &mut Model {
        self.pending = None;
        &mut self.model
    }

    /// The graph after preprocessing.
    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn epochs_done(&self) -> usize {
        self.epoch
    }

    /// Records a forward pass up to the logits. Only the parameters of
    /// `trainable` are marked for gradients.
    fn record(&self, trainable: Option<Phase>, mode: Mode<'_>) -> Result<Objective> {
        let m = &self.model;
        let mut tape = Tape::new();
        let encoder_vars = m.params.bind(&mut tape, trainable == Some(Phase::Encoder));
        let estimator_vars = match &m.estimator {
            Some(est) => est
                .store()
                .bind(&mut tape, trainable == Some(Phase::Estimator)),
            None => Vec::new(),
        };
        let x = tape.constant(self.graph.features().clone());
        let (hidden, layer_inputs, estimates) = match &m.estimator {
            Some(est) => {
                let mut hook = NeutralizeHook::new(est, &estimator_vars, m.deltas.clone());
                let h =
                    m.encoder
                        .encode(&mut tape, &encoder_vars, &self.prop, x, &mut hook, mode)?;
                (h, hook.inputs, hook.estimates)
            }
            None => {
                let h = m.encoder.encode(
                    &mut tape,
                    &encoder_vars,
                    &self.prop,
                    x,
                    &mut IdentityHook,
                    mode,
                )?;
                (h, Vec::new(), Vec::new())
            }
        };
        let logits = m.encoder.classify(&mut tape, &encoder_vars, hidden)?;
        Ok(Objective {
            tape,
            encoder_vars,
            estimator_vars,
            discriminator_vars: Vec::new(),
            layer_inputs,
            estimates,
            hidden,
            logits,
            l_t: None,
            l_f: Vec::new(),
            l_d: None,
            total: None,
        })
    }

    /// Appends `L_F^k`, `L_D` (with the current discriminator held fixed)
    /// and `L_T` as required by `phase`, plus their weighted total.
    fn add_terms(&self, mut obj: Objective, phase: Phase) -> Result<Objective> {
        let tape = &mut obj.tape;
        if phase == Phase::Estimator {
            for (&h_k, &est_k) in obj.layer_inputs.iter().zip(&obj.estimates) {
                // targets are the heterogeneous means of the recorded H^k, held constant
                let target = hetero_mean(&self.graph, tape.value(h_k))?;
                obj.l_f
                    .push(tape.mse_rows(est_k, Rc::new(target.targets), &self.hetero_rows)?);
            }
        }
        if let Some(d) = &self.model.discriminator {
            obj.discriminator_vars = d.store().bind(tape, false);
            let h_train = tape.select_rows(obj.hidden, &self.split.train)?;
            obj.l_d = Some(d.loss(
                tape,
                &obj.discriminator_vars,
                h_train,
                &self.train_sensitive,
                &self.train_local,
            )?);
        }
        if phase == Phase::Encoder {
            obj.l_t =
                Some(tape.softmax_cross_entropy(obj.logits, &self.labels, &self.split.train)?);
        }
        let mut terms: Vec<(Var, f64)> = match phase {
            Phase::Estimator => obj.l_f.iter().map(|&v| (v, 1.0)).collect(),
            Phase::Encoder => vec![(obj.l_t.expect("encoder phase"), 1.0)],
        };
        if let Some(ld) = obj.l_d {
            terms.push((ld, -self.cfg.adv_weight));
        }
        if terms.is_empty() {
            return Err(Error::InvalidArgument(
                "estimator phase without an estimator".into(),
            ));
        }
        obj.total = Some(tape.lin_comb(&terms)?);
        Ok(obj)
    }

    /// Records the objective of `phase` on a fresh tape: `sum_k L_F^k -
    /// adv * L_D` for the estimators, `L_T - adv * L_D` for the encoder.
    pub fn objective(&self, phase: Phase, mode: Mode<'_>) -> Result<Objective> {
        let rec = self.record(Some(phase), mode)?;
        self.add_terms(rec, phase)
    }

    fn adam(&self, lr: f64) -> AdamConfig {
        AdamConfig::new(lr, self.cfg.weight_decay)
    }

    fn dropout_rng(&self) -> Rng {
        rng::stream(self.cfg.seed, "dropout", self.epoch as u64)
    }

    /// Estimator update on a dropout-free forward of the current
    /// parameters, reusing the previous evaluation pass when available.
    fn estimator_step(&mut self) -> Result<Vec<f64>> {
        let rec = match self.pending.take() {
            Some(rec) => rec,
            None => self.record(Some(Phase::Estimator), Mode::Eval)?,
        };
        let obj = self.add_terms(rec, Phase::Estimator)?;
        let epoch = self.epoch;
        let l_f = obj
            .l_f
            .iter()
            .enumerate()
            .map(|(k, &v)| check_finite(obj.tape.scalar(v), epoch, &format!("L_F^{k}")))
            .collect::<Result<Vec<_>>>()?;
        if let Some(ld) = obj.l_d {
            check_finite(obj.tape.scalar(ld), epoch, "L_D (estimator step)")?;
        }
        let grads = obj.tape.backward(obj.total.expect("terms added"))?;
        let adam = self.adam(self.cfg.lr_estimator);
        let est = self
            .model
            .estimator
            .as_mut()
            .expect("estimator step requires an estimator");
        est.store_mut().set_grads(&obj.estimator_vars, &grads);
        est.store_mut().adam_step(&adam)?;
        Ok(l_f)
    }

    fn encoder_step(&mut self) -> Result<f64> {
        let mut r = self.dropout_rng();
        let obj = self.objective(Phase::Encoder, Mode::Train(&mut r))?;
        let l_t = check_finite(
            obj.tape.scalar(obj.l_t.expect("encoder phase")),
            self.epoch,
            "L_T",
        )?;
        if let Some(ld) = obj.l_d {
            check_finite(obj.tape.scalar(ld), self.epoch, "L_D (encoder step)")?;
        }
        let grads = obj.tape.backward(obj.total.expect("terms added"))?;
        let adam = self.adam(self.cfg.lr_encoder);
        self.model.params.set_grads(&obj.encoder_vars, &grads);
        self.model.params.adam_step(&adam)?;
        Ok(l_t)
    }

    /// One update of the discriminator on fixed representations. Returns the
    /// loss before and after the update.
    fn discriminator_step(&mut self, hidden: &DenseMatrix) -> Result<(f64, f64)> {
        let h = hidden.select_rows(&self.split.train);
        let adam = self.adam(self.cfg.lr_discriminator);
        let epoch = self.epoch;
        let (targets, rows) = (&self.train_sensitive, &self.train_local);
        let d = self
            .model
            .discriminator
            .as_mut()
            .expect("discriminator step requires a discriminator");

        let mut tape = Tape::new();
        let vars = d.store().bind(&mut tape, true);
        let hv = tape.constant(h.clone());
        let loss = d.loss(&mut tape, &vars, hv, targets, rows)?;
        let before = check_finite(tape.scalar(loss), epoch, "L_D")?;
        let grads = tape.backward(loss)?;
        d.store_mut().set_grads(&vars, &grads);
        d.store_mut().adam_step(&adam)?;

        let mut tape = Tape::new();
        let vars = d.store().bind(&mut tape, false);
        let hv = tape.constant(h);
        let loss = d.loss(&mut tape, &vars, hv, targets, rows)?;
        let after = check_finite(tape.scalar(loss), epoch, "L_D")?;
        Ok((before, after))
    }

    /// Runs one epoch and returns its report together with the
    /// evaluation-mode forward pass after the encoder update.
    pub fn epoch(&mut self) -> Result<(EpochReport, Forward)> {
        let start = Instant::now();
        let mut steps = Vec::with_capacity(3);
        let l_f = if self.model.estimator.is_some() {
            steps.push(Step::Estimator);
            Some(self.estimator_step()?)
        } else {
            None
        };
        steps.push(Step::Encoder);
        let l_t = self.encoder_step()?;

        let trainable = self.model.estimator.is_some().then_some(Phase::Estimator);
        let rec = self.record(trainable, Mode::Eval)?;
        let fwd = Forward {
            hidden: rec.tape.value(rec.hidden).clone(),
            logits: rec.tape.value(rec.logits).clone(),
        };
        if trainable.is_some() {
            self.pending = Some(rec);
        }
        let (l_d, l_d_after) = if self.model.discriminator.is_some() {
            steps.push(Step::Discriminator);
            let (b, a) = self.discriminator_step(&fwd.hidden)?;
            (Some(b), Some(a))
        } else {
            (None, None)
        };
        let val_acc = self.accuracy_on(&fwd.logits, &self.split.val)?;
        let report = EpochReport {
            epoch: self.epoch,
            l_t,
            l_f,
            l_d,
            l_d_after,
            val_acc,
            steps,
            seconds: start.elapsed().as_secs_f64(),
        };
        log::trace!(
            "epoch {} L_T={:.6} L_F={:?} L_D={:?} val_acc={:.4}",
            report.epoch,
            report.l_t,
            report.l_f,
            report.l_d,
            report.val_acc
        );
        self.epoch += 1;
        Ok((report, fwd))
    }

    fn predictions(&self, logits: &DenseMatrix, idx: &[usize]) -> Result<Predictions> {
        Predictions::new(
            argmax_labels(logits),
            self.graph.labels().to_vec(),
            self.graph.sensitive().to_vec(),
            idx.to_vec(),
        )
    }

    fn accuracy_on(&self, logits: &DenseMatrix, idx: &[usize]) -> Result<f64> {
        Ok(accuracy(&self.predictions(logits, idx)?))
    }

    /// Runs all epochs and keeps the parameters with the best validation
    /// accuracy (earliest epoch on ties).
    pub fn run(mut self, config_hash: &str) -> Result<TrainOutcome> {
        let start = Instant::now();
        let mut history = Vec::with_capacity(self.cfg.epochs);
        let mut best: Option<Checkpoint> = None;
        for _ in 0..self.cfg.epochs {
            let (report, fwd) = self.epoch()?;
            if best.as_ref().is_none_or(|b| report.val_acc > b.val_acc) {
                let test = self.predictions(&fwd.logits, &self.split.test)?;
                best = Some(Checkpoint {
                    version: CHECKPOINT_VERSION,
                    seed: self.cfg.seed,
                    config_hash: config_hash.to_string(),
                    epoch: report.epoch,
                    val_acc: report.val_acc,
                    test_metrics: SeedMetrics::evaluate(&test, self.cfg.seed)?,
                    model: self.model.snapshot(),
                });
            }
            history.push(report);
        }
        Ok(TrainOutcome {
            checkpoint: best.expect("epochs >= 1"),
            history,
            wall_seconds: start.elapsed().as_secs_f64(),
        })
    }
}

/// Snapshot of the selected epoch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub seed: u64,
    pub config_hash: String,
    pub epoch: usize,
    pub val_acc: f64,
    pub test_metrics: SeedMetrics,
    pub model: Model,
}

impl Checkpoint {
    /// Writes the checkpoint as JSON. Tensors are stored by name with their
    /// shape and row-major values.
    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_vec(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let ckpt: Checkpoint = serde_json::from_slice(&std::fs::read(path)?)?;
        if ckpt.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported version {} (expected {CHECKPOINT_VERSION})",
                ckpt.version
            )));
        }
        Ok(ckpt)
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub history: Vec<EpochReport>,
    pub wall_seconds: f64,
}

/// Trains one model with `cfg.seed`.
pub fn train(g: &Graph, split: &Split, cfg: &TrainConfig) -> Result<TrainOutcome> {
    let hash = config_hash(cfg)?;
    Trainer::new(g, split, cfg)?.run(&hash)
}
