//! Run configuration: one TOML file with sections, `--set key=value`
//! overrides and a few shorthand flags.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use fairsin_core::neutralizer::EstimatorConfig;
use fairsin_core::trainer::config_hash;
use fairsin_core::{
    EncoderConfig, EncoderKind, NeutralizeConfig, SynthConfig, TrainConfig, Variant,
};
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

/// Marks errors that map to exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn config_error(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DataSection {
    /// Directory with `nodes.tsv` and `edges.tsv`. Without it the `[synth]`
    /// graph is generated.
    pub dir: Option<PathBuf>,
    /// Fixed split file. Without it every seed draws its own stratified split.
    pub split: Option<PathBuf>,
    /// Train, validation and test fractions.
    pub split_ratios: [f64; 3],
}

impl Default for DataSection {
    fn default() -> Self {
        let (a, b, c) = fairsin_core::graph::DEFAULT_SPLIT_RATIOS;
        Self {
            dir: None,
            split: None,
            split_ratios: [a, b, c],
        }
    }
}

/// Optimization settings; the encoder and neutralization settings have
/// their own sections.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainSection {
    pub epochs: usize,
    pub lr_encoder: f64,
    pub lr_estimator: f64,
    pub lr_discriminator: f64,
    pub weight_decay: f64,
    pub adv_weight: f64,
    pub no_neutral: bool,
    pub no_discri: bool,
    pub estimator_epochs: usize,
    pub estimator_warmup: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            epochs: t.epochs,
            lr_encoder: t.lr_encoder,
            lr_estimator: t.lr_estimator,
            lr_discriminator: t.lr_discriminator,
            weight_decay: t.weight_decay,
            adv_weight: t.adv_weight,
            no_neutral: t.no_neutral,
            no_discri: t.no_discri,
            estimator_epochs: t.estimator_epochs,
            estimator_warmup: t.estimator_warmup,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepSection {
    pub deltas: Vec<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            deltas: vec![0.0, 0.5, 1.0, 2.0, 5.0, 10.0],
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProbeSection {
    /// Seed of the probe splits and of the feature estimator.
    pub seed: u64,
    pub estimator: EstimatorConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// One training run per seed. Must be non-empty and distinct.
    pub seeds: Vec<u64>,
    /// Not part of the config hash.
    pub output_dir: PathBuf,
    pub data: DataSection,
    pub synth: SynthConfig,
    pub encoder: EncoderConfig,
    pub neutralize: NeutralizeConfig,
    pub train: TrainSection,
    pub sweep: SweepSection,
    pub probe: ProbeSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seeds: (0..5).collect(),
            output_dir: PathBuf::from("out"),
            data: DataSection::default(),
            synth: SynthConfig::default(),
            encoder: EncoderConfig::default(),
            neutralize: NeutralizeConfig::default(),
            train: TrainSection::default(),
            sweep: SweepSection::default(),
            probe: ProbeSection::default(),
        }
    }
}

impl RunConfig {
    pub fn train_config(&self, seed: u64) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            epochs: t.epochs,
            lr_encoder: t.lr_encoder,
            lr_estimator: t.lr_estimator,
            lr_discriminator: t.lr_discriminator,
            weight_decay: t.weight_decay,
            adv_weight: t.adv_weight,
            encoder: self.encoder.clone(),
            neutralize: self.neutralize.clone(),
            no_neutral: t.no_neutral,
            no_discri: t.no_discri,
            estimator_epochs: t.estimator_epochs,
            estimator_warmup: t.estimator_warmup,
            seed,
        }
    }

    /// Settings of the feature estimator used by data-level preprocessing,
    /// identical to what training derives for the feature variant.
    pub fn estimator_config(&self) -> EstimatorConfig {
        EstimatorConfig {
            epochs: self.train.estimator_epochs,
            lr: self.train.lr_estimator,
            weight_decay: self.train.weight_decay,
        }
    }

    pub fn hash(&self) -> Result<String> {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        Ok(config_hash(&c)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(config_error(m));
        if self.seeds.is_empty() {
            return fail("seeds must not be empty".into());
        }
        if self.seeds.iter().collect::<BTreeSet<_>>().len() != self.seeds.len() {
            return fail(format!("seeds must be distinct: {:?}", self.seeds));
        }
        let r = self.data.split_ratios;
        if r.iter().any(|v| !(*v > 0.0)) || (r.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return fail(format!(
                "data.split_ratios {r:?} must be positive and sum to 1"
            ));
        }
        if self.data.dir.is_none() {
            self.synth
                .validate()
                .map_err(|e| config_error(format!("[synth] {e}")))?;
        }
        self.train_config(self.seeds[0])
            .validate()
            .map_err(|e| config_error(e.to_string()))?;
        if self.sweep.deltas.is_empty()
            || self
                .sweep
                .deltas
                .iter()
                .any(|d| !(*d >= 0.0 && d.is_finite()))
        {
            return fail("sweep.deltas must be a non-empty list of finite values >= 0".into());
        }
        let est = &self.probe.estimator;
        if est.epochs == 0 || !(est.lr > 0.0) || !(est.weight_decay >= 0.0) {
            return fail("probe.estimator needs epochs >= 1, lr > 0, weight_decay >= 0".into());
        }
        Ok(())
    }
}

/// Configuration flags shared by the subcommands that take a run config.
#[derive(clap::Args, Debug, Default)]
pub struct ConfigArgs {
    /// TOML configuration file; missing keys take their defaults.
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    /// Override one key, e.g. `--set train.epochs=50`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Dataset directory (sets data.dir).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Output directory (sets output_dir).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// none, g, f or full (sets neutralize.variant).
    #[arg(long)]
    pub variant: Option<String>,
    /// Sets neutralize.delta.
    #[arg(long)]
    pub delta: Option<f64>,
    /// gcn, gin or sage (sets encoder.kind).
    #[arg(long)]
    pub encoder: Option<String>,
    /// Sets train.epochs.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Comma-separated seeds.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    /// Print the resolved configuration and exit.
    #[arg(long)]
    pub dump_config: bool,
}

fn path_value(p: &Path) -> Value {
    Value::String(p.to_string_lossy().into_owned())
}

/// Parses a TOML literal, falling back to a bare string.
fn parse_value(raw: &str) -> Value {
    toml::from_str::<Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

fn set_path(table: &mut Table, key: &str, value: Value) -> Result<()> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts
        .pop()
        .filter(|k| !k.is_empty())
        .ok_or_else(|| config_error(format!("empty key in {key:?}")))?;
    let mut cur = table;
    for p in parts {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| Value::Table(Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| config_error(format!("{p:?} in {key:?} is not a section")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

fn to_table(cfg: &RunConfig) -> Result<Table> {
    match Value::try_from(cfg)? {
        Value::Table(t) => Ok(t),
        _ => unreachable!("a struct serializes to a table"),
    }
}

/// Overlays `over` onto `base`, descending into tables present in both.
fn deep_merge(base: &mut Table, over: Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(o)) => deep_merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Keys of `user` that `known` lacks, as dotted paths.
fn unknown_keys(user: &Table, known: &Table, prefix: &str, out: &mut Vec<String>) {
    for (k, v) in user {
        let path = format!("{prefix}{k}");
        match (v, known.get(k)) {
            (_, None) => out.push(path),
            (Value::Table(u), Some(Value::Table(kn))) => {
                unknown_keys(u, kn, &format!("{path}."), out)
            }
            _ => {}
        }
    }
}

impl ConfigArgs {
    fn flag_overrides(&self) -> Result<Vec<(&'static str, Value)>> {
        let mut out = Vec::new();
        if let Some(d) = &self.data {
            out.push(("data.dir", path_value(d)));
        }
        if let Some(o) = &self.out {
            out.push(("output_dir", path_value(o)));
        }
        if let Some(v) = &self.variant {
            let v: Variant = v
                .parse()
                .map_err(|e: fairsin_core::Error| config_error(e.to_string()))?;
            out.push(("neutralize.variant", Value::String(v.to_string())));
        }
        if let Some(d) = self.delta {
            out.push(("neutralize.delta", Value::Float(d)));
        }
        if let Some(k) = &self.encoder {
            let k: EncoderKind = k
                .parse()
                .map_err(|e: fairsin_core::Error| config_error(e.to_string()))?;
            out.push(("encoder.kind", Value::String(k.to_string())));
        }
        if let Some(e) = self.epochs {
            out.push(("train.epochs", Value::Integer(e as i64)));
        }
        if let Some(s) = &self.seeds {
            let seeds = s.iter().map(|&v| Value::Integer(v as i64)).collect();
            out.push(("seeds", Value::Array(seeds)));
        }
        Ok(out)
    }

    /// File, then `--set` overrides in order, then shorthand flags.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut table = match &self.config {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("reading {}", p.display()))
                    .map_err(|e| config_error(format!("{e:#}")))?;
                toml::from_str::<Table>(&text)
                    .map_err(|e| config_error(format!("{}: {e}", p.display())))?
            }
            None => Table::new(),
        };
        for o in &self.overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| config_error(format!("override {o:?} is not KEY=VALUE")))?;
            set_path(&mut table, k.trim(), parse_value(v.trim()))?;
        }
        for (k, v) in self.flag_overrides()? {
            set_path(&mut table, k, v)?;
        }
        // partial sections (e.g. only `synth.label_rule.rho`) complete from the defaults
        let mut merged = to_table(&RunConfig::default())?;
        deep_merge(&mut merged, table.clone());
        let cfg: RunConfig = Value::Table(merged)
            .try_into()
            .map_err(|e: toml::de::Error| config_error(e.to_string()))?;
        let known = to_table(&cfg)?;
        let mut unknown = Vec::new();
        unknown_keys(&table, &known, "", &mut unknown);
        if !unknown.is_empty() {
            return Err(config_error(format!(
                "unknown config key(s): {}",
                unknown.join(", ")
            )));
        }
        cfg.validate()?;
        Ok(cfg)
    }
}
