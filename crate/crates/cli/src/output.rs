//! Output files, reports and manifests.
//!
//! Every file written here embeds the config hash: JSON files in a field,
//! text files in a leading `# config_hash: ...` line, SVG in a comment.
//! The manifest lists each file with its SHA-256.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use fairsin_core::metrics::{aggregate_seeds, MetricValues};
use fairsin_core::{EncoderKind, SeedMetrics, TrainOutcome, Variant};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const SYNTH_MANIFEST_FILE: &str = "synth_manifest.json";
pub const REPORT_FILE: &str = "report.json";
pub const TRACE_FILE: &str = "trace.log";
pub const CONFIG_FILE: &str = "config.toml";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn hash_comment(hash: &str) -> String {
    format!("# config_hash: {hash}\n")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Synth,
    Preprocess,
    Train,
    Probe,
    Sweep,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub kind: Kind,
    pub config_hash: String,
    pub config: RunConfig,
    /// SHA-256 of files read, by path.
    pub inputs: BTreeMap<String, String>,
    /// SHA-256 of files written, relative to the manifest's directory.
    pub files: BTreeMap<String, String>,
}

/// Writes files into one directory and records their hashes.
pub struct Outputs {
    dir: PathBuf,
    hash: String,
    files: BTreeMap<String, String>,
}

impl Outputs {
    pub fn create(dir: &Path, hash: &str) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            hash: hash.to_string(),
            files: BTreeMap::new(),
        })
    }

    pub fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> Result<()> {
        let bytes = contents.as_ref();
        debug_assert!(
            String::from_utf8_lossy(bytes).contains(&self.hash),
            "{name} does not carry the config hash"
        );
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.files.insert(name.to_string(), sha256_hex(bytes));
        Ok(())
    }

    pub fn write_json(&mut self, name: &str, value: &impl Serialize) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text)
    }

    /// Writes the resolved config so the run can be repeated with `--config`.
    pub fn write_config(&mut self, cfg: &RunConfig) -> Result<()> {
        let text = format!("{}{}", hash_comment(&self.hash), cfg.to_toml()?);
        self.write(CONFIG_FILE, text)
    }

    pub fn finish(
        self,
        file: &str,
        kind: Kind,
        cfg: &RunConfig,
        inputs: BTreeMap<String, String>,
    ) -> Result<Manifest> {
        let manifest = Manifest {
            kind,
            config_hash: self.hash,
            config: cfg.clone(),
            inputs,
            files: self.files,
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(self.dir.join(file), text)?;
        Ok(manifest)
    }
}

/// Test metrics of a multi-seed run, in percent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Report {
    pub config_hash: String,
    pub variant: Variant,
    pub encoder: EncoderKind,
    pub seeds: Vec<u64>,
    pub per_seed: Vec<SeedMetrics>,
    pub mean: MetricValues,
    pub std: MetricValues,
    pub wall_seconds: f64,
}

fn percent(m: &SeedMetrics) -> SeedMetrics {
    SeedMetrics {
        seed: m.seed,
        acc: 100.0 * m.acc,
        f1: 100.0 * m.f1,
        dp: 100.0 * m.dp,
        eo: 100.0 * m.eo,
    }
}

impl Report {
    pub fn new(
        hash: &str,
        cfg: &RunConfig,
        outcomes: &[TrainOutcome],
        wall_seconds: f64,
    ) -> Result<Self> {
        let fractions: Vec<SeedMetrics> =
            outcomes.iter().map(|o| o.checkpoint.test_metrics).collect();
        let agg = aggregate_seeds(&fractions)?;
        let report = Self {
            config_hash: hash.to_string(),
            variant: cfg.neutralize.variant,
            encoder: cfg.encoder.kind,
            seeds: fractions.iter().map(|m| m.seed).collect(),
            per_seed: fractions.iter().map(percent).collect(),
            mean: agg.mean.percent(),
            std: agg.std.percent(),
            wall_seconds,
        };
        report.validate()?;
        Ok(report)
    }

    /// Checks what the type system cannot: seeds line up with the per-seed
    /// records and every metric is a finite percentage.
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            bail!("report has no seeds");
        }
        let listed: Vec<u64> = self.per_seed.iter().map(|m| m.seed).collect();
        if listed != self.seeds {
            bail!(
                "per_seed seeds {listed:?} do not match seeds {:?}",
                self.seeds
            );
        }
        let values = self
            .per_seed
            .iter()
            .flat_map(|m| [m.acc, m.f1, m.dp, m.eo])
            .chain([self.mean.acc, self.mean.f1, self.mean.dp, self.mean.eo])
            .chain([self.std.acc, self.std.f1, self.std.dp, self.std.eo]);
        for v in values {
            if !(0.0..=100.0).contains(&v) {
                bail!("metric value {v} is not a percentage");
            }
        }
        if !(self.wall_seconds >= 0.0 && self.wall_seconds.is_finite()) {
            bail!("wall_seconds {} is invalid", self.wall_seconds);
        }
        Ok(())
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or("-".into(), |v| format!("{v:.6}"))
}

/// Per-epoch losses and timings of every seed, tab-separated.
pub fn trace_log(hash: &str, outcomes: &[TrainOutcome]) -> String {
    let mut out = hash_comment(hash);
    out.push_str("seed\tepoch\tsteps\tl_t\tl_f\tl_d\tl_d_after\tval_acc\tseconds\n");
    for o in outcomes {
        let seed = o.checkpoint.seed;
        for e in &o.history {
            let steps: Vec<&str> = e
                .steps
                .iter()
                .map(|s| match s {
                    fairsin_core::trainer::Step::Estimator => "estimator",
                    fairsin_core::trainer::Step::Encoder => "encoder",
                    fairsin_core::trainer::Step::Discriminator => "discriminator",
                })
                .collect();
            let l_f = e.l_f.as_ref().map_or("-".into(), |v| {
                v.iter()
                    .map(|x| format!("{x:.6}"))
                    .collect::<Vec<_>>()
                    .join(";")
            });
            writeln!(
                out,
                "{seed}\t{}\t{}\t{:.6}\t{l_f}\t{}\t{}\t{:.4}\t{:.6}",
                e.epoch,
                steps.join(","),
                e.l_t,
                opt(e.l_d),
                opt(e.l_d_after),
                e.val_acc,
                e.seconds
            )
            .unwrap();
        }
        writeln!(
            out,
            "# seed {seed}: selected epoch {} (val_acc {:.4}), {:.3} s total",
            o.checkpoint.epoch, o.checkpoint.val_acc, o.wall_seconds
        )
        .unwrap();
    }
    out
}

/// Writes `report.json`, `trace.log` and `config.toml`, plus checkpoints
/// when asked, and the manifest.
pub fn write_run(
    dir: &Path,
    cfg: &RunConfig,
    hash: &str,
    outcomes: &[TrainOutcome],
    wall_seconds: f64,
    checkpoints: bool,
    inputs: BTreeMap<String, String>,
) -> Result<Report> {
    let report = Report::new(hash, cfg, outcomes, wall_seconds)?;
    let mut out = Outputs::create(dir, hash)?;
    out.write_json(REPORT_FILE, &report)?;
    out.write(TRACE_FILE, trace_log(hash, outcomes))?;
    out.write_config(cfg)?;
    if checkpoints {
        for o in outcomes {
            out.write_json(
                &format!("checkpoints/seed_{}.json", o.checkpoint.seed),
                &o.checkpoint,
            )?;
        }
    }
    out.finish(MANIFEST_FILE, Kind::Train, cfg, inputs)?;
    Ok(report)
}

pub fn metrics_table(report: &Report) -> String {
    let mut out = format!(
        "variant {}, encoder {}, {} seed(s), config {}\n",
        report.variant,
        report.encoder,
        report.seeds.len(),
        &report.config_hash[..12]
    );
    out.push_str("seed        ACC      F1      DP      EO\n");
    for m in &report.per_seed {
        writeln!(
            out,
            "{:<8}{:>7.2}{:>8.2}{:>8.2}{:>8.2}",
            m.seed, m.acc, m.f1, m.dp, m.eo
        )
        .unwrap();
    }
    let (m, s) = (&report.mean, &report.std);
    writeln!(
        out,
        "mean    {:>7.2}{:>8.2}{:>8.2}{:>8.2}",
        m.acc, m.f1, m.dp, m.eo
    )
    .unwrap();
    writeln!(
        out,
        "std     {:>7.2}{:>8.2}{:>8.2}{:>8.2}",
        s.acc, s.f1, s.dp, s.eo
    )
    .unwrap();
    out
}
