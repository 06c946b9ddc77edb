pub mod preprocess;
pub mod probe;
pub mod sweep;
pub mod synth;
pub mod train;
pub mod verify;

use std::collections::BTreeMap;

use anyhow::{Context, Result};
use fairsin_core::graph::{load_dir, load_split, stratified_split, EDGES_FILE, NODES_FILE};
use fairsin_core::trainer::Trainer;
use fairsin_core::{Graph, Split, TrainOutcome};
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::output::sha256_hex;

/// The configured dataset, or the generated synthetic graph.
pub fn load_graph(cfg: &RunConfig) -> Result<Graph> {
    match &cfg.data.dir {
        Some(dir) => {
            load_dir(dir).with_context(|| format!("loading dataset from {}", dir.display()))
        }
        None => Ok(fairsin_core::synth::generate(&cfg.synth)?),
    }
}

/// SHA-256 of every file the run reads.
pub fn input_hashes(cfg: &RunConfig) -> Result<BTreeMap<String, String>> {
    let mut paths = Vec::new();
    if let Some(dir) = &cfg.data.dir {
        paths.push(dir.join(NODES_FILE));
        paths.push(dir.join(EDGES_FILE));
    }
    paths.extend(cfg.data.split.clone());
    paths
        .into_iter()
        .map(|p| {
            let bytes = std::fs::read(&p).with_context(|| format!("reading {}", p.display()))?;
            Ok((p.to_string_lossy().into_owned(), sha256_hex(&bytes)))
        })
        .collect()
}

/// The fixed split file, or a stratified split drawn with `seed`.
pub fn split_for(cfg: &RunConfig, g: &Graph, seed: u64) -> Result<Split> {
    match &cfg.data.split {
        Some(path) => Ok(load_split(path, g)?),
        None => {
            let [a, b, c] = cfg.data.split_ratios;
            Ok(stratified_split(g, (a, b, c), seed)?)
        }
    }
}

pub fn train_seed(cfg: &RunConfig, g: &Graph, hash: &str, seed: u64) -> Result<TrainOutcome> {
    let run = || -> Result<TrainOutcome> {
        let split = split_for(cfg, g, seed)?;
        Ok(Trainer::new(g, &split, &cfg.train_config(seed))?.run(hash)?)
    };
    let outcome = run().with_context(|| format!("seed {seed} failed"))?;
    let m = outcome.checkpoint.test_metrics;
    log::info!(
        "seed {seed} (delta {}): epoch {} ACC {:.2} DP {:.2} EO {:.2} in {:.2} s",
        cfg.neutralize.delta,
        outcome.checkpoint.epoch,
        100.0 * m.acc,
        100.0 * m.dp,
        100.0 * m.eo,
        outcome.wall_seconds
    );
    Ok(outcome)
}

/// Runs `f` over `items` on up to `jobs` threads, keeping input order.
/// Every item owns its trainer, so results do not depend on `jobs`.
pub fn parallel_map<T, R, F>(items: &[T], jobs: usize, f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Result<R> + Sync + Send,
{
    if jobs <= 1 || items.len() <= 1 {
        return items.iter().map(f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?;
    pool.install(|| {
        items
            .par_iter()
            .map(f)
            .collect::<Vec<_>>()
            .into_iter()
            .collect()
    })
}
