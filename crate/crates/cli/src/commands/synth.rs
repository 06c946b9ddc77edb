use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{Context, Result};
use fairsin_core::graph::{edges_tsv, nodes_tsv, EDGES_FILE, NODES_FILE};
use fairsin_core::synth::generate;

use crate::config::{config_error, ConfigArgs, RunConfig};
use crate::output::{hash_comment, Kind, Manifest, Outputs, SYNTH_MANIFEST_FILE};

#[derive(clap::Args, Debug)]
pub struct Args {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Regenerate the graph recorded in a synth manifest; other config
    /// flags are ignored except `--out`.
    #[arg(long, conflicts_with_all = ["config", "overrides"])]
    pub from_manifest: Option<PathBuf>,
}

fn resolve(args: &Args) -> Result<RunConfig> {
    let Some(path) = &args.from_manifest else {
        return args.config.resolve();
    };
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(|e| config_error(format!("{e:#}")))?;
    let manifest: Manifest = serde_json::from_str(&text)
        .map_err(|e| config_error(format!("{}: {e}", path.display())))?;
    let mut cfg = manifest.config;
    if let Some(out) = &args.config.out {
        cfg.output_dir = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn run(args: &Args) -> Result<()> {
    let cfg = resolve(args)?;
    if args.config.dump_config {
        print!("{}", cfg.to_toml()?);
        return Ok(());
    }
    let hash = cfg.hash()?;
    let g = generate(&cfg.synth)?;
    let mut out = Outputs::create(&cfg.output_dir, &hash)?;
    let comment = hash_comment(&hash);
    out.write(NODES_FILE, format!("{comment}{}", nodes_tsv(&g)))?;
    out.write(EDGES_FILE, format!("{comment}{}", edges_tsv(&g)))?;
    let manifest = out.finish(SYNTH_MANIFEST_FILE, Kind::Synth, &cfg, BTreeMap::new())?;

    let h = fairsin_core::synth::homogeneous_edge_fraction(&g);
    println!(
        "{} nodes, {} edges, homogeneous edge fraction {h:.3}, seed {}",
        g.n_nodes(),
        g.undirected_edges().len(),
        cfg.synth.seed
    );
    for (name, sha) in &manifest.files {
        println!("{name}  {sha}");
    }
    println!("wrote {}", cfg.output_dir.display());
    Ok(())
}
