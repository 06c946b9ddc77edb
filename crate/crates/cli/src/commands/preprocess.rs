use anyhow::{bail, Result};
use fairsin_core::graph::{edges_tsv, nodes_tsv, EDGES_FILE, NODES_FILE};
use fairsin_core::neutralizer::{preprocess_fairsin_f, reweight_edges};
use fairsin_core::Variant;

use super::{input_hashes, load_graph};
use crate::config::{config_error, ConfigArgs};
use crate::output::{hash_comment, Kind, Outputs, MANIFEST_FILE};

#[derive(clap::Args, Debug)]
pub struct Args {
    /// `--variant` must be g or f and `--data` is required. The feature
    /// estimator uses the `[train]` estimator settings and the first seed.
    #[command(flatten)]
    pub config: ConfigArgs,
}

pub fn run(args: &Args) -> Result<()> {
    let cfg = args.config.resolve()?;
    if args.config.dump_config {
        print!("{}", cfg.to_toml()?);
        return Ok(());
    }
    if cfg.data.dir.is_none() {
        return Err(config_error(
            "preprocess needs a dataset (--data or data.dir)",
        ));
    }
    let variant = cfg.neutralize.variant;
    if !matches!(variant, Variant::G | Variant::F) {
        return Err(config_error(format!(
            "preprocess needs variant g or f, got {variant}"
        )));
    }
    let hash = cfg.hash()?;
    let inputs = input_hashes(&cfg)?;
    let g = load_graph(&cfg)?;
    if g.group_sizes().contains(&0) {
        bail!("the graph has a single sensitive group; there is nothing to neutralize");
    }
    let delta = cfg.neutralize.delta;
    let out_graph = match variant {
        Variant::G => reweight_edges(&g, delta)?,
        _ => preprocess_fairsin_f(&g, delta, &cfg.estimator_config(), cfg.seeds[0])?.graph,
    };

    let mut out = Outputs::create(&cfg.output_dir, &hash)?;
    let comment = hash_comment(&hash);
    out.write(NODES_FILE, format!("{comment}{}", nodes_tsv(&out_graph)))?;
    out.write(EDGES_FILE, format!("{comment}{}", edges_tsv(&out_graph)))?;
    out.write_config(&cfg)?;
    out.finish(MANIFEST_FILE, Kind::Preprocess, &cfg, inputs)?;
    println!(
        "variant {variant}, delta {delta}: wrote {} nodes to {}",
        out_graph.n_nodes(),
        cfg.output_dir.display()
    );
    Ok(())
}
