use std::time::Instant;

use anyhow::Result;

use super::{input_hashes, load_graph, parallel_map, train_seed};
use crate::config::ConfigArgs;
use crate::output::{metrics_table, write_run};

#[derive(clap::Args, Debug)]
pub struct Args {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Write 0 for wall_seconds so repeated runs produce identical reports.
    #[arg(long)]
    pub reproducible: bool,
    /// Seeds trained concurrently.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Also write the selected checkpoint of every seed.
    #[arg(long)]
    pub save_checkpoints: bool,
}

pub fn run(args: &Args) -> Result<()> {
    let cfg = args.config.resolve()?;
    if args.config.dump_config {
        print!("{}", cfg.to_toml()?);
        return Ok(());
    }
    let start = Instant::now();
    let hash = cfg.hash()?;
    let inputs = input_hashes(&cfg)?;
    let g = load_graph(&cfg)?;
    let outcomes = parallel_map(&cfg.seeds, args.jobs, |&seed| {
        train_seed(&cfg, &g, &hash, seed)
    })?;
    let wall = if args.reproducible {
        0.0
    } else {
        start.elapsed().as_secs_f64()
    };
    let report = write_run(
        &cfg.output_dir,
        &cfg,
        &hash,
        &outcomes,
        wall,
        args.save_checkpoints,
        inputs,
    )?;
    print!("{}", metrics_table(&report));
    println!("wrote {}", cfg.output_dir.display());
    Ok(())
}
