use std::fmt::Write as _;

use anyhow::Result;
use fairsin_core::neutralizer::preprocess_fairsin_f;
use fairsin_core::probe::{four_group_comparison, ProbeReport};
use serde::{Deserialize, Serialize};

use super::{input_hashes, load_graph};
use crate::config::ConfigArgs;
use crate::output::{hash_comment, Kind, Outputs, MANIFEST_FILE};
use crate::svg;

#[derive(clap::Args, Debug)]
pub struct Args {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Also write probe.svg.
    #[arg(long)]
    pub svg: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeFile {
    pub config_hash: String,
    pub delta: f64,
    pub records: Vec<ProbeReport>,
}

pub fn run(args: &Args) -> Result<()> {
    let cfg = args.config.resolve()?;
    if args.config.dump_config {
        print!("{}", cfg.to_toml()?);
        return Ok(());
    }
    let hash = cfg.hash()?;
    let inputs = input_hashes(&cfg)?;
    let g = load_graph(&cfg)?;
    let delta = cfg.neutralize.delta;
    let seed = cfg.probe.seed;
    let neutral = preprocess_fairsin_f(&g, delta, &cfg.probe.estimator, seed)?;
    let records = four_group_comparison(&g, &neutral.estimator, delta, seed)?.to_vec();

    let mut csv = hash_comment(&hash);
    csv.push_str("group,score,n_probe_test,seed\n");
    for r in &records {
        writeln!(
            csv,
            "{},{},{},{}",
            r.group.label(),
            r.score,
            r.n_probe_test,
            r.seed
        )
        .unwrap();
    }
    let mut out = Outputs::create(&cfg.output_dir, &hash)?;
    out.write_json(
        "probe_report.json",
        &ProbeFile {
            config_hash: hash.clone(),
            delta,
            records: records.clone(),
        },
    )?;
    out.write("probe.csv", csv)?;
    out.write_config(&cfg)?;
    if args.svg {
        let labels: Vec<&str> = records.iter().map(|r| r.group.label()).collect();
        let scores: Vec<f64> = records.iter().map(|r| r.score).collect();
        let title = format!("sensitive probe score, delta = {delta}");
        out.write("probe.svg", svg::bar_chart(&title, &labels, &scores, &hash))?;
    }
    out.finish(MANIFEST_FILE, Kind::Probe, &cfg, inputs)?;

    for r in &records {
        println!("{:<12}{:.4}", r.group.label(), r.score);
    }
    println!("wrote {}", cfg.output_dir.display());
    Ok(())
}
