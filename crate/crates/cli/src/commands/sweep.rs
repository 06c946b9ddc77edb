use std::fmt::Write as _;
use std::time::Instant;

use anyhow::Result;
use fairsin_core::metrics::MetricValues;
use fairsin_core::Variant;
use serde::{Deserialize, Serialize};

use super::{input_hashes, load_graph, parallel_map, train_seed};
use crate::config::{ConfigArgs, RunConfig};
use crate::output::{hash_comment, write_run, Kind, Outputs, MANIFEST_FILE};
use crate::svg;

#[derive(clap::Args, Debug)]
pub struct Args {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Comma-separated deltas (sets sweep.deltas).
    #[arg(long, value_delimiter = ',')]
    pub deltas: Option<Vec<f64>>,
    /// Also write sweep.svg.
    #[arg(long)]
    pub svg: bool,
    /// Write 0 for every wall-clock field.
    #[arg(long)]
    pub reproducible: bool,
    /// (delta, seed) cells trained concurrently.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub delta: f64,
    /// Subdirectory holding this delta's run.
    pub dir: String,
    pub config_hash: String,
    pub mean: MetricValues,
    pub std: MetricValues,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepReport {
    pub config_hash: String,
    pub variant: Variant,
    pub seeds: Vec<u64>,
    /// Metrics in percent.
    pub rows: Vec<SweepRow>,
}

fn csv(hash: &str, rows: &[SweepRow]) -> String {
    let mut out = hash_comment(hash);
    out.push_str("delta,acc_mean,acc_std,f1_mean,f1_std,dp_mean,dp_std,eo_mean,eo_std\n");
    for r in rows {
        let (m, s) = (&r.mean, &r.std);
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.delta, m.acc, s.acc, m.f1, s.f1, m.dp, s.dp, m.eo, s.eo
        )
        .unwrap();
    }
    out
}

pub fn run(args: &Args) -> Result<()> {
    let mut cfg = args.config.resolve()?;
    if let Some(d) = &args.deltas {
        cfg.sweep.deltas = d.clone();
        cfg.validate()?;
    }
    if args.config.dump_config {
        print!("{}", cfg.to_toml()?);
        return Ok(());
    }
    if cfg.neutralize.variant == Variant::None {
        log::warn!("variant none ignores delta; every sweep row trains the same model");
    }
    let start = Instant::now();
    let hash = cfg.hash()?;
    let inputs = input_hashes(&cfg)?;
    let g = load_graph(&cfg)?;

    let cells: Vec<RunConfig> = cfg
        .sweep
        .deltas
        .iter()
        .map(|&d| {
            let mut c = cfg.clone();
            c.neutralize.delta = d;
            c.neutralize.per_layer_delta = None;
            c.sweep.deltas = vec![d];
            c.output_dir = cfg.output_dir.join(format!("delta_{d}"));
            c
        })
        .collect();
    let hashes = cells
        .iter()
        .map(RunConfig::hash)
        .collect::<Result<Vec<_>>>()?;
    let work: Vec<(usize, u64)> = (0..cells.len())
        .flat_map(|i| cfg.seeds.iter().map(move |&s| (i, s)))
        .collect();
    let outcomes = parallel_map(&work, args.jobs, |&(i, seed)| {
        train_seed(&cells[i], &g, &hashes[i], seed)
    })?;

    // aggregation runs after every cell finished, in delta order
    let mut rows = Vec::with_capacity(cells.len());
    for (i, (cell, chunk)) in cells
        .iter()
        .zip(outcomes.chunks(cfg.seeds.len()))
        .enumerate()
    {
        let wall = if args.reproducible {
            0.0
        } else {
            chunk.iter().map(|o| o.wall_seconds).sum()
        };
        let report = write_run(
            &cell.output_dir,
            cell,
            &hashes[i],
            chunk,
            wall,
            false,
            inputs.clone(),
        )?;
        rows.push(SweepRow {
            delta: cell.neutralize.delta,
            dir: format!("delta_{}", cell.neutralize.delta),
            config_hash: hashes[i].clone(),
            mean: report.mean,
            std: report.std,
        });
    }

    let mut out = Outputs::create(&cfg.output_dir, &hash)?;
    out.write("sweep.csv", csv(&hash, &rows))?;
    out.write_json(
        "sweep.json",
        &SweepReport {
            config_hash: hash.clone(),
            variant: cfg.neutralize.variant,
            seeds: cfg.seeds.clone(),
            rows: rows.clone(),
        },
    )?;
    out.write_config(&cfg)?;
    if args.svg {
        let x: Vec<f64> = rows.iter().map(|r| r.delta).collect();
        let series =
            |f: fn(&MetricValues) -> f64| rows.iter().map(|r| f(&r.mean)).collect::<Vec<_>>();
        let panels = [
            ("ACC (%)", series(|m| m.acc)),
            ("F1 (%)", series(|m| m.f1)),
            ("DP (%)", series(|m| m.dp)),
            ("EO (%)", series(|m| m.eo)),
        ];
        out.write("sweep.svg", svg::line_panels(&x, "delta", &panels, &hash))?;
    }
    out.finish(MANIFEST_FILE, Kind::Sweep, &cfg, inputs)?;

    println!("delta     ACC      F1      DP      EO");
    for r in &rows {
        let m = &r.mean;
        println!(
            "{:<6}{:>7.2}{:>8.2}{:>8.2}{:>8.2}",
            r.delta, m.acc, m.f1, m.dp, m.eo
        );
    }
    let total = if args.reproducible {
        0.0
    } else {
        start.elapsed().as_secs_f64()
    };
    println!("wrote {} ({total:.1} s)", cfg.output_dir.display());
    Ok(())
}
