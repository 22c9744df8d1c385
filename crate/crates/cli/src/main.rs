use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::time::Instant;
use surfcast::airmap::CompileOptions;
use surfcast::bench::parse_experiments;
use surfcast::ingest::GeoFence;
use surfcast::model::{Checkpoint, ModelConfig};
use surfcast::scorer::{stats_csv, stats_markdown, Strategy};
use surfcast_cli::*;

#[derive(Parser)]
#[command(name = "surfcast", version, about = "Airport surface-movement forecasting pipeline")]
struct Cli {
    /// Seed for every random choice of the command.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Pipeline config JSON; defaults apply to missing fields.
    #[arg(long, global = true)]
    pipeline: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Parse track CSVs, drop reports outside the fence, resample to 1 Hz.
    Ingest {
        /// One CSV per day; the file stem is the day id.
        #[arg(long = "csv", required = true, num_args = 1..)]
        csv: Vec<PathBuf>,
        #[arg(long)]
        airport: String,
        #[arg(long)]
        fence: Option<PathBuf>,
        /// Recompute x/y from lat/lon around LAT,LON.
        #[arg(long)]
        datum: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compile a raw routing graph into a semantic airport graph.
    CompileMap {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10.0)]
        spacing_m: f64,
        #[arg(long)]
        extension_m: Option<f64>,
        #[arg(long)]
        datum: Option<String>,
    },
    /// Window and mine scenes into shards.
    Mine {
        #[arg(long)]
        tracks: PathBuf,
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "critical")]
        strategy: Strategy,
    },
    /// Ego-selection statistics table.
    ScoreStats {
        #[arg(long)]
        tracks: PathBuf,
        #[arg(long)]
        map: PathBuf,
        #[arg(long, default_value = "critical")]
        strategy: Strategy,
        /// Directory for stats.csv and stats.md; prints markdown only when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Seeded per-airport day split of a shard directory.
    Split {
        #[arg(long)]
        shards: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    Train {
        #[arg(long)]
        shards: PathBuf,
        /// Model config JSON.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Train on the training days of this split manifest.
        #[arg(long)]
        split: Option<PathBuf>,
        #[arg(long, default_value_t = 100)]
        steps: usize,
        #[arg(long)]
        out: PathBuf,
    },
    Eval {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        shards: PathBuf,
        /// Evaluate on the test days of this split manifest.
        #[arg(long)]
        split: Option<PathBuf>,
        #[arg(long, default_value_t = 50)]
        horizon: usize,
        /// Result CSV to write; printed when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Merge result CSVs into tables.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "md")]
        format: ReportFormat,
    },
    /// Single- and multi-airport experiments.
    Bench {
        #[arg(long, default_value = "single,multi:seen=2of3")]
        experiments: String,
        /// Simulate three airports of this size instead of reading shards.
        #[arg(long)]
        synthetic: Option<String>,
        #[arg(long)]
        shards: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Full pipeline on synthetic airports.
    Demo {
        #[arg(long, default_value = "demo")]
        out: PathBuf,
    },
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let cfg = PipelineConfig::load(cli.pipeline.as_deref())?;
    let exec = exec();
    let seed = cli.seed;
    let start = Instant::now();
    let mut log = |m: &str| eprintln!("[{:>6.1}s] {m}", start.elapsed().as_secs_f64());
    match cli.cmd {
        Cmd::Ingest { csv, airport, fence, datum, out } => {
            let fence = fence.map(|p| -> Result<GeoFence> { Ok(GeoFence::from_json(&std::fs::read(&p)?)?) }).transpose()?;
            let mut cfg = cfg;
            if let Some(d) = datum {
                cfg.resample.datum = Some(parse_datum(&d)?);
            }
            for path in csv {
                let day = path.file_stem().and_then(|s| s.to_str()).context("CSV file name is not a day id")?.to_string();
                let s = ingest_csv(&path, fence.as_ref(), &cfg, &airport, &day, &out)?;
                println!("{}: {}", path.display(), serde_json::to_string(&s)?);
            }
        }
        Cmd::CompileMap { input, out, spacing_m, extension_m, datum } => {
            let opts = CompileOptions {
                spacing_m,
                extension_m: extension_m.unwrap_or(cfg.compile.extension_m),
                datum: datum.as_deref().map(parse_datum).transpose()?.or(cfg.compile.datum),
            };
            let g = compile_map(&input, &out, &opts)?;
            println!("{} nodes, {} edges -> {}", g.nodes.len(), g.edges.len(), out.display());
        }
        Cmd::Mine { tracks, map, out, strategy } => {
            for idx in mine(&tracks, &load_map(&map)?, &out, seed, strategy, &cfg, exec)? {
                println!("{}/{}: {} scenes", idx.airport_id, idx.day_id, idx.count);
            }
        }
        Cmd::ScoreStats { tracks, map, strategy, out } => {
            let rows = score_stats(&tracks, &load_map(&map)?, strategy, seed, &cfg)?;
            let md = stats_markdown(&rows);
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir)?;
                std::fs::write(dir.join(format!("stats_{strategy}.csv")), stats_csv(&rows))?;
                std::fs::write(dir.join(format!("stats_{strategy}.md")), &md)?;
            }
            print!("{md}");
        }
        Cmd::Split { shards, out } => {
            let data = load_shards(&shards, &cfg.scene_hash())?;
            let m = manifest_for(&data, cfg.split_ratio, seed)?;
            std::fs::write(&out, serde_json::to_vec_pretty(&m)?)?;
            println!("{}", serde_json::to_string_pretty(&m)?);
        }
        Cmd::Train { shards, config, split, steps, out } => {
            let model_cfg = match config {
                Some(p) => ModelConfig::from_json(&std::fs::read(&p).with_context(|| format!("reading {}", p.display()))?)?,
                None => cfg.bench.model,
            };
            let manifest = split.as_deref().map(load_manifest).transpose()?;
            let every = (steps / 20).max(1);
            let ckpt = train_stage(&shards, manifest.as_ref(), &cfg, model_cfg, steps, seed, &out, exec, &mut |s, l| {
                if (s + 1) % every == 0 {
                    log(&format!("step {} loss {l:.4}", s + 1));
                }
            })?;
            println!("saved {} ({} parameters)", out.display(), ckpt.model.params.scalar_count());
        }
        Cmd::Eval { ckpt, shards, split, horizon, out } => {
            let ckpt = Checkpoint::load(&ckpt)?;
            let manifest = split.as_deref().map(load_manifest).transpose()?;
            let r = eval_stage(&ckpt, &shards, manifest.as_ref(), horizon, &cfg, exec)?;
            write_or_print(out.as_deref(), &r.to_csv())?;
        }
        Cmd::Report { input, format } => print!("{}", report(&input, format)?),
        Cmd::Bench { experiments, synthetic, shards, out } => {
            let exps = parse_experiments(&experiments).map_err(anyhow::Error::msg)?;
            let data = match (synthetic, shards) {
                (Some(size), _) => synthetic_scenes(synthetic_airports(size_from_str(&size)?, seed), &cfg, seed, exec)?,
                (None, Some(dir)) => load_shards(&dir, &cfg.scene_hash())?,
                (None, None) => anyhow::bail!("bench needs --synthetic SIZE or --shards DIR"),
            };
            let manifest = manifest_for(&data, cfg.split_ratio, seed)?;
            let (r, _) = bench_stage(&data, &manifest, &exps, &cfg, exec, &mut log)?;
            std::fs::create_dir_all(&out)?;
            std::fs::write(out.join("bench.csv"), r.to_csv())?;
            std::fs::write(out.join("split.json"), serde_json::to_vec_pretty(&manifest)?)?;
            print!("{}", r.to_markdown());
        }
        Cmd::Demo { out } => {
            let o = demo::run_demo(seed, &out, exec, &mut log)?;
            println!("{}", std::fs::read_to_string(&o.report_md)?);
        }
    }
    Ok(())
}

fn write_or_print(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => Ok(std::fs::write(p, text)?),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
