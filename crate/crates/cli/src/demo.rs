//! End-to-end run on synthetic airports: raw maps and track CSVs on disk, then
//! compile, ingest, mine, selection statistics, split, benchmark, report and plots.

use crate::plot::scene_svg;
use crate::{bench_stage, compile_map, ingest_csv, load_shards, manifest_for, mine, report, score_stats, synthetic_airports, write, PipelineConfig, ReportFormat};
use anyhow::{Context, Result};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use surfcast::airmap::CompileOptions;
use surfcast::bench::{generate_day, to_reports, AirportSize, BenchConfig, Experiment, SynthAirport, TrafficConfig};
use surfcast::ingest::{write_track_csv, GeoFence, ResampleConfig};
use surfcast::model::{ModelConfig, TrainConfig};
use surfcast::scenes::{Scene, SceneConfig};
use surfcast::scorer::{mix_seed, stats_csv, stats_markdown, Strategy};
use surfcast::Exec;

pub const DEMO_EXPERIMENTS: [Experiment; 2] = [Experiment::Single, Experiment::Multi { seen: 2 }];

/// Scene T60/H10/F50/K5/P16, five 30-minute days per airport, tiny model.
pub fn demo_config() -> PipelineConfig {
    PipelineConfig {
        scene: SceneConfig { patch: 16, ..SceneConfig::default() },
        traffic: TrafficConfig { duration_s: 1800, ..TrafficConfig::default() },
        synthetic_days: 5,
        bench: BenchConfig {
            model: ModelConfig::tiny(50),
            train: TrainConfig { steps: 600, batch_size: 32, ..TrainConfig::default() },
            max_train_scenes: 256,
            ..BenchConfig::default()
        },
        ..PipelineConfig::default()
    }
}

/// Polygon around the airport's nodes, `margin_deg` wide, capped at 2000 ft AGL.
pub fn airport_fence(a: &SynthAirport, margin_deg: f64) -> GeoFence {
    let (mut lat0, mut lat1, mut lon0, mut lon1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for n in a.raw.nodes.values() {
        lat0 = lat0.min(n.lat);
        lat1 = lat1.max(n.lat);
        lon0 = lon0.min(n.lon);
        lon1 = lon1.max(n.lon);
    }
    let (lat0, lat1, lon0, lon1) = (lat0 - margin_deg, lat1 + margin_deg, lon0 - margin_deg, lon1 + margin_deg);
    GeoFence { polygon: vec![[lat0, lon0], [lat0, lon1], [lat1, lon1], [lat1, lon0]], ceiling_agl_ft: 2000.0, ground_elevation_msl_ft: a.field_elevation_ft }
}

/// Summed step lengths of every agent after `t_o`.
fn future_motion(s: &Scene) -> f64 {
    s.agents
        .iter()
        .map(|row| row[s.t_o..].windows(2).filter(|w| w[0].valid && w[1].valid).map(|w| (w[1].x - w[0].x).hypot(w[1].y - w[0].y)).sum::<f64>())
        .sum()
}

pub struct DemoOutput {
    pub report_md: PathBuf,
    pub results_csv: PathBuf,
    pub stats_csv: PathBuf,
    pub plots: Vec<PathBuf>,
}

/// Runs the whole pipeline under `out`. Every file it writes depends only on `seed`.
pub fn run_demo(seed: u64, out: &Path, exec: Exec, log: &mut dyn FnMut(&str)) -> Result<DemoOutput> {
    let cfg = demo_config();
    let mut say = |msg: &str| log(msg);
    fs::create_dir_all(out)?;
    write(&out.join("config.json"), serde_json::to_vec_pretty(&cfg)?)?;
    let shards = out.join("shards");
    if shards.exists() {
        fs::remove_dir_all(&shards)?;
    }
    let airports = synthetic_airports(AirportSize::Small, seed);
    let mut stats_rows = Vec::new();
    for (i, a) in airports.iter().enumerate() {
        let raw_dir = out.join("raw").join(&a.id);
        write(&raw_dir.join("map.json"), a.raw.to_json())?;
        let fence = airport_fence(a, 0.02);
        write(&raw_dir.join("fence.json"), serde_json::to_vec_pretty(&fence)?)?;
        let map_path = out.join("maps").join(format!("{}.json", a.id));
        let map = compile_map(&raw_dir.join("map.json"), &map_path, &CompileOptions { datum: Some(a.datum), ..cfg.compile })?;
        say(&format!("{}: compiled map, {} nodes", a.id, map.nodes.len()));

        let acfg = PipelineConfig { resample: ResampleConfig { datum: Some(a.datum), ..cfg.resample }, ..cfg.clone() };
        let tracks_dir = out.join("tracks").join(&a.id);
        for d in 0..cfg.synthetic_days {
            let day_id = surfcast::bench::corpus::day_id(d);
            let day = generate_day(a, &cfg.traffic, mix_seed(mix_seed(seed, i as u64), d as u64), &day_id);
            let csv = raw_dir.join(format!("{day_id}.csv"));
            write(&csv, write_track_csv(&to_reports(a, &day))?)?;
            let s = ingest_csv(&csv, Some(&fence), &acfg, &a.id, &day_id, &tracks_dir)?;
            say(&format!("{}/{day_id}: {} rows, {} outside airspace, {} tracks", a.id, s.rows, s.outside_airspace, s.tracks));
        }
        let mined = mine(&tracks_dir, &map, &shards, seed, Strategy::Critical, &acfg, exec)?;
        say(&format!("{}: mined {} scenes", a.id, mined.iter().map(|m| m.count).sum::<usize>()));
        for strategy in [Strategy::Critical, Strategy::Random] {
            stats_rows.extend(score_stats(&tracks_dir, &map, strategy, seed, &acfg)?);
        }
    }
    let stats_csv_path = out.join("stats.csv");
    write(&stats_csv_path, stats_csv(&stats_rows))?;
    write(&out.join("stats.md"), stats_markdown(&stats_rows))?;

    let data = load_shards(&shards, &cfg.scene_hash())?;
    let manifest = manifest_for(&data, cfg.split_ratio, seed)?;
    write(&out.join("split.json"), serde_json::to_vec_pretty(&manifest)?)?;
    let (bench, models) = bench_stage(&data, &manifest, &DEMO_EXPERIMENTS, &cfg, exec, &mut |m| say(m))?;
    let results = out.join("results");
    let results_csv = results.join("bench.csv");
    write(&results_csv, bench.to_csv())?;
    let tables = report(&results, ReportFormat::Md)?;

    let mut plots = Vec::new();
    let multi = models.iter().find(|m| matches!(m.experiment, Experiment::Multi { .. })).context("multi-airport model missing")?;
    for a in &data {
        let test_day = manifest.airports[&a.airport_id].test_days.iter().next().context("no test day")?;
        let Some(scene) = a.days[test_day].iter().max_by(|x, y| future_motion(x).total_cmp(&future_motion(y))) else {
            continue;
        };
        let pred = multi.model.predict(scene, &cfg.bench.train.loss)?;
        let title = format!("{} {test_day} t={} ({})", a.airport_id, scene.start_frame, multi.experiment);
        let path = out.join("plots").join(format!("{}_{test_day}_{}.svg", a.airport_id, scene.start_frame));
        write(&path, scene_svg(scene, Some(&pred), cfg.scene.future, &title))?;
        plots.push(path);
    }

    let mut md = String::new();
    let _ = writeln!(md, "# Demo report\n");
    let _ = writeln!(md, "Seed {seed}. Scene config hash `{}`. Airports: {}.\n", cfg.scene_hash(), airports.iter().map(|a| a.id.as_str()).collect::<Vec<_>>().join(", "));
    let _ = writeln!(md, "## Split\n");
    for (id, s) in &manifest.airports {
        let _ = writeln!(md, "- {id}: train {}; test {}", s.train_days.iter().cloned().collect::<Vec<_>>().join(", "), s.test_days.iter().cloned().collect::<Vec<_>>().join(", "));
    }
    let _ = writeln!(md, "\n## Ego selection\n\n{}", stats_markdown(&stats_rows));
    let _ = writeln!(md, "## Forecasting (mADE / mFDE, m)\n\n{tables}");
    let _ = writeln!(md, "## Plots\n");
    for p in &plots {
        let rel = p.strip_prefix(out).unwrap_or(p);
        let _ = writeln!(md, "- ![{}]({})", rel.display(), rel.display());
    }
    let report_md = out.join("report.md");
    write(&report_md, md)?;
    say("done");
    Ok(DemoOutput { report_md, results_csv, stats_csv: stats_csv_path, plots })
}
