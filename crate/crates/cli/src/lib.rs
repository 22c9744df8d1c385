//! Pipeline stages behind the `surfcast` binary. Each stage reads and writes
//! files so stages can run separately; [`demo::run_demo`] chains all of them.

pub mod demo;
pub mod plot;

use anyhow::{bail, ensure, Context, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use surfcast::airmap::{compile, AirportGraph, CompileOptions, RoutingGraph, TagRules};
use surfcast::bench::{
    cv_modes, evaluate, model_modes, run_benchmark_with, split_days, synth_airport_with, synth_corpus, AirportScenes, AirportSize,
    BenchConfig, BenchReport, Experiment, Method, ResultRow, SplitManifest, Topology, TrafficConfig,
};
use surfcast::ingest::{build_tracks, filter_airspace, parse_track_csv, AgentTrack, GeoFence, ResampleConfig};
use surfcast::model::{adam_for, train, Checkpoint, Model, ModelConfig, SceneInput};
use surfcast::scenes::{config_hash, list_shards, mine_scenes, read_shard, window_scenes, Scene, SceneConfig, SceneMap, ShardIndex, ShardWriter, FORMAT_VERSION};
use surfcast::scorer::{mix_seed, selection_stats, ScorerConfig, StatsRow, Strategy};
use surfcast::Exec;

/// Every tunable of the pipeline, loadable from JSON. Missing fields take defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub resample: ResampleConfig,
    pub compile: CompileOptions,
    pub scene: SceneConfig,
    pub scorer: ScorerConfig,
    pub split_ratio: f64,
    pub traffic: TrafficConfig,
    pub synthetic_days: usize,
    pub bench: BenchConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            resample: ResampleConfig::default(),
            compile: CompileOptions::default(),
            scene: SceneConfig::default(),
            scorer: ScorerConfig::default(),
            split_ratio: 0.8,
            traffic: TrafficConfig::default(),
            synthetic_days: 5,
            bench: BenchConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let bytes = fs::read(p).with_context(|| format!("reading {}", p.display()))?;
                serde_json::from_slice(&bytes).with_context(|| format!("parsing {}", p.display()))
            }
        }
    }

    /// Hash of everything that shapes a mined scene. Recorded in shards and checkpoints.
    pub fn scene_hash(&self) -> String {
        config_hash(&(&self.scene, &self.scorer))
    }

    pub fn resample_hash(&self) -> String {
        config_hash(&self.resample)
    }
}

/// `LAT,LON`
pub fn parse_datum(s: &str) -> Result<(f64, f64)> {
    let (a, b) = s.split_once(',').context("datum must be LAT,LON")?;
    Ok((a.trim().parse()?, b.trim().parse()?))
}

/// Parallel executor sized from `SURFCAST_THREADS`; sequential when built without the `parallel` feature.
pub fn exec() -> Exec {
    surfcast::exec::init_threads_from_env();
    Exec::Parallel
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn files_with_suffix(dir: &Path, suffix: &str) -> Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.ends_with(suffix)))
        .collect();
    out.sort();
    Ok(out)
}

pub fn compile_map(input: &Path, output: &Path, opts: &CompileOptions) -> Result<AirportGraph> {
    let raw = RoutingGraph::from_json(&fs::read(input).with_context(|| format!("reading {}", input.display()))?)?;
    let graph = compile(&raw, &TagRules::default(), opts)?;
    write(output, graph.to_json())?;
    Ok(graph)
}

pub fn load_map(path: &Path) -> Result<AirportGraph> {
    Ok(AirportGraph::from_json(&fs::read(path).with_context(|| format!("reading {}", path.display()))?)?)
}

/// One day of resampled tracks at one airport.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackFile {
    pub airport_id: String,
    pub day_id: String,
    pub config_hash: String,
    pub tracks: Vec<AgentTrack>,
}

pub const TRACKS_SUFFIX: &str = ".tracks.json";

impl TrackFile {
    pub fn file_name(&self) -> String {
        format!("{}_{}{TRACKS_SUFFIX}", self.airport_id, self.day_id)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub rows: usize,
    pub malformed: usize,
    pub outside_airspace: usize,
    pub tracks: usize,
    pub rejected_agents: usize,
}

/// Parses one day's CSV, applies the fence, resamples to 1 Hz and writes a [`TrackFile`].
pub fn ingest_csv(csv: &Path, fence: Option<&GeoFence>, cfg: &PipelineConfig, airport_id: &str, day_id: &str, out_dir: &Path) -> Result<IngestSummary> {
    let parsed = parse_track_csv(&fs::read(csv).with_context(|| format!("reading {}", csv.display()))?)?;
    let rows = parsed.reports.len() + parsed.malformed.len();
    let kept = match fence {
        Some(f) => filter_airspace(&parsed.reports, f),
        None => parsed.reports.clone(),
    };
    let (tracks, rejected) = build_tracks(&kept, &cfg.resample);
    let summary = IngestSummary {
        rows,
        malformed: parsed.malformed.len(),
        outside_airspace: parsed.reports.len() - kept.len(),
        tracks: tracks.len(),
        rejected_agents: rejected.len(),
    };
    let file = TrackFile { airport_id: airport_id.into(), day_id: day_id.into(), config_hash: cfg.resample_hash(), tracks };
    write(&out_dir.join(file.file_name()), serde_json::to_vec(&file)?)?;
    Ok(summary)
}

pub fn load_tracks(dir: &Path, cfg: &PipelineConfig) -> Result<Vec<TrackFile>> {
    let mut out = Vec::new();
    for p in files_with_suffix(dir, TRACKS_SUFFIX)? {
        let f: TrackFile = serde_json::from_slice(&fs::read(&p)?).with_context(|| format!("parsing {}", p.display()))?;
        ensure!(
            f.config_hash == cfg.resample_hash(),
            "{} was resampled with config {}, current config is {}",
            p.display(),
            f.config_hash,
            cfg.resample_hash()
        );
        out.push(f);
    }
    ensure!(!out.is_empty(), "no track files in {}", dir.display());
    Ok(out)
}

fn check_datum(graph: &AirportGraph, tracks: &TrackFile) -> Result<()> {
    for t in &tracks.tracks {
        if let (Some(a), Some(b)) = (graph.meta.datum, t.origin_datum) {
            ensure!(a == b, "tracks of {} are projected around {b:?} but the map around {a:?}", tracks.day_id);
        }
    }
    Ok(())
}

/// Windows and mines every track file into one shard per (airport, day).
/// Day file `i` (sorted by name) is mined with `mix_seed(seed, i)`.
pub fn mine(tracks_dir: &Path, map: &AirportGraph, out_dir: &Path, seed: u64, strategy: Strategy, cfg: &PipelineConfig, exec: Exec) -> Result<Vec<ShardIndex>> {
    let files = load_tracks(tracks_dir, cfg)?;
    let scene_map = SceneMap::new(map)?;
    let mut out = Vec::new();
    for (i, f) in files.iter().enumerate() {
        check_datum(map, f)?;
        let raws = window_scenes(&f.tracks, &cfg.scene, &f.airport_id, &f.day_id);
        let mined = mine_scenes(&raws, &scene_map, &cfg.scorer, &cfg.scene, strategy, mix_seed(seed, i as u64), exec)?;
        let index = ShardIndex {
            count: 0,
            config_hash: cfg.scene_hash(),
            seed,
            strategy,
            airport_id: f.airport_id.clone(),
            day_id: f.day_id.clone(),
            format_version: FORMAT_VERSION,
        };
        let mut w = ShardWriter::create(out_dir, &format!("{}_{}", f.airport_id, f.day_id), index)?;
        for s in &mined.scenes {
            w.append(s)?;
        }
        out.push(w.finish()?);
    }
    Ok(out)
}

/// Selection statistics per airport over every raw window of the track files.
pub fn score_stats(tracks_dir: &Path, map: &AirportGraph, strategy: Strategy, seed: u64, cfg: &PipelineConfig) -> Result<Vec<StatsRow>> {
    let files = load_tracks(tracks_dir, cfg)?;
    let mut by_airport: BTreeMap<&str, Vec<_>> = BTreeMap::new();
    for f in &files {
        check_datum(map, f)?;
        by_airport.entry(&f.airport_id).or_default().extend(window_scenes(&f.tracks, &cfg.scene, &f.airport_id, &f.day_id));
    }
    let ctx = SceneMap::new(map)?.context;
    by_airport
        .into_iter()
        .map(|(airport, raws)| {
            let stats = selection_stats(&raws, cfg.scene.history, cfg.scene.k, &ctx, &cfg.scorer, strategy, seed)?;
            Ok(StatsRow { airport: airport.to_string(), strategy, stats })
        })
        .collect()
}

/// Scenes of every shard in `dir`, grouped by airport and day. All shards must
/// carry `expected_hash`.
pub fn load_shards(dir: &Path, expected_hash: &str) -> Result<Vec<AirportScenes>> {
    let mut by_airport: BTreeMap<String, AirportScenes> = BTreeMap::new();
    let paths = list_shards(dir)?;
    ensure!(!paths.is_empty(), "no shards in {}", dir.display());
    for p in paths {
        let (index, scenes) = read_shard(&p)?;
        ensure!(
            index.config_hash == expected_hash,
            "{} was mined with config {}, expected {expected_hash}",
            p.display(),
            index.config_hash
        );
        let a = by_airport.entry(index.airport_id.clone()).or_insert_with(|| AirportScenes { airport_id: index.airport_id.clone(), days: BTreeMap::new() });
        a.days.entry(index.day_id).or_default().extend(scenes);
    }
    Ok(by_airport.into_values().collect())
}

pub fn manifest_for(data: &[AirportScenes], ratio: f64, seed: u64) -> Result<SplitManifest> {
    let days = data.iter().map(|a| (a.airport_id.clone(), a.days.keys().cloned().collect())).collect();
    Ok(split_days(&days, ratio, seed)?)
}

pub fn load_manifest(path: &Path) -> Result<SplitManifest> {
    Ok(serde_json::from_slice(&fs::read(path).with_context(|| format!("reading {}", path.display()))?)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Train,
    Test,
}

/// Scenes of the chosen side of the split; every day when no manifest is given.
pub fn select_days(data: &[AirportScenes], manifest: Option<&SplitManifest>, side: Side) -> Result<Vec<(String, Vec<Scene>)>> {
    data.iter()
        .map(|a| {
            let scenes = match manifest {
                None => a.days.values().flatten().cloned().collect(),
                Some(m) => {
                    let split = m.airports.get(&a.airport_id).with_context(|| format!("airport {} missing from split manifest", a.airport_id))?;
                    let days = if side == Side::Train { &split.train_days } else { &split.test_days };
                    days.iter().filter_map(|d| a.days.get(d)).flatten().cloned().collect()
                }
            };
            Ok((a.airport_id.clone(), scenes))
        })
        .collect()
}

pub const META_SCENE_HASH: &str = "scene_config_hash";
pub const META_AIRPORTS: &str = "airports";

/// Trains on the training days of every shard and saves a checkpoint.
pub fn train_stage(
    shards: &Path,
    manifest: Option<&SplitManifest>,
    cfg: &PipelineConfig,
    model_cfg: ModelConfig,
    steps: usize,
    seed: u64,
    out: &Path,
    exec: Exec,
    log: &mut dyn FnMut(usize, f64),
) -> Result<Checkpoint> {
    let data = load_shards(shards, &cfg.scene_hash())?;
    let picked = select_days(&data, manifest, Side::Train)?;
    let scenes: Vec<&Scene> = picked.iter().flat_map(|(_, s)| s).collect();
    ensure!(!scenes.is_empty(), "no training scenes");
    let inputs = scenes.iter().map(|s| SceneInput::from_scene(s, &model_cfg)).collect::<Result<Vec<_>, _>>()?;
    let mut model = Model::new(model_cfg, seed)?;
    let tc = surfcast::model::TrainConfig { steps, seed, ..cfg.bench.train };
    let mut adam = adam_for(&model, &tc);
    train(&mut model, &mut adam, &inputs, &tc, exec, log)?;
    let mut meta = BTreeMap::new();
    meta.insert(META_SCENE_HASH.into(), cfg.scene_hash());
    meta.insert(META_AIRPORTS.into(), picked.iter().map(|(a, _)| a.as_str()).collect::<Vec<_>>().join(","));
    meta.insert("train_config_hash".into(), config_hash(&tc));
    meta.insert("model_config_hash".into(), config_hash(&model_cfg));
    let ckpt = Checkpoint { model, adam, seed, meta };
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    ckpt.save(out)?;
    Ok(ckpt)
}

/// Model and constant-velocity rows for the test days of every shard.
pub fn eval_stage(ckpt: &Checkpoint, shards: &Path, manifest: Option<&SplitManifest>, horizon: usize, cfg: &PipelineConfig, exec: Exec) -> Result<BenchReport> {
    let hash = ckpt.meta.get(META_SCENE_HASH).context("checkpoint does not record the scene config it was trained on")?;
    ensure!(*hash == cfg.scene_hash(), "checkpoint was trained on scene config {hash}, current config is {}", cfg.scene_hash());
    ensure!(horizon <= ckpt.model.config.future, "horizon {horizon} exceeds the model's future {}", ckpt.model.config.future);
    let data = load_shards(shards, hash)?;
    let trained_on: Vec<&str> = ckpt.meta.get(META_AIRPORTS).map(|s| s.split(',').collect()).unwrap_or_default();
    let mut report = BenchReport::default();
    let disp = cfg.bench.displacement;
    for (airport, scenes) in select_days(&data, manifest, Side::Test)? {
        if scenes.is_empty() {
            continue;
        }
        let seen = trained_on.contains(&airport.as_str());
        let m = evaluate(&airport, &scenes, horizon, disp, exec, model_modes(&ckpt.model, &cfg.bench.train.loss))?;
        let cv = evaluate(&airport, &scenes, horizon, disp, exec, |s| cv_modes(s, horizon))?;
        for (method, r) in [(Method::Model, m), (Method::ConstantVelocity, cv)] {
            report.rows.push(ResultRow {
                experiment: "eval".into(),
                method,
                airport_id: airport.clone(),
                seen,
                horizon,
                made: r.made,
                mfde: r.mfde,
                scenes: r.scene_count,
                agents: r.agent_count,
            });
        }
    }
    ensure!(!report.rows.is_empty(), "no test scenes");
    Ok(report)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Md,
    Csv,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "md" | "markdown" => Ok(Self::Md),
            "csv" => Ok(Self::Csv),
            _ => Err(format!("unknown format {s:?} (md | csv)")),
        }
    }
}

/// Merges every result CSV in `dir` (sorted by name).
pub fn report(dir: &Path, format: ReportFormat) -> Result<String> {
    let mut merged = BenchReport::default();
    let files = files_with_suffix(dir, ".csv")?;
    for p in &files {
        let text = fs::read_to_string(p)?;
        if !text.starts_with("experiment,") {
            continue;
        }
        merged.extend(BenchReport::from_csv(&text).with_context(|| format!("parsing {}", p.display()))?);
    }
    ensure!(!merged.rows.is_empty(), "no result files in {}", dir.display());
    Ok(match format {
        ReportFormat::Md => merged.to_markdown(),
        ReportFormat::Csv => merged.to_csv(),
    })
}

pub fn size_from_str(s: &str) -> Result<AirportSize> {
    match s {
        "small" => Ok(AirportSize::Small),
        "medium" => Ok(AirportSize::Medium),
        _ => bail!("unknown synthetic size {s:?} (small | medium)"),
    }
}

/// Three seeded synthetic airports `APT0..APT2`. Medium sets mix the runway layouts.
pub fn synthetic_airports(size: AirportSize, seed: u64) -> Vec<surfcast::bench::SynthAirport> {
    let topologies = match size {
        AirportSize::Small => [Topology::Single; 3],
        AirportSize::Medium => [Topology::Parallel, Topology::Intersecting, Topology::Parallel],
    };
    topologies.iter().enumerate().map(|(i, &t)| synth_airport_with(mix_seed(seed, 100 + i as u64), size, t, &format!("APT{i}"))).collect()
}

/// Simulates and mines `cfg.synthetic_days` days at each airport, in memory.
pub fn synthetic_scenes(airports: Vec<surfcast::bench::SynthAirport>, cfg: &PipelineConfig, seed: u64, exec: Exec) -> Result<Vec<AirportScenes>> {
    airports
        .into_iter()
        .enumerate()
        .map(|(i, a)| {
            let corpus = synth_corpus(a, cfg.synthetic_days, &cfg.traffic, &cfg.scene, mix_seed(seed, i as u64))?;
            let mut days = BTreeMap::new();
            for (d, day) in corpus.days.iter().enumerate() {
                let mined = mine_scenes(&day.raws, &corpus.map, &cfg.scorer, &cfg.scene, Strategy::Critical, mix_seed(seed, d as u64), exec)?;
                days.insert(day.day_id.clone(), mined.scenes);
            }
            Ok(AirportScenes { airport_id: corpus.airport.id.clone(), days })
        })
        .collect()
}

/// A trained benchmark model with the airports it was evaluated on.
pub struct TrainedModel {
    pub experiment: Experiment,
    pub airports: Vec<String>,
    pub model: Model,
}

pub fn bench_stage(
    data: &[AirportScenes],
    manifest: &SplitManifest,
    experiments: &[Experiment],
    cfg: &PipelineConfig,
    exec: Exec,
    log: &mut dyn FnMut(&str),
) -> Result<(BenchReport, Vec<TrainedModel>)> {
    let mut models = Vec::new();
    let report = run_benchmark_with(data, manifest, experiments, &cfg.bench, exec, log, &mut |e, ids, m| {
        models.push(TrainedModel { experiment: *e, airports: ids.to_vec(), model: m.clone() })
    })?;
    Ok((report, models))
}
