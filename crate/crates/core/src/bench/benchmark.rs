//! SingleAirport / MultiAirport benchmark sweeps and their report tables.

use super::baseline::cv_modes;
use super::metrics::{evaluate, Displacement, EvalResult, MetricError};
use super::split::SplitManifest;
use crate::exec::Exec;
use crate::model::{adam_for, train, LossConfig, Model, ModelConfig, ModelError, SceneInput, TrainConfig};
use crate::scenes::Scene;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("no scenes for airport {0}")]
    MissingShards(String),
    #[error("airport {0} is not in the split manifest")]
    NotInManifest(String),
    #[error("no training scenes for experiment {0}")]
    NoTrainingScenes(String),
    #[error("experiment {0} needs more airports than the {1} available")]
    TooFewAirports(String, usize),
    #[error("horizon {horizon} exceeds the model's future {future}")]
    Horizon { horizon: usize, future: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("report: {0}")]
    Report(String),
}

/// Mined scenes of one airport grouped by day.
#[derive(Clone, Debug, Default)]
pub struct AirportScenes {
    pub airport_id: String,
    pub days: BTreeMap<String, Vec<Scene>>,
}

impl AirportScenes {
    fn collect<'a>(&'a self, days: impl IntoIterator<Item = &'a String>) -> Vec<Scene> {
        days.into_iter().filter_map(|d| self.days.get(d)).flatten().cloned().collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Experiment {
    /// Train and test per airport.
    Single,
    /// Train on the first `seen` airports (sorted by id), test on all.
    Multi { seen: usize },
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Experiment::Single => f.write_str("single"),
            Experiment::Multi { seen } => write!(f, "multi:seen={seen}"),
        }
    }
}

impl FromStr for Experiment {
    type Err = String;
    /// `single`, `multi:seen=N` or `multi:seen=NofM`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim().to_ascii_lowercase();
        if s == "single" {
            return Ok(Experiment::Single);
        }
        let rest = s.strip_prefix("multi:seen=").ok_or_else(|| format!("unknown experiment {s:?} (single | multi:seen=NofM)"))?;
        let n = rest.split("of").next().unwrap_or_default();
        let seen: usize = n.parse().map_err(|_| format!("bad seen count in {s:?}"))?;
        if seen == 0 {
            return Err("multi needs at least one seen airport".into());
        }
        Ok(Experiment::Multi { seen })
    }
}

/// Comma-separated experiment list.
pub fn parse_experiments(s: &str) -> Result<Vec<Experiment>, String> {
    s.split(',').filter(|p| !p.trim().is_empty()).map(str::parse).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub horizons: Vec<usize>,
    pub displacement: Displacement,
    /// Cap on training scenes per experiment (seeded subsample); 0 keeps all.
    pub max_train_scenes: usize,
    pub model_seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::tiny(50),
            train: TrainConfig::default(),
            horizons: vec![20, 50],
            displacement: Displacement::Planar,
            max_train_scenes: 0,
            model_seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Model,
    ConstantVelocity,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Model => "model",
            Method::ConstantVelocity => "constant_velocity",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub method: Method,
    pub airport_id: String,
    pub seen: bool,
    pub horizon: usize,
    pub made: f64,
    pub mfde: f64,
    pub scenes: usize,
    pub agents: usize,
}

impl ResultRow {
    fn new(experiment: &Experiment, method: Method, seen: bool, r: &EvalResult) -> Self {
        Self {
            experiment: experiment.to_string(),
            method,
            airport_id: r.airport_id.clone(),
            seen,
            horizon: r.horizon,
            made: r.made,
            mfde: r.mfde,
            scenes: r.scene_count,
            agents: r.agent_count,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub rows: Vec<ResultRow>,
}

fn cell(made: f64, mfde: f64) -> String {
    format!("{made:.2} / {mfde:.2}")
}

impl BenchReport {
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r).expect("row serializes");
        }
        String::from_utf8(w.into_inner().expect("in-memory writer")).expect("csv is utf-8")
    }

    pub fn from_csv(text: &str) -> Result<Self, BenchError> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let rows = r.deserialize().collect::<Result<Vec<ResultRow>, _>>().map_err(|e| BenchError::Report(e.to_string()))?;
        Ok(Self { rows })
    }

    pub fn extend(&mut self, other: BenchReport) {
        self.rows.extend(other.rows);
    }

    /// One table per experiment: a row per (method, horizon), a column per airport
    /// plus `Avg`. Cells read `mADE / mFDE` in metres; `*` marks airports unseen in training.
    pub fn to_markdown(&self) -> String {
        let mut experiments: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !experiments.contains(&r.experiment.as_str()) {
                experiments.push(&r.experiment);
            }
        }
        let mut out = String::new();
        for exp in experiments {
            let rows: Vec<&ResultRow> = self.rows.iter().filter(|r| r.experiment == exp).collect();
            let mut airports: BTreeMap<&str, bool> = BTreeMap::new();
            for r in &rows {
                airports.insert(&r.airport_id, r.seen);
            }
            out.push_str(&format!("### {exp}\n\n| Method | Horizon |"));
            for (a, seen) in &airports {
                out.push_str(&format!(" {a}{} |", if *seen { "" } else { "*" }));
            }
            out.push_str(" Avg |\n|---|---|");
            out.push_str(&"---|".repeat(airports.len() + 1));
            out.push('\n');
            let mut keys: Vec<(Method, usize)> = rows.iter().map(|r| (r.method, r.horizon)).collect();
            keys.sort();
            keys.dedup();
            for (method, horizon) in keys {
                out.push_str(&format!("| {} | {horizon} |", method.label()));
                let (mut sa, mut sf, mut n) = (0.0, 0.0, 0usize);
                for a in airports.keys() {
                    match rows.iter().find(|r| r.method == method && r.horizon == horizon && r.airport_id == *a) {
                        Some(r) => {
                            out.push_str(&format!(" {} |", cell(r.made, r.mfde)));
                            sa += r.made;
                            sf += r.mfde;
                            n += 1;
                        }
                        None => out.push_str(" - |"),
                    }
                }
                if n > 0 {
                    out.push_str(&format!(" {} |\n", cell(sa / n as f64, sf / n as f64)));
                } else {
                    out.push_str(" - |\n");
                }
            }
            if airports.values().any(|s| !s) {
                out.push_str("\n\\* unseen during training\n");
            }
            out.push('\n');
        }
        out
    }

    /// Per-airport mean of mADE and mFDE for one table row.
    pub fn average(&self, experiment: &str, method: Method, horizon: usize) -> Option<(f64, f64)> {
        let rows: Vec<&ResultRow> = self.rows.iter().filter(|r| r.experiment == experiment && r.method == method && r.horizon == horizon).collect();
        if rows.is_empty() {
            return None;
        }
        let n = rows.len() as f64;
        Some((rows.iter().map(|r| r.made).sum::<f64>() / n, rows.iter().map(|r| r.mfde).sum::<f64>() / n))
    }
}

/// Trains a fresh model on `scenes`.
pub fn train_on(scenes: &[Scene], cfg: &BenchConfig, exec: Exec, log: &mut dyn FnMut(usize, f64)) -> Result<Model, BenchError> {
    let mut scenes: Vec<&Scene> = scenes.iter().collect();
    if cfg.max_train_scenes > 0 && scenes.len() > cfg.max_train_scenes {
        scenes.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.train.seed));
        scenes.truncate(cfg.max_train_scenes);
    }
    let inputs = scenes.iter().map(|s| SceneInput::from_scene(s, &cfg.model)).collect::<Result<Vec<_>, _>>()?;
    let mut model = Model::new(cfg.model, cfg.model_seed)?;
    let mut adam = adam_for(&model, &cfg.train);
    train(&mut model, &mut adam, &inputs, &cfg.train, exec, |s, l| log(s, l))?;
    Ok(model)
}

/// Mode-mean trajectories of `model` in the ego frame, for [`evaluate`].
pub fn model_modes<'a>(model: &'a Model, loss: &LossConfig) -> impl Fn(&Scene) -> Vec<Vec<Vec<[f64; 3]>>> + Sync + Send + 'a {
    let loss = *loss;
    move |s: &Scene| {
        let p = model.predict(s, &loss).expect("scene matches the model config");
        p.trajectories.into_iter().map(|modes| modes.into_iter().map(|m| m.ego).collect()).collect()
    }
}

/// Model and constant-velocity rows for one airport's test scenes.
pub fn evaluate_rows(
    experiment: &Experiment,
    airport_id: &str,
    seen: bool,
    model: &Model,
    test: &[Scene],
    cfg: &BenchConfig,
    exec: Exec,
) -> Result<Vec<ResultRow>, BenchError> {
    let mut rows = Vec::new();
    for &h in &cfg.horizons {
        if h > cfg.model.future {
            return Err(BenchError::Horizon { horizon: h, future: cfg.model.future });
        }
        let m = evaluate(airport_id, test, h, cfg.displacement, exec, model_modes(model, &cfg.train.loss))?;
        rows.push(ResultRow::new(experiment, Method::Model, seen, &m));
        let cv = evaluate(airport_id, test, h, cfg.displacement, exec, |s| cv_modes(s, h))?;
        rows.push(ResultRow::new(experiment, Method::ConstantVelocity, seen, &cv));
    }
    Ok(rows)
}

/// Runs every experiment. `log` receives progress lines.
pub fn run_benchmark(
    data: &[AirportScenes],
    manifest: &SplitManifest,
    experiments: &[Experiment],
    cfg: &BenchConfig,
    exec: Exec,
    log: &mut dyn FnMut(&str),
) -> Result<BenchReport, BenchError> {
    run_benchmark_with(data, manifest, experiments, cfg, exec, log, &mut |_, _, _| {})
}

/// [`run_benchmark`], handing each trained model to `on_model` with its experiment
/// and the ids of the airports it is evaluated on.
pub fn run_benchmark_with(
    data: &[AirportScenes],
    manifest: &SplitManifest,
    experiments: &[Experiment],
    cfg: &BenchConfig,
    exec: Exec,
    log: &mut dyn FnMut(&str),
    on_model: &mut dyn FnMut(&Experiment, &[String], &Model),
) -> Result<BenchReport, BenchError> {
    let mut airports: Vec<&AirportScenes> = data.iter().collect();
    airports.sort_by(|a, b| a.airport_id.cmp(&b.airport_id));
    for a in &airports {
        if a.days.values().all(Vec::is_empty) {
            return Err(BenchError::MissingShards(a.airport_id.clone()));
        }
        if !manifest.airports.contains_key(&a.airport_id) {
            return Err(BenchError::NotInManifest(a.airport_id.clone()));
        }
    }
    if let Some(missing) = manifest.airports.keys().find(|id| !airports.iter().any(|a| &a.airport_id == *id)) {
        return Err(BenchError::MissingShards(missing.clone()));
    }
    let split = |a: &AirportScenes| &manifest.airports[&a.airport_id];
    let mut report = BenchReport::default();
    for exp in experiments {
        let trained: Vec<(Vec<&AirportScenes>, Vec<Scene>)> = match *exp {
            Experiment::Single => airports.iter().map(|a| (vec![*a], a.collect(&split(a).train_days))).collect(),
            Experiment::Multi { seen } => {
                if seen > airports.len() {
                    return Err(BenchError::TooFewAirports(exp.to_string(), airports.len()));
                }
                let train: Vec<Scene> = airports[..seen].iter().flat_map(|a| a.collect(&split(a).train_days)).collect();
                vec![(airports.clone(), train)]
            }
        };
        for (targets, train_scenes) in trained {
            if train_scenes.is_empty() {
                return Err(BenchError::NoTrainingScenes(exp.to_string()));
            }
            log(&format!("{exp}: training on {} scenes", train_scenes.len()));
            let every = (cfg.train.steps / 10).max(1);
            let model = train_on(&train_scenes, cfg, exec, &mut |s, l| {
                if (s + 1) % every == 0 {
                    log(&format!("{exp}: step {} loss {l:.4}", s + 1));
                }
            })?;
            for a in &targets {
                let seen = match *exp {
                    Experiment::Single => true,
                    Experiment::Multi { seen } => airports[..seen].iter().any(|s| s.airport_id == a.airport_id),
                };
                let test = a.collect(&split(a).test_days);
                if test.is_empty() {
                    return Err(BenchError::MissingShards(a.airport_id.clone()));
                }
                log(&format!("{exp}: evaluating {} on {} scenes", a.airport_id, test.len()));
                report.rows.extend(evaluate_rows(exp, &a.airport_id, seen, &model, &test, cfg, exec)?);
            }
            let ids: Vec<String> = targets.iter().map(|a| a.airport_id.clone()).collect();
            on_model(exp, &ids, &model);
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::fixtures::random_scene;
    use crate::bench::split::split_days;
    use rand::SeedableRng;

    fn data(n_airports: usize) -> Vec<AirportScenes> {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        (0..n_airports)
            .map(|a| AirportScenes {
                airport_id: format!("AP{a}"),
                days: (0..3).map(|d| (format!("day{d:02}"), (0..2).map(|_| random_scene(&mut rng, 3, 4, 6, 4)).collect())).collect(),
            })
            .collect()
    }

    fn cfg() -> BenchConfig {
        BenchConfig { model: ModelConfig::tiny(6), horizons: vec![3, 6], train: TrainConfig { steps: 3, ..TrainConfig::default() }, ..BenchConfig::default() }
    }

    fn manifest(d: &[AirportScenes]) -> SplitManifest {
        let days = d.iter().map(|a| (a.airport_id.clone(), a.days.keys().cloned().collect())).collect();
        split_days(&days, 0.8, 1).unwrap()
    }

    #[test]
    fn experiment_parsing() {
        assert_eq!(parse_experiments("single,multi:seen=2of3").unwrap(), vec![Experiment::Single, Experiment::Multi { seen: 2 }]);
        assert_eq!("multi:seen=1".parse::<Experiment>().unwrap(), Experiment::Multi { seen: 1 });
        assert!("multi:seen=0of3".parse::<Experiment>().is_err());
        assert!("double".parse::<Experiment>().is_err());
    }

    #[test]
    fn multi_marks_unseen_airport() {
        let d = data(3);
        let r = run_benchmark(&d, &manifest(&d), &[Experiment::Multi { seen: 2 }], &cfg(), Exec::Sequential, &mut |_| {}).unwrap();
        let unseen: Vec<&str> = r.rows.iter().filter(|r| !r.seen).map(|r| r.airport_id.as_str()).collect();
        assert!(!unseen.is_empty() && unseen.iter().all(|a| *a == "AP2"));
        let md = r.to_markdown();
        assert!(md.contains("AP2* |") && md.contains("unseen"));
        assert_eq!(r.rows.len(), 3 * 2 * 2);
    }

    #[test]
    fn table_cells_and_average_column() {
        let d = data(2);
        let r = run_benchmark(&d, &manifest(&d), &[Experiment::Single], &cfg(), Exec::Sequential, &mut |_| {}).unwrap();
        let md = r.to_markdown();
        for row in &r.rows {
            assert!(md.contains(&cell(row.made, row.mfde)));
        }
        let (a, f) = r.average("single", Method::ConstantVelocity, 6).unwrap();
        let cv: Vec<&ResultRow> = r.rows.iter().filter(|x| x.method == Method::ConstantVelocity && x.horizon == 6).collect();
        assert_eq!(cv.len(), 2);
        assert!((a - (cv[0].made + cv[1].made) / 2.0).abs() < 1e-12);
        assert!((f - (cv[0].mfde + cv[1].mfde) / 2.0).abs() < 1e-12);
        let line = md.lines().find(|l| l.starts_with("| constant_velocity | 6 |")).unwrap();
        assert!(line.trim_end().ends_with(&format!("{} |", cell(a, f))));
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let d = data(2);
        let m = manifest(&d);
        let r = run_benchmark(&d, &m, &[Experiment::Single], &cfg(), Exec::Sequential, &mut |_| {}).unwrap();
        assert_eq!(BenchReport::from_csv(&r.to_csv()).unwrap(), r);
        assert!(matches!(run_benchmark(&d[..1], &m, &[Experiment::Single], &cfg(), Exec::Sequential, &mut |_| {}), Err(BenchError::MissingShards(a)) if a == "AP1"));
        assert!(matches!(run_benchmark(&d, &m, &[Experiment::Multi { seen: 3 }], &cfg(), Exec::Sequential, &mut |_| {}), Err(BenchError::TooFewAirports(..))));
    }
}
