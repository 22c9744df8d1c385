//! Evaluation and synthetic data.

pub mod baseline;
pub mod benchmark;
pub mod corpus;
pub mod fixtures;
pub mod metrics;
pub mod split;
pub mod synth;
pub mod traffic;

pub use benchmark::{parse_experiments, run_benchmark, run_benchmark_with, train_on, model_modes, evaluate_rows, AirportScenes, BenchConfig, BenchError, BenchReport, Experiment, Method, ResultRow};
pub use baseline::{constant_velocity_baseline, cv_modes, CvPrediction};
pub use metrics::{evaluate, min_ade, min_fde, scene_future, Displacement, EvalResult, MetricError, SceneRecord};
pub use split::{split_days, train_count, DaySplit, SplitError, SplitManifest};
pub use synth::{synth_airport, synth_airport_with, AirportSize, SegKind, SynthAirport, Topology};
pub use traffic::{day_tracks, generate_day, to_reports, Behavior, SynthDay, SynthTrack, TrafficConfig};
pub use corpus::{plant_stationary, synth_corpus, AirportCorpus, DayScenes};
