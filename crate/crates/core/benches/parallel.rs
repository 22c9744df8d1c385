//! Sequential vs rayon execution of the three data-parallel hot paths:
//! scene mining, metric evaluation and batched loss/gradient.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;
use surfcast::bench::{cv_modes, evaluate, synth_airport, synth_corpus, AirportSize, Displacement, TrafficConfig};
use surfcast::model::{batch_loss_and_grad, LossConfig, Model, ModelConfig, SceneInput};
use surfcast::scenes::SceneConfig;
use surfcast::scorer::{ScorerConfig, Strategy};
use surfcast::Exec;

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn bench_exec(c: &mut Criterion) {
    let cfg = SceneConfig { patch: 16, ..SceneConfig::default() };
    let traffic = TrafficConfig { duration_s: 900, ..TrafficConfig::default() };
    let corpus = synth_corpus(synth_airport(3, AirportSize::Small), 1, &traffic, &cfg, 3).unwrap();
    let scorer = ScorerConfig::default();
    let scenes = corpus.mine(|_| true, &scorer, &cfg, Strategy::Critical, 3, Exec::Parallel).unwrap();

    let mut g = c.benchmark_group("mine");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| corpus.mine(|_| true, &scorer, &cfg, Strategy::Critical, 3, exec).unwrap().len())
        });
    }
    g.finish();

    let mut g = c.benchmark_group("evaluate_cv");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| evaluate("B", black_box(&scenes), cfg.future, Displacement::Planar, exec, |s| cv_modes(s, cfg.future)).unwrap().made)
        });
    }
    g.finish();

    let mc = ModelConfig::tiny(cfg.future);
    let model = Model::new(mc, 3).unwrap();
    let inputs: Vec<SceneInput> = scenes.iter().take(16).map(|s| SceneInput::from_scene(s, &mc).unwrap()).collect();
    let batch: Vec<usize> = (0..inputs.len()).collect();
    let loss = LossConfig::default();
    let mut g = c.benchmark_group("loss_and_grad");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| batch_loss_and_grad(&model, &inputs, &batch, &loss, exec).unwrap().0));
    }
    g.finish();
}

criterion_group!(benches, bench_exec);
criterion_main!(benches);
