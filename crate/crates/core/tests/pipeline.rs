use std::collections::BTreeMap;
use surfcast::bench::{synth_airport, synth_corpus, AirportSize, TrafficConfig};
use surfcast::model::{adam_for, train, Checkpoint, Model, ModelConfig, SceneInput, TrainConfig};
use surfcast::scenes::SceneConfig;
use surfcast::scorer::{ScorerConfig, Strategy};
use surfcast::Exec;

fn small_scenes() -> Vec<surfcast::scenes::Scene> {
    let cfg = SceneConfig { length: 24, history: 4, future: 20, k: 3, patch: 8, ..SceneConfig::default() };
    let traffic = TrafficConfig { duration_s: 900, ..TrafficConfig::default() };
    let corpus = synth_corpus(synth_airport(5, AirportSize::Small), 1, &traffic, &cfg, 5).unwrap();
    corpus.mine(|_| true, &ScorerConfig::default(), &cfg, Strategy::Critical, 5, Exec::Parallel).unwrap()
}

#[test]
fn sequential_and_parallel_mining_agree() {
    let cfg = SceneConfig { length: 24, history: 4, future: 20, k: 3, patch: 8, ..SceneConfig::default() };
    let traffic = TrafficConfig { duration_s: 600, ..TrafficConfig::default() };
    let corpus = synth_corpus(synth_airport(6, AirportSize::Small), 1, &traffic, &cfg, 6).unwrap();
    let mine = |exec| corpus.mine(|_| true, &ScorerConfig::default(), &cfg, Strategy::Random, 6, exec).unwrap();
    let (a, b) = (mine(Exec::Sequential), mine(Exec::Parallel));
    assert!(!a.is_empty());
    assert_eq!(a, b);
}

#[test]
fn training_lowers_loss_and_checkpoint_round_trips() {
    let scenes: Vec<_> = small_scenes().into_iter().take(16).collect();
    assert_eq!(scenes.len(), 16);
    let mc = ModelConfig::tiny(20);
    let inputs: Vec<SceneInput> = scenes.iter().map(|s| SceneInput::from_scene(s, &mc).unwrap()).collect();
    let mut model = Model::new(mc, 1).unwrap();
    let tc = TrainConfig { steps: 40, seed: 1, adam: surfcast::model::AdamConfig { lr: 1e-3, ..Default::default() }, ..TrainConfig::default() };
    let mut adam = adam_for(&model, &tc);
    let report = train(&mut model, &mut adam, &inputs, &tc, Exec::Parallel, |_, _| {}).unwrap();
    assert!(report.losses.last().unwrap() < report.losses.first().unwrap());

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.ckpt");
    let ckpt = Checkpoint { model: model.clone(), adam, seed: 1, meta: BTreeMap::from([("k".into(), "v".into())]) };
    ckpt.save(&path).unwrap();
    let back = Checkpoint::load(&path).unwrap();
    assert_eq!(back.meta, ckpt.meta);
    assert_eq!(back.adam.step, 40);
    let p = model.predict(&scenes[0], &tc.loss).unwrap().gmm;
    let q = back.model.predict(&scenes[0], &tc.loss).unwrap().gmm;
    assert_eq!(p, q);
}

#[test]
fn truncated_checkpoint_is_rejected() {
    let model = Model::new(ModelConfig::tiny(4), 0).unwrap();
    let tc = TrainConfig::default();
    let ckpt = Checkpoint { adam: adam_for(&model, &tc), model, seed: 0, meta: BTreeMap::new() };
    let bytes = ckpt.to_bytes();
    assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 3]).is_err());
    assert!(Checkpoint::from_bytes(&bytes).is_ok());
}
