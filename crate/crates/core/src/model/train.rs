use super::graph::Gradients;
use super::network::{Model, SceneInput};
use super::optim::{Adam, AdamConfig};
use super::{LossConfig, ModelError};
use crate::exec::Exec;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub steps: usize,
    /// Scenes per step; 0 means the full set.
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub loss: LossConfig,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { steps: 100, batch_size: 0, adam: AdamConfig::default(), loss: LossConfig::default(), seed: 0 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean batch loss before each update.
    pub losses: Vec<f64>,
}

/// Scenes with at least one valid future step.
pub fn trainable(inputs: &[SceneInput]) -> Vec<usize> {
    (0..inputs.len()).filter(|&i| inputs[i].future_mask.iter().any(|&m| m)).collect()
}

/// Mean loss and gradient over `batch`. Per-scene gradients are summed in batch order.
pub fn batch_loss_and_grad(model: &Model, inputs: &[SceneInput], batch: &[usize], loss: &LossConfig, exec: Exec) -> Result<(f64, Gradients), ModelError> {
    let results = exec.map(batch, |&i| model.loss_and_grad(&inputs[i], loss));
    let mut total = Gradients::zeros_like(&model.params);
    let mut value = 0.0;
    for r in results {
        let (rep, g) = r?;
        value += rep.total;
        total.add_assign(&g);
    }
    let n = batch.len().max(1) as f64;
    total.scale(1.0 / n);
    Ok((value / n, total))
}

/// Runs `cfg.steps` Adam updates. `on_step(step, loss)` is called after each update.
pub fn train(
    model: &mut Model,
    adam: &mut Adam,
    inputs: &[SceneInput],
    cfg: &TrainConfig,
    exec: Exec,
    mut on_step: impl FnMut(usize, f64),
) -> Result<TrainReport, ModelError> {
    cfg.loss.validate()?;
    let pool = trainable(inputs);
    if pool.is_empty() {
        return Err(ModelError::DegenerateMask);
    }
    let bs = if cfg.batch_size == 0 { pool.len() } else { cfg.batch_size.min(pool.len()) };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order = pool.clone();
    let mut cursor = order.len();
    let mut report = TrainReport::default();
    for step in 0..cfg.steps {
        let batch: Vec<usize> = if bs == pool.len() {
            pool.clone()
        } else {
            if cursor + bs > order.len() {
                order.shuffle(&mut rng);
                cursor = 0;
            }
            cursor += bs;
            order[cursor - bs..cursor].to_vec()
        };
        let (loss, grads) = batch_loss_and_grad(model, inputs, &batch, &cfg.loss, exec)?;
        adam.update(&mut model.params, &grads);
        report.losses.push(loss);
        on_step(step, loss);
    }
    Ok(report)
}

/// Fresh Adam state for `model`.
pub fn adam_for(model: &Model, cfg: &TrainConfig) -> Adam {
    Adam::new(cfg.adam, &model.params)
}
