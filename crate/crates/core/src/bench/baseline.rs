use crate::scenes::Scene;

/// One agent's constant-velocity extrapolation.
#[derive(Clone, Debug, PartialEq)]
pub struct CvPrediction {
    pub trajectory: Vec<[f64; 3]>,
    /// No two consecutive valid observed steps, so the agent is held in place.
    pub held: bool,
}

/// Extrapolates every agent row from its last observed velocity for `horizon` steps.
/// Velocity is the difference of the last two valid observed states when they are
/// consecutive; otherwise the last valid position is held. Padding rows stay at the origin.
pub fn constant_velocity_baseline(scene: &Scene, horizon: usize) -> Vec<CvPrediction> {
    let h = scene.config.history;
    let t0 = scene.t_o + 1 - h;
    scene
        .agents
        .iter()
        .map(|row| {
            let obs = &row[t0..=scene.t_o];
            let Some(i) = obs.iter().rposition(|s| s.valid) else {
                return CvPrediction { trajectory: vec![[0.0; 3]; horizon], held: true };
            };
            let p = [obs[i].x, obs[i].y, obs[i].z];
            let (v, held) = if i > 0 && obs[i - 1].valid {
                ([obs[i].x - obs[i - 1].x, obs[i].y - obs[i - 1].y, obs[i].z - obs[i - 1].z], false)
            } else {
                ([0.0; 3], true)
            };
            let trajectory = (0..horizon)
                .map(|t| {
                    let lead = (h - i + t) as f64;
                    [p[0] + lead * v[0], p[1] + lead * v[1], p[2] + lead * v[2]]
                })
                .collect();
            CvPrediction { trajectory, held }
        })
        .collect()
}

/// Baseline as a single-mode predictor for [`super::metrics::evaluate`].
pub fn cv_modes(scene: &Scene, horizon: usize) -> Vec<Vec<Vec<[f64; 3]>>> {
    constant_velocity_baseline(scene, horizon).into_iter().map(|p| vec![p.trajectory]).collect()
}
