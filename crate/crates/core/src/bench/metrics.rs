use crate::exec::Exec;
use crate::scenes::Scene;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("no valid ground-truth step within the evaluation horizon")]
    NoValidSteps,
    #[error("horizon {horizon} exceeds available steps {available}")]
    HorizonTooLong { horizon: usize, available: usize },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Displacement {
    #[default]
    Planar,
    Spatial,
}

impl Displacement {
    #[inline]
    pub fn dist(self, a: &[f64; 3], b: &[f64; 3]) -> f64 {
        match self {
            Displacement::Planar => (a[0] - b[0]).hypot(a[1] - b[1]),
            Displacement::Spatial => ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt(),
        }
    }
}

fn check(modes: &[Vec<[f64; 3]>], gt: &[[f64; 3]], mask: &[bool], horizon: usize) -> Result<(), MetricError> {
    let available = modes.iter().map(Vec::len).chain([gt.len(), mask.len()]).min().unwrap_or(0);
    if horizon > available {
        return Err(MetricError::HorizonTooLong { horizon, available });
    }
    if modes.is_empty() || !mask[..horizon].iter().any(|&m| m) {
        return Err(MetricError::NoValidSteps);
    }
    Ok(())
}

/// Minimum over modes of the mean displacement over valid steps `0..horizon`.
pub fn min_ade(modes: &[Vec<[f64; 3]>], gt: &[[f64; 3]], mask: &[bool], horizon: usize, disp: Displacement) -> Result<f64, MetricError> {
    check(modes, gt, mask, horizon)?;
    let n = mask[..horizon].iter().filter(|&&m| m).count() as f64;
    Ok(modes
        .iter()
        .map(|m| (0..horizon).filter(|&t| mask[t]).map(|t| disp.dist(&m[t], &gt[t])).sum::<f64>() / n)
        .fold(f64::INFINITY, f64::min))
}

/// Minimum over modes of the displacement at the last valid step within `0..horizon`.
pub fn min_fde(modes: &[Vec<[f64; 3]>], gt: &[[f64; 3]], mask: &[bool], horizon: usize, disp: Displacement) -> Result<f64, MetricError> {
    check(modes, gt, mask, horizon)?;
    let t = (0..horizon).rev().find(|&t| mask[t]).expect("checked");
    Ok(modes.iter().map(|m| disp.dist(&m[t], &gt[t])).fold(f64::INFINITY, f64::min))
}

/// Future ground truth of every agent row: `(positions, mask)`, `F` steps after `t_o`.
pub fn scene_future(scene: &Scene, horizon: usize) -> Vec<(Vec<[f64; 3]>, Vec<bool>)> {
    scene
        .agents
        .iter()
        .map(|row| {
            (0..horizon)
                .map(|t| match row.get(scene.t_o + 1 + t) {
                    Some(s) if s.valid => ([s.x, s.y, s.z], true),
                    _ => ([0.0; 3], false),
                })
                .unzip()
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneRecord {
    pub day_id: String,
    pub start_frame: i64,
    pub agents: usize,
    pub ade_sum: f64,
    pub fde_sum: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub airport_id: String,
    pub horizon: usize,
    pub made: f64,
    pub mfde: f64,
    pub scene_count: usize,
    pub agent_count: usize,
    pub records: Vec<SceneRecord>,
}

/// Scores `predict(scene)` (per agent row, a list of mode trajectories) over every selected
/// agent with a valid step within the horizon. Means are over all scored agents.
pub fn evaluate<P>(airport_id: &str, scenes: &[Scene], horizon: usize, disp: Displacement, exec: Exec, predict: P) -> Result<EvalResult, MetricError>
where
    P: Fn(&Scene) -> Vec<Vec<Vec<[f64; 3]>>> + Sync + Send,
{
    let per_scene = exec.map(scenes, |s| -> Result<SceneRecord, MetricError> {
        let modes = predict(s);
        let mut rec = SceneRecord { day_id: s.day_id.clone(), start_frame: s.start_frame, agents: 0, ade_sum: 0.0, fde_sum: 0.0 };
        for (k, (gt, mask)) in scene_future(s, horizon).into_iter().enumerate() {
            if s.agent_ids[k].is_none() || !mask.iter().any(|&m| m) {
                continue;
            }
            rec.ade_sum += min_ade(&modes[k], &gt, &mask, horizon, disp)?;
            rec.fde_sum += min_fde(&modes[k], &gt, &mask, horizon, disp)?;
            rec.agents += 1;
        }
        Ok(rec)
    });
    let records: Vec<SceneRecord> = per_scene.into_iter().collect::<Result<_, _>>()?;
    let agent_count: usize = records.iter().map(|r| r.agents).sum();
    if agent_count == 0 {
        return Err(MetricError::NoValidSteps);
    }
    let made = records.iter().map(|r| r.ade_sum).sum::<f64>() / agent_count as f64;
    let mfde = records.iter().map(|r| r.fde_sum).sum::<f64>() / agent_count as f64;
    Ok(EvalResult { airport_id: airport_id.into(), horizon, made, mfde, scene_count: scenes.len(), agent_count, records })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(offset: f64, n: usize) -> Vec<[f64; 3]> {
        (0..n).map(|t| [t as f64, offset, 0.0]).collect()
    }

    #[test]
    fn perfect_mode_is_zero() {
        let gt = line(0.0, 5);
        let modes = vec![line(2.0, 5), gt.clone()];
        assert_eq!(min_ade(&modes, &gt, &[true; 5], 5, Displacement::Planar).unwrap(), 0.0);
        assert_eq!(min_fde(&modes, &gt, &[true; 5], 5, Displacement::Planar).unwrap(), 0.0);
    }

    #[test]
    fn constant_offsets() {
        let gt = line(0.0, 20);
        let modes = vec![line(3.0, 20), line(-5.0, 20)];
        assert_eq!(min_ade(&modes, &gt, &[true; 20], 20, Displacement::Planar).unwrap(), 3.0);
        let mut end = vec![line(0.0, 4), line(0.0, 4)];
        end[0][3][1] = 4.0;
        end[1][3][0] += 7.0;
        assert_eq!(min_fde(&end, &gt[..4], &[true; 4], 4, Displacement::Planar).unwrap(), 4.0);
    }

    #[test]
    fn fde_falls_back_to_last_valid_step() {
        let gt = line(0.0, 4);
        let mut m = line(0.0, 4);
        m[1][1] = 2.0;
        m[3][1] = 9.0;
        let fde = min_fde(&[m], &gt, &[true, true, false, false], 4, Displacement::Planar).unwrap();
        assert_eq!(fde, 2.0);
    }

    #[test]
    fn errors() {
        let gt = line(0.0, 3);
        assert_eq!(min_ade(&[gt.clone()], &gt, &[false; 3], 3, Displacement::Planar), Err(MetricError::NoValidSteps));
        assert_eq!(min_ade(&[gt.clone()], &gt, &[true; 3], 4, Displacement::Planar), Err(MetricError::HorizonTooLong { horizon: 4, available: 3 }));
    }

    #[test]
    fn spatial_includes_altitude() {
        let gt = vec![[0.0, 0.0, 0.0]];
        let m = vec![vec![[3.0, 0.0, 4.0]]];
        assert_eq!(min_ade(&m, &gt, &[true], 1, Displacement::Planar).unwrap(), 3.0);
        assert_eq!(min_ade(&m, &gt, &[true], 1, Displacement::Spatial).unwrap(), 5.0);
    }
}
