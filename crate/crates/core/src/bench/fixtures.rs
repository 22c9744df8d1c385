//! Random and hand-built scenes for tests and property checks.

use crate::airmap::{ContextPatch, PATCH_DIM};
use crate::geo::{wrap_angle, Pose2};
use crate::scenes::{AgentState, RawScene, Scene, SceneConfig, WorldState};
use rand::Rng;
use std::f64::consts::PI;

/// Scene from explicit ego-frame rows: `t_o = history − 1`, ego row 0, one empty patch point per agent.
pub fn scene_from_rows(rows: Vec<Vec<AgentState>>, history: usize) -> Scene {
    let k = rows.len();
    let length = rows[0].len();
    let config = SceneConfig { length, history, future: length - history, k, patch: 1, min_agents: 1, max_agents: k.max(1), stride: 1 };
    Scene {
        config,
        airport_id: "TEST".into(),
        day_id: "d0".into(),
        start_frame: 0,
        agent_ids: (0..k).map(|i| Some(format!("A{i}"))).collect(),
        agents: rows,
        ego_index: 0,
        t_o: history - 1,
        patches: vec![ContextPatch::empty(1); k],
        frame_of_reference: Pose2::new(0.0, 0.0, 0.0),
    }
}

/// Random ego-frame scene: some padded agent rows, late entries, early exits and dropouts,
/// partly masked patches. The ego (row 0 after a random shuffle) is valid at `t_o`.
pub fn random_scene<R: Rng>(rng: &mut R, k: usize, history: usize, future: usize, patch: usize) -> Scene {
    let length = history + future;
    let t_o = history - 1;
    let config = SceneConfig { length, history, future, k, patch, min_agents: 1, max_agents: k.max(15), stride: 10 };
    let live = rng.gen_range(1..=k);
    let mut agents = Vec::with_capacity(k);
    let mut ids = Vec::with_capacity(k);
    let mut patches = Vec::with_capacity(k);
    for a in 0..k {
        if a >= live {
            agents.push(vec![AgentState::PAD; length]);
            ids.push(None);
            patches.push(ContextPatch::empty(patch));
            continue;
        }
        let (mut x, mut y) = (rng.gen_range(-300.0..300.0), rng.gen_range(-300.0..300.0));
        let mut th: f64 = rng.gen_range(-PI..PI);
        let v = rng.gen_range(0.0..20.0);
        let w = rng.gen_range(-0.1..0.1);
        let start = if a == 0 { 0 } else { rng.gen_range(0..=t_o) };
        let end = if rng.gen_bool(0.3) { rng.gen_range(t_o..length) } else { length - 1 };
        let mut row = Vec::with_capacity(length);
        for t in 0..length {
            th = wrap_angle(th + w);
            x += v * th.cos();
            y += v * th.sin();
            let dropout = a != 0 && t != t_o && rng.gen_bool(0.05);
            if t < start || t > end || dropout {
                row.push(AgentState::PAD);
            } else {
                row.push(AgentState { x, y, z: rng.gen_range(0.0..3.0), theta: th, valid: true });
            }
        }
        agents.push(row);
        ids.push(Some(format!("AG{a:03}")));
        let mut p = ContextPatch::empty(patch);
        let n_valid = rng.gen_range(0..=patch);
        for i in 0..n_valid {
            let c = rng.gen_range(0..3);
            let d: f64 = rng.gen_range(-PI..PI);
            let mut r = [0.0; PATCH_DIM];
            r[0] = x + rng.gen_range(-200.0..200.0);
            r[1] = y + rng.gen_range(-200.0..200.0);
            r[2 + c] = 1.0;
            r[5] = d.cos();
            r[6] = d.sin();
            p.rows[i] = r;
            p.mask[i] = true;
        }
        patches.push(p);
    }
    // Rows are exchangeable; shuffle so the ego is not always first.
    let mut order: Vec<usize> = (0..k).collect();
    for i in (1..k).rev() {
        order.swap(i, rng.gen_range(0..=i));
    }
    let ego_index = order.iter().position(|&i| i == 0).unwrap();
    Scene {
        config,
        airport_id: "RND".into(),
        day_id: "d0".into(),
        start_frame: 0,
        agent_ids: order.iter().map(|&i| ids[i].clone()).collect(),
        agents: order.iter().map(|&i| agents[i].clone()).collect(),
        ego_index,
        t_o,
        patches: order.iter().map(|&i| patches[i].clone()).collect(),
        frame_of_reference: Pose2::new(0.0, 0.0, 0.0),
    }
}

/// Random world-frame raw scene with `n` agents, each valid over a random contiguous span
/// that covers at least one observed step.
pub fn random_raw_scene<R: Rng>(rng: &mut R, n: usize, cfg: &SceneConfig, center: (f64, f64)) -> RawScene {
    let t_o = cfg.history - 1;
    let mut states = Vec::with_capacity(n);
    for _ in 0..n {
        let (mut x, mut y) = (center.0 + rng.gen_range(-1500.0..1500.0), center.1 + rng.gen_range(-1500.0..1500.0));
        let mut th: f64 = rng.gen_range(-PI..PI);
        let mut v: f64 = rng.gen_range(0.0..30.0);
        let start = rng.gen_range(0..=t_o);
        let end = rng.gen_range(start.max(t_o / 2)..cfg.length);
        let mut row = Vec::with_capacity(cfg.length);
        for t in 0..cfg.length {
            th = wrap_angle(th + rng.gen_range(-0.05..0.05));
            v = (v + rng.gen_range(-1.0..1.0)).max(0.0);
            x += v * th.cos();
            y += v * th.sin();
            row.push(if (start..=end).contains(&t) {
                WorldState { x, y, z: rng.gen_range(0.0..50.0), theta: th, speed: v, valid: true }
            } else {
                WorldState::default()
            });
        }
        states.push(row);
    }
    RawScene {
        airport_id: "RND".into(),
        day_id: "d0".into(),
        start_frame: 0,
        agent_ids: (0..n).map(|i| format!("R{i:03}")).collect(),
        states,
    }
}
