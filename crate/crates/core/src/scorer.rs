//! Criticality scoring and K-agent selection.
//!
//! An agent's score is a weighted sum of six normalized terms. Four are
//! kinematic (speed, acceleration, jerk, and a hold-short waiting measure
//! weighted by inverse distance to the nearest hold line) and two come from
//! pairwise interactions (loss of separation, time to a shared conflict point).

use crate::airmap::MapContext;
use crate::scenes::{choose_ego, RawScene, WorldState};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScoreError {
    #[error("window has {0} samples, jerk needs at least 3")]
    WindowTooShort(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreWeights {
    pub speed: f64,
    pub accel: f64,
    pub jerk: f64,
    pub hold_wait: f64,
    pub separation: f64,
    pub time_to_conflict: f64,
}

impl Default for ScoreWeights {
    fn default() -> Self {
        Self { speed: 1.0, accel: 1.0, jerk: 1.0, hold_wait: 1.0, separation: 1.0, time_to_conflict: 1.0 }
    }
}

/// Normalization caps: a raw term is divided by its cap and clamped to [0, 1].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreCaps {
    /// m/s
    pub speed: f64,
    /// m/s²
    pub accel: f64,
    /// m/s³
    pub jerk: f64,
    /// waiting samples per meter
    pub hold_wait: f64,
}

impl Default for ScoreCaps {
    fn default() -> Self {
        Self { speed: 30.0, accel: 3.0, jerk: 3.0, hold_wait: 2.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScorerConfig {
    pub weights: ScoreWeights,
    pub caps: ScoreCaps,
    /// Speeds below this count as stationary (m/s).
    pub v_stationary: f64,
    /// Separation radius (m).
    pub d_sep: f64,
    /// Conflict-point capture radius (m).
    pub r_conflict: f64,
    /// Constant-velocity lookahead for time-to-conflict (s).
    pub lookahead_s: f64,
}

impl Default for ScorerConfig {
    fn default() -> Self {
        Self {
            weights: ScoreWeights::default(),
            caps: ScoreCaps::default(),
            v_stationary: 0.5,
            d_sep: 200.0,
            r_conflict: 50.0,
            lookahead_s: 60.0,
        }
    }
}

impl ScorerConfig {
    pub fn from_json(bytes: &[u8]) -> Result<Self, serde_json::Error> {
        serde_json::from_slice(bytes)
    }
}

/// Normalized score terms and their weighted total.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreBreakdown {
    pub speed_term: f64,
    pub accel_term: f64,
    pub jerk_term: f64,
    pub hold_wait_term: f64,
    pub separation_term: f64,
    pub time_to_conflict_term: f64,
    pub total: f64,
}

impl ScoreBreakdown {
    fn finish(mut self, w: &ScoreWeights) -> Self {
        self.total = w.speed * self.speed_term
            + w.accel * self.accel_term
            + w.jerk * self.jerk_term
            + w.hold_wait * self.hold_wait_term
            + w.separation * self.separation_term
            + w.time_to_conflict * self.time_to_conflict_term;
        self
    }
}

/// Kinematic terms before normalization.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct KinematicRaw {
    pub mean_speed: f64,
    pub mean_accel: f64,
    pub mean_jerk: f64,
    pub hold_wait: f64,
}

fn velocity(s: &WorldState) -> (f64, f64) {
    let (sn, cs) = s.theta.sin_cos();
    (s.speed * cs, s.speed * sn)
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Raw kinematic terms of a 1 Hz window. Differences only use runs of
/// consecutive valid samples.
pub fn kinematic_raw(window: &[WorldState], map: &MapContext, cfg: &ScorerConfig) -> Result<KinematicRaw, ScoreError> {
    if window.len() < 3 {
        return Err(ScoreError::WindowTooShort(window.len()));
    }
    let v: Vec<Option<(f64, f64)>> = window.iter().map(|s| s.valid.then(|| velocity(s))).collect();
    let dv: Vec<Option<(f64, f64)>> = v
        .windows(2)
        .map(|p| match (p[0], p[1]) {
            (Some(a), Some(b)) => Some((b.0 - a.0, b.1 - a.1)),
            _ => None,
        })
        .collect();
    let ddv = dv.windows(2).filter_map(|p| match (p[0], p[1]) {
        (Some(a), Some(b)) => Some((b.0 - a.0).hypot(b.1 - a.1)),
        _ => None,
    });
    let valid = || window.iter().filter(|s| s.valid);
    Ok(KinematicRaw {
        mean_speed: mean(valid().map(|s| s.speed.abs())),
        mean_accel: mean(dv.iter().flatten().map(|d| d.0.hypot(d.1))),
        mean_jerk: mean(ddv),
        hold_wait: valid()
            .filter(|s| s.speed.abs() < cfg.v_stationary)
            .map(|s| 1.0 / (1.0 + map.dist_to_hold(s.x, s.y)))
            .sum(),
    })
}

fn norm(v: f64, cap: f64) -> f64 {
    (v / cap).clamp(0.0, 1.0)
}

/// Normalized kinematic terms; interaction terms are left at zero.
pub fn kinematic_score(window: &[WorldState], map: &MapContext, cfg: &ScorerConfig) -> Result<ScoreBreakdown, ScoreError> {
    let raw = kinematic_raw(window, map, cfg)?;
    Ok(ScoreBreakdown {
        speed_term: norm(raw.mean_speed, cfg.caps.speed),
        accel_term: norm(raw.mean_accel, cfg.caps.accel),
        jerk_term: norm(raw.mean_jerk, cfg.caps.jerk),
        hold_wait_term: norm(raw.hold_wait, cfg.caps.hold_wait),
        ..ScoreBreakdown::default()
    }
    .finish(&cfg.weights))
}

/// Pairwise interaction components, each in [0, 1].
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PairInteraction {
    pub separation: f64,
    pub time_to_conflict: f64,
}

/// Earliest time in `[0, horizon]` at which `p + v t` is within `r` of `c`.
pub fn entry_time(p: (f64, f64), v: (f64, f64), c: (f64, f64), r: f64, horizon: f64) -> Option<f64> {
    let (dx, dy) = (p.0 - c.0, p.1 - c.1);
    let c0 = dx * dx + dy * dy - r * r;
    if c0 <= 0.0 {
        return Some(0.0);
    }
    let a = v.0 * v.0 + v.1 * v.1;
    if a == 0.0 {
        return None;
    }
    let b = 2.0 * (dx * v.0 + dy * v.1);
    let disc = b * b - 4.0 * a * c0;
    if disc < 0.0 {
        return None;
    }
    let t = (-b - disc.sqrt()) / (2.0 * a);
    (t >= 0.0 && t <= horizon).then_some(t)
}

fn last_valid(window: &[WorldState]) -> Option<&WorldState> {
    window.iter().rev().find(|s| s.valid)
}

/// Per-conflict-point entry times of an agent's constant-velocity extrapolation
/// from its last valid sample.
fn conflict_entries(window: &[WorldState], map: &MapContext, cfg: &ScorerConfig) -> Option<Vec<Option<f64>>> {
    let s = last_valid(window)?;
    let v = velocity(s);
    Some(
        map.conflict_points
            .iter()
            .map(|&c| entry_time((s.x, s.y), v, c, cfg.r_conflict, cfg.lookahead_s))
            .collect(),
    )
}

fn separation(wi: &[WorldState], wj: &[WorldState], cfg: &ScorerConfig) -> f64 {
    wi.iter()
        .zip(wj)
        .filter(|(a, b)| a.valid && b.valid)
        .map(|(a, b)| (1.0 - (a.x - b.x).hypot(a.y - b.y) / cfg.d_sep).max(0.0))
        .fold(0.0, f64::max)
}

fn ttc_term(ei: &Option<Vec<Option<f64>>>, ej: &Option<Vec<Option<f64>>>) -> f64 {
    let (Some(ei), Some(ej)) = (ei, ej) else { return 0.0 };
    let tau = ei
        .iter()
        .zip(ej)
        .filter_map(|(a, b)| Some(a.as_ref()?.max(*b.as_ref()?)))
        .fold(f64::INFINITY, f64::min);
    if tau.is_finite() {
        1.0 / (1.0 + tau)
    } else {
        0.0
    }
}

/// Interaction between two aligned windows. τ is the earliest time by which
/// both constant-velocity extrapolations have come within `r_conflict` of a
/// common conflict point; the component is `1 / (1 + τ)`.
pub fn interaction_score(wi: &[WorldState], wj: &[WorldState], map: &MapContext, cfg: &ScorerConfig) -> PairInteraction {
    PairInteraction {
        separation: separation(wi, wj, cfg),
        time_to_conflict: ttc_term(&conflict_entries(wi, map, cfg), &conflict_entries(wj, map, cfg)),
    }
}

/// Full breakdown for every agent of a scene (observed windows only).
pub fn score_agents(windows: &[&[WorldState]], map: &MapContext, cfg: &ScorerConfig) -> Result<Vec<ScoreBreakdown>, ScoreError> {
    let entries: Vec<_> = windows.iter().map(|w| conflict_entries(w, map, cfg)).collect();
    let mut out = Vec::with_capacity(windows.len());
    for (i, wi) in windows.iter().enumerate() {
        let mut b = kinematic_score(wi, map, cfg)?;
        for (j, wj) in windows.iter().enumerate() {
            if i == j {
                continue;
            }
            b.separation_term = b.separation_term.max(separation(wi, wj, cfg));
            b.time_to_conflict_term = b.time_to_conflict_term.max(ttc_term(&entries[i], &entries[j]));
        }
        out.push(b.finish(&cfg.weights));
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    #[default]
    Critical,
    Random,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Critical => "critical",
            Strategy::Random => "random",
        })
    }
}

impl FromStr for Strategy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "critical" => Ok(Strategy::Critical),
            "random" => Ok(Strategy::Random),
            other => Err(format!("unknown strategy {other:?} (critical|random)")),
        }
    }
}

/// Picks up to `k` agents, returned as indices into `ids` in selection order.
///
/// `critical` orders by descending total score with ties broken by id;
/// `random` draws uniformly without replacement from the id-sorted agents.
/// Both are independent of input order.
pub fn rank_and_select(
    ids: &[String],
    windows: &[&[WorldState]],
    map: &MapContext,
    cfg: &ScorerConfig,
    k: usize,
    strategy: Strategy,
    seed: u64,
) -> Result<Vec<usize>, ScoreError> {
    let mut by_id: Vec<usize> = (0..ids.len()).collect();
    by_id.sort_by(|&a, &b| ids[a].cmp(&ids[b]));
    let k = k.min(ids.len());
    match strategy {
        Strategy::Critical => {
            let scores = score_agents(windows, map, cfg)?;
            by_id.sort_by(|&a, &b| {
                scores[b].total.total_cmp(&scores[a].total).then_with(|| ids[a].cmp(&ids[b]))
            });
            by_id.truncate(k);
            Ok(by_id)
        }
        Strategy::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Ok(sample(&mut rng, ids.len(), k).into_iter().map(|i| by_id[i]).collect())
        }
    }
}

/// Ego-selection statistics over a corpus.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SelectionStats {
    pub total_egos: usize,
    pub stationary_egos: usize,
    pub stationary_ego_fraction: f64,
    /// Selected agents contributing to the distance averages.
    pub agents_all: usize,
    pub agents_stationary: usize,
    pub agents_moving: usize,
    pub avg_closest_conflict_dist_all: f64,
    pub avg_closest_conflict_dist_stationary: f64,
    pub avg_closest_conflict_dist_moving: f64,
}

/// Mixes a base seed with a stream index (splitmix64 finalizer).
pub fn mix_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed.wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15)).wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Whether an agent's mean observed speed is below `v_stationary`.
pub fn is_stationary(window: &[WorldState], cfg: &ScorerConfig) -> bool {
    mean(window.iter().filter(|s| s.valid).map(|s| s.speed.abs())) < cfg.v_stationary
}

/// Closest distance from the agent's last valid observed position to any conflict point.
pub fn closest_conflict_distance(window: &[WorldState], map: &MapContext) -> Option<f64> {
    last_valid(window).map(|s| map.dist_to_conflict(s.x, s.y))
}

/// Runs selection and ego choice on every raw scene and aggregates the
/// statistics. Scene `i` uses seed `mix_seed(seed, i)`, the same stream
/// layout as scene assembly.
pub fn selection_stats(
    scenes: &[RawScene],
    history: usize,
    k: usize,
    map: &MapContext,
    cfg: &ScorerConfig,
    strategy: Strategy,
    seed: u64,
) -> Result<SelectionStats, ScoreError> {
    let mut st = SelectionStats::default();
    let (mut sum_all, mut sum_stat, mut sum_mov) = (0.0, 0.0, 0.0);
    for (i, raw) in scenes.iter().enumerate() {
        let scene_seed = mix_seed(seed, i as u64);
        let windows = raw.observed_windows(history);
        let selected = rank_and_select(&raw.agent_ids, &windows, map, cfg, k, strategy, mix_seed(scene_seed, 1))?;
        let Some(ego) = choose_ego(raw, &selected, history - 1, mix_seed(scene_seed, 2)) else {
            continue;
        };
        st.total_egos += 1;
        if is_stationary(windows[ego], cfg) {
            st.stationary_egos += 1;
        }
        for &a in &selected {
            let Some(d) = closest_conflict_distance(windows[a], map) else { continue };
            if !d.is_finite() {
                continue;
            }
            st.agents_all += 1;
            sum_all += d;
            if is_stationary(windows[a], cfg) {
                st.agents_stationary += 1;
                sum_stat += d;
            } else {
                st.agents_moving += 1;
                sum_mov += d;
            }
        }
    }
    let avg = |s: f64, n: usize| if n == 0 { 0.0 } else { s / n as f64 };
    st.stationary_ego_fraction = avg(st.stationary_egos as f64, st.total_egos);
    st.avg_closest_conflict_dist_all = avg(sum_all, st.agents_all);
    st.avg_closest_conflict_dist_stationary = avg(sum_stat, st.agents_stationary);
    st.avg_closest_conflict_dist_moving = avg(sum_mov, st.agents_moving);
    Ok(st)
}

/// A labelled row for [`stats_markdown`] / [`stats_csv`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatsRow {
    pub airport: String,
    pub strategy: Strategy,
    pub stats: SelectionStats,
}

const STATS_HEADER: [&str; 7] = [
    "Airport",
    "Strategy",
    "Total Num. Ego-agents",
    "Stationary Ego-agents (%)",
    "Avg. Closest Dist. to Conflict Point (m): All Agents",
    "Stationary Agents",
    "Moving Agents",
];

fn stats_cells(r: &StatsRow) -> [String; 7] {
    [
        r.airport.clone(),
        r.strategy.to_string(),
        r.stats.total_egos.to_string(),
        format!("{:.2}", 100.0 * r.stats.stationary_ego_fraction),
        format!("{:.2}", r.stats.avg_closest_conflict_dist_all),
        format!("{:.2}", r.stats.avg_closest_conflict_dist_stationary),
        format!("{:.2}", r.stats.avg_closest_conflict_dist_moving),
    ]
}

pub fn stats_markdown(rows: &[StatsRow]) -> String {
    let mut s = format!("| {} |\n|{}\n", STATS_HEADER.join(" | "), "---|".repeat(STATS_HEADER.len()));
    for r in rows {
        s.push_str(&format!("| {} |\n", stats_cells(r).join(" | ")));
    }
    s
}

pub fn stats_csv(rows: &[StatsRow]) -> String {
    let mut s = STATS_HEADER.iter().map(|h| format!("\"{h}\"")).collect::<Vec<_>>().join(",");
    s.push('\n');
    for r in rows {
        s.push_str(&stats_cells(r).join(","));
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn st(x: f64, y: f64, theta: f64, speed: f64) -> WorldState {
        WorldState { x, y, z: 0.0, theta, speed, valid: true }
    }

    fn hold_map(points: &[(f64, f64)]) -> MapContext {
        MapContext { hold_points: points.to_vec(), conflict_points: points.to_vec() }
    }

    #[test]
    fn stationary_agent_far_from_hold_line() {
        let map = hold_map(&[(500.0, 0.0)]);
        let w: Vec<_> = (0..10).map(|_| st(0.0, 0.0, 0.0, 0.0)).collect();
        let raw = kinematic_raw(&w, &map, &ScorerConfig::default()).unwrap();
        assert_eq!((raw.mean_speed, raw.mean_accel, raw.mean_jerk), (0.0, 0.0, 0.0));
        assert!((raw.hold_wait - 10.0 / 501.0).abs() < 1e-12);
    }

    #[test]
    fn constant_velocity_has_no_accel_or_jerk() {
        let map = hold_map(&[(1e4, 1e4)]);
        let w: Vec<_> = (0..10).map(|t| st(10.0 * t as f64, 0.0, 0.0, 10.0)).collect();
        let b = kinematic_score(&w, &map, &ScorerConfig::default()).unwrap();
        assert_eq!(b.accel_term, 0.0);
        assert_eq!(b.jerk_term, 0.0);
        assert!((b.speed_term - 10.0 / 30.0).abs() < 1e-12);
    }

    #[test]
    fn closer_hold_line_scores_higher() {
        let cfg = ScorerConfig::default();
        let w: Vec<_> = (0..10).map(|_| st(0.0, 0.0, 0.0, 0.0)).collect();
        let near = kinematic_score(&w, &hold_map(&[(1.0, 0.0)]), &cfg).unwrap();
        let far = kinematic_score(&w, &hold_map(&[(100.0, 0.0)]), &cfg).unwrap();
        assert!(near.hold_wait_term > far.hold_wait_term);
    }

    #[test]
    fn short_window_errors() {
        let w = vec![st(0.0, 0.0, 0.0, 0.0); 2];
        assert_eq!(kinematic_raw(&w, &hold_map(&[]), &ScorerConfig::default()), Err(ScoreError::WindowTooShort(2)));
    }

    #[test]
    fn far_diverging_pair_has_no_interaction() {
        let map = hold_map(&[(0.0, 0.0)]);
        let a: Vec<_> = (0..10).map(|t| st(-5000.0 - 10.0 * t as f64, 0.0, std::f64::consts::PI, 10.0)).collect();
        let b: Vec<_> = (0..10).map(|t| st(5000.0 + 10.0 * t as f64, 0.0, 0.0, 10.0)).collect();
        let i = interaction_score(&a, &b, &map, &ScorerConfig::default());
        assert_eq!(i, PairInteraction::default());
    }

    #[test]
    fn colocated_pair_max_separation() {
        let a: Vec<_> = (0..5).map(|_| st(3.0, 4.0, 0.0, 0.0)).collect();
        let i = interaction_score(&a, &a, &hold_map(&[]), &ScorerConfig::default());
        assert_eq!(i.separation, 1.0);
    }

    #[test]
    fn entry_time_closed_form() {
        assert_eq!(entry_time((0.0, 0.0), (1.0, 0.0), (10.0, 0.0), 2.0, 60.0), Some(8.0));
        assert_eq!(entry_time((0.0, 0.0), (-1.0, 0.0), (10.0, 0.0), 2.0, 60.0), None);
        assert_eq!(entry_time((0.0, 0.0), (0.0, 0.0), (10.0, 0.0), 2.0, 60.0), None);
        assert_eq!(entry_time((9.0, 0.0), (0.0, 0.0), (10.0, 0.0), 2.0, 60.0), Some(0.0));
        assert_eq!(entry_time((0.0, 0.0), (0.1, 0.0), (10.0, 0.0), 2.0, 60.0), None);
    }

    #[test]
    fn strategy_parse() {
        assert_eq!("Critical".parse::<Strategy>().unwrap(), Strategy::Critical);
        assert_eq!("random".parse::<Strategy>().unwrap(), Strategy::Random);
        assert!("x".parse::<Strategy>().is_err());
    }

    #[test]
    fn tables_have_header_and_rows() {
        let rows = vec![StatsRow { airport: "SYN".into(), strategy: Strategy::Random, stats: SelectionStats::default() }];
        assert_eq!(stats_markdown(&rows).lines().count(), 3);
        assert_eq!(stats_csv(&rows).lines().count(), 2);
    }
}
