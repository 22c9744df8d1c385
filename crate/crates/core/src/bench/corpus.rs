//! Synthetic airport → daily traffic → raw scene windows → mined scenes.

use super::synth::SynthAirport;
use super::traffic::{day_tracks, generate_day, TrafficConfig};
use crate::exec::Exec;
use crate::scenes::{mine_scenes, window_scenes, RawScene, Scene, SceneConfig, SceneError, SceneMap, WorldState};
use crate::scorer::{mix_seed, ScorerConfig, Strategy};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

#[derive(Clone, Debug)]
pub struct DayScenes {
    pub day_id: String,
    pub raws: Vec<RawScene>,
}

#[derive(Clone, Debug)]
pub struct AirportCorpus {
    pub airport: SynthAirport,
    pub map: SceneMap,
    pub days: Vec<DayScenes>,
}

pub fn day_id(d: usize) -> String {
    format!("day{d:02}")
}

/// Simulates `days` days at one airport; day `d` uses `mix_seed(seed, d)`.
pub fn synth_corpus(airport: SynthAirport, days: usize, traffic: &TrafficConfig, scene: &SceneConfig, seed: u64) -> Result<AirportCorpus, SceneError> {
    scene.validate()?;
    let map = SceneMap::new(&airport.graph)?;
    let days = (0..days)
        .map(|d| {
            let id = day_id(d);
            let day = generate_day(&airport, traffic, mix_seed(seed, d as u64), &id);
            let tracks = day_tracks(&airport, &day);
            DayScenes { raws: window_scenes(&tracks, scene, &airport.id, &id), day_id: id }
        })
        .collect();
    Ok(AirportCorpus { airport, map, days })
}

impl AirportCorpus {
    pub fn day_ids(&self) -> Vec<String> {
        self.days.iter().map(|d| d.day_id.clone()).collect()
    }

    /// Mines the days accepted by `keep`; day `d` (by position) is mined with `mix_seed(seed, d)`.
    pub fn mine(
        &self,
        keep: impl Fn(&str) -> bool,
        scorer: &ScorerConfig,
        scene: &SceneConfig,
        strategy: Strategy,
        seed: u64,
        exec: Exec,
    ) -> Result<Vec<Scene>, SceneError> {
        let mut out = Vec::new();
        for (d, day) in self.days.iter().enumerate() {
            if keep(&day.day_id) {
                out.extend(mine_scenes(&day.raws, &self.map, scorer, scene, strategy, mix_seed(seed, d as u64), exec)?.scenes);
            }
        }
        Ok(out)
    }

    pub fn raw_scenes(&self) -> impl Iterator<Item = &RawScene> {
        self.days.iter().flat_map(|d| d.raws.iter())
    }
}

/// Makes half of every scene's agents stationary: keeps at most `max_agents / 2` of the
/// original agents (id order) and adds as many parked agents at random stands, valid
/// for the whole window. Scene `i` draws with `mix_seed(seed, i)`.
pub fn plant_stationary(raws: &[RawScene], airport: &SynthAirport, max_agents: usize, seed: u64) -> Vec<RawScene> {
    let z = airport.field_elevation_ft * crate::geo::METERS_PER_FOOT;
    raws.iter()
        .enumerate()
        .map(|(i, raw)| {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, i as u64));
            let keep = raw.agent_ids.len().min(max_agents / 2);
            let mut out = RawScene { agent_ids: raw.agent_ids[..keep].to_vec(), states: raw.states[..keep].to_vec(), ..raw.clone() };
            let len = raw.states.first().map_or(0, Vec::len);
            for j in 0..keep {
                let Some(&stand) = airport.layout.stands.choose(&mut rng) else { break };
                let (x, y) = airport.layout.xy(stand);
                let s = WorldState { x: x + rng.gen_range(-40.0..40.0), y: y + rng.gen_range(-40.0..40.0), z, theta: rng.gen_range(-PI..PI), speed: 0.0, valid: true };
                out.agent_ids.push(format!("~PL{j:02}"));
                out.states.push(vec![s; len]);
            }
            out
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::synth::{synth_airport, AirportSize};

    #[test]
    fn corpus_mines_ego_frame_scenes() {
        let cfg = SceneConfig { length: 30, history: 10, future: 20, ..SceneConfig::default() };
        let traffic = TrafficConfig { duration_s: 900, ..TrafficConfig::default() };
        let c = synth_corpus(synth_airport(1, AirportSize::Small), 2, &traffic, &cfg, 3).unwrap();
        assert_eq!(c.day_ids(), vec!["day00", "day01"]);
        let scenes = c.mine(|_| true, &ScorerConfig::default(), &cfg, Strategy::Critical, 0, Exec::Sequential).unwrap();
        assert!(scenes.len() > 10);
        for s in &scenes {
            let e = s.agents[s.ego_index][s.t_o];
            assert!(e.valid && e.x.abs() < 1e-9 && e.y.abs() < 1e-9 && e.theta.abs() < 1e-9);
            assert!(s.patches.iter().zip(&s.agent_ids).all(|(p, id)| id.is_none() || p.valid_count() > 0));
        }
    }

    #[test]
    fn planted_agents_are_half_and_stationary() {
        let cfg = SceneConfig { length: 30, history: 10, future: 20, ..SceneConfig::default() };
        let traffic = TrafficConfig { duration_s: 900, parked_agents: 0, ..TrafficConfig::default() };
        let c = synth_corpus(synth_airport(2, AirportSize::Small), 1, &traffic, &cfg, 1).unwrap();
        let raws: Vec<RawScene> = c.raw_scenes().cloned().collect();
        let planted = plant_stationary(&raws, &c.airport, cfg.max_agents, 4);
        assert_eq!(planted.len(), raws.len());
        for p in &planted {
            let n = p.agent_ids.len();
            assert!(n % 2 == 0 && n <= cfg.max_agents);
            let stationary = p.states.iter().filter(|row| row.iter().all(|s| s.valid && s.speed == 0.0)).count();
            assert!(stationary >= n / 2);
        }
        assert_eq!(plant_stationary(&raws, &c.airport, cfg.max_agents, 4), planted);
    }
}
