//! Scene mining: fixed-length windows over 1 Hz tracks, K-agent selection,
//! the ego-centric transform, per-agent context patches, and a versioned
//! binary scene format with append-only shards.

use crate::airmap::{ContextPatch, MapContext, PatchIndex, PATCH_DIM};
use crate::exec::Exec;
use crate::geo::Pose2;
use crate::ingest::AgentTrack;
use crate::scorer::{mix_seed, rank_and_select, ScoreError, ScorerConfig, Strategy};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("no selected agent is valid at the last observed step")]
    NoValidEgo,
    #[error("scene format version {found}, expected {expected}")]
    VersionMismatch { found: u16, expected: u16 },
    #[error("corrupt scene payload: {0}")]
    CorruptPayload(String),
    #[error("invalid scene config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Score(#[from] ScoreError),
    #[error(transparent)]
    Map(#[from] crate::airmap::MapError),
    #[error("io: {0}")]
    Io(#[from] io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SceneConfig {
    /// Scene length T (s).
    pub length: usize,
    /// Observed history H (s).
    pub history: usize,
    /// Prediction horizon F (s).
    pub future: usize,
    /// Agents kept per scene, K.
    pub k: usize,
    /// Context points per agent, P.
    pub patch: usize,
    pub min_agents: usize,
    pub max_agents: usize,
    /// Window stride (s).
    pub stride: usize,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self { length: 60, history: 10, future: 50, k: 5, patch: 100, min_agents: 2, max_agents: 15, stride: 10 }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<(), SceneError> {
        let bad = |m: String| Err(SceneError::InvalidConfig(m));
        if self.history + self.future != self.length {
            return bad(format!("H + F = {} != T = {}", self.history + self.future, self.length));
        }
        if self.history == 0 || self.future == 0 {
            return bad("H and F must be positive".into());
        }
        if self.k == 0 || self.k > self.max_agents {
            return bad(format!("K = {} outside [1, {}]", self.k, self.max_agents));
        }
        if self.min_agents == 0 || self.min_agents > self.max_agents {
            return bad("need 1 <= min_agents <= max_agents".into());
        }
        if self.patch == 0 || self.stride == 0 {
            return bad("P and stride must be positive".into());
        }
        Ok(())
    }

    /// Index of the last observed step.
    pub fn t_o(&self) -> usize {
        self.history - 1
    }
}

/// World-frame state used for windowing and scoring (SI units).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    /// Yaw, radians CCW from east.
    pub theta: f64,
    /// m/s
    pub speed: f64,
    pub valid: bool,
}

impl WorldState {
    pub fn pose(&self) -> Pose2 {
        Pose2::new(self.x, self.y, self.theta)
    }
}

/// A window of world-frame agent states before selection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawScene {
    pub airport_id: String,
    pub day_id: String,
    pub start_frame: i64,
    pub agent_ids: Vec<String>,
    /// agents × T
    pub states: Vec<Vec<WorldState>>,
}

impl RawScene {
    pub fn observed_windows(&self, history: usize) -> Vec<&[WorldState]> {
        self.states.iter().map(|s| &s[..history]).collect()
    }

    pub fn observed_valid_agents(&self, history: usize) -> usize {
        self.states.iter().filter(|s| s[..history].iter().any(|w| w.valid)).count()
    }
}

/// Ego-frame agent state; padding is all zeros with `valid = false`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub theta: f64,
    pub valid: bool,
}

impl AgentState {
    pub const PAD: AgentState = AgentState { x: 0.0, y: 0.0, z: 0.0, theta: 0.0, valid: false };
}

/// An assembled scene in the ego frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub config: SceneConfig,
    pub airport_id: String,
    pub day_id: String,
    pub start_frame: i64,
    /// `None` for padding rows.
    pub agent_ids: Vec<Option<String>>,
    /// K × T
    pub agents: Vec<Vec<AgentState>>,
    pub ego_index: usize,
    pub t_o: usize,
    /// K patches, in the ego frame.
    pub patches: Vec<ContextPatch>,
    /// Ego pose at `t_o` in world coordinates.
    pub frame_of_reference: Pose2,
}

impl Scene {
    pub fn k(&self) -> usize {
        self.agents.len()
    }

    /// Ego-frame → world for a position.
    pub fn to_world(&self, x: f64, y: f64) -> (f64, f64) {
        self.frame_of_reference.to_world(x, y)
    }

    pub fn agent_mask(&self) -> Vec<bool> {
        self.agent_ids.iter().map(Option::is_some).collect()
    }

    /// Same scene with row `i` taken from row `order[i]`.
    pub fn permuted(&self, order: &[usize]) -> Scene {
        assert_eq!(order.len(), self.k(), "permutation length");
        Scene {
            agent_ids: order.iter().map(|&i| self.agent_ids[i].clone()).collect(),
            agents: order.iter().map(|&i| self.agents[i].clone()).collect(),
            patches: order.iter().map(|&i| self.patches[i].clone()).collect(),
            ego_index: order.iter().position(|&i| i == self.ego_index).expect("order is a permutation"),
            ..self.clone()
        }
    }
}

fn track_state(r: &crate::ingest::PositionReport) -> WorldState {
    WorldState { x: r.x_m(), y: r.y_m(), z: r.altitude_m(), theta: r.yaw(), speed: r.speed_mps(), valid: true }
}

/// Cuts tracks into `T`-second windows at the configured stride.
///
/// Agents with no valid observed sample are left out. A window is emitted when
/// at least `min_agents` agents remain; beyond `max_agents`, the agents with
/// the most valid samples are kept (ties by id).
pub fn window_scenes(tracks: &[AgentTrack], cfg: &SceneConfig, airport_id: &str, day_id: &str) -> Vec<RawScene> {
    let mut by_agent: BTreeMap<&str, Vec<&AgentTrack>> = BTreeMap::new();
    for t in tracks.iter().filter(|t| !t.samples.is_empty()) {
        by_agent.entry(&t.agent_id).or_default().push(t);
    }
    let (Some(first), Some(last)) = (
        tracks.iter().filter(|t| !t.samples.is_empty()).map(|t| t.first_frame()).min(),
        tracks.iter().filter(|t| !t.samples.is_empty()).map(|t| t.last_frame()).max(),
    ) else {
        return Vec::new();
    };
    let t_len = cfg.length as i64;
    let mut out = Vec::new();
    let mut start = first;
    while start + t_len - 1 <= last {
        let end = start + t_len - 1;
        let mut agents: Vec<(String, Vec<WorldState>, usize)> = Vec::new();
        for (id, ts) in &by_agent {
            let overlapping: Vec<_> = ts.iter().filter(|t| t.first_frame() <= end && t.last_frame() >= start).collect();
            if overlapping.is_empty() {
                continue;
            }
            let mut row = vec![WorldState::default(); cfg.length];
            let mut count = 0;
            for t in overlapping {
                for (i, slot) in row.iter_mut().enumerate() {
                    if let Some(r) = t.at(start + i as i64) {
                        *slot = track_state(r);
                        count += 1;
                    }
                }
            }
            if row[..cfg.history].iter().any(|s| s.valid) {
                agents.push((id.to_string(), row, count));
            }
        }
        if agents.len() > cfg.max_agents {
            agents.sort_by(|a, b| b.2.cmp(&a.2).then_with(|| a.0.cmp(&b.0)));
            agents.truncate(cfg.max_agents);
            agents.sort_by(|a, b| a.0.cmp(&b.0));
        }
        if agents.len() >= cfg.min_agents {
            let (agent_ids, states) = agents.into_iter().map(|(id, row, _)| (id, row)).unzip();
            out.push(RawScene { airport_id: airport_id.into(), day_id: day_id.into(), start_frame: start, agent_ids, states });
        }
        start += cfg.stride as i64;
    }
    out
}

/// Uniformly picks an ego among `selected` agents valid at `t_o`. Returns an index into the raw scene.
pub fn choose_ego(raw: &RawScene, selected: &[usize], t_o: usize, seed: u64) -> Option<usize> {
    let candidates: Vec<usize> = selected.iter().copied().filter(|&i| raw.states[i][t_o].valid).collect();
    if candidates.is_empty() {
        return None;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Some(candidates[rng.gen_range(0..candidates.len())])
}

/// Map data scene assembly needs: scorer queries and the patch index.
#[derive(Clone, Debug)]
pub struct SceneMap {
    pub context: MapContext,
    pub patches: PatchIndex,
}

impl SceneMap {
    pub fn new(graph: &crate::airmap::AirportGraph) -> Result<Self, SceneError> {
        let datum = graph.meta.datum.unwrap_or((0.0, 0.0));
        let mut vectors = crate::airmap::vectorize_graph(graph, datum);
        // Patches live in the graph's own x/y frame, which the tracks share.
        for v in &mut vectors {
            let (s, e) = (&graph.nodes[&v.start], &graph.nodes[&v.end]);
            v.d_s[2..].copy_from_slice(&[s.x, s.y]);
            v.d_e[2..].copy_from_slice(&[e.x, e.y]);
        }
        Ok(Self { context: MapContext::from_graph(graph), patches: PatchIndex::new(&vectors)? })
    }
}

/// Selects agents, draws the ego and expresses the scene in the ego frame at `t_o`.
///
/// Seeds: selection uses `mix_seed(seed, 1)`, the ego draw `mix_seed(seed, 2)`.
pub fn assemble_scene(
    raw: &RawScene,
    map: &SceneMap,
    scorer: &ScorerConfig,
    cfg: &SceneConfig,
    strategy: Strategy,
    seed: u64,
) -> Result<Scene, SceneError> {
    let t_o = cfg.t_o();
    let windows = raw.observed_windows(cfg.history);
    let selected = rank_and_select(&raw.agent_ids, &windows, &map.context, scorer, cfg.k, strategy, mix_seed(seed, 1))?;
    let ego = choose_ego(raw, &selected, t_o, mix_seed(seed, 2)).ok_or(SceneError::NoValidEgo)?;
    let frame = raw.states[ego][t_o].pose();

    let mut agents = vec![vec![AgentState::PAD; cfg.length]; cfg.k];
    let mut agent_ids = vec![None; cfg.k];
    let mut patches = vec![ContextPatch::empty(cfg.patch); cfg.k];
    let mut ego_index = 0;
    for (row, &a) in selected.iter().enumerate() {
        if a == ego {
            ego_index = row;
        }
        agent_ids[row] = Some(raw.agent_ids[a].clone());
        for (dst, s) in agents[row].iter_mut().zip(&raw.states[a]) {
            if s.valid {
                let (x, y) = frame.to_local(s.x, s.y);
                *dst = AgentState { x, y, z: s.z, theta: frame.yaw_to_local(s.theta), valid: true };
            }
        }
        if let Some(s) = raw.states[a][..cfg.history].iter().rev().find(|s| s.valid) {
            patches[row] = map.patches.patch_at((s.x, s.y), &frame, cfg.patch)?;
        }
    }
    Ok(Scene {
        config: *cfg,
        airport_id: raw.airport_id.clone(),
        day_id: raw.day_id.clone(),
        start_frame: raw.start_frame,
        agent_ids,
        agents,
        ego_index,
        t_o,
        patches,
        frame_of_reference: frame,
    })
}

/// Result of mining a batch of raw scenes.
#[derive(Debug, Default)]
pub struct MineOutcome {
    pub scenes: Vec<Scene>,
    pub dropped_no_ego: usize,
}

/// Assembles every raw scene; scene `i` gets seed `mix_seed(seed, i)`.
pub fn mine_scenes(
    raws: &[RawScene],
    map: &SceneMap,
    scorer: &ScorerConfig,
    cfg: &SceneConfig,
    strategy: Strategy,
    seed: u64,
    exec: Exec,
) -> Result<MineOutcome, SceneError> {
    let results = exec.map_indexed(raws, |i, raw| assemble_scene(raw, map, scorer, cfg, strategy, mix_seed(seed, i as u64)));
    let mut out = MineOutcome::default();
    for r in results {
        match r {
            Ok(s) => out.scenes.push(s),
            Err(SceneError::NoValidEgo) => out.dropped_no_ego += 1,
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

const MAGIC: &[u8; 4] = b"SFSC";
pub const FORMAT_VERSION: u16 = 1;

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn i64(&mut self, v: i64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn str(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.0.extend_from_slice(s.as_bytes());
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], SceneError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| {
            SceneError::CorruptPayload(format!("truncated at byte {}", self.pos))
        })?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8, SceneError> {
        Ok(self.take(1)?[0])
    }
    fn u16(&mut self) -> Result<u16, SceneError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }
    fn u32(&mut self) -> Result<u32, SceneError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn i64(&mut self) -> Result<i64, SceneError> {
        Ok(i64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64, SceneError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn bool(&mut self) -> Result<bool, SceneError> {
        match self.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            b => Err(SceneError::CorruptPayload(format!("bad bool byte {b}"))),
        }
    }
    fn str(&mut self) -> Result<String, SceneError> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|e| SceneError::CorruptPayload(e.to_string()))
    }
}

/// Header + payload + CRC-32 trailer. The header carries
/// `(T, H, F, K, P, C)` and the format version.
pub fn serialize_scene(s: &Scene) -> Vec<u8> {
    let c = &s.config;
    let mut w = Writer(Vec::with_capacity(64 + c.k * (c.length * 33 + c.patch * 57)));
    w.0.extend_from_slice(MAGIC);
    w.0.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    for v in [c.length, c.history, c.future, c.k, c.patch, PATCH_DIM, c.min_agents, c.max_agents, c.stride] {
        w.u32(v as u32);
    }
    w.str(&s.airport_id);
    w.str(&s.day_id);
    w.i64(s.start_frame);
    w.u32(s.ego_index as u32);
    w.u32(s.t_o as u32);
    for v in [s.frame_of_reference.x, s.frame_of_reference.y, s.frame_of_reference.theta] {
        w.f64(v);
    }
    for id in &s.agent_ids {
        match id {
            Some(id) => {
                w.u8(1);
                w.str(id);
            }
            None => w.u8(0),
        }
    }
    for row in &s.agents {
        for a in row {
            for v in [a.x, a.y, a.z, a.theta] {
                w.f64(v);
            }
            w.u8(a.valid as u8);
        }
    }
    for p in &s.patches {
        for (r, &m) in p.rows.iter().zip(&p.mask) {
            for &v in r {
                w.f64(v);
            }
            w.u8(m as u8);
        }
    }
    let crc = crc32fast::hash(&w.0);
    w.u32(crc);
    w.0
}

pub fn deserialize_scene(bytes: &[u8]) -> Result<Scene, SceneError> {
    if bytes.len() < 10 || &bytes[..4] != MAGIC {
        return Err(SceneError::CorruptPayload("bad magic".into()));
    }
    let mut r = Reader { buf: bytes, pos: 4 };
    let version = r.u16()?;
    if version != FORMAT_VERSION {
        return Err(SceneError::VersionMismatch { found: version, expected: FORMAT_VERSION });
    }
    let (body, trailer) = bytes.split_at(bytes.len() - 4);
    if crc32fast::hash(body) != u32::from_le_bytes(trailer.try_into().unwrap()) {
        return Err(SceneError::CorruptPayload("checksum mismatch".into()));
    }
    let mut dims = [0usize; 9];
    for d in &mut dims {
        *d = r.u32()? as usize;
    }
    let [length, history, future, k, patch, c, min_agents, max_agents, stride] = dims;
    if c != PATCH_DIM {
        return Err(SceneError::CorruptPayload(format!("patch width {c}, expected {PATCH_DIM}")));
    }
    let config = SceneConfig { length, history, future, k, patch, min_agents, max_agents, stride };
    config.validate().map_err(|e| SceneError::CorruptPayload(e.to_string()))?;
    let airport_id = r.str()?;
    let day_id = r.str()?;
    let start_frame = r.i64()?;
    let ego_index = r.u32()? as usize;
    let t_o = r.u32()? as usize;
    let frame_of_reference = Pose2::new(r.f64()?, r.f64()?, r.f64()?);
    let mut agent_ids = Vec::with_capacity(k);
    for _ in 0..k {
        agent_ids.push(if r.bool()? { Some(r.str()?) } else { None });
    }
    let mut agents = Vec::with_capacity(k);
    for _ in 0..k {
        let mut row = Vec::with_capacity(length);
        for _ in 0..length {
            row.push(AgentState { x: r.f64()?, y: r.f64()?, z: r.f64()?, theta: r.f64()?, valid: r.bool()? });
        }
        agents.push(row);
    }
    let mut patches = Vec::with_capacity(k);
    for _ in 0..k {
        let mut p = ContextPatch::empty(patch);
        for i in 0..patch {
            for v in p.rows[i].iter_mut() {
                *v = r.f64()?;
            }
            p.mask[i] = r.bool()?;
        }
        patches.push(p);
    }
    if r.pos != bytes.len() - 4 {
        return Err(SceneError::CorruptPayload("trailing bytes".into()));
    }
    if ego_index >= k || t_o >= length {
        return Err(SceneError::CorruptPayload("ego or t_o out of range".into()));
    }
    Ok(Scene { config, airport_id, day_id, start_frame, agent_ids, agents, ego_index, t_o, patches, frame_of_reference })
}

/// Short hex digest of a config's canonical JSON.
pub fn config_hash<T: Serialize>(cfg: &T) -> String {
    let json = serde_json::to_vec(cfg).expect("config serializes");
    let digest = Sha256::digest(&json);
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

/// JSON sidecar of a shard.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShardIndex {
    pub count: usize,
    pub config_hash: String,
    pub seed: u64,
    pub strategy: Strategy,
    pub airport_id: String,
    pub day_id: String,
    pub format_version: u16,
}

/// Appends length-prefixed scenes to `<dir>/<name>.bin` and keeps the `<name>.json` index current.
pub struct ShardWriter {
    bin: fs::File,
    index_path: PathBuf,
    index: ShardIndex,
}

impl ShardWriter {
    pub fn create(dir: &Path, name: &str, index: ShardIndex) -> Result<Self, SceneError> {
        fs::create_dir_all(dir)?;
        let bin = fs::File::create(dir.join(format!("{name}.bin")))?;
        let w = Self { bin, index_path: dir.join(format!("{name}.json")), index: ShardIndex { count: 0, ..index } };
        w.write_index()?;
        Ok(w)
    }

    fn write_index(&self) -> Result<(), SceneError> {
        fs::write(&self.index_path, serde_json::to_vec_pretty(&self.index).expect("index serializes"))?;
        Ok(())
    }

    pub fn append(&mut self, scene: &Scene) -> Result<(), SceneError> {
        let bytes = serialize_scene(scene);
        self.bin.write_all(&(bytes.len() as u64).to_le_bytes())?;
        self.bin.write_all(&bytes)?;
        self.index.count += 1;
        Ok(())
    }

    pub fn finish(mut self) -> Result<ShardIndex, SceneError> {
        self.bin.flush()?;
        self.write_index()?;
        Ok(self.index)
    }
}

/// Reads a shard written by [`ShardWriter`], checking the record count against its index.
pub fn read_shard(bin_path: &Path) -> Result<(ShardIndex, Vec<Scene>), SceneError> {
    let index: ShardIndex = serde_json::from_slice(&fs::read(bin_path.with_extension("json"))?)
        .map_err(|e| SceneError::CorruptPayload(format!("shard index: {e}")))?;
    let bytes = fs::read(bin_path)?;
    let mut r = Reader { buf: &bytes, pos: 0 };
    let mut scenes = Vec::with_capacity(index.count);
    while r.pos < bytes.len() {
        let n = u64::from_le_bytes(r.take(8)?.try_into().unwrap()) as usize;
        scenes.push(deserialize_scene(r.take(n)?)?);
    }
    if scenes.len() != index.count {
        return Err(SceneError::CorruptPayload(format!("index says {} scenes, found {}", index.count, scenes.len())));
    }
    Ok((index, scenes))
}

/// Every `*.bin` shard in `dir`, sorted by file name.
pub fn list_shards(dir: &Path) -> Result<Vec<PathBuf>, SceneError> {
    let mut out: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "bin"))
        .collect();
    out.sort();
    Ok(out)
}
