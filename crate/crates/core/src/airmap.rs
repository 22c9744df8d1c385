//! Semantic airport maps.
//!
//! A raw [`RoutingGraph`] (nodes with lat/lon and local x/y, edges with
//! free-form tags) is compiled in four steps: filter and classify edges into
//! runway / taxiway / hold-line centerlines, extend runway ends outward by one
//! nautical mile, supersample runway edges, then vectorize every edge as
//! `[d_s, d_e, a]`. Per-agent context patches are the `P` nearest map nodes
//! expressed in a reference frame.

use crate::geo::{Pose2, METERS_PER_NM};
use crate::ingest::project_local;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

pub type NodeId = u64;

/// Width of one context-patch row: 2 position + 3 class + 2 direction.
pub const PATCH_DIM: usize = 7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MapError {
    #[error("edge references unknown node {0}")]
    UnknownNode(NodeId),
    #[error("kept edge matches no class rule: {0:?}")]
    UnclassifiableEdge(BTreeMap<String, String>),
    #[error("runway terminal segment at node {0} has zero length")]
    DegenerateRunway(NodeId),
    #[error("supersample spacing must be positive, got {0}")]
    InvalidSpacing(f64),
    #[error("patch size must be at least 1")]
    InvalidPatchSize,
    #[error("map has no vectors")]
    EmptyMap,
    #[error("map json: {0}")]
    Json(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeClass {
    Runway,
    Taxiway,
    HoldLine,
}

/// One-hot order of [`EdgeClass`].
pub const CLASS_ORDER: [EdgeClass; 3] = [EdgeClass::Runway, EdgeClass::Taxiway, EdgeClass::HoldLine];

impl EdgeClass {
    pub fn index(self) -> usize {
        match self {
            EdgeClass::Runway => 0,
            EdgeClass::Taxiway => 1,
            EdgeClass::HoldLine => 2,
        }
    }

    pub fn one_hot(self) -> [f64; 3] {
        let mut a = [0.0; 3];
        a[self.index()] = 1.0;
        a
    }

    pub fn name(self) -> &'static str {
        match self {
            EdgeClass::Runway => "runway",
            EdgeClass::Taxiway => "taxiway",
            EdgeClass::HoldLine => "hold_line",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapNode {
    pub lat: f64,
    pub lon: f64,
    pub x: f64,
    pub y: f64,
}

impl MapNode {
    fn dist(&self, o: &MapNode) -> f64 {
        (self.x - o.x).hypot(self.y - o.y)
    }

    /// Point at `a + t * (b - a)` in both coordinate systems. The local
    /// projection is affine in lat/lon, so this stays consistent with it.
    fn along(a: &MapNode, b: &MapNode, t: f64) -> MapNode {
        MapNode {
            lat: a.lat + (b.lat - a.lat) * t,
            lon: a.lon + (b.lon - a.lon) * t,
            x: a.x + (b.x - a.x) * t,
            y: a.y + (b.y - a.y) * t,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawEdge(pub NodeId, pub NodeId, #[serde(default)] pub BTreeMap<String, String>);

/// Dense routing graph as read from disk.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RoutingGraph {
    pub nodes: BTreeMap<NodeId, MapNode>,
    pub edges: Vec<RawEdge>,
}

impl RoutingGraph {
    pub fn validate(&self) -> Result<(), MapError> {
        for RawEdge(a, b, _) in &self.edges {
            for id in [a, b] {
                if !self.nodes.contains_key(id) {
                    return Err(MapError::UnknownNode(*id));
                }
            }
        }
        Ok(())
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, MapError> {
        let g: RoutingGraph = serde_json::from_slice(bytes).map_err(|e| MapError::Json(e.to_string()))?;
        g.validate()?;
        Ok(g)
    }

    pub fn to_json(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("routing graph serializes")
    }
}

/// Matches an edge whose tag `key` has any of `values`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TagMatch {
    pub key: String,
    pub values: Vec<String>,
}

impl TagMatch {
    pub fn new(key: &str, values: &[&str]) -> Self {
        Self { key: key.into(), values: values.iter().map(|v| v.to_string()).collect() }
    }

    fn matches(&self, tags: &BTreeMap<String, String>) -> bool {
        tags.get(&self.key).is_some_and(|v| self.values.iter().any(|x| x == v))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassRule {
    pub class: EdgeClass,
    pub any: Vec<TagMatch>,
}

/// Declarative tag rules: which edges are centerlines and what class each gets.
/// Class rules are tried in order; the first match wins.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TagRules {
    pub keep: Vec<TagMatch>,
    pub classes: Vec<ClassRule>,
}

impl Default for TagRules {
    /// OpenStreetMap `aeroway` tagging.
    fn default() -> Self {
        Self {
            keep: vec![TagMatch::new("aeroway", &["runway", "taxiway", "taxilane", "holding_position"])],
            classes: vec![
                ClassRule { class: EdgeClass::Runway, any: vec![TagMatch::new("aeroway", &["runway"])] },
                ClassRule { class: EdgeClass::Taxiway, any: vec![TagMatch::new("aeroway", &["taxiway", "taxilane"])] },
                ClassRule { class: EdgeClass::HoldLine, any: vec![TagMatch::new("aeroway", &["holding_position"])] },
            ],
        }
    }
}

impl TagRules {
    fn keeps(&self, tags: &BTreeMap<String, String>) -> bool {
        self.keep.iter().any(|m| m.matches(tags))
    }

    fn classify(&self, tags: &BTreeMap<String, String>) -> Option<EdgeClass> {
        self.classes.iter().find(|r| r.any.iter().any(|m| m.matches(tags))).map(|r| r.class)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifiedEdge {
    pub a: NodeId,
    pub b: NodeId,
    pub class: EdgeClass,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GraphMeta {
    pub datum: Option<(f64, f64)>,
    pub class_order: Vec<EdgeClass>,
    pub spacing_m: Option<f64>,
    pub extension_m: Option<f64>,
}

/// Compiled semantic airport graph.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AirportGraph {
    pub nodes: BTreeMap<NodeId, MapNode>,
    pub edges: Vec<ClassifiedEdge>,
    pub meta: GraphMeta,
    /// Endpoints of hold-line edges, sorted.
    #[serde(default)]
    pub hold_line_index: Vec<NodeId>,
}

impl AirportGraph {
    pub fn from_json(bytes: &[u8]) -> Result<Self, MapError> {
        let mut g: AirportGraph = serde_json::from_slice(bytes).map_err(|e| MapError::Json(e.to_string()))?;
        for e in &g.edges {
            for id in [e.a, e.b] {
                if !g.nodes.contains_key(&id) {
                    return Err(MapError::UnknownNode(id));
                }
            }
        }
        g.refresh_index();
        Ok(g)
    }

    pub fn to_json(&self) -> Vec<u8> {
        serde_json::to_vec_pretty(self).expect("airport graph serializes")
    }

    fn refresh_index(&mut self) {
        self.hold_line_index = self.hold_line_nodes();
    }

    pub fn edge_length(&self, e: &ClassifiedEdge) -> f64 {
        self.nodes[&e.a].dist(&self.nodes[&e.b])
    }

    pub fn count_class(&self, class: EdgeClass) -> usize {
        self.edges.iter().filter(|e| e.class == class).count()
    }

    pub fn hold_line_nodes(&self) -> Vec<NodeId> {
        let set: BTreeSet<NodeId> =
            self.edges.iter().filter(|e| e.class == EdgeClass::HoldLine).flat_map(|e| [e.a, e.b]).collect();
        set.into_iter().collect()
    }

    /// Nodes touched by at least one runway edge and at least one taxiway edge.
    pub fn runway_taxiway_junctions(&self) -> Vec<NodeId> {
        let mut classes: BTreeMap<NodeId, [bool; 3]> = BTreeMap::new();
        for e in &self.edges {
            for id in [e.a, e.b] {
                classes.entry(id).or_default()[e.class.index()] = true;
            }
        }
        classes.into_iter().filter(|(_, c)| c[0] && c[1]).map(|(id, _)| id).collect()
    }

    /// Nodes where two or more distinct runway polylines meet (runway degree ≥ 3).
    pub fn runway_runway_junctions(&self) -> Vec<NodeId> {
        let deg = self.degree_by_class(EdgeClass::Runway);
        deg.into_iter().filter(|&(_, d)| d >= 3).map(|(id, _)| id).collect()
    }

    /// Conflict points: runway/taxiway junctions plus hold-line nodes, sorted by id.
    pub fn conflict_nodes(&self) -> Vec<NodeId> {
        let set: BTreeSet<NodeId> =
            self.runway_taxiway_junctions().into_iter().chain(self.hold_line_nodes()).collect();
        set.into_iter().collect()
    }

    fn degree_by_class(&self, class: EdgeClass) -> BTreeMap<NodeId, usize> {
        let mut deg = BTreeMap::new();
        for e in self.edges.iter().filter(|e| e.class == class) {
            *deg.entry(e.a).or_insert(0) += 1;
            *deg.entry(e.b).or_insert(0) += 1;
        }
        deg
    }

    fn next_id(&self) -> NodeId {
        self.nodes.keys().next_back().map_or(0, |k| k + 1)
    }

    /// Structural invariants of a compiled graph; returns the first violation.
    pub fn check_invariants(&self) -> Result<(), String> {
        for e in &self.edges {
            for id in [e.a, e.b] {
                if !self.nodes.contains_key(&id) {
                    return Err(format!("edge endpoint {id} missing"));
                }
            }
            if e.a == e.b || self.edge_length(e) == 0.0 {
                return Err(format!("degenerate edge {}-{}", e.a, e.b));
            }
        }
        let used: BTreeSet<NodeId> = self.edges.iter().flat_map(|e| [e.a, e.b]).collect();
        if used.len() != self.nodes.len() {
            return Err(format!("{} orphan nodes", self.nodes.len() - used.len()));
        }
        Ok(())
    }
}

/// Keeps centerline edges, assigns each a class and drops orphan nodes.
/// Self-loops and zero-length edges are dropped as well.
pub fn filter_and_classify(raw: &RoutingGraph, rules: &TagRules) -> Result<AirportGraph, MapError> {
    raw.validate()?;
    let mut edges = Vec::new();
    for RawEdge(a, b, tags) in &raw.edges {
        if !rules.keeps(tags) {
            continue;
        }
        let class = rules.classify(tags).ok_or_else(|| MapError::UnclassifiableEdge(tags.clone()))?;
        if a == b || raw.nodes[a].dist(&raw.nodes[b]) == 0.0 {
            continue;
        }
        edges.push(ClassifiedEdge { a: *a, b: *b, class });
    }
    let used: BTreeSet<NodeId> = edges.iter().flat_map(|e| [e.a, e.b]).collect();
    let nodes = raw.nodes.iter().filter(|(id, _)| used.contains(id)).map(|(id, n)| (*id, *n)).collect();
    let mut g = AirportGraph {
        nodes,
        edges,
        meta: GraphMeta { class_order: CLASS_ORDER.to_vec(), ..GraphMeta::default() },
        hold_line_index: Vec::new(),
    };
    g.refresh_index();
    Ok(g)
}

/// Extends every runway polyline end (runway-degree-1 node) outward by
/// `distance_m` along its terminal segment.
pub fn extend_runways_by(g: &AirportGraph, distance_m: f64) -> Result<AirportGraph, MapError> {
    let mut out = g.clone();
    let deg = g.degree_by_class(EdgeClass::Runway);
    let mut next = g.next_id();
    for (&end, _) in deg.iter().filter(|(_, &d)| d == 1) {
        let e = g
            .edges
            .iter()
            .find(|e| e.class == EdgeClass::Runway && (e.a == end || e.b == end))
            .expect("degree-1 runway node has an edge");
        let inner = if e.a == end { e.b } else { e.a };
        let (pe, pi) = (g.nodes[&end], g.nodes[&inner]);
        let len = pe.dist(&pi);
        if len < 1e-9 {
            return Err(MapError::DegenerateRunway(end));
        }
        let ext = MapNode::along(&pi, &pe, 1.0 + distance_m / len);
        out.nodes.insert(next, ext);
        out.edges.push(ClassifiedEdge { a: end, b: next, class: EdgeClass::Runway });
        next += 1;
    }
    out.meta.extension_m = Some(distance_m);
    out.refresh_index();
    Ok(out)
}

/// Extends runway ends by one nautical mile.
pub fn extend_runways(g: &AirportGraph) -> Result<AirportGraph, MapError> {
    extend_runways_by(g, METERS_PER_NM)
}

/// Splits every runway edge longer than `spacing_m` into equal pieces no longer than `spacing_m`.
pub fn supersample_runways(g: &AirportGraph, spacing_m: f64) -> Result<AirportGraph, MapError> {
    if !(spacing_m > 0.0) {
        return Err(MapError::InvalidSpacing(spacing_m));
    }
    let mut out = AirportGraph { nodes: g.nodes.clone(), edges: Vec::new(), meta: g.meta.clone(), hold_line_index: Vec::new() };
    let mut next = g.next_id();
    for e in &g.edges {
        let len = g.edge_length(e);
        if e.class != EdgeClass::Runway || len <= spacing_m {
            out.edges.push(*e);
            continue;
        }
        let pieces = ((len / spacing_m) - 1e-9).ceil() as usize;
        let (pa, pb) = (g.nodes[&e.a], g.nodes[&e.b]);
        let mut prev = e.a;
        for k in 1..pieces {
            out.nodes.insert(next, MapNode::along(&pa, &pb, k as f64 / pieces as f64));
            out.edges.push(ClassifiedEdge { a: prev, b: next, class: EdgeClass::Runway });
            prev = next;
            next += 1;
        }
        out.edges.push(ClassifiedEdge { a: prev, b: e.b, class: EdgeClass::Runway });
    }
    out.meta.spacing_m = Some(spacing_m);
    out.refresh_index();
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompileOptions {
    /// When set, node x/y are recomputed from lat/lon around this datum.
    pub datum: Option<(f64, f64)>,
    pub spacing_m: f64,
    pub extension_m: f64,
}

impl Default for CompileOptions {
    fn default() -> Self {
        Self { datum: None, spacing_m: 10.0, extension_m: METERS_PER_NM }
    }
}

/// Full compilation: classify → extend → supersample.
pub fn compile(raw: &RoutingGraph, rules: &TagRules, opts: &CompileOptions) -> Result<AirportGraph, MapError> {
    let mut raw = raw.clone();
    if let Some(datum) = opts.datum {
        for n in raw.nodes.values_mut() {
            let (x, y) = project_local(n.lat, n.lon, datum);
            n.x = x;
            n.y = y;
        }
    }
    let g = filter_and_classify(&raw, rules)?;
    let g = extend_runways_by(&g, opts.extension_m)?;
    let mut g = supersample_runways(&g, opts.spacing_m)?;
    g.meta.datum = opts.datum;
    Ok(g)
}

/// Edge encoding `[d_s, d_e, a]`; `d` is `(lat, lon, x_rel, y_rel)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapVector {
    pub start: NodeId,
    pub end: NodeId,
    pub d_s: [f64; 4],
    pub d_e: [f64; 4],
    pub a: [f64; 3],
}

impl MapVector {
    pub fn class(&self) -> EdgeClass {
        let i = self.a.iter().position(|&v| v == 1.0).expect("one-hot class");
        CLASS_ORDER[i]
    }

    pub fn is_valid_one_hot(&self) -> bool {
        self.a.iter().filter(|&&v| v == 1.0).count() == 1 && self.a.iter().all(|&v| v == 0.0 || v == 1.0)
    }

    pub fn to_array(&self) -> [f64; 11] {
        let mut out = [0.0; 11];
        out[..4].copy_from_slice(&self.d_s);
        out[4..8].copy_from_slice(&self.d_e);
        out[8..].copy_from_slice(&self.a);
        out
    }
}

/// One vector per edge, coordinates relative to `datum`.
pub fn vectorize_graph(g: &AirportGraph, datum: (f64, f64)) -> Vec<MapVector> {
    let d = |id: NodeId| {
        let n = &g.nodes[&id];
        let (x, y) = project_local(n.lat, n.lon, datum);
        [n.lat, n.lon, x, y]
    };
    g.edges
        .iter()
        .map(|e| MapVector { start: e.a, end: e.b, d_s: d(e.a), d_e: d(e.b), a: e.class.one_hot() })
        .collect()
}

/// Exactly `P` rows of `PATCH_DIM` features plus a validity mask.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContextPatch {
    pub rows: Vec<[f64; PATCH_DIM]>,
    pub mask: Vec<bool>,
}

impl ContextPatch {
    pub fn empty(p: usize) -> Self {
        Self { rows: vec![[0.0; PATCH_DIM]; p], mask: vec![false; p] }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn valid_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Re-expresses valid rows from the `from` frame into the `to` frame (both world poses).
    pub fn reframe(&self, from: &Pose2, to: &Pose2) -> ContextPatch {
        let mut out = self.clone();
        for (row, &m) in out.rows.iter_mut().zip(&self.mask) {
            if !m {
                continue;
            }
            let (wx, wy) = from.to_world(row[0], row[1]);
            let (lx, ly) = to.to_local(wx, wy);
            let (s, c) = from.theta.sin_cos();
            let (dwx, dwy) = (c * row[5] - s * row[6], s * row[5] + c * row[6]);
            let (dx, dy) = to.rotate_to_local(dwx, dwy);
            row[0] = lx;
            row[1] = ly;
            row[5] = dx;
            row[6] = dy;
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PatchPoint {
    pub node: NodeId,
    pub x: f64,
    pub y: f64,
    pub class: EdgeClass,
    pub dir: (f64, f64),
}

/// Unique map nodes of a vectorized map, each with the class and direction of
/// the first vector (in input order) that contains it.
#[derive(Clone, Debug)]
pub struct PatchIndex {
    points: Vec<PatchPoint>,
}

impl PatchIndex {
    pub fn new(vectors: &[MapVector]) -> Result<Self, MapError> {
        if vectors.is_empty() {
            return Err(MapError::EmptyMap);
        }
        let mut seen: BTreeMap<NodeId, PatchPoint> = BTreeMap::new();
        for v in vectors {
            let (dx, dy) = (v.d_e[2] - v.d_s[2], v.d_e[3] - v.d_s[3]);
            let n = dx.hypot(dy);
            let dir = if n > 0.0 { (dx / n, dy / n) } else { (0.0, 0.0) };
            for (id, d) in [(v.start, v.d_s), (v.end, v.d_e)] {
                seen.entry(id).or_insert(PatchPoint { node: id, x: d[2], y: d[3], class: v.class(), dir });
            }
        }
        Ok(Self { points: seen.into_values().collect() })
    }

    pub fn points(&self) -> &[PatchPoint] {
        &self.points
    }

    /// Indices of the `p` nodes nearest to `(x, y)`, ordered by (distance, node id).
    pub fn nearest(&self, x: f64, y: f64, p: usize) -> Vec<usize> {
        let key = |i: usize| {
            let q = &self.points[i];
            ((q.x - x).powi(2) + (q.y - y).powi(2), q.node)
        };
        let cmp = |a: &usize, b: &usize| key(*a).partial_cmp(&key(*b)).expect("finite distances");
        let mut idx: Vec<usize> = (0..self.points.len()).collect();
        if p < idx.len() {
            idx.select_nth_unstable_by(p, cmp);
            idx.truncate(p);
        }
        idx.sort_by(cmp);
        idx
    }

    /// Patch of the `p` nodes nearest to `select_at`, expressed in `frame`.
    pub fn patch_at(&self, select_at: (f64, f64), frame: &Pose2, p: usize) -> Result<ContextPatch, MapError> {
        if p == 0 {
            return Err(MapError::InvalidPatchSize);
        }
        let mut patch = ContextPatch::empty(p);
        for (row, i) in self.nearest(select_at.0, select_at.1, p).into_iter().enumerate() {
            let q = &self.points[i];
            let (x, y) = frame.to_local(q.x, q.y);
            let (dx, dy) = frame.rotate_to_local(q.dir.0, q.dir.1);
            let a = q.class.one_hot();
            patch.rows[row] = [x, y, a[0], a[1], a[2], dx, dy];
            patch.mask[row] = true;
        }
        Ok(patch)
    }

    /// Patch selected at and expressed relative to `ref_pose`.
    pub fn patch(&self, ref_pose: &Pose2, p: usize) -> Result<ContextPatch, MapError> {
        self.patch_at((ref_pose.x, ref_pose.y), ref_pose, p)
    }
}

/// The `p` map nodes nearest to `ref_pose`, in its frame.
pub fn local_patch(vectors: &[MapVector], ref_pose: &Pose2, p: usize) -> Result<ContextPatch, MapError> {
    PatchIndex::new(vectors)?.patch(ref_pose, p)
}

/// Query helpers the scorer needs: hold-line and conflict point positions.
#[derive(Clone, Debug, Default)]
pub struct MapContext {
    pub hold_points: Vec<(f64, f64)>,
    pub conflict_points: Vec<(f64, f64)>,
}

impl MapContext {
    pub fn from_graph(g: &AirportGraph) -> Self {
        let pos = |id: &NodeId| (g.nodes[id].x, g.nodes[id].y);
        Self {
            hold_points: g.hold_line_nodes().iter().map(pos).collect(),
            conflict_points: g.conflict_nodes().iter().map(pos).collect(),
        }
    }

    /// Rigidly transforms every point into the frame of `pose`.
    pub fn transformed(&self, pose: &Pose2) -> Self {
        let f = |&(x, y): &(f64, f64)| pose.to_local(x, y);
        Self {
            hold_points: self.hold_points.iter().map(f).collect(),
            conflict_points: self.conflict_points.iter().map(f).collect(),
        }
    }

    fn nearest_dist(points: &[(f64, f64)], x: f64, y: f64) -> f64 {
        points.iter().map(|&(px, py)| (px - x).hypot(py - y)).fold(f64::INFINITY, f64::min)
    }

    pub fn dist_to_hold(&self, x: f64, y: f64) -> f64 {
        Self::nearest_dist(&self.hold_points, x, y)
    }

    pub fn dist_to_conflict(&self, x: f64, y: f64) -> f64 {
        Self::nearest_dist(&self.conflict_points, x, y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn node(x: f64, y: f64) -> MapNode {
        MapNode { lat: 47.0 + y * 1e-5, lon: -122.0 + x * 1e-5, x, y }
    }

    fn tags(k: &str, v: &str) -> BTreeMap<String, String> {
        BTreeMap::from([(k.to_string(), v.to_string())])
    }

    fn fixture() -> RoutingGraph {
        let mut g = RoutingGraph::default();
        for i in 0..30u64 {
            g.nodes.insert(i, node(i as f64 * 10.0, (i % 3) as f64 * 7.0));
        }
        let mut e = |a, b, k: &str, v: &str| g.edges.push(RawEdge(a, b, tags(k, v)));
        for i in 0..3 {
            e(i, i + 1, "aeroway", "runway");
        }
        for i in 5..10 {
            e(i, i + 1, "aeroway", "taxiway");
        }
        e(12, 13, "aeroway", "holding_position");
        e(14, 15, "aeroway", "holding_position");
        for i in 20..24 {
            e(i, i + 1, "aeroway", "apron");
        }
        g
    }

    #[test]
    fn classification_counts() {
        let g = filter_and_classify(&fixture(), &TagRules::default()).unwrap();
        assert_eq!(g.edges.len(), 10);
        assert_eq!(g.count_class(EdgeClass::Runway), 3);
        assert_eq!(g.count_class(EdgeClass::Taxiway), 5);
        assert_eq!(g.count_class(EdgeClass::HoldLine), 2);
        assert_eq!(g.hold_line_index, vec![12, 13, 14, 15]);
        g.check_invariants().unwrap();
        // Apron-only nodes are gone.
        assert!(!g.nodes.contains_key(&22));
    }

    #[test]
    fn runway_tag_maps_to_runway() {
        let mut raw = RoutingGraph::default();
        raw.nodes.insert(1, node(0.0, 0.0));
        raw.nodes.insert(2, node(100.0, 0.0));
        raw.edges.push(RawEdge(1, 2, tags("aeroway", "runway")));
        let g = filter_and_classify(&raw, &TagRules::default()).unwrap();
        assert_eq!(g.edges[0].class, EdgeClass::Runway);
    }

    #[test]
    fn unclassifiable_kept_edge_errors() {
        let mut raw = fixture();
        raw.edges.push(RawEdge(0, 1, tags("aeroway", "taxilane")));
        let rules = TagRules {
            classes: vec![ClassRule { class: EdgeClass::Runway, any: vec![TagMatch::new("aeroway", &["runway"])] }],
            ..TagRules::default()
        };
        assert!(matches!(filter_and_classify(&raw, &rules), Err(MapError::UnclassifiableEdge(_))));
    }

    #[test]
    fn unknown_node_rejected() {
        let mut raw = fixture();
        raw.edges.push(RawEdge(0, 999, BTreeMap::new()));
        assert_eq!(raw.validate(), Err(MapError::UnknownNode(999)));
    }

    fn straight_runway(len: f64) -> AirportGraph {
        let mut raw = RoutingGraph::default();
        raw.nodes.insert(1, node(0.0, 0.0));
        raw.nodes.insert(2, node(len / 2.0, 0.0));
        raw.nodes.insert(3, node(len, 0.0));
        raw.edges.push(RawEdge(1, 2, tags("aeroway", "runway")));
        raw.edges.push(RawEdge(2, 3, tags("aeroway", "runway")));
        filter_and_classify(&raw, &TagRules::default()).unwrap()
    }

    fn runway_length(g: &AirportGraph) -> f64 {
        g.edges.iter().filter(|e| e.class == EdgeClass::Runway).map(|e| g.edge_length(e)).sum()
    }

    #[test]
    fn extension_adds_one_nm_per_end() {
        let g = straight_runway(3000.0);
        let ext = extend_runways(&g).unwrap();
        assert!((runway_length(&ext) - (3000.0 + 2.0 * 1852.0)).abs() < 1e-6);
        assert_eq!(ext.nodes.len(), 5);
        // Collinear with the terminal segment.
        let n4 = ext.nodes[&4];
        let bearing_ext = (n4.y - ext.nodes[&1].y).atan2(n4.x - ext.nodes[&1].x);
        let bearing_seg = (ext.nodes[&1].y - ext.nodes[&2].y).atan2(ext.nodes[&1].x - ext.nodes[&2].x);
        assert!((bearing_ext - bearing_seg).abs() < 1e-9);
    }

    #[test]
    fn taxiway_only_graph_unchanged_by_extension() {
        let mut raw = RoutingGraph::default();
        raw.nodes.insert(1, node(0.0, 0.0));
        raw.nodes.insert(2, node(50.0, 0.0));
        raw.edges.push(RawEdge(1, 2, tags("aeroway", "taxiway")));
        let g = filter_and_classify(&raw, &TagRules::default()).unwrap();
        let ext = extend_runways(&g).unwrap();
        assert_eq!(ext.nodes, g.nodes);
        assert_eq!(ext.edges, g.edges);
    }

    #[test]
    fn degenerate_runway() {
        let mut g = straight_runway(100.0);
        let n1 = g.nodes[&1];
        // Terminal segment 1-2 collapses after moving node 1 onto node 2 but
        // filter would drop it, so build the graph by hand.
        g.nodes.insert(1, MapNode { x: g.nodes[&2].x, y: g.nodes[&2].y, ..n1 });
        assert_eq!(extend_runways(&g), Err(MapError::DegenerateRunway(1)));
    }

    #[test]
    fn supersample_hundred_meters() {
        let mut raw = RoutingGraph::default();
        raw.nodes.insert(1, node(0.0, 0.0));
        raw.nodes.insert(2, node(100.0, 0.0));
        raw.edges.push(RawEdge(1, 2, tags("aeroway", "runway")));
        let g = filter_and_classify(&raw, &TagRules::default()).unwrap();
        let s = supersample_runways(&g, 10.0).unwrap();
        assert_eq!(s.edges.len(), 10);
        assert_eq!(s.nodes.len(), 11);
        assert!(s.edges.iter().all(|e| e.class == EdgeClass::Runway && s.edge_length(e) <= 10.0 + 1e-9));
        // Shorter than spacing: no-op.
        let s = supersample_runways(&g, 150.0).unwrap();
        assert_eq!(s.edges, g.edges);
        assert_eq!(supersample_runways(&g, 0.0), Err(MapError::InvalidSpacing(0.0)));
    }

    #[test]
    fn vectorize_one_hot_and_dims() {
        let mut raw = RoutingGraph::default();
        raw.nodes.insert(1, node(0.0, 0.0));
        raw.nodes.insert(2, node(5.0, 0.0));
        raw.edges.push(RawEdge(1, 2, tags("aeroway", "holding_position")));
        let g = filter_and_classify(&raw, &TagRules::default()).unwrap();
        let v = vectorize_graph(&g, (47.0, -122.0));
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].a, [0.0, 0.0, 1.0]);
        assert_eq!(v[0].d_s.len(), 4);
        assert_eq!(v[0].class(), EdgeClass::HoldLine);
        assert_ne!(v[0].d_s, v[0].d_e);
        let full = filter_and_classify(&fixture(), &TagRules::default()).unwrap();
        let vs = vectorize_graph(&full, (47.0, -122.0));
        assert_eq!(vs.len(), full.edges.len());
        assert!(vs.iter().all(MapVector::is_valid_one_hot));
    }

    #[test]
    fn patch_self_nearest_and_padding() {
        let g = filter_and_classify(&fixture(), &TagRules::default()).unwrap();
        let vs = vectorize_graph(&g, (47.0, -122.0));
        let idx = PatchIndex::new(&vs).unwrap();
        let p0 = idx.points()[3];
        let patch = idx.patch(&Pose2::new(p0.x, p0.y, 0.3), 1).unwrap();
        assert!(patch.rows[0][0].abs() < 1e-12 && patch.rows[0][1].abs() < 1e-12);
        let n = idx.points().len();
        let patch = idx.patch(&Pose2::new(0.0, 0.0, 0.0), 100).unwrap();
        assert_eq!(patch.valid_count(), n);
        assert_eq!(patch.len(), 100);
        assert!(patch.rows[n..].iter().all(|r| r.iter().all(|&v| v == 0.0)));
        assert_eq!(local_patch(&[], &Pose2::new(0.0, 0.0, 0.0), 3), Err(MapError::EmptyMap));
        assert_eq!(idx.patch(&Pose2::new(0.0, 0.0, 0.0), 0), Err(MapError::InvalidPatchSize));
    }

    #[test]
    fn json_roundtrip_is_deterministic() {
        let g = compile(&fixture(), &TagRules::default(), &CompileOptions::default()).unwrap();
        let a = g.to_json();
        let back = AirportGraph::from_json(&a).unwrap();
        assert_eq!(back.to_json(), a);
        let raw = fixture();
        assert_eq!(RoutingGraph::from_json(&raw.to_json()).unwrap(), raw);
    }

    #[test]
    fn raw_json_format() {
        let json = br#"{"nodes": {"1": {"lat": 47.0, "lon": -122.0, "x": 0, "y": 0},
                                  "2": {"lat": 47.0, "lon": -121.99, "x": 760, "y": 0}},
                        "edges": [[1, 2, {"aeroway": "runway", "ref": "16L/34R"}]]}"#;
        let g = RoutingGraph::from_json(json).unwrap();
        assert_eq!(g.edges[0].2["ref"], "16L/34R");
    }
}
