//! Procedural airports: runways, a taxiway network with hold lines at every
//! runway entry, and aprons (tagged so the map compiler drops them).

use crate::airmap::{compile, AirportGraph, CompileOptions, MapError, MapNode, NodeId, RawEdge, RoutingGraph, TagRules};
use crate::ingest::unproject_local;
use crate::scorer::mix_seed;
use petgraph::algo::astar;
use petgraph::graph::{NodeIndex, UnGraph};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AirportSize {
    Small,
    Medium,
}

impl FromStr for AirportSize {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "small" => Ok(Self::Small),
            "medium" => Ok(Self::Medium),
            o => Err(format!("unknown airport size {o:?} (small|medium)")),
        }
    }
}

/// Runway layout: one runway, two parallel runways, or two intersecting runways.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    Single,
    Parallel,
    Intersecting,
}

impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Topology::Single => "S",
            Topology::Parallel => "P",
            Topology::Intersecting => "I",
        })
    }
}

/// Surface class of a path segment, used for speed limits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegKind {
    Runway,
    Taxiway,
    Apron,
    Air,
}

/// A runway entry: taxiway node → hold-line node → runway node.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Entry {
    pub runway: usize,
    pub runway_node: NodeId,
    pub hold: NodeId,
    pub taxi: NodeId,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Runway {
    /// Runway nodes in order from one end to the other.
    pub nodes: Vec<NodeId>,
    /// Arrivals only (no entry at either end).
    pub landing_only: bool,
}

#[derive(Clone, Debug)]
pub struct SynthLayout {
    pub pos: BTreeMap<NodeId, (f64, f64)>,
    pub runways: Vec<Runway>,
    pub entries: Vec<Entry>,
    pub stands: Vec<NodeId>,
    kinds: BTreeMap<(NodeId, NodeId), SegKind>,
    net: UnGraph<NodeId, f64>,
    index: BTreeMap<NodeId, NodeIndex>,
}

fn key(a: NodeId, b: NodeId) -> (NodeId, NodeId) {
    (a.min(b), a.max(b))
}

impl SynthLayout {
    pub fn xy(&self, n: NodeId) -> (f64, f64) {
        self.pos[&n]
    }

    pub fn kind(&self, a: NodeId, b: NodeId) -> Option<SegKind> {
        self.kinds.get(&key(a, b)).copied()
    }

    /// Shortest drivable route; runway edges cost ten times their length.
    pub fn route(&self, from: NodeId, to: NodeId) -> Option<Vec<NodeId>> {
        let (s, t) = (*self.index.get(&from)?, *self.index.get(&to)?);
        let (_, path) = astar(&self.net, s, |n| n == t, |e| *e.weight(), |_| 0.0)?;
        Some(path.into_iter().map(|i| self.net[i]).collect())
    }

    pub fn entries_of(&self, runway: usize) -> Vec<&Entry> {
        self.entries.iter().filter(|e| e.runway == runway).collect()
    }
}

#[derive(Clone, Debug)]
pub struct SynthAirport {
    pub id: String,
    pub size: AirportSize,
    pub topology: Topology,
    pub datum: (f64, f64),
    pub field_elevation_ft: f64,
    pub raw: RoutingGraph,
    pub graph: AirportGraph,
    pub layout: SynthLayout,
}

struct Builder {
    nodes: BTreeMap<NodeId, (f64, f64)>,
    edges: Vec<(NodeId, NodeId, &'static str)>,
    next: NodeId,
}

impl Builder {
    fn node(&mut self, x: f64, y: f64) -> NodeId {
        let id = self.next;
        self.next += 1;
        self.nodes.insert(id, (x, y));
        id
    }

    fn edge(&mut self, a: NodeId, b: NodeId, aeroway: &'static str) {
        self.edges.push((a, b, aeroway));
    }

    /// Chain of nodes along y = `y` at the given x positions, joined by `aeroway` edges.
    fn chain(&mut self, y: f64, xs: &[f64], aeroway: &'static str) -> BTreeMap<i64, NodeId> {
        let mut out = BTreeMap::new();
        let mut prev = None;
        for &x in xs {
            let id = self.node(x, y);
            out.insert(x.round() as i64, id);
            if let Some(p) = prev {
                self.edge(p, id, aeroway);
            }
            prev = Some(id);
        }
        out
    }

    /// Connector from a taxiway node to a runway node with a hold line `hold_off` metres from the runway.
    fn entry(&mut self, taxi: NodeId, rwy: NodeId, hold_off: f64, runway: usize) -> Entry {
        let (tx, ty) = self.nodes[&taxi];
        let (rx, ry) = self.nodes[&rwy];
        let len = (rx - tx).hypot(ry - ty);
        let (ux, uy) = ((rx - tx) / len, (ry - ty) / len);
        let (hx, hy) = (rx - ux * hold_off, ry - uy * hold_off);
        let hold = self.node(hx, hy);
        self.edge(taxi, hold, "taxiway");
        self.edge(hold, rwy, "taxiway");
        let l = self.node(hx - uy * 20.0, hy + ux * 20.0);
        let r = self.node(hx + uy * 20.0, hy - ux * 20.0);
        self.edge(l, hold, "holding_position");
        self.edge(hold, r, "holding_position");
        Entry { runway, runway_node: rwy, hold, taxi }
    }
}

fn spaced(from: f64, to: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| (from + (to - from) * i as f64 / (n - 1) as f64).round()).collect()
}

fn merged(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut v: Vec<f64> = a.iter().chain(b).copied().collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// Seeded airport; medium airports pick parallel or intersecting runways from the seed.
pub fn synth_airport(seed: u64, size: AirportSize) -> SynthAirport {
    let topology = match size {
        AirportSize::Small => Topology::Single,
        AirportSize::Medium if mix_seed(seed, 99) % 2 == 0 => Topology::Parallel,
        AirportSize::Medium => Topology::Intersecting,
    };
    synth_airport_with(seed, size, topology, &format!("SYN{}", seed % 1000))
}

pub fn synth_airport_with(seed: u64, size: AirportSize, topology: Topology, id: &str) -> SynthAirport {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 0xA1));
    let length = 2500.0 + 100.0 * rng.gen_range(0..=10) as f64;
    let (n_entries, n_stands) = match size {
        AirportSize::Small => (5, 6),
        AirportSize::Medium => (7, 10),
    };
    let mut b = Builder { nodes: BTreeMap::new(), edges: Vec::new(), next: 1 };
    let entry_x = spaced(0.0, length, n_entries);
    let stand_x = spaced(0.2 * length, 0.8 * length, n_stands);
    let mut runways = Vec::new();
    let mut entries = Vec::new();
    let mut stands = Vec::new();

    let rwy1 = b.chain(0.0, &entry_x, "runway");
    runways.push(Runway { nodes: rwy1.values().copied().collect(), landing_only: false });
    let taxi_a = b.chain(-180.0, &merged(&entry_x, &stand_x), "taxiway");
    for x in &entry_x {
        let k = x.round() as i64;
        entries.push(b.entry(taxi_a[&k], rwy1[&k], 60.0, 0));
    }

    match topology {
        Topology::Single | Topology::Intersecting => {
            for x in &stand_x {
                let s = b.node(*x, -330.0);
                b.edge(taxi_a[&(x.round() as i64)], s, "apron");
                stands.push(s);
            }
        }
        Topology::Parallel => {
            let rwy2 = b.chain(-600.0, &entry_x, "runway");
            runways.push(Runway { nodes: rwy2.values().copied().collect(), landing_only: false });
            let taxi_b = b.chain(-420.0, &merged(&entry_x, &stand_x), "taxiway");
            for x in &entry_x {
                let k = x.round() as i64;
                entries.push(b.entry(taxi_b[&k], rwy2[&k], 60.0, 1));
            }
            for x in &stand_x {
                let k = x.round() as i64;
                let s = b.node(*x, -300.0);
                b.edge(taxi_a[&k], s, "apron");
                b.edge(s, taxi_b[&k], "apron");
                stands.push(s);
            }
            let (first, last) = (entry_x[0].round() as i64, entry_x[entry_x.len() - 1].round() as i64);
            b.edge(taxi_a[&first], taxi_b[&first], "taxiway");
            b.edge(taxi_a[&last], taxi_b[&last], "taxiway");
        }
    }
    if topology == Topology::Intersecting {
        let mid = entry_x[n_entries / 2].round() as i64;
        let c = rwy1[&mid];
        let (cx, cy) = b.nodes[&c];
        let alpha = rng.gen_range(45.0f64..70.0).to_radians();
        let l2 = 2000.0 + 100.0 * rng.gen_range(0..=6) as f64;
        let m = b.node(cx + 0.5 * l2 * alpha.cos(), cy + 0.5 * l2 * alpha.sin());
        let e = b.node(cx + l2 * alpha.cos(), cy + l2 * alpha.sin());
        b.edge(c, m, "runway");
        b.edge(m, e, "runway");
        runways.push(Runway { nodes: vec![c, m, e], landing_only: true });
    }

    // Rigid placement in the local frame, then geodetic coordinates around the datum.
    let psi = rng.gen_range(-PI..PI);
    let (off_x, off_y) = (rng.gen_range(-800.0..800.0), rng.gen_range(-800.0..800.0));
    let datum = (rng.gen_range(25.0..55.0), rng.gen_range(-120.0..20.0));
    let field_elevation_ft = rng.gen_range(0.0..1500.0f64).round();
    let (s, c) = psi.sin_cos();
    let pos: BTreeMap<NodeId, (f64, f64)> =
        b.nodes.iter().map(|(&id, &(x, y))| (id, (c * x - s * y + off_x, s * x + c * y + off_y))).collect();

    let nodes = pos
        .iter()
        .map(|(&id, &(x, y))| {
            let (lat, lon) = unproject_local(x, y, datum);
            (id, MapNode { lat, lon, x, y })
        })
        .collect();
    let raw_edges = b
        .edges
        .iter()
        .map(|&(a, e, tag)| RawEdge(a, e, BTreeMap::from([("aeroway".to_string(), tag.to_string())])))
        .collect();
    let raw = RoutingGraph { nodes, edges: raw_edges };
    let graph = compile(&raw, &TagRules::default(), &CompileOptions { datum: Some(datum), ..CompileOptions::default() })
        .expect("synthetic routing graph compiles");

    let mut net = UnGraph::new_undirected();
    let mut index = BTreeMap::new();
    for &id in pos.keys() {
        index.insert(id, net.add_node(id));
    }
    let mut kinds = BTreeMap::new();
    for &(a, e, tag) in &b.edges {
        let kind = match tag {
            "runway" => SegKind::Runway,
            "taxiway" => SegKind::Taxiway,
            "apron" => SegKind::Apron,
            _ => continue,
        };
        let (pa, pe) = (pos[&a], pos[&e]);
        let len = (pa.0 - pe.0).hypot(pa.1 - pe.1);
        let w = if kind == SegKind::Runway { 10.0 * len } else { len };
        net.add_edge(index[&a], index[&e], w);
        kinds.insert(key(a, e), kind);
    }
    let layout = SynthLayout { pos, runways, entries, stands, kinds, net, index };
    SynthAirport { id: id.to_string(), size, topology, datum, field_elevation_ft, raw, graph, layout }
}

impl SynthAirport {
    /// Compiles the raw graph again with explicit options.
    pub fn recompile(&self, opts: &CompileOptions) -> Result<AirportGraph, MapError> {
        compile(&self.raw, &TagRules::default(), opts)
    }
}
