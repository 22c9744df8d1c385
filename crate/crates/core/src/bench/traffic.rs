//! Kinematic surface traffic on a synthetic airport: departures, arrivals, taxi
//! movements, service vehicles that hold short, and parked agents that never move.

use super::synth::{SegKind, SynthAirport};
use crate::geo::{yaw_to_heading_deg, wrap_angle, METERS_PER_FOOT, MPS_PER_KNOT};
use crate::ingest::{build_tracks, unproject_local, AgentTrack, AgentType, PositionReport, ResampleConfig};
use crate::scorer::mix_seed;
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub const LATERAL_ACCEL: f64 = 1.2;
const FILLET_RADIUS: f64 = 30.0;
const GLIDE_SLOPE: f64 = 0.0524;
const APPROACH_M: f64 = 1100.0;
const CLIMB_MPS: f64 = 3.0;
const LIFTOFF_MPS: f64 = 72.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Behavior {
    Departure,
    Arrival,
    Taxi,
    Vehicle,
    Parked,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrafficConfig {
    /// Length of the simulated day (s).
    pub duration_s: i64,
    /// Mean spacing between movement start times (s).
    pub mean_interval_s: f64,
    /// Agents parked for the whole day.
    pub parked_agents: usize,
    /// Relative weights of departures, arrivals, taxi movements and vehicles.
    pub mix: [f64; 4],
}

impl Default for TrafficConfig {
    fn default() -> Self {
        Self { duration_s: 1800, mean_interval_s: 60.0, parked_agents: 4, mix: [3.0, 3.0, 2.0, 2.0] }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sample {
    pub t: i64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub v: f64,
    pub yaw: f64,
    pub kind: SegKind,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthTrack {
    pub agent_id: String,
    pub agent_type: AgentType,
    pub behavior: Behavior,
    pub samples: Vec<Sample>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthDay {
    pub airport_id: String,
    pub day_id: String,
    pub tracks: Vec<SynthTrack>,
}

#[derive(Clone, Copy, Debug)]
struct Limits {
    runway: f64,
    taxiway: f64,
    apron: f64,
    air: f64,
}

impl Limits {
    fn of(&self, k: SegKind) -> f64 {
        match k {
            SegKind::Runway => self.runway,
            SegKind::Taxiway => self.taxiway,
            SegKind::Apron => self.apron,
            SegKind::Air => self.air,
        }
    }
}

fn accel(k: SegKind) -> f64 {
    match k {
        SegKind::Runway | SegKind::Air => 2.5,
        _ => 1.5,
    }
}

fn decel(k: SegKind) -> f64 {
    match k {
        SegKind::Runway | SegKind::Air => 2.5,
        _ => 2.0,
    }
}

#[derive(Clone, Copy, Debug)]
struct Dense {
    x: f64,
    y: f64,
    vmax: f64,
    kind: SegKind,
}

/// Polyline with rounded corners, resampled at ≤ 1 m, each point carrying its speed cap.
fn densify(pts: &[(f64, f64)], kinds: &[SegKind], lim: &Limits) -> Vec<Dense> {
    let mut p: Vec<(f64, f64)> = vec![pts[0]];
    let mut k: Vec<SegKind> = Vec::new();
    for (i, &q) in pts.iter().enumerate().skip(1) {
        let last = *p.last().unwrap();
        if (q.0 - last.0).hypot(q.1 - last.1) > 1e-6 {
            p.push(q);
            k.push(kinds[i - 1]);
        }
    }
    let n = p.len();
    let seg_len: Vec<f64> = p.windows(2).map(|w| (w[1].0 - w[0].0).hypot(w[1].1 - w[0].1)).collect();
    let dir: Vec<(f64, f64)> = p.windows(2).zip(&seg_len).map(|(w, l)| ((w[1].0 - w[0].0) / l, (w[1].1 - w[0].1) / l)).collect();
    // Tangent offset and radius at each corner.
    let mut corner = vec![(0.0, 0.0); n];
    for i in 1..n.saturating_sub(1) {
        let (a, b) = (dir[i - 1], dir[i]);
        let phi = (a.0 * b.0 + a.1 * b.1).clamp(-1.0, 1.0).acos();
        if phi < 1e-3 {
            continue;
        }
        let half = (phi / 2.0).tan();
        let d = (FILLET_RADIUS * half).min(0.45 * seg_len[i - 1].min(seg_len[i]));
        corner[i] = (d, d / half);
    }
    let mut out = vec![Dense { x: p[0].0, y: p[0].1, vmax: lim.of(k[0]), kind: k[0] }];
    for i in 0..n - 1 {
        let (ux, uy) = dir[i];
        let vmax = lim.of(k[i]);
        let s0 = corner[i].0;
        let s1 = seg_len[i] - corner[i + 1].0;
        let steps = ((s1 - s0).max(0.0)).ceil().max(1.0) as usize;
        for j in 1..=steps {
            let s = s0 + (s1 - s0) * j as f64 / steps as f64;
            out.push(Dense { x: p[i].0 + ux * s, y: p[i].1 + uy * s, vmax, kind: k[i] });
        }
        let (d, r) = corner[i + 1];
        if d > 0.0 {
            let (vx, vy) = dir[i + 1];
            let cross = ux * vy - uy * vx;
            let side = cross.signum();
            // Arc centre lies on the inside of the turn.
            let t0 = (p[i + 1].0 - ux * d, p[i + 1].1 - uy * d);
            let c = (t0.0 - side * uy * r, t0.1 + side * ux * r);
            let a0 = (t0.1 - c.1).atan2(t0.0 - c.0);
            let phi = (ux * vx + uy * vy).clamp(-1.0, 1.0).acos();
            let arc_len = r * phi;
            let spacing = (0.1 * r).clamp(0.05, 1.0);
            let steps = (arc_len / spacing).ceil().max(1.0) as usize;
            let cap = vmax.min(lim.of(k[i + 1])).min((LATERAL_ACCEL * r).sqrt());
            for j in 1..=steps {
                let a = a0 + side * phi * j as f64 / steps as f64;
                out.push(Dense { x: c.0 + r * a.cos(), y: c.1 + r * a.sin(), vmax: cap, kind: k[i + 1] });
            }
        }
    }
    out
}

/// Time-parameterized 1 Hz samples along a polyline from speed `v0` to `v1`.
/// Returns samples at t = 0, 1, … and the exact end time.
fn traverse(pts: &[(f64, f64)], kinds: &[SegKind], lim: &Limits, v0: f64, v1: f64) -> (Vec<Sample>, f64) {
    let d = densify(pts, kinds, lim);
    let n = d.len();
    let ds: Vec<f64> = d.windows(2).map(|w| (w[1].x - w[0].x).hypot(w[1].y - w[0].y)).collect();
    let mut v: Vec<f64> = d.iter().map(|p| p.vmax).collect();
    v[0] = v[0].min(v0);
    for i in 0..n - 1 {
        v[i + 1] = v[i + 1].min((v[i] * v[i] + 2.0 * accel(d[i + 1].kind) * ds[i]).sqrt());
    }
    v[n - 1] = v[n - 1].min(v1);
    for i in (0..n - 1).rev() {
        v[i] = v[i].min((v[i + 1] * v[i + 1] + 2.0 * decel(d[i].kind) * ds[i]).sqrt());
    }
    let mut t = vec![0.0; n];
    for i in 0..n - 1 {
        let vs = v[i] + v[i + 1];
        t[i + 1] = t[i] + if vs > 1e-9 { 2.0 * ds[i] / vs } else { 0.0 };
    }
    let t_end = t[n - 1];
    let mut out = Vec::new();
    let mut i = 0;
    let mut tau = 0i64;
    let mut yaw = (d[1.min(n - 1)].y - d[0].y).atan2(d[1.min(n - 1)].x - d[0].x);
    while tau as f64 <= t_end {
        let tf = tau as f64;
        while i + 1 < n - 1 && t[i + 1] <= tf {
            i += 1;
        }
        let dt = t[i + 1] - t[i];
        let (x, y, vel) = if dt <= 0.0 || ds[i] <= 0.0 {
            (d[i + 1].x, d[i + 1].y, v[i + 1])
        } else {
            let delta = (tf - t[i]).clamp(0.0, dt);
            let a = (v[i + 1] - v[i]) / dt;
            let s = (v[i] * delta + 0.5 * a * delta * delta).clamp(0.0, ds[i]);
            let f = s / ds[i];
            (d[i].x + f * (d[i + 1].x - d[i].x), d[i].y + f * (d[i + 1].y - d[i].y), v[i] + a * delta)
        };
        if ds[i] > 0.0 {
            yaw = (d[i + 1].y - d[i].y).atan2(d[i + 1].x - d[i].x);
        }
        out.push(Sample { t: tau, x, y, z: 0.0, v: vel.max(0.0), yaw, kind: d[i].kind });
        tau += 1;
    }
    (out, t_end)
}

struct Plan {
    samples: Vec<Sample>,
}

impl Plan {
    fn new() -> Self {
        Plan { samples: Vec::new() }
    }

    fn next_t(&self) -> i64 {
        self.samples.last().map_or(0, |s| s.t + 1)
    }

    /// Appends a leg; the agent waits at the end until the next whole second.
    fn leg(&mut self, pts: &[(f64, f64)], kinds: &[SegKind], lim: &Limits, v0: f64, v1: f64) {
        let base = self.next_t();
        let (s, _) = traverse(pts, kinds, lim, v0, v1);
        self.samples.extend(s.into_iter().map(|mut s| {
            s.t += base;
            s
        }));
    }

    fn wait(&mut self, seconds: i64) {
        let Some(&last) = self.samples.last() else { return };
        for i in 1..=seconds {
            self.samples.push(Sample { t: last.t + i, v: 0.0, ..last });
        }
    }
}

fn taxi_limits(vehicle: bool) -> Limits {
    let taxi = if vehicle { 10.0 } else { 12.0 };
    Limits { runway: taxi, taxiway: taxi, apron: 6.0, air: taxi }
}

fn node_path(a: &SynthAirport, nodes: &[u64]) -> (Vec<(f64, f64)>, Vec<SegKind>) {
    let pts = nodes.iter().map(|&n| a.layout.xy(n)).collect();
    let kinds = nodes.windows(2).map(|w| a.layout.kind(w[0], w[1]).unwrap_or(SegKind::Taxiway)).collect();
    (pts, kinds)
}

fn unit(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    let l = (b.0 - a.0).hypot(b.1 - a.1);
    ((b.0 - a.0) / l, (b.1 - a.1) / l)
}

fn along(a: &SynthAirport, runway: &[u64], node: u64) -> f64 {
    let p0 = a.layout.xy(runway[0]);
    let p = a.layout.xy(node);
    (p.0 - p0.0).hypot(p.1 - p0.1)
}

fn departure<R: Rng>(a: &SynthAirport, rng: &mut R) -> Option<Plan> {
    let candidates: Vec<usize> = (0..a.layout.runways.len()).filter(|&r| !a.layout.runways[r].landing_only).collect();
    let r = *candidates.choose(rng)?;
    let mut rwy = a.layout.runways[r].nodes.clone();
    if rng.gen_bool(0.5) {
        rwy.reverse();
    }
    let entry = *a.layout.entries_of(r).into_iter().find(|e| e.runway_node == rwy[0])?;
    let stand = *a.layout.stands.choose(rng)?;
    let mut route = a.layout.route(stand, entry.taxi)?;
    route.push(entry.hold);
    let lim = taxi_limits(false);
    let mut plan = Plan::new();
    let (pts, kinds) = node_path(a, &route);
    plan.leg(&pts, &kinds, &lim, 0.0, 0.0);
    plan.wait(rng.gen_range(5..60));

    let mut nodes = vec![entry.hold];
    nodes.extend(&rwy);
    let (mut pts, mut kinds) = node_path(a, &nodes);
    let end = *pts.last().unwrap();
    let u = unit(pts[pts.len() - 2], end);
    pts.push((end.0 + 2500.0 * u.0, end.1 + 2500.0 * u.1));
    kinds.push(SegKind::Air);
    let lim = Limits { runway: 85.0, taxiway: 12.0, apron: 6.0, air: 85.0 };
    let base = plan.next_t();
    let (roll, _) = traverse(&pts, &kinds, &lim, 0.0, 85.0);
    let mut z = 0.0;
    let mut airborne_at = None;
    for mut s in roll {
        if airborne_at.is_none() && s.v >= LIFTOFF_MPS && s.kind != SegKind::Taxiway {
            airborne_at = Some(s.t);
        }
        if let Some(t0) = airborne_at {
            z = CLIMB_MPS * (s.t - t0) as f64;
            s.kind = SegKind::Air;
            if s.t - t0 > 20 {
                break;
            }
        }
        s.z = z;
        s.t += base;
        plan.samples.push(s);
    }
    Some(plan)
}

fn arrival<R: Rng>(a: &SynthAirport, rng: &mut R) -> Option<Plan> {
    let r = rng.gen_range(0..a.layout.runways.len());
    let runway = &a.layout.runways[r];
    let mut rwy = runway.nodes.clone();
    if runway.landing_only {
        rwy.reverse();
    } else if rng.gen_bool(0.5) {
        rwy.reverse();
    }
    // Vacate at the first entry at least 1200 m past the threshold; the landing-only runway
    // turns onto the main runway at the intersection.
    let (exit, rollout) = if runway.landing_only {
        let main = &a.layout.runways[0].nodes;
        let junction = *rwy.last().unwrap();
        let j = main.iter().position(|&n| n == junction)?;
        let step: isize = if rng.gen_bool(0.5) { 1 } else { -1 };
        let next = main.get((j as isize + step) as usize).copied()?;
        let e = *a.layout.entries_of(0).into_iter().find(|e| e.runway_node == next)?;
        (e, vec![next])
    } else {
        let mut path = Vec::new();
        let mut found = None;
        for &n in &rwy[1..] {
            path.push(n);
            if along(a, &rwy, n) >= 1200.0 {
                if let Some(e) = a.layout.entries_of(r).into_iter().find(|e| e.runway_node == n) {
                    found = Some(*e);
                    break;
                }
            }
        }
        (found?, path)
    };
    let thr = a.layout.xy(rwy[0]);
    let u = unit(thr, a.layout.xy(rwy[1]));
    let start = (thr.0 - APPROACH_M * u.0, thr.1 - APPROACH_M * u.1);
    let mut pts = vec![start, thr];
    let mut kinds = vec![SegKind::Air];
    let stand = *a.layout.stands.choose(rng)?;
    let mut nodes: Vec<u64> = if runway.landing_only { rwy[1..].to_vec() } else { Vec::new() };
    nodes.extend(rollout);
    nodes.push(exit.hold);
    nodes.extend(a.layout.route(exit.taxi, stand)?);
    let mut prev = rwy[0];
    for n in nodes {
        pts.push(a.layout.xy(n));
        kinds.push(a.layout.kind(prev, n).unwrap_or(SegKind::Taxiway));
        prev = n;
    }
    let lim = Limits { runway: 70.0, taxiway: 12.0, apron: 6.0, air: 70.0 };
    let (samples, _) = traverse(&pts, &kinds, &lim, 70.0, 0.0);
    let samples = samples
        .into_iter()
        .map(|mut s| {
            if s.kind == SegKind::Air {
                let (dx, dy) = (thr.0 - s.x, thr.1 - s.y);
                s.z = GLIDE_SLOPE * (dx * u.0 + dy * u.1).max(0.0);
            }
            s
        })
        .collect();
    Some(Plan { samples })
}

fn taxi<R: Rng>(a: &SynthAirport, rng: &mut R) -> Option<Plan> {
    let from = *a.layout.stands.choose(rng)?;
    let to = *a.layout.stands.iter().filter(|&&s| s != from).collect::<Vec<_>>().choose(rng)?;
    let route = a.layout.route(from, *to)?;
    let (pts, kinds) = node_path(a, &route);
    let mut plan = Plan::new();
    plan.leg(&pts, &kinds, &taxi_limits(false), 0.0, 0.0);
    Some(plan)
}

fn vehicle<R: Rng>(a: &SynthAirport, rng: &mut R) -> Option<Plan> {
    let entry = *a.layout.entries.choose(rng)?;
    let from = *a.layout.stands.choose(rng)?;
    let to = *a.layout.stands.choose(rng)?;
    let lim = taxi_limits(true);
    let mut out = a.layout.route(from, entry.taxi)?;
    out.push(entry.hold);
    let mut plan = Plan::new();
    let (pts, kinds) = node_path(a, &out);
    plan.leg(&pts, &kinds, &lim, 0.0, 0.0);
    plan.wait(rng.gen_range(10..40));
    let mut back = vec![entry.hold];
    back.extend(a.layout.route(entry.taxi, to)?);
    let (pts, kinds) = node_path(a, &back);
    plan.leg(&pts, &kinds, &lim, 0.0, 0.0);
    Some(plan)
}

fn parked<R: Rng>(a: &SynthAirport, rng: &mut R, duration: i64) -> Option<Plan> {
    let stand = *a.layout.stands.choose(rng)?;
    let (x, y) = a.layout.xy(stand);
    let (x, y) = (x + rng.gen_range(-40.0..40.0), y + rng.gen_range(-40.0..40.0));
    let yaw = rng.gen_range(-PI..PI);
    let samples = (0..duration).map(|t| Sample { t, x, y, z: 0.0, v: 0.0, yaw, kind: SegKind::Apron }).collect();
    Some(Plan { samples })
}

/// One seeded day of traffic; movements start at exponential intervals and are cut at the day's end.
pub fn generate_day(airport: &SynthAirport, cfg: &TrafficConfig, seed: u64, day_id: &str) -> SynthDay {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 0x7A));
    let mut tracks = Vec::new();
    for i in 0..cfg.parked_agents {
        if let Some(p) = parked(airport, &mut rng, cfg.duration_s) {
            tracks.push(SynthTrack { agent_id: format!("P{i:03}"), agent_type: AgentType::Aircraft, behavior: Behavior::Parked, samples: p.samples });
        }
    }
    let behaviors = [Behavior::Departure, Behavior::Arrival, Behavior::Taxi, Behavior::Vehicle];
    let total: f64 = cfg.mix.iter().sum();
    let mut start = 0.0f64;
    let mut n = 0usize;
    loop {
        start += -cfg.mean_interval_s * (1.0 - rng.gen::<f64>()).ln();
        if start >= cfg.duration_s as f64 {
            break;
        }
        let mut pick = rng.gen::<f64>() * total;
        let mut behavior = behaviors[3];
        for (b, w) in behaviors.iter().zip(cfg.mix) {
            if pick < w {
                behavior = *b;
                break;
            }
            pick -= w;
        }
        let plan = match behavior {
            Behavior::Departure => departure(airport, &mut rng),
            Behavior::Arrival => arrival(airport, &mut rng),
            Behavior::Taxi => taxi(airport, &mut rng),
            Behavior::Vehicle => vehicle(airport, &mut rng),
            Behavior::Parked => None,
        };
        let Some(plan) = plan else { continue };
        let t0 = start.floor() as i64;
        let samples: Vec<Sample> = plan
            .samples
            .into_iter()
            .map(|mut s| {
                s.t += t0;
                s
            })
            .take_while(|s| s.t < cfg.duration_s)
            .collect();
        if samples.len() < 2 {
            continue;
        }
        let (prefix, agent_type) = match behavior {
            Behavior::Vehicle => ("V", AgentType::Vehicle),
            _ => ("A", AgentType::Aircraft),
        };
        tracks.push(SynthTrack { agent_id: format!("{prefix}{n:04}"), agent_type, behavior, samples });
        n += 1;
    }
    SynthDay { airport_id: airport.id.clone(), day_id: day_id.to_string(), tracks }
}

/// Position reports as a surveillance feed would deliver them.
pub fn to_reports(airport: &SynthAirport, day: &SynthDay) -> Vec<PositionReport> {
    let mut out = Vec::new();
    for tr in &day.tracks {
        for s in &tr.samples {
            let (lat, lon) = unproject_local(s.x, s.y, airport.datum);
            out.push(PositionReport {
                frame: s.t,
                agent_id: tr.agent_id.clone(),
                altitude_ft: airport.field_elevation_ft + s.z / METERS_PER_FOOT,
                range_km: s.x.hypot(s.y) / 1000.0,
                bearing_rad: wrap_angle(s.x.atan2(s.y)).rem_euclid(2.0 * PI),
                lat,
                lon,
                speed_kt: s.v / MPS_PER_KNOT,
                heading_deg: yaw_to_heading_deg(s.yaw),
                x_km: s.x / 1000.0,
                y_km: s.y / 1000.0,
                agent_type: tr.agent_type,
                interp: false,
            });
        }
    }
    out
}

/// Day of traffic resampled into 1 Hz agent tracks.
pub fn day_tracks(airport: &SynthAirport, day: &SynthDay) -> Vec<AgentTrack> {
    build_tracks(&to_reports(airport, day), &ResampleConfig::default()).0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::synth::{synth_airport, AirportSize};

    fn lim() -> Limits {
        Limits { runway: 80.0, taxiway: 12.0, apron: 6.0, air: 80.0 }
    }

    #[test]
    fn straight_line_timing() {
        let (s, t_end) = traverse(&[(0.0, 0.0), (100.0, 0.0)], &[SegKind::Taxiway], &lim(), 0.0, 0.0);
        assert_eq!(s[0].x, 0.0);
        assert!(s.iter().all(|p| p.v <= 12.0 + 1e-9));
        assert!((s.last().unwrap().x - 100.0).abs() < 12.0);
        assert!(t_end > 100.0 / 12.0);
        assert!(s.windows(2).all(|w| w[1].x >= w[0].x));
    }

    #[test]
    fn corners_respect_lateral_limit() {
        let pts = [(0.0, 0.0), (200.0, 0.0), (200.0, 200.0)];
        let d = densify(&pts, &[SegKind::Taxiway; 2], &lim());
        assert!(d.windows(2).all(|w| (w[1].x - w[0].x).hypot(w[1].y - w[0].y) <= 1.0 + 1e-9));
        let min_cap = d.iter().map(|p| p.vmax).fold(f64::INFINITY, f64::min);
        assert!((min_cap - (LATERAL_ACCEL * FILLET_RADIUS).sqrt()).abs() < 1e-9);
    }

    fn kinematics_ok(tr: &SynthTrack) -> Result<(), String> {
        for w in tr.samples.windows(2) {
            let (a, b) = (w[0], w[1]);
            if b.t != a.t + 1 {
                return Err(format!("{} gap {}→{}", tr.agent_id, a.t, b.t));
            }
            let dv = (b.v * b.yaw.cos() - a.v * a.yaw.cos()).hypot(b.v * b.yaw.sin() - a.v * a.yaw.sin());
            if dv > 3.0 {
                return Err(format!("{} |a|={dv:.2} at {} ({:?})", tr.agent_id, a.t, tr.behavior));
            }
        }
        for s in &tr.samples {
            let cap = match s.kind {
                SegKind::Runway | SegKind::Air => 90.0,
                _ => 15.0,
            };
            if s.v > cap + 1e-9 {
                return Err(format!("{} speed {} on {:?}", tr.agent_id, s.v, s.kind));
            }
        }
        Ok(())
    }

    #[test]
    fn traffic_is_plausible() {
        for (seed, size) in [(1, AirportSize::Small), (2, AirportSize::Medium), (3, AirportSize::Medium)] {
            let a = synth_airport(seed, size);
            let day = generate_day(&a, &TrafficConfig::default(), seed, "day00");
            let kinds: std::collections::BTreeSet<_> = day.tracks.iter().map(|t| t.behavior).collect();
            assert!(kinds.len() >= 4, "{kinds:?}");
            for tr in &day.tracks {
                kinematics_ok(tr).unwrap();
            }
        }
    }

    #[test]
    fn reports_resample_to_one_hertz() {
        let a = synth_airport(5, AirportSize::Small);
        let day = generate_day(&a, &TrafficConfig { duration_s: 600, ..TrafficConfig::default() }, 5, "d");
        let tracks = day_tracks(&a, &day);
        assert_eq!(tracks.len(), day.tracks.len());
        for t in &tracks {
            assert!(t.samples.windows(2).all(|w| w[1].frame == w[0].frame + 1));
            assert!(t.samples.iter().all(|s| !s.interp));
        }
    }

    #[test]
    fn seeded() {
        let a = synth_airport(4, AirportSize::Medium);
        let c = TrafficConfig::default();
        assert_eq!(generate_day(&a, &c, 9, "d"), generate_day(&a, &c, 9, "d"));
        assert_ne!(generate_day(&a, &c, 9, "d"), generate_day(&a, &c, 10, "d"));
    }
}
