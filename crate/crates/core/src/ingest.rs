//! Track ingestion: CSV parsing, geofence filtering, 1 Hz resampling and the
//! local Cartesian projection.
//!
//! [`PositionReport`] keeps the units of the track CSV (feet, km, knots,
//! degrees). Conversion to canonical SI units happens once, through the
//! accessor methods, when tracks are turned into scene states.

use crate::geo::{angle_diff, heading_deg_to_yaw, wrap_angle, EARTH_RADIUS_M, METERS_PER_FOOT, MPS_PER_KNOT};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;
use thiserror::Error;

/// Column names of the track CSV, in canonical output order.
pub const CSV_COLUMNS: [&str; 13] = [
    "Frame", "ID", "Altitude", "Range", "Bearing", "Lat", "Lon", "Speed", "Heading", "x", "y", "Type",
    "Interp",
];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IngestError {
    #[error("track csv has no header row")]
    FatalHeader,
    #[error("track csv is missing column `{0}`")]
    MissingColumn(String),
    #[error("track needs at least 2 reports, got {0}")]
    TooShort(usize),
    #[error("frames decrease at report {index} ({prev} -> {next})")]
    NonMonotonicTime { index: usize, prev: i64, next: i64 },
    #[error("invalid geofence: {0}")]
    InvalidFence(String),
    #[error("csv: {0}")]
    Csv(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AgentType {
    Aircraft = 0,
    Vehicle = 1,
    Unknown = 2,
}

impl AgentType {
    pub fn from_code(code: i64) -> Option<Self> {
        match code {
            0 => Some(AgentType::Aircraft),
            1 => Some(AgentType::Vehicle),
            2 => Some(AgentType::Unknown),
            _ => None,
        }
    }

    pub fn code(self) -> u8 {
        self as u8
    }
}

/// One row of a track CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PositionReport {
    /// Timestamp (s).
    pub frame: i64,
    pub agent_id: String,
    /// Feet above mean sea level.
    pub altitude_ft: f64,
    /// Distance from the airport datum (km).
    pub range_km: f64,
    /// Bearing from north (rad).
    pub bearing_rad: f64,
    pub lat: f64,
    pub lon: f64,
    pub speed_kt: f64,
    /// Degrees clockwise from north.
    pub heading_deg: f64,
    pub x_km: f64,
    pub y_km: f64,
    pub agent_type: AgentType,
    pub interp: bool,
}

impl PositionReport {
    pub fn x_m(&self) -> f64 {
        self.x_km * 1000.0
    }

    pub fn y_m(&self) -> f64 {
        self.y_km * 1000.0
    }

    pub fn altitude_m(&self) -> f64 {
        self.altitude_ft * METERS_PER_FOOT
    }

    pub fn speed_mps(&self) -> f64 {
        self.speed_kt * MPS_PER_KNOT
    }

    /// Planar yaw (rad, CCW from east).
    pub fn yaw(&self) -> f64 {
        heading_deg_to_yaw(self.heading_deg)
    }
}

/// A malformed data row that was skipped during parsing.
#[derive(Clone, Debug, PartialEq)]
pub struct MalformedRow {
    /// 1-based line number in the file (the header is line 1).
    pub line: u64,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParsedTracks {
    pub reports: Vec<PositionReport>,
    pub malformed: Vec<MalformedRow>,
}

/// Parses a track CSV. Header names are matched case-insensitively; rows that
/// fail to parse are skipped and reported in [`ParsedTracks::malformed`].
pub fn parse_track_csv(bytes: &[u8]) -> Result<ParsedTracks, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let mut records = rdr.records();
    let header = match records.next() {
        None => return Err(IngestError::FatalHeader),
        Some(r) => r.map_err(|e| IngestError::Csv(e.to_string()))?,
    };
    let lower: Vec<String> = header.iter().map(|h| h.to_ascii_lowercase()).collect();
    let known = lower
        .iter()
        .filter(|h| CSV_COLUMNS.iter().any(|c| c.eq_ignore_ascii_case(h)))
        .count();
    if known == 0 {
        return Err(IngestError::FatalHeader);
    }
    let mut idx = [0usize; 13];
    for (slot, name) in idx.iter_mut().zip(CSV_COLUMNS) {
        *slot = lower
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| IngestError::MissingColumn(name.to_string()))?;
    }

    let mut out = ParsedTracks::default();
    for (row_no, rec) in records.enumerate() {
        let line = row_no as u64 + 2;
        let rec = match rec {
            Ok(r) => r,
            Err(e) => {
                out.malformed.push(MalformedRow { line, reason: e.to_string() });
                continue;
            }
        };
        match parse_row(&rec, &idx) {
            Ok(r) => out.reports.push(r),
            Err(reason) => out.malformed.push(MalformedRow { line, reason }),
        }
    }
    Ok(out)
}

fn parse_row(rec: &csv::StringRecord, idx: &[usize; 13]) -> Result<PositionReport, String> {
    let field = |i: usize| -> Result<&str, String> {
        rec.get(idx[i]).ok_or_else(|| format!("missing field {}", CSV_COLUMNS[i]))
    };
    let num = |i: usize| -> Result<f64, String> {
        let s = field(i)?;
        let v: f64 = s.parse().map_err(|_| format!("{}: not a number: {s:?}", CSV_COLUMNS[i]))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(format!("{}: not finite", CSV_COLUMNS[i]))
        }
    };
    let frame_f = num(0)?;
    if frame_f < 0.0 || frame_f.fract() != 0.0 {
        return Err(format!("Frame: expected a nonnegative integer, got {frame_f}"));
    }
    let lat = num(5)?;
    let lon = num(6)?;
    if !(-90.0..=90.0).contains(&lat) {
        return Err(format!("Lat out of range: {lat}"));
    }
    if !(-180.0..=180.0).contains(&lon) {
        return Err(format!("Lon out of range: {lon}"));
    }
    let type_code = num(11)?;
    let agent_type = AgentType::from_code(type_code as i64)
        .filter(|_| type_code.fract() == 0.0)
        .ok_or_else(|| format!("Type: unknown code {type_code}"))?;
    let interp = match field(12)?.to_ascii_lowercase().as_str() {
        "1" | "true" | "t" | "yes" => true,
        "0" | "false" | "f" | "no" | "" => false,
        other => return Err(format!("Interp: not a boolean: {other:?}")),
    };
    Ok(PositionReport {
        frame: frame_f as i64,
        agent_id: field(1)?.to_string(),
        altitude_ft: num(2)?,
        range_km: num(3)?,
        bearing_rad: num(4)?,
        lat,
        lon,
        speed_kt: num(7)?,
        heading_deg: num(8)?,
        x_km: num(9)?,
        y_km: num(10)?,
        agent_type,
        interp,
    })
}

/// Serializes reports with the canonical header.
pub fn write_track_csv(reports: &[PositionReport]) -> Result<Vec<u8>, IngestError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| IngestError::Csv(e.to_string());
    w.write_record(CSV_COLUMNS).map_err(err)?;
    for r in reports {
        w.write_record([
            r.frame.to_string(),
            r.agent_id.clone(),
            r.altitude_ft.to_string(),
            r.range_km.to_string(),
            r.bearing_rad.to_string(),
            r.lat.to_string(),
            r.lon.to_string(),
            r.speed_kt.to_string(),
            r.heading_deg.to_string(),
            r.x_km.to_string(),
            r.y_km.to_string(),
            r.agent_type.code().to_string(),
            (r.interp as u8).to_string(),
        ])
        .map_err(err)?;
    }
    w.into_inner().map_err(|e| IngestError::Csv(e.to_string()))
}

/// A polygonal fence with an altitude ceiling above ground level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeoFence {
    /// `[lat, lon]` vertices; the last vertex connects back to the first.
    pub polygon: Vec<[f64; 2]>,
    pub ceiling_agl_ft: f64,
    pub ground_elevation_msl_ft: f64,
}

impl GeoFence {
    pub fn validate(&self) -> Result<(), IngestError> {
        let n = self.polygon.len();
        if n < 3 {
            return Err(IngestError::InvalidFence(format!("need >= 3 vertices, got {n}")));
        }
        if !(self.ceiling_agl_ft > 0.0) {
            return Err(IngestError::InvalidFence("ceiling must be positive".into()));
        }
        for i in 0..n {
            for j in i + 1..n {
                // Adjacent edges share a vertex by construction.
                if j == i + 1 || (i == 0 && j == n - 1) {
                    continue;
                }
                let (a, b) = (self.polygon[i], self.polygon[(i + 1) % n]);
                let (c, d) = (self.polygon[j], self.polygon[(j + 1) % n]);
                if segments_intersect(a, b, c, d) {
                    return Err(IngestError::InvalidFence(format!("edges {i} and {j} intersect")));
                }
            }
        }
        Ok(())
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, IngestError> {
        let fence: GeoFence =
            serde_json::from_slice(bytes).map_err(|e| IngestError::InvalidFence(e.to_string()))?;
        fence.validate()?;
        Ok(fence)
    }

    /// Point-in-polygon by ray casting; points on an edge count as inside.
    pub fn contains(&self, lat: f64, lon: f64) -> bool {
        point_in_polygon(&self.polygon, [lat, lon])
    }
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn on_segment(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> bool {
    let scale = (b[0] - a[0]).abs().max((b[1] - a[1]).abs()).max(1e-300);
    cross(a, b, p).abs() <= 1e-12 * scale * scale
        && p[0] >= a[0].min(b[0])
        && p[0] <= a[0].max(b[0])
        && p[1] >= a[1].min(b[1])
        && p[1] <= a[1].max(b[1])
}

fn segments_intersect(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]) -> bool {
    let d1 = cross(c, d, a);
    let d2 = cross(c, d, b);
    let d3 = cross(a, b, c);
    let d4 = cross(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    on_segment(a, c, d) || on_segment(b, c, d) || on_segment(c, a, b) || on_segment(d, a, b)
}

fn point_in_polygon(poly: &[[f64; 2]], p: [f64; 2]) -> bool {
    let n = poly.len();
    let mut inside = false;
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        if on_segment(p, a, b) {
            return true;
        }
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let t = (p[1] - a[1]) / (b[1] - a[1]);
            if p[0] < a[0] + t * (b[0] - a[0]) {
                inside = !inside;
            }
        }
    }
    inside
}

/// Keeps reports inside the fence polygon and at or below its ceiling. Order is preserved.
pub fn filter_airspace(reports: &[PositionReport], fence: &GeoFence) -> Vec<PositionReport> {
    reports
        .iter()
        .filter(|r| {
            r.altitude_ft - fence.ground_elevation_msl_ft <= fence.ceiling_agl_ft && fence.contains(r.lat, r.lon)
        })
        .cloned()
        .collect()
}

/// Small-area projection around `datum` (`(lat, lon)` in degrees). Returns meters east/north.
pub fn project_local(lat: f64, lon: f64, datum: (f64, f64)) -> (f64, f64) {
    let (lat0, lon0) = datum;
    let x = EARTH_RADIUS_M * (lon - lon0).to_radians() * lat0.to_radians().cos();
    let y = EARTH_RADIUS_M * (lat - lat0).to_radians();
    (x, y)
}

/// Inverse of [`project_local`].
pub fn unproject_local(x: f64, y: f64, datum: (f64, f64)) -> (f64, f64) {
    let (lat0, lon0) = datum;
    let lat = lat0 + (y / EARTH_RADIUS_M).to_degrees();
    let lon = lon0 + (x / (EARTH_RADIUS_M * lat0.to_radians().cos())).to_degrees();
    (lat, lon)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResampleConfig {
    /// Raw gaps longer than this split the agent into separate tracks (s).
    pub max_gap_s: i64,
    /// When set, `x`/`y` are recomputed from lat/lon with [`project_local`].
    pub datum: Option<(f64, f64)>,
}

impl Default for ResampleConfig {
    fn default() -> Self {
        Self { max_gap_s: 30, datum: None }
    }
}

/// A single agent's track at exactly 1 Hz.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentTrack {
    pub agent_id: String,
    pub agent_type: AgentType,
    pub samples: Vec<PositionReport>,
    pub origin_datum: Option<(f64, f64)>,
}

impl AgentTrack {
    pub fn first_frame(&self) -> i64 {
        self.samples.first().map_or(0, |s| s.frame)
    }

    pub fn last_frame(&self) -> i64 {
        self.samples.last().map_or(-1, |s| s.frame)
    }

    /// Sample at `frame`, if covered.
    pub fn at(&self, frame: i64) -> Option<&PositionReport> {
        let i = frame - self.first_frame();
        if i < 0 {
            return None;
        }
        self.samples.get(i as usize)
    }
}

fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + (b - a) * t
}

fn lerp_heading_deg(a: f64, b: f64, t: f64) -> f64 {
    let d = angle_diff(a.to_radians(), b.to_radians()).to_degrees();
    (a + d * t).rem_euclid(360.0)
}

fn lerp_bearing_rad(a: f64, b: f64, t: f64) -> f64 {
    let v = a + angle_diff(a, b) * t;
    if a >= 0.0 && b >= 0.0 {
        v.rem_euclid(2.0 * PI)
    } else {
        wrap_angle(v)
    }
}

fn interpolate(a: &PositionReport, b: &PositionReport, frame: i64) -> PositionReport {
    let t = (frame - a.frame) as f64 / (b.frame - a.frame) as f64;
    PositionReport {
        frame,
        agent_id: a.agent_id.clone(),
        altitude_ft: lerp(a.altitude_ft, b.altitude_ft, t),
        range_km: lerp(a.range_km, b.range_km, t),
        bearing_rad: lerp_bearing_rad(a.bearing_rad, b.bearing_rad, t),
        lat: lerp(a.lat, b.lat, t),
        lon: lerp(a.lon, b.lon, t),
        speed_kt: lerp(a.speed_kt, b.speed_kt, t),
        heading_deg: lerp_heading_deg(a.heading_deg, b.heading_deg, t),
        x_km: lerp(a.x_km, b.x_km, t),
        y_km: lerp(a.y_km, b.y_km, t),
        agent_type: a.agent_type,
        interp: true,
    }
}

/// Resamples one agent's reports to 1 Hz.
///
/// Duplicate frames keep their first occurrence. Gaps longer than
/// `cfg.max_gap_s` split the output into separate tracks with no bridging
/// samples, so a single raw report between two long gaps yields a one-sample track.
pub fn resample_track(raw: &[PositionReport], cfg: &ResampleConfig) -> Result<Vec<AgentTrack>, IngestError> {
    if raw.len() < 2 {
        return Err(IngestError::TooShort(raw.len()));
    }
    let mut dedup: Vec<&PositionReport> = Vec::with_capacity(raw.len());
    for (i, r) in raw.iter().enumerate() {
        if let Some(prev) = dedup.last() {
            if r.frame == prev.frame {
                continue;
            }
            if r.frame < prev.frame {
                return Err(IngestError::NonMonotonicTime { index: i, prev: prev.frame, next: r.frame });
            }
        }
        dedup.push(r);
    }
    if dedup.len() < 2 {
        return Err(IngestError::TooShort(dedup.len()));
    }

    let fix = |mut r: PositionReport| {
        if let Some(datum) = cfg.datum {
            let (x, y) = project_local(r.lat, r.lon, datum);
            r.x_km = x / 1000.0;
            r.y_km = y / 1000.0;
        }
        r
    };
    let new_track = |first: &PositionReport| AgentTrack {
        agent_id: first.agent_id.clone(),
        agent_type: first.agent_type,
        samples: Vec::new(),
        origin_datum: cfg.datum,
    };

    let mut tracks = Vec::new();
    let mut cur = new_track(dedup[0]);
    cur.samples.push(fix(PositionReport { interp: false, ..dedup[0].clone() }));
    for pair in dedup.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if b.frame - a.frame > cfg.max_gap_s {
            tracks.push(std::mem::replace(&mut cur, new_track(b)));
        } else {
            for f in a.frame + 1..b.frame {
                cur.samples.push(fix(interpolate(a, b, f)));
            }
        }
        cur.samples.push(fix(PositionReport { interp: false, ..b.clone() }));
    }
    tracks.push(cur);
    Ok(tracks)
}

/// Groups reports by agent id (sorted ids), stable-sorting each group by frame.
pub fn group_by_agent(reports: &[PositionReport]) -> BTreeMap<String, Vec<PositionReport>> {
    let mut groups: BTreeMap<String, Vec<PositionReport>> = BTreeMap::new();
    for r in reports {
        groups.entry(r.agent_id.clone()).or_default().push(r.clone());
    }
    for g in groups.values_mut() {
        g.sort_by_key(|r| r.frame);
    }
    groups
}

/// Groups, sorts and resamples every agent. Agents that cannot be resampled
/// (fewer than two distinct frames) are returned alongside their error.
pub fn build_tracks(
    reports: &[PositionReport],
    cfg: &ResampleConfig,
) -> (Vec<AgentTrack>, Vec<(String, IngestError)>) {
    let mut tracks = Vec::new();
    let mut rejected = Vec::new();
    for (id, group) in group_by_agent(reports) {
        match resample_track(&group, cfg) {
            Ok(ts) => tracks.extend(ts),
            Err(e) => rejected.push((id, e)),
        }
    }
    (tracks, rejected)
}
