//! SVG scene plots in the ego frame: map context, observed history, ground truth and predicted modes.

use std::fmt::Write;
use surfcast::model::Prediction;
use surfcast::scenes::Scene;

const SIZE: f64 = 640.0;
const MARGIN: f64 = 24.0;
const MODE_COLORS: [&str; 6] = ["#d62728", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#bcbd22"];

struct Frame {
    min_x: f64,
    max_y: f64,
    scale: f64,
}

impl Frame {
    fn fit(points: &[(f64, f64)]) -> Self {
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for &(x, y) in points {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        if !x0.is_finite() {
            (x0, x1, y0, y1) = (-50.0, 50.0, -50.0, 50.0);
        }
        let span = (x1 - x0).max(y1 - y0).max(20.0);
        let (cx, cy) = ((x0 + x1) / 2.0, (y0 + y1) / 2.0);
        Self { min_x: cx - span / 2.0, max_y: cy + span / 2.0, scale: (SIZE - 2.0 * MARGIN) / span }
    }

    fn px(&self, x: f64, y: f64) -> (f64, f64) {
        (MARGIN + (x - self.min_x) * self.scale, MARGIN + (self.max_y - y) * self.scale)
    }
}

fn polyline(out: &mut String, f: &Frame, pts: &[(f64, f64)], style: &str) {
    if pts.len() < 2 {
        return;
    }
    let coords: Vec<String> = pts
        .iter()
        .map(|&(x, y)| {
            let (u, v) = f.px(x, y);
            format!("{u:.1},{v:.1}")
        })
        .collect();
    let _ = writeln!(out, r#"<polyline fill="none" {style} points="{}"/>"#, coords.join(" "));
}

/// Renders one scene. With `prediction`, the `horizon` first steps of every mode are drawn,
/// with opacity growing with the mode probability.
pub fn scene_svg(scene: &Scene, prediction: Option<&Prediction>, horizon: usize, title: &str) -> String {
    let t_o = scene.t_o;
    let mut history = Vec::new();
    let mut truth = Vec::new();
    for row in &scene.agents {
        let valid = |t: &usize| row.get(*t).is_some_and(|s| s.valid);
        history.push((0..=t_o).filter(valid).map(|t| (row[t].x, row[t].y)).collect::<Vec<_>>());
        truth.push((t_o..=t_o + horizon).filter(valid).map(|t| (row[t].x, row[t].y)).collect::<Vec<_>>());
    }
    let modes: Vec<Vec<(f64, Vec<(f64, f64)>)>> = prediction
        .map(|p| {
            p.trajectories
                .iter()
                .map(|agent| agent.iter().map(|m| (m.rho, m.ego.iter().take(horizon).map(|q| (q[0], q[1])).collect())).collect())
                .collect()
        })
        .unwrap_or_default();

    let mut all: Vec<(f64, f64)> = history.iter().chain(&truth).flatten().copied().collect();
    for (k, agent) in modes.iter().enumerate() {
        if scene.agent_ids[k].is_some() {
            all.extend(agent.iter().flat_map(|(_, t)| t.iter().copied()));
        }
    }
    let f = Frame::fit(&all);

    let mut out = String::new();
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#);
    let _ = writeln!(out, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##);
    let _ = writeln!(out, r#"<text x="8" y="16" font-family="monospace" font-size="12">{title}</text>"#);
    for patch in &scene.patches {
        for (row, _) in patch.rows.iter().zip(&patch.mask).filter(|(_, &m)| m) {
            let (u, v) = f.px(row[0], row[1]);
            if (0.0..=SIZE).contains(&u) && (0.0..=SIZE).contains(&v) {
                let _ = writeln!(out, r##"<circle cx="{u:.1}" cy="{v:.1}" r="1.5" fill="#bbbbbb"/>"##);
            }
        }
    }
    for (k, id) in scene.agent_ids.iter().enumerate() {
        if id.is_none() {
            continue;
        }
        if let Some(agent) = modes.get(k) {
            for (m, (rho, path)) in agent.iter().enumerate() {
                let color = MODE_COLORS[m % MODE_COLORS.len()];
                let alpha = 0.25 + 0.75 * rho.clamp(0.0, 1.0);
                let mut pts = history[k].last().copied().into_iter().collect::<Vec<_>>();
                pts.extend(path);
                polyline(&mut out, &f, &pts, &format!(r#"stroke="{color}" stroke-width="1.5" stroke-opacity="{alpha:.2}""#));
            }
        }
        polyline(&mut out, &f, &truth[k], r##"stroke="#2ca02c" stroke-width="2" stroke-dasharray="4 3""##);
        polyline(&mut out, &f, &history[k], r##"stroke="#1f77b4" stroke-width="2.5""##);
        if let Some(&(x, y)) = history[k].last() {
            let (u, v) = f.px(x, y);
            let fill = if k == scene.ego_index { "#000000" } else { "#1f77b4" };
            let _ = writeln!(out, r#"<circle cx="{u:.1}" cy="{v:.1}" r="3.5" fill="{fill}"/>"#);
        }
    }
    let legend = [("#1f77b4", "observed"), ("#2ca02c", "ground truth"), ("#d62728", "predicted modes")];
    for (i, (color, label)) in legend.iter().enumerate() {
        let y = SIZE - 12.0 - 14.0 * i as f64;
        let _ = writeln!(out, r#"<line x1="8" y1="{y}" x2="28" y2="{y}" stroke="{color}" stroke-width="2.5"/>"#);
        let _ = writeln!(out, r#"<text x="32" y="{}" font-family="monospace" font-size="11">{label}</text>"#, y + 4.0);
    }
    out.push_str("</svg>\n");
    out
}
