//! Acceptance suite. Runs every criterion (or those named by number on the
//! command line) and prints one PASS/FAIL line each; exits nonzero on any failure.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};
use surfcast::airmap::{compile, extend_runways_by, filter_and_classify, vectorize_graph, CompileOptions, EdgeClass, RoutingGraph, TagRules, CLASS_ORDER};
use surfcast::bench::fixtures::{random_raw_scene, random_scene};
use surfcast::bench::{
    cv_modes, evaluate, min_ade, min_fde, plant_stationary, split_days, synth_airport, synth_corpus, AirportSize, Displacement, TrafficConfig,
};
use surfcast::geo::Pose2;
use surfcast::ingest::{build_tracks, filter_airspace, parse_track_csv, GeoFence, PositionReport, ResampleConfig};
use surfcast::model::gmm::decode;
use surfcast::model::{adam_for, gradient_check, train, LossConfig, Model, ModelConfig, SceneInput, Tensor, TrainConfig};
use surfcast::scenes::{assemble_scene, RawScene, SceneConfig, SceneMap};
use surfcast::scorer::{selection_stats, ScorerConfig, Strategy};
use surfcast::Exec;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn fixture(name: &str) -> Vec<u8> {
    std::fs::read(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)).expect("fixture exists")
}

fn gradient_correctness() -> Outcome {
    let start = Instant::now();
    let cfg = ModelConfig { velocity_scale: 1.0, sigma_scale: 1.0, ..ModelConfig::tiny(4) };
    assert_eq!((cfg.hidden, cfg.heads, cfg.tic_blocks, cfg.modes, cfg.future), (16, 2, 1, 2, 4));
    let (mut worst, mut at, mut checked) = (0.0f64, String::new(), 0);
    for s in 0..6u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let scene = random_scene(&mut rng, 2, 4, 4, 6);
        let mut model = Model::new(cfg, s).unwrap();
        let input = SceneInput::from_scene(&scene, &cfg).unwrap();
        let r = gradient_check(&mut model, &input, &LossConfig::default(), 1e-4).unwrap();
        assert_eq!(r.checked, model.params.scalar_count());
        checked += r.checked;
        if r.max_rel_error > worst {
            worst = r.max_rel_error;
            at = format!("scene {s}, {}", r.worst);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(worst < 1e-4 && secs < 60.0, format!("max rel error {worst:.2e} ({at}) over {checked} scalars, {secs:.1}s"))
}

fn causality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (k, h) = (4, 8);
    let cfg = ModelConfig { tic_blocks: 2, ..ModelConfig::tiny(4) };
    let model = Model::new(cfg, 3).unwrap();
    let (mut worst, mut moved_later) = (0.0f64, 0);
    for _ in 0..100 {
        let scene = random_scene(&mut rng, k, h, 4, 6);
        let tp = rng.gen_range(0..h);
        let step = scene.t_o + 1 - h + tp;
        let mut perturbed = scene.clone();
        for (row, id) in perturbed.agents.iter_mut().zip(&scene.agent_ids) {
            if id.is_none() {
                continue;
            }
            let s = &mut row[step];
            if rng.gen_bool(0.2) {
                s.valid = !s.valid;
            }
            s.x += rng.gen_range(-50.0..50.0);
            s.y += rng.gen_range(-50.0..50.0);
            s.z += rng.gen_range(-5.0..5.0);
            s.theta += rng.gen_range(-1.0..1.0);
        }
        let a = model.encode(&SceneInput::from_scene(&scene, &cfg).unwrap()).unwrap();
        let b = model.encode(&SceneInput::from_scene(&perturbed, &cfg).unwrap()).unwrap();
        let mut later = 0.0f64;
        for q in 0..a.rows {
            let d = a.row(q).iter().zip(b.row(q)).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            if q % h < tp {
                worst = worst.max(d);
            } else {
                later = later.max(d);
            }
        }
        if later > 0.0 {
            moved_later += 1;
        }
    }
    outcome(worst <= 1e-12, format!("max change before t' {worst:.1e}; perturbation reached later steps in {moved_later}/100 scenes"))
}

fn permutation_equivariance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let cfg = ModelConfig { tic_blocks: 2, modes: 3, ..ModelConfig::tiny(8) };
    let model = Model::new(cfg, 4).unwrap();
    let loss = LossConfig::default();
    let k = 6;
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let scene = random_scene(&mut rng, k, 6, 8, 8);
        let mut order: Vec<usize> = (0..k).collect();
        order.shuffle(&mut rng);
        let a = model.predict(&scene, &loss).unwrap().gmm;
        let b = model.predict(&scene.permuted(&order), &loss).unwrap().gmm;
        for (i, &src) in order.iter().enumerate() {
            for m in 0..cfg.modes {
                for t in 0..cfg.future {
                    for (x, y) in a.at(src, m, t).iter().zip(b.at(i, m, t)) {
                        worst = worst.max((x - y).abs());
                    }
                }
            }
        }
    }
    outcome(worst <= 1e-6, format!("max deviation {worst:.1e} over 100 permutations of K={k}"))
}

fn gmm_contracts() -> Outcome {
    let cfg = ModelConfig::default();
    let loss = LossConfig::default();
    let model = Model::new(cfg, 0).unwrap();
    let head = model.head(&loss);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut worst_sum, mut min_margin, mut finite) = (0.0f64, f64::INFINITY, true);
    let k = 5;
    for _ in 0..1000 {
        let scale = [0.01, 1.0, 10.0, 100.0, 1000.0][rng.gen_range(0..5)];
        let data: Vec<f64> = (0..k * head.raw_width()).map(|_| rng.gen_range(-1.0..1.0) * scale).collect();
        let raw = Tensor::from_vec(k, head.raw_width(), data);
        let anchors: Vec<[f64; 3]> = (0..k * head.future).map(|_| [rng.gen_range(-1e3..1e3), rng.gen_range(-1e3..1e3), 0.0]).collect();
        let p = decode(&raw, &anchors, &head).unwrap();
        finite &= p.data.iter().all(|v| v.is_finite());
        for a in 0..k {
            let s: f64 = (0..head.modes).map(|m| p.rho(a, m)).sum();
            worst_sum = worst_sum.max((s - 1.0).abs());
            for m in 0..head.modes {
                for t in 0..head.future {
                    for v in p.sigma(a, m, t) {
                        min_margin = min_margin.min(v - loss.sigma_floor);
                    }
                }
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let scene = random_scene(&mut rng, 5, 10, 50, 100);
    let shape = model.predict(&scene, &loss).unwrap().gmm.shape();
    let pass = worst_sum <= 1e-6 && min_margin >= 0.0 && finite && shape == [5, 4, 50, 7];
    outcome(pass, format!("max |sum rho - 1| {worst_sum:.1e}, min sigma - floor {min_margin:.2e}, default output shape {shape:?}"))
}

fn brute_ade(modes: &[Vec<[f64; 3]>], gt: &[[f64; 3]], mask: &[bool], h: usize, d: Displacement) -> f64 {
    let mut best = f64::INFINITY;
    for m in modes {
        let (mut sum, mut n) = (0.0, 0usize);
        for t in 0..h {
            if mask[t] {
                sum += dist(&m[t], &gt[t], d);
                n += 1;
            }
        }
        let ade = sum / n as f64;
        if ade < best {
            best = ade;
        }
    }
    best
}

fn brute_fde(modes: &[Vec<[f64; 3]>], gt: &[[f64; 3]], mask: &[bool], h: usize, d: Displacement) -> f64 {
    let last = (0..h).filter(|&t| mask[t]).last().unwrap();
    let mut best = f64::INFINITY;
    for m in modes {
        let e = dist(&m[last], &gt[last], d);
        if e < best {
            best = e;
        }
    }
    best
}

fn dist(a: &[f64; 3], b: &[f64; 3], d: Displacement) -> f64 {
    let (dx, dy, dz) = (a[0] - b[0], a[1] - b[1], a[2] - b[2]);
    match d {
        Displacement::Planar => dx.hypot(dy),
        Displacement::Spatial => (dx * dx + dy * dy + dz * dz).sqrt(),
    }
}

fn metric_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut mismatches, mut worst_rigid) = (0, 0.0f64);
    for case in 0..1000 {
        let m_n = rng.gen_range(1..=8);
        let f = rng.gen_range(1..=30);
        let h = rng.gen_range(1..=f);
        let disp = if case % 2 == 0 { Displacement::Planar } else { Displacement::Spatial };
        let pt = |rng: &mut ChaCha8Rng| [rng.gen_range(-500.0..500.0), rng.gen_range(-500.0..500.0), rng.gen_range(-20.0..20.0)];
        let gt: Vec<[f64; 3]> = (0..f).map(|_| pt(&mut rng)).collect();
        let mut mask: Vec<bool> = (0..f).map(|_| rng.gen_bool(0.7)).collect();
        let forced = rng.gen_range(0..h);
        mask[forced] = true;
        let mut modes: Vec<Vec<[f64; 3]>> = (0..m_n).map(|_| (0..f).map(|_| pt(&mut rng)).collect()).collect();
        if m_n > 1 && rng.gen_bool(0.2) {
            modes[1] = modes[0].clone();
        }
        let ade = min_ade(&modes, &gt, &mask, h, disp).unwrap();
        let fde = min_fde(&modes, &gt, &mask, h, disp).unwrap();
        if ade != brute_ade(&modes, &gt, &mask, h, disp) || fde != brute_fde(&modes, &gt, &mask, h, disp) {
            mismatches += 1;
        }
        let pose = Pose2::new(rng.gen_range(-1e4..1e4), rng.gen_range(-1e4..1e4), rng.gen_range(-PI..PI));
        let tf = |p: &[f64; 3]| {
            let (x, y) = pose.to_world(p[0], p[1]);
            [x, y, p[2]]
        };
        let gt2: Vec<[f64; 3]> = gt.iter().map(tf).collect();
        let modes2: Vec<Vec<[f64; 3]>> = modes.iter().map(|m| m.iter().map(tf).collect()).collect();
        worst_rigid = worst_rigid.max((min_ade(&modes2, &gt2, &mask, h, disp).unwrap() - ade).abs());
        worst_rigid = worst_rigid.max((min_fde(&modes2, &gt2, &mask, h, disp).unwrap() - fde).abs());
    }
    outcome(mismatches == 0 && worst_rigid <= 1e-9, format!("{mismatches} mismatches vs enumeration in 1000 cases, rigid-transform deviation {worst_rigid:.1e} m"))
}

fn overfit_and_beat_cv() -> Outcome {
    let start = Instant::now();
    let scene_cfg = SceneConfig { length: 24, history: 4, future: 20, k: 2, patch: 6, ..SceneConfig::default() };
    let traffic = TrafficConfig { duration_s: 1800, ..TrafficConfig::default() };
    let corpus = synth_corpus(synth_airport(7, AirportSize::Small), 1, &traffic, &scene_cfg, 7).unwrap();
    let mined = corpus.mine(|_| true, &ScorerConfig::default(), &scene_cfg, Strategy::Critical, 7, Exec::Parallel).unwrap();
    let scenes: Vec<_> = mined.into_iter().take(64).collect();
    if scenes.len() < 64 {
        return outcome(false, format!("only {} scenes mined", scenes.len()));
    }
    let cfg = ModelConfig::tiny(20);
    let inputs: Vec<_> = scenes.iter().map(|s| SceneInput::from_scene(s, &cfg).unwrap()).collect();
    let mut model = Model::new(cfg, 7).unwrap();
    let tc = TrainConfig { steps: 2000, seed: 7, ..TrainConfig::default() };
    assert_eq!(tc.adam.lr, 1e-4);
    let mut adam = adam_for(&model, &tc);
    train(&mut model, &mut adam, &inputs, &tc, Exec::Parallel, |_, _| {}).unwrap();
    let cv = evaluate("X", &scenes, 20, Displacement::Planar, Exec::Parallel, |s| cv_modes(s, 20)).unwrap().made;
    let loss = tc.loss;
    let made = evaluate("X", &scenes, 20, Displacement::Planar, Exec::Parallel, |s| {
        model.predict(s, &loss).unwrap().trajectories.into_iter().map(|r| r.into_iter().map(|m| m.ego).collect()).collect()
    })
    .unwrap()
    .made;
    let secs = start.elapsed().as_secs_f64();
    let ratio = made / cv;
    outcome(ratio <= 0.5 && secs < 600.0, format!("mADE@20 {made:.2} m vs constant velocity {cv:.2} m (ratio {ratio:.3}), 2000 steps in {secs:.0}s"))
}

fn criticality_direction() -> Outcome {
    let cfg = SceneConfig::default();
    let traffic = TrafficConfig { duration_s: 1800, parked_agents: 0, mean_interval_s: 30.0, ..TrafficConfig::default() };
    let corpus = synth_corpus(synth_airport(7, AirportSize::Small), 3, &traffic, &cfg, 7).unwrap();
    let raws: Vec<RawScene> = corpus.raw_scenes().cloned().collect();
    let mut planted = plant_stationary(&raws, &corpus.airport, cfg.max_agents, 7);
    if planted.len() < 500 {
        return outcome(false, format!("only {} scenes", planted.len()));
    }
    planted.truncate(500);
    let planted_agents: usize = planted.iter().map(|r| r.agent_ids.iter().filter(|id| id.starts_with('~')).count()).sum();
    let all_agents: usize = planted.iter().map(|r| r.agent_ids.len()).sum();
    let map = corpus.map.context.clone();
    let sc = ScorerConfig::default();
    let crit = selection_stats(&planted, cfg.history, cfg.k, &map, &sc, Strategy::Critical, 7).unwrap();
    let rand = selection_stats(&planted, cfg.history, cfg.k, &map, &sc, Strategy::Random, 7).unwrap();
    let gap = rand.stationary_ego_fraction - crit.stationary_ego_fraction;
    let pass = 2 * planted_agents == all_agents && gap >= 0.10 && crit.avg_closest_conflict_dist_all < rand.avg_closest_conflict_dist_all;
    outcome(
        pass,
        format!(
            "stationary egos critical {:.1}% vs random {:.1}% (gap {:.1} pp); closest conflict {:.1} m vs {:.1} m; {planted_agents}/{all_agents} agents planted",
            100.0 * crit.stationary_ego_fraction,
            100.0 * rand.stationary_ego_fraction,
            100.0 * gap,
            crit.avg_closest_conflict_dist_all,
            rand.avg_closest_conflict_dist_all
        ),
    )
}

/// Extension, supersampling, one-hot and class-set checks on one raw map.
fn check_map(raw: &RoutingGraph, spacing: f64, problems: &mut Vec<String>, name: &str) -> (f64, f64) {
    let rules = TagRules::default();
    let classified = filter_and_classify(raw, &rules).unwrap();
    let extended = extend_runways_by(&classified, 1852.0).unwrap();
    let compiled = compile(raw, &rules, &CompileOptions { datum: None, spacing_m: spacing, extension_m: 1852.0 }).unwrap();
    let (mut worst_len, mut worst_perp) = (0.0f64, 0.0f64);
    let mut deg: BTreeMap<u64, Vec<u64>> = BTreeMap::new();
    for e in classified.edges.iter().filter(|e| e.class == EdgeClass::Runway) {
        deg.entry(e.a).or_default().push(e.b);
        deg.entry(e.b).or_default().push(e.a);
    }
    let ends: Vec<(u64, u64)> = deg.iter().filter(|(_, n)| n.len() == 1).map(|(&end, n)| (end, n[0])).collect();
    let new_nodes: Vec<_> = extended.nodes.iter().filter(|(id, _)| !classified.nodes.contains_key(id)).collect();
    if new_nodes.len() != ends.len() {
        problems.push(format!("{name}: {} runway ends but {} extension nodes", ends.len(), new_nodes.len()));
    }
    for &(end, inner) in &ends {
        let (pe, pi) = (classified.nodes[&end], classified.nodes[&inner]);
        let (ux, uy) = ((pe.x - pi.x) / (pe.x - pi.x).hypot(pe.y - pi.y), (pe.y - pi.y) / (pe.x - pi.x).hypot(pe.y - pi.y));
        let want = (pe.x + 1852.0 * ux, pe.y + 1852.0 * uy);
        let ext = extended
            .edges
            .iter()
            .filter(|e| e.class == EdgeClass::Runway && (e.a == end || e.b == end))
            .map(|e| if e.a == end { e.b } else { e.a })
            .find(|id| !classified.nodes.contains_key(id));
        let Some(ext) = ext else {
            problems.push(format!("{name}: runway end {end} not extended"));
            continue;
        };
        let p = extended.nodes[&ext];
        let along = (p.x - pe.x) * ux + (p.y - pe.y) * uy;
        let perp = (-(p.x - pe.x) * uy + (p.y - pe.y) * ux).abs();
        worst_len = worst_len.max((along - 1852.0).abs());
        worst_perp = worst_perp.max(perp);
        if !compiled.nodes.values().any(|n| (n.x - want.0).hypot(n.y - want.1) <= 1e-3) {
            problems.push(format!("{name}: compiled map lacks the extension point of end {end}"));
        }
    }
    for e in compiled.edges.iter().filter(|e| e.class == EdgeClass::Runway) {
        let len = compiled.edge_length(e);
        if len > spacing + 1e-9 {
            problems.push(format!("{name}: runway edge {}-{} is {len} m > {spacing}", e.a, e.b));
        }
    }
    let kept_classes: BTreeSet<EdgeClass> = classified.edges.iter().map(|e| e.class).collect();
    let compiled_classes: BTreeSet<EdgeClass> = compiled.edges.iter().map(|e| e.class).collect();
    if kept_classes != compiled_classes || !compiled_classes.iter().all(|c| CLASS_ORDER.contains(c)) {
        problems.push(format!("{name}: class set {compiled_classes:?} vs kept {kept_classes:?}"));
    }
    if compiled.meta.class_order != CLASS_ORDER.to_vec() {
        problems.push(format!("{name}: class order {:?}", compiled.meta.class_order));
    }
    for v in vectorize_graph(&compiled, (0.0, 0.0)) {
        let e = compiled.edges.iter().find(|e| e.a == v.start && e.b == v.end).unwrap();
        if !v.is_valid_one_hot() || v.class() != e.class {
            problems.push(format!("{name}: bad one-hot on {}-{}", v.start, v.end));
        }
    }
    if let Err(e) = compiled.check_invariants() {
        problems.push(format!("{name}: {e}"));
    }
    let map = SceneMap::new(&compiled).unwrap();
    for n in compiled.nodes.values().step_by(7) {
        let patch = map.patches.patch(&Pose2::new(n.x, n.y, 0.3), 12).unwrap();
        for (row, &m) in patch.rows.iter().zip(&patch.mask) {
            let hot = &row[2..5];
            let ok = if m { hot.iter().filter(|&&v| v == 1.0).count() == 1 && hot.iter().all(|&v| v == 0.0 || v == 1.0) } else { hot.iter().all(|&v| v == 0.0) };
            if !ok {
                problems.push(format!("{name}: patch row one-hot {hot:?}"));
            }
        }
    }
    (worst_len, worst_perp)
}

fn map_compiler() -> Outcome {
    let mut problems = Vec::new();
    let (mut len, mut perp, mut maps) = (0.0f64, 0.0f64, 0);
    let mut raws: Vec<(String, RoutingGraph)> = ["map_single_runway.json", "map_crossing_runways.json"]
        .iter()
        .map(|f| (f.to_string(), RoutingGraph::from_json(&fixture(f)).unwrap()))
        .collect();
    for seed in 0..4 {
        for size in [AirportSize::Small, AirportSize::Medium] {
            let a = synth_airport(seed, size);
            raws.push((format!("synthetic {seed} {size:?}"), a.raw));
        }
    }
    for (name, raw) in &raws {
        for spacing in [10.0, 37.5] {
            let (l, p) = check_map(raw, spacing, &mut problems, name);
            len = len.max(l);
            perp = perp.max(p);
            maps += 1;
        }
    }
    let pass = problems.is_empty() && len <= 1e-3 && perp <= 1e-3;
    let first = problems.first().cloned().unwrap_or_default();
    outcome(pass, format!("{maps} compilations; extension length error {len:.1e} m, off-line {perp:.1e} m; {} violations {first}", problems.len()))
}

fn inside_winding(poly: &[[f64; 2]], p: [f64; 2]) -> bool {
    let mut wn = 0i32;
    for i in 0..poly.len() {
        let (a, b) = (poly[i], poly[(i + 1) % poly.len()]);
        let side = (b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1]);
        if a[1] <= p[1] {
            if b[1] > p[1] && side > 0.0 {
                wn += 1;
            }
        } else if b[1] <= p[1] && side < 0.0 {
            wn -= 1;
        }
    }
    wn != 0
}

fn report_at(lat: f64, lon: f64, alt: f64) -> PositionReport {
    PositionReport {
        frame: 0,
        agent_id: "P".into(),
        altitude_ft: alt,
        range_km: 0.0,
        bearing_rad: 0.0,
        lat,
        lon,
        speed_kt: 0.0,
        heading_deg: 0.0,
        x_km: 0.0,
        y_km: 0.0,
        agent_type: surfcast::ingest::AgentType::Aircraft,
        interp: false,
    }
}

fn ingest_checks() -> Outcome {
    let mut problems = Vec::new();
    // Fixture with 3 s and 7 s gaps, a duplicate frame and a 47 s gap that splits the track.
    let parsed = parse_track_csv(&fixture("tracks_gaps.csv")).unwrap();
    let (tracks, rejected) = build_tracks(&parsed.reports, &ResampleConfig::default());
    let mut raw_frames: BTreeMap<&str, BTreeSet<i64>> = BTreeMap::new();
    for r in &parsed.reports {
        raw_frames.entry(&r.agent_id).or_default().insert(r.frame);
    }
    let spans: Vec<(String, i64, i64, usize)> = tracks
        .iter()
        .map(|t| (t.agent_id.clone(), t.first_frame(), t.last_frame(), t.samples.iter().filter(|s| s.interp).count()))
        .collect();
    let want = vec![("AC1".to_string(), 100, 114, 8), ("VH1".to_string(), 200, 203, 1), ("VH1".to_string(), 250, 252, 0)];
    if spans != want || !rejected.is_empty() {
        problems.push(format!("fixture tracks {spans:?}"));
    }
    // Random tracks with random gaps.
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut reports = Vec::new();
    for a in 0..200 {
        let mut f = rng.gen_range(0..1000i64);
        for _ in 0..rng.gen_range(2..40) {
            reports.push(PositionReport { frame: f, agent_id: format!("A{a:03}"), ..report_at(47.0, -122.0, 400.0) });
            f += [1, 1, 1, 2, 3, 5, 12, 29, 30, 31, 60][rng.gen_range(0..11)];
        }
    }
    for r in &reports {
        raw_frames.entry(&r.agent_id).or_default().insert(r.frame);
    }
    let (tracks2, _) = build_tracks(&reports, &ResampleConfig::default());
    let mut samples = 0;
    for t in tracks.iter().chain(&tracks2) {
        let frames = &raw_frames[t.agent_id.as_str()];
        for w in t.samples.windows(2) {
            if w[1].frame - w[0].frame != 1 {
                problems.push(format!("{} not 1 Hz at {}", t.agent_id, w[0].frame));
            }
        }
        for s in &t.samples {
            samples += 1;
            if s.interp == frames.contains(&s.frame) {
                problems.push(format!("{} frame {} interp flag {}", t.agent_id, s.frame, s.interp));
            }
        }
    }
    // Geofence against an independent winding-number oracle.
    let mut disagreements = 0;
    let mut points = 0;
    for _ in 0..20 {
        let n = rng.gen_range(3..12);
        let mut angles: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..2.0 * PI)).collect();
        angles.sort_by(f64::total_cmp);
        let (c_lat, c_lon) = (rng.gen_range(-60.0..60.0), rng.gen_range(-170.0..170.0));
        let polygon: Vec<[f64; 2]> = angles
            .iter()
            .map(|a| {
                let r = rng.gen_range(0.01..0.1);
                [c_lat + r * a.sin(), c_lon + r * a.cos()]
            })
            .collect();
        let fence = GeoFence { polygon: polygon.clone(), ceiling_agl_ft: 2000.0, ground_elevation_msl_ft: 0.0 };
        if fence.validate().is_err() {
            continue;
        }
        for _ in 0..500 {
            let p = [c_lat + rng.gen_range(-0.12..0.12), c_lon + rng.gen_range(-0.12..0.12)];
            points += 1;
            let kept = !filter_airspace(&[report_at(p[0], p[1], 100.0)], &fence).is_empty();
            if kept != inside_winding(&polygon, p) {
                disagreements += 1;
            }
        }
    }
    // Ceiling: 2000 ft above a 430 ft field.
    let fence = GeoFence::from_json(br#"{"polygon": [[47.0, -122.0], [47.0, -121.9], [47.1, -121.9], [47.1, -122.0]], "ceiling_agl_ft": 2000.0, "ground_elevation_msl_ft": 430.0}"#).unwrap();
    let kept = |alt: f64| !filter_airspace(&[report_at(47.05, -121.95, alt)], &fence).is_empty();
    let ceiling_ok = kept(2430.0) && !kept(2430.0 + 1e-9) && kept(2429.999) && kept(2000.0) && !kept(2431.0);
    if !ceiling_ok {
        problems.push("2000 ft AGL boundary".into());
    }
    let pass = problems.is_empty() && disagreements == 0 && points >= 10_000;
    let first = problems.first().cloned().unwrap_or_default();
    outcome(
        pass,
        format!("{samples} resampled samples checked, geofence {disagreements} disagreements on {points} points, ceiling boundary {}; {} violations {first}", if ceiling_ok { "ok" } else { "wrong" }, problems.len()),
    )
}

fn ego_isometry() -> Outcome {
    let airport = synth_airport(1, AirportSize::Small);
    let map = SceneMap::new(&airport.graph).unwrap();
    let cfg = SceneConfig { patch: 8, ..SceneConfig::default() };
    let scorer = ScorerConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let (mut scenes, mut worst, mut worst_ego) = (0, 0.0f64, 0.0f64);
    while scenes < 1000 {
        let n = rng.gen_range(cfg.min_agents..=cfg.max_agents);
        let raw = random_raw_scene(&mut rng, n, &cfg, (0.0, 0.0));
        let strategy = if scenes % 2 == 0 { Strategy::Critical } else { Strategy::Random };
        let Ok(scene) = assemble_scene(&raw, &map, &scorer, &cfg, strategy, scenes as u64) else { continue };
        scenes += 1;
        let e = scene.agents[scene.ego_index][scene.t_o];
        worst_ego = worst_ego.max(e.x.abs()).max(e.y.abs()).max(e.theta.abs());
        let mut pts = Vec::new();
        for (row, id) in scene.agents.iter().zip(&scene.agent_ids) {
            let Some(id) = id else { continue };
            let src = raw.agent_ids.iter().position(|x| x == id).unwrap();
            for (t, s) in row.iter().enumerate() {
                if s.valid {
                    let w = raw.states[src][t];
                    pts.push(((s.x, s.y), (w.x, w.y)));
                }
            }
        }
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                let (a, b) = (pts[i], pts[j]);
                let de = (a.0 .0 - b.0 .0).hypot(a.0 .1 - b.0 .1);
                let dw = (a.1 .0 - b.1 .0).hypot(a.1 .1 - b.1 .1);
                worst = worst.max((de - dw).abs());
            }
        }
    }
    outcome(worst <= 1e-9 && worst_ego <= 1e-9, format!("pairwise distance deviation {worst:.1e} m over {scenes} scenes; ego at t_o off origin by {worst_ego:.1e}"))
}

fn split_checks() -> Outcome {
    let cfg = SceneConfig { length: 30, history: 10, future: 20, ..SceneConfig::default() };
    let traffic = TrafficConfig { duration_s: 300, ..TrafficConfig::default() };
    let corpus = synth_corpus(synth_airport(11, AirportSize::Small), 10, &traffic, &cfg, 11).unwrap();
    let days: BTreeMap<String, Vec<String>> = BTreeMap::from([(corpus.airport.id.clone(), corpus.day_ids())]);
    let all: BTreeSet<String> = corpus.day_ids().into_iter().collect();
    let mut problems = Vec::new();
    let mut distinct = BTreeSet::new();
    for seed in 0..20 {
        let a = split_days(&days, 0.8, seed).unwrap();
        let b = split_days(&days, 0.8, seed).unwrap();
        if a != b {
            problems.push(format!("seed {seed} not reproducible"));
        }
        let s = &a.airports[&corpus.airport.id];
        let union: BTreeSet<String> = s.train_days.union(&s.test_days).cloned().collect();
        if s.train_days.len() != 8 || s.test_days.len() != 2 || !s.train_days.is_disjoint(&s.test_days) || union != all {
            problems.push(format!("seed {seed}: {s:?}"));
        }
        distinct.insert(s.test_days.clone());
    }
    outcome(problems.is_empty() && all.len() == 10, format!("{} days, 20 seeds, {} distinct test sets; {} violations", all.len(), distinct.len(), problems.len()))
}

fn demo_determinism() -> Outcome {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let exec = surfcast_cli::exec();
    let mut times = Vec::new();
    let mut outs = Vec::new();
    for dir in [a.path(), b.path()] {
        let t = Instant::now();
        outs.push(surfcast_cli::demo::run_demo(7, dir, exec, &mut |_| {}).unwrap());
        times.push(t.elapsed());
    }
    let mut files = vec!["report.md", "stats.md", "stats.csv", "split.json", "results/bench.csv"].into_iter().map(String::from).collect::<Vec<_>>();
    for p in &outs[0].plots {
        files.push(p.strip_prefix(a.path()).unwrap().to_string_lossy().into_owned());
    }
    let differing: Vec<&String> = files.iter().filter(|f| std::fs::read(a.path().join(f)).ok() != std::fs::read(b.path().join(f)).ok()).collect();
    let slowest = times.iter().max().copied().unwrap_or_default();
    let has_tables = std::fs::read_to_string(&outs[0].report_md).map(|s| s.contains("| model | 20 |") && s.contains("| critical |")).unwrap_or(false);
    outcome(
        differing.is_empty() && has_tables && slowest < Duration::from_secs(900),
        format!("{} files compared, {} differ {differing:?}; runs took {:.0}s and {:.0}s", files.len(), differing.len(), times[0].as_secs_f64(), times[1].as_secs_f64()),
    )
}

fn main() {
    let wanted: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let checks: [(usize, &str, fn() -> Outcome); 12] = [
        (1, "gradient correctness", gradient_correctness),
        (2, "causality", causality),
        (3, "permutation equivariance", permutation_equivariance),
        (4, "GMM contracts", gmm_contracts),
        (5, "metric oracle", metric_oracle),
        (6, "overfit and baseline beat", overfit_and_beat_cv),
        (7, "criticality direction", criticality_direction),
        (8, "map compiler", map_compiler),
        (9, "ingest", ingest_checks),
        (10, "ego-transform isometry", ego_isometry),
        (11, "split", split_checks),
        (12, "end-to-end demo", demo_determinism),
    ];
    let mut failed = Vec::new();
    for (n, name, check) in checks {
        if !wanted.is_empty() && !wanted.contains(&n) {
            continue;
        }
        let t = Instant::now();
        let o = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        println!("{} criterion {n:>2} {name}: {} [{:.1}s]", if o.pass { "PASS" } else { "FAIL" }, o.detail, t.elapsed().as_secs_f64());
        if !o.pass {
            failed.push(n);
        }
    }
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
