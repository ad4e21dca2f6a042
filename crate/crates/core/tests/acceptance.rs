//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use busnet_core::analysis::{self, time_in_contact, SummaryOptions, CONTACT, INTER_CONTACT};
use busnet_core::contacts::{
    adjacency, compatibility, contact_intervals, sample_interval, AnalysisConfig, ContactInterval,
    IntervalKind,
};
use busnet_core::emitter::{emit_routes, parse_routes};
use busnet_core::geo::{densify, point_segment_distance, CartPoint, GeoPoint};
use busnet_core::matcher::{
    match_points, match_route, LineSpec, MatchError, MatchedLine, MatchedRoute, MatcherConfig,
};
use busnet_core::network::{Connection, EdgeId, RoadNetwork};
use busnet_core::pipeline::{match_lines, ScenarioConfig};
use busnet_core::replay::{read_trace, simulate, trace_to_string, write_trace, TraceFrame};
use busnet_core::stats::summarize;
use busnet_core::synth::{contact_example, grid_network, grid_path, sample_chain, GridSpec};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn secs(d: Duration) -> String {
    format!("{:.3} s", d.as_secs_f64())
}

// ---- fixtures --------------------------------------------------------------

/// Random simple path of junctions on a `cols x rows` grid.
fn random_simple_path(rng: &mut ChaCha8Rng, cols: usize, rows: usize, max_edges: usize) -> Vec<(usize, usize)> {
    loop {
        let mut at = (rng.gen_range(0..cols), rng.gen_range(0..rows));
        let target = rng.gen_range(2..=max_edges);
        let mut path = vec![at];
        let mut seen = BTreeSet::from([at]);
        while path.len() <= target {
            let mut next: Vec<(usize, usize)> = [(1i64, 0i64), (-1, 0), (0, 1), (0, -1)]
                .iter()
                .map(|(dc, dr)| (at.0 as i64 + dc, at.1 as i64 + dr))
                .filter(|&(c, r)| c >= 0 && r >= 0 && c < cols as i64 && r < rows as i64)
                .map(|(c, r)| (c as usize, r as usize))
                .filter(|j| !seen.contains(j))
                .collect();
            next.shuffle(rng);
            let Some(&step) = next.first() else { break };
            at = step;
            seen.insert(at);
            path.push(at);
        }
        if path.len() >= 3 {
            return path;
        }
    }
}

/// Uniform noise over a disc of the given radius.
fn jitter(rng: &mut ChaCha8Rng, p: CartPoint, radius: f64) -> CartPoint {
    let r = radius * rng.gen::<f64>().sqrt();
    let a = rng.gen_range(0.0..std::f64::consts::TAU);
    CartPoint::new(p.x + r * a.cos(), p.y + r * a.sin())
}

struct GridSweep {
    net: RoadNetwork,
    truth: Vec<Vec<EdgeId>>,
    matched: Vec<Result<MatchedRoute, MatchError>>,
    elapsed: Duration,
}

fn grid_sweep() -> GridSweep {
    let net = grid_network(&GridSpec::new(20, 20, 100.0)).expect("grid");
    let cfg = MatcherConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let mut truth = Vec::new();
    let mut inputs = Vec::new();
    for _ in 0..100 {
        let chain = grid_path(&random_simple_path(&mut rng, 20, 20, 30));
        let start = rng.gen_range(5.0..15.0);
        let points: Vec<CartPoint> = sample_chain(&net, &chain, 20.0, start, 5.0)
            .expect("chain on grid")
            .into_iter()
            .map(|p| jitter(&mut rng, p, 5.0))
            .collect();
        truth.push(chain);
        inputs.push(points);
    }
    let started = Instant::now();
    let matched = inputs
        .iter()
        .enumerate()
        .map(|(k, points)| {
            let dense = busnet_core::geo::densify_passes(points, cfg.densify_passes).expect("enough points");
            match_points(&net, &format!("p{k}"), &dense, &cfg).map(|m| m.route)
        })
        .collect();
    GridSweep {
        net,
        truth,
        matched,
        elapsed: started.elapsed(),
    }
}

struct Bundled {
    frames: Vec<TraceFrame>,
    lines: usize,
    buses: usize,
    window: (f64, f64),
    elapsed: Duration,
}

fn bundled_scenario() -> Result<Bundled, String> {
    let started = Instant::now();
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/two-terminal");
    let read = |p: &Path| fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()));
    let scenario = ScenarioConfig::from_json(&read(&dir.join("scenario.json"))?)
        .map_err(|e| e.to_string())?
        .resolve(&dir);
    let net_path = scenario.network.clone().ok_or("scenario has no network")?;
    let net = busnet_core::network::parse_network(&read(&net_path)?).map_err(|e| e.to_string())?;
    let mut specs = Vec::new();
    for p in &scenario.lines {
        specs.push(LineSpec::from_json(&read(p)?).map_err(|e| e.to_string())?);
    }
    let projection = net.projection().map_err(|e| e.to_string())?;
    let mut lines: Vec<MatchedLine> = Vec::new();
    for (id, m) in match_lines(&net, &specs, &projection, &scenario.matcher) {
        lines.push(m.map_err(|e| format!("line {id}: {e}"))?.line);
    }
    let cfg = scenario.simulation;
    let frames = simulate(&net, &lines, &cfg).map_err(|e| e.to_string())?;
    let buses = frames
        .iter()
        .flat_map(|f| f.positions.keys())
        .collect::<BTreeSet<_>>()
        .len();
    Ok(Bundled {
        frames,
        lines: lines.len(),
        buses,
        window: cfg.time_window,
        elapsed: started.elapsed(),
    })
}

// ---- criteria --------------------------------------------------------------

fn contact_example_oracle() -> Outcome {
    let started = Instant::now();
    let frames = contact_example();
    let dt = sample_interval(&frames).map_err(|e| e.to_string())?;
    ensure(dt == Some(3.0), || format!("sampling interval {dt:?}"))?;
    let intervals = contact_intervals(&frames, 150.0).map_err(|e| e.to_string())?;
    let pick = |kind| -> Vec<(String, f64)> {
        intervals
            .iter()
            .filter(|i| i.kind == kind && !i.censored)
            .map(|i| (i.vehicle_id.clone(), i.duration()))
            .collect()
    };
    let contact = pick(IntervalKind::Contact);
    let inter = pick(IntervalKind::InterContact);
    ensure(contact == vec![("A".into(), 9.0), ("B".into(), 6.0)], || format!("contacts {contact:?}"))?;
    ensure(inter == vec![("B".into(), 3.0)], || format!("inter-contacts {inter:?}"))?;
    let elapsed = started.elapsed();
    ensure(elapsed < Duration::from_secs(1), || format!("took {}", secs(elapsed)))?;
    Ok(format!("contact(A)=9 contact(B)=6 inter(B)=3 in {}", secs(elapsed)))
}

fn matching_recovery(sweep: &GridSweep) -> Outcome {
    ensure(sweep.net.edge_count() >= 1500, || format!("{} edges", sweep.net.edge_count()))?;
    let mut exact = 0;
    let mut first_miss = None;
    for (k, (truth, got)) in sweep.truth.iter().zip(&sweep.matched).enumerate() {
        match got {
            Ok(r) if &r.edges == truth => exact += 1,
            other => {
                first_miss.get_or_insert_with(|| format!("path {k}: {other:?}"));
            }
        }
    }
    ensure(exact == sweep.truth.len(), || {
        format!("{exact}/{} exact; {}", sweep.truth.len(), first_miss.unwrap_or_default())
    })?;
    ensure(sweep.elapsed < Duration::from_secs(10), || format!("took {}", secs(sweep.elapsed)))?;
    Ok(format!(
        "{exact}/{} chains exact on {} edges in {}",
        sweep.truth.len(),
        sweep.net.edge_count(),
        secs(sweep.elapsed)
    ))
}

/// Nearest edge per point by exhaustive search, consecutive repeats merged.
/// Only physical adjacency is checked.
fn physical_only_chain(net: &RoadNetwork, points: &[CartPoint]) -> Option<Vec<EdgeId>> {
    let mut chain: Vec<EdgeId> = Vec::new();
    for &p in points {
        let best = net
            .edges()
            .iter()
            .map(|e| {
                let (a, b) = net.chord(&e.id).unwrap();
                (point_segment_distance(p, a, b).unwrap(), &e.id)
            })
            .min_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(y.1)))?;
        if chain.last() != Some(best.1) {
            chain.push(best.1.clone());
        }
    }
    chain
        .windows(2)
        .all(|w| net.physically_adjacent(&w[0], &w[1]).unwrap())
        .then_some(chain)
}

fn logical_rejection() -> Outcome {
    let origin = GeoPoint::new(-25.43, -49.27).unwrap();
    let spec = GridSpec {
        location: Some(origin),
        ..GridSpec::new(5, 5, 100.0)
    };
    let net = grid_network(&spec).unwrap();
    let projection = net.projection().unwrap();
    let chain = grid_path(&[(0, 2), (1, 2), (2, 2), (3, 2), (4, 2)]);
    let points = sample_chain(&net, &chain, 20.0, 10.0, 5.0).unwrap();
    let line = LineSpec {
        line_id: "fixture".into(),
        itinerary: points.iter().map(|p| projection.to_geographic(*p).unwrap()).collect(),
        stops: Vec::new(),
        departures: vec![0.0],
    };
    let cfg = MatcherConfig::default();
    let intact = match_route(&net, &line, &projection, &cfg).map_err(|e| format!("intact network: {e}"))?;
    ensure(intact.route.edges == chain, || format!("intact network matched {:?}", intact.route.edges))?;

    let removed = Connection {
        from_edge: chain[1].clone(),
        to_edge: chain[2].clone(),
    };
    let connections: Vec<Connection> = net.connections().into_iter().filter(|c| *c != removed).collect();
    ensure(connections.len() + 1 == net.connection_count(), || "connection not found".into())?;
    let cut = RoadNetwork::new(net.nodes().cloned().collect(), net.edges().to_vec(), connections, net.location())
        .map_err(|e| e.to_string())?;
    let err = match match_route(&cut, &line, &projection, &cfg) {
        Ok(r) => return Err(format!("cut network still matched {:?}", r.route.edges)),
        Err(e) => e,
    };
    ensure(matches!(err, MatchError::BrokenRoute { .. }), || format!("unexpected error {err}"))?;
    let physical = physical_only_chain(&cut, &points).ok_or("physical-only oracle failed")?;
    ensure(physical == chain, || format!("physical-only oracle gave {physical:?}"))?;
    Ok(format!(
        "without {} -> {}: broken route; physical-only oracle recovers the chain",
        removed.from_edge.0, removed.to_edge.0
    ))
}

fn chain_soundness(sweep: &GridSweep) -> Outcome {
    let mut pairs = 0;
    let mut violations = Vec::new();
    for route in sweep.matched.iter().flatten() {
        for w in route.edges.windows(2) {
            pairs += 1;
            let ok = sweep.net.physically_adjacent(&w[0], &w[1]).unwrap()
                && sweep.net.connection_allowed(&w[0], &w[1]).unwrap();
            if !ok {
                violations.push(format!("{} -> {}", w[0].0, w[1].0));
            }
        }
    }
    ensure(pairs > 0, || "no matched pairs".into())?;
    ensure(violations.is_empty(), || format!("{} violations, e.g. {}", violations.len(), violations[0]))?;
    Ok(format!("{pairs} consecutive pairs, 0 violations"))
}

fn densification() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for case in 0..1000 {
        let n = rng.gen_range(2..=500);
        let pts: Vec<CartPoint> = (0..n)
            .map(|_| CartPoint::new(rng.gen_range(-1e5..1e5), rng.gen_range(-1e5..1e5)))
            .collect();
        let out = densify(&pts).map_err(|e| e.to_string())?;
        ensure(out.len() == 2 * n - 1, || format!("case {case}: length {} for n = {n}", out.len()))?;
        ensure(out[0] == pts[0] && out[2 * n - 2] == pts[n - 1], || format!("case {case}: endpoints moved"))?;
        for i in 0..n - 1 {
            let mid = CartPoint::new((pts[i].x + pts[i + 1].x) / 2.0, (pts[i].y + pts[i + 1].y) / 2.0);
            ensure(out[2 * i] == pts[i], || format!("case {case}: original {i} moved"))?;
            ensure(out[2 * i + 1] == mid, || format!("case {case}: midpoint {i} is {:?}", out[2 * i + 1]))?;
        }
    }
    Ok("1000 cases: length 2n-1, endpoints kept, midpoints exact".into())
}

fn candidate_oracle() -> Outcome {
    let net = grid_network(&GridSpec::new(12, 12, 80.0)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut nonempty = 0;
    for q in 0..1000 {
        let p = CartPoint::new(rng.gen_range(-50.0..930.0), rng.gen_range(-50.0..930.0));
        let radius = rng.gen_range(1.0..60.0);
        let got: Vec<(EdgeId, f64)> = net
            .candidate_edges(p, radius)
            .into_iter()
            .map(|c| (c.edge, c.distance))
            .collect();
        let mut want: Vec<(EdgeId, f64)> = net
            .edges()
            .iter()
            .filter_map(|e| {
                let (a, b) = net.chord(&e.id).unwrap();
                let d = point_segment_distance(p, a, b).unwrap();
                (d <= radius).then(|| (e.id.clone(), d))
            })
            .collect();
        want.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        ensure(got == want, || format!("query {q} at {p:?} r={radius}: {got:?} != {want:?}"))?;
        nonempty += usize::from(!got.is_empty());
    }
    Ok(format!("1000 queries identical to brute force ({nonempty} non-empty)"))
}

fn random_trace(rng: &mut ChaCha8Rng) -> Vec<TraceFrame> {
    let vehicles = rng.gen_range(1..=20);
    let frames = rng.gen_range(1..=200);
    let presence = rng.gen_range(0.5..1.0);
    let side = rng.gen_range(200.0..1500.0);
    (0..frames)
        .map(|k| TraceFrame {
            t: 600.0 + k as f64 * 3.0,
            positions: (0..vehicles)
                .filter_map(|v| {
                    rng.gen_bool(presence).then(|| {
                        (format!("v{v}"), CartPoint::new(rng.gen_range(0.0..side), rng.gen_range(0.0..side)))
                    })
                })
                .collect(),
        })
        .collect()
}

/// Expected intervals from per-sample connectivity computed by brute force:
/// maximal runs of equal state within each presence run, each sample
/// covering one sampling interval.
fn partition_oracle(frames: &[TraceFrame], range: f64, dt: f64) -> BTreeMap<String, Vec<(IntervalKind, f64, f64)>> {
    let mut states: BTreeMap<String, Vec<(usize, bool)>> = BTreeMap::new();
    for (k, f) in frames.iter().enumerate() {
        for (id, p) in &f.positions {
            let connected = f.positions.iter().any(|(o, q)| o != id && p.distance(q) <= range);
            states.entry(id.clone()).or_default().push((k, connected));
        }
    }
    let mut out: BTreeMap<String, Vec<(IntervalKind, f64, f64)>> = BTreeMap::new();
    for (id, seq) in states {
        let list = out.entry(id).or_default();
        for (i, &(k, c)) in seq.iter().enumerate() {
            let contiguous = i > 0 && seq[i - 1].0 + 1 == k;
            let kind = if c { IntervalKind::Contact } else { IntervalKind::InterContact };
            let end = frames[k].t + dt;
            match list.last_mut() {
                Some(last) if contiguous && last.0 == kind => last.2 = end,
                _ => list.push((kind, frames[k].t, end)),
            }
        }
    }
    out
}

fn interval_partition() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut total = 0;
    for case in 0..500 {
        let frames = random_trace(&mut rng);
        let range = rng.gen_range(50.0..400.0);
        let intervals = contact_intervals(&frames, range).map_err(|e| format!("case {case}: {e}"))?;
        let Some(dt) = sample_interval(&frames).unwrap() else {
            ensure(intervals.is_empty(), || format!("case {case}: intervals from one frame"))?;
            continue;
        };
        total += intervals.len();
        let mut got: BTreeMap<String, Vec<&ContactInterval>> = BTreeMap::new();
        for iv in &intervals {
            got.entry(iv.vehicle_id.clone()).or_default().push(iv);
        }
        for (v, list) in &got {
            for w in list.windows(2) {
                ensure(w[0].end <= w[1].start, || format!("case {case}: {v} overlaps at {}", w[1].start))?;
                if w[0].end == w[1].start {
                    ensure(w[0].kind != w[1].kind, || format!("case {case}: {v} repeats a kind at {}", w[1].start))?;
                }
            }
        }
        let oracle = partition_oracle(&frames, range, dt);
        ensure(got.len() == oracle.len(), || format!("case {case}: vehicle sets differ"))?;
        for (v, want) in &oracle {
            let have: Vec<(IntervalKind, f64, f64)> = got[v].iter().map(|i| (i.kind, i.start, i.end)).collect();
            ensure(&have == want, || format!("case {case}: {v}: {have:?} != {want:?}"))?;
        }
    }
    Ok(format!("500 traces, {total} intervals, 0 violations"))
}

fn range_monotonicity(b: &Bundled) -> Outcome {
    let mut edges_150 = 0;
    for f in &b.frames {
        let small = adjacency(f, 150.0);
        let large = adjacency(f, 300.0);
        for (u, v) in small.edges() {
            edges_150 += 1;
            ensure(large.has_edge(u, v), || format!("t = {}: {u}-{v} missing at 300 m", f.t))?;
        }
    }
    let t150 = time_in_contact(&contact_intervals(&b.frames, 150.0).map_err(|e| e.to_string())?);
    let t300 = time_in_contact(&contact_intervals(&b.frames, 300.0).map_err(|e| e.to_string())?);
    for (v, t) in &t150 {
        let wider = t300.get(v).copied().unwrap_or(0.0);
        ensure(wider >= *t, || format!("{v}: {t} s at 150 m but {wider} s at 300 m"))?;
    }
    ensure(edges_150 > 0, || "no contacts at 150 m".into())?;
    let sum = |m: &BTreeMap<String, f64>| m.values().sum::<f64>();
    Ok(format!(
        "{} frames, {edges_150} links at 150 m all present at 300 m; contact time {} s -> {} s",
        b.frames.len(),
        sum(&t150),
        sum(&t300)
    ))
}

fn quartile_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let q = |s: &[f64], p: f64| {
        let h = (s.len() - 1) as f64 * p;
        let (lo, hi) = (h.floor(), h.ceil());
        s[lo as usize] + (h - lo) * (s[hi as usize] - s[lo as usize])
    };
    for case in 0..1000 {
        let n = rng.gen_range(1..300);
        let scale = 10f64.powi(rng.gen_range(-2..5));
        let samples: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0) * scale).collect();
        let got = summarize(&samples, 20, None).map_err(|e| e.to_string())?;
        let mut s = samples.clone();
        s.sort_by(f64::total_cmp);
        let mean = s.iter().sum::<f64>() / n as f64;
        let want = [s[0], q(&s, 0.25), q(&s, 0.5), q(&s, 0.75), s[n - 1], mean, q(&s, 0.75) - q(&s, 0.25)];
        let have = [got.min, got.q1, got.median, got.q3, got.max, got.mean, got.iqr];
        for (name, (h, w)) in ["min", "q1", "median", "q3", "max", "mean", "iqr"].iter().zip(have.iter().zip(want)) {
            ensure((h - w).abs() <= 1e-9 * w.abs().max(1.0), || format!("case {case}: {name} {h} != {w}"))?;
        }
        ensure(got.n == n, || format!("case {case}: n = {}", got.n))?;
    }
    Ok("1000 sample sets within 1e-9".into())
}

fn round_trips() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for case in 0..200 {
        let lines: Vec<MatchedLine> = (0..rng.gen_range(1..6))
            .map(|k| {
                let line_id = format!("L{k}&<{}>", rng.gen_range(0..100));
                let edges = (0..rng.gen_range(1..15))
                    .map(|_| EdgeId(format!("e{}\"{}", rng.gen_range(0..50), rng.gen_range(0..50))))
                    .collect();
                let mut t = rng.gen_range(0..40_000) as f64;
                let departures = (0..rng.gen_range(0..8))
                    .map(|_| {
                        t += rng.gen_range(1..90_000) as f64 / 100.0;
                        (t * 100.0).round() / 100.0
                    })
                    .collect();
                MatchedLine {
                    line_id: line_id.clone(),
                    route: MatchedRoute {
                        line_id,
                        edges,
                        gap_count: 0,
                    },
                    stops: Vec::new(),
                    departures,
                }
            })
            .collect();
        let doc = emit_routes(&lines).map_err(|e| format!("case {case}: {e}"))?;
        let mut back = parse_routes(&doc).map_err(|e| format!("case {case}: {e}"))?;
        back.sort_by(|a, b| a.line_id.cmp(&b.line_id));
        let mut want = lines.clone();
        want.sort_by(|a, b| a.line_id.cmp(&b.line_id));
        ensure(back.len() == want.len(), || format!("case {case}: {} routes back", back.len()))?;
        for (b, w) in back.iter().zip(&want) {
            ensure(b.line_id == w.line_id && b.edges == w.route.edges && b.departures == w.departures, || {
                format!("case {case}: {b:?} != {w:?}")
            })?;
        }

        let frames = random_trace(&mut rng)
            .into_iter()
            .map(|f| TraceFrame {
                t: f.t,
                positions: f
                    .positions
                    .into_iter()
                    .map(|(id, p)| (id, CartPoint::new((p.x * 100.0).round() / 100.0, (p.y * 100.0).round() / 100.0)))
                    .collect(),
            })
            .collect::<Vec<_>>();
        let mut buf = Vec::new();
        write_trace(&frames, &mut buf).map_err(|e| e.to_string())?;
        let back = read_trace(buf.as_slice()).map_err(|e| format!("case {case}: {e}"))?;
        ensure(back == frames, || format!("case {case}: trace changed"))?;
        ensure(trace_to_string(&back).as_bytes() == buf.as_slice(), || format!("case {case}: text changed"))?;
    }
    Ok("200 route documents and 200 traces reproduced exactly".into())
}

fn scenario_shape(b: &Bundled) -> Outcome {
    ensure(b.lines >= 6, || format!("{} lines", b.lines))?;
    ensure(b.buses >= 20, || format!("{} buses", b.buses))?;
    ensure(b.window.1 - b.window.0 >= 7200.0, || format!("window {:?}", b.window))?;
    let started = Instant::now();
    let cfg = AnalysisConfig {
        tx_range: 150.0,
        ..AnalysisConfig::default()
    };
    let a = analysis::analyze(&b.frames, &cfg, &SummaryOptions::default()).map_err(|e| e.to_string())?;
    let elapsed = b.elapsed + started.elapsed();
    let contact = a.summary.metric(CONTACT).ok_or("no contacts")?;
    let inter = a.summary.metric(INTER_CONTACT).ok_or("no inter-contacts")?;
    let ratio = inter.mean / contact.mean;
    ensure(ratio > 1.0, || {
        format!("mean inter-contact {:.1} s <= mean contact {:.1} s", inter.mean, contact.mean)
    })?;
    ensure(elapsed < Duration::from_secs(60), || format!("took {}", secs(elapsed)))?;
    Ok(format!(
        "{} lines, {} buses; mean contact {:.1} s (n={}), mean inter-contact {:.1} s (n={}), ratio {:.2}; {}",
        b.lines,
        b.buses,
        contact.mean,
        contact.n,
        inter.mean,
        inter.n,
        ratio,
        secs(elapsed)
    ))
}

fn compatibility_exactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for case in 0..500 {
        let n = rng.gen_range(1..200);
        let real: Vec<f64> = (0..n).map(|_| rng.gen_range(60.0..4000.0)).collect();
        let same = compatibility(&real, &real, 0.2).map_err(|e| e.to_string())?;
        ensure(same.percentage == 100.0, || format!("case {case}: identical gave {}", same.percentage))?;
        let k = rng.gen_range(0..=n);
        let mut chosen: Vec<usize> = (0..n).collect();
        chosen.shuffle(&mut rng);
        let inside: BTreeSet<usize> = chosen[..k].iter().copied().collect();
        let sim: Vec<f64> = real
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let f = if inside.contains(&i) { rng.gen_range(0.85..1.15) } else { rng.gen_range(1.3..2.0) };
                r * f
            })
            .collect();
        let c = compatibility(&real, &sim, 0.2).map_err(|e| e.to_string())?;
        let want = 100.0 * k as f64 / n as f64;
        ensure(c.within == k && c.pairs == n && c.percentage == want, || {
            format!("case {case}: {c:?}, expected {k}/{n}")
        })?;
    }
    Ok("identical vectors give 100%; k of n within tolerance gives 100k/n exactly (500 cases)".into())
}

fn main() -> ExitCode {
    let sweep = grid_sweep();
    let bundled = bundled_scenario();
    let with_bundled = |f: fn(&Bundled) -> Outcome| match &bundled {
        Ok(b) => f(b),
        Err(e) => Err(format!("bundled scenario: {e}")),
    };
    let results: Vec<(&str, Outcome)> = vec![
        ("contact example oracle", contact_example_oracle()),
        ("matching recovery", matching_recovery(&sweep)),
        ("logical interconnection rejection", logical_rejection()),
        ("chain soundness", chain_soundness(&sweep)),
        ("densification", densification()),
        ("candidate query oracle", candidate_oracle()),
        ("contact interval partition", interval_partition()),
        ("range monotonicity", with_bundled(range_monotonicity)),
        ("quartile oracle", quartile_oracle()),
        ("round trips", round_trips()),
        ("bundled scenario shape", with_bundled(scenario_shape)),
        ("compatibility metric", compatibility_exactness()),
    ];
    let mut failed = 0;
    for (name, outcome) in &results {
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
