//! The bundled synthetic city: a 6 km by 8 km street grid with a central
//! and a southern terminal, eight bus lines on four two-way corridors and
//! two hours of service.
//!
//! Everything here is a pure function of constants, so the files written by
//! [`bundle_files`] are identical on every run.


use crate::contacts::{self, AnalysisConfig};
use crate::geo::{CartPoint, GeoPoint};
use crate::matcher::{format_clock, LineSpec, MatcherConfig, StopSpec};
use crate::network::{write_network, Edge, EdgeId, RoadNetwork};
use crate::pipeline::{match_lines, ScenarioConfig, SweepConfig};
use crate::replay::{simulate, SimConfig};
use crate::synth::{grid_network, grid_path, grid_position, sample_chain, GridSpec};

pub const LOCATION: GeoPoint = GeoPoint {
    lat: -25.43,
    lon: -49.27,
};
pub const COLUMNS: usize = 13;
pub const ROWS: usize = 17;
pub const BLOCK_M: f64 = 500.0;
pub const STREET_SPEED: f64 = 8.33;
/// Speed on the avenues through the central terminal.
pub const AVENUE_SPEED: f64 = 11.11;
/// 07:00 to 09:00.
pub const WINDOW: (f64, f64) = (25_200.0, 32_400.0);

pub const CENTRAL_TERMINAL: (usize, usize) = (6, 10);
pub const SOUTH_TERMINAL: (usize, usize) = (6, 2);

const POINT_SPACING_M: f64 = 40.0;
const STOP_SPACING_M: f64 = 500.0;
const STOP_CURB_OFFSET_M: f64 = 8.0;
/// Headway of each line, in line order.
const HEADWAYS_S: [f64; 8] = [420.0, 480.0, 360.0, 420.0, 540.0, 480.0, 600.0, 540.0];
/// 06:45, so buses are already on the road when the window opens.
const FIRST_DEPARTURE_S: f64 = 24_300.0;
/// No departures from 08:45 on.
const LAST_DEPARTURE_S: f64 = 31_500.0;
const LINE_STAGGER_S: f64 = 90.0;

// GPS-like deviations of the itinerary points, cycled; all under 4.5 m.
const WOBBLE_M: [(f64, f64); 7] = [
    (2.9, 0.8),
    (-1.7, 2.6),
    (0.4, -3.1),
    (-3.2, -1.4),
    (1.5, 3.3),
    (3.0, -2.2),
    (-0.9, -0.6),
];

// Deviations applied to replayed travel times to stand in for observed
// journeys: mostly within 20 %, a few well outside.
const JOURNEY_FACTORS: [f64; 12] = [1.00, 1.06, 0.95, 1.12, 0.91, 1.31, 1.03, 0.86, 1.18, 0.97, 0.74, 1.09];

pub fn grid_spec() -> GridSpec {
    GridSpec {
        speed: STREET_SPEED,
        offset: CartPoint::new(-(CENTRAL_TERMINAL.0 as f64) * BLOCK_M, -(CENTRAL_TERMINAL.1 as f64) * BLOCK_M),
        location: Some(LOCATION),
        ..GridSpec::new(COLUMNS, ROWS, BLOCK_M)
    }
}

/// The grid with faster avenues along the central terminal's row and column.
pub fn network() -> RoadNetwork {
    let grid = grid_network(&grid_spec()).expect("bundled grid is valid");
    let avenue = |e: &Edge| {
        let (a, b) = grid.chord(&e.id).expect("edge exists");
        let centre = terminal_position(CENTRAL_TERMINAL);
        (a.x == centre.x && b.x == centre.x) || (a.y == centre.y && b.y == centre.y)
    };
    let edges = grid
        .edges()
        .iter()
        .map(|e| Edge {
            speed_limit: if avenue(e) { AVENUE_SPEED } else { STREET_SPEED },
            ..e.clone()
        })
        .collect();
    RoadNetwork::new(grid.nodes().cloned().collect(), edges, grid.connections(), grid.location())
        .expect("bundled grid is valid")
}

pub fn terminal_position(junction: (usize, usize)) -> CartPoint {
    grid_position(&grid_spec(), junction.0, junction.1)
}

fn straight(from: (usize, usize), to: (usize, usize)) -> Vec<(usize, usize)> {
    let mut out = vec![from];
    let mut at = from;
    while at != to {
        at = (
            step_towards(at.0, to.0),
            if at.0 == to.0 { step_towards(at.1, to.1) } else { at.1 },
        );
        out.push(at);
    }
    out
}

fn step_towards(a: usize, b: usize) -> usize {
    match a.cmp(&b) {
        std::cmp::Ordering::Less => a + 1,
        std::cmp::Ordering::Greater => a - 1,
        std::cmp::Ordering::Equal => a,
    }
}

fn via(points: &[(usize, usize)]) -> Vec<(usize, usize)> {
    let mut out = vec![points[0]];
    for w in points.windows(2) {
        out.extend(straight(w[0], w[1]).into_iter().skip(1));
    }
    out
}

/// Line ids and the junctions each line visits: four corridors, each served
/// in both directions.
pub fn line_paths() -> Vec<(&'static str, Vec<(usize, usize)>)> {
    let c = CENTRAL_TERMINAL;
    let s = SOUTH_TERMINAL;
    let reversed = |mut v: Vec<(usize, usize)>| {
        v.reverse();
        v
    };
    let north_south = via(&[(6, 16), c, s]);
    let west_east = via(&[(0, 10), c, (12, 10)]);
    let loop_west = via(&[s, (3, 2), (3, 10), c]);
    let east = via(&[(9, 0), (9, 16)]);
    vec![
        ("L01", north_south.clone()),
        ("L02", reversed(north_south)),
        ("L03", west_east.clone()),
        ("L04", reversed(west_east)),
        ("L05", loop_west.clone()),
        ("L06", reversed(loop_west)),
        ("L07", east.clone()),
        ("L08", reversed(east)),
    ]
}

/// Position and unit heading at arc length `s` along a chain.
fn along(net: &RoadNetwork, chain: &[EdgeId], s: f64) -> (CartPoint, CartPoint) {
    let mut rest = s;
    for id in chain {
        let (a, b) = net.chord(id).expect("chain edge exists");
        let len = a.distance(&b);
        if rest <= len || id == chain.last().unwrap() {
            let f = (rest / len).clamp(0.0, 1.0);
            let heading = CartPoint::new((b.x - a.x) / len, (b.y - a.y) / len);
            return (a.lerp(&b, f), heading);
        }
        rest -= len;
    }
    unreachable!("chain is non-empty")
}

/// The lines as written to their input documents.
pub fn lines() -> Vec<LineSpec> {
    let net = network();
    let projection = net.projection().expect("bundled network is geo-referenced");
    // Rounded to 1e-8 degrees (about a millimeter) so the written documents
    // do not depend on the last bit of the platform's trigonometry.
    let geo = |p: CartPoint| {
        let g = projection.to_geographic(p).expect("finite point");
        GeoPoint {
            lat: (g.lat * 1e8).round() / 1e8,
            lon: (g.lon * 1e8).round() / 1e8,
        }
    };
    line_paths()
        .into_iter()
        .enumerate()
        .map(|(i, (id, junctions))| {
            let chain = grid_path(&junctions);
            let total = chain.len() as f64 * BLOCK_M;
            let itinerary = sample_chain(&net, &chain, POINT_SPACING_M, 10.0, 10.0)
                .expect("chain exists")
                .into_iter()
                .enumerate()
                .map(|(k, p)| {
                    let (dx, dy) = WOBBLE_M[(k + 3 * i) % WOBBLE_M.len()];
                    geo(CartPoint::new(p.x + dx, p.y + dy))
                })
                .collect();
            let mut stops = Vec::new();
            let mut s = STOP_SPACING_M / 2.0;
            while s < total - 100.0 {
                let (p, h) = along(&net, &chain, s);
                // Curb on the right-hand side of travel.
                let curb = CartPoint::new(p.x + STOP_CURB_OFFSET_M * h.y, p.y - STOP_CURB_OFFSET_M * h.x);
                stops.push(StopSpec {
                    id: format!("s{:02}", stops.len() + 1),
                    pos: geo(curb),
                });
                s += STOP_SPACING_M;
            }
            let departures = (0..)
                .map(|k| FIRST_DEPARTURE_S + LINE_STAGGER_S * i as f64 + HEADWAYS_S[i] * k as f64)
                .take_while(|&d| d < LAST_DEPARTURE_S)
                .collect();
            LineSpec {
                line_id: id.to_string(),
                itinerary,
                stops,
                departures,
            }
        })
        .collect()
}

pub fn sim_config() -> SimConfig {
    SimConfig {
        time_window: WINDOW,
        ..SimConfig::default()
    }
}

pub fn sweep_config() -> SweepConfig {
    SweepConfig {
        reference: terminal_position(CENTRAL_TERMINAL),
        ..SweepConfig::default()
    }
}

/// Stand-in observed journey times for trips towards the central terminal:
/// replayed travel times at the first perimeter, scaled by fixed factors.
/// Trips that start inside the arrival threshold are left out.
pub fn real_journeys() -> Vec<(String, f64)> {
    let net = network();
    let projection = net.projection().expect("geo-referenced");
    let matched: Vec<_> = match_lines(&net, &lines(), &projection, &MatcherConfig::default())
        .into_iter()
        .map(|(_, r)| r.expect("bundled lines match").line)
        .collect();
    let frames = simulate(&net, &matched, &sim_config()).expect("bundled replay");
    let sweep = sweep_config();
    let cfg = AnalysisConfig {
        tx_range: sweep.ranges[0],
        perimeter_radius: sweep.perimeters[0],
        reference: sweep.reference,
        arrival_threshold: sweep.arrival_threshold,
        include_censored: false,
    };
    contacts::travel_times(&frames, &cfg)
        .trips
        .iter()
        .filter(|t| t.duration() > 0.0)
        .enumerate()
        .map(|(k, t)| {
            let real = (t.duration() * JOURNEY_FACTORS[k % JOURNEY_FACTORS.len()]).round();
            (t.vehicle_id.clone(), real)
        })
        .collect()
}

pub fn real_journeys_csv(journeys: &[(String, f64)]) -> String {
    let mut buf = Vec::new();
    contacts::write_journeys(journeys, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("utf-8")
}

pub fn scenario_config() -> ScenarioConfig {
    ScenarioConfig {
        network: Some("network.net.xml".into()),
        lines: line_paths()
            .iter()
            .map(|(id, _)| format!("lines/{id}.json").into())
            .collect(),
        output: Some("out".into()),
        real_journeys: Some("real_journeys.csv".into()),
        simulation: sim_config(),
        analysis: sweep_config(),
        ..ScenarioConfig::default()
    }
}

/// Every file of the bundled scenario as (relative path, contents).
pub fn bundle_files() -> Vec<(String, String)> {
    let mut files = vec![
        ("network.net.xml".to_string(), write_network(&network())),
        ("scenario.json".to_string(), scenario_config().to_json()),
        ("real_journeys.csv".to_string(), real_journeys_csv(&real_journeys())),
    ];
    for line in lines() {
        files.push((format!("lines/{}.json", line.line_id), line.to_json() + "\n"));
    }
    files
}

/// Departure clock strings of a line, as written to its document.
pub fn departure_clocks(line: &LineSpec) -> Vec<String> {
    line.departures.iter().map(|&d| format_clock(d)).collect()
}
