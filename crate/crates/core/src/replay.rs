//! Deterministic replay of matched lines and the position-trace format.
//!
//! Each bus departs at offset 0 of its first edge, drives every edge at a
//! constant speed (edge speed limit times the speed factor), dwells at each
//! of its stops, and disappears once the end of its last edge is reached.
//! Buses do not interact. Positions are computed in closed form from a
//! per-vehicle schedule, so sampling never accumulates time-step error.

use std::collections::BTreeMap;
use std::io;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::emitter::vehicle_id;
use crate::geo::CartPoint;
use crate::matcher::MatchedLine;
use crate::network::RoadNetwork;
use crate::xml::fixed2;

pub const DEFAULT_SAMPLE_INTERVAL_S: f64 = 3.0;
pub const DEFAULT_DWELL_TIME_S: f64 = 20.0;

/// Header of the trace CSV.
pub const TRACE_HEADER: [&str; 4] = ["t", "vehicle_id", "x", "y"];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReplayError {
    #[error("invalid simulation configuration: {0}")]
    InvalidConfig(String),
    #[error("integrity error: {0}")]
    Integrity(String),
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("row {row}: {message}")]
    Parse { row: u64, message: String },
    #[error("row {row}: {message}")]
    Order { row: u64, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    /// Seconds between two frames.
    pub sample_interval: f64,
    /// Seconds spent at every stop.
    pub dwell_time: f64,
    /// Inclusive `(start, end)` in seconds; frames fall on `start + k * interval`.
    pub time_window: (f64, f64),
    /// Multiplier in (0, 1] on edge speed limits.
    pub speed_factor: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            sample_interval: DEFAULT_SAMPLE_INTERVAL_S,
            dwell_time: DEFAULT_DWELL_TIME_S,
            time_window: (0.0, 7200.0),
            speed_factor: 1.0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), ReplayError> {
        let bad = |m: String| Err(ReplayError::InvalidConfig(m));
        if !(self.sample_interval.is_finite() && self.sample_interval > 0.0) {
            return bad(format!("sample interval must be positive, got {}", self.sample_interval));
        }
        if !(self.dwell_time.is_finite() && self.dwell_time >= 0.0) {
            return bad(format!("dwell time must be non-negative, got {}", self.dwell_time));
        }
        let (start, end) = self.time_window;
        if !(start.is_finite() && end.is_finite() && start < end) {
            return bad(format!("time window ({start}, {end}) is empty"));
        }
        if !(self.speed_factor > 0.0 && self.speed_factor <= 1.0) {
            return bad(format!("speed factor must be in (0, 1], got {}", self.speed_factor));
        }
        Ok(())
    }

    /// Sample instants of the window.
    pub fn frame_times(&self) -> Vec<f64> {
        let (start, end) = self.time_window;
        let mut out = Vec::new();
        let mut k = 0u64;
        loop {
            let t = start + k as f64 * self.sample_interval;
            if t > end + 1e-9 {
                break;
            }
            out.push(t);
            k += 1;
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Phase {
    Driving,
    Dwelling { remaining: f64 },
    Finished,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VehicleState {
    pub vehicle_id: String,
    /// Index into the route's edge chain.
    pub edge_index: usize,
    /// Meters from the current edge's from-node.
    pub offset: f64,
    pub phase: Phase,
}

/// Positions of all active vehicles at one sampling instant.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TraceFrame {
    pub t: f64,
    pub positions: BTreeMap<String, CartPoint>,
}

struct Piece {
    a: CartPoint,
    b: CartPoint,
    length: f64,
    // Cumulative route distance at the piece's start.
    start: f64,
}

// Breakpoint of the distance-time schedule: at `time` the bus is `dist`
// meters along its route. Between breakpoints motion is linear.
#[derive(Debug, Clone, Copy)]
struct Knot {
    time: f64,
    dist: f64,
}

struct Vehicle {
    id: String,
    route: usize,
    knots: Vec<Knot>,
}

/// A prepared replay: per-route geometry plus per-vehicle schedules.
pub struct Replay {
    cfg: SimConfig,
    routes: Vec<Vec<Piece>>,
    vehicles: Vec<Vehicle>,
}

impl Replay {
    pub fn new(net: &RoadNetwork, lines: &[MatchedLine], cfg: &SimConfig) -> Result<Self, ReplayError> {
        cfg.validate()?;
        let mut sorted: Vec<&MatchedLine> = lines.iter().collect();
        sorted.sort_by(|a, b| a.line_id.cmp(&b.line_id));
        let mut routes = Vec::with_capacity(sorted.len());
        let mut vehicles = Vec::new();
        for line in sorted {
            let (pieces, speeds) = route_geometry(net, line)?;
            let stops = stop_positions(line, &pieces)?;
            let template = schedule(&pieces, &speeds, &stops, cfg);
            let route = routes.len();
            routes.push(pieces);
            for (k, &depart) in line.departures.iter().enumerate() {
                vehicles.push(Vehicle {
                    id: vehicle_id(&line.line_id, k),
                    route,
                    knots: template
                        .iter()
                        .map(|k| Knot {
                            time: k.time + depart,
                            dist: k.dist,
                        })
                        .collect(),
                });
            }
        }
        vehicles.sort_by(|a, b| a.id.cmp(&b.id));
        Ok(Self {
            cfg: *cfg,
            routes,
            vehicles,
        })
    }

    /// Every vehicle's state at `t`; `None` before departure.
    pub fn states_at(&self, t: f64) -> Vec<(String, Option<VehicleState>)> {
        self.vehicles
            .iter()
            .map(|v| (v.id.clone(), self.state(v, t)))
            .collect()
    }

    fn state(&self, v: &Vehicle, t: f64) -> Option<VehicleState> {
        let first = v.knots.first()?;
        if t < first.time {
            return None;
        }
        let pieces = &self.routes[v.route];
        let last = v.knots.last().expect("schedule has knots");
        if t >= last.time {
            return Some(VehicleState {
                vehicle_id: v.id.clone(),
                edge_index: pieces.len() - 1,
                offset: pieces[pieces.len() - 1].length,
                phase: Phase::Finished,
            });
        }
        // Last knot at or before t.
        let i = v.knots.partition_point(|k| k.time <= t) - 1;
        let (k0, k1) = (v.knots[i], v.knots[i + 1]);
        let (dist, phase) = if k1.dist == k0.dist {
            (
                k0.dist,
                Phase::Dwelling {
                    remaining: k1.time - t,
                },
            )
        } else {
            let f = (t - k0.time) / (k1.time - k0.time);
            (k0.dist + f * (k1.dist - k0.dist), Phase::Driving)
        };
        let (edge_index, offset) = locate(pieces, dist);
        Some(VehicleState {
            vehicle_id: v.id.clone(),
            edge_index,
            offset,
            phase,
        })
    }

    fn position(&self, v: &Vehicle, t: f64) -> Option<CartPoint> {
        let state = self.state(v, t)?;
        if state.phase == Phase::Finished {
            return None;
        }
        let piece = &self.routes[v.route][state.edge_index];
        Some(piece.a.lerp(&piece.b, state.offset / piece.length))
    }

    pub fn frame_at(&self, t: f64) -> TraceFrame {
        let positions = self
            .vehicles
            .iter()
            .filter_map(|v| self.position(v, t).map(|p| (v.id.clone(), p)))
            .collect();
        TraceFrame { t, positions }
    }

    pub fn frames(&self) -> Vec<TraceFrame> {
        self.cfg.frame_times().into_iter().map(|t| self.frame_at(t)).collect()
    }

    /// Departure and disappearance instants per vehicle id.
    pub fn vehicle_spans(&self) -> Vec<(String, f64, f64)> {
        self.vehicles
            .iter()
            .map(|v| {
                let first = v.knots.first().expect("schedule has knots").time;
                let last = v.knots.last().expect("schedule has knots").time;
                (v.id.clone(), first, last)
            })
            .collect()
    }
}

/// Replays `lines` over the configured window.
pub fn simulate(
    net: &RoadNetwork,
    lines: &[MatchedLine],
    cfg: &SimConfig,
) -> Result<Vec<TraceFrame>, ReplayError> {
    Ok(Replay::new(net, lines, cfg)?.frames())
}

fn route_geometry(net: &RoadNetwork, line: &MatchedLine) -> Result<(Vec<Piece>, Vec<f64>), ReplayError> {
    if line.route.edges.is_empty() {
        return Err(ReplayError::Integrity(format!("line `{}` has an empty route", line.line_id)));
    }
    let mut pieces = Vec::with_capacity(line.route.edges.len());
    let mut speeds = Vec::with_capacity(line.route.edges.len());
    let mut start = 0.0;
    for id in &line.route.edges {
        let edge = net.edge(id).ok_or_else(|| {
            ReplayError::Integrity(format!("line `{}`: edge `{id}` is not in the network", line.line_id))
        })?;
        let (a, b) = net.chord(id).expect("edge exists");
        pieces.push(Piece {
            a,
            b,
            length: edge.length,
            start,
        });
        speeds.push(edge.speed_limit);
        start += edge.length;
    }
    Ok((pieces, speeds))
}

// Route distance of every stop, ascending. A stop on an edge that occurs
// more than once in the chain takes the first occurrence not behind the
// previous stop.
fn stop_positions(line: &MatchedLine, pieces: &[Piece]) -> Result<Vec<f64>, ReplayError> {
    let mut cursor = 0.0;
    let mut out = Vec::with_capacity(line.stops.len());
    for stop in &line.stops {
        let occurrences: Vec<f64> = line
            .route
            .edges
            .iter()
            .enumerate()
            .filter(|(_, e)| **e == stop.edge_id)
            .map(|(i, _)| pieces[i].start + stop.offset.clamp(0.0, pieces[i].length))
            .collect();
        let pos = occurrences
            .iter()
            .copied()
            .find(|&d| d >= cursor)
            .or_else(|| occurrences.first().copied())
            .ok_or_else(|| {
                ReplayError::Integrity(format!(
                    "line `{}`: stop `{}` is on edge `{}`, which is not on the route",
                    line.line_id, stop.stop_id, stop.edge_id
                ))
            })?;
        cursor = pos;
        out.push(pos);
    }
    out.sort_by(f64::total_cmp);
    Ok(out)
}

// Schedule relative to a departure at time 0.
fn schedule(pieces: &[Piece], speeds: &[f64], stops: &[f64], cfg: &SimConfig) -> Vec<Knot> {
    let mut knots = vec![Knot { time: 0.0, dist: 0.0 }];
    let mut now = Knot { time: 0.0, dist: 0.0 };
    let mut next_stop = stops.iter().peekable();
    for (piece, &limit) in pieces.iter().zip(speeds) {
        let speed = limit * cfg.speed_factor;
        let end = piece.start + piece.length;
        loop {
            let target = match next_stop.peek() {
                Some(&&s) if s <= end => s,
                _ => end,
            };
            if target > now.dist {
                now = Knot {
                    time: now.time + (target - now.dist) / speed,
                    dist: target,
                };
                knots.push(now);
            }
            if next_stop.peek().is_some_and(|&&s| s <= end) {
                next_stop.next();
                if cfg.dwell_time > 0.0 {
                    now.time += cfg.dwell_time;
                    knots.push(now);
                }
            } else {
                break;
            }
        }
    }
    knots
}

fn locate(pieces: &[Piece], dist: f64) -> (usize, f64) {
    let i = pieces.partition_point(|p| p.start <= dist).max(1) - 1;
    let offset = (dist - pieces[i].start).clamp(0.0, pieces[i].length);
    (i, offset)
}

/// Writes frames as CSV rows sorted by `(t, vehicle_id)`. A frame without
/// vehicles is written as a single row with empty vehicle and coordinate
/// fields so the sampling grid survives a round trip.
pub fn write_trace<W: io::Write>(frames: &[TraceFrame], out: W) -> Result<(), TraceError> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| TraceError::Io(io::Error::other(e));
    w.write_record(TRACE_HEADER).map_err(csv_err)?;
    let mut sorted: Vec<&TraceFrame> = frames.iter().collect();
    sorted.sort_by(|a, b| a.t.total_cmp(&b.t));
    for frame in sorted {
        let t = fixed2(frame.t);
        if frame.positions.is_empty() {
            w.write_record([t.as_str(), "", "", ""]).map_err(csv_err)?;
        }
        for (id, p) in &frame.positions {
            w.write_record([t.as_str(), id.as_str(), &fixed2(p.x), &fixed2(p.y)])
                .map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn trace_to_string(frames: &[TraceFrame]) -> String {
    let mut buf = Vec::new();
    write_trace(frames, &mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("trace is UTF-8")
}

/// Reads a trace CSV. Rows must be sorted by `t`, then by vehicle id, with
/// no vehicle repeated within a frame. Row numbers in errors are 1-based
/// file lines (the header is line 1).
pub fn read_trace<R: io::Read>(input: R) -> Result<Vec<TraceFrame>, TraceError> {
    let mut r = csv::ReaderBuilder::new().has_headers(false).from_reader(input);
    let mut frames: Vec<TraceFrame> = Vec::new();
    let mut last_id: Option<String> = None;
    let mut saw_header = false;
    let mut record = csv::StringRecord::new();
    loop {
        let row = r.position().line();
        match r.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => {
                return Err(TraceError::Parse {
                    row: e.position().map_or(row, |p| p.line()),
                    message: e.to_string(),
                })
            }
        }
        let parse = |message: String| TraceError::Parse { row, message };
        if !saw_header {
            let fields: Vec<&str> = record.iter().map(str::trim).collect();
            if fields != TRACE_HEADER {
                return Err(parse(format!(
                    "expected header `{}`, found `{}`",
                    TRACE_HEADER.join(","),
                    fields.join(",")
                )));
            }
            saw_header = true;
            continue;
        }
        if record.len() != 4 {
            return Err(parse(format!("expected 4 fields, found {}", record.len())));
        }
        let number = |i: usize, name: &str| -> Result<f64, TraceError> {
            let text = record[i].trim();
            text.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| parse(format!("{name} `{text}` is not a finite number")))
        };
        let t = number(0, "t")?;
        let id = record[1].trim();

        let new_frame = match frames.last() {
            None => true,
            Some(f) if t > f.t => true,
            Some(f) if t == f.t => false,
            Some(f) => {
                return Err(TraceError::Order {
                    row,
                    message: format!("t = {t} follows t = {}", f.t),
                })
            }
        };
        if new_frame {
            frames.push(TraceFrame {
                t,
                positions: BTreeMap::new(),
            });
            last_id = None;
        }

        if id.is_empty() {
            if !record[2].trim().is_empty() || !record[3].trim().is_empty() {
                return Err(parse("coordinates given without a vehicle id".into()));
            }
            if !new_frame {
                return Err(TraceError::Order {
                    row,
                    message: format!("empty-frame row for t = {t} shares its frame with vehicle rows"),
                });
            }
            // Marks an empty frame; a following vehicle row at the same t is an error.
            last_id = Some(String::new());
            continue;
        }
        if last_id.as_deref() == Some("") {
            return Err(TraceError::Order {
                row,
                message: format!("vehicle row for t = {t} follows an empty-frame row"),
            });
        }
        if let Some(prev) = &last_id {
            if id <= prev.as_str() {
                return Err(TraceError::Order {
                    row,
                    message: format!("vehicle `{id}` is not after `{prev}` within t = {t}"),
                });
            }
        }
        let p = CartPoint::new(number(2, "x")?, number(3, "y")?);
        frames.last_mut().expect("frame exists").positions.insert(id.to_string(), p);
        last_id = Some(id.to_string());
    }
    if !saw_header {
        return Err(TraceError::Parse {
            row: 1,
            message: "missing header".into(),
        });
    }
    Ok(frames)
}

pub fn trace_from_str(text: &str) -> Result<Vec<TraceFrame>, TraceError> {
    read_trace(text.as_bytes())
}
