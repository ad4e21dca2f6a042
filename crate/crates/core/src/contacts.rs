//! Mobility metrics over sampled traces: proximity graphs, connectivity,
//! contact and inter-contact intervals, perimeter density, travel times to a
//! reference point, and the agreement between real and simulated durations.
//!
//! Two vehicles are in contact when their distance is at most the
//! transmission range (boundary inclusive).

use std::collections::BTreeMap;
use std::io;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::CartPoint;
use crate::replay::TraceFrame;
use crate::xml::fixed2;

pub const DEFAULT_RANGES_M: [f64; 2] = [150.0, 300.0];
pub const DEFAULT_PERIMETERS_M: [f64; 2] = [2000.0, 4000.0];
pub const DEFAULT_ARRIVAL_THRESHOLD_M: f64 = 50.0;
pub const DEFAULT_TOLERANCE: f64 = 0.2;

// Relative slack when checking that frame times sit on a uniform grid.
const GRID_SLACK: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ContactError {
    #[error("frames are not on a uniform sampling grid: {0}")]
    Grid(String),
    #[error("pairing error: {0}")]
    Pairing(String),
    #[error("invalid analysis configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    pub tx_range: f64,
    pub perimeter_radius: f64,
    /// Terminal the perimeter and travel times refer to.
    pub reference: CartPoint,
    pub arrival_threshold: f64,
    /// Feed window-truncated intervals into summaries.
    pub include_censored: bool,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            tx_range: DEFAULT_RANGES_M[0],
            perimeter_radius: DEFAULT_PERIMETERS_M[0],
            reference: CartPoint::default(),
            arrival_threshold: DEFAULT_ARRIVAL_THRESHOLD_M,
            include_censored: false,
        }
    }
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<(), ContactError> {
        for (name, v) in [
            ("transmission range", self.tx_range),
            ("perimeter radius", self.perimeter_radius),
            ("arrival threshold", self.arrival_threshold),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(ContactError::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        if !self.reference.is_finite() {
            return Err(ContactError::InvalidConfig("reference point is not finite".into()));
        }
        Ok(())
    }
}

/// Undirected proximity graph of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameGraph {
    pub t: f64,
    /// Vehicle ids in ascending order.
    pub vehicles: Vec<String>,
    /// Neighbor indices into `vehicles`, ascending.
    pub neighbors: Vec<Vec<usize>>,
}

impl FrameGraph {
    pub fn degree(&self, vehicle: &str) -> Option<usize> {
        let i = self.vehicles.binary_search_by(|v| v.as_str().cmp(vehicle)).ok()?;
        Some(self.neighbors[i].len())
    }

    pub fn degrees(&self) -> impl Iterator<Item = (&str, usize)> {
        self.vehicles
            .iter()
            .zip(&self.neighbors)
            .map(|(v, n)| (v.as_str(), n.len()))
    }

    /// Edges as id pairs `(a, b)` with `a < b`.
    pub fn edges(&self) -> Vec<(&str, &str)> {
        let mut out = Vec::new();
        for (i, ns) in self.neighbors.iter().enumerate() {
            for &j in ns.iter().filter(|&&j| j > i) {
                out.push((self.vehicles[i].as_str(), self.vehicles[j].as_str()));
            }
        }
        out
    }

    pub fn has_edge(&self, a: &str, b: &str) -> bool {
        let find = |id: &str| self.vehicles.binary_search_by(|v| v.as_str().cmp(id)).ok();
        match (find(a), find(b)) {
            (Some(i), Some(j)) => self.neighbors[i].binary_search(&j).is_ok(),
            _ => false,
        }
    }
}

pub fn adjacency(frame: &TraceFrame, tx_range: f64) -> FrameGraph {
    let vehicles: Vec<String> = frame.positions.keys().cloned().collect();
    let points: Vec<CartPoint> = frame.positions.values().copied().collect();
    let mut neighbors = vec![Vec::new(); points.len()];
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            if points[i].distance(&points[j]) <= tx_range {
                neighbors[i].push(j);
                neighbors[j].push(i);
            }
        }
    }
    for ns in &mut neighbors {
        ns.sort_unstable();
    }
    FrameGraph {
        t: frame.t,
        vehicles,
        neighbors,
    }
}

/// Per frame, how many vehicles have at least one neighbor.
pub fn total_connected(frames: &[TraceFrame], tx_range: f64) -> Vec<(f64, usize)> {
    frames
        .iter()
        .map(|f| {
            let g = adjacency(f, tx_range);
            (f.t, g.degrees().filter(|&(_, d)| d > 0).count())
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeSample {
    pub t: f64,
    pub vehicle_id: String,
    pub degree: usize,
}

/// Degree of every connected vehicle in every frame.
pub fn connectivity_degrees(frames: &[TraceFrame], tx_range: f64) -> Vec<DegreeSample> {
    let mut out = Vec::new();
    for f in frames {
        let g = adjacency(f, tx_range);
        for (v, d) in g.degrees().filter(|&(_, d)| d > 0) {
            out.push(DegreeSample {
                t: f.t,
                vehicle_id: v.to_string(),
                degree: d,
            });
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntervalKind {
    Contact,
    InterContact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactInterval {
    pub vehicle_id: String,
    pub kind: IntervalKind,
    pub start: f64,
    pub end: f64,
    /// The true extent is unknown because observation stopped first.
    pub censored: bool,
}

impl ContactInterval {
    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

/// Sampling interval of a frame list, checking the grid is uniform.
/// `None` with fewer than two frames.
pub fn sample_interval(frames: &[TraceFrame]) -> Result<Option<f64>, ContactError> {
    if frames.len() < 2 {
        return Ok(None);
    }
    let t0 = frames[0].t;
    let dt = frames[1].t - t0;
    if !(dt > 0.0) {
        return Err(ContactError::Grid(format!("t = {} does not follow t = {t0}", frames[1].t)));
    }
    for (k, f) in frames.iter().enumerate() {
        let expected = t0 + k as f64 * dt;
        if (f.t - expected).abs() > GRID_SLACK * expected.abs().max(1.0) {
            return Err(ContactError::Grid(format!(
                "frame {k} is at t = {}, expected t = {expected}",
                f.t
            )));
        }
    }
    Ok(Some(dt))
}

/// Contact and inter-contact intervals of every vehicle, ordered by
/// (vehicle id, start).
///
/// A run of connected samples starting at `ta` whose first disconnected
/// sample is `tb` is a contact of `tb - ta`; an isolated run between two
/// connected states is an inter-contact measured up to the sample where a
/// neighbor reappears. Each vehicle is followed over the frames in which it
/// is present; a run still open at the last of those frames ends one
/// interval later. Intervals are censored when they reach the end of the
/// observation window, and inter-contact runs are censored when no
/// interruption or no reconnection was observed (the vehicle appeared
/// isolated, or disappeared while isolated). A contact observed from a
/// vehicle's first sample starts at that sample.
pub fn contact_intervals(frames: &[TraceFrame], tx_range: f64) -> Result<Vec<ContactInterval>, ContactError> {
    let Some(dt) = sample_interval(frames)? else {
        return Ok(Vec::new());
    };
    let last_frame = frames.len() - 1;

    // Per vehicle: (frame index, connected) in frame order.
    let mut states: BTreeMap<String, Vec<(usize, bool)>> = BTreeMap::new();
    for (k, f) in frames.iter().enumerate() {
        let g = adjacency(f, tx_range);
        for (v, d) in g.degrees() {
            states.entry(v.to_string()).or_default().push((k, d > 0));
        }
    }

    let mut out = Vec::new();
    for (vehicle, seq) in states {
        let mut i = 0;
        while i < seq.len() {
            // One presence run: consecutive frame indices.
            let mut j = i;
            while j + 1 < seq.len() && seq[j + 1].0 == seq[j].0 + 1 {
                j += 1;
            }
            let run = &seq[i..=j];
            let mut a = 0;
            while a < run.len() {
                let connected = run[a].1;
                let mut b = a;
                while b + 1 < run.len() && run[b + 1].1 == connected {
                    b += 1;
                }
                let start = frames[run[a].0].t;
                let closed = b + 1 < run.len();
                let end = if closed {
                    frames[run[b + 1].0].t
                } else {
                    frames[run[b].0].t + dt
                };
                let at_window_end = !closed && run[b].0 == last_frame;
                let censored = if connected {
                    at_window_end
                } else {
                    at_window_end || a == 0 || !closed
                };
                out.push(ContactInterval {
                    vehicle_id: vehicle.clone(),
                    kind: if connected {
                        IntervalKind::Contact
                    } else {
                        IntervalKind::InterContact
                    },
                    start,
                    end,
                    censored,
                });
                a = b + 1;
            }
            i = j + 1;
        }
    }
    Ok(out)
}

/// Per frame, vehicles within `perimeter_radius` of the reference (inclusive).
pub fn vehicles_in_perimeter(frames: &[TraceFrame], cfg: &AnalysisConfig) -> Vec<(f64, usize)> {
    frames
        .iter()
        .map(|f| {
            let n = f
                .positions
                .values()
                .filter(|p| p.distance(&cfg.reference) <= cfg.perimeter_radius)
                .count();
            (f.t, n)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trip {
    pub vehicle_id: String,
    /// First sample inside the perimeter.
    pub entered: f64,
    /// First sample, not before `entered`, inside the arrival threshold.
    pub arrived: f64,
}

impl Trip {
    pub fn duration(&self) -> f64 {
        self.arrived - self.entered
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TravelTimes {
    /// Completed trips ordered by vehicle id.
    pub trips: Vec<Trip>,
    /// Entered the perimeter but never arrived within the window.
    pub not_arrived: Vec<String>,
    /// Never came within the perimeter.
    pub never_entered: Vec<String>,
}

/// Time from perimeter entry to arrival at the reference, per vehicle.
pub fn travel_times(frames: &[TraceFrame], cfg: &AnalysisConfig) -> TravelTimes {
    #[derive(Default)]
    struct Track {
        entered: Option<f64>,
        arrived: Option<f64>,
    }
    let mut tracks: BTreeMap<&str, Track> = BTreeMap::new();
    for f in frames {
        for (id, p) in &f.positions {
            let track = tracks.entry(id.as_str()).or_default();
            if track.arrived.is_some() {
                continue;
            }
            let d = p.distance(&cfg.reference);
            if track.entered.is_none() && d <= cfg.perimeter_radius {
                track.entered = Some(f.t);
            }
            if track.entered.is_some() && d <= cfg.arrival_threshold {
                track.arrived = Some(f.t);
            }
        }
    }
    let mut out = TravelTimes::default();
    for (id, track) in tracks {
        match (track.entered, track.arrived) {
            (Some(entered), Some(arrived)) => out.trips.push(Trip {
                vehicle_id: id.to_string(),
                entered,
                arrived,
            }),
            (Some(_), None) => out.not_arrived.push(id.to_string()),
            _ => out.never_entered.push(id.to_string()),
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Compatibility {
    pub pairs: usize,
    pub within: usize,
    pub percentage: f64,
}

/// Share of trips whose simulated duration lies within `tolerance` (a
/// fraction of the real duration) of the real one, in percent.
pub fn compatibility(real: &[f64], simulated: &[f64], tolerance: f64) -> Result<Compatibility, ContactError> {
    if real.len() != simulated.len() {
        return Err(ContactError::Pairing(format!(
            "{} real durations against {} simulated ones",
            real.len(),
            simulated.len()
        )));
    }
    if real.is_empty() {
        return Err(ContactError::Pairing("no trips to compare".into()));
    }
    if !(tolerance.is_finite() && tolerance >= 0.0) {
        return Err(ContactError::InvalidConfig(format!("tolerance must be non-negative, got {tolerance}")));
    }
    if real.iter().chain(simulated).any(|d| !d.is_finite() || *d < 0.0) {
        return Err(ContactError::Pairing("durations must be finite and non-negative".into()));
    }
    let within = real
        .iter()
        .zip(simulated)
        .filter(|(r, s)| (*s - *r).abs() <= tolerance * *r)
        .count();
    Ok(Compatibility {
        pairs: real.len(),
        within,
        percentage: 100.0 * within as f64 / real.len() as f64,
    })
}

/// One row of a metric CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub metric: String,
    /// Empty for per-frame aggregates.
    pub vehicle_id: String,
    /// Sample time, or interval/trip start.
    pub t_or_start: f64,
    pub value: f64,
}

pub const METRIC_HEADER: [&str; 4] = ["metric", "vehicle_id", "t_or_start", "value"];

pub fn write_metrics<W: io::Write>(rows: &[MetricRow], out: W) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| io::Error::other(e);
    w.write_record(METRIC_HEADER).map_err(err)?;
    for r in rows {
        w.write_record([
            r.metric.as_str(),
            r.vehicle_id.as_str(),
            &fixed2(r.t_or_start),
            &fixed2(r.value),
        ])
        .map_err(err)?;
    }
    w.flush()
}

pub fn read_metrics<R: io::Read>(input: R) -> Result<Vec<MetricRow>, String> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers().map_err(|e| e.to_string())?.clone();
    if headers.iter().collect::<Vec<_>>() != METRIC_HEADER {
        return Err(format!("expected header `{}`", METRIC_HEADER.join(",")));
    }
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| format!("row {row}: {e}"))?;
        if rec.len() != 4 {
            return Err(format!("row {row}: expected 4 fields"));
        }
        let num = |k: usize| {
            rec[k]
                .parse::<f64>()
                .map_err(|_| format!("row {row}: `{}` is not a number", &rec[k]))
        };
        out.push(MetricRow {
            metric: rec[0].to_string(),
            vehicle_id: rec[1].to_string(),
            t_or_start: num(2)?,
            value: num(3)?,
        });
    }
    Ok(out)
}

pub const JOURNEY_HEADER: [&str; 2] = ["vehicle_id", "duration"];

/// Observed journey times, CSV `vehicle_id,duration`.
pub fn write_journeys<W: io::Write>(journeys: &[(String, f64)], out: W) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| io::Error::other(e);
    w.write_record(JOURNEY_HEADER).map_err(err)?;
    for (id, d) in journeys {
        w.write_record([id.as_str(), &fixed2(*d)]).map_err(err)?;
    }
    w.flush()
}

pub fn read_journeys<R: io::Read>(input: R) -> Result<Vec<(String, f64)>, String> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers().map_err(|e| e.to_string())?.clone();
    if headers.iter().collect::<Vec<_>>() != JOURNEY_HEADER {
        return Err(format!("expected header `{}`", JOURNEY_HEADER.join(",")));
    }
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| format!("row {row}: {e}"))?;
        let d = rec[1]
            .parse::<f64>()
            .map_err(|_| format!("row {row}: `{}` is not a number", &rec[1]))?;
        out.push((rec[0].to_string(), d));
    }
    Ok(out)
}
