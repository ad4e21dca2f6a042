//! Geometric-topological map matching of bus itineraries and stops.
//!
//! Every positioning point is compared against the edges whose chord passes
//! within the search radius. The first edge is chosen from the direction of
//! travel between the first two points; every later edge must start at the
//! junction where the previous one ends (physical continuity) and must have a
//! connection record from the previous edge (logical continuity). Stops are
//! attached to the closest edge that also belongs to the matched route.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{self, CartPoint, GeoError, GeoPoint, Projection};
use crate::network::{EdgeId, MatchGeometry, NetworkError, RoadNetwork, DEFAULT_RADIUS_M};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MatchError {
    #[error("invalid line: {0}")]
    InvalidLine(String),
    #[error("invalid matcher configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("the two positioning points coincide")]
    CoincidentPoints,
    #[error("no candidate edge within {radius} m of ({x:.2}, {y:.2})")]
    NoCandidate { x: f64, y: f64, radius: f64 },
    #[error("no candidate edge near ({x:.2}, {y:.2}) is oriented with the direction of travel")]
    NoOrientedCandidate { x: f64, y: f64 },
    #[error("line `{line_id}`: no pair of consecutive points resolves a first edge")]
    UnmatchableRoute { line_id: String },
    #[error("line `{line_id}`: {gaps} consecutive unmatched points ending at point {point}")]
    BrokenRoute {
        line_id: String,
        point: usize,
        gaps: usize,
    },
}

/// When a point that is still close to the previous edge keeps it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StayPolicy {
    /// Keep the previous edge while it is inside the search radius. Moving
    /// on only once the point has left the previous edge's region avoids
    /// committing to a turn while the point is still ambiguous near a
    /// junction.
    #[default]
    WithinRadius,
    /// Keep the previous edge only while no other candidate is strictly closer.
    Nearest,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MatcherConfig {
    /// Search radius in meters.
    pub radius: f64,
    pub densify_passes: usize,
    pub max_consecutive_gaps: usize,
    pub geometry: MatchGeometry,
    pub stay: StayPolicy,
}

impl Default for MatcherConfig {
    fn default() -> Self {
        Self {
            radius: DEFAULT_RADIUS_M,
            densify_passes: 1,
            max_consecutive_gaps: 5,
            geometry: MatchGeometry::Chord,
            stay: StayPolicy::WithinRadius,
        }
    }
}

impl MatcherConfig {
    pub fn validate(&self) -> Result<(), MatchError> {
        if !(self.radius.is_finite() && self.radius > 0.0) {
            return Err(MatchError::InvalidConfig(format!(
                "radius must be positive, got {}",
                self.radius
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StopSpec {
    pub id: String,
    pub pos: GeoPoint,
}

/// One bus line as read from its input document.
#[derive(Debug, Clone, PartialEq)]
pub struct LineSpec {
    pub line_id: String,
    pub itinerary: Vec<GeoPoint>,
    pub stops: Vec<StopSpec>,
    /// Seconds after midnight, strictly increasing.
    pub departures: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct LineDocument {
    line_id: String,
    route: Vec<GeoPoint>,
    #[serde(default)]
    stops: Vec<StopDocument>,
    #[serde(default)]
    departures: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct StopDocument {
    id: String,
    lat: f64,
    lon: f64,
}

impl LineSpec {
    pub fn validate(&self) -> Result<(), MatchError> {
        if self.line_id.is_empty() {
            return Err(MatchError::InvalidLine("empty line_id".into()));
        }
        if self.itinerary.len() < 2 {
            return Err(MatchError::InvalidLine(format!(
                "line `{}` has {} route points, at least 2 are required",
                self.line_id,
                self.itinerary.len()
            )));
        }
        for p in &self.itinerary {
            p.validate()?;
        }
        for s in &self.stops {
            s.pos.validate()?;
        }
        if self.departures.iter().any(|d| !d.is_finite() || *d < 0.0) {
            return Err(MatchError::InvalidLine(format!(
                "line `{}` has an invalid departure time",
                self.line_id
            )));
        }
        if self.departures.windows(2).any(|w| w[1] <= w[0]) {
            return Err(MatchError::InvalidLine(format!(
                "line `{}` departures are not strictly increasing",
                self.line_id
            )));
        }
        Ok(())
    }

    /// Reads the JSON line document:
    /// `{"line_id", "route": [{"lat","lon"}], "stops": [{"id","lat","lon"}], "departures": ["HH:MM:SS"]}`.
    pub fn from_json(text: &str) -> Result<Self, MatchError> {
        let doc: LineDocument =
            serde_json::from_str(text).map_err(|e| MatchError::InvalidLine(e.to_string()))?;
        let departures = doc
            .departures
            .iter()
            .map(|d| parse_clock(d))
            .collect::<Result<Vec<_>, _>>()?;
        let line = LineSpec {
            line_id: doc.line_id,
            itinerary: doc.route,
            stops: doc
                .stops
                .into_iter()
                .map(|s| StopSpec {
                    id: s.id,
                    pos: GeoPoint { lat: s.lat, lon: s.lon },
                })
                .collect(),
            departures,
        };
        line.validate()?;
        Ok(line)
    }

    pub fn to_json(&self) -> String {
        let doc = LineDocument {
            line_id: self.line_id.clone(),
            route: self.itinerary.clone(),
            stops: self
                .stops
                .iter()
                .map(|s| StopDocument {
                    id: s.id.clone(),
                    lat: s.pos.lat,
                    lon: s.pos.lon,
                })
                .collect(),
            departures: self.departures.iter().map(|&d| format_clock(d)).collect(),
        };
        serde_json::to_string_pretty(&doc).expect("line document serialises")
    }
}

/// Parses `HH:MM:SS` into seconds. Hours may exceed 23 for service running
/// past midnight.
pub fn parse_clock(text: &str) -> Result<f64, MatchError> {
    let bad = || MatchError::InvalidLine(format!("malformed time `{text}`, expected HH:MM:SS"));
    let parts: Vec<&str> = text.trim().split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let h: u32 = parts[0].parse().map_err(|_| bad())?;
    let m: u32 = parts[1].parse().map_err(|_| bad())?;
    let s: u32 = parts[2].parse().map_err(|_| bad())?;
    if m > 59 || s > 59 {
        return Err(bad());
    }
    Ok(f64::from(h * 3600 + m * 60 + s))
}

pub fn format_clock(seconds: f64) -> String {
    let total = seconds.round() as u64;
    format!("{:02}:{:02}:{:02}", total / 3600, (total / 60) % 60, total % 60)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedRoute {
    pub line_id: String,
    pub edges: Vec<EdgeId>,
    pub gap_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedStop {
    pub stop_id: String,
    pub edge_id: EdgeId,
    /// Meters from the edge's from-node, in edge-length units.
    pub offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum StopMatch {
    Matched(MatchedStop),
    Unmatched { stop_id: String },
}

/// A matched line ready for emission and replay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedLine {
    pub line_id: String,
    pub route: MatchedRoute,
    pub stops: Vec<MatchedStop>,
    pub departures: Vec<f64>,
}

/// What happened to one densified point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    /// Before the first resolvable pair.
    Skipped,
    First,
    Stay,
    Advance,
    Gap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConferencePoint {
    pub index: usize,
    pub x: f64,
    pub y: f64,
    pub decision: Decision,
    /// Edge the point was attributed to; `None` for gaps and skipped points.
    pub edge: Option<EdgeId>,
}

/// Human-auditable record of every matching decision for one line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conference {
    pub line_id: String,
    pub points: Vec<ConferencePoint>,
    pub edges: Vec<EdgeId>,
    pub gap_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum NextEdge {
    Stay,
    Advance(EdgeId),
    Gap,
}

/// Picks the first edge from the first two positioning points.
///
/// Candidates of `p1` are tried nearest first. A candidate is accepted when
/// `p2` is closer to its to-node than `p1` (travel towards the edge's end),
/// or when `p1` is already past the edge's midpoint towards the to-node, `p2`
/// is farther from the to-node than `p1`, and `p2` lies beyond the to-node
/// (travel has continued onto another edge).
pub fn match_first_edge(
    net: &RoadNetwork,
    p1: CartPoint,
    p2: CartPoint,
    cfg: &MatcherConfig,
) -> Result<EdgeId, MatchError> {
    cfg.validate()?;
    if p1 == p2 {
        return Err(MatchError::CoincidentPoints);
    }
    let candidates = net.candidate_edges_with(p1, cfg.radius, cfg.geometry);
    if candidates.is_empty() {
        return Err(MatchError::NoCandidate {
            x: p1.x,
            y: p1.y,
            radius: cfg.radius,
        });
    }
    for cand in candidates {
        let (from, to) = net.chord(&cand.edge).expect("candidate edge exists");
        let d1_to = p1.distance(&to);
        let d2_to = p2.distance(&to);
        let approaching = d2_to < d1_to;
        let leaving = d1_to < p1.distance(&from) && d2_to > d1_to && beyond_end(p2, from, to);
        if approaching || leaving {
            return Ok(cand.edge);
        }
    }
    Err(MatchError::NoOrientedCandidate { x: p1.x, y: p1.y })
}

// True when the clamped projection of `p` onto `a -> b` lands on `b`.
fn beyond_end(p: CartPoint, a: CartPoint, b: CartPoint) -> bool {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    (p.x - a.x) * dx + (p.y - a.y) * dy >= dx * dx + dy * dy
}

/// Decides how point `p` continues the chain that currently ends in `prev`.
pub fn match_next_edge(
    net: &RoadNetwork,
    prev: &EdgeId,
    p: CartPoint,
    cfg: &MatcherConfig,
) -> Result<NextEdge, MatchError> {
    cfg.validate()?;
    let prev_edge = net.require_edge(prev)?;
    let candidates = net.candidate_edges_with(p, cfg.radius, cfg.geometry);
    if let Some(own) = candidates.iter().find(|c| &c.edge == prev) {
        let stay = match cfg.stay {
            StayPolicy::WithinRadius => true,
            StayPolicy::Nearest => own.distance <= candidates[0].distance,
        };
        if stay {
            return Ok(NextEdge::Stay);
        }
    }
    for cand in &candidates {
        if &cand.edge == prev {
            continue;
        }
        let edge = net.require_edge(&cand.edge)?;
        if edge.from == prev_edge.to && net.connection_allowed(prev, &cand.edge)? {
            return Ok(NextEdge::Advance(cand.edge.clone()));
        }
    }
    Ok(NextEdge::Gap)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RouteMatch {
    pub route: MatchedRoute,
    pub conference: Conference,
}

/// Projects, densifies and matches a line's itinerary.
pub fn match_route(
    net: &RoadNetwork,
    line: &LineSpec,
    projection: &Projection,
    cfg: &MatcherConfig,
) -> Result<RouteMatch, MatchError> {
    line.validate()?;
    cfg.validate()?;
    let planar = line
        .itinerary
        .iter()
        .map(|p| projection.to_cartesian(*p))
        .collect::<Result<Vec<_>, _>>()?;
    let points = geo::densify_passes(&planar, cfg.densify_passes)?;
    match_points(net, &line.line_id, &points, cfg)
}

/// Matches already projected points, without densification.
pub fn match_points(
    net: &RoadNetwork,
    line_id: &str,
    points: &[CartPoint],
    cfg: &MatcherConfig,
) -> Result<RouteMatch, MatchError> {
    let mut first = None;
    for i in 0..points.len().saturating_sub(1) {
        if points[i] == points[i + 1] {
            continue;
        }
        match match_first_edge(net, points[i], points[i + 1], cfg) {
            Ok(edge) => {
                first = Some((i, edge));
                break;
            }
            Err(MatchError::NoCandidate { .. }) | Err(MatchError::NoOrientedCandidate { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    let (start, first_edge) = first.ok_or_else(|| MatchError::UnmatchableRoute {
        line_id: line_id.to_string(),
    })?;

    let mut trail = Vec::with_capacity(points.len());
    for (index, p) in points.iter().enumerate().take(start) {
        trail.push(ConferencePoint {
            index,
            x: p.x,
            y: p.y,
            decision: Decision::Skipped,
            edge: None,
        });
    }
    trail.push(ConferencePoint {
        index: start,
        x: points[start].x,
        y: points[start].y,
        decision: Decision::First,
        edge: Some(first_edge.clone()),
    });

    let mut edges = vec![first_edge];
    let mut gap_count = start;
    let mut run = 0usize;
    for (index, &p) in points.iter().enumerate().skip(start + 1) {
        let current = edges.last().expect("chain is non-empty").clone();
        let (decision, edge) = match match_next_edge(net, &current, p, cfg)? {
            NextEdge::Stay => {
                run = 0;
                (Decision::Stay, Some(current))
            }
            NextEdge::Advance(next) => {
                run = 0;
                edges.push(next.clone());
                (Decision::Advance, Some(next))
            }
            NextEdge::Gap => {
                run += 1;
                gap_count += 1;
                if run > cfg.max_consecutive_gaps {
                    return Err(MatchError::BrokenRoute {
                        line_id: line_id.to_string(),
                        point: index,
                        gaps: run,
                    });
                }
                (Decision::Gap, None)
            }
        };
        trail.push(ConferencePoint {
            index,
            x: p.x,
            y: p.y,
            decision,
            edge,
        });
    }

    let route = MatchedRoute {
        line_id: line_id.to_string(),
        edges: edges.clone(),
        gap_count,
    };
    Ok(RouteMatch {
        conference: Conference {
            line_id: line_id.to_string(),
            points: trail,
            edges,
            gap_count,
        },
        route,
    })
}

/// Attaches stops to edges of a matched route.
///
/// A stop's candidates are intersected with the route's edges and the
/// nearest survivor wins. The offset is the stop's longitudinal position
/// along that edge, scaled to the edge's nominal length.
pub fn match_stops(
    net: &RoadNetwork,
    route: &MatchedRoute,
    stops: &[StopSpec],
    projection: &Projection,
    cfg: &MatcherConfig,
) -> Result<Vec<StopMatch>, MatchError> {
    cfg.validate()?;
    let on_route: HashSet<&EdgeId> = route.edges.iter().collect();
    let mut out = Vec::with_capacity(stops.len());
    for stop in stops {
        let p = projection.to_cartesian(stop.pos)?;
        let hit = net
            .candidate_edges_with(p, cfg.radius, cfg.geometry)
            .into_iter()
            .find(|c| on_route.contains(&c.edge));
        match hit {
            Some(c) => out.push(StopMatch::Matched(MatchedStop {
                stop_id: stop.id.clone(),
                offset: stop_offset(net, &c.edge, p, cfg.geometry)?,
                edge_id: c.edge,
            })),
            None => out.push(StopMatch::Unmatched {
                stop_id: stop.id.clone(),
            }),
        }
    }
    Ok(out)
}

fn stop_offset(
    net: &RoadNetwork,
    id: &EdgeId,
    p: CartPoint,
    geometry: MatchGeometry,
) -> Result<f64, MatchError> {
    let edge = net.require_edge(id)?;
    let (a, b) = net.chord(id).expect("edge exists");
    let (along, span) = match (geometry, &edge.shape) {
        (MatchGeometry::Polyline, Some(shape)) => (
            geo::project_onto_polyline(p, shape)?.offset,
            geo::polyline_length(shape),
        ),
        _ => (geo::project_onto_segment(p, a, b)?.offset, a.distance(&b)),
    };
    Ok((along * edge.length / span).clamp(0.0, edge.length))
}

/// Result of matching one line end to end.
#[derive(Debug, Clone, PartialEq)]
pub struct LineMatch {
    pub line: MatchedLine,
    pub conference: Conference,
    pub unmatched_stops: Vec<String>,
}

pub fn match_line(
    net: &RoadNetwork,
    spec: &LineSpec,
    projection: &Projection,
    cfg: &MatcherConfig,
) -> Result<LineMatch, MatchError> {
    let RouteMatch { route, conference } = match_route(net, spec, projection, cfg)?;
    let mut stops = Vec::new();
    let mut unmatched_stops = Vec::new();
    for m in match_stops(net, &route, &spec.stops, projection, cfg)? {
        match m {
            StopMatch::Matched(s) => stops.push(s),
            StopMatch::Unmatched { stop_id } => unmatched_stops.push(stop_id),
        }
    }
    Ok(LineMatch {
        line: MatchedLine {
            line_id: spec.line_id.clone(),
            route,
            stops,
            departures: spec.departures.clone(),
        },
        conference,
        unmatched_stops,
    })
}
