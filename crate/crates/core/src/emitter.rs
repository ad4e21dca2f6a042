//! Simulator configuration documents: routes with vehicles, and bus stops.
//!
//! Both documents are byte-deterministic: fixed two-decimal numbers, LF line
//! endings and a total order on every element list.

use std::collections::{BTreeMap, HashSet};

use roxmltree::Document;
use thiserror::Error;

use crate::network::{EdgeId, RoadNetwork};
use crate::xml::{escape_attr, fixed2, line_of};

pub use crate::matcher::MatchedLine;

/// Default half-length of a bus platform around the stop offset.
pub const DEFAULT_PLATFORM_HALF_LENGTH_M: f64 = 5.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EmitError {
    #[error("duplicate line id `{0}`")]
    DuplicateId(String),
    #[error("line `{line_id}`: {message}")]
    InvalidLine { line_id: String, message: String },
    #[error("parse error at line {line}: {message}")]
    Parse { line: u32, message: String },
    #[error("integrity error at line {line}: {message}")]
    Integrity { line: u32, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmitConfig {
    pub platform_half_length: f64,
    /// Dwell written on each route stop; `None` omits stop elements.
    pub stop_duration: Option<f64>,
}

impl Default for EmitConfig {
    fn default() -> Self {
        Self {
            platform_half_length: DEFAULT_PLATFORM_HALF_LENGTH_M,
            stop_duration: None,
        }
    }
}

/// Route and departures recovered from a route document.
#[derive(Debug, Clone, PartialEq)]
pub struct RouteSkeleton {
    pub line_id: String,
    pub edges: Vec<EdgeId>,
    pub departures: Vec<f64>,
}

pub fn vehicle_id(line_id: &str, k: usize) -> String {
    format!("{line_id}.{k}")
}

pub fn bus_stop_id(line_id: &str, stop_id: &str) -> String {
    format!("{line_id}.{stop_id}")
}

fn check_lines(lines: &[MatchedLine]) -> Result<(), EmitError> {
    let mut seen = HashSet::new();
    for line in lines {
        if !seen.insert(line.line_id.as_str()) {
            return Err(EmitError::DuplicateId(line.line_id.clone()));
        }
        let invalid = |message: &str| EmitError::InvalidLine {
            line_id: line.line_id.clone(),
            message: message.to_string(),
        };
        if line.route.edges.is_empty() {
            return Err(invalid("empty route"));
        }
        if line.departures.iter().any(|d| !d.is_finite())
            || line.departures.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(invalid("departures are not strictly increasing"));
        }
    }
    Ok(())
}

/// Route document: one `route` per line, then every vehicle sorted by
/// (depart, id).
pub fn emit_routes(lines: &[MatchedLine]) -> Result<String, EmitError> {
    emit_routes_with(lines, &EmitConfig::default())
}

pub fn emit_routes_with(lines: &[MatchedLine], cfg: &EmitConfig) -> Result<String, EmitError> {
    check_lines(lines)?;
    let mut sorted: Vec<&MatchedLine> = lines.iter().collect();
    sorted.sort_by(|a, b| a.line_id.cmp(&b.line_id));

    let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<routes>\n");
    for line in &sorted {
        let edges: Vec<&str> = line.route.edges.iter().map(|e| e.0.as_str()).collect();
        let head = format!(
            "    <route id=\"{}\" edges=\"{}\"",
            escape_attr(&line.line_id),
            escape_attr(&edges.join(" "))
        );
        match cfg.stop_duration {
            Some(duration) if !line.stops.is_empty() => {
                out.push_str(&head);
                out.push_str(">\n");
                for stop in &line.stops {
                    out.push_str(&format!(
                        "        <stop busStop=\"{}\" duration=\"{}\"/>\n",
                        escape_attr(&bus_stop_id(&line.line_id, &stop.stop_id)),
                        fixed2(duration)
                    ));
                }
                out.push_str("    </route>\n");
            }
            _ => {
                out.push_str(&head);
                out.push_str("/>\n");
            }
        }
    }

    let mut vehicles: Vec<(f64, String, &str)> = Vec::new();
    for line in &sorted {
        for (k, &depart) in line.departures.iter().enumerate() {
            vehicles.push((depart, vehicle_id(&line.line_id, k), &line.line_id));
        }
    }
    vehicles.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
    for (depart, id, route) in vehicles {
        out.push_str(&format!(
            "    <vehicle id=\"{}\" route=\"{}\" depart=\"{}\"/>\n",
            escape_attr(&id),
            escape_attr(route),
            fixed2(depart)
        ));
    }
    out.push_str("</routes>\n");
    Ok(out)
}

/// Additional document with one `busStop` per matched stop. The platform
/// spans the stop offset plus or minus the half-length, clamped to the edge.
pub fn emit_stops(net: &RoadNetwork, lines: &[MatchedLine]) -> Result<String, EmitError> {
    emit_stops_with(net, lines, &EmitConfig::default())
}

pub fn emit_stops_with(
    net: &RoadNetwork,
    lines: &[MatchedLine],
    cfg: &EmitConfig,
) -> Result<String, EmitError> {
    check_lines(lines)?;
    let mut sorted: Vec<&MatchedLine> = lines.iter().collect();
    sorted.sort_by(|a, b| a.line_id.cmp(&b.line_id));

    let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<additional>\n");
    for line in sorted {
        for stop in &line.stops {
            let edge = net.edge(&stop.edge_id).ok_or_else(|| EmitError::InvalidLine {
                line_id: line.line_id.clone(),
                message: format!("stop `{}` is on unknown edge `{}`", stop.stop_id, stop.edge_id),
            })?;
            let (start, end) = platform(stop.offset, edge.length, cfg.platform_half_length);
            out.push_str(&format!(
                "    <busStop id=\"{}\" lane=\"{}_0\" startPos=\"{}\" endPos=\"{}\"/>\n",
                escape_attr(&bus_stop_id(&line.line_id, &stop.stop_id)),
                escape_attr(&stop.edge_id.0),
                fixed2(start),
                fixed2(end)
            ));
        }
    }
    out.push_str("</additional>\n");
    Ok(out)
}

/// Platform extent `(startPos, endPos)` for a stop at `offset`.
pub fn platform(offset: f64, edge_length: f64, half_length: f64) -> (f64, f64) {
    let offset = offset.clamp(0.0, edge_length);
    (
        (offset - half_length).max(0.0),
        (offset + half_length).min(edge_length),
    )
}

/// Reads a route document back into per-line skeletons, sorted by line id.
/// Departures of each line are sorted ascending.
pub fn parse_routes(document: &str) -> Result<Vec<RouteSkeleton>, EmitError> {
    let doc = Document::parse(document).map_err(|e| EmitError::Parse {
        line: e.pos().row,
        message: e.to_string(),
    })?;
    let root = doc.root_element();
    if root.tag_name().name() != "routes" {
        return Err(EmitError::Parse {
            line: line_of(&doc, &root),
            message: format!("expected root element <routes>, found <{}>", root.tag_name().name()),
        });
    }

    let mut routes: BTreeMap<String, RouteSkeleton> = BTreeMap::new();
    for el in root.children().filter(|c| c.has_tag_name("route")) {
        let line = line_of(&doc, &el);
        let attr = |name: &str| {
            el.attribute(name).ok_or_else(|| EmitError::Parse {
                line,
                message: format!("route is missing `{name}`"),
            })
        };
        let id = attr("id")?.to_string();
        let edges: Vec<EdgeId> = attr("edges")?
            .split_whitespace()
            .map(|e| EdgeId(e.to_string()))
            .collect();
        if edges.is_empty() {
            return Err(EmitError::Parse {
                line,
                message: format!("route `{id}` has no edges"),
            });
        }
        if routes.contains_key(&id) {
            return Err(EmitError::Integrity {
                line,
                message: format!("duplicate route id `{id}`"),
            });
        }
        routes.insert(
            id.clone(),
            RouteSkeleton {
                line_id: id,
                edges,
                departures: Vec::new(),
            },
        );
    }

    for el in root.children().filter(|c| c.has_tag_name("vehicle")) {
        let line = line_of(&doc, &el);
        let route = el.attribute("route").ok_or_else(|| EmitError::Parse {
            line,
            message: "vehicle is missing `route`".into(),
        })?;
        let depart_text = el.attribute("depart").ok_or_else(|| EmitError::Parse {
            line,
            message: "vehicle is missing `depart`".into(),
        })?;
        let depart: f64 = depart_text
            .trim()
            .parse()
            .ok()
            .filter(|d: &f64| d.is_finite())
            .ok_or_else(|| EmitError::Parse {
                line,
                message: format!("depart `{depart_text}` is not a number"),
            })?;
        let skeleton = routes.get_mut(route).ok_or_else(|| EmitError::Integrity {
            line,
            message: format!("vehicle references undefined route `{route}`"),
        })?;
        skeleton.departures.push(depart);
    }

    Ok(routes
        .into_values()
        .map(|mut s| {
            s.departures.sort_by(f64::total_cmp);
            s
        })
        .collect())
}
