//! Road-network graph, its XML document format, and candidate-edge queries.
//!
//! A network is a set of junctions (nodes), directed edges between them and
//! connection records that permit traffic to continue from one edge onto a
//! specific successor. The network is immutable once built; candidate queries
//! go through a uniform grid whose result is identical to a linear scan.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;

use roxmltree::{Document, Node as XmlNode};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{self, CartPoint, GeoPoint, Projection};
use crate::xml::{escape_attr, line_of};

/// Default candidate search radius in meters.
pub const DEFAULT_RADIUS_M: f64 = 15.0;

/// Maximum gap between a shape's end points and its edge's nodes.
pub const SHAPE_ENDPOINT_TOLERANCE_M: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetworkError {
    #[error("parse error at line {line}: {message}")]
    Parse { line: u32, message: String },
    #[error("integrity error{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Integrity { line: Option<u32>, message: String },
    #[error("network has no edges")]
    Empty,
    #[error("unknown edge `{0}`")]
    UnknownEdge(EdgeId),
    #[error("network has no geographic reference; supply a projection origin")]
    NoGeoReference,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub String);

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EdgeId(pub String);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for EdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for EdgeId {
    fn from(s: &str) -> Self {
        EdgeId(s.to_string())
    }
}

impl From<&str> for NodeId {
    fn from(s: &str) -> Self {
        NodeId(s.to_string())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: NodeId,
    pub pos: CartPoint,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub id: EdgeId,
    pub from: NodeId,
    pub to: NodeId,
    /// Meters.
    pub length: f64,
    /// Meters per second; the fastest lane when the source has several.
    pub speed_limit: f64,
    pub shape: Option<Vec<CartPoint>>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Connection {
    pub from_edge: EdgeId,
    pub to_edge: EdgeId,
}

/// Which edge geometry distances are measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchGeometry {
    /// The straight line between the from and to nodes.
    #[default]
    Chord,
    /// The lane shape when present, otherwise the chord.
    Polyline,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateEdge {
    pub edge: EdgeId,
    pub distance: f64,
}

#[derive(Debug, Clone)]
pub struct RoadNetwork {
    nodes: BTreeMap<NodeId, Node>,
    /// Sorted by id.
    edges: Vec<Edge>,
    edge_index: HashMap<EdgeId, usize>,
    chords: Vec<(CartPoint, CartPoint)>,
    connections: HashSet<(usize, usize)>,
    location: Option<GeoPoint>,
    bounds: (CartPoint, CartPoint),
    grid: EdgeGrid,
}

/// Source line of a parsed element, carried into integrity errors.
type Located<T> = (T, Option<u32>);

impl RoadNetwork {
    /// Builds a network, checking referential integrity and geometry.
    pub fn new(
        nodes: Vec<Node>,
        edges: Vec<Edge>,
        connections: Vec<Connection>,
        location: Option<GeoPoint>,
    ) -> Result<Self, NetworkError> {
        Self::assemble(
            nodes.into_iter().map(|n| (n, None)).collect(),
            edges.into_iter().map(|e| (e, None)).collect(),
            connections.into_iter().map(|c| (c, None)).collect(),
            location,
        )
    }

    fn assemble(
        nodes: Vec<Located<Node>>,
        edges: Vec<Located<Edge>>,
        connections: Vec<Located<Connection>>,
        location: Option<GeoPoint>,
    ) -> Result<Self, NetworkError> {
        let integrity = |line: Option<u32>, message: String| NetworkError::Integrity { line, message };

        if let Some(loc) = location {
            loc.validate()
                .map_err(|e| integrity(None, format!("location: {e}")))?;
        }

        let mut node_map = BTreeMap::new();
        for (node, line) in nodes {
            if !node.pos.is_finite() {
                return Err(integrity(line, format!("junction `{}` has a non-finite position", node.id)));
            }
            if node_map.contains_key(&node.id) {
                return Err(integrity(line, format!("duplicate junction id `{}`", node.id)));
            }
            node_map.insert(node.id.clone(), node);
        }

        if edges.is_empty() {
            return Err(NetworkError::Empty);
        }

        let mut sorted: Vec<Located<Edge>> = edges;
        sorted.sort_by(|a, b| a.0.id.cmp(&b.0.id));
        for pair in sorted.windows(2) {
            if pair[0].0.id == pair[1].0.id {
                return Err(integrity(pair[1].1, format!("duplicate edge id `{}`", pair[1].0.id)));
            }
        }

        let mut chords = Vec::with_capacity(sorted.len());
        for (edge, line) in &sorted {
            let from = node_map.get(&edge.from).ok_or_else(|| {
                integrity(*line, format!("edge `{}` references unknown junction `{}`", edge.id, edge.from))
            })?;
            let to = node_map.get(&edge.to).ok_or_else(|| {
                integrity(*line, format!("edge `{}` references unknown junction `{}`", edge.id, edge.to))
            })?;
            if edge.from == edge.to {
                return Err(integrity(*line, format!("edge `{}` starts and ends at `{}`", edge.id, edge.from)));
            }
            if from.pos == to.pos {
                return Err(integrity(*line, format!("edge `{}` has coincident end junctions", edge.id)));
            }
            if !(edge.length.is_finite() && edge.length > 0.0) {
                return Err(integrity(*line, format!("edge `{}` has invalid length {}", edge.id, edge.length)));
            }
            if !(edge.speed_limit.is_finite() && edge.speed_limit > 0.0) {
                return Err(integrity(*line, format!("edge `{}` has invalid speed {}", edge.id, edge.speed_limit)));
            }
            if let Some(shape) = &edge.shape {
                if shape.len() < 2 || shape.iter().any(|p| !p.is_finite()) {
                    return Err(integrity(*line, format!("edge `{}` has an invalid shape", edge.id)));
                }
                let head = shape[0].distance(&from.pos);
                let tail = shape[shape.len() - 1].distance(&to.pos);
                if head > SHAPE_ENDPOINT_TOLERANCE_M || tail > SHAPE_ENDPOINT_TOLERANCE_M {
                    return Err(integrity(
                        *line,
                        format!("edge `{}` shape does not start and end at its junctions", edge.id),
                    ));
                }
            }
            chords.push((from.pos, to.pos));
        }

        let edges: Vec<Edge> = sorted.into_iter().map(|(e, _)| e).collect();
        let edge_index: HashMap<EdgeId, usize> =
            edges.iter().enumerate().map(|(i, e)| (e.id.clone(), i)).collect();

        let mut conn_set = HashSet::new();
        for (conn, line) in connections {
            let from = *edge_index.get(&conn.from_edge).ok_or_else(|| {
                integrity(line, format!("connection references unknown edge `{}`", conn.from_edge))
            })?;
            let to = *edge_index.get(&conn.to_edge).ok_or_else(|| {
                integrity(line, format!("connection references unknown edge `{}`", conn.to_edge))
            })?;
            if edges[from].to != edges[to].from {
                return Err(integrity(
                    line,
                    format!(
                        "connection `{}` -> `{}` joins edges that do not share a junction",
                        conn.from_edge, conn.to_edge
                    ),
                ));
            }
            conn_set.insert((from, to));
        }

        let mut min = CartPoint::new(f64::INFINITY, f64::INFINITY);
        let mut max = CartPoint::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for n in node_map.values() {
            min = CartPoint::new(min.x.min(n.pos.x), min.y.min(n.pos.y));
            max = CartPoint::new(max.x.max(n.pos.x), max.y.max(n.pos.y));
        }

        let mut net = Self {
            nodes: node_map,
            edges,
            edge_index,
            chords,
            connections: conn_set,
            location,
            bounds: (min, max),
            grid: EdgeGrid::default(),
        };
        net.grid = EdgeGrid::build(&net, 2.0 * DEFAULT_RADIUS_M);
        Ok(net)
    }

    /// Rebuilds the candidate index with a different cell size.
    pub fn with_index_cell(mut self, cell_size: f64) -> Self {
        assert!(cell_size > 0.0 && cell_size.is_finite(), "cell size must be positive");
        self.grid = EdgeGrid::build(&self, cell_size);
        self
    }

    pub fn index_cell_size(&self) -> f64 {
        self.grid.cell
    }

    pub fn nodes(&self) -> impl Iterator<Item = &Node> {
        self.nodes.values()
    }

    pub fn node(&self, id: &NodeId) -> Option<&Node> {
        self.nodes.get(id)
    }

    /// Edges in id order.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, id: &EdgeId) -> Option<&Edge> {
        self.edge_index.get(id).map(|&i| &self.edges[i])
    }

    pub fn require_edge(&self, id: &EdgeId) -> Result<&Edge, NetworkError> {
        self.edge(id).ok_or_else(|| NetworkError::UnknownEdge(id.clone()))
    }

    /// From and to junction positions of an edge.
    pub fn chord(&self, id: &EdgeId) -> Option<(CartPoint, CartPoint)> {
        self.edge_index.get(id).map(|&i| self.chords[i])
    }

    /// Connection records sorted by (from, to).
    pub fn connections(&self) -> Vec<Connection> {
        let mut out: Vec<Connection> = self
            .connections
            .iter()
            .map(|&(f, t)| Connection {
                from_edge: self.edges[f].id.clone(),
                to_edge: self.edges[t].id.clone(),
            })
            .collect();
        out.sort();
        out
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn connection_count(&self) -> usize {
        self.connections.len()
    }

    /// Geographic position of the planar origin, when the document gave one.
    pub fn location(&self) -> Option<GeoPoint> {
        self.location
    }

    pub fn projection(&self) -> Result<Projection, NetworkError> {
        let loc = self.location.ok_or(NetworkError::NoGeoReference)?;
        Projection::new(loc).map_err(|e| NetworkError::Integrity {
            line: None,
            message: format!("location: {e}"),
        })
    }

    /// Planar bounding box of all junctions.
    pub fn bounds(&self) -> (CartPoint, CartPoint) {
        self.bounds
    }

    /// Geographic bounding box, available when the network has a location.
    pub fn geo_bounds(&self) -> Option<(GeoPoint, GeoPoint)> {
        let proj = self.projection().ok()?;
        let lo = proj.to_geographic(self.bounds.0).ok()?;
        let hi = proj.to_geographic(self.bounds.1).ok()?;
        Some((lo, hi))
    }

    pub fn connection_allowed(&self, from: &EdgeId, to: &EdgeId) -> Result<bool, NetworkError> {
        let f = *self
            .edge_index
            .get(from)
            .ok_or_else(|| NetworkError::UnknownEdge(from.clone()))?;
        let t = *self
            .edge_index
            .get(to)
            .ok_or_else(|| NetworkError::UnknownEdge(to.clone()))?;
        Ok(self.connections.contains(&(f, t)))
    }

    /// True when `to` starts at the junction where `from` ends.
    pub fn physically_adjacent(&self, from: &EdgeId, to: &EdgeId) -> Result<bool, NetworkError> {
        Ok(self.require_edge(from)?.to == self.require_edge(to)?.from)
    }

    /// Distance from `p` to an edge under the given geometry.
    pub fn edge_distance(
        &self,
        id: &EdgeId,
        p: CartPoint,
        geometry: MatchGeometry,
    ) -> Result<f64, NetworkError> {
        let i = *self
            .edge_index
            .get(id)
            .ok_or_else(|| NetworkError::UnknownEdge(id.clone()))?;
        Ok(self.distance_by_index(i, p, geometry))
    }

    fn distance_by_index(&self, i: usize, p: CartPoint, geometry: MatchGeometry) -> f64 {
        let (a, b) = self.chords[i];
        match (geometry, &self.edges[i].shape) {
            (MatchGeometry::Polyline, Some(shape)) => geo::project_onto_polyline(p, shape)
                .map(|proj| proj.distance)
                .unwrap_or_else(|_| chord_distance(p, a, b)),
            _ => chord_distance(p, a, b),
        }
    }

    /// Edges whose chord lies within `radius` of `p`, nearest first.
    pub fn candidate_edges(&self, p: CartPoint, radius: f64) -> Vec<CandidateEdge> {
        self.candidate_edges_with(p, radius, MatchGeometry::Chord)
    }

    /// Like [`candidate_edges`](Self::candidate_edges) with a selectable geometry.
    /// Ties in distance are broken by edge id.
    pub fn candidate_edges_with(
        &self,
        p: CartPoint,
        radius: f64,
        geometry: MatchGeometry,
    ) -> Vec<CandidateEdge> {
        if !(radius > 0.0) || !p.is_finite() {
            return Vec::new();
        }
        let mut found: Vec<(f64, usize)> = self
            .grid
            .query(p, radius, self.edges.len())
            .into_iter()
            .filter_map(|i| {
                let d = self.distance_by_index(i, p, geometry);
                (d <= radius).then_some((d, i))
            })
            .collect();
        // Edge indices follow id order, so index order is the id tie-break.
        found.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        found
            .into_iter()
            .map(|(distance, i)| CandidateEdge {
                edge: self.edges[i].id.clone(),
                distance,
            })
            .collect()
    }
}

fn chord_distance(p: CartPoint, a: CartPoint, b: CartPoint) -> f64 {
    // Chords are non-degenerate by construction.
    geo::point_segment_distance(p, a, b).expect("edge chord is non-degenerate")
}

/// Uniform grid over edge geometry. Each edge is registered in every cell its
/// chord or shape passes through, so a query only has to inspect the cells
/// overlapping the query disc's bounding square.
#[derive(Debug, Clone, Default)]
struct EdgeGrid {
    cell: f64,
    cells: HashMap<(i64, i64), Vec<usize>>,
}

impl EdgeGrid {
    fn build(net: &RoadNetwork, cell: f64) -> Self {
        let mut grid = EdgeGrid {
            cell,
            cells: HashMap::new(),
        };
        for (i, &(a, b)) in net.chords.iter().enumerate() {
            let mut keys = BTreeSet::new();
            grid.cover_segment(a, b, &mut keys);
            if let Some(shape) = &net.edges[i].shape {
                for w in shape.windows(2) {
                    grid.cover_segment(w[0], w[1], &mut keys);
                }
            }
            for key in keys {
                grid.cells.entry(key).or_default().push(i);
            }
        }
        grid
    }

    fn key(&self, x: f64, y: f64) -> (i64, i64) {
        ((x / self.cell).floor() as i64, (y / self.cell).floor() as i64)
    }

    // Splits the segment into pieces no longer than one cell and adds every
    // cell touched by each piece's bounding box.
    fn cover_segment(&self, a: CartPoint, b: CartPoint, keys: &mut BTreeSet<(i64, i64)>) {
        let pieces = (a.distance(&b) / self.cell).ceil().max(1.0) as usize;
        for k in 0..pieces {
            let p = a.lerp(&b, k as f64 / pieces as f64);
            let q = a.lerp(&b, (k + 1) as f64 / pieces as f64);
            let (x0, y0) = self.key(p.x.min(q.x), p.y.min(q.y));
            let (x1, y1) = self.key(p.x.max(q.x), p.y.max(q.y));
            for cx in x0..=x1 {
                for cy in y0..=y1 {
                    keys.insert((cx, cy));
                }
            }
        }
    }

    fn query(&self, p: CartPoint, radius: f64, edge_count: usize) -> Vec<usize> {
        let (x0, y0) = self.key(p.x - radius, p.y - radius);
        let (x1, y1) = self.key(p.x + radius, p.y + radius);
        let span = (x1 - x0 + 1) as u128 * (y1 - y0 + 1) as u128;
        if span > edge_count as u128 {
            // Larger than a full scan.
            return (0..edge_count).collect();
        }
        let mut out = Vec::new();
        for cx in x0..=x1 {
            for cy in y0..=y1 {
                if let Some(ids) = self.cells.get(&(cx, cy)) {
                    out.extend_from_slice(ids);
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }
}

// ---------------------------------------------------------------------------
// Document format

/// Parses a network document.
///
/// Recognised elements are `junction`, `edge` (with optional `lane`
/// children), `connection` and `location`; anything else is ignored. Edges
/// flagged `function="internal"` and junctions of type `internal` are skipped
/// along with connections touching them.
pub fn parse_network(document: &str) -> Result<RoadNetwork, NetworkError> {
    let doc = Document::parse(document).map_err(|e| NetworkError::Parse {
        line: e.pos().row,
        message: e.to_string(),
    })?;
    let root = doc.root_element();
    if root.tag_name().name() != "net" {
        return Err(NetworkError::Parse {
            line: line_of(&doc, &root),
            message: format!("expected root element <net>, found <{}>", root.tag_name().name()),
        });
    }

    let mut nodes = Vec::new();
    let mut edges = Vec::new();
    let mut connections = Vec::new();
    let mut location = None;
    let mut internal_edges = HashSet::new();

    for el in root.children().filter(|c| c.is_element()) {
        let line = line_of(&doc, &el);
        match el.tag_name().name() {
            "location" => {
                let lat = opt_f64(&el, "origLat", line)?;
                let lon = opt_f64(&el, "origLon", line)?;
                if let (Some(lat), Some(lon)) = (lat, lon) {
                    location = Some(GeoPoint::new(lat, lon).map_err(|e| NetworkError::Parse {
                        line,
                        message: e.to_string(),
                    })?);
                }
            }
            "junction" => {
                if el.attribute("type") == Some("internal") {
                    continue;
                }
                nodes.push((
                    Node {
                        id: NodeId(req_str(&el, "id", line)?.to_string()),
                        pos: CartPoint::new(req_f64(&el, "x", line)?, req_f64(&el, "y", line)?),
                    },
                    Some(line),
                ));
            }
            "edge" => {
                let id = req_str(&el, "id", line)?;
                if el.attribute("function") == Some("internal") {
                    internal_edges.insert(id.to_string());
                    continue;
                }
                edges.push((parse_edge(&doc, &el, id, line)?, Some(line)));
            }
            "connection" => {
                let from = req_str(&el, "from", line)?;
                let to = req_str(&el, "to", line)?;
                if internal_edges.contains(from) || internal_edges.contains(to) {
                    continue;
                }
                connections.push((
                    Connection {
                        from_edge: EdgeId(from.to_string()),
                        to_edge: EdgeId(to.to_string()),
                    },
                    Some(line),
                ));
            }
            _ => {}
        }
    }

    // Connections may precede the internal edges they reference.
    connections.retain(|(c, _)| {
        !internal_edges.contains(&c.from_edge.0) && !internal_edges.contains(&c.to_edge.0)
    });

    RoadNetwork::assemble(nodes, edges, connections, location)
}

fn parse_edge(doc: &Document, el: &XmlNode, id: &str, line: u32) -> Result<Edge, NetworkError> {
    let from = req_str(el, "from", line)?;
    let to = req_str(el, "to", line)?;
    let lanes: Vec<XmlNode> = el.children().filter(|c| c.has_tag_name("lane")).collect();

    let mut lane_speed: Option<f64> = None;
    let mut lane_length: Option<f64> = None;
    for lane in &lanes {
        let ll = line_of(doc, lane);
        if let Some(s) = opt_f64(lane, "speed", ll)? {
            lane_speed = Some(lane_speed.map_or(s, |m: f64| m.max(s)));
        }
        if lane_length.is_none() {
            lane_length = opt_f64(lane, "length", ll)?;
        }
    }

    let shape = el
        .attribute("shape")
        .map(|s| parse_shape(s, line))
        .transpose()?;
    let speed = opt_f64(el, "speed", line)?
        .or(lane_speed)
        .ok_or_else(|| missing("speed", line))?;
    let length = match opt_f64(el, "length", line)?.or(lane_length) {
        Some(l) => l,
        None => match &shape {
            Some(s) => geo::polyline_length(s),
            None => return Err(missing("length", line)),
        },
    };

    Ok(Edge {
        id: EdgeId(id.to_string()),
        from: NodeId(from.to_string()),
        to: NodeId(to.to_string()),
        length,
        speed_limit: speed,
        shape,
    })
}

fn parse_shape(text: &str, line: u32) -> Result<Vec<CartPoint>, NetworkError> {
    text.split_whitespace()
        .map(|pair| {
            let mut it = pair.split(',');
            let x = it.next().and_then(|v| v.parse::<f64>().ok());
            let y = it.next().and_then(|v| v.parse::<f64>().ok());
            match (x, y) {
                (Some(x), Some(y)) => Ok(CartPoint::new(x, y)),
                _ => Err(NetworkError::Parse {
                    line,
                    message: format!("malformed shape point `{pair}`"),
                }),
            }
        })
        .collect()
}

fn missing(attr: &str, line: u32) -> NetworkError {
    NetworkError::Parse {
        line,
        message: format!("missing attribute `{attr}`"),
    }
}

fn req_str<'a>(el: &'a XmlNode, attr: &str, line: u32) -> Result<&'a str, NetworkError> {
    el.attribute(attr).ok_or_else(|| missing(attr, line))
}

fn req_f64(el: &XmlNode, attr: &str, line: u32) -> Result<f64, NetworkError> {
    opt_f64(el, attr, line)?.ok_or_else(|| missing(attr, line))
}

fn opt_f64(el: &XmlNode, attr: &str, line: u32) -> Result<Option<f64>, NetworkError> {
    el.attribute(attr)
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| NetworkError::Parse {
                    line,
                    message: format!("attribute `{attr}` is not a number: `{v}`"),
                })
        })
        .transpose()
}

/// Serialises a network in the format read by [`parse_network`]. Numbers use
/// the shortest representation that parses back to the same value.
pub fn write_network(net: &RoadNetwork) -> String {
    let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<net>\n");
    if let Some(loc) = net.location {
        out.push_str(&format!(
            "    <location origLat=\"{}\" origLon=\"{}\"/>\n",
            loc.lat, loc.lon
        ));
    }
    for n in net.nodes.values() {
        out.push_str(&format!(
            "    <junction id=\"{}\" x=\"{}\" y=\"{}\"/>\n",
            escape_attr(&n.id.0),
            n.pos.x,
            n.pos.y
        ));
    }
    for e in &net.edges {
        out.push_str(&format!(
            "    <edge id=\"{}\" from=\"{}\" to=\"{}\" speed=\"{}\" length=\"{}\"",
            escape_attr(&e.id.0),
            escape_attr(&e.from.0),
            escape_attr(&e.to.0),
            e.speed_limit,
            e.length
        ));
        if let Some(shape) = &e.shape {
            let pts: Vec<String> = shape.iter().map(|p| format!("{},{}", p.x, p.y)).collect();
            out.push_str(&format!(" shape=\"{}\"", pts.join(" ")));
        }
        out.push_str("/>\n");
    }
    for c in net.connections() {
        out.push_str(&format!(
            "    <connection from=\"{}\" to=\"{}\"/>\n",
            escape_attr(&c.from_edge.0),
            escape_attr(&c.to_edge.0)
        ));
    }
    out.push_str("</net>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const MINIMAL: &str = r#"<net>
    <junction id="a" x="0" y="0"/>
    <junction id="b" x="100" y="0"/>
    <edge id="ab" from="a" to="b" speed="13.9" length="100"/>
</net>"#;

    const RING: &str = r#"<?xml version="1.0"?>
<net>
    <location origLat="10.0" origLon="20.0"/>
    <junction id="n0" x="0" y="0"/>
    <junction id="n1" x="100" y="0"/>
    <junction id="n2" x="100" y="100"/>
    <junction id="n3" x="0" y="100"/>
    <edge id="e0" from="n0" to="n1" speed="10" length="100"/>
    <edge id="e1" from="n1" to="n2" speed="10" length="100"/>
    <edge id="e2" from="n2" to="n3" speed="10" length="100"/>
    <edge id="e3" from="n3" to="n0" speed="10" length="100"/>
    <connection from="e0" to="e1"/>
    <connection from="e1" to="e2"/>
    <connection from="e2" to="e3"/>
    <connection from="e3" to="e0"/>
</net>"#;

    fn id(s: &str) -> EdgeId {
        EdgeId::from(s)
    }

    fn node(id: &str, x: f64, y: f64) -> Node {
        Node {
            id: NodeId::from(id),
            pos: CartPoint::new(x, y),
        }
    }

    fn edge(id: &str, from: &str, to: &str, length: f64) -> Edge {
        Edge {
            id: EdgeId::from(id),
            from: NodeId::from(from),
            to: NodeId::from(to),
            length,
            speed_limit: 10.0,
            shape: None,
        }
    }

    #[test]
    fn parses_minimal_document() {
        let net = parse_network(MINIMAL).unwrap();
        assert_eq!((net.node_count(), net.edge_count(), net.connection_count()), (2, 1, 0));
        assert_eq!(net.edge(&id("ab")).unwrap().speed_limit, 13.9);
        assert!(net.location().is_none());
    }

    #[test]
    fn parses_ring_and_checks_connections() {
        let net = parse_network(RING).unwrap();
        assert_eq!((net.node_count(), net.edge_count(), net.connection_count()), (4, 4, 4));
        for c in net.connections() {
            let from = net.edge(&c.from_edge).unwrap();
            let to = net.edge(&c.to_edge).unwrap();
            assert_eq!(from.to, to.from);
        }
        assert_eq!(net.location(), Some(GeoPoint { lat: 10.0, lon: 20.0 }));
        let (lo, hi) = net.geo_bounds().unwrap();
        assert!(lo.lat < hi.lat && lo.lon < hi.lon);
    }

    #[test]
    fn dangling_connection_is_integrity_error() {
        let doc = MINIMAL.replace("</net>", "    <connection from=\"ab\" to=\"zz\"/>\n</net>");
        match parse_network(&doc) {
            Err(NetworkError::Integrity { line: Some(5), .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn dangling_junction_is_integrity_error() {
        let doc = MINIMAL.replace("to=\"b\"", "to=\"q\"");
        assert!(matches!(
            parse_network(&doc),
            Err(NetworkError::Integrity { line: Some(4), .. })
        ));
    }

    #[test]
    fn malformed_markup_reports_line() {
        let doc = "<net>\n<junction id=\"a\" x=\"0\" y=\"0\">\n</net>";
        match parse_network(doc) {
            Err(NetworkError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let doc = "<net>\n<junction id=\"a\" x=\"zero\" y=\"0\"/>\n</net>";
        assert!(matches!(parse_network(doc), Err(NetworkError::Parse { line: 2, .. })));
    }

    #[test]
    fn empty_network_is_rejected() {
        assert_eq!(
            parse_network("<net><junction id=\"a\" x=\"0\" y=\"0\"/></net>").unwrap_err(),
            NetworkError::Empty
        );
    }

    #[test]
    fn ignores_unknown_content_and_internal_edges() {
        let doc = r#"<net version="1.9">
    <type id="t" speed="5"/>
    <junction id="a" x="0" y="0" type="priority" incLanes=""/>
    <junction id="b" x="100" y="0"/>
    <junction id=":b_0" x="100" y="1" type="internal"/>
    <edge id=":b_0" function="internal"><lane id=":b_0_0" speed="5" length="3"/></edge>
    <edge id="ab" from="a" to="b" priority="1">
        <lane id="ab_0" index="0" speed="8.0" length="99.5"/>
        <lane id="ab_1" index="1" speed="11.0" length="99.5"/>
    </edge>
    <connection from=":b_0" to="ab"/>
    <tlLogic id="x"/>
</net>"#;
        let net = parse_network(doc).unwrap();
        let ab = net.edge(&id("ab")).unwrap();
        assert_eq!(ab.speed_limit, 11.0);
        assert_eq!(ab.length, 99.5);
        assert_eq!(net.connection_count(), 0);
        assert_eq!(net.node_count(), 2);
    }

    #[test]
    fn shape_must_touch_junctions() {
        let ok = MINIMAL.replace("length=\"100\"", "length=\"100\" shape=\"0,0.3 50,5 100,0\"");
        assert!(parse_network(&ok).unwrap().edge(&id("ab")).unwrap().shape.is_some());
        let bad = MINIMAL.replace("length=\"100\"", "length=\"100\" shape=\"0,2 100,0\"");
        assert!(matches!(parse_network(&bad), Err(NetworkError::Integrity { .. })));
    }

    #[test]
    fn connection_requires_shared_junction() {
        let nodes = vec![node("a", 0.0, 0.0), node("b", 10.0, 0.0), node("c", 20.0, 0.0)];
        let edges = vec![edge("ab", "a", "b", 10.0), edge("cb", "c", "b", 10.0)];
        let conns = vec![Connection {
            from_edge: id("ab"),
            to_edge: id("cb"),
        }];
        assert!(matches!(
            RoadNetwork::new(nodes, edges, conns, None),
            Err(NetworkError::Integrity { .. })
        ));
    }

    #[test]
    fn connection_allowed_examples() {
        let nodes = vec![node("a", 0.0, 0.0), node("b", 10.0, 0.0), node("c", 20.0, 0.0)];
        let edges = vec![
            edge("ab", "a", "b", 10.0),
            edge("bc", "b", "c", 10.0),
            edge("ba", "b", "a", 10.0),
        ];
        let conns = vec![Connection {
            from_edge: id("ab"),
            to_edge: id("bc"),
        }];
        let net = RoadNetwork::new(nodes, edges, conns, None).unwrap();
        assert!(net.connection_allowed(&id("ab"), &id("bc")).unwrap());
        // Physically adjacent but not registered.
        assert!(net.physically_adjacent(&id("ab"), &id("ba")).unwrap());
        assert!(!net.connection_allowed(&id("ab"), &id("ba")).unwrap());
        assert!(!net.connection_allowed(&id("ab"), &id("ab")).unwrap());
        assert_eq!(
            net.connection_allowed(&id("ab"), &id("nope")),
            Err(NetworkError::UnknownEdge(id("nope")))
        );
    }

    #[test]
    fn candidate_examples() {
        // "a" and "b" are both 5 m from the query point.
        let nodes = vec![
            node("p", 0.0, 5.0),
            node("q", 10.0, 5.0),
            node("r", 0.0, -5.0),
            node("s", 10.0, -5.0),
        ];
        let edges = vec![edge("b", "r", "s", 10.0), edge("a", "p", "q", 10.0)];
        let net = RoadNetwork::new(nodes, edges, vec![], None).unwrap();
        let got: Vec<_> = net
            .candidate_edges(CartPoint::new(5.0, 0.0), 15.0)
            .into_iter()
            .map(|c| c.edge.0)
            .collect();
        assert_eq!(got, vec!["a", "b"]);

        let net = RoadNetwork::new(
            vec![node("a", 0.0, 0.0), node("b", 10.0, 0.0)],
            vec![edge("ab", "a", "b", 10.0)],
            vec![],
            None,
        )
        .unwrap();
        assert!(net.candidate_edges(CartPoint::new(5.0, 20.0), 15.0).is_empty());
    }

    #[test]
    fn candidate_order_on_grid_fixture() {
        let nodes = vec![
            node("a", 0.0, 0.0),
            node("b", 10.0, 0.0),
            node("c", 0.0, 10.0),
            node("d", 10.0, 10.0),
        ];
        let edges = vec![edge("bottom", "a", "b", 10.0), edge("top", "c", "d", 10.0)];
        let net = RoadNetwork::new(nodes, edges, vec![], None).unwrap();
        let p = CartPoint::new(5.0, 7.0);
        let got = net.candidate_edges(p, 15.0);
        // Brute force over both edges: top is 3 m away, bottom 7 m.
        assert_eq!(got.len(), 2);
        assert_eq!(got[0].edge, id("top"));
        assert!((got[0].distance - 3.0).abs() < 1e-12);
        assert_eq!(got[1].edge, id("bottom"));
        assert!((got[1].distance - 7.0).abs() < 1e-12);
    }

    #[test]
    fn polyline_geometry_follows_shape() {
        let doc = MINIMAL.replace("length=\"100\"", "length=\"120\" shape=\"0,0 50,30 100,0\"");
        let net = parse_network(&doc).unwrap();
        let p = CartPoint::new(50.0, 28.0);
        assert!(net.candidate_edges(p, 15.0).is_empty());
        let hits = net.candidate_edges_with(p, 15.0, MatchGeometry::Polyline);
        assert_eq!(hits.len(), 1);
        assert!(hits[0].distance < 2.0);
    }

    #[test]
    fn write_then_parse_is_identity() {
        let net = parse_network(RING).unwrap();
        let text = write_network(&net);
        let again = parse_network(&text).unwrap();
        assert_eq!(write_network(&again), text);
        assert_eq!(again.connections(), net.connections());
        assert_eq!(again.edges(), net.edges());
    }

    // Brute-force oracle: scan every edge.
    fn brute_force(net: &RoadNetwork, p: CartPoint, r: f64, g: MatchGeometry) -> Vec<(String, f64)> {
        let mut all: Vec<(String, f64)> = net
            .edges()
            .iter()
            .filter_map(|e| {
                let d = match (&e.shape, g) {
                    (Some(shape), MatchGeometry::Polyline) => shape
                        .windows(2)
                        .filter(|w| w[0] != w[1])
                        .map(|w| geo::point_segment_distance(p, w[0], w[1]).unwrap())
                        .fold(f64::INFINITY, f64::min),
                    _ => {
                        let (a, b) = net.chord(&e.id).unwrap();
                        geo::point_segment_distance(p, a, b).unwrap()
                    }
                };
                (d <= r).then(|| (e.id.0.clone(), d))
            })
            .collect();
        all.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        all
    }

    fn random_net(points: Vec<(f64, f64)>, links: Vec<(usize, usize, f64)>) -> Option<RoadNetwork> {
        let nodes: Vec<Node> = points
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| node(&format!("n{i}"), x, y))
            .collect();
        let mut edges = Vec::new();
        for (k, (a, b, bend)) in links.into_iter().enumerate() {
            let (a, b) = (a % points.len(), b % points.len());
            if a == b || points[a] == points[b] {
                continue;
            }
            let pa = CartPoint::new(points[a].0, points[a].1);
            let pb = CartPoint::new(points[b].0, points[b].1);
            let mid = pa.midpoint(&pb);
            let mut e = edge(&format!("e{k:03}"), &format!("n{a}"), &format!("n{b}"), 1.0);
            e.shape = Some(vec![pa, CartPoint::new(mid.x + bend, mid.y - bend), pb]);
            edges.push(e);
        }
        RoadNetwork::new(nodes, edges, vec![], None).ok()
    }

    proptest! {
        #[test]
        fn grid_equals_brute_force(
            points in prop::collection::vec((-300.0..300.0f64, -300.0..300.0f64), 2..25),
            links in prop::collection::vec((0usize..25, 0usize..25, -40.0..40.0f64), 1..60),
            queries in prop::collection::vec((-350.0..350.0f64, -350.0..350.0f64), 1..20),
            radius in 1.0..80.0f64,
            cell in 5.0..90.0f64,
        ) {
            let Some(net) = random_net(points, links) else { return Ok(()); };
            let net = net.with_index_cell(cell);
            for (x, y) in queries {
                let p = CartPoint::new(x, y);
                for g in [MatchGeometry::Chord, MatchGeometry::Polyline] {
                    let got: Vec<(String, f64)> = net
                        .candidate_edges_with(p, radius, g)
                        .into_iter()
                        .map(|c| (c.edge.0, c.distance))
                        .collect();
                    prop_assert_eq!(got, brute_force(&net, p, radius, g));
                }
            }
        }

        #[test]
        fn parse_is_deterministic(shift in -1000.0..1000.0f64) {
            let doc = RING.replace("x=\"100\"", &format!("x=\"{}\"", 100.0 + shift.abs() + 1.0));
            let a = parse_network(&doc).unwrap();
            let b = parse_network(&doc).unwrap();
            prop_assert_eq!(write_network(&a), write_network(&b));
        }
    }
}
