//! Synthetic networks and traces: Manhattan grids and path sampling.

use std::collections::BTreeMap;

use crate::geo::{CartPoint, GeoPoint};
use crate::network::{Connection, Edge, EdgeId, Node, NodeId, NetworkError, RoadNetwork};
use crate::replay::TraceFrame;

/// A rectangular street grid with two-way streets.
#[derive(Debug, Clone, Copy)]
pub struct GridSpec {
    pub columns: usize,
    pub rows: usize,
    /// Block length in meters.
    pub spacing: f64,
    /// Meters per second on every edge.
    pub speed: f64,
    /// Planar position of junction (0, 0).
    pub offset: CartPoint,
    /// Register U-turn connections (edge onto its reverse twin).
    pub u_turns: bool,
    pub location: Option<GeoPoint>,
}

impl GridSpec {
    pub fn new(columns: usize, rows: usize, spacing: f64) -> Self {
        Self {
            columns,
            rows,
            spacing,
            speed: 13.89,
            offset: CartPoint::default(),
            u_turns: false,
            location: None,
        }
    }
}

pub fn grid_node_id(col: usize, row: usize) -> NodeId {
    NodeId(format!("n{col}_{row}"))
}

pub fn grid_edge_id(from: (usize, usize), to: (usize, usize)) -> EdgeId {
    EdgeId(format!("e{}_{}-{}_{}", from.0, from.1, to.0, to.1))
}

/// Builds the grid network with every non-U-turn movement registered.
pub fn grid_network(spec: &GridSpec) -> Result<RoadNetwork, NetworkError> {
    let mut nodes = Vec::new();
    for c in 0..spec.columns {
        for r in 0..spec.rows {
            nodes.push(Node {
                id: grid_node_id(c, r),
                pos: grid_position(spec, c, r),
            });
        }
    }
    let mut edges = Vec::new();
    let mut links: Vec<((usize, usize), (usize, usize))> = Vec::new();
    for c in 0..spec.columns {
        for r in 0..spec.rows {
            for (dc, dr) in [(1isize, 0isize), (-1, 0), (0, 1), (0, -1)] {
                let (nc, nr) = (c as isize + dc, r as isize + dr);
                if nc < 0 || nr < 0 || nc >= spec.columns as isize || nr >= spec.rows as isize {
                    continue;
                }
                let to = (nc as usize, nr as usize);
                links.push(((c, r), to));
                edges.push(Edge {
                    id: grid_edge_id((c, r), to),
                    from: grid_node_id(c, r),
                    to: grid_node_id(to.0, to.1),
                    length: spec.spacing,
                    speed_limit: spec.speed,
                    shape: None,
                });
            }
        }
    }
    let mut outgoing: BTreeMap<(usize, usize), Vec<(usize, usize)>> = BTreeMap::new();
    for &(a, b) in &links {
        outgoing.entry(a).or_default().push(b);
    }
    let mut connections = Vec::new();
    for &(a, b) in &links {
        for &d in outgoing.get(&b).into_iter().flatten() {
            if spec.u_turns || d != a {
                connections.push(Connection {
                    from_edge: grid_edge_id(a, b),
                    to_edge: grid_edge_id(b, d),
                });
            }
        }
    }
    RoadNetwork::new(nodes, edges, connections, spec.location)
}

pub fn grid_position(spec: &GridSpec, col: usize, row: usize) -> CartPoint {
    CartPoint::new(
        spec.offset.x + col as f64 * spec.spacing,
        spec.offset.y + row as f64 * spec.spacing,
    )
}

/// Edge chain visiting the given grid junctions in order.
pub fn grid_path(junctions: &[(usize, usize)]) -> Vec<EdgeId> {
    junctions.windows(2).map(|w| grid_edge_id(w[0], w[1])).collect()
}

/// Points along an edge chain at arc lengths `start, start + spacing, ...`
/// up to `total - end_margin`, following edge chords.
pub fn sample_chain(
    net: &RoadNetwork,
    chain: &[EdgeId],
    spacing: f64,
    start: f64,
    end_margin: f64,
) -> Result<Vec<CartPoint>, NetworkError> {
    let mut pieces = Vec::with_capacity(chain.len());
    for id in chain {
        let (a, b) = net.chord(id).ok_or_else(|| NetworkError::UnknownEdge(id.clone()))?;
        pieces.push((a, b, a.distance(&b)));
    }
    let total: f64 = pieces.iter().map(|p| p.2).sum();
    let mut out = Vec::new();
    let mut s = start;
    let mut k = 0usize;
    while s <= total - end_margin + 1e-9 {
        out.push(point_at(&pieces, s));
        k += 1;
        s = start + k as f64 * spacing;
    }
    Ok(out)
}

fn point_at(pieces: &[(CartPoint, CartPoint, f64)], s: f64) -> CartPoint {
    let mut rest = s;
    for &(a, b, len) in pieces {
        if rest <= len {
            return a.lerp(&b, rest / len);
        }
        rest -= len;
    }
    let &(_, b, _) = pieces.last().expect("non-empty chain");
    b
}

/// Three buses over four samples 3 s apart, range 150 m. A stays in contact
/// for the first three samples and is alone at the fourth; B is connected
/// for two samples, alone at the third and reconnected at the fourth; C is
/// always connected.
pub fn contact_example() -> Vec<TraceFrame> {
    let layout: [[(f64, f64); 3]; 4] = [
        [(0.0, 0.0), (100.0, 0.0), (-100.0, 0.0)],
        [(0.0, 0.0), (100.0, 0.0), (-100.0, 0.0)],
        [(0.0, 0.0), (1000.0, 0.0), (-100.0, 0.0)],
        [(0.0, 0.0), (2000.0, 0.0), (2100.0, 0.0)],
    ];
    layout
        .iter()
        .enumerate()
        .map(|(k, row)| TraceFrame {
            t: 3.0 * k as f64,
            positions: ["A", "B", "C"]
                .iter()
                .zip(row)
                .map(|(id, &(x, y))| (id.to_string(), CartPoint::new(x, y)))
                .collect(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_counts() {
        let net = grid_network(&GridSpec::new(3, 2, 100.0)).unwrap();
        assert_eq!(net.node_count(), 6);
        // 2 rows * 2 horizontal + 3 columns * 1 vertical, both directions.
        assert_eq!(net.edge_count(), 14);
        for c in net.connections() {
            let f = net.edge(&c.from_edge).unwrap();
            let t = net.edge(&c.to_edge).unwrap();
            assert_eq!(f.to, t.from);
            assert_ne!(f.from, t.to);
        }
    }

    #[test]
    fn sampling_follows_the_chain() {
        let net = grid_network(&GridSpec::new(3, 3, 100.0)).unwrap();
        let chain = grid_path(&[(0, 0), (1, 0), (1, 1)]);
        let pts = sample_chain(&net, &chain, 20.0, 10.0, 10.0).unwrap();
        assert_eq!(pts.first(), Some(&CartPoint::new(10.0, 0.0)));
        assert_eq!(pts.last(), Some(&CartPoint::new(100.0, 90.0)));
        assert_eq!(pts.len(), 10);
    }
}
