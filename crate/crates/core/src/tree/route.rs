//! Minimum-hop routes from cluster headers to the base station.
//!
//! Headers and the base station form an undirected graph with an edge
//! wherever two of them are within `comm_range`. Each header's route
//! minimises hop count, then total Euclidean length, then the sequence of
//! relay ids lexicographically.

use std::collections::{BTreeMap, VecDeque};

use thiserror::Error;

use crate::field::Field;
use crate::geometry::Point;
use crate::ids::NodeId;
use crate::tree::index::IndexTree;

#[derive(Debug, Error, PartialEq)]
pub enum RouteError {
    #[error("communication range must be positive and finite, got {0}")]
    InvalidRange(f64),
    #[error("header {0} has no path to the base station")]
    Unreachable(NodeId),
    #[error("header {0} is not a node of the field")]
    UnknownHeader(NodeId),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Route {
    /// Headers traversed, starting with the source and excluding the base.
    pub path: Vec<NodeId>,
    pub distance: f64,
}

impl Route {
    pub fn hops(&self) -> usize {
        self.path.len()
    }
}

/// Routes for the root children of `tree`, keyed by header id.
pub fn shortest_route(tree: &IndexTree, field: &Field, comm_range: f64) -> Result<BTreeMap<NodeId, Route>, RouteError> {
    let mut headers = Vec::new();
    for (_, header) in tree.top_level() {
        let node = field.nodes().get(header).ok_or(RouteError::UnknownHeader(header))?;
        headers.push((header, node.position));
    }
    min_hop_routes(&headers, field.base_station(), comm_range)
}

/// Core routine over explicit positions. Duplicate ids keep the first entry.
pub fn min_hop_routes(
    headers: &[(NodeId, Point)],
    base: Point,
    comm_range: f64,
) -> Result<BTreeMap<NodeId, Route>, RouteError> {
    if !(comm_range.is_finite() && comm_range > 0.0) {
        return Err(RouteError::InvalidRange(comm_range));
    }
    let mut nodes: BTreeMap<NodeId, Point> = BTreeMap::new();
    for &(id, p) in headers {
        nodes.entry(id).or_insert(p);
    }
    // vertex 0 is the base; the rest follow ascending header id
    let ids: Vec<NodeId> = nodes.keys().copied().collect();
    let pos: Vec<Point> = std::iter::once(base).chain(nodes.values().copied()).collect();
    let n = pos.len();
    let adjacent = |a: usize, b: usize| a != b && pos[a].distance(&pos[b]) <= comm_range;

    let mut level = vec![usize::MAX; n];
    level[0] = 0;
    let mut queue = VecDeque::from([0usize]);
    let mut order = Vec::with_capacity(n);
    while let Some(u) = queue.pop_front() {
        order.push(u);
        for v in 0..n {
            if level[v] == usize::MAX && adjacent(u, v) {
                level[v] = level[u] + 1;
                queue.push_back(v);
            }
        }
    }
    if let Some(v) = (1..n).find(|&v| level[v] == usize::MAX) {
        return Err(RouteError::Unreachable(ids[v - 1]));
    }

    // BFS order visits levels in increasing order, so every candidate next
    // hop is settled before the vertices that depend on it
    let mut dist = vec![0.0; n];
    let mut next = vec![0usize; n];
    for &u in order.iter().skip(1) {
        let mut best: Option<(f64, usize)> = None;
        for v in 0..n {
            if level[v] + 1 != level[u] || !adjacent(u, v) {
                continue;
            }
            let d = pos[u].distance(&pos[v]) + dist[v];
            // v ascends with header id, so strict < picks the smallest relay on ties
            if best.map_or(true, |(bd, _)| d < bd) {
                best = Some((d, v));
            }
        }
        let (d, v) = best.expect("a vertex at level > 0 has a parent level neighbour");
        dist[u] = d;
        next[u] = v;
    }

    let mut routes = BTreeMap::new();
    for u in 1..n {
        let mut path = vec![ids[u - 1]];
        let mut at = next[u];
        while at != 0 {
            path.push(ids[at - 1]);
            at = next[at];
        }
        routes.insert(ids[u - 1], Route { path, distance: dist[u] });
    }
    Ok(routes)
}
