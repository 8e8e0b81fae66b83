use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use serde::{Deserialize, Serialize};

use super::RouteError;
use crate::geodesy::{wgs84_to_enu, EnuPoint, Wgs84Point};
use crate::geometry::project_onto_segment;
use crate::kb::{KnowledgeBase, RoadGraph};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetEdge {
    pub a: usize,
    pub b: usize,
    pub length_m: f64,
}

impl NetEdge {
    pub fn other(&self, node: usize) -> usize {
        if node == self.a {
            self.b
        } else {
            self.a
        }
    }
}

/// Closest point of the network to a query point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Snap {
    pub edge: usize,
    pub point: EnuPoint,
    pub distance: f64,
}

/// Road graph projected into the ENU frame, with dense node indices.
#[derive(Debug, Clone, PartialEq)]
pub struct RoadNetwork {
    points: Vec<EnuPoint>,
    node_ids: Vec<i64>,
    edges: Vec<NetEdge>,
    adjacency: Vec<Vec<(usize, usize)>>,
}

#[derive(PartialEq)]
struct QueueItem {
    dist: f64,
    node: usize,
}

impl Eq for QueueItem {}

impl Ord for QueueItem {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for QueueItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Shortest-path tree from a set of sources.
#[derive(Debug, Clone)]
pub struct ShortestPaths {
    pub dist: Vec<f64>,
    /// `(previous node, edge)` on the shortest path, `None` at sources.
    pub prev: Vec<Option<(usize, usize)>>,
}

impl ShortestPaths {
    /// Node sequence from a source to `target`.
    pub fn path_to(&self, target: usize) -> Vec<usize> {
        let mut path = vec![target];
        let mut at = target;
        while let Some((p, _)) = self.prev[at] {
            path.push(p);
            at = p;
        }
        path.reverse();
        path
    }

    pub fn edges_to(&self, target: usize) -> Vec<usize> {
        let mut edges = Vec::new();
        let mut at = target;
        while let Some((p, e)) = self.prev[at] {
            edges.push(e);
            at = p;
        }
        edges.reverse();
        edges
    }
}

impl RoadNetwork {
    /// Network over `points` with undirected `edges` given as index pairs;
    /// node ids are the indices.
    pub fn new(points: Vec<EnuPoint>, edges: &[(usize, usize)]) -> Result<Self, RouteError> {
        let ids = (0..points.len() as i64).collect();
        Self::with_ids(points, ids, edges)
    }

    fn with_ids(points: Vec<EnuPoint>, node_ids: Vec<i64>, pairs: &[(usize, usize)]) -> Result<Self, RouteError> {
        if points.iter().any(|p| !p.is_finite()) {
            return Err(RouteError::InvalidNetwork("non-finite node position".into()));
        }
        let mut adjacency = vec![Vec::new(); points.len()];
        let mut edges = Vec::with_capacity(pairs.len());
        for &(a, b) in pairs {
            if a >= points.len() || b >= points.len() {
                return Err(RouteError::InvalidNetwork(format!("edge ({a}, {b}) references a missing node")));
            }
            let length_m = points[a].distance(points[b]);
            if length_m <= 0.0 {
                return Err(RouteError::InvalidNetwork(format!("edge ({a}, {b}) has zero length")));
            }
            let idx = edges.len();
            edges.push(NetEdge { a, b, length_m });
            adjacency[a].push((b, idx));
            adjacency[b].push((a, idx));
        }
        Ok(RoadNetwork {
            points,
            node_ids,
            edges,
            adjacency,
        })
    }

    pub fn from_road_graph(graph: &RoadGraph, anchor: Wgs84Point) -> Result<Self, RouteError> {
        let mut index = BTreeMap::new();
        let mut points = Vec::new();
        let mut ids = Vec::new();
        for (id, p) in graph.nodes() {
            index.insert(*id, points.len());
            points.push(wgs84_to_enu(anchor, *p)?);
            ids.push(*id);
        }
        let pairs: Vec<(usize, usize)> = graph.edges().iter().map(|e| (index[&e.u], index[&e.v])).collect();
        Self::with_ids(points, ids, &pairs)
    }

    pub fn from_kb(kb: &KnowledgeBase) -> Result<Self, RouteError> {
        Self::from_road_graph(kb.road_graph(), kb.enu_anchor())
    }

    pub fn node_count(&self) -> usize {
        self.points.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn point(&self, node: usize) -> EnuPoint {
        self.points[node]
    }

    pub fn points(&self) -> &[EnuPoint] {
        &self.points
    }

    pub fn node_id(&self, node: usize) -> i64 {
        self.node_ids[node]
    }

    pub fn edge(&self, edge: usize) -> NetEdge {
        self.edges[edge]
    }

    pub fn edges(&self) -> &[NetEdge] {
        &self.edges
    }

    /// `(neighbor, edge)` pairs of `node`.
    pub fn neighbors(&self, node: usize) -> &[(usize, usize)] {
        &self.adjacency[node]
    }

    /// Connected-component label per node, ignoring `blocked` edges.
    pub fn components(&self, blocked: &BTreeSet<usize>) -> Vec<usize> {
        let mut label = vec![usize::MAX; self.points.len()];
        let mut next = 0;
        for start in 0..self.points.len() {
            if label[start] != usize::MAX {
                continue;
            }
            label[start] = next;
            let mut stack = vec![start];
            while let Some(u) = stack.pop() {
                for &(v, e) in &self.adjacency[u] {
                    if !blocked.contains(&e) && label[v] == usize::MAX {
                        label[v] = next;
                        stack.push(v);
                    }
                }
            }
            next += 1;
        }
        label
    }

    /// Nearest point on any unblocked edge; ties go to the lowest edge index.
    pub fn snap(&self, p: EnuPoint, blocked: &BTreeSet<usize>) -> Option<Snap> {
        let mut best: Option<Snap> = None;
        for (i, e) in self.edges.iter().enumerate() {
            if blocked.contains(&i) {
                continue;
            }
            let (q, _) = project_onto_segment(p, self.points[e.a], self.points[e.b]);
            let d = q.distance(p);
            if best.is_none_or(|b| d < b.distance) {
                best = Some(Snap {
                    edge: i,
                    point: q,
                    distance: d,
                });
            }
        }
        best
    }

    /// Uniform-cost search from weighted sources, skipping `blocked` edges.
    pub fn shortest_paths(&self, sources: &[(usize, f64)], blocked: &BTreeSet<usize>) -> ShortestPaths {
        let n = self.points.len();
        let mut dist = vec![f64::INFINITY; n];
        let mut prev = vec![None; n];
        let mut heap = BinaryHeap::new();
        for &(s, d0) in sources {
            if d0 < dist[s] {
                dist[s] = d0;
                prev[s] = None;
                heap.push(QueueItem { dist: d0, node: s });
            }
        }
        while let Some(QueueItem { dist: d, node: u }) = heap.pop() {
            if d > dist[u] {
                continue;
            }
            for &(v, e) in &self.adjacency[u] {
                if blocked.contains(&e) {
                    continue;
                }
                let nd = d + self.edges[e].length_m;
                if nd < dist[v] {
                    dist[v] = nd;
                    prev[v] = Some((u, e));
                    heap.push(QueueItem { dist: nd, node: v });
                }
            }
        }
        ShortestPaths { dist, prev }
    }
}
