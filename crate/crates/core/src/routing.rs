//! Length-minimizing shortest paths.
//!
//! Dijkstra with a heap keyed by `(distance, node)`. When two relaxations
//! reach a node with exactly the same distance, the one through the
//! smaller edge index (smaller edge id) becomes the predecessor. Every
//! query is therefore a pure function of the network.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::graph::{EdgeIdx, NodeIdx, RoadNetwork};

const NO_EDGE: u32 = u32::MAX;

/// An edge chain from `origin` to `destination`.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub origin: NodeIdx,
    pub destination: NodeIdx,
    pub edges: Vec<EdgeIdx>,
    pub total_length_m: f64,
}

impl Path {
    pub fn empty(at: NodeIdx) -> Self {
        Path {
            origin: at,
            destination: at,
            edges: Vec::new(),
            total_length_m: 0.0,
        }
    }

    /// Validates that `edges` form a chain starting at `origin`.
    pub fn from_edges(net: &RoadNetwork, origin: NodeIdx, edges: Vec<EdgeIdx>) -> Result<Self> {
        let mut at = origin;
        let mut total = 0.0;
        for &e in &edges {
            let edge = net.edge(e);
            if edge.u != at {
                return Err(Error::Validation(format!(
                    "edge {:?} does not start at node {:?}",
                    edge.id,
                    net.node_id(at)
                )));
            }
            total += edge.length_m;
            at = edge.v;
        }
        Ok(Path {
            origin,
            destination: at,
            edges,
            total_length_m: total,
        })
    }

    pub fn len_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Appends `next`, which must start where `self` ends.
    pub fn concat(&self, next: &Path) -> Option<Path> {
        if self.destination != next.origin {
            return None;
        }
        let mut edges = self.edges.clone();
        edges.extend_from_slice(&next.edges);
        Some(Path {
            origin: self.origin,
            destination: next.destination,
            edges,
            total_length_m: self.total_length_m + next.total_length_m,
        })
    }

    pub fn nodes(&self, net: &RoadNetwork) -> Vec<NodeIdx> {
        let mut out = Vec::with_capacity(self.edges.len() + 1);
        out.push(self.origin);
        out.extend(self.edges.iter().map(|&e| net.edge(e).v));
        out
    }
}

pub fn path_length(p: &Path) -> f64 {
    p.total_length_m
}

#[derive(Clone, Copy)]
struct Entry {
    dist: f64,
    node: u32,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    // reversed: BinaryHeap is a max-heap
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}

/// Distances and predecessor edges from a single source.
#[derive(Debug, Clone)]
pub struct ShortestPathTree {
    source: NodeIdx,
    dist: Vec<f64>,
    pred: Vec<u32>,
    settled: Vec<bool>,
}

impl ShortestPathTree {
    fn new(net: &RoadNetwork, source: NodeIdx) -> Self {
        let n = net.node_count();
        let mut dist = vec![f64::INFINITY; n];
        dist[source.index()] = 0.0;
        ShortestPathTree {
            source,
            dist,
            pred: vec![NO_EDGE; n],
            settled: vec![false; n],
        }
    }

    /// Runs Dijkstra until `stop` returns true for a freshly settled node
    /// or the reachable set is exhausted.
    fn grow(&mut self, net: &RoadNetwork, mut stop: impl FnMut(NodeIdx) -> bool) {
        let mut heap = BinaryHeap::new();
        heap.push(Entry {
            dist: 0.0,
            node: self.source.0,
        });
        while let Some(Entry { dist, node }) = heap.pop() {
            let u = node as usize;
            if self.settled[u] || dist > self.dist[u] {
                continue;
            }
            self.settled[u] = true;
            if stop(NodeIdx(node)) {
                return;
            }
            for &e in net.out_edges(NodeIdx(node)) {
                let edge = net.edge(e);
                let v = edge.v.index();
                if self.settled[v] {
                    continue;
                }
                let nd = dist + edge.length_m;
                if nd < self.dist[v] {
                    self.dist[v] = nd;
                    self.pred[v] = e.0;
                    heap.push(Entry {
                        dist: nd,
                        node: edge.v.0,
                    });
                } else if nd == self.dist[v] && e.0 < self.pred[v] {
                    self.pred[v] = e.0;
                }
            }
        }
    }

    pub fn source(&self) -> NodeIdx {
        self.source
    }

    pub fn distance(&self, n: NodeIdx) -> Option<f64> {
        self.settled[n.index()].then(|| self.dist[n.index()])
    }

    pub fn path_to(&self, net: &RoadNetwork, target: NodeIdx) -> Option<Path> {
        if !self.settled[target.index()] {
            return None;
        }
        let mut edges = Vec::new();
        let mut at = target;
        while at != self.source {
            let e = EdgeIdx(self.pred[at.index()]);
            edges.push(e);
            at = net.edge(e).u;
        }
        edges.reverse();
        Some(Path {
            origin: self.source,
            destination: target,
            edges,
            total_length_m: self.dist[target.index()],
        })
    }
}

/// Full single-source shortest path tree.
pub fn shortest_path_tree(net: &RoadNetwork, source: NodeIdx) -> ShortestPathTree {
    let mut t = ShortestPathTree::new(net, source);
    t.grow(net, |_| false);
    t
}

/// Shortest path between two nodes, stopping once `d` is settled.
///
/// Settled predecessors are final, so the returned path is identical to
/// the one read off [`shortest_path_tree`].
pub fn shortest_path_between(net: &RoadNetwork, o: NodeIdx, d: NodeIdx) -> Option<Path> {
    let mut t = ShortestPathTree::new(net, o);
    t.grow(net, |n| n == d);
    t.path_to(net, d)
}

/// Shortest path between two nodes addressed by id.
pub fn shortest_path(net: &RoadNetwork, o: &str, d: &str) -> Result<Option<Path>> {
    let o = net.require_node(o)?;
    let d = net.require_node(d)?;
    Ok(shortest_path_between(net, o, d))
}

/// Shortest distances from `source` to each of `targets` (absent when
/// unreachable), stopping once every target is settled.
pub fn distances_to(net: &RoadNetwork, source: NodeIdx, targets: &[NodeIdx]) -> Vec<Option<f64>> {
    let mut remaining: Vec<NodeIdx> = targets.to_vec();
    remaining.sort_unstable();
    remaining.dedup();
    let mut t = ShortestPathTree::new(net, source);
    t.grow(net, |n| {
        if let Ok(i) = remaining.binary_search(&n) {
            remaining.remove(i);
        }
        remaining.is_empty()
    });
    targets.iter().map(|&n| t.distance(n)).collect()
}
