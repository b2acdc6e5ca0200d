use std::collections::BTreeMap;

use super::{NodeIdx, RoadNetwork};

/// An undirected street between two nodes, `a <= b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Street {
    pub a: NodeIdx,
    pub b: NodeIdx,
    pub length_m: f64,
}

impl Street {
    pub fn is_self_loop(&self) -> bool {
        self.a == self.b
    }
}

/// Collapses directed edges into one street per unordered node pair.
///
/// Reciprocal edges of equal length become a single street; one-way edges
/// appear once. When a pair carries several edges of different lengths
/// (parallel roads, asymmetric reciprocals) the shortest one represents it.
pub fn undirected_streets(net: &RoadNetwork) -> Vec<Street> {
    let mut by_pair: BTreeMap<(NodeIdx, NodeIdx), f64> = BTreeMap::new();
    for (_, e) in net.edges() {
        let key = if e.u <= e.v { (e.u, e.v) } else { (e.v, e.u) };
        by_pair
            .entry(key)
            .and_modify(|l| *l = l.min(e.length_m))
            .or_insert(e.length_m);
    }
    by_pair
        .into_iter()
        .map(|((a, b), length_m)| Street { a, b, length_m })
        .collect()
}
