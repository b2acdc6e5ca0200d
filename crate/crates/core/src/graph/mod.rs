//! Immutable road network with a spatial index over node coordinates.
//!
//! Node and edge identifiers are opaque strings. Internally every node and
//! edge is addressed by a dense index assigned in identifier order (see
//! [`compare_ids`]), so "smallest id" tie-breaks reduce to index comparisons.

mod graphml;
mod index;
mod streets;
mod tables;

use std::cmp::Ordering;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geodesy::{haversine_distance, GeoPoint};

pub use graphml::{load_graphml, read_graphml_file, write_graphml};
pub use streets::{undirected_streets, Street};
pub use tables::{load_network, read_network_files, write_edges_csv, write_nodes_csv};

use index::GridIndex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeIdx(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EdgeIdx(pub u32);

impl NodeIdx {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl EdgeIdx {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DirectedEdge {
    pub id: String,
    pub u: NodeIdx,
    pub v: NodeIdx,
    pub length_m: f64,
}

/// Total order on identifiers: purely numeric ids first, by value, then
/// everything else lexicographically. Real exports mostly carry numeric
/// ids, for which plain string order would put "10" before "9".
pub fn compare_ids(a: &str, b: &str) -> Ordering {
    fn numeric(s: &str) -> Option<u128> {
        if s.is_empty() || s.len() > 38 || !s.bytes().all(|c| c.is_ascii_digit()) {
            None
        } else {
            s.parse().ok()
        }
    }
    match (numeric(a), numeric(b)) {
        (Some(x), Some(y)) => x.cmp(&y).then_with(|| a.cmp(b)),
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => a.cmp(b),
    }
}

#[derive(Debug)]
pub struct RoadNetwork {
    node_ids: Vec<String>,
    points: Vec<GeoPoint>,
    lookup: HashMap<String, NodeIdx>,
    edges: Vec<DirectedEdge>,
    // CSR adjacency: out_edges[offsets[n]..offsets[n + 1]]
    offsets: Vec<u32>,
    out_edges: Vec<EdgeIdx>,
    index: GridIndex,
    area_km2: Option<f64>,
}

impl RoadNetwork {
    pub fn builder() -> NetworkBuilder {
        NetworkBuilder::default()
    }

    pub fn node_count(&self) -> usize {
        self.node_ids.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn nodes(&self) -> impl ExactSizeIterator<Item = NodeIdx> + '_ {
        (0..self.node_ids.len() as u32).map(NodeIdx)
    }

    pub fn edges(&self) -> impl ExactSizeIterator<Item = (EdgeIdx, &DirectedEdge)> + '_ {
        self.edges.iter().enumerate().map(|(i, e)| (EdgeIdx(i as u32), e))
    }

    pub fn node_index(&self, id: &str) -> Option<NodeIdx> {
        self.lookup.get(id).copied()
    }

    pub fn require_node(&self, id: &str) -> Result<NodeIdx> {
        self.node_index(id).ok_or_else(|| Error::UnknownNode(id.to_string()))
    }

    pub fn node_id(&self, n: NodeIdx) -> &str {
        &self.node_ids[n.index()]
    }

    pub fn point(&self, n: NodeIdx) -> GeoPoint {
        self.points[n.index()]
    }

    pub fn edge(&self, e: EdgeIdx) -> &DirectedEdge {
        &self.edges[e.index()]
    }

    pub fn out_edges(&self, n: NodeIdx) -> &[EdgeIdx] {
        let lo = self.offsets[n.index()] as usize;
        let hi = self.offsets[n.index() + 1] as usize;
        &self.out_edges[lo..hi]
    }

    pub fn area_km2(&self) -> Option<f64> {
        self.area_km2
    }

    /// Copy of this network with a different analysis area.
    pub fn with_area_km2(mut self, area: Option<f64>) -> Self {
        self.area_km2 = area;
        self
    }

    /// Node nearest to `p` within `max_dist` meters; ties go to the
    /// smallest node id.
    pub fn nearest_node(&self, p: GeoPoint, max_dist: f64) -> Option<NodeIdx> {
        let mut best: Option<(f64, NodeIdx)> = None;
        self.index.for_each_candidate(p, max_dist, &self.points, |n| {
            let d = haversine_distance(p, self.points[n.index()]);
            if d > max_dist {
                return;
            }
            let better = match best {
                None => true,
                Some((bd, bn)) => d < bd || (d == bd && n < bn),
            };
            if better {
                best = Some((d, n));
            }
        });
        best.map(|(_, n)| n)
    }

    /// Nodes whose distance `r` from `center` satisfies
    /// `d_min <= r <= d_max`, in index order.
    pub fn nodes_in_ring(&self, center: GeoPoint, d_min: f64, d_max: f64) -> Vec<NodeIdx> {
        let mut out = Vec::new();
        self.index.for_each_candidate(center, d_max, &self.points, |n| {
            let r = haversine_distance(center, self.points[n.index()]);
            if r >= d_min && r <= d_max {
                out.push(n);
            }
        });
        out.sort_unstable();
        out
    }
}

#[derive(Debug, Default, Clone)]
pub struct NetworkBuilder {
    nodes: Vec<(String, GeoPoint)>,
    edges: Vec<(String, String, String, f64)>,
    area_km2: Option<f64>,
}

impl NetworkBuilder {
    pub fn node(mut self, id: impl Into<String>, p: GeoPoint) -> Self {
        self.add_node(id, p);
        self
    }

    pub fn edge(mut self, id: impl Into<String>, u: impl Into<String>, v: impl Into<String>, length_m: f64) -> Self {
        self.add_edge(id, u, v, length_m);
        self
    }

    pub fn add_node(&mut self, id: impl Into<String>, p: GeoPoint) {
        self.nodes.push((id.into(), p));
    }

    pub fn add_edge(&mut self, id: impl Into<String>, u: impl Into<String>, v: impl Into<String>, length_m: f64) {
        self.edges.push((id.into(), u.into(), v.into(), length_m));
    }

    pub fn area_km2(mut self, area: Option<f64>) -> Self {
        self.area_km2 = area;
        self
    }

    pub fn build(self) -> Result<RoadNetwork> {
        let NetworkBuilder {
            mut nodes,
            mut edges,
            area_km2,
        } = self;

        for (id, p) in &nodes {
            p.validate()
                .map_err(|e| Error::Validation(format!("node {id:?}: {e}")))?;
        }
        nodes.sort_by(|a, b| compare_ids(&a.0, &b.0));
        if let Some(w) = nodes.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::Validation(format!("duplicate node id {:?}", w[0].0)));
        }

        let mut lookup = HashMap::with_capacity(nodes.len());
        let mut node_ids = Vec::with_capacity(nodes.len());
        let mut points = Vec::with_capacity(nodes.len());
        for (i, (id, p)) in nodes.into_iter().enumerate() {
            lookup.insert(id.clone(), NodeIdx(i as u32));
            node_ids.push(id);
            points.push(p);
        }

        edges.sort_by(|a, b| compare_ids(&a.0, &b.0));
        if let Some(w) = edges.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::Validation(format!("duplicate edge id {:?}", w[0].0)));
        }

        let mut resolved = Vec::with_capacity(edges.len());
        for (id, u, v, len) in edges {
            let ui = *lookup
                .get(&u)
                .ok_or_else(|| Error::Validation(format!("edge {id:?} references missing node {u:?}")))?;
            let vi = *lookup
                .get(&v)
                .ok_or_else(|| Error::Validation(format!("edge {id:?} references missing node {v:?}")))?;
            if !(len.is_finite() && len > 0.0) {
                return Err(Error::Validation(format!("edge {id:?} has non-positive length {len}")));
            }
            resolved.push(DirectedEdge {
                id,
                u: ui,
                v: vi,
                length_m: len,
            });
        }

        if let Some(a) = area_km2 {
            if !(a.is_finite() && a > 0.0) {
                return Err(Error::Validation(format!("area_km2 must be positive, got {a}")));
            }
        }

        let n = node_ids.len();
        let mut offsets = vec![0u32; n + 1];
        for e in &resolved {
            offsets[e.u.index() + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let mut fill = offsets.clone();
        let mut out_edges = vec![EdgeIdx(0); resolved.len()];
        // edges are already in id order, so each adjacency list is too
        for (i, e) in resolved.iter().enumerate() {
            let slot = &mut fill[e.u.index()];
            out_edges[*slot as usize] = EdgeIdx(i as u32);
            *slot += 1;
        }

        let index = GridIndex::build(&points);
        Ok(RoadNetwork {
            node_ids,
            points,
            lookup,
            edges: resolved,
            offsets,
            out_edges,
            index,
            area_km2,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodesy::point_at;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn gp(lat: f64, lon: f64) -> GeoPoint {
        GeoPoint::new(lat, lon).unwrap()
    }

    #[test]
    fn smallest_valid_network() {
        let net = RoadNetwork::builder()
            .node("a", gp(0.0, 0.0))
            .node("b", gp(0.0, 0.001))
            .edge("e", "a", "b", 100.0)
            .build()
            .unwrap();
        assert_eq!(net.node_count(), 2);
        assert_eq!(net.edge_count(), 1);
        let a = net.node_index("a").unwrap();
        assert_eq!(net.out_edges(a).len(), 1);
    }

    #[test]
    fn dangling_edge_names_missing_node() {
        let err = RoadNetwork::builder()
            .node("a", gp(0.0, 0.0))
            .edge("e", "a", "x", 10.0)
            .build()
            .unwrap_err();
        assert!(err.to_string().contains("\"x\""), "{err}");
    }

    #[test]
    fn rejects_bad_lengths_and_duplicates() {
        let base = RoadNetwork::builder().node("a", gp(0.0, 0.0)).node("b", gp(0.0, 0.001));
        assert!(base.clone().edge("e", "a", "b", 0.0).build().is_err());
        assert!(base.clone().edge("e", "a", "b", -3.0).build().is_err());
        assert!(base
            .clone()
            .edge("e", "a", "b", 1.0)
            .edge("e", "b", "a", 1.0)
            .build()
            .is_err());
        assert!(base.node("a", gp(1.0, 1.0)).build().is_err());
    }

    #[test]
    fn self_loops_and_parallel_edges_allowed() {
        let net = RoadNetwork::builder()
            .node("a", gp(0.0, 0.0))
            .node("b", gp(0.0, 0.001))
            .edge("1", "a", "b", 111.0)
            .edge("2", "a", "b", 150.0)
            .edge("3", "a", "a", 40.0)
            .build()
            .unwrap();
        assert_eq!(net.out_edges(net.node_index("a").unwrap()).len(), 3);
    }

    #[test]
    fn square_grid_out_degree() {
        let pts = [(0.0, 0.0), (0.0, 0.001), (0.001, 0.0), (0.001, 0.001)];
        let mut b = RoadNetwork::builder();
        for (i, (la, lo)) in pts.iter().enumerate() {
            b.add_node(i.to_string(), gp(*la, *lo));
        }
        let sides = [(0, 1), (0, 2), (1, 3), (2, 3)];
        for (k, (u, v)) in sides.iter().enumerate() {
            b.add_edge(format!("f{k}"), u.to_string(), v.to_string(), 111.2);
            b.add_edge(format!("r{k}"), v.to_string(), u.to_string(), 111.2);
        }
        let net = b.build().unwrap();
        assert_eq!(net.edge_count(), 8);
        for n in net.nodes() {
            assert_eq!(net.out_edges(n).len(), 2);
        }
    }

    #[test]
    fn numeric_ids_order_by_value() {
        assert_eq!(compare_ids("9", "10"), Ordering::Less);
        assert_eq!(compare_ids("10", "a"), Ordering::Less);
        assert_eq!(compare_ids("007", "7"), Ordering::Less);
        assert_eq!(compare_ids("b", "a"), Ordering::Greater);
    }

    #[test]
    fn nearest_on_node_and_beyond_threshold() {
        let net = RoadNetwork::builder()
            .node("a", gp(10.0, 10.0))
            .node("b", gp(10.01, 10.0))
            .build()
            .unwrap();
        assert_eq!(net.nearest_node(gp(10.0, 10.0), 500.0), net.node_index("a"));
        let far = point_at(gp(10.0, 10.0), 600.0, 270.0);
        assert_eq!(net.nearest_node(far, 500.0), None);
    }

    #[test]
    fn nearest_tie_goes_to_smallest_id() {
        let c = gp(0.0, 0.0);
        let net = RoadNetwork::builder()
            .node("z", gp(0.0, 0.001))
            .node("m", gp(0.0, -0.001))
            .build()
            .unwrap();
        assert_eq!(net.nearest_node(c, 500.0), net.node_index("m"));
    }

    #[test]
    fn ring_is_closed_on_both_ends() {
        let c = gp(45.0, 7.0);
        let at_max = point_at(c, 100.0, 30.0);
        let d = haversine_distance(c, at_max);
        let net = RoadNetwork::builder()
            .node("c", c)
            .node("edge", at_max)
            .node("far", point_at(c, 1000.0, 0.0))
            .build()
            .unwrap();
        let ring = net.nodes_in_ring(c, 0.0, d);
        assert_eq!(ring.len(), 2);
        let ring = net.nodes_in_ring(point_at(c, 1000.0, 180.0), 0.0, 100.0);
        assert!(ring.is_empty());
    }

    fn random_network(rng: &mut ChaCha8Rng, n: usize, center: GeoPoint, spread: f64) -> RoadNetwork {
        let mut b = RoadNetwork::builder();
        for i in 0..n {
            let p = point_at(center, rng.random_range(0.0..spread), rng.random_range(0.0..360.0));
            b.add_node(format!("{i}"), p);
        }
        // a few exact duplicates to exercise tie-breaking
        for i in 0..n / 20 {
            let p = b.nodes[i * 7 % n].1;
            b.add_node(format!("dup{i}"), p);
        }
        b.build().unwrap()
    }

    fn linear_nearest(net: &RoadNetwork, p: GeoPoint, max_dist: f64) -> Option<NodeIdx> {
        net.nodes()
            .map(|n| (haversine_distance(p, net.point(n)), n))
            .filter(|(d, _)| *d <= max_dist)
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
            .map(|(_, n)| n)
    }

    fn linear_ring(net: &RoadNetwork, c: GeoPoint, lo: f64, hi: f64) -> Vec<NodeIdx> {
        net.nodes()
            .filter(|&n| {
                let r = haversine_distance(c, net.point(n));
                r >= lo && r <= hi
            })
            .collect()
    }

    #[test]
    fn spatial_queries_match_linear_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let centers = [gp(41.39, 2.17), gp(-33.9, 151.2), gp(0.0, 179.995), gp(89.99, 0.0)];
        let mut checked = 0;
        for c in centers {
            let net = random_network(&mut rng, 600, c, 4_000.0);
            for _ in 0..2_500 {
                let q = point_at(c, rng.random_range(0.0..5_000.0), rng.random_range(0.0..360.0));
                let r = rng.random_range(10.0..800.0);
                assert_eq!(net.nearest_node(q, r), linear_nearest(&net, q, r));
                let lo = rng.random_range(0.0..r);
                assert_eq!(net.nodes_in_ring(q, lo, r), linear_ring(&net, q, lo, r));
                checked += 1;
            }
        }
        assert_eq!(checked, 10_000);
    }

    #[test]
    fn identical_inputs_give_identical_answers() {
        let mut r1 = ChaCha8Rng::seed_from_u64(3);
        let mut r2 = ChaCha8Rng::seed_from_u64(3);
        let c = gp(52.5, 13.4);
        let a = random_network(&mut r1, 300, c, 2_000.0);
        let b = random_network(&mut r2, 300, c, 2_000.0);
        for az in (0..360).step_by(7) {
            let q = point_at(c, 900.0, az as f64);
            assert_eq!(a.nearest_node(q, 300.0), b.nearest_node(q, 300.0));
            assert_eq!(a.nodes_in_ring(q, 50.0, 400.0), b.nodes_in_ring(q, 50.0, 400.0));
        }
    }
}
