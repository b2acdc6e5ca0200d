//! Weighted Jaccard similarity between routes and the stability scores
//! built from it.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::analysis::stats::{median, quantile_linear, sorted};
use crate::error::{Error, Result};
use crate::graph::{EdgeIdx, NodeIdx, RoadNetwork};
use crate::perturbation::PerturbationSet;
use crate::routing::{shortest_path_tree, Path, ShortestPathTree};
use crate::sampling::OdPair;

/// Weighted Jaccard over two ascending, duplicate-free key lists.
///
/// Both sums run over the merged key sequence, which does not depend on
/// argument order, so the result is exactly symmetric. Two empty sets are
/// identical and score 1.
pub fn weighted_jaccard_sorted<K: Ord + Copy>(a: &[K], b: &[K], weight: impl Fn(K) -> f64) -> f64 {
    let (mut i, mut j) = (0, 0);
    let (mut inter, mut union) = (0.0, 0.0);
    while i < a.len() || j < b.len() {
        let take_a = j == b.len() || (i < a.len() && a[i] <= b[j]);
        let take_b = i == a.len() || (j < b.len() && b[j] <= a[i]);
        let k = if take_a { a[i] } else { b[j] };
        let w = weight(k);
        union += w;
        if take_a && take_b {
            inter += w;
        }
        i += take_a as usize;
        j += take_b as usize;
    }
    if union == 0.0 {
        return if a.is_empty() && b.is_empty() { 1.0 } else { 0.0 };
    }
    (inter / union).clamp(0.0, 1.0)
}

fn edge_set(p: &Path) -> Vec<EdgeIdx> {
    let mut s = p.edges.clone();
    s.sort_unstable();
    s.dedup();
    s
}

/// Length-weighted Jaccard similarity of the edge sets of two paths. An
/// edge traversed twice counts once.
pub fn weighted_jaccard(net: &RoadNetwork, a: &Path, b: &Path) -> f64 {
    weighted_jaccard_sorted(&edge_set(a), &edge_set(b), |e| net.edge(e).length_m)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityRecord {
    pub od: OdPair,
    pub original_length_m: f64,
    /// `(sector, similarity)` per perturbed destination reachable from the
    /// origin.
    pub jaccards: Vec<(usize, f64)>,
    pub stability: f64,
    pub deviation_lengths_m: Vec<f64>,
    /// Median deviation length over the original path length.
    pub ratio_r: f64,
}

impl StabilityRecord {
    pub fn n_perturbations(&self) -> usize {
        self.jaccards.len()
    }

    pub fn median_deviation_m(&self) -> f64 {
        median(self.deviation_lengths_m.iter().copied()).unwrap_or(f64::NAN)
    }
}

/// Stability of one OD pair given its filtered perturbation set.
///
/// Absent when the destination is unreachable, when origin and destination
/// coincide, or when no perturbed destination is reachable from the origin.
pub fn od_stability(net: &RoadNetwork, od: &OdPair, pset: &PerturbationSet) -> Option<StabilityRecord> {
    let tree = shortest_path_tree(net, od.origin);
    od_stability_with_tree(net, &tree, od, pset)
}

/// [`od_stability`] reusing a tree rooted at the origin.
pub fn od_stability_with_tree(
    net: &RoadNetwork,
    tree: &ShortestPathTree,
    od: &OdPair,
    pset: &PerturbationSet,
) -> Option<StabilityRecord> {
    debug_assert_eq!(tree.source(), od.origin);
    debug_assert_eq!(pset.original, od.destination);
    let original = tree.path_to(net, od.destination)?;
    if original.total_length_m <= 0.0 {
        return None;
    }
    let base = edge_set(&original);
    let weight = |e: EdgeIdx| net.edge(e).length_m;

    let mut jaccards = Vec::with_capacity(pset.perturbed.len());
    let mut deviations = Vec::with_capacity(pset.perturbed.len());
    for p in &pset.perturbed {
        let Some(dev) = p.deviation_length_m else {
            continue;
        };
        let Some(path) = tree.path_to(net, p.node) else {
            continue;
        };
        jaccards.push((p.sector, weighted_jaccard_sorted(&base, &edge_set(&path), weight)));
        deviations.push(dev);
    }
    if jaccards.is_empty() {
        return None;
    }
    let stability = jaccards.iter().map(|j| j.1).sum::<f64>() / jaccards.len() as f64;
    let ratio_r = median(deviations.iter().copied()).unwrap() / original.total_length_m;
    Some(StabilityRecord {
        od: *od,
        original_length_m: original.total_length_m,
        jaccards,
        stability: stability.clamp(0.0, 1.0),
        deviation_lengths_m: deviations,
        ratio_r,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DestinationStability {
    pub node: NodeIdx,
    pub stability: f64,
    pub n_origins: usize,
}

/// Mean stability per destination, ascending by node index. Records are
/// summed in the order given.
pub fn destination_stability(records: &[StabilityRecord]) -> Vec<DestinationStability> {
    let mut acc: BTreeMap<NodeIdx, (f64, usize)> = BTreeMap::new();
    for r in records {
        let e = acc.entry(r.od.destination).or_insert((0.0, 0));
        e.0 += r.stability;
        e.1 += 1;
    }
    acc.into_iter()
        .map(|(node, (sum, n))| DestinationStability {
            node,
            stability: (sum / n as f64).clamp(0.0, 1.0),
            n_origins: n,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    pub count: usize,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub iqr: f64,
    pub min: f64,
    pub max: f64,
}

impl Distribution {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Result<Distribution> {
        let v = sorted(values);
        if v.is_empty() {
            return Err(Error::Empty("distribution input"));
        }
        let q1 = quantile_linear(&v, 0.25);
        let q3 = quantile_linear(&v, 0.75);
        Ok(Distribution {
            count: v.len(),
            median: quantile_linear(&v, 0.5),
            q1,
            q3,
            iqr: (q3 - q1).max(0.0),
            min: v[0],
            max: v[v.len() - 1],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadiusMedian {
    pub radius_km: f64,
    pub median: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CitySummary {
    pub stability: Distribution,
    pub per_radius: Vec<RadiusMedian>,
    pub destinations: Vec<DestinationStability>,
    pub filter_threshold: f64,
    /// Median over every retained perturbation's deviation length.
    pub median_deviation_m: f64,
    /// Median of the per-record median deviation lengths.
    pub median_record_deviation_m: f64,
    /// Median of the per-record ratio R.
    pub median_ratio_r: f64,
}

pub fn city_summary(records: &[StabilityRecord], filter_threshold: f64) -> Result<CitySummary> {
    if records.is_empty() {
        return Err(Error::Empty("stability records"));
    }
    let mut by_radius: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
    for r in records {
        // radii are non-negative, so bit patterns order like the values
        by_radius.entry(r.od.radius_km.to_bits()).or_default().push(r.stability);
    }
    let per_radius = by_radius
        .into_iter()
        .map(|(bits, v)| RadiusMedian {
            radius_km: f64::from_bits(bits),
            median: median(v.iter().copied()).unwrap(),
            count: v.len(),
        })
        .collect();
    Ok(CitySummary {
        stability: Distribution::of(records.iter().map(|r| r.stability))?,
        per_radius,
        destinations: destination_stability(records),
        filter_threshold,
        median_deviation_m: median(records.iter().flat_map(|r| r.deviation_lengths_m.iter().copied())).unwrap(),
        median_record_deviation_m: median(records.iter().map(|r| r.median_deviation_m())).unwrap(),
        median_ratio_r: median(records.iter().map(|r| r.ratio_r)).unwrap(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodesy::GeoPoint;
    use crate::perturbation::PerturbedDestination;
    use proptest::prelude::*;
    use std::collections::HashMap;

    fn table_jaccard(a: &[(u32, f64)], b: &[(u32, f64)]) -> f64 {
        let w: HashMap<u32, f64> = a.iter().chain(b).copied().collect();
        let mut ka: Vec<u32> = a.iter().map(|x| x.0).collect();
        let mut kb: Vec<u32> = b.iter().map(|x| x.0).collect();
        ka.sort();
        ka.dedup();
        kb.sort();
        kb.dedup();
        weighted_jaccard_sorted(&ka, &kb, |k| w[&k])
    }

    #[test]
    fn hand_cases() {
        let a = [(1, 100.0), (2, 50.0)];
        let b = [(2, 50.0), (3, 25.0)];
        assert!((table_jaccard(&a, &b) - 50.0 / 175.0).abs() < 1e-12);
        assert_eq!(table_jaccard(&a, &a), 1.0);
        assert_eq!(table_jaccard(&a, &[(7, 3.0)]), 0.0);
        assert_eq!(table_jaccard(&[], &[]), 1.0);
        assert_eq!(table_jaccard(&a, &[]), 0.0);
    }

    fn weights_strategy() -> impl Strategy<Value = (Vec<f64>, Vec<u32>, Vec<u32>)> {
        prop::collection::vec(0.5..1000.0f64, 30).prop_flat_map(|w| {
            let keys = prop::collection::btree_set(0u32..30, 0..15).prop_map(|s| s.into_iter().collect::<Vec<u32>>());
            (Just(w), keys.clone(), keys)
        })
    }

    proptest! {
        #[test]
        fn symmetric_reflexive_bounded((w, a, b) in weights_strategy()) {
            let f = |k: u32| w[k as usize];
            let ab = weighted_jaccard_sorted(&a, &b, f);
            prop_assert_eq!(ab, weighted_jaccard_sorted(&b, &a, f));
            prop_assert_eq!(weighted_jaccard_sorted(&a, &a, f), 1.0);
            prop_assert!((0.0..=1.0).contains(&ab));
        }

        #[test]
        fn monotone_in_shared_and_private_edges((w, a, b) in weights_strategy(), extra in 30u32..40, ew in 0.5..1000.0f64) {
            let f = |k: u32| if k < 30 { w[k as usize] } else { ew };
            let base = weighted_jaccard_sorted(&a, &b, f);
            let mut a2 = a.clone();
            a2.push(extra);
            let mut b2 = b.clone();
            b2.push(extra);
            prop_assert!(weighted_jaccard_sorted(&a2, &b2, f) >= base - 1e-12);
            prop_assert!(weighted_jaccard_sorted(&a2, &b, f) <= base + 1e-12);
        }
    }

    fn od(o: u32, d: u32, r: f64) -> OdPair {
        OdPair {
            origin: NodeIdx(o),
            destination: NodeIdx(d),
            radius_km: r,
            origin_azimuth: 0.0,
            dest_azimuth: 0.0,
        }
    }

    fn record(o: u32, d: u32, r: f64, s: f64) -> StabilityRecord {
        StabilityRecord {
            od: od(o, d, r),
            original_length_m: 1000.0,
            jaccards: vec![(0, s)],
            stability: s,
            deviation_lengths_m: vec![50.0],
            ratio_r: 0.05,
        }
    }

    /// a -> b -> c -> d along a line plus a spur b -> x
    fn spur() -> RoadNetwork {
        let p = |lon: f64, lat: f64| GeoPoint::new(lat, lon).unwrap();
        RoadNetwork::builder()
            .node("a", p(0.0, 0.0))
            .node("b", p(0.001, 0.0))
            .node("c", p(0.002, 0.0))
            .node("d", p(0.003, 0.0))
            .node("x", p(0.001, 0.001))
            .node("island", p(0.01, 0.01))
            .edge("1", "a", "b", 100.0)
            .edge("2", "b", "c", 100.0)
            .edge("3", "c", "d", 100.0)
            .edge("4", "b", "x", 100.0)
            .edge("5", "d", "c", 100.0)
            .edge("6", "c", "b", 100.0)
            .build()
            .unwrap()
    }

    #[test]
    fn od_stability_mean_and_ratio() {
        let net = spur();
        let n = |id: &str| net.require_node(id).unwrap();
        let pd = |sector, node, len: Option<f64>| PerturbedDestination {
            sector,
            node,
            deviation_length_m: len,
            deviation_ratio: len.map(|l| l / 100.0),
        };
        let pset = PerturbationSet {
            original: n("d"),
            perturbed: vec![
                pd(0, n("c"), Some(100.0)),
                pd(1, n("x"), Some(300.0)),
                pd(2, n("island"), None),
            ],
        };
        let rec = od_stability(&net, &od(n("a").0, n("d").0, 1.0), &pset).unwrap();
        // a-b-c shares 200 of 300 m; a-b-x shares 100 of 400 m
        assert_eq!(rec.jaccards.len(), 2);
        assert!((rec.jaccards[0].1 - 2.0 / 3.0).abs() < 1e-12);
        assert!((rec.jaccards[1].1 - 0.25).abs() < 1e-12);
        assert!((rec.stability - (2.0 / 3.0 + 0.25) / 2.0).abs() < 1e-12);
        assert!((rec.ratio_r - 200.0 / 300.0).abs() < 1e-12);
        assert_eq!(rec.median_deviation_m(), 200.0);

        let unreachable = od_stability(
            &net,
            &od(n("d").0, n("a").0, 1.0),
            &PerturbationSet {
                original: n("a"),
                perturbed: vec![pd(0, n("b"), Some(100.0))],
            },
        );
        assert!(unreachable.is_none());
        let no_perturbations = PerturbationSet {
            original: n("d"),
            perturbed: vec![],
        };
        assert!(od_stability(&net, &od(n("a").0, n("d").0, 1.0), &no_perturbations).is_none());
    }

    #[test]
    fn identical_perturbed_paths_score_one() {
        let net = spur();
        let n = |id: &str| net.require_node(id).unwrap();
        // a perturbed destination past d shares all of p(a, c)
        let pset = PerturbationSet {
            original: n("c"),
            perturbed: vec![PerturbedDestination {
                sector: 3,
                node: n("c"),
                deviation_length_m: Some(0.0),
                deviation_ratio: Some(0.0),
            }],
        };
        let rec = od_stability(&net, &od(n("a").0, n("c").0, 1.0), &pset).unwrap();
        assert_eq!(rec.stability, 1.0);
    }

    #[test]
    fn destination_means() {
        let recs = [
            record(1, 9, 1.0, 1.0),
            record(2, 9, 1.0, 0.8),
            record(3, 9, 1.0, 0.6),
            record(1, 4, 1.0, 0.9),
        ];
        let ds = destination_stability(&recs);
        assert_eq!(ds.len(), 2);
        assert_eq!((ds[0].node, ds[0].stability, ds[0].n_origins), (NodeIdx(4), 0.9, 1));
        assert!((ds[1].stability - 0.8).abs() < 1e-12);
        assert_eq!(ds[1].n_origins, 3);
    }

    #[test]
    fn summary_statistics() {
        let recs: Vec<StabilityRecord> = (1..=10)
            .map(|i| record(i, 100 + i, if i <= 5 { 1.0 } else { 2.0 }, i as f64 / 10.0))
            .collect();
        let s = city_summary(&recs, 1.3).unwrap();
        assert!((s.stability.median - 0.55).abs() < 1e-12);
        assert!((s.stability.q1 - 0.325).abs() < 1e-12);
        assert!((s.stability.q3 - 0.775).abs() < 1e-12);
        assert!((s.stability.iqr - 0.45).abs() < 1e-12);
        assert_eq!((s.stability.min, s.stability.max), (0.1, 1.0));
        assert_eq!(s.per_radius.len(), 2);
        assert!((s.per_radius[0].median - 0.3).abs() < 1e-12);
        assert!((s.per_radius[1].median - 0.8).abs() < 1e-12);
        assert_eq!(s.filter_threshold, 1.3);

        let flat: Vec<StabilityRecord> = (0..4).map(|i| record(i, 50, 1.0, 1.0)).collect();
        let s = city_summary(&flat, 1.0).unwrap();
        assert_eq!((s.stability.median, s.stability.iqr), (1.0, 0.0));
        assert!(city_summary(&[], 1.0).is_err());
    }
}
