//! Perturbed destinations: ring/sector selection around an original
//! destination, deviation paths back to it, and abnormal-detour filtering.

use serde::{Deserialize, Serialize};

use crate::analysis::stats::percentile_nearest;
use crate::error::{Error, Result};
use crate::geodesy::{haversine_distance, initial_bearing, point_at, GeoPoint};
use crate::graph::{NodeIdx, RoadNetwork};
use crate::routing::distances_to;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationConfig {
    pub delta_min_m: f64,
    pub delta_max_m: f64,
    pub k_sectors: usize,
    pub filter_percentile: f64,
}

impl Default for PerturbationConfig {
    fn default() -> Self {
        PerturbationConfig {
            delta_min_m: 0.0,
            delta_max_m: 100.0,
            k_sectors: 8,
            filter_percentile: 0.95,
        }
    }
}

impl PerturbationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta_min_m >= 0.0 && self.delta_min_m < self.delta_max_m) {
            return Err(Error::Config("need 0 <= delta_min_m < delta_max_m".into()));
        }
        if self.k_sectors == 0 {
            return Err(Error::Config("k_sectors must be at least 1".into()));
        }
        if !(self.filter_percentile > 0.0 && self.filter_percentile <= 1.0) {
            return Err(Error::Config("filter_percentile must be in (0, 1]".into()));
        }
        Ok(())
    }

    fn sector_width(&self) -> f64 {
        360.0 / self.k_sectors as f64
    }

    /// Point on the sector bisector at the middle of the ring.
    pub fn sector_center(&self, d: GeoPoint, sector: usize) -> GeoPoint {
        let radius = (self.delta_min_m + self.delta_max_m) / 2.0;
        let azimuth = (sector as f64 + 0.5) * self.sector_width();
        point_at(d, radius, azimuth)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbedDestination {
    pub sector: usize,
    pub node: NodeIdx,
    /// Length of the shortest path from the original destination; absent
    /// when unreachable.
    pub deviation_length_m: Option<f64>,
    pub deviation_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSet {
    pub original: NodeIdx,
    pub perturbed: Vec<PerturbedDestination>,
}

/// Sector index of `candidate` around `d`; sector 0 starts at north and
/// sectors are half-open `[i * 360/k, (i + 1) * 360/k)`.
pub fn sector_of(d: GeoPoint, candidate: GeoPoint, k: usize) -> Result<usize> {
    let bearing = initial_bearing(d, candidate)?;
    Ok(sector_index(bearing, k))
}

fn sector_index(bearing: f64, k: usize) -> usize {
    ((bearing / (360.0 / k as f64)).floor() as usize).min(k - 1)
}

/// Representative node per sector: the sole candidate, or the candidate
/// nearest the sector center (ties to the smallest node id). Candidates
/// sharing the destination's exact coordinates have no bearing and are
/// skipped.
pub fn select_perturbed_nodes(net: &RoadNetwork, d: NodeIdx, cfg: &PerturbationConfig) -> Vec<(usize, NodeIdx)> {
    let origin = net.point(d);
    let mut best: Vec<Option<(f64, NodeIdx)>> = vec![None; cfg.k_sectors];
    let mut centers: Vec<Option<GeoPoint>> = vec![None; cfg.k_sectors];

    for n in net.nodes_in_ring(origin, cfg.delta_min_m, cfg.delta_max_m) {
        if n == d {
            continue;
        }
        let Ok(bearing) = initial_bearing(origin, net.point(n)) else {
            continue;
        };
        let s = sector_index(bearing, cfg.k_sectors);
        let c = *centers[s].get_or_insert_with(|| cfg.sector_center(origin, s));
        let dist = haversine_distance(c, net.point(n));
        let better = match best[s] {
            None => true,
            Some((bd, bn)) => dist < bd || (dist == bd && n < bn),
        };
        if better {
            best[s] = Some((dist, n));
        }
    }

    best.into_iter()
        .enumerate()
        .filter_map(|(s, b)| b.map(|(_, n)| (s, n)))
        .collect()
}

/// Shortest-path length from `d` to `dx` and its ratio to `delta_max_m`.
/// Both are absent when `dx` cannot be reached.
pub fn deviation_ratio(
    net: &RoadNetwork,
    d: NodeIdx,
    dx: NodeIdx,
    cfg: &PerturbationConfig,
) -> (Option<f64>, Option<f64>) {
    let len = distances_to(net, d, &[dx])[0];
    (len, len.map(|l| l / cfg.delta_max_m))
}

/// Perturbed destinations of `d` with their deviation lengths.
pub fn select_perturbed_destinations(net: &RoadNetwork, d: NodeIdx, cfg: &PerturbationConfig) -> PerturbationSet {
    let chosen = select_perturbed_nodes(net, d, cfg);
    let targets: Vec<NodeIdx> = chosen.iter().map(|&(_, n)| n).collect();
    let lengths = if targets.is_empty() {
        Vec::new()
    } else {
        distances_to(net, d, &targets)
    };
    let perturbed = chosen
        .into_iter()
        .zip(lengths)
        .map(|((sector, node), len)| PerturbedDestination {
            sector,
            node,
            deviation_length_m: len,
            deviation_ratio: len.map(|l| l / cfg.delta_max_m),
        })
        .collect();
    PerturbationSet { original: d, perturbed }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterOutcome {
    pub threshold_ratio: f64,
    pub entries: usize,
    pub removed_abnormal: usize,
    pub removed_unreachable: usize,
}

impl FilterOutcome {
    pub fn retained(&self) -> usize {
        self.entries - self.removed_abnormal - self.removed_unreachable
    }
}

/// Drops perturbed destinations whose deviation ratio exceeds the
/// empirical `percentile` (nearest rank) of all finite ratios in `sets`,
/// plus every unreachable one.
pub fn filter_abnormal(sets: &[PerturbationSet], percentile: f64) -> Result<(Vec<PerturbationSet>, FilterOutcome)> {
    let mut ratios: Vec<f64> = sets
        .iter()
        .flat_map(|s| s.perturbed.iter().filter_map(|p| p.deviation_ratio))
        .filter(|r| r.is_finite())
        .collect();
    if ratios.is_empty() {
        return Err(Error::NoValidPerturbations);
    }
    ratios.sort_by(f64::total_cmp);
    let threshold = percentile_nearest(&ratios, percentile);
    Ok(filter_with_threshold(sets, threshold))
}

/// Same as [`filter_abnormal`] with a fixed ratio threshold.
pub fn filter_with_threshold(sets: &[PerturbationSet], threshold: f64) -> (Vec<PerturbationSet>, FilterOutcome) {
    let mut outcome = FilterOutcome {
        threshold_ratio: threshold,
        entries: 0,
        removed_abnormal: 0,
        removed_unreachable: 0,
    };
    let filtered = sets
        .iter()
        .map(|s| {
            let perturbed = s
                .perturbed
                .iter()
                .filter(|p| {
                    outcome.entries += 1;
                    match p.deviation_ratio {
                        Some(r) if r.is_finite() && r <= threshold => true,
                        Some(r) if r.is_finite() => {
                            outcome.removed_abnormal += 1;
                            false
                        }
                        _ => {
                            outcome.removed_unreachable += 1;
                            false
                        }
                    }
                })
                .cloned()
                .collect();
            PerturbationSet {
                original: s.original,
                perturbed,
            }
        })
        .collect();
    (filtered, outcome)
}
