//! Street-level structure indicators: length statistics, circuity,
//! orientation entropy and densities.
//!
//! All of these work on [`undirected_streets`], so a two-way street counts
//! once.

use serde::{Deserialize, Serialize};

use crate::analysis::stats::{mean, std_population};
use crate::error::{Error, Result};
use crate::geodesy::{haversine_distance, initial_bearing};
use crate::graph::{undirected_streets, RoadNetwork, Street};

pub const DEFAULT_BEARING_BINS: usize = 36;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LengthStats {
    pub mean_m: f64,
    pub std_m: f64,
    pub count: usize,
}

/// Mean and population standard deviation of street lengths.
pub fn street_length_stats(net: &RoadNetwork) -> Result<LengthStats> {
    length_stats(&undirected_streets(net))
}

fn length_stats(streets: &[Street]) -> Result<LengthStats> {
    let lengths: Vec<f64> = streets.iter().map(|s| s.length_m).collect();
    let mean_m = mean(&lengths).ok_or(Error::Empty("street network"))?;
    Ok(LengthStats {
        mean_m,
        std_m: std_population(&lengths).unwrap(),
        count: lengths.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Circuity {
    pub mean: f64,
    pub streets: usize,
    /// Self-loops and streets whose endpoints coincide.
    pub skipped: usize,
}

/// Mean ratio of street length to the straight-line distance between its
/// endpoints.
pub fn average_circuity(net: &RoadNetwork) -> Result<Circuity> {
    circuity(net, &undirected_streets(net))
}

fn circuity(net: &RoadNetwork, streets: &[Street]) -> Result<Circuity> {
    let mut ratios = Vec::with_capacity(streets.len());
    for s in streets {
        let d = haversine_distance(net.point(s.a), net.point(s.b));
        if !s.is_self_loop() && d > 0.0 {
            ratios.push(s.length_m / d);
        }
    }
    let m = mean(&ratios).ok_or(Error::Empty("streets with distinct endpoints"))?;
    Ok(Circuity {
        mean: m,
        streets: ratios.len(),
        skipped: streets.len() - ratios.len(),
    })
}

/// Bin of `bearing` among `bins` equal sectors, the first centered on north.
pub fn bearing_bin(bearing: f64, bins: usize) -> usize {
    let w = 360.0 / bins as f64;
    (((bearing + w / 2.0).rem_euclid(360.0) / w).floor() as usize).min(bins - 1)
}

/// Histogram of street bearings; each street adds its bearing and the
/// reverse one. With `length_weighted` each entry weighs the street length.
pub fn bearing_histogram(net: &RoadNetwork, bins: usize, length_weighted: bool) -> Result<Vec<f64>> {
    bearing_histogram_of(net, &undirected_streets(net), bins, length_weighted)
}

fn bearing_histogram_of(net: &RoadNetwork, streets: &[Street], bins: usize, length_weighted: bool) -> Result<Vec<f64>> {
    if bins == 0 {
        return Err(Error::Config("bearing bins must be positive".into()));
    }
    let mut hist = vec![0.0; bins];
    let mut any = false;
    for s in streets {
        let Ok(b) = initial_bearing(net.point(s.a), net.point(s.b)) else {
            continue;
        };
        let Ok(r) = initial_bearing(net.point(s.b), net.point(s.a)) else {
            continue;
        };
        let w = if length_weighted { s.length_m } else { 1.0 };
        hist[bearing_bin(b, bins)] += w;
        hist[bearing_bin(r, bins)] += w;
        any = true;
    }
    if !any {
        return Err(Error::Empty("streets with a defined bearing"));
    }
    Ok(hist)
}

/// Shannon entropy (nats) of a histogram, over its nonzero bins.
pub fn entropy(hist: &[f64]) -> f64 {
    let total: f64 = hist.iter().sum();
    -hist
        .iter()
        .filter(|&&c| c > 0.0)
        .map(|&c| {
            let p = c / total;
            p * p.ln()
        })
        .sum::<f64>()
}

/// Orientation entropy of the street network.
pub fn bearing_entropy(net: &RoadNetwork, bins: usize, length_weighted: bool) -> Result<f64> {
    Ok(entropy(&bearing_histogram(net, bins, length_weighted)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Densities {
    pub intersections: usize,
    pub intersection_density_per_km2: f64,
    pub road_density_km_per_km2: f64,
    pub total_road_length_km: f64,
}

/// Intersections are nodes touching at least three streets (self-loops
/// excluded).
pub fn density_metrics(net: &RoadNetwork, area_km2: Option<f64>) -> Result<Densities> {
    densities(net, &undirected_streets(net), area_km2)
}

fn densities(net: &RoadNetwork, streets: &[Street], area_km2: Option<f64>) -> Result<Densities> {
    let area = match area_km2 {
        Some(a) if a > 0.0 && a.is_finite() => a,
        Some(a) => return Err(Error::Config(format!("area_km2 must be positive, got {a}"))),
        None => return Err(Error::Config("area_km2 is required for density metrics".into())),
    };
    let mut degree = vec![0usize; net.node_count()];
    for s in streets.iter().filter(|s| !s.is_self_loop()) {
        degree[s.a.index()] += 1;
        degree[s.b.index()] += 1;
    }
    let intersections = degree.iter().filter(|&&d| d >= 3).count();
    let total_km = streets.iter().map(|s| s.length_m).sum::<f64>() / 1000.0;
    Ok(Densities {
        intersections,
        intersection_density_per_km2: intersections as f64 / area,
        road_density_km_per_km2: total_km / area,
        total_road_length_km: total_km,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CityMetrics {
    pub avg_street_length_m: f64,
    pub std_street_length_m: f64,
    pub avg_circuity: f64,
    pub bearing_entropy: f64,
    pub intersection_density: f64,
    pub road_density: f64,
    pub total_road_length_km: f64,
}

/// Every metric at once; the area comes from the network.
pub fn city_metrics(net: &RoadNetwork, bins: usize, length_weighted: bool) -> Result<CityMetrics> {
    let streets = undirected_streets(net);
    let lengths = length_stats(&streets)?;
    let circ = circuity(net, &streets)?;
    let h = entropy(&bearing_histogram_of(net, &streets, bins, length_weighted)?);
    let dens = densities(net, &streets, net.area_km2())?;
    Ok(CityMetrics {
        avg_street_length_m: lengths.mean_m,
        std_street_length_m: lengths.std_m,
        avg_circuity: circ.mean,
        bearing_entropy: h,
        intersection_density: dens.intersection_density_per_km2,
        road_density: dens.road_density_km_per_km2,
        total_road_length_km: dens.total_road_length_km,
    })
}
