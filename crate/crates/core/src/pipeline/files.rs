//! CSV and JSON intermediates exchanged between stages.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geodesy::GeoPoint;
use crate::graph::{NodeIdx, RoadNetwork};
use crate::map::MapPoint;
use crate::metrics::CityMetrics;
use crate::perturbation::{PerturbationSet, PerturbedDestination};
use crate::sampling::OdPair;
use crate::stability::{CitySummary, Distribution, RadiusMedian, StabilityRecord};

pub const NETWORK_NODES: &str = "network_nodes.csv";
pub const NETWORK_EDGES: &str = "network_edges.csv";
pub const OD_PAIRS: &str = "od_pairs.csv";
pub const PERTURBATIONS: &str = "perturbations.csv";
pub const FILTER: &str = "filter.json";
pub const OD_STABILITY: &str = "od_stability.csv";
pub const DESTINATION_STABILITY: &str = "destination_stability.csv";
pub const CITY_SUMMARY: &str = "city_summary.json";
pub const CITY_METRICS: &str = "city_metrics.csv";
pub const FIT: &str = "fit.csv";
pub const CORRELATIONS: &str = "correlations.csv";
pub const CLUSTERS: &str = "clusters.csv";
pub const ELBOW: &str = "elbow.csv";
pub const ANALYSIS: &str = "analysis.json";
pub const STABILITY_MAP: &str = "stability_map.geojson";
pub const MANIFEST: &str = "manifest.json";

/// City-level stability summary as stored on disk. Per-destination values
/// live in their own CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CitySummaryFile {
    pub city: String,
    pub od_pairs: usize,
    pub records: usize,
    pub destinations: usize,
    pub stability: Distribution,
    pub per_radius: Vec<RadiusMedian>,
    pub filter_threshold: f64,
    /// Median over all retained perturbations.
    pub median_deviation_m: f64,
    /// Median of per-record medians.
    pub median_record_deviation_m: f64,
    pub median_ratio_r: f64,
}

impl CitySummaryFile {
    pub fn new(city: &str, od_pairs: usize, s: &CitySummary) -> Self {
        CitySummaryFile {
            city: city.to_string(),
            od_pairs,
            records: s.stability.count,
            destinations: s.destinations.len(),
            stability: s.stability,
            per_radius: s.per_radius.clone(),
            filter_threshold: s.filter_threshold,
            median_deviation_m: s.median_deviation_m,
            median_record_deviation_m: s.median_record_deviation_m,
            median_ratio_r: s.median_ratio_r,
        }
    }
}

/// Shortest representation that parses back to the same value.
pub fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

pub(crate) fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

pub(crate) fn csv_writer(path: &Path) -> Result<csv::Writer<File>> {
    csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Validation(format!("{}: {other:?}", path.display())),
    })
}

/// Rows of a CSV file as header-indexed maps, with their line numbers.
pub(crate) fn read_rows(path: &Path, required: &[&str]) -> Result<Vec<(u64, BTreeMap<String, String>)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let headers = rdr.headers()?.clone();
    for c in required {
        if !headers.iter().any(|h| h == *c) {
            return Err(Error::Parse {
                line: 1,
                message: format!("{}: missing column {c:?}", path.display()),
            });
        }
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: format!("{}: {e}", path.display()),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let row = headers
            .iter()
            .zip(rec.iter())
            .map(|(h, v)| (h.to_string(), v.to_string()))
            .collect();
        out.push((line, row));
    }
    Ok(out)
}

pub(crate) fn field<'a>(row: &'a BTreeMap<String, String>, key: &str) -> &'a str {
    row.get(key).map(String::as_str).unwrap_or("")
}

pub(crate) fn num(row: &BTreeMap<String, String>, key: &str, line: u64) -> Result<f64> {
    let v = field(row, key);
    v.parse().map_err(|_| Error::Parse {
        line,
        message: format!("column {key}: not a number: {v:?}"),
    })
}

fn opt_num(row: &BTreeMap<String, String>, key: &str, line: u64) -> Result<Option<f64>> {
    if field(row, key).is_empty() {
        Ok(None)
    } else {
        num(row, key, line).map(Some)
    }
}

fn node(net: &RoadNetwork, row: &BTreeMap<String, String>, key: &str, line: u64) -> Result<NodeIdx> {
    net.require_node(field(row, key)).map_err(|e| Error::Parse {
        line,
        message: e.to_string(),
    })
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_reader(std::io::BufReader::new(f))?)
}

pub fn write_od_pairs(net: &RoadNetwork, pairs: &[OdPair], path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["radius_km", "origin", "destination", "origin_azimuth", "dest_azimuth"])?;
    for p in pairs {
        w.write_record([
            fmt_f64(p.radius_km),
            net.node_id(p.origin).to_string(),
            net.node_id(p.destination).to_string(),
            fmt_f64(p.origin_azimuth),
            fmt_f64(p.dest_azimuth),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads OD pairs. Only `origin` and `destination` are required; missing
/// radius or azimuth columns read as 0.
pub fn read_od_pairs(net: &RoadNetwork, path: &Path) -> Result<Vec<OdPair>> {
    let rows = read_rows(path, &["origin", "destination"])?;
    rows.iter()
        .map(|(line, row)| {
            let or_zero = |k: &str| opt_num(row, k, *line).map(|v| v.unwrap_or(0.0));
            Ok(OdPair {
                origin: node(net, row, "origin", *line)?,
                destination: node(net, row, "destination", *line)?,
                radius_km: or_zero("radius_km")?,
                origin_azimuth: or_zero("origin_azimuth")?,
                dest_azimuth: or_zero("dest_azimuth")?,
            })
        })
        .collect()
}

pub(crate) fn is_retained(p: &PerturbedDestination, threshold: f64) -> bool {
    p.deviation_ratio.is_some_and(|r| r.is_finite() && r <= threshold)
}

/// One row per perturbed destination, flagged with whether it survived
/// filtering at `threshold`.
pub fn write_perturbations(net: &RoadNetwork, sets: &[PerturbationSet], threshold: f64, path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record([
        "destination",
        "sector",
        "node_id",
        "deviation_length_m",
        "deviation_ratio",
        "retained",
    ])?;
    for s in sets {
        for p in &s.perturbed {
            w.write_record([
                net.node_id(s.original).to_string(),
                p.sector.to_string(),
                net.node_id(p.node).to_string(),
                fmt_opt(p.deviation_length_m),
                fmt_opt(p.deviation_ratio),
                is_retained(p, threshold).to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Retained perturbations grouped by destination, ascending.
pub fn read_retained_perturbations(net: &RoadNetwork, path: &Path) -> Result<Vec<PerturbationSet>> {
    let rows = read_rows(
        path,
        &[
            "destination",
            "sector",
            "node_id",
            "deviation_length_m",
            "deviation_ratio",
            "retained",
        ],
    )?;
    let mut by_dest: BTreeMap<NodeIdx, Vec<PerturbedDestination>> = BTreeMap::new();
    for (line, row) in &rows {
        let d = node(net, row, "destination", *line)?;
        let entry = by_dest.entry(d).or_default();
        if field(row, "retained") != "true" {
            continue;
        }
        entry.push(PerturbedDestination {
            sector: field(row, "sector").parse().map_err(|_| Error::Parse {
                line: *line,
                message: "column sector: not an integer".into(),
            })?,
            node: node(net, row, "node_id", *line)?,
            deviation_length_m: opt_num(row, "deviation_length_m", *line)?,
            deviation_ratio: opt_num(row, "deviation_ratio", *line)?,
        });
    }
    Ok(by_dest
        .into_iter()
        .map(|(original, perturbed)| PerturbationSet { original, perturbed })
        .collect())
}

pub fn write_od_stability(net: &RoadNetwork, records: &[StabilityRecord], path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record([
        "origin",
        "destination",
        "radius_km",
        "stability",
        "n_perturbations",
        "original_length_m",
        "median_deviation_m",
        "ratio_R",
    ])?;
    for r in records {
        w.write_record([
            net.node_id(r.od.origin).to_string(),
            net.node_id(r.od.destination).to_string(),
            fmt_f64(r.od.radius_km),
            fmt_f64(r.stability),
            r.n_perturbations().to_string(),
            fmt_f64(r.original_length_m),
            fmt_f64(r.median_deviation_m()),
            fmt_f64(r.ratio_r),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// The per-OD columns later stages need, without the network.
#[derive(Debug, Clone, PartialEq)]
pub struct OdStabilityRow {
    pub origin: String,
    pub destination: String,
    pub radius_km: f64,
    pub stability: f64,
    pub median_deviation_m: f64,
    pub ratio_r: f64,
}

pub fn read_od_stability(path: &Path) -> Result<Vec<OdStabilityRow>> {
    let rows = read_rows(
        path,
        &[
            "origin",
            "destination",
            "radius_km",
            "stability",
            "median_deviation_m",
            "ratio_R",
        ],
    )?;
    rows.iter()
        .map(|(line, row)| {
            Ok(OdStabilityRow {
                origin: field(row, "origin").to_string(),
                destination: field(row, "destination").to_string(),
                radius_km: num(row, "radius_km", *line)?,
                stability: num(row, "stability", *line)?,
                median_deviation_m: num(row, "median_deviation_m", *line)?,
                ratio_r: num(row, "ratio_R", *line)?,
            })
        })
        .collect()
}

pub fn write_destination_stability(points: &[MapPoint], path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["node_id", "lat", "lon", "stability", "n_origins"])?;
    for p in points {
        w.write_record([
            p.node_id.clone(),
            fmt_f64(p.point.lat),
            fmt_f64(p.point.lon),
            fmt_f64(p.stability),
            p.n_origins.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_destination_stability(path: &Path) -> Result<Vec<MapPoint>> {
    let rows = read_rows(path, &["node_id", "lat", "lon", "stability", "n_origins"])?;
    rows.iter()
        .map(|(line, row)| {
            Ok(MapPoint {
                node_id: field(row, "node_id").to_string(),
                point: GeoPoint::new(num(row, "lat", *line)?, num(row, "lon", *line)?)?,
                stability: num(row, "stability", *line)?,
                n_origins: num(row, "n_origins", *line)? as usize,
            })
        })
        .collect()
}

const METRIC_COLUMNS: [&str; 8] = [
    "city",
    "avg_street_length_m",
    "std_street_length_m",
    "avg_circuity",
    "bearing_entropy",
    "intersection_density",
    "road_density",
    "total_road_length_km",
];

pub fn write_city_metrics(city: &str, m: &CityMetrics, path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(METRIC_COLUMNS)?;
    w.write_record([
        city.to_string(),
        fmt_f64(m.avg_street_length_m),
        fmt_f64(m.std_street_length_m),
        fmt_f64(m.avg_circuity),
        fmt_f64(m.bearing_entropy),
        fmt_f64(m.intersection_density),
        fmt_f64(m.road_density),
        fmt_f64(m.total_road_length_km),
    ])?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_city_metrics(path: &Path) -> Result<Vec<(String, CityMetrics)>> {
    let rows = read_rows(path, &METRIC_COLUMNS)?;
    rows.iter()
        .map(|(line, row)| {
            let n = |k: &str| num(row, k, *line);
            Ok((
                field(row, "city").to_string(),
                CityMetrics {
                    avg_street_length_m: n("avg_street_length_m")?,
                    std_street_length_m: n("std_street_length_m")?,
                    avg_circuity: n("avg_circuity")?,
                    bearing_entropy: n("bearing_entropy")?,
                    intersection_density: n("intersection_density")?,
                    road_density: n("road_density")?,
                    total_road_length_km: n("total_road_length_km")?,
                },
            ))
        })
        .collect()
}
