//! Cross-run analysis: stability-versus-radius fit, correlations and city
//! clustering, read back from finished run directories.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::files::{self, fmt_f64, CitySummaryFile, OdStabilityRow};
use crate::analysis::{elbow_curve, fit_exponential, kmeans, median, pearson, zscore, ExpFit};
use crate::error::{Error, Result};
use crate::metrics::CityMetrics;

/// Clustering features, in this order.
pub const CLUSTER_FEATURES: [&str; 6] = [
    "median_deviation_m",
    "median_ratio_r",
    "avg_street_length_m",
    "std_street_length_m",
    "avg_circuity",
    "bearing_entropy",
];

#[derive(Debug, Clone)]
pub struct RunData {
    pub city: String,
    pub records: Vec<OdStabilityRow>,
    pub summary: CitySummaryFile,
    pub metrics: CityMetrics,
}

pub fn load_run(dir: &Path) -> Result<RunData> {
    let records = files::read_od_stability(&dir.join(files::OD_STABILITY))?;
    let summary: CitySummaryFile = files::read_json(&dir.join(files::CITY_SUMMARY))?;
    let mut metrics = files::read_city_metrics(&dir.join(files::CITY_METRICS))?;
    if metrics.len() != 1 {
        return Err(Error::Validation(format!(
            "{}: expected one metrics row, found {}",
            dir.display(),
            metrics.len()
        )));
    }
    let (city, metrics) = metrics.remove(0);
    Ok(RunData {
        city,
        records,
        summary,
        metrics,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Correlation {
    pub level: &'static str,
    pub x: &'static str,
    pub y: &'static str,
    pub n: usize,
    pub r: Option<f64>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterProfile {
    pub cluster_id: usize,
    pub cities: usize,
    pub mean_median_stability: f64,
    pub mean_deviation_m: f64,
    pub mean_ratio_r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterReport {
    pub k: usize,
    pub feature_names: Vec<&'static str>,
    pub assignments: Vec<(String, usize)>,
    pub centroids: Vec<Vec<f64>>,
    pub wcss: f64,
    pub profiles: Vec<ClusterProfile>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub cities: Vec<String>,
    /// `(radius_km, median stability)` over all runs' records.
    pub radius_medians: Vec<(f64, f64)>,
    pub fit: Option<ExpFit>,
    pub fit_note: Option<String>,
    pub correlations: Vec<Correlation>,
    pub clusters: Option<ClusterReport>,
    pub elbow: Vec<(usize, f64)>,
    pub cluster_note: Option<String>,
}

#[derive(Debug, Clone, Copy)]
pub struct AnalysisParams {
    pub k: usize,
    pub restarts: usize,
    pub elbow_k_max: usize,
    pub seed: u64,
}

type CityColumn = (&'static str, fn(&RunData) -> f64);

fn correlation(level: &'static str, x: &'static str, y: &'static str, xs: &[f64], ys: &[f64]) -> Correlation {
    let (r, note) = match pearson(xs, ys) {
        Ok(r) => (Some(r), None),
        Err(e) => (None, Some(e.to_string())),
    };
    Correlation {
        level,
        x,
        y,
        n: xs.len(),
        r,
        note,
    }
}

pub fn analyze(runs: &[RunData], params: AnalysisParams) -> Result<AnalysisReport> {
    if runs.is_empty() {
        return Err(Error::Empty("analysis runs"));
    }
    let mut cities: Vec<String> = runs.iter().map(|r| r.city.clone()).collect();
    cities.sort();
    if cities.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Config("city names must be unique across runs".into()));
    }

    let mut by_radius: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
    for rec in runs.iter().flat_map(|r| &r.records) {
        by_radius
            .entry(rec.radius_km.to_bits())
            .or_default()
            .push(rec.stability);
    }
    let radius_medians: Vec<(f64, f64)> = by_radius
        .into_iter()
        .map(|(bits, v)| (f64::from_bits(bits), median(v).unwrap()))
        .collect();
    let xs: Vec<f64> = radius_medians.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = radius_medians.iter().map(|p| p.1).collect();
    let (fit, fit_note) = match fit_exponential(&xs, &ys) {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };

    let mut correlations = Vec::new();
    let records: Vec<&OdStabilityRow> = runs.iter().flat_map(|r| &r.records).collect();
    let stab: Vec<f64> = records.iter().map(|r| r.stability).collect();
    let col = |f: fn(&OdStabilityRow) -> f64| records.iter().map(|r| f(r)).collect::<Vec<f64>>();
    correlations.push(correlation(
        "record",
        "stability",
        "ratio_R",
        &stab,
        &col(|r| r.ratio_r),
    ));
    correlations.push(correlation(
        "record",
        "stability",
        "median_deviation_m",
        &stab,
        &col(|r| r.median_deviation_m),
    ));
    correlations.push(correlation(
        "record",
        "stability",
        "radius_km",
        &stab,
        &col(|r| r.radius_km),
    ));

    let mut ordered: Vec<&RunData> = runs.iter().collect();
    ordered.sort_by(|a, b| a.city.cmp(&b.city));
    if ordered.len() >= 3 {
        let city_stab: Vec<f64> = ordered.iter().map(|r| r.summary.stability.median).collect();
        let city_level: [CityColumn; 9] = [
            ("median_deviation_m", |r| r.summary.median_deviation_m),
            ("median_ratio_r", |r| r.summary.median_ratio_r),
            ("avg_street_length_m", |r| r.metrics.avg_street_length_m),
            ("std_street_length_m", |r| r.metrics.std_street_length_m),
            ("avg_circuity", |r| r.metrics.avg_circuity),
            ("bearing_entropy", |r| r.metrics.bearing_entropy),
            ("intersection_density", |r| r.metrics.intersection_density),
            ("road_density", |r| r.metrics.road_density),
            ("total_road_length_km", |r| r.metrics.total_road_length_km),
        ];
        for (name, f) in city_level {
            let v: Vec<f64> = ordered.iter().map(|r| f(r)).collect();
            correlations.push(correlation("city", "median_stability", name, &city_stab, &v));
        }
    }

    let (clusters, elbow, cluster_note) = if ordered.len() >= params.k.max(2) {
        match cluster(&ordered, params) {
            Ok((c, e)) => (Some(c), e, None),
            Err(e) => (None, Vec::new(), Some(e.to_string())),
        }
    } else {
        (
            None,
            Vec::new(),
            Some(format!(
                "clustering needs at least {} cities, got {}",
                params.k.max(2),
                ordered.len()
            )),
        )
    };

    Ok(AnalysisReport {
        cities,
        radius_medians,
        fit,
        fit_note,
        correlations,
        clusters,
        elbow,
        cluster_note,
    })
}

fn features(r: &RunData) -> Vec<f64> {
    vec![
        r.summary.median_deviation_m,
        r.summary.median_ratio_r,
        r.metrics.avg_street_length_m,
        r.metrics.std_street_length_m,
        r.metrics.avg_circuity,
        r.metrics.bearing_entropy,
    ]
}

fn cluster(runs: &[&RunData], params: AnalysisParams) -> Result<(ClusterReport, Vec<(usize, f64)>)> {
    let rows: Vec<Vec<f64>> = runs.iter().map(|r| features(r)).collect();
    let z = zscore(&rows, &CLUSTER_FEATURES)?;
    let res = kmeans(&z, params.k, params.seed, params.restarts)?;
    let elbow = elbow_curve(&z, params.elbow_k_max, params.seed, params.restarts)?;
    let profiles = (0..res.k)
        .map(|c| {
            let members: Vec<&&RunData> = runs
                .iter()
                .zip(&res.assignments)
                .filter(|(_, &a)| a == c)
                .map(|(r, _)| r)
                .collect();
            let n = members.len() as f64;
            let avg = |f: &dyn Fn(&RunData) -> f64| members.iter().map(|r| f(r)).sum::<f64>() / n;
            ClusterProfile {
                cluster_id: c,
                cities: members.len(),
                mean_median_stability: avg(&|r| r.summary.stability.median),
                mean_deviation_m: avg(&|r| r.summary.median_deviation_m),
                mean_ratio_r: avg(&|r| r.summary.median_ratio_r),
            }
        })
        .collect();
    Ok((
        ClusterReport {
            k: res.k,
            feature_names: CLUSTER_FEATURES.to_vec(),
            assignments: runs
                .iter()
                .zip(&res.assignments)
                .map(|(r, &a)| (r.city.clone(), a))
                .collect(),
            centroids: res.centroids,
            wcss: res.wcss,
            profiles,
        },
        elbow,
    ))
}

/// Writes the report files into `dir` and returns their paths.
pub fn write_analysis(report: &AnalysisReport, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    if let Some(f) = &report.fit {
        let path = dir.join(files::FIT);
        let mut w = files::csv_writer(&path)?;
        w.write_record(["a", "b", "c", "r_squared"])?;
        w.write_record([fmt_f64(f.a), fmt_f64(f.b), fmt_f64(f.c), fmt_f64(f.r_squared)])?;
        w.flush().map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }

    let path = dir.join(files::CORRELATIONS);
    let mut w = files::csv_writer(&path)?;
    w.write_record(["level", "x", "y", "n", "r"])?;
    for c in &report.correlations {
        w.write_record([
            c.level.to_string(),
            c.x.to_string(),
            c.y.to_string(),
            c.n.to_string(),
            c.r.map(fmt_f64).unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    written.push(path);

    if let Some(c) = &report.clusters {
        let path = dir.join(files::CLUSTERS);
        let mut w = files::csv_writer(&path)?;
        w.write_record(["city", "cluster_id"])?;
        for (city, id) in &c.assignments {
            w.write_record([city.clone(), id.to_string()])?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        written.push(path);

        let path = dir.join(files::ELBOW);
        let mut w = files::csv_writer(&path)?;
        w.write_record(["k", "wcss"])?;
        for (k, wcss) in &report.elbow {
            w.write_record([k.to_string(), fmt_f64(*wcss)])?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }

    let path = dir.join(files::ANALYSIS);
    files::write_json(&path, report)?;
    written.push(path);
    Ok(written)
}
