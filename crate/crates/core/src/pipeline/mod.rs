//! Staged pipeline: ingest, sample, perturb and filter, stability,
//! metrics, analysis and map export.
//!
//! Each stage writes its outputs into the run directory so later stages can
//! be rerun on their own. Parallel stages merge results in input order, so
//! the worker count only changes wall time.

mod analyze;
mod config;
pub mod files;

use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use rayon::ThreadPool;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

pub use analyze::{
    analyze, load_run, write_analysis, AnalysisParams, AnalysisReport, ClusterProfile, ClusterReport, Correlation,
    RunData, CLUSTER_FEATURES,
};
pub use config::PipelineConfig;
pub use files::CitySummaryFile;

use crate::error::{Error, Result};
use crate::geodesy::GeoPoint;
use crate::graph::{read_graphml_file, read_network_files, write_edges_csv, write_nodes_csv, NodeIdx, RoadNetwork};
use crate::map::{export_stability_map, MapPoint, MIN_MAP_POINTS};
use crate::metrics::{city_metrics, CityMetrics};
use crate::perturbation::{
    filter_abnormal, select_perturbed_destinations, FilterOutcome, PerturbationConfig, PerturbationSet,
};
use crate::routing::shortest_path_tree;
use crate::sampling::{generate_od_pairs, OdPair};
use crate::stability::{city_summary, od_stability_with_tree, CitySummary, StabilityRecord};

pub fn thread_pool(workers: usize) -> Result<ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

pub fn ingest(cfg: &PipelineConfig) -> Result<RoadNetwork> {
    let net = match (&cfg.graphml, &cfg.nodes, &cfg.edges) {
        (Some(g), _, _) => read_graphml_file(g)?,
        (None, Some(n), Some(e)) => read_network_files(n, e)?,
        _ => return Err(Error::Config("no network input configured".into())),
    };
    let area = cfg.area_km2.or(net.area_km2());
    Ok(net.with_area_km2(area))
}

pub fn write_network(net: &RoadNetwork, dir: &Path) -> Result<Vec<PathBuf>> {
    let nodes = dir.join(files::NETWORK_NODES);
    let edges = dir.join(files::NETWORK_EDGES);
    write_nodes_csv(net, files::create(&nodes)?)?;
    write_edges_csv(net, files::create(&edges)?)?;
    Ok(vec![nodes, edges])
}

/// Middle of the node bounding box.
pub fn bbox_center(net: &RoadNetwork) -> Result<GeoPoint> {
    let mut it = net.nodes().map(|n| net.point(n));
    let first = it.next().ok_or(Error::Empty("network nodes"))?;
    let (mut lo, mut hi) = (first, first);
    for p in it {
        lo.lat = lo.lat.min(p.lat);
        lo.lon = lo.lon.min(p.lon);
        hi.lat = hi.lat.max(p.lat);
        hi.lon = hi.lon.max(p.lon);
    }
    GeoPoint::new((lo.lat + hi.lat) / 2.0, (lo.lon + hi.lon) / 2.0)
}

/// OD pairs from the explicit list if configured, else circle sampling.
pub fn sample(net: &RoadNetwork, cfg: &PipelineConfig) -> Result<Vec<OdPair>> {
    if let Some(path) = &cfg.od_pairs {
        return files::read_od_pairs(net, path);
    }
    let center = match cfg.center {
        Some(c) => c,
        None => bbox_center(net)?,
    };
    generate_od_pairs(net, &cfg.sampling(center))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerturbStage {
    /// Every sampled destination with all its perturbations, ascending.
    pub sets: Vec<PerturbationSet>,
    pub filtered: Vec<PerturbationSet>,
    pub outcome: FilterOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterReport {
    pub percentile: f64,
    pub threshold_ratio: f64,
    pub entries: usize,
    pub removed_abnormal: usize,
    pub removed_unreachable: usize,
    pub retained: usize,
    pub max_retained_ratio: Option<f64>,
    pub retained_within_threshold: bool,
}

impl PerturbStage {
    pub fn report(&self, percentile: f64) -> FilterReport {
        let ratios = self
            .filtered
            .iter()
            .flat_map(|s| s.perturbed.iter().filter_map(|p| p.deviation_ratio));
        let max = ratios
            .clone()
            .fold(None, |m: Option<f64>, r| Some(m.map_or(r, |m| m.max(r))));
        let within = ratios.clone().all(|r| r <= self.outcome.threshold_ratio);
        FilterReport {
            percentile,
            threshold_ratio: self.outcome.threshold_ratio,
            entries: self.outcome.entries,
            removed_abnormal: self.outcome.removed_abnormal,
            removed_unreachable: self.outcome.removed_unreachable,
            retained: self.outcome.retained(),
            max_retained_ratio: max,
            retained_within_threshold: within,
        }
    }
}

fn distinct_destinations(pairs: &[OdPair]) -> Vec<NodeIdx> {
    let mut d: Vec<NodeIdx> = pairs.iter().map(|p| p.destination).collect();
    d.sort_unstable();
    d.dedup();
    d
}

pub fn perturb(
    net: &RoadNetwork,
    pairs: &[OdPair],
    cfg: &PerturbationConfig,
    pool: &ThreadPool,
) -> Result<PerturbStage> {
    cfg.validate()?;
    let dests = distinct_destinations(pairs);
    let sets: Vec<PerturbationSet> = pool.install(|| {
        dests
            .par_iter()
            .map(|&d| select_perturbed_destinations(net, d, cfg))
            .collect()
    });
    let (filtered, outcome) = filter_abnormal(&sets, cfg.filter_percentile)?;
    Ok(PerturbStage {
        sets,
        filtered,
        outcome,
    })
}

/// Stability records in OD order; pairs without a record are excluded.
/// One shortest-path tree is grown per distinct origin.
pub fn stability(
    net: &RoadNetwork,
    pairs: &[OdPair],
    filtered: &[PerturbationSet],
    pool: &ThreadPool,
) -> Vec<StabilityRecord> {
    let by_dest: BTreeMap<NodeIdx, &PerturbationSet> = filtered.iter().map(|s| (s.original, s)).collect();
    let mut by_origin: BTreeMap<NodeIdx, Vec<usize>> = BTreeMap::new();
    for (i, p) in pairs.iter().enumerate() {
        by_origin.entry(p.origin).or_default().push(i);
    }
    let groups: Vec<(NodeIdx, Vec<usize>)> = by_origin.into_iter().collect();
    let mut found: Vec<(usize, StabilityRecord)> = pool.install(|| {
        groups
            .par_iter()
            .flat_map_iter(|(o, idx)| {
                let tree = shortest_path_tree(net, *o);
                idx.iter()
                    .filter_map(|&i| {
                        let od = &pairs[i];
                        let set = by_dest.get(&od.destination)?;
                        od_stability_with_tree(net, &tree, od, set).map(|r| (i, r))
                    })
                    .collect::<Vec<_>>()
            })
            .collect()
    });
    found.sort_by_key(|(i, _)| *i);
    found.into_iter().map(|(_, r)| r).collect()
}

pub fn map_points(net: &RoadNetwork, summary: &CitySummary) -> Vec<MapPoint> {
    summary
        .destinations
        .iter()
        .map(|d| MapPoint {
            node_id: net.node_id(d.node).to_string(),
            point: net.point(d.node),
            stability: d.stability,
            n_origins: d.n_origins,
        })
        .collect()
}

pub fn metrics(net: &RoadNetwork, cfg: &PipelineConfig) -> Result<CityMetrics> {
    city_metrics(net, cfg.bearing_bins, cfg.weighted_entropy)
}

pub fn analysis_params(cfg: &PipelineConfig) -> AnalysisParams {
    AnalysisParams {
        k: cfg.kmeans_k,
        restarts: cfg.kmeans_restarts,
        elbow_k_max: cfg.elbow_k_max,
        seed: cfg.seed,
    }
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut h = Sha256::new();
    let mut buf = [0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

fn stage<T>(name: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| e.in_stage(name))
}

// Stage entry points that read and write the run directory.

pub fn run_ingest(cfg: &PipelineConfig) -> Result<(RoadNetwork, Vec<PathBuf>)> {
    stage(
        "ingest",
        (|| {
            cfg.validate()?;
            fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(&cfg.out_dir, e))?;
            let net = ingest(cfg)?;
            let written = write_network(&net, &cfg.out_dir)?;
            Ok((net, written))
        })(),
    )
}

pub fn run_sample(net: &RoadNetwork, cfg: &PipelineConfig) -> Result<Vec<OdPair>> {
    stage(
        "sample",
        (|| {
            let pairs = sample(net, cfg)?;
            files::write_od_pairs(net, &pairs, &cfg.out_dir.join(files::OD_PAIRS))?;
            Ok(pairs)
        })(),
    )
}

pub fn run_perturb(
    net: &RoadNetwork,
    pairs: &[OdPair],
    cfg: &PipelineConfig,
    pool: &ThreadPool,
) -> Result<(PerturbStage, FilterReport)> {
    stage(
        "perturb",
        (|| {
            let st = perturb(net, pairs, &cfg.perturbation, pool)?;
            let report = st.report(cfg.perturbation.filter_percentile);
            files::write_perturbations(
                net,
                &st.sets,
                st.outcome.threshold_ratio,
                &cfg.out_dir.join(files::PERTURBATIONS),
            )?;
            files::write_json(&cfg.out_dir.join(files::FILTER), &report)?;
            Ok((st, report))
        })(),
    )
}

pub fn run_stability(
    net: &RoadNetwork,
    pairs: &[OdPair],
    filtered: &[PerturbationSet],
    threshold: f64,
    cfg: &PipelineConfig,
    pool: &ThreadPool,
) -> Result<(Vec<StabilityRecord>, CitySummary)> {
    stage(
        "stability",
        (|| {
            let records = stability(net, pairs, filtered, pool);
            let summary = city_summary(&records, threshold)?;
            let dir = &cfg.out_dir;
            files::write_od_stability(net, &records, &dir.join(files::OD_STABILITY))?;
            files::write_destination_stability(&map_points(net, &summary), &dir.join(files::DESTINATION_STABILITY))?;
            files::write_json(
                &dir.join(files::CITY_SUMMARY),
                &CitySummaryFile::new(&cfg.city, pairs.len(), &summary),
            )?;
            Ok((records, summary))
        })(),
    )
}

pub fn run_metrics(net: &RoadNetwork, cfg: &PipelineConfig) -> Result<CityMetrics> {
    stage(
        "metrics",
        (|| {
            let m = metrics(net, cfg)?;
            files::write_city_metrics(&cfg.city, &m, &cfg.out_dir.join(files::CITY_METRICS))?;
            Ok(m)
        })(),
    )
}

/// Analyzes the given run directories and writes the report to `out_dir`.
pub fn run_analyze(run_dirs: &[PathBuf], cfg: &PipelineConfig) -> Result<AnalysisReport> {
    stage(
        "analyze",
        (|| {
            let runs = run_dirs.iter().map(|d| load_run(d)).collect::<Result<Vec<_>>>()?;
            let report = analyze(&runs, analysis_params(cfg))?;
            fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(&cfg.out_dir, e))?;
            write_analysis(&report, &cfg.out_dir)?;
            Ok(report)
        })(),
    )
}

pub fn run_map(cfg: &PipelineConfig) -> Result<Value> {
    stage(
        "map",
        (|| {
            let points = files::read_destination_stability(&cfg.out_dir.join(files::DESTINATION_STABILITY))?;
            let doc = export_stability_map(&points, cfg.map_low_pct, cfg.map_high_pct)?;
            files::write_json(&cfg.out_dir.join(files::STABILITY_MAP), &doc)?;
            Ok(doc)
        })(),
    )
}

/// Loads what `perturb` left in the run directory: retained perturbations
/// and the filter threshold.
pub fn load_filtered(net: &RoadNetwork, dir: &Path) -> Result<(Vec<PerturbationSet>, FilterReport)> {
    let sets = files::read_retained_perturbations(net, &dir.join(files::PERTURBATIONS))?;
    let report: FilterReport = files::read_json(&dir.join(files::FILTER))?;
    Ok((sets, report))
}

/// Full pipeline. Writes every output plus `manifest.json` and returns the
/// manifest.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<Value> {
    let pool = stage("config", thread_pool(cfg.workers))?;
    let (net, _) = run_ingest(cfg)?;
    let pairs = run_sample(&net, cfg)?;
    let (pst, filter) = run_perturb(&net, &pairs, cfg, &pool)?;
    let (records, summary) = run_stability(&net, &pairs, &pst.filtered, pst.outcome.threshold_ratio, cfg, &pool)?;
    run_metrics(&net, cfg)?;
    let report = run_analyze(std::slice::from_ref(&cfg.out_dir), cfg)?;

    let map = if summary.destinations.len() >= MIN_MAP_POINTS {
        run_map(cfg)?;
        json!({"written": true})
    } else {
        json!({
            "written": false,
            "note": format!("{} destinations, map needs {MIN_MAP_POINTS}", summary.destinations.len()),
        })
    };

    let mut outputs = BTreeMap::new();
    let mut names: Vec<String> = fs::read_dir(&cfg.out_dir)
        .map_err(|e| Error::io(&cfg.out_dir, e))?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_file())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n != files::MANIFEST)
        .collect();
    names.sort();
    for n in names {
        outputs.insert(n.clone(), sha256_file(&cfg.out_dir.join(&n))?);
    }

    let manifest = json!({
        "config": cfg.to_json(),
        "seed": cfg.seed,
        "threshold_ratio": filter.threshold_ratio,
        "filter": filter,
        "counts": {
            "nodes": net.node_count(),
            "edges": net.edge_count(),
            "od_pairs": pairs.len(),
            "destinations": pst.sets.len(),
            "perturbation_entries": filter.entries,
            "perturbations_retained": filter.retained,
            "perturbations_removed_abnormal": filter.removed_abnormal,
            "perturbations_removed_unreachable": filter.removed_unreachable,
            "stability_records": records.len(),
            "od_pairs_excluded": pairs.len() - records.len(),
            "destination_stabilities": summary.destinations.len(),
        },
        "fit": report.fit,
        "map": map,
        "outputs": outputs,
    });
    stage(
        "manifest",
        files::write_json(&cfg.out_dir.join(files::MANIFEST), &manifest),
    )?;
    Ok(manifest)
}
