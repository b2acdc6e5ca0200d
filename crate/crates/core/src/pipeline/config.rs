//! Pipeline configuration: a plain `key = value` text file, one setting per
//! line, `#` starting a comment.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::geodesy::GeoPoint;
use crate::perturbation::PerturbationConfig;
use crate::sampling::SamplingConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub city: String,
    pub nodes: Option<PathBuf>,
    pub edges: Option<PathBuf>,
    pub graphml: Option<PathBuf>,
    /// Explicit OD pairs; replaces circle sampling when set.
    pub od_pairs: Option<PathBuf>,
    /// Sampling center; defaults to the middle of the node bounding box.
    pub center: Option<GeoPoint>,
    pub area_km2: Option<f64>,
    pub r_min_km: f64,
    pub r_max_km: f64,
    pub r_step_km: f64,
    pub n_points: usize,
    pub match_threshold_m: f64,
    pub perturbation: PerturbationConfig,
    pub bearing_bins: usize,
    pub weighted_entropy: bool,
    pub kmeans_k: usize,
    pub kmeans_restarts: usize,
    pub elbow_k_max: usize,
    pub map_low_pct: f64,
    pub map_high_pct: f64,
    pub seed: u64,
    pub workers: usize,
    pub out_dir: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            city: "city".into(),
            nodes: None,
            edges: None,
            graphml: None,
            od_pairs: None,
            center: None,
            area_km2: None,
            r_min_km: 1.0,
            r_max_km: 30.0,
            r_step_km: 1.0,
            n_points: 36,
            match_threshold_m: 500.0,
            perturbation: PerturbationConfig::default(),
            bearing_bins: 36,
            weighted_entropy: false,
            kmeans_k: 4,
            kmeans_restarts: crate::analysis::kmeans::DEFAULT_RESTARTS,
            elbow_k_max: 8,
            map_low_pct: 0.2,
            map_high_pct: 0.8,
            seed: 42,
            workers: 1,
            out_dir: PathBuf::from("out"),
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected true or false, got {value:?}"))),
    }
}

impl PipelineConfig {
    /// Parses config text. Relative paths are resolved against `base`.
    pub fn parse_str(text: &str, base: Option<&Path>) -> Result<Self> {
        let mut cfg = PipelineConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Parse {
                    line: i as u64 + 1,
                    message: format!("expected `key = value`, got {line:?}"),
                });
            };
            cfg.set(key.trim(), value.trim(), base).map_err(|e| Error::Parse {
                line: i as u64 + 1,
                message: e.to_string(),
            })?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_str(&text, path.parent())
    }

    /// Sets one key; the same names are accepted in files and as overrides.
    pub fn set(&mut self, key: &str, value: &str, base: Option<&Path>) -> Result<()> {
        let path = |v: &str| {
            let p = PathBuf::from(v);
            match base {
                Some(b) if p.is_relative() => b.join(p),
                _ => p,
            }
        };
        let center = self.center.unwrap_or(GeoPoint {
            lat: f64::NAN,
            lon: f64::NAN,
        });
        match key {
            "city" => self.city = value.to_string(),
            "nodes" => self.nodes = Some(path(value)),
            "edges" => self.edges = Some(path(value)),
            "graphml" => self.graphml = Some(path(value)),
            "od_pairs" => self.od_pairs = Some(path(value)),
            "center_lat" => {
                self.center = Some(GeoPoint {
                    lat: parse(key, value)?,
                    ..center
                })
            }
            "center_lon" => {
                self.center = Some(GeoPoint {
                    lon: parse(key, value)?,
                    ..center
                })
            }
            "area_km2" => self.area_km2 = Some(parse(key, value)?),
            "r_min_km" => self.r_min_km = parse(key, value)?,
            "r_max_km" => self.r_max_km = parse(key, value)?,
            "r_step_km" => self.r_step_km = parse(key, value)?,
            "n_points" => self.n_points = parse(key, value)?,
            "match_threshold_m" => self.match_threshold_m = parse(key, value)?,
            "delta_min_m" => self.perturbation.delta_min_m = parse(key, value)?,
            "delta_max_m" => self.perturbation.delta_max_m = parse(key, value)?,
            "k_sectors" => self.perturbation.k_sectors = parse(key, value)?,
            "filter_percentile" => self.perturbation.filter_percentile = parse(key, value)?,
            "bearing_bins" => self.bearing_bins = parse(key, value)?,
            "weighted_entropy" => self.weighted_entropy = parse_bool(key, value)?,
            "kmeans_k" => self.kmeans_k = parse(key, value)?,
            "kmeans_restarts" => self.kmeans_restarts = parse(key, value)?,
            "elbow_k_max" => self.elbow_k_max = parse(key, value)?,
            "map_low_pct" => self.map_low_pct = parse(key, value)?,
            "map_high_pct" => self.map_high_pct = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "workers" => self.workers = parse(key, value)?,
            "out_dir" => self.out_dir = path(value),
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.nodes, &self.edges, &self.graphml) {
            (Some(_), Some(_), None) | (None, None, Some(_)) => {}
            _ => {
                return Err(Error::Config(
                    "give either both `nodes` and `edges`, or `graphml`".into(),
                ))
            }
        }
        if let Some(c) = self.center {
            c.validate()?;
        }
        self.perturbation.validate()?;
        if self.bearing_bins == 0 {
            return Err(Error::Config("bearing_bins must be positive".into()));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        if self.kmeans_k == 0 || self.kmeans_restarts == 0 {
            return Err(Error::Config("kmeans_k and kmeans_restarts must be positive".into()));
        }
        if !(0.0 <= self.map_low_pct && self.map_low_pct <= self.map_high_pct && self.map_high_pct <= 1.0) {
            return Err(Error::Config("need 0 <= map_low_pct <= map_high_pct <= 1".into()));
        }
        Ok(())
    }

    pub fn sampling(&self, center: GeoPoint) -> SamplingConfig {
        SamplingConfig {
            center,
            r_min_km: self.r_min_km,
            r_max_km: self.r_max_km,
            r_step_km: self.r_step_km,
            n_points: self.n_points,
            match_threshold_m: self.match_threshold_m,
        }
    }

    /// Settings that determine results. The output directory and worker
    /// count are left out: they never change what is computed.
    pub fn to_json(&self) -> Value {
        let p = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
        json!({
            "city": self.city,
            "nodes": p(&self.nodes),
            "edges": p(&self.edges),
            "graphml": p(&self.graphml),
            "od_pairs": p(&self.od_pairs),
            "center_lat": self.center.map(|c| c.lat),
            "center_lon": self.center.map(|c| c.lon),
            "area_km2": self.area_km2,
            "r_min_km": self.r_min_km,
            "r_max_km": self.r_max_km,
            "r_step_km": self.r_step_km,
            "n_points": self.n_points,
            "match_threshold_m": self.match_threshold_m,
            "delta_min_m": self.perturbation.delta_min_m,
            "delta_max_m": self.perturbation.delta_max_m,
            "k_sectors": self.perturbation.k_sectors,
            "filter_percentile": self.perturbation.filter_percentile,
            "bearing_bins": self.bearing_bins,
            "weighted_entropy": self.weighted_entropy,
            "kmeans_k": self.kmeans_k,
            "kmeans_restarts": self.kmeans_restarts,
            "elbow_k_max": self.elbow_k_max,
            "map_low_pct": self.map_low_pct,
            "map_high_pct": self.map_high_pct,
            "seed": self.seed,
        })
    }
}
