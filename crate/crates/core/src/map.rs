//! GeoJSON export of per-destination stability with percentile classes.

use serde_json::{json, Value};

use crate::analysis::stats::{percentile_nearest, sorted};
use crate::error::{Error, Result};
use crate::geodesy::GeoPoint;

pub const MIN_MAP_POINTS: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct MapPoint {
    pub node_id: String,
    pub point: GeoPoint,
    pub stability: f64,
    pub n_origins: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StabilityClass {
    Unstable,
    Neutral,
    Stable,
}

impl StabilityClass {
    pub fn as_str(self) -> &'static str {
        match self {
            StabilityClass::Unstable => "unstable",
            StabilityClass::Neutral => "neutral",
            StabilityClass::Stable => "stable",
        }
    }
}

/// Strictly below `low` is unstable, strictly above `high` is stable.
pub fn classify(s: f64, low: f64, high: f64) -> StabilityClass {
    if s < low {
        StabilityClass::Unstable
    } else if s > high {
        StabilityClass::Stable
    } else {
        StabilityClass::Neutral
    }
}

/// FeatureCollection of destination points. Class thresholds are the
/// nearest-rank `low_pct` and `high_pct` percentiles of the stabilities.
pub fn export_stability_map(points: &[MapPoint], low_pct: f64, high_pct: f64) -> Result<Value> {
    if points.len() < MIN_MAP_POINTS {
        return Err(Error::TooFewPoints {
            needed: MIN_MAP_POINTS,
            got: points.len(),
        });
    }
    let values = sorted(points.iter().map(|p| p.stability));
    let low = percentile_nearest(&values, low_pct);
    let high = percentile_nearest(&values, high_pct);
    let features: Vec<Value> = points
        .iter()
        .map(|p| {
            json!({
                "type": "Feature",
                "geometry": {"type": "Point", "coordinates": [p.point.lon, p.point.lat]},
                "properties": {
                    "node_id": p.node_id,
                    "stability": p.stability,
                    "n_origins": p.n_origins,
                    "class": classify(p.stability, low, high).as_str(),
                },
            })
        })
        .collect();
    Ok(json!({
        "type": "FeatureCollection",
        "metadata": {
            "low_pct": low_pct,
            "high_pct": high_pct,
            "low_threshold": low,
            "high_threshold": high,
            "count": points.len(),
        },
        "features": features,
    }))
}
