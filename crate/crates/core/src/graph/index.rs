use std::collections::HashMap;

use crate::geodesy::{GeoPoint, EARTH_RADIUS_M};

use super::NodeIdx;

const CELL_DEG: f64 = 0.005;
const MARGIN_DEG: f64 = 1e-7;

/// Uniform lat/lon bucket grid. Queries return a superset of the nodes
/// within a radius; callers filter with exact haversine distances.
#[derive(Debug)]
pub(super) struct GridIndex {
    cells: HashMap<(u32, u32), Vec<NodeIdx>>,
    n_rows: i64,
    n_cols: i64,
}

impl GridIndex {
    pub(super) fn build(points: &[GeoPoint]) -> Self {
        let n_rows = (180.0 / CELL_DEG).ceil() as i64 + 1;
        let n_cols = (360.0 / CELL_DEG).ceil() as i64;
        let mut idx = GridIndex {
            cells: HashMap::new(),
            n_rows,
            n_cols,
        };
        for (i, p) in points.iter().enumerate() {
            let key = (idx.row(p.lat) as u32, idx.col(p.lon) as u32);
            idx.cells.entry(key).or_default().push(NodeIdx(i as u32));
        }
        idx
    }

    fn row(&self, lat: f64) -> i64 {
        (((lat + 90.0) / CELL_DEG).floor() as i64).clamp(0, self.n_rows - 1)
    }

    fn col(&self, lon: f64) -> i64 {
        (((lon + 180.0) / CELL_DEG).floor() as i64).rem_euclid(self.n_cols)
    }

    /// Calls `f` for every node that may lie within `radius_m` of `p`.
    pub(super) fn for_each_candidate(
        &self,
        p: GeoPoint,
        radius_m: f64,
        points: &[GeoPoint],
        mut f: impl FnMut(NodeIdx),
    ) {
        let delta = radius_m / EARTH_RADIUS_M;
        let dlat = delta.to_degrees() * (1.0 + 1e-9) + MARGIN_DEG;
        let lat_lo = p.lat - dlat;
        let lat_hi = p.lat + dlat;

        let dlon = if delta >= std::f64::consts::FRAC_PI_2 || lat_lo <= -90.0 || lat_hi >= 90.0 {
            None
        } else {
            let s = delta.sin() / p.lat.to_radians().cos();
            (s < 1.0).then(|| s.asin().to_degrees() * (1.0 + 1e-9) + MARGIN_DEG)
        };

        let Some(dlon) = dlon.filter(|d| *d < 180.0) else {
            for i in 0..points.len() {
                f(NodeIdx(i as u32));
            }
            return;
        };

        let r_lo = self.row(lat_lo);
        let r_hi = self.row(lat_hi);
        let c_lo = ((p.lon - dlon + 180.0) / CELL_DEG).floor() as i64;
        let c_hi = ((p.lon + dlon + 180.0) / CELL_DEG).floor() as i64;
        let span = (c_hi - c_lo + 1).min(self.n_cols);
        for r in r_lo..=r_hi {
            for k in 0..span {
                let c = (c_lo + k).rem_euclid(self.n_cols);
                if let Some(bucket) = self.cells.get(&(r as u32, c as u32)) {
                    bucket.iter().copied().for_each(&mut f);
                }
            }
        }
    }
}
