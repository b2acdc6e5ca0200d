//! Fixed-radius radial OD sampling around a city center.
//!
//! Concentric circles are drawn every `r_step_km` from `r_min_km` to
//! `r_max_km`; each carries `n_points` evenly spaced points that are snapped
//! to the nearest network node within `match_threshold_m`. All ordered
//! pairs of distinct matched nodes on a circle become OD pairs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geodesy::{point_at, GeoPoint};
use crate::graph::{NodeIdx, RoadNetwork};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingConfig {
    pub center: GeoPoint,
    pub r_min_km: f64,
    pub r_max_km: f64,
    pub r_step_km: f64,
    pub n_points: usize,
    pub match_threshold_m: f64,
}

impl SamplingConfig {
    /// Defaults: radii 1..=30 km every 1 km, 36 points per circle, 500 m
    /// snapping threshold.
    pub fn new(center: GeoPoint) -> Self {
        SamplingConfig {
            center,
            r_min_km: 1.0,
            r_max_km: 30.0,
            r_step_km: 1.0,
            n_points: 36,
            match_threshold_m: 500.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.center.validate()?;
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.r_min_km > 0.0 && self.r_min_km <= self.r_max_km) {
            return bad("need 0 < r_min_km <= r_max_km");
        }
        if !(self.r_step_km > 0.0) {
            return bad("r_step_km must be positive");
        }
        if self.n_points < 2 {
            return bad("n_points must be at least 2");
        }
        if !(self.match_threshold_m > 0.0) {
            return bad("match_threshold_m must be positive");
        }
        Ok(())
    }

    /// Circle radii in km. Each is computed as `r_min + i * step` so long
    /// runs do not accumulate rounding drift, then snapped to 1e-9 km so
    /// 0.4 + 0.2 prints as 0.6.
    pub fn radii(&self) -> Vec<f64> {
        let n = ((self.r_max_km - self.r_min_km) / self.r_step_km + 1e-9).floor() as usize;
        (0..=n)
            .map(|i| ((self.r_min_km + i as f64 * self.r_step_km) * 1e9).round() / 1e9)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OdPair {
    pub origin: NodeIdx,
    pub destination: NodeIdx,
    pub radius_km: f64,
    pub origin_azimuth: f64,
    pub dest_azimuth: f64,
}

/// Nodes matched on one sampling circle, in azimuth order.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledCircle {
    pub radius_km: f64,
    pub points: usize,
    pub matched: Vec<(f64, NodeIdx)>,
}

impl SampledCircle {
    pub fn pair_count(&self) -> usize {
        let m = self.matched.len();
        m * m.saturating_sub(1)
    }
}

pub fn circle_azimuths(n: usize) -> Vec<f64> {
    (0..n).map(|i| i as f64 * 360.0 / n as f64).collect()
}

/// `n` points at azimuths `0, 360/n, ...` on the circle of `radius_km`.
pub fn circle_points(center: GeoPoint, radius_km: f64, n: usize) -> Vec<GeoPoint> {
    circle_azimuths(n)
        .into_iter()
        .map(|az| point_at(center, radius_km * 1000.0, az))
        .collect()
}

/// Snaps every circle point to the network. Points without a node within
/// the threshold are dropped; when several points snap to the same node it
/// is kept once, at the first azimuth that reached it.
pub fn sample_circles(net: &RoadNetwork, cfg: &SamplingConfig) -> Result<Vec<SampledCircle>> {
    cfg.validate()?;
    let azimuths = circle_azimuths(cfg.n_points);
    Ok(cfg
        .radii()
        .into_iter()
        .map(|r| {
            let mut matched: Vec<(f64, NodeIdx)> = Vec::with_capacity(cfg.n_points);
            for &az in &azimuths {
                let p = point_at(cfg.center, r * 1000.0, az);
                if let Some(n) = net.nearest_node(p, cfg.match_threshold_m) {
                    if !matched.iter().any(|&(_, m)| m == n) {
                        matched.push((az, n));
                    }
                }
            }
            SampledCircle {
                radius_km: r,
                points: cfg.n_points,
                matched,
            }
        })
        .collect())
}

/// All ordered pairs of distinct matched nodes per circle, ordered by
/// `(radius, origin azimuth, destination azimuth)`.
pub fn od_pairs_from_circles(circles: &[SampledCircle]) -> Vec<OdPair> {
    let mut out = Vec::new();
    for c in circles {
        for &(oa, o) in &c.matched {
            for &(da, d) in &c.matched {
                if o != d {
                    out.push(OdPair {
                        origin: o,
                        destination: d,
                        radius_km: c.radius_km,
                        origin_azimuth: oa,
                        dest_azimuth: da,
                    });
                }
            }
        }
    }
    out
}

pub fn generate_od_pairs(net: &RoadNetwork, cfg: &SamplingConfig) -> Result<Vec<OdPair>> {
    Ok(od_pairs_from_circles(&sample_circles(net, cfg)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodesy::{haversine_distance, initial_bearing};

    fn center() -> GeoPoint {
        GeoPoint::new(48.85, 2.35).unwrap()
    }

    #[test]
    fn four_points_are_quarter_turns() {
        assert_eq!(circle_azimuths(4), vec![0.0, 90.0, 180.0, 270.0]);
        let pts = circle_points(center(), 2.0, 4);
        for (p, az) in pts.iter().zip([0.0, 90.0, 180.0, 270.0]) {
            let b = initial_bearing(center(), *p).unwrap();
            let gap = (b - az).rem_euclid(360.0);
            assert!(gap.min(360.0 - gap) < 1e-9);
        }
    }

    #[test]
    fn thirty_six_points_are_ten_degrees_apart() {
        let az = circle_azimuths(36);
        assert!(az.windows(2).all(|w| (w[1] - w[0] - 10.0).abs() < 1e-12));
    }

    #[test]
    fn points_lie_on_the_circle() {
        for r in [0.5, 1.0, 7.0, 30.0] {
            for p in circle_points(center(), r, 36) {
                assert!((haversine_distance(center(), p) - r * 1000.0).abs() <= 0.01);
            }
        }
    }

    #[test]
    fn default_radii() {
        let cfg = SamplingConfig::new(center());
        let r = cfg.radii();
        assert_eq!(r.len(), 30);
        assert_eq!((r[0], r[29]), (1.0, 30.0));
        let cfg = SamplingConfig {
            r_min_km: 0.5,
            r_max_km: 2.0,
            r_step_km: 0.1,
            ..cfg
        };
        assert_eq!(cfg.radii().len(), 16);
    }

    #[test]
    fn invalid_configs_rejected() {
        let base = SamplingConfig::new(center());
        for bad in [
            SamplingConfig {
                r_min_km: 0.0,
                ..base.clone()
            },
            SamplingConfig {
                r_max_km: 0.5,
                ..base.clone()
            },
            SamplingConfig {
                r_step_km: 0.0,
                ..base.clone()
            },
            SamplingConfig {
                n_points: 1,
                ..base.clone()
            },
            SamplingConfig {
                match_threshold_m: 0.0,
                ..base.clone()
            },
        ] {
            assert!(bad.validate().is_err());
        }
    }

    #[test]
    fn two_matched_nodes_give_two_pairs() {
        let c = center();
        let net = RoadNetwork::builder()
            .node("east", point_at(c, 1000.0, 90.0))
            .node("west", point_at(c, 1010.0, 270.0))
            .build()
            .unwrap();
        let cfg = SamplingConfig {
            r_max_km: 1.0,
            match_threshold_m: 50.0,
            ..SamplingConfig::new(c)
        };
        let pairs = generate_od_pairs(&net, &cfg).unwrap();
        assert_eq!(pairs.len(), 2);
        assert_eq!(pairs[0].origin, pairs[1].destination);
        assert_eq!((pairs[0].origin_azimuth, pairs[0].dest_azimuth), (90.0, 270.0));
    }

    #[test]
    fn coincident_snaps_collapse() {
        // one node near the circle: every point within 500 m snaps to it
        let c = center();
        let net = RoadNetwork::builder()
            .node("only", point_at(c, 1000.0, 0.0))
            .build()
            .unwrap();
        let cfg = SamplingConfig {
            r_max_km: 1.0,
            ..SamplingConfig::new(c)
        };
        let circles = sample_circles(&net, &cfg).unwrap();
        assert_eq!(circles[0].matched.len(), 1);
        assert!(generate_od_pairs(&net, &cfg).unwrap().is_empty());
    }

    #[test]
    fn matched_nodes_within_threshold() {
        let c = center();
        let mut b = RoadNetwork::builder();
        for i in 0..400 {
            let r = 500.0 + (i as f64 * 37.0) % 3000.0;
            b.add_node(i.to_string(), point_at(c, r, (i as f64 * 71.3) % 360.0));
        }
        let net = b.build().unwrap();
        let cfg = SamplingConfig {
            r_max_km: 3.0,
            r_step_km: 0.5,
            match_threshold_m: 150.0,
            ..SamplingConfig::new(c)
        };
        let circles = sample_circles(&net, &cfg).unwrap();
        let mut total = 0;
        for circle in &circles {
            for &(az, n) in &circle.matched {
                let p = point_at(c, circle.radius_km * 1000.0, az);
                assert!(haversine_distance(p, net.point(n)) <= 150.0);
            }
            total += circle.pair_count();
        }
        let pairs = generate_od_pairs(&net, &cfg).unwrap();
        assert_eq!(pairs.len(), total);
        assert_eq!(pairs, generate_od_pairs(&net, &cfg).unwrap());
    }
}
