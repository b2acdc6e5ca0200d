//! Great-circle primitives on a spherical Earth.
//!
//! Inputs and outputs are in degrees and meters. Azimuths are measured
//! clockwise from geographic north and normalized to `[0, 360)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean Earth radius in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// A geographic position in decimal degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self> {
        let p = GeoPoint { lat, lon };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.lat.is_finite()
            && self.lon.is_finite()
            && (-90.0..=90.0).contains(&self.lat)
            && (-180.0..=180.0).contains(&self.lon);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidCoordinate {
                lat: self.lat,
                lon: self.lon,
            })
        }
    }
}

/// Haversine great-circle distance in meters.
pub fn haversine_distance(a: GeoPoint, b: GeoPoint) -> f64 {
    let lat1 = a.lat.to_radians();
    let lat2 = b.lat.to_radians();
    let dlat = (b.lat - a.lat).to_radians();
    let dlon = (b.lon - a.lon).to_radians();

    let s_lat = (dlat / 2.0).sin();
    let s_lon = (dlon / 2.0).sin();
    let h = (s_lat * s_lat + lat1.cos() * lat2.cos() * s_lon * s_lon).clamp(0.0, 1.0);
    2.0 * EARTH_RADIUS_M * h.sqrt().atan2((1.0 - h).sqrt())
}

/// Forward azimuth from `a` towards `b`.
pub fn initial_bearing(a: GeoPoint, b: GeoPoint) -> Result<f64> {
    if a.lat == b.lat && a.lon == b.lon {
        return Err(Error::UndefinedBearing);
    }
    let lat1 = a.lat.to_radians();
    let lat2 = b.lat.to_radians();
    let dlon = (b.lon - a.lon).to_radians();
    let y = dlon.sin() * lat2.cos();
    let x = lat1.cos() * lat2.sin() - lat1.sin() * lat2.cos() * dlon.cos();
    Ok(normalize_azimuth(y.atan2(x).to_degrees()))
}

/// The point reached by travelling `distance` meters from `center` along
/// the great circle with initial azimuth `azimuth`.
pub fn point_at(center: GeoPoint, distance: f64, azimuth: f64) -> GeoPoint {
    if distance == 0.0 {
        return center;
    }
    let delta = distance / EARTH_RADIUS_M;
    let theta = azimuth.to_radians();
    let lat1 = center.lat.to_radians();
    let lon1 = center.lon.to_radians();

    let sin_lat2 = lat1.sin() * delta.cos() + lat1.cos() * delta.sin() * theta.cos();
    let lat2 = sin_lat2.clamp(-1.0, 1.0).asin();
    let lon2 = lon1 + (theta.sin() * delta.sin() * lat1.cos()).atan2(delta.cos() - lat1.sin() * sin_lat2);

    GeoPoint {
        lat: lat2.to_degrees(),
        lon: normalize_longitude(lon2.to_degrees()),
    }
}

/// Maps any angle in degrees into `[0, 360)`.
pub fn normalize_azimuth(deg: f64) -> f64 {
    let r = deg.rem_euclid(360.0);
    // rem_euclid can round up to exactly 360 for tiny negative inputs
    if r >= 360.0 {
        0.0
    } else {
        r
    }
}

fn normalize_longitude(deg: f64) -> f64 {
    let r = (deg + 180.0).rem_euclid(360.0) - 180.0;
    if r < -180.0 {
        r + 360.0
    } else {
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(lat: f64, lon: f64) -> GeoPoint {
        GeoPoint::new(lat, lon).unwrap()
    }

    #[test]
    fn haversine_identity() {
        assert_eq!(haversine_distance(p(0.0, 0.0), p(0.0, 0.0)), 0.0);
    }

    #[test]
    fn haversine_one_degree_on_equator() {
        let d = haversine_distance(p(0.0, 0.0), p(0.0, 1.0));
        let expected = EARTH_RADIUS_M * std::f64::consts::PI / 180.0;
        assert!((d - expected).abs() < 1e-6);
        assert!((d - 111_194.9).abs() < 0.2);
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(GeoPoint::new(91.0, 0.0).is_err());
        assert!(GeoPoint::new(0.0, -180.5).is_err());
        assert!(GeoPoint::new(f64::NAN, 0.0).is_err());
    }

    #[test]
    fn bearing_cardinal_directions() {
        assert!(initial_bearing(p(0.0, 0.0), p(1.0, 0.0)).unwrap().abs() < 1e-12);
        assert!((initial_bearing(p(0.0, 0.0), p(0.0, 1.0)).unwrap() - 90.0).abs() < 1e-12);
        assert!((initial_bearing(p(0.0, 0.0), p(-1.0, 0.0)).unwrap() - 180.0).abs() < 1e-12);
        assert!((initial_bearing(p(0.0, 0.0), p(0.0, -1.0)).unwrap() - 270.0).abs() < 1e-12);
    }

    #[test]
    fn bearing_of_coincident_points_fails() {
        assert!(matches!(
            initial_bearing(p(10.0, 10.0), p(10.0, 10.0)),
            Err(Error::UndefinedBearing)
        ));
    }

    #[test]
    fn point_at_zero_distance_is_identity() {
        let c = p(45.0, 9.0);
        assert_eq!(point_at(c, 0.0, 123.0), c);
    }

    #[test]
    fn point_at_inverts_haversine_example() {
        let one_degree = EARTH_RADIUS_M * std::f64::consts::PI / 180.0;
        let q = point_at(p(0.0, 0.0), one_degree, 0.0);
        assert!((q.lat - 1.0).abs() < 1e-6);
        assert!(q.lon.abs() < 1e-6);
    }

    #[test]
    fn longitude_wraps_across_antimeridian() {
        let q = point_at(p(0.0, 179.9999), 1000.0, 90.0);
        assert!(q.lon < 0.0 && q.lon >= -180.0);
        assert!((haversine_distance(p(0.0, 179.9999), q) - 1000.0).abs() < 0.01);
    }

    // Planar oracle: at sub-kilometre scale an equirectangular projection
    // gives the azimuth to well under 0.2 degrees.
    fn planar_bearing(a: GeoPoint, b: GeoPoint) -> f64 {
        let x = (b.lon - a.lon) * ((a.lat + b.lat) / 2.0).to_radians().cos();
        let y = b.lat - a.lat;
        normalize_azimuth(x.atan2(y).to_degrees())
    }

    fn angle_gap(a: f64, b: f64) -> f64 {
        let d = (a - b).rem_euclid(360.0);
        d.min(360.0 - d)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn haversine_is_symmetric(
            lat1 in -90.0..90.0f64, lon1 in -180.0..180.0f64,
            lat2 in -90.0..90.0f64, lon2 in -180.0..180.0f64,
        ) {
            let (a, b) = (p(lat1, lon1), p(lat2, lon2));
            prop_assert_eq!(haversine_distance(a, b), haversine_distance(b, a));
            prop_assert!(haversine_distance(a, b) >= 0.0);
        }

        #[test]
        fn haversine_triangle_inequality(
            lat1 in -80.0..80.0f64, lon1 in -180.0..180.0f64,
            lat2 in -80.0..80.0f64, lon2 in -180.0..180.0f64,
            lat3 in -80.0..80.0f64, lon3 in -180.0..180.0f64,
        ) {
            let (a, b, c) = (p(lat1, lon1), p(lat2, lon2), p(lat3, lon3));
            let ab = haversine_distance(a, b);
            let bc = haversine_distance(b, c);
            let ac = haversine_distance(a, c);
            prop_assert!(ac <= (ab + bc) * (1.0 + 1e-6) + 1e-6);
        }

        #[test]
        fn point_at_round_trip(
            lat in -70.0..70.0f64, lon in -179.0..179.0f64,
            r in 0.0..30_000.0f64, az in 0.0..360.0f64,
        ) {
            let c = p(lat, lon);
            let q = point_at(c, r, az);
            q.validate().unwrap();
            prop_assert!((haversine_distance(c, q) - r).abs() <= 0.01);
            if r > 1.0 {
                let b = initial_bearing(c, q).unwrap();
                prop_assert!(angle_gap(b, az) <= 0.01, "bearing {} vs {}", b, az);
            }
        }

        #[test]
        fn reverse_bearing_differs_by_half_turn(
            lat in -60.0..60.0f64, lon in -179.0..179.0f64,
            r in 1.0..1000.0f64, az in 0.0..360.0f64,
        ) {
            let a = p(lat, lon);
            let b = point_at(a, r, az);
            let fwd = initial_bearing(a, b).unwrap();
            let back = initial_bearing(b, a).unwrap();
            prop_assert!((angle_gap(fwd, back) - 180.0).abs() <= 0.2);
            prop_assert!(angle_gap(fwd, planar_bearing(a, b)) <= 0.2);
        }
    }
}
