//! Seeded synthetic road networks.
//!
//! Nodes are laid out on a local tangent plane around `center` and every
//! edge gets the haversine length of its endpoints (or the arc length for
//! ring roads), so lengths never undercut the straight-line distance.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geodesy::{haversine_distance, GeoPoint, EARTH_RADIUS_M};
use crate::graph::RoadNetwork;

pub const RADIAL_SPOKES: usize = 16;
pub const RADIAL_RING_EVERY: usize = 5;
const ORGANIC_JITTER: f64 = 0.4;
const ORGANIC_DELETION: f64 = 0.2;
const PERIPHERY_EVERY: i64 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SynthKind {
    Grid,
    Radial,
    Organic,
    /// Jittered dense core inside a quarter of the extent, sparse grid
    /// (every tenth line) beyond it.
    Monocentric,
}

impl fmt::Display for SynthKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SynthKind::Grid => "grid",
            SynthKind::Radial => "radial",
            SynthKind::Organic => "organic",
            SynthKind::Monocentric => "monocentric",
        })
    }
}

impl FromStr for SynthKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "grid" => Ok(SynthKind::Grid),
            "radial" => Ok(SynthKind::Radial),
            "organic" => Ok(SynthKind::Organic),
            "monocentric" => Ok(SynthKind::Monocentric),
            _ => Err(Error::Config(format!("unknown network kind {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub kind: SynthKind,
    /// Side of the square (grid kinds) or diameter (radial).
    pub extent_km: f64,
    pub spacing_m: f64,
    pub seed: u64,
    /// Share of two-way streets turned one-way, in `[0, 1]`.
    pub one_way_fraction: f64,
    pub center: GeoPoint,
}

impl SynthSpec {
    pub fn new(kind: SynthKind, extent_km: f64, spacing_m: f64) -> Self {
        SynthSpec {
            kind,
            extent_km,
            spacing_m,
            seed: 0,
            one_way_fraction: 0.0,
            center: GeoPoint { lat: 0.0, lon: 0.0 },
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.center.validate()?;
        if !(self.extent_km > 0.0 && self.extent_km.is_finite()) {
            return Err(Error::Config("extent_km must be positive".into()));
        }
        if !(self.spacing_m > 0.0 && self.spacing_m.is_finite()) {
            return Err(Error::Config("spacing_m must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.one_way_fraction) {
            return Err(Error::Config("one_way_fraction must be in [0, 1]".into()));
        }
        if self.extent_km * 1000.0 < self.spacing_m {
            return Err(Error::Config("extent is smaller than one spacing".into()));
        }
        Ok(())
    }
}

/// Point `east_m`, `north_m` away from `c` on the local tangent plane.
fn offset(c: GeoPoint, east_m: f64, north_m: f64) -> GeoPoint {
    let lat = c.lat + (north_m / EARTH_RADIUS_M).to_degrees();
    let lon = c.lon + (east_m / (EARTH_RADIUS_M * c.lat.to_radians().cos())).to_degrees();
    GeoPoint { lat, lon }
}

/// Undirected layout before one-way conversion.
struct Layout {
    points: Vec<GeoPoint>,
    /// `(a, b, length)`; `None` means haversine length.
    streets: Vec<(usize, usize, Option<f64>)>,
    area_km2: f64,
}

pub fn generate(spec: &SynthSpec) -> Result<RoadNetwork> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let layout = match spec.kind {
        SynthKind::Grid => lattice(spec, &mut rng, 0.0, |_, _| true),
        SynthKind::Organic => {
            let mut l = lattice(spec, &mut rng, ORGANIC_JITTER, |_, _| true);
            delete_streets(&mut l, ORGANIC_DELETION, &mut rng);
            l
        }
        SynthKind::Monocentric => monocentric(spec, &mut rng),
        SynthKind::Radial => radial(spec),
    };
    build(layout, spec.one_way_fraction, &mut rng)
}

fn side_count(spec: &SynthSpec) -> usize {
    (spec.extent_km * 1000.0 / spec.spacing_m + 1e-9).floor() as usize + 1
}

/// Square lattice centered on the spec center. `keep(i, j)` selects lattice
/// points (indices relative to the middle); nodes are jittered uniformly
/// within `jitter * spacing`.
fn lattice(spec: &SynthSpec, rng: &mut ChaCha8Rng, jitter: f64, keep: impl Fn(i64, i64) -> bool) -> Layout {
    let n = side_count(spec);
    let mid = (n as f64 - 1.0) / 2.0;
    let s = spec.spacing_m;
    let mut index = vec![usize::MAX; n * n];
    let mut points = Vec::new();
    for row in 0..n {
        for col in 0..n {
            let (i, j) = (col as i64 - mid.floor() as i64, row as i64 - mid.floor() as i64);
            if !keep(i, j) {
                continue;
            }
            let (mut x, mut y) = ((col as f64 - mid) * s, (row as f64 - mid) * s);
            if jitter > 0.0 {
                let r = jitter * s * rng.random::<f64>().sqrt();
                let t = rng.random::<f64>() * std::f64::consts::TAU;
                x += r * t.cos();
                y += r * t.sin();
            }
            index[row * n + col] = points.len();
            points.push(offset(spec.center, x, y));
        }
    }
    let mut streets = Vec::new();
    for row in 0..n {
        for col in 0..n {
            let a = index[row * n + col];
            if a == usize::MAX {
                continue;
            }
            if col + 1 < n && index[row * n + col + 1] != usize::MAX {
                streets.push((a, index[row * n + col + 1], None));
            }
            if row + 1 < n && index[(row + 1) * n + col] != usize::MAX {
                streets.push((a, index[(row + 1) * n + col], None));
            }
        }
    }
    let side = (n - 1) as f64 * s / 1000.0;
    Layout {
        points,
        streets,
        area_km2: side * side,
    }
}

fn monocentric(spec: &SynthSpec, rng: &mut ChaCha8Rng) -> Layout {
    let core_cells = spec.extent_km * 1000.0 / 4.0 / spec.spacing_m;
    let in_core = move |i: i64, j: i64| ((i * i + j * j) as f64).sqrt() <= core_cells;
    let on_line = |i: i64, j: i64| i % PERIPHERY_EVERY == 0 || j % PERIPHERY_EVERY == 0;
    let mut l = lattice(spec, rng, 0.0, move |i, j| in_core(i, j) || on_line(i, j));

    // jitter the core only, so periphery lines stay straight
    let n = side_count(spec);
    let mid = ((n as f64 - 1.0) / 2.0).floor() as i64;
    let mut k = 0;
    for row in 0..n as i64 {
        for col in 0..n as i64 {
            let (i, j) = (col - mid, row - mid);
            if !(in_core(i, j) || on_line(i, j)) {
                continue;
            }
            if in_core(i, j) && !(i == 0 && j == 0) {
                let r = ORGANIC_JITTER * spec.spacing_m * rng.random::<f64>().sqrt();
                let t = rng.random::<f64>() * std::f64::consts::TAU;
                let p = l.points[k];
                l.points[k] = offset(p, r * t.cos(), r * t.sin());
            }
            k += 1;
        }
    }
    l
}

/// Spoke nodes sit every `spacing_m`; a ring road joins them on every
/// `RADIAL_RING_EVERY`-th step out from the hub.
fn radial(spec: &SynthSpec) -> Layout {
    let rings = ((spec.extent_km * 1000.0 / 2.0) / spec.spacing_m + 1e-9).floor() as usize;
    let mut points = vec![spec.center];
    let mut streets = Vec::new();
    let node = |ring: usize, spoke: usize| 1 + (ring - 1) * RADIAL_SPOKES + spoke;
    for ring in 1..=rings {
        let r = ring as f64 * spec.spacing_m;
        for spoke in 0..RADIAL_SPOKES {
            let az = (spoke as f64 * 360.0 / RADIAL_SPOKES as f64).to_radians();
            points.push(offset(spec.center, r * az.sin(), r * az.cos()));
        }
    }
    let arc = |ring: usize| ring as f64 * spec.spacing_m * std::f64::consts::TAU / RADIAL_SPOKES as f64;
    for ring in 1..=rings {
        for spoke in 0..RADIAL_SPOKES {
            let inner = if ring == 1 { 0 } else { node(ring - 1, spoke) };
            streets.push((inner, node(ring, spoke), None));
            if ring % RADIAL_RING_EVERY == 0 {
                let next = node(ring, (spoke + 1) % RADIAL_SPOKES);
                streets.push((node(ring, spoke), next, Some(arc(ring))));
            }
        }
    }
    let radius_km = rings as f64 * spec.spacing_m / 1000.0;
    Layout {
        points,
        streets,
        area_km2: std::f64::consts::PI * radius_km * radius_km,
    }
}

/// Removes up to `fraction` of the streets while keeping the network
/// connected: a seeded spanning tree is protected first.
fn delete_streets(l: &mut Layout, fraction: f64, rng: &mut ChaCha8Rng) {
    let mut parent: Vec<usize> = (0..l.points.len()).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut order: Vec<usize> = (0..l.streets.len()).collect();
    order.shuffle(rng);
    let mut spare = Vec::new();
    for &s in &order {
        let (a, b, _) = l.streets[s];
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra == rb {
            spare.push(s);
        } else {
            parent[ra] = rb;
        }
    }
    let budget = (fraction * l.streets.len() as f64).floor() as usize;
    let mut dropped = vec![false; l.streets.len()];
    for &s in spare.iter().take(budget) {
        dropped[s] = true;
    }
    let mut k = 0;
    l.streets.retain(|_| {
        k += 1;
        !dropped[k - 1]
    });
}

fn build(l: Layout, one_way_fraction: f64, rng: &mut ChaCha8Rng) -> Result<RoadNetwork> {
    let one_way_count = (one_way_fraction * l.streets.len() as f64).round() as usize;
    let mut one_way = vec![None; l.streets.len()];
    if one_way_count > 0 {
        let picks = rand::seq::index::sample(rng, l.streets.len(), one_way_count);
        let mut picks: Vec<usize> = picks.into_iter().collect();
        picks.sort_unstable();
        for s in picks {
            one_way[s] = Some(rng.random_bool(0.5));
        }
    }

    let mut b = RoadNetwork::builder();
    for (i, p) in l.points.iter().enumerate() {
        b.add_node(i.to_string(), *p);
    }
    let mut next_id = 0usize;
    let mut add = |b: &mut crate::graph::NetworkBuilder, u: usize, v: usize, len: f64| {
        b.add_edge(next_id.to_string(), u.to_string(), v.to_string(), len);
        next_id += 1;
    };
    for (&(a, c, len), dir) in l.streets.iter().zip(&one_way) {
        let len = len.unwrap_or_else(|| haversine_distance(l.points[a], l.points[c]));
        match dir {
            None => {
                add(&mut b, a, c, len);
                add(&mut b, c, a, len);
            }
            Some(true) => add(&mut b, a, c, len),
            Some(false) => add(&mut b, c, a, len),
        }
    }
    b.area_km2(Some(l.area_km2)).build()
}
