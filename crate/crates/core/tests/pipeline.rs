//! Full pipeline runs on small fixtures, checked against the files they
//! leave behind.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use pathstab::geodesy::point_at;
use pathstab::pipeline::{self, files, PipelineConfig};
use pathstab::GeoPoint;
use serde_json::Value;
use sha2::{Digest, Sha256};

/// 5x5 lattice, 80 m apart, every street exactly 80 m. Only the four
/// orthogonal neighbours fall within 100 m, so every deviation is 80 m.
fn write_fixture(dir: &Path) {
    let origin = GeoPoint { lat: 51.5, lon: -0.1 };
    let mut nodes = String::from("node_id,lat,lon\n");
    for r in 0..5 {
        for c in 0..5 {
            let p = point_at(point_at(origin, r as f64 * 80.0, 0.0), c as f64 * 80.0, 90.0);
            writeln!(nodes, "{},{},{}", r * 5 + c, p.lat, p.lon).unwrap();
        }
    }
    let mut edges = String::from("edge_id,u,v,length_m\n");
    let mut e = 0;
    for r in 0..5 {
        for c in 0..5 {
            let a = r * 5 + c;
            for b in [(c + 1 < 5).then_some(a + 1), (r + 1 < 5).then_some(a + 5)]
                .into_iter()
                .flatten()
            {
                writeln!(edges, "{e},{a},{b},80\n{},{b},{a},80", e + 1).unwrap();
                e += 2;
            }
        }
    }
    let mut ods = String::from("origin,destination\n");
    for o in 0..25 {
        for d in 0..25 {
            if o != d {
                writeln!(ods, "{o},{d}").unwrap();
            }
        }
    }
    fs::write(dir.join("nodes.csv"), nodes).unwrap();
    fs::write(dir.join("edges.csv"), edges).unwrap();
    fs::write(dir.join("od.csv"), ods).unwrap();
    fs::write(
        dir.join("run.cfg"),
        "# small lattice\ncity = lattice\nnodes = nodes.csv\nedges = edges.csv\nod_pairs = od.csv\narea_km2 = 0.1024\nout_dir = out\n",
    )
    .unwrap();
}

fn csv_rows(path: &Path) -> Vec<BTreeMap<String, String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().clone();
    r.records()
        .map(|rec| {
            header
                .iter()
                .map(str::to_string)
                .zip(rec.unwrap().iter().map(str::to_string))
                .collect()
        })
        .collect()
}

#[test]
fn lattice_run_end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    write_fixture(tmp.path());
    let cfg = PipelineConfig::load(&tmp.path().join("run.cfg")).unwrap();
    let manifest = pipeline::run_pipeline(&cfg).unwrap();
    let out = tmp.path().join("out");

    // all deviations tie, so nothing is filtered
    assert_eq!(manifest["counts"]["perturbations_removed_abnormal"], 0);
    assert_eq!(manifest["counts"]["perturbations_removed_unreachable"], 0);
    assert_eq!(manifest["threshold_ratio"], 0.8);
    assert_eq!(manifest["counts"]["od_pairs"], 600);
    assert_eq!(manifest["counts"]["stability_records"], 600);

    // hashes in the manifest are those of the files on disk
    let outputs = manifest["outputs"].as_object().unwrap();
    assert!(outputs.len() >= 12);
    for (name, hash) in outputs {
        let digest = Sha256::digest(fs::read(out.join(name)).unwrap());
        let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
        assert_eq!(hash.as_str().unwrap(), hex, "{name}");
    }

    // destination stability is the mean over origins of the OD records, and
    // so lies between their extremes
    let mut by_dest: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for row in csv_rows(&out.join(files::OD_STABILITY)) {
        let s: f64 = row["stability"].parse().unwrap();
        assert!((0.0..=1.0).contains(&s));
        by_dest.entry(row["destination"].clone()).or_default().push(s);
    }
    let dests = csv_rows(&out.join(files::DESTINATION_STABILITY));
    assert_eq!(dests.len(), by_dest.len());
    for row in dests {
        let v = &by_dest[&row["node_id"]];
        let got: f64 = row["stability"].parse().unwrap();
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        assert!((got - mean).abs() <= 1e-12, "{}: {got} vs {mean}", row["node_id"]);
        let (lo, hi) = v
            .iter()
            .fold((f64::MAX, f64::MIN), |(lo, hi), &x| (lo.min(x), hi.max(x)));
        assert!(lo - 1e-12 <= got && got <= hi + 1e-12);
        assert_eq!(row["n_origins"], v.len().to_string());
    }

    // the map classifies every destination
    let map: Value = serde_json::from_str(&fs::read_to_string(out.join(files::STABILITY_MAP)).unwrap()).unwrap();
    assert_eq!(map["features"].as_array().unwrap().len(), 25);
}

#[test]
fn stages_run_separately_match_the_full_run() {
    let tmp = tempfile::tempdir().unwrap();
    write_fixture(tmp.path());
    let mut cfg = PipelineConfig::load(&tmp.path().join("run.cfg")).unwrap();
    pipeline::run_pipeline(&cfg).unwrap();

    cfg.out_dir = tmp.path().join("staged");
    let pool = pipeline::thread_pool(2).unwrap();
    let (net, _) = pipeline::run_ingest(&cfg).unwrap();
    pipeline::run_sample(&net, &cfg).unwrap();
    let pairs = files::read_od_pairs(&net, &cfg.out_dir.join(files::OD_PAIRS)).unwrap();
    pipeline::run_perturb(&net, &pairs, &cfg, &pool).unwrap();
    let (sets, report) = pipeline::load_filtered(&net, &cfg.out_dir).unwrap();
    pipeline::run_stability(&net, &pairs, &sets, report.threshold_ratio, &cfg, &pool).unwrap();
    pipeline::run_metrics(&net, &cfg).unwrap();
    pipeline::run_analyze(std::slice::from_ref(&cfg.out_dir), &cfg).unwrap();
    pipeline::run_map(&cfg).unwrap();

    for name in [
        files::OD_PAIRS,
        files::PERTURBATIONS,
        files::FILTER,
        files::OD_STABILITY,
        files::DESTINATION_STABILITY,
        files::CITY_SUMMARY,
        files::CITY_METRICS,
        files::ANALYSIS,
        files::STABILITY_MAP,
    ] {
        let a = fs::read(tmp.path().join("out").join(name)).unwrap();
        let b = fs::read(cfg.out_dir.join(name)).unwrap();
        assert!(a == b, "{name} differs");
    }
}

#[test]
fn missing_edges_file_fails_at_ingest() {
    let tmp = tempfile::tempdir().unwrap();
    write_fixture(tmp.path());
    fs::remove_file(tmp.path().join("edges.csv")).unwrap();
    let cfg = PipelineConfig::load(&tmp.path().join("run.cfg")).unwrap();
    let err = pipeline::run_pipeline(&cfg).unwrap_err();
    assert_eq!(err.stage(), Some("ingest"));
    assert!(err.to_string().contains("edges.csv"), "{err}");
}

#[test]
fn lattice_metrics() {
    let tmp = tempfile::tempdir().unwrap();
    write_fixture(tmp.path());
    let cfg = PipelineConfig::load(&tmp.path().join("run.cfg")).unwrap();
    let net = pipeline::ingest(&cfg).unwrap();
    let m = pipeline::metrics(&net, &cfg).unwrap();
    // 40 streets of 80 m over 0.1024 km2; 9 interior + 12 edge nodes have
    // degree >= 3
    assert!((m.total_road_length_km - 3.2).abs() < 1e-9);
    assert!((m.road_density - 3.2 / 0.1024).abs() < 1e-9);
    assert!((m.intersection_density - 21.0 / 0.1024).abs() < 1e-9);
    assert_eq!(m.avg_street_length_m, 80.0);
    assert!((m.bearing_entropy - 4f64.ln()).abs() < 1e-9);
}
