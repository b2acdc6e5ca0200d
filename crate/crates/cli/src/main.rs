use std::fs::{self, File};
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use pathstab::graph::{write_edges_csv, write_graphml, write_nodes_csv};
use pathstab::pipeline::{self, files, PipelineConfig};
use pathstab::synth::{generate, SynthKind, SynthSpec};
use pathstab::GeoPoint;

#[derive(Parser, Debug)]
#[command(name = "pathstab", version, about = "Shortest-path stability of road networks")]
struct Cli {
    /// Configuration file of `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    #[arg(long, global = true)]
    workers: Option<usize>,

    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    #[command(flatten)]
    settings: Settings,

    #[command(subcommand)]
    command: Command,
}

/// Overrides for configuration keys; each flag sets the key of the same
/// name (dashes become underscores).
#[derive(Args, Debug, Default)]
struct Settings {
    #[arg(long, global = true)]
    city: Option<String>,
    #[arg(long, global = true)]
    nodes: Option<String>,
    #[arg(long, global = true)]
    edges: Option<String>,
    #[arg(long, global = true)]
    graphml: Option<String>,
    #[arg(long, global = true)]
    od_pairs: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    center_lat: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    center_lon: Option<String>,
    #[arg(long, global = true)]
    area_km2: Option<String>,
    #[arg(long, global = true)]
    r_min_km: Option<String>,
    #[arg(long, global = true)]
    r_max_km: Option<String>,
    #[arg(long, global = true)]
    r_step_km: Option<String>,
    #[arg(long, global = true)]
    n_points: Option<String>,
    #[arg(long, global = true)]
    match_threshold_m: Option<String>,
    #[arg(long, global = true)]
    delta_min_m: Option<String>,
    #[arg(long, global = true)]
    delta_max_m: Option<String>,
    #[arg(long, global = true)]
    k_sectors: Option<String>,
    #[arg(long, global = true)]
    filter_percentile: Option<String>,
    #[arg(long, global = true)]
    bearing_bins: Option<String>,
    #[arg(long, global = true)]
    weighted_entropy: Option<String>,
    #[arg(long, global = true)]
    kmeans_k: Option<String>,
    #[arg(long, global = true)]
    kmeans_restarts: Option<String>,
    #[arg(long, global = true)]
    elbow_k_max: Option<String>,
    #[arg(long, global = true)]
    map_low_pct: Option<String>,
    #[arg(long, global = true)]
    map_high_pct: Option<String>,
}

impl Settings {
    fn pairs(&self) -> Vec<(&'static str, &Option<String>)> {
        vec![
            ("city", &self.city),
            ("nodes", &self.nodes),
            ("edges", &self.edges),
            ("graphml", &self.graphml),
            ("od_pairs", &self.od_pairs),
            ("center_lat", &self.center_lat),
            ("center_lon", &self.center_lon),
            ("area_km2", &self.area_km2),
            ("r_min_km", &self.r_min_km),
            ("r_max_km", &self.r_max_km),
            ("r_step_km", &self.r_step_km),
            ("n_points", &self.n_points),
            ("match_threshold_m", &self.match_threshold_m),
            ("delta_min_m", &self.delta_min_m),
            ("delta_max_m", &self.delta_max_m),
            ("k_sectors", &self.k_sectors),
            ("filter_percentile", &self.filter_percentile),
            ("bearing_bins", &self.bearing_bins),
            ("weighted_entropy", &self.weighted_entropy),
            ("kmeans_k", &self.kmeans_k),
            ("kmeans_restarts", &self.kmeans_restarts),
            ("elbow_k_max", &self.elbow_k_max),
            ("map_low_pct", &self.map_low_pct),
            ("map_high_pct", &self.map_high_pct),
        ]
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Load the network and write canonical node and edge tables.
    Ingest,
    /// Draw OD pairs on concentric circles (or read an explicit list).
    Sample,
    /// Select perturbed destinations and filter abnormal detours.
    Perturb,
    /// Per-OD and per-destination stability.
    Stability,
    /// Street-network metrics.
    Metrics,
    /// Fit, correlations and clustering over one or more run directories.
    Analyze {
        /// Run directory to include; repeat for several cities. Defaults to
        /// the output directory.
        #[arg(long = "run")]
        runs: Vec<PathBuf>,
    },
    /// GeoJSON map of destination stability.
    Map,
    /// Every stage in order, plus a manifest.
    Run,
    /// Generate a synthetic network plus a starter `network.cfg`.
    Synth {
        #[arg(long, value_parser = parse_kind)]
        kind: SynthKind,
        #[arg(long)]
        extent_km: f64,
        #[arg(long, default_value_t = 100.0)]
        spacing_m: f64,
        #[arg(long, default_value_t = 0.0)]
        one_way_fraction: f64,
        #[arg(long = "lat", default_value_t = 0.0, allow_hyphen_values = true)]
        lat: f64,
        #[arg(long = "lon", default_value_t = 0.0, allow_hyphen_values = true)]
        lon: f64,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Csv,
    Graphml,
}

fn parse_kind(s: &str) -> std::result::Result<SynthKind, String> {
    s.parse().map_err(|e: pathstab::Error| e.to_string())
}

fn config(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path).with_context(|| format!("reading {}", path.display()))?,
        None => PipelineConfig::default(),
    };
    for (key, value) in cli.settings.pairs() {
        if let Some(v) = value {
            cfg.set(key, v, None)
                .with_context(|| format!("--{}", key.replace('_', "-")))?;
        }
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    if let Some(d) = &cli.out_dir {
        cfg.out_dir = d.clone();
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    let cfg = config(&cli)?;
    let out = &cfg.out_dir;
    match &cli.command {
        Command::Ingest => {
            let (net, _) = pipeline::run_ingest(&cfg)?;
            println!("{} nodes, {} edges", net.node_count(), net.edge_count());
        }
        Command::Sample => {
            let (net, _) = pipeline::run_ingest(&cfg)?;
            let pairs = pipeline::run_sample(&net, &cfg)?;
            println!("{} OD pairs", pairs.len());
        }
        Command::Perturb => {
            let (net, _) = pipeline::run_ingest(&cfg)?;
            let pool = pipeline::thread_pool(cfg.workers)?;
            let pairs = files::read_od_pairs(&net, &out.join(files::OD_PAIRS)).map_err(|e| e.in_stage("perturb"))?;
            let (_, report) = pipeline::run_perturb(&net, &pairs, &cfg, &pool)?;
            println!(
                "threshold ratio {}; {} of {} perturbations retained",
                report.threshold_ratio, report.retained, report.entries
            );
        }
        Command::Stability => {
            let (net, _) = pipeline::run_ingest(&cfg)?;
            let pool = pipeline::thread_pool(cfg.workers)?;
            let (pairs, (sets, report)) = (|| {
                let pairs = files::read_od_pairs(&net, &out.join(files::OD_PAIRS))?;
                Ok::<_, pathstab::Error>((pairs, pipeline::load_filtered(&net, out)?))
            })()
            .map_err(|e| e.in_stage("stability"))?;
            let (records, summary) = pipeline::run_stability(&net, &pairs, &sets, report.threshold_ratio, &cfg, &pool)?;
            println!(
                "{} records, median stability {}",
                records.len(),
                summary.stability.median
            );
        }
        Command::Metrics => {
            let (net, _) = pipeline::run_ingest(&cfg)?;
            let m = pipeline::run_metrics(&net, &cfg)?;
            println!("bearing entropy {}, avg circuity {}", m.bearing_entropy, m.avg_circuity);
        }
        Command::Analyze { runs } => {
            let dirs = if runs.is_empty() {
                vec![out.clone()]
            } else {
                runs.clone()
            };
            let report = pipeline::run_analyze(&dirs, &cfg)?;
            match &report.fit {
                Some(f) => println!("fit a={} b={} c={} r2={}", f.a, f.b, f.c, f.r_squared),
                None => println!("no fit: {}", report.fit_note.as_deref().unwrap_or("")),
            }
        }
        Command::Map => {
            let doc = pipeline::run_map(&cfg)?;
            println!("{} features", doc["features"].as_array().map_or(0, Vec::len));
        }
        Command::Run => {
            let manifest = pipeline::run_pipeline(&cfg)?;
            println!(
                "{} stability records from {} OD pairs; outputs in {}",
                manifest["counts"]["stability_records"],
                manifest["counts"]["od_pairs"],
                out.display()
            );
        }
        Command::Synth {
            kind,
            extent_km,
            spacing_m,
            one_way_fraction,
            lat,
            lon,
            format,
        } => {
            let spec = SynthSpec {
                kind: *kind,
                extent_km: *extent_km,
                spacing_m: *spacing_m,
                seed: cfg.seed,
                one_way_fraction: *one_way_fraction,
                center: GeoPoint::new(*lat, *lon)?,
            };
            let net = generate(&spec)?;
            fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
            let create = |name: &str| -> Result<BufWriter<File>> {
                let p = out.join(name);
                Ok(BufWriter::new(
                    File::create(&p).with_context(|| format!("creating {}", p.display()))?,
                ))
            };
            let inputs = match format {
                Format::Csv => {
                    write_nodes_csv(&net, create("nodes.csv")?)?;
                    write_edges_csv(&net, create("edges.csv")?)?;
                    "nodes = nodes.csv\nedges = edges.csv\n"
                }
                Format::Graphml => {
                    write_graphml(&net, create("network.graphml")?)?;
                    "graphml = network.graphml\n"
                }
            };
            // Starter config next to the network; the area is only known here.
            let area = net.area_km2().unwrap_or(0.0);
            let text = format!("city = {kind}\n{inputs}area_km2 = {area}\nseed = {}\n", cfg.seed);
            let cfg_path = out.join("network.cfg");
            fs::write(&cfg_path, text).with_context(|| format!("writing {}", cfg_path.display()))?;
            println!(
                "{} nodes, {} edges, area {area} km2",
                net.node_count(),
                net.edge_count()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
