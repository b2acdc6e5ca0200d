use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::geodesy::GeoPoint;

use super::RoadNetwork;

const NODE_COLUMNS: [&str; 3] = ["node_id", "lat", "lon"];
const EDGE_COLUMNS: [&str; 4] = ["edge_id", "u", "v", "length_m"];

struct Table<R: Read> {
    reader: csv::Reader<R>,
    cols: Vec<usize>,
    name: &'static str,
}

impl<R: Read> Table<R> {
    fn open(src: R, required: &[&str], name: &'static str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(src);
        let headers = reader.headers()?.clone();
        let cols = required
            .iter()
            .map(|c| {
                headers.iter().position(|h| h == *c).ok_or_else(|| Error::Parse {
                    line: 1,
                    message: format!("{name} table missing column {c:?}"),
                })
            })
            .collect::<Result<_>>()?;
        Ok(Table { reader, cols, name })
    }

    fn for_each(mut self, mut f: impl FnMut(u64, Vec<&str>) -> Result<()>) -> Result<()> {
        let mut record = csv::StringRecord::new();
        loop {
            let more = self.reader.read_record(&mut record).map_err(|e| {
                let line = e.position().map_or(0, |p| p.line());
                Error::Parse {
                    line,
                    message: format!("{} table: {e}", self.name),
                }
            })?;
            if !more {
                return Ok(());
            }
            let line = record.position().map_or(0, |p| p.line());
            let fields = self.cols.iter().map(|&c| record.get(c).unwrap_or("")).collect();
            f(line, fields)?;
        }
    }
}

fn parse_f64(s: &str, what: &str, line: u64) -> Result<f64> {
    s.parse::<f64>().map_err(|_| Error::Parse {
        line,
        message: format!("{what}: expected a number, got {s:?}"),
    })
}

/// Builds a network from the canonical node (`node_id,lat,lon`) and edge
/// (`edge_id,u,v,length_m`) tables.
pub fn load_network(nodes: impl Read, edges: impl Read) -> Result<RoadNetwork> {
    let mut b = RoadNetwork::builder();

    Table::open(nodes, &NODE_COLUMNS, "nodes")?.for_each(|line, f| {
        let lat = parse_f64(f[1], "lat", line)?;
        let lon = parse_f64(f[2], "lon", line)?;
        let p = GeoPoint::new(lat, lon).map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        if f[0].is_empty() {
            return Err(Error::Parse {
                line,
                message: "empty node_id".into(),
            });
        }
        b.add_node(f[0], p);
        Ok(())
    })?;

    Table::open(edges, &EDGE_COLUMNS, "edges")?.for_each(|line, f| {
        let len = parse_f64(f[3], "length_m", line)?;
        if f[0].is_empty() {
            return Err(Error::Parse {
                line,
                message: "empty edge_id".into(),
            });
        }
        b.add_edge(f[0], f[1], f[2], len);
        Ok(())
    })?;

    b.build()
}

pub fn read_network_files(nodes: &Path, edges: &Path) -> Result<RoadNetwork> {
    let n = File::open(nodes).map_err(|e| Error::io(nodes, e))?;
    let e = File::open(edges).map_err(|e| Error::io(edges, e))?;
    load_network(n, e)
}

pub fn write_nodes_csv(net: &RoadNetwork, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(NODE_COLUMNS)?;
    for n in net.nodes() {
        let p = net.point(n);
        w.write_record([net.node_id(n), &p.lat.to_string(), &p.lon.to_string()])?;
    }
    w.flush().map_err(|e| Error::io("<nodes csv>", e))?;
    Ok(())
}

pub fn write_edges_csv(net: &RoadNetwork, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(EDGE_COLUMNS)?;
    for (_, e) in net.edges() {
        w.write_record([
            e.id.as_str(),
            net.node_id(e.u),
            net.node_id(e.v),
            &e.length_m.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<edges csv>", e))?;
    Ok(())
}
