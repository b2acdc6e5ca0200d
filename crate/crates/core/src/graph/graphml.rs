//! GraphML reader/writer for street-network exports.
//!
//! Nodes need numeric `x` (longitude) and `y` (latitude) data; edges need a
//! numeric `length`. Data keys are resolved through `<key attr.name=...>`
//! declarations, falling back to the raw key id when no declaration exists.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geodesy::GeoPoint;

use super::RoadNetwork;

const NS_LOCAL: &str = "graphml";

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
enum Domain {
    Node,
    Edge,
    All,
}

struct KeyMap(HashMap<(Domain, String), String>);

impl KeyMap {
    fn resolve<'a>(&'a self, domain: Domain, key: &'a str) -> &'a str {
        self.0
            .get(&(domain, key.to_string()))
            .or_else(|| self.0.get(&(Domain::All, key.to_string())))
            .map(String::as_str)
            .unwrap_or(key)
    }
}

fn data_fields<'a>(el: roxmltree::Node<'a, 'a>, keys: &'a KeyMap, domain: Domain) -> HashMap<&'a str, &'a str> {
    el.children()
        .filter(|c| c.tag_name().name() == "data")
        .filter_map(|c| {
            let key = c.attribute("key")?;
            Some((keys.resolve(domain, key), c.text().unwrap_or("").trim()))
        })
        .collect()
}

fn position(doc: &roxmltree::Document, node: roxmltree::Node) -> String {
    let pos = doc.text_pos_at(node.range().start);
    format!("line {}", pos.row)
}

/// Parses a GraphML document into a validated network.
pub fn load_graphml(xml: &str) -> Result<RoadNetwork> {
    let doc = roxmltree::Document::parse(xml).map_err(|e| Error::GraphMl(e.to_string()))?;
    let root = doc.root_element();
    if root.tag_name().name() != NS_LOCAL {
        return Err(Error::GraphMl(format!(
            "root element is <{}>, expected <graphml>",
            root.tag_name().name()
        )));
    }

    let mut keys = HashMap::new();
    for k in root.children().filter(|c| c.tag_name().name() == "key") {
        let (Some(id), Some(name)) = (k.attribute("id"), k.attribute("attr.name")) else {
            continue;
        };
        let domain = match k.attribute("for") {
            Some("node") => Domain::Node,
            Some("edge") => Domain::Edge,
            _ => Domain::All,
        };
        keys.insert((domain, id.to_string()), name.to_string());
    }
    let keys = KeyMap(keys);

    let graph = root
        .children()
        .find(|c| c.tag_name().name() == "graph")
        .ok_or_else(|| Error::GraphMl("no <graph> element".into()))?;
    let default_directed = graph.attribute("edgedefault") != Some("undirected");

    let mut b = RoadNetwork::builder();
    for n in graph.children().filter(|c| c.tag_name().name() == "node") {
        let id = n
            .attribute("id")
            .ok_or_else(|| Error::GraphMl(format!("node without id at {}", position(&doc, n))))?;
        let data = data_fields(n, &keys, Domain::Node);
        let coord = |name: &str| -> Result<f64> {
            let raw = data
                .get(name)
                .ok_or_else(|| Error::GraphMl(format!("node {id:?} has no {name:?} attribute")))?;
            raw.parse::<f64>().map_err(|_| {
                Error::GraphMl(format!(
                    "node {id:?} has non-numeric {name:?} value {raw:?} at {}",
                    position(&doc, n)
                ))
            })
        };
        let p = GeoPoint::new(coord("y")?, coord("x")?).map_err(|e| Error::GraphMl(format!("node {id:?}: {e}")))?;
        b.add_node(id, p);
    }

    let mut parallel: HashMap<(&str, &str), usize> = HashMap::new();
    for e in graph.children().filter(|c| c.tag_name().name() == "edge") {
        let (Some(u), Some(v)) = (e.attribute("source"), e.attribute("target")) else {
            return Err(Error::GraphMl(format!(
                "edge without source/target at {}",
                position(&doc, e)
            )));
        };
        let id = match e.attribute("id") {
            Some(id) => id.to_string(),
            None => {
                let k = parallel.entry((u, v)).or_insert(0);
                *k += 1;
                format!("{u}-{v}-{}", *k - 1)
            }
        };
        let data = data_fields(e, &keys, Domain::Edge);
        let raw = data
            .get("length")
            .ok_or_else(|| Error::GraphMl(format!("edge {id:?} has no \"length\" attribute")))?;
        let len = raw
            .parse::<f64>()
            .map_err(|_| Error::GraphMl(format!("edge {id:?} has non-numeric length {raw:?}")))?;
        let directed = match e.attribute("directed") {
            Some("true") => true,
            Some("false") => false,
            _ => default_directed,
        };
        if !directed {
            b.add_edge(format!("{id}~r"), v, u, len);
        }
        b.add_edge(id, u, v, len);
    }

    b.build()
}

pub fn read_graphml_file(path: &Path) -> Result<RoadNetwork> {
    let xml = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    load_graphml(&xml)
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

/// Writes a directed GraphML document with `x`, `y` and `length` keys.
pub fn write_graphml(net: &RoadNetwork, mut out: impl Write) -> Result<()> {
    let mut s = String::new();
    s.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    s.push_str("<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\">\n");
    s.push_str("  <key id=\"d0\" for=\"node\" attr.name=\"x\" attr.type=\"double\"/>\n");
    s.push_str("  <key id=\"d1\" for=\"node\" attr.name=\"y\" attr.type=\"double\"/>\n");
    s.push_str("  <key id=\"d2\" for=\"edge\" attr.name=\"length\" attr.type=\"double\"/>\n");
    s.push_str("  <graph edgedefault=\"directed\">\n");
    for n in net.nodes() {
        let p = net.point(n);
        let _ = writeln!(
            s,
            "    <node id=\"{}\"><data key=\"d0\">{}</data><data key=\"d1\">{}</data></node>",
            escape(net.node_id(n)),
            p.lon,
            p.lat
        );
    }
    for (_, e) in net.edges() {
        let _ = writeln!(
            s,
            "    <edge id=\"{}\" source=\"{}\" target=\"{}\"><data key=\"d2\">{}</data></edge>",
            escape(&e.id),
            escape(net.node_id(e.u)),
            escape(net.node_id(e.v)),
            e.length_m
        );
    }
    s.push_str("  </graph>\n</graphml>\n");
    out.write_all(s.as_bytes()).map_err(|e| Error::io("<graphml>", e))
}
