//! Versioned JSON network files.
//!
//! Floats are written with the shortest representation that parses back to
//! the identical `f64`, so a write/read round trip is lossless.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{make_pair, BoundaryTag, CoefficientScheme, Edge, Generator, Network, Node, PairKind};
use crate::{Error, Result};

pub const NETWORK_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct NetworkFile {
    format_version: u32,
    domain_side: f64,
    seed: u64,
    generator: Generator,
    scheme: Option<CoefficientScheme>,
    nodes: Vec<NodeRecord>,
    edges: Vec<EdgeRecord>,
    pairs: Vec<PairRecord>,
}

#[derive(Serialize, Deserialize)]
struct NodeRecord {
    id: usize,
    x: f64,
    y: f64,
    tag: BoundaryTag,
}

#[derive(Serialize, Deserialize)]
struct EdgeRecord {
    id: usize,
    i: usize,
    j: usize,
    k: f64,
    a: f64,
    w: f64,
    fiber: Option<usize>,
}

#[derive(Serialize, Deserialize)]
struct PairRecord {
    id: usize,
    e1: usize,
    e2: usize,
    center: usize,
    kappa: f64,
    #[serde(rename = "V")]
    volume: f64,
    eta: f64,
    gamma: f64,
    kind: PairKind,
}

pub fn write_network(network: &Network, path: &Path) -> Result<()> {
    let file = NetworkFile {
        format_version: NETWORK_FORMAT_VERSION,
        domain_side: network.domain_side,
        seed: network.seed,
        generator: network.generator.clone(),
        scheme: network.scheme.clone(),
        nodes: network
            .nodes
            .iter()
            .map(|n| NodeRecord {
                id: n.id,
                x: n.position[0],
                y: n.position[1],
                tag: n.tag,
            })
            .collect(),
        edges: network
            .edges
            .iter()
            .map(|e| EdgeRecord {
                id: e.id,
                i: e.nodes[0],
                j: e.nodes[1],
                k: e.k,
                a: e.a,
                w: e.w,
                fiber: e.fiber,
            })
            .collect(),
        pairs: network
            .pairs
            .iter()
            .map(|p| PairRecord {
                id: p.id,
                e1: p.edges[0],
                e2: p.edges[1],
                center: p.center,
                kappa: p.kappa,
                volume: p.volume,
                eta: p.eta,
                gamma: p.gamma,
                kind: p.kind,
            })
            .collect(),
    };
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    serde_json::to_writer(&mut w, &file).map_err(|e| Error::Format(e.to_string()))?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_network(path: &Path) -> Result<Network> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let file: NetworkFile = serde_json::from_reader(BufReader::new(f))
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    if file.format_version != NETWORK_FORMAT_VERSION {
        return Err(Error::Format(format!(
            "{}: unsupported network format version {} (expected {NETWORK_FORMAT_VERSION})",
            path.display(),
            file.format_version
        )));
    }
    let nodes: Vec<Node> = file
        .nodes
        .into_iter()
        .map(|n| Node {
            id: n.id,
            position: [n.x, n.y],
            tag: n.tag,
        })
        .collect();
    let edges: Vec<Edge> = file
        .edges
        .into_iter()
        .map(|e| Edge {
            id: e.id,
            nodes: [e.i, e.j],
            k: e.k,
            a: e.a,
            w: e.w,
            fiber: e.fiber,
        })
        .collect();
    let mut pairs = Vec::with_capacity(file.pairs.len());
    for p in file.pairs {
        if p.e1 >= edges.len() || p.e2 >= edges.len() {
            return Err(Error::Format(format!("pair {} references a missing edge", p.id)));
        }
        let mut pair = make_pair(p.id, &edges, [p.e1, p.e2], p.kind)?;
        if pair.center != p.center {
            return Err(Error::Format(format!("pair {} has inconsistent center", p.id)));
        }
        pair.kappa = p.kappa;
        pair.volume = p.volume;
        pair.eta = p.eta;
        pair.gamma = p.gamma;
        pairs.push(pair);
    }
    let net = Network {
        domain_side: file.domain_side,
        nodes,
        edges,
        pairs,
        seed: file.seed,
        generator: file.generator,
        scheme: file.scheme,
    };
    net.validate().map_err(|e| Error::Format(e.to_string()))?;
    Ok(net)
}
