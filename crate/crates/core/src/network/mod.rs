//! Discrete network geometry: nodes, edges and edge pairs.
//!
//! Three generators are provided ([`generate_structured`],
//! [`generate_perturbed`], [`generate_fiber_network`]). Generators only fix
//! geometry and topology; material coefficients are attached afterwards by
//! [`assign_coefficients`].

mod coefficients;
mod fiber;
mod grid;
mod io;
mod prune;

use serde::{Deserialize, Serialize};

pub use coefficients::{
    assign_coefficients, BondCoefficients, CoefficientScheme, FiberCoefficients, UniformRange,
};
pub use fiber::{
    fiber_count_for_target_nodes, generate_fiber_network, BondPairs, FiberParams,
};
pub use grid::{generate_perturbed, generate_perturbed_with, generate_structured, generate_structured_with, PairSelection};
pub use io::{read_network, write_network, NETWORK_FORMAT_VERSION};
pub use prune::{prune, PruneReport};

/// Relative tolerance (times the domain side) for tagging boundary nodes.
pub const BOUNDARY_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryTag {
    Interior,
    Left,
    Right,
    Top,
    Bottom,
    Corner,
}

/// One side of the square domain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
    Top,
    Bottom,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Left, Side::Right, Side::Top, Side::Bottom];

    fn tag(self) -> BoundaryTag {
        match self {
            Side::Left => BoundaryTag::Left,
            Side::Right => BoundaryTag::Right,
            Side::Top => BoundaryTag::Top,
            Side::Bottom => BoundaryTag::Bottom,
        }
    }

    fn contains(self, p: [f64; 2], side: f64, tol: f64) -> bool {
        match self {
            Side::Left => p[0] <= tol,
            Side::Right => p[0] >= side - tol,
            Side::Bottom => p[1] <= tol,
            Side::Top => p[1] >= side - tol,
        }
    }
}

/// Tags a position by the sides of `[0, side]²` it lies on.
pub fn boundary_tag_for(p: [f64; 2], side: f64) -> BoundaryTag {
    let tol = BOUNDARY_TOL * side;
    let on: Vec<Side> = Side::ALL
        .into_iter()
        .filter(|s| s.contains(p, side, tol))
        .collect();
    match on.len() {
        0 => BoundaryTag::Interior,
        1 => on[0].tag(),
        _ => BoundaryTag::Corner,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Node {
    pub id: usize,
    /// Position in meters.
    pub position: [f64; 2],
    pub tag: BoundaryTag,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    pub id: usize,
    pub nodes: [usize; 2],
    /// Extension stiffness, Pa.
    pub k: f64,
    /// Cross-section area, m².
    pub a: f64,
    /// Width, m.
    pub w: f64,
    /// Generating fiber, absent for grid networks.
    pub fiber: Option<usize>,
}

impl Edge {
    /// The endpoint that is not `node`.
    pub fn other(&self, node: usize) -> usize {
        if self.nodes[0] == node {
            self.nodes[1]
        } else {
            debug_assert_eq!(self.nodes[1], node);
            self.nodes[0]
        }
    }

    pub fn contains(&self, node: usize) -> bool {
        self.nodes[0] == node || self.nodes[1] == node
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairKind {
    IntraFiber,
    InterFiberBond,
}

/// Two edges meeting at a shared `center` node.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgePair {
    pub id: usize,
    pub edges: [usize; 2],
    pub center: usize,
    /// Far endpoints of `edges[0]` and `edges[1]`.
    pub outer: [usize; 2],
    /// Angular stiffness, Pa.
    pub kappa: f64,
    /// Connection volume, m³.
    pub volume: f64,
    pub eta: f64,
    pub gamma: f64,
    pub kind: PairKind,
}

/// Which generator produced a network, with its parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Generator {
    Structured {
        m_fine: usize,
    },
    Perturbed {
        m_fine: usize,
        magnitude: f64,
    },
    Fiber {
        fiber_count: usize,
        fiber_length: f64,
        segments_per_fiber: usize,
    },
    /// Hand-built networks (tests, imports).
    Custom,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    /// Side length `s` of the domain `[0, s]²`, m.
    pub domain_side: f64,
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
    pub pairs: Vec<EdgePair>,
    pub seed: u64,
    pub generator: Generator,
    pub scheme: Option<CoefficientScheme>,
}

impl Network {
    /// Builds a network from raw positions and edge/pair index lists with unit
    /// coefficients. Boundary tags are derived from position.
    pub fn from_parts(
        domain_side: f64,
        positions: &[[f64; 2]],
        edges: &[[usize; 2]],
        pairs: &[([usize; 2], PairKind)],
    ) -> crate::Result<Self> {
        let nodes = positions
            .iter()
            .enumerate()
            .map(|(id, &p)| Node {
                id,
                position: p,
                tag: boundary_tag_for(p, domain_side),
            })
            .collect();
        let edges: Vec<Edge> = edges
            .iter()
            .enumerate()
            .map(|(id, &nodes)| Edge {
                id,
                nodes,
                k: 1.0,
                a: 1.0,
                w: 1.0,
                fiber: None,
            })
            .collect();
        let mut out = Vec::with_capacity(pairs.len());
        for (id, &(e, kind)) in pairs.iter().enumerate() {
            out.push(make_pair(id, &edges, e, kind)?);
        }
        let net = Network {
            domain_side,
            nodes,
            edges,
            pairs: out,
            seed: 0,
            generator: Generator::Custom,
            scheme: None,
        };
        net.validate()?;
        Ok(net)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn dof_count(&self) -> usize {
        2 * self.nodes.len()
    }

    pub fn positions(&self) -> Vec<[f64; 2]> {
        self.nodes.iter().map(|n| n.position).collect()
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        let [i, j] = self.edges[e].nodes;
        dist(self.nodes[i].position, self.nodes[j].position)
    }

    /// Nodes on the given side, corners included.
    pub fn side_nodes(&self, side: Side) -> Vec<usize> {
        let tol = BOUNDARY_TOL * self.domain_side;
        self.nodes
            .iter()
            .filter(|n| {
                n.tag == side.tag()
                    || (n.tag == BoundaryTag::Corner && side.contains(n.position, self.domain_side, tol))
            })
            .map(|n| n.id)
            .collect()
    }

    pub fn boundary_nodes(&self) -> Vec<usize> {
        self.nodes
            .iter()
            .filter(|n| n.tag != BoundaryTag::Interior)
            .map(|n| n.id)
            .collect()
    }

    /// Incident edge ids per node, in edge id order.
    pub fn incidence(&self) -> Vec<Vec<usize>> {
        let mut inc = vec![Vec::new(); self.nodes.len()];
        for e in &self.edges {
            inc[e.nodes[0]].push(e.id);
            inc[e.nodes[1]].push(e.id);
        }
        inc
    }

    /// Checks the structural invariants of the network.
    pub fn validate(&self) -> crate::Result<()> {
        use crate::Error;
        let s = self.domain_side;
        if !(s > 0.0) {
            return Err(Error::Geometry(format!("domain side {s} must be positive")));
        }
        let tol = BOUNDARY_TOL * s;
        for (k, n) in self.nodes.iter().enumerate() {
            if n.id != k {
                return Err(Error::Geometry(format!("node ids not dense at {k}")));
            }
            let [x, y] = n.position;
            if !(x >= -tol && x <= s + tol && y >= -tol && y <= s + tol) {
                return Err(Error::Geometry(format!("node {k} at ({x}, {y}) outside domain")));
            }
        }
        let mut seen = std::collections::HashSet::new();
        for (k, e) in self.edges.iter().enumerate() {
            if e.id != k {
                return Err(Error::Geometry(format!("edge ids not dense at {k}")));
            }
            let [i, j] = e.nodes;
            if i >= self.nodes.len() || j >= self.nodes.len() || i == j {
                return Err(Error::Geometry(format!("edge {k} has invalid nodes ({i}, {j})")));
            }
            if !seen.insert((i.min(j), i.max(j))) {
                return Err(Error::Geometry(format!("duplicate edge between nodes {i} and {j}")));
            }
            if !(self.edge_length(k) > 0.0) {
                return Err(Error::Geometry(format!("edge {k} has zero length")));
            }
        }
        for (k, p) in self.pairs.iter().enumerate() {
            if p.id != k {
                return Err(Error::Geometry(format!("pair ids not dense at {k}")));
            }
            let [e1, e2] = p.edges;
            if e1 >= self.edges.len() || e2 >= self.edges.len() || e1 == e2 {
                return Err(Error::Geometry(format!("pair {k} references invalid edges")));
            }
            let (a, b) = (&self.edges[e1], &self.edges[e2]);
            if !a.contains(p.center) || !b.contains(p.center) {
                return Err(Error::Geometry(format!("pair {k}: edges do not share center {}", p.center)));
            }
            if a.other(p.center) != p.outer[0] || b.other(p.center) != p.outer[1] || p.outer[0] == p.outer[1] {
                return Err(Error::Geometry(format!("pair {k} has inconsistent outer nodes")));
            }
        }
        Ok(())
    }
}

pub(crate) fn make_pair(id: usize, edges: &[Edge], e: [usize; 2], kind: PairKind) -> crate::Result<EdgePair> {
    let (a, b) = (&edges[e[0]], &edges[e[1]]);
    let center = if b.contains(a.nodes[0]) {
        a.nodes[0]
    } else if b.contains(a.nodes[1]) {
        a.nodes[1]
    } else {
        return Err(crate::Error::Geometry(format!(
            "edges {} and {} share no node",
            e[0], e[1]
        )));
    };
    Ok(EdgePair {
        id,
        edges: e,
        center,
        outer: [a.other(center), b.other(center)],
        kappa: 1.0,
        volume: 1.0,
        eta: 1.0,
        gamma: 1.0,
        kind,
    })
}

pub(crate) fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}
