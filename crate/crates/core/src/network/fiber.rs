//! Unordered fiber networks: straight fibers dropped at random, with every
//! crossing turned into a shared node.

use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{boundary_tag_for, dist, make_pair, prune, Edge, Generator, Network, Node, PairKind, Side};
use crate::{Error, Result};

/// How many bond pairs are created where two fibers cross.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BondPairs {
    /// Every edge of one fiber with every edge of the other (up to four).
    #[default]
    AllQuadrants,
    /// One pair per crossing fiber pair.
    Single,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiberParams {
    pub domain_side: f64,
    pub fiber_count: usize,
    pub fiber_length: f64,
    pub segments_per_fiber: usize,
    pub seed: u64,
    #[serde(default)]
    pub bond_pairs: BondPairs,
    /// Crossings closer than `snap_tolerance · domain_side` to an existing
    /// point are merged into it.
    #[serde(default = "default_snap")]
    pub snap_tolerance: f64,
}

fn default_snap() -> f64 {
    1e-9
}

impl FiberParams {
    pub fn new(domain_side: f64, fiber_count: usize, fiber_length: f64, segments_per_fiber: usize, seed: u64) -> Self {
        Self {
            domain_side,
            fiber_count,
            fiber_length,
            segments_per_fiber,
            seed,
            bond_pairs: BondPairs::default(),
            snap_tolerance: default_snap(),
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.domain_side > 0.0) || !self.domain_side.is_finite() {
            return Err(Error::invalid("domain_side", "must be positive"));
        }
        if !(self.fiber_length > 0.0 && self.fiber_length < self.domain_side) {
            return Err(Error::invalid(
                "fiber_length",
                format!("must lie in (0, domain_side), got {}", self.fiber_length),
            ));
        }
        if self.segments_per_fiber < 1 {
            return Err(Error::invalid("segments_per_fiber", "must be at least 1"));
        }
        if self.fiber_count < 2 {
            return Err(Error::invalid("fiber_count", "must be at least 2"));
        }
        if !(self.snap_tolerance > 0.0 && self.snap_tolerance < 1e-2) {
            return Err(Error::invalid("snap_tolerance", "must lie in (0, 1e-2)"));
        }
        Ok(())
    }
}

/// A fiber after clipping to the domain.
#[derive(Clone, Copy, Debug)]
struct Segment {
    p0: [f64; 2],
    p1: [f64; 2],
}

impl Segment {
    fn at(&self, t: f64) -> [f64; 2] {
        if t == 0.0 {
            self.p0
        } else if t == 1.0 {
            self.p1
        } else {
            [
                self.p0[0] + t * (self.p1[0] - self.p0[0]),
                self.p0[1] + t * (self.p1[1] - self.p0[1]),
            ]
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Crossing {
    a: usize,
    b: usize,
    ta: f64,
    tb: f64,
    point: [f64; 2],
}

/// Generates, connects and prunes a random fiber network.
pub fn generate_fiber_network(params: &FiberParams) -> Result<Network> {
    params.validate()?;
    let s = params.domain_side;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let fibers: Vec<Segment> = (0..params.fiber_count)
        .map(|_| {
            let mid = [rng.random_range(0.0..s), rng.random_range(0.0..s)];
            let theta = rng.random_range(0.0..std::f64::consts::PI);
            place_fiber(mid, theta, params.fiber_length, s)
        })
        .collect();

    let crossings = find_crossings(&fibers, params.fiber_length, s);
    let raw = connect(&fibers, &crossings, params)?;
    let (net, _) = prune(raw)?;
    for side in Side::ALL {
        if net.side_nodes(side).is_empty() {
            return Err(Error::Geometry(format!(
                "pruned fiber network ({} nodes) does not reach the {side:?} boundary; increase fiber_count or fiber_length",
                net.nodes.len()
            )));
        }
    }
    Ok(net)
}

fn place_fiber(mid: [f64; 2], theta: f64, length: f64, s: f64) -> Segment {
    let d = [theta.cos(), theta.sin()];
    let half = 0.5 * length;
    let a = [mid[0] - half * d[0], mid[1] - half * d[1]];
    let b = [mid[0] + half * d[0], mid[1] + half * d[1]];
    // Liang-Barsky clip of a + t (b - a), t in [0, 1]
    let delta = [b[0] - a[0], b[1] - a[1]];
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    for axis in 0..2 {
        if delta[axis] == 0.0 {
            continue;
        }
        let ta = (0.0 - a[axis]) / delta[axis];
        let tb = (s - a[axis]) / delta[axis];
        let (lo, hi) = if ta < tb { (ta, tb) } else { (tb, ta) };
        t0 = t0.max(lo);
        t1 = t1.min(hi);
    }
    let clamp = |p: [f64; 2]| {
        let snap = |v: f64| {
            if v.abs() <= 1e-12 * s || v < 0.0 {
                0.0
            } else if (v - s).abs() <= 1e-12 * s || v > s {
                s
            } else {
                v
            }
        };
        [snap(p[0]), snap(p[1])]
    };
    let p0 = clamp([a[0] + t0 * delta[0], a[1] + t0 * delta[1]]);
    let p1 = clamp([a[0] + t1 * delta[0], a[1] + t1 * delta[1]]);
    Segment { p0, p1 }
}

fn cross(u: [f64; 2], v: [f64; 2]) -> f64 {
    u[0] * v[1] - u[1] * v[0]
}

fn intersect(a: &Segment, b: &Segment) -> Option<(f64, f64, [f64; 2])> {
    let r = [a.p1[0] - a.p0[0], a.p1[1] - a.p0[1]];
    let q = [b.p1[0] - b.p0[0], b.p1[1] - b.p0[1]];
    let denom = cross(r, q);
    let scale = (r[0].hypot(r[1])) * (q[0].hypot(q[1]));
    if denom.abs() <= 1e-12 * scale {
        return None;
    }
    let w = [b.p0[0] - a.p0[0], b.p0[1] - a.p0[1]];
    let ta = cross(w, q) / denom;
    let tb = cross(w, r) / denom;
    if !(0.0..=1.0).contains(&ta) || !(0.0..=1.0).contains(&tb) {
        return None;
    }
    Some((ta, tb, a.at(ta)))
}

/// All pairwise fiber crossings, sorted by fiber pair.
fn find_crossings(fibers: &[Segment], fiber_length: f64, s: f64) -> Vec<Crossing> {
    // uniform bucket grid with cells about one fiber length wide
    let cells = ((s / fiber_length).floor() as usize).clamp(1, 256);
    let cell_of = |v: f64| (((v / s) * cells as f64) as usize).min(cells - 1);
    let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); cells * cells];
    for (f, seg) in fibers.iter().enumerate() {
        let (x0, x1) = (seg.p0[0].min(seg.p1[0]), seg.p0[0].max(seg.p1[0]));
        let (y0, y1) = (seg.p0[1].min(seg.p1[1]), seg.p0[1].max(seg.p1[1]));
        for cy in cell_of(y0)..=cell_of(y1) {
            for cx in cell_of(x0)..=cell_of(x1) {
                buckets[cy * cells + cx].push(f);
            }
        }
    }
    let mut candidates: Vec<(usize, usize)> = buckets
        .iter()
        .flat_map(|b| {
            b.iter()
                .enumerate()
                .flat_map(move |(k, &i)| b[k + 1..].iter().map(move |&j| (i.min(j), i.max(j))))
        })
        .collect();
    candidates.sort_unstable();
    candidates.dedup();
    candidates
        .par_iter()
        .filter_map(|&(a, b)| {
            intersect(&fibers[a], &fibers[b]).map(|(ta, tb, point)| Crossing { a, b, ta, tb, point })
        })
        .collect()
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn add(&mut self) -> usize {
        self.parent.push(self.parent.len());
        self.parent.len() - 1
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// The smaller id becomes the root.
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = (ra.min(rb), ra.max(rb));
            self.parent[hi] = lo;
        }
    }
}

fn connect(fibers: &[Segment], crossings: &[Crossing], params: &FiberParams) -> Result<Network> {
    let s = params.domain_side;
    let eps = params.snap_tolerance * s;
    let nseg = params.segments_per_fiber;

    let mut points: Vec<[f64; 2]> = Vec::new();
    let mut uf = UnionFind { parent: Vec::new() };
    // (parameter along fiber, point id)
    let mut along: Vec<Vec<(f64, usize)>> = Vec::with_capacity(fibers.len());
    for seg in fibers {
        let mut list = Vec::with_capacity(nseg + 1);
        for k in 0..=nseg {
            let t = k as f64 / nseg as f64;
            points.push(seg.at(t));
            list.push((t, uf.add()));
        }
        along.push(list);
    }
    let subdivision = |f: usize, k: usize| f * (nseg + 1) + k;

    let snap = |f: usize, t: f64, x: [f64; 2], points: &[[f64; 2]]| -> Option<usize> {
        let k = ((t * nseg as f64) as usize).min(nseg - 1);
        [subdivision(f, k), subdivision(f, k + 1)]
            .into_iter()
            .find(|&p| dist(points[p], x) < eps)
    };

    for c in crossings {
        let pa = snap(c.a, c.ta, c.point, &points);
        let pb = snap(c.b, c.tb, c.point, &points);
        match (pa, pb) {
            (Some(p), Some(q)) => uf.union(p, q),
            (Some(p), None) => along[c.b].push((c.tb, p)),
            (None, Some(q)) => along[c.a].push((c.ta, q)),
            (None, None) => {
                points.push(c.point);
                let id = uf.add();
                along[c.a].push((c.ta, id));
                along[c.b].push((c.tb, id));
            }
        }
    }

    // merge points closer than eps along each fiber
    for list in &mut along {
        list.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
        for k in 1..list.len() {
            let (p, q) = (list[k - 1].1, list[k].1);
            let (rp, rq) = (uf.find(p), uf.find(q));
            if rp != rq && dist(points[rp], points[rq]) < eps {
                uf.union(rp, rq);
            }
        }
    }

    let mut node_of_root = vec![usize::MAX; points.len()];
    let mut nodes = Vec::new();
    for p in 0..points.len() {
        let r = uf.find(p);
        if r == p {
            node_of_root[p] = nodes.len();
            nodes.push(Node {
                id: nodes.len(),
                position: points[p],
                tag: boundary_tag_for(points[p], s),
            });
        }
    }

    let mut edges: Vec<Edge> = Vec::new();
    let mut edge_index: HashMap<(usize, usize), usize> = HashMap::new();
    let mut fiber_edges: Vec<Vec<usize>> = Vec::with_capacity(fibers.len());
    for (f, list) in along.iter().enumerate() {
        let mut seq: Vec<usize> = list.iter().map(|&(_, p)| node_of_root[uf.find(p)]).collect();
        seq.dedup();
        let mut chain = Vec::with_capacity(seq.len());
        for w in seq.windows(2) {
            let key = (w[0].min(w[1]), w[0].max(w[1]));
            let id = *edge_index.entry(key).or_insert_with(|| {
                edges.push(Edge {
                    id: edges.len(),
                    nodes: [w[0], w[1]],
                    k: 1.0,
                    a: 1.0,
                    w: 1.0,
                    fiber: Some(f),
                });
                edges.len() - 1
            });
            chain.push(id);
        }
        fiber_edges.push(chain);
    }

    let mut pairs = Vec::new();
    for chain in &fiber_edges {
        for w in chain.windows(2) {
            if w[0] != w[1] {
                if let Ok(p) = make_pair(pairs.len(), &edges, [w[0], w[1]], PairKind::IntraFiber) {
                    if p.outer[0] != p.outer[1] {
                        pairs.push(p);
                    }
                }
            }
        }
    }

    let mut incident: Vec<BTreeMap<usize, Vec<usize>>> = vec![BTreeMap::new(); nodes.len()];
    for e in &edges {
        let f = e.fiber.expect("fiber edges carry a fiber id");
        for n in e.nodes {
            incident[n].entry(f).or_default().push(e.id);
        }
    }
    for (center, by_fiber) in incident.iter().enumerate() {
        let groups: Vec<&Vec<usize>> = by_fiber.values().collect();
        for ga in 0..groups.len() {
            for gb in ga + 1..groups.len() {
                let combos: Vec<(usize, usize)> = match params.bond_pairs {
                    BondPairs::AllQuadrants => groups[ga]
                        .iter()
                        .flat_map(|&x| groups[gb].iter().map(move |&y| (x, y)))
                        .collect(),
                    BondPairs::Single => vec![(groups[ga][0], groups[gb][0])],
                };
                for (x, y) in combos {
                    let p = make_pair(pairs.len(), &edges, [x, y], PairKind::InterFiberBond)?;
                    debug_assert_eq!(p.center, center);
                    if p.outer[0] != p.outer[1] {
                        pairs.push(p);
                    }
                }
            }
        }
    }

    Ok(Network {
        domain_side: s,
        nodes,
        edges,
        pairs,
        seed: params.seed,
        generator: Generator::Fiber {
            fiber_count: params.fiber_count,
            fiber_length: params.fiber_length,
            segments_per_fiber: params.segments_per_fiber,
        },
        scheme: None,
    })
}

/// Searches for the fiber count whose pruned network has roughly
/// `target_nodes` nodes (within 2% or after a fixed number of refinements).
pub fn fiber_count_for_target_nodes(template: &FiberParams, target_nodes: usize) -> Result<usize> {
    if target_nodes < 10 {
        return Err(Error::invalid("target_nodes", "must be at least 10"));
    }
    let s = template.domain_side;
    let l = template.fiber_length;
    let per_fiber = (template.segments_per_fiber + 1) as f64;
    // expected crossings ≈ N² l² / (π s²)
    let c = l * l / (std::f64::consts::PI * s * s);
    let t = target_nodes as f64;
    let guess = (-per_fiber + (per_fiber * per_fiber + 4.0 * c * t).sqrt()) / (2.0 * c);
    let mut count = (guess.round() as usize).max(2);
    let mut best = (usize::MAX, count);
    for _ in 0..12 {
        let mut p = template.clone();
        p.fiber_count = count;
        let nodes = match generate_fiber_network(&p) {
            Ok(net) => net.nodes.len(),
            Err(Error::Geometry(_)) => {
                count = count * 3 / 2 + 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        let miss = nodes.abs_diff(target_nodes);
        if miss < best.0 {
            best = (miss, count);
        }
        if (miss as f64) <= 0.02 * t {
            break;
        }
        let next = ((count as f64) * (t / nodes as f64).powf(0.6)).round() as usize;
        let next = next.max(2);
        if next == count {
            break;
        }
        count = next;
    }
    if best.0 == usize::MAX {
        return Err(Error::Geometry(format!(
            "no fiber count reached a connected network near {target_nodes} nodes"
        )));
    }
    Ok(best.1)
}
