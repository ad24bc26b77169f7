use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{make_pair, BoundaryTag, Edge, Generator, Network, Node, PairKind};
use crate::{Error, Result};

/// Which edge pairs a grid generator creates at each node.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairSelection {
    /// Every unordered pair of incident edges.
    #[default]
    All,
    /// Only straight pairs (both edges along the same grid line).
    Collinear,
    /// Only right-angle pairs.
    Perpendicular,
}

/// Equidistant `(m_fine+1)²` grid on `[0, side]²` with all edge pairs.
pub fn generate_structured(m_fine: usize, domain_side: f64) -> Result<Network> {
    generate_structured_with(m_fine, domain_side, PairSelection::All)
}

pub fn generate_structured_with(m_fine: usize, domain_side: f64, selection: PairSelection) -> Result<Network> {
    if m_fine < 2 {
        return Err(Error::invalid("m_fine", format!("must be at least 2, got {m_fine}")));
    }
    if !(domain_side > 0.0) || !domain_side.is_finite() {
        return Err(Error::invalid("domain_side", format!("must be positive, got {domain_side}")));
    }
    let m = m_fine;
    let side = m + 1;
    let coord = |k: usize| domain_side * k as f64 / m as f64;
    let mut nodes = Vec::with_capacity(side * side);
    for iy in 0..side {
        for ix in 0..side {
            let on_x = ix == 0 || ix == m;
            let on_y = iy == 0 || iy == m;
            let tag = match (on_x, on_y) {
                (true, true) => BoundaryTag::Corner,
                (true, false) if ix == 0 => BoundaryTag::Left,
                (true, false) => BoundaryTag::Right,
                (false, true) if iy == 0 => BoundaryTag::Bottom,
                (false, true) => BoundaryTag::Top,
                (false, false) => BoundaryTag::Interior,
            };
            nodes.push(Node {
                id: iy * side + ix,
                position: [coord(ix), coord(iy)],
                tag,
            });
        }
    }

    // horizontal flag per edge, used for collinearity classification
    let mut edges = Vec::with_capacity(2 * m * side);
    let mut horizontal = Vec::with_capacity(2 * m * side);
    for iy in 0..side {
        for ix in 0..side {
            let n = iy * side + ix;
            if ix < m {
                horizontal.push(true);
                edges.push(unit_edge(edges.len(), [n, n + 1]));
            }
            if iy < m {
                horizontal.push(false);
                edges.push(unit_edge(edges.len(), [n, n + side]));
            }
        }
    }

    let mut net = Network {
        domain_side,
        nodes,
        edges,
        pairs: Vec::new(),
        seed: 0,
        generator: Generator::Structured { m_fine },
        scheme: None,
    };
    let incidence = net.incidence();
    let mut pairs = Vec::new();
    for inc in &incidence {
        for a in 0..inc.len() {
            for b in a + 1..inc.len() {
                let (ea, eb) = (inc[a], inc[b]);
                let straight = horizontal[ea] == horizontal[eb];
                let keep = match selection {
                    PairSelection::All => true,
                    PairSelection::Collinear => straight,
                    PairSelection::Perpendicular => !straight,
                };
                if keep {
                    pairs.push(make_pair(pairs.len(), &net.edges, [ea, eb], PairKind::IntraFiber)?);
                }
            }
        }
    }
    net.pairs = pairs;
    Ok(net)
}

fn unit_edge(id: usize, nodes: [usize; 2]) -> Edge {
    Edge {
        id,
        nodes,
        k: 1.0,
        a: 1.0,
        w: 1.0,
        fiber: None,
    }
}

/// Structured grid with every node displaced by a uniform random offset of at
/// most `magnitude · h` per axis. Boundary nodes only slide along their side
/// and corners stay fixed, so the domain square is preserved.
pub fn generate_perturbed(m_fine: usize, domain_side: f64, magnitude: f64, seed: u64) -> Result<Network> {
    generate_perturbed_with(m_fine, domain_side, magnitude, seed, PairSelection::All)
}

pub fn generate_perturbed_with(
    m_fine: usize,
    domain_side: f64,
    magnitude: f64,
    seed: u64,
    selection: PairSelection,
) -> Result<Network> {
    if !(0.0..0.5).contains(&magnitude) {
        return Err(Error::invalid(
            "magnitude",
            format!("must lie in [0, 0.5), got {magnitude}"),
        ));
    }
    let mut net = generate_structured_with(m_fine, domain_side, selection)?;
    let h = domain_side / m_fine as f64;
    let r = magnitude * h;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for node in &mut net.nodes {
        let dx = rng.random_range(-r..=r);
        let dy = rng.random_range(-r..=r);
        match node.tag {
            BoundaryTag::Interior => {
                node.position[0] += dx;
                node.position[1] += dy;
            }
            BoundaryTag::Left | BoundaryTag::Right => node.position[1] += dy,
            BoundaryTag::Top | BoundaryTag::Bottom => node.position[0] += dx,
            BoundaryTag::Corner => {}
        }
    }
    net.seed = seed;
    net.generator = Generator::Perturbed { m_fine, magnitude };
    Ok(net)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_by_three_grid() {
        let net = generate_structured(2, 1.0).unwrap();
        assert_eq!(net.nodes.len(), 9);
        assert_eq!(net.edges.len(), 12);
        let mut xs: Vec<f64> = net.nodes.iter().map(|n| n.position[0]).collect();
        xs.dedup();
        for n in &net.nodes {
            for c in n.position {
                assert!(c == 0.0 || c == 0.5 || c == 1.0);
            }
        }
        // interior node has 4 edges -> 6 pairs, edge nodes 3 -> 3, corners 2 -> 1
        assert_eq!(net.pairs.len(), 6 + 4 * 3 + 4);
        net.validate().unwrap();
    }

    #[test]
    fn edge_count_formula() {
        for m in [2, 3, 7, 16] {
            let net = generate_structured(m, 2.0).unwrap();
            assert_eq!(net.edges.len(), 2 * m * (m + 1));
            assert_eq!(net.nodes.len(), (m + 1) * (m + 1));
        }
    }

    #[test]
    fn paper_scale_node_count() {
        let m = 1 << 9;
        let net = generate_structured(m, 1.0).unwrap();
        assert_eq!(net.nodes.len(), 263_169);
    }

    #[test]
    fn rejects_too_coarse_grid() {
        assert!(generate_structured(1, 1.0).is_err());
    }

    #[test]
    fn pair_selection_counts() {
        let m = 4;
        let all = generate_structured_with(m, 1.0, PairSelection::All).unwrap();
        let col = generate_structured_with(m, 1.0, PairSelection::Collinear).unwrap();
        let perp = generate_structured_with(m, 1.0, PairSelection::Perpendicular).unwrap();
        assert_eq!(col.pairs.len() + perp.pairs.len(), all.pairs.len());
        // straight pairs: each grid line of m edges has m-1 interior joints
        assert_eq!(col.pairs.len(), 2 * (m + 1) * (m - 1));
    }

    #[test]
    fn zero_perturbation_is_structured() {
        let a = generate_structured(6, 1.0).unwrap();
        let b = generate_perturbed(6, 1.0, 0.0, 42).unwrap();
        assert_eq!(a.positions(), b.positions());
        assert_eq!(a.edges, b.edges);
        assert_eq!(a.pairs, b.pairs);
    }

    #[test]
    fn perturbation_is_deterministic() {
        let a = generate_perturbed(8, 1.0, 0.25, 9).unwrap();
        let b = generate_perturbed(8, 1.0, 0.25, 9).unwrap();
        assert_eq!(a, b);
        let c = generate_perturbed(8, 1.0, 0.25, 10).unwrap();
        assert_ne!(a.positions(), c.positions());
    }

    #[test]
    fn perturbed_edge_lengths_bounded() {
        let m = 16;
        let h = 1.0 / m as f64;
        let net = generate_perturbed(m, 1.0, 0.25, 3).unwrap();
        for e in 0..net.edges.len() {
            let l = net.edge_length(e);
            assert!(l >= 0.5 * h && l <= 1.5 * h * 2f64.sqrt(), "edge {e} length {l}");
        }
        // boundary preserved
        for n in &net.nodes {
            let [x, y] = n.position;
            match n.tag {
                BoundaryTag::Left => assert_eq!(x, 0.0),
                BoundaryTag::Right => assert_eq!(x, 1.0),
                BoundaryTag::Bottom => assert_eq!(y, 0.0),
                BoundaryTag::Top => assert_eq!(y, 1.0),
                _ => {}
            }
            assert!((0.0..=1.0).contains(&x) && (0.0..=1.0).contains(&y));
        }
    }

    #[test]
    fn rejects_large_perturbation() {
        assert!(generate_perturbed(8, 1.0, 0.5, 0).is_err());
        assert!(generate_perturbed(8, 1.0, 0.6, 0).is_err());
        assert!(generate_perturbed(8, 1.0, -0.1, 0).is_err());
    }
}
