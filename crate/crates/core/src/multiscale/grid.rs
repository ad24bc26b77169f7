use crate::network::Network;
use crate::{Error, Result};

/// Equidistant `m x m` square grid over the network domain.
///
/// Coarse node `p = iy·(m+1) + ix` sits at `(ix·H, iy·H)`; element
/// `e = ey·m + ex` spans `[ex·H, (ex+1)·H] x [ey·H, (ey+1)·H]`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoarseGrid {
    pub m: usize,
    pub domain_side: f64,
    /// Element width `H`.
    pub h: f64,
    /// Element of each network node.
    pub node_element: Vec<usize>,
    /// Network nodes of each element, increasing.
    pub element_nodes: Vec<Vec<usize>>,
}

/// Grid coordinate `x / H`, snapped onto grid lines within rounding.
pub(crate) fn grid_coordinate(x: f64, side: f64, m: usize) -> f64 {
    let t = x / side * m as f64;
    let r = t.round();
    if (t - r).abs() <= 1e-12 * m as f64 {
        r
    } else {
        t
    }
}

/// Element index along one axis; points on a shared line go to the lower element.
fn element_index(t: f64, m: usize) -> usize {
    let e = t.ceil() - 1.0;
    e.clamp(0.0, (m - 1) as f64) as usize
}

impl CoarseGrid {
    pub fn node_count(&self) -> usize {
        (self.m + 1) * (self.m + 1)
    }

    pub fn dof_count(&self) -> usize {
        2 * self.node_count()
    }

    pub fn node_position(&self, p: usize) -> [f64; 2] {
        let m = self.m;
        let (ix, iy) = (p % (m + 1), p / (m + 1));
        [
            self.domain_side * ix as f64 / m as f64,
            self.domain_side * iy as f64 / m as f64,
        ]
    }

    /// Element containing a point of the domain, ties to the lower index.
    pub fn element_of(&self, p: [f64; 2]) -> usize {
        let ex = element_index(grid_coordinate(p[0], self.domain_side, self.m), self.m);
        let ey = element_index(grid_coordinate(p[1], self.domain_side, self.m), self.m);
        ey * self.m + ex
    }

    pub fn element_center(&self, e: usize) -> [f64; 2] {
        let (ex, ey) = self.element_coords(e);
        [(ex as f64 + 0.5) * self.h, (ey as f64 + 0.5) * self.h]
    }

    /// `(ex, ey)` of an element.
    pub fn element_coords(&self, e: usize) -> (usize, usize) {
        (e % self.m, e / self.m)
    }

    /// Coarse nodes at the corners of an element, counter-clockwise from
    /// the lower left.
    pub fn element_corners(&self, e: usize) -> [usize; 4] {
        let (ex, ey) = self.element_coords(e);
        let s = self.m + 1;
        let p = ey * s + ex;
        [p, p + 1, p + s + 1, p + s]
    }

    /// Elements intersecting the axis-aligned box `[lo, hi]`.
    pub fn elements_in_box(&self, lo: [f64; 2], hi: [f64; 2]) -> impl Iterator<Item = usize> + '_ {
        let m = self.m;
        let range = |a: f64, b: f64| {
            let lo = ((a / self.h).floor().max(0.0) as usize).min(m - 1);
            let hi = ((b / self.h).floor().max(0.0) as usize).min(m - 1);
            lo..=hi
        };
        let ys = range(lo[1], hi[1]);
        let xs = range(lo[0], hi[0]);
        ys.flat_map(move |ey| xs.clone().map(move |ex| ey * m + ex))
    }
}

pub fn build_coarse_grid(network: &Network, m: usize) -> Result<CoarseGrid> {
    if m < 2 {
        return Err(Error::invalid("m", format!("coarse grid needs m >= 2, got {m}")));
    }
    let side = network.domain_side;
    let h = side / m as f64;
    let mut node_element = Vec::with_capacity(network.node_count());
    let mut element_nodes = vec![Vec::new(); m * m];
    for node in &network.nodes {
        let [x, y] = node.position;
        let tol = 1e-9 * side;
        if !(x >= -tol && x <= side + tol && y >= -tol && y <= side + tol) {
            return Err(Error::Geometry(format!("node {} at ({x}, {y}) lies outside the domain", node.id)));
        }
        let ex = element_index(grid_coordinate(x, side, m), m);
        let ey = element_index(grid_coordinate(y, side, m), m);
        let e = ey * m + ex;
        node_element.push(e);
        element_nodes[e].push(node.id);
    }
    Ok(CoarseGrid {
        m,
        domain_side: side,
        h,
        node_element,
        element_nodes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::generate_structured;

    #[test]
    fn counts_and_width() {
        let net = generate_structured(4, 1.0).unwrap();
        let g = build_coarse_grid(&net, 2).unwrap();
        assert_eq!(g.node_count(), 9);
        assert_eq!(g.h, 0.5);
        let net = generate_structured(32, 0.01).unwrap();
        let g = build_coarse_grid(&net, 16).unwrap();
        assert!((g.h - 6.25e-4).abs() <= f64::EPSILON * 6.25e-4);
        assert!((g.h * 16.0 - 0.01).abs() <= f64::EPSILON * 0.01);
    }

    #[test]
    fn shared_lines_go_to_lower_element() {
        let net = generate_structured(4, 1.0).unwrap();
        let g = build_coarse_grid(&net, 2).unwrap();
        // node (2,2) is the domain center, shared by all four elements
        assert_eq!(g.node_element[2 * 5 + 2], 0);
        // node (4,4) is the top right corner
        assert_eq!(g.node_element[24], 3);
        // node (3,1) is inside element (1,0)
        assert_eq!(g.node_element[5 + 3], 1);
        let total: usize = g.element_nodes.iter().map(Vec::len).sum();
        assert_eq!(total, 25);
    }

    #[test]
    fn rejects_small_m() {
        let net = generate_structured(4, 1.0).unwrap();
        assert!(build_coarse_grid(&net, 1).is_err());
    }

    #[test]
    fn corners_and_positions() {
        let net = generate_structured(4, 1.0).unwrap();
        let g = build_coarse_grid(&net, 2).unwrap();
        assert_eq!(g.element_corners(3), [4, 5, 8, 7]);
        assert_eq!(g.node_position(5), [1.0, 0.5]);
        let boxed: Vec<usize> = g.elements_in_box([0.6, -1.0], [2.0, 0.2]).collect();
        assert_eq!(boxed, vec![1]);
    }
}
