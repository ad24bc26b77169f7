use serde::{Deserialize, Serialize};

use super::grid::{grid_coordinate, CoarseGrid};
use crate::assembly::StiffnessSystem;
use crate::linalg::CsrMatrix;
use crate::network::Network;
use crate::{Error, Result};

/// Bilinear coarse shape functions sampled at the network nodes.
#[derive(Clone, Debug)]
pub struct ShapeMatrix {
    /// All `2(m+1)²` rows over all `2n` network dofs. Coarse dof `2p + a`
    /// acts on network dofs of axis `a`.
    pub full: CsrMatrix,
    /// Coarse dofs with support on at least one free network dof, increasing.
    pub retained: Vec<usize>,
    /// Retained rows restricted to the free dofs, columns indexed by
    /// position in `StiffnessSystem::free`.
    pub free: CsrMatrix,
    /// Transpose of `free`: for each free dof the retained rows touching it.
    pub free_t: CsrMatrix,
}

impl ShapeMatrix {
    pub fn retained_count(&self) -> usize {
        self.retained.len()
    }
}

/// Shape values of the four element corners at a point (lower left,
/// lower right, upper right, upper left).
pub fn bilinear_values(grid: &CoarseGrid, element: usize, p: [f64; 2]) -> [f64; 4] {
    let (ex, ey) = grid.element_coords(element);
    let xi = (grid_coordinate(p[0], grid.domain_side, grid.m) - ex as f64).clamp(0.0, 1.0);
    let eta = (grid_coordinate(p[1], grid.domain_side, grid.m) - ey as f64).clamp(0.0, 1.0);
    [
        (1.0 - xi) * (1.0 - eta),
        xi * (1.0 - eta),
        xi * eta,
        (1.0 - xi) * eta,
    ]
}

/// Which coarse shape functions enter the coarse space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoarseBoundary {
    /// Keep every row with support on a free dof, restricted to the free dofs.
    #[default]
    Restrict,
    /// Keep only rows that vanish on every constrained dof, so each shape
    /// function satisfies the homogeneous constraints as it is.
    Conforming,
}

pub fn evaluate_shape_functions(grid: &CoarseGrid, network: &Network, system: &StiffnessSystem) -> Result<ShapeMatrix> {
    evaluate_shape_functions_with(grid, network, system, CoarseBoundary::default())
}

pub fn evaluate_shape_functions_with(
    grid: &CoarseGrid,
    network: &Network,
    system: &StiffnessSystem,
    rule: CoarseBoundary,
) -> Result<ShapeMatrix> {
    let n = network.node_count();
    if grid.node_element.len() != n || system.dof_count() != 2 * n {
        return Err(Error::Numerical("coarse grid, network and system disagree in size".into()));
    }
    let mut triplets = Vec::with_capacity(8 * n);
    for node in &network.nodes {
        let e = grid.node_element[node.id];
        let values = bilinear_values(grid, e, node.position);
        for (corner, v) in grid.element_corners(e).into_iter().zip(values) {
            if v != 0.0 {
                for axis in 0..2 {
                    triplets.push((2 * corner + axis, 2 * node.id + axis, v));
                }
            }
        }
    }
    let full = CsrMatrix::from_triplets(grid.dof_count(), 2 * n, &triplets);

    let mut retained = Vec::new();
    let mut rows = Vec::new();
    for r in 0..full.nrows() {
        let (cols, vals) = full.row(r);
        if rule == CoarseBoundary::Conforming && cols.iter().any(|&c| system.free_position(c).is_none()) {
            continue;
        }
        let row: Vec<(usize, f64)> = cols
            .iter()
            .zip(vals)
            .filter_map(|(&c, &v)| system.free_position(c).map(|k| (k, v)))
            .collect();
        if !row.is_empty() {
            retained.push(r);
            rows.push(row);
        }
    }
    let free = CsrMatrix::from_sorted_rows(system.free.len(), rows);
    let free_t = free.transpose();
    Ok(ShapeMatrix {
        full,
        retained,
        free,
        free_t,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{assemble_stiffness, build_problem, AssemblyOptions, ProblemSpec};
    use crate::multiscale::build_coarse_grid;
    use crate::network::generate_structured;

    fn setup(m_fine: usize, m: usize, spec: ProblemSpec) -> (Network, CoarseGrid, StiffnessSystem) {
        let net = generate_structured(m_fine, 1.0).unwrap();
        let k = assemble_stiffness(&net, &AssemblyOptions::default()).unwrap().matrix;
        let sys = build_problem(&net, k, &spec).unwrap();
        let g = build_coarse_grid(&net, m).unwrap();
        (net, g, sys)
    }

    #[test]
    fn lagrange_property_and_midpoint() {
        let (net, g, sys) = setup(4, 2, ProblemSpec::force());
        let s = evaluate_shape_functions(&g, &net, &sys).unwrap();
        // network node (2,2) coincides with coarse node 4
        let node = 2 * 5 + 2;
        for r in 0..s.full.nrows() {
            let expect = if r == 8 { 1.0 } else { 0.0 };
            assert_eq!(s.full.get(r, 2 * node), expect);
        }
        // network node (1,1) is the center of element 0
        let node = 5 + 1;
        for p in [0, 1, 3, 4] {
            assert_eq!(s.full.get(2 * p + 1, 2 * node + 1), 0.25);
        }
    }

    #[test]
    fn retained_rows_with_clamped_boundary() {
        let (net, g, sys) = setup(8, 4, ProblemSpec::force());
        // every coarse node, corners included, touches an interior network node
        let s = evaluate_shape_functions_with(&g, &net, &sys, CoarseBoundary::Restrict).unwrap();
        assert_eq!(s.retained_count(), 2 * 25);
        assert_eq!(s.free.ncols(), sys.free.len());
        // only the 3x3 interior coarse nodes avoid the clamped boundary
        let s = evaluate_shape_functions_with(&g, &net, &sys, CoarseBoundary::Conforming).unwrap();
        assert_eq!(s.retained_count(), 2 * 9);
        assert_eq!(s.retained[0], 2 * 6);
    }

    #[test]
    fn rows_dropped_when_support_is_constrained() {
        // network nodes only at coarse nodes: boundary rows touch nothing free
        let (net, g, sys) = setup(4, 4, ProblemSpec::force());
        let s = evaluate_shape_functions(&g, &net, &sys).unwrap();
        assert_eq!(s.retained_count(), 2 * 9);
    }
}
