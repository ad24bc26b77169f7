//! Element-wise localization. `K` is split into the contributions
//! `K_T` of the coarse elements, each element gets one patch, and the
//! corrector of `λ_i` is the sum over elements of the solutions with load
//! `K_T λ_i`.

use rayon::prelude::*;

use super::corrector::{compute_element_patch, Corrector, PatchProblem, SparseVector};
use super::grid::CoarseGrid;
use super::shape::ShapeMatrix;
use crate::assembly::{element_blocks, Block, PoissonCross, StiffnessSystem};
use crate::linalg::CsrMatrix;
use crate::network::Network;
use crate::Result;

/// Part of `K` owned by one coarse element, over the dofs it touches.
#[derive(Clone, Debug)]
pub struct ElementStiffness {
    /// Global dofs, increasing.
    pub dofs: Vec<usize>,
    /// Symmetric matrix over `dofs`.
    pub k: CsrMatrix,
}

impl ElementStiffness {
    /// `K_T v` over `dofs` for `v` given over `dofs`.
    fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.k.mul_vec(v)
    }

    fn local(&self, dof: usize) -> Option<usize> {
        self.dofs.binary_search(&dof).ok()
    }
}

/// Splits the symmetrized stiffness by coarse element. Edges belong to the
/// element of their midpoint and pairs to the element of their center node,
/// so the parts sum to `K` up to rounding.
pub fn split_stiffness(network: &Network, grid: &CoarseGrid) -> Result<Vec<ElementStiffness>> {
    let blocks = element_blocks(network, PoissonCross::AsWritten)?;
    let mut triplets: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); grid.m * grid.m];
    fn push<const N: usize>(t: &mut Vec<(usize, usize, f64)>, b: &Block<N>) {
        for r in 0..N {
            for c in 0..N {
                let v = 0.5 * b.matrix[r][c];
                t.push((b.dofs[r], b.dofs[c], v));
                t.push((b.dofs[c], b.dofs[r], v));
            }
        }
    }
    for (edge, b) in network.edges.iter().zip(&blocks.extension) {
        let [i, j] = edge.nodes;
        let (p, q) = (network.nodes[i].position, network.nodes[j].position);
        let e = grid.element_of([0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]);
        push(&mut triplets[e], b);
    }
    let mut skipped = blocks.degenerate_pairs.iter().peekable();
    let mut kept = blocks.angular.iter().zip(&blocks.poisson);
    for pair in &network.pairs {
        if skipped.next_if(|&&id| id == pair.id).is_some() {
            continue;
        }
        let (a, p) = kept.next().expect("one block pair per non-degenerate pair");
        let e = grid.node_element[pair.center];
        push(&mut triplets[e], a);
        push(&mut triplets[e], p);
    }
    Ok(triplets
        .into_par_iter()
        .map(|t| {
            let mut dofs: Vec<usize> = t.iter().map(|x| x.0).collect();
            dofs.sort_unstable();
            dofs.dedup();
            let local: Vec<(usize, usize, f64)> = t
                .iter()
                .map(|&(r, c, v)| {
                    (
                        dofs.binary_search(&r).expect("dof listed"),
                        dofs.binary_search(&c).expect("dof listed"),
                        v,
                    )
                })
                .collect();
            let n = dofs.len();
            ElementStiffness {
                dofs,
                k: CsrMatrix::from_triplets(n, n, &local),
            }
        })
        .collect())
}

/// Element contributions for one element.
pub(crate) struct ElementCorrectors {
    pub correctors: Vec<Corrector>,
    pub lifting: Option<Corrector>,
    pub patch_dofs: usize,
    pub constraint_rows: usize,
}

/// Solves every element problem. `lifting` is the interpolated boundary data
/// over all dofs, when there is any.
pub(crate) fn element_correctors(
    grid: &CoarseGrid,
    network: &Network,
    system: &StiffnessSystem,
    k_free: &CsrMatrix,
    shape: &ShapeMatrix,
    ell: f64,
    lifting: Option<&[f64]>,
) -> Result<Vec<ElementCorrectors>> {
    let parts = split_stiffness(network, grid)?;
    parts
        .par_iter()
        .enumerate()
        .map(|(e, part)| {
            let patch = compute_element_patch(grid, network, system, shape, e, ell)?;
            let solver = PatchProblem::new(k_free, shape, &patch)?;
            // load K_T v mapped onto the patch; entries outside the ball are lost
            let patch_rhs = |v: &[f64]| -> Option<Vec<f64>> {
                if v.iter().all(|&x| x == 0.0) {
                    return None;
                }
                let y = part.apply(v);
                let mut rhs = vec![0.0; patch.dofs.len()];
                let mut any = false;
                for (&d, &val) in part.dofs.iter().zip(&y) {
                    if val == 0.0 {
                        continue;
                    }
                    if let Some(k) = system.free_position(d).and_then(|p| patch.dofs.binary_search(&p).ok()) {
                        rhs[k] = val;
                        any = true;
                    }
                }
                any.then_some(rhs)
            };

            let mut rows: Vec<usize> = part
                .dofs
                .iter()
                .filter_map(|&d| system.free_position(d))
                .flat_map(|p| shape.free_t.row(p).0.iter().copied())
                .collect();
            rows.sort_unstable();
            rows.dedup();
            let mut correctors = Vec::new();
            let mut v = vec![0.0; part.dofs.len()];
            for r in rows {
                v.iter_mut().for_each(|x| *x = 0.0);
                let (cols, vals) = shape.free.row(r);
                for (&c, &l) in cols.iter().zip(vals) {
                    if let Some(k) = part.local(system.free[c]) {
                        v[k] = l;
                    }
                }
                if let Some(rhs) = patch_rhs(&v) {
                    correctors.push(solver.solve(shape.retained[r], Some(r), rhs));
                }
            }
            let lifting = lifting.and_then(|g| {
                let v: Vec<f64> = part.dofs.iter().map(|&d| g[d]).collect();
                patch_rhs(&v).map(|rhs| solver.solve(2 * patch.coarse_node, None, rhs))
            });
            Ok(ElementCorrectors {
                correctors,
                lifting,
                patch_dofs: patch.dofs.len(),
                constraint_rows: patch.constraints.len(),
            })
        })
        .collect()
}

/// Dense scratch for summing sparse vectors.
pub(crate) struct Accumulator {
    values: Vec<f64>,
    hit: Vec<bool>,
    touched: Vec<usize>,
}

impl Accumulator {
    pub(crate) fn new(len: usize) -> Self {
        Self {
            values: vec![0.0; len],
            hit: vec![false; len],
            touched: Vec::new(),
        }
    }

    pub(crate) fn add(&mut self, v: &SparseVector, scale: f64) {
        for (&i, &x) in v.indices.iter().zip(&v.values) {
            if !self.hit[i] {
                self.hit[i] = true;
                self.touched.push(i);
            }
            self.values[i] += scale * x;
        }
    }

    /// Returns the sum and resets the scratch.
    pub(crate) fn take(&mut self) -> SparseVector {
        self.touched.sort_unstable();
        let mut out = SparseVector::default();
        for &i in &self.touched {
            if self.values[i] != 0.0 {
                out.indices.push(i);
                out.values.push(self.values[i]);
            }
            self.values[i] = 0.0;
            self.hit[i] = false;
        }
        self.touched.clear();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{assemble_stiffness, AssemblyOptions};
    use crate::multiscale::build_coarse_grid;
    use crate::network::{assign_coefficients, generate_perturbed, CoefficientScheme, FiberCoefficients};

    #[test]
    fn parts_sum_to_stiffness() {
        let net = generate_perturbed(8, 1.0, 0.3, 3).unwrap();
        let nominal = FiberCoefficients {
            k: 1.0,
            a: 1e-5,
            w: 0.02,
            kappa: 1.0,
            eta: 0.3,
            gamma: 0.3,
        };
        let net = assign_coefficients(net, &CoefficientScheme::random_around(nominal, 0.5, 1.5, 1e-3), 4).unwrap();
        let k = assemble_stiffness(&net, &AssemblyOptions::default()).unwrap().matrix;
        let grid = build_coarse_grid(&net, 4).unwrap();
        let parts = split_stiffness(&net, &grid).unwrap();
        let mut triplets = Vec::new();
        for part in &parts {
            for (r, c, v) in part.k.iter() {
                triplets.push((part.dofs[r], part.dofs[c], v));
            }
        }
        let sum = CsrMatrix::from_triplets(k.nrows(), k.ncols(), &triplets);
        let diff = sum.sub(&k);
        assert!(diff.max_abs() <= 1e-13 * k.max_abs());
    }
}
