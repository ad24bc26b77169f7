use super::grid::CoarseGrid;
use super::shape::ShapeMatrix;
use crate::assembly::StiffnessSystem;
use crate::linalg::{norm2, CsrMatrix, PivotedCholesky, SparseCholesky};
use crate::network::Network;
use crate::{Error, Result};

/// Relative pivot threshold for the multiplier Schur complement, which is
/// singular whenever two constraint rows coincide on the patch.
const SCHUR_PIVOT_TOL: f64 = 1e-12;

/// Sparse vector over free-dof positions, indices increasing.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SparseVector {
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseVector {
    pub fn to_dense(&self, len: usize) -> Vec<f64> {
        let mut out = vec![0.0; len];
        for (&i, &v) in self.indices.iter().zip(&self.values) {
            out[i] = v;
        }
        out
    }

    pub fn norm(&self) -> f64 {
        norm2(&self.values)
    }

    /// `self − other` on the union of both supports.
    pub fn sub(&self, other: &SparseVector) -> SparseVector {
        let (a, b) = (self, other);
        let (mut i, mut j) = (0, 0);
        let mut out = SparseVector::default();
        while i < a.indices.len() || j < b.indices.len() {
            let take_a = j == b.indices.len() || (i < a.indices.len() && a.indices[i] < b.indices[j]);
            let take_b = i == a.indices.len() || (j < b.indices.len() && b.indices[j] < a.indices[i]);
            if take_a {
                out.indices.push(a.indices[i]);
                out.values.push(a.values[i]);
                i += 1;
            } else if take_b {
                out.indices.push(b.indices[j]);
                out.values.push(-b.values[j]);
                j += 1;
            } else {
                out.indices.push(a.indices[i]);
                out.values.push(a.values[i] - b.values[j]);
                i += 1;
                j += 1;
            }
        }
        out
    }

    pub(crate) fn from_row(m: &CsrMatrix, r: usize) -> SparseVector {
        let (c, v) = m.row(r);
        SparseVector {
            indices: c.to_vec(),
            values: v.to_vec(),
        }
    }
}

/// Free dofs near a coarse node or element, and the coarse rows that see
/// them.
#[derive(Clone, Debug, PartialEq)]
pub struct Patch {
    /// The coarse node at the center, or the lower-left corner of the
    /// element for element patches.
    pub coarse_node: usize,
    /// Set for patches centered on an element.
    pub element: Option<usize>,
    pub center: [f64; 2],
    pub radius: f64,
    /// Positions in `StiffnessSystem::free`, increasing.
    pub dofs: Vec<usize>,
    /// Indices into `ShapeMatrix::retained` with support on `dofs`, increasing.
    pub constraints: Vec<usize>,
}

/// Collects the free dofs of all network nodes within `ell` of the coarse
/// node.
pub fn compute_patch(
    grid: &CoarseGrid,
    network: &Network,
    system: &StiffnessSystem,
    shape: &ShapeMatrix,
    coarse_node: usize,
    ell: f64,
) -> Result<Patch> {
    let center = grid.node_position(coarse_node);
    ball_patch(grid, network, system, shape, coarse_node, None, center, ell)
}

/// Collects the free dofs of all network nodes within `ell` of the center
/// of coarse element `element`.
pub fn compute_element_patch(
    grid: &CoarseGrid,
    network: &Network,
    system: &StiffnessSystem,
    shape: &ShapeMatrix,
    element: usize,
    ell: f64,
) -> Result<Patch> {
    let center = grid.element_center(element);
    let corner = grid.element_corners(element)[0];
    ball_patch(grid, network, system, shape, corner, Some(element), center, ell)
}

#[allow(clippy::too_many_arguments)]
fn ball_patch(
    grid: &CoarseGrid,
    network: &Network,
    system: &StiffnessSystem,
    shape: &ShapeMatrix,
    coarse_node: usize,
    element: Option<usize>,
    c: [f64; 2],
    ell: f64,
) -> Result<Patch> {
    if !(ell > 0.0) {
        return Err(Error::invalid("ell", format!("localization radius must be positive, got {ell}")));
    }
    let mut dofs = Vec::new();
    for e in grid.elements_in_box([c[0] - ell, c[1] - ell], [c[0] + ell, c[1] + ell]) {
        for &node in &grid.element_nodes[e] {
            let p = network.nodes[node].position;
            if (p[0] - c[0]).hypot(p[1] - c[1]) <= ell {
                for axis in 0..2 {
                    if let Some(k) = system.free_position(2 * node + axis) {
                        dofs.push(k);
                    }
                }
            }
        }
    }
    if dofs.is_empty() {
        return Err(Error::Corrector {
            coarse_dof: 2 * coarse_node,
            reason: format!("patch of radius {ell:.3e} contains no free dof"),
        });
    }
    dofs.sort_unstable();
    let mut constraints: Vec<usize> = dofs.iter().flat_map(|&d| shape.free_t.row(d).0.iter().copied()).collect();
    constraints.sort_unstable();
    constraints.dedup();
    Ok(Patch {
        coarse_node,
        element,
        center: c,
        radius: ell,
        dofs,
        constraints,
    })
}

/// Fine-scale correction of one coarse shape function.
#[derive(Clone, Debug)]
pub struct Corrector {
    /// Coarse dof `2p + axis`.
    pub coarse_dof: usize,
    /// Index into `ShapeMatrix::retained`; `None` for a lifting corrector.
    pub row: Option<usize>,
    /// Supported on the patch dofs.
    pub phi: SparseVector,
    /// Relative residual of the patch saddle-point system.
    pub residual_norm: f64,
    /// `‖Λ_P φ‖`.
    pub constraint_norm: f64,
}

fn local_index(dofs: &[usize], d: usize) -> Option<usize> {
    dofs.binary_search(&d).ok()
}

fn patch_matrix(k_free: &CsrMatrix, dofs: &[usize]) -> CsrMatrix {
    let rows = dofs
        .iter()
        .map(|&d| {
            let (cols, vals) = k_free.row(d);
            cols.iter()
                .zip(vals)
                .filter_map(|(&c, &v)| local_index(dofs, c).map(|k| (k, v)))
                .collect()
        })
        .collect();
    CsrMatrix::from_sorted_rows(dofs.len(), rows)
}

/// Saddle-point solver for all correctors sharing one patch.
///
/// Eliminates the multipliers through the Schur complement
/// `S = Λ_P K_P⁻¹ Λ_Pᵀ`; rows of `Λ_P` are scaled to unit norm first, which
/// leaves the constraint set unchanged.
struct PatchSolver<'a> {
    patch: &'a Patch,
    chol: SparseCholesky,
    kp: CsrMatrix,
    /// Unit-norm constraint rows in local indices.
    lambda: Vec<Vec<(usize, f64)>>,
    /// Original constraint rows in local indices.
    lambda_raw: Vec<Vec<(usize, f64)>>,
    /// `K_P⁻¹ Λ_Pᵀ`, column-major.
    y: Vec<f64>,
    schur: PivotedCholesky,
}

impl<'a> PatchSolver<'a> {
    fn new(k_free: &CsrMatrix, shape: &ShapeMatrix, patch: &'a Patch) -> Result<Self> {
        let fail = |reason: String| Error::Corrector {
            coarse_dof: 2 * patch.coarse_node,
            reason,
        };
        let np = patch.dofs.len();
        let kp = patch_matrix(k_free, &patch.dofs);
        let chol = SparseCholesky::factor(&kp).map_err(|e| fail(format!("patch stiffness: {e}")))?;
        let mut lambda: Vec<Vec<(usize, f64)>> = Vec::with_capacity(patch.constraints.len());
        let mut lambda_raw = Vec::with_capacity(patch.constraints.len());
        for &r in &patch.constraints {
            let (cols, vals) = shape.free.row(r);
            let row: Vec<(usize, f64)> = cols
                .iter()
                .zip(vals)
                .filter_map(|(&c, &v)| local_index(&patch.dofs, c).map(|k| (k, v)))
                .collect();
            let scale = row.iter().map(|e| e.1 * e.1).sum::<f64>().sqrt();
            lambda.push(row.iter().map(|&(k, v)| (k, v / scale)).collect());
            lambda_raw.push(row);
        }
        let nc = lambda.len();
        let mut y = vec![0.0; np * nc];
        for (j, row) in lambda.iter().enumerate() {
            for &(k, v) in row {
                y[j * np + k] = v;
            }
        }
        chol.solve_columns(&mut y, nc);
        let mut s = vec![0.0; nc * nc];
        for a in 0..nc {
            for b in 0..nc {
                let col = &y[b * np..(b + 1) * np];
                s[a * nc + b] = lambda[a].iter().map(|&(k, v)| v * col[k]).sum();
            }
        }
        for a in 0..nc {
            for b in a + 1..nc {
                let m = 0.5 * (s[a * nc + b] + s[b * nc + a]);
                s[a * nc + b] = m;
                s[b * nc + a] = m;
            }
        }
        let schur = PivotedCholesky::factor(&s, nc, SCHUR_PIVOT_TOL);
        if nc > 0 && schur.rank() == 0 {
            return Err(fail("constraint Schur complement vanished".into()));
        }
        Ok(Self {
            patch,
            chol,
            kp,
            lambda,
            lambda_raw,
            y,
            schur,
        })
    }

    fn apply_lambda(rows: &[Vec<(usize, f64)>], x: &[f64]) -> Vec<f64> {
        rows.iter().map(|row| row.iter().map(|&(k, v)| v * x[k]).sum()).collect()
    }

    /// `x −= Y μ`.
    fn subtract_y(&self, x: &mut [f64], mu: &[f64]) {
        let np = x.len();
        for (j, &m) in mu.iter().enumerate() {
            if m != 0.0 {
                for (xi, yi) in x.iter_mut().zip(&self.y[j * np..(j + 1) * np]) {
                    *xi -= yi * m;
                }
            }
        }
    }

    /// `(K λ_i)` restricted to the patch for retained row `row`; `K` is
    /// symmetric, so rows of `K` stand in for its columns.
    fn shape_rhs(&self, k_free: &CsrMatrix, shape: &ShapeMatrix, row: usize) -> Vec<f64> {
        let dofs = &self.patch.dofs;
        let mut rhs = vec![0.0; dofs.len()];
        let (lc, lv) = shape.free.row(row);
        for (&c, &l) in lc.iter().zip(lv) {
            let (cols, vals) = k_free.row(c);
            for (&d, &v) in cols.iter().zip(vals) {
                if let Some(k) = local_index(dofs, d) {
                    rhs[k] += v * l;
                }
            }
        }
        rhs
    }

    /// `(K λ)` on the patch for a shape function over all dofs, constrained
    /// ones included.
    fn full_rhs(&self, system: &StiffnessSystem, lambda: &SparseVector) -> Vec<f64> {
        let dofs = &self.patch.dofs;
        let mut rhs = vec![0.0; dofs.len()];
        for (&c, &l) in lambda.indices.iter().zip(&lambda.values) {
            let (cols, vals) = system.k.row(c);
            for (&d, &v) in cols.iter().zip(vals) {
                if let Some(k) = system.free_position(d).and_then(|p| local_index(dofs, p)) {
                    rhs[k] += v * l;
                }
            }
        }
        rhs
    }

    /// Solves `K_P φ + Λ_Pᵀ μ = rhs`, `Λ_P φ = 0`.
    fn solve(&self, coarse_dof: usize, row: Option<usize>, rhs: Vec<f64>) -> Corrector {
        let dofs = &self.patch.dofs;
        let mut phi = self.chol.solve(&rhs);
        let mut mu = vec![0.0; self.lambda.len()];
        // the second pass removes rounding left in Λ_P φ by the first
        for _ in 0..2 {
            let g = Self::apply_lambda(&self.lambda, &phi);
            let dmu = self.schur.solve(&g);
            self.subtract_y(&mut phi, &dmu);
            for (m, d) in mu.iter_mut().zip(&dmu) {
                *m += d;
            }
        }

        let mut res = self.kp.mul_vec(&phi);
        for (row, &m) in self.lambda.iter().zip(&mu) {
            for &(k, v) in row {
                res[k] += v * m;
            }
        }
        for (r, b) in res.iter_mut().zip(&rhs) {
            *r -= b;
        }
        let rhs_norm = norm2(&rhs);
        let residual_norm = if rhs_norm > 0.0 { norm2(&res) / rhs_norm } else { norm2(&res) };
        let constraint_norm = norm2(&Self::apply_lambda(&self.lambda_raw, &phi));

        let mut out = SparseVector::default();
        for (k, v) in phi.into_iter().enumerate() {
            if v != 0.0 {
                out.indices.push(dofs[k]);
                out.values.push(v);
            }
        }
        Corrector {
            coarse_dof,
            row,
            phi: out,
            residual_norm,
            constraint_norm,
        }
    }
}

/// Solves the corrector problems of several coarse rows on one patch.
pub fn solve_patch_correctors(
    k_free: &CsrMatrix,
    shape: &ShapeMatrix,
    patch: &Patch,
    rows: &[usize],
) -> Result<Vec<Corrector>> {
    let solver = PatchSolver::new(k_free, shape, patch)?;
    Ok(rows
        .iter()
        .map(|&r| solver.solve(shape.retained[r], Some(r), solver.shape_rhs(k_free, shape, r)))
        .collect())
}

/// Factorized patch problem reused for several right-hand sides.
pub(crate) struct PatchProblem<'a>(PatchSolver<'a>);

impl<'a> PatchProblem<'a> {
    pub(crate) fn new(k_free: &CsrMatrix, shape: &ShapeMatrix, patch: &'a Patch) -> Result<Self> {
        Ok(Self(PatchSolver::new(k_free, shape, patch)?))
    }

    /// Corrector for a right-hand side given over the patch dofs.
    pub(crate) fn solve(&self, coarse_dof: usize, row: Option<usize>, rhs: Vec<f64>) -> Corrector {
        self.0.solve(coarse_dof, row, rhs)
    }
}

/// Correctors on one patch for retained rows `rows` and for the boundary
/// shape functions `lifts` (coarse dof and its row over all dofs).
pub(crate) fn solve_patch_all(
    system: &StiffnessSystem,
    k_free: &CsrMatrix,
    shape: &ShapeMatrix,
    patch: &Patch,
    rows: &[usize],
    lifts: &[(usize, SparseVector)],
) -> Result<(Vec<Corrector>, Vec<Corrector>)> {
    let solver = PatchSolver::new(k_free, shape, patch)?;
    let shaped = rows
        .iter()
        .map(|&r| solver.solve(shape.retained[r], Some(r), solver.shape_rhs(k_free, shape, r)))
        .collect();
    let lifted = lifts
        .iter()
        .map(|(cd, lambda)| solver.solve(*cd, None, solver.full_rhs(system, lambda)))
        .collect();
    Ok((shaped, lifted))
}

/// Solves the corrector problem of retained coarse row `row` on `patch`:
/// `K_P φ + Λ_Pᵀ μ = (K λ)|_P`, `Λ_P φ = 0`.
pub fn solve_corrector(k_free: &CsrMatrix, shape: &ShapeMatrix, row: usize, patch: &Patch) -> Result<Corrector> {
    Ok(solve_patch_correctors(k_free, shape, patch, &[row])?.remove(0))
}
