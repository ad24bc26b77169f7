//! Localized orthogonal decomposition on top of an assembled network system.
//!
//! The coarse space is spanned by bilinear shape functions of an `m x m`
//! grid sampled at the network nodes ([`ShapeMatrix`]). The fine space is its
//! l2-orthogonal complement among free displacements. Each shape function is
//! corrected by solving a constrained problem on a ball of radius `ell`
//! around its coarse node, and the coarse Galerkin problem is solved in the
//! span of the corrected functions.

mod basis;
mod corrector;
mod element;
mod grid;
mod shape;

pub use basis::{
    build_multiscale_basis, build_multiscale_basis_with, coarse_matrix, lifting_coefficients, PatchCenter, solve_multiscale, write_basis, CorrectorStats, Localization, LogBase,
    MultiscaleBasis, MultiscaleSolution,
};
pub use corrector::{compute_element_patch, compute_patch, solve_corrector, solve_patch_correctors, Corrector, Patch, SparseVector};
pub use element::{split_stiffness, ElementStiffness};
pub use grid::{build_coarse_grid, CoarseGrid};
pub use shape::{bilinear_values, evaluate_shape_functions, evaluate_shape_functions_with, CoarseBoundary, ShapeMatrix};

use crate::assembly::StiffnessSystem;
use crate::linalg::CsrMatrix;
use crate::network::Network;
use crate::Result;

/// Everything needed to run the method for one coarse size.
#[derive(Clone, Debug)]
pub struct LodRun {
    pub grid: CoarseGrid,
    pub shape: ShapeMatrix,
    pub basis: MultiscaleBasis,
    pub solution: MultiscaleSolution,
}

/// Builds grid, shape matrix and basis for `m` and solves.
pub fn run_lod(
    network: &Network,
    system: &StiffnessSystem,
    k_free: &CsrMatrix,
    m: usize,
    localization: &Localization,
    rule: CoarseBoundary,
) -> Result<LodRun> {
    localization.validate()?;
    let grid = build_coarse_grid(network, m)?;
    let shape = evaluate_shape_functions_with(&grid, network, system, rule)?;
    let ell = localization.radius(&grid);
    let basis = build_multiscale_basis_with(&grid, network, system, k_free, &shape, ell, localization.center)?;
    let solution = solve_multiscale(system, k_free, &basis)?;
    Ok(LodRun {
        grid,
        shape,
        basis,
        solution,
    })
}
