//! Linear force-displacement systems `K u = F` for a network.
//!
//! [`assemble_stiffness`] sums the per-element blocks of [`blocks`] into the
//! global operator; [`build_problem`] attaches loads and displacement
//! constraints for the two boundary-value problems.

pub mod blocks;
mod export;
mod problem;

use rayon::prelude::*;

pub use blocks::{
    angular_deviation_block, edge_extension_block, poisson_block, Block, PairFrame, PoissonCross,
};
pub use export::{read_coo, write_coo, write_system, SYSTEM_FORMAT_VERSION};
pub use problem::{build_problem, ProblemKind, ProblemSpec, StiffnessSystem};

use crate::linalg::CsrMatrix;
use crate::network::Network;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AssemblyOptions {
    /// Largest tolerated relative asymmetry of the assembly with averaged
    /// Poisson cross coefficients. Anything above it is a convention bug.
    pub asymmetry_bound: f64,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        Self { asymmetry_bound: 1e-6 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct AssemblyDiagnostics {
    /// `max |K - Kᵀ| / max |K|` of the raw assembly before symmetrization.
    pub raw_asymmetry: f64,
    /// The same measure for the assembly with averaged cross coefficients.
    pub structural_asymmetry: f64,
    /// Edge pairs dropped because both edges leave the center in the same direction.
    pub degenerate_pairs: usize,
}

#[derive(Clone, Debug)]
pub struct Stiffness {
    /// Symmetrized operator over all `2n` dofs.
    pub matrix: CsrMatrix,
    pub diagnostics: AssemblyDiagnostics,
}

/// All element blocks of a network, in edge and pair id order.
#[derive(Clone, Debug, Default)]
pub struct ElementBlocks {
    pub extension: Vec<Block<4>>,
    pub angular: Vec<Block<6>>,
    pub poisson: Vec<Block<6>>,
    pub degenerate_pairs: Vec<usize>,
}

impl ElementBlocks {
    /// Sum of `½ uᵀ B u` over every block.
    pub fn energy(&self, u: &[f64]) -> f64 {
        self.extension.iter().map(|b| b.energy(u)).sum::<f64>()
            + self.angular.iter().map(|b| b.energy(u)).sum::<f64>()
            + self.poisson.iter().map(|b| b.energy(u)).sum::<f64>()
    }
}

pub fn element_blocks(network: &Network, cross: PoissonCross) -> Result<ElementBlocks> {
    let positions = network.positions();
    let extension = network
        .edges
        .par_iter()
        .map(|e| edge_extension_block(e, &positions))
        .collect::<Result<Vec<_>>>()?;
    let pair_blocks = network
        .pairs
        .par_iter()
        .map(|p| {
            let frame = PairFrame::new(p, &positions)?;
            if frame.is_degenerate() {
                return Ok(None);
            }
            Ok(Some((
                angular_deviation_block(p, &positions)?,
                poisson_block(p, &network.edges, &positions, cross)?,
            )))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = ElementBlocks {
        extension,
        ..Default::default()
    };
    for (id, b) in pair_blocks.into_iter().enumerate() {
        match b {
            Some((a, p)) => {
                out.angular.push(a);
                out.poisson.push(p);
            }
            None => out.degenerate_pairs.push(id),
        }
    }
    Ok(out)
}

fn scatter(n_dofs: usize, blocks: &ElementBlocks) -> CsrMatrix {
    let mut triplets = Vec::with_capacity(16 * blocks.extension.len() + 72 * blocks.angular.len());
    fn push<const N: usize>(t: &mut Vec<(usize, usize, f64)>, b: &Block<N>) {
        for r in 0..N {
            for c in 0..N {
                t.push((b.dofs[r], b.dofs[c], b.matrix[r][c]));
            }
        }
    }
    for b in &blocks.extension {
        push(&mut triplets, b);
    }
    for b in &blocks.angular {
        push(&mut triplets, b);
    }
    for b in &blocks.poisson {
        push(&mut triplets, b);
    }
    CsrMatrix::from_triplets(n_dofs, n_dofs, &triplets)
}

fn relative_asymmetry(k: &CsrMatrix) -> f64 {
    let scale = k.max_abs();
    if scale == 0.0 {
        0.0
    } else {
        k.max_asymmetry() / scale
    }
}

/// Assembles the global stiffness matrix and symmetrizes it.
///
/// The raw assembly follows the force laws as written, which is mildly
/// asymmetric when `a·w` products differ between the two edges of a pair.
/// That part is expected and only reported. The gate instead checks the
/// assembly with averaged cross coefficients, which must be symmetric up
/// to rounding; its symmetric part coincides with that of the raw one.
pub fn assemble_stiffness(network: &Network, options: &AssemblyOptions) -> Result<Stiffness> {
    let n = network.dof_count();
    let raw_blocks = element_blocks(network, PoissonCross::AsWritten)?;
    if !raw_blocks.degenerate_pairs.is_empty() {
        log::warn!(
            "dropped {} degenerate edge pairs (overlapping edges)",
            raw_blocks.degenerate_pairs.len()
        );
    }
    let degenerate_pairs = raw_blocks.degenerate_pairs.len();
    let raw = scatter(n, &raw_blocks);
    drop(raw_blocks);
    let averaged = scatter(n, &element_blocks(network, PoissonCross::Averaged)?);

    let diagnostics = AssemblyDiagnostics {
        raw_asymmetry: relative_asymmetry(&raw),
        structural_asymmetry: relative_asymmetry(&averaged),
        degenerate_pairs,
    };
    if !(diagnostics.structural_asymmetry <= options.asymmetry_bound) {
        return Err(Error::Numerical(format!(
            "stiffness asymmetry {:.3e} exceeds bound {:.3e}",
            diagnostics.structural_asymmetry, options.asymmetry_bound
        )));
    }
    log::debug!(
        "assembled K: {} dofs, {} nonzeros, raw asymmetry {:.3e}",
        n,
        raw.nnz(),
        diagnostics.raw_asymmetry
    );
    Ok(Stiffness {
        matrix: raw.symmetric_part(),
        diagnostics,
    })
}
