use serde::{Deserialize, Serialize};

use crate::linalg::CsrMatrix;
use crate::network::{Network, Side};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    /// Whole boundary clamped, uniform diagonal force on every free node.
    FixedBoundaryForce,
    /// Left side clamped, right side pulled in `x`, no applied force.
    DisplacedRightBoundary,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    /// Dimensionless force scale `c_F`.
    pub force_scale: f64,
    /// Right-side displacement as a fraction of the domain side.
    pub displacement_fraction: f64,
}

impl ProblemSpec {
    pub fn force() -> Self {
        Self {
            kind: ProblemKind::FixedBoundaryForce,
            force_scale: 1e-3,
            displacement_fraction: 0.1,
        }
    }

    pub fn displace() -> Self {
        Self {
            kind: ProblemKind::DisplacedRightBoundary,
            ..Self::force()
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            ProblemKind::FixedBoundaryForce if !(self.force_scale > 0.0 && self.force_scale.is_finite()) => Err(
                Error::invalid("force_scale", format!("must be positive, got {}", self.force_scale)),
            ),
            // zero is allowed: it gives the trivial solution
            ProblemKind::DisplacedRightBoundary
                if !(self.displacement_fraction >= 0.0 && self.displacement_fraction.is_finite()) =>
            {
                Err(Error::invalid(
                    "displacement_fraction",
                    format!("must be non-negative, got {}", self.displacement_fraction),
                ))
            }
            _ => Ok(()),
        }
    }
}

/// Stiffness operator with load and displacement constraints.
#[derive(Clone, Debug)]
pub struct StiffnessSystem {
    /// Symmetric operator over all `2n` dofs.
    pub k: CsrMatrix,
    /// Applied load over all dofs, N.
    pub load: Vec<f64>,
    /// Constrained dofs in increasing order with their prescribed values, m.
    pub constrained: Vec<(usize, f64)>,
    /// Unconstrained dofs in increasing order.
    pub free: Vec<usize>,
    free_position: Vec<Option<usize>>,
    lifting: Vec<f64>,
}

impl StiffnessSystem {
    /// System whose lifting is zero on free dofs.
    pub fn new(k: CsrMatrix, load: Vec<f64>, constrained: Vec<(usize, f64)>) -> Result<Self> {
        let n = k.nrows();
        Self::with_lifting(k, load, constrained, vec![0.0; n])
    }

    /// System with a given extension of the constraints; its values on
    /// constrained dofs are overwritten by the prescribed ones.
    pub fn with_lifting(
        k: CsrMatrix,
        load: Vec<f64>,
        mut constrained: Vec<(usize, f64)>,
        mut lifting: Vec<f64>,
    ) -> Result<Self> {
        let n = k.nrows();
        if k.ncols() != n || load.len() != n || lifting.len() != n {
            return Err(Error::Numerical("stiffness and load dimensions differ".into()));
        }
        constrained.sort_by_key(|c| c.0);
        constrained.dedup_by_key(|c| c.0);
        let mut is_constrained = vec![false; n];
        for &(d, v) in &constrained {
            if d >= n {
                return Err(Error::Numerical(format!("constrained dof {d} out of range")));
            }
            is_constrained[d] = true;
            lifting[d] = v;
        }
        let free: Vec<usize> = (0..n).filter(|&d| !is_constrained[d]).collect();
        let mut free_position = vec![None; n];
        for (k, &d) in free.iter().enumerate() {
            free_position[d] = Some(k);
        }
        Ok(Self {
            k,
            load,
            constrained,
            free,
            free_position,
            lifting,
        })
    }

    pub fn dof_count(&self) -> usize {
        self.load.len()
    }

    /// Position of a dof within `free`.
    pub fn free_position(&self, dof: usize) -> Option<usize> {
        self.free_position[dof]
    }

    /// Full-length vector carrying the prescribed values on constrained
    /// dofs and their extension elsewhere.
    pub fn lifting(&self) -> &[f64] {
        &self.lifting
    }

    /// `K` restricted to free rows and columns.
    pub fn free_matrix(&self) -> CsrMatrix {
        self.k.submatrix(&self.free, &self.free)
    }

    /// Right-hand side on free dofs after moving the prescribed
    /// displacements over: `F_f − (K g)_f` with `g` the lifting.
    pub fn effective_load(&self) -> Vec<f64> {
        let kg = self.k.mul_vec(&self.lifting);
        self.free.iter().map(|&d| self.load[d] - kg[d]).collect()
    }

    /// Full-length effective load, zero on constrained dofs.
    pub fn effective_load_full(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dof_count()];
        for (v, &d) in self.effective_load().into_iter().zip(&self.free) {
            out[d] = v;
        }
        out
    }

    /// Lifting plus a correction on the free dofs.
    pub fn expand(&self, free_values: &[f64]) -> Vec<f64> {
        assert_eq!(free_values.len(), self.free.len());
        let mut u = self.lifting.clone();
        for (&d, &v) in self.free.iter().zip(free_values) {
            u[d] += v;
        }
        u
    }

    /// Free-dof part of `full − lifting`; inverse of [`Self::expand`].
    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.free.iter().map(|&d| full[d] - self.lifting[d]).collect()
    }
}

fn nodes_on(network: &Network, side: Side) -> Result<Vec<usize>> {
    let nodes = network.side_nodes(side);
    if nodes.is_empty() {
        return Err(Error::Geometry(format!("no network node on the {side:?} side")));
    }
    Ok(nodes)
}

/// Attaches load and constraints of the chosen problem to an assembled `K`.
pub fn build_problem(network: &Network, k: CsrMatrix, spec: &ProblemSpec) -> Result<StiffnessSystem> {
    spec.validate()?;
    let n = network.dof_count();
    if k.nrows() != n {
        return Err(Error::Numerical(format!(
            "stiffness has {} rows, network has {n} dofs",
            k.nrows()
        )));
    }
    match spec.kind {
        ProblemKind::FixedBoundaryForce => {
            for side in Side::ALL {
                nodes_on(network, side)?;
            }
            let mut constrained = Vec::new();
            for node in network.boundary_nodes() {
                constrained.push((2 * node, 0.0));
                constrained.push((2 * node + 1, 0.0));
            }
            let diag = k.diagonal();
            let mean_diag = diag.iter().sum::<f64>() / n as f64;
            let s = spec.force_scale * mean_diag * network.domain_side;
            let f = s * std::f64::consts::FRAC_1_SQRT_2;
            let mut load = vec![0.0; n];
            let mut sys = StiffnessSystem::new(k, vec![0.0; n], constrained)?;
            for &d in &sys.free {
                load[d] = f;
            }
            sys.load = load;
            Ok(sys)
        }
        ProblemKind::DisplacedRightBoundary => {
            let left = nodes_on(network, Side::Left)?;
            let right = nodes_on(network, Side::Right)?;
            let ux = spec.displacement_fraction * network.domain_side;
            let mut constrained = Vec::new();
            for node in right {
                constrained.push((2 * node, ux));
                constrained.push((2 * node + 1, 0.0));
            }
            // left wins at shared nodes (only possible on degenerate domains)
            for node in left {
                constrained.retain(|c| c.0 / 2 != node);
                constrained.push((2 * node, 0.0));
                constrained.push((2 * node + 1, 0.0));
            }
            StiffnessSystem::new(k, vec![0.0; n], constrained)
        }
    }
}
