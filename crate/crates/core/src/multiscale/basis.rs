use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::corrector::{compute_patch, solve_patch_all, Corrector, SparseVector};
use super::element::{element_correctors, Accumulator};
use super::grid::CoarseGrid;
use super::shape::ShapeMatrix;
use crate::assembly::{write_coo, StiffnessSystem};
use crate::linalg::{CsrMatrix, SparseCholesky};
use crate::network::Network;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogBase {
    #[default]
    Natural,
    Two,
    Ten,
}

impl LogBase {
    pub fn log(self, x: f64) -> f64 {
        match self {
            LogBase::Natural => x.ln(),
            LogBase::Two => x.log2(),
            LogBase::Ten => x.log10(),
        }
    }
}

/// Where corrector patches are centered.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatchCenter {
    /// One patch per coarse node; `φ_i` vanishes beyond `ell` from node `i`.
    Node,
    /// One patch per coarse element; `φ_i` is the sum of the element
    /// contributions `K_T λ_i`, each vanishing beyond `ell` from its
    /// element center.
    #[default]
    Element,
}

/// Localization radius `ell = factor · H · log(m)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Localization {
    pub factor: f64,
    pub base: LogBase,
    #[serde(default)]
    pub center: PatchCenter,
}

impl Default for Localization {
    fn default() -> Self {
        Self {
            factor: 1.5,
            base: LogBase::Natural,
            center: PatchCenter::Element,
        }
    }
}

impl Localization {
    pub fn radius(&self, grid: &CoarseGrid) -> f64 {
        self.factor * grid.h * self.base.log(grid.m as f64)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.factor > 0.0 && self.factor.is_finite()) {
            return Err(Error::invalid(
                "loc_factor",
                format!("must be positive, got {}", self.factor),
            ));
        }
        Ok(())
    }
}

/// Per-corrector diagnostics kept with the basis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CorrectorStats {
    pub coarse_dof: usize,
    pub patch_dofs: usize,
    pub constraint_rows: usize,
    pub residual_norm: f64,
    pub constraint_norm: f64,
    pub phi_norm: f64,
}

/// Corrected coarse basis `ψ_i = λ_i − φ_i`, one per retained coarse dof.
#[derive(Clone, Debug)]
pub struct MultiscaleBasis {
    pub m: usize,
    pub ell: f64,
    /// Coarse dofs of the columns, increasing (same as `ShapeMatrix::retained`).
    pub coarse_dofs: Vec<usize>,
    /// Row `i` is `ψ_i` over free-dof positions.
    pub psi_t: CsrMatrix,
    pub stats: Vec<CorrectorStats>,
    /// Corrected extension of the prescribed displacements over all dofs:
    /// the prescribed values on constrained dofs and
    /// `Σ g_d (λ_d − φ_d)` on free ones.
    pub lifting: Vec<f64>,
    pub lifting_stats: Vec<CorrectorStats>,
}

impl MultiscaleBasis {
    pub fn len(&self) -> usize {
        self.coarse_dofs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coarse_dofs.is_empty()
    }

    pub fn column(&self, i: usize) -> SparseVector {
        SparseVector::from_row(&self.psi_t, i)
    }

    /// `φ_i = λ_i − ψ_i`.
    pub fn corrector(&self, shape: &ShapeMatrix, i: usize) -> SparseVector {
        SparseVector::from_row(&shape.free, i).sub(&self.column(i))
    }

    /// Basis columns as full-dof vectors (zero on constrained dofs),
    /// as a `2(m+1)² x 2n` matrix with one row per coarse dof.
    pub fn to_full(&self, system: &StiffnessSystem) -> CsrMatrix {
        let m1 = self.m + 1;
        let mut rows = vec![Vec::new(); 2 * m1 * m1];
        for (i, &cd) in self.coarse_dofs.iter().enumerate() {
            let (cols, vals) = self.psi_t.row(i);
            rows[cd] = cols.iter().zip(vals).map(|(&c, &v)| (system.free[c], v)).collect();
        }
        CsrMatrix::from_sorted_rows(system.dof_count(), rows)
    }
}

/// Writes the basis as coordinate text: `coarse_dof network_dof value`.
pub fn write_basis(basis: &MultiscaleBasis, system: &StiffnessSystem, path: &Path) -> Result<()> {
    write_coo(&basis.to_full(system), path)
}

/// Coarse dofs whose shape function touches a constrained dof with a
/// nonzero prescribed value, with the shape-weighted mean of those values.
///
/// `Σ g_d λ_d` interpolates the boundary data; for the zero constraints of
/// the clamped problem the list is empty.
pub fn lifting_coefficients(shape: &ShapeMatrix, system: &StiffnessSystem) -> Vec<(usize, f64)> {
    let mut prescribed = vec![None; system.dof_count()];
    for &(d, v) in &system.constrained {
        prescribed[d] = Some(v);
    }
    let mut out = Vec::new();
    for r in 0..shape.full.nrows() {
        let (cols, vals) = shape.full.row(r);
        let (mut weight, mut sum) = (0.0, 0.0);
        for (&c, &l) in cols.iter().zip(vals) {
            if let Some(v) = prescribed[c] {
                weight += l;
                sum += l * v;
            }
        }
        if weight > 0.0 && sum != 0.0 {
            out.push((r, sum / weight));
        }
    }
    out
}

fn stats_of(c: &Corrector, patch_dofs: usize, constraint_rows: usize) -> CorrectorStats {
    CorrectorStats {
        coarse_dof: c.coarse_dof,
        patch_dofs,
        constraint_rows,
        residual_norm: c.residual_norm,
        constraint_norm: c.constraint_norm,
        phi_norm: c.phi.norm(),
    }
}

/// Correctors of all retained rows and of the lifting, before assembly.
struct Correctors {
    /// `φ_r` per retained row.
    rows: Vec<SparseVector>,
    stats: Vec<CorrectorStats>,
    /// `Σ g_d φ_d`.
    lifting: SparseVector,
    lifting_stats: Vec<CorrectorStats>,
}

/// Both dofs of a coarse node share one patch and one factorization.
fn nodal_correctors(
    grid: &CoarseGrid,
    network: &Network,
    system: &StiffnessSystem,
    k_free: &CsrMatrix,
    shape: &ShapeMatrix,
    ell: f64,
    lifts: &[(usize, f64)],
) -> Result<Correctors> {
    // retained rows and lifting dofs grouped by coarse node
    let mut groups: Vec<(usize, Vec<usize>, Vec<usize>)> = Vec::new();
    let mut rows_it = shape.retained.iter().enumerate().peekable();
    let mut lifts_it = lifts.iter().enumerate().peekable();
    loop {
        let next_row = rows_it.peek().map(|(_, &cd)| cd / 2);
        let next_lift = lifts_it.peek().map(|(_, l)| l.0 / 2);
        let node = match (next_row, next_lift) {
            (None, None) => break,
            (Some(a), Some(b)) => a.min(b),
            (Some(a), None) | (None, Some(a)) => a,
        };
        let mut rows = Vec::new();
        while let Some((i, _)) = rows_it.next_if(|(_, &cd)| cd / 2 == node) {
            rows.push(i);
        }
        let mut lifted = Vec::new();
        while let Some((i, _)) = lifts_it.next_if(|(_, l)| l.0 / 2 == node) {
            lifted.push(i);
        }
        groups.push((node, rows, lifted));
    }

    let solved: Vec<_> = groups
        .par_iter()
        .map(|(node, rows, lifted)| {
            let patch = compute_patch(grid, network, system, shape, *node, ell)?;
            let lambdas: Vec<(usize, SparseVector)> = lifted
                .iter()
                .map(|&i| (lifts[i].0, SparseVector::from_row(&shape.full, lifts[i].0)))
                .collect();
            let (shaped, lifting) = solve_patch_all(system, k_free, shape, &patch, rows, &lambdas)?;
            Ok((shaped, lifting, patch.dofs.len(), patch.constraints.len(), lifted))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut out = Correctors {
        rows: Vec::with_capacity(shape.retained.len()),
        stats: Vec::with_capacity(shape.retained.len()),
        lifting: SparseVector::default(),
        lifting_stats: Vec::new(),
    };
    let mut acc = Accumulator::new(system.free.len());
    for (shaped, lifting, np, nc, lifted) in solved {
        for c in shaped {
            out.stats.push(stats_of(&c, np, nc));
            out.rows.push(c.phi);
        }
        for (c, &i) in lifting.iter().zip(lifted) {
            out.lifting_stats.push(stats_of(c, np, nc));
            acc.add(&c.phi, lifts[i].1);
        }
    }
    out.lifting = acc.take();
    Ok(out)
}

/// Sums the element contributions per row in element order.
fn element_sums(
    grid: &CoarseGrid,
    network: &Network,
    system: &StiffnessSystem,
    k_free: &CsrMatrix,
    shape: &ShapeMatrix,
    ell: f64,
    lifting: Option<&[f64]>,
) -> Result<Correctors> {
    let parts = element_correctors(grid, network, system, k_free, shape, ell, lifting)?;
    let nr = shape.retained.len();
    let mut per_row: Vec<Vec<&SparseVector>> = vec![Vec::new(); nr];
    let mut stats: Vec<CorrectorStats> = shape
        .retained
        .iter()
        .map(|&cd| CorrectorStats {
            coarse_dof: cd,
            patch_dofs: 0,
            constraint_rows: 0,
            residual_norm: 0.0,
            constraint_norm: 0.0,
            phi_norm: 0.0,
        })
        .collect();
    let merge = |s: &mut CorrectorStats, c: &Corrector, np: usize, nc: usize| {
        s.patch_dofs = s.patch_dofs.max(np);
        s.constraint_rows = s.constraint_rows.max(nc);
        s.residual_norm = s.residual_norm.max(c.residual_norm);
        s.constraint_norm = s.constraint_norm.max(c.constraint_norm);
    };
    let mut lifting_stats = Vec::new();
    for part in &parts {
        for c in &part.correctors {
            let r = c.row.expect("shape corrector");
            per_row[r].push(&c.phi);
            merge(&mut stats[r], c, part.patch_dofs, part.constraint_rows);
        }
        if let Some(c) = &part.lifting {
            lifting_stats.push(stats_of(c, part.patch_dofs, part.constraint_rows));
        }
    }
    let mut acc = Accumulator::new(system.free.len());
    let mut rows = Vec::with_capacity(nr);
    for (r, list) in per_row.into_iter().enumerate() {
        for phi in list {
            acc.add(phi, 1.0);
        }
        let phi = acc.take();
        stats[r].phi_norm = phi.norm();
        rows.push(phi);
    }
    for part in &parts {
        if let Some(c) = &part.lifting {
            acc.add(&c.phi, 1.0);
        }
    }
    Ok(Correctors {
        rows,
        stats,
        lifting: acc.take(),
        lifting_stats,
    })
}

/// Builds every corrector, the corrected basis and the corrected lifting.
///
/// Patches are solved in parallel; results are merged in a fixed order, so
/// the basis does not depend on scheduling.
pub fn build_multiscale_basis(
    grid: &CoarseGrid,
    network: &Network,
    system: &StiffnessSystem,
    k_free: &CsrMatrix,
    shape: &ShapeMatrix,
    ell: f64,
) -> Result<MultiscaleBasis> {
    build_multiscale_basis_with(grid, network, system, k_free, shape, ell, PatchCenter::default())
}

pub fn build_multiscale_basis_with(
    grid: &CoarseGrid,
    network: &Network,
    system: &StiffnessSystem,
    k_free: &CsrMatrix,
    shape: &ShapeMatrix,
    ell: f64,
    center: PatchCenter,
) -> Result<MultiscaleBasis> {
    let lifts = lifting_coefficients(shape, system);
    // interpolated boundary data over all dofs
    let mut g_h = vec![0.0; system.dof_count()];
    for &(cd, g) in &lifts {
        let (cols, vals) = shape.full.row(cd);
        for (&c, &l) in cols.iter().zip(vals) {
            g_h[c] += g * l;
        }
    }
    let correctors = match center {
        PatchCenter::Node => nodal_correctors(grid, network, system, k_free, shape, ell, &lifts)?,
        PatchCenter::Element => {
            let lifting = (!lifts.is_empty()).then_some(g_h.as_slice());
            element_sums(grid, network, system, k_free, shape, ell, lifting)?
        }
    };

    let rows: Vec<Vec<(usize, f64)>> = correctors
        .rows
        .iter()
        .enumerate()
        .map(|(r, phi)| {
            let psi = SparseVector::from_row(&shape.free, r).sub(phi);
            psi.indices.into_iter().zip(psi.values).collect()
        })
        .collect();
    let mut lifting = g_h;
    for (&k, &v) in correctors.lifting.indices.iter().zip(&correctors.lifting.values) {
        lifting[system.free[k]] -= v;
    }
    for &(d, v) in &system.constrained {
        lifting[d] = v;
    }
    let stats = correctors.stats;
    let lifting_stats = correctors.lifting_stats;
    let worst = stats.iter().chain(&lifting_stats).map(|s| s.residual_norm).fold(0.0, f64::max);
    log::debug!(
        "m = {}: {} correctors and {} lifting correctors, ell = {ell:.4e}, worst saddle residual {worst:.2e}",
        grid.m,
        stats.len(),
        lifting_stats.len()
    );
    Ok(MultiscaleBasis {
        m: grid.m,
        ell,
        coarse_dofs: shape.retained.clone(),
        psi_t: CsrMatrix::from_sorted_rows(system.free.len(), rows),
        stats,
        lifting,
        lifting_stats,
    })
}

#[derive(Clone, Debug)]
pub struct MultiscaleSolution {
    /// Full-length displacement including the lifting.
    pub u: Vec<f64>,
    /// Coefficients of the basis columns.
    pub coefficients: Vec<f64>,
    /// `max |A − Aᵀ| / max |A|` of the coarse matrix before symmetrization.
    pub coarse_asymmetry: f64,
}

/// Coarse Galerkin matrix `Ψᵀ K Ψ` (before symmetrization).
pub fn coarse_matrix(k_free: &CsrMatrix, basis: &MultiscaleBasis) -> CsrMatrix {
    let nf = k_free.nrows();
    let r = basis.len();
    let psi_rows = basis.psi_t.transpose();
    let rows: Vec<Vec<(usize, f64)>> = (0..r)
        .into_par_iter()
        .map_init(
            || (vec![0.0; nf], vec![false; nf], vec![0.0; r], vec![false; r]),
            |(y, y_hit, acc, acc_hit), i| {
                let mut touched = Vec::new();
                let (cols, vals) = basis.psi_t.row(i);
                for (&c, &v) in cols.iter().zip(vals) {
                    let (kc, kv) = k_free.row(c);
                    for (&d, &k) in kc.iter().zip(kv) {
                        if !y_hit[d] {
                            y_hit[d] = true;
                            touched.push(d);
                        }
                        y[d] += k * v;
                    }
                }
                let mut hits = Vec::new();
                for &d in &touched {
                    let (pc, pv) = psi_rows.row(d);
                    for (&j, &p) in pc.iter().zip(pv) {
                        if !acc_hit[j] {
                            acc_hit[j] = true;
                            hits.push(j);
                        }
                        acc[j] += y[d] * p;
                    }
                    y[d] = 0.0;
                    y_hit[d] = false;
                }
                hits.sort_unstable();
                hits.into_iter()
                    .map(|j| {
                        let v = acc[j];
                        acc[j] = 0.0;
                        acc_hit[j] = false;
                        (j, v)
                    })
                    .collect()
            },
        )
        .collect();
    CsrMatrix::from_sorted_rows(r, rows)
}

/// Solves the Galerkin problem on the span of the basis with the load
/// `F − K g` of the corrected lifting `g`, and adds `g`.
pub fn solve_multiscale(system: &StiffnessSystem, k_free: &CsrMatrix, basis: &MultiscaleBasis) -> Result<MultiscaleSolution> {
    if basis.psi_t.ncols() != system.free.len() {
        return Err(Error::Numerical("multiscale basis was built for a different system".into()));
    }
    if basis.is_empty() {
        return Err(Error::Numerical("multiscale basis is empty".into()));
    }
    let a = coarse_matrix(k_free, basis);
    let scale = a.max_abs();
    let coarse_asymmetry = if scale > 0.0 { a.max_asymmetry() / scale } else { 0.0 };
    let a = a.symmetric_part();
    let chol = SparseCholesky::factor(&a)
        .map_err(|e| Error::Numerical(format!("coarse matrix is not positive definite: {e}")))?;
    let kg = system.k.mul_vec(&basis.lifting);
    let f: Vec<f64> = system.free.iter().map(|&d| system.load[d] - kg[d]).collect();
    let b = basis.psi_t.mul_vec(&f);
    let c = chol.solve(&b);
    let mut u = basis.lifting.clone();
    for (v, &d) in basis.psi_t.transpose_mul_vec(&c).into_iter().zip(&system.free) {
        u[d] += v;
    }
    Ok(MultiscaleSolution {
        u,
        coefficients: c,
        coarse_asymmetry,
    })
}
