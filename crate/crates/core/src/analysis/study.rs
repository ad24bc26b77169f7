use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::errors::{fit_rate, relative_errors, solve_reference, RateFit};
use crate::assembly::{assemble_stiffness, build_problem, AssemblyDiagnostics, AssemblyOptions, ProblemSpec};
use crate::multiscale::{run_lod, CoarseBoundary, Localization};
use crate::network::{
    assign_coefficients, fiber_count_for_target_nodes, generate_fiber_network, generate_perturbed_with,
    generate_structured_with, BondPairs, CoefficientScheme, FiberParams, Network, PairSelection,
};
use crate::{Error, Result};

pub const STUDY_FORMAT_VERSION: u32 = 1;

/// Header of the study CSV.
pub const CSV_HEADER: &str = "m,H,ell,rel_l2,rel_energy,wall_seconds";

/// Which network to generate, with its geometric parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum NetworkSpec {
    Structured {
        m_fine: usize,
        domain_side: f64,
        #[serde(default)]
        pairs: PairSelection,
    },
    Perturbed {
        m_fine: usize,
        domain_side: f64,
        magnitude: f64,
        #[serde(default)]
        pairs: PairSelection,
    },
    Fiber {
        domain_side: f64,
        fiber_length: f64,
        segments_per_fiber: usize,
        /// Used when set; otherwise searched from `target_nodes`.
        #[serde(default)]
        fiber_count: Option<usize>,
        #[serde(default)]
        target_nodes: Option<usize>,
        #[serde(default)]
        bond_pairs: BondPairs,
        /// Crossing merge distance relative to `domain_side`; the generator
        /// default when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        snap_tolerance: Option<f64>,
    },
}

impl NetworkSpec {
    pub fn domain_side(&self) -> f64 {
        match *self {
            NetworkSpec::Structured { domain_side, .. }
            | NetworkSpec::Perturbed { domain_side, .. }
            | NetworkSpec::Fiber { domain_side, .. } => domain_side,
        }
    }

    /// Generates the geometry (coefficients are left at their defaults).
    pub fn generate(&self, seed: u64) -> Result<Network> {
        match *self {
            NetworkSpec::Structured {
                m_fine,
                domain_side,
                pairs,
            } => generate_structured_with(m_fine, domain_side, pairs),
            NetworkSpec::Perturbed {
                m_fine,
                domain_side,
                magnitude,
                pairs,
            } => generate_perturbed_with(m_fine, domain_side, magnitude, seed, pairs),
            NetworkSpec::Fiber {
                domain_side,
                fiber_length,
                segments_per_fiber,
                fiber_count,
                target_nodes,
                bond_pairs,
                snap_tolerance,
            } => {
                let mut params = FiberParams::new(domain_side, 2, fiber_length, segments_per_fiber, seed);
                params.bond_pairs = bond_pairs;
                if let Some(t) = snap_tolerance {
                    params.snap_tolerance = t;
                }
                params.fiber_count = match (fiber_count, target_nodes) {
                    (Some(c), _) => c,
                    (None, Some(t)) => fiber_count_for_target_nodes(&params, t)?,
                    (None, None) => {
                        return Err(Error::invalid(
                            "network.fiber_count",
                            "either fiber_count or target_nodes must be given",
                        ))
                    }
                };
                generate_fiber_network(&params)
            }
        }
    }
}

/// Seeds of the two random streams, both derived from the study seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamSeeds {
    pub seed: u64,
    pub network: u64,
    pub coefficients: u64,
}

impl StreamSeeds {
    pub fn derive(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            seed,
            network: rng.random(),
            coefficients: rng.random(),
        }
    }
}

/// Generates a network and assigns its coefficients from one seed, which
/// is stored as the network seed.
pub fn build_network(spec: &NetworkSpec, scheme: &CoefficientScheme, seed: u64) -> Result<Network> {
    let seeds = StreamSeeds::derive(seed);
    let net = spec.generate(seeds.network)?;
    let mut net = assign_coefficients(net, scheme, seeds.coefficients)?;
    net.seed = seed;
    Ok(net)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub network: NetworkSpec,
    pub coefficients: CoefficientScheme,
    pub problem: ProblemSpec,
    pub coarse_sizes: Vec<usize>,
    #[serde(default)]
    pub localization: Localization,
    #[serde(default)]
    pub coarse_boundary: CoarseBoundary,
    pub seed: u64,
    /// Measure wall time per row. Off by default so that the CSV is a
    /// function of the configuration alone; the column then holds zeros.
    #[serde(default)]
    pub timing: bool,
    /// Directory for `<stem>.csv` and `<stem>.json`; nothing is written when
    /// absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.coarse_sizes.is_empty() {
            return Err(Error::invalid("coarse_sizes", "at least one coarse size is required"));
        }
        if let Some(&m) = self.coarse_sizes.iter().find(|&&m| m < 2) {
            return Err(Error::invalid("coarse_sizes", format!("every m must be at least 2, got {m}")));
        }
        if self.coarse_sizes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("coarse_sizes", "must be strictly increasing"));
        }
        self.localization.validate()?;
        self.problem.validate()?;
        self.coefficients.validate()
    }

    /// SHA-256 of the configuration in canonical JSON form, output path
    /// excluded.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output = None;
        let json = serde_json::to_vec(&c).expect("config serializes");
        Sha256::digest(&json).iter().fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub m: usize,
    pub h: f64,
    pub ell: f64,
    pub rel_l2: f64,
    pub rel_energy: f64,
    pub wall_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RowFailure {
    pub m: usize,
    pub message: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Slopes {
    pub rate_l2: f64,
    pub rate_energy: f64,
    pub residual_variance_l2: f64,
    pub residual_variance_energy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyMetadata {
    pub format_version: u32,
    pub crate_version: String,
    pub config_hash: String,
    pub seeds: StreamSeeds,
    pub nodes: usize,
    pub edges: usize,
    pub pairs: usize,
    pub free_dofs: usize,
    pub reference_residual: f64,
    pub raw_asymmetry: f64,
    pub failures: Vec<RowFailure>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StudyResult {
    /// Successful rows in increasing `m`.
    pub rows: Vec<StudyRow>,
    pub slopes: Slopes,
    pub metadata: StudyMetadata,
}

impl StudyResult {
    pub fn fits(&self) -> Result<(RateFit, RateFit)> {
        let h: Vec<f64> = self.rows.iter().map(|r| r.h).collect();
        let l2: Vec<f64> = self.rows.iter().map(|r| r.rel_l2).collect();
        let en: Vec<f64> = self.rows.iter().map(|r| r.rel_energy).collect();
        Ok((fit_rate(&h, &l2)?, fit_rate(&h, &en)?))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                r.m, r.h, r.ell, r.rel_l2, r.rel_energy, r.wall_seconds
            );
        }
        out
    }

    pub fn metadata_json(&self) -> String {
        #[derive(Serialize)]
        struct Out<'a> {
            #[serde(flatten)]
            metadata: &'a StudyMetadata,
            slopes: Slopes,
        }
        let mut s = serde_json::to_string_pretty(&Out {
            metadata: &self.metadata,
            slopes: self.slopes,
        })
        .expect("metadata serializes");
        s.push('\n');
        s
    }

    /// Writes `<dir>/<stem>.csv` and `<dir>/<stem>.json`, returning both paths.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<(PathBuf, PathBuf)> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let csv = dir.join(format!("{stem}.csv"));
        let json = dir.join(format!("{stem}.json"));
        std::fs::write(&csv, self.to_csv()).map_err(|e| Error::io(&csv, e))?;
        std::fs::write(&json, self.metadata_json()).map_err(|e| Error::io(&json, e))?;
        Ok((csv, json))
    }
}

/// Generates the network, assembles once, solves the reference once and
/// runs the multiscale method for every coarse size.
///
/// A failing coarse size is logged and recorded; the study fails when fewer
/// than three sizes succeed.
pub fn run_study(config: &StudyConfig) -> Result<StudyResult> {
    config.validate()?;
    let seeds = StreamSeeds::derive(config.seed);
    let network = build_network(&config.network, &config.coefficients, config.seed)?;
    log::info!(
        "network: {} nodes, {} edges, {} pairs",
        network.nodes.len(),
        network.edges.len(),
        network.pairs.len()
    );
    let stiffness = assemble_stiffness(&network, &AssemblyOptions::default())?;
    let diagnostics: AssemblyDiagnostics = stiffness.diagnostics;
    let system = build_problem(&network, stiffness.matrix, &config.problem)?;
    let k_free = system.free_matrix();
    let reference = solve_reference(&system, &k_free)?;
    log::info!("reference residual {:.2e}", reference.relative_residual);

    let outcomes: Vec<Result<StudyRow>> = config
        .coarse_sizes
        .par_iter()
        .map(|&m| {
            let start = Instant::now();
            let run = run_lod(&network, &system, &k_free, m, &config.localization, config.coarse_boundary)?;
            let errors = relative_errors(&reference.u, &run.solution.u, &system.k)?;
            let wall_seconds = if config.timing { start.elapsed().as_secs_f64() } else { 0.0 };
            log::info!(
                "m = {m}: rel_l2 = {:.3e}, rel_energy = {:.3e}",
                errors.l2,
                errors.energy
            );
            Ok(StudyRow {
                m,
                h: run.grid.h,
                ell: run.basis.ell,
                rel_l2: errors.l2,
                rel_energy: errors.energy,
                wall_seconds,
            })
        })
        .collect();

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (&m, outcome) in config.coarse_sizes.iter().zip(outcomes) {
        match outcome {
            Ok(row) => rows.push(row),
            Err(e) => {
                log::warn!("m = {m} failed: {e}");
                failures.push(RowFailure { m, message: e.to_string() });
            }
        }
    }
    if rows.len() < 3 {
        return Err(Error::Numerical(format!(
            "only {} of {} coarse sizes succeeded; a rate needs three",
            rows.len(),
            config.coarse_sizes.len()
        )));
    }
    let mut result = StudyResult {
        rows,
        slopes: Slopes {
            rate_l2: 0.0,
            rate_energy: 0.0,
            residual_variance_l2: 0.0,
            residual_variance_energy: 0.0,
        },
        metadata: StudyMetadata {
            format_version: STUDY_FORMAT_VERSION,
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: config.hash(),
            seeds,
            nodes: network.nodes.len(),
            edges: network.edges.len(),
            pairs: network.pairs.len(),
            free_dofs: system.free.len(),
            reference_residual: reference.relative_residual,
            raw_asymmetry: diagnostics.raw_asymmetry,
            failures,
        },
    };
    let (l2, energy) = result.fits()?;
    result.slopes = Slopes {
        rate_l2: l2.slope,
        rate_energy: energy.slope,
        residual_variance_l2: l2.residual_variance,
        residual_variance_energy: energy.residual_variance,
    };
    if let Some(dir) = &config.output {
        result.write(dir, "study")?;
    }
    Ok(result)
}
