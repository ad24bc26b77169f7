//! TOML run configuration. Every key is optional; command-line flags are
//! applied on top and the remaining gaps take the documented defaults.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use crate::analysis::{NetworkSpec, Preset};
use crate::assembly::{ProblemKind, ProblemSpec};
use crate::multiscale::{CoarseBoundary, Localization, LogBase, PatchCenter};
use crate::network::{BondPairs, CoefficientScheme, PairSelection};
use crate::{Error, Result};

pub const DEFAULT_M_FINE: usize = 64;
pub const DEFAULT_MAGNITUDE: f64 = 0.25;
pub const DEFAULT_FIBER_DOMAIN: f64 = 0.01;
pub const DEFAULT_FIBER_LENGTH: f64 = 0.002;
pub const DEFAULT_SEGMENTS: usize = 4;
pub const DEFAULT_TARGET_NODES: usize = 10_000;
/// Crossings closer than one fiber width (2e-5 m on the 0.01 m domain) are
/// merged into one node.
pub const DEFAULT_FIBER_SNAP: f64 = 2e-3;
pub const DEFAULT_COARSE_SIZES: [usize; 4] = [4, 8, 16, 32];
pub const DEFAULT_COARSE_M: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum NetworkType {
    Structured,
    Perturbed,
    Fiber,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ProblemChoice {
    /// Clamped boundary, uniform force.
    Force,
    /// Left side clamped, right side displaced.
    Displace,
}

impl From<ProblemChoice> for ProblemKind {
    fn from(p: ProblemChoice) -> Self {
        match p {
            ProblemChoice::Force => ProblemKind::FixedBoundaryForce,
            ProblemChoice::Displace => ProblemKind::DisplacedRightBoundary,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    Lod,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkSection {
    #[serde(rename = "type")]
    pub kind: Option<NetworkType>,
    pub m_fine: Option<usize>,
    pub domain_side: Option<f64>,
    pub magnitude: Option<f64>,
    pub pairs: Option<PairSelection>,
    pub fiber_length: Option<f64>,
    pub segments_per_fiber: Option<usize>,
    pub fiber_count: Option<usize>,
    pub target_nodes: Option<usize>,
    pub bond_pairs: Option<BondPairs>,
    pub snap_tolerance: Option<f64>,
    /// Named coefficient set, used unless `coefficients` is given.
    pub preset: Option<Preset>,
    pub coefficients: Option<CoefficientScheme>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AssemblySection {
    pub problem: Option<ProblemChoice>,
    pub force_scale: Option<f64>,
    pub displacement_fraction: Option<f64>,
    pub asymmetry_bound: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MultiscaleSection {
    pub m: Option<usize>,
    pub loc_factor: Option<f64>,
    pub log_base: Option<LogBase>,
    pub patch_center: Option<PatchCenter>,
    pub coarse_boundary: Option<CoarseBoundary>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisSection {
    pub coarse_sizes: Option<Vec<usize>>,
    pub timing: Option<bool>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CliSection {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub output: Option<PathBuf>,
    /// Network file read by `solve`.
    pub network: Option<PathBuf>,
    pub method: Option<Method>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub network: NetworkSection,
    pub assembly: AssemblySection,
    pub multiscale: MultiscaleSection,
    pub analysis: AnalysisSection,
    pub cli: CliSection,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::invalid("config", e.message().to_string() + &span_hint(text, e.span())))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::InvalidParameter { field, reason } => Error::invalid(field, format!("{}: {reason}", path.display())),
            other => other,
        })
    }

    pub fn seed(&self) -> u64 {
        self.cli.seed.unwrap_or(1)
    }

    /// Network geometry and coefficients with defaults filled in.
    pub fn network_spec(&self) -> Result<(NetworkSpec, CoefficientScheme)> {
        let n = &self.network;
        let kind = n.kind.unwrap_or(NetworkType::Perturbed);
        let ignored = |key: &str, set: bool| {
            if set {
                log::warn!("network.{key} is ignored for {kind:?} networks");
            }
        };
        let spec = match kind {
            NetworkType::Structured | NetworkType::Perturbed => {
                ignored("fiber_length", n.fiber_length.is_some());
                ignored("segments_per_fiber", n.segments_per_fiber.is_some());
                ignored("fiber_count", n.fiber_count.is_some());
                ignored("target_nodes", n.target_nodes.is_some());
                let m_fine = n.m_fine.unwrap_or(DEFAULT_M_FINE);
                let domain_side = n.domain_side.unwrap_or(1.0);
                let pairs = n.pairs.unwrap_or_default();
                if kind == NetworkType::Structured {
                    ignored("magnitude", n.magnitude.is_some());
                    NetworkSpec::Structured {
                        m_fine,
                        domain_side,
                        pairs,
                    }
                } else {
                    NetworkSpec::Perturbed {
                        m_fine,
                        domain_side,
                        magnitude: n.magnitude.unwrap_or(DEFAULT_MAGNITUDE),
                        pairs,
                    }
                }
            }
            NetworkType::Fiber => {
                ignored("m_fine", n.m_fine.is_some());
                ignored("magnitude", n.magnitude.is_some());
                NetworkSpec::Fiber {
                    domain_side: n.domain_side.unwrap_or(DEFAULT_FIBER_DOMAIN),
                    fiber_length: n.fiber_length.unwrap_or(DEFAULT_FIBER_LENGTH),
                    segments_per_fiber: n.segments_per_fiber.unwrap_or(DEFAULT_SEGMENTS),
                    fiber_count: n.fiber_count,
                    target_nodes: match n.fiber_count {
                        Some(_) => n.target_nodes,
                        None => Some(n.target_nodes.unwrap_or(DEFAULT_TARGET_NODES)),
                    },
                    bond_pairs: n.bond_pairs.unwrap_or_default(),
                    snap_tolerance: Some(n.snap_tolerance.unwrap_or(DEFAULT_FIBER_SNAP)),
                }
            }
        };
        let scheme = match &n.coefficients {
            Some(s) => s.clone(),
            None => n.preset.unwrap_or_else(|| Preset::default_for(&spec)).scheme(&spec)?,
        };
        scheme.validate().map_err(|e| prefix("network.coefficients", e))?;
        Ok((spec, scheme))
    }

    pub fn problem(&self) -> Result<ProblemSpec> {
        let a = &self.assembly;
        let defaults = ProblemSpec::force();
        let spec = ProblemSpec {
            kind: a.problem.unwrap_or(ProblemChoice::Force).into(),
            force_scale: a.force_scale.unwrap_or(defaults.force_scale),
            displacement_fraction: a.displacement_fraction.unwrap_or(defaults.displacement_fraction),
        };
        spec.validate().map_err(|e| prefix("assembly", e))?;
        Ok(spec)
    }

    pub fn asymmetry_bound(&self) -> Result<f64> {
        let b = self.assembly.asymmetry_bound.unwrap_or(1e-6);
        if !(b >= 0.0 && b.is_finite()) {
            return Err(Error::invalid("assembly.asymmetry_bound", format!("must be non-negative, got {b}")));
        }
        Ok(b)
    }

    pub fn localization(&self) -> Result<Localization> {
        let d = Localization::default();
        let s = &self.multiscale;
        let loc = Localization {
            factor: s.loc_factor.unwrap_or(d.factor),
            base: s.log_base.unwrap_or(d.base),
            center: s.patch_center.unwrap_or(d.center),
        };
        loc.validate().map_err(|e| prefix("multiscale", e))?;
        Ok(loc)
    }

    pub fn coarse_boundary(&self) -> CoarseBoundary {
        self.multiscale.coarse_boundary.unwrap_or_default()
    }

    pub fn coarse_m(&self) -> Result<usize> {
        let m = self.multiscale.m.unwrap_or(DEFAULT_COARSE_M);
        if m < 2 {
            return Err(Error::invalid("multiscale.m", format!("must be at least 2, got {m}")));
        }
        Ok(m)
    }

    /// Coarse sizes of a study. Fiber networks default to the list without
    /// its finest entry.
    pub fn coarse_sizes(&self, spec: &NetworkSpec) -> Vec<usize> {
        self.analysis.coarse_sizes.clone().unwrap_or_else(|| match spec {
            NetworkSpec::Fiber { .. } => DEFAULT_COARSE_SIZES[..3].to_vec(),
            _ => DEFAULT_COARSE_SIZES.to_vec(),
        })
    }

    pub fn output(&self) -> PathBuf {
        self.cli.output.clone().unwrap_or_else(|| PathBuf::from("fibernet-out"))
    }
}

fn prefix(section: &str, e: Error) -> Error {
    match e {
        Error::InvalidParameter { field, reason } => Error::invalid(format!("{section}.{field}"), reason),
        other => other,
    }
}

fn span_hint(text: &str, span: Option<std::ops::Range<usize>>) -> String {
    span.map(|s| {
        let line = text[..s.start.min(text.len())].matches('\n').count() + 1;
        format!(" (line {line})")
    })
    .unwrap_or_default()
}
