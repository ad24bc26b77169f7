//! Named coefficient sets for the standard experiments.
//!
//! Grid presets scale with the fine spacing `h`: edges are `0.2·h` wide and
//! `1e-3·side` thick, which keeps the Poisson blocks positive semidefinite.

use serde::{Deserialize, Serialize};

use super::study::NetworkSpec;
use crate::network::{BondCoefficients, CoefficientScheme, FiberCoefficients, UniformRange};
use crate::{Error, Result};

const WIDTH_RATIO: f64 = 0.2;
const THICKNESS_RATIO: f64 = 1e-3;

/// Extension and angular stiffness of the stiff and fiber presets, Pa.
pub const STIFF_K: f64 = 3e10;

/// Fiber width and sheet thickness of the fiber presets, m.
pub const FIBER_WIDTH: f64 = 2e-5;
pub const FIBER_THICKNESS: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// Unit stiffnesses on a grid, homogeneous.
    Unit,
    /// Unit stiffnesses, every coefficient scaled by an independent factor
    /// in `[0.5, 1.5]`.
    UnitRandom,
    /// Homogeneous `k = κ = 3e10` on a grid.
    Stiff,
    /// Fiber network, homogeneous fibers, bonds without Poisson coupling.
    Fiber,
    /// As `Fiber` with every coefficient scaled by a factor in `[0.5, 1.5]`.
    FiberRandom,
}

impl Preset {
    pub fn scheme(self, network: &NetworkSpec) -> Result<CoefficientScheme> {
        let grid = || -> Result<(f64, f64)> {
            match *network {
                NetworkSpec::Structured { m_fine, domain_side, .. }
                | NetworkSpec::Perturbed { m_fine, domain_side, .. } => {
                    Ok((domain_side / m_fine.max(1) as f64, domain_side))
                }
                NetworkSpec::Fiber { .. } => Err(Error::invalid(
                    "network.preset",
                    format!("{self:?} needs a structured or perturbed network"),
                )),
            }
        };
        let grid_values = |k: f64, kappa: f64| -> Result<(FiberCoefficients, f64)> {
            let (h, side) = grid()?;
            let w = WIDTH_RATIO * h;
            let t = THICKNESS_RATIO * side;
            Ok((
                FiberCoefficients {
                    k,
                    a: w * t,
                    w,
                    kappa,
                    eta: 0.3,
                    gamma: 0.3,
                },
                t,
            ))
        };
        let fiber = FiberCoefficients {
            k: STIFF_K,
            a: FIBER_WIDTH * FIBER_THICKNESS,
            w: FIBER_WIDTH,
            kappa: STIFF_K,
            eta: 0.3,
            gamma: 0.3,
        };
        // γ = 0 on bonds: crossing fibers are not collinear, and a Poisson
        // term there can make the pair block indefinite.
        let bond = BondCoefficients {
            kappa: STIFF_K,
            eta: 0.3,
            gamma: 0.0,
        };
        Ok(match self {
            Preset::Unit => {
                let (v, t) = grid_values(1.0, 1.0)?;
                CoefficientScheme::homogeneous(v, t)
            }
            Preset::UnitRandom => {
                let (v, t) = grid_values(1.0, 1.0)?;
                CoefficientScheme::random_around(v, 0.5, 1.5, t)
            }
            Preset::Stiff => {
                let (v, t) = grid_values(STIFF_K, STIFF_K)?;
                CoefficientScheme::homogeneous(v, t)
            }
            Preset::Fiber => CoefficientScheme::Fiber {
                fiber,
                bond,
                spread: None,
                thickness: FIBER_THICKNESS,
            },
            Preset::FiberRandom => CoefficientScheme::Fiber {
                fiber,
                bond,
                spread: Some(UniformRange::new(0.5, 1.5)),
                thickness: FIBER_THICKNESS,
            },
        })
    }

    /// The preset used when a configuration names none.
    pub fn default_for(network: &NetworkSpec) -> Self {
        match network {
            NetworkSpec::Fiber { .. } => Preset::Fiber,
            _ => Preset::UnitRandom,
        }
    }
}
