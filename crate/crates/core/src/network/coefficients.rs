use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Network, PairKind};
use crate::{Error, Result};

/// Closed interval `[low, high]` with `0 < low ≤ high`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniformRange {
    pub low: f64,
    pub high: f64,
}

impl UniformRange {
    pub const fn new(low: f64, high: f64) -> Self {
        Self { low, high }
    }

    pub const fn fixed(value: f64) -> Self {
        Self { low: value, high: value }
    }

    fn validate(&self, field: &str) -> Result<()> {
        if !(self.low > 0.0) || !(self.low <= self.high) || !self.high.is_finite() {
            return Err(Error::invalid(
                field,
                format!("range [{}, {}] must satisfy 0 < low <= high", self.low, self.high),
            ));
        }
        Ok(())
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        if self.low == self.high {
            // still consume a draw so the stream does not depend on the values
            let _: f64 = rng.random();
            self.low
        } else {
            rng.random_range(self.low..=self.high)
        }
    }
}

/// Edge and intra-fiber pair coefficients of a fiber.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiberCoefficients {
    pub k: f64,
    pub a: f64,
    pub w: f64,
    pub kappa: f64,
    pub eta: f64,
    pub gamma: f64,
}

/// Pair coefficients of the bonds between crossing fibers.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BondCoefficients {
    pub kappa: f64,
    pub eta: f64,
    pub gamma: f64,
}

/// How material coefficients are attached to edges and edge pairs.
///
/// The connection volume of a pair is `w₁·w₂·thickness` unless a scheme fixes
/// it explicitly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum CoefficientScheme {
    Homogeneous {
        k: f64,
        a: f64,
        w: f64,
        kappa: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        volume: Option<f64>,
        eta: f64,
        gamma: f64,
        thickness: f64,
    },
    RandomUniform {
        k: UniformRange,
        a: UniformRange,
        w: UniformRange,
        kappa: UniformRange,
        eta: UniformRange,
        gamma: UniformRange,
        thickness: f64,
    },
    Fiber {
        fiber: FiberCoefficients,
        bond: BondCoefficients,
        /// Optional multiplicative randomization applied to every coefficient.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        spread: Option<UniformRange>,
        thickness: f64,
    },
}

impl CoefficientScheme {
    /// Every scalar in `values` used verbatim.
    pub fn homogeneous(values: FiberCoefficients, thickness: f64) -> Self {
        CoefficientScheme::Homogeneous {
            k: values.k,
            a: values.a,
            w: values.w,
            kappa: values.kappa,
            volume: None,
            eta: values.eta,
            gamma: values.gamma,
            thickness,
        }
    }

    /// Each coefficient of `nominal` scaled by an independent factor drawn
    /// from `[low, high]`.
    pub fn random_around(nominal: FiberCoefficients, low: f64, high: f64, thickness: f64) -> Self {
        let r = |v: f64| UniformRange::new(v * low, v * high);
        CoefficientScheme::RandomUniform {
            k: r(nominal.k),
            a: r(nominal.a),
            w: r(nominal.w),
            kappa: r(nominal.kappa),
            eta: r(nominal.eta),
            gamma: r(nominal.gamma),
            thickness,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |field: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(field, format!("must be positive, got {v}")))
            }
        };
        let non_negative = |field: &str, v: f64| {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(field, format!("must be non-negative, got {v}")))
            }
        };
        match self {
            CoefficientScheme::Homogeneous {
                k,
                a,
                w,
                kappa,
                volume,
                eta,
                gamma,
                thickness,
            } => {
                positive("k", *k)?;
                positive("a", *a)?;
                positive("w", *w)?;
                non_negative("kappa", *kappa)?;
                non_negative("eta", *eta)?;
                non_negative("gamma", *gamma)?;
                positive("thickness", *thickness)?;
                if let Some(v) = volume {
                    positive("volume", *v)?;
                }
            }
            CoefficientScheme::RandomUniform {
                k,
                a,
                w,
                kappa,
                eta,
                gamma,
                thickness,
            } => {
                k.validate("k")?;
                a.validate("a")?;
                w.validate("w")?;
                kappa.validate("kappa")?;
                eta.validate("eta")?;
                gamma.validate("gamma")?;
                positive("thickness", *thickness)?;
            }
            CoefficientScheme::Fiber {
                fiber,
                bond,
                spread,
                thickness,
            } => {
                positive("fiber.k", fiber.k)?;
                positive("fiber.a", fiber.a)?;
                positive("fiber.w", fiber.w)?;
                non_negative("fiber.kappa", fiber.kappa)?;
                non_negative("fiber.eta", fiber.eta)?;
                non_negative("fiber.gamma", fiber.gamma)?;
                non_negative("bond.kappa", bond.kappa)?;
                non_negative("bond.eta", bond.eta)?;
                non_negative("bond.gamma", bond.gamma)?;
                positive("thickness", *thickness)?;
                if let Some(s) = spread {
                    s.validate("spread")?;
                }
            }
        }
        Ok(())
    }
}

/// Attaches coefficients to every edge and edge pair of `network`.
///
/// Random draws are taken edge by edge and then pair by pair in id order from
/// a ChaCha stream seeded with `seed`.
pub fn assign_coefficients(mut network: Network, scheme: &CoefficientScheme, seed: u64) -> Result<Network> {
    scheme.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let thickness;
    let mut fixed_volume = None;
    match scheme {
        CoefficientScheme::Homogeneous {
            k,
            a,
            w,
            kappa,
            volume,
            eta,
            gamma,
            thickness: t,
        } => {
            thickness = *t;
            fixed_volume = *volume;
            for e in &mut network.edges {
                (e.k, e.a, e.w) = (*k, *a, *w);
            }
            for p in &mut network.pairs {
                (p.kappa, p.eta, p.gamma) = (*kappa, *eta, *gamma);
            }
        }
        CoefficientScheme::RandomUniform {
            k,
            a,
            w,
            kappa,
            eta,
            gamma,
            thickness: t,
        } => {
            thickness = *t;
            for e in &mut network.edges {
                e.k = k.sample(&mut rng);
                e.a = a.sample(&mut rng);
                e.w = w.sample(&mut rng);
            }
            for p in &mut network.pairs {
                p.kappa = kappa.sample(&mut rng);
                p.eta = eta.sample(&mut rng);
                p.gamma = gamma.sample(&mut rng);
            }
        }
        CoefficientScheme::Fiber {
            fiber,
            bond,
            spread,
            thickness: t,
        } => {
            thickness = *t;
            let factor = |rng: &mut ChaCha8Rng| spread.map_or(1.0, |s| s.sample(rng));
            for e in &mut network.edges {
                e.k = fiber.k * factor(&mut rng);
                e.a = fiber.a * factor(&mut rng);
                e.w = fiber.w * factor(&mut rng);
            }
            for p in &mut network.pairs {
                let (kappa, eta, gamma) = match p.kind {
                    PairKind::IntraFiber => (fiber.kappa, fiber.eta, fiber.gamma),
                    PairKind::InterFiberBond => (bond.kappa, bond.eta, bond.gamma),
                };
                p.kappa = kappa * factor(&mut rng);
                p.eta = eta * factor(&mut rng);
                p.gamma = gamma * factor(&mut rng);
            }
        }
    }
    for p in &mut network.pairs {
        p.volume = match fixed_volume {
            Some(v) => v,
            None => network.edges[p.edges[0]].w * network.edges[p.edges[1]].w * thickness,
        };
    }
    network.scheme = Some(scheme.clone());
    Ok(network)
}
