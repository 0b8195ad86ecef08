//! Reservoir elimination algebra.
//!
//! The cavities enter the effective lattice dynamics only through two
//! numbers: a shift `δg` of the on-site nonlinearity and a dimensionless
//! dissipation parameter `γ`. Both are second order in the cross-Kerr
//! coupling `χ` and the drive `η`, and odd in the detuning `Δ`.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Default advisory bound for the weak-coupling ratios.
pub const WEAK_COUPLING_THRESHOLD: f64 = 0.1;

/// Microscopic drive and cavity constants, in units of `J`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReservoirParams {
    /// Cross-Kerr coupling `χ` (taken non-negative; only `χ²` matters).
    pub chi: f64,
    /// Drive amplitude rate `η`.
    pub eta: f64,
    /// Cavity energy decay rate `κ`.
    pub kappa: f64,
    /// Detuning `Δ = ω_L − ω_c`. Negative is red detuned.
    pub delta: f64,
}

impl ReservoirParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta >= 0.0) {
            return Err(Error::InvalidParameter(format!("eta must be >= 0, got {}", self.eta)));
        }
        if !(self.kappa > 0.0) {
            return Err(Error::InvalidParameter(format!("kappa must be > 0, got {}", self.kappa)));
        }
        if !self.chi.is_finite() || !self.delta.is_finite() {
            return Err(Error::InvalidParameter("chi and delta must be finite".into()));
        }
        Ok(())
    }

    /// `Δ² + κ²/4`, the squared modulus of the bare cavity response.
    pub fn denominator(&self) -> Result<f64> {
        cavity_denominator(self.kappa, self.delta)
    }
}

fn cavity_denominator(kappa: f64, delta: f64) -> Result<f64> {
    let den = delta * delta + 0.25 * kappa * kappa;
    if den > 0.0 {
        Ok(den)
    } else {
        Err(Error::DegenerateDenominator)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    #[default]
    Periodic,
    /// Dirichlet: `b_0 = b_{L+1} = 0`.
    Open,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainParams {
    /// Hopping `J`, positive after the `(−1)^n` gauge.
    pub hopping: f64,
    /// Anharmonicity `α`, negative for attractive interactions.
    pub anharmonicity: f64,
    pub sites: usize,
    #[serde(default)]
    pub boundary: Boundary,
}

impl ChainParams {
    pub fn new(hopping: f64, anharmonicity: f64, sites: usize, boundary: Boundary) -> Result<Self> {
        let chain = Self { hopping, anharmonicity, sites, boundary };
        chain.validate()?;
        Ok(chain)
    }

    /// `L = 2` is accepted so the two-mode exact solution can be used as a test oracle.
    pub fn validate(&self) -> Result<()> {
        if !(self.hopping > 0.0) {
            return Err(Error::InvalidParameter(format!("hopping must be > 0, got {}", self.hopping)));
        }
        if self.sites < 2 {
            return Err(Error::InvalidParameter(format!("need at least 2 sites, got {}", self.sites)));
        }
        Ok(())
    }
}

/// Constants of the reservoir-eliminated dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveParams {
    /// Net on-site nonlinearity `g = α + δg`.
    pub g: f64,
    /// Reservoir-induced shift `δg` (already contained in `g`).
    #[serde(default)]
    pub delta_g: f64,
    /// Dimensionless particle-conserving dissipation `γ`.
    pub gamma: f64,
    #[serde(default = "unit_hopping")]
    pub hopping: f64,
}

fn unit_hopping() -> f64 {
    1.0
}

impl EffectiveParams {
    /// Effective constants specified directly, with no reservoir shift recorded.
    pub fn new(g: f64, gamma: f64, hopping: f64) -> Self {
        Self { g, delta_g: 0.0, gamma, hopping }
    }

    pub fn with_gamma(self, gamma: f64) -> Self {
        Self { gamma, ..self }
    }
}

/// Eliminates the cavities: `δg = 2χ²η²Δ/(κ²/4 + Δ²)²`,
/// `γ = −4χ²η²Δκ/(Δ² + κ²/4)³`, `g = α + δg`.
pub fn effective_params(res: &ReservoirParams, chain: &ChainParams) -> Result<EffectiveParams> {
    let den = res.denominator()?;
    let coupling = res.chi * res.chi * res.eta * res.eta;
    let delta_g = 2.0 * coupling * res.delta / (den * den);
    let gamma = -4.0 * coupling * res.delta * res.kappa / (den * den * den);
    Ok(EffectiveParams {
        g: chain.anharmonicity + delta_g,
        delta_g,
        gamma,
        hopping: chain.hopping,
    })
}

/// Finds the microscopic `(χ, α)` that realize the effective `(g, γ)` for a
/// given drive and cavity.
pub fn invert_for_chi_alpha(
    target_g: f64,
    target_gamma: f64,
    eta: f64,
    kappa: f64,
    delta: f64,
    hopping: f64,
) -> Result<(f64, f64)> {
    if !(hopping > 0.0) {
        return Err(Error::InvalidParameter(format!("hopping must be > 0, got {hopping}")));
    }
    let den = cavity_denominator(kappa, delta)?;
    if target_gamma == 0.0 {
        return Ok((0.0, target_g));
    }
    let scale = -4.0 * eta * eta * delta * kappa;
    if target_gamma * scale <= 0.0 {
        return Err(Error::UnsolvableSign { gamma: target_gamma, delta, kappa });
    }
    let chi_sq = target_gamma * den * den * den / scale;
    let chi = chi_sq.sqrt();
    let delta_g = 2.0 * chi_sq * eta * eta * delta / (den * den);
    Ok((chi, target_g - delta_g))
}

/// Weak-coupling diagnostics `r1 = χ b²/|iΔ + κ/2|` and `r2 = χ J b²/|iΔ + κ/2|²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeakCoupling {
    pub r1: f64,
    pub r2: f64,
    pub threshold: f64,
}

impl WeakCoupling {
    pub fn within(&self, threshold: f64) -> bool {
        self.r1 < threshold && self.r2 < threshold
    }

    /// Both ratios below the advisory threshold.
    pub fn is_weak(&self) -> bool {
        self.within(self.threshold)
    }
}

pub fn weak_coupling_ratios(res: &ReservoirParams, chain: &ChainParams, b_max: f64) -> Result<WeakCoupling> {
    if !(b_max >= 0.0) {
        return Err(Error::InvalidParameter(format!("b_max must be >= 0, got {b_max}")));
    }
    let den = res.denominator()?;
    let load = res.chi.abs() * b_max * b_max;
    Ok(WeakCoupling {
        r1: load / den.sqrt(),
        r2: load * chain.hopping / den,
        threshold: WEAK_COUPLING_THRESHOLD,
    })
}
