//! Six-coordinate variational reduction of a single soliton,
//!
//! ```text
//! Ψ̄(x) = ψ exp(i[(x − x0)v + (x − x0)²d + φ]) sech((x − x0)/w),
//! ```
//!
//! and the stable soliton it admits for attractive interactions.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::params::EffectiveParams;
use crate::{Error, Result, C64};

/// Widths below this are treated as a collapse of the ansatz.
pub const DEFAULT_WIDTH_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolitonCoords {
    /// Amplitude `ψ ≥ 0`.
    pub psi: f64,
    /// Center `x0`.
    pub x0: f64,
    /// Velocity (phase gradient) `v`.
    pub v: f64,
    /// Width `w > 0`.
    pub w: f64,
    /// Chirp `d`.
    pub d: f64,
    /// Global phase `φ`.
    pub phi: f64,
}

impl SolitonCoords {
    pub fn validate(&self) -> Result<()> {
        if !(self.w > 0.0) {
            return Err(Error::InvalidParameter(format!("soliton width must be > 0, got {}", self.w)));
        }
        if !(self.psi >= 0.0) {
            return Err(Error::InvalidParameter(format!("soliton amplitude must be >= 0, got {}", self.psi)));
        }
        if ![self.x0, self.v, self.d, self.phi].iter().all(|x| x.is_finite()) {
            return Err(Error::InvalidParameter("soliton coordinates must be finite".into()));
        }
        Ok(())
    }

    /// Ansatz value at displacement `ξ = x − x0`.
    pub fn profile(&self, xi: f64) -> C64 {
        let phase = xi * self.v + xi * xi * self.d + self.phi;
        C64::from_polar(self.psi / (xi / self.w).cosh(), phase)
    }

    /// `N = 2ψ²w`.
    pub fn particle_number(&self) -> f64 {
        2.0 * self.psi * self.psi * self.w
    }

    /// Layout used by the integrator: `[ψ, x0, v, w, d, φ]`.
    pub fn to_array(&self) -> [f64; 6] {
        [self.psi, self.x0, self.v, self.w, self.d, self.phi]
    }

    pub fn from_slice(y: &[f64]) -> Result<Self> {
        match *y {
            [psi, x0, v, w, d, phi] => Ok(Self { psi, x0, v, w, d, phi }),
            _ => Err(Error::LengthMismatch { expected: 6, got: y.len() }),
        }
    }
}

/// Time derivatives of the six coordinates, in `to_array` order.
pub fn collective_rhs(c: &SolitonCoords, eff: &EffectiveParams, width_floor: f64) -> Result<[f64; 6]> {
    if !(c.w > width_floor) {
        return Err(Error::WidthCollapse { width: c.w, floor: width_floor });
    }
    let SolitonCoords { psi, v, w, d, .. } = *c;
    let (j, g, gamma) = (eff.hopping, eff.g, eff.gamma);
    let psi2 = psi * psi;
    let w2 = w * w;
    let pi2 = PI * PI;
    let friction = 8.0 * j * gamma * psi2 / (15.0 * w2);

    let dx0 = 2.0 * j * v;
    let dv = -friction * v;
    let dpsi = -2.0 * j * psi * d;
    let dw = 4.0 * j * d * w;
    let dd = -friction * d - 4.0 * j * d * d + 4.0 * j / (pi2 * w2 * w2) + 2.0 * g * psi2 / (pi2 * w2);
    let dphi = 2.0 * pi2 * j * gamma * psi2 * d / 45.0 + 2.0 * j * gamma * psi2 * d / 3.0 + j * v * v
        - 2.0 * j / (3.0 * w2)
        - 5.0 * g * psi2 / 6.0;
    Ok([dpsi, dx0, dv, dw, dd, dphi])
}

/// Closure suitable for [`crate::integrate::OdeProblem`].
pub fn collective_system(
    eff: EffectiveParams,
    width_floor: f64,
) -> impl FnMut(f64, &[f64], &mut [f64]) -> Result<()> + Send {
    move |_t, y, out| {
        let c = SolitonCoords::from_slice(y)?;
        out.copy_from_slice(&collective_rhs(&c, &eff, width_floor)?);
        Ok(())
    }
}

/// Energy of the ansatz,
/// `2Jψ²v²w + (2π²/3)Jψ²d²w³ + (2/3)Jψ²/w + (2/3)gψ⁴w`.
pub fn ansatz_energy(c: &SolitonCoords, eff: &EffectiveParams) -> f64 {
    let SolitonCoords { psi, v, w, d, .. } = *c;
    let j = eff.hopping;
    let psi2 = psi * psi;
    2.0 * j * psi2 * v * v * w
        + 2.0 * PI * PI / 3.0 * j * psi2 * d * d * w.powi(3)
        + 2.0 / 3.0 * j * psi2 / w
        + 2.0 / 3.0 * eff.g * psi2 * psi2 * w
}

/// Shape fixed point for a given particle number.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StableSoliton {
    pub n: f64,
    pub w_ss: f64,
    pub psi_ss: f64,
    /// Velocity damping rate `Γ = γ(−g³/J³)N⁴/240`, so that `v̇ = −ΓJv`.
    pub gamma_rate: f64,
    pub g: f64,
    pub hopping: f64,
}

impl StableSoliton {
    /// `E(v) = Jv²N − N³g²/(48J)`.
    pub fn energy(&self, v: f64) -> f64 {
        let StableSoliton { n, g, hopping: j, .. } = *self;
        j * v * v * n - n.powi(3) * g * g / (48.0 * j)
    }

    /// `∂E/∂N` at fixed `v`.
    pub fn energy_dn(&self, v: f64) -> f64 {
        let StableSoliton { n, g, hopping: j, .. } = *self;
        j * v * v - n * n * g * g / (16.0 * j)
    }

    pub fn coords(&self, x0: f64, v: f64, phi: f64) -> SolitonCoords {
        SolitonCoords { psi: self.psi_ss, x0, v, w: self.w_ss, d: 0.0, phi }
    }

    /// Closed-form velocity `v0 exp(−ΓJt)`.
    pub fn velocity(&self, v0: f64, t: f64) -> f64 {
        v0 * (-self.gamma_rate * self.hopping * t).exp()
    }

    /// Closed-form center `x0 + 2v0(1 − exp(−ΓJt))/Γ` (ballistic when `Γ = 0`).
    pub fn position(&self, x0: f64, v0: f64, t: f64) -> f64 {
        let k = self.gamma_rate * self.hopping;
        if k == 0.0 {
            x0 + 2.0 * self.hopping * v0 * t
        } else {
            x0 - 2.0 * self.hopping * v0 * (-k * t).exp_m1() / k
        }
    }
}

pub fn stable_soliton(n: f64, eff: &EffectiveParams) -> Result<StableSoliton> {
    if !(eff.g < 0.0) {
        return Err(Error::RepulsiveInteraction(eff.g));
    }
    if !(n > 0.0) {
        return Err(Error::InvalidParameter(format!("particle number must be > 0, got {n}")));
    }
    let j = eff.hopping;
    let g = eff.g;
    Ok(StableSoliton {
        n,
        w_ss: -4.0 * j / (g * n),
        psi_ss: (-g / (2.0 * j)).sqrt() * n / 2.0,
        gamma_rate: eff.gamma * (-g.powi(3) / j.powi(3)) * n.powi(4) / 240.0,
        g,
        hopping: j,
    })
}

/// Reduced dynamics `(ẋ0, v̇, φ̇)` on the stable manifold.
pub fn stable_rhs(_x0: f64, v: f64, _phi: f64, ss: &StableSoliton) -> [f64; 3] {
    let j = ss.hopping;
    [
        2.0 * j * v,
        -ss.gamma_rate * j * v,
        j * v * v + ss.g * ss.g * ss.n * ss.n / (16.0 * j),
    ]
}

/// Closure over `[x0, v, φ]` suitable for [`crate::integrate::OdeProblem`].
pub fn stable_system(ss: StableSoliton) -> impl FnMut(f64, &[f64], &mut [f64]) -> Result<()> + Send {
    move |_t, y, out| {
        if y.len() != 3 {
            return Err(Error::LengthMismatch { expected: 3, got: y.len() });
        }
        out.copy_from_slice(&stable_rhs(y[0], y[1], y[2], &ss));
        Ok(())
    }
}
