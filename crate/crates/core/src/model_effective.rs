//! Reservoir-eliminated lattice dynamics.
//!
//! For any system Hamiltonian `H_S` with Wirtinger gradient `G_l = ∂H_S/∂b_l*`
//! the cavities reduce to
//!
//! ```text
//! i ḃ_l = G_l + δg |b_l|² b_l + γ Im(b_l* G_l) b_l
//! ```
//!
//! which conserves `Σ|b_l|²` exactly and dissipates `H_S + δg/2 Σ|b_l|⁴` at the
//! rate `−2γ Σ (Im b_l* G_l)²`. For the Bose–Hubbard chain in the gauge where
//! the hopping enters as a discrete Laplacian this becomes
//!
//! ```text
//! i ḃ_n = g |b_n|² b_n − J D_n − Jγ Im(b_n* D_n) b_n,   D_n = b_{n−1} − 2b_n + b_{n+1}.
//! ```

use crate::params::{Boundary, EffectiveParams};
use crate::{Error, Result, C64};

const I: C64 = C64::new(0.0, 1.0);

/// Discrete Laplacian `D_n = b_{n−1} − 2b_n + b_{n+1}`. Open chains use
/// `b_0 = b_{L+1} = 0`. A periodic pair (`L = 2`) sees its partner on both sides.
pub fn laplacian(b: &[C64], boundary: Boundary, out: &mut [C64]) {
    let n = b.len();
    debug_assert_eq!(out.len(), n);
    if n == 0 {
        return;
    }
    if n == 1 {
        out[0] = match boundary {
            Boundary::Periodic => C64::default(),
            Boundary::Open => -2.0 * b[0],
        };
        return;
    }
    for i in 1..n - 1 {
        out[i] = b[i - 1] - 2.0 * b[i] + b[i + 1];
    }
    let (left, right) = match boundary {
        Boundary::Periodic => (b[n - 1], b[0]),
        Boundary::Open => (C64::default(), C64::default()),
    };
    out[0] = left - 2.0 * b[0] + b[1];
    out[n - 1] = b[n - 2] - 2.0 * b[n - 1] + right;
}

/// A system Hamiltonian given through its value and Wirtinger gradient.
pub trait HamiltonianGradient {
    /// Writes `∂H/∂b_l*` into `out`.
    fn gradient(&self, b: &[C64], out: &mut [C64]);

    /// `H(b)`, real valued.
    fn energy(&self, b: &[C64]) -> f64;
}

/// Bose–Hubbard chain in Laplacian form:
/// `H = Σ J|b_{n+1} − b_n|² + (u/2)|b_n|⁴`, gradient `−J D_n + u|b_n|² b_n`.
///
/// Open chains include the bonds to the two pinned ghost sites, which is what
/// makes the gradient equal to the Dirichlet Laplacian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainGradient {
    pub hopping: f64,
    pub interaction: f64,
    pub boundary: Boundary,
}

impl HamiltonianGradient for ChainGradient {
    fn gradient(&self, b: &[C64], out: &mut [C64]) {
        laplacian(b, self.boundary, out);
        for (o, &bn) in out.iter_mut().zip(b) {
            *o = -self.hopping * *o + self.interaction * bn.norm_sqr() * bn;
        }
    }

    fn energy(&self, b: &[C64]) -> f64 {
        chain_hamiltonian(b, self.hopping, self.interaction, self.boundary)
    }
}

fn chain_hamiltonian(b: &[C64], hopping: f64, u: f64, boundary: Boundary) -> f64 {
    let n = b.len();
    if n == 0 {
        return 0.0;
    }
    let mut bonds = 0.0;
    for i in 0..n - 1 {
        bonds += (b[i + 1] - b[i]).norm_sqr();
    }
    match boundary {
        Boundary::Periodic => {
            // A periodic pair is joined by two bonds.
            if n >= 2 {
                bonds += (b[0] - b[n - 1]).norm_sqr();
            }
        }
        Boundary::Open => bonds += b[0].norm_sqr() + b[n - 1].norm_sqr(),
    }
    let quartic: f64 = b.iter().map(|z| z.norm_sqr().powi(2)).sum();
    hopping * bonds + 0.5 * u * quartic
}

/// The gradient whose generic flow reproduces [`chain_effective_rhs`]: the
/// chain with the bare anharmonicity `α = g − δg`.
pub fn chain_gradient(eff: &EffectiveParams, boundary: Boundary) -> ChainGradient {
    ChainGradient { hopping: eff.hopping, interaction: eff.g - eff.delta_g, boundary }
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::LengthMismatch { expected, got })
    }
}

/// Generic reservoir-eliminated flow for an arbitrary Hamiltonian.
pub fn general_effective_rhs<H: HamiltonianGradient + ?Sized>(
    b: &[C64],
    grad: &H,
    eff: &EffectiveParams,
    out: &mut [C64],
) -> Result<()> {
    check_len(b.len(), out.len())?;
    grad.gradient(b, out);
    for (o, &bl) in out.iter_mut().zip(b) {
        let g = *o;
        let friction = (bl.conj() * g).im;
        *o = -I * (g + (eff.delta_g * bl.norm_sqr() + eff.gamma * friction) * bl);
    }
    Ok(())
}

/// Effective chain equation. `out` must have the length of `b`.
pub fn chain_effective_rhs(b: &[C64], eff: &EffectiveParams, boundary: Boundary, out: &mut [C64]) {
    laplacian(b, boundary, out);
    let j = eff.hopping;
    for (o, &bn) in out.iter_mut().zip(b) {
        let d = *o;
        let friction = (bn.conj() * d).im;
        *o = -I * (eff.g * bn.norm_sqr() * bn - j * d - j * eff.gamma * friction * bn);
    }
}

/// `dE/dt = −2γ Σ (Im b_l* G_l)²`, where `E = H_S + δg/2 Σ|b|⁴` is the energy
/// that the reservoir-eliminated flow dissipates.
pub fn energy_decay_rate<H: HamiltonianGradient + ?Sized>(b: &[C64], grad: &H, eff: &EffectiveParams) -> f64 {
    let mut g = vec![C64::default(); b.len()];
    grad.gradient(b, &mut g);
    let s: f64 = b.iter().zip(&g).map(|(bl, gl)| (bl.conj() * gl).im.powi(2)).sum();
    -2.0 * eff.gamma * s
}

/// `E = Σ J|b_{n+1} − b_n|² + (g/2)|b_n|⁴` with the shifted nonlinearity `g`.
pub fn chain_energy(b: &[C64], eff: &EffectiveParams, boundary: Boundary) -> f64 {
    chain_hamiltonian(b, eff.hopping, eff.g, boundary)
}

pub fn particle_number(b: &[C64]) -> f64 {
    b.iter().map(|z| z.norm_sqr()).sum()
}

/// Closure suitable for [`crate::integrate::OdeProblem`].
pub fn chain_system(
    eff: EffectiveParams,
    boundary: Boundary,
) -> impl FnMut(f64, &[C64], &mut [C64]) -> Result<()> + Send {
    move |_t, b, out| {
        chain_effective_rhs(b, &eff, boundary, out);
        Ok(())
    }
}
