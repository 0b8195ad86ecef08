//! The chain together with one driven, lossy cavity per site.
//!
//! ```text
//! Ȧ_n = iΔ A_n + η − (κ/2) A_n − iχ |B_n|² A_n
//! Ḃ_n = −iχ |A_n|² B_n − iα |B_n|² B_n + iJ (B_{n−1} + B_{n+1})
//! ```
//!
//! Noise is not modelled: the classical amplitudes are large.

use serde::{Deserialize, Serialize};

use crate::integrate::TimeSeries;
use crate::params::{Boundary, ChainParams, ReservoirParams};
use crate::{Error, Result, C64};

const I: C64 = C64::new(0.0, 1.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullState {
    /// Cavity amplitudes `A_n`.
    pub cavity: Vec<C64>,
    /// Site amplitudes `B_n`.
    pub sites: Vec<C64>,
}

impl FullState {
    pub fn new(cavity: Vec<C64>, sites: Vec<C64>) -> Result<Self> {
        if cavity.len() != sites.len() {
            return Err(Error::LengthMismatch { expected: sites.len(), got: cavity.len() });
        }
        Ok(Self { cavity, sites })
    }

    /// Sites `b` with every cavity in its unperturbed steady state.
    pub fn with_steady_cavities(res: &ReservoirParams, sites: Vec<C64>) -> Result<Self> {
        let cavity = steady_state_cavities(res, sites.len())?;
        Ok(Self { cavity, sites })
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    /// Integrator layout: `[A_1 … A_L, B_1 … B_L]`.
    pub fn pack(&self) -> Vec<C64> {
        let mut v = Vec::with_capacity(2 * self.len());
        v.extend_from_slice(&self.cavity);
        v.extend_from_slice(&self.sites);
        v
    }

    pub fn unpack(packed: &[C64]) -> Result<Self> {
        if packed.len() % 2 != 0 {
            return Err(Error::LengthMismatch { expected: packed.len() + 1, got: packed.len() });
        }
        let (a, b) = packed.split_at(packed.len() / 2);
        Ok(Self { cavity: a.to_vec(), sites: b.to_vec() })
    }
}

/// `η/(κ/2 − iΔ)` on every site.
pub fn steady_state_cavities(res: &ReservoirParams, sites: usize) -> Result<Vec<C64>> {
    res.denominator()?;
    let a = C64::new(res.eta, 0.0) / C64::new(0.5 * res.kappa, -res.delta);
    Ok(vec![a; sites])
}

/// Derivative of the packed state `[A, B]`.
pub fn full_rhs(packed: &[C64], res: &ReservoirParams, chain: &ChainParams, out: &mut [C64]) -> Result<()> {
    let l = packed.len() / 2;
    if packed.len() != 2 * l || out.len() != packed.len() {
        return Err(Error::LengthMismatch { expected: packed.len(), got: out.len() });
    }
    let (a, b) = packed.split_at(l);
    let (da, db) = out.split_at_mut(l);
    let decay = C64::new(-0.5 * res.kappa, res.delta);
    for n in 0..l {
        let nb = b[n].norm_sqr();
        da[n] = decay * a[n] + res.eta - I * res.chi * nb * a[n];
    }
    if l == 0 {
        return Ok(());
    }
    for n in 0..l {
        let (left, right) = neighbours(b, n, chain.boundary);
        db[n] = -I * (res.chi * a[n].norm_sqr() + chain.anharmonicity * b[n].norm_sqr()) * b[n]
            + I * chain.hopping * (left + right);
    }
    Ok(())
}

fn neighbours(b: &[C64], n: usize, boundary: Boundary) -> (C64, C64) {
    let l = b.len();
    let zero = C64::default();
    match boundary {
        Boundary::Periodic => (b[(n + l - 1) % l], b[(n + 1) % l]),
        Boundary::Open => (
            if n == 0 { zero } else { b[n - 1] },
            if n + 1 == l { zero } else { b[n + 1] },
        ),
    }
}

/// Closure suitable for [`crate::integrate::OdeProblem`].
pub fn full_system(
    res: ReservoirParams,
    chain: ChainParams,
) -> impl FnMut(f64, &[C64], &mut [C64]) -> Result<()> + Send {
    move |_t, y, out| full_rhs(y, &res, &chain, out)
}

/// Frequency of the global phase that separates `B_n` from the effective
/// lattice amplitudes: `b_n = exp(i ω t) B_n` with `ω = χη²/(Δ² + κ²/4) − 2J`.
pub fn frame_frequency(res: &ReservoirParams, chain: &ChainParams) -> Result<f64> {
    let den = res.denominator()?;
    Ok(res.chi * res.eta * res.eta / den - 2.0 * chain.hopping)
}

/// Site amplitudes at time `t` in the frame of the effective lattice equation.
pub fn to_effective_frame(t: f64, sites: &[C64], res: &ReservoirParams, chain: &ChainParams) -> Result<Vec<C64>> {
    let phase = C64::from_polar(1.0, frame_frequency(res, chain)? * t);
    Ok(sites.iter().map(|&z| phase * z).collect())
}

pub fn rotating_frame_to_effective(
    series: &TimeSeries<FullState>,
    res: &ReservoirParams,
    chain: &ChainParams,
) -> Result<TimeSeries<Vec<C64>>> {
    let omega = frame_frequency(res, chain)?;
    Ok(series.map(|t, s| {
        let phase = C64::from_polar(1.0, omega * t);
        s.sites.iter().map(|&z| phase * z).collect()
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference() -> ReservoirParams {
        ReservoirParams { chi: 0.046874, eta: 1.0, kappa: 1.0, delta: -0.1 }
    }

    #[test]
    fn steady_state_values() {
        let a = steady_state_cavities(&reference(), 3).unwrap();
        assert!((a[0] - C64::new(1.0 / 0.52, -0.1 / 0.26)).norm() < 1e-14);
        assert!((a[0] - C64::new(1.923076923076923, -0.38461538461538464)).norm() < 1e-12);
        let zero = ReservoirParams { eta: 0.0, ..reference() };
        assert!(steady_state_cavities(&zero, 4).unwrap().iter().all(|z| z.norm() == 0.0));
        let real = ReservoirParams { eta: 0.7, kappa: 2.0, delta: 0.0, chi: 0.1 };
        assert!(steady_state_cavities(&real, 2).unwrap().iter().all(|z| *z == C64::new(0.7, 0.0)));
        let bad = ReservoirParams { kappa: 0.0, delta: 0.0, ..reference() };
        assert!(steady_state_cavities(&bad, 2).is_err());
    }

    #[test]
    fn steady_cavities_are_stationary_without_excitation() {
        let res = reference();
        let chain = ChainParams::new(1.0, -0.09, 6, Boundary::Periodic).unwrap();
        let state = FullState::with_steady_cavities(&res, vec![C64::default(); 6]).unwrap();
        let mut out = vec![C64::default(); 12];
        full_rhs(&state.pack(), &res, &chain, &mut out).unwrap();
        assert!(out.iter().all(|z| z.norm() < 1e-15));
    }

    #[test]
    fn site_norm_rate_vanishes() {
        let res = reference();
        for boundary in [Boundary::Periodic, Boundary::Open] {
            let chain = ChainParams::new(1.0, -0.09, 5, boundary).unwrap();
            let sites: Vec<C64> = (0..5).map(|n| C64::new(0.3 * n as f64 - 0.4, 0.1 * (n * n) as f64)).collect();
            let cavity: Vec<C64> = (0..5).map(|n| C64::new(1.0, 0.2 * n as f64)).collect();
            let packed = FullState::new(cavity, sites).unwrap().pack();
            let mut out = vec![C64::default(); 10];
            full_rhs(&packed, &res, &chain, &mut out).unwrap();
            let rate: f64 = (5..10).map(|n| 2.0 * (packed[n].conj() * out[n]).re).sum();
            assert!(rate.abs() < 1e-14, "{rate}");
        }
    }

    #[test]
    fn frame_is_a_pure_phase() {
        let res = reference();
        let chain = ChainParams::new(1.0, -0.09, 3, Boundary::Periodic).unwrap();
        let s = FullState::with_steady_cavities(&res, vec![C64::new(0.2, 0.5); 3]).unwrap();
        let mut series = TimeSeries::new();
        series.push(0.0, s.clone());
        series.push(3.7, s.clone());
        let out = rotating_frame_to_effective(&series, &res, &chain).unwrap();
        assert_eq!(out.states[0], s.sites);
        for (z, w) in out.states[1].iter().zip(&s.sites) {
            assert!((z.norm() - w.norm()).abs() < 1e-15);
        }
    }

    #[test]
    fn pack_round_trip_and_mismatch() {
        let s = FullState::new(vec![C64::new(1.0, 2.0); 2], vec![C64::new(3.0, 4.0); 2]).unwrap();
        assert_eq!(FullState::unpack(&s.pack()).unwrap(), s);
        assert!(FullState::new(vec![C64::default(); 2], vec![C64::default(); 3]).is_err());
        assert!(FullState::unpack(&[C64::default(); 3]).is_err());
    }
}
