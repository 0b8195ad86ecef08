//! Shared workloads for the benchmarks.

use pcdnse::collective::SolitonCoords;
use pcdnse::model_continuum::{make_soliton_field, Grid};
use pcdnse::{Boundary, EffectiveParams, FieldState, C64};

/// Red-detuned reference point used throughout the benchmarks.
pub fn reference_params() -> EffectiveParams {
    EffectiveParams::new(-0.1, 0.05, 1.0)
}

/// Moving stable soliton (`ψ = 1`, `w = √20`) centred on a periodic grid
/// with spacing 0.1.
pub fn soliton_field(length: f64) -> FieldState {
    let grid = Grid::with_spacing(length, 0.1, Boundary::Periodic).expect("valid grid");
    let coords = SolitonCoords { psi: 1.0, x0: 0.5 * length, v: 0.48, w: 20f64.sqrt(), d: 0.0, phi: 0.0 };
    make_soliton_field(&coords, &grid).expect("valid soliton").0
}

/// The same soliton sampled on a unit-spacing lattice of `sites` sites.
pub fn lattice_soliton(sites: usize) -> Vec<C64> {
    let coords = SolitonCoords { psi: 1.0, x0: 0.5 * sites as f64, v: 0.48, w: 20f64.sqrt(), d: 0.0, phi: 0.0 };
    (0..sites).map(|n| coords.profile(n as f64 - coords.x0)).collect()
}
