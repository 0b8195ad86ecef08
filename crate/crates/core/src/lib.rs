//! Classical bosonic lattices coupled to driven reservoirs through a
//! density-density (particle-conserving) interaction.
//!
//! The crate covers four levels of description of the same physics:
//!
//! * [`model_full`]: the chain together with its driven, lossy cavities,
//! * [`model_effective`]: the lattice equation obtained after eliminating the
//!   cavities, plus the generic form for an arbitrary Hamiltonian gradient,
//! * [`model_continuum`]: the continuum limit, discretized by method of lines,
//! * [`collective`]: the six collective coordinates of a single sech soliton.
//!
//! [`params`] maps microscopic reservoir constants onto the effective ones,
//! [`integrate`] provides the adaptive Runge-Kutta solvers used everywhere,
//! [`analysis`] holds the measurement procedures (fits, damping estimates,
//! envelopes, profile comparison) and [`scenarios`] strings everything
//! together into reproducible figure datasets.
//!
//! Units: frequencies are measured in units of the hopping `J`, `ħ = 1`.

pub mod analysis;
pub mod collective;
mod error;
pub mod integrate;
pub mod io;
pub mod model_continuum;
pub mod model_effective;
pub mod model_full;
pub mod params;
pub mod scenarios;

pub use error::{Error, Result};

pub use num_complex::Complex64 as C64;

pub use analysis::{EnvelopeSeries, FitResult, ProfileMetrics};
pub use collective::{SolitonCoords, StableSoliton};
pub use integrate::{Method, OdeProblem, Solution, SolverConfig, SolverStats, TimeSeries};
pub use model_continuum::{FieldState, Grid};
pub use model_full::FullState;
pub use params::{Boundary, ChainParams, EffectiveParams, ReservoirParams, WeakCoupling};
