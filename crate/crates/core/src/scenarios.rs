//! Figure datasets.
//!
//! Each figure has a fixed, desk-scale setup. Running one yields plot-ready
//! artifacts (CSV/JSON text) together with the property checks the data is
//! expected to satisfy. Independent sub-runs execute on the rayon pool.
//!
//! Cross-model comparisons use one scaling family: a lattice of `L` sites
//! carries the `L = 400` reference soliton (`ψ = 1`, `w = √20`, `v = 0.48`)
//! stretched by `s = L/400`, i.e. amplitude `1/s`, width `√20·s`, velocity
//! `0.48/s`, compared after `Jt = 50s²`. The continuum equation is invariant
//! under this rescaling, so only lattice discreteness changes with `L`.

use std::fmt;
use std::ops::ControlFlow;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    compare_profiles, envelope_deviation, fit_soliton, oscillation_period, velocity_damping_estimate,
    EnvelopeSeries, OccupationProfile, ProfileMetrics, FIT_RESIDUAL_THRESHOLD,
};
use crate::collective::{collective_system, stable_soliton, SolitonCoords, StableSoliton, DEFAULT_WIDTH_FLOOR};
use crate::integrate::{linspace, solve, solve_fixed_grid, solve_observed, OdeProblem, SolverConfig, SolverStats};
use crate::io::{csv_table, to_json};
use crate::model_continuum::{field_energy, make_soliton_field, pcdnse_system, superpose, FieldState, Grid};
use crate::model_effective::chain_system;
use crate::model_full::{full_system, to_effective_frame, FullState};
use crate::params::{effective_params, invert_for_chi_alpha, weak_coupling_ratios, Boundary, ChainParams};
use crate::params::{EffectiveParams, ReservoirParams, WeakCoupling};
use crate::{Error, Result, C64};

/// Attractive interaction shared by all figures.
pub const REFERENCE_G: f64 = -0.1;

/// Outcome of one property check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub relation: String,
    pub bound: f64,
    pub passed: bool,
}

impl Check {
    fn new(name: impl Into<String>, value: f64, relation: &str, bound: f64, passed: bool) -> Self {
        Self { name: name.into(), value, relation: relation.into(), bound, passed }
    }

    pub fn below(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self::new(name, value, "<", bound, value < bound)
    }

    pub fn at_most(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self::new(name, value, "<=", bound, value <= bound)
    }

    pub fn above(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self::new(name, value, ">", bound, value > bound)
    }

    pub fn at_least(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self::new(name, value, ">=", bound, value >= bound)
    }

    /// A yes/no property; `value` is 1 or 0.
    pub fn holds(name: impl Into<String>, ok: bool) -> Self {
        Self::new(name, if ok { 1.0 } else { 0.0 }, "==", 1.0, ok)
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}: {:.6e} {} {:.6e}", self.name, self.value, self.relation, self.bound)
    }
}

/// A named text file belonging to a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

impl Artifact {
    pub fn new(name: impl Into<String>, contents: String) -> Self {
        Self { name: name.into(), contents }
    }
}

/// Everything one figure produced. Failed sub-runs are listed in `failures`;
/// the remaining artifacts are still valid.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Dataset {
    pub figure: String,
    pub artifacts: Vec<Artifact>,
    pub checks: Vec<Check>,
    pub failures: Vec<String>,
}

impl Dataset {
    fn new(figure: Figure) -> Self {
        Self { figure: figure.name().into(), ..Self::default() }
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty() && self.checks.iter().all(|c| c.passed)
    }

    pub fn report(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            s.push_str(&c.to_string());
            s.push('\n');
        }
        for f in &self.failures {
            s.push_str(&format!("ERROR {f}\n"));
        }
        s
    }

    fn push_json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<()> {
        self.artifacts.push(Artifact::new(name, to_json(value)?));
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Figure {
    Fig2,
    Fig3a,
    Fig3b,
    Fig4,
    Fig5,
    Fig6,
}

impl Figure {
    pub const ALL: [Figure; 6] = [Figure::Fig2, Figure::Fig3a, Figure::Fig3b, Figure::Fig4, Figure::Fig5, Figure::Fig6];

    pub fn name(self) -> &'static str {
        match self {
            Figure::Fig2 => "fig2",
            Figure::Fig3a => "fig3a",
            Figure::Fig3b => "fig3b",
            Figure::Fig4 => "fig4",
            Figure::Fig5 => "fig5",
            Figure::Fig6 => "fig6",
        }
    }
}

impl FromStr for Figure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Figure::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown figure {s:?}")))
    }
}

/// Knobs shared by all figures.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ExperimentOptions {
    /// Run fig5's collective integration to `Jt = 2×10⁶` instead of `2×10⁴`.
    pub full_horizon: bool,
    /// Overrides every solver's relative tolerance.
    pub rtol: Option<f64>,
    /// Overrides every solver's absolute tolerance.
    pub atol: Option<f64>,
}

impl ExperimentOptions {
    pub fn solver(&self, base: SolverConfig) -> SolverConfig {
        let rtol = self.rtol.unwrap_or(base.rtol);
        let atol = self.atol.unwrap_or(base.atol);
        base.with_tolerances(rtol, atol)
    }
}

pub fn run_figure(figure: Figure, opts: &ExperimentOptions) -> Dataset {
    let mut data = Dataset::new(figure);
    let outcome = match figure {
        Figure::Fig2 => fig2(&mut data),
        Figure::Fig3a => fig3a(&mut data, opts),
        Figure::Fig3b => fig3b(&mut data, opts),
        Figure::Fig4 => fig4(&mut data, opts),
        Figure::Fig5 => fig5(&mut data, opts),
        Figure::Fig6 => fig6(&mut data, opts),
    };
    if let Err(e) = outcome {
        data.failures.push(e.to_string());
    }
    data
}

// ---------------------------------------------------------------- detuning sweep

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub delta: f64,
    pub delta_g: f64,
    pub gamma: f64,
}

pub fn detuning_sweep(chi: f64, eta: f64, kappa: f64, deltas: &[f64]) -> Result<Vec<SweepRow>> {
    let chain = ChainParams { hopping: 1.0, anharmonicity: 0.0, sites: 2, boundary: Boundary::Periodic };
    deltas
        .iter()
        .map(|&delta| {
            let res = ReservoirParams { chi, eta, kappa, delta };
            res.validate()?;
            let eff = effective_params(&res, &chain)?;
            Ok(SweepRow { delta, delta_g: eff.delta_g, gamma: eff.gamma })
        })
        .collect()
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let table: Vec<[f64; 3]> = rows.iter().map(|r| [r.delta, r.delta_g, r.gamma]).collect();
    csv_table(&["delta", "delta_g", "gamma"], table.iter().map(|r| r.as_slice()))
}

/// Abscissa of the first sign change of the forward differences of `y`
/// within `x < x_max`, taken as the midpoint of the sign-changing pair.
fn first_turning_point(x: &[f64], y: &[f64], x_max: f64) -> Option<f64> {
    let d: Vec<f64> = y.windows(2).map(|w| w[1] - w[0]).collect();
    (1..d.len()).find(|&k| x[k] < x_max && d[k - 1] * d[k] < 0.0).map(|k| x[k])
}

fn fig2(data: &mut Dataset) -> Result<()> {
    let kappa = 1.0;
    let deltas = linspace(-3.0, 3.0, 601);
    let rows = detuning_sweep(1.0, 1.0, kappa, &deltas)?;
    data.artifacts.push(Artifact::new("sweep.csv", sweep_csv(&rows)));

    let zero = rows.iter().find(|r| r.delta == 0.0).expect("sweep contains zero");
    data.checks.push(Check::at_most("gamma at zero detuning", zero.gamma.abs(), 0.0));
    data.checks.push(Check::at_most("delta_g at zero detuning", zero.delta_g.abs(), 0.0));

    let scale = rows.iter().map(|r| r.gamma.abs().max(r.delta_g.abs())).fold(0.0, f64::max);
    let n = rows.len();
    let asym = (0..n)
        .map(|k| {
            let (a, b) = (&rows[k], &rows[n - 1 - k]);
            (a.gamma + b.gamma).abs().max((a.delta_g + b.delta_g).abs())
        })
        .fold(0.0, f64::max);
    data.checks.push(Check::below("odd in detuning (relative)", asym / scale, 1e-12));
    data.checks.push(Check::holds(
        "red detuning cools, blue heats",
        rows.iter().all(|r| r.delta == 0.0 || (r.gamma > 0.0) == (r.delta < 0.0)),
    ));

    let x: Vec<f64> = rows.iter().map(|r| r.delta).collect();
    let gam: Vec<f64> = rows.iter().map(|r| r.gamma).collect();
    let dg: Vec<f64> = rows.iter().map(|r| r.delta_g).collect();
    let step = x[1] - x[0];
    let gamma_peak = first_turning_point(&x, &gam, 0.0).unwrap_or(f64::NAN);
    let dg_peak = first_turning_point(&x, &dg, 0.0).unwrap_or(f64::NAN);
    // Closed-form extrema: γ at Δ = −κ/(2√5), δg at Δ = −κ/(2√3).
    let gamma_exact = -kappa / (2.0 * 5f64.sqrt());
    let dg_exact = -kappa / (2.0 * 3f64.sqrt());
    data.checks.push(Check::at_most("gamma extremum location error", (gamma_peak - gamma_exact).abs(), step));
    data.checks.push(Check::at_most("delta_g extremum location error", (dg_peak - dg_exact).abs(), step));
    data.push_json(
        "extrema.json",
        &serde_json::json!({
            "gamma_extremum_sweep": gamma_peak,
            "gamma_extremum_exact": gamma_exact,
            "delta_g_extremum_sweep": dg_peak,
            "delta_g_extremum_exact": dg_exact,
        }),
    )
}

// ---------------------------------------------------------------- cross-model comparison

/// `Jt = 50s²` with `s = L/400`.
pub fn fig3_horizon(sites: usize) -> f64 {
    let s = sites as f64 / 400.0;
    50.0 * s * s
}

/// Reference moving soliton stretched to a lattice of `sites` sites, centred
/// at a quarter of the chain.
pub fn fig3_soliton(sites: usize) -> SolitonCoords {
    let s = sites as f64 / 400.0;
    SolitonCoords { psi: 1.0 / s, x0: 0.25 * sites as f64, v: 0.48 / s, w: 20f64.sqrt() * s, d: 0.0, phi: 0.0 }
}

/// Ansatz sampled on periodic lattice sites `n = 0 … L−1`.
pub fn lattice_soliton(c: &SolitonCoords, sites: usize) -> Vec<C64> {
    let l = sites as f64;
    (0..sites)
        .map(|n| {
            let xi = n as f64 - c.x0;
            c.profile(xi - l * (xi / l).round())
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossModelSetup {
    pub sites: usize,
    pub delta: f64,
    pub kappa: f64,
    pub eta: f64,
    pub g: f64,
    pub gamma: f64,
    /// Grid points of the continuum run on the domain `[0, L)`.
    pub pcdnse_points: usize,
}

impl CrossModelSetup {
    /// `κ = η = J`, `g = −0.1J`, `γ = 0.05`.
    pub fn new(sites: usize, delta: f64) -> Self {
        Self { sites, delta, kappa: 1.0, eta: 1.0, g: REFERENCE_G, gamma: 0.05, pcdnse_points: 4000 }
    }
}

/// Final states of the three descriptions, all in the effective-lattice frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossModelRun {
    pub setup: CrossModelSetup,
    pub reservoir: ReservoirParams,
    pub chain: ChainParams,
    pub effective: EffectiveParams,
    /// Evaluated at the largest initial site amplitude.
    pub weak: WeakCoupling,
    pub t_final: f64,
    pub langevin: Vec<C64>,
    pub lattice: Vec<C64>,
    pub pcdnse: FieldState,
    pub langevin_vs_pcdnse: ProfileMetrics,
    pub lattice_vs_pcdnse: ProfileMetrics,
    pub langevin_vs_lattice: ProfileMetrics,
    pub stats: [SolverStats; 3],
}

pub fn cross_model(setup: &CrossModelSetup, opts: &ExperimentOptions) -> Result<CrossModelRun> {
    let CrossModelSetup { sites, delta, kappa, eta, g, gamma, pcdnse_points } = *setup;
    let (chi, alpha) = invert_for_chi_alpha(g, gamma, eta, kappa, delta, 1.0)?;
    let reservoir = ReservoirParams { chi, eta, kappa, delta };
    let chain = ChainParams::new(1.0, alpha, sites, Boundary::Periodic)?;
    let effective = effective_params(&reservoir, &chain)?;
    let coords = fig3_soliton(sites);
    let t1 = fig3_horizon(sites);
    let b0 = lattice_soliton(&coords, sites);
    let b_max = b0.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let weak = weak_coupling_ratios(&reservoir, &chain, b_max)?;
    let grid = Grid::new(sites as f64, pcdnse_points, Boundary::Periodic)?;
    let (psi0, _) = make_soliton_field(&coords, &grid)?;

    let run_langevin = || -> Result<(Vec<C64>, SolverStats)> {
        let start = FullState::with_steady_cavities(&reservoir, b0.clone())?;
        let problem = OdeProblem::new(full_system(reservoir, chain), 0.0, t1, start.pack());
        let sol = solve_fixed_grid(problem, &opts.solver(SolverConfig::langevin()), 2)?;
        let end = FullState::unpack(sol.final_state())?;
        Ok((to_effective_frame(t1, &end.sites, &reservoir, &chain)?, sol.stats))
    };
    let run_lattice = || -> Result<(Vec<C64>, SolverStats)> {
        let problem = OdeProblem::new(chain_system(effective, Boundary::Periodic), 0.0, t1, b0.clone());
        let sol = solve_fixed_grid(problem, &opts.solver(SolverConfig::pcdnse()), 2)?;
        Ok((sol.final_state().to_vec(), sol.stats))
    };
    let run_pcdnse = || -> Result<(FieldState, SolverStats)> {
        let problem = OdeProblem::new(pcdnse_system(grid, effective), 0.0, t1, psi0.psi.clone());
        let sol = solve_fixed_grid(problem, &opts.solver(SolverConfig::pcdnse()), 2)?;
        Ok((psi0.with_psi(sol.final_state().to_vec())?, sol.stats))
    };
    let (langevin, (lattice, pcdnse)) = rayon::join(run_langevin, || rayon::join(run_lattice, run_pcdnse));
    let (langevin, s_full) = langevin?;
    let (lattice, s_lat) = lattice?;
    let (pcdnse, s_cont) = pcdnse?;

    let p_full = OccupationProfile::from_lattice(&langevin, Boundary::Periodic);
    let p_lat = OccupationProfile::from_lattice(&lattice, Boundary::Periodic);
    let p_cont = OccupationProfile::from_field(&pcdnse);
    Ok(CrossModelRun {
        setup: *setup,
        reservoir,
        chain,
        effective,
        weak,
        t_final: t1,
        langevin_vs_pcdnse: compare_profiles(&p_full, &p_cont)?,
        lattice_vs_pcdnse: compare_profiles(&p_lat, &p_cont)?,
        langevin_vs_lattice: compare_profiles(&p_full, &p_lat)?,
        langevin,
        lattice,
        pcdnse,
        stats: [s_full, s_lat, s_cont],
    })
}

/// Occupations per site: `n, langevin, lattice, pcdnse` (continuum sampled at `x = n`).
pub fn cross_model_csv(run: &CrossModelRun) -> String {
    let cont = OccupationProfile::from_field(&run.pcdnse);
    let rows: Vec<[f64; 4]> = (0..run.langevin.len())
        .map(|n| [n as f64, run.langevin[n].norm_sqr(), run.lattice[n].norm_sqr(), cont.at(n as f64)])
        .collect();
    csv_table(&["n", "langevin", "lattice", "pcdnse"], rows.iter().map(|r| r.as_slice()))
}

#[derive(Serialize)]
struct CrossModelSummary<'a> {
    setup: &'a CrossModelSetup,
    reservoir: &'a ReservoirParams,
    anharmonicity: f64,
    effective: &'a EffectiveParams,
    weak: &'a WeakCoupling,
    t_final: f64,
    langevin_vs_pcdnse: &'a ProfileMetrics,
    lattice_vs_pcdnse: &'a ProfileMetrics,
    langevin_vs_lattice: &'a ProfileMetrics,
    stats: &'a [SolverStats; 3],
}

fn push_cross_model(data: &mut Dataset, tag: &str, run: &CrossModelRun) -> Result<()> {
    data.artifacts.push(Artifact::new(format!("profiles_{tag}.csv"), cross_model_csv(run)));
    let summary = CrossModelSummary {
        setup: &run.setup,
        reservoir: &run.reservoir,
        anharmonicity: run.chain.anharmonicity,
        effective: &run.effective,
        weak: &run.weak,
        t_final: run.t_final,
        langevin_vs_pcdnse: &run.langevin_vs_pcdnse,
        lattice_vs_pcdnse: &run.lattice_vs_pcdnse,
        langevin_vs_lattice: &run.langevin_vs_lattice,
        stats: &run.stats,
    };
    data.push_json(&format!("summary_{tag}.json"), &summary)
}

fn run_cross_models(data: &mut Dataset, setups: &[(String, CrossModelSetup)], opts: &ExperimentOptions) -> Vec<(String, CrossModelRun)> {
    let results: Vec<_> = setups.par_iter().map(|(tag, s)| (tag.clone(), cross_model(s, opts))).collect();
    let mut runs = Vec::new();
    for (tag, r) in results {
        match r.and_then(|run| push_cross_model(data, &tag, &run).map(|_| run)) {
            Ok(run) => runs.push((tag, run)),
            Err(e) => data.failures.push(format!("{tag}: {e}")),
        }
    }
    runs
}

fn fig3a(data: &mut Dataset, opts: &ExperimentOptions) -> Result<()> {
    let setups: Vec<_> = [100, 200, 400, 800]
        .into_iter()
        .map(|l| (format!("L{l}"), CrossModelSetup::new(l, -0.1)))
        .collect();
    // Smaller lattices are data only: their discreteness is the point of the panel.
    for (tag, run) in run_cross_models(data, &setups, opts) {
        if run.setup.sites == 800 {
            data.checks.push(Check::below(
                format!("{tag} langevin vs pcdnse relative Linf"),
                run.langevin_vs_pcdnse.linf_rel,
                0.05,
            ));
        }
    }
    Ok(())
}

fn fig3b(data: &mut Dataset, opts: &ExperimentOptions) -> Result<()> {
    let setups = vec![
        ("delta-0.1".to_string(), CrossModelSetup::new(800, -0.1)),
        ("delta-2".to_string(), CrossModelSetup::new(800, -2.0)),
    ];
    for (tag, run) in run_cross_models(data, &setups, opts) {
        let linf = run.langevin_vs_pcdnse.linf_rel;
        if run.setup.delta == -2.0 {
            data.checks.push(Check::above(format!("{tag} disagreement"), linf, 0.05));
            data.checks.push(Check::holds(format!("{tag} flagged by weak-coupling ratios"), !run.weak.is_weak()));
        } else {
            data.checks.push(Check::below(format!("{tag} agreement"), linf, 0.05));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------- velocity damping

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DampingSetup {
    pub gamma: f64,
    pub g: f64,
    pub psi0: f64,
    pub v0: f64,
    pub horizon: f64,
    pub domain: f64,
    pub points: usize,
    pub x0: f64,
    /// Use the tight continuum tolerances.
    pub tight: bool,
}

impl DampingSetup {
    /// Stable soliton with `ψ(0) = 1`, `v(0) = 0.49`, measured over `Jt = 4`.
    pub fn new(gamma: f64) -> Self {
        Self { gamma, g: REFERENCE_G, psi0: 1.0, v0: 0.49, horizon: 4.0, domain: 600.0, points: 6000, x0: 75.0, tight: false }
    }

    pub fn tight(self) -> Self {
        Self { tight: true, ..self }
    }

    pub fn coords(&self) -> SolitonCoords {
        // Stable width for amplitude ψ: w² = −2J/(gψ²).
        let w = (-2.0 / (self.g * self.psi0 * self.psi0)).sqrt();
        SolitonCoords { psi: self.psi0, x0: self.x0, v: self.v0, w, d: 0.0, phi: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DampingRow {
    pub gamma: f64,
    /// `gγψ⁴(0)`, the abscissa of the damping plot.
    pub g_gamma_psi4: f64,
    /// Predicted `Γ`.
    pub predicted: f64,
    /// `−v̇/(vJ)` from the mean wavenumber.
    pub measured: f64,
    /// `−v̇/(vJ)` from the fitted phase slope.
    pub measured_fit: f64,
    pub fit_residual: f64,
    pub fits_converged: bool,
}

impl DampingRow {
    pub fn relative_error(&self) -> f64 {
        (self.measured / self.predicted - 1.0).abs()
    }
}

pub fn velocity_damping(setup: &DampingSetup, opts: &ExperimentOptions) -> Result<DampingRow> {
    let eff = EffectiveParams::new(setup.g, setup.gamma, 1.0);
    let coords = setup.coords();
    let grid = Grid::new(setup.domain, setup.points, Boundary::Periodic)?;
    let (field, _) = make_soliton_field(&coords, &grid)?;
    let base = if setup.tight { SolverConfig::pcdnse_tight() } else { SolverConfig::pcdnse() };
    let problem = OdeProblem::new(pcdnse_system(grid, eff), 0.0, setup.horizon, field.psi.clone());
    let sol = solve_fixed_grid(problem, &opts.solver(base), 2)?;
    let series = sol.series.map(|_, psi| FieldState { grid, psi: psi.clone() });
    let est = velocity_damping_estimate(&series, setup.horizon, eff.hopping)?;
    let ss = stable_soliton(coords.particle_number(), &eff)?;
    Ok(DampingRow {
        gamma: setup.gamma,
        g_gamma_psi4: setup.g * setup.gamma * setup.psi0.powi(4),
        predicted: ss.gamma_rate,
        measured: -est.momentum.relative_rate,
        measured_fit: -est.fitted.relative_rate,
        fit_residual: est.fit_start.residual.max(est.fit_end.residual),
        fits_converged: est.fits_converged(),
    })
}

/// The four red-detuned rates plus the blue-detuned point at tight tolerances.
pub fn fig4_setups() -> Vec<DampingSetup> {
    let mut v: Vec<_> = [0.0125, 0.025, 0.05, 0.1].into_iter().map(DampingSetup::new).collect();
    v.push(DampingSetup::new(-0.0125).tight());
    v
}

pub fn damping_csv(rows: &[DampingRow]) -> String {
    let table: Vec<[f64; 6]> = rows
        .iter()
        .map(|r| [r.gamma, r.g_gamma_psi4, r.predicted, r.measured, r.measured_fit, r.fit_residual])
        .collect();
    csv_table(
        &["gamma", "g_gamma_psi4", "predicted", "measured", "measured_fit", "fit_residual"],
        table.iter().map(|r| r.as_slice()),
    )
}

fn fig4(data: &mut Dataset, opts: &ExperimentOptions) -> Result<()> {
    let setups = fig4_setups();
    let results: Vec<_> = setups.par_iter().map(|s| velocity_damping(s, opts)).collect();
    let mut rows = Vec::new();
    for (s, r) in setups.iter().zip(results) {
        match r {
            Ok(row) => {
                let bound = if s.gamma < 0.0 { 0.10 } else { 0.05 };
                data.checks.push(Check::below(
                    format!("gamma={} relative error of measured rate", s.gamma),
                    row.relative_error(),
                    bound,
                ));
                rows.push(row);
            }
            Err(e) => data.failures.push(format!("gamma={}: {e}", s.gamma)),
        }
    }
    data.artifacts.push(Artifact::new("damping.csv", damping_csv(&rows)));
    Ok(())
}

// ---------------------------------------------------------------- hybrid shape relaxation

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HybridSetup {
    /// Relative amplitude perturbation `δ`: `ψ(0) = (1 + δ)ψ_SS` at fixed `N`.
    pub perturbation: f64,
    pub gamma: f64,
    pub g: f64,
    pub n: f64,
    pub domain: f64,
    pub points: usize,
    pub short_horizon: f64,
    /// Spacing of the fits during the continuum run.
    pub check_interval: f64,
    pub long_horizon: f64,
    /// Sampling interval of the collective run.
    pub long_sample: f64,
}

impl HybridSetup {
    /// `γ = 0.1`, `g = −0.1J`, `N = 1`; continuum check to `Jt = 500`, then
    /// collective coordinates to `Jt = 2×10⁴`.
    pub fn new(perturbation: f64) -> Self {
        Self {
            perturbation,
            gamma: 0.1,
            g: REFERENCE_G,
            n: 1.0,
            domain: 800.0,
            points: 4000,
            short_horizon: 500.0,
            check_interval: 10.0,
            long_horizon: 2e4,
            long_sample: 1.0,
        }
    }

    /// Collective horizon `Jt = 2×10⁶`.
    pub fn full_horizon(self) -> Self {
        Self { long_horizon: 2e6, long_sample: 10.0, ..self }
    }

    pub fn effective(&self) -> EffectiveParams {
        EffectiveParams::new(self.g, self.gamma, 1.0)
    }

    pub fn initial(&self, ss: &StableSoliton) -> SolitonCoords {
        let psi = ss.psi_ss * (1.0 + self.perturbation);
        SolitonCoords { psi, x0: 0.5 * self.domain, v: 0.0, w: self.n / (2.0 * psi * psi), d: 0.0, phi: 0.0 }
    }
}

/// Fits taken along the continuum run.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ShortRun {
    pub times: Vec<f64>,
    /// Fitted amplitude.
    pub psi: Vec<f64>,
    /// Largest grid amplitude `max|Ψ|`.
    pub peak: Vec<f64>,
    pub residual: Vec<f64>,
    /// First check at which the fit failed or exceeded the residual threshold.
    pub breakup_at: Option<f64>,
    pub stats: SolverStats,
}

impl ShortRun {
    /// `max |ψ/ψ_SS − 1|` over the fitted amplitudes.
    pub fn max_deviation(&self, psi_ss: f64) -> f64 {
        self.psi.iter().map(|p| (p / psi_ss - 1.0).abs()).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LongRun {
    pub times: Vec<f64>,
    pub coords: Vec<[f64; 6]>,
    /// Measured shape-oscillation period, also used as the envelope window.
    pub period: f64,
    pub envelope: EnvelopeSeries,
    pub stats: SolverStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridRun {
    pub setup: HybridSetup,
    pub stable: StableSoliton,
    pub short: ShortRun,
    /// Skipped when the continuum run broke up.
    pub long: Option<LongRun>,
}

pub fn hybrid(setup: &HybridSetup, opts: &ExperimentOptions) -> Result<HybridRun> {
    let eff = setup.effective();
    let stable = stable_soliton(setup.n, &eff)?;
    let initial = setup.initial(&stable);
    let short = hybrid_short(setup, &eff, &initial, opts)?;
    let long = match short.breakup_at {
        Some(_) => None,
        None => Some(hybrid_long(setup, &eff, &stable, &initial, opts)?),
    };
    Ok(HybridRun { setup: *setup, stable, short, long })
}

fn hybrid_short(setup: &HybridSetup, eff: &EffectiveParams, c: &SolitonCoords, opts: &ExperimentOptions) -> Result<ShortRun> {
    let grid = Grid::new(setup.domain, setup.points, Boundary::Periodic)?;
    let (field, _) = make_soliton_field(c, &grid)?;
    let checks = (setup.short_horizon / setup.check_interval).round().max(1.0) as usize + 1;
    let cfg = opts.solver(SolverConfig::pcdnse()).with_snapshots(linspace(0.0, setup.short_horizon, checks));
    let mut run = ShortRun::default();
    let problem = OdeProblem::new(pcdnse_system(grid, *eff), 0.0, setup.short_horizon, field.psi);
    run.stats = solve_observed(problem, &cfg, |t, psi| {
        let state = FieldState { grid, psi: psi.to_vec() };
        run.times.push(t);
        run.peak.push(state.max_amplitude());
        match fit_soliton(&state) {
            Ok(fit) => {
                run.psi.push(fit.coords.psi);
                run.residual.push(fit.residual);
                if fit.residual >= FIT_RESIDUAL_THRESHOLD {
                    run.breakup_at = Some(t);
                }
            }
            Err(_) => {
                run.psi.push(f64::NAN);
                run.residual.push(f64::INFINITY);
                run.breakup_at = Some(t);
            }
        }
        if run.breakup_at.is_some() {
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    })?;
    Ok(run)
}

fn hybrid_long(
    setup: &HybridSetup,
    eff: &EffectiveParams,
    ss: &StableSoliton,
    c: &SolitonCoords,
    opts: &ExperimentOptions,
) -> Result<LongRun> {
    let samples = (setup.long_horizon / setup.long_sample).round().max(1.0) as usize + 1;
    let problem = OdeProblem::new(collective_system(*eff, DEFAULT_WIDTH_FLOOR), 0.0, setup.long_horizon, c.to_array().to_vec());
    let sol = solve(problem, &opts.solver(SolverConfig::collective()).with_snapshots(linspace(0.0, setup.long_horizon, samples)))?;
    let times = sol.series.times.clone();
    let coords: Vec<[f64; 6]> = sol.series.states.iter().map(|y| [y[0], y[1], y[2], y[3], y[4], y[5]]).collect();
    let psi: Vec<f64> = coords.iter().map(|y| y[0]).collect();
    let period = oscillation_period(&times, &psi, ss.psi_ss).ok_or(Error::SpanTooShort {
        span: setup.long_horizon,
        window: f64::NAN,
    })?;
    let envelope = envelope_deviation(&times, &psi, ss.psi_ss, period)?;
    Ok(LongRun { times, coords, period, envelope, stats: sol.stats })
}

pub fn short_run_csv(run: &ShortRun) -> String {
    let rows: Vec<[f64; 4]> = (0..run.times.len())
        .map(|k| [run.times[k], run.psi[k], run.peak[k], run.residual[k]])
        .collect();
    csv_table(&["t", "psi_fit", "peak", "residual"], rows.iter().map(|r| r.as_slice()))
}

pub fn long_run_csv(run: &LongRun) -> String {
    let rows: Vec<[f64; 7]> = run
        .times
        .iter()
        .zip(&run.coords)
        .map(|(&t, c)| [t, c[0], c[1], c[2], c[3], c[4], c[5]])
        .collect();
    csv_table(&["t", "psi", "x0", "v", "w", "d", "phi"], rows.iter().map(|r| r.as_slice()))
}

fn fig5(data: &mut Dataset, opts: &ExperimentOptions) -> Result<()> {
    let mut setups = vec![HybridSetup::new(0.01), HybridSetup::new(0.3)];
    if opts.full_horizon {
        setups = setups.into_iter().map(HybridSetup::full_horizon).collect();
    }
    let results: Vec<_> = setups.par_iter().map(|s| hybrid(s, opts)).collect();
    for (s, r) in setups.iter().zip(results) {
        let tag = format!("delta{}", s.perturbation);
        let run = match r {
            Ok(run) => run,
            Err(e) => {
                data.failures.push(format!("{tag}: {e}"));
                continue;
            }
        };
        data.artifacts.push(Artifact::new(format!("short_{tag}.csv"), short_run_csv(&run.short)));
        if let Some(long) = &run.long {
            data.artifacts.push(Artifact::new(format!("long_{tag}.csv"), long_run_csv(long)));
            data.artifacts.push(Artifact::new(format!("envelope_{tag}.csv"), long.envelope.to_csv()));
        }
        if s.perturbation.abs() < 0.1 {
            data.checks.push(Check::holds(format!("{tag} no breakup"), run.short.breakup_at.is_none()));
            data.checks.push(Check::at_most(
                format!("{tag} max |psi/psi_SS - 1|"),
                run.short.max_deviation(run.stable.psi_ss),
                2.0 * s.perturbation.abs(),
            ));
            data.checks.push(Check::holds(
                format!("{tag} envelope non-increasing after first window"),
                run.long.as_ref().is_some_and(|l| l.envelope.non_increasing_after(1, 0.0)),
            ));
        } else {
            data.checks.push(Check::at_most(
                format!("{tag} breakup time"),
                run.short.breakup_at.unwrap_or(f64::INFINITY),
                200.0,
            ));
            data.checks.push(Check::holds(format!("{tag} long run skipped"), run.long.is_none()));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------- two-soliton energetics

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoSolitonSetup {
    pub gamma: f64,
    pub g: f64,
    pub psi0: f64,
    /// Speed of each soliton; they move towards each other.
    pub speed: f64,
    /// Initial center distance in units of `w(0)`.
    pub separation: f64,
    /// Periodic domain length in units of `w(0)`.
    pub domain: f64,
    pub dx: f64,
    pub horizon: f64,
    pub sample: f64,
}

impl TwoSolitonSetup {
    /// `ψ(0) = 1`, `|v(0)| = 0.5`, `5w(0)` apart on a `20w(0)` ring.
    pub fn new(gamma: f64) -> Self {
        Self { gamma, g: REFERENCE_G, psi0: 1.0, speed: 0.5, separation: 5.0, domain: 20.0, dx: 0.1, horizon: 40.0, sample: 0.1 }
    }

    pub fn width(&self) -> f64 {
        (-2.0 / (self.g * self.psi0 * self.psi0)).sqrt()
    }

    /// Time at which the centers close to `distance` (in widths), ignoring damping.
    fn time_at_distance(&self, distance: f64) -> f64 {
        (self.separation - distance) * self.width() / (4.0 * self.speed)
    }

    /// Last time with centers at least `4w` apart before the collision.
    pub fn pre_overlap_end(&self) -> f64 {
        self.time_at_distance(4.0)
    }

    /// First time with centers `4w` apart again after passing through each other.
    pub fn post_collision_start(&self) -> f64 {
        self.time_at_distance(-4.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoSolitonRun {
    pub setup: TwoSolitonSetup,
    pub times: Vec<f64>,
    pub e_two: Vec<f64>,
    /// Energy of one isolated stable soliton decelerating at the predicted rate.
    pub e_single: Vec<f64>,
    pub stats: SolverStats,
}

impl TwoSolitonRun {
    pub fn ratio(&self) -> Vec<f64> {
        self.e_two.iter().zip(&self.e_single).map(|(a, b)| a / (2.0 * b)).collect()
    }

    fn ratio_where(&self, keep: impl Fn(f64) -> bool) -> Vec<f64> {
        self.times.iter().zip(self.ratio()).filter(|(&t, _)| keep(t)).map(|(_, r)| r).collect()
    }

    /// `max |ratio − 1|` before the solitons overlap.
    pub fn pre_overlap_band(&self) -> f64 {
        let end = self.setup.pre_overlap_end();
        self.ratio_where(|t| t <= end).iter().map(|r| (r - 1.0).abs()).fold(0.0, f64::max)
    }

    /// Largest ratio once the solitons have separated again.
    pub fn post_collision_max(&self) -> f64 {
        let start = self.setup.post_collision_start();
        self.ratio_where(|t| t >= start).into_iter().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_deviation(&self) -> f64 {
        self.ratio().iter().map(|r| (r - 1.0).abs()).fold(0.0, f64::max)
    }
}

pub fn two_soliton(setup: &TwoSolitonSetup, opts: &ExperimentOptions) -> Result<TwoSolitonRun> {
    let eff = EffectiveParams::new(setup.g, setup.gamma, 1.0);
    let w = setup.width();
    let length = setup.domain * w;
    let grid = Grid::with_spacing(length, setup.dx, Boundary::Periodic)?;
    let centre = 0.5 * length;
    let left = SolitonCoords { psi: setup.psi0, x0: centre - 0.5 * setup.separation * w, v: setup.speed, w, d: 0.0, phi: 0.0 };
    let right = SolitonCoords { x0: centre + 0.5 * setup.separation * w, v: -setup.speed, ..left };
    let field = superpose(&[make_soliton_field(&left, &grid)?.0, make_soliton_field(&right, &grid)?.0])?;
    let ss = stable_soliton(left.particle_number(), &eff)?;

    let samples = (setup.horizon / setup.sample).round().max(1.0) as usize + 1;
    let problem = OdeProblem::new(pcdnse_system(grid, eff), 0.0, setup.horizon, field.psi);
    let sol = solve_fixed_grid(problem, &opts.solver(SolverConfig::two_soliton()), samples)?;
    let e_two = sol
        .series
        .states
        .iter()
        .map(|psi| field_energy(&FieldState { grid, psi: psi.clone() }, &eff))
        .collect();
    let e_single = sol.series.times.iter().map(|&t| ss.energy(ss.velocity(setup.speed, t))).collect();
    Ok(TwoSolitonRun { setup: *setup, times: sol.series.times, e_two, e_single, stats: sol.stats })
}

pub fn two_soliton_csv(run: &TwoSolitonRun) -> String {
    let ratio = run.ratio();
    let rows: Vec<[f64; 4]> = (0..run.times.len())
        .map(|k| [run.times[k], run.e_two[k], run.e_single[k], ratio[k]])
        .collect();
    csv_table(&["t", "e_two", "e_single", "ratio"], rows.iter().map(|r| r.as_slice()))
}

fn fig6(data: &mut Dataset, opts: &ExperimentOptions) -> Result<()> {
    let setups = [TwoSolitonSetup::new(1e-2), TwoSolitonSetup::new(0.0)];
    let results: Vec<_> = setups.par_iter().map(|s| two_soliton(s, opts)).collect();
    for (s, r) in setups.iter().zip(results) {
        let tag = format!("gamma{}", s.gamma);
        let run = match r {
            Ok(run) => run,
            Err(e) => {
                data.failures.push(format!("{tag}: {e}"));
                continue;
            }
        };
        data.artifacts.push(Artifact::new(format!("energy_{tag}.csv"), two_soliton_csv(&run)));
        if s.gamma == 0.0 {
            data.checks.push(Check::at_most(format!("{tag} max |ratio - 1|"), run.max_deviation(), 0.01));
        } else {
            let band = run.pre_overlap_band();
            data.checks.push(Check::at_most(format!("{tag} pre-overlap |ratio - 1|"), band, 0.01));
            data.checks.push(Check::at_least(
                format!("{tag} post-collision deficit vs pre-overlap band"),
                1.0 - run.post_collision_max(),
                band,
            ));
        }
    }
    Ok(())
}
