//! Adaptive explicit Runge-Kutta integration of real or complex ODE systems.
//!
//! Two embedded pairs are available: Tsitouras 5(4) for the field equations
//! and the collective coordinates, and Dormand–Prince 8(5,3) for the cavity
//! Langevin equations, which need much tighter tolerances. Step sizes follow a
//! PI controller. Requested output times are hit exactly by shortening the
//! step that would cross them; there is no dense output.

mod tableau;

use std::fmt;
use std::ops::{Add, ControlFlow, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::{Error, Result, C64};
use tableau::{ErrorWeights, Tableau, DOP853, TSIT5};

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;

/// Scalar types a state vector can hold.
pub trait Element:
    Copy + Default + Send + Sync + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> + 'static
{
    fn modulus(self) -> f64;
}

impl Element for f64 {
    #[inline]
    fn modulus(self) -> f64 {
        self.abs()
    }
}

impl Element for C64 {
    #[inline]
    fn modulus(self) -> f64 {
        self.norm()
    }
}

/// `dy/dt = rhs(t, y)` on `[t0, t1]`.
///
/// The right-hand side writes the derivative into its third argument and may
/// fail, e.g. when a collective coordinate leaves its domain.
pub struct OdeProblem<S, F> {
    pub rhs: F,
    pub t0: f64,
    pub t1: f64,
    pub initial_state: Vec<S>,
}

impl<S, F> OdeProblem<S, F>
where
    S: Element,
    F: FnMut(f64, &[S], &mut [S]) -> Result<()>,
{
    pub fn new(rhs: F, t0: f64, t1: f64, initial_state: Vec<S>) -> Self {
        Self { rhs, t0, t1, initial_state }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Method {
    /// Tsitouras 5(4), FSAL, 6 evaluations per step.
    #[default]
    #[serde(rename = "rk45_tsitouras")]
    Tsit5,
    /// Dormand–Prince 8(5,3), 12 evaluations per step.
    #[serde(rename = "rk_high_order")]
    Dop853,
}

impl Method {
    fn tableau(self) -> &'static Tableau {
        match self {
            Method::Tsit5 => &TSIT5,
            Method::Dop853 => &DOP853,
        }
    }

    pub fn order(self) -> u32 {
        self.tableau().order
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    #[serde(default)]
    pub method: Method,
    pub rtol: f64,
    pub atol: f64,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
    /// Output times. `None` records every accepted step.
    #[serde(default)]
    pub snapshot_times: Option<Vec<f64>>,
    /// First trial step; estimated from the problem when absent.
    #[serde(default)]
    pub initial_step: Option<f64>,
    #[serde(default)]
    pub max_step: Option<f64>,
}

fn default_max_steps() -> usize {
    10_000_000
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self::pcdnse()
    }
}

impl SolverConfig {
    pub fn new(method: Method, rtol: f64, atol: f64) -> Self {
        Self {
            method,
            rtol,
            atol,
            max_steps: default_max_steps(),
            snapshot_times: None,
            initial_step: None,
            max_step: None,
        }
    }

    /// Continuum field runs.
    pub fn pcdnse() -> Self {
        Self::new(Method::Tsit5, 1e-8, 1e-8)
    }

    /// Tight tolerances for the anti-damped (blue detuned) field runs.
    pub fn pcdnse_tight() -> Self {
        Self::new(Method::Tsit5, 1e-13, 1e-12)
    }

    /// Cavity Langevin runs.
    pub fn langevin() -> Self {
        Self::new(Method::Dop853, 1e-12, 1e-12)
    }

    pub fn collective() -> Self {
        Self::new(Method::Tsit5, 1e-10, 1e-8)
    }

    pub fn two_soliton() -> Self {
        Self::new(Method::Tsit5, 1e-10, 1e-8)
    }

    /// Looks up a named preset.
    pub fn preset(name: &str) -> Option<Self> {
        Some(match name {
            "pcdnse" => Self::pcdnse(),
            "pcdnse_tight" | "tight" => Self::pcdnse_tight(),
            "langevin" => Self::langevin(),
            "collective" => Self::collective(),
            "two_soliton" => Self::two_soliton(),
            _ => return None,
        })
    }

    pub fn with_snapshots(mut self, times: Vec<f64>) -> Self {
        self.snapshot_times = Some(times);
        self
    }

    pub fn with_tolerances(mut self, rtol: f64, atol: f64) -> Self {
        self.rtol = rtol;
        self.atol = atol;
        self
    }

    pub fn validate(&self, t0: f64, t1: f64) -> Result<()> {
        if !(self.rtol > 0.0 && self.atol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "tolerances must be positive (rtol = {}, atol = {})",
                self.rtol, self.atol
            )));
        }
        if !(t1 > t0) || !t0.is_finite() || !t1.is_finite() {
            return Err(Error::InvalidParameter(format!("need t0 < t1, got [{t0}, {t1}]")));
        }
        if let Some(times) = &self.snapshot_times {
            let slack = 1e-12 * (t1 - t0).abs().max(1.0);
            if times.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(Error::InvalidParameter("snapshot times must be strictly increasing".into()));
            }
            if times.iter().any(|&t| t < t0 - slack || t > t1 + slack) {
                return Err(Error::InvalidParameter(format!("snapshot times must lie in [{t0}, {t1}]")));
            }
        }
        Ok(())
    }
}

/// Time-stamped records.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TimeSeries<T> {
    pub times: Vec<f64>,
    pub states: Vec<T>,
}

impl<T> TimeSeries<T> {
    pub fn new() -> Self {
        Self { times: Vec::new(), states: Vec::new() }
    }

    pub fn push(&mut self, t: f64, state: T) {
        debug_assert!(self.times.last().is_none_or(|&last| t > last));
        self.times.push(t);
        self.states.push(state);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<(f64, &T)> {
        Some((*self.times.last()?, self.states.last()?))
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &T)> {
        self.times.iter().copied().zip(self.states.iter())
    }

    /// Record closest in time to `t`.
    pub fn nearest(&self, t: f64) -> Option<(f64, &T)> {
        let idx = self
            .times
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))?
            .0;
        Some((self.times[idx], &self.states[idx]))
    }

    pub fn map<U>(&self, mut f: impl FnMut(f64, &T) -> U) -> TimeSeries<U> {
        TimeSeries {
            times: self.times.clone(),
            states: self.iter().map(|(t, s)| f(t, s)).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SolverStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

impl fmt::Display for SolverStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} accepted, {} rejected, {} rhs evaluations",
            self.accepted, self.rejected, self.rhs_evals
        )
    }
}

#[derive(Debug, Clone)]
pub struct Solution<S> {
    pub series: TimeSeries<Vec<S>>,
    pub stats: SolverStats,
}

impl<S: Clone> Solution<S> {
    pub fn final_state(&self) -> &[S] {
        self.series.states.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Integrates and records the state at the snapshot times (or at every
/// accepted step when none are configured).
pub fn solve<S, F>(problem: OdeProblem<S, F>, cfg: &SolverConfig) -> Result<Solution<S>>
where
    S: Element,
    F: FnMut(f64, &[S], &mut [S]) -> Result<()>,
{
    let mut series = TimeSeries::new();
    let stats = solve_observed(problem, cfg, |t, y| {
        series.push(t, y.to_vec());
        ControlFlow::Continue(())
    })?;
    Ok(Solution { series, stats })
}

/// `solve` with `n_outputs` equally spaced snapshots including both ends.
pub fn solve_fixed_grid<S, F>(problem: OdeProblem<S, F>, cfg: &SolverConfig, n_outputs: usize) -> Result<Solution<S>>
where
    S: Element,
    F: FnMut(f64, &[S], &mut [S]) -> Result<()>,
{
    if n_outputs < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 outputs, got {n_outputs}")));
    }
    let cfg = cfg.clone().with_snapshots(linspace(problem.t0, problem.t1, n_outputs));
    solve(problem, &cfg)
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![a],
        _ => {
            let step = (b - a) / (n - 1) as f64;
            let mut v: Vec<f64> = (0..n).map(|i| a + step * i as f64).collect();
            v[n - 1] = b;
            v
        }
    }
}

/// Core driver. `observer` sees every recorded state and may stop the run
/// early by returning `ControlFlow::Break`.
pub fn solve_observed<S, F, O>(problem: OdeProblem<S, F>, cfg: &SolverConfig, mut observer: O) -> Result<SolverStats>
where
    S: Element,
    F: FnMut(f64, &[S], &mut [S]) -> Result<()>,
    O: FnMut(f64, &[S]) -> ControlFlow<()>,
{
    cfg.validate(problem.t0, problem.t1)?;
    let OdeProblem { mut rhs, t0, t1, initial_state } = problem;
    let tab = cfg.method.tableau();
    let n = initial_state.len();

    let mut stats = SolverStats::default();
    let mut eval = |t: f64, y: &[S], out: &mut [S], stats: &mut SolverStats| -> Result<()> {
        stats.rhs_evals += 1;
        rhs(t, y, out).map_err(|e| Error::Rhs { t, source: Box::new(e) })
    };

    // Output schedule: snapshot times (if any) must be hit exactly; t1 always.
    let (mut stops, record_all) = match &cfg.snapshot_times {
        Some(times) => (times.clone(), false),
        None => (vec![], true),
    };
    if stops.last().is_none_or(|&t| t < t1) {
        stops.push(t1);
    }
    let slack = 1e-12 * (t1 - t0).abs().max(1.0);
    let record_stop = |t: f64| -> bool {
        match &cfg.snapshot_times {
            Some(times) => times.iter().any(|&s| (s - t).abs() <= slack),
            None => true,
        }
    };

    let mut t = t0;
    let mut y = initial_state;
    let mut stop_idx = 0;
    while stop_idx < stops.len() && stops[stop_idx] <= t0 + slack {
        stop_idx += 1;
    }
    if record_all || record_stop(t0) {
        if let ControlFlow::Break(()) = observer(t, &y) {
            return Ok(stats);
        }
    }
    if n == 0 {
        return Ok(stats);
    }

    let mut k: Vec<Vec<S>> = (0..tab.stages).map(|_| vec![S::default(); n]).collect();
    let mut y_stage = vec![S::default(); n];
    let mut y_new = vec![S::default(); n];
    let mut k_next = vec![S::default(); n];

    eval(t, &y, &mut k[0], &mut stats)?;

    let mut h = match cfg.initial_step {
        Some(h0) if h0 > 0.0 => h0,
        _ => initial_step(&mut eval, t, &y, &k[0], cfg, tab.order, &mut stats)?,
    };
    if let Some(hmax) = cfg.max_step {
        h = h.min(hmax);
    }
    let mut err_prev: f64 = 1e-4;
    let beta1 = 0.7 / tab.control_order as f64;
    let beta2 = 0.4 / tab.control_order as f64;
    let inv_k = 1.0 / tab.control_order as f64;

    while stop_idx < stops.len() {
        if stats.accepted + stats.rejected >= cfg.max_steps {
            return Err(Error::MaxSteps { t, stats });
        }
        let target = stops[stop_idx];
        let remaining = target - t;
        let clipped = h >= remaining;
        let h_step = if clipped { remaining } else { h };
        if h_step <= 16.0 * f64::EPSILON * t.abs().max(1.0) {
            return Err(Error::StepUnderflow { t, h: h_step, stats });
        }

        // Stages.
        for i in 1..tab.stages {
            combine(&y, h_step, tab.a[i], &k, &mut y_stage);
            eval(t + tab.c[i] * h_step, &y_stage, &mut k[i], &mut stats)?;
        }
        // For FSAL pairs this repeats the last stage's argument exactly.
        combine(&y, h_step, tab.b, &k, &mut y_new);

        let err = error_norm(tab, &y, &y_new, &k, h_step, cfg.rtol, cfg.atol);

        if err.is_finite() && err <= 1.0 {
            let t_new = if clipped { target } else { t + h_step };
            if tab.fsal {
                k.swap(0, tab.stages - 1);
            } else {
                eval(t_new, &y_new, &mut k_next, &mut stats)?;
                std::mem::swap(&mut k[0], &mut k_next);
            }
            std::mem::swap(&mut y, &mut y_new);
            t = t_new;
            stats.accepted += 1;

            let err_c = err.max(1e-10);
            let fac = (SAFETY * err_c.powf(-beta1) * err_prev.powf(beta2)).clamp(MIN_FACTOR, MAX_FACTOR);
            err_prev = err.max(1e-4);
            let proposal = h_step * fac;
            h = if clipped { h.max(proposal) } else { proposal };
            if let Some(hmax) = cfg.max_step {
                h = h.min(hmax);
            }

            let at_stop = clipped;
            if at_stop {
                stop_idx += 1;
            }
            if record_all || (at_stop && record_stop(t)) {
                if let ControlFlow::Break(()) = observer(t, &y) {
                    return Ok(stats);
                }
            }
        } else {
            stats.rejected += 1;
            let fac = if err.is_finite() {
                (SAFETY * err.powf(-inv_k)).clamp(MIN_FACTOR, 1.0)
            } else {
                MIN_FACTOR
            };
            h = h_step * fac;
        }
    }
    Ok(stats)
}

/// `out = y + h Σ_j w_j k_j` over the nonzero weights.
fn combine<S: Element>(y: &[S], h: f64, weights: &[f64], k: &[Vec<S>], out: &mut [S]) {
    out.copy_from_slice(y);
    for (j, &w) in weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let hw = h * w;
        for (o, &kj) in out.iter_mut().zip(&k[j]) {
            *o = *o + kj * hw;
        }
    }
}

fn error_norm<S: Element>(tab: &Tableau, y: &[S], y_new: &[S], k: &[Vec<S>], h: f64, rtol: f64, atol: f64) -> f64 {
    let n = y.len() as f64;
    match &tab.error {
        ErrorWeights::Single(e) => {
            let mut acc = 0.0;
            for i in 0..y.len() {
                let mut est = S::default();
                for (j, &w) in e.iter().enumerate() {
                    if w != 0.0 {
                        est = est + k[j][i] * w;
                    }
                }
                let sc = atol + rtol * y[i].modulus().max(y_new[i].modulus());
                let r = h * est.modulus() / sc;
                acc += r * r;
            }
            (acc / n).sqrt()
        }
        ErrorWeights::Dop853 { er, bhh } => {
            let mut err5 = 0.0;
            let mut err3 = 0.0;
            for i in 0..y.len() {
                let sc = atol + rtol * y[i].modulus().max(y_new[i].modulus());
                let mut e5 = S::default();
                let mut incr = S::default();
                for j in 0..tab.stages {
                    if er[j] != 0.0 {
                        e5 = e5 + k[j][i] * er[j];
                    }
                    if tab.b[j] != 0.0 {
                        incr = incr + k[j][i] * tab.b[j];
                    }
                }
                let e3 = incr - k[0][i] * bhh[0] - k[8][i] * bhh[1] - k[11][i] * bhh[2];
                let r5 = e5.modulus() / sc;
                let r3 = e3.modulus() / sc;
                err5 += r5 * r5;
                err3 += r3 * r3;
            }
            let mut deno = err5 + 0.01 * err3;
            if deno <= 0.0 {
                deno = 1.0;
            }
            h.abs() * err5 * (1.0 / (deno * n)).sqrt()
        }
    }
}

/// Starting step heuristic from Hairer, Nørsett & Wanner (II.4).
fn initial_step<S, E>(
    eval: &mut E,
    t: f64,
    y: &[S],
    f0: &[S],
    cfg: &SolverConfig,
    order: u32,
    stats: &mut SolverStats,
) -> Result<f64>
where
    S: Element,
    E: FnMut(f64, &[S], &mut [S], &mut SolverStats) -> Result<()>,
{
    let n = y.len() as f64;
    let scale = |i: usize| cfg.atol + cfg.rtol * y[i].modulus();
    let rms = |v: &dyn Fn(usize) -> f64| ((0..y.len()).map(|i| v(i).powi(2)).sum::<f64>() / n).sqrt();
    let d0 = rms(&|i| y[i].modulus() / scale(i));
    let d1 = rms(&|i| f0[i].modulus() / scale(i));
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let y1: Vec<S> = y.iter().zip(f0).map(|(&a, &b)| a + b * h0).collect();
    let mut f1 = vec![S::default(); y.len()];
    eval(t + h0, &y1, &mut f1, stats)?;
    let d2 = rms(&|i| (f1[i] - f0[i]).modulus() / scale(i)) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(1.0 / (order as f64 + 1.0))
    };
    Ok((100.0 * h0).min(h1))
}
