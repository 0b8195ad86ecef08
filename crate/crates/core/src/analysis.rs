//! Measurements on simulated fields: soliton fits, velocity damping,
//! amplitude envelopes and profile comparison.

use std::f64::consts::{PI, SQRT_2};

use nalgebra::{Matrix3, Matrix6, Vector3, Vector6};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::collective::SolitonCoords;
use crate::integrate::TimeSeries;
use crate::model_continuum::{FieldState, Grid};
use crate::params::Boundary;
use crate::{Error, Result, C64};

/// Fits with a larger relative `|Ψ|²` misfit are not trusted.
pub const FIT_RESIDUAL_THRESHOLD: f64 = 1e-3;

/// A field needs `max|Ψ|² > PEAK_CONTRAST · median|Ψ|²` to be fitted.
pub const PEAK_CONTRAST: f64 = 10.0;

/// Relative L∞ occupation difference below which two profiles agree.
pub const AGREEMENT_THRESHOLD: f64 = 0.05;

const MAX_ITERATIONS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub coords: SolitonCoords,
    /// Root mean square of `|Ψ|² − |Ψ̄|²` over the grid, divided by `max|Ψ|²`.
    pub residual: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Least-squares fit of the sech ansatz to a complex field.
///
/// Starts from the peak position and height, the half-maximum width and a
/// `|Ψ|²`-weighted quadratic fit of the unwrapped phase, then runs
/// Levenberg–Marquardt on the real and imaginary parts with an analytic
/// Jacobian.
pub fn fit_soliton(field: &FieldState) -> Result<FitResult> {
    let occ = field.occupation();
    let (peak_idx, peak_amp) = field.peak();
    let peak = peak_amp * peak_amp;
    let median = median(&occ);
    if !(peak > PEAK_CONTRAST * median) || peak == 0.0 {
        let ratio = if median > 0.0 { peak / median } else { 0.0 };
        return Err(Error::NoPeak { ratio });
    }
    let guess = initial_guess(field, &occ, peak_idx)?;
    let (coords, iterations, ok) = levenberg_marquardt(field, guess);
    let residual = occupation_residual(field, &coords);
    Ok(FitResult {
        coords,
        residual,
        converged: ok && residual < FIT_RESIDUAL_THRESHOLD,
        iterations,
    })
}

fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        0.0
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn wrap_index(grid: &Grid, j: isize) -> Option<usize> {
    let n = grid.points as isize;
    match grid.boundary {
        Boundary::Periodic => Some(j.rem_euclid(n) as usize),
        Boundary::Open => (0..n).contains(&j).then_some(j as usize),
    }
}

fn initial_guess(field: &FieldState, occ: &[f64], peak_idx: usize) -> Result<SolitonCoords> {
    let grid = &field.grid;
    let dx = grid.dx();
    let at = |j: isize| wrap_index(grid, j).map(|k| occ[k]);
    let p = peak_idx as isize;

    // Sub-grid peak from a parabola through the three highest samples.
    let mut x0 = grid.x(peak_idx);
    if let (Some(l), Some(c), Some(r)) = (at(p - 1), at(p), at(p + 1)) {
        let curv = l - 2.0 * c + r;
        if curv < 0.0 {
            x0 += 0.5 * dx * (l - r) / curv;
        }
    }
    if grid.boundary == Boundary::Periodic {
        x0 = x0.rem_euclid(grid.length);
    }
    let psi = occ[peak_idx].sqrt();

    // Half-maximum crossings on either side, linearly interpolated.
    let half = 0.5 * occ[peak_idx];
    let crossing = |dir: isize| -> Option<f64> {
        let mut k = 0isize;
        loop {
            let (a, b) = (at(p + dir * k)?, at(p + dir * (k + 1))?);
            if b <= half {
                return Some(dx * (k as f64 + (a - half) / (a - b)));
            }
            k += 1;
            if k as usize >= grid.points / 2 {
                return None;
            }
        }
    };
    let fwhm = match (crossing(-1), crossing(1)) {
        (Some(l), Some(r)) => l + r,
        (Some(s), None) | (None, Some(s)) => 2.0 * s,
        (None, None) => return Err(Error::NoPeak { ratio: 1.0 }),
    };
    let w = (fwhm / (2.0 * SQRT_2.acosh())).max(0.5 * dx);

    // Weighted quadratic fit θ(ξ) ≈ φ + vξ + dξ² of the unwrapped phase.
    let reach = ((3.0 * w / dx).ceil() as isize).max(2).min(grid.points as isize / 2 - 1);
    let phase_at = |j: isize| wrap_index(grid, j).map(|k| field.psi[k].arg());
    let mut samples = vec![(0.0, field.psi[peak_idx].arg(), occ[peak_idx])];
    for dir in [-1isize, 1] {
        let mut prev = field.psi[peak_idx].arg();
        for k in 1..=reach {
            let j = p + dir * k;
            let (Some(raw), Some(idx)) = (phase_at(j), wrap_index(grid, j)) else { break };
            let mut theta = raw;
            while theta - prev > PI {
                theta -= 2.0 * PI;
            }
            while theta - prev < -PI {
                theta += 2.0 * PI;
            }
            prev = theta;
            samples.push((grid.displacement(grid.x(idx), x0), theta, occ[idx]));
        }
    }
    let mut ata = Matrix3::<f64>::zeros();
    let mut atb = Vector3::<f64>::zeros();
    for &(xi, theta, weight) in &samples {
        let row = Vector3::new(1.0, xi, xi * xi);
        ata += weight * row * row.transpose();
        atb += weight * theta * row;
    }
    let (phi, v, d) = match ata.lu().solve(&atb) {
        Some(sol) => (sol[0], sol[1], sol[2]),
        None => (field.psi[peak_idx].arg(), 0.0, 0.0),
    };
    Ok(SolitonCoords { psi, x0, v, w, d, phi })
}

fn cost(field: &FieldState, c: &SolitonCoords) -> f64 {
    let grid = &field.grid;
    field
        .psi
        .iter()
        .enumerate()
        .map(|(j, z)| (c.profile(grid.displacement(grid.x(j), c.x0)) - z).norm_sqr())
        .sum()
}

fn from_params(p: &Vector6<f64>) -> SolitonCoords {
    SolitonCoords { psi: p[0], x0: p[1], v: p[2], w: p[3], d: p[4], phi: p[5] }
}

fn to_params(c: &SolitonCoords) -> Vector6<f64> {
    Vector6::new(c.psi, c.x0, c.v, c.w, c.d, c.phi)
}

/// Returns the fitted coordinates, iterations used and whether the
/// iteration terminated on a small step rather than the iteration cap.
fn levenberg_marquardt(field: &FieldState, start: SolitonCoords) -> (SolitonCoords, usize, bool) {
    let grid = &field.grid;
    let mut p = to_params(&start);
    let mut current = cost(field, &start);
    let mut lambda = 1e-3;
    for iter in 0..MAX_ITERATIONS {
        let c = from_params(&p);
        let mut jtj = Matrix6::<f64>::zeros();
        let mut jtr = Vector6::<f64>::zeros();
        for (j, &z) in field.psi.iter().enumerate() {
            let xi = grid.displacement(grid.x(j), c.x0);
            let u = xi / c.w;
            let shape = c.profile(xi) / c.psi.max(f64::MIN_POSITIVE);
            let model = shape * c.psi;
            let r = model - z;
            let th = u.tanh();
            let iu = C64::new(0.0, 1.0);
            let cols = [
                shape,
                model * (C64::new(th / c.w, 0.0) - iu * (c.v + 2.0 * c.d * xi)),
                iu * xi * model,
                model * (th * u / c.w),
                iu * xi * xi * model,
                iu * model,
            ];
            for a in 0..6 {
                jtr[a] += cols[a].re * r.re + cols[a].im * r.im;
                for b in a..6 {
                    jtj[(a, b)] += cols[a].re * cols[b].re + cols[a].im * cols[b].im;
                }
            }
        }
        for a in 0..6 {
            for b in 0..a {
                jtj[(a, b)] = jtj[(b, a)];
            }
        }
        let mut accepted = false;
        while lambda < 1e16 {
            let mut damped = jtj;
            for a in 0..6 {
                damped[(a, a)] += lambda * jtj[(a, a)].max(1e-300);
            }
            let Some(step) = damped.cholesky().map(|ch| ch.solve(&(-jtr))) else {
                lambda *= 10.0;
                continue;
            };
            let trial = p + step;
            let tc = from_params(&trial);
            let trial_cost = if tc.w > 0.0 && tc.psi >= 0.0 { cost(field, &tc) } else { f64::INFINITY };
            if trial_cost <= current {
                let small = step.iter().zip(p.iter()).all(|(s, x)| s.abs() <= 1e-12 * (x.abs() + 1e-3));
                let stalled = current - trial_cost <= 1e-15 * current;
                p = trial;
                current = trial_cost;
                lambda = (lambda * 0.3).max(1e-12);
                accepted = true;
                if small || stalled {
                    return (finish(grid, &p), iter + 1, true);
                }
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            // No descent direction left: at a (numerical) minimum.
            return (finish(grid, &p), iter + 1, true);
        }
    }
    (finish(grid, &p), MAX_ITERATIONS, false)
}

fn finish(grid: &Grid, p: &Vector6<f64>) -> SolitonCoords {
    let mut c = from_params(p);
    c.phi = (c.phi + PI).rem_euclid(2.0 * PI) - PI;
    if grid.boundary == Boundary::Periodic {
        c.x0 = c.x0.rem_euclid(grid.length);
    }
    c
}

/// Root mean square of `|Ψ|² − |Ψ̄|²` over the grid relative to `max|Ψ|²`.
pub fn occupation_residual(field: &FieldState, c: &SolitonCoords) -> f64 {
    let grid = &field.grid;
    let mut sq = 0.0;
    let mut peak: f64 = 0.0;
    for (j, z) in field.psi.iter().enumerate() {
        let model = c.profile(grid.displacement(grid.x(j), c.x0)).norm_sqr();
        let data = z.norm_sqr();
        peak = peak.max(data);
        sq += (data - model).powi(2);
    }
    if peak == 0.0 {
        f64::INFINITY
    } else {
        (sq / field.psi.len() as f64).sqrt() / peak
    }
}

/// Fits every snapshot independently (in parallel).
pub fn fit_series(series: &TimeSeries<FieldState>) -> Vec<Result<FitResult>> {
    series.states.par_iter().map(fit_soliton).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DampingEstimate {
    pub v_start: f64,
    pub v_end: f64,
    pub horizon: f64,
    /// `[v(t0 + T) − v(t0)]/T`.
    pub dv_dt: f64,
    /// `v̇/(v̄J)` with the mean of the two endpoint velocities.
    pub relative_rate: f64,
}

/// Finite-difference velocity change between two coordinate sets.
pub fn damping_from_coords(start: &SolitonCoords, end: &SolitonCoords, horizon: f64, hopping: f64) -> Result<DampingEstimate> {
    if !(horizon > 0.0) {
        return Err(Error::InvalidParameter(format!("horizon must be > 0, got {horizon}")));
    }
    let dv_dt = (end.v - start.v) / horizon;
    let mean = 0.5 * (start.v + end.v);
    Ok(DampingEstimate {
        v_start: start.v,
        v_end: end.v,
        horizon,
        dv_dt,
        relative_rate: dv_dt / (mean * hopping),
    })
}

/// `|Ψ|²`-weighted mean of the local wavenumber, i.e. momentum per particle
/// `∫Im(Ψ*Ψ_x)dx / ∫|Ψ|²dx`. For the ansatz this is exactly `v`.
///
/// Bond phases `arg(Ψ_j* Ψ_{j+1})/dx` are used instead of a difference
/// quotient so that a linear phase is reproduced without discretization error.
pub fn mean_wavenumber(field: &FieldState) -> f64 {
    let psi = &field.psi;
    let n = psi.len();
    let bonds = match field.grid.boundary {
        Boundary::Periodic => n,
        Boundary::Open => n - 1,
    };
    let (mut num, mut den) = (0.0, 0.0);
    for j in 0..bonds {
        let link = psi[j].conj() * psi[(j + 1) % n];
        let weight = link.norm();
        if weight > 0.0 {
            num += weight * link.arg();
            den += weight;
        }
    }
    if den == 0.0 {
        0.0
    } else {
        num / (den * field.dx())
    }
}

/// Velocity change over a horizon measured two ways.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VelocityDamping {
    /// `v` taken as the mean wavenumber ([`mean_wavenumber`]).
    pub momentum: DampingEstimate,
    /// `v` taken as the fitted phase slope.
    pub fitted: DampingEstimate,
    pub fit_start: FitResult,
    pub fit_end: FitResult,
}

impl VelocityDamping {
    /// Both fits below the residual threshold.
    pub fn fits_converged(&self) -> bool {
        self.fit_start.converged && self.fit_end.converged
    }
}

/// Compares the first snapshot with the one closest to `t0 + horizon`.
///
/// Over short horizons the fitted phase slope lags the soliton's momentum:
/// the friction term imprints an odd phase distortion that a least-squares
/// phase fit weights differently from the particle-weighted mean. The
/// momentum-based estimate is the one that corresponds to the collective
/// coordinate `v`; both are reported.
pub fn velocity_damping_estimate(traj: &TimeSeries<FieldState>, horizon: f64, hopping: f64) -> Result<VelocityDamping> {
    let (t0, first) = traj
        .iter()
        .next()
        .ok_or_else(|| Error::InvalidParameter("empty trajectory".into()))?;
    let (t1, last) = traj.nearest(t0 + horizon).expect("non-empty");
    if !(t1 > t0) {
        return Err(Error::SpanTooShort { span: 0.0, window: horizon });
    }
    let fit_start = fit_soliton(first)?;
    let fit_end = fit_soliton(last)?;
    let fitted = damping_from_coords(&fit_start.coords, &fit_end.coords, t1 - t0, hopping)?;
    let with_v = |c: &SolitonCoords, v: f64| SolitonCoords { v, ..*c };
    let momentum = damping_from_coords(
        &with_v(&fit_start.coords, mean_wavenumber(first)),
        &with_v(&fit_end.coords, mean_wavenumber(last)),
        t1 - t0,
        hopping,
    )?;
    Ok(VelocityDamping { momentum, fitted, fit_start, fit_end })
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EnvelopeSeries {
    pub window_length: f64,
    /// Window centers.
    pub times: Vec<f64>,
    /// `max |ψ/ψ_SS − 1|` per window.
    pub max_dev: Vec<f64>,
}

impl EnvelopeSeries {
    /// Whether the envelope never grows by more than `slack` from `skip` on.
    pub fn non_increasing_after(&self, skip: usize, slack: f64) -> bool {
        self.max_dev.iter().skip(skip).collect::<Vec<_>>().windows(2).all(|w| *w[1] <= *w[0] + slack)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("t_center,max_dev\n");
        for (t, m) in self.times.iter().zip(&self.max_dev) {
            s.push_str(&format!("{t:.16e},{m:.16e}\n"));
        }
        s
    }
}

/// Splits `[t_first, t_last]` into consecutive full windows and records the
/// largest relative amplitude deviation in each.
pub fn envelope_deviation(times: &[f64], psi: &[f64], psi_ss: f64, window_length: f64) -> Result<EnvelopeSeries> {
    if times.len() != psi.len() {
        return Err(Error::LengthMismatch { expected: times.len(), got: psi.len() });
    }
    if !(window_length > 0.0) {
        return Err(Error::InvalidParameter(format!("window length must be > 0, got {window_length}")));
    }
    let (Some(&start), Some(&end)) = (times.first(), times.last()) else {
        return Err(Error::SpanTooShort { span: 0.0, window: window_length });
    };
    let span = end - start;
    let slack = 1e-9 * window_length;
    if span + slack < window_length {
        return Err(Error::SpanTooShort { span, window: window_length });
    }
    let windows = ((span + slack) / window_length).floor() as usize;
    let mut max_dev = vec![0.0f64; windows];
    for (&t, &a) in times.iter().zip(psi) {
        let k = (((t - start) / window_length).floor() as usize).min(windows.saturating_sub(1));
        if t - start > windows as f64 * window_length + slack {
            continue;
        }
        max_dev[k] = max_dev[k].max((a / psi_ss - 1.0).abs());
    }
    let centers = (0..windows).map(|k| start + (k as f64 + 0.5) * window_length).collect();
    Ok(EnvelopeSeries { window_length, times: centers, max_dev })
}

/// Mean spacing of successive upward crossings of `level`, or `None` with
/// fewer than two crossings. Crossing times are linearly interpolated.
pub fn oscillation_period(times: &[f64], values: &[f64], level: f64) -> Option<f64> {
    let mut ups = Vec::new();
    for k in 1..times.len().min(values.len()) {
        let (a, b) = (values[k - 1] - level, values[k] - level);
        if a < 0.0 && b >= 0.0 {
            ups.push(times[k - 1] + (times[k] - times[k - 1]) * a / (a - b));
        }
    }
    (ups.len() >= 2).then(|| (ups[ups.len() - 1] - ups[0]) / (ups.len() - 1) as f64)
}

/// Uniformly sampled occupation `|·|²` starting at `x = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupationProfile {
    pub spacing: f64,
    pub values: Vec<f64>,
    pub boundary: Boundary,
}

impl OccupationProfile {
    pub fn from_field(field: &FieldState) -> Self {
        Self { spacing: field.dx(), values: field.occupation(), boundary: field.grid.boundary }
    }

    /// Lattice sites `n = 0 … L−1` placed at `x = n`.
    pub fn from_lattice(b: &[C64], boundary: Boundary) -> Self {
        Self { spacing: 1.0, values: b.iter().map(|z| z.norm_sqr()).collect(), boundary }
    }

    pub fn length(&self) -> f64 {
        match self.boundary {
            Boundary::Periodic => self.spacing * self.values.len() as f64,
            Boundary::Open => self.spacing * (self.values.len() as f64 - 1.0),
        }
    }

    pub fn peak(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Linear interpolation at `x`.
    pub fn at(&self, x: f64) -> f64 {
        let n = self.values.len();
        let s = x / self.spacing;
        let k = s.floor();
        let frac = s - k;
        let k = k as isize;
        let get = |i: isize| -> f64 {
            match self.boundary {
                Boundary::Periodic => self.values[i.rem_euclid(n as isize) as usize],
                Boundary::Open => self.values[i.clamp(0, n as isize - 1) as usize],
            }
        };
        (1.0 - frac) * get(k) + frac * get(k + 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileMetrics {
    pub linf_abs: f64,
    /// Root mean square difference.
    pub l2_abs: f64,
    pub linf_rel: f64,
    pub l2_rel: f64,
    /// Larger of the two peaks, used for the relative values.
    pub peak: f64,
}

impl ProfileMetrics {
    pub fn agrees(&self) -> bool {
        self.linf_rel < AGREEMENT_THRESHOLD
    }
}

/// Compares two occupation profiles on the coarser of the two grids.
pub fn compare_profiles(a: &OccupationProfile, b: &OccupationProfile) -> Result<ProfileMetrics> {
    let (la, lb) = (a.length(), b.length());
    if a.boundary != b.boundary || (la - lb).abs() > 1e-9 * la.max(lb) || a.values.is_empty() || b.values.is_empty() {
        return Err(Error::IncompatibleDomains(format!(
            "lengths {la} and {lb}, boundaries {:?} and {:?}",
            a.boundary, b.boundary
        )));
    }
    let (coarse, fine) = if a.spacing >= b.spacing { (a, b) } else { (b, a) };
    let mut linf: f64 = 0.0;
    let mut sq = 0.0;
    for (k, &c) in coarse.values.iter().enumerate() {
        let diff = (c - fine.at(k as f64 * coarse.spacing)).abs();
        linf = linf.max(diff);
        sq += diff * diff;
    }
    let l2 = (sq / coarse.values.len() as f64).sqrt();
    let peak = a.peak().max(b.peak());
    let rel = |x: f64| if peak > 0.0 { x / peak } else { 0.0 };
    Ok(ProfileMetrics { linf_abs: linf, l2_abs: l2, linf_rel: rel(linf), l2_rel: rel(l2), peak })
}
