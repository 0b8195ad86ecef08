//! Continuum limit of the effective chain,
//!
//! ```text
//! i ∂Ψ/∂t = g|Ψ|²Ψ − J Ψ_xx − Jγ Im(Ψ* Ψ_xx) Ψ,
//! ```
//!
//! discretized by method of lines with the three-point Laplacian.
//!
//! Grids start at `x = 0`. A periodic grid of length `L` with `n` points has
//! `dx = L/n`; an open grid has `dx = L/(n − 1)` and both end points are pinned
//! to zero (Dirichlet). With that convention the rectangle (periodic) and
//! trapezoid (open) sums for `N` are conserved exactly by the semi-discrete
//! flow, and the forward-difference energy is its exact Lyapunov function.

use serde::{Deserialize, Serialize};

use crate::collective::SolitonCoords;
use crate::params::{Boundary, EffectiveParams};
use crate::{Error, Result, C64};

const I: C64 = C64::new(0.0, 1.0);

/// Smallest grid accepted.
pub const MIN_POINTS: usize = 16;

/// Tail-to-peak ratio above which a sampled soliton counts as not contained.
pub const CONTAINMENT_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    /// Domain length in lattice units.
    pub length: f64,
    pub points: usize,
    #[serde(default)]
    pub boundary: Boundary,
}

impl Grid {
    pub fn new(length: f64, points: usize, boundary: Boundary) -> Result<Self> {
        let grid = Self { length, points, boundary };
        grid.validate()?;
        Ok(grid)
    }

    /// Grid of the given length with spacing as close as possible to `dx`.
    pub fn with_spacing(length: f64, dx: f64, boundary: Boundary) -> Result<Self> {
        if !(dx > 0.0) {
            return Err(Error::InvalidParameter(format!("dx must be > 0, got {dx}")));
        }
        let cells = (length / dx).round() as usize;
        let points = match boundary {
            Boundary::Periodic => cells,
            Boundary::Open => cells + 1,
        };
        Self::new(length, points, boundary)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length > 0.0 && self.length.is_finite()) {
            return Err(Error::InvalidParameter(format!("domain length must be > 0, got {}", self.length)));
        }
        if self.points < MIN_POINTS {
            return Err(Error::InvalidParameter(format!(
                "need at least {MIN_POINTS} grid points, got {}",
                self.points
            )));
        }
        Ok(())
    }

    pub fn dx(&self) -> f64 {
        match self.boundary {
            Boundary::Periodic => self.length / self.points as f64,
            Boundary::Open => self.length / (self.points - 1) as f64,
        }
    }

    pub fn x(&self, j: usize) -> f64 {
        j as f64 * self.dx()
    }

    pub fn coordinates(&self) -> Vec<f64> {
        (0..self.points).map(|j| self.x(j)).collect()
    }

    /// Signed displacement `x − x0`; minimum image on periodic grids.
    pub fn displacement(&self, x: f64, x0: f64) -> f64 {
        let d = x - x0;
        match self.boundary {
            Boundary::Periodic => d - self.length * (d / self.length).round(),
            Boundary::Open => d,
        }
    }

    /// Quadrature weight of point `j`.
    pub fn weight(&self, j: usize) -> f64 {
        let dx = self.dx();
        match self.boundary {
            Boundary::Open if j == 0 || j + 1 == self.points => 0.5 * dx,
            _ => dx,
        }
    }

    fn same_as(&self, other: &Grid) -> bool {
        self.points == other.points && self.boundary == other.boundary && self.length == other.length
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldState {
    pub grid: Grid,
    pub psi: Vec<C64>,
}

impl FieldState {
    pub fn new(grid: Grid, psi: Vec<C64>) -> Result<Self> {
        grid.validate()?;
        if psi.len() != grid.points {
            return Err(Error::LengthMismatch { expected: grid.points, got: psi.len() });
        }
        Ok(Self { grid, psi })
    }

    pub fn zeros(grid: Grid) -> Result<Self> {
        Self::new(grid, vec![C64::default(); grid.points])
    }

    pub fn dx(&self) -> f64 {
        self.grid.dx()
    }

    /// `|Ψ_j|²`.
    pub fn occupation(&self) -> Vec<f64> {
        self.psi.iter().map(|z| z.norm_sqr()).collect()
    }

    /// Index and value of `max |Ψ|`.
    pub fn peak(&self) -> (usize, f64) {
        self.psi
            .iter()
            .enumerate()
            .map(|(j, z)| (j, z.norm()))
            .fold((0, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best })
    }

    pub fn max_amplitude(&self) -> f64 {
        self.peak().1
    }

    pub fn particle_number(&self) -> f64 {
        particle_number(self)
    }

    pub fn with_psi(&self, psi: Vec<C64>) -> Result<Self> {
        Self::new(self.grid, psi)
    }

    pub fn ensure_compatible(&self, other: &FieldState) -> Result<()> {
        if self.grid.same_as(&other.grid) {
            Ok(())
        } else {
            Err(Error::IncompatibleDomains(format!("{:?} vs {:?}", self.grid, other.grid)))
        }
    }
}

/// `Ψ_xx` with the three-point stencil; pinned end points on open grids get 0.
pub fn second_difference(psi: &[C64], grid: &Grid, out: &mut [C64]) {
    let n = psi.len();
    let inv_dx2 = 1.0 / (grid.dx() * grid.dx());
    for j in 1..n - 1 {
        out[j] = (psi[j - 1] - 2.0 * psi[j] + psi[j + 1]) * inv_dx2;
    }
    match grid.boundary {
        Boundary::Periodic => {
            out[0] = (psi[n - 1] - 2.0 * psi[0] + psi[1]) * inv_dx2;
            out[n - 1] = (psi[n - 2] - 2.0 * psi[n - 1] + psi[0]) * inv_dx2;
        }
        Boundary::Open => {
            out[0] = C64::default();
            out[n - 1] = C64::default();
        }
    }
}

/// Semi-discrete right-hand side on `grid`.
pub fn pcdnse_rhs(psi: &[C64], grid: &Grid, eff: &EffectiveParams, out: &mut [C64]) {
    second_difference(psi, grid, out);
    let j = eff.hopping;
    for (o, &z) in out.iter_mut().zip(psi) {
        let lap = *o;
        let friction = (z.conj() * lap).im;
        *o = -I * (eff.g * z.norm_sqr() * z - j * lap - j * eff.gamma * friction * z);
    }
    if grid.boundary == Boundary::Open {
        out[0] = C64::default();
        let last = out.len() - 1;
        out[last] = C64::default();
    }
}

/// Closure suitable for [`crate::integrate::OdeProblem`].
pub fn pcdnse_system(grid: Grid, eff: EffectiveParams) -> impl FnMut(f64, &[C64], &mut [C64]) -> Result<()> + Send {
    move |_t, psi, out| {
        if psi.len() != grid.points {
            return Err(Error::LengthMismatch { expected: grid.points, got: psi.len() });
        }
        pcdnse_rhs(psi, &grid, &eff, out);
        Ok(())
    }
}

/// `∫|Ψ|² dx`: rectangle rule (periodic) or trapezoid rule (open).
pub fn particle_number(field: &FieldState) -> f64 {
    field
        .psi
        .iter()
        .enumerate()
        .map(|(j, z)| field.grid.weight(j) * z.norm_sqr())
        .sum()
}

/// `∫ [J|Ψ_x|² + (g/2)|Ψ|⁴] dx` with forward differences for `Ψ_x`.
pub fn field_energy(field: &FieldState, eff: &EffectiveParams) -> f64 {
    let psi = &field.psi;
    let n = psi.len();
    let dx = field.dx();
    let mut bonds = 0.0;
    for j in 0..n - 1 {
        bonds += (psi[j + 1] - psi[j]).norm_sqr();
    }
    if field.grid.boundary == Boundary::Periodic {
        bonds += (psi[0] - psi[n - 1]).norm_sqr();
    }
    let quartic: f64 = psi
        .iter()
        .enumerate()
        .map(|(j, z)| field.grid.weight(j) * z.norm_sqr().powi(2))
        .sum();
    eff.hopping * bonds / dx + 0.5 * eff.g * quartic
}

/// `dE/dt = −2γJ² ∫ (Im Ψ* Ψ_xx)² dx` for the semi-discrete flow.
pub fn field_energy_rate(field: &FieldState, eff: &EffectiveParams) -> f64 {
    let mut lap = vec![C64::default(); field.psi.len()];
    second_difference(&field.psi, &field.grid, &mut lap);
    let dx = field.dx();
    let s: f64 = field.psi.iter().zip(&lap).map(|(z, l)| (z.conj() * l).im.powi(2)).sum();
    -2.0 * eff.gamma * eff.hopping * eff.hopping * dx * s
}

/// Samples `Ψ̄(x) = ψ exp(i[(x−x0)v + (x−x0)²d + φ]) sech((x−x0)/w)`.
///
/// Returns the field and the largest boundary-to-peak amplitude ratio; values
/// above [`CONTAINMENT_TOLERANCE`] mean the soliton does not fit the domain.
pub fn make_soliton_field(coords: &SolitonCoords, grid: &Grid) -> Result<(FieldState, f64)> {
    coords.validate()?;
    grid.validate()?;
    let psi: Vec<C64> = (0..grid.points)
        .map(|j| coords.profile(grid.displacement(grid.x(j), coords.x0)))
        .collect();
    let tail = soliton_tail_ratio(coords, grid);
    let mut field = FieldState::new(*grid, psi)?;
    if grid.boundary == Boundary::Open {
        let n = field.psi.len();
        field.psi[0] = C64::default();
        field.psi[n - 1] = C64::default();
    }
    Ok((field, tail))
}

/// Envelope ratio `sech(ξ_max/w)` at the point farthest from the center.
pub fn soliton_tail_ratio(coords: &SolitonCoords, grid: &Grid) -> f64 {
    if coords.psi == 0.0 {
        return 0.0;
    }
    let far = match grid.boundary {
        Boundary::Periodic => 0.5 * grid.length,
        Boundary::Open => coords.x0.min(grid.length - coords.x0),
    };
    1.0 / (far / coords.w).cosh()
}

/// Sum of several fields sampled on one grid.
pub fn superpose(fields: &[FieldState]) -> Result<FieldState> {
    let first = fields.first().ok_or_else(|| Error::InvalidParameter("nothing to superpose".into()))?;
    let mut psi = first.psi.clone();
    for f in &fields[1..] {
        first.ensure_compatible(f)?;
        for (a, b) in psi.iter_mut().zip(&f.psi) {
            *a += b;
        }
    }
    first.with_psi(psi)
}
