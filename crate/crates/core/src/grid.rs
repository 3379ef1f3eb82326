//! Discrete torus `[0, L)^d x [t0, t1)`, its frequency lattice, and the
//! field containers that live on it.
//!
//! All transforms are unitary. A physical sample array `u_j` and its
//! spectral coefficients `û_k` therefore satisfy `Σ|u_j|² = Σ|û_k|²`, and the
//! continuum `L²` norm is recovered by multiplying with the cell volume
//! `dx^d` (resp. `dt · dx^d` in space-time). Temporal coefficients are
//! indexed by the angular frequency `ω` of the synthesis basis `e^{iωt}`;
//! under this convention `i∂_t` has symbol `-ω`, the free Schrödinger flow
//! `e^{itΔ}` sits on `ω = -|ξ|²`, and the half-wave flow `e^{it|∇|}` on
//! `ω = |ξ|`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fft::{self, Direction};
use crate::par;

pub type C64 = Complex64;

/// Default memory budget for a single space-time field (1 GiB).
pub const DEFAULT_BUDGET_BYTES: u64 = 1 << 30;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("{what} = {value} is not an admissible transform size ({policy:?})")]
    BadSize {
        what: &'static str,
        value: usize,
        policy: SizePolicy,
    },
    #[error("spatial dimension {0} is outside 1..=4")]
    BadDimension(usize),
    #[error("{0} must be positive and finite")]
    NonPositive(&'static str),
    #[error("space-time field needs {needed} bytes, budget is {budget}; shrink d, n or nt")]
    BudgetExceeded { needed: u64, budget: u64 },
    #[error("representation mismatch: expected {expected:?}, found {found:?}")]
    ReprMismatch { expected: Repr, found: Repr },
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("data length {found} does not match grid size {expected}")]
    LengthMismatch { expected: usize, found: usize },
}

/// Which transform lengths a grid accepts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SizePolicy {
    /// Powers of two only; dyadic blocks nest exactly.
    PowerOfTwo,
    /// Even sizes of the form `2^a 3^b 5^c`, for refinement studies.
    Smooth,
}

impl SizePolicy {
    fn admits(self, v: usize) -> bool {
        match self {
            SizePolicy::PowerOfTwo => v >= 2 && v.is_power_of_two(),
            SizePolicy::Smooth => {
                if v < 2 || !v.is_multiple_of(2) {
                    return false;
                }
                let mut r = v;
                for p in [2, 3, 5] {
                    while r.is_multiple_of(p) {
                        r /= p;
                    }
                }
                r == 1
            }
        }
    }
}

/// Immutable description of the space-time lattice.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    n: usize,
    box_length: f64,
    nt: usize,
    t_span: (f64, f64),
}

/// Validating constructor for [`Grid`].
#[derive(Clone, Debug)]
pub struct GridBuilder {
    dim: usize,
    n: usize,
    box_length: f64,
    nt: usize,
    t_span: (f64, f64),
    budget_bytes: u64,
    spatial_policy: SizePolicy,
}

impl GridBuilder {
    pub fn new(dim: usize, n: usize) -> Self {
        GridBuilder {
            dim,
            n,
            box_length: 2.0 * PI,
            nt: 2,
            t_span: (0.0, 1.0),
            budget_bytes: DEFAULT_BUDGET_BYTES,
            spatial_policy: SizePolicy::PowerOfTwo,
        }
    }

    pub fn box_length(mut self, l: f64) -> Self {
        self.box_length = l;
        self
    }

    pub fn time(mut self, nt: usize, t_span: (f64, f64)) -> Self {
        self.nt = nt;
        self.t_span = t_span;
        self
    }

    pub fn budget_bytes(mut self, b: u64) -> Self {
        self.budget_bytes = b;
        self
    }

    /// Allow non-power-of-two spatial sizes (the time axis stays dyadic).
    pub fn smooth_spatial_sizes(mut self) -> Self {
        self.spatial_policy = SizePolicy::Smooth;
        self
    }

    pub fn build(self) -> Result<Grid, GridError> {
        if !(1..=4).contains(&self.dim) {
            return Err(GridError::BadDimension(self.dim));
        }
        if !self.spatial_policy.admits(self.n) {
            return Err(GridError::BadSize {
                what: "n",
                value: self.n,
                policy: self.spatial_policy,
            });
        }
        if !SizePolicy::PowerOfTwo.admits(self.nt) {
            return Err(GridError::BadSize {
                what: "nt",
                value: self.nt,
                policy: SizePolicy::PowerOfTwo,
            });
        }
        if !(self.box_length.is_finite() && self.box_length > 0.0) {
            return Err(GridError::NonPositive("box_length"));
        }
        let (t0, t1) = self.t_span;
        if !(t0.is_finite() && t1.is_finite() && t1 > t0) {
            return Err(GridError::NonPositive("t1 - t0"));
        }
        let grid = Grid {
            dim: self.dim,
            n: self.n,
            box_length: self.box_length,
            nt: self.nt,
            t_span: self.t_span,
        };
        let needed = grid.spacetime_bytes();
        if needed > self.budget_bytes {
            return Err(GridError::BudgetExceeded {
                needed,
                budget: self.budget_bytes,
            });
        }
        Ok(grid)
    }
}

/// Build a validated grid with the default memory budget.
pub fn make_grid(
    dim: usize,
    n: usize,
    box_length: f64,
    nt: usize,
    t_span: (f64, f64),
) -> Result<Grid, GridError> {
    GridBuilder::new(dim, n)
        .box_length(box_length)
        .time(nt, t_span)
        .build()
}

impl Grid {
    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn box_length(&self) -> f64 {
        self.box_length
    }
    pub fn nt(&self) -> usize {
        self.nt
    }
    pub fn t_span(&self) -> (f64, f64) {
        self.t_span
    }
    pub fn period(&self) -> f64 {
        self.t_span.1 - self.t_span.0
    }
    pub fn dx(&self) -> f64 {
        self.box_length / self.n as f64
    }
    pub fn dt(&self) -> f64 {
        self.period() / self.nt as f64
    }
    /// `dx^d`, the quadrature weight of one spatial sample.
    pub fn cell_volume(&self) -> f64 {
        self.dx().powi(self.dim as i32)
    }
    pub fn box_volume(&self) -> f64 {
        self.box_length.powi(self.dim as i32)
    }
    /// Frequency lattice spacing `2π/L`.
    pub fn xi_step(&self) -> f64 {
        2.0 * PI / self.box_length
    }
    pub fn spatial_len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }
    pub fn spacetime_len(&self) -> usize {
        self.nt * self.spatial_len()
    }
    pub fn spacetime_bytes(&self) -> u64 {
        self.spacetime_len() as u64 * std::mem::size_of::<C64>() as u64
    }

    /// Largest dyadic `λ` with `2λ ≤ π n / L`, i.e. `P_λ` is resolved.
    pub fn lambda_max(&self) -> f64 {
        let cap = PI * self.n as f64 / self.box_length / 2.0;
        let mut lam = 1.0;
        while 2.0 * lam <= cap * (1.0 + 1e-12) {
            lam *= 2.0;
        }
        if lam > cap * (1.0 + 1e-12) {
            0.0
        } else {
            lam
        }
    }

    /// Dyadic spatial scales `1, 2, ..., λ_max`.
    pub fn dyadic_scales(&self) -> Vec<f64> {
        let max = self.lambda_max();
        let mut out = Vec::new();
        let mut lam = 1.0;
        while lam <= max {
            out.push(lam);
            lam *= 2.0;
        }
        out
    }

    /// Signed integer wavenumber of FFT index `k` along an axis of length `len`.
    /// The unpaired Nyquist index maps to `-len/2`.
    pub fn signed_index(k: usize, len: usize) -> i64 {
        if k < len / 2 {
            k as i64
        } else {
            k as i64 - len as i64
        }
    }

    /// Per-axis integer wavenumbers of a flat spatial index.
    pub fn wave_vector(&self, idx: usize) -> [i64; 4] {
        let mut out = [0i64; 4];
        let mut rem = idx;
        for axis in (0..self.dim).rev() {
            out[axis] = Self::signed_index(rem % self.n, self.n);
            rem /= self.n;
        }
        out
    }

    /// Flat spatial index of an integer wave vector (wrapped onto the lattice).
    pub fn index_of(&self, k: &[i64]) -> usize {
        let n = self.n as i64;
        k.iter()
            .take(self.dim)
            .fold(0usize, |acc, &c| acc * self.n + c.rem_euclid(n) as usize)
    }

    /// Physical frequency vector `ξ` of a flat spatial index.
    pub fn xi(&self, idx: usize) -> [f64; 4] {
        let k = self.wave_vector(idx);
        let s = self.xi_step();
        [
            k[0] as f64 * s,
            k[1] as f64 * s,
            k[2] as f64 * s,
            k[3] as f64 * s,
        ]
    }

    pub fn xi_sq(&self, idx: usize) -> f64 {
        let k = self.wave_vector(idx);
        let s = self.xi_step();
        k.iter().map(|&c| (c as f64 * s).powi(2)).sum()
    }

    /// True if any component sits on the unpaired Nyquist row.
    pub fn is_nyquist(&self, idx: usize) -> bool {
        let half = -(self.n as i64 / 2);
        self.wave_vector(idx)[..self.dim].contains(&half)
    }

    /// `|ξ|²` for every spatial index.
    pub fn xi_sq_table(&self) -> Vec<f64> {
        par::map_range(self.spatial_len(), |i| self.xi_sq(i))
    }

    /// `|ξ|` for every spatial index.
    pub fn xi_norm_table(&self) -> Vec<f64> {
        par::map_range(self.spatial_len(), |i| self.xi_sq(i).sqrt())
    }

    pub fn nyquist_mask(&self) -> Vec<bool> {
        par::map_range(self.spatial_len(), |i| self.is_nyquist(i))
    }

    /// Angular temporal frequency of temporal index `m`.
    pub fn omega(&self, m: usize) -> f64 {
        2.0 * PI * Self::signed_index(m, self.nt) as f64 / self.period()
    }

    pub fn omega_table(&self) -> Vec<f64> {
        (0..self.nt).map(|m| self.omega(m)).collect()
    }

    pub fn is_time_nyquist(&self, m: usize) -> bool {
        self.nt > 1 && m == self.nt / 2
    }

    /// Sample times `t0 + j dt`, `j = 0..nt`.
    pub fn times(&self) -> Vec<f64> {
        (0..self.nt)
            .map(|j| self.t_span.0 + j as f64 * self.dt())
            .collect()
    }

    /// Lattice index of time `t`, if `t` is a sample point.
    pub fn time_index(&self, t: f64) -> Option<usize> {
        let x = (t - self.t_span.0) / self.dt();
        let j = x.round();
        if (x - j).abs() < 1e-9 && j >= 0.0 && (j as usize) < self.nt {
            Some(j as usize)
        } else {
            None
        }
    }

    /// Centred sample coordinates along one axis, `-L/2 + j dx`.
    pub fn axis_positions(&self) -> Vec<f64> {
        (0..self.n)
            .map(|j| -self.box_length / 2.0 + j as f64 * self.dx())
            .collect()
    }

    /// Physical position of a flat spatial index.
    pub fn position(&self, idx: usize) -> [f64; 4] {
        let mut out = [0.0; 4];
        let mut rem = idx;
        for axis in (0..self.dim).rev() {
            out[axis] = -self.box_length / 2.0 + (rem % self.n) as f64 * self.dx();
            rem /= self.n;
        }
        out
    }

    /// Same grid with a different time lattice (no budget check).
    pub fn with_time(&self, nt: usize, t_span: (f64, f64)) -> Result<Grid, GridError> {
        GridBuilder {
            dim: self.dim,
            n: self.n,
            box_length: self.box_length,
            nt,
            t_span,
            budget_bytes: u64::MAX,
            spatial_policy: SizePolicy::Smooth,
        }
        .build()
    }
}

/// Whether an axis currently holds samples or Fourier coefficients.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Repr {
    Physical,
    Spectral,
}

/// Complex samples of one function on the spatial lattice.
#[derive(Clone, Debug)]
pub struct Field {
    grid: Arc<Grid>,
    data: Vec<C64>,
    repr: Repr,
}

impl Field {
    pub fn zeros(grid: &Arc<Grid>, repr: Repr) -> Self {
        Field {
            grid: grid.clone(),
            data: vec![C64::new(0.0, 0.0); grid.spatial_len()],
            repr,
        }
    }

    pub fn from_vec(grid: &Arc<Grid>, data: Vec<C64>, repr: Repr) -> Result<Self, GridError> {
        if data.len() != grid.spatial_len() {
            return Err(GridError::LengthMismatch {
                expected: grid.spatial_len(),
                found: data.len(),
            });
        }
        Ok(Field {
            grid: grid.clone(),
            data,
            repr,
        })
    }

    /// Sample `f(x)` at the centred physical positions.
    pub fn from_fn<F>(grid: &Arc<Grid>, f: F) -> Self
    where
        F: Fn(&[f64]) -> C64 + Sync + Send,
    {
        let d = grid.dim();
        let data = par::map_range(grid.spatial_len(), |i| f(&grid.position(i)[..d]));
        Field {
            grid: grid.clone(),
            data,
            repr: Repr::Physical,
        }
    }

    /// Build spectral coefficients from `f(ξ)`; Nyquist rows are left at zero.
    pub fn from_spectral_fn<F>(grid: &Arc<Grid>, f: F) -> Self
    where
        F: Fn(&[f64]) -> C64 + Sync + Send,
    {
        let d = grid.dim();
        let data = par::map_range(grid.spatial_len(), |i| {
            if grid.is_nyquist(i) {
                C64::new(0.0, 0.0)
            } else {
                f(&grid.xi(i)[..d])
            }
        });
        Field {
            grid: grid.clone(),
            data,
            repr: Repr::Spectral,
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }
    pub fn repr(&self) -> Repr {
        self.repr
    }
    pub fn data(&self) -> &[C64] {
        &self.data
    }
    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }
    pub fn into_data(self) -> Vec<C64> {
        self.data
    }

    fn flip(mut self, dir: Direction, to: Repr) -> Self {
        let g = &self.grid;
        fft::fft_spatial(&mut self.data, 1, g.n(), g.dim(), dir);
        self.repr = to;
        self
    }

    /// Forward spatial transform; the field must be physical.
    pub fn transform_space(self) -> Result<Self, GridError> {
        expect_repr(Repr::Physical, self.repr)?;
        Ok(self.flip(Direction::Forward, Repr::Spectral))
    }

    /// Inverse spatial transform; the field must be spectral.
    pub fn inverse_transform_space(self) -> Result<Self, GridError> {
        expect_repr(Repr::Spectral, self.repr)?;
        Ok(self.flip(Direction::Inverse, Repr::Physical))
    }

    /// Convert to the requested representation (no-op if already there).
    pub fn into_repr(self, repr: Repr) -> Self {
        match (self.repr, repr) {
            (Repr::Physical, Repr::Spectral) => self.flip(Direction::Forward, Repr::Spectral),
            (Repr::Spectral, Repr::Physical) => self.flip(Direction::Inverse, Repr::Physical),
            _ => self,
        }
    }

    pub fn to_repr(&self, repr: Repr) -> Self {
        self.clone().into_repr(repr)
    }

    /// Continuum `L²` norm (valid in either representation).
    pub fn l2_norm(&self) -> f64 {
        let cv = self.grid.cell_volume();
        (par::sum_range(self.data.len(), |i| self.data[i].norm_sqr()) * cv).sqrt()
    }

    pub fn same_grid(&self, other: &Field) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid
    }

    /// `self += alpha * other` (representations must agree).
    pub fn axpy(&mut self, alpha: C64, other: &Field) -> Result<(), GridError> {
        if !self.same_grid(other) {
            return Err(GridError::GridMismatch);
        }
        expect_repr(self.repr, other.repr)?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
        Ok(())
    }

    pub fn scale(&mut self, alpha: C64) {
        for z in &mut self.data {
            *z *= alpha;
        }
    }

    /// Max modulus of the difference to `other` after matching representations.
    pub fn max_abs_diff(&self, other: &Field) -> f64 {
        let o = other.to_repr(self.repr);
        self.data
            .iter()
            .zip(&o.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// Complex samples on the full `(t, x)` lattice, laid out as `[nt][n^d]`.
#[derive(Clone, Debug)]
pub struct SpacetimeField {
    grid: Arc<Grid>,
    data: Vec<C64>,
    time: Repr,
    space: Repr,
}

impl SpacetimeField {
    pub fn zeros(grid: &Arc<Grid>, time: Repr, space: Repr) -> Self {
        SpacetimeField {
            grid: grid.clone(),
            data: vec![C64::new(0.0, 0.0); grid.spacetime_len()],
            time,
            space,
        }
    }

    pub fn from_vec(
        grid: &Arc<Grid>,
        data: Vec<C64>,
        time: Repr,
        space: Repr,
    ) -> Result<Self, GridError> {
        if data.len() != grid.spacetime_len() {
            return Err(GridError::LengthMismatch {
                expected: grid.spacetime_len(),
                found: data.len(),
            });
        }
        Ok(SpacetimeField {
            grid: grid.clone(),
            data,
            time,
            space,
        })
    }

    /// Stack spatial fields (one per time sample) into a space-time field.
    pub fn from_slices(grid: &Arc<Grid>, slices: &[Field]) -> Result<Self, GridError> {
        if slices.len() != grid.nt() {
            return Err(GridError::LengthMismatch {
                expected: grid.nt(),
                found: slices.len(),
            });
        }
        let space = slices.first().map(|f| f.repr()).unwrap_or(Repr::Physical);
        let mut data = Vec::with_capacity(grid.spacetime_len());
        for s in slices {
            let sg = s.grid();
            if sg.dim() != grid.dim() || sg.n() != grid.n() || sg.box_length() != grid.box_length()
            {
                return Err(GridError::GridMismatch);
            }
            data.extend_from_slice(&s.to_repr(space).data);
        }
        Ok(SpacetimeField {
            grid: grid.clone(),
            data,
            time: Repr::Physical,
            space,
        })
    }

    /// Sample `f(t, x)` on the physical lattice.
    pub fn from_fn<F>(grid: &Arc<Grid>, f: F) -> Self
    where
        F: Fn(f64, &[f64]) -> C64 + Sync + Send,
    {
        let m = grid.spatial_len();
        let d = grid.dim();
        let times = grid.times();
        let data = par::map_range(grid.spacetime_len(), |i| {
            f(times[i / m], &grid.position(i % m)[..d])
        });
        SpacetimeField {
            grid: grid.clone(),
            data,
            time: Repr::Physical,
            space: Repr::Physical,
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }
    pub fn time_repr(&self) -> Repr {
        self.time
    }
    pub fn space_repr(&self) -> Repr {
        self.space
    }
    pub fn data(&self) -> &[C64] {
        &self.data
    }
    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    /// Spatial slice at time (or temporal-frequency) index `j`.
    pub fn slice(&self, j: usize) -> Field {
        let m = self.grid.spatial_len();
        let g = Arc::new(self.grid.as_ref().clone());
        Field {
            grid: g,
            data: self.data[j * m..(j + 1) * m].to_vec(),
            repr: self.space,
        }
    }

    /// Slice sharing the given spatial grid handle.
    pub fn slice_on(&self, j: usize, grid: &Arc<Grid>) -> Field {
        let m = self.grid.spatial_len();
        Field {
            grid: grid.clone(),
            data: self.data[j * m..(j + 1) * m].to_vec(),
            repr: self.space,
        }
    }

    pub fn slice_data(&self, j: usize) -> &[C64] {
        let m = self.grid.spatial_len();
        &self.data[j * m..(j + 1) * m]
    }

    pub fn slice_data_mut(&mut self, j: usize) -> &mut [C64] {
        let m = self.grid.spatial_len();
        &mut self.data[j * m..(j + 1) * m]
    }

    fn space_fft(&mut self, dir: Direction) {
        let g = &self.grid;
        fft::fft_spatial(&mut self.data, g.nt(), g.n(), g.dim(), dir);
    }

    fn time_fft(&mut self, dir: Direction) {
        let g = &self.grid;
        fft::fft_axis(&mut self.data, 1, g.nt(), g.spatial_len(), dir);
    }

    pub fn transform_space(mut self) -> Result<Self, GridError> {
        expect_repr(Repr::Physical, self.space)?;
        self.space_fft(Direction::Forward);
        self.space = Repr::Spectral;
        Ok(self)
    }

    pub fn inverse_transform_space(mut self) -> Result<Self, GridError> {
        expect_repr(Repr::Spectral, self.space)?;
        self.space_fft(Direction::Inverse);
        self.space = Repr::Physical;
        Ok(self)
    }

    pub fn transform_time(mut self) -> Result<Self, GridError> {
        expect_repr(Repr::Physical, self.time)?;
        self.time_fft(Direction::Forward);
        self.time = Repr::Spectral;
        Ok(self)
    }

    pub fn inverse_transform_time(mut self) -> Result<Self, GridError> {
        expect_repr(Repr::Spectral, self.time)?;
        self.time_fft(Direction::Inverse);
        self.time = Repr::Physical;
        Ok(self)
    }

    /// Forward transform in both time and space; both axes must be physical.
    pub fn transform_spacetime(self) -> Result<Self, GridError> {
        expect_repr(Repr::Physical, self.space)?;
        self.transform_time()?.transform_space()
    }

    pub fn inverse_transform_spacetime(self) -> Result<Self, GridError> {
        expect_repr(Repr::Spectral, self.space)?;
        self.inverse_transform_time()?.inverse_transform_space()
    }

    /// Convert each axis to the requested representation.
    pub fn into_repr(mut self, time: Repr, space: Repr) -> Self {
        if self.time != time {
            self.time_fft(if time == Repr::Spectral {
                Direction::Forward
            } else {
                Direction::Inverse
            });
            self.time = time;
        }
        if self.space != space {
            self.space_fft(if space == Repr::Spectral {
                Direction::Forward
            } else {
                Direction::Inverse
            });
            self.space = space;
        }
        self
    }

    pub fn to_repr(&self, time: Repr, space: Repr) -> Self {
        self.clone().into_repr(time, space)
    }

    /// Continuum `L²_{t,x}` norm (any representation).
    pub fn l2_norm(&self) -> f64 {
        let w = self.grid.cell_volume() * self.grid.dt();
        (par::sum_range(self.data.len(), |i| self.data[i].norm_sqr()) * w).sqrt()
    }

    /// `sup_t ‖u(t)‖_{L²_x}`; transforms time to physical if needed.
    pub fn linf_l2(&self) -> f64 {
        let u = if self.time == Repr::Physical {
            std::borrow::Cow::Borrowed(self)
        } else {
            std::borrow::Cow::Owned(self.to_repr(Repr::Physical, self.space))
        };
        let m = self.grid.spatial_len();
        let cv = self.grid.cell_volume();
        (0..self.grid.nt())
            .map(|j| {
                (u.data[j * m..(j + 1) * m]
                    .iter()
                    .map(|z| z.norm_sqr())
                    .sum::<f64>()
                    * cv)
                    .sqrt()
            })
            .fold(0.0, f64::max)
    }

    pub fn axpy(&mut self, alpha: C64, other: &SpacetimeField) -> Result<(), GridError> {
        if *self.grid != *other.grid {
            return Err(GridError::GridMismatch);
        }
        expect_repr(self.time, other.time)?;
        expect_repr(self.space, other.space)?;
        par::for_each_mut(&mut self.data, |i, a| *a += alpha * other.data[i]);
        Ok(())
    }

    pub fn scale(&mut self, alpha: C64) {
        par::for_each_mut(&mut self.data, |_, z| *z *= alpha);
    }

    /// Pointwise product in physical space-time.
    pub fn pointwise<F>(&self, other: &SpacetimeField, f: F) -> Result<SpacetimeField, GridError>
    where
        F: Fn(C64, C64) -> C64 + Sync + Send,
    {
        if *self.grid != *other.grid {
            return Err(GridError::GridMismatch);
        }
        let a = self.to_repr(Repr::Physical, Repr::Physical);
        let b = other.to_repr(Repr::Physical, Repr::Physical);
        let data = par::map_range(a.data.len(), |i| f(a.data[i], b.data[i]));
        Ok(SpacetimeField {
            grid: self.grid.clone(),
            data,
            time: Repr::Physical,
            space: Repr::Physical,
        })
    }
}

pub(crate) fn expect_repr(expected: Repr, found: Repr) -> Result<(), GridError> {
    if expected == found {
        Ok(())
    } else {
        Err(GridError::ReprMismatch { expected, found })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lambda_max_examples() {
        let g = make_grid(2, 128, 2.0 * PI, 256, (0.0, 1.0)).unwrap();
        assert_eq!(g.lambda_max(), 32.0);
        let g = make_grid(1, 4096, 64.0 * PI, 1024, (0.0, 1.0)).unwrap();
        assert!((g.xi_step() - 1.0 / 32.0).abs() < 1e-15);
        assert_eq!(g.lambda_max(), 32.0);
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(matches!(
            make_grid(4, 24, 2.0 * PI, 16, (0.0, 1.0)),
            Err(GridError::BadSize { what: "n", .. })
        ));
        assert!(matches!(
            make_grid(1, 16, 2.0 * PI, 12, (0.0, 1.0)),
            Err(GridError::BadSize { what: "nt", .. })
        ));
        assert!(make_grid(5, 16, 1.0, 16, (0.0, 1.0)).is_err());
        assert!(make_grid(1, 16, -1.0, 16, (0.0, 1.0)).is_err());
        assert!(make_grid(1, 16, 1.0, 16, (1.0, 1.0)).is_err());
        assert!(GridBuilder::new(4, 24)
            .smooth_spatial_sizes()
            .build()
            .is_ok());
    }

    #[test]
    fn budget_is_enforced() {
        let err = GridBuilder::new(3, 128)
            .time(1024, (0.0, 1.0))
            .budget_bytes(1 << 20)
            .build()
            .unwrap_err();
        assert!(matches!(err, GridError::BudgetExceeded { .. }));
    }

    #[test]
    fn constant_field_concentrates_on_zero_mode() {
        let g = Arc::new(make_grid(2, 16, 2.0 * PI, 2, (0.0, 1.0)).unwrap());
        let f = Field::from_fn(&g, |_| C64::new(1.0, 0.0))
            .transform_space()
            .unwrap();
        assert!((f.data()[0].re - 16.0).abs() < 1e-12);
        assert!(f.data()[1..].iter().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn tag_mismatch_is_an_error() {
        let g = Arc::new(make_grid(1, 8, 1.0, 2, (0.0, 1.0)).unwrap());
        let f = Field::zeros(&g, Repr::Spectral);
        assert!(matches!(
            f.transform_space(),
            Err(GridError::ReprMismatch { .. })
        ));
    }

    #[test]
    fn wave_vector_round_trip_and_nyquist() {
        let g = make_grid(3, 8, 2.0 * PI, 2, (0.0, 1.0)).unwrap();
        for idx in 0..g.spatial_len() {
            let k = g.wave_vector(idx);
            assert_eq!(g.index_of(&k[..3]), idx);
            let nyq = k[..3].contains(&-4);
            assert_eq!(g.is_nyquist(idx), nyq);
        }
    }
}
