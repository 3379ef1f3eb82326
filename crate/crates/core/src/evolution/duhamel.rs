//! Duhamel integrals `𝓘₀[F](t) = -i∫₀ᵗ e^{i(t-s)Δ}F(s)ds` and
//! `𝓙₀[G](t) = -i∫₀ᵗ e^{i(t-s)|∇|}G(s)ds`.
//!
//! Each spatial mode is handled with an exact integrating factor, so only
//! the slowly varying envelope `e^{-ish(ξ)}F̂(s, ξ)` is integrated by a
//! cumulative quadrature on the time lattice.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fft::{transpose_into, Direction};
use crate::grid::{Field, Repr, SpacetimeField, C64};
use crate::multipliers::{to_profile, Frame};
use crate::par;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DuhamelError {
    #[error("t = 0 is not a lattice time of t_span = ({0}, {1}); pass an explicit base index")]
    BaseNotOnLattice(f64, f64),
    #[error("base index {0} out of range")]
    BadBase(usize),
    #[error("cumulative quadrature needs at least 4 time samples, got {0}")]
    TooFewSamples(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Quadrature {
    Trapezoid,
    /// Four-point cumulative rule, fourth order on smooth envelopes.
    Fourth,
}

/// Where the integral starts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BasePoint {
    /// `t = 0`, which must be a lattice time.
    Zero,
    /// Explicitly shifted base at the given time index.
    Index(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DuhamelOptions {
    pub quadrature: Quadrature,
    pub base: BasePoint,
}

impl Default for DuhamelOptions {
    fn default() -> Self {
        DuhamelOptions {
            quadrature: Quadrature::Fourth,
            base: BasePoint::Zero,
        }
    }
}

/// `𝓘₀[F]` with default options.
pub fn duhamel_i0(f: &SpacetimeField) -> Result<SpacetimeField, DuhamelError> {
    duhamel(f, Frame::Schrodinger, DuhamelOptions::default())
}

/// `𝓙₀[G]` with default options.
pub fn duhamel_j0(g: &SpacetimeField) -> Result<SpacetimeField, DuhamelError> {
    duhamel(g, Frame::Wave, DuhamelOptions::default())
}

/// `-i e^{ith} ∫_base^t e^{-ish} F̂(s) ds` per mode, where `h` is the phase
/// rate of `frame`. The output is time-physical, space-spectral.
pub fn duhamel(
    f: &SpacetimeField,
    frame: Frame,
    opts: DuhamelOptions,
) -> Result<SpacetimeField, DuhamelError> {
    let grid = f.grid().clone();
    let nt = grid.nt();
    if nt < 4 && opts.quadrature == Quadrature::Fourth {
        return Err(DuhamelError::TooFewSamples(nt));
    }
    let base = match opts.base {
        BasePoint::Zero => grid.time_index(0.0).ok_or(DuhamelError::BaseNotOnLattice(
            grid.t_span().0,
            grid.t_span().1,
        ))?,
        BasePoint::Index(j) if j < nt => j,
        BasePoint::Index(j) => return Err(DuhamelError::BadBase(j)),
    };
    let m = grid.spatial_len();
    let rate: Vec<f64> = grid
        .xi_norm_table()
        .iter()
        .map(|&x| frame.rate(x))
        .collect();
    let mut w = f.to_repr(Repr::Physical, Repr::Spectral);
    to_profile(w.data_mut(), &grid, &rate, Direction::Forward);
    let mut cols = vec![C64::new(0.0, 0.0); nt * m];
    transpose_into(w.data(), nt, m, &mut cols);
    let h = grid.dt();
    par::for_each_chunk_mut(&mut cols, nt, |_, col| {
        cumulative(col, base, h, opts.quadrature);
    });
    transpose_into(&cols, m, nt, w.data_mut());
    to_profile(w.data_mut(), &grid, &rate, Direction::Inverse);
    let minus_i = C64::new(0.0, -1.0);
    par::for_each_mut(w.data_mut(), |_, z| *z *= minus_i);
    Ok(w)
}

/// Replace `f` by its cumulative integral from index `base`, in place.
pub fn cumulative(f: &mut [C64], base: usize, h: f64, rule: Quadrature) {
    let n = f.len();
    let pieces: Vec<C64> = (0..n - 1).map(|j| interval(f, j, h, rule)).collect();
    f[base] = C64::new(0.0, 0.0);
    let mut acc = C64::new(0.0, 0.0);
    for j in base..n - 1 {
        acc += pieces[j];
        f[j + 1] = acc;
    }
    acc = C64::new(0.0, 0.0);
    for j in (0..base).rev() {
        acc -= pieces[j];
        f[j] = acc;
    }
}

/// `∫_{t_j}^{t_{j+1}} f` from samples.
fn interval(f: &[C64], j: usize, h: f64, rule: Quadrature) -> C64 {
    let n = f.len();
    match rule {
        Quadrature::Trapezoid => (f[j] + f[j + 1]) * (h / 2.0),
        Quadrature::Fourth => {
            let c = h / 24.0;
            if j == 0 {
                (f[0] * 9.0 + f[1] * 19.0 - f[2] * 5.0 + f[3]) * c
            } else if j + 2 >= n {
                (f[j + 1] * 9.0 + f[j] * 19.0 - f[j - 1] * 5.0 + f[j - 2]) * c
            } else {
                (-f[j - 1] + f[j] * 13.0 + f[j + 1] * 13.0 - f[j + 2]) * c
            }
        }
    }
}

/// `-i e^{ith}∫_0^t e^{-ish}F̂(s)ds` at a single time, streaming the forcing
/// through composite Simpson on `steps` (even) subintervals. Memory stays at
/// a few spatial fields, so fine time steps are affordable.
pub fn duhamel_at<F>(forcing: F, frame: Frame, t: f64, steps: usize) -> Field
where
    F: Fn(f64) -> Field,
{
    let steps = steps.max(2) + steps % 2;
    let h = t / steps as f64;
    let first = forcing(0.0).into_repr(Repr::Spectral);
    let grid = first.grid().clone();
    let rate: Vec<f64> = grid
        .xi_norm_table()
        .iter()
        .map(|&x| frame.rate(x))
        .collect();
    let mut acc = vec![C64::new(0.0, 0.0); grid.spatial_len()];
    for j in 0..=steps {
        let s = j as f64 * h;
        let f = if j == 0 {
            first.clone()
        } else {
            forcing(s).into_repr(Repr::Spectral)
        };
        let w = if j == 0 || j == steps {
            1.0
        } else if j % 2 == 1 {
            4.0
        } else {
            2.0
        } * h
            / 3.0;
        let fd = f.data();
        par::for_each_mut(&mut acc, |k, z| {
            *z += fd[k] * C64::from_polar(w, -s * rate[k]);
        });
    }
    par::for_each_mut(&mut acc, |k, z| {
        *z *= C64::from_polar(1.0, t * rate[k]) * C64::new(0.0, -1.0);
    });
    Field::from_vec(&grid, acc, Repr::Spectral).expect("length")
}
