//! Littlewood–Paley bumps, spatial / temporal / modulation projections and
//! fractional weights, applied as Fourier multipliers.
//!
//! Temporal symbols are evaluated in an interaction frame: a space-time field
//! `u` is written as `u(t, ξ) = e^{i t h(ξ)} w(t, ξ)`, the profile `w` is
//! transformed in time, and the symbol is evaluated at `ω = ν + h(ξ)` where
//! `ν` runs over the temporal lattice. With `h = 0` this is the plain periodic
//! transform; with `h = -|ξ|²` (resp. `h = |ξ|`) free Schrödinger (resp.
//! half-wave) solutions have constant profiles and need no temporal
//! resolution of `|ξ|²`. For band-limited periodic profiles every frame gives
//! the same result.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fft::{self, Direction};
use crate::grid::{Field, Grid, GridError, Repr, SpacetimeField, C64};
use crate::par;

/// Default `2^8` separation between spatial and modulation scales.
pub const DEFAULT_MODULATION_MARGIN: f64 = 256.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MultiplierError {
    #[error("spatial scale {lambda} exceeds the resolved maximum {lambda_max}")]
    ScaleTooLarge { lambda: f64, lambda_max: f64 },
    #[error("{0} is not a dyadic scale (power of two)")]
    NotDyadic(f64),
    #[error("temporal symbol {0} applied to a single-time field")]
    TemporalOnField(String),
    #[error(transparent)]
    Grid(#[from] GridError),
}

fn psi(r: f64) -> f64 {
    if r <= 0.5 || r >= 2.0 {
        0.0
    } else {
        (-1.0 / (r - 0.5) - 1.0 / (2.0 - r)).exp()
    }
}

/// Dyadic bump: smooth, supported in `(1/2, 2)`, with `Σ_{k∈ℤ} φ(2^k r) = 1`
/// for every `r > 0`.
pub fn bump(r: f64) -> f64 {
    if !(r > 0.5 && r < 2.0) {
        return 0.0;
    }
    // Reduce to the representative in [1, 2); only it and its half can be
    // inside the support of ψ.
    let rr = if r >= 1.0 { r } else { 2.0 * r };
    psi(r) / (psi(rr) + psi(rr / 2.0))
}

/// `Σ_{k≥0} φ(2^k r)`: equals 1 on `[0, 1]`, `1 - φ(r/2)` on `(1, 2)`, 0 beyond.
pub fn low_pass(r: f64) -> f64 {
    if r <= 1.0 {
        1.0
    } else if r >= 2.0 {
        0.0
    } else {
        1.0 - bump(r / 2.0)
    }
}

/// Smooth step with `rho(t) + rho(-t) = 1`, equal to 0 for `t ≤ -1` and 1 for
/// `t ≥ 1`.
pub fn rho(t: f64) -> f64 {
    if t <= -1.0 {
        return 0.0;
    }
    if t >= 1.0 {
        return 1.0;
    }
    let x = (t + 1.0) / 2.0;
    let a = (-1.0 / x).exp();
    let b = (-1.0 / (1.0 - x)).exp();
    a / (a + b)
}

/// A power of two, `2^k` with `k ∈ ℤ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DyadicScale {
    exp: i32,
}

impl DyadicScale {
    pub fn pow2(exp: i32) -> Self {
        DyadicScale { exp }
    }

    pub fn new(value: f64) -> Result<Self, MultiplierError> {
        if !(value.is_finite() && value > 0.0) {
            return Err(MultiplierError::NotDyadic(value));
        }
        let e = value.log2().round();
        if (2f64.powi(e as i32) - value).abs() > 1e-12 * value {
            return Err(MultiplierError::NotDyadic(value));
        }
        Ok(DyadicScale { exp: e as i32 })
    }

    pub fn value(self) -> f64 {
        2f64.powi(self.exp)
    }

    pub fn exponent(self) -> i32 {
        self.exp
    }
}

impl fmt::Display for DyadicScale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", fmt_num(self.value()))
    }
}

pub(crate) fn fmt_num(x: f64) -> String {
    if x == x.round() && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{}", x)
    }
}

/// How temporal symbols are evaluated; see the module docs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Frame {
    Lab,
    Schrodinger,
    Wave,
}

impl Frame {
    /// Phase rate `h(ξ)` of the frame.
    pub fn rate(self, xi_norm: f64) -> f64 {
        match self {
            Frame::Lab => 0.0,
            Frame::Schrodinger => -xi_norm * xi_norm,
            Frame::Wave => xi_norm,
        }
    }
}

/// The multiplier kinds used by the norms and estimates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum MultiplierSymbol {
    /// `P_λ = φ(|ξ|/λ)`; for `λ = 1` the inhomogeneous low block.
    P(DyadicScale),
    /// `P_{≤λ}`, supported in `|ξ| < 2λ`.
    PLe(DyadicScale),
    /// `P^(t)_μ = φ(|ω|/μ)`.
    Pt(DyadicScale),
    PtLe(DyadicScale),
    /// `C_μ = φ(|i∂_t + Δ|/μ)`.
    C(DyadicScale),
    CLe(DyadicScale),
    CGt(DyadicScale),
    /// `C_{≤(λ/margin)²} P_λ`.
    PN {
        lambda: DyadicScale,
        margin: f64,
    },
    /// `C_{>(λ/margin)²} P_λ`.
    PF {
        lambda: DyadicScale,
        margin: f64,
    },
    /// `(λ + |∂_t|)^a`.
    TemporalWeight {
        a: f64,
        lambda: f64,
    },
    /// `((λ + |∂_t|)/(λ² + |∂_t|))^a`.
    RatioWeight {
        a: f64,
        lambda: f64,
    },
    /// `⟨∇⟩^s`.
    Bessel(f64),
    /// `|∇|^s` (zero mode set to 0).
    Riesz(f64),
    /// `i∂_t + Δ`, symbol `-ω - |ξ|²`.
    Schrodinger,
    /// `i∂_t + |∇|`, symbol `-ω + |ξ|`.
    HalfWave,
}

impl MultiplierSymbol {
    pub fn pn(lambda: f64, margin: f64) -> Result<Self, MultiplierError> {
        Ok(MultiplierSymbol::PN {
            lambda: DyadicScale::new(lambda)?,
            margin,
        })
    }

    pub fn pf(lambda: f64, margin: f64) -> Result<Self, MultiplierError> {
        Ok(MultiplierSymbol::PF {
            lambda: DyadicScale::new(lambda)?,
            margin,
        })
    }

    /// Canonical short name used in report columns.
    pub fn name(&self) -> String {
        use MultiplierSymbol::*;
        match self {
            P(l) => format!("P[{l}]"),
            PLe(l) => format!("P<=[{l}]"),
            Pt(l) => format!("Pt[{l}]"),
            PtLe(l) => format!("Pt<=[{l}]"),
            C(l) => format!("C[{l}]"),
            CLe(l) => format!("C<=[{l}]"),
            CGt(l) => format!("C>[{l}]"),
            PN { lambda, margin } => format!("PN[{lambda},{}]", fmt_num(*margin)),
            PF { lambda, margin } => format!("PF[{lambda},{}]", fmt_num(*margin)),
            TemporalWeight { a, lambda } => format!("W^a[{},{}]", fmt_num(*a), fmt_num(*lambda)),
            RatioWeight { a, lambda } => format!("Q^a[{},{}]", fmt_num(*a), fmt_num(*lambda)),
            Bessel(s) => format!("<D>^[{}]", fmt_num(*s)),
            Riesz(s) => format!("|D|^[{}]", fmt_num(*s)),
            Schrodinger => "L_S".to_string(),
            HalfWave => "L_W".to_string(),
        }
    }

    /// True if the symbol depends on the temporal frequency.
    pub fn is_temporal(&self) -> bool {
        use MultiplierSymbol::*;
        !matches!(self, P(_) | PLe(_) | Bessel(_) | Riesz(_))
    }

    /// True if the symbol depends on `ξ` (and is therefore zeroed on the
    /// spatial Nyquist rows).
    pub fn is_spatial(&self) -> bool {
        use MultiplierSymbol::*;
        !matches!(
            self,
            Pt(_) | PtLe(_) | TemporalWeight { .. } | RatioWeight { .. }
        )
    }

    pub fn is_projection(&self) -> bool {
        use MultiplierSymbol::*;
        matches!(
            self,
            P(_) | PLe(_) | Pt(_) | PtLe(_) | C(_) | CLe(_) | CGt(_) | PN { .. } | PF { .. }
        )
    }

    /// Largest spatial scale the symbol localizes to, if any.
    fn spatial_scale(&self) -> Option<f64> {
        use MultiplierSymbol::*;
        match self {
            P(l) | PLe(l) => Some(l.value()),
            PN { lambda, .. } | PF { lambda, .. } => Some(lambda.value()),
            _ => None,
        }
    }

    /// Symbol value at temporal frequency `omega` and spatial frequency `|ξ|`.
    pub fn eval(&self, omega: f64, xi: f64) -> f64 {
        use MultiplierSymbol::*;
        let modulation = (omega + xi * xi).abs();
        match self {
            P(l) => spatial_block(xi, l.value()),
            PLe(l) => low_pass(xi / l.value()),
            Pt(l) => bump(omega.abs() / l.value()),
            PtLe(l) => low_pass(omega.abs() / l.value()),
            C(l) => bump(modulation / l.value()),
            CLe(l) => low_pass(modulation / l.value()),
            CGt(l) => 1.0 - low_pass(modulation / l.value()),
            PN { lambda, margin } => {
                let mu = (lambda.value() / margin).powi(2);
                low_pass(modulation / mu) * spatial_block(xi, lambda.value())
            }
            PF { lambda, margin } => {
                let mu = (lambda.value() / margin).powi(2);
                (1.0 - low_pass(modulation / mu)) * spatial_block(xi, lambda.value())
            }
            TemporalWeight { a, lambda } => (lambda + omega.abs()).powf(*a),
            RatioWeight { a, lambda } => {
                ((lambda + omega.abs()) / (lambda * lambda + omega.abs())).powf(*a)
            }
            Bessel(s) => (1.0 + xi * xi).powf(s / 2.0),
            Riesz(s) => {
                if xi == 0.0 {
                    0.0
                } else {
                    xi.powf(*s)
                }
            }
            Schrodinger => -omega - xi * xi,
            HalfWave => -omega + xi,
        }
    }

    fn check_scale(&self, grid: &Grid) -> Result<(), MultiplierError> {
        if let Some(l) = self.spatial_scale() {
            let max = grid.lambda_max();
            if l > max {
                return Err(MultiplierError::ScaleTooLarge {
                    lambda: l,
                    lambda_max: max,
                });
            }
        }
        Ok(())
    }

    /// Apply a purely spatial symbol to a single-time field.
    pub fn apply(&self, field: &Field) -> Result<Field, MultiplierError> {
        if self.is_temporal() {
            return Err(MultiplierError::TemporalOnField(self.name()));
        }
        self.check_scale(field.grid())?;
        let repr = field.repr();
        let mut out = field.to_repr(Repr::Spectral);
        let g = field.grid().clone();
        par::for_each_mut(out.data_mut(), |i, z| {
            if g.is_nyquist(i) {
                *z = C64::new(0.0, 0.0);
            } else {
                *z *= self.eval(0.0, g.xi_sq(i).sqrt());
            }
        });
        Ok(out.into_repr(repr))
    }

    /// Apply to a space-time field using the Schrödinger frame.
    pub fn apply_spacetime(&self, u: &SpacetimeField) -> Result<SpacetimeField, MultiplierError> {
        self.apply_spacetime_in(u, Frame::Schrodinger)
    }

    /// Apply to a space-time field, evaluating temporal dependence in `frame`.
    /// The output keeps the representation of the input.
    pub fn apply_spacetime_in(
        &self,
        u: &SpacetimeField,
        frame: Frame,
    ) -> Result<SpacetimeField, MultiplierError> {
        self.check_scale(u.grid())?;
        let (tr, sr) = (u.time_repr(), u.space_repr());
        let mut w = u.to_repr(Repr::Physical, Repr::Spectral);
        let spatial = self.is_spatial();
        let grid = u.grid().clone();
        if self.is_temporal() {
            apply_ts(w.data_mut(), &grid, frame, spatial, |om, xi| {
                self.eval(om, xi)
            });
        } else {
            apply_spatial_ts(w.data_mut(), &grid, |xi| self.eval(0.0, xi));
        }
        Ok(w.into_repr(tr, sr))
    }
}

impl fmt::Display for MultiplierSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// `P_λ` symbol with the inhomogeneous convention at `λ = 1`.
pub fn spatial_block(xi: f64, lambda: f64) -> f64 {
    if lambda <= 1.0 {
        low_pass(xi)
    } else {
        bump(xi / lambda)
    }
}

/// Multiply every time slice of time-physical, space-spectral data by a
/// real spatial symbol `f(|ξ|)`; Nyquist rows are zeroed.
pub fn apply_spatial_ts<F>(data: &mut [C64], grid: &Grid, f: F)
where
    F: Fn(f64) -> f64 + Sync + Send,
{
    let m = grid.spatial_len();
    let sym = spatial_symbol(grid, f);
    par::for_each_mut(data, |i, z| *z *= sym[i % m]);
}

/// Table of `f(|ξ|)` over the spatial modes, zero on Nyquist rows.
pub fn spatial_symbol<F>(grid: &Grid, f: F) -> Vec<f64>
where
    F: Fn(f64) -> f64 + Sync + Send,
{
    par::map_range(grid.spatial_len(), |k| {
        if grid.is_nyquist(k) {
            0.0
        } else {
            f(grid.xi_sq(k).sqrt())
        }
    })
}

/// Multiply time-physical, space-spectral data by a symbol `f(ω, |ξ|)`
/// evaluated in `frame`. If `zero_nyquist` is set the spatial Nyquist rows
/// are cleared.
pub fn apply_ts<F>(data: &mut [C64], grid: &Grid, frame: Frame, zero_nyquist: bool, f: F)
where
    F: Fn(f64, f64) -> f64 + Sync + Send,
{
    let m = grid.spatial_len();
    let nt = grid.nt();
    let xi: Vec<f64> = grid.xi_norm_table();
    let rate: Vec<f64> = xi.iter().map(|&x| frame.rate(x)).collect();
    let nu = grid.omega_table();
    to_profile(data, grid, &rate, Direction::Forward);
    fft::fft_axis(data, 1, nt, m, Direction::Forward);
    let nyq = if zero_nyquist {
        Some(grid.nyquist_mask())
    } else {
        None
    };
    par::for_each_chunk_mut(data, m, |j, row| {
        for (k, z) in row.iter_mut().enumerate() {
            if nyq.as_ref().is_some_and(|n| n[k]) {
                *z = C64::new(0.0, 0.0);
            } else {
                *z *= f(nu[j] + rate[k], xi[k]);
            }
        }
    });
    fft::fft_axis(data, 1, nt, m, Direction::Inverse);
    to_profile(data, grid, &rate, Direction::Inverse);
}

/// Forward: `w = e^{-i t h} u`; inverse: `u = e^{i t h} w`.
pub(crate) fn to_profile(data: &mut [C64], grid: &Grid, rate: &[f64], dir: Direction) {
    if rate.iter().all(|&r| r == 0.0) {
        return;
    }
    let m = grid.spatial_len();
    let times = grid.times();
    let sign = match dir {
        Direction::Forward => -1.0,
        Direction::Inverse => 1.0,
    };
    par::for_each_chunk_mut(data, m, |j, row| {
        let t = times[j];
        for (k, z) in row.iter_mut().enumerate() {
            *z *= C64::from_polar(1.0, sign * t * rate[k]);
        }
    });
}

/// `(λ + |∂_t|)^a u`.
pub fn temporal_weight_apply(a: f64, lambda: f64, u: &SpacetimeField) -> SpacetimeField {
    MultiplierSymbol::TemporalWeight { a, lambda }
        .apply_spacetime(u)
        .expect("temporal weights have no scale restriction")
}

/// `((λ + |∂_t|)/(λ² + |∂_t|))^a u`.
pub fn ratio_weight_apply(a: f64, lambda: f64, u: &SpacetimeField) -> SpacetimeField {
    MultiplierSymbol::RatioWeight { a, lambda }
        .apply_spacetime(u)
        .expect("ratio weights have no scale restriction")
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;
    use std::sync::Arc;

    #[test]
    fn bump_support_and_partition() {
        assert_eq!(bump(0.4), 0.0);
        assert_eq!(bump(0.5), 0.0);
        assert_eq!(bump(2.0), 0.0);
        let r = 1.37;
        let s: f64 = (-20..=20).map(|k| bump(r / 2f64.powi(k))).sum();
        assert!((s - 1.0).abs() < 1e-12);
        for i in 0..=1000 {
            let r = 1.0 + i as f64 / 1000.0;
            assert!((bump(r) + bump(r / 2.0) - 1.0).abs() < 1e-12, "r = {r}");
        }
    }

    #[test]
    fn low_pass_matches_bump_sum() {
        for i in 1..400 {
            let r = i as f64 * 0.01;
            let s: f64 = (0..40).map(|k| bump(r * 2f64.powi(k))).sum();
            assert!((low_pass(r) - s).abs() < 1e-12, "r = {r}");
        }
    }

    #[test]
    fn rho_is_a_partition() {
        for i in 0..=200 {
            let t = -1.5 + 3.0 * i as f64 / 200.0;
            assert!((rho(t) + rho(-t) - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn names() {
        assert_eq!(MultiplierSymbol::P(DyadicScale::pow2(3)).name(), "P[8]");
        assert_eq!(
            MultiplierSymbol::CLe(DyadicScale::pow2(6)).name(),
            "C<=[64]"
        );
        assert_eq!(
            MultiplierSymbol::TemporalWeight {
                a: 0.25,
                lambda: 8.0
            }
            .name(),
            "W^a[0.25,8]"
        );
    }

    #[test]
    fn temporal_symbol_on_field_is_an_error() {
        let g = Arc::new(crate::grid::make_grid(1, 16, 2.0 * PI, 2, (0.0, 1.0)).unwrap());
        let f = Field::zeros(&g, Repr::Physical);
        let e = MultiplierSymbol::C(DyadicScale::pow2(2))
            .apply(&f)
            .unwrap_err();
        assert!(matches!(e, MultiplierError::TemporalOnField(_)));
        let e = MultiplierSymbol::P(DyadicScale::pow2(4))
            .apply(&f)
            .unwrap_err();
        assert!(matches!(e, MultiplierError::ScaleTooLarge { .. }));
    }

    #[test]
    fn dyadic_scale_validation() {
        assert_eq!(DyadicScale::new(0.25).unwrap().exponent(), -2);
        assert!(DyadicScale::new(3.0).is_err());
        assert!(DyadicScale::new(0.0).is_err());
    }
}
