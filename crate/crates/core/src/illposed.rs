//! Regularity region of the data-to-solution map and second-iterate
//! witnesses for its failure to be `C²` outside that region.
//!
//! Two second iterates are tracked:
//!
//! ```text
//! I_λ(t)    = -i∫₀ᵗ e^{i(t-t')Δ}(Re(e^{it'|∇|}g_λ) e^{it'Δ}f_λ) dt'
//! J^{ab}(t) =  ∫₀ᵗ e^{i(t-t')|∇|}|∇|Re(e^{it'Δ}a_λ · conj(e^{it'Δ}b_λ)) dt'
//! ```
//!
//! Witnesses are specified by their continuum Fourier transforms, sampled on
//! the lattice of a periodic box, so `L^{-d}Σ_ξ` plays the role of
//! `(2π)^{-d}∫dξ`. Large frequencies are handled by an exact-in-time lattice
//! mode sum; the FFT route through the evolution primitives serves small `λ`.

use std::sync::Arc;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evolution::duhamel::duhamel_at;
use crate::evolution::propagate::{free_halfwave, free_schrodinger};
use crate::grid::{Field, Grid, Repr, C64};
use crate::multipliers::Frame;
use crate::norms::{sobolev_norm, sobolev_norm_on};
use crate::random::rng_for;
use crate::{fft, par, stats};

/// Slack used when comparing exponents with boundary values.
pub const BOUNDARY_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IllposedError {
    #[error("witness scale λ = {0} must be finite and at least 16")]
    BadLambda(f64),
    #[error("dimension {0} not supported (1..=4)")]
    BadDimension(usize),
    #[error("grid dimension {grid} does not match d = {point}")]
    DimensionMismatch { grid: usize, point: usize },
    #[error("frequencies up to {needed} are needed but the grid only resolves |ξ| < {available}")]
    Unresolved { needed: f64, available: f64 },
    #[error("growth fit needs at least 4 points, got {0}")]
    TooFewPoints(usize),
    #[error("growth fit needs positive λ and values; got ({0}, {1})")]
    NonPositive(f64, f64),
    #[error("time must be finite and non-negative, got {0}")]
    BadTime(f64),
}

/// A point `(s, ℓ)` in dimension `d`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegPoint {
    pub d: usize,
    pub s: f64,
    pub l: f64,
}

impl RegPoint {
    pub fn new(d: usize, s: f64, l: f64) -> Self {
        RegPoint { d, s, l }
    }

    fn half_d(&self) -> f64 {
        self.d as f64 / 2.0
    }

    fn regime(&self) -> Regime {
        let h = self.half_d();
        if (self.s - h).abs() <= BOUNDARY_TOL {
            Regime::Critical
        } else if self.s < h {
            Regime::Sub
        } else {
            Regime::Super
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Regime {
    Sub,
    Critical,
    Super,
}

/// Necessary conditions for a `C²` data-to-solution map, split by the
/// position of `s` relative to `d/2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Condition {
    /// `ℓ ≥ d/2 - 2` when `s < d/2`.
    WaveFloor,
    /// `ℓ > d/2 - 2` when `s = d/2`.
    WaveFloorStrict,
    /// `ℓ ≥ s - 2` when `s > d/2`.
    WaveGap,
    /// `2s ≥ ℓ + (d-2)/2` when `s < d/2`.
    SchrodingerFloor,
    /// `s > ℓ - 1` when `s = d/2`.
    SchrodingerGapStrict,
    /// `s ≥ ℓ - 1` when `s > d/2`.
    SchrodingerGap,
}

impl Condition {
    pub fn describe(&self) -> &'static str {
        match self {
            Condition::WaveFloor => "l >= d/2 - 2 (s < d/2)",
            Condition::WaveFloorStrict => "l > d/2 - 2 (s = d/2)",
            Condition::WaveGap => "l >= s - 2 (s > d/2)",
            Condition::SchrodingerFloor => "2s >= l + (d-2)/2 (s < d/2)",
            Condition::SchrodingerGapStrict => "s > l - 1 (s = d/2)",
            Condition::SchrodingerGap => "s >= l - 1 (s > d/2)",
        }
    }

    /// Which second iterate witnesses the failure.
    pub fn witness(&self) -> &'static str {
        match self {
            Condition::WaveFloor | Condition::WaveFloorStrict | Condition::WaveGap => "I",
            _ => "J",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum RegionClass {
    Admissible,
    Inadmissible { violated: Vec<Condition> },
    ExcludedCorner,
}

impl RegionClass {
    pub fn label(&self) -> &'static str {
        match self {
            RegionClass::Admissible => "admissible",
            RegionClass::Inadmissible { .. } => "inadmissible",
            RegionClass::ExcludedCorner => "excluded_corner",
        }
    }
}

/// Membership in the closed region
/// `ℓ ≥ d/2 - 2`, `max{ℓ - 1, ℓ/2 + (d-2)/4} ≤ s ≤ ℓ + 2` (corners included).
pub fn in_closed_region(p: RegPoint) -> bool {
    let (s, l, h) = (p.s, p.l, p.half_d());
    let tol = BOUNDARY_TOL;
    l >= h - 2.0 - tol
        && s >= l - 1.0 - tol
        && s >= l / 2.0 + (p.d as f64 - 2.0) / 4.0 - tol
        && s <= l + 2.0 + tol
}

/// The two corners `(d/2, d/2 - 2)` and `(d/2, d/2 + 1)` removed from the
/// closed region.
pub fn is_excluded_corner(p: RegPoint) -> bool {
    let h = p.half_d();
    let near = |a: f64, b: f64| (a - b).abs() <= BOUNDARY_TOL;
    near(p.s, h) && (near(p.l, h - 2.0) || near(p.l, h + 1.0))
}

/// The necessary conditions that fail at `p`.
pub fn violated_conditions(p: RegPoint) -> Vec<Condition> {
    let (s, l, h) = (p.s, p.l, p.half_d());
    let tol = BOUNDARY_TOL;
    let mut out = Vec::new();
    match p.regime() {
        Regime::Sub => {
            if l < h - 2.0 - tol {
                out.push(Condition::WaveFloor);
            }
            if 2.0 * s < l + (p.d as f64 - 2.0) / 2.0 - tol {
                out.push(Condition::SchrodingerFloor);
            }
        }
        Regime::Critical => {
            if l <= h - 2.0 + tol {
                out.push(Condition::WaveFloorStrict);
            }
            if s <= l - 1.0 + tol {
                out.push(Condition::SchrodingerGapStrict);
            }
        }
        Regime::Super => {
            if l < s - 2.0 - tol {
                out.push(Condition::WaveGap);
            }
            if s < l - 1.0 - tol {
                out.push(Condition::SchrodingerGap);
            }
        }
    }
    out
}

pub fn classify_region(p: RegPoint) -> RegionClass {
    if is_excluded_corner(p) {
        return RegionClass::ExcludedCorner;
    }
    let violated = violated_conditions(p);
    if in_closed_region(p) && violated.is_empty() {
        RegionClass::Admissible
    } else {
        RegionClass::Inadmissible { violated }
    }
}

/// Default auxiliary exponents `(a, b)` of the adapted spaces at `(s, ℓ)`.
pub fn default_exponents(s: f64, l: f64) -> (f64, f64) {
    let a = if s - l >= 1.0 {
        0.75 * (s - l) - 0.5
    } else {
        0.0
    };
    let b = if s - l > 0.0 {
        0.0
    } else {
        0.5 * (l - s) + 0.5
    };
    (a, b)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum WitnessKind {
    /// Wave data on the shell `λ ≤ |ξ| ≤ 2λ`.
    G,
    /// Schrödinger data on `2 ≤ |ξ| ≤ λ/4`.
    F,
    /// High-frequency Schrödinger part near `±λe₁`.
    A,
    /// Low-frequency Schrödinger part on `2 ≤ |ξ| ≤ λ/8`.
    B,
    /// `a + b`.
    H,
}

/// A witness family member with its continuum Fourier transform.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub kind: WitnessKind,
    pub lambda: f64,
    pub point: RegPoint,
}

impl Witness {
    pub fn new(kind: WitnessKind, lambda: f64, point: RegPoint) -> Result<Self, IllposedError> {
        if !(lambda.is_finite() && lambda >= 16.0) {
            return Err(IllposedError::BadLambda(lambda));
        }
        if !(1..=4).contains(&point.d) {
            return Err(IllposedError::BadDimension(point.d));
        }
        Ok(Witness {
            kind,
            lambda,
            point,
        })
    }

    fn log_weight(&self, r: f64) -> f64 {
        1.0 / (r.powf(self.point.half_d() + self.point.s) * r.ln())
    }

    /// Value of the Fourier transform at `ξ`.
    pub fn value(&self, xi: &[f64]) -> f64 {
        let lam = self.lambda;
        let (s, l, h) = (self.point.s, self.point.l, self.point.half_d());
        let r = norm(xi);
        match self.kind {
            WitnessKind::G => {
                if (lam..=2.0 * lam).contains(&r) {
                    lam.powf(-l - h)
                } else {
                    0.0
                }
            }
            WitnessKind::F => {
                if (2.0..=lam / 4.0).contains(&r) {
                    self.log_weight(r)
                } else {
                    0.0
                }
            }
            WitnessKind::A => {
                let near = |sign: f64| {
                    let mut q = 0.0;
                    for (i, &x) in xi.iter().enumerate() {
                        let c = if i == 0 { sign * lam } else { 0.0 };
                        q += (x - c) * (x - c);
                    }
                    q.sqrt() <= lam / 4.0
                };
                if near(1.0) || near(-1.0) {
                    lam.powf(-s - h)
                } else {
                    0.0
                }
            }
            WitnessKind::B => {
                if (2.0..=lam / 8.0).contains(&r) {
                    self.log_weight(r)
                } else {
                    0.0
                }
            }
            WitnessKind::H => {
                let a = Witness {
                    kind: WitnessKind::A,
                    ..*self
                };
                let b = Witness {
                    kind: WitnessKind::B,
                    ..*self
                };
                a.value(xi) + b.value(xi)
            }
        }
    }

    /// Largest `|ξ|` in the support.
    pub fn support_radius(&self) -> f64 {
        let lam = self.lambda;
        match self.kind {
            WitnessKind::G => 2.0 * lam,
            WitnessKind::F => lam / 4.0,
            WitnessKind::A | WitnessKind::H => 1.25 * lam,
            WitnessKind::B => lam / 8.0,
        }
    }

    /// Sobolev index the family is normalised in.
    pub fn regularity(&self) -> f64 {
        match self.kind {
            WitnessKind::G => self.point.l,
            _ => self.point.s,
        }
    }

    /// Lattice Riemann sum of the transform over the box's dual lattice,
    /// `∫ ŵ(ξ) dξ`.
    pub fn integral(&self, box_length: f64) -> f64 {
        let step = 2.0 * std::f64::consts::PI / box_length;
        let pts = lattice_ball(self.point.d, step, &[0.0; 4], self.support_radius());
        pts.iter()
            .map(|x| self.value(&x[..self.point.d]))
            .sum::<f64>()
            * step.powi(self.point.d as i32)
    }
}

fn norm(xi: &[f64]) -> f64 {
    xi.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Lattice points `step·k` with `|step·k - center| ≤ radius`.
pub fn lattice_ball(d: usize, step: f64, center: &[f64; 4], radius: f64) -> Vec<[f64; 4]> {
    let mut lo = [0i64; 4];
    let mut hi = [0i64; 4];
    for i in 0..d {
        lo[i] = ((center[i] - radius) / step).floor() as i64;
        hi[i] = ((center[i] + radius) / step).ceil() as i64;
    }
    let mut out = Vec::new();
    let mut k = lo;
    loop {
        let mut x = [0.0; 4];
        let mut q = 0.0;
        for i in 0..d {
            x[i] = k[i] as f64 * step;
            q += (x[i] - center[i]).powi(2);
        }
        if q.sqrt() <= radius {
            out.push(x);
        }
        let mut i = 0;
        loop {
            if i == d {
                return out;
            }
            k[i] += 1;
            if k[i] <= hi[i] {
                break;
            }
            k[i] = lo[i];
            i += 1;
        }
    }
}

/// Sample a witness on `grid`. Coefficients are scaled so that the field
/// samples the periodisation of the continuum function.
pub fn make_witness(
    kind: WitnessKind,
    lambda: f64,
    point: RegPoint,
    grid: &Arc<Grid>,
) -> Result<Field, IllposedError> {
    let w = Witness::new(kind, lambda, point)?;
    check_grid(grid, point)?;
    check_resolved(grid, w.support_radius())?;
    let scale = (grid.spatial_len() as f64).sqrt() / grid.box_volume();
    Ok(Field::from_spectral_fn(grid, |xi| {
        C64::new(w.value(xi) * scale, 0.0)
    }))
}

fn check_grid(grid: &Grid, p: RegPoint) -> Result<(), IllposedError> {
    if grid.dim() != p.d {
        return Err(IllposedError::DimensionMismatch {
            grid: grid.dim(),
            point: p.d,
        });
    }
    Ok(())
}

/// Largest resolved `|ξ|`: one lattice step below the Nyquist row.
fn resolved_radius(grid: &Grid) -> f64 {
    (grid.n() as f64 / 2.0 - 1.0) * grid.xi_step()
}

fn check_resolved(grid: &Grid, needed: f64) -> Result<(), IllposedError> {
    let available = resolved_radius(grid);
    if needed > available {
        return Err(IllposedError::Unresolved { needed, available });
    }
    Ok(())
}

/// A second iterate evaluated through FFTs and streamed Duhamel quadrature.
#[derive(Clone, Debug)]
pub struct SecondIterate {
    /// Spectral representation at time `t`.
    pub field: Field,
    /// Full Sobolev norm (`H^s` for `I`, `H^ℓ` for `J`).
    pub norm: f64,
    /// Same norm restricted to the output set of the witness argument.
    pub restricted_norm: f64,
    pub steps: usize,
}

/// Output annulus `5λ/4 ≤ |ξ| ≤ 3λ/2` for `I_λ`.
pub fn in_annulus(xi: &[f64], lambda: f64) -> bool {
    let r = norm(xi);
    r >= 1.25 * lambda && r <= 1.5 * lambda
}

/// Output ball `|ξ - λe₁| ≤ λ/8` for `J^{ab}`.
pub fn in_cap(xi: &[f64], lambda: f64) -> bool {
    let q: f64 = xi
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let c = if i == 0 { lambda } else { 0.0 };
            (x - c) * (x - c)
        })
        .sum();
    q.sqrt() <= lambda / 8.0
}

/// Quadrature steps so that `h·Ω ≤ 0.25` for the fastest profile phase `Ω`.
fn default_steps(t: f64, omega: f64) -> usize {
    let n = (t * omega / 0.25).ceil() as usize;
    (n.max(16) + 1) & !1
}

fn product(a: &Field, b: &Field, f: impl Fn(C64, C64) -> C64 + Sync + Send) -> Field {
    let ap = a.to_repr(Repr::Physical);
    let bp = b.to_repr(Repr::Physical);
    let data = par::map_range(ap.data().len(), |i| f(ap.data()[i], bp.data()[i]));
    let g = a.grid();
    let mut out = data;
    fft::fft_spatial(&mut out, 1, g.n(), g.dim(), fft::Direction::Forward);
    Field::from_vec(g, out, Repr::Spectral).expect("length")
}

fn check_time(t: f64) -> Result<(), IllposedError> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(IllposedError::BadTime(t));
    }
    Ok(())
}

/// `I_λ(t)` through the free flows, the pointwise product and `𝓘₀`.
pub fn second_iterate_i(
    lambda: f64,
    point: RegPoint,
    t: f64,
    grid: &Arc<Grid>,
    steps: Option<usize>,
) -> Result<SecondIterate, IllposedError> {
    check_time(t)?;
    let g = make_witness(WitnessKind::G, lambda, point, grid)?;
    let f = make_witness(WitnessKind::F, lambda, point, grid)?;
    let reach = 2.25 * lambda;
    check_resolved(grid, reach)?;
    let steps = steps.unwrap_or_else(|| default_steps(t, reach * reach + 2.0 * lambda));
    let field = duhamel_at(
        |s| {
            product(&free_halfwave(&g, s), &free_schrodinger(&f, s), |v, u| {
                u * v.re
            })
        },
        Frame::Schrodinger,
        t,
        steps,
    );
    let norm = sobolev_norm(&field, point.s);
    let restricted_norm = sobolev_norm_on(&field, point.s, |xi| in_annulus(xi, lambda));
    Ok(SecondIterate {
        field,
        norm,
        restricted_norm,
        steps,
    })
}

/// `∫₀ᵗ e^{i(t-t')|∇|}|∇|Re(e^{it'Δ}x · conj(e^{it'Δ}y))dt'` for two
/// Schrödinger data on the same grid.
pub fn wave_response(x: &Field, y: &Field, t: f64, steps: usize) -> Field {
    let g = x.grid().clone();
    let xi = g.xi_norm_table();
    let mut out = duhamel_at(
        |s| {
            let mut p = product(&free_schrodinger(x, s), &free_schrodinger(y, s), |a, b| {
                C64::new((a * b.conj()).re, 0.0)
            });
            par::for_each_mut(p.data_mut(), |k, z| *z *= xi[k]);
            p
        },
        Frame::Wave,
        t,
        steps,
    );
    out.scale(C64::new(0.0, 1.0));
    out
}

/// `J^{ab}_λ(t)` through the evolution primitives. The restricted norm is
/// the `H^ℓ` mass on `|ξ - λe₁| ≤ λ/8`.
pub fn second_iterate_jab(
    lambda: f64,
    point: RegPoint,
    t: f64,
    grid: &Arc<Grid>,
    steps: Option<usize>,
) -> Result<SecondIterate, IllposedError> {
    check_time(t)?;
    let a = make_witness(WitnessKind::A, lambda, point, grid)?;
    let b = make_witness(WitnessKind::B, lambda, point, grid)?;
    let reach = 1.25 * lambda + lambda / 8.0;
    check_resolved(grid, reach)?;
    let steps = steps.unwrap_or_else(|| default_steps(t, 2.0 * reach * reach));
    let field = wave_response(&a, &b, t, steps);
    let norm = sobolev_norm(&field, point.l);
    let restricted_norm = sobolev_norm_on(&field, point.l, |xi| in_cap(xi, lambda));
    Ok(SecondIterate {
        field,
        norm,
        restricted_norm,
        steps,
    })
}

/// The full `J_λ(t)` for `h_λ = a_λ + b_λ`, with its `H^ℓ` mass on the cap.
pub fn second_iterate_j(
    lambda: f64,
    point: RegPoint,
    t: f64,
    grid: &Arc<Grid>,
    steps: Option<usize>,
) -> Result<SecondIterate, IllposedError> {
    check_time(t)?;
    let h = make_witness(WitnessKind::H, lambda, point, grid)?;
    check_resolved(grid, 2.5 * lambda)?;
    let reach = 1.25 * lambda;
    let steps = steps.unwrap_or_else(|| default_steps(t, 2.0 * reach * reach + 2.5 * lambda));
    let field = wave_response(&h, &h, t, steps);
    let norm = sobolev_norm(&field, point.l);
    let restricted_norm = sobolev_norm_on(&field, point.l, |xi| in_cap(xi, lambda));
    Ok(SecondIterate {
        field,
        norm,
        restricted_norm,
        steps,
    })
}

/// Largest spectral amplitude of `|e^{itΔ}a|² + |e^{itΔ}b|²` on the cap
/// `|ξ - λe₁| ≤ λ/8`, relative to its largest amplitude anywhere.
pub fn diagonal_cap_leakage(
    lambda: f64,
    point: RegPoint,
    t: f64,
    grid: &Arc<Grid>,
) -> Result<f64, IllposedError> {
    let a = make_witness(WitnessKind::A, lambda, point, grid)?;
    let b = make_witness(WitnessKind::B, lambda, point, grid)?;
    check_resolved(grid, 2.5 * lambda)?;
    let (ua, ub) = (
        free_schrodinger(&a, t).into_repr(Repr::Physical),
        free_schrodinger(&b, t).into_repr(Repr::Physical),
    );
    let dens = product(&ua, &ub, |x, y| C64::new(x.norm_sqr() + y.norm_sqr(), 0.0));
    let d = point.d;
    let on_cap = par::max_range(dens.data().len(), |i| {
        if in_cap(&grid.xi(i)[..d], lambda) {
            dens.data()[i].norm()
        } else {
            0.0
        }
    });
    let all = par::max_range(dens.data().len(), |i| dens.data()[i].norm());
    Ok(if all > 0.0 { on_cap / all } else { 0.0 })
}

/// Settings for the lattice mode sums.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeSumOptions {
    pub box_length: f64,
    /// Output points are subsampled once `|output| · |input|` exceeds this.
    pub max_pairs: f64,
    pub seed: u64,
}

impl Default for ModeSumOptions {
    fn default() -> Self {
        ModeSumOptions {
            box_length: 2.0 * std::f64::consts::PI,
            max_pairs: 2e7,
            seed: 0,
        }
    }
}

/// Restricted norm of a second iterate from the lattice mode sum, with the
/// predicted size from the witness argument.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterateEstimate {
    pub lambda: f64,
    pub t: f64,
    pub norm: f64,
    /// `λ^{s-ℓ-2}∫f̂` for `I`, `λ^{ℓ-s-1}∫b̂` for `J`.
    pub predicted: f64,
    pub output_points: usize,
    pub used_points: usize,
}

impl IterateEstimate {
    pub fn ratio(&self) -> f64 {
        self.norm / self.predicted
    }

    pub fn exact(&self) -> bool {
        self.used_points == self.output_points
    }
}

/// `∫₀ᵗ e^{ixs} ds`.
fn phase_integral(x: f64, t: f64) -> C64 {
    let xt = x * t;
    if xt.abs() < 1e-4 {
        C64::new(t * (1.0 - xt * xt / 6.0), t * xt / 2.0)
    } else {
        C64::new(xt.sin(), 1.0 - xt.cos()) / x
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// `(L^{-d} Σ_{ξ∈out} ⟨ξ⟩^{2σ}|L^{-d} Σ_j term(ξ, j)|²)^{1/2}` with seeded
/// subsampling of `out`; `j` indexes `input`.
fn mode_sum<T>(
    d: usize,
    out: &[[f64; 4]],
    input: &[[f64; 4]],
    sigma: f64,
    opts: &ModeSumOptions,
    stream: u64,
    term: T,
) -> (f64, usize)
where
    T: Fn(&[f64], usize) -> C64 + Sync + Send,
{
    let vol = opts.box_length.powi(d as i32);
    let pairs = out.len() as f64 * input.len() as f64;
    let chosen: Vec<usize> = if pairs <= opts.max_pairs {
        (0..out.len()).collect()
    } else {
        let k = ((opts.max_pairs / input.len().max(1) as f64) as usize).clamp(256, out.len());
        let mut idx = sample(&mut rng_for(opts.seed, stream), out.len(), k).into_vec();
        idx.sort_unstable();
        idx
    };
    let total = par::sum_range(chosen.len(), |i| {
        let xi = &out[chosen[i]][..d];
        let mut acc = C64::new(0.0, 0.0);
        for j in 0..input.len() {
            acc += term(xi, j);
        }
        let amp = acc.norm() / vol;
        (1.0 + norm(xi).powi(2)).powf(sigma) * amp * amp
    });
    let scale = out.len() as f64 / chosen.len().max(1) as f64;
    ((total * scale / vol).sqrt(), chosen.len())
}

/// Annulus-restricted `‖I_λ(t)‖_{H^s}` from the lattice mode sum
///
/// `Î(t,ξ) = -i e^{-it|ξ|²} L^{-d} Σ_η ĝ(ξ-η) f̂(η) ∫₀ᵗ e^{it'(|ξ|²-|η|²)} cos(t'|ξ-η|) dt'`.
pub fn second_iterate_i_modes(
    lambda: f64,
    point: RegPoint,
    t: f64,
    opts: &ModeSumOptions,
) -> Result<IterateEstimate, IllposedError> {
    check_time(t)?;
    let g = Witness::new(WitnessKind::G, lambda, point)?;
    let f = Witness::new(WitnessKind::F, lambda, point)?;
    let d = point.d;
    let step = 2.0 * std::f64::consts::PI / opts.box_length;
    let input: Vec<[f64; 4]> = lattice_ball(d, step, &[0.0; 4], f.support_radius())
        .into_iter()
        .filter(|x| f.value(&x[..d]) != 0.0)
        .collect();
    let out: Vec<[f64; 4]> = lattice_ball(d, step, &[0.0; 4], 1.5 * lambda)
        .into_iter()
        .filter(|x| in_annulus(&x[..d], lambda))
        .collect();
    let fv: Vec<f64> = input.iter().map(|x| f.value(&x[..d])).collect();
    let (value, used) = mode_sum(d, &out, &input, point.s, opts, lambda as u64, |xi, j| {
        let eta = &input[j][..d];
        let gv = g.value(&diff(xi, eta));
        if gv == 0.0 {
            return C64::new(0.0, 0.0);
        }
        let om = norm(xi).powi(2) - norm(eta).powi(2);
        let w = dist(xi, eta);
        (phase_integral(om + w, t) + phase_integral(om - w, t)) * (0.5 * gv * fv[j])
    });
    let predicted = lambda.powf(point.s - point.l - 2.0) * f.integral(opts.box_length);
    Ok(IterateEstimate {
        lambda,
        t,
        norm: value,
        predicted,
        output_points: out.len(),
        used_points: used,
    })
}

/// Cap-restricted `‖J^{ab}_λ(t)‖_{H^ℓ}` from the lattice mode sum
///
/// `Ĵ(t,ξ) = |ξ| e^{it|ξ|} L^{-d} Σ_η â(ξ-η) b̂(η) ∫₀ᵗ e^{-it'|ξ|} cos(t'(|η|²-|ξ-η|²)) dt'`.
pub fn second_iterate_jab_modes(
    lambda: f64,
    point: RegPoint,
    t: f64,
    opts: &ModeSumOptions,
) -> Result<IterateEstimate, IllposedError> {
    check_time(t)?;
    let a = Witness::new(WitnessKind::A, lambda, point)?;
    let b = Witness::new(WitnessKind::B, lambda, point)?;
    let d = point.d;
    let step = 2.0 * std::f64::consts::PI / opts.box_length;
    let input: Vec<[f64; 4]> = lattice_ball(d, step, &[0.0; 4], b.support_radius())
        .into_iter()
        .filter(|x| b.value(&x[..d]) != 0.0)
        .collect();
    let mut center = [0.0; 4];
    center[0] = lambda;
    let out = lattice_ball(d, step, &center, lambda / 8.0);
    let bv: Vec<f64> = input.iter().map(|x| b.value(&x[..d])).collect();
    let (value, used) = mode_sum(d, &out, &input, point.l, opts, lambda as u64, |xi, j| {
        let eta = &input[j][..d];
        let av = a.value(&diff(xi, eta));
        if av == 0.0 {
            return C64::new(0.0, 0.0);
        }
        let r = norm(xi);
        let kappa = norm(eta).powi(2) - dist(xi, eta).powi(2);
        (phase_integral(kappa - r, t) + phase_integral(-kappa - r, t)) * (0.5 * r * av * bv[j])
    });
    let predicted = lambda.powf(point.l - point.s - 1.0) * b.integral(opts.box_length);
    Ok(IterateEstimate {
        lambda,
        t,
        norm: value,
        predicted,
        output_points: out.len(),
        used_points: used,
    })
}

fn diff(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Log-log least-squares growth rate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Growth {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Slope of `log value` against `log λ`.
pub fn growth_exponent(lambdas: &[f64], values: &[f64]) -> Result<Growth, IllposedError> {
    let n = lambdas.len().min(values.len());
    if n < 4 {
        return Err(IllposedError::TooFewPoints(n));
    }
    for (&l, &v) in lambdas.iter().zip(values) {
        if !(l > 0.0 && v > 0.0) {
            return Err(IllposedError::NonPositive(l, v));
        }
    }
    let x: Vec<f64> = lambdas[..n].iter().map(|l| l.ln()).collect();
    let y: Vec<f64> = values[..n].iter().map(|v| v.ln()).collect();
    let (slope, intercept, r2) = stats::ols(&x, &y);
    Ok(Growth {
        slope,
        intercept,
        r2,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Iterate {
    I,
    Jab,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub d: usize,
    pub s: f64,
    pub l: f64,
    pub lambda: f64,
    pub t: f64,
    pub norm: f64,
    pub predicted: f64,
    pub ratio: f64,
    /// Growth exponent of the rows so far (from the fourth row on).
    pub slope_so_far: Option<f64>,
}

/// Restricted norms over a list of scales with running growth fits.
pub fn sweep(
    which: Iterate,
    point: RegPoint,
    lambdas: &[f64],
    t: f64,
    opts: &ModeSumOptions,
) -> Result<Vec<SweepRow>, IllposedError> {
    let mut rows: Vec<SweepRow> = Vec::new();
    for &lam in lambdas {
        let est = match which {
            Iterate::I => second_iterate_i_modes(lam, point, t, opts)?,
            Iterate::Jab => second_iterate_jab_modes(lam, point, t, opts)?,
        };
        let mut xs: Vec<f64> = rows.iter().map(|r| r.lambda).collect();
        let mut ys: Vec<f64> = rows.iter().map(|r| r.norm).collect();
        xs.push(lam);
        ys.push(est.norm);
        let slope_so_far = growth_exponent(&xs, &ys).ok().map(|g| g.slope);
        rows.push(SweepRow {
            d: point.d,
            s: point.s,
            l: point.l,
            lambda: lam,
            t,
            norm: est.norm,
            predicted: est.predicted,
            ratio: est.ratio(),
            slope_so_far,
        });
    }
    Ok(rows)
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("d,s,l,lambda,t,norm,predicted,ratio,slope_so_far\n");
    for r in rows {
        let slope = r
            .slope_so_far
            .map(|v| format!("{v:.6}"))
            .unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{:.9e},{:.9e},{:.6},{}\n",
            r.d, r.s, r.l, r.lambda, r.t, r.norm, r.predicted, r.ratio, slope
        ));
    }
    out
}

/// Classification of a rectangular `(s, ℓ)` lattice, one CSV row per point.
pub fn region_map_csv(d: usize, s_range: (f64, f64), l_range: (f64, f64), steps: usize) -> String {
    let steps = steps.max(1);
    let mut out = String::from("d,s,l,class,violated\n");
    for i in 0..=steps {
        let s = s_range.0 + (s_range.1 - s_range.0) * i as f64 / steps as f64;
        for j in 0..=steps {
            let l = l_range.0 + (l_range.1 - l_range.0) * j as f64 / steps as f64;
            let class = classify_region(RegPoint::new(d, s, l));
            let violated = match &class {
                RegionClass::Inadmissible { violated } => violated
                    .iter()
                    .map(|c| c.describe())
                    .collect::<Vec<_>>()
                    .join("; "),
                _ => String::new(),
            };
            out.push_str(&format!("{d},{s},{l},{},{violated}\n", class.label()));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corners_and_interior() {
        assert_eq!(
            classify_region(RegPoint::new(4, 1.0, 0.0)),
            RegionClass::Admissible
        );
        assert_eq!(
            classify_region(RegPoint::new(4, 2.0, 0.0)),
            RegionClass::ExcludedCorner
        );
        assert_eq!(
            classify_region(RegPoint::new(4, 2.0, 3.0)),
            RegionClass::ExcludedCorner
        );
        match classify_region(RegPoint::new(4, 0.0, 0.0)) {
            RegionClass::Inadmissible { violated } => {
                assert_eq!(violated, vec![Condition::SchrodingerFloor])
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn exponents_follow_the_gap() {
        assert_eq!(default_exponents(1.0, 0.0), (0.25, 0.0));
        assert_eq!(default_exponents(0.5, 0.0), (0.0, 0.0));
        assert_eq!(default_exponents(0.0, 1.0), (0.0, 1.0));
    }

    #[test]
    fn lattice_ball_counts() {
        assert_eq!(lattice_ball(1, 1.0, &[0.0; 4], 2.0).len(), 5);
        assert_eq!(lattice_ball(2, 1.0, &[0.0; 4], 1.0).len(), 5);
        assert_eq!(lattice_ball(3, 0.5, &[0.0; 4], 0.5).len(), 7);
    }

    #[test]
    fn phase_integral_limits() {
        let t = 0.7;
        assert!((phase_integral(0.0, t) - C64::new(t, 0.0)).norm() < 1e-15);
        let x = 3.0;
        let exact = (C64::new(0.0, x * t).exp() - 1.0) / C64::new(0.0, x);
        assert!((phase_integral(x, t) - exact).norm() < 1e-14);
    }
}
