//! Sobolev, Besov and mixed Lebesgue norms, the adapted dyadic families
//! `S`, `N`, `W`, `R`, and their time-interval restrictions.
//!
//! `L^∞_t` is a maximum over time samples and every `L^p` integral is a
//! Riemann sum with the lattice cell volume. Temporal multipliers are
//! evaluated in an interaction frame (see [`crate::multipliers`]); the frame
//! is picked per block by [`FrameChoice`].

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fft::{self, Direction};
use crate::grid::{Field, Grid, GridError, Repr, SpacetimeField, C64};
use crate::multipliers::{
    self, apply_spatial_ts, fmt_num, low_pass, rho, spatial_block, spatial_symbol, Frame,
};
use crate::par;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NormError {
    #[error("block scale {lambda} exceeds the resolved maximum {lambda_max}")]
    ScaleTooLarge { lambda: f64, lambda_max: f64 },
    #[error("exponents {0} outside the supported range 0 <= a, b <= 1")]
    BadExponents(String),
    #[error("restriction interval ({0}, {1}) is degenerate or outside t_span")]
    DegenerateInterval(f64, f64),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Norm family and its exponents.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Family {
    Sobolev { s: f64 },
    Besov { s: f64, q: f64, r: f64 },
    MixedLp { p_t: f64, q_x: f64, s: f64 },
    S { s: f64, a: f64, b: f64 },
    N { s: f64, a: f64, b: f64 },
    W { l: f64, alpha: f64, beta: f64 },
    R { l: f64, alpha: f64, beta: f64 },
}

impl Family {
    pub fn name(&self) -> String {
        let f = fmt_num;
        match self {
            Family::Sobolev { s } => format!("H^{}", f(*s)),
            Family::Besov { s, q, r } => format!("B^{}_{{{},{}}}", f(*s), f(*q), f(*r)),
            Family::MixedLp { p_t, q_x, s } => {
                format!("L^{}_t W^{{{},{}}}_x", f(*p_t), f(*s), f(*q_x))
            }
            Family::S { s, a, b } => format!("S^{{{},{},{}}}", f(*s), f(*a), f(*b)),
            Family::N { s, a, b } => format!("N^{{{},{},{}}}", f(*s), f(*a), f(*b)),
            Family::W { l, alpha, beta } => format!("W^{{{},{},{}}}", f(*l), f(*alpha), f(*beta)),
            Family::R { l, alpha, beta } => format!("R^{{{},{},{}}}", f(*l), f(*alpha), f(*beta)),
        }
    }

    fn term_names(&self) -> [&'static str; 3] {
        match self {
            Family::S { .. } => ["Linf_L2", "strichartz", "modulation"],
            Family::N { .. } => ["low_temporal_Linf_L2", "dual_strichartz", "weighted_L2"],
            Family::W { .. } => ["Linf_L2", "low_temporal_weighted", "halfwave_L2"],
            _ => ["Linf_L2", "low_temporal_L1_L2", "L2"],
        }
    }

    fn natural_frame(&self) -> Frame {
        match self {
            Family::W { .. } | Family::R { .. } => Frame::Wave,
            _ => Frame::Schrodinger,
        }
    }
}

/// Which norm to evaluate, optionally on one dyadic block or restricted to
/// a time interval.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormSpec {
    pub family: Family,
    pub interval: Option<(f64, f64)>,
    /// Evaluate the single-block formula at this `λ` on the input as given
    /// (no projection). `None` means the full `ℓ²`-over-blocks norm.
    pub block: Option<f64>,
}

impl NormSpec {
    pub fn new(family: Family) -> Self {
        NormSpec {
            family,
            interval: None,
            block: None,
        }
    }

    pub fn block(mut self, lambda: f64) -> Self {
        self.block = Some(lambda);
        self
    }

    pub fn on(mut self, interval: (f64, f64)) -> Self {
        self.interval = Some(interval);
        self
    }

    pub fn validate(&self) -> Result<(), NormError> {
        let finite = |xs: &[f64]| xs.iter().all(|x| x.is_finite());
        let ok = match &self.family {
            Family::Sobolev { s } => finite(&[*s]),
            Family::Besov { s, q, r } => finite(&[*s]) && *q >= 1.0 && *r >= 1.0,
            Family::MixedLp { p_t, q_x, s } => finite(&[*s]) && *p_t >= 1.0 && *q_x >= 1.0,
            Family::S { s, a, b } | Family::N { s, a, b } => {
                if !(0.0..=1.0).contains(a) || !(0.0..=1.0).contains(b) {
                    return Err(NormError::BadExponents(format!("a = {a}, b = {b}")));
                }
                finite(&[*s])
            }
            Family::W { l, alpha, beta } | Family::R { l, alpha, beta } => {
                finite(&[*l, *alpha, *beta])
            }
        };
        if ok {
            Ok(())
        } else {
            Err(NormError::Invalid(format!(
                "invalid exponents for {}",
                self.family.name()
            )))
        }
    }
}

/// Frame selection for temporal multipliers.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum FrameChoice {
    /// Per block, whichever of the lab frame and the family's natural frame
    /// leaves less energy in the upper half of the temporal lattice.
    Auto,
    Fixed(Frame),
}

/// Exponent pair `(q_t, r_x)` filling the endpoint Strichartz slot, and its
/// dual for the `N` family.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrichartzPair {
    pub q_t: f64,
    pub r_x: f64,
    pub dual_q_t: f64,
    pub dual_r_x: f64,
    /// Set when `d < 3` and a non-endpoint pair stands in for `(2, 2*)`.
    pub surrogate: bool,
}

impl StrichartzPair {
    /// `(2, 2d/(d-2))` for `d ≥ 3`; `(4, ∞)` in `d = 1`; `(5/2, 10)` in `d = 2`.
    pub fn for_dim(d: usize) -> Self {
        match d {
            1 => Self::custom(4.0, f64::INFINITY, true),
            2 => Self::custom(2.5, 10.0, true),
            _ => {
                let d = d as f64;
                Self::custom(2.0, 2.0 * d / (d - 2.0), false)
            }
        }
    }

    pub fn custom(q_t: f64, r_x: f64, surrogate: bool) -> Self {
        StrichartzPair {
            q_t,
            r_x,
            dual_q_t: conjugate(q_t),
            dual_r_x: conjugate(r_x),
            surrogate,
        }
    }
}

fn conjugate(p: f64) -> f64 {
    if p.is_infinite() {
        1.0
    } else if p == 1.0 {
        f64::INFINITY
    } else {
        p / (p - 1.0)
    }
}

/// Numerical knobs shared by the adapted norms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormSettings {
    pub modulation_margin: f64,
    pub lowfreq_threshold: f64,
    pub strichartz: Option<StrichartzPair>,
    pub frame: FrameChoice,
}

impl Default for NormSettings {
    fn default() -> Self {
        NormSettings {
            modulation_margin: multipliers::DEFAULT_MODULATION_MARGIN,
            lowfreq_threshold: 65536.0,
            strichartz: None,
            frame: FrameChoice::Auto,
        }
    }
}

impl NormSettings {
    pub fn with_margin(margin: f64) -> Self {
        NormSettings {
            modulation_margin: margin,
            ..Default::default()
        }
    }

    pub fn pair(&self, d: usize) -> StrichartzPair {
        self.strichartz
            .unwrap_or_else(|| StrichartzPair::for_dim(d))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermValue {
    pub name: String,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockReport {
    pub lambda: f64,
    pub frame: Frame,
    pub terms: Vec<TermValue>,
    pub total: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Restriction {
    pub interval: (f64, f64),
    pub policy: String,
    pub extension: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormMeta {
    pub d: usize,
    pub n: usize,
    pub box_length: f64,
    pub nt: usize,
    pub t_span: (f64, f64),
    pub modulation_margin: f64,
    pub lowfreq_threshold: f64,
    pub strichartz: StrichartzPair,
    pub restriction: Option<Restriction>,
    pub warnings: Vec<String>,
}

/// Result of a norm evaluation with its full breakdown.
///
/// `value = sqrt(Σ_blocks total²) + Σ extra` for every family except Besov,
/// where the blocks combine in `ℓ^r` (recorded in `block_exponent`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub family: String,
    pub value: f64,
    pub block_exponent: f64,
    pub blocks: Vec<BlockReport>,
    pub extra: Vec<TermValue>,
    pub meta: NormMeta,
}

impl NormReport {
    /// Recompute the total from the breakdown.
    pub fn recombine(&self) -> f64 {
        let r = self.block_exponent;
        let blocks = if r.is_infinite() {
            self.blocks.iter().map(|b| b.total).fold(0.0, f64::max)
        } else {
            self.blocks
                .iter()
                .map(|b| b.total.powf(r))
                .sum::<f64>()
                .powf(1.0 / r)
        };
        blocks + self.extra.iter().map(|t| t.value).sum::<f64>()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One row per `(λ, term)`; extra terms use an empty `lambda` column.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("family,lambda,term,value\n");
        for b in &self.blocks {
            for t in &b.terms {
                let _ = writeln!(
                    out,
                    "{},{},{},{:e}",
                    self.family,
                    fmt_num(b.lambda),
                    t.name,
                    t.value
                );
            }
        }
        for t in &self.extra {
            let _ = writeln!(out, "{},,{},{:e}", self.family, t.name, t.value);
        }
        out
    }

    pub fn block_total(&self, lambda: f64) -> Option<f64> {
        self.blocks
            .iter()
            .find(|b| b.lambda == lambda)
            .map(|b| b.total)
    }

    pub fn term(&self, lambda: f64, index: usize) -> Option<f64> {
        self.blocks
            .iter()
            .find(|b| b.lambda == lambda)
            .and_then(|b| b.terms.get(index))
            .map(|t| t.value)
    }
}

/// Continuum `H^s` norm via the `⟨ξ⟩^{2s}` spectral sum.
pub fn sobolev_norm(f: &Field, s: f64) -> f64 {
    let spec = f.to_repr(Repr::Spectral);
    let g = f.grid();
    let sum = par::sum_range(spec.data().len(), |i| {
        (1.0 + g.xi_sq(i)).powf(s) * spec.data()[i].norm_sqr()
    });
    (sum * g.cell_volume()).sqrt()
}

/// `H^ℓ` norm restricted to modes with `pred(ξ)` true.
pub fn sobolev_norm_on<P>(f: &Field, s: f64, pred: P) -> f64
where
    P: Fn(&[f64]) -> bool + Sync + Send,
{
    let spec = f.to_repr(Repr::Spectral);
    let g = f.grid();
    let d = g.dim();
    let sum = par::sum_range(spec.data().len(), |i| {
        let xi = g.xi(i);
        if pred(&xi[..d]) {
            (1.0 + g.xi_sq(i)).powf(s) * spec.data()[i].norm_sqr()
        } else {
            0.0
        }
    });
    (sum * g.cell_volume()).sqrt()
}

/// `L^p` norm of physical samples with cell volume `cell`.
pub fn lp_norm(samples: &[C64], p: f64, cell: f64) -> f64 {
    if p.is_infinite() {
        par::max_range(samples.len(), |i| samples[i].norm())
    } else if p == 2.0 {
        (par::sum_range(samples.len(), |i| samples[i].norm_sqr()) * cell).sqrt()
    } else {
        (par::sum_range(samples.len(), |i| samples[i].norm().powf(p)) * cell).powf(1.0 / p)
    }
}

/// Inhomogeneous Besov norm `(Σ_λ λ^{sr} ‖P_λ f‖_{L^q}^r)^{1/r}` over
/// `λ = 1, …, λ_max`.
pub fn besov_norm(f: &Field, s: f64, q: f64, r: f64) -> f64 {
    let blocks = besov_blocks(f, s, q);
    if r.is_infinite() {
        blocks.iter().map(|(_, v)| *v).fold(0.0, f64::max)
    } else {
        blocks
            .iter()
            .map(|(_, v)| v.powf(r))
            .sum::<f64>()
            .powf(1.0 / r)
    }
}

fn besov_blocks(f: &Field, s: f64, q: f64) -> Vec<(f64, f64)> {
    let g = f.grid().clone();
    let spec = f.to_repr(Repr::Spectral);
    g.dyadic_scales()
        .into_iter()
        .map(|lam| {
            let mut b = spec.clone();
            let gg = g.clone();
            par::for_each_mut(b.data_mut(), |i, z| {
                if gg.is_nyquist(i) {
                    *z = C64::new(0.0, 0.0);
                } else {
                    *z *= spatial_block(gg.xi_sq(i).sqrt(), lam);
                }
            });
            let phys = b.into_repr(Repr::Physical);
            (lam, lam.powf(s) * lp_norm(phys.data(), q, g.cell_volume()))
        })
        .collect()
}

/// `‖⟨∇⟩^s u‖_{L^{p_t}_t L^{q_x}_x}`.
pub fn mixed_lp_norm(u: &SpacetimeField, p_t: f64, q_x: f64, s: f64) -> f64 {
    let g = u.grid().clone();
    let mut w = u.to_repr(Repr::Physical, Repr::Spectral);
    if s != 0.0 {
        apply_spatial_ts(w.data_mut(), &g, |xi| (1.0 + xi * xi).powf(s / 2.0));
    }
    lq_lr_from_ts(w.data_mut(), &g, p_t, q_x)
}

/// `L^q_t L^r_x` of time-physical, space-spectral data (consumed).
fn lq_lr_from_ts(data: &mut [C64], g: &Grid, q: f64, r: f64) -> f64 {
    let m = g.spatial_len();
    if r == 2.0 {
        let per: Vec<f64> = par::map_range(g.nt(), |j| {
            (data[j * m..(j + 1) * m]
                .iter()
                .map(|z| z.norm_sqr())
                .sum::<f64>()
                * g.cell_volume())
            .sqrt()
        });
        return combine_time(&per, q, g.dt());
    }
    fft::fft_spatial(data, g.nt(), g.n(), g.dim(), Direction::Inverse);
    let cv = g.cell_volume();
    let per: Vec<f64> = par::map_range(g.nt(), |j| {
        let s = &data[j * m..(j + 1) * m];
        if r.is_infinite() {
            s.iter().map(|z| z.norm()).fold(0.0, f64::max)
        } else {
            (s.iter().map(|z| abs_pow(*z, r)).sum::<f64>() * cv).powf(1.0 / r)
        }
    });
    combine_time(&per, q, g.dt())
}

/// `|z|^r`, via integer powers of `|z|²` when `r` is an even integer.
fn abs_pow(z: C64, r: f64) -> f64 {
    let half = r / 2.0;
    if half.fract() == 0.0 && half <= 16.0 {
        z.norm_sqr().powi(half as i32)
    } else {
        z.norm().powf(r)
    }
}

fn combine_time(per: &[f64], q: f64, dt: f64) -> f64 {
    if q.is_infinite() {
        per.iter().cloned().fold(0.0, f64::max)
    } else {
        (per.iter().map(|v| v.powf(q)).sum::<f64>() * dt).powf(1.0 / q)
    }
}

/// One dyadic block stored by spatial mode: only the modes carrying data are
/// kept, each as a contiguous time series (time-physical).
struct Block {
    cols: Vec<usize>,
    data: Vec<C64>,
}

impl Block {
    /// Gather the modes of time-physical, space-spectral `ts`, multiplied by
    /// the spatial symbol `sym` when given.
    fn gather(ts: &[C64], g: &Grid, sym: Option<&[f64]>) -> Block {
        let m = g.spatial_len();
        let nt = g.nt();
        let zero = C64::new(0.0, 0.0);
        let cols: Vec<usize> = (0..m)
            .filter(|&k| match sym {
                Some(s) => s[k] != 0.0 && (0..nt).any(|j| ts[j * m + k] * s[k] != zero),
                None => (0..nt).any(|j| ts[j * m + k] != zero),
            })
            .collect();
        let mut data = vec![zero; cols.len() * nt];
        par::for_each_chunk_mut(&mut data, nt, |c, col| {
            let k = cols[c];
            for (j, z) in col.iter_mut().enumerate() {
                *z = match sym {
                    Some(s) => ts[j * m + k] * s[k],
                    None => ts[j * m + k],
                };
            }
        });
        Block { cols, data }
    }

    fn is_empty(&self) -> bool {
        self.cols.is_empty()
    }

    /// `L^q_t L²_x` of compact columns `x`.
    fn lq_l2(&self, x: &[C64], g: &Grid, q: f64) -> f64 {
        let nt = g.nt();
        let per: Vec<f64> = (0..nt)
            .map(|j| {
                let e: f64 = (0..self.cols.len()).map(|c| x[c * nt + j].norm_sqr()).sum();
                (e * g.cell_volume()).sqrt()
            })
            .collect();
        combine_time(&per, q, g.dt())
    }

    fn linf_l2(&self, x: &[C64], g: &Grid) -> f64 {
        self.lq_l2(x, g, f64::INFINITY)
    }

    /// `L²_{t,x}` of compact columns `x`.
    fn l2(&self, x: &[C64], g: &Grid) -> f64 {
        (par::sum_range(x.len(), |i| x[i].norm_sqr()) * g.cell_volume() * g.dt()).sqrt()
    }
}

/// Temporal spectrum of the profile `e^{-ith(ξ)}û` of a block in one frame.
struct FrameSpectrum {
    frame: Frame,
    /// Phase rate of each stored mode, in the order of [`Block::cols`].
    rate: Vec<f64>,
    data: Vec<C64>,
}

impl FrameSpectrum {
    fn new(block: &Block, g: &Grid, frame: Frame) -> Self {
        let nt = g.nt();
        let xi = g.xi_norm_table();
        let rate: Vec<f64> = block.cols.iter().map(|&k| frame.rate(xi[k])).collect();
        let times = g.times();
        let mut w = block.data.clone();
        par::for_each_chunk_mut(&mut w, nt, |c, col| {
            if rate[c] != 0.0 {
                for (j, z) in col.iter_mut().enumerate() {
                    *z *= C64::from_polar(1.0, -times[j] * rate[c]);
                }
            }
        });
        fft::fft_rows(&mut w, nt, Direction::Forward);
        FrameSpectrum {
            frame,
            rate,
            data: w,
        }
    }

    /// Fraction of energy in the upper half of the temporal lattice.
    fn tail(&self, g: &Grid) -> f64 {
        let nt = g.nt();
        let mut tail = 0.0;
        let mut total = 0.0;
        for col in self.data.chunks(nt) {
            for (j, z) in col.iter().enumerate() {
                let k = Grid::signed_index(j, nt).unsigned_abs() as usize;
                let e = z.norm_sqr();
                total += e;
                if 4 * k >= nt {
                    tail += e;
                }
            }
        }
        if total == 0.0 {
            0.0
        } else {
            tail / total
        }
    }

    /// Apply the symbol `f(ω, |ξ|)` and return the time-physical profile,
    /// column by column. Its moduli are those of the lab-frame field.
    fn apply<F>(&self, block: &Block, g: &Grid, f: F) -> Vec<C64>
    where
        F: Fn(f64, f64) -> f64 + Sync + Send,
    {
        let nt = g.nt();
        let nu = g.omega_table();
        let xi = g.xi_norm_table();
        let mut w = self.data.clone();
        par::for_each_chunk_mut(&mut w, nt, |c, col| {
            let (k, rate) = (block.cols[c], self.rate[c]);
            for (j, z) in col.iter_mut().enumerate() {
                if z.re != 0.0 || z.im != 0.0 {
                    *z *= f(nu[j] + rate, xi[k]);
                }
            }
        });
        fft::fft_rows(&mut w, nt, Direction::Inverse);
        w
    }

    /// Restore the frame phase of a profile from [`Self::apply`] and scatter
    /// it into a full time-physical, space-spectral array.
    fn scatter(&self, block: &Block, g: &Grid, profile: &[C64]) -> Vec<C64> {
        let m = g.spatial_len();
        let nt = g.nt();
        let times = g.times();
        let mut out = vec![C64::new(0.0, 0.0); nt * m];
        for (c, col) in profile.chunks(nt).enumerate() {
            let (k, rate) = (block.cols[c], self.rate[c]);
            for (j, z) in col.iter().enumerate() {
                out[j * m + k] = if rate != 0.0 {
                    *z * C64::from_polar(1.0, times[j] * rate)
                } else {
                    *z
                };
            }
        }
        out
    }
}

fn frame_spectrum(block: &Block, g: &Grid, family: &Family, choice: FrameChoice) -> FrameSpectrum {
    match choice {
        FrameChoice::Fixed(f) => FrameSpectrum::new(block, g, f),
        FrameChoice::Auto => {
            let nat = FrameSpectrum::new(block, g, family.natural_frame());
            let t_nat = nat.tail(g);
            if t_nat <= 1e-14 {
                return nat;
            }
            let lab = FrameSpectrum::new(block, g, Frame::Lab);
            if lab.tail(g) < t_nat {
                lab
            } else {
                nat
            }
        }
    }
}

/// `x^a`, skipping the power for `a = 0`.
fn pw(x: f64, a: f64) -> f64 {
    if a == 0.0 {
        1.0
    } else {
        x.powf(a)
    }
}

struct Ctx<'a> {
    g: &'a Grid,
    settings: &'a NormSettings,
    pair: StrichartzPair,
    warnings: Vec<String>,
}

/// Evaluate one block formula.
fn block_terms(
    block: &Block,
    lam: f64,
    family: &Family,
    ctx: &mut Ctx<'_>,
) -> (Frame, Vec<TermValue>) {
    let g = ctx.g;
    let mu = (lam / ctx.settings.modulation_margin).powi(2);
    let tres = 2.0 * std::f64::consts::PI / g.period();
    let needs_mu = matches!(
        family,
        Family::N { .. } | Family::W { .. } | Family::R { .. }
    );
    if needs_mu && mu < tres {
        let msg = format!(
            "lambda = {}: modulation threshold {mu:e} below temporal resolution {tres:e}",
            fmt_num(lam)
        );
        if !ctx.warnings.contains(&msg) {
            log::warn!("{msg}");
            ctx.warnings.push(msg);
        }
    }
    let tv = |name: &str, value: f64| TermValue {
        name: name.to_string(),
        value,
    };
    if block.is_empty() {
        let names = family.term_names();
        return (
            family.natural_frame(),
            names.iter().map(|n| tv(n, 0.0)).collect(),
        );
    }
    let spec = frame_spectrum(block, g, family, ctx.settings.frame);
    let frame = spec.frame;
    let data = &block.data;
    let strichartz = |w: Vec<C64>, q: f64, r: f64| {
        if r == 2.0 {
            return block.lq_l2(&w, g, q);
        }
        let mut full = spec.scatter(block, g, &w);
        lq_lr_from_ts(&mut full, g, q, r)
    };
    let terms = match *family {
        Family::S { s, a, b } => {
            let t1 = lam.powf(s) * block.linf_l2(data, g);
            let w = spec.apply(block, g, |om, _| pw(lam + om.abs(), a));
            let t2 = lam.powf(s - 2.0 * a) * strichartz(w, ctx.pair.q_t, ctx.pair.r_x);
            let w = spec.apply(block, g, |om, xi| {
                pw((lam + om.abs()) / (lam * lam + om.abs()), a) * (-om - xi * xi)
            });
            let t3 = lam.powf(s - 1.0 + b) * block.l2(&w, g);
            vec![
                tv("Linf_L2", t1),
                tv("strichartz", t2),
                tv("modulation", t3),
            ]
        }
        Family::N { s, a, b } => {
            let w = spec.apply(block, g, |om, _| low_pass(om.abs() / mu));
            let t1 = lam.powf(s - 2.0) * block.linf_l2(&w, g);
            let w = spec.apply(block, g, |om, xi| low_pass((om + xi * xi).abs() / mu));
            let t2 = lam.powf(s) * strichartz(w, ctx.pair.dual_q_t, ctx.pair.dual_r_x);
            let w = spec.apply(block, g, |om, _| {
                pw((lam + om.abs()) / (lam * lam + om.abs()), a)
            });
            let t3 = lam.powf(s - 1.0 + b) * block.l2(&w, g);
            vec![
                tv("low_temporal_Linf_L2", t1),
                tv("dual_strichartz", t2),
                tv("weighted_L2", t3),
            ]
        }
        Family::W { l, alpha, beta } => {
            let t1 = lam.powf(l) * block.linf_l2(data, g);
            let w = spec.apply(block, g, |om, _| {
                pw(lam + om.abs(), alpha) * low_pass(om.abs() / mu)
            });
            let t2 = lam.powf(l - alpha) * block.linf_l2(&w, g);
            let w = spec.apply(block, g, |om, xi| -om + xi);
            let t3 = lam.powf(beta - 1.0) * block.l2(&w, g);
            vec![
                tv("Linf_L2", t1),
                tv("low_temporal_weighted", t2),
                tv("halfwave_L2", t3),
            ]
        }
        Family::R { l, alpha, beta } => {
            let t1 = lam.powf(l - 2.0) * block.linf_l2(data, g);
            let w = spec.apply(block, g, |om, _| {
                pw(lam + om.abs(), alpha) * low_pass(om.abs() / mu)
            });
            let t2 = lam.powf(l - alpha) * strichartz(w, 1.0, 2.0);
            let t3 = lam.powf(beta - 1.0) * block.l2(data, g);
            vec![
                tv("Linf_L2", t1),
                tv("low_temporal_L1_L2", t2),
                tv("L2", t3),
            ]
        }
        _ => unreachable!("block_terms called for a non-adapted family"),
    };
    (frame, terms)
}

fn meta(g: &Grid, settings: &NormSettings, warnings: Vec<String>) -> NormMeta {
    NormMeta {
        d: g.dim(),
        n: g.n(),
        box_length: g.box_length(),
        nt: g.nt(),
        t_span: g.t_span(),
        modulation_margin: settings.modulation_margin,
        lowfreq_threshold: settings.lowfreq_threshold,
        strichartz: settings.pair(g.dim()),
        restriction: None,
        warnings,
    }
}

/// Evaluate `spec` on `u`. Restricted specs are delegated to
/// [`restricted_norm`].
pub fn adapted_norm(
    u: &SpacetimeField,
    spec: &NormSpec,
    settings: &NormSettings,
) -> Result<NormReport, NormError> {
    if spec.interval.is_some() {
        return restricted_norm(u, spec, settings);
    }
    spec.validate()?;
    let g = u.grid().clone();
    let ts = u.to_repr(Repr::Physical, Repr::Spectral);
    let mut ctx = Ctx {
        g: &g,
        settings,
        pair: settings.pair(g.dim()),
        warnings: Vec::new(),
    };
    let family = &spec.family;
    let mut block_exponent = 2.0;
    let mut blocks = Vec::new();
    let mut extra = Vec::new();
    match family {
        Family::Sobolev { s } => {
            let mut w = ts.data().to_vec();
            let s = *s;
            apply_spatial_ts(&mut w, &g, |xi| (1.0 + xi * xi).powf(s / 2.0));
            extra.push(TermValue {
                name: "Linf_t H^s".into(),
                value: lq_lr_from_ts(&mut w, &g, f64::INFINITY, 2.0),
            });
        }
        Family::MixedLp { p_t, q_x, s } => extra.push(TermValue {
            name: "mixed_Lp".into(),
            value: mixed_lp_norm(u, *p_t, *q_x, *s),
        }),
        Family::Besov { s, q, r } => {
            block_exponent = *r;
            let scales = match spec.block {
                Some(l) => vec![l],
                None => g.dyadic_scales(),
            };
            for lam in scales {
                check_scale(lam, &g)?;
                let mut w = ts.data().to_vec();
                apply_spatial_ts(&mut w, &g, |xi| spatial_block(xi, lam));
                let v = lam.powf(*s) * lq_lr_from_ts(&mut w, &g, f64::INFINITY, *q);
                blocks.push(BlockReport {
                    lambda: lam,
                    frame: Frame::Lab,
                    terms: vec![TermValue {
                        name: "Linf_t Lq".into(),
                        value: v,
                    }],
                    total: v,
                });
            }
        }
        _ => {
            if let Some(lam) = spec.block {
                check_scale(lam, &g)?;
                let block = Block::gather(ts.data(), &g, None);
                let (frame, terms) = block_terms(&block, lam, family, &mut ctx);
                blocks.push(block_report(lam, frame, terms));
            } else {
                for lam in g.dyadic_scales() {
                    let sym = spatial_symbol(&g, |xi| spatial_block(xi, lam));
                    let block = Block::gather(ts.data(), &g, Some(&sym));
                    let (frame, terms) = block_terms(&block, lam, family, &mut ctx);
                    blocks.push(block_report(lam, frame, terms));
                }
                if let Family::R { .. } = family {
                    let k = settings.lowfreq_threshold;
                    let mut w = ts.data().to_vec();
                    apply_spatial_ts(&mut w, &g, |xi| low_pass(xi / k));
                    extra.push(TermValue {
                        name: format!("low_freq_L1_L2[{}]", fmt_num(k)),
                        value: lq_lr_from_ts(&mut w, &g, 1.0, 2.0),
                    });
                }
            }
        }
    }
    let warnings = std::mem::take(&mut ctx.warnings);
    let mut report = NormReport {
        family: family.name(),
        value: 0.0,
        block_exponent,
        blocks,
        extra,
        meta: meta(&g, settings, warnings),
    };
    report.value = report.recombine();
    Ok(report)
}

fn block_report(lambda: f64, frame: Frame, terms: Vec<TermValue>) -> BlockReport {
    let total = terms.iter().map(|t| t.value).sum();
    BlockReport {
        lambda,
        frame,
        terms,
        total,
    }
}

fn check_scale(lam: f64, g: &Grid) -> Result<(), NormError> {
    if lam > g.lambda_max() {
        Err(NormError::ScaleTooLarge {
            lambda: lam,
            lambda_max: g.lambda_max(),
        })
    } else {
        Ok(())
    }
}

/// Label attached to every restricted evaluation.
pub const RESTRICTION_POLICY: &str = "canonical-extension upper bound";

/// Margin, in samples, of the canonical cutoff extension.
pub const EXTENSION_MARGIN: usize = 8;

/// Time-sample indices inside the closed interval `I`.
pub fn interval_samples(g: &Grid, interval: (f64, f64)) -> Vec<usize> {
    let tol = 1e-9 * g.dt();
    g.times()
        .iter()
        .enumerate()
        .filter(|(_, &t)| t >= interval.0 - tol && t <= interval.1 + tol)
        .map(|(j, _)| j)
        .collect()
}

/// Weights of an extension that equals 1 on samples `lo..=hi` and ramps to 0
/// over `left` samples before and `right` samples after (periodic indices).
fn ramp_weights(nt: usize, lo: usize, hi: usize, left: usize, right: usize) -> Vec<f64> {
    let mut w = vec![0.0; nt];
    for j in lo..=hi {
        w[j] = 1.0;
    }
    for k in 1..=right {
        let x = 1.0 - 2.0 * k as f64 / (right + 1) as f64;
        w[(hi + k) % nt] = rho(x);
    }
    for k in 1..=left {
        let x = 1.0 - 2.0 * k as f64 / (left + 1) as f64;
        w[(lo + nt - k) % nt] = rho(x);
    }
    w
}

/// Candidate extension of `u|_I` built on the full time lattice.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Extension {
    Ambient,
    Cutoff { wide: bool },
    Free { wide: bool, frame: Frame },
}

impl Extension {
    fn label(self) -> String {
        match self {
            Extension::Ambient => "ambient".into(),
            Extension::Cutoff { wide: false } => format!("cutoff[{EXTENSION_MARGIN}]"),
            Extension::Cutoff { wide: true } => "cutoff[wide]".into(),
            Extension::Free { wide, frame } => format!(
                "free-{:?}[{}]",
                frame,
                if wide {
                    "wide".to_string()
                } else {
                    EXTENSION_MARGIN.to_string()
                }
            )
            .to_lowercase(),
        }
    }
}

fn build_extension(ts: &SpacetimeField, lo: usize, hi: usize, ext: Extension) -> SpacetimeField {
    let g = ts.grid().clone();
    let nt = g.nt();
    let m = g.spatial_len();
    let gap = nt - (hi - lo + 1);
    let (left, right) = match ext {
        Extension::Ambient => return ts.clone(),
        Extension::Cutoff { wide: false } | Extension::Free { wide: false, .. } => {
            let k = EXTENSION_MARGIN.min(gap / 2);
            (k, k)
        }
        _ => (gap / 2, gap - gap / 2),
    };
    let weights = ramp_weights(nt, lo, hi, left, right);
    let mut out = ts.clone();
    match ext {
        Extension::Free { frame, .. } => {
            let rate: Vec<f64> = g.xi_norm_table().iter().map(|&x| frame.rate(x)).collect();
            let first = ts.slice_data(lo).to_vec();
            let last = ts.slice_data(hi).to_vec();
            for k in 1..=right {
                let j = (hi + k) % nt;
                let dtk = k as f64 * g.dt();
                let row = out.slice_data_mut(j);
                for i in 0..m {
                    row[i] = last[i] * C64::from_polar(weights[j], dtk * rate[i]);
                }
            }
            for k in 1..=left {
                let j = (lo + nt - k) % nt;
                let dtk = -(k as f64) * g.dt();
                let row = out.slice_data_mut(j);
                for i in 0..m {
                    row[i] = first[i] * C64::from_polar(weights[j], dtk * rate[i]);
                }
            }
            for j in 0..nt {
                if weights[j] == 0.0 {
                    out.slice_data_mut(j).fill(C64::new(0.0, 0.0));
                }
            }
        }
        _ => {
            for (j, &wj) in weights.iter().enumerate() {
                for z in out.slice_data_mut(j) {
                    *z *= wj;
                }
            }
        }
    }
    out
}

/// Norm on a time interval, realized as the smallest norm over a fixed set
/// of explicit extensions of `u|_I` (the ambient field, smooth cutoffs, and
/// for `S`/`W` free continuations). The value is an upper bound for the
/// infimum over all extensions and is labelled as such.
pub fn restricted_norm(
    u: &SpacetimeField,
    spec: &NormSpec,
    settings: &NormSettings,
) -> Result<NormReport, NormError> {
    let interval = spec
        .interval
        .ok_or_else(|| NormError::Invalid("restricted_norm needs an interval".into()))?;
    let g = u.grid().clone();
    let (t0, t1) = g.t_span();
    if !(interval.1 > interval.0) || interval.0 < t0 - 1e-12 || interval.1 > t1 + 1e-12 {
        return Err(NormError::DegenerateInterval(interval.0, interval.1));
    }
    let idx = interval_samples(&g, interval);
    if idx.len() < EXTENSION_MARGIN {
        return Err(NormError::DegenerateInterval(interval.0, interval.1));
    }
    let (lo, hi) = (idx[0], *idx.last().unwrap());
    let mut inner = spec.clone();
    inner.interval = None;
    let ts = u.to_repr(Repr::Physical, Repr::Spectral);
    let mut candidates = vec![Extension::Ambient];
    if idx.len() < g.nt() {
        candidates.push(Extension::Cutoff { wide: false });
        candidates.push(Extension::Cutoff { wide: true });
        match spec.family {
            Family::S { .. } | Family::Sobolev { .. } | Family::MixedLp { .. } => {
                candidates.push(Extension::Free {
                    wide: true,
                    frame: Frame::Schrodinger,
                });
                candidates.push(Extension::Free {
                    wide: false,
                    frame: Frame::Schrodinger,
                });
            }
            Family::W { .. } => {
                candidates.push(Extension::Free {
                    wide: true,
                    frame: Frame::Wave,
                });
                candidates.push(Extension::Free {
                    wide: false,
                    frame: Frame::Wave,
                });
            }
            _ => {}
        }
    }
    let mut best: Option<(NormReport, Extension)> = None;
    for ext in candidates {
        let e = build_extension(&ts, lo, hi, ext);
        let r = adapted_norm(&e, &inner, settings)?;
        if best.as_ref().is_none_or(|(b, _)| r.value < b.value) {
            best = Some((r, ext));
        }
    }
    let (mut report, ext) = best.expect("at least one candidate");
    report.meta.restriction = Some(Restriction {
        interval,
        policy: if idx.len() == g.nt() {
            "exact (interval covers t_span)".into()
        } else {
            RESTRICTION_POLICY.into()
        },
        extension: ext.label(),
    });
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use std::f64::consts::PI;
    use std::sync::Arc;

    #[test]
    fn single_mode_sobolev() {
        let g = Arc::new(make_grid(2, 16, 2.0 * PI, 2, (0.0, 1.0)).unwrap());
        let amp = 0.7;
        let f = Field::from_fn(&g, |x| C64::from_polar(amp, 3.0 * x[0] - 2.0 * x[1]));
        let s = 1.5;
        let expect = amp * (1.0f64 + 13.0).powf(s / 2.0) * (2.0 * PI);
        assert!((sobolev_norm(&f, s) - expect).abs() < 1e-10 * expect);
    }

    #[test]
    fn gaussian_l2_norm() {
        let g = Arc::new(make_grid(1, 1024, 32.0 * PI, 2, (0.0, 1.0)).unwrap());
        let f = Field::from_fn(&g, |x| C64::new((-x[0] * x[0] / 2.0).exp(), 0.0));
        assert!((sobolev_norm(&f, 0.0) - PI.powf(0.25)).abs() < 1e-6);
    }

    #[test]
    fn strichartz_pairs_are_admissible() {
        for d in 1..=4 {
            let p = StrichartzPair::for_dim(d);
            let lhs = 2.0 / p.q_t + d as f64 / p.r_x;
            assert!((lhs - d as f64 / 2.0).abs() < 1e-12, "d = {d}");
            assert_eq!(p.surrogate, d < 3);
        }
        let p = StrichartzPair::for_dim(4);
        assert_eq!((p.r_x, p.dual_r_x), (4.0, 4.0 / 3.0));
    }

    #[test]
    fn ramp_is_one_on_interval() {
        let w = ramp_weights(32, 10, 20, 4, 4);
        assert!(w[10..=20].iter().all(|&x| x == 1.0));
        assert!(w[21] < 1.0 && w[24] > 0.0 && w[25] == 0.0);
        assert!(w[6] > 0.0 && w[5] == 0.0);
    }

    #[test]
    fn exponent_validation() {
        let bad = NormSpec::new(Family::S {
            s: 0.0,
            a: 1.5,
            b: 0.0,
        });
        assert!(matches!(bad.validate(), Err(NormError::BadExponents(_))));
    }
}
