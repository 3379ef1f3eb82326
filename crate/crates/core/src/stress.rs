//! Randomised stress tests of the linear and bilinear estimates.
//!
//! Every estimate `LHS ≲ RHS` is sampled over seeded ensembles, cell by cell
//! over a dyadic sweep, and the observed ratios `LHS / RHS` are tracked. An
//! estimate with a scale-independent constant shows bounded per-scale maxima
//! without an increasing trend.
//!
//! Inputs are built in profile space (`e^{-ith(ξ)}û`) and multiplied by a
//! smooth window compactly supported inside the time span, so products and
//! Duhamel integrals stay compatible with the periodic time lattice.

use std::f64::consts::PI;
use std::sync::Arc;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::evolution::duhamel::{duhamel, DuhamelError, DuhamelOptions};
use crate::evolution::picard::product_re;
use crate::fft::{fft_spatial, Direction};
use crate::grid::{make_grid, Grid, GridError, Repr, SpacetimeField, C64};
use crate::multipliers::{rho, temporal_weight_apply, Frame};
use crate::norms::{adapted_norm, mixed_lp_norm, Family, NormError, NormSettings, NormSpec};
use crate::random::{complex_normal, rng_for};
use crate::{par, stats};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Inequality {
    /// `‖𝓘₀[F_λ]‖_{S_λ} ≲ ‖F_λ‖_{N_λ}`.
    EnergySchrodinger,
    /// `‖𝓙₀[G_λ]‖_{W_λ} ≲ ‖G_λ‖_{R_λ}`.
    EnergyWave,
    /// Fractional-time product estimate, swept over `μ`.
    Product,
    /// Gluing restricted norms over two overlapping intervals.
    Decomposability,
    /// `‖Re(V)u‖_N ≲ ‖V‖_W ‖u‖_S`.
    BilinearSchrodinger,
    /// `‖𝓙₀(|∇|(φ̄ψ))‖_W ≲ ‖φ‖_S ‖ψ‖_S`.
    BilinearWave,
}

impl Inequality {
    pub fn name(&self) -> &'static str {
        match self {
            Inequality::EnergySchrodinger => "energy_schrodinger",
            Inequality::EnergyWave => "energy_wave",
            Inequality::Product => "product",
            Inequality::Decomposability => "decomposability",
            Inequality::BilinearSchrodinger => "bilinear_schrodinger",
            Inequality::BilinearWave => "bilinear_wave",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            Inequality::EnergySchrodinger,
            Inequality::EnergyWave,
            Inequality::Product,
            Inequality::Decomposability,
            Inequality::BilinearSchrodinger,
            Inequality::BilinearWave,
        ]
        .into_iter()
        .find(|i| i.name() == s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ensemble {
    /// Random profile modulations up to a quarter of the temporal lattice.
    GaussianBand,
    /// Windowed free waves (zero profile modulation).
    FreeWave,
    /// Profile modulations within one lattice step of the characteristic
    /// surface.
    NearParaboloid,
    /// Profile modulations up to the dyadic scale (capped at a quarter of
    /// the temporal lattice).
    LowModulation,
}

impl Ensemble {
    pub fn name(&self) -> &'static str {
        match self {
            Ensemble::GaussianBand => "gaussian_band",
            Ensemble::FreeWave => "free_wave",
            Ensemble::NearParaboloid => "near_paraboloid",
            Ensemble::LowModulation => "low_modulation",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            Ensemble::GaussianBand,
            Ensemble::FreeWave,
            Ensemble::NearParaboloid,
            Ensemble::LowModulation,
        ]
        .into_iter()
        .find(|e| e.name() == s)
    }
}

/// Hölder exponents of the product estimate: the product is measured in
/// `L^{p_t}_t L^{p_x}_x`, `v` in `L^{r_t}L^{r_x}`, `u` in `L^{q_t}L^{q_x}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HolderExponents {
    pub p_x: f64,
    pub q_x: f64,
    pub r_x: f64,
    pub p_t: f64,
    pub q_t: f64,
    pub r_t: f64,
}

impl Default for HolderExponents {
    fn default() -> Self {
        HolderExponents {
            p_x: 2.0,
            q_x: 2.0,
            r_x: f64::INFINITY,
            p_t: 2.0,
            q_t: 2.0,
            r_t: f64::INFINITY,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StressConfig {
    pub inequality: Inequality,
    pub ensemble: Ensemble,
    pub d: usize,
    pub samples: usize,
    /// Sweep values: `λ` (energy, bilinear, decomposability) or `μ`
    /// (product).
    pub scales: Vec<f64>,
    /// Second frequencies of the bilinear heat map.
    pub low: Vec<f64>,
    pub s: f64,
    pub l: f64,
    pub a: f64,
    pub b: f64,
    pub alpha: f64,
    pub beta: f64,
    pub holder: HolderExponents,
    pub seed: u64,
    pub box_length: f64,
    pub period: f64,
    pub nt: usize,
    pub modulation_margin: f64,
    /// Multiplies every input; ratios must not depend on it.
    pub amplitude: f64,
    /// Refuse parameter points outside the quoted hypotheses.
    pub enforce_hypotheses: bool,
}

impl StressConfig {
    /// Defaults for `inequality` at its reference parameter point.
    pub fn new(inequality: Inequality) -> Self {
        let mut cfg = StressConfig {
            inequality,
            ensemble: Ensemble::GaussianBand,
            d: 2,
            samples: 100,
            scales: vec![2.0, 4.0, 8.0, 16.0],
            low: vec![1.0],
            s: 0.5,
            l: 0.0,
            a: 0.0,
            b: 0.0,
            alpha: 0.0,
            beta: 0.5,
            holder: HolderExponents::default(),
            seed: 0,
            box_length: 2.0 * PI,
            period: PI,
            nt: 64,
            modulation_margin: 2.0,
            amplitude: 1.0,
            enforce_hypotheses: true,
        };
        match inequality {
            // At λ = 2 the window bandwidth is comparable to λ², which
            // inflates the ratio tenfold; sweep from 4 upward.
            Inequality::EnergySchrodinger => {
                cfg.scales = vec![4.0, 8.0, 16.0, 32.0, 64.0];
                cfg.ensemble = Ensemble::FreeWave;
            }
            Inequality::EnergyWave => {
                cfg.scales = vec![4.0, 8.0, 16.0, 32.0, 64.0];
                cfg.ensemble = Ensemble::NearParaboloid;
            }
            Inequality::Product => {
                cfg.scales = vec![2.0, 4.0, 8.0, 16.0];
                cfg.a = 0.5;
                cfg.ensemble = Ensemble::LowModulation;
            }
            Inequality::Decomposability => {
                cfg.scales = vec![4.0];
                cfg.samples = 8;
                cfg.nt = 256;
            }
            Inequality::BilinearSchrodinger => {
                // The product oscillates at the wave frequency in the lab
                // frame, so the lattice has to resolve 1.5λ plus window tails.
                cfg.scales = vec![4.0, 8.0, 16.0, 32.0];
                cfg.low = vec![1.0, 2.0];
                cfg.nt = 128;
                cfg.s = 1.0;
                cfg.beta = 0.0;
                cfg.ensemble = Ensemble::NearParaboloid;
            }
            Inequality::BilinearWave => {
                // |φ|² products oscillate at |ξ|² ≈ λ²; a short span lets the
                // lattice resolve them up to λ = 16.
                cfg.scales = vec![2.0, 4.0, 8.0, 16.0];
                cfg.low = vec![1.0, 2.0];
                cfg.period = PI / 16.0;
                cfg.ensemble = Ensemble::NearParaboloid;
                cfg.s = 1.0;
                cfg.l = 0.5;
                cfg.beta = 0.5;
            }
        }
        cfg
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serialises");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StressError {
    #[error("parameters violate the hypotheses: {0}")]
    Hypothesis(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Norm(#[from] NormError),
    #[error(transparent)]
    Duhamel(#[from] DuhamelError),
}

/// One quoted hypothesis and whether the configuration satisfies it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub condition: String,
    pub holds: bool,
}

fn hyp(condition: &str, holds: bool) -> Hypothesis {
    Hypothesis {
        condition: condition.to_string(),
        holds,
    }
}

const TOL: f64 = 1e-12;

/// The hypothesis set of the target estimate, evaluated at `cfg`.
pub fn hypotheses(cfg: &StressConfig) -> Vec<Hypothesis> {
    let d = cfg.d as f64;
    let (s, l, a, b, beta) = (cfg.s, cfg.l, cfg.a, cfg.b, cfg.beta);
    let unit = |x: f64| (-TOL..=1.0 + TOL).contains(&x);
    let near = |x: f64, y: f64| (x - y).abs() <= TOL;
    match cfg.inequality {
        Inequality::EnergySchrodinger | Inequality::Decomposability => {
            vec![hyp("0 <= a <= 1", unit(a)), hyp("0 <= b <= 1", unit(b))]
        }
        Inequality::EnergyWave => vec![hyp("0 <= alpha <= 1", unit(cfg.alpha))],
        Inequality::Product => {
            let h = cfg.holder;
            let inv = |x: f64| 1.0 / x;
            let in_range = [h.p_x, h.q_x, h.r_x, h.p_t, h.q_t, h.r_t]
                .iter()
                .all(|&x| x >= 1.0);
            vec![
                hyp("1 <= all exponents <= inf", in_range),
                hyp("1/p = 1/q + 1/r", near(inv(h.p_x), inv(h.q_x) + inv(h.r_x))),
                hyp(
                    "1/p~ = 1/q~ + 1/r~",
                    near(inv(h.p_t), inv(h.q_t) + inv(h.r_t)),
                ),
                hyp("-1 <= a <= 1", (-1.0 - TOL..=1.0 + TOL).contains(&a)),
            ]
        }
        Inequality::BilinearSchrodinger => vec![
            hyp("0 <= s <= l + 2", s >= -TOL && s <= l + 2.0 + TOL),
            hyp("beta >= 0", beta >= -TOL),
            hyp("0 <= a, b <= 1", unit(a) && unit(b)),
            hyp("l >= b + (d-4)/2", l >= b + (d - 4.0) / 2.0 - TOL),
            hyp("s - l <= a + 1 - b", s - l <= a + 1.0 - b + TOL),
            hyp("s + l >= 2a", s + l >= 2.0 * a - TOL),
            hyp(
                "beta >= max{s-1, (d-4)/2 + b}",
                beta >= (s - 1.0).max((d - 4.0) / 2.0 + b) - TOL,
            ),
            hyp(
                "(s, l) != ((d-2)/2 + a, (d-4)/2 + b)",
                !(near(s, (d - 2.0) / 2.0 + a) && near(l, (d - 4.0) / 2.0 + b)),
            ),
            hyp(
                "(beta, b) != ((d-2)/2, 1)",
                !(near(beta, (d - 2.0) / 2.0) && near(b, 1.0)),
            ),
        ],
        Inequality::BilinearWave => vec![
            hyp("s, l, beta >= 0", s >= -TOL && l >= -TOL && beta >= -TOL),
            hyp("0 <= a, b <= 1", unit(a) && unit(b)),
            hyp(
                "beta <= min{s, 2s - (d-2)/2 - a}",
                beta <= s.min(2.0 * s - (d - 2.0) / 2.0 - a) + TOL,
            ),
            hyp(
                "2a <= 2s - l - (d-2)/2",
                2.0 * a <= 2.0 * s - l - (d - 2.0) / 2.0 + TOL,
            ),
            hyp("a - b <= s - l", a - b <= s - l + TOL),
            hyp(
                "(s, l) != (d/2, (d+2)/2), ((d-2)/2 + a, (d-2)/2 + b)",
                !(near(s, d / 2.0) && near(l, (d + 2.0) / 2.0))
                    && !(near(s, (d - 2.0) / 2.0 + a) && near(l, (d - 2.0) / 2.0 + b)),
            ),
            hyp(
                "(s, beta) != ((d-2)/2 + a, (d-2)/2 + a)",
                !(near(s, (d - 2.0) / 2.0 + a) && near(beta, (d - 2.0) / 2.0 + a)),
            ),
        ],
    }
}

/// A sampled ratio.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub scale: f64,
    /// Second frequency for bilinear cells.
    pub low: Option<f64>,
    pub index: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

/// Per-cell maxima over a `(scale, low)` grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeatMap {
    pub scales: Vec<f64>,
    pub low: Vec<f64>,
    /// `max_ratio[i][j]` for `scales[i]`, `low[j]`.
    pub max_ratio: Vec<Vec<f64>>,
}

impl HeatMap {
    /// Rank correlation of the column `low[j]` against the scales.
    pub fn column_trend(&self, j: usize) -> f64 {
        let col: Vec<f64> = self.max_ratio.iter().map(|r| r[j]).collect();
        stats::spearman(&self.scales, &col)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("scale,low,max_ratio\n");
        for (i, s) in self.scales.iter().enumerate() {
            for (j, m) in self.low.iter().enumerate() {
                out.push_str(&format!("{s},{m},{:.9e}\n", self.max_ratio[i][j]));
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StressReport {
    pub inequality: String,
    pub ensemble: String,
    pub config_hash: String,
    pub hypotheses: Vec<Hypothesis>,
    pub records: Vec<SampleRecord>,
    /// All-zero samples that were skipped.
    pub skipped: usize,
    /// `(scale, max ratio)` per sweep value.
    pub per_scale_max: Vec<(f64, f64)>,
    /// `max / min` of the per-scale maxima.
    pub spread: f64,
    /// Rank correlation of the per-scale maxima against the scale.
    pub trend: f64,
    pub worst: Option<SampleRecord>,
    pub heat_map: Option<HeatMap>,
    /// Decomposability only: fitted exponent of the gluing constant against
    /// the inverse overlap length.
    pub envelope_exponent: Option<f64>,
}

impl StressReport {
    pub fn inside_hypotheses(&self) -> bool {
        self.hypotheses.iter().all(|h| h.holds)
    }

    pub fn records_csv(&self) -> String {
        let mut out = String::from("inequality,scale,low,index,lhs,rhs,ratio\n");
        for r in &self.records {
            let low = r.low.map(|v| v.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{:.9e},{:.9e},{:.9e}\n",
                self.inequality, r.scale, low, r.index, r.lhs, r.rhs, r.ratio
            ));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }
}

/// Run the configured stress test.
pub fn run_stress(cfg: &StressConfig) -> Result<StressReport, StressError> {
    validate(cfg)?;
    let hyps = hypotheses(cfg);
    let violated: Vec<&str> = hyps
        .iter()
        .filter(|h| !h.holds)
        .map(|h| h.condition.as_str())
        .collect();
    if cfg.enforce_hypotheses && !violated.is_empty() {
        return Err(StressError::Hypothesis(violated.join("; ")));
    }
    let lows: Vec<f64> = match cfg.inequality {
        Inequality::BilinearSchrodinger | Inequality::BilinearWave => cfg.low.clone(),
        _ => vec![],
    };
    let mut records = Vec::new();
    let mut skipped = 0;
    let mut envelope = None;
    let mut scales = cfg.scales.clone();
    if cfg.inequality == Inequality::Decomposability {
        let (recs, overlaps, exponent) = decomposability(cfg)?;
        records = recs;
        scales = overlaps;
        envelope = exponent;
    } else {
        let cells: Vec<(usize, f64, Option<f64>)> = if lows.is_empty() {
            cfg.scales
                .iter()
                .enumerate()
                .map(|(i, &s)| (i, s, None))
                .collect()
        } else {
            let mut c = Vec::new();
            for (i, &s) in cfg.scales.iter().enumerate() {
                for (j, &m) in lows.iter().enumerate() {
                    c.push((i * lows.len() + j, s, Some(m)));
                }
            }
            c
        };
        for (cell, scale, low) in cells {
            let ctx = CellContext::new(cfg, scale, low)?;
            for k in 0..cfg.samples {
                let mut rng = rng_for(cfg.seed, ((cell as u64) << 32) | k as u64);
                let (lhs, rhs) = ctx.sample(&mut rng)?;
                if rhs == 0.0 || !rhs.is_finite() || !lhs.is_finite() {
                    skipped += 1;
                    continue;
                }
                records.push(SampleRecord {
                    scale,
                    low,
                    index: k,
                    lhs,
                    rhs,
                    ratio: lhs / rhs,
                });
            }
        }
    }
    Ok(summarise(
        cfg, &scales, hyps, records, skipped, &lows, envelope,
    ))
}

fn run_checked(cfg: &StressConfig, allowed: &[Inequality]) -> Result<StressReport, StressError> {
    if !allowed.contains(&cfg.inequality) {
        return Err(StressError::Config(format!(
            "inequality {} is not handled here",
            cfg.inequality.name()
        )));
    }
    run_stress(cfg)
}

/// Energy inequality for `𝓘₀` (or `𝓙₀` with [`Inequality::EnergyWave`]).
pub fn stress_energy_inequality(cfg: &StressConfig) -> Result<StressReport, StressError> {
    run_checked(
        cfg,
        &[Inequality::EnergySchrodinger, Inequality::EnergyWave],
    )
}

pub fn stress_product_estimate(cfg: &StressConfig) -> Result<StressReport, StressError> {
    run_checked(cfg, &[Inequality::Product])
}

pub fn stress_decomposability(cfg: &StressConfig) -> Result<StressReport, StressError> {
    run_checked(cfg, &[Inequality::Decomposability])
}

pub fn stress_bilinear_schrodinger(cfg: &StressConfig) -> Result<StressReport, StressError> {
    run_checked(cfg, &[Inequality::BilinearSchrodinger])
}

pub fn stress_bilinear_wave(cfg: &StressConfig) -> Result<StressReport, StressError> {
    run_checked(cfg, &[Inequality::BilinearWave])
}

fn summarise(
    cfg: &StressConfig,
    scales: &[f64],
    hyps: Vec<Hypothesis>,
    records: Vec<SampleRecord>,
    skipped: usize,
    lows: &[f64],
    envelope_exponent: Option<f64>,
) -> StressReport {
    let max_where = |pred: &dyn Fn(&SampleRecord) -> bool| {
        records
            .iter()
            .filter(|r| pred(r))
            .map(|r| r.ratio)
            .fold(0.0, f64::max)
    };
    let per_scale_max: Vec<(f64, f64)> = scales
        .iter()
        .map(|&s| (s, max_where(&|r: &SampleRecord| r.scale == s)))
        .collect();
    let maxima: Vec<f64> = per_scale_max.iter().map(|p| p.1).collect();
    let hi = maxima.iter().cloned().fold(0.0, f64::max);
    let lo = maxima.iter().cloned().fold(f64::INFINITY, f64::min);
    let spread = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    let scales: Vec<f64> = per_scale_max.iter().map(|p| p.0).collect();
    let trend = stats::spearman(&scales, &maxima);
    let worst = records
        .iter()
        .copied()
        .max_by(|x, y| x.ratio.total_cmp(&y.ratio));
    let heat_map = if lows.is_empty() {
        None
    } else {
        Some(HeatMap {
            scales: scales.to_vec(),
            low: lows.to_vec(),
            max_ratio: scales
                .iter()
                .map(|&s| {
                    lows.iter()
                        .map(|&m| max_where(&|r: &SampleRecord| r.scale == s && r.low == Some(m)))
                        .collect()
                })
                .collect(),
        })
    };
    StressReport {
        inequality: cfg.inequality.name().to_string(),
        ensemble: cfg.ensemble.name().to_string(),
        config_hash: cfg.hash(),
        hypotheses: hyps,
        records,
        skipped,
        per_scale_max,
        spread,
        trend,
        worst,
        heat_map,
        envelope_exponent,
    }
}

fn validate(cfg: &StressConfig) -> Result<(), StressError> {
    let bad = |m: &str| Err(StressError::Config(m.to_string()));
    if !(1..=4).contains(&cfg.d) {
        return bad("d must be in 1..=4");
    }
    if cfg.samples == 0 || cfg.scales.is_empty() {
        return bad("samples and scales must be non-empty");
    }
    if cfg
        .scales
        .iter()
        .chain(&cfg.low)
        .any(|&x| !(x > 0.0 && x.is_finite()))
    {
        return bad("scales must be positive");
    }
    if !(cfg.period > 0.0 && cfg.box_length > 0.0 && cfg.modulation_margin > 0.0) {
        return bad("period, box_length and modulation_margin must be positive");
    }
    if cfg.nt < 16 || !cfg.nt.is_power_of_two() {
        return bad("nt must be a power of two >= 16");
    }
    if matches!(
        cfg.inequality,
        Inequality::BilinearSchrodinger | Inequality::BilinearWave
    ) && cfg.low.is_empty()
    {
        return bad("bilinear runs need at least one low frequency");
    }
    Ok(())
}

const WINDOW_CENTRE: f64 = 0.325;

/// Window supported on `[0.1T, 0.55T]` and its derivative.
fn window(t: f64, period: f64) -> (f64, f64) {
    let (t0, t1) = (0.1 * period, 0.55 * period);
    if t <= t0 || t >= t1 {
        return (0.0, 0.0);
    }
    let x = (2.0 * t - t0 - t1) / (t1 - t0);
    let q = 1.0 - x * x;
    let w = (1.0 - 1.0 / q).exp();
    let dxdt = 2.0 / (t1 - t0);
    (w, w * (-2.0 * x / (q * q)) * dxdt)
}

/// Equal to one up to `0.6T`, smoothly zero from `0.9T` on.
fn extension_cutoff(t: f64, period: f64) -> f64 {
    let mid = 0.75 * period;
    let half = 0.15 * period;
    rho((mid - t) / half)
}

/// Grid whose spatial Nyquist frequency exceeds `reach`.
fn cell_grid(cfg: &StressConfig, reach: f64) -> Result<Arc<Grid>, StressError> {
    let step = 2.0 * PI / cfg.box_length;
    let need = (2.0 * reach / step).floor() as usize + 1;
    let n = need.next_power_of_two().max(16);
    Ok(Arc::new(make_grid(
        cfg.d,
        n,
        cfg.box_length,
        cfg.nt,
        (0.0, cfg.period),
    )?))
}

/// Seeded input with spatial support in `lo ≤ |ξ| ≤ hi`, profile modulations
/// drawn according to the ensemble, windowed in time. Returns the field
/// (time-physical, space-spectral) and, if requested, `i∂_t` of its profile
/// carried back to the lab frame, i.e. `(i∂_t + L)u` for the operator `L`
/// whose phase the frame removes.
struct Draw {
    field: SpacetimeField,
    forcing: Option<SpacetimeField>,
}

#[allow(clippy::too_many_arguments)]
fn draw(
    grid: &Arc<Grid>,
    frame: Frame,
    band: (f64, f64),
    modulations: &[f64],
    amplitude: f64,
    with_forcing: bool,
    rng: &mut ChaCha8Rng,
) -> Draw {
    let m = grid.spatial_len();
    let modes: Vec<usize> = (0..m)
        .filter(|&k| {
            let r = grid.xi_sq(k).sqrt();
            !grid.is_nyquist(k) && r >= band.0 && r <= band.1
        })
        .collect();
    let coeffs: Vec<Vec<C64>> = modes
        .iter()
        .map(|_| {
            modulations
                .iter()
                .map(|_| complex_normal(rng) * amplitude)
                .collect()
        })
        .collect();
    let times = grid.times();
    let period = grid.period();
    let mut u = SpacetimeField::zeros(grid, Repr::Physical, Repr::Spectral);
    let mut f = with_forcing.then(|| SpacetimeField::zeros(grid, Repr::Physical, Repr::Spectral));
    for (j, &t) in times.iter().enumerate() {
        let (w, dw) = window(t, period);
        if w == 0.0 && dw == 0.0 {
            continue;
        }
        for (idx, &k) in modes.iter().enumerate() {
            let h = frame.rate(grid.xi_sq(k).sqrt());
            let lab = C64::from_polar(1.0, t * h);
            let mut p = C64::new(0.0, 0.0);
            let mut dp = C64::new(0.0, 0.0);
            for (c, &nu) in coeffs[idx].iter().zip(modulations) {
                let e = *c * C64::from_polar(1.0, nu * t);
                p += e;
                dp += e * C64::new(0.0, nu);
            }
            u.slice_data_mut(j)[k] = p * w * lab;
            if let Some(f) = f.as_mut() {
                let deriv = p * dw + dp * w;
                f.slice_data_mut(j)[k] = C64::new(0.0, 1.0) * deriv * lab;
            }
        }
    }
    Draw {
        field: u,
        forcing: f,
    }
}

/// Profile modulations allowed by the ensemble at dyadic scale `lam`.
fn modulations(ens: Ensemble, grid: &Grid, lam: f64) -> Vec<f64> {
    let step = 2.0 * PI / grid.period();
    let quarter = grid.nt() as f64 / 4.0 * step;
    let cap = match ens {
        Ensemble::GaussianBand => quarter,
        Ensemble::FreeWave => 0.0,
        Ensemble::NearParaboloid => step,
        Ensemble::LowModulation => lam.clamp(step, quarter),
    };
    let k = (cap / step + 1e-9).floor() as i64;
    (-k..=k).map(|j| j as f64 * step).collect()
}

fn band(lam: f64) -> (f64, f64) {
    (0.75 * lam, 1.5 * lam)
}

/// Multiply by the extension cutoff in time.
fn cut_after_support(u: &mut SpacetimeField) {
    let g = u.grid().clone();
    let times = g.times();
    let m = g.spatial_len();
    let period = g.period();
    par::for_each_chunk_mut(u.data_mut(), m, |j, row| {
        let c = extension_cutoff(times[j], period);
        for z in row.iter_mut() {
            *z *= c;
        }
    });
}

struct CellContext<'a> {
    cfg: &'a StressConfig,
    scale: f64,
    low: Option<f64>,
    grid: Arc<Grid>,
    settings: NormSettings,
}

impl<'a> CellContext<'a> {
    fn new(cfg: &'a StressConfig, scale: f64, low: Option<f64>) -> Result<Self, StressError> {
        let reach = match cfg.inequality {
            Inequality::Product => 4.0,
            Inequality::BilinearSchrodinger | Inequality::BilinearWave => {
                1.5 * (scale + low.unwrap_or(1.0))
            }
            _ => band(scale).1,
        };
        Ok(CellContext {
            cfg,
            scale,
            low,
            grid: cell_grid(cfg, reach)?,
            settings: NormSettings::with_margin(cfg.modulation_margin),
        })
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Result<(f64, f64), StressError> {
        let cfg = self.cfg;
        let g = &self.grid;
        let lam = self.scale;
        let amp = cfg.amplitude;
        match cfg.inequality {
            Inequality::EnergySchrodinger => {
                let mods = modulations(cfg.ensemble, g, lam);
                let dr = draw(g, Frame::Schrodinger, band(lam), &mods, amp, true, rng);
                let forcing = dr.forcing.expect("requested");
                let mut out = duhamel(&forcing, Frame::Schrodinger, DuhamelOptions::default())?;
                cut_after_support(&mut out);
                let (s, a, b) = (cfg.s, cfg.a, cfg.b);
                let lhs = self.block_norm(&out, Family::S { s, a, b })?;
                let rhs = self.block_norm(&forcing, Family::N { s, a, b })?;
                Ok((lhs, rhs))
            }
            Inequality::EnergyWave => {
                let mods = modulations(cfg.ensemble, g, lam);
                let dr = draw(g, Frame::Wave, band(lam), &mods, amp, true, rng);
                let forcing = dr.forcing.expect("requested");
                let mut out = duhamel(&forcing, Frame::Wave, DuhamelOptions::default())?;
                cut_after_support(&mut out);
                let (l, alpha, beta) = (cfg.l, cfg.alpha, cfg.beta);
                let lhs = self.block_norm(&out, Family::W { l, alpha, beta })?;
                let rhs = self.block_norm(&forcing, Family::R { l, alpha, beta })?;
                Ok((lhs, rhs))
            }
            Inequality::Product => self.product_sample(rng),
            Inequality::BilinearSchrodinger => {
                let mu = self.low.expect("bilinear cell");
                let wm = modulations(cfg.ensemble, g, lam);
                let sm = modulations(cfg.ensemble, g, mu);
                let v = draw(g, Frame::Wave, band(lam), &wm, amp, false, rng).field;
                let u = draw(g, Frame::Schrodinger, band(mu), &sm, amp, false, rng).field;
                let prod = product_re(&v, &u);
                let (s, l, a, b, beta) = (cfg.s, cfg.l, cfg.a, cfg.b, cfg.beta);
                let lhs = self.full_norm(&prod, Family::N { s, a, b })?;
                let rhs = self.full_norm(&v, Family::W { l, alpha: a, beta })?
                    * self.full_norm(&u, Family::S { s, a, b: 0.0 })?;
                Ok((lhs, rhs))
            }
            Inequality::BilinearWave => {
                let mu = self.low.expect("bilinear cell");
                let m1 = modulations(cfg.ensemble, g, lam);
                let m2 = modulations(cfg.ensemble, g, mu);
                let phi = draw(g, Frame::Schrodinger, band(lam), &m1, amp, false, rng).field;
                let psi = draw(g, Frame::Schrodinger, band(mu), &m2, amp, false, rng).field;
                let forcing = gradient_product(&phi, &psi);
                let mut out = duhamel(&forcing, Frame::Wave, DuhamelOptions::default())?;
                cut_after_support(&mut out);
                let (s, l, a, b, beta) = (cfg.s, cfg.l, cfg.a, cfg.b, cfg.beta);
                let lhs = self.full_norm(&out, Family::W { l, alpha: a, beta })?;
                let rhs = self.full_norm(&phi, Family::S { s, a, b })?
                    * self.full_norm(&psi, Family::S { s, a, b })?;
                Ok((lhs, rhs))
            }
            Inequality::Decomposability => unreachable!("handled separately"),
        }
    }

    fn block_norm(&self, u: &SpacetimeField, family: Family) -> Result<f64, StressError> {
        let spec = NormSpec::new(family).block(self.scale);
        Ok(adapted_norm(u, &spec, &self.settings)?.value)
    }

    fn full_norm(&self, u: &SpacetimeField, family: Family) -> Result<f64, StressError> {
        Ok(adapted_norm(u, &NormSpec::new(family), &self.settings)?.value)
    }

    /// `‖(μ+|∂_t|)^a(vu)‖` against `μ^{-|a|}‖(μ+|∂_t|)^{|a|}v‖‖(μ+|∂_t|)^a u‖`.
    fn product_sample(&self, rng: &mut ChaCha8Rng) -> Result<(f64, f64), StressError> {
        let cfg = self.cfg;
        let g = &self.grid;
        let mu = self.scale;
        let mods = modulations(cfg.ensemble, g, mu);
        let v = draw(g, Frame::Lab, (0.0, 2.0), &mods, cfg.amplitude, false, rng).field;
        let u = draw(g, Frame::Lab, (0.0, 2.0), &mods, cfg.amplitude, false, rng).field;
        Ok(product_estimate(&v, &u, mu, cfg.a, &cfg.holder))
    }
}

/// Both sides of the product estimate
/// `‖(μ+|∂_t|)^a(vu)‖ ≲ μ^{-|a|}‖(μ+|∂_t|)^{|a|}v‖‖(μ+|∂_t|)^a u‖`
/// in the mixed norms named by `h`.
pub fn product_estimate(
    v: &SpacetimeField,
    u: &SpacetimeField,
    mu: f64,
    a: f64,
    h: &HolderExponents,
) -> (f64, f64) {
    let g = u.grid().clone();
    let vp = v.to_repr(Repr::Physical, Repr::Physical);
    let up = u.to_repr(Repr::Physical, Repr::Physical);
    let data: Vec<C64> = par::map_range(vp.data().len(), |i| vp.data()[i] * up.data()[i]);
    let vu = SpacetimeField::from_vec(&g, data, Repr::Physical, Repr::Physical).expect("length");
    let lhs = mixed_lp_norm(&temporal_weight_apply(a, mu, &vu), h.p_t, h.p_x, 0.0);
    let rhs = mu.powf(-a.abs())
        * mixed_lp_norm(&temporal_weight_apply(a.abs(), mu, v), h.r_t, h.r_x, 0.0)
        * mixed_lp_norm(&temporal_weight_apply(a, mu, u), h.q_t, h.q_x, 0.0);
    (lhs, rhs)
}

/// Empirical interpolation exponent: the least-squares `θ` in
/// `lhs ≈ C·x^θ·y^{1-θ}` over the samples, with its intercept `log C`.
pub fn fit_interpolation_exponent(lhs: &[f64], x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let n = lhs.len();
    if n < 2 || x.len() != n || y.len() != n {
        return None;
    }
    if lhs.iter().chain(x).chain(y).any(|&v| !(v > 0.0)) {
        return None;
    }
    let xs: Vec<f64> = x.iter().zip(y).map(|(a, b)| (a / b).ln()).collect();
    let ys: Vec<f64> = lhs.iter().zip(y).map(|(l, b)| (l / b).ln()).collect();
    let (theta, c, _) = stats::ols(&xs, &ys);
    Some((theta, c))
}

/// `|∇|(φ̄ψ)` (time-physical, space-spectral).
fn gradient_product(phi: &SpacetimeField, psi: &SpacetimeField) -> SpacetimeField {
    let g = phi.grid().clone();
    let a = phi.to_repr(Repr::Physical, Repr::Physical);
    let b = psi.to_repr(Repr::Physical, Repr::Physical);
    let mut data: Vec<C64> = par::map_range(a.data().len(), |i| a.data()[i].conj() * b.data()[i]);
    fft_spatial(&mut data, g.nt(), g.n(), g.dim(), Direction::Forward);
    let m = g.spatial_len();
    let xi = g.xi_norm_table();
    par::for_each_mut(&mut data, |i, z| *z *= xi[i % m]);
    SpacetimeField::from_vec(&g, data, Repr::Physical, Repr::Spectral).expect("length")
}

/// Gluing constants `‖u‖_{S(I₁∪I₂)} / (‖u‖_{S(I₁)} + ‖u‖_{S(I₂)})` for
/// overlaps halving from a quarter of the span down to 8 samples.
#[allow(clippy::type_complexity)]
fn decomposability(
    cfg: &StressConfig,
) -> Result<(Vec<SampleRecord>, Vec<f64>, Option<f64>), StressError> {
    let lam = cfg.scales[0];
    let grid = cell_grid(cfg, band(lam).1)?;
    let settings = NormSettings::with_margin(cfg.modulation_margin);
    let (s, a, b) = (cfg.s, cfg.a, cfg.b);
    let spec = NormSpec::new(Family::S { s, a, b }).block(lam);
    let dt = grid.dt();
    let period = grid.period();
    let mut overlaps = Vec::new();
    let mut width = 0.25 * period;
    while width >= 8.0 * dt - 1e-12 {
        overlaps.push(width);
        width /= 2.0;
    }
    if overlaps.is_empty() {
        return Err(StressError::Config(
            "time lattice too coarse for an 8-sample overlap".into(),
        ));
    }
    // The overlap sits at the centre of the window.
    let centre = WINDOW_CENTRE * period;
    let mut records = Vec::new();
    for k in 0..cfg.samples {
        let mut rng = rng_for(cfg.seed, k as u64);
        let mods = modulations(cfg.ensemble, &grid, lam);
        let mut u = draw(
            &grid,
            Frame::Schrodinger,
            band(lam),
            &mods,
            cfg.amplitude,
            false,
            &mut rng,
        )
        .field;
        if cfg.ensemble == Ensemble::FreeWave {
            u = free_continued(u);
        }
        let whole = adapted_norm(&u, &spec.clone().on((0.0, period - dt)), &settings)?.value;
        for &w in &overlaps {
            let i1 = (0.0, centre + w / 2.0);
            let i2 = (centre - w / 2.0, period - dt);
            let n1 = adapted_norm(&u, &spec.clone().on(i1), &settings)?.value;
            let n2 = adapted_norm(&u, &spec.clone().on(i2), &settings)?.value;
            let rhs = n1 + n2;
            if rhs > 0.0 {
                records.push(SampleRecord {
                    scale: w,
                    low: None,
                    index: k,
                    lhs: whole,
                    rhs,
                    ratio: whole / rhs,
                });
            }
        }
    }
    let x: Vec<f64> = overlaps.iter().map(|w| (1.0 / w).ln()).collect();
    let y: Vec<f64> = overlaps
        .iter()
        .map(|&w| {
            records
                .iter()
                .filter(|r| r.scale == w)
                .map(|r| r.ratio)
                .fold(0.0, f64::max)
                .ln()
        })
        .collect();
    let exponent = (x.len() >= 2).then(|| stats::ols(&x, &y).0);
    Ok((records, overlaps, exponent))
}

/// The drawn windowed field is replaced by the free wave of its profile at
/// the window centre, so restricted norms see data on the whole span.
fn free_continued(u: SpacetimeField) -> SpacetimeField {
    let g = u.grid().clone();
    let times = g.times();
    let period = g.period();
    let centre = times
        .iter()
        .enumerate()
        .min_by(|x, y| {
            (x.1 - WINDOW_CENTRE * period)
                .abs()
                .total_cmp(&(y.1 - WINDOW_CENTRE * period).abs())
        })
        .map(|(j, _)| j)
        .unwrap_or(0);
    let tc = times[centre];
    let slice = u.slice_data(centre).to_vec();
    let m = g.spatial_len();
    let mut out = SpacetimeField::zeros(&g, Repr::Physical, Repr::Spectral);
    par::for_each_chunk_mut(out.data_mut(), m, |j, row| {
        for (k, z) in row.iter_mut().enumerate() {
            *z = slice[k] * C64::from_polar(1.0, -(times[j] - tc) * g.xi_sq(k));
        }
    });
    out
}
