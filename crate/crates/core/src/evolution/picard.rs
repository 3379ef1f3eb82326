//! Fixed-point construction of mild solutions through
//! `Φ(f, g; ψ) = e^{itΔ}f + 𝓘₀[Re(e^{it|∇|}g)ψ] - 𝓘₀[Re(𝓙₀(|∇||ψ|²))ψ]`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::duhamel::{duhamel, DuhamelError, DuhamelOptions};
use super::propagate::{free_halfwave_spacetime, free_schrodinger_spacetime};
use crate::fft::{fft_spatial, Direction};
use crate::grid::{Field, Grid, Repr, SpacetimeField, C64};
use crate::multipliers::Frame;
use crate::norms::{adapted_norm, sobolev_norm, Family, NormError, NormSettings, NormSpec};
use crate::par;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GateMode {
    Enforce,
    Warn,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PicardConfig {
    pub max_iter: usize,
    pub contraction_tol: f64,
    /// Metric for successive differences.
    pub metric: NormSpec,
    /// Regularities `(s, ℓ)` of the gate quantity `‖f‖_{H^s} + ‖g‖_{H^ℓ}`.
    pub gate_regularity: (f64, f64),
    pub epsilon: f64,
    pub gate_mode: GateMode,
    pub duhamel: DuhamelOptions,
}

impl Default for PicardConfig {
    fn default() -> Self {
        PicardConfig {
            max_iter: 50,
            contraction_tol: 1e-12,
            metric: NormSpec::new(Family::Sobolev { s: 0.0 }),
            gate_regularity: (0.0, 0.0),
            epsilon: 0.1,
            gate_mode: GateMode::Enforce,
            duhamel: DuhamelOptions::default(),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PicardError {
    #[error("smallness gate failed: {gate:e} > epsilon = {epsilon:e}")]
    Gate { gate: f64, epsilon: f64 },
    #[error("iteration is not contracting (ratio >= 1 for 3 consecutive steps)")]
    Diverged { history: Vec<f64> },
    #[error("no convergence after {iters} iterations")]
    NotConverged { iters: usize, history: Vec<f64> },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Duhamel(#[from] DuhamelError),
    #[error(transparent)]
    Norm(#[from] NormError),
}

#[derive(Clone, Debug)]
pub struct PicardSolution {
    pub u: SpacetimeField,
    pub v: SpacetimeField,
    pub iters: usize,
    /// Successive differences `‖ψ_{k+1} - ψ_k‖` in the configured metric.
    pub differences: Vec<f64>,
    /// Ratios of consecutive differences.
    pub contraction_history: Vec<f64>,
    pub gate: f64,
}

/// The free evolutions `e^{itΔ}f`, `e^{it|∇|}g` on the time lattice.
pub struct PicardData {
    pub free_u: SpacetimeField,
    pub free_v: SpacetimeField,
    pub opts: DuhamelOptions,
}

impl PicardData {
    pub fn new(f: &Field, g: &Field, grid: &Arc<Grid>, opts: DuhamelOptions) -> Self {
        PicardData {
            free_u: free_schrodinger_spacetime(f, grid),
            free_v: free_halfwave_spacetime(g, grid),
            opts,
        }
    }

    /// `V[ψ] = e^{it|∇|}g - 𝓙₀(|∇||ψ|²)`, time-physical and space-spectral.
    pub fn wave(&self, psi: &SpacetimeField) -> Result<SpacetimeField, DuhamelError> {
        let forcing = gradient_density(psi);
        let j = duhamel(&forcing, Frame::Wave, self.opts)?;
        let mut v = self.free_v.clone();
        v.axpy(C64::new(-1.0, 0.0), &j).expect("matching layout");
        Ok(v)
    }

    /// `Φ(f, g; ψ)` together with the wave component built from `ψ`.
    pub fn phi(
        &self,
        psi: &SpacetimeField,
    ) -> Result<(SpacetimeField, SpacetimeField), DuhamelError> {
        let v = self.wave(psi)?;
        let forcing = product_re(&v, psi);
        let i = duhamel(&forcing, Frame::Schrodinger, self.opts)?;
        let mut u = self.free_u.clone();
        u.axpy(C64::new(1.0, 0.0), &i).expect("matching layout");
        Ok((u, v))
    }
}

/// `|∇||ψ|²` (time-physical, space-spectral).
pub fn gradient_density(psi: &SpacetimeField) -> SpacetimeField {
    let g = psi.grid().clone();
    let p = psi.to_repr(Repr::Physical, Repr::Physical);
    let data: Vec<C64> = par::map_range(p.data().len(), |i| C64::new(p.data()[i].norm_sqr(), 0.0));
    let mut out = SpacetimeField::from_vec(&g, data, Repr::Physical, Repr::Physical)
        .expect("length")
        .into_repr(Repr::Physical, Repr::Spectral);
    let m = g.spatial_len();
    let xi = g.xi_norm_table();
    par::for_each_mut(out.data_mut(), |i, z| *z *= xi[i % m]);
    out
}

/// `Re(V) ψ` (time-physical, space-spectral).
pub fn product_re(v: &SpacetimeField, psi: &SpacetimeField) -> SpacetimeField {
    let g = psi.grid().clone();
    let mut vp = v.to_repr(Repr::Physical, Repr::Physical);
    let pp = psi.to_repr(Repr::Physical, Repr::Physical);
    par::for_each_mut(vp.data_mut(), |i, z| *z = pp.data()[i] * z.re);
    let mut data = vp.data().to_vec();
    fft_spatial(&mut data, g.nt(), g.n(), g.dim(), Direction::Forward);
    SpacetimeField::from_vec(&g, data, Repr::Physical, Repr::Spectral).expect("length")
}

/// `‖f‖_{H^s} + ‖g‖_{H^ℓ}`.
pub fn gate_quantity(f: &Field, g: &Field, s: f64, l: f64) -> f64 {
    sobolev_norm(f, s) + sobolev_norm(g, l)
}

/// Iterate `ψ_{k+1} = Φ(f, g; ψ_k)` from `ψ₀ = e^{itΔ}f`.
pub fn picard_solve(
    f: &Field,
    g: &Field,
    grid: &Arc<Grid>,
    cfg: &PicardConfig,
) -> Result<PicardSolution, PicardError> {
    if cfg.max_iter == 0 || !(cfg.contraction_tol > 0.0) {
        return Err(PicardError::Config(
            "max_iter >= 1 and contraction_tol > 0 required".into(),
        ));
    }
    let (s, l) = cfg.gate_regularity;
    let gate = gate_quantity(f, g, s, l);
    if gate > cfg.epsilon {
        match cfg.gate_mode {
            GateMode::Enforce => {
                return Err(PicardError::Gate {
                    gate,
                    epsilon: cfg.epsilon,
                })
            }
            GateMode::Warn => log::warn!("smallness gate {gate:e} exceeds {:e}", cfg.epsilon),
        }
    }
    let data = PicardData::new(f, g, grid, cfg.duhamel);
    let settings = NormSettings::default();
    let mut psi = data.free_u.clone();
    let mut differences = Vec::new();
    let mut history = Vec::new();
    let mut streak = 0;
    for k in 1..=cfg.max_iter {
        let (next, _) = data.phi(&psi)?;
        let mut diff = next.clone();
        diff.axpy(C64::new(-1.0, 0.0), &psi).expect("layout");
        let dn = adapted_norm(&diff, &cfg.metric, &settings)?.value;
        if let Some(&prev) = differences.last() {
            let ratio = if prev > 0.0 { dn / prev } else { 0.0 };
            history.push(ratio);
            streak = if ratio >= 1.0 { streak + 1 } else { 0 };
        }
        differences.push(dn);
        psi = next;
        if dn < cfg.contraction_tol {
            let v = data.wave(&psi)?;
            return Ok(PicardSolution {
                u: psi,
                v,
                iters: k,
                differences,
                contraction_history: history,
                gate,
            });
        }
        if streak >= 3 {
            return Err(PicardError::Diverged { history });
        }
    }
    Err(PicardError::NotConverged {
        iters: cfg.max_iter,
        history,
    })
}
