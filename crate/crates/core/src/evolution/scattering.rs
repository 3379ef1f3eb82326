//! Cauchy diagnostic for scattering: increments of the profile
//! `e^{-itΔ}u(t)` between consecutive samples.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fft::Direction;
use crate::grid::{Repr, SpacetimeField};
use crate::multipliers::{to_profile, Frame};
use crate::stats::spearman;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScatteringError {
    #[error("trajectory has {0} samples, at least 32 are needed")]
    TooShort(usize),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CauchyCurve {
    /// Right endpoints `t_{j+1}`.
    pub times: Vec<f64>,
    /// `‖e^{-it_{j+1}Δ}u(t_{j+1}) - e^{-it_jΔ}u(t_j)‖_{H^s}`.
    pub increments: Vec<f64>,
    /// Rank correlation of the increments against time over the last half
    /// of the window (negative means decreasing).
    pub late_trend: f64,
}

impl CauchyCurve {
    pub fn decreasing_late(&self) -> bool {
        self.late_trend < 0.0
    }
}

pub fn scattering_diagnostic(u: &SpacetimeField, s: f64) -> Result<CauchyCurve, ScatteringError> {
    let g = u.grid().clone();
    let nt = g.nt();
    if nt < 32 {
        return Err(ScatteringError::TooShort(nt));
    }
    let m = g.spatial_len();
    let xi_sq = g.xi_sq_table();
    let rate: Vec<f64> = xi_sq
        .iter()
        .map(|&k| Frame::Schrodinger.rate(k.sqrt()))
        .collect();
    let mut w = u.to_repr(Repr::Physical, Repr::Spectral);
    to_profile(w.data_mut(), &g, &rate, Direction::Forward);
    let weight: Vec<f64> = xi_sq.iter().map(|&k| (1.0 + k).powf(s)).collect();
    let times = g.times();
    let cv = g.cell_volume();
    let mut increments = Vec::with_capacity(nt - 1);
    for j in 0..nt - 1 {
        let a = w.slice_data(j);
        let b = w.slice_data(j + 1);
        let sum: f64 = (0..m).map(|k| weight[k] * (b[k] - a[k]).norm_sqr()).sum();
        increments.push((sum * cv).sqrt());
    }
    let half = increments.len() / 2;
    let late_t: Vec<f64> = times[half + 1..].to_vec();
    let late_trend = spearman(&late_t, &increments[half..]);
    Ok(CauchyCurve {
        times: times[1..].to_vec(),
        increments,
        late_trend,
    })
}
