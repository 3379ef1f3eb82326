//! The static ground state `W(x) = (1 + |x|²/(d(d-2)))⁻¹` in `d = 4`.
//!
//! `W` decays like `|x|⁻²`, so plain periodization leaves a kink at the box
//! faces that spoils spectral accuracy everywhere. The sampled profile is
//! therefore `W·χ` with a smooth radial window `χ = 1` on `|x| ≤ L/4`, and
//! residuals are reported both on the whole box and on that core ball.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{Field, Grid, Repr, C64};
use crate::multipliers::rho;
use crate::par;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GroundStateError {
    #[error("the explicit ground state is only built in d = 4 (got d = {0})")]
    Dimension(usize),
}

#[derive(Clone, Debug)]
pub struct GroundState {
    /// Windowed samples of `W` (physical).
    pub w: Field,
    /// `‖ΔW + W³‖_{L²}` over the whole box.
    pub residual: f64,
    /// `‖ΔW + W³‖_{L²(|x| ≤ L/4)}`.
    pub core_residual: f64,
    /// `‖W‖_{L²(|x| ≤ L/4)}`.
    pub core_norm: f64,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct GroundStateSummary {
    pub residual: f64,
    pub core_residual: f64,
    pub core_norm: f64,
}

impl GroundState {
    pub fn summary(&self) -> GroundStateSummary {
        GroundStateSummary {
            residual: self.residual,
            core_residual: self.core_residual,
            core_norm: self.core_norm,
        }
    }
}

/// `W(r)` in dimension `d`.
pub fn ground_state_profile(r: f64, d: usize) -> f64 {
    let dd = d as f64;
    1.0 / (1.0 + r * r / (dd * (dd - 2.0)))
}

/// Radial window: 1 on `r ≤ L/4`, 0 on `r ≥ 0.45 L`.
pub fn core_window(r: f64, box_length: f64) -> f64 {
    let (r1, r2) = (0.25 * box_length, 0.45 * box_length);
    rho(1.0 - 2.0 * (r - r1) / (r2 - r1))
}

fn radius(x: &[f64]) -> f64 {
    x.iter().map(|c| c * c).sum::<f64>().sqrt()
}

/// `L²` norm over the core ball `|x| ≤ L/4` of physical samples.
pub fn core_norm(f: &Field) -> f64 {
    let g = f.grid();
    let p = f.to_repr(Repr::Physical);
    let d = g.dim();
    let r1 = 0.25 * g.box_length();
    (par::sum_range(p.data().len(), |i| {
        if radius(&g.position(i)[..d]) <= r1 {
            p.data()[i].norm_sqr()
        } else {
            0.0
        }
    }) * g.cell_volume())
    .sqrt()
}

/// Sample `(W, V = -W²)` data and the spectral residual of `ΔW + W³`.
pub fn static_ground_state(grid: &Arc<Grid>) -> Result<GroundState, GroundStateError> {
    let d = grid.dim();
    if d != 4 {
        return Err(GroundStateError::Dimension(d));
    }
    let l = grid.box_length();
    let w = Field::from_fn(grid, |x| {
        let r = radius(x);
        C64::new(ground_state_profile(r, d) * core_window(r, l), 0.0)
    });
    let mut lap = w.to_repr(Repr::Spectral);
    let g = grid.clone();
    par::for_each_mut(lap.data_mut(), |i, z| *z *= -g.xi_sq(i));
    let lap = lap.into_repr(Repr::Physical);
    let res: Vec<C64> = lap
        .data()
        .iter()
        .zip(w.data())
        .map(|(a, b)| a + b * b.norm_sqr())
        .collect();
    let res = Field::from_vec(grid, res, Repr::Physical).expect("length");
    Ok(GroundState {
        residual: res.l2_norm(),
        core_residual: core_norm(&res),
        core_norm: core_norm(&w),
        w,
    })
}

/// Companion wave component `V = -W²`.
pub fn ground_state_wave(w: &Field) -> Field {
    let p = w.to_repr(Repr::Physical);
    let data = p
        .data()
        .iter()
        .map(|z| C64::new(-z.norm_sqr(), 0.0))
        .collect();
    Field::from_vec(w.grid(), data, Repr::Physical).expect("length")
}
