//! Free Schrödinger and half-wave propagators.

use std::sync::Arc;

use crate::grid::{Field, Grid, Repr, SpacetimeField, C64};
use crate::par;

/// `e^{itΔ} f`: mode `ξ` picks up `e^{-it|ξ|²}`. Output keeps the input repr.
pub fn free_schrodinger(f: &Field, t: f64) -> Field {
    phase_flow(f, |xi_sq| -t * xi_sq)
}

/// `e^{it|∇|} g`: mode `ξ` picks up `e^{it|ξ|}`.
pub fn free_halfwave(g: &Field, t: f64) -> Field {
    phase_flow(g, |xi_sq| t * xi_sq.sqrt())
}

fn phase_flow<F>(f: &Field, phase: F) -> Field
where
    F: Fn(f64) -> f64 + Sync + Send,
{
    let repr = f.repr();
    let mut out = f.to_repr(Repr::Spectral);
    let g = f.grid().clone();
    par::for_each_mut(out.data_mut(), |i, z| {
        *z *= C64::from_polar(1.0, phase(g.xi_sq(i)))
    });
    out.into_repr(repr)
}

/// `e^{itΔ} f` sampled at every time of `grid` (time physical, space spectral).
pub fn free_schrodinger_spacetime(f: &Field, grid: &Arc<Grid>) -> SpacetimeField {
    spacetime_flow(f, grid, |xi_sq| -xi_sq)
}

/// `e^{it|∇|} g` sampled at every time of `grid`.
pub fn free_halfwave_spacetime(g: &Field, grid: &Arc<Grid>) -> SpacetimeField {
    spacetime_flow(g, grid, |xi_sq| xi_sq.sqrt())
}

fn spacetime_flow<F>(f: &Field, grid: &Arc<Grid>, rate: F) -> SpacetimeField
where
    F: Fn(f64) -> f64 + Sync + Send,
{
    let spec = f.to_repr(Repr::Spectral);
    let m = grid.spatial_len();
    let rates: Vec<f64> = par::map_range(m, |k| rate(grid.xi_sq(k)));
    let times = grid.times();
    let mut out = SpacetimeField::zeros(grid, Repr::Physical, Repr::Spectral);
    par::for_each_chunk_mut(out.data_mut(), m, |j, row| {
        let t = times[j];
        for (k, z) in row.iter_mut().enumerate() {
            *z = spec.data()[k] * C64::from_polar(1.0, t * rates[k]);
        }
    });
    out
}
