//! Mass, Zakharov and Schrödinger energies, and the first-order dictionary
//! `V = v - i|∇|⁻¹∂_t v`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{Field, Repr, C64};
use crate::par;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FirstOrderError {
    #[error("mean of v_t is {0:e}; |∇|⁻¹ needs a mean-zero time derivative")]
    NonzeroMean(f64),
    #[error("v must be real-valued (max |Im v| = {0:e})")]
    NotReal(f64),
    #[error("fields live on different grids")]
    GridMismatch,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Energy {
    /// `∫ ½|∇u|² + ¼|V|² + ½ Re(V)|u|²`.
    pub zakharov: f64,
    /// `∫ ½|∇u|² - ¼|u|⁴`.
    pub schrodinger: f64,
    /// `¼∫ |V + |u|²|²`.
    pub remainder: f64,
}

impl Energy {
    /// `E_Z - E_S - remainder`, zero up to round-off.
    pub fn identity_defect(&self) -> f64 {
        self.zakharov - self.schrodinger - self.remainder
    }
}

/// `∫|u|²`.
pub fn mass(u: &Field) -> f64 {
    let l2 = u.l2_norm();
    l2 * l2
}

/// `½∫|∇u|²` from the spectral representation.
pub fn kinetic(u: &Field) -> f64 {
    let s = u.to_repr(Repr::Spectral);
    let g = u.grid();
    0.5 * par::sum_range(s.data().len(), |i| g.xi_sq(i) * s.data()[i].norm_sqr()) * g.cell_volume()
}

/// Zakharov energy, Schrödinger energy and the quartic remainder. The three
/// are evaluated independently; the decomposition identity is checked in
/// debug builds.
pub fn energy(u: &Field, v: &Field) -> Energy {
    let kin = kinetic(u);
    let up = u.to_repr(Repr::Physical);
    let vp = v.to_repr(Repr::Physical);
    let (ud, vd) = (up.data(), vp.data());
    let cv = u.grid().cell_volume();
    let pot = par::sum_range(ud.len(), |i| {
        let rho = ud[i].norm_sqr();
        0.25 * vd[i].norm_sqr() + 0.5 * vd[i].re * rho
    }) * cv;
    let quartic = par::sum_range(ud.len(), |i| ud[i].norm_sqr().powi(2)) * cv;
    let rem = 0.25 * par::sum_range(ud.len(), |i| (vd[i] + ud[i].norm_sqr()).norm_sqr()) * cv;
    let e = Energy {
        zakharov: kin + pot,
        schrodinger: kin - 0.25 * quartic,
        remainder: rem,
    };
    debug_assert!(
        e.identity_defect().abs() <= 1e-9 * (1.0 + e.zakharov.abs() + e.remainder.abs()),
        "energy decomposition defect {}",
        e.identity_defect()
    );
    e
}

/// `V = v - i|∇|⁻¹ v_t`. `v` must be real and `v_t` mean-zero.
pub fn first_order_transform(v: &Field, vt: &Field) -> Result<Field, FirstOrderError> {
    if !v.same_grid(vt) {
        return Err(FirstOrderError::GridMismatch);
    }
    let vp = v.to_repr(Repr::Physical);
    let imag = vp.data().iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    if imag > 1e-10 * (1.0 + vp.data().iter().map(|z| z.norm()).fold(0.0, f64::max)) {
        return Err(FirstOrderError::NotReal(imag));
    }
    let mut vts = vt.to_repr(Repr::Spectral);
    let g = vt.grid().clone();
    let mean = vts.data()[0].norm() / (g.spatial_len() as f64).sqrt();
    if mean > 1e-10 {
        return Err(FirstOrderError::NonzeroMean(mean));
    }
    let minus_i = C64::new(0.0, -1.0);
    par::for_each_mut(vts.data_mut(), |i, z| {
        *z = if i == 0 {
            C64::new(0.0, 0.0)
        } else {
            *z * minus_i / g.xi_sq(i).sqrt()
        }
    });
    let mut out = vp.to_repr(Repr::Spectral);
    out.axpy(C64::new(1.0, 0.0), &vts)
        .expect("same grid and representation");
    Ok(out.into_repr(v.repr()))
}

/// Inverse of [`first_order_transform`]: `(Re V, -|∇| Im V)`.
pub fn inverse_first_order(big_v: &Field) -> (Field, Field) {
    let g = big_v.grid().clone();
    let p = big_v.to_repr(Repr::Physical);
    let re: Vec<C64> = p.data().iter().map(|z| C64::new(z.re, 0.0)).collect();
    let im: Vec<C64> = p.data().iter().map(|z| C64::new(z.im, 0.0)).collect();
    let v = Field::from_vec(&g, re, Repr::Physical).expect("length matches");
    let mut vt = Field::from_vec(&g, im, Repr::Physical)
        .expect("length matches")
        .into_repr(Repr::Spectral);
    par::for_each_mut(vt.data_mut(), |i, z| *z *= -g.xi_sq(i).sqrt());
    (v, vt.into_repr(Repr::Physical))
}
