//! Strang split-step integrator for
//! `i∂_t u + Δu = Re(V)u`, `i∂_t V + |∇|V = -|∇||u|²`.
//!
//! The linear half-steps are exact per mode. In the nonlinear substep
//! `∂_t V = i|∇||u|²` is purely imaginary, so `Re V` and `|u|²` are frozen
//! and the substep is solved exactly: `u ← e^{-i dt Re V} u`,
//! `V ← V + i dt |∇||u|²`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::energy::{energy, mass, Energy};
use super::ZakharovState;
use crate::fft::{fft_spatial, Direction};
use crate::grid::{Field, Repr, C64};
use crate::par;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SplitStepError {
    #[error("non-finite values at step {step} (t = {t})")]
    NonFinite { step: usize, t: f64 },
    #[error("dt must be positive and finite")]
    BadStep,
    #[error("u and V live on different grids")]
    GridMismatch,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitStepOptions {
    /// Disable the coupling to get the free flows.
    pub nonlinear: bool,
    /// Record every `sample_every` steps (the initial and final states are
    /// always recorded).
    pub sample_every: usize,
    /// Also record the states themselves, not only the diagnostics.
    pub keep_states: bool,
}

impl Default for SplitStepOptions {
    fn default() -> Self {
        SplitStepOptions {
            nonlinear: true,
            sample_every: 1,
            keep_states: true,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub mass: f64,
    pub energy: Energy,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub states: Vec<ZakharovState>,
    pub cfl_warning: bool,
}

impl Trajectory {
    pub fn final_sample(&self) -> &Sample {
        self.samples.last().expect("trajectory is never empty")
    }

    /// `max_t |m(t) - m(0)| / m(0)`.
    pub fn mass_drift(&self) -> f64 {
        let m0 = self.samples[0].mass;
        self.samples
            .iter()
            .map(|s| (s.mass - m0).abs())
            .fold(0.0, f64::max)
            / m0.max(f64::MIN_POSITIVE)
    }

    /// `max_t |E_Z(t) - E_Z(0)|`.
    pub fn energy_drift(&self) -> f64 {
        let e0 = self.samples[0].energy.zakharov;
        self.samples
            .iter()
            .map(|s| (s.energy.zakharov - e0).abs())
            .fold(0.0, f64::max)
    }
}

/// True if `dt λ_max² < π/4`.
pub fn cfl_ok(state: &ZakharovState, dt: f64) -> bool {
    let lm = state.u.grid().lambda_max();
    dt * lm * lm < std::f64::consts::FRAC_PI_4
}

/// Advance `state` by `n_steps` Strang steps of size `dt`.
pub fn splitstep_evolve(
    state: &ZakharovState,
    dt: f64,
    n_steps: usize,
    opts: SplitStepOptions,
) -> Result<Trajectory, SplitStepError> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(SplitStepError::BadStep);
    }
    if !state.u.same_grid(&state.v) {
        return Err(SplitStepError::GridMismatch);
    }
    let cfl_warning = !cfl_ok(state, dt);
    if cfl_warning {
        log::warn!("split-step dt = {dt} does not resolve the stiffest phase (dt λ_max² ≥ π/4)");
    }
    let grid = state.u.grid().clone();
    let m = grid.spatial_len();
    let (n, d) = (grid.n(), grid.dim());
    let xi_sq = grid.xi_sq_table();
    let xi: Vec<f64> = xi_sq.iter().map(|x| x.sqrt()).collect();
    let half_u: Vec<C64> = xi_sq
        .iter()
        .map(|&k| C64::from_polar(1.0, -0.5 * dt * k))
        .collect();
    let half_v: Vec<C64> = xi
        .iter()
        .map(|&k| C64::from_polar(1.0, 0.5 * dt * k))
        .collect();

    let mut u = state.u.to_repr(Repr::Spectral).into_data();
    let mut v = state.v.to_repr(Repr::Spectral).into_data();
    let mut up = vec![C64::new(0.0, 0.0); m];
    let mut vp = vec![C64::new(0.0, 0.0); m];
    let mut rho = vec![C64::new(0.0, 0.0); m];

    let every = opts.sample_every.max(1);
    let mut t = state.t;
    let mut samples = Vec::new();
    let mut states = Vec::new();
    let mut record = |t: f64, u: &[C64], v: &[C64], samples: &mut Vec<Sample>| {
        let s = ZakharovState {
            t,
            u: Field::from_vec(&grid, u.to_vec(), Repr::Spectral).expect("length"),
            v: Field::from_vec(&grid, v.to_vec(), Repr::Spectral).expect("length"),
        };
        samples.push(Sample {
            t,
            mass: mass(&s.u),
            energy: energy(&s.u, &s.v),
        });
        if opts.keep_states {
            states.push(s);
        }
    };
    record(t, &u, &v, &mut samples);

    for step in 1..=n_steps {
        par::for_each_mut(&mut u, |k, z| *z *= half_u[k]);
        par::for_each_mut(&mut v, |k, z| *z *= half_v[k]);
        if opts.nonlinear {
            up.copy_from_slice(&u);
            vp.copy_from_slice(&v);
            fft_spatial(&mut up, 1, n, d, Direction::Inverse);
            fft_spatial(&mut vp, 1, n, d, Direction::Inverse);
            let vref = &vp;
            par::for_each_mut(&mut up, |i, z| *z *= C64::from_polar(1.0, -dt * vref[i].re));
            let uref = &up;
            par::for_each_mut(&mut rho, |i, z| *z = C64::new(uref[i].norm_sqr(), 0.0));
            fft_spatial(&mut rho, 1, n, d, Direction::Forward);
            par::for_each_mut(&mut v, |k, z| *z += C64::new(0.0, dt * xi[k]) * rho[k]);
            u.copy_from_slice(&up);
            fft_spatial(&mut u, 1, n, d, Direction::Forward);
        }
        par::for_each_mut(&mut u, |k, z| *z *= half_u[k]);
        par::for_each_mut(&mut v, |k, z| *z *= half_v[k]);
        t = state.t + step as f64 * dt;
        if step % every == 0 || step == n_steps {
            if u.iter()
                .chain(v.iter())
                .any(|z| !z.re.is_finite() || !z.im.is_finite())
            {
                return Err(SplitStepError::NonFinite { step, t });
            }
            record(t, &u, &v, &mut samples);
        }
    }
    Ok(Trajectory {
        samples,
        states,
        cfl_warning,
    })
}
