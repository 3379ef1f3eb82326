//! Free flows, Duhamel integrals, the Picard functional, the split-step
//! oracle and conserved quantities for the first-order Zakharov system.

pub mod duhamel;
pub mod energy;
pub mod ground_state;
pub mod picard;
pub mod propagate;
pub mod scattering;
pub mod splitstep;

use crate::grid::Field;

pub use duhamel::{
    duhamel, duhamel_at, duhamel_i0, duhamel_j0, BasePoint, DuhamelOptions, Quadrature,
};
pub use energy::{energy, first_order_transform, inverse_first_order, mass, Energy};
pub use ground_state::{static_ground_state, GroundState};
pub use picard::{picard_solve, PicardConfig, PicardSolution};
pub use propagate::{free_halfwave, free_schrodinger};
pub use scattering::{scattering_diagnostic, CauchyCurve};
pub use splitstep::{splitstep_evolve, SplitStepOptions, Trajectory};

/// `(u, V)` at time `t`.
#[derive(Clone, Debug)]
pub struct ZakharovState {
    pub t: f64,
    pub u: Field,
    /// First-order wave component `V = v - i|∇|⁻¹∂_t v`.
    pub v: Field,
}
