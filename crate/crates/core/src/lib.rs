//! Stationary behaviour of driven diffusions on the circle
//!
//! The toolkit studies `dθ = (f − U′(θ)) dt + √(2ε) dB` on the unit circle
//! `θ ∈ [0, 1)` with a smooth periodic potential `U` and a constant tilt `f`.
//! It provides:
//!
//! - [`exact_stationary`]: the finite-ε stationary density and cycle flux,
//!   evaluated in the log domain so that ε down to `1e-4` is routine.
//! - [`asymptotics`]: the small-noise picture, i.e. the sup-construction
//!   `U*`, the exponent landscape `V`, the limit-cycle density and its
//!   inverse-velocity prefactor.
//! - [`attractors`]: fixed points, basins, barriers between neighbouring
//!   attractors and Kramers-type rates.
//! - [`chain`]: the emergent Markov chain between attractors, its
//!   min-plus exponents, the detailed-balance test and the pasted global
//!   landscape.
//! - [`simulate`]: an Euler–Maruyama Monte Carlo oracle.
//! - [`verify`]: machine-checkable cross-checks between all of the above.

pub mod asymptotics;
pub mod attractors;
pub mod chain;
pub mod error;
pub mod exact_stationary;
pub mod model;
pub mod numerics;
pub mod simulate;
pub mod tropical;
pub mod verify;

pub use error::{Error, Result};
pub use model::{CircleSystem, LandscapeFn, PeriodicPotential, SystemConfig};
