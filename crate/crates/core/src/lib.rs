//! Finite-volume solver for the cross-diffusion nutrient-taxis system
//!
//! ```text
//! u_t = (u v u_x - u^2 v v_x)_x + u v
//! v_t = v_xx - u v
//! ```
//!
//! on (0, 1) with no-flux boundaries, plus diagnostics and twin-run
//! experiments built on the anti-derivative `w = ∫_0^x (u + v)`.

pub mod blocktri;
pub mod diagnostics;
pub mod error;
pub mod grid;
pub mod harness;
pub mod initial;
pub mod mms;
pub mod model;
pub mod pairlab;
pub mod timestepper;
pub mod transform;

pub use error::{Error, Result};
pub use grid::{build_grid, FaceField, Field, Grid};
pub use model::{flux_u, flux_v, rhs, FluxMean, ModelParams, TaxisScheme};
pub use timestepper::{run, step, Integrator, State, StepControl, Trajectory};
