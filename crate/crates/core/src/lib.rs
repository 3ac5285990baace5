//! Gaussian continuous-variable toolkit for damped, linearly coupled bosonic
//! modes: steady-state covariances from the Lyapunov equation, closed-form
//! moments of adiabatically reduced models, EPR-steering and entanglement
//! criteria, and Monte-Carlo Langevin trajectories.

pub mod analytic;
pub mod cli;
pub mod criteria;
pub mod error;
pub mod langevin;
pub mod lyapunov;
pub mod model;

pub use error::{Error, Result};
pub use lyapunov::{steady_state, CovarianceMatrix};
pub use model::{LinearModel, Mode, ModelKind, SystemParams};
