//! Numerical laboratory for the normalized Ricci flow `∂g/∂t = (−1 − R) g` on
//! noncompact surfaces.
//!
//! Surfaces live on uniform conformal grids, `g = e^{2Φ}(ds² + dθ²)`. The
//! crate is split into four layers:
//!
//! * [`geometry`]: charts, metric states and the discrete differential operators.
//! * [`flow`]: RK4 time stepping of the conformal factor with CFL control.
//! * [`elliptic`]: Poisson solves, Green's functions by exhaustion and the
//!   potential-function diagnostics that accompany the flow.
//! * [`collar`]: log-power-series collars, cusp charts and global utilities
//!   (Gauss–Bonnet, volume normalization, Poisson on closed charts).

pub mod collar;
pub mod elliptic;
mod error;
pub mod flow;
pub mod geometry;
pub mod numeric;

pub use error::{Error, Result};

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use collar::{FermiBackground, FourierPoly, LogPowerSeries, LogSeries};
pub use elliptic::{GreenSample, PotentialTrack};
pub use flow::{DecayFit, EvolveOptions, FlowTrajectory};
pub use geometry::{
    ConformalChart, DistanceStencil, Edge, GridIndex, MetricState, ScalarField, Topology,
    WarpedProfile,
};
