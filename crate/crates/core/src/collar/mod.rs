//! Asymptotically hyperbolic collars from the Fuchsian log-power-series
//! recursion, cusp charts, and global utilities on closed or completed
//! charts.

mod background;
mod cusp;
mod fourier;
mod fuchsian;
mod global;
mod order;
mod series;

pub use background::FermiBackground;
pub use cusp::{cusp_chart, cusp_end_curvature, cusp_end_volume, cusp_phi, horocycle_turning};
pub use fourier::{FourierPoly, DEFAULT_MODE_CAP};
pub use fuchsian::{build_eta, fuchsian_f, fuchsian_series, indicial_apply, recursion_residual, solve_level};
pub use global::{
    compact_poisson, gauss_bonnet, gauss_bonnet_completed, normalization_bump, volume_normalize, BumpRegion,
    CompactPoisson, GaussBonnet, VolumeNormalization, MAX_BUMP_AMPLITUDE,
};
pub use order::{
    collar_curvature_excess, eta_to_rho_chart, residual_order_check, residual_profile, write_residual_csv,
    CollarEvaluator, ResidualOrder, DEFAULT_R_WINDOW, RESIDUAL_FLOOR, RESIDUAL_SAMPLES,
};
pub use series::{LogPowerSeries, LogSeries};
