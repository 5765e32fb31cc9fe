//! Surfaces as conformal grids and the metric-aware operators on them.

mod chart;
mod distance;
pub mod io;
mod ops;
pub mod surfaces;
mod warp;

pub use chart::{ConformalChart, Edge, GridIndex, MetricState, ScalarField, Topology};
pub use distance::{geodesic_distance, geodesic_distance_with, DistanceStencil};
pub use ops::{grad_norm_sq, integrate, laplace_beltrami, scalar_curvature, traceless_hessian_norm_sq, volume};
pub use warp::{warp_to_chart, warp_to_chart_with_radii, WarpChart, WarpedProfile};

pub(crate) use ops::field_like;
