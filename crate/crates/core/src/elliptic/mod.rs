//! Poisson problems, Green's functions by exhaustion and the potential
//! function carried along the flow.

mod green;
mod potential;
mod solver;

pub use green::{
    dirichlet_green, fit_from_rows, fit_relative_constants, gradient_log_harmonic_check, green_ball_integral,
    green_exhaustion, hyperbolic_green, relative_green_stat, relative_green_stat_at, sweep_row, GradientCheck,
    GreenSample, RelativeConstants, SweepRow, EXHAUSTION_START, EXHAUSTION_STEP, GRADIENT_C1, GRADIENT_C2,
    GREEN_SOLVER_TOL, HARMONIC_TOL, PARABOLIC_RATIO, RELATIVE_RATES, SWEEP_TOL,
};
pub use potential::{
    consistency_field, consistency_fields, evolve_with_potential, growth_weighted_norm, h_envelope_fields,
    hamilton_evolution_residual, hamilton_potential, heat_evolve_frozen, heat_evolve_potential, initial_potential,
    maxprinciple_monitor, potential_consistency, track_growth_norms, track_summary, GrowthNorms, PotentialSnapshot,
    PotentialTrack, TimedField, GROWTH_RATE, POTENTIAL_SOLVER_TOL,
};
pub use solver::{
    solve_poisson, solve_poisson_with, split_solve_signed, split_solve_signed_with, SolveOptions, SolveReport, Span,
    Window,
};
