//! Time stepping for the periodic transport equation.

pub mod forcing;
pub mod imex;
pub mod krylov;

pub use forcing::{CellForcing, Coefficients, Forcing, WindForcing};
pub use imex::{
    default_dt, default_nu, mass_drift, solve_parabolic, step_imex, NormSeries, SolveConfig,
    SolveResult,
};
pub use krylov::{solve_mean_zero, LinearSolveOptions, SolveStats};
