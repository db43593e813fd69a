//! Linear implicit solves: the SPD solver, heat flow, the linearized director
//! and momentum steps, and the regularized compatibility problem.

mod solver;
mod steps;

pub use solver::{relative_residual, spd_solve, LinearOperatorSpec, SolveStats, SolverConfig};
pub use steps::{
    advective_cfl, compute_g, diffusion_step, director_step, heat_flow, momentum_step, solve_initial_velocity,
    StepOptions, StepRecord, CFL_LIMIT, CFL_WARN,
};
