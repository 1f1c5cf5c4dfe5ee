//! Marginal benefit of subsidy, optimal-subsidy solvers and bounds.

pub mod bounds;
pub mod lambda;
pub mod solve;

pub use bounds::bound_optimal;
pub use lambda::{lambda_eval, welfare_scale};
pub use solve::{
    assemble_rule, solve_cell, solve_cells, solve_general, solve_negative_selection, solve_positive_selection, Method,
    SolutionKind, SolveResult, DEFAULT_GRID_N,
};
