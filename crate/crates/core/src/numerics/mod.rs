//! Scalar and vector numerical kernels.

pub mod grid;
pub mod linalg;
pub mod lp;
pub mod normal;
pub mod probit;
pub mod quad;
pub mod root;

pub use grid::{linspace, Grid};
pub use linalg::{ols_fit, Matrix};
pub use lp::{lp_min_linear, Constraint, LpSolution};
pub use normal::{norm_cdf, norm_pdf, norm_quantile};
pub use probit::{probit_fit, ProbitFit};
pub use quad::{quad_integrate, DEFAULT_QUAD_TOL};
pub use root::{find_root_bracketed, DEFAULT_ROOT_TOL};
