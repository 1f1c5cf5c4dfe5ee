//! Estimators for the propensity, the MTE and the optimal policy.

pub mod choice;
pub mod concave;
pub mod empirical;
pub mod heckman;
pub mod liv;
pub mod semiparametric;

pub use choice::{fit_choice_probit, ChoiceFit};
pub use concave::{concave_fit, concave_policy_learn, max_slope_increase, ConcaveFit, ConcavePolicy, Regressor};
pub use empirical::{empirical_welfare, EmpiricalCell, EmpiricalWelfare};
pub use heckman::{heckman_two_step, heckman_with_choice, mte_from_heckman, HeckmanFit};
pub use liv::{default_bandwidth, liv_estimate, LivCell, LivFit};
pub use semiparametric::{semiparametric_two_stage, semiparametric_with_choice, SemiparametricFit};
