//! Cost specifications, subsidy rules and the welfare functional.

pub mod cost;
pub mod oracle;
pub mod report;
pub mod rule;

pub use cost::{CostCell, CostSpec};
pub use oracle::{mc_oracle_welfare, normal_baseline, McEstimate};
pub use report::{cell_welfare, takeup_under_rule, welfare_of_rule, CellWelfare, WelfareReport};
pub use rule::{validate_weights, SubsidyRule};
