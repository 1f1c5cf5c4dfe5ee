//! Optimal identified welfare across policy classes.

pub mod ladder;

pub use ladder::{
    first_best_policy, identified_support, merge_intervals, welfare_ladder, ThresholdPolicy, WCellOptimum,
    WelfareLadder,
};
