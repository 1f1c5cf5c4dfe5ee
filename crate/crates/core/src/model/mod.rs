//! Data-generating processes, MTE and propensity evaluators, datasets.

pub mod dataset;
pub mod mte;
pub mod params;
pub mod propensity;
pub mod roy;
pub mod simulate;

pub use dataset::Dataset;
pub use mte::{roy_mte, true_mte, CellMte, GridCell, MteCurve, MteForm, Shape};
pub use params::{ScalarDist, SelectionParams, VectorDist};
pub use propensity::{Cell, CellPropensity, PropensityCell, PropensityFn};
pub use roy::{simulate_generalized_roy, Direction, GeneralizedRoySpec, RoyConstruction};
pub use simulate::simulate_normal;
