//! Partial welfare rankings of subsidy rules under a set-identified MTE.

pub mod rank;
pub mod set;

pub use rank::{
    check_nonempty, eval_functional, induced_cdf, pair_functional, rank_list, rank_pair, Certificates, NamedRule,
    PartialOrder, RankVerdict, Verdict,
};
pub use set::{IdentifiedMteSet, SetCell};
