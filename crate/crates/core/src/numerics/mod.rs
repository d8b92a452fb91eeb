//! Shared numerical substrate: adaptive quadrature, subset lattices, deterministic
//! summation and seedable random substreams.

pub mod quadrature;
pub mod rng;
pub mod subsets;
pub mod summation;

pub use quadrature::{integrate, QuadratureResult, MAX_DEPTH};
pub use rng::RngConfig;
pub use subsets::{complement, subsets_iter, subsets_of, SubsetMask};
pub use summation::{log_sum_accumulate, pairwise_sum, Moments};
