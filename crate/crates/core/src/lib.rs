//! Dependent default times driven by multivariate generalized Cox processes.
//!
//! A component `i` defaults at `tau_i = inf { t : K^i_t >= Theta_i }` where `K^i` is a
//! nondecreasing cumulative hazard (possibly with jumps) and `Theta_i` an independent unit
//! exponential. Shared jumps across the `K^i` produce both dependence and simultaneous
//! defaults. This crate provides
//!
//! * the model families ([`process_models`], [`shot_noise`], [`decomposition`]),
//! * subset compensators and their Möbius/Marshall–Olkin decomposition ([`compensator`]),
//! * closed-form joint survival probabilities ([`survival`]),
//! * an exact event-driven Monte Carlo simulator used as an oracle for all of the above
//!   ([`simulation`]),
//! * the JSON model format and command-line front end ([`cli`]).
//!
//! ```
//! use corrcox::simulation::{mc_joint_survival, SimOptions};
//! use corrcox::survival::{joint_survival, simultaneous_default_prob_mo};
//! use corrcox::{Factor, FactorModel, JumpLaw, RngConfig, SurvivalQuery};
//!
//! let exp1 = JumpLaw::Exponential { rate: 1.0 };
//! let model = FactorModel::new(
//!     vec![Factor::shared_clock(2.0, vec![exp1.clone(), exp1])],
//!     vec![vec![1.0], vec![1.0]],
//!     None,
//! )?;
//! let q = SurvivalQuery::new(vec![1.0, 2.0])?;
//! let exact = joint_survival(&model, &q)?;
//! assert!((exact - (-2.5f64).exp()).abs() < 1e-12);
//! assert!((simultaneous_default_prob_mo(&model)? - 1.0 / 3.0).abs() < 1e-12);
//! let mc = mc_joint_survival(&model, &q, 100_000, &RngConfig::new(42), &SimOptions::default())?;
//! assert!(mc.rao_blackwell.z_score(exact).abs() < 4.0);
//! # Ok::<(), corrcox::Error>(())
//! ```

// `!(x >= 0.0)` rejects NaN along with negatives; used on purpose throughout.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod compensator;
pub mod decomposition;
pub mod error;
pub mod numerics;
pub mod process_models;
pub mod shot_noise;
pub mod simulation;
pub mod survival;

pub use compensator::{CompensatorTable, MobiusCheck, SubsetMask};
pub use decomposition::{ContinuousHazard, MinDecomposition};
pub use error::{Error, Result};
pub use process_models::{DeformationKind, Factor, FactorModel, JumpLaw, TimeDeformation};
pub use shot_noise::{Intensity, Kernel, ShotNoiseModel};
pub use simulation::{McEstimate, PathRecord, RngConfig};
pub use survival::{NestedChain, SurvivalQuery};

/// Largest component count for which full `2^n` subset tables are built.
pub const MAX_COMPONENTS: usize = 20;
