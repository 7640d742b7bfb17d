//! Competition among platforms that each adopt one generative model from a
//! shared pool, with users choosing platforms by score.
//!
//! The game, equilibrium and metrics code is generic over [`Scalar`]; use
//! `f64` for speed or [`Exact`] when a value has to match to the last digit.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod acceptance;
pub mod entry;
pub mod environments;
pub mod equilibrium;
pub mod error;
pub mod game;
pub mod metrics;
pub mod scalar;

pub use error::{GameError, Result};
pub use game::{AllocationMatrix, ChoiceRule, GameSpec, ScoreMatrix, StrategyProfile, UserPopulation};
pub use scalar::Scalar;

/// Arbitrary-precision rationals.
pub type Exact = num_rational::BigRational;

pub type GameSpecF64 = GameSpec<f64>;
pub type GameSpecF32 = GameSpec<f32>;
pub type ExactGameSpec = GameSpec<Exact>;
pub type SmallRationalGameSpec = GameSpec<num_rational::Ratio<i64>>;
