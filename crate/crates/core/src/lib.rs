//! Assistance and shutdown games between a bounded-rational human and a
//! learning robot.
//!
//! The human holds a latent utility over a grid of acts and sends a
//! preference message. The robot fits a Gaussian-process posterior to the
//! message and decides whether to implement its suggestion, do nothing, or
//! defer to the human.

// `!(x > 0.0)` is used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod game;
pub mod gauss;
pub mod harness;
pub mod learn;
pub mod linalg;
pub mod rng;
pub mod shutdown;
pub mod stats;
pub mod world;

pub use error::{Error, Result};
pub use gauss::BivariateBelief;
pub use learn::{marginal_pair, GpPrior, Method, PosteriorSummary};
pub use world::{
    ActGrid, ChoiceDataset, ChoiceRecord, GroundTruthUtility, HumanConfig, KernelConfig, Mechanism, Preference,
    PreferenceDataset,
};
