//! Reinforcement learning by Lipschitz extension of reward functions.
//!
//! Rewards observed on past market states are extended to new states with
//! the McShane (or Whitney, or a blend) formula over a hybrid metric that
//! mixes the angle between state vectors with their Euclidean distance. The
//! training set can be enlarged with synthetic "dream" states whose rewards
//! come from the same extension.
//!
//! - [`metric`]: the angular + Euclidean distance and point-to-set distances.
//! - [`lipschitz`]: Lipschitz constants, extensions and error bounds.
//! - [`reward`]: actions, duality rewards and the experience/random average.
//! - [`dreams`]: synthetic states and augmented training sets.
//! - [`scenarios`]: the currency and allocation backtests.
//! - [`data_io`]: CSV ingestion, synthetic markets and report files.
//! - [`cli`]: the `lipdream` command line.

pub mod cli;
pub mod data_io;
pub mod dreams;
pub mod error;
pub mod lipschitz;
pub mod metric;
pub mod reward;
pub mod scenarios;

pub use error::{Error, Result};
pub use lipschitz::{ExtensionKind, ExtensionModel, RewardSample, SampledRewardFunction};
pub use metric::{MetricConfig, MetricPoint, StateActionPair, StateVector};
pub use reward::{ActionKind, ActionSet, ActionVector};
