//! Universal online convex optimization: one algorithm that adapts to convex,
//! strongly convex and exp-concave losses along with gradient variation.

pub mod adaprod;
pub mod base_learners;
pub mod baselines;
pub mod config;
pub mod ensemble;
pub mod environments;
pub mod error;
pub mod games;
pub mod geometry;
pub mod losses;
pub mod metrics;
pub mod msmwc;

pub use config::{configure, AlgoConfig, ConstantFamily, Variant};
pub use ensemble::{Ensemble, RoundReport};
pub use error::{Error, Result};
pub use geometry::{Domain, Vector};
pub use losses::{LossFn, LossOracle};
