//! Training single-hidden-layer sigmoid networks for binary
//! classification with particle swarms.
//!
//! An outer swarm searches the number of hidden neurons; for every
//! candidate an inner swarm searches the weights. The inner swarm is plain
//! PSO, PSO gated by simulated annealing, or PSO whose velocity is also
//! repelled from the last accepted worse point. Models are scored with
//! k-fold cross validation.
//!
//! Modules, bottom-up:
//!
//! - [`dataset`]: CSV ingestion, imputation, min-max scaling, folds, synthetic data
//! - [`mlp`]: network layout, forward pass, MSE fitness
//! - [`pso`]: the swarm loop
//! - [`anneal`]: annealing gate and repelled velocity rule
//! - [`trainer`]: nested architecture and weight search
//! - [`metrics`]: confusion matrices, measures, cross validation
//! - [`experiment`]: config files, experiment runner, report files

pub mod anneal;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod mlp;
pub mod pso;
pub mod trainer;

pub use error::{Error, ErrorClass, Result};
