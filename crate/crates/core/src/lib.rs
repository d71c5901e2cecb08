//! Causal effects from linear outcome models under network interference.
//!
//! Units interfere through a weighted graph `G`: unit `i`'s outcome depends on
//! its own treatment and on the neighbor-weighted treatments `(G·A)_i`. Under a
//! main-terms linear model the total effect of shifting every unit's treatment
//! by one is `β_a + Σ_k β_{a,k}·F̄_k`, where `F̄_k` is the mean weighted degree of
//! network `k`. The crate builds the augmented design, fits it, and turns the
//! coefficients into plug-in estimates with Wald intervals.
//!
//! - [`graph`]: interference graphs, ingestion, random generators, exposures.
//! - [`regress`]: OLS, sandwich covariances, network GLS, AIC.
//! - [`effects`]: total-effect estimators and their variances.
//! - [`simulate`]: Monte Carlo operating characteristics.

pub mod cli;
pub mod data;
pub mod effects;
pub mod error;
pub mod graph;
pub mod regress;
pub mod simulate;

pub use data::Dataset;
pub use error::{Error, ErrorClass, Result};
pub use graph::{AdjacencyMatrix, DegreeSummary};
