//! Causal discovery from collections of multivariate time series with observed
//! and latent context variables.

pub mod graph;
pub mod scm;
pub mod pooling;
pub mod citests;
pub mod discovery;
pub mod metrics;
