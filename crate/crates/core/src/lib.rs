//! Biased nearest-neighbour random walks in one-dimensional random
//! environments: environment laws, closed-form and quenched series
//! evaluation, trajectory simulation, Monte Carlo estimators and exact
//! small-instance oracles.

#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![cfg_attr(test, allow(clippy::excessive_precision))]

pub mod analytic;
pub mod dist;
pub mod envgen;
pub mod error;
pub mod estimate;
pub mod oracle;
pub mod renewal;
pub mod rng;
pub mod series;
pub mod simulate;
pub mod special;

pub use dist::ScalarDist;
pub use envgen::{DiscreteEnv, EnvKind, EnvModel, Quenched, RateEnv, TimeFlavor};
pub use error::{Error, Result};
pub use series::{SeriesStatus, SeriesValue};
