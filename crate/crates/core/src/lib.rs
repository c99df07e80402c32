//! Integrals of quantile functions: layer integrals and their empirical
//! estimators, the remainder term linking quantile-side and cdf-side
//! differences, tail and inequality measures, L-functionals, weakly
//! dependent series, and a seeded Monte Carlo harness.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dist;
pub mod error;
pub mod layers;
pub mod lfunc;
pub mod montecarlo;
pub mod quad;
pub mod risk;
pub mod rng;
pub mod timeseries;

pub use dist::{Dist, Distribution, ParametricDist, Sample, StepCdf};
pub use error::{Error, Result};
