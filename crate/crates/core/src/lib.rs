//! Loop measures, loop-erased random walk, spanning trees, loop soups and
//! their Gaussian-field isomorphism on finite weighted Markov chains.
//!
//! Algorithms are generic over the weight scalar ([`scalar::Scalar`]); the
//! aliases below fix the common choices.

pub mod builders;
pub mod chain;
pub mod error;
pub mod isomorphism;
pub mod lerw;
pub mod linalg;
pub mod multipath;
pub mod paths;
pub mod rng;
pub mod scalar;
pub mod soup;
pub mod spanning;
pub mod stats;
pub mod walk;
pub mod z2;

pub use error::{Error, Result};

/// Complex weights, the general case.
pub type Chain = chain::WeightedChain<num_complex::Complex64>;
/// Real (possibly signed) weights.
pub type RealChain = chain::WeightedChain<f64>;
/// Exact rational weights.
pub type ExactChain = chain::WeightedChain<num_rational::BigRational>;
