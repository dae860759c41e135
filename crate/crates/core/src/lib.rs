//! Unified training and sampling for continuous generative models.
//!
//! Diffusion, flow-matching and consistency models are handled as
//! parameterizations of one objective: a transport family ([`transport`]),
//! a consistency ratio `lambda` for the trainer ([`trainer`]) and a
//! decomposition/reconstruction sampler ([`sampler`]). Closed-form
//! probability-flow solutions for Gaussian mixtures ([`oracle`]) provide
//! ground truth for tests.

pub mod cli;
pub mod config;
pub mod data;
pub mod error;
pub mod estimator;
pub mod metrics;
pub mod oracle;
pub mod prediction;
pub mod sampler;
pub mod timedist;
pub mod trainer;
pub mod transport;

pub use error::{Error, Result};
pub use transport::{Coefficients, Transport};
