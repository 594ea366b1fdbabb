//! Iterative adversarial enhancement of JPEG steganographic embedding costs.
//!
//! The pipeline starts from a symmetric J-UNIWARD cost, trains a chain of
//! small differentiable steganalyzers against stegos embedded with the
//! current cost, and nudges the cost of the most influential DCT
//! coefficients in the direction that makes the stego harder to detect.
//! A trained chain can then be replayed on unseen covers to produce stegos.
//!
//! Module map:
//!
//! - [`jpegio`]: baseline grayscale JPEG codec at the coefficient level,
//!   the SCF1 plane container and PGM ingestion.
//! - [`juniward`]: the initial symmetric cost.
//! - [`coder`]: payload-limited simulation and syndrome-trellis coding.
//! - [`analyzer`]: the steganalyzer, its training and coefficient gradients.
//! - [`advloop`]: the iterative training stage.
//! - [`stegogen`]: the stego generation stage.
//! - [`metrics`]: cost-modification analyses and security evaluation.

pub mod advloop;
pub mod analyzer;
pub mod coder;
pub mod corpus;
pub mod cost;
pub mod error;
pub mod exec;
pub mod jpegio;
pub mod juniward;
pub mod metrics;
pub mod stegogen;

pub use cost::{CostMap, WET_COST};
pub use error::{Error, ErrorKind, Result};
pub use jpegio::{CoefficientImage, QuantTable, SpatialImage};
