//! Online prediction with expert advice when the loss matrix is low rank.
//!
//! The crate contains the adaptive ellipsoidal-regularization learner
//! ([`algorithms::LowRankExperts`]), its baselines, the ellipsoid geometry it
//! depends on, the simplex-constrained quadratic solvers, and loss generators
//! reproducing the known hard instances for each learner.

pub mod adversaries;
pub mod algorithms;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod rng;
pub mod simplex_qp;

pub use error::{Error, Result};
