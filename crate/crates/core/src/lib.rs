//! Robust multi-Bernoulli multi-target filtering with information-theoretic
//! sensor control.
//!
//! The filter runs on a hybrid single-object space: every particle is either
//! an actual target or a clutter generator, and carries its own detection
//! probability. Clutter rate and detection profile are therefore learned
//! online rather than supplied. The controller scores each admissible sensor
//! move by a Monte Carlo estimate of the Rényi divergence between the
//! predicted belief and the belief updated with an ideal, noise-free
//! measurement set, and moves to the best one.

pub mod belief;
pub mod control;
pub mod error;
pub mod experiment;
pub mod filter;
pub mod geometry;
pub mod mb;
pub mod scenario;

pub use belief::{BernoulliComponent, HybridParticle, Kinematic, MultiBernoulliBelief, ObjectClass, MAX_EXISTENCE};
pub use error::{Error, Result};
pub use geometry::Area;
