//! Bayesian estimation and model comparison for multinomial models whose
//! parameter space is truncated by convex inequality constraints.
//!
//! Constraints are given either as facets (`A θ ≤ b`), as the convex hull of
//! vertex rows, or as a convex indicator predicate. The crate provides
//!
//! * a Gibbs sampler for the truncated Dirichlet posterior ([`sampler`]),
//! * encompassing Bayes factors with plain, stepwise and automatic counting
//!   ([`evidence`]),
//! * posterior-predictive checks based on Pearson's X² ([`fit`]),
//! * the LP kernel and line/polytope intersections these rely on ([`geometry`]).
//!
//! Data-parallel loops (independent chains, counting blocks, predictive
//! replicates) run on rayon when the `parallel` feature is enabled and fall
//! back to plain iterators otherwise. Results never depend on scheduling.

pub mod cli;
pub mod error;
pub mod evidence;
pub mod fit;
pub mod geometry;
pub mod io;
pub mod model;
pub mod par;
pub mod rng;
pub mod sampler;
pub mod special;

pub use error::{Error, Result};
pub use model::{
    AbPolytope, CountData, DirichletPrior, ItemLayout, MixtureWeights, Theta, VPolytope,
};
pub use par::Exec;
