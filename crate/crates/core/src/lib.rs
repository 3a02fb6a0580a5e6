//! Optimal rule lists under a statistical fairness constraint.
//!
//! The crate learns ordered if-then rule lists by branch-and-bound over a
//! prefix trie, accepting an incumbent only when its unfairness on the
//! training data stays within `1 - epsilon`. Sweeping `epsilon` and keeping
//! the non-dominated (error, unfairness) points yields a Pareto front.
//!
//! Modules, bottom up:
//! - [`bits`]: bit vectors used for every per-sample quantity.
//! - [`data`]: CSV loading, MDLP discretization, binarization, mining.
//! - [`rules`]: rule lists, prediction, objective, serialization.
//! - [`fairness`]: group confusion counts and the six unfairness measures.
//! - [`search`]: the branch-and-bound search.
//! - [`sweep`]: epsilon sweeps with k-fold cross-validation and Pareto filtering.
//! - [`cli`]: the `fairlist` command line.

pub mod bits;
pub mod cli;
pub mod data;
pub mod error;
pub mod fairness;
pub mod rules;
pub mod search;
pub mod sweep;

pub use error::{Error, Result};
