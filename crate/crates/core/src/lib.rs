//! Triangle mesh segmentation with a Gaussian mixture observation model, a
//! Potts hidden Markov random field over face adjacency, and EM parameter
//! estimation.
//!
//! The pipeline is: parse a mesh ([`mesh`]), build its face adjacency and
//! per-face features, then run [`em::run`], which alternates ICM label
//! updates ([`hmrf`]) with E- and M-steps over the class parameters
//! ([`model`]). [`synthbench`] generates planted test cases and scores
//! results.

pub mod em;
pub mod error;
pub mod hmrf;
pub mod math;
pub mod mesh;
pub mod model;
pub mod synthbench;

pub use error::{Error, Result};
