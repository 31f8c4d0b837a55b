//! Demand allocation over resources with convex latency costs and fixed
//! activation charges.
//!
//! One unit of divisible demand is split across resources; resource `i`
//! carrying `x_i > 0` costs `c_i + x_i f_i(x_i)`. The crate provides
//!
//! - [`relax`]: the Ordering Algorithm, an `O(n log n)` solver for the
//!   continuous relaxation that bounds every branch-and-bound node,
//! - [`heuristic`]: a primal heuristic seeded by the relaxation support,
//! - [`bnb`]: exact branch-and-bound with n-ary branching over groups of
//!   identical resources,
//! - [`kkt`]: closed-form solves for a fixed active set and the easy cases,
//! - [`instances`]: generators, validation and the instance file format,
//! - [`oracle`]: brute-force and numerical reference solvers.

pub mod bnb;
pub mod error;
pub mod heuristic;
pub mod instances;
pub mod kkt;
pub mod model;
mod numeric;
pub mod oracle;
pub mod relax;

pub use bnb::{solve, Branching, Solution, SolveOptions, SolveStats, SolveStatus};
pub use error::{Error, Result};
pub use heuristic::primal_heuristic;
pub use model::{gamma, Allocation, Instance, LatencyFamily, ResourceGroup};
