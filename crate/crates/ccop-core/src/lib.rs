//! Solver toolkit for cardinality-constrained nonlinear programs.
//!
//! The pieces, bottom up:
//!
//! - [`problem`]: instance definitions, the (x, y) relaxation, index sets
//!   and feasibility measures.
//! - [`auglag`]: the augmented Lagrangian of the relaxation, its gradient,
//!   multiplier estimates and penalty-progress measures.
//! - [`inner`]: spectral gradient descent with a nonmonotone line search
//!   for the smooth subproblems.
//! - [`salm`]: the safeguarded augmented Lagrangian outer loop.
//! - [`certificates`]: stationarity residuals and sequential-condition
//!   diagnostics.
//! - [`oracle`]: brute-force support enumeration for desk-scale ground
//!   truth.
//! - [`synthetic`]: built-in fixtures and seeded random instances.

pub mod auglag;
pub mod certificates;
pub mod deriv_check;
pub mod error;
pub mod inner;
pub mod nnls;
pub mod oracle;
pub mod problem;
pub mod salm;
pub mod synthetic;

pub use error::{CcopError, Result};
pub use problem::{CcopProblem, FeasibilityReport, IndexSets, RelaxedPoint};
