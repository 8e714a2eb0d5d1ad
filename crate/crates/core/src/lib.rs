//! Certified lower bounds and valid upper bounds on the competitive ratio of
//! the Ranking algorithm for (vertex-weighted) online bipartite matching
//! under staged independent random arrivals.
//!
//! The crate discretizes the underlying max-min objective on an `m x n`
//! grid and provides:
//!
//! * [`grid`] — monotone grid paths: enumeration, inverse vectors, local
//!   perturbations, grid-refinement upscaling;
//! * [`gamma`] — exact evaluators for the lower/upper constraint values and
//!   the objective decomposition;
//! * [`lp`] — the two LP families as explicit models, pluggable solver
//!   backends, MPS export/import, price-grid extraction;
//! * [`search`] — iterative local-search constraint generation, warm starts,
//!   and certification of lower bounds by full enumeration;
//! * [`ranksim`] — an exact discretized simulator of Ranking with dual
//!   assignment, threshold extraction, and witness-graph construction;
//! * [`verify`] — deterministic property suites tying the pieces together.

pub mod gamma;
pub mod grid;
pub mod lp;
pub mod price;
pub mod ranksim;
pub mod search;
pub mod verify;

pub use gamma::{eval_lower, eval_upper, gamma_exact, GammaBreakdown};
pub use grid::{enumerate_paths, GridDims, MonotonePath, PathPair};
pub use lp::{ConstraintSet, LpProblem, LpSolution};
pub use price::PriceGrid;
