//! Mixed-integer evolution strategies for unbounded, quadratically-constrained
//! quadratic programs.
//!
//! The crate bundles:
//!
//! * [`quadforms`]: the parametric instance family (Cigar and rotated-ellipse
//!   Hessians, two shifted centers, a quadratic constraint level) and the
//!   penalized cost the strategies minimize;
//! * [`intdist`]: the double-geometric integer mutation law;
//! * [`mies`]: a self-adaptive mixed-integer evolution strategy;
//! * [`cma_ih`]: CMA-ES with integer rounding and a variance floor on the
//!   integer coordinates;
//! * [`oracle`]: an exact branch-and-bound reference for small instances;
//! * [`harness`]: experiment matrices, metrics and CSV/JSON output.

// `!(x > 0.0)` checks reject NaN on purpose
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cma_ih;
pub mod error;
pub mod harness;
pub mod intdist;
pub mod mies;
pub mod oracle;
pub mod quadforms;
pub mod record;

pub use error::{Error, Result};
pub use quadforms::{InstanceDescriptor, ProblemInstance, TestCase};
pub use record::{RunRecord, SolverKind, Termination, TraceRow};
