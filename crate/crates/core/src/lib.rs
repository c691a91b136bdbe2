//! Solver library for energy-minimizing elastic deformations of a planar annulus
//! constrained to open a cavity of prescribed volume at the center.
//!
//! The constrained problem is approximated by a penalty-multiplier (augmented
//! Lagrangian) outer iteration whose subproblems are minimized with an
//! H1-preconditioned gradient flow over P1 finite elements. Closed-form
//! elastic-fluid solutions are provided for initialization and verification.
//!
//! Module map:
//! - [`mesh`]: structured polar triangulations of the annulus and field transfer,
//! - [`material`]: the stored-energy law, its volumetric part and Piola stress,
//! - [`fem`]: energies, volume constraint, residual, stiffness and CG solve,
//! - [`flow`]: the discretized gradient-flow inner solver,
//! - [`auglag`]: multiplier/penalty updates, the outer loop, continuation in
//!   the regularization radius,
//! - [`oracles`]: exact elastic-fluid solution and diagnostic functionals.

// `!(x > 0.0)` guards reject NaN parameters, which `x <= 0.0` would let
// through; index loops over several parallel arrays stay as plain ranges
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod auglag;
mod error;
pub mod fem;
pub mod flow;
pub mod material;
pub mod mesh;
pub mod oracles;
pub mod parallel;

pub use auglag::{AugLagConfig, ContinuationEntry, InitStrategy, IterationRecord, OuterResult};
pub use error::{Error, Result};
pub use fem::{BoundaryData, DeformationField, Problem, SparseOperator};
pub use flow::{FlowConfig, FlowStats, StepTrace};
pub use material::{adj2, det2, Mat2, MaterialModel, Vec2};
pub use mesh::{Mesh, MeshParams};
pub use oracles::FluidExactSolution;
