//! Symmetric interior penalty DG discretization of an elliptic distributed
//! optimal control problem, together with W-cycle and V-cycle multigrid
//! solvers for the resulting saddle-point systems that are robust with
//! respect to the regularization parameter `beta`.
//!
//! The control is eliminated and the optimality system is written for the
//! scaled pair `(p, y)` (adjoint, state). On every level of a nested
//! hierarchy of red-refined triangulations the system operator is
//! preconditioned by a block-diagonal reaction-diffusion operator, which
//! turns the saddle-point problem into an SPD one that standard smoothing
//! and approximation arguments apply to.

pub mod error;
pub mod experiment;
pub mod field;
pub mod forms;
pub mod hierarchy;
pub mod linalg;
pub mod mesh;
pub mod multigrid;
pub mod precond;
pub mod props;
pub mod quadrature;
pub mod space;
pub mod sparse;

pub use error::{Error, Result};
pub use field::PairField;
pub use forms::{Coefficients, LevelOperators, SaddleOperator};
pub use hierarchy::{LevelStack, ProblemParams};
pub use mesh::{Domain, EdgeInfo, EdgeKind, Mesh, Point};
pub use multigrid::{CycleConfig, CycleKind, EigEstimate, Variant};
pub use precond::{BlockPreconditioner, InnerConfig, InnerSmoother, InnerSolver};
pub use props::{PropertyReport, PropertySuite};
pub use space::DgSpace;
pub use sparse::CsrMatrix;
