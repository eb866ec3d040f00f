//! Conic quadratic optimization through perspective reformulation.
//!
//! Problems of the form
//!
//! ```text
//! min  c'x + Ω·√(x'Qx)   s.t.  Ax = b,  l ≤ x ≤ u,  x_i ∈ ℤ (i ∈ I)
//! ```
//!
//! are solved by a sequence of convex QPs
//! `min c'x + (Ω/2t)·x'Qx + (Ω/2)·t` in which only the scalar `t` changes,
//! so each QP is warm-started from the previous one.

pub mod bnb;
pub mod error;
pub mod gen;
pub mod io;
pub mod model;
pub mod qp;
pub mod solvers;

pub use bnb::{
    branch_select, enumeration_oracle, solve_bnb, BnbOptions, BnbResult, BnbStats, BnbStatus,
};
pub use error::{Error, Result};
pub use gen::{gen_cardinality, gen_costs, gen_grid_path, gen_quadratic, generate, GenSpec};
pub use io::{load_instance, save_instance};
pub use model::{
    certify, dual_bound_estimate, eval_h, eval_objective, grad_f, kkt_residual,
    subproblem_objective, subproblem_on, ConicInstance, Family, InstanceMeta, KktCertificate,
    Polyhedron, QuadraticForm,
};
pub use qp::{
    reoptimize_after_bound_change, solve_qp, QpProblem, QpSettings, QpSolution, QpSolver, QpStats,
    QpStatus, StartMode, VarStatus, WorkingBasis,
};
pub use solvers::{
    init_tmax_from_lp, solve_bisection, solve_cd, BisectOptions, CdOptions, ConicSolveResult,
    InitialT, SolveStatus, StopReason, StopRule, TracePoint,
};
