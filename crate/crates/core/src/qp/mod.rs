//! Warm-startable active-set solver for convex QPs over `{Ax = b, l ≤ x ≤ u}`.
//!
//! The objective is `linear'x + (σ/2)·x'Qx + offset` with `Q` PSD; `σ = 0`
//! gives an LP. The working set consists of the variables held at a bound;
//! the equality rows are always active. The reduced KKT matrix of the free
//! variables is kept nonsingular at every iterate (inertia control), which is
//! what lets the same loop run LPs, where every working set is a vertex, and
//! QPs with many free variables.
//!
//! Three ways in:
//!
//! * cold: phase 1 on artificial variables, then primal iterations;
//! * [`StartMode::PrimalStart`]: the warm point is feasible for the new
//!   problem (only the objective changed) and primal iterations resume from it;
//! * [`StartMode::DualStart`]: the warm working set is dual feasible but some
//!   bounds changed; dual iterations restore primal feasibility, then primal
//!   iterations clean up any remaining dual infeasibility.
//!
//! A warm start that cannot be used (infeasible point, singular working set,
//! breakdown in the dual loop) is repaired: every variable is shifted to its
//! nearest bound and phase 1 runs from there. Repairs are reported in
//! [`QpStats::repaired`].

mod engine;
mod factor;
pub(crate) mod rows;
mod work;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::model::{dot, norm_inf, Polyhedron, QuadraticForm};

/// `min linear'x + (σ/2)·x'Qx + offset` over `poly`.
#[derive(Debug, Clone, Copy)]
pub struct QpProblem<'a> {
    pub linear: &'a [f64],
    pub quad: &'a QuadraticForm,
    pub sigma: f64,
    pub offset: f64,
    pub poly: &'a Polyhedron,
}

impl<'a> QpProblem<'a> {
    pub fn new(
        linear: &'a [f64],
        quad: &'a QuadraticForm,
        sigma: f64,
        offset: f64,
        poly: &'a Polyhedron,
    ) -> Result<Self> {
        let n = poly.n();
        check_len("linear", linear.len(), n)?;
        check_len("Q", quad.dim(), n)?;
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "quadratic scale must be finite and nonnegative, got {sigma}"
            )));
        }
        Ok(Self {
            linear,
            quad,
            sigma,
            offset,
            poly,
        })
    }

    pub fn n(&self) -> usize {
        self.poly.n()
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        let quad = if self.sigma > 0.0 {
            0.5 * self.sigma * self.quad.quad(x)
        } else {
            0.0
        };
        dot(self.linear, x) + quad + self.offset
    }

    /// ∞-norm of `linear + σQx − A'λ − μ_lower + μ_upper`.
    pub fn stationarity_residual(&self, sol: &QpSolution) -> f64 {
        let qx = self.quad.apply(&sol.x);
        let at = self
            .poly
            .a()
            .tr_mul(&nalgebra::DVector::from_column_slice(&sol.lambda));
        (0..self.n())
            .map(|i| {
                (self.linear[i] + self.sigma * qx[i] - at[i] - sol.mu_lower[i] + sol.mu_upper[i])
                    .abs()
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarStatus {
    /// Free: not held at a bound.
    Basic,
    AtLower,
    AtUpper,
}

/// Warm-start token: a status per variable plus the point it came from.
///
/// Plain data; the factorization is rebuilt from it by the receiving solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkingBasis {
    pub status: Vec<VarStatus>,
    pub values: Vec<f64>,
}

impl WorkingBasis {
    pub fn len(&self) -> usize {
        self.status.len()
    }

    pub fn is_empty(&self) -> bool {
        self.status.is_empty()
    }

    pub fn num_basic(&self) -> usize {
        self.status
            .iter()
            .filter(|s| **s == VarStatus::Basic)
            .count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StartMode {
    PrimalStart,
    DualStart,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum QpStatus {
    Optimal,
    Infeasible,
    IterLimit,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct QpStats {
    pub phase1_pivots: usize,
    pub primal_pivots: usize,
    pub dual_pivots: usize,
    /// Warm basis given.
    pub warm: bool,
    /// The warm basis was unusable and phase 1 ran instead.
    pub repaired: bool,
    pub refactorizations: usize,
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub x: Vec<f64>,
    /// Multipliers of all rows of `A` (zero for rows found to be redundant).
    pub lambda: Vec<f64>,
    pub mu_lower: Vec<f64>,
    pub mu_upper: Vec<f64>,
    /// Includes the offset.
    pub objective: f64,
    pub basis: WorkingBasis,
    /// Total working-set changes, all phases.
    pub iterations: usize,
    pub status: QpStatus,
    pub stats: QpStats,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSettings {
    pub feas_tol: f64,
    pub opt_tol: f64,
    pub comp_tol: f64,
    /// Step components below this do not block in the ratio test.
    pub pivot_tol: f64,
    /// Consecutive degenerate pivots before switching to Bland's rule.
    pub bland_after: usize,
    pub refactor_every: usize,
    pub growth_limit: f64,
    /// Pivot cap; `None` means `50·(n + m)`.
    pub max_pivots: Option<usize>,
}

impl Default for QpSettings {
    fn default() -> Self {
        Self {
            feas_tol: 1e-9,
            opt_tol: 1e-9,
            comp_tol: 1e-9,
            pivot_tol: 1e-11,
            bland_after: 50,
            refactor_every: 100,
            growth_limit: 1e8,
            max_pivots: None,
        }
    }
}

/// One solve at a time; distinct solvers may run concurrently.
#[derive(Debug, Clone, Default)]
pub struct QpSolver {
    pub settings: QpSettings,
}

impl QpSolver {
    pub fn new(settings: QpSettings) -> Self {
        Self { settings }
    }

    pub fn solve(
        &mut self,
        p: &QpProblem<'_>,
        warm: Option<&WorkingBasis>,
        mode: StartMode,
    ) -> Result<QpSolution> {
        if let Some(w) = warm {
            check_len("warm basis status", w.status.len(), p.n())?;
            check_len("warm basis values", w.values.len(), p.n())?;
        }
        engine::solve(&self.settings, p, warm, mode)
    }
}

pub fn solve_qp(
    p: &QpProblem<'_>,
    warm: Option<&WorkingBasis>,
    mode: StartMode,
) -> Result<QpSolution> {
    QpSolver::default().solve(p, warm, mode)
}

/// Re-solve after bound changes from the previous optimum, with dual iterations.
pub fn reoptimize_after_bound_change(prev: &QpSolution, p: &QpProblem<'_>) -> Result<QpSolution> {
    solve_qp(p, Some(&prev.basis), StartMode::DualStart)
}

pub(crate) fn scaled_tol(tol: f64, v: &[f64]) -> f64 {
    tol * (1.0 + norm_inf(v))
}
