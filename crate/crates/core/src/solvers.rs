//! Outer drivers over the perspective value function
//! `g(t) = min_x c'x + (Ω/2t)·x'Qx + (Ω/2)·t`.
//!
//! [`solve_cd`] alternates the QP in `x` with the closed-form update
//! `t = sqrt(x'Qx)`; [`solve_bisection`] brackets `t*` and shrinks the bracket
//! using the same update. Both warm-start every QP from the previous one.

use log::debug;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    certify, dot, dual_bound_estimate, eval_objective, subproblem_objective, ConicInstance,
    KktCertificate, QZERO_TOL,
};
use crate::qp::{QpSettings, QpSolution, QpSolver, QpStatus, StartMode, WorkingBasis};

/// Below this `t` the optimum is taken to sit at `t = 0`.
pub const TZERO_XI: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum InitialT {
    /// Solve the LP `min c'x` first (`t = ∞`) and start from `sqrt(x_LP'Qx_LP)`.
    Lp,
    Value(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopRule {
    /// `qp_eps + |Δ|/t·‖∇f‖_∞ ≤ δ`.
    DualBound,
    /// `|Δ|/t ≤ δ`.
    RelativeStep,
    /// Whichever of the two fires first.
    Either,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdOptions {
    pub t0: InitialT,
    pub delta: f64,
    pub qp_eps: f64,
    pub max_outer: usize,
    pub t_floor: f64,
    pub stop: StopRule,
}

impl Default for CdOptions {
    fn default() -> Self {
        Self {
            t0: InitialT::Lp,
            delta: 1e-5,
            qp_eps: 1e-9,
            max_outer: 1000,
            t_floor: 1e-10,
            stop: StopRule::DualBound,
        }
    }
}

impl CdOptions {
    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.delta > self.qp_eps && self.qp_eps > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "need delta > qp_eps > 0, got delta = {}, qp_eps = {}",
                self.delta, self.qp_eps
            )));
        }
        if let InitialT::Value(t) = self.t0 {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "t0 must be positive, got {t}"
                )));
            }
        }
        if self.max_outer == 0 || !(self.t_floor > 0.0) {
            return Err(Error::InvalidArgument(
                "max_outer and t_floor must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BisectOptions {
    pub t_min0: f64,
    /// `None` takes `sqrt(x_LP'Qx_LP)`.
    pub t_max0: Option<f64>,
    pub gap_tol: f64,
    pub delta: f64,
    pub qp_eps: f64,
    pub max_outer: usize,
}

impl Default for BisectOptions {
    fn default() -> Self {
        Self {
            t_min0: 0.0,
            t_max0: None,
            gap_tol: 1e-6,
            delta: 1e-5,
            qp_eps: 1e-9,
            max_outer: 200,
        }
    }
}

impl BisectOptions {
    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    /// Stopped with a certified stationarity residual `≤ δ`.
    Optimal,
    /// A stopping test fired but the residual exceeds `δ`.
    ToleranceReached,
    IterLimit,
    /// The optimum has `t = 0`; `x` minimizes `c'x` over `{x'Qx = 0}`.
    TZero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    DualBound,
    RelativeStep,
    Gap,
    TZero,
    IterLimit,
}

/// One QP of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    /// `t` the QP was solved at (`∞` for the LP).
    pub t: f64,
    /// `g(t)`, the QP optimum (`∞` for the LP).
    pub value: f64,
    /// Conic objective at the QP solution.
    pub objective: f64,
    pub pivots: usize,
    /// The warm start was unusable and phase 1 ran.
    pub repaired: bool,
}

#[derive(Debug, Clone)]
pub struct ConicSolveResult {
    pub x: Vec<f64>,
    pub t: f64,
    pub objective: f64,
    pub kkt: KktCertificate,
    pub qp_count: usize,
    pub pivot_count: usize,
    pub trace: Vec<TracePoint>,
    /// Bisection brackets `[t_min, t_max]`, initial one first; empty for CD.
    pub brackets: Vec<(f64, f64)>,
    pub status: SolveStatus,
    pub stop: StopReason,
    /// Working set of the QP that produced `x`.
    pub basis: WorkingBasis,
    /// QPs whose warm start had to be repaired by phase 1.
    pub repairs: usize,
}

impl ConicSolveResult {
    pub fn kkt_residual(&self) -> f64 {
        self.kkt.residual_inf
    }
}

/// What a run did before it ended, kept even when it ends in an error.
#[derive(Debug, Clone, Default)]
pub(crate) struct RunInfo {
    pub(crate) first_repaired: Option<bool>,
    pub(crate) pivots: usize,
    pub(crate) qps: usize,
}

struct Runner<'a, 'i> {
    info: &'i mut RunInfo,
    inst: &'a ConicInstance,
    solver: QpSolver,
    trace: Vec<TracePoint>,
    pivots: usize,
    repairs: usize,
}

impl<'a, 'i> Runner<'a, 'i> {
    fn new(inst: &'a ConicInstance, qp_eps: f64, info: &'i mut RunInfo) -> Self {
        Self {
            info,
            inst,
            solver: QpSolver::new(QpSettings {
                opt_tol: qp_eps,
                ..QpSettings::default()
            }),
            trace: Vec::new(),
            pivots: 0,
            repairs: 0,
        }
    }

    /// Solve the QP at `t`; `None` on the engine's pivot cap.
    fn qp(
        &mut self,
        t: f64,
        warm: Option<&WorkingBasis>,
        mode: StartMode,
    ) -> Result<Option<QpSolution>> {
        let p = subproblem_objective(self.inst, t)?;
        let sol = self.solver.solve(&p, warm, mode)?;
        self.pivots += sol.iterations;
        self.info.pivots += sol.iterations;
        self.info.qps += 1;
        self.info.first_repaired.get_or_insert(sol.stats.repaired);
        if sol.stats.repaired {
            self.repairs += 1;
        }
        match sol.status {
            QpStatus::Infeasible => Err(Error::Infeasible("the polyhedron is empty".into())),
            QpStatus::IterLimit => Ok(None),
            QpStatus::Optimal => {
                let value = if t.is_finite() {
                    sol.objective
                } else {
                    f64::INFINITY
                };
                self.trace.push(TracePoint {
                    t,
                    value,
                    objective: eval_objective(self.inst, &sol.x)?,
                    pivots: sol.iterations,
                    repaired: sol.stats.repaired,
                });
                debug!("qp t={t:e} g={value:e} pivots={}", sol.iterations);
                Ok(Some(sol))
            }
        }
    }

    fn finish(
        self,
        sol: &QpSolution,
        t: f64,
        status: SolveStatus,
        stop: StopReason,
        delta: f64,
        brackets: Vec<(f64, f64)>,
    ) -> Result<ConicSolveResult> {
        let inst = self.inst;
        let (kkt, status) = if inst.q.quad(&sol.x) > QZERO_TOL {
            let kkt = certify(inst, &sol.x, &sol.lambda, &sol.mu_lower, &sol.mu_upper)?;
            let status = match status {
                SolveStatus::Optimal | SolveStatus::ToleranceReached => {
                    if kkt.residual_inf <= delta {
                        SolveStatus::Optimal
                    } else {
                        SolveStatus::ToleranceReached
                    }
                }
                other => other,
            };
            (kkt, status)
        } else {
            // The conic term is not differentiable at x'Qx = 0.
            let kkt = KktCertificate {
                lambda: sol.lambda.clone(),
                mu_lower: sol.mu_lower.clone(),
                mu_upper: sol.mu_upper.clone(),
                residual_inf: f64::INFINITY,
                comp_viol: 0.0,
            };
            (kkt, SolveStatus::TZero)
        };
        Ok(ConicSolveResult {
            objective: eval_objective(inst, &sol.x)?,
            x: sol.x.clone(),
            t,
            kkt,
            qp_count: self.trace.len(),
            pivot_count: self.pivots,
            trace: self.trace,
            brackets,
            status,
            stop,
            basis: sol.basis.clone(),
            repairs: self.repairs,
        })
    }
}

fn lp_solution(runner: &mut Runner<'_, '_>) -> Result<QpSolution> {
    runner
        .qp(f64::INFINITY, None, StartMode::PrimalStart)?
        .ok_or_else(|| Error::Numerical("pivot limit reached in the LP relaxation".into()))
}

/// `sqrt(x_LP'Qx_LP)` for `x_LP = argmin c'x`, an upper bound on `t*`, with
/// the LP working set.
pub fn init_tmax_from_lp(inst: &ConicInstance) -> Result<(f64, WorkingBasis)> {
    let mut info = RunInfo::default();
    let mut runner = Runner::new(inst, QpSettings::default().opt_tol, &mut info);
    let sol = lp_solution(&mut runner)?;
    Ok((inst.q.quad(&sol.x).max(0.0).sqrt(), sol.basis))
}

/// Coordinate descent. With `warm = Some((basis, t))` the first QP is solved
/// at `t` by dual iterations from `basis` (bounds may have changed); later
/// QPs start primal from their predecessor.
pub fn solve_cd(
    inst: &ConicInstance,
    opt: &CdOptions,
    warm: Option<(&WorkingBasis, f64)>,
) -> Result<ConicSolveResult> {
    solve_cd_with_info(inst, opt, warm, &mut RunInfo::default())
}

pub(crate) fn solve_cd_with_info(
    inst: &ConicInstance,
    opt: &CdOptions,
    warm: Option<(&WorkingBasis, f64)>,
    info: &mut RunInfo,
) -> Result<ConicSolveResult> {
    opt.validate()?;
    let mut runner = Runner::new(inst, opt.qp_eps, info);
    let (mut t, mut basis, mut mode) = match warm {
        Some((b, t)) => {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "warm t must be positive, got {t}"
                )));
            }
            (t, Some(b.clone()), StartMode::DualStart)
        }
        None => match opt.t0 {
            InitialT::Value(t) => (t, None, StartMode::PrimalStart),
            InitialT::Lp => {
                let lp = lp_solution(&mut runner)?;
                let t1 = inst.q.quad(&lp.x).max(0.0).sqrt();
                if t1 < opt.t_floor {
                    return runner.finish(
                        &lp,
                        t1,
                        SolveStatus::TZero,
                        StopReason::TZero,
                        opt.delta,
                        Vec::new(),
                    );
                }
                (t1, Some(lp.basis), StartMode::PrimalStart)
            }
        },
    };

    let mut last: Option<QpSolution> = None;
    for _ in 0..opt.max_outer {
        let Some(sol) = runner.qp(t, basis.as_ref(), mode)? else {
            break;
        };
        let t_next = inst.q.quad(&sol.x).max(0.0).sqrt();
        if t_next < opt.t_floor {
            return runner.finish(
                &sol,
                t_next,
                SolveStatus::TZero,
                StopReason::TZero,
                opt.delta,
                Vec::new(),
            );
        }
        let step = (t_next - t).abs() / t;
        let dual = dual_bound_estimate(inst, &sol.x, t, t_next, opt.qp_eps)?;
        let fired = match opt.stop {
            StopRule::DualBound => (dual <= opt.delta).then_some(StopReason::DualBound),
            StopRule::RelativeStep => (step <= opt.delta).then_some(StopReason::RelativeStep),
            StopRule::Either => {
                if dual <= opt.delta {
                    Some(StopReason::DualBound)
                } else if step <= opt.delta {
                    Some(StopReason::RelativeStep)
                } else {
                    None
                }
            }
        };
        debug!("cd t={t:e} t_next={t_next:e} bound={dual:e}");
        if let Some(reason) = fired {
            return runner.finish(
                &sol,
                t_next,
                SolveStatus::Optimal,
                reason,
                opt.delta,
                Vec::new(),
            );
        }
        t = t_next;
        basis = Some(sol.basis.clone());
        mode = StartMode::PrimalStart;
        last = Some(sol);
    }
    match last {
        Some(sol) => {
            let t_last = inst.q.quad(&sol.x).max(0.0).sqrt();
            runner.finish(
                &sol,
                t_last,
                SolveStatus::IterLimit,
                StopReason::IterLimit,
                opt.delta,
                Vec::new(),
            )
        }
        None => Err(Error::Numerical(
            "pivot limit reached in the first QP".into(),
        )),
    }
}

/// Accelerated bisection on `t`.
pub fn solve_bisection(inst: &ConicInstance, opt: &BisectOptions) -> Result<ConicSolveResult> {
    if !(opt.delta > opt.qp_eps && opt.qp_eps > 0.0 && opt.gap_tol > 0.0) {
        return Err(Error::InvalidArgument(
            "need delta > qp_eps > 0 and gap_tol > 0".into(),
        ));
    }
    let mut info = RunInfo::default();
    let mut runner = Runner::new(inst, opt.qp_eps, &mut info);
    let lp = lp_solution(&mut runner)?;
    let t_lp = inst.q.quad(&lp.x).max(0.0).sqrt();
    if t_lp < TZERO_XI {
        return runner.finish(
            &lp,
            t_lp,
            SolveStatus::TZero,
            StopReason::TZero,
            opt.delta,
            Vec::new(),
        );
    }
    let mut t_min = opt.t_min0.max(0.0);
    let mut t_max = opt.t_max0.unwrap_or(t_lp);
    if !(t_min <= t_max) {
        return Err(Error::InvalidArgument(format!(
            "initial bracket [{t_min}, {t_max}] is empty"
        )));
    }
    let mut brackets = vec![(t_min, t_max)];

    // Pieces of the lower bound: c'x at the smallest t known to be ≥ t*, and
    // x'Qx at the largest t known to be ≤ t*.
    let mut hi_lin = dot(&inst.c, &lp.x);
    let mut lo_quad = 0.0f64;
    let mut best_obj = eval_objective(inst, &lp.x)?;
    let mut best = lp.clone();
    let mut best_t = t_lp;
    let mut basis = lp.basis.clone();

    for _ in 0..opt.max_outer {
        let t0 = 0.5 * (t_min + t_max);
        if !(t0 > 0.0) {
            break;
        }
        let Some(sol) = runner.qp(t0, Some(&basis), StartMode::PrimalStart)? else {
            break;
        };
        let q0 = inst.q.quad(&sol.x).max(0.0);
        let t1 = q0.sqrt();
        if t0 <= t1 {
            t_min = t1.min(t_max);
            lo_quad = lo_quad.max(q0);
        } else {
            t_max = t1.max(t_min);
            hi_lin = hi_lin.min(dot(&inst.c, &sol.x));
        }
        brackets.push((t_min, t_max));
        let obj = eval_objective(inst, &sol.x)?;
        if obj < best_obj {
            best_obj = obj;
            best = sol.clone();
            best_t = t1;
        }
        let z_l = hi_lin + inst.omega * lo_quad.sqrt();
        let gap = (best_obj - z_l) / z_l.abs().max(1.0);
        let dual = if t1 > TZERO_XI {
            dual_bound_estimate(inst, &sol.x, t0, t1, opt.qp_eps)?
        } else {
            f64::INFINITY
        };
        debug!("bisect [{t_min:e}, {t_max:e}] t0={t0:e} gap={gap:e} bound={dual:e}");
        basis = sol.basis.clone();
        if t1 < TZERO_XI {
            return runner.finish(
                &sol,
                t1,
                SolveStatus::TZero,
                StopReason::TZero,
                opt.delta,
                brackets,
            );
        }
        if dual <= opt.delta {
            return runner.finish(
                &sol,
                t1,
                SolveStatus::Optimal,
                StopReason::DualBound,
                opt.delta,
                brackets,
            );
        }
        if gap <= opt.gap_tol {
            return runner.finish(
                &best,
                best_t,
                SolveStatus::Optimal,
                StopReason::Gap,
                opt.delta,
                brackets,
            );
        }
    }
    runner.finish(
        &best,
        best_t,
        SolveStatus::IterLimit,
        StopReason::IterLimit,
        opt.delta,
        brackets,
    )
}
