//! Branch-and-bound for the integer-constrained conic problem.
//!
//! Node relaxations are solved to optimality by coordinate descent, warm
//! started from the parent's final working set at the parent's `t`. Nodes
//! are kept in a list ordered by their parent's relaxation value; after a
//! branching the child whose new bound cuts off the parent solution by less
//! is processed at once and its sibling goes into the list.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

use itertools::Itertools;
use log::info;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{eval_objective, ConicInstance, Family};
use crate::qp::WorkingBasis;
use crate::solvers::{solve_cd_with_info, CdOptions, RunInfo};

/// Offset in the relative gap denominator.
pub const GAP_EPS: f64 = 1e-10;

/// Distances to the nearest integer closer than this count as tied.
pub const BRANCH_TIE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct BnbOptions {
    pub gap_tol: f64,
    pub int_tol: f64,
    pub time_limit: Option<Duration>,
    pub node_limit: Option<usize>,
    /// Warm-start children from the parent's working set.
    pub warm_start: bool,
    pub cd: CdOptions,
    /// Emit a progress line every this many nodes (0 disables).
    pub log_stride: usize,
}

impl Default for BnbOptions {
    fn default() -> Self {
        Self {
            gap_tol: 1e-4,
            int_tol: 1e-5,
            time_limit: None,
            node_limit: None,
            warm_start: true,
            cd: CdOptions::default(),
            log_stride: 100,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundChange {
    pub var: usize,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone)]
pub struct BnbNode {
    /// Changes relative to the root bounds, in the order they were made.
    pub bound_changes: Vec<BoundChange>,
    pub basis: Option<WorkingBasis>,
    pub t_parent: Option<f64>,
    /// Relaxation value of the parent.
    pub lb: f64,
    pub depth: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BnbStatus {
    /// Tree exhausted.
    Optimal,
    GapReached,
    TimeLimit,
    NodeLimit,
    /// Tree exhausted without an integer point.
    Infeasible,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BnbStats {
    /// Nodes whose relaxation was warm-started from a parent.
    pub warm_nodes: usize,
    /// Warm-started nodes whose first QP ran without phase 1.
    pub dual_accepted: usize,
    pub infeasible_nodes: usize,
    pub pruned: usize,
    pub qp_count: usize,
    pub pivot_count: usize,
}

#[derive(Debug, Clone)]
pub struct BnbResult {
    pub incumbent_x: Option<Vec<f64>>,
    /// `+∞` without an incumbent.
    pub incumbent_obj: f64,
    pub best_bound: f64,
    pub nodes_processed: usize,
    pub status: BnbStatus,
    /// `(ub − lb)/|lb + 1e-10|`.
    pub egap: f64,
    pub stats: BnbStats,
}

impl BnbResult {
    pub fn solved(&self) -> bool {
        matches!(self.status, BnbStatus::Optimal | BnbStatus::GapReached)
    }
}

pub fn relative_gap(ub: f64, lb: f64) -> f64 {
    if ub == f64::INFINITY || lb == f64::NEG_INFINITY {
        f64::INFINITY
    } else {
        ((ub - lb) / (lb + GAP_EPS).abs()).max(0.0)
    }
}

fn frac_dist(v: f64) -> f64 {
    (v - v.floor()).min(v.ceil() - v)
}

/// Integer variable farthest from an integer (lowest index on ties, up to
/// [`BRANCH_TIE_TOL`]), with the two branching values.
pub fn branch_select(x: &[f64], integer_vars: &[usize], int_tol: f64) -> Result<(usize, f64, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for &i in integer_vars {
        let v = *x
            .get(i)
            .ok_or_else(|| Error::InvalidArgument(format!("integer variable {i} out of range")))?;
        let d = frac_dist(v);
        if d > int_tol && best.is_none_or(|(_, bd)| d > bd + BRANCH_TIE_TOL) {
            best = Some((i, d));
        }
    }
    match best {
        Some((i, _)) => Ok((i, x[i].floor(), x[i].ceil())),
        None => Err(Error::InvalidArgument(
            "all integer variables are integral; nothing to branch on".into(),
        )),
    }
}

struct Entry {
    lb: f64,
    seq: usize,
    node: BnbNode,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    // Max-heap: smallest bound first, then oldest.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .lb
            .total_cmp(&self.lb)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

pub fn solve_bnb(inst: &ConicInstance, opts: &BnbOptions) -> Result<BnbResult> {
    if !inst.is_discrete() {
        return Err(Error::InvalidArgument(
            "branch-and-bound needs at least one integer variable".into(),
        ));
    }
    let start = Instant::now();
    let relax = inst.relaxation();
    let (root_lo, root_up) = (inst.poly.lower().to_vec(), inst.poly.upper().to_vec());

    let mut heap: BinaryHeap<Entry> = BinaryHeap::new();
    let mut seq = 0usize;
    let mut next = Some(BnbNode {
        bound_changes: Vec::new(),
        basis: None,
        t_parent: None,
        lb: f64::NEG_INFINITY,
        depth: 0,
    });
    let mut ub = f64::INFINITY;
    let mut incumbent: Option<Vec<f64>> = None;
    let mut nodes = 0usize;
    let mut stats = BnbStats::default();
    let mut status = None;
    let mut lb_best = f64::NEG_INFINITY;

    loop {
        let node = match next.take() {
            Some(n) => n,
            None => match heap.pop() {
                Some(e) => e.node,
                None => break,
            },
        };
        if node.lb >= ub {
            stats.pruned += 1;
            continue;
        }
        lb_best = heap.peek().map_or(node.lb, |e| e.lb.min(node.lb));
        if incumbent.is_some() && relative_gap(ub, lb_best) <= opts.gap_tol {
            status = Some(BnbStatus::GapReached);
            break;
        }
        if opts.time_limit.is_some_and(|tl| start.elapsed() >= tl) {
            status = Some(BnbStatus::TimeLimit);
            break;
        }
        if opts.node_limit.is_some_and(|nl| nodes >= nl) {
            status = Some(BnbStatus::NodeLimit);
            break;
        }
        nodes += 1;
        if opts.log_stride > 0 && nodes.is_multiple_of(opts.log_stride) {
            info!(
                "node={nodes} ub={ub} lb={lb_best} gap={} depth={}",
                relative_gap(ub, lb_best),
                node.depth
            );
        }

        let mut lo = root_lo.clone();
        let mut up = root_up.clone();
        for ch in &node.bound_changes {
            lo[ch.var] = ch.lower;
            up[ch.var] = ch.upper;
        }
        let sub = relax.with_bounds(lo, up)?;
        let warm = if opts.warm_start {
            node.basis.as_ref().zip(node.t_parent)
        } else {
            None
        };
        let mut run = RunInfo::default();
        let solved = solve_cd_with_info(&sub, &opts.cd, warm, &mut run);
        stats.qp_count += run.qps;
        stats.pivot_count += run.pivots;
        if warm.is_some() {
            stats.warm_nodes += 1;
            if run.first_repaired == Some(false) {
                stats.dual_accepted += 1;
            }
        }
        let res = match solved {
            Ok(r) => r,
            Err(Error::Infeasible(_)) => {
                stats.infeasible_nodes += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        let z = res.objective;
        if z >= ub {
            stats.pruned += 1;
            continue;
        }

        match branch_select(&res.x, &inst.integer_vars, opts.int_tol) {
            Err(_) => {
                let mut xr = res.x.clone();
                for &i in &inst.integer_vars {
                    xr[i] = xr[i].round();
                }
                let (x_inc, obj) = if inst.poly.violation(&xr) <= 1e-9 {
                    let o = eval_objective(inst, &xr)?;
                    (xr, o)
                } else {
                    (res.x.clone(), z)
                };
                if obj < ub {
                    ub = obj;
                    incumbent = Some(x_inc);
                }
            }
            Ok((i, fl, ce)) => {
                let v = res.x[i];
                let child = |lower: f64, upper: f64| {
                    let mut bc = node.bound_changes.clone();
                    bc.push(BoundChange {
                        var: i,
                        lower,
                        upper,
                    });
                    BnbNode {
                        bound_changes: bc,
                        basis: Some(res.basis.clone()),
                        t_parent: Some(res.t),
                        lb: z,
                        depth: node.depth + 1,
                    }
                };
                let (cur_lo, cur_up) = (sub.poly.lower()[i], sub.poly.upper()[i]);
                let down = child(cur_lo, fl);
                let up_child = child(ce, cur_up);
                let (first, second) = if v - fl <= ce - v {
                    (down, up_child)
                } else {
                    (up_child, down)
                };
                next = Some(first);
                heap.push(Entry {
                    lb: z,
                    seq,
                    node: second,
                });
                seq += 1;
            }
        }
    }

    let status = match status {
        Some(s) => s,
        None => {
            lb_best = ub;
            if incumbent.is_some() {
                BnbStatus::Optimal
            } else {
                BnbStatus::Infeasible
            }
        }
    };
    let egap = if status == BnbStatus::Optimal {
        0.0
    } else {
        relative_gap(ub, lb_best)
    };
    info!(
        "done nodes={nodes} ub={ub} lb={lb_best} gap={egap} status={status:?} elapsed={:?}",
        start.elapsed()
    );
    Ok(BnbResult {
        incumbent_x: incumbent,
        incumbent_obj: ub,
        best_bound: lb_best,
        nodes_processed: nodes,
        status,
        egap,
        stats,
    })
}

/// Largest number of candidate points the oracle will evaluate.
pub const ORACLE_LIMIT: usize = 1 << 20;

/// Best feasible binary point by exhaustive evaluation: supports of size `b`
/// for cardinality instances, monotone paths for grids up to 6×6, all binary
/// vectors otherwise (`n ≤ 20`).
pub fn enumeration_oracle(inst: &ConicInstance) -> Result<(Vec<f64>, f64)> {
    let n = inst.n();
    let candidates: Box<dyn Iterator<Item = Vec<f64>>> = match inst.meta.family {
        Family::Cardinality => {
            let k = inst.poly.b()[0].round() as usize;
            let count = binomial(n, k);
            if count > ORACLE_LIMIT as u128 {
                return Err(Error::TooLarge(format!("C({n}, {k}) supports")));
            }
            Box::new((0..n).combinations(k).map(move |s| {
                let mut x = vec![0.0; n];
                for i in s {
                    x[i] = 1.0;
                }
                x
            }))
        }
        Family::GridPath { rows, cols } => {
            if rows > 6 || cols > 6 {
                return Err(Error::TooLarge(format!("{rows}x{cols} grid")));
            }
            Box::new(grid_paths(rows, cols).into_iter())
        }
        Family::Custom => {
            if n > 20 {
                return Err(Error::TooLarge(format!("2^{n} binary points")));
            }
            Box::new(
                (0u32..1 << n)
                    .map(move |mask| (0..n).map(|i| f64::from((mask >> i) & 1)).collect()),
            )
        }
    };
    let mut best: Option<(Vec<f64>, f64)> = None;
    for x in candidates {
        if inst.poly.violation(&x) > 1e-9 {
            continue;
        }
        let obj = eval_objective(inst, &x)?;
        if best.as_ref().is_none_or(|(_, b)| obj < *b) {
            best = Some((x, obj));
        }
    }
    best.ok_or_else(|| Error::Infeasible("no feasible binary point".into()))
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Indicator vectors of all top-left to bottom-right paths.
fn grid_paths(rows: usize, cols: usize) -> Vec<Vec<f64>> {
    let arcs = crate::gen::grid_arcs(rows, cols);
    let n = arcs.len();
    let mut out = Vec::new();
    let mut stack = vec![(0usize, vec![0.0; n])];
    while let Some((v, x)) = stack.pop() {
        if v == rows * cols - 1 {
            out.push(x);
            continue;
        }
        for (k, &(tail, head)) in arcs.iter().enumerate() {
            if tail == v {
                let mut y = x.clone();
                y[k] = 1.0;
                stack.push((head, y));
            }
        }
    }
    out
}
