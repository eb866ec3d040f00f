use super::factor::{KktFactor, Singular};
use super::work::Work;
use super::{
    scaled_tol, QpProblem, QpSettings, QpSolution, QpStats, QpStatus, StartMode, VarStatus,
    WorkingBasis,
};
use crate::error::{Error, Result};
use crate::model::{dot, norm_inf};

use VarStatus::{AtLower, AtUpper, Basic};

/// Steps at or below this length count as degenerate.
const DEGENERATE_STEP: f64 = 1e-12;

/// Multiplier changes below this are treated as zero in dual ratio tests.
const DUAL_PIVOT_TOL: f64 = 1e-12;

/// `u_j·max(σQ_jj)` below this marks a constraint dependent on the working set.
const DEPENDENT_TOL: f64 = 1e-11;

struct Iterate {
    x: Vec<f64>,
    status: Vec<VarStatus>,
    factor: KktFactor,
}

enum Phase {
    Optimal,
    IterLimit,
    Unbounded,
}

enum Start {
    Ready(Iterate),
    Infeasible(Vec<f64>, Vec<VarStatus>),
    Limit(Vec<f64>, Vec<VarStatus>),
    Failed,
}

enum DualEnd {
    Feasible,
    Infeasible,
    Limit,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Counter {
    Phase1,
    Primal,
    Dual,
}

struct Engine<'s> {
    s: &'s QpSettings,
    cap: usize,
    pivots: usize,
    degenerate: usize,
    counter: Counter,
    stats: QpStats,
}

pub(super) fn solve(
    s: &QpSettings,
    p: &QpProblem<'_>,
    warm: Option<&WorkingBasis>,
    mode: StartMode,
) -> Result<QpSolution> {
    let poly = p.poly;
    let rows = poly.independent_rows();
    let n = p.n();
    let b: Vec<f64> = rows.iter().map(|&r| poly.b()[r]).collect();
    let work = Work::new(
        poly.a(),
        rows,
        b,
        poly.lower().to_vec(),
        poly.upper().to_vec(),
        p.linear.to_vec(),
        p.sigma,
        p.quad,
    );
    let mut eng = Engine {
        s,
        cap: s.max_pivots.unwrap_or(50 * (n + poly.m()).max(1)),
        pivots: 0,
        degenerate: 0,
        counter: Counter::Primal,
        stats: QpStats {
            warm: warm.is_some(),
            ..QpStats::default()
        },
    };

    let start = match warm {
        None => Start::Failed,
        Some(wb) => match mode {
            StartMode::PrimalStart => eng.primal_start(&work, wb),
            StartMode::DualStart => eng.dual_start(&work, wb),
        },
    };
    let mut it = match start {
        Start::Ready(it) => Some(it),
        Start::Infeasible(x, st) => return Ok(eng.finish(p, &work, x, st, QpStatus::Infeasible)),
        Start::Limit(x, st) => return Ok(eng.finish(p, &work, x, st, QpStatus::IterLimit)),
        Start::Failed => None,
    };

    for attempt in 0..2 {
        let mut cur = match it.take() {
            Some(cur) => cur,
            None => {
                eng.stats.repaired = warm.is_some();
                let crash = crash_point(&work, warm.map(|w| w.values.as_slice()));
                match eng.phase_one(&work, &crash)? {
                    Start::Ready(cur) => cur,
                    Start::Infeasible(x, st) => {
                        return Ok(eng.finish(p, &work, x, st, QpStatus::Infeasible))
                    }
                    Start::Limit(x, st) => {
                        return Ok(eng.finish(p, &work, x, st, QpStatus::IterLimit))
                    }
                    Start::Failed => {
                        return Err(Error::Numerical("phase 1 working set is singular".into()))
                    }
                }
            }
        };
        eng.counter = Counter::Primal;
        match eng.primal(&work, &mut cur) {
            Ok(Phase::Optimal) => {
                return Ok(eng.finish(p, &work, cur.x, cur.status, QpStatus::Optimal))
            }
            Ok(Phase::IterLimit) => {
                return Ok(eng.finish(p, &work, cur.x, cur.status, QpStatus::IterLimit))
            }
            Ok(Phase::Unbounded) => {
                return Err(Error::Numerical("unbounded direction in QP".into()))
            }
            // A warm working set that degrades is retried once from phase 1.
            Err(Singular) if attempt == 0 && warm.is_some() && !eng.stats.repaired => {}
            Err(Singular) => break,
        }
    }
    Err(Error::Numerical("working set became singular".into()))
}

/// Every variable at the bound nearest its warm value (or 0).
fn crash_point(w: &Work<'_>, warm: Option<&[f64]>) -> Vec<f64> {
    (0..w.n_struct())
        .map(|j| {
            let v = warm.map_or(0.0, |x| x[j]);
            let (l, u) = (w.lower[j], w.upper[j]);
            if (v - l).abs() <= (u - v).abs() {
                l
            } else {
                u
            }
        })
        .collect()
}

fn free_of(status: &[VarStatus]) -> Vec<usize> {
    (0..status.len()).filter(|&j| status[j] == Basic).collect()
}

fn axpy(alpha: f64, p: &[f64], x: &mut [f64]) {
    for (xi, pi) in x.iter_mut().zip(p) {
        *xi += alpha * pi;
    }
}

impl Engine<'_> {
    fn count(&mut self, alpha: f64) {
        self.pivots += 1;
        match self.counter {
            Counter::Phase1 => self.stats.phase1_pivots += 1,
            Counter::Primal => self.stats.primal_pivots += 1,
            Counter::Dual => self.stats.dual_pivots += 1,
        }
        if alpha <= DEGENERATE_STEP {
            self.degenerate += 1;
        } else {
            self.degenerate = 0;
        }
    }

    fn bland(&self) -> bool {
        self.degenerate >= self.s.bland_after
    }

    fn refactor(&mut self, w: &Work<'_>, it: &mut Iterate) -> std::result::Result<(), Singular> {
        let free = it.factor.free_vars();
        it.factor = KktFactor::new(w, &free)?;
        self.stats.refactorizations += 1;
        Ok(())
    }

    fn maybe_refactor(
        &mut self,
        w: &Work<'_>,
        it: &mut Iterate,
    ) -> std::result::Result<(), Singular> {
        if it.factor.updates() >= self.s.refactor_every || it.factor.growth() > self.s.growth_limit
        {
            self.refactor(w, it)?;
        }
        Ok(())
    }

    /// Solve with the current factor, refactorizing once if the update went bad.
    fn kkt_solve(
        &mut self,
        w: &Work<'_>,
        it: &mut Iterate,
        rx: &[f64],
        ry: &[f64],
    ) -> std::result::Result<(Vec<f64>, Vec<f64>), Singular> {
        match it.factor.solve(rx, ry) {
            Ok(r) => Ok(r),
            Err(Singular) if it.factor.updates() > 0 => {
                self.refactor(w, it)?;
                it.factor.solve(rx, ry)
            }
            Err(e) => Err(e),
        }
    }

    /// Longest step along `p` (capped at `cap`) keeping `cand` within bounds,
    /// and the variable that blocks it.
    fn ratio(
        &self,
        w: &Work<'_>,
        x: &[f64],
        p: &[f64],
        cand: &[usize],
        cap: f64,
    ) -> (f64, Option<(usize, VarStatus)>) {
        let ptol = self.s.pivot_tol * norm_inf(p).max(1.0);
        let mut steps = Vec::new();
        let mut min = cap;
        for &k in cand {
            let pk = p[k];
            let (a, side) = if pk < -ptol {
                (((x[k] - w.lower[k]) / -pk).max(0.0), AtLower)
            } else if pk > ptol && w.upper[k].is_finite() {
                (((w.upper[k] - x[k]) / pk).max(0.0), AtUpper)
            } else {
                continue;
            };
            if a < cap {
                min = min.min(a);
                steps.push((k, a, side));
            }
        }
        if steps.is_empty() {
            return (cap, None);
        }
        let tie = 1e-12 * (1.0 + min);
        let bland = self.bland();
        let mut best: Option<(usize, VarStatus)> = None;
        let mut best_key = f64::NEG_INFINITY;
        for (k, a, side) in steps {
            if a > min + tie {
                continue;
            }
            let key = if bland { -(k as f64) } else { p[k].abs() };
            if best.is_none() || key > best_key {
                best = Some((k, side));
                best_key = key;
            }
        }
        (min, best)
    }

    fn fix(&mut self, w: &Work<'_>, it: &mut Iterate, k: usize, side: VarStatus) {
        it.x[k] = if side == AtLower {
            w.lower[k]
        } else {
            w.upper[k]
        };
        it.status[k] = side;
        it.factor.remove(w, k);
    }

    fn clamp_free(&self, w: &Work<'_>, it: &mut Iterate, free: &[usize]) {
        for &j in free {
            it.x[j] = it.x[j].clamp(w.lower[j], w.upper[j]);
        }
    }

    /// Primal active-set iterations from a feasible iterate.
    fn primal(&mut self, w: &Work<'_>, it: &mut Iterate) -> std::result::Result<Phase, Singular> {
        let dtol = scaled_tol(self.s.opt_tol, &w.linear);
        let n = w.n();
        loop {
            if self.pivots >= self.cap {
                return Ok(Phase::IterLimit);
            }
            self.maybe_refactor(w, it)?;
            let g = w.grad(&it.x);
            let neg_g: Vec<f64> = g.iter().map(|v| -v).collect();
            let r = w.residual(&it.x);
            let (p, y) = self.kkt_solve(w, it, &neg_g, &r)?;
            let free = it.factor.free_vars();
            let (alpha, block) = self.ratio(w, &it.x, &p, &free, 1.0);
            if let Some((k, side)) = block {
                axpy(alpha, &p, &mut it.x);
                self.fix(w, it, k, side);
                self.clamp_free(w, it, &free);
                self.count(alpha);
                continue;
            }
            axpy(1.0, &p, &mut it.x);
            self.clamp_free(w, it, &free);

            let g = w.grad(&it.x);
            let aty = w.at_mul(&y);
            let bland = self.bland();
            let mut enter: Option<(usize, f64)> = None;
            for j in 0..n {
                let st = it.status[j];
                if st == Basic || w.lower[j] == w.upper[j] {
                    continue;
                }
                let rj = g[j] + aty[j];
                let mu = if st == AtLower { rj } else { -rj };
                if mu < -dtol {
                    match enter {
                        None => enter = Some((j, mu)),
                        Some((_, bm)) if !bland && mu < bm => enter = Some((j, mu)),
                        _ => {}
                    }
                }
            }
            let Some((j, _)) = enter else {
                return Ok(Phase::Optimal);
            };

            let d = if it.status[j] == AtLower { 1.0 } else { -1.0 };
            let mut rx = vec![0.0; n];
            if w.sigma() > 0.0 {
                for &f in &free {
                    rx[f] = -w.h(f, j) * d;
                }
            }
            let mut acol = vec![0.0; w.m()];
            w.a_col(j, &mut acol);
            let ry: Vec<f64> = acol.iter().map(|a| -a * d).collect();
            let (mut dp, _) = self.kkt_solve(w, it, &rx, &ry)?;
            dp[j] = d;
            let hp = w.hess_mul(&dp);
            let kappa = dot(&dp, &hp);
            let gamma = dot(&g, &dp);
            let amin = if kappa > 0.0 {
                -gamma / kappa
            } else {
                f64::INFINITY
            };
            let mut cand = free.clone();
            cand.push(j);
            let (alpha, block) = self.ratio(w, &it.x, &dp, &cand, amin);
            match block {
                None if amin.is_infinite() => return Ok(Phase::Unbounded),
                None => {
                    axpy(alpha, &dp, &mut it.x);
                    it.status[j] = Basic;
                    it.factor.add(w, j);
                }
                Some((k, side)) if k == j => {
                    axpy(alpha, &dp, &mut it.x);
                    it.x[j] = if side == AtLower {
                        w.lower[j]
                    } else {
                        w.upper[j]
                    };
                    it.status[j] = side;
                }
                Some((k, side)) => {
                    axpy(alpha, &dp, &mut it.x);
                    it.status[j] = Basic;
                    it.factor.add(w, j);
                    self.fix(w, it, k, side);
                }
            }
            self.clamp_free(w, it, &free);
            self.count(alpha);
        }
    }

    fn primal_start(&mut self, w: &Work<'_>, wb: &WorkingBasis) -> Start {
        let ftol = self.s.feas_tol;
        let mut x = wb.values.clone();
        for j in 0..w.n() {
            let (l, u) = (w.lower[j], w.upper[j]);
            match wb.status[j] {
                AtLower | AtUpper => {
                    let bound = if wb.status[j] == AtLower { l } else { u };
                    if (x[j] - bound).abs() > ftol {
                        return Start::Failed;
                    }
                    x[j] = bound;
                }
                Basic => {
                    if x[j] < l - ftol || x[j] > u + ftol {
                        return Start::Failed;
                    }
                    x[j] = x[j].clamp(l, u);
                }
            }
        }
        if norm_inf(&w.residual(&x)) > scaled_tol(ftol, &w.b) {
            return Start::Failed;
        }
        let status = wb.status.clone();
        match KktFactor::new(w, &free_of(&status)) {
            Ok(factor) => Start::Ready(Iterate { x, status, factor }),
            Err(Singular) => Start::Failed,
        }
    }

    /// Dual iterations from a working set that is optimal for the same
    /// objective under different bounds.
    fn dual_start(&mut self, w: &Work<'_>, wb: &WorkingBasis) -> Start {
        let n = w.n();
        let mut x = wb.values.clone();
        for j in 0..n {
            match wb.status[j] {
                AtLower => x[j] = w.lower[j],
                AtUpper => x[j] = w.upper[j],
                Basic => {}
            }
        }
        let status = wb.status.clone();
        let factor = match KktFactor::new(w, &free_of(&status)) {
            Ok(f) => f,
            Err(Singular) => return Start::Failed,
        };
        let mut it = Iterate { x, status, factor };
        match self.dual(w, &mut it) {
            Ok(DualEnd::Feasible) => Start::Ready(it),
            Ok(DualEnd::Infeasible) => Start::Infeasible(it.x, it.status),
            Ok(DualEnd::Limit) => Start::Limit(it.x, it.status),
            Err(Singular) => Start::Failed,
        }
    }

    fn dual(&mut self, w: &Work<'_>, it: &mut Iterate) -> std::result::Result<DualEnd, Singular> {
        self.counter = Counter::Dual;
        let n = w.n();
        let ftol = self.s.feas_tol;
        let hmax = (0..n).map(|j| w.h(j, j)).fold(0.0, f64::max);

        // Stationary point of the starting working set.
        let g = w.grad(&it.x);
        let neg_g: Vec<f64> = g.iter().map(|v| -v).collect();
        let r = w.residual(&it.x);
        let (p, mut y) = self.kkt_solve(w, it, &neg_g, &r)?;
        axpy(1.0, &p, &mut it.x);

        loop {
            if self.pivots >= self.cap {
                return Ok(DualEnd::Limit);
            }
            self.maybe_refactor(w, it)?;
            let free = it.factor.free_vars();
            let mut pick: Option<(usize, f64, f64, VarStatus)> = None;
            for &j in &free {
                let (l, u) = (w.lower[j], w.upper[j]);
                let (viol, d, side) = if it.x[j] < l - ftol {
                    (l - it.x[j], 1.0, AtLower)
                } else if it.x[j] > u + ftol {
                    (it.x[j] - u, -1.0, AtUpper)
                } else {
                    continue;
                };
                let better = match pick {
                    None => true,
                    Some((k, v, _, _)) => viol > v || (viol == v && j < k),
                };
                if better {
                    pick = Some((j, viol, d, side));
                }
            }
            let Some((j, viol, d, side)) = pick else {
                return Ok(DualEnd::Feasible);
            };

            let g = w.grad(&it.x);
            let aty = w.at_mul(&y);
            let mu: Vec<f64> = (0..n)
                .map(|i| match it.status[i] {
                    AtLower => g[i] + aty[i],
                    AtUpper => -(g[i] + aty[i]),
                    Basic => 0.0,
                })
                .collect();
            let sgn: Vec<f64> = it
                .status
                .iter()
                .map(|s| if *s == AtLower { 1.0 } else { -1.0 })
                .collect();

            let mut ej = vec![0.0; n];
            ej[j] = 1.0;
            let (u, v) = self.kkt_solve(w, it, &ej, &vec![0.0; w.m()])?;

            if u[j] * hmax > DEPENDENT_TOL {
                let scale = d / u[j];
                let p: Vec<f64> = u.iter().map(|v| v * scale).collect();
                let dy: Vec<f64> = v.iter().map(|v| v * scale).collect();
                let hp = w.hess_mul(&p);
                let atdy = w.at_mul(&dy);
                let mut block: Option<(usize, f64)> = None;
                for i in 0..n {
                    if it.status[i] == Basic || w.lower[i] == w.upper[i] {
                        continue;
                    }
                    let dmu = sgn[i] * (hp[i] + atdy[i]);
                    if dmu < -DUAL_PIVOT_TOL {
                        let a = mu[i].max(0.0) / -dmu;
                        if block.is_none_or(|(_, b)| a < b) {
                            block = Some((i, a));
                        }
                    }
                }
                match block {
                    Some((i, a2)) if a2 < viol => {
                        axpy(a2, &p, &mut it.x);
                        axpy(a2, &dy, &mut y);
                        it.status[i] = Basic;
                        it.factor.add(w, i);
                        self.count(a2);
                    }
                    _ => {
                        axpy(viol, &p, &mut it.x);
                        axpy(viol, &dy, &mut y);
                        self.fix(w, it, j, side);
                        self.count(viol);
                    }
                }
            } else {
                let atv = w.at_mul(&v);
                let mut block: Option<(usize, f64)> = None;
                for i in 0..n {
                    if it.status[i] == Basic || w.lower[i] == w.upper[i] {
                        continue;
                    }
                    let dmu = sgn[i] * d * atv[i];
                    if dmu < -DUAL_PIVOT_TOL {
                        let a = mu[i].max(0.0) / -dmu;
                        if block.is_none_or(|(_, b)| a < b) {
                            block = Some((i, a));
                        }
                    }
                }
                let Some((i, tau)) = block else {
                    return Ok(DualEnd::Infeasible);
                };
                axpy(d * tau, &v, &mut y);
                it.status[i] = Basic;
                it.factor.add(w, i);
                self.count(0.0);
            }
        }
    }

    /// Phase 1 from `crash` on artificials, then a nonsingular working set
    /// for the structural problem.
    fn phase_one(&mut self, w: &Work<'_>, crash: &[f64]) -> Result<Start> {
        self.counter = Counter::Phase1;
        let ns = w.n_struct();
        let m = w.m();
        let (w1, x1) = w.phase_one(crash);
        let mut status: Vec<VarStatus> = (0..ns)
            .map(|j| {
                if crash[j] == w.lower[j] {
                    AtLower
                } else {
                    AtUpper
                }
            })
            .collect();
        status.extend(std::iter::repeat_n(Basic, m));
        let arts: Vec<usize> = (ns..ns + m).collect();
        let factor = match KktFactor::new(&w1, &arts) {
            Ok(f) => f,
            Err(Singular) => return Ok(Start::Failed),
        };
        let mut it = Iterate {
            x: x1,
            status,
            factor,
        };
        let numerical = |_| Error::Numerical("singular working set in phase 1".into());
        match self.primal(&w1, &mut it).map_err(numerical)? {
            Phase::Optimal => {}
            Phase::IterLimit => {
                it.x.truncate(ns);
                it.status.truncate(ns);
                return Ok(Start::Limit(it.x, it.status));
            }
            Phase::Unbounded => return Err(Error::Numerical("phase 1 is unbounded".into())),
        }
        let infeas: f64 = it.x[ns..].iter().sum();
        if infeas > scaled_tol(self.s.feas_tol, &w.b) {
            it.x.truncate(ns);
            it.status.truncate(ns);
            return Ok(Start::Infeasible(it.x, it.status));
        }

        // Swap remaining artificials for structurals.
        for a in ns..ns + m {
            if it.status[a] != Basic {
                continue;
            }
            let mut ea = vec![0.0; ns + m];
            ea[a] = 1.0;
            let (_, v) = self
                .kkt_solve(&w1, &mut it, &ea, &vec![0.0; m])
                .map_err(numerical)?;
            let atv = w1.at_mul(&v);
            let scale = norm_inf(&atv[..ns]);
            let mut best: Option<usize> = None;
            for k in 0..ns {
                if it.status[k] != Basic
                    && atv[k].abs() > 1e-9 * scale.max(1e-300)
                    && best.is_none_or(|b| atv[k].abs() > atv[b].abs())
                {
                    best = Some(k);
                }
            }
            let Some(k) = best else {
                return Err(Error::Numerical("dependent row left after phase 1".into()));
            };
            it.x[a] = 0.0;
            it.status[a] = AtLower;
            it.status[k] = Basic;
            it.factor.remove(&w1, a);
            it.factor.add(&w1, k);
            self.count(0.0);
        }

        it.x.truncate(ns);
        it.status.truncate(ns);
        match KktFactor::new(w, &free_of(&it.status)) {
            Ok(factor) => Ok(Start::Ready(Iterate {
                x: it.x,
                status: it.status,
                factor,
            })),
            Err(Singular) => Ok(Start::Failed),
        }
    }

    /// Polish, extract multipliers and package.
    fn finish(
        &mut self,
        p: &QpProblem<'_>,
        w: &Work<'_>,
        mut x: Vec<f64>,
        status: Vec<VarStatus>,
        qs: QpStatus,
    ) -> QpSolution {
        let n = w.n_struct();
        let m_all = p.poly.m();
        let rows = p.poly.independent_rows();
        let free = free_of(&status);
        let mut y = vec![0.0; w.m()];
        let mut qs = qs;
        if qs == QpStatus::Optimal {
            if let Ok(mut f) = KktFactor::new(w, &free) {
                self.stats.refactorizations += 1;
                let g = w.grad(&x);
                let neg_g: Vec<f64> = g.iter().map(|v| -v).collect();
                let r = w.residual(&x);
                if let Ok((dp, dy)) = f.solve(&neg_g, &r) {
                    let ftol = self.s.feas_tol;
                    let ok = free.iter().all(|&j| {
                        x[j] + dp[j] >= w.lower[j] - ftol && x[j] + dp[j] <= w.upper[j] + ftol
                    });
                    if ok {
                        for &j in &free {
                            x[j] = (x[j] + dp[j]).clamp(w.lower[j], w.upper[j]);
                        }
                    }
                    y = dy;
                }
            }
            // Rows dropped as dependent may still be inconsistent.
            if p.poly.violation(&x) > 1e3 * scaled_tol(self.s.feas_tol, p.poly.b()) {
                qs = QpStatus::Infeasible;
            }
        }

        let mut lambda = vec![0.0; m_all];
        let mut mu_lower = vec![0.0; n];
        let mut mu_upper = vec![0.0; n];
        let objective;
        if qs == QpStatus::Infeasible {
            objective = f64::INFINITY;
        } else {
            for (k, &row) in rows.iter().enumerate() {
                lambda[row] = -y[k];
            }
            let g = w.grad(&x);
            let aty = w.at_mul(&y);
            for j in 0..n {
                if status[j] == Basic {
                    continue;
                }
                let r = g[j] + aty[j];
                if r >= 0.0 {
                    mu_lower[j] = r;
                } else {
                    mu_upper[j] = -r;
                }
            }
            objective = p.objective(&x);
        }
        QpSolution {
            basis: WorkingBasis {
                status,
                values: x.clone(),
            },
            x,
            lambda,
            mu_lower,
            mu_upper,
            objective,
            iterations: self.pivots,
            status: qs,
            stats: self.stats.clone(),
        }
    }
}
