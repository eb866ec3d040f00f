//! Factorization of the reduced KKT matrix
//!
//! ```text
//! K_F = [ H_FF  A_F' ]
//!       [ A_F    0   ]
//! ```
//!
//! for the current free set `F`, kept up to date across single-variable
//! working-set changes with a Schur complement: `K0` (the matrix at the last
//! refactorization) is bordered by one column per variable freed since then
//! and one unit column per variable fixed since then.

use nalgebra::{DMatrix, DVector, Dyn, FullPivLU, LU};

use super::work::Work;

const NONE: usize = usize::MAX;

/// Relative pivot size below which a factorization is declared singular.
const SINGULAR_TOL: f64 = 1e-11;

#[derive(Debug)]
pub(crate) struct Singular;

#[derive(Debug)]
struct BorderCol {
    var: usize,
    /// `true` for a freed variable, `false` for a fixed one.
    added: bool,
    /// Border column over the rows of `K0`; empty for fixed variables (unit column).
    v: Vec<f64>,
    /// `K0⁻¹·v`.
    w: Vec<f64>,
}

pub(crate) struct KktFactor {
    base: Vec<usize>,
    pos: Vec<usize>,
    m: usize,
    lu: LU<f64, Dyn, Dyn>,
    cols: Vec<BorderCol>,
    col_of: Vec<usize>,
    schur: DMatrix<f64>,
    schur_lu: Option<FullPivLU<f64, Dyn, Dyn>>,
    growth: f64,
}

impl KktFactor {
    pub(crate) fn new(work: &Work<'_>, free: &[usize]) -> Result<Self, Singular> {
        let nb = free.len();
        let m = work.m();
        let d0 = nb + m;
        let mut k = DMatrix::zeros(d0, d0);
        let mut pos = vec![NONE; work.n()];
        for (p, &f) in free.iter().enumerate() {
            pos[f] = p;
        }
        if work.sigma() > 0.0 {
            for (p, &f) in free.iter().enumerate() {
                for (q, &g) in free.iter().enumerate().skip(p) {
                    let h = work.h(f, g);
                    k[(p, q)] = h;
                    k[(q, p)] = h;
                }
            }
        }
        let mut col = vec![0.0; m];
        for (p, &f) in free.iter().enumerate() {
            work.a_col(f, &mut col);
            for (i, &v) in col.iter().enumerate() {
                k[(nb + i, p)] = v;
                k[(p, nb + i)] = v;
            }
        }
        let scale = k.amax().max(1.0);
        let lu = LU::new(k);
        if d0 > 0 {
            let u = lu.u();
            let min_piv = u
                .diagonal()
                .iter()
                .fold(f64::INFINITY, |a, v| a.min(v.abs()));
            if !(min_piv > SINGULAR_TOL * scale) {
                return Err(Singular);
            }
        }
        Ok(Self {
            base: free.to_vec(),
            pos,
            m,
            lu,
            cols: Vec::new(),
            col_of: vec![NONE; work.n()],
            schur: DMatrix::zeros(0, 0),
            schur_lu: None,
            growth: 1.0,
        })
    }

    fn d0(&self) -> usize {
        self.base.len() + self.m
    }

    pub(crate) fn updates(&self) -> usize {
        self.cols.len()
    }

    pub(crate) fn growth(&self) -> f64 {
        self.growth
    }

    /// Current free set, in a deterministic order.
    pub(crate) fn free_vars(&self) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .base
            .iter()
            .copied()
            .filter(|&f| self.col_of[f] == NONE)
            .collect();
        out.extend(self.cols.iter().filter(|c| c.added).map(|c| c.var));
        out
    }

    pub(crate) fn add(&mut self, work: &Work<'_>, var: usize) {
        if self.col_of[var] != NONE {
            // Fixed since the last refactorization: undo.
            debug_assert!(!self.cols[self.col_of[var]].added);
            self.drop_col(self.col_of[var]);
            return;
        }
        debug_assert_eq!(self.pos[var], NONE);
        let nb = self.base.len();
        let mut v = vec![0.0; self.d0()];
        if work.sigma() > 0.0 {
            for (p, &f) in self.base.iter().enumerate() {
                v[p] = work.h(f, var);
            }
        }
        let mut col = vec![0.0; self.m];
        work.a_col(var, &mut col);
        v[nb..].copy_from_slice(&col);
        let w = self.base_solve(&v);
        self.push_col(
            work,
            BorderCol {
                var,
                added: true,
                v,
                w,
            },
        );
    }

    pub(crate) fn remove(&mut self, work: &Work<'_>, var: usize) {
        if self.col_of[var] != NONE {
            debug_assert!(self.cols[self.col_of[var]].added);
            self.drop_col(self.col_of[var]);
            return;
        }
        let p = self.pos[var];
        debug_assert_ne!(p, NONE);
        let mut e = vec![0.0; self.d0()];
        e[p] = 1.0;
        let w = self.base_solve(&e);
        self.push_col(
            work,
            BorderCol {
                var,
                added: false,
                v: Vec::new(),
                w,
            },
        );
    }

    fn base_solve(&self, rhs: &[f64]) -> Vec<f64> {
        if rhs.is_empty() {
            return Vec::new();
        }
        let mut b = DVector::from_column_slice(rhs);
        self.lu.solve_mut(&mut b);
        b.data.into()
    }

    /// `V_i'·w` for border column `i`.
    fn border_dot(&self, i: usize, w: &[f64]) -> f64 {
        let c = &self.cols[i];
        if c.added {
            c.v.iter().zip(w).map(|(a, b)| a * b).sum()
        } else {
            w[self.pos[c.var]]
        }
    }

    fn push_col(&mut self, work: &Work<'_>, col: BorderCol) {
        let k = self.cols.len();
        let var = col.var;
        let added = col.added;
        self.cols.push(col);
        self.col_of[var] = k;
        let mut s = self.schur.clone().resize(k + 1, k + 1, 0.0);
        for i in 0..=k {
            let d = if added && self.cols[i].added {
                work.h(self.cols[i].var, var)
            } else {
                0.0
            };
            let val = d - self.border_dot(i, &self.cols[k].w);
            s[(i, k)] = val;
            s[(k, i)] = val;
        }
        self.schur = s;
        self.schur_lu = None;
    }

    fn drop_col(&mut self, idx: usize) {
        let col = self.cols.remove(idx);
        self.col_of[col.var] = NONE;
        for c in &self.cols[idx..] {
            self.col_of[c.var] -= 1;
        }
        self.schur = self.schur.clone().remove_row(idx).remove_column(idx);
        self.schur_lu = None;
    }

    fn ensure_schur(&mut self) -> Result<(), Singular> {
        if self.cols.is_empty() || self.schur_lu.is_some() {
            return Ok(());
        }
        let scale = self.schur.amax();
        let lu = FullPivLU::new(self.schur.clone());
        let u = lu.u();
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for v in u.diagonal().iter() {
            lo = lo.min(v.abs());
            hi = hi.max(v.abs());
        }
        if !(lo > SINGULAR_TOL * scale.max(1e-300)) {
            return Err(Singular);
        }
        self.growth = hi / lo;
        self.schur_lu = Some(lu);
        Ok(())
    }

    /// Solve `K_F·[p; y] = [rhs_x; rhs_y]`. `rhs_x` is indexed by variable;
    /// entries outside `F` are ignored and the returned `p` is zero there.
    pub(crate) fn solve(
        &mut self,
        rhs_x: &[f64],
        rhs_y: &[f64],
    ) -> Result<(Vec<f64>, Vec<f64>), Singular> {
        self.ensure_schur()?;
        let nb = self.base.len();
        let mut r0 = vec![0.0; self.d0()];
        for (p, &f) in self.base.iter().enumerate() {
            if self.col_of[f] == NONE {
                r0[p] = rhs_x[f];
            }
        }
        r0[nb..].copy_from_slice(rhs_y);
        let mut z0 = self.base_solve(&r0);
        let mut p = vec![0.0; rhs_x.len()];
        if let Some(lu) = &self.schur_lu {
            let k = self.cols.len();
            let mut t = DVector::zeros(k);
            for i in 0..k {
                let r1 = if self.cols[i].added {
                    rhs_x[self.cols[i].var]
                } else {
                    0.0
                };
                t[i] = r1 - self.border_dot(i, &z0);
            }
            if !lu.solve_mut(&mut t) {
                return Err(Singular);
            }
            for (j, c) in self.cols.iter().enumerate() {
                let zj = t[j];
                for (a, b) in z0.iter_mut().zip(&c.w) {
                    *a -= b * zj;
                }
                if c.added {
                    p[c.var] = zj;
                }
            }
        }
        for (q, &f) in self.base.iter().enumerate() {
            if self.col_of[f] == NONE {
                p[f] = z0[q];
            }
        }
        let y = z0.split_off(nb);
        Ok((p, y))
    }
}
