use nalgebra::DMatrix;

use crate::model::QuadraticForm;

/// The problem the active-set loop actually iterates on: the structural
/// variables over the independent rows of `A`, optionally extended with one
/// artificial column `±e_k` per row for phase 1.
pub(crate) struct Work<'a> {
    a: &'a DMatrix<f64>,
    rows: &'a [usize],
    pub(crate) b: Vec<f64>,
    n_struct: usize,
    art_sign: Vec<f64>,
    pub(crate) lower: Vec<f64>,
    pub(crate) upper: Vec<f64>,
    pub(crate) linear: Vec<f64>,
    sigma: f64,
    q: &'a QuadraticForm,
}

impl<'a> Work<'a> {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn new(
        a: &'a DMatrix<f64>,
        rows: &'a [usize],
        b: Vec<f64>,
        lower: Vec<f64>,
        upper: Vec<f64>,
        linear: Vec<f64>,
        sigma: f64,
        q: &'a QuadraticForm,
    ) -> Self {
        let n_struct = a.ncols();
        Self {
            a,
            rows,
            b,
            n_struct,
            art_sign: Vec::new(),
            lower,
            upper,
            linear,
            sigma,
            q,
        }
    }

    /// Phase-1 problem: minimize the sum of artificials sized to absorb the
    /// row residuals at `x` (structural part).
    pub(crate) fn phase_one(&self, x: &[f64]) -> (Work<'a>, Vec<f64>) {
        let m = self.m();
        let res = self.residual(&x[..self.n_struct]);
        let art_sign: Vec<f64> = res
            .iter()
            .map(|&r| if r >= 0.0 { 1.0 } else { -1.0 })
            .collect();
        let mut lower = self.lower[..self.n_struct].to_vec();
        let mut upper = self.upper[..self.n_struct].to_vec();
        lower.extend(std::iter::repeat_n(0.0, m));
        upper.extend(std::iter::repeat_n(f64::INFINITY, m));
        let mut linear = vec![0.0; self.n_struct];
        linear.extend(std::iter::repeat_n(1.0, m));
        let mut xx = x[..self.n_struct].to_vec();
        xx.extend(res.iter().map(|r| r.abs()));
        let w = Work {
            a: self.a,
            rows: self.rows,
            b: self.b.clone(),
            n_struct: self.n_struct,
            art_sign,
            lower,
            upper,
            linear,
            sigma: 0.0,
            q: self.q,
        };
        (w, xx)
    }

    pub(crate) fn n(&self) -> usize {
        self.n_struct + self.art_sign.len()
    }

    pub(crate) fn n_struct(&self) -> usize {
        self.n_struct
    }

    pub(crate) fn m(&self) -> usize {
        self.rows.len()
    }

    pub(crate) fn sigma(&self) -> f64 {
        self.sigma
    }

    pub(crate) fn a_col(&self, j: usize, out: &mut [f64]) {
        if j < self.n_struct {
            for (o, &r) in out.iter_mut().zip(self.rows) {
                *o = self.a[(r, j)];
            }
        } else {
            out.iter_mut().for_each(|o| *o = 0.0);
            let k = j - self.n_struct;
            out[k] = self.art_sign[k];
        }
    }

    pub(crate) fn h(&self, i: usize, j: usize) -> f64 {
        if self.sigma == 0.0 || i >= self.n_struct || j >= self.n_struct {
            0.0
        } else {
            self.sigma * self.q.entry(i, j)
        }
    }

    /// `σ·Q·p` on the structural part, zero on artificials.
    pub(crate) fn hess_mul(&self, p: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n()];
        if self.sigma > 0.0 {
            let qp = self.q.apply(&p[..self.n_struct]);
            for (o, v) in out.iter_mut().zip(qp) {
                *o = self.sigma * v;
            }
        }
        out
    }

    pub(crate) fn grad(&self, x: &[f64]) -> Vec<f64> {
        let mut g = self.hess_mul(x);
        for (gi, c) in g.iter_mut().zip(&self.linear) {
            *gi += c;
        }
        g
    }

    /// `b − A·x` over the kept rows (artificials included when present).
    pub(crate) fn residual(&self, x: &[f64]) -> Vec<f64> {
        let mut r = self.b.clone();
        for j in 0..self.n_struct {
            let xj = x[j];
            if xj != 0.0 {
                for (ri, &row) in r.iter_mut().zip(self.rows) {
                    *ri -= self.a[(row, j)] * xj;
                }
            }
        }
        for (k, s) in self.art_sign.iter().enumerate() {
            if let Some(&xa) = x.get(self.n_struct + k) {
                r[k] -= s * xa;
            }
        }
        r
    }

    /// `A'·y` over all variables.
    pub(crate) fn at_mul(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n()];
        for (j, o) in out.iter_mut().enumerate().take(self.n_struct) {
            *o = self
                .rows
                .iter()
                .zip(y)
                .map(|(&row, yi)| self.a[(row, j)] * yi)
                .sum();
        }
        for (k, s) in self.art_sign.iter().enumerate() {
            out[self.n_struct + k] = s * y[k];
        }
        out
    }
}
