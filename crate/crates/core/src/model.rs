//! Problem data and the perspective-reformulation arithmetic.
//!
//! The conic problem is `min c'x + Ω·sqrt(x'Qx)` over `{Ax = b, l ≤ x ≤ u}`.
//! Its perspective form replaces the square root by `(Ω/2)·x'Qx/t + (Ω/2)·t`
//! with an extra scalar `t ≥ 0`; for fixed `t` that is a convex QP.
//!
//! Multiplier convention used throughout the crate: a point is stationary when
//!
//! ```text
//! c + ∇f(x) − A'λ − μ_lower + μ_upper = 0,   μ_lower, μ_upper ≥ 0
//! ```
//!
//! with `f(x) = Ω·sqrt(x'Qx)` for the conic problem and `f(x) = (σ/2)·x'Qx`
//! for a QP subproblem.

use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::qp::QpProblem;

/// `x'Qx` at or below this value is treated as exactly zero.
pub const QZERO_TOL: f64 = 1e-12;

/// Feasibility slack accepted by [`kkt_residual`].
pub const KKT_FEAS_TOL: f64 = 1e-7;

/// Dense `Q` is only materialized up to this dimension.
pub const DENSE_LIMIT: usize = 4000;

/// Positive semidefinite matrix `Q = F·Σ·F' + D` with `Σ = H·H'`.
///
/// Both the factors and `G = F·H` are kept, so `x'Qx = ‖G'x‖² + Σ dᵢxᵢ²` is
/// nonnegative by construction. A dense copy is built on first use for
/// `n ≤ DENSE_LIMIT`.
#[derive(Debug, Clone)]
pub struct QuadraticForm {
    factor: DMatrix<f64>,
    sigma_factor: DMatrix<f64>,
    diag: Vec<f64>,
    scaled: DMatrix<f64>,
    dense: OnceLock<Option<DMatrix<f64>>>,
}

impl QuadraticForm {
    pub fn new(factor: DMatrix<f64>, sigma_factor: DMatrix<f64>, diag: Vec<f64>) -> Result<Self> {
        let n = diag.len();
        check_len("factor rows", factor.nrows(), n)?;
        let r = factor.ncols();
        if sigma_factor.nrows() != r || sigma_factor.ncols() != r {
            return Err(Error::InvalidArgument(format!(
                "sigma factor must be {r}x{r}, got {}x{}",
                sigma_factor.nrows(),
                sigma_factor.ncols()
            )));
        }
        if let Some(d) = diag.iter().find(|d| !d.is_finite() || **d < 0.0) {
            return Err(Error::InvalidArgument(format!(
                "diagonal entries must be finite and nonnegative, got {d}"
            )));
        }
        if factor
            .iter()
            .chain(sigma_factor.iter())
            .any(|v| !v.is_finite())
        {
            return Err(Error::InvalidArgument("non-finite factor entry".into()));
        }
        let scaled = &factor * &sigma_factor;
        Ok(Self {
            factor,
            sigma_factor,
            diag,
            scaled,
            dense: OnceLock::new(),
        })
    }

    /// `Q = diag(d)`.
    pub fn diagonal(diag: Vec<f64>) -> Result<Self> {
        let n = diag.len();
        Self::new(DMatrix::zeros(n, 0), DMatrix::zeros(0, 0), diag)
    }

    /// Factor an explicit symmetric PSD matrix. Indefinite input is rejected,
    /// not repaired.
    pub fn from_dense(q: DMatrix<f64>) -> Result<Self> {
        let n = q.nrows();
        if q.ncols() != n {
            return Err(Error::InvalidArgument("Q must be square".into()));
        }
        let scale = q.amax().max(1.0);
        for i in 0..n {
            for j in 0..i {
                if (q[(i, j)] - q[(j, i)]).abs() > 1e-12 * scale {
                    return Err(Error::InvalidArgument("Q must be symmetric".into()));
                }
            }
        }
        let eig = SymmetricEigen::new(q.clone());
        if eig.eigenvalues.iter().any(|&l| l < -1e-10 * scale) {
            return Err(Error::InvalidArgument(
                "Q is not positive semidefinite".into(),
            ));
        }
        let mut factor = eig.eigenvectors.clone();
        for (k, &l) in eig.eigenvalues.iter().enumerate() {
            let s = l.max(0.0).sqrt();
            factor.column_mut(k).scale_mut(s);
        }
        let qf = Self::new(factor, DMatrix::identity(n, n), vec![0.0; n])?;
        // Keep the caller's matrix as the dense representation.
        let _ = qf.dense.set((n <= DENSE_LIMIT).then_some(q));
        Ok(qf)
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn rank(&self) -> usize {
        self.factor.ncols()
    }

    pub fn factor(&self) -> &DMatrix<f64> {
        &self.factor
    }

    pub fn sigma_factor(&self) -> &DMatrix<f64> {
        &self.sigma_factor
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    /// Dense `Q`, or `None` above [`DENSE_LIMIT`].
    pub fn dense(&self) -> Option<&DMatrix<f64>> {
        self.dense
            .get_or_init(|| {
                let n = self.dim();
                (n <= DENSE_LIMIT).then(|| {
                    let mut q = &self.scaled * self.scaled.transpose();
                    for i in 0..n {
                        q[(i, i)] += self.diag[i];
                    }
                    q
                })
            })
            .as_ref()
    }

    /// `x'Qx` from the factored form.
    pub fn quad(&self, x: &[f64]) -> f64 {
        let gx = self.scaled.tr_mul(&DVector::from_column_slice(x));
        gx.norm_squared()
            + x.iter()
                .zip(&self.diag)
                .map(|(xi, di)| di * xi * xi)
                .sum::<f64>()
    }

    /// `Qx` from the factored form, `O(n·r)`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let xv = DVector::from_column_slice(x);
        let gx = self.scaled.tr_mul(&xv);
        let mut y = &self.scaled * gx;
        for i in 0..x.len() {
            y[i] += self.diag[i] * x[i];
        }
        y.data.into()
    }

    /// `Qx` through the dense matrix, falling back to the factored product.
    pub fn apply_dense(&self, x: &[f64]) -> Vec<f64> {
        match self.dense() {
            Some(q) => (q * DVector::from_column_slice(x)).data.into(),
            None => self.apply(x),
        }
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        if let Some(q) = self.dense() {
            return q[(i, j)];
        }
        let v = self.scaled.row(i).dot(&self.scaled.row(j));
        if i == j {
            v + self.diag[i]
        } else {
            v
        }
    }

    /// Column `j` of `Q`.
    pub fn column(&self, j: usize) -> Vec<f64> {
        if let Some(q) = self.dense() {
            return q.column(j).iter().copied().collect();
        }
        let gj = self.scaled.row(j).transpose();
        let mut col: Vec<f64> = (&self.scaled * gj).data.into();
        col[j] += self.diag[j];
        col
    }
}

/// `{x : Ax = b, lower ≤ x ≤ upper}` with finite bounds.
///
/// The constraint matrix is shared between copies, so bound-modified
/// children (branch-and-bound nodes) are cheap to create.
#[derive(Debug, Clone)]
pub struct Polyhedron {
    a: Arc<DMatrix<f64>>,
    b: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    independent_rows: Arc<OnceLock<Vec<usize>>>,
}

impl Polyhedron {
    pub fn new(a: DMatrix<f64>, b: Vec<f64>, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let (m, n) = a.shape();
        check_len("b", b.len(), m)?;
        check_len("lower", lower.len(), n)?;
        check_len("upper", upper.len(), n)?;
        if a.iter().chain(&b).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite entry in A or b".into()));
        }
        validate_bounds(&lower, &upper)?;
        Ok(Self {
            a: Arc::new(a),
            b,
            lower,
            upper,
            independent_rows: Arc::new(OnceLock::new()),
        })
    }

    /// Build from `(row, col, value)` triples; duplicates are summed.
    pub fn from_triplets(
        m: usize,
        n: usize,
        triplets: &[(usize, usize, f64)],
        b: Vec<f64>,
        lower: Vec<f64>,
        upper: Vec<f64>,
    ) -> Result<Self> {
        let mut a = DMatrix::zeros(m, n);
        for &(i, j, v) in triplets {
            if i >= m || j >= n {
                return Err(Error::InvalidArgument(format!(
                    "triplet ({i}, {j}) outside {m}x{n}"
                )));
            }
            a[(i, j)] += v;
        }
        Self::new(a, b, lower, upper)
    }

    /// Same equality system, new bounds.
    pub fn with_bounds(&self, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        check_len("lower", lower.len(), self.n())?;
        check_len("upper", upper.len(), self.n())?;
        validate_bounds(&lower, &upper)?;
        Ok(Self {
            a: Arc::clone(&self.a),
            b: self.b.clone(),
            lower,
            upper,
            independent_rows: Arc::clone(&self.independent_rows),
        })
    }

    pub fn n(&self) -> usize {
        self.a.ncols()
    }

    pub fn m(&self) -> usize {
        self.a.nrows()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Nonzero entries of `A` in row-major order.
    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for i in 0..self.m() {
            for j in 0..self.n() {
                let v = self.a[(i, j)];
                if v != 0.0 {
                    out.push((i, j, v));
                }
            }
        }
        out
    }

    /// Indices of a maximal linearly independent subset of the rows of `A`.
    pub fn independent_rows(&self) -> &[usize] {
        self.independent_rows
            .get_or_init(|| crate::qp::rows::independent_rows(&self.a))
    }

    /// `Ax − b`.
    pub fn residual(&self, x: &[f64]) -> Vec<f64> {
        let ax = &*self.a * DVector::from_column_slice(x);
        ax.iter().zip(&self.b).map(|(l, r)| l - r).collect()
    }

    /// Largest violation of the equalities or the bounds.
    pub fn violation(&self, x: &[f64]) -> f64 {
        let eq = self.residual(x).iter().fold(0.0f64, |m, r| m.max(r.abs()));
        let bd = x
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .fold(0.0f64, |m, (xi, (l, u))| m.max(l - xi).max(xi - u));
        eq.max(bd)
    }
}

fn validate_bounds(lower: &[f64], upper: &[f64]) -> Result<()> {
    for (i, (l, u)) in lower.iter().zip(upper).enumerate() {
        if !l.is_finite() || !u.is_finite() {
            return Err(Error::InvalidArgument(format!("bound {i} is not finite")));
        }
        if l > u {
            return Err(Error::InvalidArgument(format!(
                "lower bound {l} exceeds upper bound {u} for variable {i}"
            )));
        }
    }
    Ok(())
}

/// Which generator produced an instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum Family {
    Cardinality,
    #[serde(rename = "gridpath")]
    GridPath {
        rows: usize,
        cols: usize,
    },
    #[default]
    Custom,
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Cardinality => "cardinality",
            Family::GridPath { .. } => "gridpath",
            Family::Custom => "custom",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct InstanceMeta {
    pub family: Family,
    pub n: usize,
    pub rank: usize,
    pub alpha: f64,
    pub omega: f64,
    pub seed: u64,
}

/// `min c'x + Ω·sqrt(x'Qx)` over a polyhedron, optionally with integrality.
#[derive(Debug, Clone)]
pub struct ConicInstance {
    pub c: Vec<f64>,
    pub omega: f64,
    pub q: QuadraticForm,
    pub poly: Polyhedron,
    pub integer_vars: Vec<usize>,
    pub meta: InstanceMeta,
}

impl ConicInstance {
    pub fn new(
        c: Vec<f64>,
        omega: f64,
        q: QuadraticForm,
        poly: Polyhedron,
        integer_vars: Vec<usize>,
    ) -> Result<Self> {
        let n = poly.n();
        check_len("c", c.len(), n)?;
        check_len("Q", q.dim(), n)?;
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "omega must be positive, got {omega}"
            )));
        }
        if let Some(&j) = integer_vars.iter().find(|&&j| j >= n) {
            return Err(Error::InvalidArgument(format!(
                "integer variable {j} out of range 0..{n}"
            )));
        }
        let mut integer_vars = integer_vars;
        integer_vars.sort_unstable();
        integer_vars.dedup();
        Ok(Self {
            c,
            omega,
            q,
            poly,
            integer_vars,
            meta: InstanceMeta {
                n,
                omega,
                ..InstanceMeta::default()
            },
        })
    }

    pub fn with_meta(mut self, meta: InstanceMeta) -> Self {
        self.meta = meta;
        self
    }

    pub fn n(&self) -> usize {
        self.poly.n()
    }

    pub fn is_discrete(&self) -> bool {
        !self.integer_vars.is_empty()
    }

    /// Copy of the instance with the bounds replaced.
    pub fn with_bounds(&self, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        Ok(Self {
            poly: self.poly.with_bounds(lower, upper)?,
            ..self.clone()
        })
    }

    /// The continuous relaxation: same data, no integrality.
    pub fn relaxation(&self) -> Self {
        Self {
            integer_vars: Vec::new(),
            ..self.clone()
        }
    }
}

/// Multipliers for the stationarity system plus its measured violation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KktCertificate {
    pub lambda: Vec<f64>,
    pub mu_lower: Vec<f64>,
    pub mu_upper: Vec<f64>,
    /// ∞-norm of the stationarity violation.
    pub residual_inf: f64,
    /// Largest complementary-slackness or multiplier-sign violation.
    pub comp_viol: f64,
}

impl KktCertificate {
    /// Name of the norm used for `residual_inf`.
    pub const NORM: &'static str = "inf";
}

/// `c'x + Ω·sqrt(max(x'Qx, 0))`.
pub fn eval_objective(inst: &ConicInstance, x: &[f64]) -> Result<f64> {
    check_len("x", x.len(), inst.n())?;
    Ok(dot(&inst.c, x) + inst.omega * inst.q.quad(x).max(0.0).sqrt())
}

/// Closure of the perspective of `x'Qx`: `x'Qx/t` for `t > 0`, `0` or `+∞` at `t = 0`.
pub fn eval_h(q: &QuadraticForm, x: &[f64], t: f64) -> Result<f64> {
    check_len("x", x.len(), q.dim())?;
    if t.is_nan() || t < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "t must be nonnegative, got {t}"
        )));
    }
    let qx = q.quad(x);
    if t > 0.0 {
        Ok(qx / t)
    } else if qx <= QZERO_TOL {
        Ok(0.0)
    } else {
        Ok(f64::INFINITY)
    }
}

/// Gradient of `f(x) = Ω·sqrt(x'Qx)`.
pub fn grad_f(inst: &ConicInstance, x: &[f64]) -> Result<Vec<f64>> {
    check_len("x", x.len(), inst.n())?;
    let qx = inst.q.quad(x);
    if qx <= QZERO_TOL {
        return Err(Error::ZeroQuadratic(qx));
    }
    let scale = inst.omega / qx.sqrt();
    Ok(inst.q.apply(x).into_iter().map(|v| scale * v).collect())
}

/// ∞-norm of `c + ∇f(x) − A'λ − μ_lower + μ_upper`.
pub fn kkt_residual(inst: &ConicInstance, x: &[f64], cert: &KktCertificate) -> Result<f64> {
    Ok(certify(inst, x, &cert.lambda, &cert.mu_lower, &cert.mu_upper)?.residual_inf)
}

/// Evaluate the conic stationarity and complementarity violations at `x` for
/// the given multipliers.
pub fn certify(
    inst: &ConicInstance,
    x: &[f64],
    lambda: &[f64],
    mu_lower: &[f64],
    mu_upper: &[f64],
) -> Result<KktCertificate> {
    let n = inst.n();
    check_len("x", x.len(), n)?;
    check_len("lambda", lambda.len(), inst.poly.m())?;
    check_len("mu_lower", mu_lower.len(), n)?;
    check_len("mu_upper", mu_upper.len(), n)?;
    let viol = inst.poly.violation(x);
    if viol > KKT_FEAS_TOL {
        return Err(Error::Infeasible(format!("constraint violation {viol:e}")));
    }
    let grad = grad_f(inst, x)?;
    let at_lambda = inst.poly.a().tr_mul(&DVector::from_column_slice(lambda));
    let mut residual_inf = 0.0f64;
    let mut comp_viol = 0.0f64;
    let (lo, up) = (inst.poly.lower(), inst.poly.upper());
    for i in 0..n {
        let r = inst.c[i] + grad[i] - at_lambda[i] - mu_lower[i] + mu_upper[i];
        residual_inf = residual_inf.max(r.abs());
        comp_viol = comp_viol
            .max((mu_lower[i] * (x[i] - lo[i])).abs())
            .max((mu_upper[i] * (up[i] - x[i])).abs())
            .max(-mu_lower[i])
            .max(-mu_upper[i]);
    }
    Ok(KktCertificate {
        lambda: lambda.to_vec(),
        mu_lower: mu_lower.to_vec(),
        mu_upper: mu_upper.to_vec(),
        residual_inf,
        comp_viol,
    })
}

/// Bound on the conic stationarity violation after a coordinate-descent step:
/// `qp_eps + |t_next − t_prev|/t_prev · ‖∇f(x_next)‖_∞`.
pub fn dual_bound_estimate(
    inst: &ConicInstance,
    x_next: &[f64],
    t_prev: f64,
    t_next: f64,
    qp_eps: f64,
) -> Result<f64> {
    if !(t_prev > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "t_prev must be positive, got {t_prev}"
        )));
    }
    let g = grad_f(inst, x_next)?;
    let gnorm = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(qp_eps + (t_next - t_prev).abs() / t_prev * gnorm)
}

/// QP for fixed `t`: `min c'x + (Ω/2t)·x'Qx + (Ω/2)·t` over the polyhedron.
///
/// `t = +∞` gives the LP `min c'x` with no offset.
pub fn subproblem_objective(inst: &ConicInstance, t: f64) -> Result<QpProblem<'_>> {
    subproblem_on(inst, &inst.poly, t)
}

/// [`subproblem_objective`] over a different polyhedron (same `n`).
pub fn subproblem_on<'a>(
    inst: &'a ConicInstance,
    poly: &'a Polyhedron,
    t: f64,
) -> Result<QpProblem<'a>> {
    check_len("polyhedron", poly.n(), inst.n())?;
    if t.is_nan() || t <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "t must be positive, got {t}"
        )));
    }
    let (sigma, offset) = if t.is_infinite() {
        (0.0, 0.0)
    } else {
        (inst.omega / t, 0.5 * inst.omega * t)
    };
    QpProblem::new(&inst.c, &inst.q, sigma, offset, poly)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn simplex_instance(c: Vec<f64>) -> ConicInstance {
        let q = QuadraticForm::diagonal(vec![1.0, 1.0]).unwrap();
        let poly = Polyhedron::new(
            DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
            vec![1.0],
            vec![0.0; 2],
            vec![1.0; 2],
        )
        .unwrap();
        ConicInstance::new(c, 1.0, q, poly, vec![]).unwrap()
    }

    fn single_point(q: f64, c: f64, omega: f64) -> ConicInstance {
        let qf = QuadraticForm::diagonal(vec![q]).unwrap();
        let poly = Polyhedron::new(
            DMatrix::from_element(1, 1, 1.0),
            vec![1.0],
            vec![0.0],
            vec![2.0],
        )
        .unwrap();
        ConicInstance::new(vec![c], omega, qf, poly, vec![]).unwrap()
    }

    #[test]
    fn objective_examples() {
        let inst = simplex_instance(vec![0.0, 0.0]);
        let v = eval_objective(&inst, &[0.5, 0.5]).unwrap();
        assert!((v - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(eval_objective(&inst, &[0.0, 0.0]).unwrap(), 0.0);
        let one = single_point(4.0, -1.0, 1.0);
        assert!((eval_objective(&one, &[1.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(
            eval_objective(&inst, &[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn perspective_branches() {
        let q = QuadraticForm::diagonal(vec![1.0, 1.0]).unwrap();
        assert_eq!(eval_h(&q, &[1.0, 1.0], 2.0).unwrap(), 1.0);
        assert_eq!(eval_h(&q, &[0.0, 0.0], 0.0).unwrap(), 0.0);
        assert_eq!(eval_h(&q, &[1.0, 0.0], 0.0).unwrap(), f64::INFINITY);
        assert!(eval_h(&q, &[1.0, 0.0], -1.0).is_err());
    }

    #[test]
    fn gradient_examples() {
        let inst = simplex_instance(vec![0.0, 0.0]);
        let g = grad_f(&inst, &[3.0, 4.0]).unwrap();
        assert!((g[0] - 0.6).abs() < 1e-15 && (g[1] - 0.8).abs() < 1e-15);
        assert!(matches!(
            grad_f(&inst, &[0.0, 0.0]),
            Err(Error::ZeroQuadratic(_))
        ));
        let one = single_point(4.0, 0.0, 2.0);
        assert!((grad_f(&one, &[1.0]).unwrap()[0] - 4.0).abs() < 1e-15);
    }

    #[test]
    fn subproblem_scaling() {
        let inst = simplex_instance(vec![0.0, 0.0]);
        let p = subproblem_objective(&inst, 1.0).unwrap();
        assert_eq!((p.sigma, p.offset), (1.0, 0.5));
        let mut two = simplex_instance(vec![0.0, 0.0]);
        two.omega = 2.0;
        let p = subproblem_objective(&two, 4.0).unwrap();
        assert_eq!((p.sigma, p.offset), (0.5, 4.0));
        let p = subproblem_objective(&inst, f64::INFINITY).unwrap();
        assert_eq!((p.sigma, p.offset), (0.0, 0.0));
        assert!(subproblem_objective(&inst, 0.0).is_err());
    }

    #[test]
    fn kkt_at_symmetric_optimum() {
        let inst = simplex_instance(vec![0.0, 0.0]);
        let x = [0.5, 0.5];
        // ∇f = x/‖x‖ = (1/√2, 1/√2) = A'λ
        let lambda = [0.5f64.sqrt()];
        let cert = KktCertificate {
            lambda: lambda.to_vec(),
            mu_lower: vec![0.0; 2],
            mu_upper: vec![0.0; 2],
            ..Default::default()
        };
        assert!(kkt_residual(&inst, &x, &cert).unwrap() <= 1e-9);
        let moved = [0.501, 0.499];
        assert!(kkt_residual(&inst, &moved, &cert).unwrap() > 1e-6);
        assert!(matches!(
            kkt_residual(&inst, &[0.7, 0.7], &cert),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn kkt_fully_constrained() {
        // c + ∇f = -1 + 2 = 1 absorbed by λ.
        let inst = single_point(4.0, -1.0, 1.0);
        let cert = certify(&inst, &[1.0], &[1.0], &[0.0], &[0.0]).unwrap();
        assert_eq!(cert.residual_inf, 0.0);
    }

    #[test]
    fn dual_bound_examples() {
        let inst = simplex_instance(vec![0.0, 0.0]);
        let x = [0.5, 0.5];
        assert_eq!(
            dual_bound_estimate(&inst, &x, 0.7, 0.7, 1e-9).unwrap(),
            1e-9
        );
        // ‖∇f‖_∞ = 2 with Q = [[4]], Ω = 2, x = 1.
        let one = single_point(4.0, 0.0, 2.0);
        let est = dual_bound_estimate(&one, &[1.0], 1.0, 1.1, 0.0).unwrap();
        assert!((est - 0.4).abs() < 1e-12);
        let one = single_point(4.0, 0.0, 1.0);
        let est = dual_bound_estimate(&one, &[1.0], 1.0, 1.1, 0.0).unwrap();
        assert!((est - 0.2).abs() < 1e-12);
    }

    #[test]
    fn factored_matches_dense() {
        let f = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, -0.5, 2.0, 0.0, 0.3]);
        let h = DMatrix::from_row_slice(2, 2, &[0.9, 0.0, -0.2, 0.4]);
        let q = QuadraticForm::new(f, h, vec![0.1, 0.2, 0.3]).unwrap();
        let x = [0.3, -1.2, 2.0];
        let a = q.apply(&x);
        let b = q.apply_dense(&x);
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).abs() <= 1e-12);
        }
        for j in 0..3 {
            let col = q.column(j);
            for i in 0..3 {
                assert!((col[i] - q.entry(i, j)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn from_dense_rejects_indefinite() {
        let q = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(QuadraticForm::from_dense(q).is_err());
        let q = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let qf = QuadraticForm::from_dense(q).unwrap();
        assert!((qf.quad(&[1.0, -1.0]) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn polyhedron_rejects_crossed_bounds() {
        let a = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        assert!(Polyhedron::new(a, vec![1.0], vec![0.0, 2.0], vec![1.0, 1.0]).is_err());
    }
}
