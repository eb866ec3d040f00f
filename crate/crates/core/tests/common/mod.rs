//! Oracles shared by the integration tests. None of them calls into the
//! solver drivers; the golden-section search uses the QP engine only as a
//! black-box evaluator of `g(t)`.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use perspqp::{
    generate, solve_qp, subproblem_objective, ConicInstance, GenSpec, Polyhedron, QpStatus,
    QuadraticForm, StartMode,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `g(t)` by a cold QP solve.
pub fn g_of_t(inst: &ConicInstance, t: f64) -> f64 {
    let p = subproblem_objective(inst, t).unwrap();
    let sol = solve_qp(&p, None, StartMode::PrimalStart).unwrap();
    assert_eq!(sol.status, QpStatus::Optimal);
    sol.objective
}

/// Upper bound on `sqrt(x'Qx)` over the box.
fn t_upper(inst: &ConicInstance) -> f64 {
    let n = inst.n();
    let mut q = DMatrix::zeros(n, n);
    for j in 0..n {
        q.set_column(j, &DVector::from_vec(inst.q.column(j)));
    }
    let lmax = q.symmetric_eigenvalues().max();
    let r2: f64 = (0..n)
        .map(|i| {
            let b = inst.poly.lower()[i].abs().max(inst.poly.upper()[i].abs());
            b * b
        })
        .sum();
    (lmax * r2).sqrt().max(1e-6)
}

/// Golden-section minimization of the convex `g` on `[0, t_upper]`.
pub fn golden_section(inst: &ConicInstance) -> (f64, f64) {
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (1e-9, t_upper(inst));
    let mut x1 = b - phi * (b - a);
    let mut x2 = a + phi * (b - a);
    let (mut f1, mut f2) = (g_of_t(inst, x1), g_of_t(inst, x2));
    while b - a > 1e-9 * (1.0 + b) {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = g_of_t(inst, x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = g_of_t(inst, x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

/// The 60 convex instances: cardinality n ∈ {20, 50, 100} and grids 4×4,
/// 6×6, crossed with Ω ∈ {1, 2, 3}, r ∈ {5, 10} and α ∈ {0.1, 0.5}.
pub fn convex_suite() -> Vec<GenSpec> {
    let mut out = Vec::new();
    let shapes: [(usize, usize); 5] = [(20, 0), (50, 0), (100, 0), (4, 4), (6, 6)];
    let mut k = 0u64;
    for &(a, b) in &shapes {
        for omega in [1.0, 2.0, 3.0] {
            for &r in &[5usize, 10] {
                for &alpha in &[0.1, 0.5] {
                    let spec = if b == 0 {
                        GenSpec::cardinality(a, r, alpha, omega, 1000 + k)
                    } else {
                        GenSpec::grid(a, b, r, alpha, omega, 1000 + k)
                    };
                    out.push(spec);
                    k += 1;
                }
            }
        }
    }
    out
}

/// Cardinality n = 15 (b = 3) at two (r, α) settings and 4×4 grids, each
/// with Ω ∈ {1, 2, 3} and 5 seeds.
pub fn discrete_suite() -> Vec<ConicInstance> {
    let mut out = Vec::new();
    for (r, alpha) in [(5, 0.5), (10, 0.1)] {
        for omega in [1.0, 2.0, 3.0] {
            for seed in 0..5 {
                let s = GenSpec::cardinality(15, r, alpha, omega, seed).discrete(true);
                out.push(generate(&s).unwrap());
            }
        }
    }
    for omega in [1.0, 2.0, 3.0] {
        for seed in 0..5 {
            let s = GenSpec::grid(4, 4, 5, 0.5, omega, seed).discrete(true);
            out.push(generate(&s).unwrap());
        }
    }
    out
}

/// Random strongly convex QP with `n ≤ 8`, `m ≤ 3`, and a known feasible point.
pub struct TinyQp {
    pub linear: Vec<f64>,
    pub quad: QuadraticForm,
    pub sigma: f64,
    pub poly: Polyhedron,
}

pub fn tiny_qp(seed: u64) -> TinyQp {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=8);
    let m = rng.random_range(0..=3usize.min(n));
    let r = rng.random_range(1..=n);
    let f = DMatrix::from_fn(n, r, |_, _| rng.random_range(-1.0..1.0));
    let h = DMatrix::from_fn(r, r, |_, _| rng.random_range(-1.0..1.0));
    let d: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
    let quad = QuadraticForm::new(f, h, d).unwrap();
    let lower: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..0.0)).collect();
    let upper: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..2.0)).collect();
    let x0: Vec<f64> = (0..n)
        .map(|i| rng.random_range(lower[i]..=upper[i]))
        .collect();
    let a = DMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0));
    let b = (&a * DVector::from_vec(x0)).as_slice().to_vec();
    let linear = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
    let sigma = rng.random_range(0.5..2.0);
    let poly = Polyhedron::new(a, b, lower, upper).unwrap();
    TinyQp {
        linear,
        quad,
        sigma,
        poly,
    }
}

impl TinyQp {
    pub fn objective(&self, x: &[f64]) -> f64 {
        let lin: f64 = self.linear.iter().zip(x).map(|(c, v)| c * v).sum();
        lin + 0.5 * self.sigma * self.quad.quad(x)
    }

    fn dense_q(&self) -> DMatrix<f64> {
        let n = self.poly.n();
        DMatrix::from_fn(n, n, |i, j| self.sigma * self.quad.entry(i, j))
    }
}

/// Euclidean projection onto `{Ax = b} ∩ box`: `x = clip(y + A'ν)` with `ν`
/// maximizing the concave dual, found by damped semismooth Newton.
fn project(poly: &Polyhedron, y: &DVector<f64>) -> DVector<f64> {
    let a = poly.a();
    let b = DVector::from_column_slice(poly.b());
    let lo = poly.lower();
    let hi = poly.upper();
    let clip = |v: &DVector<f64>| DVector::from_fn(v.len(), |i, _| v[i].clamp(lo[i], hi[i]));
    if poly.m() == 0 {
        return clip(y);
    }
    let primal = |nu: &DVector<f64>| clip(&(y + a.tr_mul(nu)));
    let dual = |nu: &DVector<f64>| {
        let x = primal(nu);
        0.5 * (&x - y).norm_squared() - nu.dot(&(a * &x - &b))
    };
    let mut nu = DVector::zeros(poly.m());
    for _ in 0..500 {
        let x = primal(&nu);
        let grad = &b - a * &x;
        if grad.amax() < 1e-14 {
            break;
        }
        let z = y + a.tr_mul(&nu);
        let free = DMatrix::from_fn(a.ncols(), 1, |i, _| {
            if z[i] > lo[i] && z[i] < hi[i] {
                1.0
            } else {
                0.0
            }
        });
        let scaled = DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * free[j]);
        let mut jac = &scaled * a.transpose();
        for i in 0..jac.nrows() {
            jac[(i, i)] += 1e-12;
        }
        let dir = jac.lu().solve(&grad).unwrap_or_else(|| grad.clone());
        let base = dual(&nu);
        let mut step = 1.0;
        let mut moved = false;
        while step > 1e-12 {
            let cand = &nu + &dir * step;
            if dual(&cand) >= base + 1e-4 * step * grad.dot(&dir).min(0.0) {
                nu = cand;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if !moved {
            nu += &grad * 1e-3;
        }
    }
    primal(&nu)
}

/// Accelerated projected gradient with restarts; returns the minimizer.
pub fn projected_gradient(qp: &TinyQp) -> Vec<f64> {
    let n = qp.poly.n();
    let q = qp.dense_q();
    let lip = q.symmetric_eigenvalues().max();
    let c = DVector::from_column_slice(&qp.linear);
    let mut x = project(&qp.poly, &DVector::zeros(n));
    let mut y = x.clone();
    let mut theta = 1.0f64;
    for _ in 0..50_000 {
        let grad = &q * &y + &c;
        let xn = project(&qp.poly, &(&y - grad / lip));
        let step = (&xn - &x).amax();
        let thn = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
        // Restart when the momentum points uphill.
        if (&y - &xn).dot(&(&xn - &x)) > 0.0 {
            theta = 1.0;
            y = xn.clone();
        } else {
            y = &xn + (&xn - &x) * ((theta - 1.0) / thn);
            theta = thn;
        }
        x = xn;
        if step < 1e-12 {
            break;
        }
    }
    x.as_slice().to_vec()
}
