use nalgebra::DMatrix;
use perspqp::{generate, GenSpec};

fn dense(inst: &perspqp::ConicInstance) -> DMatrix<f64> {
    let n = inst.n();
    DMatrix::from_fn(n, n, |i, j| inst.q.entry(i, j))
}

#[test]
fn q_is_psd_and_d_in_open_unit_interval() {
    for seed in 0..20 {
        let inst = generate(&GenSpec::cardinality(40, 6, 0.4, 1.0, seed)).unwrap();
        assert!(inst.q.diag().iter().all(|&d| d > 0.0 && d < 1.0));
        assert!(dense(&inst).symmetric_eigenvalues().min() >= -1e-10);
    }
}

#[test]
fn costs_lie_in_range() {
    for seed in 0..20 {
        let inst = generate(&GenSpec::grid(4, 5, 3, 0.5, 1.0, seed)).unwrap();
        for i in 0..inst.n() {
            let lo = -2.0 * inst.q.entry(i, i).sqrt();
            assert!(inst.c[i] >= lo && inst.c[i] <= 0.0);
        }
    }
}

#[test]
fn factor_density_matches_alpha() {
    // Nonzero count of F is Binomial(n·r, α).
    let (n, r, alpha) = (1000, 10, 0.1);
    let inst = generate(&GenSpec::cardinality(n, r, alpha, 1.0, 5)).unwrap();
    let nnz = inst.q.factor().iter().filter(|&&v| v != 0.0).count() as f64;
    let trials = (n * r) as f64;
    let frac = nnz / trials;
    assert!(
        (frac - alpha).abs() <= 3.0 * (alpha * (1.0 - alpha) / trials).sqrt(),
        "{frac}"
    );
}

#[test]
fn mean_scaled_cost_is_minus_one() {
    // c_i / sqrt(Q_ii) is uniform on (−2, 0).
    let inst = generate(&GenSpec::cardinality(1000, 5, 0.2, 1.0, 8)).unwrap();
    let n = inst.n() as f64;
    let mean: f64 = (0..inst.n())
        .map(|i| inst.c[i] / inst.q.entry(i, i).sqrt())
        .sum::<f64>()
        / n;
    assert!((mean + 1.0).abs() <= 0.1, "mean = {mean}");
}

#[test]
fn grid_flow_conservation_and_size() {
    let inst = generate(&GenSpec::grid(5, 4, 2, 0.5, 1.0, 0)).unwrap();
    assert_eq!(inst.n(), 2 * 5 * 4 - 5 - 4);
    let a = inst.poly.a();
    for j in 0..inst.n() {
        let col: Vec<f64> = a.column(j).iter().copied().filter(|v| *v != 0.0).collect();
        assert_eq!(col.len(), 2);
        assert_eq!(col.iter().sum::<f64>(), 0.0);
    }
    assert_eq!(inst.poly.b()[0], 1.0);
    assert_eq!(inst.poly.b()[19], -1.0);
}
