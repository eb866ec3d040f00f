use nalgebra::{DMatrix, DVector};

/// Greedy modified Gram–Schmidt over the rows of `a`; a row is kept when its
/// component orthogonal to the rows kept so far is not negligible.
pub(crate) fn independent_rows(a: &DMatrix<f64>) -> Vec<usize> {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut keep = Vec::new();
    for i in 0..a.nrows() {
        let row = a.row(i).transpose();
        let norm = row.norm();
        if norm == 0.0 {
            continue;
        }
        let mut v = row.clone_owned();
        // Two passes keep the orthogonalization accurate for nearly dependent rows.
        for _ in 0..2 {
            for q in &basis {
                let c = q.dot(&v);
                v.axpy(-c, q, 1.0);
            }
        }
        let rn = v.norm();
        if rn > 1e-10 * norm {
            basis.push(v / rn);
            keep.push(i);
        }
    }
    keep
}
