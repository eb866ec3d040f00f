//! Synthetic instances: a cardinality polytope and the path polytope of a
//! grid network, both with `Q = F·Σ·F' + D`.
//!
//! All randomness comes from a ChaCha8 stream seeded with [`GenSpec::seed`],
//! drawn in a fixed order: `D`, then `H` (row-major), then `F` (row-major),
//! then `c`.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ConicInstance, Family, InstanceMeta, Polyhedron, QuadraticForm};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    /// `Cardinality` or `GridPath`; `Custom` is rejected.
    pub family: Family,
    /// Variable count for `Cardinality`; ignored for grids.
    pub n: usize,
    pub r: usize,
    pub alpha: f64,
    pub omega: f64,
    pub seed: u64,
    pub discrete: bool,
}

impl GenSpec {
    pub fn cardinality(n: usize, r: usize, alpha: f64, omega: f64, seed: u64) -> Self {
        Self {
            family: Family::Cardinality,
            n,
            r,
            alpha,
            omega,
            seed,
            discrete: false,
        }
    }

    pub fn grid(rows: usize, cols: usize, r: usize, alpha: f64, omega: f64, seed: u64) -> Self {
        Self {
            family: Family::GridPath { rows, cols },
            n: grid_arc_count(rows, cols),
            r,
            alpha,
            omega,
            seed,
            discrete: false,
        }
    }

    pub fn discrete(mut self, yes: bool) -> Self {
        self.discrete = yes;
        self
    }

    /// Number of variables the spec produces.
    pub fn dim(&self) -> usize {
        match self.family {
            Family::GridPath { rows, cols } => grid_arc_count(rows, cols),
            _ => self.n,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.r == 0 {
            return Err(Error::InvalidArgument("rank r must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidArgument(format!(
                "density alpha must lie in [0, 1], got {}",
                self.alpha
            )));
        }
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "omega must be positive, got {}",
                self.omega
            )));
        }
        match self.family {
            Family::Cardinality if self.n < 5 => Err(Error::InvalidArgument(format!(
                "cardinality instances need n >= 5, got {}",
                self.n
            ))),
            Family::GridPath { rows, cols } if rows < 2 || cols < 2 => Err(Error::InvalidArgument(
                format!("grid must be at least 2x2, got {rows}x{cols}"),
            )),
            Family::Custom => Err(Error::InvalidArgument(
                "the generator covers the cardinality and gridpath families only".into(),
            )),
            _ => Ok(()),
        }
    }

    fn meta(&self) -> InstanceMeta {
        InstanceMeta {
            family: self.family,
            n: self.dim(),
            rank: self.r,
            alpha: self.alpha,
            omega: self.omega,
            seed: self.seed,
        }
    }
}

/// `2pq − p − q`.
pub fn grid_arc_count(rows: usize, cols: usize) -> usize {
    2 * rows * cols - rows - cols
}

/// Arcs of the `rows × cols` grid as `(tail, head)` node indices, nodes
/// numbered row-major from 0. Nodes are visited row-major; at each node the
/// arc to the right comes before the arc downward.
pub fn grid_arcs(rows: usize, cols: usize) -> Vec<(usize, usize)> {
    let mut arcs = Vec::with_capacity(grid_arc_count(rows, cols));
    for i in 0..rows {
        for j in 0..cols {
            let v = i * cols + j;
            if j + 1 < cols {
                arcs.push((v, v + 1));
            }
            if i + 1 < rows {
                arcs.push((v, v + cols));
            }
        }
    }
    arcs
}

fn uniform_pm1<R: Rng>(rng: &mut R) -> f64 {
    rng.random_range(-1.0..1.0)
}

/// `D ~ U(0,1)` (zero draws are redrawn), `H` with `U(−1,1)` entries, and `F`
/// whose entries are zero with probability `1 − α` and `U(−1,1)` otherwise.
pub fn gen_quadratic<R: Rng>(n: usize, r: usize, alpha: f64, rng: &mut R) -> Result<QuadraticForm> {
    let d: Vec<f64> = (0..n)
        .map(|_| loop {
            let v: f64 = rng.random();
            if v > 0.0 {
                break v;
            }
        })
        .collect();
    let mut h = DMatrix::zeros(r, r);
    for i in 0..r {
        for j in 0..r {
            h[(i, j)] = uniform_pm1(rng);
        }
    }
    let mut f = DMatrix::zeros(n, r);
    for i in 0..n {
        for j in 0..r {
            if rng.random::<f64>() < alpha {
                f[(i, j)] = uniform_pm1(rng);
            }
        }
    }
    QuadraticForm::new(f, h, d)
}

/// `c_i ~ U(−2·sqrt(Q_ii), 0)`.
pub fn gen_costs<R: Rng>(q: &QuadraticForm, rng: &mut R) -> Vec<f64> {
    (0..q.dim())
        .map(|i| {
            let u: f64 = rng.random();
            -2.0 * q.entry(i, i).max(0.0).sqrt() * u
        })
        .collect()
}

/// `{Σx_i = ⌊n/5⌋, 0 ≤ x ≤ 1}`.
pub fn gen_cardinality(spec: &GenSpec) -> Result<ConicInstance> {
    if spec.family != Family::Cardinality {
        return Err(Error::InvalidArgument(
            "spec is not a cardinality spec".into(),
        ));
    }
    spec.validate()?;
    let n = spec.n;
    let b = (n / 5) as f64;
    let poly = Polyhedron::new(
        DMatrix::from_element(1, n, 1.0),
        vec![b],
        vec![0.0; n],
        vec![1.0; n],
    )?;
    let witness: Vec<f64> = (0..n).map(|i| if i < n / 5 { 1.0 } else { 0.0 }).collect();
    build(spec, poly, &witness)
}

/// Unit flow from the top-left to the bottom-right node of a grid whose
/// arcs point right and down.
pub fn gen_grid_path(spec: &GenSpec) -> Result<ConicInstance> {
    let Family::GridPath { rows, cols } = spec.family else {
        return Err(Error::InvalidArgument("spec is not a gridpath spec".into()));
    };
    spec.validate()?;
    let arcs = grid_arcs(rows, cols);
    let n = arcs.len();
    let nodes = rows * cols;
    let mut a = DMatrix::zeros(nodes, n);
    for (k, &(tail, head)) in arcs.iter().enumerate() {
        a[(tail, k)] = 1.0;
        a[(head, k)] = -1.0;
    }
    let mut b = vec![0.0; nodes];
    b[0] = 1.0;
    b[nodes - 1] = -1.0;
    let poly = Polyhedron::new(a, b, vec![0.0; n], vec![1.0; n])?;
    // Right along the first row, then down the last column.
    let mut witness = vec![0.0; n];
    for (k, &(tail, head)) in arcs.iter().enumerate() {
        let along_top = tail < cols && head == tail + 1;
        let down_right = tail % cols == cols - 1 && head == tail + cols;
        if along_top || down_right {
            witness[k] = 1.0;
        }
    }
    build(spec, poly, &witness)
}

/// Dispatch on the family.
pub fn generate(spec: &GenSpec) -> Result<ConicInstance> {
    match spec.family {
        Family::GridPath { .. } => gen_grid_path(spec),
        _ => gen_cardinality(spec),
    }
}

fn build(spec: &GenSpec, poly: Polyhedron, witness: &[f64]) -> Result<ConicInstance> {
    if poly.violation(witness) > 1e-12 {
        return Err(Error::Infeasible("generated polyhedron is empty".into()));
    }
    let n = poly.n();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let q = gen_quadratic(n, spec.r, spec.alpha, &mut rng)?;
    let c = gen_costs(&q, &mut rng);
    let ints = if spec.discrete {
        (0..n).collect()
    } else {
        Vec::new()
    };
    Ok(ConicInstance::new(c, spec.omega, q, poly, ints)?.with_meta(spec.meta()))
}
