//! Versioned JSON instance files.
//!
//! ```json
//! {
//!   "version": 1,
//!   "meta": {"family": {"kind": "cardinality"}, "n": 5, "rank": 1, "alpha": 0.5, "omega": 2.0, "seed": 7},
//!   "n": 5, "m": 1, "omega": 2.0,
//!   "c": [-0.31, -1.2, -0.05, -0.7, -0.9],
//!   "F": [[0.4], [0.0], [-0.8], [0.0], [0.1]],
//!   "H": [[0.6]],
//!   "D": [0.2, 0.9, 0.4, 0.3, 0.7],
//!   "A": [[0, 0, 1.0], [0, 1, 1.0], [0, 2, 1.0], [0, 3, 1.0], [0, 4, 1.0]],
//!   "b": [1.0],
//!   "lower": [0.0, 0.0, 0.0, 0.0, 0.0],
//!   "upper": [1.0, 1.0, 1.0, 1.0, 1.0],
//!   "integer_vars": []
//! }
//! ```
//!
//! `F` is `n × r` and `H` is `r × r`, both as lists of rows, with
//! `Q = F·H·H'·F' + diag(D)`. `A` lists the nonzeros as `[row, col, value]`.
//! Numbers are written in shortest round-trip decimal form, so a saved
//! instance loads back bit for bit.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ConicInstance, InstanceMeta, Polyhedron, QuadraticForm};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile {
    version: u32,
    meta: InstanceMeta,
    n: usize,
    m: usize,
    omega: f64,
    c: Vec<f64>,
    #[serde(rename = "F")]
    f: Vec<Vec<f64>>,
    #[serde(rename = "H")]
    h: Vec<Vec<f64>>,
    #[serde(rename = "D")]
    d: Vec<f64>,
    #[serde(rename = "A")]
    a: Vec<(usize, usize, f64)>,
    b: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    integer_vars: Vec<usize>,
}

#[derive(Deserialize)]
struct VersionProbe {
    version: u32,
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn matrix_from_rows(rows: &[Vec<f64>], ncols: usize, what: &str) -> Result<DMatrix<f64>> {
    let mut out = DMatrix::zeros(rows.len(), ncols);
    for (i, row) in rows.iter().enumerate() {
        if row.len() != ncols {
            return Err(Error::Parse {
                context: format!("field `{what}`, row {i}"),
                message: format!("expected {ncols} entries, found {}", row.len()),
            });
        }
        for (j, &v) in row.iter().enumerate() {
            out[(i, j)] = v;
        }
    }
    Ok(out)
}

pub fn to_json_string(inst: &ConicInstance) -> Result<String> {
    let file = InstanceFile {
        version: FORMAT_VERSION,
        meta: inst.meta.clone(),
        n: inst.n(),
        m: inst.poly.m(),
        omega: inst.omega,
        c: inst.c.clone(),
        f: rows_of(inst.q.factor()),
        h: rows_of(inst.q.sigma_factor()),
        d: inst.q.diag().to_vec(),
        a: inst.poly.triplets(),
        b: inst.poly.b().to_vec(),
        lower: inst.poly.lower().to_vec(),
        upper: inst.poly.upper().to_vec(),
        integer_vars: inst.integer_vars.clone(),
    };
    serde_json::to_string_pretty(&file).map_err(|e| Error::Parse {
        context: "serialization".into(),
        message: e.to_string(),
    })
}

pub fn from_json_str(text: &str) -> Result<ConicInstance> {
    let parse_err = |e: serde_json::Error| Error::Parse {
        context: format!("line {}, column {}", e.line(), e.column()),
        message: e.to_string(),
    };
    let probe: VersionProbe = serde_json::from_str(text).map_err(parse_err)?;
    if probe.version != FORMAT_VERSION {
        return Err(Error::Version {
            found: probe.version,
            expected: FORMAT_VERSION,
        });
    }
    let file: InstanceFile = serde_json::from_str(text).map_err(parse_err)?;
    let field = |what: &str, got: usize, expected: usize| -> Result<()> {
        if got == expected {
            Ok(())
        } else {
            Err(Error::Parse {
                context: format!("field `{what}`"),
                message: format!("expected length {expected}, found {got}"),
            })
        }
    };
    let n = file.n;
    field("c", file.c.len(), n)?;
    field("D", file.d.len(), n)?;
    field("F", file.f.len(), n)?;
    field("b", file.b.len(), file.m)?;
    let r = file.h.len();
    let f = matrix_from_rows(&file.f, r, "F")?;
    let h = matrix_from_rows(&file.h, r, "H")?;
    let q = QuadraticForm::new(f, h, file.d)?;
    let poly = Polyhedron::from_triplets(file.m, n, &file.a, file.b, file.lower, file.upper)?;
    Ok(ConicInstance::new(file.c, file.omega, q, poly, file.integer_vars)?.with_meta(file.meta))
}

pub fn save_instance(inst: &ConicInstance, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, to_json_string(inst)?)?;
    Ok(())
}

pub fn load_instance(path: impl AsRef<Path>) -> Result<ConicInstance> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    from_json_str(&text).map_err(|e| match e {
        Error::Parse { context, message } => Error::Parse {
            context: format!("{}: {context}", path.display()),
            message,
        },
        other => other,
    })
}
