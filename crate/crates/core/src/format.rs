//! JSON system documents.
//!
//! ```json
//! {
//!   "horizon": 2,
//!   "gamma": 0.8,
//!   "dims": { "n": 2, "l": 2, "q": 2, "m_phi": 2 },
//!   "x0": [1.0, 1.0],
//!   "stages": [ { "A": [[..],[..]], "At": .., "B": .., "Bt": .., "C": ..,
//!                 "Ct": .., "D": .., "Dt": .., "F1": .., "Phi": .., "Psi": .. } ]
//! }
//! ```
//!
//! Matrices are row-major arrays of rows. Numbers are written in shortest
//! round-trip form, so `save(load(doc))` reproduces every entry bit for bit.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{Mat, Vector};
use crate::model::{Dimensions, MeanFieldSystem, StageParams};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("parse error at `{path}` (line {line}, column {column}): {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("ragged matrix at `{path}`: row {row} has {found} entries, expected {expected}")]
    Ragged {
        path: String,
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("dimension mismatch at `stages[{stage}].{field}`: expected {}x{}, found {}x{}", expected.0, expected.1, found.0, found.1)]
    DimensionMismatch {
        stage: usize,
        field: &'static str,
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("expected {expected} stages (horizon + 1), found {found}")]
    StageCount { expected: usize, found: usize },
    #[error("`x0` has length {found}, expected {expected}")]
    InitialStateLength { expected: usize, found: usize },
    #[error("`dims.{0}` must be >= 1")]
    ZeroDimension(&'static str),
    #[error("`gamma` must be positive and finite, got {0}")]
    BadGamma(f64),
    #[error("cannot read `{path}`: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// A system together with the attenuation level stored next to it.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemFile {
    pub system: MeanFieldSystem,
    pub gamma: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct DimsDoc {
    n: usize,
    l: usize,
    q: usize,
    m_phi: usize,
}

type Rows = Vec<Vec<f64>>;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct StageDoc {
    #[serde(rename = "A")]
    a: Rows,
    #[serde(rename = "At")]
    at: Rows,
    #[serde(rename = "B")]
    b: Rows,
    #[serde(rename = "Bt")]
    bt: Rows,
    #[serde(rename = "C")]
    c: Rows,
    #[serde(rename = "Ct")]
    ct: Rows,
    #[serde(rename = "D")]
    d: Rows,
    #[serde(rename = "Dt")]
    dt: Rows,
    #[serde(rename = "F1")]
    f1: Rows,
    #[serde(rename = "Phi")]
    phi: Rows,
    #[serde(rename = "Psi")]
    psi: Rows,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SystemDoc {
    horizon: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gamma: Option<f64>,
    dims: DimsDoc,
    x0: Vec<f64>,
    stages: Vec<StageDoc>,
}

pub fn matrix_to_rows(m: &Mat) -> Rows {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Row-major nested arrays to a matrix. An empty outer array is `0x0`.
pub fn rows_to_matrix(rows: &[Vec<f64>], path: &str) -> Result<Mat, FormatError> {
    let ncols = rows.first().map_or(0, Vec::len);
    for (i, r) in rows.iter().enumerate() {
        if r.len() != ncols {
            return Err(FormatError::Ragged {
                path: path.to_string(),
                row: i,
                expected: ncols,
                found: r.len(),
            });
        }
    }
    Ok(Mat::from_row_iterator(
        rows.len(),
        ncols,
        rows.iter().flatten().copied(),
    ))
}

/// Parses a system document. Shapes are checked against `dims`; the
/// `Psi^T Psi = I` constraint is left to [`crate::model::validate`].
pub fn load_system(text: &str) -> Result<SystemFile, FormatError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let doc: SystemDoc = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        FormatError::Parse {
            path,
            line: inner.line(),
            column: inner.column(),
            message: inner.to_string(),
        }
    })?;
    from_doc(doc)
}

pub fn load_system_file(path: impl AsRef<Path>) -> Result<SystemFile, FormatError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| FormatError::Io {
        path: path.display().to_string(),
        source,
    })?;
    load_system(&text)
}

fn from_doc(doc: SystemDoc) -> Result<SystemFile, FormatError> {
    let dims = Dimensions {
        n: doc.dims.n,
        l: doc.dims.l,
        q: doc.dims.q,
        m_phi: doc.dims.m_phi,
        horizon: doc.horizon,
    };
    for (name, v) in [
        ("n", dims.n),
        ("l", dims.l),
        ("q", dims.q),
        ("m_phi", dims.m_phi),
    ] {
        if v == 0 {
            return Err(FormatError::ZeroDimension(name));
        }
    }
    if let Some(g) = doc.gamma {
        if !(g.is_finite() && g > 0.0) {
            return Err(FormatError::BadGamma(g));
        }
    }
    if doc.stages.len() != dims.stages() {
        return Err(FormatError::StageCount {
            expected: dims.stages(),
            found: doc.stages.len(),
        });
    }
    if doc.x0.len() != dims.n {
        return Err(FormatError::InitialStateLength {
            expected: dims.n,
            found: doc.x0.len(),
        });
    }
    let mut stages = Vec::with_capacity(doc.stages.len());
    for (k, s) in doc.stages.iter().enumerate() {
        let m = |rows: &Rows, name: &str| rows_to_matrix(rows, &format!("stages[{k}].{name}"));
        let stage = StageParams {
            a: m(&s.a, "A")?,
            at: m(&s.at, "At")?,
            b: m(&s.b, "B")?,
            bt: m(&s.bt, "Bt")?,
            c: m(&s.c, "C")?,
            ct: m(&s.ct, "Ct")?,
            d: m(&s.d, "D")?,
            dt: m(&s.dt, "Dt")?,
            f1: m(&s.f1, "F1")?,
            phi: m(&s.phi, "Phi")?,
            psi: m(&s.psi, "Psi")?,
        };
        for (field, mat, expected) in stage.fields(&dims) {
            if mat.shape() != expected {
                return Err(FormatError::DimensionMismatch {
                    stage: k,
                    field,
                    expected,
                    found: mat.shape(),
                });
            }
        }
        stages.push(stage);
    }
    Ok(SystemFile {
        system: MeanFieldSystem::new(dims, stages, Vector::from_vec(doc.x0)),
        gamma: doc.gamma,
    })
}

/// Serializes a system (and optional gamma) as a pretty-printed document.
pub fn save_system(system: &MeanFieldSystem, gamma: Option<f64>) -> String {
    let r = matrix_to_rows;
    let doc = SystemDoc {
        horizon: system.dims.horizon,
        gamma,
        dims: DimsDoc {
            n: system.dims.n,
            l: system.dims.l,
            q: system.dims.q,
            m_phi: system.dims.m_phi,
        },
        x0: system.x0.iter().copied().collect(),
        stages: system
            .stages
            .iter()
            .map(|s| StageDoc {
                a: r(&s.a),
                at: r(&s.at),
                b: r(&s.b),
                bt: r(&s.bt),
                c: r(&s.c),
                ct: r(&s.ct),
                d: r(&s.d),
                dt: r(&s.dt),
                f1: r(&s.f1),
                phi: r(&s.phi),
                psi: r(&s.psi),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&doc).expect("system document serializes")
}
