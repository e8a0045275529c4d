//! Problem files and machine-readable result envelopes.
//!
//! A problem is a single JSON document of named matrices (nested row-major
//! arrays of finite numbers) plus an optional tolerance override. Results
//! are emitted as a [`ResultEnvelope`]: command name, SHA-256 digest of the
//! input file, command-specific outputs, and diagnostics (tolerance, grid
//! size, seed, warnings). Matrix serialization round-trips bit-exactly.

use crate::linalg::{Mat, Subspace};
use crate::realization::StateSpace;
use crate::Tol;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};
use std::path::Path;

/// Errors raised while loading or interpreting a problem file. These are
/// I/O-level failures, distinct from mathematical precondition violations.
#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid problem: {0}")]
    Invalid(String),
}

/// A state-space problem: the quadruple and optional gramians, subspace
/// basis, homogeneous-direction and tolerance override, as needed per
/// command.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ProblemFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<Vec<Vec<f64>>>,
    /// Columns spanning a subspace (may be empty for the zero subspace).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subspace: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
}

/// Builds a matrix from row-major nested arrays, enforcing rectangular
/// shape and finite entries. An empty outer array is rejected; use an
/// explicit number of empty rows for zero-column matrices.
pub fn matrix_from_rows(name: &str, rows: &[Vec<f64>]) -> Result<Mat, IoError> {
    let r = rows.len();
    let cols = rows.first().map(|row| row.len()).unwrap_or(0);
    for (i, row) in rows.iter().enumerate() {
        if row.len() != cols {
            return Err(IoError::Invalid(format!(
                "matrix '{name}' is not rectangular (row {i} has {} entries, expected {cols})",
                row.len()
            )));
        }
        for (j, e) in row.iter().enumerate() {
            if !e.is_finite() {
                return Err(IoError::Invalid(format!(
                    "matrix '{name}' has a non-finite entry at ({i}, {j})"
                )));
            }
        }
    }
    let mut m = Mat::zeros(r, cols);
    for (i, row) in rows.iter().enumerate() {
        for (j, &e) in row.iter().enumerate() {
            m[(i, j)] = e;
        }
    }
    Ok(m)
}

/// Row-major nested arrays of a matrix; the exact inverse of
/// [`matrix_from_rows`] entry by entry.
pub fn rows_from_matrix(m: &Mat) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

impl ProblemFile {
    pub fn load(path: &Path) -> Result<(Self, String), IoError> {
        let bytes = std::fs::read(path)?;
        let digest = hex_digest(&bytes);
        let file: ProblemFile = serde_json::from_slice(&bytes)?;
        Ok((file, digest))
    }

    fn field(&self, name: &str) -> Option<&Vec<Vec<f64>>> {
        match name {
            "a" => self.a.as_ref(),
            "b" => self.b.as_ref(),
            "c" => self.c.as_ref(),
            "d" => self.d.as_ref(),
            "p" => self.p.as_ref(),
            "q" => self.q.as_ref(),
            "subspace" => self.subspace.as_ref(),
            "delta" => self.delta.as_ref(),
            _ => None,
        }
    }

    /// A required matrix field.
    pub fn require(&self, name: &str) -> Result<Mat, IoError> {
        let rows = self
            .field(name)
            .ok_or_else(|| IoError::Invalid(format!("missing required field '{name}'")))?;
        matrix_from_rows(name, rows)
    }

    /// An optional matrix field.
    pub fn optional(&self, name: &str) -> Result<Option<Mat>, IoError> {
        match self.field(name) {
            Some(rows) => Ok(Some(matrix_from_rows(name, rows)?)),
            None => Ok(None),
        }
    }

    /// Assembles the full quadruple, mapping dimension inconsistencies to
    /// load errors.
    pub fn state_space(&self) -> Result<StateSpace, IoError> {
        let a = self.require("a")?;
        let d = self.require("d")?;
        let m = d.nrows();
        let n = a.nrows();
        // B and C may be omitted for constant functions (n = 0)
        let b = match self.optional("b")? {
            Some(b) => b,
            None if n == 0 => Mat::zeros(0, m),
            None => return Err(IoError::Invalid("missing required field 'b'".into())),
        };
        let c = match self.optional("c")? {
            Some(c) => c,
            None if n == 0 => Mat::zeros(m, 0),
            None => return Err(IoError::Invalid("missing required field 'c'".into())),
        };
        StateSpace::new(a, b, c, d).map_err(|e| IoError::Invalid(e.to_string()))
    }

    /// The subspace spanned by the `subspace` field columns; `[]` or an
    /// all-zero matrix denotes the zero subspace of the given ambient
    /// dimension.
    pub fn subspace(&self, ambient: usize, tol: Tol) -> Result<Subspace, IoError> {
        let rows = self
            .subspace
            .as_ref()
            .ok_or_else(|| IoError::Invalid("missing required field 'subspace'".into()))?;
        if rows.is_empty() {
            return Ok(Subspace::zero(ambient));
        }
        let m = matrix_from_rows("subspace", rows)?;
        if m.nrows() != ambient {
            return Err(IoError::Invalid(format!(
                "subspace basis has {} rows, ambient dimension is {ambient}",
                m.nrows()
            )));
        }
        Ok(Subspace::from_span(&m, tol))
    }
}

fn hex_digest(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Run-wide settings echoed in every envelope.
#[derive(Clone, Debug, Serialize)]
pub struct Diagnostics {
    pub tol: f64,
    pub grid: usize,
    pub seed: u64,
    pub warnings: Vec<String>,
}

/// Machine-readable result of one command invocation.
#[derive(Debug, Serialize)]
pub struct ResultEnvelope {
    pub command: String,
    pub input_digest: String,
    pub outputs: Map<String, Value>,
    pub diagnostics: Diagnostics,
}

impl ResultEnvelope {
    pub fn new(command: &str, digest: &str, tol: Tol, grid: usize, seed: u64) -> Self {
        ResultEnvelope {
            command: command.to_string(),
            input_digest: digest.to_string(),
            outputs: Map::new(),
            diagnostics: Diagnostics {
                tol: tol.rel(),
                grid,
                seed,
                warnings: Vec::new(),
            },
        }
    }

    pub fn insert(&mut self, key: &str, value: Value) {
        self.outputs.insert(key.to_string(), value);
    }

    pub fn insert_matrix(&mut self, key: &str, m: &Mat) {
        self.insert(key, json!(rows_from_matrix(m)));
    }

    pub fn insert_system(&mut self, key: &str, sys: &StateSpace) {
        self.insert(
            key,
            json!({
                "a": rows_from_matrix(sys.a()),
                "b": rows_from_matrix(sys.b()),
                "c": rows_from_matrix(sys.c()),
                "d": rows_from_matrix(sys.d()),
            }),
        );
    }

    pub fn warn(&mut self, message: String) {
        self.diagnostics.warnings.push(message);
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("envelope serialization cannot fail")
    }
}
