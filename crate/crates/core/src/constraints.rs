//! Angle correspondence matrices and their plain-text file format.
//!
//! File layout: optional `#` comment lines (a `# key = value` comment is read as
//! metadata), then a line holding `n`, then `n` rows of `n` whitespace-separated
//! angles in degrees.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::io::parse_key_value;

/// Symmetry tolerance, in degrees, for model matrices.
const SYMMETRY_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixKind {
    /// Constraints describing the object (A).
    Model,
    /// Angles measured between observed clusters (B).
    Object,
}

/// Square matrix of pairwise plane angles in degrees.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintMatrix {
    size: usize,
    entries: Vec<f64>,
    kind: MatrixKind,
}

impl ConstraintMatrix {
    /// A model matrix: square, zero diagonal, entries in `[0, 180]`, symmetric.
    pub fn model(rows: Vec<Vec<f64>>) -> Result<Self> {
        let m = Self::build(rows, MatrixKind::Model)?;
        for i in 0..m.size {
            for j in (i + 1)..m.size {
                if (m.get(i, j) - m.get(j, i)).abs() > SYMMETRY_EPS {
                    return Err(Error::InvalidInput(format!(
                        "matrix is not symmetric: entry ({}, {}) = {} but ({}, {}) = {}",
                        i + 1,
                        j + 1,
                        m.get(i, j),
                        j + 1,
                        i + 1,
                        m.get(j, i)
                    )));
                }
            }
        }
        Ok(m)
    }

    /// An object matrix. Symmetry is not enforced: tabulated measurements may carry
    /// rounding that differs between the two triangles.
    pub fn object(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::build(rows, MatrixKind::Object)
    }

    fn build(rows: Vec<Vec<f64>>, kind: MatrixKind) -> Result<Self> {
        let size = rows.len();
        if size == 0 {
            return Err(Error::InvalidInput("matrix must have at least one row".into()));
        }
        let mut entries = Vec::with_capacity(size * size);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != size {
                return Err(Error::InvalidInput(format!(
                    "row {} has {} entries, expected {size}",
                    i + 1,
                    row.len()
                )));
            }
            for (j, v) in row.into_iter().enumerate() {
                if !(0.0..=180.0).contains(&v) {
                    return Err(Error::InvalidInput(format!(
                        "entry ({}, {}) = {v} is outside [0, 180]",
                        i + 1,
                        j + 1
                    )));
                }
                if i == j && v != 0.0 {
                    return Err(Error::InvalidInput(format!(
                        "diagonal entry ({}, {}) = {v} must be 0",
                        i + 1,
                        j + 1
                    )));
                }
                entries.push(v);
            }
        }
        Ok(Self {
            size,
            entries,
            kind,
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn kind(&self) -> MatrixKind {
        self.kind
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.size + j]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.entries.chunks(self.size).map(<[f64]>::to_vec).collect()
    }

    /// Row `i` without its diagonal entry.
    pub fn off_diagonal_row(&self, i: usize) -> Vec<f64> {
        (0..self.size)
            .filter(|&j| j != i)
            .map(|j| self.get(i, j))
            .collect()
    }

    /// Principal sub-matrix at `indices`, in the given order.
    pub fn submatrix(&self, indices: &[usize]) -> Self {
        let size = indices.len();
        let mut entries = Vec::with_capacity(size * size);
        for &i in indices {
            for &j in indices {
                entries.push(self.get(i, j));
            }
        }
        Self {
            size,
            entries,
            kind: self.kind,
        }
    }
}

/// A model matrix together with the `key = value` metadata from its header.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintFile {
    pub matrix: ConstraintMatrix,
    pub meta: BTreeMap<String, String>,
}

impl ConstraintFile {
    pub fn new(matrix: ConstraintMatrix) -> Self {
        Self {
            matrix,
            meta: BTreeMap::new(),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut meta = BTreeMap::new();
        let mut size: Option<usize> = None;
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut row_lines: Vec<usize> = Vec::new();

        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                if let Some((k, v)) = parse_key_value(comment) {
                    meta.insert(k, v);
                }
                continue;
            }
            match size {
                None => {
                    let n: usize = line
                        .parse()
                        .map_err(|_| Error::parse(line_no, format!("expected matrix size, found `{line}`")))?;
                    if n == 0 {
                        return Err(Error::parse(line_no, "matrix size must be at least 1"));
                    }
                    size = Some(n);
                }
                Some(n) => {
                    if rows.len() == n {
                        return Err(Error::parse(line_no, format!("unexpected extra row; matrix size is {n}")));
                    }
                    let row = line
                        .split_whitespace()
                        .map(|tok| {
                            tok.parse::<f64>()
                                .map_err(|_| Error::parse(line_no, format!("`{tok}` is not a number")))
                        })
                        .collect::<Result<Vec<f64>>>()?;
                    if row.len() != n {
                        return Err(Error::parse(
                            line_no,
                            format!("row has {} entries, expected {n}", row.len()),
                        ));
                    }
                    rows.push(row);
                    row_lines.push(line_no);
                }
            }
        }

        let n = size.ok_or_else(|| Error::parse(text.lines().count().max(1), "missing matrix size"))?;
        if rows.len() != n {
            return Err(Error::parse(
                text.lines().count().max(1),
                format!("expected {n} rows, found {}", rows.len()),
            ));
        }
        // Validation problems are reported against the offending row.
        for i in 0..n {
            for j in 0..n {
                let v = rows[i][j];
                if !(0.0..=180.0).contains(&v) {
                    return Err(Error::parse(row_lines[i], format!("entry {} = {v} is outside [0, 180]", j + 1)));
                }
                if i == j && v != 0.0 {
                    return Err(Error::parse(row_lines[i], format!("diagonal entry must be 0, found {v}")));
                }
                if j < i && (v - rows[j][i]).abs() > SYMMETRY_EPS {
                    return Err(Error::parse(
                        row_lines[i],
                        format!(
                            "matrix is not symmetric: entry ({}, {}) = {v} but ({}, {}) = {} on line {}",
                            i + 1,
                            j + 1,
                            j + 1,
                            i + 1,
                            rows[j][i],
                            row_lines[j]
                        ),
                    ));
                }
            }
        }
        Ok(Self {
            matrix: ConstraintMatrix::model(rows)?,
            meta,
        })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text).map_err(|e| e.with_path(path))
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str("# Angles in degrees between plane normals turned toward the sensor.\n");
        out.push_str("# Entries <= 90 are compared folded, min(t, 180 - t); entries > 90 are compared raw.\n");
        for (k, v) in &self.meta {
            let _ = writeln!(out, "# {k} = {v}");
        }
        let n = self.matrix.size();
        let _ = writeln!(out, "{n}");
        for row in self.matrix.rows() {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(out, "{}", cells.join(" "));
        }
        out
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}
