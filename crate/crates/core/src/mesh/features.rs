use std::fmt::Write;

use nalgebra::Vector3;

use super::TriangleMesh;
use crate::error::{Error, Result};

/// One feature vector per site, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Invalid("feature dimension must be positive".into()));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::Shape(format!(
                "{} values do not form rows of width {dim}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::Invalid(format!(
                "non-finite feature at row {}, column {}",
                pos / dim,
                pos % dim
            )));
        }
        Ok(Self { dim, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::Shape("ragged feature rows".into()));
        }
        Self::new(dim, rows.concat())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_rows(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Comma-separated rows, no header. Values use the shortest decimal form
    /// that reads back bit-exactly.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in self.rows() {
            for (k, v) in row.iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                let _ = write!(out, "{v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let row = line
                .split(',')
                .map(|t| {
                    t.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::parse(n + 1, format!("bad feature value `{t}`")))
                })
                .collect::<Result<Vec<_>>>()?;
            if let Some(first) = rows.first().map(Vec::len) {
                if first != row.len() {
                    return Err(Error::parse(
                        n + 1,
                        format!("row has {} values, expected {first}", row.len()),
                    ));
                }
            }
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Error::parse(0, "empty feature file"));
        }
        Self::from_rows(&rows)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FeatureKind {
    #[default]
    Centroid,
    CentroidNormal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FeatureConfig {
    pub kind: FeatureKind,
}

impl FeatureConfig {
    pub fn dim(&self) -> usize {
        match self.kind {
            FeatureKind::Centroid => 3,
            FeatureKind::CentroidNormal => 6,
        }
    }
}

/// Per-face centroid, optionally followed by the unit normal.
pub fn face_features(mesh: &TriangleMesh, config: FeatureConfig) -> Result<FeatureMatrix> {
    let dim = config.dim();
    let mut data = Vec::with_capacity(mesh.face_count() * dim);
    for f in 0..mesh.face_count() {
        let [a, b, c] = mesh.face_corners(f).map(Vector3::from);
        let centroid = (a + b + c) / 3.0;
        data.extend(centroid.iter());
        if config.kind == FeatureKind::CentroidNormal {
            let (u, v) = (b - a, c - a);
            let n = u.cross(&v);
            let norm = n.norm();
            if norm.is_nan() || norm <= 1e-12 * u.norm() * v.norm() {
                return Err(Error::DegenerateFace(f));
            }
            data.extend((n / norm).iter());
        }
    }
    FeatureMatrix::new(dim, data)
}
