//! Triangle meshes: parsing, the face adjacency graph and per-face features.

mod adjacency;
mod features;
mod obj;
mod ply;

pub use adjacency::{build_adjacency, AdjacencyGraph};
pub use features::{face_features, FeatureConfig, FeatureKind, FeatureMatrix};
pub use obj::parse_obj;
pub use ply::{default_palette, parse_ply, write_ply_colored, Rgb};

use crate::error::{Error, Result};

pub type Point3 = [f64; 3];
pub type Face = [usize; 3];

#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Point3>,
    faces: Vec<Face>,
}

impl TriangleMesh {
    /// Builds a mesh, checking that every face references three distinct,
    /// in-range vertices.
    pub fn new(vertices: Vec<Point3>, faces: Vec<Face>) -> Result<Self> {
        if faces.is_empty() {
            return Err(Error::NoFaces);
        }
        for (f, face) in faces.iter().enumerate() {
            if let Some(&bad) = face.iter().find(|&&v| v >= vertices.len()) {
                return Err(Error::Invalid(format!(
                    "face {f} references vertex {bad}, mesh has {}",
                    vertices.len()
                )));
            }
            if face[0] == face[1] || face[1] == face[2] || face[0] == face[2] {
                return Err(Error::Invalid(format!(
                    "face {f} repeats a vertex: {face:?}"
                )));
            }
        }
        Ok(Self { vertices, faces })
    }

    pub fn vertices(&self) -> &[Point3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn face_corners(&self, face: usize) -> [Point3; 3] {
        let [a, b, c] = self.faces[face];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn translated(&self, offset: Point3) -> Self {
        let vertices = self
            .vertices
            .iter()
            .map(|p| [p[0] + offset[0], p[1] + offset[1], p[2] + offset[2]])
            .collect();
        Self {
            vertices,
            faces: self.faces.clone(),
        }
    }

    /// Applies `p -> rotation * p + offset` to every vertex.
    pub fn transformed(&self, rotation: &[[f64; 3]; 3], offset: Point3) -> Self {
        let vertices = self
            .vertices
            .iter()
            .map(|p| {
                let mut q = offset;
                for (r, out) in q.iter_mut().enumerate() {
                    *out += rotation[r][0] * p[0] + rotation[r][1] * p[1] + rotation[r][2] * p[2];
                }
                q
            })
            .collect();
        Self {
            vertices,
            faces: self.faces.clone(),
        }
    }
}

/// Splits a polygon into a triangle fan anchored at its first corner.
pub(crate) fn fan_triangulate(polygon: &[usize]) -> impl Iterator<Item = Face> + '_ {
    (1..polygon.len().saturating_sub(1)).map(move |k| [polygon[0], polygon[k], polygon[k + 1]])
}
