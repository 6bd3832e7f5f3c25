use std::collections::BTreeMap;

use super::TriangleMesh;
use crate::error::{Error, Result};

/// Sites (faces) and their neighborhood system.
///
/// `pairs` holds each unordered neighbor pair once as `(i, j)` with `i < j`,
/// sorted; `neighbors_of(i)` is sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdjacencyGraph {
    site_count: usize,
    pairs: Vec<(usize, usize)>,
    neighbors: Vec<Vec<usize>>,
}

impl AdjacencyGraph {
    /// Builds a graph from an arbitrary pair list. Duplicate and reversed
    /// pairs are merged.
    pub fn from_pairs(
        site_count: usize,
        pairs: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let mut canonical: Vec<(usize, usize)> = Vec::new();
        for (a, b) in pairs {
            if a == b {
                return Err(Error::Invalid(format!("self-loop at site {a}")));
            }
            if a >= site_count || b >= site_count {
                return Err(Error::Invalid(format!(
                    "pair ({a}, {b}) out of range for {site_count} sites"
                )));
            }
            canonical.push((a.min(b), a.max(b)));
        }
        canonical.sort_unstable();
        canonical.dedup();

        let mut neighbors = vec![Vec::new(); site_count];
        for &(a, b) in &canonical {
            neighbors[a].push(b);
            neighbors[b].push(a);
        }
        for list in &mut neighbors {
            list.sort_unstable();
        }
        Ok(Self {
            site_count,
            pairs: canonical,
            neighbors,
        })
    }

    pub fn site_count(&self) -> usize {
        self.site_count
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn neighbors_of(&self, site: usize) -> &[usize] {
        &self.neighbors[site]
    }
}

/// Connects faces that share exactly one edge.
///
/// An edge used by more than two faces makes the neighborhood ill-defined
/// and is rejected.
pub fn build_adjacency(mesh: &TriangleMesh) -> Result<AdjacencyGraph> {
    let mut edge_faces: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for (f, &[a, b, c]) in mesh.faces().iter().enumerate() {
        for (u, v) in [(a, b), (b, c), (c, a)] {
            edge_faces.entry((u.min(v), u.max(v))).or_default().push(f);
        }
    }

    let mut shared: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for (&(u, v), faces) in &edge_faces {
        match faces.as_slice() {
            [_] => {}
            [f, g] if f != g => *shared.entry((*f.min(g), *f.max(g))).or_default() += 1,
            [_, _] => {}
            many => return Err(Error::NonManifoldEdge(u, v, many.len())),
        }
    }

    AdjacencyGraph::from_pairs(
        mesh.face_count(),
        shared.into_iter().filter(|&(_, n)| n == 1).map(|(p, _)| p),
    )
}
