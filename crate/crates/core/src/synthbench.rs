//! Synthetic meshes with planted labels, and segmentation metrics.

use std::f64::consts::PI;

use itertools::Itertools;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hmrf::LabelField;
use crate::mesh::{
    face_features, AdjacencyGraph, Face, FeatureConfig, FeatureMatrix, Point3, TriangleMesh,
};

/// Largest class count for which accuracy is maximized over all permutations.
pub const EXHAUSTIVE_PERMUTATION_LIMIT: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthKind {
    /// Flat unit square, `resolution²` vertices; classes are vertical strips.
    GridSheet,
    /// UV sphere with `resolution` stacks; classes are latitude bands.
    Sphere,
    /// Dumbbell-shaped surface of revolution along x; the classes are the two lobes.
    TwoLobes,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub kind: SynthKind,
    pub resolution: usize,
    pub n_classes: usize,
    pub noise_sigma: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCase {
    pub mesh: TriangleMesh,
    pub features: FeatureMatrix,
    pub truth: LabelField,
}

impl SynthSpec {
    pub fn max_classes(&self) -> usize {
        match self.kind {
            SynthKind::GridSheet => self.resolution.saturating_sub(1),
            SynthKind::Sphere => self.resolution,
            SynthKind::TwoLobes => 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.resolution < 2 {
            return Err(Error::Invalid(format!(
                "resolution must be at least 2, got {}",
                self.resolution
            )));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::Invalid(format!(
                "noise sigma must be nonnegative, got {}",
                self.noise_sigma
            )));
        }
        if self.n_classes == 0 || self.n_classes > self.max_classes() {
            return Err(Error::Invalid(format!(
                "{:?} at resolution {} supports 1..={} classes, got {}",
                self.kind,
                self.resolution,
                self.max_classes(),
                self.n_classes
            )));
        }
        Ok(())
    }
}

fn grid_sheet(r: usize) -> (Vec<Point3>, Vec<Face>) {
    let step = 1.0 / (r - 1) as f64;
    let vertices = (0..r)
        .flat_map(|j| (0..r).map(move |i| [i as f64 * step, j as f64 * step, 0.0]))
        .collect();
    let mut faces = Vec::with_capacity(2 * (r - 1) * (r - 1));
    for j in 0..r - 1 {
        for i in 0..r - 1 {
            let a = j * r + i;
            let (b, c, d) = (a + 1, a + r + 1, a + r);
            faces.push([a, b, c]);
            faces.push([a, c, d]);
        }
    }
    (vertices, faces)
}

/// Closed surface of revolution about the x axis. `profile(t)` gives
/// `(x, radius)` for `t ∈ [0, 1]`; the radius must vanish only at the ends.
fn revolve(
    stacks: usize,
    slices: usize,
    profile: impl Fn(f64) -> (f64, f64),
) -> (Vec<Point3>, Vec<Face>) {
    let mut vertices = Vec::with_capacity(2 + (stacks - 1) * slices);
    vertices.push([profile(0.0).0, 0.0, 0.0]);
    for k in 1..stacks {
        let (x, rho) = profile(k as f64 / stacks as f64);
        for m in 0..slices {
            let phi = 2.0 * PI * m as f64 / slices as f64;
            vertices.push([x, rho * phi.cos(), rho * phi.sin()]);
        }
    }
    let last = vertices.len();
    vertices.push([profile(1.0).0, 0.0, 0.0]);

    let ring = |k: usize, m: usize| 1 + (k - 1) * slices + m % slices;
    let mut faces = Vec::with_capacity(2 * slices * (stacks - 1));
    for m in 0..slices {
        faces.push([0, ring(1, m + 1), ring(1, m)]);
    }
    for k in 1..stacks - 1 {
        for m in 0..slices {
            let (a, b) = (ring(k, m), ring(k, m + 1));
            let (c, d) = (ring(k + 1, m + 1), ring(k + 1, m));
            faces.push([a, b, c]);
            faces.push([a, c, d]);
        }
    }
    for m in 0..slices {
        faces.push([last, ring(stacks - 1, m), ring(stacks - 1, m + 1)]);
    }
    (vertices, faces)
}

fn band(value: f64, lo: f64, hi: f64, n: usize) -> usize {
    let t = ((value - lo) / (hi - lo)).clamp(0.0, 1.0);
    ((t * n as f64) as usize).min(n - 1)
}

/// Builds the planted case. Features are face centroids plus isotropic
/// Gaussian noise; everything is a deterministic function of `spec`.
pub fn synth(spec: &SynthSpec) -> Result<SynthCase> {
    spec.validate()?;
    let r = spec.resolution;
    let n = spec.n_classes;
    let (vertices, faces) = match spec.kind {
        SynthKind::GridSheet => grid_sheet(r),
        SynthKind::Sphere => revolve(r, 2 * r, |t| {
            let theta = PI * t;
            (theta.cos(), theta.sin())
        }),
        SynthKind::TwoLobes => revolve(2 * r, 2 * r, |t| {
            (
                4.0 * t - 2.0,
                0.9 * (2.0 * PI * t).sin().abs() + 0.3 * (PI * t).sin(),
            )
        }),
    };
    let mesh = TriangleMesh::new(vertices, faces)?;
    let clean = face_features(&mesh, FeatureConfig::default())?;

    let labels = clean
        .rows()
        .map(|c| match spec.kind {
            SynthKind::GridSheet => band(c[0], 0.0, 1.0, n),
            // polar angle from the +x pole
            SynthKind::Sphere => band(c[1].hypot(c[2]).atan2(c[0]), 0.0, PI, n),
            SynthKind::TwoLobes => usize::from(n == 2 && c[0] > 0.0),
        })
        .collect();
    let truth = LabelField::new(labels, n)?;

    let features = if spec.noise_sigma > 0.0 {
        let normal =
            Normal::new(0.0, spec.noise_sigma).map_err(|e| Error::Invalid(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let noisy = clean
            .as_slice()
            .iter()
            .map(|v| v + normal.sample(&mut rng))
            .collect();
        FeatureMatrix::new(clean.dim(), noisy)?
    } else {
        clean
    };
    Ok(SynthCase {
        mesh,
        features,
        truth,
    })
}

/// Fraction of neighbor pairs whose labels agree.
pub fn boundary_smoothness(labels: &LabelField, graph: &AdjacencyGraph) -> Result<f64> {
    if labels.len() != graph.site_count() {
        return Err(Error::Shape(format!(
            "{} labels for {} sites",
            labels.len(),
            graph.site_count()
        )));
    }
    if graph.pairs().is_empty() {
        return Err(Error::Invalid("graph has no neighbor pairs".into()));
    }
    let l = labels.labels();
    let agree = graph.pairs().iter().filter(|&&(a, b)| l[a] == l[b]).count();
    Ok(agree as f64 / graph.pairs().len() as f64)
}

/// `confusion[truth][predicted]` counts.
pub fn confusion(predicted: &LabelField, truth: &LabelField) -> Result<Vec<Vec<usize>>> {
    if predicted.len() != truth.len() {
        return Err(Error::Shape(format!(
            "{} predicted labels, {} true labels",
            predicted.len(),
            truth.len()
        )));
    }
    let k = predicted.n_classes().max(truth.n_classes());
    let mut table = vec![vec![0; k]; k];
    for (&p, &t) in predicted.labels().iter().zip(truth.labels()) {
        table[t][p] += 1;
    }
    Ok(table)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Accuracy {
    pub accuracy: f64,
    /// `permutation[p]` is the true label matched to predicted label `p`.
    pub permutation: Vec<usize>,
    /// False when the class count exceeded the exhaustive search limit and a
    /// greedy matching was used; `accuracy` is then a lower bound.
    pub exact: bool,
}

/// Best matching fraction over relabelings of `predicted`.
pub fn label_accuracy(predicted: &LabelField, truth: &LabelField) -> Result<Accuracy> {
    let table = confusion(predicted, truth)?;
    let n = predicted.len();
    if n == 0 {
        return Err(Error::Invalid("empty label fields".into()));
    }
    let k = table.len();
    let matched = |perm: &[usize]| {
        perm.iter()
            .enumerate()
            .map(|(p, &t)| table[t][p])
            .sum::<usize>()
    };

    if k <= EXHAUSTIVE_PERMUTATION_LIMIT {
        // lexicographic order, so the identity wins ties
        let mut best: Option<(usize, Vec<usize>)> = None;
        for perm in (0..k).permutations(k) {
            let m = matched(&perm);
            if best.as_ref().is_none_or(|(bm, _)| m > *bm) {
                best = Some((m, perm));
            }
        }
        let (m, permutation) = best.expect("k >= 1");
        return Ok(Accuracy {
            accuracy: m as f64 / n as f64,
            permutation,
            exact: true,
        });
    }

    let mut permutation = vec![usize::MAX; k];
    let mut used_truth = vec![false; k];
    for _ in 0..k {
        let mut pick = (0, 0, 0);
        let mut found = false;
        for p in (0..k).filter(|&p| permutation[p] == usize::MAX) {
            for t in (0..k).filter(|&t| !used_truth[t]) {
                if !found || table[t][p] > pick.0 {
                    pick = (table[t][p], p, t);
                    found = true;
                }
            }
        }
        permutation[pick.1] = pick.2;
        used_truth[pick.2] = true;
    }
    Ok(Accuracy {
        accuracy: matched(&permutation) as f64 / n as f64,
        permutation,
        exact: false,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub boundary_smoothness: f64,
    pub confusion: Vec<Vec<usize>>,
}

pub fn evaluate(
    predicted: &LabelField,
    truth: &LabelField,
    graph: &AdjacencyGraph,
) -> Result<MetricsReport> {
    Ok(MetricsReport {
        accuracy: label_accuracy(predicted, truth)?.accuracy,
        boundary_smoothness: boundary_smoothness(predicted, graph)?,
        confusion: confusion(predicted, truth)?,
    })
}
