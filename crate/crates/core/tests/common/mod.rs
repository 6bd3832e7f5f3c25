#![allow(dead_code)]

use hmrf_mesh::hmrf::UnaryCosts;
use hmrf_mesh::mesh::{AdjacencyGraph, FeatureMatrix};
use rand::Rng;
use rand_distr::{Distribution, Normal};

/// A random Potts instance. With `dyadic` the costs are multiples of 1/8 so
/// every energy sum is exact in floating point.
pub fn random_instance<R: Rng>(
    rng: &mut R,
    n_sites: usize,
    n_classes: usize,
    edge_prob: f64,
    dyadic: bool,
) -> (AdjacencyGraph, UnaryCosts) {
    let mut pairs = Vec::new();
    for a in 0..n_sites {
        for b in a + 1..n_sites {
            if rng.random_bool(edge_prob) {
                pairs.push((a, b));
            }
        }
    }
    let costs = (0..n_sites * n_classes)
        .map(|_| {
            if dyadic {
                rng.random_range(0..=32) as f64 / 8.0
            } else {
                rng.random_range(0.0..4.0)
            }
        })
        .collect();
    (
        AdjacencyGraph::from_pairs(n_sites, pairs).unwrap(),
        UnaryCosts::new(n_classes, costs).unwrap(),
    )
}

/// `n` points drawn around `k` well-spread centers in `d` dimensions.
pub fn blobs<R: Rng>(
    rng: &mut R,
    n: usize,
    k: usize,
    d: usize,
    spread: f64,
) -> (FeatureMatrix, Vec<usize>) {
    let centers: Vec<Vec<f64>> = (0..k)
        .map(|_| (0..d).map(|_| rng.random_range(-10.0..10.0)).collect())
        .collect();
    let noise = Normal::new(0.0, spread).unwrap();
    let mut data = Vec::with_capacity(n * d);
    let mut truth = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % k;
        truth.push(c);
        for center in &centers[c] {
            data.push(center + noise.sample(rng));
        }
    }
    (FeatureMatrix::new(d, data).unwrap(), truth)
}

pub fn empty_graph(n: usize) -> AdjacencyGraph {
    AdjacencyGraph::from_pairs(n, []).unwrap()
}
