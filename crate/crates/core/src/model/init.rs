use nalgebra::DMatrix;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{apply_ridge, ClassParams, InitMode, ModelConfig};
use crate::em::Responsibilities;
use crate::error::{Error, Result};
use crate::mesh::FeatureMatrix;

const LLOYD_ITERATIONS: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct Initialization {
    pub params: Vec<ClassParams>,
    pub responsibilities: Responsibilities,
}

/// Starting parameters and responsibilities for EM.
///
/// `InitMode::Paper` leaves every responsibility at zero; `InitMode::Kmeans`
/// returns the one-hot cluster assignment.
pub fn init_params(
    features: &FeatureMatrix,
    config: &ModelConfig,
    seed: u64,
) -> Result<Initialization> {
    config.validate()?;
    let n = features.n_rows();
    let k = config.n_classes;
    if k > n {
        return Err(Error::Invalid(format!(
            "{k} classes requested for {n} sites"
        )));
    }
    let d = features.dim();

    match config.init_mode {
        InitMode::Paper => {
            let prior = 1.0 / k as f64;
            let params = (0..k)
                .map(|j| ClassParams::with_identity(vec![2.0 * j as f64; d], prior))
                .collect::<Result<_>>()?;
            Ok(Initialization {
                params,
                responsibilities: Responsibilities::zeros(n, k),
            })
        }
        InitMode::Kmeans => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (centers, assignment) = kmeans(features, k, &mut rng);

            let mut counts = vec![0usize; k];
            let mut var = vec![vec![0.0; d]; k];
            for (row, &c) in features.rows().zip(&assignment) {
                counts[c] += 1;
                for t in 0..d {
                    let diff = row[t] - centers[c][t];
                    var[c][t] += diff * diff;
                }
            }

            let mut params = Vec::with_capacity(k);
            for j in 0..k {
                let mut cov = DMatrix::zeros(d, d);
                if counts[j] > 0 {
                    for t in 0..d {
                        cov[(t, t)] = var[j][t] / counts[j] as f64;
                    }
                }
                apply_ridge(&mut cov, config.ridge);
                params.push(ClassParams::new(
                    centers[j].clone(),
                    cov,
                    counts[j] as f64 / n as f64,
                )?);
            }

            let mut responsibilities = Responsibilities::zeros(n, k);
            for (i, &c) in assignment.iter().enumerate() {
                responsibilities.row_mut(i)[c] = 1.0;
            }
            Ok(Initialization {
                params,
                responsibilities,
            })
        }
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(row: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, center) in centers.iter().enumerate() {
        let dist = sq_dist(row, center);
        if dist < best.1 {
            best = (c, dist);
        }
    }
    best
}

/// k-means++ seeding plus a fixed number of Lloyd iterations.
///
/// Returns the centers and each row's cluster; every center is the mean of
/// its returned members (a cluster left empty keeps its previous center).
pub fn kmeans<R: Rng>(
    features: &FeatureMatrix,
    k: usize,
    rng: &mut R,
) -> (Vec<Vec<f64>>, Vec<usize>) {
    let n = features.n_rows();
    let d = features.dim();

    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(k);
    centers.push(features.row(rng.random_range(0..n)).to_vec());
    let mut d2: Vec<f64> = features.rows().map(|r| sq_dist(r, &centers[0])).collect();
    while centers.len() < k {
        let next = match WeightedIndex::new(&d2) {
            Ok(dist) => dist.sample(rng),
            // every point already sits on a center
            Err(_) => rng.random_range(0..n),
        };
        let center = features.row(next).to_vec();
        for (w, row) in d2.iter_mut().zip(features.rows()) {
            *w = w.min(sq_dist(row, &center));
        }
        centers.push(center);
    }

    let mut assignment = vec![0; n];
    for _ in 0..LLOYD_ITERATIONS {
        for (a, row) in assignment.iter_mut().zip(features.rows()) {
            *a = nearest(row, &centers).0;
        }
        let mut sums = vec![vec![0.0; d]; k];
        let mut counts = vec![0usize; k];
        for (row, &c) in features.rows().zip(&assignment) {
            counts[c] += 1;
            for (s, x) in sums[c].iter_mut().zip(row) {
                *s += x;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                centers[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
    }
    (centers, assignment)
}
