use std::f64::consts::PI;

use hmrf_mesh::mesh::FeatureMatrix;
use hmrf_mesh::model::{init_params, log_density, ClassParams, DensityMode, InitMode, ModelConfig};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Stratified Monte Carlo estimate of ∫ exp(log_density) over a box of
/// half-width `half` around the mean: one jittered sample per grid cell.
fn stratified_integral(params: &ClassParams, half: f64, cells: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = params.dim();
    let h = 2.0 * half / cells as f64;
    let mu = params.mean().to_vec();
    let total_cells = cells.pow(d as u32);
    let mut sum = 0.0;
    let mut x = vec![0.0; d];
    for cell in 0..total_cells {
        let mut rest = cell;
        for (t, xt) in x.iter_mut().enumerate() {
            let idx = rest % cells;
            rest /= cells;
            *xt = mu[t] - half + (idx as f64 + rng.random::<f64>()) * h;
        }
        sum += log_density(&x, params, DensityMode::Corrected)
            .unwrap()
            .exp();
    }
    sum * h.powi(d as i32)
}

#[test]
fn corrected_density_integrates_to_one() {
    let one_d = ClassParams::new(vec![1.5], DMatrix::from_element(1, 1, 0.7), 1.0).unwrap();
    let got = stratified_integral(&one_d, 8.0 * 0.7f64.sqrt(), 100_000, 1);
    assert!((got - 1.0).abs() < 0.01, "1-d integral {got}");

    let cov = DMatrix::from_row_slice(2, 2, &[2.0, 0.6, 0.6, 1.0]);
    let two_d = ClassParams::new(vec![-1.0, 3.0], cov, 1.0).unwrap();
    let got = stratified_integral(&two_d, 8.0 * 2.0f64.sqrt(), 600, 2);
    assert!((got - 1.0).abs() < 0.01, "2-d integral {got}");
}

fn spd(d: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-1.0f64..1.0, d * d).prop_map(move |v| {
        let a = DMatrix::from_vec(d, d, v);
        &a * a.transpose() + DMatrix::identity(d, d) * 0.5
    })
}

fn case() -> impl Strategy<Value = (ClassParams, Vec<f64>, Vec<f64>)> {
    (1usize..=4).prop_flat_map(|d| {
        (
            prop::collection::vec(-5.0f64..5.0, d),
            spd(d),
            prop::collection::vec(-5.0f64..5.0, d),
            prop::collection::vec(-50.0f64..50.0, d),
        )
            .prop_map(|(mean, cov, x, shift)| (ClassParams::new(mean, cov, 0.5).unwrap(), x, shift))
    })
}

proptest! {
    #[test]
    fn translation_invariance((params, x, shift) in case()) {
        let moved_mean: Vec<f64> = params.mean().iter().zip(&shift).map(|(m, s)| m + s).collect();
        let moved = ClassParams::new(moved_mean, params.covariance().clone(), params.prior()).unwrap();
        let moved_x: Vec<f64> = x.iter().zip(&shift).map(|(v, s)| v + s).collect();
        for mode in [DensityMode::Corrected, DensityMode::Paper] {
            let a = log_density(&x, &params, mode).unwrap();
            let b = log_density(&moved_x, &moved, mode).unwrap();
            prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn paper_mode_is_a_constant_offset((params, x, _shift) in case()) {
        let d = params.dim() as f64;
        let corrected = log_density(&x, &params, DensityMode::Corrected).unwrap();
        let paper = log_density(&x, &params, DensityMode::Paper).unwrap();
        let offset = (d - 1.0) / 2.0 * (2.0 * PI).ln();
        prop_assert!((paper - corrected - offset).abs() <= 1e-12 * corrected.abs().max(1.0));
    }

    #[test]
    fn init_is_deterministic(seed in any::<u64>(), k in 1usize..5, paper in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..30).map(|_| (0..3).map(|_| rng.random_range(-3.0..3.0)).collect()).collect();
        let f = FeatureMatrix::from_rows(&rows).unwrap();
        let config = ModelConfig {
            n_classes: k,
            init_mode: if paper { InitMode::Paper } else { InitMode::Kmeans },
            ..ModelConfig::default()
        };
        prop_assert_eq!(init_params(&f, &config, seed).unwrap(), init_params(&f, &config, seed).unwrap());
    }
}
