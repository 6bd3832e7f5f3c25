mod common;

use hmrf_mesh::hmrf::{
    brute_force_map, icm_sweep, map_labels, potts_energy, LabelField, UnaryCosts,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::random_instance;

fn instance_params() -> impl Strategy<Value = (u64, usize, usize, f64)> {
    (any::<u64>(), 1usize..=10, 1usize..=3, 0usize..=12)
        .prop_map(|(seed, n, k, b)| (seed, n, k, b as f64 / 4.0))
}

proptest! {
    #[test]
    fn icm_sweep_never_raises_energy((seed, n, k, beta) in instance_params()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (g, u) = random_instance(&mut rng, n, k, 0.4, true);
        let labels: Vec<usize> = (0..n).map(|i| (seed as usize + i * 7) % k).collect();
        let mut field = LabelField::new(labels, k).unwrap();
        for _ in 0..5 {
            let before = potts_energy(&field, &g, &u, beta).unwrap();
            prop_assert_eq!(before.total, before.unary_total + before.pairwise_total);
            let (next, _) = icm_sweep(&field, &g, &u, beta).unwrap();
            let after = potts_energy(&next, &g, &u, beta).unwrap();
            prop_assert!(after.total <= before.total, "{} > {}", after.total, before.total);
            field = next;
        }
    }

    #[test]
    fn oracle_bounds_icm((seed, n, k, beta) in instance_params()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (g, u) = random_instance(&mut rng, n, k, 0.4, false);
        let (opt, best) = brute_force_map(&g, &u, beta).unwrap();
        prop_assert_eq!(potts_energy(&opt, &g, &u, beta).unwrap().total, best);
        let icm = map_labels(&u.argmin_labels(), &g, &u, beta, 50).unwrap();
        prop_assert!(best <= potts_energy(&icm, &g, &u, beta).unwrap().total);
        if beta == 0.0 {
            prop_assert_eq!(icm, opt);
        }
    }

    #[test]
    fn label_permutation_equivariance((seed, n, k, beta) in instance_params(), rot in 0usize..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (g, u) = random_instance(&mut rng, n, k, 0.4, false);
        // sigma(l) = (l + rot) mod k; column l of the original moves to sigma(l)
        let sigma = |l: usize| (l + rot) % k;
        let mut permuted = vec![0.0; n * k];
        for i in 0..n {
            for l in 0..k {
                permuted[i * k + sigma(l)] = u.row(i)[l];
            }
        }
        let pu = UnaryCosts::new(k, permuted).unwrap();

        let (opt, e) = brute_force_map(&g, &u, beta).unwrap();
        let (popt, pe) = brute_force_map(&g, &pu, beta).unwrap();
        prop_assert_eq!(e, pe);
        let mapped: Vec<usize> = opt.labels().iter().map(|&l| sigma(l)).collect();
        prop_assert_eq!(popt.labels(), mapped.as_slice());

        let icm = map_labels(&u.argmin_labels(), &g, &u, beta, 50).unwrap();
        let picm = map_labels(&pu.argmin_labels(), &g, &pu, beta, 50).unwrap();
        let mapped: Vec<usize> = icm.labels().iter().map(|&l| sigma(l)).collect();
        prop_assert_eq!(picm.labels(), mapped.as_slice());
    }
}

#[test]
fn icm_usually_finds_the_optimum_on_small_graphs() {
    let mut equal = 0;
    for seed in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (g, u) = random_instance(&mut rng, 8, 2, 0.35, false);
        let (_, best) = brute_force_map(&g, &u, 1.0).unwrap();
        let icm = map_labels(&u.argmin_labels(), &g, &u, 1.0, 50).unwrap();
        let e = potts_energy(&icm, &g, &u, 1.0).unwrap().total;
        assert!(e >= best);
        if e == best {
            equal += 1;
        }
    }
    assert!(
        equal > 50,
        "ICM matched the optimum in only {equal}/100 trials"
    );
}

#[test]
fn beta_zero_converges_in_one_sweep() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (g, u) = random_instance(&mut rng, 10, 3, 0.5, false);
    let start = LabelField::constant(10, 2, 3).unwrap();
    let (after_one, _) = icm_sweep(&start, &g, &u, 0.0).unwrap();
    assert_eq!(after_one, u.argmin_labels());
    let (_, changed) = icm_sweep(&after_one, &g, &u, 0.0).unwrap();
    assert_eq!(changed, 0);
    assert_eq!(map_labels(&start, &g, &u, 0.0, 1).unwrap(), after_one);
}
