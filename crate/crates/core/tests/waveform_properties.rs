//! DAFT and delay-Doppler channel properties.

use std::f64::consts::PI;

use ndarray::Array1;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use xlafdm::afdm::{daft_matrix, default_c1, demodulate, modulate, AfdmParams, DaftFrame};
use xlafdm::channel::{
    apply_channel, assemble_mimo, chirp_phase, gen_paths, link_matrix, path_matrix, time_domain_oracle,
    DelayDopplerPath, PathConfig, PathSet,
};
use xlafdm::linalg::{CMatrix, CVector};
use xlafdm::rng::complex_gaussian;
use xlafdm::C64;

fn fro(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn random_vec(n: usize, rng: &mut impl Rng) -> CVector {
    Array1::from_shape_fn(n, |_| complex_gaussian(rng, 1.0))
}

/// Entry `(i, m)` of `Λ_{c1}^H F^H Λ_{c2}^H` written out from the definition.
fn daft_entry(n: usize, c1: f64, c2: f64, i: usize, m: usize) -> C64 {
    let (i, m, nf) = (i as f64, m as f64, n as f64);
    C64::from_polar(1.0 / nf.sqrt(), 2.0 * PI * (c1 * i * i + i * m / nf + c2 * m * m))
}

#[test]
fn unitary_for_desk_and_paper_sizes() {
    for n in [8, 64, 256] {
        let p = AfdmParams::tuned(n, 2).unwrap();
        let a = daft_matrix(&p);
        let g = a.dot(&a.t().mapv(|z| z.conj())) - CMatrix::from_diag_elem(n, C64::new(1.0, 0.0));
        assert!(fro(&g) < 1e-10, "N = {n}");
    }
}

#[test]
fn ofdm_is_the_unitary_idft() {
    for n in [8, 64, 256] {
        let a = daft_matrix(&AfdmParams::ofdm(n).unwrap());
        for i in 0..n {
            for m in 0..n {
                let w = C64::from_polar(1.0 / (n as f64).sqrt(), 2.0 * PI * ((i * m) % n) as f64 / n as f64);
                assert!((a[(i, m)] - w).norm() < 1e-14);
            }
        }
    }
}

#[test]
fn matrix_matches_definition() {
    let (n, c1, c2) = (16, 5.0 / 32.0, 0.0123);
    let a = daft_matrix(&AfdmParams::new(n, c1, c2).unwrap());
    for i in 0..n {
        for m in 0..n {
            assert!((a[(i, m)] - daft_entry(n, c1, c2, i, m)).norm() < 1e-12);
        }
    }
}

#[test]
fn single_static_path_is_identity() {
    let p = AfdmParams::tuned(16, 1).unwrap();
    let paths = PathSet::new(vec![DelayDopplerPath::new(0, 0, 0.0, C64::new(1.0, 0.0))], 0, 0.0).unwrap();
    let h = time_domain_oracle(&p, &paths, &[C64::new(1.0, 0.0)]).unwrap();
    let eye = CMatrix::from_diag_elem(16, C64::new(1.0, 0.0));
    assert!(fro(&(&h - &eye)) < 1e-12);
    assert!(fro(&(&link_matrix(&p, &paths, &[C64::new(1.0, 0.0)]).unwrap() - &eye)) < 1e-12);
}

#[test]
fn zero_gains_give_zero_matrix() {
    let p = AfdmParams::tuned(8, 1).unwrap();
    let paths = PathSet::new(vec![DelayDopplerPath::new(1, 1, 0.0, C64::new(0.0, 0.0))], 2, 1.0).unwrap();
    let zero = [C64::new(0.0, 0.0)];
    assert_eq!(fro(&link_matrix(&p, &paths, &zero).unwrap()), 0.0);
    assert_eq!(fro(&time_domain_oracle(&p, &paths, &zero).unwrap()), 0.0);
}

#[test]
fn generated_paths_are_reproducible() {
    let cfg = PathConfig { n_paths: 4, l_max: 3, alpha_max: 2, fractional: true };
    let a = gen_paths(&mut ChaCha8Rng::seed_from_u64(9), &cfg, 32).unwrap();
    let b = gen_paths(&mut ChaCha8Rng::seed_from_u64(9), &cfg, 32).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.paths()[0].delay, 0);
}

fn oracle_instance(n: usize, n_paths: usize, fractional: bool, seed: u64) -> f64 {
    let alpha_max = 2.min(((n - 1) / 2) as u32);
    let cfg = PathConfig { n_paths, l_max: 3, alpha_max, fractional };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let paths = gen_paths(&mut rng, &cfg, n).unwrap();
    let p = AfdmParams::tuned(n, alpha_max).unwrap();
    let gains = paths.gains();
    let oracle = time_domain_oracle(&p, &paths, &gains).unwrap();
    let closed = link_matrix(&p, &paths, &gains).unwrap();
    fro(&(&closed - &oracle)) / fro(&oracle)
}

#[test]
fn closed_form_matches_time_domain_over_sizes() {
    for n in [8, 16, 32] {
        for fractional in [false, true] {
            for seed in 0..10 {
                let e = oracle_instance(n, 1 + (seed as usize % 4), fractional, seed);
                assert!(e < 1e-9, "N = {n}, fractional = {fractional}, seed {seed}: {e}");
            }
        }
    }
}

#[test]
fn unit_path_rows_have_unit_energy() {
    let p = AfdmParams::tuned(32, 2).unwrap();
    for (l, a) in [(0, 0), (1, -2), (3, 1)] {
        let h = path_matrix(&p, &DelayDopplerPath::new(l, a, 0.0, C64::new(1.0, 0.0)));
        for row in h.rows() {
            let e: f64 = row.iter().map(|z| z.norm_sqr()).sum();
            assert!((e - 1.0).abs() < 1e-12);
        }
        assert_eq!(h.iter().filter(|z| z.norm() > 0.0).count(), 32);
    }
}

#[test]
fn block_layout() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let n = 4;
    let grid: Vec<Vec<CMatrix>> = (0..2)
        .map(|_| (0..3).map(|_| CMatrix::from_shape_fn((n, n), |_| complex_gaussian(&mut rng, 1.0))).collect())
        .collect();
    let ch = assemble_mimo(grid.clone()).unwrap();
    let flat = ch.flatten();
    for r in 0..2 {
        for t in 0..3 {
            for m in 0..n {
                for mp in 0..n {
                    assert_eq!(flat[(r * n + m, t * n + mp)], grid[r][t][(m, mp)]);
                }
            }
        }
    }
    let x = random_vec(3 * n, &mut rng);
    let w = random_vec(2 * n, &mut rng);
    let y = apply_channel(&ch, &x, &w).unwrap();
    let direct = flat.dot(&x) + &w;
    assert!(y.iter().zip(&direct).all(|(a, b)| (a - b).norm() < 1e-12));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn daft_is_unitary(n in 2usize..=128, c1 in -2.0f64..2.0, c2 in -2.0f64..2.0) {
        let a = daft_matrix(&AfdmParams::new(n, c1, c2).unwrap());
        let g = a.dot(&a.t().mapv(|z| z.conj())) - CMatrix::from_diag_elem(n, C64::new(1.0, 0.0));
        prop_assert!(fro(&g) < 1e-10);
    }

    #[test]
    fn round_trip(n in 2usize..=256, alpha in 0u32..3, seed in any::<u64>()) {
        let alpha = alpha.min(((n - 1) / 2) as u32);
        let p = AfdmParams::tuned(n, alpha).unwrap();
        let x = random_vec(n, &mut ChaCha8Rng::seed_from_u64(seed));
        let s = modulate(&p, &DaftFrame::daft(x.clone())).unwrap();
        let back = demodulate(&p, &s).unwrap();
        let err = back.values().iter().zip(&x).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        prop_assert!(err < 1e-12);
    }

    #[test]
    fn fast_modulator_matches_matrix(n in 2usize..=64, c1 in -1.0f64..1.0, c2 in -1.0f64..1.0, seed in any::<u64>()) {
        let p = AfdmParams::new(n, c1, c2).unwrap();
        let x = random_vec(n, &mut ChaCha8Rng::seed_from_u64(seed));
        let fast = modulate(&p, &DaftFrame::daft(x.clone())).unwrap();
        let slow = daft_matrix(&p).dot(&x);
        prop_assert!(fast.values().iter().zip(&slow).all(|(a, b)| (a - b).norm() < 1e-12));
    }

    #[test]
    fn integer_shift_of_chirp_rates(n in 2usize..=64, c1 in -0.5f64..0.5, c2 in -0.5f64..0.5, k1 in -3i32..=3, k2 in -3i32..=3) {
        let a = daft_matrix(&AfdmParams::new(n, c1, c2).unwrap());
        let b = daft_matrix(&AfdmParams::new(n, c1 + k1 as f64, c2 + k2 as f64).unwrap());
        prop_assert!(fro(&(&a - &b)) < 1e-9);
    }

    #[test]
    fn chirp_phase_has_unit_modulus(n in 2usize..=64, c1 in -1.0f64..1.0, c2 in -1.0f64..1.0, l in 0usize..16, m in 0usize..64, mp in 0usize..64) {
        let p = AfdmParams::new(n, c1, c2).unwrap();
        prop_assert!((chirp_phase(&p, l, m % n, mp % n).norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn closed_form_matches_time_domain(n_idx in 0usize..3, n_paths in 1usize..=4, fractional in any::<bool>(), seed in any::<u64>()) {
        let n = [8, 16, 32][n_idx];
        prop_assert!(oracle_instance(n, n_paths, fractional, seed) < 1e-9);
    }

    #[test]
    fn integer_doppler_is_sparse(n in 8usize..=64, l in 0usize..4, seed in any::<u64>()) {
        let alpha_max = 2u32;
        let p = AfdmParams::new(n, default_c1(alpha_max, n).unwrap(), 0.0).unwrap();
        let a = ChaCha8Rng::seed_from_u64(seed).random_range(-2..=2);
        let h = path_matrix(&p, &DelayDopplerPath::new(l, a, 0.0, C64::new(1.0, 0.0)));
        prop_assert_eq!(h.iter().filter(|z| z.norm() > 0.0).count(), n);
    }
}
