use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use splittree::experiment::{derive_seed, simulate};
use splittree::families::preset;
use splittree::BuildMode;

#[test]
fn neighbouring_indices_never_collide() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut seen = HashSet::with_capacity(2_000_000);
    for _ in 0..1_000_000 {
        let (s, n, i): (u64, u64, u64) = (rng.random(), rng.random_range(1..1u64 << 40), rng.random());
        let a = derive_seed(s, n, i);
        let b = derive_seed(s, n, i.wrapping_add(1));
        assert_ne!(a, b, "({s}, {n}, {i})");
        seen.insert(a);
    }
    // a birthday collision among 10^6 random 64-bit values has probability ~3e-8
    assert_eq!(seen.len(), 1_000_000);
}

#[test]
fn single_bit_flips_avalanche() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let trials = 100_000;
    let mut flipped = 0u64;
    for _ in 0..trials {
        let mut input: [u64; 3] = [rng.random(), rng.random(), rng.random()];
        let before = derive_seed(input[0], input[1], input[2]);
        let which = rng.random_range(0..3);
        input[which] ^= 1 << rng.random_range(0..64);
        let after = derive_seed(input[0], input[1], input[2]);
        flipped += u64::from((before ^ after).count_ones());
    }
    let mean = flipped as f64 / trials as f64;
    assert!(mean >= 20.0, "{mean}");
    assert!((mean - 32.0).abs() < 0.5, "{mean}");
}

#[test]
fn parallel_and_serial_runs_agree() {
    let f = preset("mary", Some("3")).unwrap();
    let serial = simulate(&f, "mary:3", 3000, 16, 9, BuildMode::Traced, 0.25, Some(1)).unwrap();
    let pooled = simulate(&f, "mary:3", 3000, 16, 9, BuildMode::Traced, 0.25, Some(4)).unwrap();
    assert_eq!(serial, pooled);
}
