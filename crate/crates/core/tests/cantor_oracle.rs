//! Digit arithmetic against arbitrary-precision integers.

use isl::cantor::{self, TernaryFraction};
use num_bigint::BigUint;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn to_int(f: &TernaryFraction) -> BigUint {
    f.digits().iter().fold(BigUint::from(0u8), |acc, &d| acc * 3u8 + d)
}

fn from_int(mut n: BigUint, depth: usize) -> Vec<u8> {
    let three = BigUint::from(3u8);
    let mut digits = vec![0u8; depth];
    for slot in digits.iter_mut().rev() {
        let d = &n % &three;
        *slot = d.to_u32_digits().first().copied().unwrap_or(0) as u8;
        n /= &three;
    }
    digits
}

fn check_pair(f: &TernaryFraction, g: &TernaryFraction) {
    let depth = f.depth();
    let m = BigUint::from(3u8).pow(depth as u32);
    let (a, b) = (to_int(f), to_int(g));
    let sum = (&a + &b) % &m;
    assert_eq!(cantor::add_mod1(f, g).unwrap().digits(), from_int(sum, depth).as_slice());
    // value(f) value(g) = a b / 3^(2D); truncation keeps floor(a b / 3^D) mod 3^D
    let prod = (&a * &b / &m) % &m;
    assert_eq!(cantor::multiply_mod1(f, g).unwrap().digits(), from_int(prod, depth).as_slice());
}

#[test]
fn thousand_random_pairs_per_depth() {
    for depth in [4, 8, 16] {
        let mut rng = ChaCha8Rng::seed_from_u64(depth as u64);
        for k in 0..1000 {
            let f = cantor::random_normal(depth, &mut rng).unwrap();
            let g = if k % 2 == 0 {
                cantor::random_normal(depth, &mut rng).unwrap()
            } else {
                cantor::random_exceptional(depth, &mut rng).unwrap()
            };
            check_pair(&f, &g);
        }
    }
}

#[test]
fn exhaustive_depth_three() {
    let all: Vec<TernaryFraction> = (0..27u32)
        .map(|n| TernaryFraction::new(vec![(n / 9) as u8, (n / 3 % 3) as u8, (n % 3) as u8]).unwrap())
        .collect();
    for f in &all {
        for g in &all {
            check_pair(f, g);
        }
    }
}

#[test]
fn exceptional_probability_is_two_thirds_per_digit() {
    // count of depth-D digit strings without a 1 is exactly 2^D
    for depth in 1..=6u32 {
        let total = 3u32.pow(depth);
        let hits = (0..total)
            .filter(|&n| {
                let digits = from_int(BigUint::from(n), depth as usize);
                TernaryFraction::new(digits).unwrap().is_exceptional()
            })
            .count();
        assert_eq!(hits, 2usize.pow(depth));
    }
}

fn digits(depth: usize) -> impl Strategy<Value = TernaryFraction> {
    proptest::collection::vec(0u8..3, depth).prop_map(|d| TernaryFraction::new(d).unwrap())
}

proptest! {
    #[test]
    fn addition_commutes(depth in 1usize..24, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = cantor::random_normal(depth, &mut rng).unwrap();
        let g = cantor::random_normal(depth, &mut rng).unwrap();
        prop_assert_eq!(cantor::add_mod1(&f, &g).unwrap(), cantor::add_mod1(&g, &f).unwrap());
    }

    #[test]
    fn arithmetic_matches_big_integers((f, g) in (1usize..30).prop_flat_map(|d| (digits(d), digits(d)))) {
        check_pair(&f, &g);
    }

    #[test]
    fn exceptional_draws_avoid_digit_one(depth in 1usize..64, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        prop_assert!(cantor::random_exceptional(depth, &mut rng).unwrap().is_exceptional());
    }

    #[test]
    fn value_lies_in_unit_interval(f in (1usize..40).prop_flat_map(digits)) {
        let v = f.value();
        prop_assert!((0.0..1.0).contains(&v));
    }
}
