//! Kronecker symbol, sieve and discriminant checks against definitional oracles.

mod common {
    pub mod kron;
}

use common::kron::{is_prime, kronecker_oracle, legendre_euler, squarefree};
use num_bigint::BigInt;
use proptest::prelude::*;
use sqfree::integer::*;

fn discriminants(bound: i64) -> impl Iterator<Item = i64> {
    (-bound..=bound).filter(|d| *d != 0 && matches!(d.rem_euclid(4), 0 | 1))
}

#[test]
fn kronecker_matches_factored_oracle() {
    for d in -500i64..=500 {
        for n in -500i64..=500 {
            assert_eq!(kronecker_i64(d, n), kronecker_oracle(d, n), "({d}/{n})");
        }
    }
}

#[test]
fn euler_criterion_on_odd_primes() {
    for d in -500i64..=500 {
        for p in (3..=500u64).filter(|&p| is_prime(p) && d.rem_euclid(p as i64) != 0) {
            assert_eq!(kronecker_i64(d, p as i64), legendre_euler(d, p), "({d}/{p})");
        }
    }
}

#[test]
fn complete_multiplicativity() {
    for d in discriminants(300) {
        let row: Vec<i8> = (0..=300).map(|n| kronecker_i64(d, n)).collect();
        for m in 1..=300i64 {
            for n in m..=300i64 {
                assert_eq!(kronecker_i64(d, m * n), row[m as usize] * row[n as usize], "d={d} m={m} n={n}");
            }
        }
    }
}

#[test]
fn conductor_periodicity() {
    for d in discriminants(500).filter(|d| d.rem_euclid(4) == 1 && squarefree(d.unsigned_abs())) {
        let m = d.abs();
        for n in 0..=3 * m {
            assert_eq!(kronecker_i64(d, n), kronecker_i64(d, n + m), "d={d} n={n}");
        }
    }
}

#[test]
fn stitched_segments_equal_one_shot() {
    let whole = sieve_segment(0, 1_000_000).unwrap();
    assert_eq!(whole, primes_up_to(999_999));
    assert_eq!(whole.len(), 78_498);
    let mut stitched = Vec::new();
    let mut lo = 0;
    for (i, w) in [1u64, 7, 1000, 65_536, 99_999, 3].iter().cycle().enumerate() {
        let hi = (lo + w * (i as u64 % 5 + 1)).min(1_000_000);
        stitched.extend(sieve_segment(lo, hi).unwrap());
        lo = hi;
        if lo == 1_000_000 {
            break;
        }
    }
    assert_eq!(stitched, whole);
}

#[test]
fn odd_fundamental_discriminants() {
    for a in (1..=100_000i64).step_by(2) {
        for d in [a, -a] {
            let want = d.rem_euclid(4) == 1 && squarefree(a as u64);
            assert_eq!(is_fundamental_i64(d), want, "{d}");
            if a % 97 == 1 {
                assert_eq!(is_fundamental_discriminant(&BigInt::from(d), DISC_BUDGET).unwrap(), want, "{d}");
            }
        }
    }
}

proptest! {
    #[test]
    fn bigint_kronecker_agrees(d in -1_000_000_000i64..1_000_000_000, n in -1_000_000_000i64..1_000_000_000) {
        prop_assert_eq!(kronecker(&BigInt::from(d), &BigInt::from(n)), kronecker_i64(d, n));
    }

    #[test]
    fn kronecker_is_multiplicative_in_d(a in -100_000i64..100_000, b in -100_000i64..100_000, n in 1i64..1_000_000) {
        prop_assert_eq!(kronecker_i64(a * b, n), kronecker_i64(a, n) * kronecker_i64(b, n));
    }

    #[test]
    fn descriptor_parity_follows_sign(d in -1_000_000i64..1_000_000) {
        let ok = d != 0 && matches!(d.rem_euclid(4), 0 | 1);
        match CharacterDescriptor::from_i64(d) {
            Ok(ch) => {
                prop_assert!(ok);
                prop_assert_eq!(ch.parity == Parity::Odd, d < 0);
                prop_assert_eq!(ch.chi(&BigInt::from(-1)) as f64, ch.parity.sign());
            }
            Err(_) => prop_assert!(!ok),
        }
    }

    #[test]
    fn segments_are_sorted_complete_primes(lo in 0u64..10_000_000, w in 0u64..20_000) {
        let ps = sieve_segment(lo, lo + w).unwrap();
        prop_assert!(ps.windows(2).all(|p| p[0] < p[1]));
        let want: Vec<u64> = (lo..lo + w).filter(|&n| is_prime(n)).collect();
        prop_assert_eq!(ps, want);
    }

    #[test]
    fn trial_division_reconstructs(n in 1u64..1_000_000_000_000, bound in 2u64..5000) {
        let (fs, rest) = trial_divide(&num_bigint::BigUint::from(n), bound);
        let prod = fs.iter().fold(rest.clone(), |acc, &(p, e)| acc * num_bigint::BigUint::from(p).pow(e));
        prop_assert_eq!(prod, num_bigint::BigUint::from(n));
        prop_assert!(fs.iter().all(|&(p, _)| p <= bound && is_prime(p)));
        for p in (2..=bound.min(1000)).filter(|&p| is_prime(p)) {
            prop_assert!(&rest % p != num_bigint::BigUint::from(0u32));
        }
    }
}
