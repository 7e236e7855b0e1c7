#![allow(dead_code)]

// Generators and tamper classes shared by the end-to-end certificate tests.

use num_bigint::BigInt;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use sqfree::certify::*;
use sqfree::testfn::TestFunctionSpec;

/// Squarefree N in [lo, hi] as a product of distinct primes, with its factors.
pub fn random_squarefree(rng: &mut ChaCha8Rng, primes: &[u64], lo: u128, hi: u128) -> (u128, Vec<u64>) {
    loop {
        let mut n: u128 = 1;
        let mut fac = Vec::new();
        while n < lo {
            let p = primes[rng.random_range(0..primes.len())];
            if fac.contains(&p) {
                continue;
            }
            n *= p as u128;
            fac.push(p);
        }
        if n <= hi {
            return (n, fac);
        }
    }
}

/// m * r^2 with m squarefree, coprime to r, and the product at most `hi`.
pub fn planted_square(rng: &mut ChaCha8Rng, small: &[u64], primes: &[u64], hi: u128) -> (BigInt, u64) {
    let r = small[rng.random_range(0..small.len())];
    loop {
        let (m, fac) = random_squarefree(rng, primes, 1_000_000, hi / (r as u128 * r as u128));
        if !fac.contains(&r) {
            return (BigInt::from(m) * r * r, r);
        }
    }
}

pub fn e2e_config() -> PipelineConfig {
    PipelineConfig { trial_division_max: 100_000, m: 16, ..Default::default() }
}

pub fn worked_certificate() -> Certificate {
    certify_squarefree(&BigInt::from(1548889), &PipelineConfig::fixed(TestFunctionSpec::triangle(3.5)))
        .unwrap()
        .certificate
        .unwrap()
}

/// One altered copy of `genuine` per tamper class: L, q, spec, B, N, factor.
pub fn tampered(genuine: &Certificate) -> Vec<(&'static str, Certificate)> {
    let mut out = Vec::new();

    let mut c = genuine.clone();
    c.bound_report.as_mut().unwrap().lower_bound += 0.5;
    out.push(("L", c));

    let mut c = genuine.clone();
    c.q = BigInt::from(-3);
    c.bound_report.as_mut().unwrap().q = BigInt::from(-3);
    out.push(("q", c));

    let mut c = genuine.clone();
    let s = TestFunctionSpec::triangle(3.6);
    c.spec = Some(s.clone());
    c.bound_report.as_mut().unwrap().spec = s;
    out.push(("spec", c));

    let mut c = genuine.clone();
    c.factor_checked_to = BigInt::from(23);
    out.push(("B", c));

    let mut c = genuine.clone();
    c.n = BigInt::from(1548893);
    c.odd_part = c.n.clone();
    c.bound_report.as_mut().unwrap().d = BigInt::from(1548893);
    out.push(("N", c));

    let mut c = genuine.clone();
    c.square_factor = Some(BigInt::from(7));
    out.push(("factor", c));
    out
}
