//! Random binned systems with a planted feasible point, for testing.

use super::system::{Direction, LPSystem, RhsTerm};
use num_bigint::BigInt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// two decimals keep the exact arithmetic small
fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

/// A system with V bins, the first `integer_bins` of them integer, and K test
/// functions, feasible at the returned (logd, m).
pub fn synthetic_system(seed: u64, v: usize, k: usize, integer_bins: usize) -> (LPSystem, f64, Vec<u32>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m: Vec<u32> = (0..v).map(|_| rng.random_range(0..=2)).collect();
    let logd = round2(rng.random_range(5.0..20.0));
    let q: i64 = [1, -3, 5, -4, 8, -7][rng.random_range(0..6)];
    let log_q = (q.unsigned_abs() as f64).ln();
    let mut sys = LPSystem {
        t: 1.0,
        v,
        delta_bin: 1.0 / v as f64,
        h_minus: Vec::new(),
        h_plus: Vec::new(),
        rhs_terms: Vec::new(),
        directions: Vec::new(),
        integer_bin_count: integer_bins.min(v),
        q: BigInt::from(q),
        log_q,
    };
    for i in 0..k {
        let g0 = round2(rng.random_range(0.5..2.0));
        let hm: Vec<f64> = (0..v).map(|_| round2(rng.random_range(0.5..1.0))).collect();
        let hp: Vec<f64> = hm.iter().map(|h| h + round2(rng.random_range(0.0..0.5))).collect();
        let tail = round2(rng.random_range(0.01..0.5));
        let lo: f64 = 2.0 * m.iter().zip(&hm).map(|(&a, h)| a as f64 * h).sum::<f64>() - tail;
        let hi: f64 = 2.0 * m.iter().zip(&hp).map(|(&a, h)| a as f64 * h).sum::<f64>() + tail;
        // keep strictly inside so rounding cannot make the planted point infeasible
        let s = lo + (hi - lo) * rng.random_range(0.1..0.9);
        let p = g0 * (logd + log_q) - s;
        sys.h_minus.push(hm);
        sys.h_plus.push(hp);
        sys.rhs_terms.push(RhsTerm { g0, p, tail });
        sys.directions.push(match (i, rng.random_range(0..3)) {
            (0, _) | (_, 0) => Direction::Both,
            (_, 1) => Direction::LowerOnly,
            _ => Direction::UpperOnly,
        });
    }
    (sys, logd, m)
}
