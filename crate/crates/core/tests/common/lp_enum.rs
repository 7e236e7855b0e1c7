#![allow(dead_code)]

// Exhaustive oracle for binned systems whose bins are all integer: enumerate
// every m in the region allowed by the lower inequalities (all h^- >= 0), and
// for each m take the least logd allowed by the one-dimensional constraints.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use sqfree::lp::LPSystem;

type Q = BigRational;

fn q(x: f64) -> Q {
    Q::from_float(x).unwrap()
}

/// Minimum of logd over integer m >= 0, searching only logd <= z_max.
pub fn enumerate_optimum(sys: &LPSystem, z_max: f64) -> Option<Q> {
    assert_eq!(sys.integer_bin_count, sys.v);
    let k = sys.rhs_terms.len();
    let z = q(z_max);
    // lower k: -g0 logd + sum 2h^- m <= g0 log q - P + E
    // upper k:  g0 logd - sum 2h^+ m <= E - (g0 log q - P)
    let mut lo_rhs = Vec::new();
    let mut up_rhs = Vec::new();
    for r in &sys.rhs_terms {
        let base = r.g0 * sys.log_q - r.p;
        lo_rhs.push(q(base + r.tail));
        up_rhs.push(q(r.tail - base));
    }
    let hm: Vec<Vec<Q>> = sys.h_minus.iter().map(|r| r.iter().map(|&h| q(2.0 * h)).collect()).collect();
    let hp: Vec<Vec<Q>> = sys.h_plus.iter().map(|r| r.iter().map(|&h| q(2.0 * h)).collect()).collect();
    let g0: Vec<Q> = sys.rhs_terms.iter().map(|r| q(r.g0)).collect();
    let lower: Vec<usize> = (0..k).filter(|&i| sys.directions[i] != sqfree::lp::Direction::UpperOnly).collect();
    let upper: Vec<usize> = (0..k).filter(|&i| sys.directions[i] != sqfree::lp::Direction::LowerOnly).collect();
    // caps from logd <= z: sum 2h^- m <= lo_rhs + g0 z
    let caps: Vec<Q> = lower.iter().map(|&i| &lo_rhs[i] + &g0[i] * &z).collect();

    let mut best: Option<Q> = None;
    let mut m = vec![0i64; sys.v];
    fn rec(
        j: usize, m: &mut Vec<i64>, used: &mut Vec<Q>, best: &mut Option<Q>, ctx: &Ctx,
    ) {
        if j == m.len() {
            let mut lo: Option<Q> = None;
            for (li, &i) in ctx.lower.iter().enumerate() {
                let v = (&used[li] - &ctx.lo_rhs[i]) / &ctx.g0[i];
                if lo.as_ref().is_none_or(|x| v > *x) {
                    lo = Some(v);
                }
            }
            let lo = lo.expect("at least one lower inequality");
            for &i in ctx.upper {
                let s: Q = (0..m.len()).map(|t| &ctx.hp[i][t] * Q::from_integer(BigInt::from(m[t]))).sum();
                if &ctx.g0[i] * &lo - s > ctx.up_rhs[i] {
                    return;
                }
            }
            if best.as_ref().is_none_or(|b| lo < *b) {
                *best = Some(lo);
            }
            return;
        }
        let mut c = 0i64;
        loop {
            m[j] = c;
            let add: Vec<Q> = ctx.lower.iter().map(|&i| &ctx.hm[i][j] * Q::from_integer(BigInt::from(c))).collect();
            let next: Vec<Q> = used.iter().zip(&add).map(|(a, b)| a + b).collect();
            if next.iter().zip(ctx.caps).any(|(u, cap)| u > cap) {
                break;
            }
            let mut nu = next;
            rec(j + 1, m, &mut nu, best, ctx);
            if ctx.lower.iter().all(|&i| ctx.hm[i][j].is_zero()) && c > 64 {
                break;
            }
            c += 1;
        }
        m[j] = 0;
    }
    struct Ctx<'a> {
        lower: &'a [usize],
        upper: &'a [usize],
        lo_rhs: &'a [Q],
        up_rhs: &'a [Q],
        hm: &'a [Vec<Q>],
        hp: &'a [Vec<Q>],
        g0: &'a [Q],
        caps: &'a [Q],
    }
    let ctx = Ctx { lower: &lower, upper: &upper, lo_rhs: &lo_rhs, up_rhs: &up_rhs, hm: &hm, hp: &hp, g0: &g0, caps: &caps };
    let mut used = vec![Q::zero(); lower.len()];
    rec(0, &mut m, &mut used, &mut best, &ctx);
    best
}
