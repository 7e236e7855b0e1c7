//! Integer primitives: Kronecker symbols, segmented sieving, small-factor
//! search and fundamental discriminants.

use crate::error::{domain, Error, Result};
use num_bigint::{BigInt, BigUint, Sign};
use num_integer::{Integer, Roots};
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

/// Largest sieve window (in integers) a single call may allocate.
pub const SIEVE_WINDOW_BUDGET: u64 = 1 << 31;
/// Default segment length used by the streaming prime iterators.
pub const SEGMENT_LEN: u64 = 1 << 18;

// (2/n) for odd n, indexed by n mod 8.
const TAB2: [i8; 8] = [0, 1, 0, -1, 0, -1, 0, 1];

/// Jacobi symbol (a/n) for odd n > 0.
pub fn jacobi_u64(mut a: u64, mut n: u64) -> i8 {
    debug_assert!(n & 1 == 1);
    a %= n;
    let mut k = 1i8;
    while a != 0 {
        let v = a.trailing_zeros();
        a >>= v;
        if v & 1 == 1 {
            k *= TAB2[(n & 7) as usize];
        }
        if a & n & 2 != 0 {
            k = -k;
        }
        std::mem::swap(&mut a, &mut n);
        a %= n;
    }
    if n == 1 {
        k
    } else {
        0
    }
}

/// Kronecker symbol (a/p) where `a_mod` is a reduced mod p and p is prime.
/// For p = 2 the caller passes `a mod 8`.
#[inline]
pub fn kronecker_mod_prime(a_mod: u64, p: u64) -> i8 {
    if p == 2 {
        match a_mod & 7 {
            1 | 7 => 1,
            3 | 5 => -1,
            _ => 0,
        }
    } else {
        jacobi_u64(a_mod, p)
    }
}

/// Kronecker symbol (d/n) for machine integers.
pub fn kronecker_i64(d: i64, n: i64) -> i8 {
    kronecker(&BigInt::from(d), &BigInt::from(n))
}

/// Kronecker symbol (d/n) for arbitrary integers.
pub fn kronecker(d: &BigInt, n: &BigInt) -> i8 {
    if n.is_zero() {
        return if d.abs().is_one() { 1 } else { 0 };
    }
    let d_even = d.is_even();
    if d_even && n.is_even() {
        return 0;
    }
    let mut b = n.abs();
    let v = b.trailing_zeros().unwrap_or(0);
    b >>= v;
    let mut k: i8 = 1;
    if v & 1 == 1 {
        k = TAB2[low_bits(d, 8) as usize];
    }
    if n.sign() == Sign::Minus && d.sign() == Sign::Minus {
        k = -k;
    }
    // Now b is odd and positive: Jacobi symbol with possibly negative top.
    let mut a = d.mod_floor(&b);
    loop {
        if a.is_zero() {
            return if b.is_one() { k } else { 0 };
        }
        let v = a.trailing_zeros().unwrap_or(0);
        a >>= v;
        if v & 1 == 1 {
            k *= TAB2[low_bits(&b, 8) as usize];
        }
        if low_bits(&a, 4) & low_bits(&b, 4) & 2 != 0 {
            k = -k;
        }
        let r = a;
        a = b.mod_floor(&r);
        b = r;
        if let (Some(x), Some(y)) = (a.to_u64(), b.to_u64()) {
            return k * jacobi_u64(x, y);
        }
    }
}

/// Residue of `x` modulo a power of two `m`, with x taken mod m in [0, m).
fn low_bits(x: &BigInt, m: u64) -> u64 {
    x.mod_floor(&BigInt::from(m)).to_u64().unwrap()
}

/// `x mod m` for a possibly negative big integer, in [0, m).
pub fn mod_u64(x: &BigInt, m: u64) -> u64 {
    let r = (x.magnitude() % m).to_u64().unwrap();
    if x.sign() == Sign::Minus && r != 0 {
        m - r
    } else {
        r
    }
}

/// Integer k-th root when `n` is a perfect k-th power (k in {2, 3}).
pub fn is_perfect_power(n: &BigUint, k: u32) -> Option<BigUint> {
    assert!(k == 2 || k == 3, "only squares and cubes are supported");
    let r = n.nth_root(k);
    if r.pow(k) == *n {
        Some(r)
    } else {
        None
    }
}

/// Primes up to `n` inclusive, by a plain sieve.
pub fn primes_up_to(n: u64) -> Vec<u64> {
    if n < 2 {
        return Vec::new();
    }
    let len = n as usize + 1;
    let mut comp = vec![false; len];
    let mut i = 2usize;
    while i * i < len {
        if !comp[i] {
            let mut j = i * i;
            while j < len {
                comp[j] = true;
                j += i;
            }
        }
        i += 1;
    }
    (2..len).filter(|&i| !comp[i]).map(|i| i as u64).collect()
}

/// Sieve [lo, hi) using base primes that cover every p with p^2 < hi.
pub fn sieve_with_base(lo: u64, hi: u64, base: &[u64]) -> Vec<u64> {
    if hi <= lo {
        return Vec::new();
    }
    let len = (hi - lo) as usize;
    let mut comp = vec![false; len];
    for &p in base {
        let pp = p as u128 * p as u128;
        if pp >= hi as u128 {
            break;
        }
        let first = lo.div_ceil(p) * p;
        let mut m = first.max(pp as u64);
        while m < hi {
            comp[(m - lo) as usize] = true;
            m = match m.checked_add(p) {
                Some(x) => x,
                None => break,
            };
        }
    }
    comp.iter()
        .enumerate()
        .filter(|&(i, &c)| !c && lo + i as u64 >= 2)
        .map(|(i, _)| lo + i as u64)
        .collect()
}

/// All primes in [lo, hi).
pub fn sieve_segment(lo: u64, hi: u64) -> Result<Vec<u64>> {
    if lo > hi || hi > 1u64 << 63 {
        return domain(format!("bad sieve window [{lo}, {hi})"));
    }
    let root = hi.sqrt() + 1;
    if hi - lo > SIEVE_WINDOW_BUDGET || root > SIEVE_WINDOW_BUDGET {
        return Err(Error::Budget(format!(
            "sieve window [{lo}, {hi}) exceeds the memory budget"
        )));
    }
    let base = primes_up_to(root);
    let mut out = Vec::new();
    let mut a = lo;
    while a < hi {
        let b = hi.min(a.saturating_add(SEGMENT_LEN * 16));
        out.extend(sieve_with_base(a, b, &base));
        a = b;
    }
    Ok(out)
}

/// Partition of [0, limit] into sieve segments sharing one base-prime table.
#[derive(Clone, Debug)]
pub struct PrimeSegments {
    pub limit: u64,
    pub base: Vec<u64>,
    pub bounds: Vec<(u64, u64)>,
}

impl PrimeSegments {
    pub fn new(limit: u64, seg_len: u64) -> Self {
        let base = primes_up_to(limit.sqrt() + 1);
        let mut bounds = Vec::new();
        let end = limit.saturating_add(1);
        let mut a = 0;
        while a < end {
            let b = end.min(a + seg_len);
            bounds.push((a, b));
            a = b;
        }
        PrimeSegments { limit, base, bounds }
    }

    pub fn primes(&self, i: usize) -> Vec<u64> {
        let (a, b) = self.bounds[i];
        sieve_with_base(a, b, &self.base)
    }
}

/// Strip every prime factor `p <= bound` from `n`.
/// Returns the factorization found and the cofactor, which has no prime factor
/// up to `bound`.
pub fn trial_divide(n: &BigUint, bound: u64) -> (Vec<(u64, u32)>, BigUint) {
    assert!(!n.is_zero(), "trial_divide needs n > 0");
    let mut m = n.clone();
    let mut fac = Vec::new();
    if m.is_one() || bound < 2 {
        return (fac, m);
    }
    let segs = PrimeSegments::new(bound, SEGMENT_LEN);
    for i in 0..segs.bounds.len() {
        for p in segs.primes(i) {
            if m.is_one() {
                return (fac, m);
            }
            if BigUint::from(p) * p > m {
                // Cofactor is prime; keep it as a factor only if it is in range.
                if m <= BigUint::from(bound) {
                    fac.push((m.to_u64().unwrap(), 1));
                    m = BigUint::one();
                }
                return (fac, m);
            }
            if (&m % p).is_zero() {
                let mut e = 0;
                while (&m % p).is_zero() {
                    m /= p;
                    e += 1;
                }
                fac.push((p, e));
            }
        }
    }
    (fac, m)
}

/// Pollard p-1 stage one with smoothness bound `b1`.
/// Tries base 2, then 3, then a base derived from `seed`.
pub fn pollard_pm1(n: &BigUint, b1: u64, seed: u64) -> Option<BigUint> {
    if n <= &BigUint::from(3u32) {
        return None;
    }
    if n.is_even() {
        return Some(BigUint::from(2u32));
    }
    let primes = primes_up_to(b1);
    let extra = 5 + seed % 1000;
    for base in [2u64, 3, extra] {
        let a = BigUint::from(base);
        let g = a.gcd(n);
        if !g.is_one() {
            if &g != n {
                return Some(g);
            }
            continue;
        }
        if let Some(f) = pm1_with_base(n, a, &primes, b1) {
            return Some(f);
        }
    }
    None
}

fn prime_power_below(p: u64, b1: u64) -> u64 {
    let mut q = p;
    while q <= b1 / p {
        q *= p;
    }
    q
}

fn pm1_with_base(n: &BigUint, mut a: BigUint, primes: &[u64], b1: u64) -> Option<BigUint> {
    const BATCH: usize = 32;
    for chunk in primes.chunks(BATCH) {
        let saved = a.clone();
        for &p in chunk {
            a = a.modpow(&BigUint::from(prime_power_below(p, b1)), n);
        }
        let g = gcd_minus_one(&a, n);
        if g.is_one() {
            continue;
        }
        if &g != n {
            return Some(g);
        }
        // Every factor appeared inside this batch; replay one prime at a time.
        let mut a = saved;
        for &p in chunk {
            for _ in 0..prime_power_exponent(p, b1) {
                a = a.modpow(&BigUint::from(p), n);
                let g = gcd_minus_one(&a, n);
                if g.is_one() {
                    continue;
                }
                return if &g != n { Some(g) } else { None };
            }
        }
        return None;
    }
    None
}

fn prime_power_exponent(p: u64, b1: u64) -> u32 {
    let mut e = 1;
    let mut q = p;
    while q <= b1 / p {
        q *= p;
        e += 1;
    }
    e
}

fn gcd_minus_one(a: &BigUint, n: &BigUint) -> BigUint {
    if a.is_zero() {
        return n.clone();
    }
    (a - 1u32).gcd(n)
}

/// Rigorous small-factor exclusion: if this returns true, `n` has no prime
/// factor p <= b1 (p odd), since 2^E = 1 mod p for every such p.
pub fn pm1_excludes_factors(n: &BigUint, b1: u64) -> bool {
    if n.is_even() {
        return false;
    }
    let mut a = BigUint::from(2u32);
    for p in primes_up_to(b1) {
        a = a.modpow(&BigUint::from(prime_power_below(p, b1)), n);
    }
    gcd_minus_one(&a, n).is_one()
}

/// Whether `|n|` is squarefree, deciding with trial division to the cube root.
pub fn is_squarefree(n: &BigUint, budget: u64) -> Result<bool> {
    if n.is_zero() {
        return Ok(false);
    }
    let cb = n.nth_root(3);
    let bound = cb.to_u64().unwrap_or(u64::MAX);
    if bound > budget {
        return Err(Error::Budget(format!(
            "squarefree test of {n} needs trial division to {cb}"
        )));
    }
    let (fac, co) = trial_divide(n, bound);
    if fac.iter().any(|&(_, e)| e > 1) {
        return Ok(false);
    }
    // The cofactor has at most two prime factors, all above the cube root.
    Ok(co.is_one() || is_perfect_power(&co, 2).is_none())
}

/// Default trial-division budget for discriminant tests.
pub const DISC_BUDGET: u64 = 1 << 24;

/// Whether `d` is a fundamental discriminant (1 counts as the trivial one).
pub fn is_fundamental_discriminant(d: &BigInt, budget: u64) -> Result<bool> {
    if d.is_zero() {
        return Ok(false);
    }
    if d.is_one() {
        return Ok(true);
    }
    match mod_u64(d, 4) {
        1 => is_squarefree(d.magnitude(), budget),
        0 => {
            let e: BigInt = d / 4;
            match mod_u64(&e, 4) {
                2 | 3 => is_squarefree(e.magnitude(), budget),
                _ => Ok(false),
            }
        }
        _ => Ok(false),
    }
}

/// Fundamental discriminant test for machine integers via a smallest-factor walk.
pub fn is_fundamental_i64(d: i64) -> bool {
    if d == 1 {
        return true;
    }
    if d == 0 {
        return false;
    }
    let r = d.rem_euclid(4);
    let core = match r {
        1 => d.unsigned_abs(),
        0 => {
            let e = d / 4;
            if !matches!(e.rem_euclid(4), 2 | 3) {
                return false;
            }
            e.unsigned_abs()
        }
        _ => return false,
    };
    squarefree_u64(core)
}

pub fn squarefree_u64(mut n: u64) -> bool {
    let mut p = 2u64;
    while p * p <= n {
        if n % p == 0 {
            n /= p;
            if n % p == 0 {
                return false;
            }
        }
        p += if p == 2 { 1 } else { 2 };
    }
    true
}

/// Streaming enumeration of fundamental discriminants q with
/// `min_abs <= |q| <= max_abs`, ascending by |q| (negative before positive),
/// coprime to `coprime_to`, and with `kronecker(q, p) == s` for every
/// lineup constraint `(p, s)`.
pub struct FundamentalIter {
    next_abs: u64,
    max_abs: u64,
    coprime_to: BigInt,
    lineup: Vec<(u64, i8)>,
    base: Vec<u64>,
    buf: std::collections::VecDeque<i64>,
}

const ENUM_BLOCK: u64 = 1 << 16;

pub fn enumerate_fundamental(
    min_abs: u64,
    max_abs: u64,
    coprime_to: &BigInt,
    lineup: &[(u64, i8)],
) -> Result<FundamentalIter> {
    if max_abs >= 1u64 << 62 {
        return domain("enumeration bound must stay below 2^62");
    }
    Ok(FundamentalIter {
        next_abs: min_abs.max(1),
        max_abs,
        coprime_to: coprime_to.clone(),
        lineup: lineup.to_vec(),
        base: primes_up_to(max_abs.sqrt() + 1),
        buf: Default::default(),
    })
}

impl FundamentalIter {
    fn fill(&mut self) {
        while self.buf.is_empty() && self.next_abs <= self.max_abs {
            let lo = self.next_abs;
            let hi = self.max_abs.min(lo + ENUM_BLOCK - 1);
            self.next_abs = hi + 1;
            // squarefree flags for [lo, hi]
            let len = (hi - lo + 1) as usize;
            let mut sqf = vec![true; len];
            for &p in &self.base {
                let pp = p * p;
                if pp > hi {
                    break;
                }
                let mut m = lo.div_ceil(pp) * pp;
                while m <= hi {
                    sqf[(m - lo) as usize] = false;
                    m += pp;
                }
            }
            let sqf_at = |x: u64| -> bool {
                if x >= lo && x <= hi {
                    sqf[(x - lo) as usize]
                } else {
                    squarefree_u64(x)
                }
            };
            for a in lo..=hi {
                for q in [-(a as i64), a as i64] {
                    if a == 1 && q == -1 {
                        continue;
                    }
                    let ok = match q.rem_euclid(4) {
                        1 => sqf[(a - lo) as usize],
                        0 => matches!((q / 4).rem_euclid(4), 2 | 3) && sqf_at(a / 4),
                        _ => false,
                    };
                    if ok && self.accept(q) {
                        self.buf.push_back(q);
                    }
                }
            }
        }
    }

    fn accept(&self, q: i64) -> bool {
        let a = q.unsigned_abs();
        if a > 1 && mod_u64(&self.coprime_to, a).gcd(&a) != 1 {
            return false;
        }
        self.lineup.iter().all(|&(p, s)| {
            let r = if p == 2 { q.rem_euclid(8) } else { q.rem_euclid(p as i64) } as u64;
            kronecker_mod_prime(r, p) == s
        })
    }
}

impl Iterator for FundamentalIter {
    type Item = i64;
    fn next(&mut self) -> Option<i64> {
        self.fill();
        self.buf.pop_front()
    }
}

/// Exact floor(sqrt(x)) for a big integer.
pub fn isqrt(x: &BigUint) -> BigUint {
    x.sqrt()
}

/// Parity of a real character: even when chi(-1) = 1, i.e. d > 0.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn of(d: &BigInt) -> Parity {
        if d.is_negative() {
            Parity::Odd
        } else {
            Parity::Even
        }
    }

    /// chi(-1) as a real number.
    pub fn sign(self) -> f64 {
        match self {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        }
    }
}

/// The quadratic character chi_d for d = Delta * l^2, with l unknown.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CharacterDescriptor {
    #[serde(with = "crate::bigint_serde")]
    pub d: BigInt,
    pub parity: Parity,
    #[serde(with = "crate::bigint_serde")]
    pub known_square_part: BigInt,
}

impl CharacterDescriptor {
    pub fn new(d: BigInt) -> Result<Self> {
        if d.is_zero() || !matches!(mod_u64(&d, 4), 0 | 1) {
            return domain(format!("{d} is not a discriminant (must be 0 or 1 mod 4)"));
        }
        Ok(CharacterDescriptor { parity: Parity::of(&d), d, known_square_part: BigInt::one() })
    }

    pub fn from_i64(d: i64) -> Result<Self> {
        Self::new(BigInt::from(d))
    }

    /// The discriminant attached to an odd N > 0: d = (-1)^((N-1)/2) N.
    pub fn from_odd(n: &BigUint) -> Result<Self> {
        if n.is_even() {
            return domain("N must be odd");
        }
        let d = BigInt::from(n.clone());
        Self::new(if mod_u64(&d, 4) == 3 { -d } else { d })
    }

    /// chi_d(n) by the Kronecker symbol.
    pub fn chi(&self, n: &BigInt) -> i8 {
        kronecker(&self.d, n)
    }
}

/// Whether p^2 can be stripped from a discriminant d with p | d, leaving a
/// discriminant. For p = 2 this means d = 0 or 4 mod 16.
pub fn strips_square(d: &BigInt, p: u64) -> bool {
    if p == 2 {
        matches!(mod_u64(d, 16), 0 | 4)
    } else {
        let pp = BigInt::from(p) * p;
        (d % pp).is_zero()
    }
}

/// Fast residues of a fixed big integer modulo word-sized moduli.
#[derive(Clone, Debug)]
pub struct Residues {
    limbs: Vec<u64>,
    small: Option<i64>,
    neg: bool,
}

impl Residues {
    pub fn new(x: &BigInt) -> Self {
        Residues {
            limbs: x.magnitude().to_u64_digits(),
            small: x.to_i64(),
            neg: x.is_negative(),
        }
    }

    /// x mod m in [0, m).
    #[inline]
    pub fn rem(&self, m: u64) -> u64 {
        if let Some(v) = self.small {
            return v.rem_euclid(m as i64) as u64;
        }
        let mut r: u128 = 0;
        for &l in self.limbs.iter().rev() {
            r = ((r << 64) | l as u128) % m as u128;
        }
        let r = r as u64;
        if self.neg && r != 0 {
            m - r
        } else {
            r
        }
    }

    /// Kronecker symbol (x/p) for a prime p.
    #[inline]
    pub fn kronecker_prime(&self, p: u64) -> i8 {
        let m = if p == 2 { 8 } else { p };
        kronecker_mod_prime(self.rem(m), p)
    }
}
