//! Twist discovery through short vectors: a lattice whose short vectors
//! encode products of prime discriminants correlating with chi_d, and an
//! exact integral LLL reduction.

use crate::error::{Error, Result};
use crate::integer::{kronecker_mod_prime, primes_up_to, CharacterDescriptor, Residues};
use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

/// Largest lattice dimension accepted.
pub const MAX_DIM: usize = 2000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeBasis {
    #[serde(with = "rows_serde")]
    pub rows: Vec<Vec<BigInt>>,
    pub primes: Vec<u64>,
    /// Prime discriminants q_j^*.
    pub qs: Vec<i64>,
    pub m_scale: u32,
    /// w(p_k).
    #[serde(with = "vec_serde")]
    pub weights: Vec<BigInt>,
    /// floor(2^M sqrt(log |q_j|)).
    #[serde(with = "vec_serde")]
    pub penalties: Vec<BigInt>,
}

mod vec_serde {
    use num_bigint::BigInt;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[BigInt], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|x| x.to_string()).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<BigInt>, D::Error> {
        Vec::<String>::deserialize(d)?.iter().map(|s| s.parse().map_err(serde::de::Error::custom)).collect()
    }
}

mod rows_serde {
    use num_bigint::BigInt;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[Vec<BigInt>], s: S) -> Result<S::Ok, S::Error> {
        v.iter()
            .map(|r| r.iter().map(|x| x.to_string()).collect::<Vec<_>>())
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<BigInt>>, D::Error> {
        Vec::<Vec<String>>::deserialize(d)?
            .iter()
            .map(|r| r.iter().map(|s| s.parse().map_err(serde::de::Error::custom)).collect())
            .collect()
    }
}

/// ln(x) * 2^bits as an integer interval [lo, hi] containing the true value.
pub fn ln_fixed(x: &BigInt, bits: u64) -> (BigInt, BigInt) {
    assert!(x.is_positive());
    // ln x = k ln 2 + 2 atanh((x - 2^k)/(x + 2^k)), 2^k <= x < 2^(k+1)
    let k = x.bits() - 1;
    let two_k = BigInt::one() << k;
    let (a1, e1) = atanh_fixed(&BigInt::one(), &BigInt::from(3), bits);
    let (a2, e2) = atanh_fixed(&(x - &two_k), &(x + &two_k), bits);
    let val = (a1 * 2 * k) + a2 * 2;
    let err = BigInt::from(2 * k * e1 + 2 * e2 + 2);
    (&val - &err, val + err)
}

// atanh(a/b) * 2^bits rounded down termwise, with an error bound in ulps.
fn atanh_fixed(a: &BigInt, b: &BigInt, bits: u64) -> (BigInt, u64) {
    if a.is_zero() {
        return (BigInt::zero(), 0);
    }
    let a2 = a * a;
    let b2 = b * b;
    let mut pw = (a << bits) / b;
    let mut sum = BigInt::zero();
    let mut terms = 0u64;
    let mut i = 0u64;
    while !pw.is_zero() {
        sum += &pw / (2 * i + 1);
        pw = pw * &a2 / &b2;
        i += 1;
        terms += 1;
    }
    // each term loses < 2 ulps; the dropped tail is < 1 ulp since a/b <= 1/3
    (sum, 2 * terms + 2)
}

fn floor_root(x: &BigInt, k: u32) -> BigInt {
    if x.is_negative() {
        return BigInt::zero();
    }
    x.nth_root(k)
}

/// w(p) = floor(2^(M+1) sqrt(log p) / p^(1/4)), exactly.
pub fn weight(p: u64, m: u32) -> BigInt {
    // w = floor((2^(4M+4) (ln p)^2 / p)^(1/4))
    let mut bits = 4 * m as u64 + 80;
    loop {
        let (lo, hi) = ln_fixed(&BigInt::from(p), bits);
        let shift = 2 * bits - (4 * m as u64 + 4);
        let den = BigInt::from(p) << shift;
        let y_lo = floor_root(&((&lo * &lo) / &den), 4);
        let y_hi = floor_root(&((&hi * &hi) / &den), 4);
        if y_lo == y_hi {
            return y_lo;
        }
        bits *= 2;
    }
}

/// floor(2^M sqrt(log |q|)), exactly.
pub fn penalty(q: i64, m: u32) -> BigInt {
    let mut bits = 2 * m as u64 + 80;
    loop {
        let (lo, hi) = ln_fixed(&BigInt::from(q.unsigned_abs()), bits);
        let shift = bits - 2 * m as u64;
        let a = floor_root(&(lo >> shift), 2);
        let b = floor_root(&(hi >> shift), 2);
        if a == b {
            return a;
        }
        bits *= 2;
    }
}

/// Prime discriminants built from odd primes up to `q_bound`, then -4, 8, -8.
pub fn prime_discriminants(q_bound: u64) -> Vec<i64> {
    let mut out: Vec<i64> = primes_up_to(q_bound)
        .into_iter()
        .filter(|&p| p > 2)
        .map(|p| if p % 4 == 1 { p as i64 } else { -(p as i64) })
        .collect();
    out.extend([-4, 8, -8]);
    out
}

fn chi_small(q: i64, p: u64) -> i8 {
    let m = if p == 2 { 8 } else { p as i64 };
    kronecker_mod_prime(q.rem_euclid(m) as u64, p)
}

/// The correlating-character lattice for chi_d over primes p <= P and prime
/// discriminants from odd primes <= Q, both coprime to d.
pub fn build_twist_lattice(ch: &CharacterDescriptor, p_bound: u64, q_bound: u64, m_scale: u32) -> Result<LatticeBasis> {
    if p_bound < 3 || q_bound < 3 {
        return Err(Error::Domain("P and Q must be at least 3".into()));
    }
    if !(1..=256).contains(&m_scale) {
        return Err(Error::Domain("M_scale must lie in [1, 256]".into()));
    }
    let res = Residues::new(&ch.d);
    let chi_d = |p: u64| res.kronecker_prime(p);
    let primes: Vec<u64> = primes_up_to(p_bound).into_iter().filter(|&p| chi_d(p) != 0).collect();
    let qs: Vec<i64> = prime_discriminants(q_bound)
        .into_iter()
        .filter(|&q| {
            let p = if q.rem_euclid(4) == 0 { 2 } else { q.unsigned_abs() };
            chi_d(p) != 0
        })
        .collect();
    let (n, m) = (primes.len(), qs.len());
    let dim = n + m + 1;
    if dim > MAX_DIM {
        return Err(Error::Budget(format!("lattice dimension {dim} exceeds {MAX_DIM}")));
    }
    let weights: Vec<BigInt> = primes.iter().map(|&p| weight(p, m_scale)).collect();
    let penalties: Vec<BigInt> = qs.iter().map(|&q| penalty(q, m_scale)).collect();
    let incl = |c: i8, k: usize| if c == 1 { weights[k].clone() } else { BigInt::zero() };

    let mut rows = vec![vec![BigInt::zero(); dim]; dim];
    for k in 0..n {
        rows[0][k] = incl(chi_d(primes[k]), k);
    }
    rows[0][dim - 1] = BigInt::one() << m_scale;
    for (j, &q) in qs.iter().enumerate() {
        for k in 0..n {
            rows[1 + j][k] = incl(chi_small(q, primes[k]), k);
        }
        rows[1 + j][n + j] = penalties[j].clone();
    }
    for k in 0..n {
        rows[1 + m + k][k] = &weights[k] * 2;
    }
    Ok(LatticeBasis { rows, primes, qs, m_scale, weights, penalties })
}

impl LatticeBasis {
    pub fn dims(&self) -> (usize, usize) {
        (self.primes.len(), self.qs.len())
    }

    pub fn to_text(&self) -> String {
        rows_to_text(&self.rows)
    }
}

pub fn rows_to_text(rows: &[Vec<BigInt>]) -> String {
    let mut s = String::new();
    for r in rows {
        let line: Vec<String> = r.iter().map(|x| x.to_string()).collect();
        s.push_str(&line.join(" "));
        s.push('\n');
    }
    s
}

pub fn rows_from_text(text: &str) -> Result<Vec<Vec<BigInt>>> {
    let rows: Vec<Vec<BigInt>> = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.split_whitespace()
                .map(|t| t.parse::<BigInt>().map_err(|e| Error::Parse(format!("{t}: {e}"))))
                .collect()
        })
        .collect::<Result<_>>()?;
    if let Some(w) = rows.first().map(|r| r.len()) {
        if rows.iter().any(|r| r.len() != w) {
            return Err(Error::Parse("rows have different lengths".into()));
        }
    }
    Ok(rows)
}

fn dot(a: &[BigInt], b: &[BigInt]) -> BigInt {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Integral LLL with Lovasz parameter delta = num/den in (1/4, 1], exact.
pub fn lll_reduce(rows: &[Vec<BigInt>], delta: (u64, u64)) -> Result<Vec<Vec<BigInt>>> {
    let (dn, dd) = delta;
    if dd == 0 || 4 * dn <= dd || dn > dd {
        return Err(Error::Domain("delta must lie in (1/4, 1]".into()));
    }
    let n = rows.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let (a, bq) = (BigInt::from(dn), BigInt::from(dd));
    // 1-based as in the textbook formulation
    let mut b: Vec<Vec<BigInt>> = std::iter::once(Vec::new()).chain(rows.iter().cloned()).collect();
    let mut d = vec![BigInt::zero(); n + 1];
    let mut lam = vec![vec![BigInt::zero(); n + 1]; n + 1];
    d[0] = BigInt::one();
    d[1] = dot(&b[1], &b[1]);
    if d[1].is_zero() {
        return Err(Error::Domain("rows are linearly dependent".into()));
    }
    let mut k = 2;
    let mut kmax = 1;

    fn red(k: usize, l: usize, b: &mut [Vec<BigInt>], d: &[BigInt], lam: &mut [Vec<BigInt>]) {
        let two_lam: BigInt = &lam[k][l] * 2;
        if two_lam.abs() > d[l] {
            // nearest integer to lam / d
            let q = (two_lam + &d[l]).div_floor(&(&d[l] * 2));
            let bl = b[l].clone();
            for (x, y) in b[k].iter_mut().zip(&bl) {
                *x -= &q * y;
            }
            lam[k][l] = &lam[k][l] - &q * &d[l];
            for i in 1..l {
                lam[k][i] = &lam[k][i] - &q * &lam[l][i];
            }
        }
    }

    while k <= n {
        if k > kmax {
            kmax = k;
            for j in 1..=k {
                let mut u = dot(&b[k], &b[j]);
                for i in 1..j {
                    u = (&d[i] * u - &lam[k][i] * &lam[j][i]) / &d[i - 1];
                }
                if j < k {
                    lam[k][j] = u;
                } else {
                    if u.is_zero() {
                        return Err(Error::Domain("rows are linearly dependent".into()));
                    }
                    d[k] = u;
                }
            }
        }
        loop {
            red(k, k - 1, &mut b, &d, &mut lam);
            // Lovasz: den d_k d_{k-2} >= num d_{k-1}^2 - den lam^2
            let lhs = &bq * &d[k] * &d[k - 2];
            let rhs = &a * &d[k - 1] * &d[k - 1] - &bq * &lam[k][k - 1] * &lam[k][k - 1];
            if lhs < rhs {
                b.swap(k, k - 1);
                for j in 1..k - 1 {
                    let t = lam[k][j].clone();
                    lam[k][j] = lam[k - 1][j].clone();
                    lam[k - 1][j] = t;
                }
                let l = lam[k][k - 1].clone();
                let bb = (&d[k - 2] * &d[k] + &l * &l) / &d[k - 1];
                for i in k + 1..=kmax {
                    let t = lam[i][k].clone();
                    lam[i][k] = (&d[k] * &lam[i][k - 1] - &l * &t) / &d[k - 1];
                    lam[i][k - 1] = (&bb * &t + &l * &lam[i][k]) / &d[k];
                }
                d[k - 1] = bb;
                if k > 2 {
                    k -= 1;
                }
            } else {
                for l in (1..k - 1).rev() {
                    red(k, l, &mut b, &d, &mut lam);
                }
                k += 1;
                break;
            }
        }
    }
    b.remove(0);
    Ok(b)
}

/// Independent check of size reduction and the Lovasz condition, in rationals.
pub fn is_lll_reduced(rows: &[Vec<BigInt>], delta: (u64, u64)) -> bool {
    let n = rows.len();
    let to_q = |x: &BigInt| BigRational::from_integer(x.clone());
    let mut bstar: Vec<Vec<BigRational>> = Vec::with_capacity(n);
    let mut norms: Vec<BigRational> = Vec::with_capacity(n);
    let mut mu = vec![vec![BigRational::zero(); n]; n];
    for i in 0..n {
        let mut v: Vec<BigRational> = rows[i].iter().map(to_q).collect();
        for j in 0..i {
            let num: BigRational = rows[i].iter().zip(&bstar[j]).map(|(x, y)| to_q(x) * y).sum();
            mu[i][j] = num / &norms[j];
            for (x, y) in v.iter_mut().zip(&bstar[j]) {
                *x -= &mu[i][j] * y;
            }
        }
        let nn: BigRational = v.iter().map(|x| x * x).sum();
        if nn.is_zero() {
            return false;
        }
        norms.push(nn);
        bstar.push(v);
    }
    let half = BigRational::new(BigInt::one(), BigInt::from(2));
    let dl = BigRational::new(BigInt::from(delta.0), BigInt::from(delta.1));
    for i in 0..n {
        for j in 0..i {
            if mu[i][j].abs() > half {
                return false;
            }
        }
        if i > 0 && norms[i] < (&dl - &mu[i][i - 1] * &mu[i][i - 1]) * &norms[i - 1] {
            return false;
        }
    }
    true
}

/// Determinant of the Gram matrix, by fraction-free elimination.
pub fn gram_determinant(rows: &[Vec<BigInt>]) -> BigInt {
    let n = rows.len();
    let mut g: Vec<Vec<BigInt>> = (0..n).map(|i| (0..n).map(|j| dot(&rows[i], &rows[j])).collect()).collect();
    let mut sign = BigInt::one();
    let mut prev = BigInt::one();
    for k in 0..n {
        if g[k][k].is_zero() {
            match (k + 1..n).find(|&r| !g[r][k].is_zero()) {
                Some(r) => {
                    g.swap(k, r);
                    sign = -sign;
                }
                None => return BigInt::zero(),
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                g[i][j] = (&g[i][j] * &g[k][k] - &g[i][k] * &g[k][j]) / &prev;
            }
        }
        prev = g[k][k].clone();
    }
    sign * prev
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtractedCharacter {
    #[serde(with = "crate::bigint_serde")]
    pub q: BigInt,
    /// Indices j into the basis' prime discriminants.
    pub selected: Vec<usize>,
    #[serde(with = "crate::bigint_serde")]
    pub norm2: BigInt,
    /// 2 sum log p/sqrt p - 2 sum chi_q chi_d(p) log p/sqrt p + log|q| over the basis primes.
    pub objective: f64,
}

/// The correlation objective over the given primes.
pub fn correlation_objective(ch: &CharacterDescriptor, q: i64, primes: &[u64]) -> f64 {
    let res = Residues::new(&ch.d);
    let mut s = 0.0;
    for &p in primes {
        let w = (p as f64).ln() / (p as f64).sqrt();
        let c = (chi_small(q, p) * res.kronecker_prime(p)) as f64;
        s += 2.0 * w - 2.0 * c * w;
    }
    s + (q.unsigned_abs() as f64).ln()
}

// Product of prime discriminants, with the 2-adic ones combined so the
// result stays fundamental: (-4)(8) ~ -8, (-4)(-8) ~ 8, (8)(-8) ~ -4.
fn combine(qs: &[i64], sel: &[usize]) -> Option<i64> {
    let mut odd: i64 = 1;
    let mut two: Option<i64> = None;
    for &j in sel {
        let q = qs[j];
        if q.rem_euclid(4) == 0 {
            two = match two {
                None => Some(q),
                Some(t) => {
                    let r = match (t, q) {
                        (-4, 8) | (8, -4) => -8,
                        (-4, -8) | (-8, -4) => 8,
                        (8, -8) | (-8, 8) => -4,
                        _ => 1,
                    };
                    (r != 1).then_some(r)
                }
            };
        } else {
            odd = odd.checked_mul(q)?;
        }
    }
    match two {
        Some(t) => odd.checked_mul(t),
        None => Some(odd),
    }
}

/// Read characters off reduced vectors (and sums/differences of pairs) whose
/// last coordinate is +-2^M.
pub fn extract_characters(
    ch: &CharacterDescriptor,
    reduced: &[Vec<BigInt>],
    basis: &LatticeBasis,
    max_results: usize,
) -> Vec<ExtractedCharacter> {
    let (n, m) = basis.dims();
    let last = n + m;
    let top = BigInt::one() << basis.m_scale;
    let mut cands: Vec<Vec<BigInt>> = reduced.to_vec();
    cands.push(basis.rows[0].clone());
    for i in 0..reduced.len() {
        for j in i + 1..reduced.len() {
            let s = &reduced[i][last] + &reduced[j][last];
            let t = &reduced[i][last] - &reduced[j][last];
            if s.abs() == top {
                cands.push(reduced[i].iter().zip(&reduced[j]).map(|(a, b)| a + b).collect());
            }
            if t.abs() == top {
                cands.push(reduced[i].iter().zip(&reduced[j]).map(|(a, b)| a - b).collect());
            }
        }
    }
    let mut out: Vec<ExtractedCharacter> = Vec::new();
    for v in cands {
        if v[last].abs() != top {
            continue;
        }
        let v: Vec<BigInt> = if v[last].is_negative() { v.iter().map(|x| -x).collect() } else { v };
        let mut sel = Vec::new();
        let mut ok = true;
        for j in 0..m {
            let (u, r) = v[n + j].div_rem(&basis.penalties[j]);
            if !r.is_zero() {
                ok = false;
                break;
            }
            if u.is_odd() {
                sel.push(j);
            }
        }
        if !ok {
            continue;
        }
        let Some(q) = combine(&basis.qs, &sel) else { continue };
        if out.iter().any(|e| e.q == BigInt::from(q)) {
            continue;
        }
        let norm2 = charvector_norm2(ch, basis, &sel);
        out.push(ExtractedCharacter {
            q: BigInt::from(q),
            selected: sel,
            norm2,
            objective: correlation_objective(ch, q, &basis.primes),
        });
    }
    out.sort_by(|a, b| a.objective.total_cmp(&b.objective).then(a.q.magnitude().cmp(b.q.magnitude())));
    out.truncate(max_results.max(1));
    out
}

/// Squared norm of the lattice vector d-row + sum_{j in J} q_j-row with its
/// first n coordinates reduced into {0, w(p_k)} modulo 2w(p_k).
pub fn charvector_norm2(ch: &CharacterDescriptor, basis: &LatticeBasis, selected: &[usize]) -> BigInt {
    let res = Residues::new(&ch.d);
    let top = BigInt::one() << basis.m_scale;
    let mut n2 = &top * &top;
    for (k, &p) in basis.primes.iter().enumerate() {
        let plus = (res.kronecker_prime(p) == 1) as usize
            + selected.iter().filter(|&&j| chi_small(basis.qs[j], p) == 1).count();
        if plus % 2 == 1 {
            n2 += &basis.weights[k] * &basis.weights[k];
        }
    }
    for &j in selected {
        n2 += &basis.penalties[j] * &basis.penalties[j];
    }
    n2
}

/// Norm of a vector given as its integer coefficient representation.
pub fn norm2(v: &[BigInt]) -> BigInt {
    dot(v, v)
}

/// Approximate f64 value of a big integer, for reporting.
pub fn approx(x: &BigInt) -> f64 {
    x.to_f64().unwrap_or(f64::INFINITY)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(v: &[&[i64]]) -> Vec<Vec<BigInt>> {
        v.iter().map(|r| r.iter().map(|&x| BigInt::from(x)).collect()).collect()
    }

    #[test]
    fn weight_example() {
        assert_eq!(weight(2, 8), BigInt::from(358));
        for p in [3u64, 5, 97, 1009] {
            let w = weight(p, 20);
            let f = 2f64.powi(21) * (p as f64).ln().sqrt() / (p as f64).powf(0.25);
            assert!((approx(&w) - f.floor()).abs() <= 1.0);
        }
        assert_eq!(penalty(-3, 10), BigInt::from((1024.0 * 3f64.ln().sqrt()).floor() as i64));
    }

    #[test]
    fn small_lattice_shape() {
        let ch = CharacterDescriptor::from_i64(1548889).unwrap();
        let b = build_twist_lattice(&ch, 5, 5, 8).unwrap();
        assert_eq!(b.primes, vec![2, 3, 5]);
        assert_eq!(b.qs, vec![-3, 5, -4, 8, -8]);
        assert_eq!(b.rows.len(), 9);
        assert!(b.rows.iter().all(|r| r.len() == 9));
        assert!(b.qs.iter().all(|q| matches!(q.rem_euclid(4), 0 | 1)));
    }

    #[test]
    fn lll_small_examples() {
        let id = rows(&[&[1, 0, 0], &[0, 1, 0], &[0, 0, 1]]);
        assert_eq!(lll_reduce(&id, (3, 4)).unwrap(), id);
        let r = lll_reduce(&rows(&[&[1, 1, 1], &[-1, 0, 2], &[3, 5, 6]]), (3, 4)).unwrap();
        assert!(is_lll_reduced(&r, (3, 4)));
        assert_eq!(r.iter().map(|v| norm2(v)).min().unwrap(), BigInt::one());
        assert!(lll_reduce(&rows(&[&[1, 2], &[2, 4]]), (3, 4)).is_err());
    }

    #[test]
    fn combine_two_adic() {
        let qs = vec![-3, 5, -4, 8, -8];
        assert_eq!(combine(&qs, &[2, 3]), Some(-8));
        assert_eq!(combine(&qs, &[0, 2, 4]), Some(-3 * 8));
        assert_eq!(combine(&qs, &[2, 3, 4]), Some(1));
    }
}
