//! Terms of the explicit formula for L(s, chi_d): archimedean integrals,
//! the prime-power sum, zero sums from external zero lists, and the theta
//! series scan.

use crate::error::{Error, Result};
use crate::integer::{strips_square, CharacterDescriptor, Parity, PrimeSegments, Residues, SEGMENT_LEN};
use crate::lp::tail::{tail_bound_with, Envelope, TailBound};
use crate::quad::{integrate, Kahan};
use crate::special::EULER_GAMMA;
use crate::testfn::{TestFunction, TestFunctionSpec};
use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::Path;

/// log(8 pi) + Euler's constant.
pub fn log_8pi_egamma() -> f64 {
    (8.0 * PI).ln() + EULER_GAMMA
}

/// Default ceiling on e^X for prime sums.
pub const DEFAULT_PRIME_BUDGET: u64 = 1 << 40;

const QUAD_TOL: f64 = 1e-11;

/// 1 / (2 sinh(x/2)), with a series near 0.
pub fn inv_two_sinh_half(x: f64) -> f64 {
    if x < 1e-3 {
        1.0 / x - x / 24.0 + 7.0 * x * x * x / 5760.0
    } else {
        0.5 / (0.5 * x).sinh()
    }
}

fn inv_two_cosh_half(x: f64) -> f64 {
    0.5 / (0.5 * x).cosh()
}

/// Archimedean part of the explicit formula for a function supported in
/// [0, support]: C g0 - int (g0 - g)/(2 sinh(x/2)) + eps int g/(2 cosh(x/2)).
/// `deficit(x)` must return g0 - g(x).
pub(crate) fn arch_functional(
    g: &dyn Fn(f64) -> f64,
    deficit: &dyn Fn(f64) -> f64,
    g0: f64,
    support: f64,
    breakpoints: &[f64],
    parity: Parity,
) -> Result<f64> {
    let mut sinh_part = Kahan::new();
    let mut cosh_part = Kahan::new();
    for w in breakpoints.windows(2) {
        if w[1] <= w[0] {
            continue;
        }
        sinh_part.add(integrate(|x| deficit(x) * inv_two_sinh_half(x), w[0], w[1], QUAD_TOL)?);
        cosh_part.add(integrate(|x| g(x) * inv_two_cosh_half(x), w[0], w[1], QUAD_TOL)?);
    }
    // int_X^inf dx / (2 sinh(x/2)) = -log tanh(X/4)
    if g0 != 0.0 {
        sinh_part.add(-g0 * (0.25 * support).tanh().ln());
    }
    Ok(log_8pi_egamma() * g0 - sinh_part.value() + parity.sign() * cosh_part.value())
}

pub fn arch_terms(spec: &TestFunctionSpec, parity: Parity) -> Result<f64> {
    arch_terms_with(&spec.compile()?, parity)
}

pub fn arch_terms_with(f: &TestFunction, parity: Parity) -> Result<f64> {
    arch_functional(&|x| f.g(x), &|x| f.one_minus_g(x), 1.0, f.support(), &f.breakpoints(), parity)
}

/// floor(e^X), checked against the budget.
pub fn prime_limit(x: f64, budget: u64) -> Result<u64> {
    let e = x.exp();
    if !(e < budget as f64 + 1.0) || e >= 9.2e18 {
        return Err(Error::Budget(format!("prime sum to e^{x} = {e:.3e} exceeds budget {budget}")));
    }
    Ok(e.floor() as u64)
}

/// Result of walking the primes up to a limit with chi_{qd}.
pub(crate) struct Scan<A> {
    pub accs: Vec<A>,
    /// Smallest prime p with p^2 | d (and d/p^2 a discriminant), if met.
    pub square_factor: Option<u64>,
}

/// Visit every prime p <= limit with the value chi_{qd}(p), segment by
/// segment. Stops at the first prime whose square divides d.
pub(crate) fn scan_character<A, I, V>(d: &BigInt, q: &BigInt, limit: u64, init: I, visit: V) -> Scan<A>
where
    A: Send,
    I: Fn() -> A + Sync,
    V: Fn(&mut A, u64, i8) + Sync,
{
    let segs = PrimeSegments::new(limit, SEGMENT_LEN);
    let dr = Residues::new(d);
    let qr = Residues::new(q);
    let run = |i: usize| -> (A, Option<u64>) {
        let mut acc = init();
        for p in segs.primes(i) {
            let cd = dr.kronecker_prime(p);
            if cd == 0 && strips_square(d, p) {
                return (acc, Some(p));
            }
            let c = cd * qr.kronecker_prime(p);
            visit(&mut acc, p, c);
        }
        (acc, None)
    };
    #[cfg(feature = "parallel")]
    let parts: Vec<(A, Option<u64>)> = {
        use rayon::prelude::*;
        (0..segs.bounds.len()).into_par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let parts: Vec<(A, Option<u64>)> = (0..segs.bounds.len()).map(run).collect();

    let mut accs = Vec::with_capacity(parts.len());
    for (acc, sq) in parts {
        accs.push(acc);
        if sq.is_some() {
            return Scan { accs, square_factor: sq };
        }
    }
    Scan { accs, square_factor: None }
}

/// Visit p^k <= limit for k >= 1 with the value chi(p)^k.
#[inline]
pub(crate) fn for_prime_powers(p: u64, chi: i8, limit: u64, mut f: impl FnMut(u32, f64, f64)) {
    if chi == 0 {
        return;
    }
    let lp = (p as f64).ln();
    let inv_sqrt = 1.0 / (p as f64).sqrt();
    let mut pw = p as u128;
    let mut c = chi as f64;
    let mut w = inv_sqrt;
    let mut k = 1u32;
    while pw <= limit as u128 {
        f(k, c * w * lp, k as f64 * lp);
        pw *= p as u128;
        c *= chi as f64;
        w *= inv_sqrt;
        k += 1;
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PrimeSum {
    pub sum: f64,
    pub square_factor: Option<BigInt>,
    /// Every prime up to this bound was checked for a square dividing d.
    pub checked_to: u64,
}

/// 2 sum_{n <= e^X} Lambda(n) chi_{qd}(n) n^{-1/2} g(log n).
pub fn prime_sum(
    ch: &CharacterDescriptor,
    q: &BigInt,
    spec: &TestFunctionSpec,
    budget: u64,
) -> Result<(f64, Option<BigInt>)> {
    let r = prime_sum_with(ch, q, &spec.compile()?, budget)?;
    Ok((r.sum, r.square_factor))
}

pub fn prime_sum_with(ch: &CharacterDescriptor, q: &BigInt, f: &TestFunction, budget: u64) -> Result<PrimeSum> {
    let limit = prime_limit(f.support(), budget)?;
    let scan = scan_character(&ch.d, q, limit, Kahan::new, |acc, p, chi| {
        for_prime_powers(p, chi, limit, |_, weight, x| acc.add(weight * f.g(x)));
    });
    let mut total = Kahan::new();
    for a in &scan.accs {
        total.add(a.value());
    }
    Ok(PrimeSum {
        sum: 2.0 * total.value(),
        square_factor: scan.square_factor.map(BigInt::from),
        checked_to: scan.square_factor.unwrap_or(limit),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    #[serde(with = "crate::bigint_serde")]
    pub d: BigInt,
    #[serde(with = "crate::bigint_serde")]
    pub q: BigInt,
    pub spec: TestFunctionSpec,
    #[serde(rename = "X")]
    pub x: f64,
    pub prime_sum: f64,
    pub arch_terms: f64,
    pub twist_penalty: f64,
    pub lower_bound: f64,
    pub primes_checked_to: u64,
    #[serde(with = "crate::bigint_serde::option", default)]
    pub square_factor_found: Option<BigInt>,
    pub grh_conditional: bool,
}

impl BoundReport {
    pub fn compose(prime_sum: f64, arch_terms: f64, twist_penalty: f64) -> f64 {
        prime_sum + arch_terms - twist_penalty
    }
}

/// Parity of chi_{qd}.
pub fn twisted_parity(d: &BigInt, q: &BigInt) -> Parity {
    if d.is_negative() != q.is_negative() {
        Parity::Odd
    } else {
        Parity::Even
    }
}

/// log|q| as f64, exact enough for any q that fits in memory.
pub fn log_abs(q: &BigInt) -> f64 {
    if q.is_zero() {
        return f64::NEG_INFINITY;
    }
    let bits = q.bits();
    if bits < 1000 {
        return q.abs().to_f64().unwrap().ln();
    }
    let shift = bits - 64;
    let top = (q.abs() >> shift).to_f64().unwrap();
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

/// Lower bound for log|Delta| from chi_{qd}, assuming GRH for L(s, chi_{q Delta}).
pub fn lower_bound(ch: &CharacterDescriptor, q: &BigInt, spec: &TestFunctionSpec, budget: u64) -> Result<BoundReport> {
    lower_bound_with(ch, q, &spec.compile()?, budget)
}

pub fn lower_bound_with(ch: &CharacterDescriptor, q: &BigInt, f: &TestFunction, budget: u64) -> Result<BoundReport> {
    if q.is_zero() {
        return Err(Error::Domain("twist q must be nonzero".into()));
    }
    let ps = prime_sum_with(ch, q, f, budget)?;
    let arch = arch_terms_with(f, twisted_parity(&ch.d, q))?;
    let pen = log_abs(q);
    Ok(BoundReport {
        d: ch.d.clone(),
        q: q.clone(),
        spec: f.spec().clone(),
        x: f.support(),
        prime_sum: ps.sum,
        arch_terms: arch,
        twist_penalty: pen,
        lower_bound: BoundReport::compose(ps.sum, arch, pen),
        primes_checked_to: ps.checked_to,
        square_factor_found: ps.square_factor,
        grh_conditional: true,
    })
}

/// Ordinates of nontrivial zeros 1/2 + i gamma with gamma >= 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZeroList {
    pub ordinates: Vec<f64>,
    pub source: String,
    pub t_complete: f64,
}

impl ZeroList {
    pub fn new(ordinates: Vec<f64>, source: impl Into<String>, t_complete: f64) -> Result<Self> {
        if ordinates.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
            return Err(Error::Data("zero ordinates must be finite and non-negative".into()));
        }
        if ordinates.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Data("zero ordinates must be ascending".into()));
        }
        Ok(ZeroList { ordinates, source: source.into(), t_complete })
    }

    /// Parse the text format: a `#T_complete=<real>` header, then one
    /// ordinate per line. Other `#` lines are comments.
    pub fn parse(text: &str, source: impl Into<String>) -> Result<Self> {
        let mut t_complete = None;
        let mut ords = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                if let Some(v) = rest.trim().strip_prefix("T_complete=") {
                    t_complete = Some(
                        v.trim()
                            .parse::<f64>()
                            .map_err(|e| Error::Parse(format!("line {}: {e}", i + 1)))?,
                    );
                }
                continue;
            }
            ords.push(line.parse::<f64>().map_err(|e| Error::Parse(format!("line {}: {e}", i + 1)))?);
        }
        let t = t_complete.ok_or_else(|| Error::Parse("missing #T_complete header".into()))?;
        Self::new(ords, source, t)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?, path.display().to_string())
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("#T_complete={}\n", self.t_complete);
        for g in &self.ordinates {
            s.push_str(&format!("{g}\n"));
        }
        s
    }

    pub fn truncated(&self, t: f64) -> ZeroList {
        ZeroList {
            ordinates: self.ordinates.iter().copied().filter(|&g| g < t).collect(),
            source: self.source.clone(),
            t_complete: self.t_complete.min(t),
        }
    }
}

/// 2 sum_{gamma < T} h(gamma), with the tail bound for the zeros above T.
pub fn zero_sum(
    zeros: &ZeroList,
    spec: &TestFunctionSpec,
    t: f64,
    modulus_log: f64,
    env: &Envelope,
) -> Result<(f64, TailBound)> {
    if zeros.t_complete < t {
        return Err(Error::Data(format!(
            "zero list complete only to {}, requested {t}",
            zeros.t_complete
        )));
    }
    let f = spec.compile()?;
    let mut k = Kahan::new();
    for &g in zeros.ordinates.iter().take_while(|&&g| g < t) {
        k.add(f.h(g));
    }
    Ok((2.0 * k.value(), tail_bound_with(&f, t, modulus_log, env)?))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub residual: f64,
    pub zero_sum: f64,
    pub prime_sum: f64,
    pub arch_terms: f64,
    pub tail_bound: f64,
}

/// |g(0) log|q Delta| - (zero sum + prime sum + arch)| for a fundamental d.
pub fn explicit_formula_residual(
    ch: &CharacterDescriptor,
    q: &BigInt,
    spec: &TestFunctionSpec,
    zeros: &ZeroList,
    t: f64,
    budget: u64,
) -> Result<Residual> {
    let f = spec.compile()?;
    let qd = &ch.d * q;
    let modulus_log = log_abs(&qd);
    let ps = prime_sum_with(ch, q, &f, budget)?;
    if let Some(r) = ps.square_factor {
        return Err(Error::Domain(format!("{} is divisible by {r}^2", ch.d)));
    }
    let arch = arch_terms_with(&f, twisted_parity(&ch.d, q))?;
    let (zs, tail) = zero_sum(zeros, spec, t, modulus_log, &Envelope::default())?;
    Ok(Residual {
        residual: (f.g(0.0) * modulus_log - (zs + ps.sum + arch)).abs(),
        zero_sum: zs,
        prime_sum: ps.sum,
        arch_terms: arch,
        tail_bound: tail.value,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaScan {
    /// (x, S(x)) over the grid.
    pub values: Vec<(f64, f64)>,
    /// Heuristic location B of the symmetry S(x) = S(B/x); not a proof.
    pub symmetry_estimate: Option<f64>,
    /// Mean squared symmetry defect at B = |d| for the input d.
    pub residual_at_d: f64,
    /// Primes p whose square was found in d; the scan continued with d/p^2.
    #[serde(with = "bigint_vec")]
    pub square_factors: Vec<BigInt>,
    #[serde(with = "crate::bigint_serde")]
    pub reduced_d: BigInt,
}

mod bigint_vec {
    use num_bigint::BigInt;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[BigInt], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|x| x.to_string()).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<BigInt>, D::Error> {
        Vec::<String>::deserialize(d)?
            .iter()
            .map(|s| s.parse().map_err(serde::de::Error::custom))
            .collect()
    }
}

/// Geometric grid of `n` points from `lo` to `hi`.
pub fn geometric_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![lo];
    }
    let r = (hi / lo).ln() / (n - 1) as f64;
    (0..n).map(|i| lo * (r * i as f64).exp()).collect()
}

// Character values chi_d(n) for 0 <= n <= nmax built multiplicatively from
// the values at primes; strips square factors from d as they appear.
fn character_table(d: &mut BigInt, nmax: u64, found: &mut Vec<BigInt>) -> Vec<i8> {
    loop {
        let primes = crate::integer::primes_up_to(nmax);
        let res = Residues::new(d);
        let mut at_prime = Vec::with_capacity(primes.len());
        let mut restart = false;
        for &p in &primes {
            let c = res.kronecker_prime(p);
            if c == 0 && strips_square(d, p) {
                *d /= BigInt::from(p * p);
                found.push(BigInt::from(p));
                restart = true;
                break;
            }
            at_prime.push(c);
        }
        if restart {
            continue;
        }
        let n = nmax as usize;
        let mut spf = vec![0u32; n + 1];
        let mut chi = vec![0i8; n + 1];
        if n >= 1 {
            chi[1] = 1;
        }
        for (i, &p) in primes.iter().enumerate() {
            let p = p as usize;
            let mut m = p;
            while m <= n {
                if spf[m] == 0 {
                    spf[m] = i as u32 + 1;
                }
                m += p;
            }
        }
        for m in 2..=n {
            let i = spf[m] as usize - 1;
            let p = primes[i] as usize;
            chi[m] = at_prime[i] * chi[m / p];
        }
        return chi;
    }
}

fn theta_value(chi: &[i8], odd: bool, x: f64) -> f64 {
    // truncate where exp(-pi (n/x)^2) < 1e-20
    let nmax = ((x * (46.06f64 / PI).sqrt()).ceil() as usize).min(chi.len() - 1);
    let mut k = Kahan::new();
    for (n, &c) in chi.iter().enumerate().take(nmax + 1).skip(1) {
        if c != 0 {
            let r = n as f64 / x;
            let pw = if odd { r } else { 1.0 };
            k.add(c as f64 * pw * (-PI * r * r).exp());
        }
    }
    k.value() / x.sqrt()
}

/// Evaluate S(x) on `grid` and locate the symmetry point heuristically.
pub fn theta_scan(ch: &CharacterDescriptor, grid: &[f64], terms_budget: u64) -> Result<ThetaScan> {
    if grid.is_empty() || grid.iter().any(|&x| !(x >= 1.0)) {
        return Err(Error::Domain("theta grid points must be >= 1".into()));
    }
    let x_max = grid.iter().cloned().fold(0.0, f64::max);
    let x_min = grid.iter().cloned().fold(f64::INFINITY, f64::min);
    let abs_d = ch.d.abs().to_f64().unwrap_or(f64::INFINITY);
    // the symmetry check at B = |d| needs S up to |d| / x_min
    let reach = x_max.max(abs_d.min(terms_budget as f64) / x_min);
    let nmax = (reach * (46.06f64 / PI).sqrt()).ceil() as u64 + 1;
    if nmax > terms_budget {
        return Err(Error::Budget(format!("theta scan needs {nmax} terms, budget {terms_budget}")));
    }
    let mut d = ch.d.clone();
    let mut found = Vec::new();
    let chi = character_table(&mut d, nmax, &mut found);
    let odd = ch.parity == Parity::Odd;
    let s = |x: f64| theta_value(&chi, odd, x);
    let values: Vec<(f64, f64)> = grid.iter().map(|&x| (x, s(x))).collect();

    // reference: symmetry with the original |d|, evaluated with the full character
    let defect = |b: f64| -> Option<f64> {
        let mut acc = 0.0;
        let mut n = 0usize;
        for &(x, v) in &values {
            let y = b / x;
            if y >= 1.0 && y * (46.06f64 / PI).sqrt() < chi.len() as f64 {
                acc += (v - s(y)).powi(2);
                n += 1;
            }
        }
        (n >= 3).then(|| acc / n as f64)
    };
    let residual_at_d = defect(abs_d).unwrap_or(f64::NAN);

    // integer candidates B with sqrt(B) inside the grid
    let b_lo = (x_min * x_min).ceil().max(1.0) as u64;
    let b_hi = (x_max * x_max).floor() as u64;
    let scale = values.iter().map(|v| v.1 * v.1).sum::<f64>() / values.len() as f64;
    let mut best: Option<(f64, u64)> = None;
    for b in b_lo..=b_hi.min(b_lo + 100_000) {
        if let Some(r) = defect(b as f64) {
            if best.is_none_or(|(br, _)| r < br) {
                best = Some((r, b));
            }
        }
    }
    let symmetry_estimate = best.and_then(|(r, b)| (r <= 1e-12 * scale.max(1e-300)).then_some(b as f64));
    Ok(ThetaScan { values, symmetry_estimate, residual_at_d, square_factors: found, reduced_d: d })
}

/// The smallest integer > 1 whose square divides d, among primes p <= limit.
pub fn small_square_factor(d: &BigInt, limit: u64) -> Option<BigInt> {
    let scan = scan_character(d, &BigInt::one(), limit, || (), |_, _, _| {});
    scan.square_factor.map(BigInt::from)
}
