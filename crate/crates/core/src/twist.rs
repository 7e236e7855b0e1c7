//! Staged search for quadratic twists q that raise the conductor bound.

use crate::error::{Error, Result};
use crate::explicit::{arch_terms_with, lower_bound_with, prime_limit, BoundReport};
use crate::integer::{
    enumerate_fundamental, jacobi_u64, primes_up_to, strips_square, CharacterDescriptor, Parity, Residues,
};
use crate::qform::{build_quadratic_form, optimize_coefficients, Optimized};
use crate::quad::Kahan;
use crate::testfn::{TestFunction, TestFunctionSpec};
use num_bigint::BigInt;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::cmp::Ordering;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering as AtomicOrdering};

/// Expected gain in the bound from forcing chi_{qd}(p) = 1.
pub fn lineup_bias(p: u64) -> f64 {
    let pf = p as f64;
    2.0 * pf.ln() / (pf - 1.0) * (pf.sqrt() + 1.0 / (pf + 1.0)) - (2.0 * (pf + 1.0) / pf).ln()
}

/// Expected gain from forcing chi_{qd}(-1) = 1.
pub fn parity_lineup_bias() -> f64 {
    std::f64::consts::FRAC_PI_2 - std::f64::consts::LN_2
}

/// Primes with positive lineup bias, as many as keep roughly `min_pool`
/// candidates out of about 1.2 q_max fundamental discriminants.
pub fn default_lineup(q_max: u64, min_pool: u64) -> Vec<u64> {
    let mut pool = 1.2 * q_max as f64;
    let mut out = Vec::new();
    for p in primes_up_to(251) {
        let keep = pf_keep(p);
        if pool * keep < min_pool as f64 || lineup_bias(p) <= 0.0 {
            break;
        }
        pool *= keep;
        out.push(p);
    }
    out
}

// Fraction of fundamental discriminants with a prescribed nonzero chi(p).
fn pf_keep(p: u64) -> f64 {
    let pf = p as f64;
    pf / (2.0 * (pf + 1.0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    #[serde(rename = "X_short")]
    pub x_short: f64,
    pub keep_fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    #[serde(rename = "Q_max")]
    pub q_max: u64,
    pub stages: Vec<Stage>,
    /// Primes p at which chi_{qd}(p) = 1 is required.
    pub lineup_primes: Vec<u64>,
    /// Require chi_{qd}(-1) = 1.
    #[serde(default)]
    pub lineup_parity: bool,
    /// Drop the lineup when it leaves no candidate.
    #[serde(default = "yes")]
    pub fallback_unconstrained: bool,
    /// Family used for scoring; its X is replaced by each stage's X_short.
    pub short_spec: TestFunctionSpec,
    #[serde(default)]
    pub checkpoint_path: Option<PathBuf>,
    #[serde(default = "default_prime_budget")]
    pub prime_budget: u64,
}

fn yes() -> bool {
    true
}

fn default_prime_budget() -> u64 {
    crate::explicit::DEFAULT_PRIME_BUDGET
}

impl SearchConfig {
    /// One stage with p <= 10^4 at keep fraction 0.01, triangle scoring.
    pub fn new(q_max: u64) -> Self {
        let x = 1e4f64.ln();
        SearchConfig {
            q_max,
            stages: vec![Stage { x_short: x, keep_fraction: 0.01 }],
            lineup_primes: Vec::new(),
            lineup_parity: false,
            fallback_unconstrained: true,
            short_spec: TestFunctionSpec::triangle(x),
            checkpoint_path: None,
            prime_budget: default_prime_budget(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.stages.is_empty() {
            return Err(Error::Domain("at least one stage is required".into()));
        }
        for w in self.stages.windows(2) {
            if w[1].x_short <= w[0].x_short || w[1].keep_fraction > w[0].keep_fraction {
                return Err(Error::Domain(
                    "stages need increasing X_short and non-increasing keep_fraction".into(),
                ));
            }
        }
        for s in &self.stages {
            if !(s.keep_fraction > 0.0 && s.keep_fraction <= 1.0) || !(s.x_short > 0.0) {
                return Err(Error::Domain("keep_fraction must lie in (0, 1] and X_short be positive".into()));
            }
        }
        self.short_spec.validate()
    }

    /// sha256 over the configuration, without the checkpoint location.
    pub fn hash(&self, d: &BigInt) -> String {
        let mut c = self.clone();
        c.checkpoint_path = None;
        let mut h = Sha256::new();
        h.update(d.to_string().as_bytes());
        h.update(serde_json::to_vec(&c).expect("config serializes"));
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    #[serde(with = "crate::bigint_serde")]
    pub q: BigInt,
    pub score: f64,
    pub stage_reached: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Checkpoint {
    config_hash: String,
    stage: usize,
    cursor: usize,
    /// Candidate pool of the current stage; absent at stage 0, which is re-enumerated.
    pool: Option<Vec<i64>>,
    scored: Vec<(i64, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchOutcome {
    /// Final-stage candidates, best first.
    pub ranking: Vec<CandidateScore>,
    /// Score of q = 1 at the last stage.
    pub baseline: f64,
    pub candidates_scored: usize,
    /// A prime p with p^2 | d met while preparing the prime tables.
    pub square_factor: Option<BigInt>,
    pub lineup_used: bool,
}

/// Interruption and checkpoint cadence for long searches.
#[derive(Default)]
pub struct SearchControl<'a> {
    pub cancel: Option<&'a AtomicBool>,
    /// Candidates scored between checkpoint writes (0 means 4096).
    pub checkpoint_every: usize,
}

// Per-prime data for fast scoring at one X: chi_d(p), and the odd and even
// prime-power sums of log p p^{-k/2} g(k log p).
struct StageTables {
    primes: Vec<u64>,
    chi_d: Vec<i8>,
    odd: Vec<f64>,
    even: Vec<f64>,
    arch_even: f64,
    arch_odd: f64,
}

fn stage_tables(d: &BigInt, f: &TestFunction, budget: u64) -> Result<(StageTables, Option<u64>)> {
    let limit = prime_limit(f.support(), budget)?;
    let primes = primes_up_to(limit);
    let res = Residues::new(d);
    let mut t = StageTables {
        primes: Vec::with_capacity(primes.len()),
        chi_d: Vec::with_capacity(primes.len()),
        odd: Vec::with_capacity(primes.len()),
        even: Vec::with_capacity(primes.len()),
        arch_even: arch_terms_with(f, Parity::Even)?,
        arch_odd: arch_terms_with(f, Parity::Odd)?,
    };
    for p in primes {
        let c = res.kronecker_prime(p);
        if c == 0 && strips_square(d, p) {
            return Ok((t, Some(p)));
        }
        let lp = (p as f64).ln();
        let (mut o, mut e) = (0.0, 0.0);
        let mut pw = p as u128;
        let mut w = 1.0 / (p as f64).sqrt();
        let step = w;
        let mut k = 1u32;
        while pw <= limit as u128 {
            let v = lp * w * f.g(k as f64 * lp);
            if k % 2 == 1 {
                o += v;
            } else {
                e += v;
            }
            pw *= p as u128;
            w *= step;
            k += 1;
        }
        t.primes.push(p);
        t.chi_d.push(c);
        t.odd.push(o);
        t.even.push(e);
    }
    Ok((t, None))
}

fn kron_small(q: i64, p: u64) -> i8 {
    if p == 2 {
        match q.rem_euclid(8) {
            1 | 7 => 1,
            3 | 5 => -1,
            _ => 0,
        }
    } else {
        jacobi_u64(q.rem_euclid(p as i64) as u64, p)
    }
}

/// Short-sum score of a twist: the full lower bound at the stage's test function.
fn score(t: &StageTables, d_negative: bool, q: i64) -> f64 {
    let mut k = Kahan::new();
    for i in 0..t.primes.len() {
        let c = t.chi_d[i] * kron_small(q, t.primes[i]);
        if c != 0 {
            k.add(c as f64 * t.odd[i] + t.even[i]);
        }
    }
    let odd = d_negative != (q < 0);
    let arch = if odd { t.arch_odd } else { t.arch_even };
    2.0 * k.value() + arch - (q.unsigned_abs() as f64).ln()
}

fn rank_cmp(a: &(i64, f64), b: &(i64, f64)) -> Ordering {
    b.1.total_cmp(&a.1)
        .then(a.0.unsigned_abs().cmp(&b.0.unsigned_abs()))
        .then(a.0.cmp(&b.0))
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn enumerate_pool(ch: &CharacterDescriptor, cfg: &SearchConfig) -> Result<(Vec<i64>, bool)> {
    let res = Residues::new(&ch.d);
    let lineup: Vec<(u64, i8)> = cfg
        .lineup_primes
        .iter()
        .filter_map(|&p| {
            let c = res.kronecker_prime(p);
            (c != 0).then_some((p, c))
        })
        .collect();
    let parity_ok = |q: i64| !cfg.lineup_parity || ch.d.sign() == BigInt::from(q).sign();
    let collect = |lu: &[(u64, i8)]| -> Result<Vec<i64>> {
        Ok(enumerate_fundamental(2, cfg.q_max, &ch.d, lu)?.filter(|&q| parity_ok(q)).collect())
    };
    let mut pool = collect(&lineup)?;
    let mut used = !lineup.is_empty() || cfg.lineup_parity;
    if pool.is_empty() && used && cfg.fallback_unconstrained {
        pool = enumerate_fundamental(2, cfg.q_max, &ch.d, &[])?.collect();
        used = false;
    }
    pool.insert(0, 1);
    Ok((pool, used))
}

/// Run the staged search, resuming from the configured checkpoint if present.
pub fn staged_search(ch: &CharacterDescriptor, cfg: &SearchConfig) -> Result<SearchOutcome> {
    staged_search_with(ch, cfg, &SearchControl::default())
}

pub fn staged_search_with(ch: &CharacterDescriptor, cfg: &SearchConfig, ctl: &SearchControl) -> Result<SearchOutcome> {
    cfg.validate()?;
    let hash = cfg.hash(&ch.d);
    let every = if ctl.checkpoint_every == 0 { 4096 } else { ctl.checkpoint_every };
    let mut resume: Option<Checkpoint> = None;
    if let Some(p) = &cfg.checkpoint_path {
        if p.exists() {
            let cp: Checkpoint = serde_json::from_slice(&std::fs::read(p)?)
                .map_err(|e| Error::Data(format!("corrupt checkpoint {}: {e}", p.display())))?;
            if cp.config_hash != hash {
                return Err(Error::Data(format!("checkpoint {} belongs to another configuration", p.display())));
            }
            resume = Some(cp);
        }
    }

    let (mut pool, lineup_used) = enumerate_pool(ch, cfg)?;
    let mut start_stage = 0;
    let mut carried: Vec<(i64, f64)> = Vec::new();
    if let Some(cp) = resume.take() {
        start_stage = cp.stage;
        if let Some(p) = cp.pool {
            pool = p;
        }
        if cp.cursor > pool.len() || cp.scored.len() != cp.cursor {
            return Err(Error::Data("checkpoint cursor out of range".into()));
        }
        carried = cp.scored;
    }

    let d_neg = ch.parity == Parity::Odd;
    let mut total = 0usize;
    let mut baseline = f64::NAN;
    let mut last: Vec<(i64, f64)> = Vec::new();
    for (si, st) in cfg.stages.iter().enumerate().skip(start_stage) {
        let f = cfg.short_spec.with_x(st.x_short).compile()?;
        let (tables, sq) = stage_tables(&ch.d, &f, cfg.prime_budget)?;
        if let Some(p) = sq {
            return Ok(SearchOutcome {
                ranking: Vec::new(),
                baseline: f64::NAN,
                candidates_scored: total,
                square_factor: Some(BigInt::from(p)),
                lineup_used,
            });
        }
        let mut scored = std::mem::take(&mut carried);
        while scored.len() < pool.len() {
            let lo = scored.len();
            let hi = pool.len().min(lo + every);
            let chunk = &pool[lo..hi];
            #[cfg(feature = "parallel")]
            let vals: Vec<f64> = {
                use rayon::prelude::*;
                chunk.par_iter().map(|&q| score(&tables, d_neg, q)).collect()
            };
            #[cfg(not(feature = "parallel"))]
            let vals: Vec<f64> = chunk.iter().map(|&q| score(&tables, d_neg, q)).collect();
            scored.extend(chunk.iter().copied().zip(vals));
            total += chunk.len();
            let cancelled = ctl.cancel.is_some_and(|c| c.load(AtomicOrdering::SeqCst));
            if let Some(path) = &cfg.checkpoint_path {
                if cancelled || scored.len() < pool.len() {
                    let cp = Checkpoint {
                        config_hash: hash.clone(),
                        stage: si,
                        cursor: scored.len(),
                        pool: (si > 0).then(|| pool.clone()),
                        scored: scored.clone(),
                    };
                    write_atomic(path, &serde_json::to_vec(&cp)?)?;
                }
            }
            if cancelled {
                let loc = cfg.checkpoint_path.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
                return Err(Error::Interrupted(loc));
            }
        }
        baseline = scored.iter().find(|s| s.0 == 1).map(|s| s.1).unwrap_or(score(&tables, d_neg, 1));
        scored.sort_by(rank_cmp);
        let keep = ((scored.len() as f64 * st.keep_fraction).ceil() as usize).clamp(1, scored.len());
        scored.truncate(keep);
        pool = scored.iter().map(|s| s.0).collect();
        last = scored;
        if si + 1 < cfg.stages.len() {
            if let Some(path) = &cfg.checkpoint_path {
                let cp = Checkpoint {
                    config_hash: hash.clone(),
                    stage: si + 1,
                    cursor: 0,
                    pool: Some(pool.clone()),
                    scored: Vec::new(),
                };
                write_atomic(path, &serde_json::to_vec(&cp)?)?;
            }
        }
    }
    if let Some(path) = &cfg.checkpoint_path {
        let _ = std::fs::remove_file(path);
    }
    let n_stages = cfg.stages.len();
    Ok(SearchOutcome {
        ranking: last
            .into_iter()
            .map(|(q, s)| CandidateScore { q: BigInt::from(q), score: s, stage_reached: n_stages })
            .collect(),
        baseline,
        candidates_scored: total,
        square_factor: None,
        lineup_used,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Refined {
    pub report: BoundReport,
    pub optimized: Optimized,
}

/// Re-evaluate candidates with the long sum and the optimized step function.
pub fn refine_top(
    ch: &CharacterDescriptor,
    candidates: &[BigInt],
    x_full: f64,
    m: usize,
    budget: u64,
) -> Result<Vec<Refined>> {
    if candidates.is_empty() {
        return Err(Error::Domain("no candidates to refine".into()));
    }
    let mut out = Vec::with_capacity(candidates.len());
    for q in candidates {
        let form = build_quadratic_form(ch, q, x_full, m, budget)?;
        let opt = optimize_coefficients(&form)?;
        let f = opt.spec(x_full).compile()?;
        let report = lower_bound_with(ch, q, &f, budget)?;
        let stop = report.square_factor_found.is_some();
        out.push(Refined { report, optimized: opt });
        if stop {
            break;
        }
    }
    out.sort_by(|a, b| {
        b.report
            .lower_bound
            .total_cmp(&a.report.lower_bound)
            .then(a.report.q.magnitude().cmp(b.report.q.magnitude()))
    });
    Ok(out)
}
