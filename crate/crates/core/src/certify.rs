//! The certification pipeline: search twists with growing Q, refine the best
//! ones, and stop once the conductor bound together with the primes already
//! checked rules out every square factor. Certificates are re-derived by an
//! independent verifier.

use crate::error::{Error, Result};
use crate::explicit::{arch_terms_with, log_abs, lower_bound_with, prime_limit, twisted_parity, BoundReport};
use crate::integer::{is_perfect_power, kronecker, trial_divide, CharacterDescriptor, PrimeSegments};
use crate::lp::Envelope;
use crate::quad::Kahan;
use crate::testfn::{TestFunction, TestFunctionSpec};
use crate::twist::{refine_top, staged_search_with, SearchConfig, SearchControl, Stage};
use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use std::fmt::Write;
use std::sync::atomic::AtomicBool;

pub const CERTIFICATE_VERSION: u32 = 1;
pub const TOOL: &str = concat!("sqfree ", env!("CARGO_PKG_VERSION"));

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Conclusion {
    Squarefree,
    NotSquarefull,
    SquareFactor,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Squarefree,
    NotSquarefull,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub version: u32,
    pub tool: String,
    #[serde(rename = "N", with = "crate::bigint_serde")]
    pub n: BigInt,
    pub conclusion: Conclusion,
    /// Odd part of N whose character was used (N itself when N is odd).
    #[serde(with = "crate::bigint_serde")]
    pub odd_part: BigInt,
    #[serde(with = "crate::bigint_serde")]
    pub q: BigInt,
    pub spec: Option<TestFunctionSpec>,
    pub bound_report: Option<BoundReport>,
    /// No prime p <= B has p^2 dividing the odd part.
    #[serde(with = "crate::bigint_serde")]
    pub factor_checked_to: BigInt,
    pub not_square: bool,
    pub not_cube: bool,
    #[serde(with = "crate::bigint_serde::option", default)]
    pub square_factor: Option<BigInt>,
    pub grh_conditional: bool,
    pub envelope: Envelope,
    pub slack: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Q runs through q_base^k, k = 1, 2, ...
    pub q_base: u64,
    pub q_max: u64,
    pub max_rounds: usize,
    /// X = x_scale * log Q, capped by the prime budget.
    pub x_scale: f64,
    pub x_min: f64,
    /// Short scoring sums use p <= e^x_short_max.
    pub x_short_max: f64,
    /// Candidates refined per round with the long sum.
    pub refine_count: usize,
    /// Step-function dimension 2M+1 used in refinement.
    #[serde(rename = "M")]
    pub m: usize,
    pub prime_budget: u64,
    /// Largest bound for the trial-division top-up.
    pub trial_division_max: u64,
    /// Evaluate this spec once with q = 1 instead of searching.
    pub fixed_spec: Option<TestFunctionSpec>,
    /// Use X = 4 nu log Q and g_{nu,X} as in the running-time argument.
    pub theoretical: bool,
    pub slack: f64,
    pub envelope: Envelope,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            q_base: 2,
            q_max: 1 << 20,
            max_rounds: 24,
            x_scale: 1.0,
            x_min: 3.0,
            x_short_max: 1e4f64.ln(),
            refine_count: 4,
            m: 48,
            prime_budget: crate::explicit::DEFAULT_PRIME_BUDGET,
            trial_division_max: 1_000_000_000,
            fixed_spec: None,
            theoretical: false,
            slack: 1e-3,
            envelope: Envelope::default(),
        }
    }
}

impl PipelineConfig {
    pub fn fixed(spec: TestFunctionSpec) -> Self {
        PipelineConfig { fixed_spec: Some(spec), ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.q_base < 2 || self.q_max < 1 || self.max_rounds == 0 || self.refine_count == 0 {
            return Err(Error::Domain("q_base >= 2 and positive q_max, max_rounds, refine_count required".into()));
        }
        if !(self.x_scale > 0.0 && self.x_min > 0.0 && self.x_short_max > 0.0 && self.slack >= 0.0) {
            return Err(Error::Domain("X schedule and slack must be positive".into()));
        }
        if let Some(s) = &self.fixed_spec {
            s.validate()?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub round: usize,
    #[serde(rename = "Q")]
    pub q_max: u64,
    #[serde(rename = "X")]
    pub x: f64,
    pub candidates: usize,
    #[serde(with = "crate::bigint_serde")]
    pub round_q: BigInt,
    pub round_bound: f64,
    pub best_bound: f64,
    /// Set when the best twist changed in this round.
    pub new_best: bool,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineResult {
    pub certificate: Option<Certificate>,
    pub best: Option<BoundReport>,
    /// sqrt(N'/e^L) (or with 3L) at the best bound, N' the odd part.
    pub required_b: Option<f64>,
    pub factor_checked_to: u64,
    pub trace: Vec<TraceRow>,
    pub note: String,
    /// Stopped by the cancel flag; the trace covers the finished rounds.
    #[serde(default)]
    pub interrupted: bool,
}

pub fn trace_csv(rows: &[TraceRow]) -> String {
    let mut s = String::from("round,Q,X,candidates,round_q,round_bound,best_bound,new_best,seconds\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{:.3}",
            r.round, r.q_max, r.x, r.candidates, r.round_q, r.round_bound, r.best_bound, r.new_best as u8, r.seconds
        );
    }
    s
}

/// (positive slope, convex-ish) for best bound against X.
pub fn trend_flags(rows: &[TraceRow]) -> (bool, bool) {
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.x, r.best_bound)).collect();
    if pts.len() < 2 {
        return (false, false);
    }
    let slope = pts[pts.len() - 1].1 > pts[0].1 && pts[pts.len() - 1].0 > pts[0].0;
    // compare the mean slope of the second half against the first
    let mid = pts.len() / 2;
    let s = |a: (f64, f64), b: (f64, f64)| if b.0 > a.0 { (b.1 - a.1) / (b.0 - a.0) } else { 0.0 };
    let first = s(pts[0], pts[mid]);
    let second = s(pts[mid], pts[pts.len() - 1]);
    (slope, second >= first * 0.8)
}

fn square_factor_cert(n: &BigInt, odd: &BigInt, r: BigInt, cfg: &PipelineConfig) -> Certificate {
    Certificate {
        version: CERTIFICATE_VERSION,
        tool: TOOL.into(),
        n: n.clone(),
        conclusion: Conclusion::SquareFactor,
        odd_part: odd.clone(),
        q: BigInt::one(),
        spec: None,
        bound_report: None,
        factor_checked_to: BigInt::zero(),
        not_square: false,
        not_cube: false,
        square_factor: Some(r),
        grh_conditional: false,
        envelope: cfg.envelope,
        slack: cfg.slack,
    }
}

fn conclusive(cert: Certificate, best: Option<BoundReport>, trace: Vec<TraceRow>, note: &str) -> PipelineResult {
    let b = cert.factor_checked_to.to_u64().unwrap_or(u64::MAX);
    PipelineResult {
        certificate: Some(cert),
        best,
        required_b: None,
        factor_checked_to: b,
        trace,
        note: note.into(),
        interrupted: false,
    }
}

// wasm32-unknown-unknown has no clock; trace timings read 0 there.
struct Stopwatch(#[cfg(not(target_arch = "wasm32"))] std::time::Instant);

impl Stopwatch {
    fn start() -> Self {
        Stopwatch(
            #[cfg(not(target_arch = "wasm32"))]
            std::time::Instant::now(),
        )
    }

    fn seconds(&self) -> f64 {
        #[cfg(not(target_arch = "wasm32"))]
        return self.0.elapsed().as_secs_f64();
        #[cfg(target_arch = "wasm32")]
        return 0.0;
    }
}

/// sqrt(m / e^(k L)), slightly inflated so floating error only makes it stricter.
fn required_bound(m: &BigUint, l: f64, k: f64, slack: f64) -> f64 {
    let logm = log_abs(&BigInt::from(m.clone()));
    ((logm - k * (l - slack)) / 2.0).exp() * (1.0 + 1e-12)
}

pub fn certify_squarefree(n: &BigInt, cfg: &PipelineConfig) -> Result<PipelineResult> {
    run_pipeline(n, cfg, Mode::Squarefree, None)
}

pub fn prove_not_squarefull(n: &BigInt, cfg: &PipelineConfig) -> Result<PipelineResult> {
    run_pipeline(n, cfg, Mode::NotSquarefull, None)
}

pub fn run_pipeline(n: &BigInt, cfg: &PipelineConfig, mode: Mode, cancel: Option<&AtomicBool>) -> Result<PipelineResult> {
    cfg.validate()?;
    if n <= &BigInt::one() {
        return Err(Error::Domain("N must exceed 1".into()));
    }
    let nu = n.magnitude().clone();
    if mode == Mode::NotSquarefull && nu.is_even() {
        return Err(Error::Domain("not-squarefull mode needs odd N".into()));
    }
    // strip one factor 2; 4 | N is already a square factor
    let m: BigUint = if nu.is_even() {
        if (&nu % 4u32).is_zero() {
            return Ok(conclusive(
                square_factor_cert(n, &BigInt::from(nu.clone()), BigInt::from(2), cfg),
                None,
                Vec::new(),
                "4 divides N",
            ));
        }
        &nu / 2u32
    } else {
        nu.clone()
    };
    let odd = BigInt::from(m.clone());
    if m.is_one() {
        let mut c = square_factor_cert(n, &odd, BigInt::one(), cfg);
        c.conclusion = Conclusion::Squarefree;
        c.square_factor = None;
        c.not_square = true;
        c.not_cube = true;
        return Ok(conclusive(c, None, Vec::new(), "N = 2"));
    }
    if let Some(r) = is_perfect_power(&m, 2) {
        return Ok(conclusive(square_factor_cert(n, &odd, BigInt::from(r), cfg), None, Vec::new(), "N is a square"));
    }
    let not_cube = is_perfect_power(&m, 3).is_none();
    if mode == Mode::NotSquarefull && !not_cube {
        return Err(Error::Domain("N is a perfect cube; a cube can be squarefull".into()));
    }
    let ch = CharacterDescriptor::from_odd(&m)?;
    let k_exp = if mode == Mode::NotSquarefull { 3.0 } else { 1.0 };

    let mut best: Option<BoundReport> = None;
    let mut checked: u64 = 1;
    let mut trace = Vec::new();
    let start = Stopwatch::start();

    // outcome of one evaluation round
    let finish = |best: &BoundReport, checked: u64, trace: Vec<TraceRow>| -> Result<Option<PipelineResult>> {
        let need = required_bound(&m, best.lower_bound, k_exp, cfg.slack);
        let mut b = checked;
        if (b as f64) < need {
            let target = need.ceil();
            if target > cfg.trial_division_max as f64 {
                return Ok(None);
            }
            let (fac, _) = trial_divide(&m, target as u64);
            if let Some(&(p, _)) = fac.iter().find(|&&(_, e)| e > 1) {
                return Ok(Some(conclusive(
                    square_factor_cert(n, &odd, BigInt::from(p), cfg),
                    Some(best.clone()),
                    trace,
                    "trial division found a square factor",
                )));
            }
            b = target as u64;
        }
        let cert = Certificate {
            version: CERTIFICATE_VERSION,
            tool: TOOL.into(),
            n: n.clone(),
            conclusion: if mode == Mode::Squarefree { Conclusion::Squarefree } else { Conclusion::NotSquarefull },
            odd_part: odd.clone(),
            q: best.q.clone(),
            spec: Some(best.spec.clone()),
            bound_report: Some(best.clone()),
            factor_checked_to: BigInt::from(b),
            not_square: true,
            not_cube,
            square_factor: None,
            grh_conditional: true,
            envelope: cfg.envelope,
            slack: cfg.slack,
        };
        Ok(Some(conclusive(cert, Some(best.clone()), trace, "")))
    };

    if let Some(spec) = &cfg.fixed_spec {
        let f = spec.compile()?;
        let rep = lower_bound_with(&ch, &BigInt::one(), &f, cfg.prime_budget)?;
        if let Some(r) = rep.square_factor_found.clone() {
            return Ok(conclusive(square_factor_cert(n, &odd, r, cfg), Some(rep), trace, "chi vanished at a square"));
        }
        checked = rep.primes_checked_to;
        trace.push(TraceRow {
            round: 1,
            q_max: 1,
            x: f.support(),
            candidates: 1,
            round_q: BigInt::one(),
            round_bound: rep.lower_bound,
            best_bound: rep.lower_bound,
            new_best: true,
            seconds: start.seconds(),
        });
        if let Some(done) = finish(&rep, checked, trace.clone())? {
            return Ok(done);
        }
        let need = required_bound(&m, rep.lower_bound, k_exp, cfg.slack);
        return Ok(PipelineResult {
            certificate: None,
            best: Some(rep),
            required_b: Some(need),
            factor_checked_to: checked,
            trace,
            note: "fixed test function too weak for the factor budget".into(),
            interrupted: false,
        });
    }

    let loglog = log_abs(&odd).ln().max(1.0);
    let nu_theory = 0.5 * loglog + 1.0 / (12.0 * loglog);
    let x_cap = (cfg.prime_budget as f64).ln();
    let mut qv: u64 = 1;
    let cancelled = || cancel.is_some_and(|c| c.load(std::sync::atomic::Ordering::SeqCst));
    let mut interrupted = false;
    for round in 1..=cfg.max_rounds {
        if cancelled() {
            interrupted = true;
            break;
        }
        let next = qv.saturating_mul(cfg.q_base).min(cfg.q_max);
        if next == qv && round > 1 {
            break;
        }
        qv = next;
        let lq = (qv.max(3) as f64).ln();
        let x = if cfg.theoretical { 4.0 * nu_theory * lq } else { (cfg.x_scale * lq).max(cfg.x_min) }.min(x_cap);
        let x_short = x.min(cfg.x_short_max);
        let mut scfg = SearchConfig::new(qv);
        let pool = 1.2 * qv as f64 + 1.0;
        scfg.stages = vec![Stage { x_short, keep_fraction: (cfg.refine_count as f64 / pool).clamp(1e-9, 1.0) }];
        scfg.short_spec = TestFunctionSpec::triangle(x_short);
        scfg.prime_budget = cfg.prime_budget;
        let ctl = SearchControl { cancel, checkpoint_every: 0 };
        let out = match staged_search_with(&ch, &scfg, &ctl) {
            Err(Error::Interrupted(_)) => {
                interrupted = true;
                break;
            }
            r => r?,
        };
        if let Some(r) = out.square_factor {
            return Ok(conclusive(square_factor_cert(n, &odd, r, cfg), best, trace, "chi vanished at a square"));
        }
        let cands: Vec<BigInt> = out.ranking.iter().take(cfg.refine_count).map(|c| c.q.clone()).collect();
        let reports: Vec<BoundReport> = if cfg.theoretical {
            let spec = TestFunctionSpec::bessel(x, nu_theory);
            let f = spec.compile()?;
            let mut v = Vec::new();
            for q in &cands {
                v.push(lower_bound_with(&ch, q, &f, cfg.prime_budget)?);
            }
            v.sort_by(|a, b| b.lower_bound.total_cmp(&a.lower_bound));
            v
        } else {
            refine_top(&ch, &cands, x, cfg.m, cfg.prime_budget)?.into_iter().map(|r| r.report).collect()
        };
        for r in &reports {
            if let Some(f) = &r.square_factor_found {
                return Ok(conclusive(square_factor_cert(n, &odd, f.clone(), cfg), Some(r.clone()), trace, "chi vanished at a square"));
            }
            checked = checked.max(r.primes_checked_to);
        }
        let top = reports.into_iter().next().ok_or_else(|| Error::Numeric("empty refinement".into()))?;
        let improved = best.as_ref().is_none_or(|b| top.lower_bound > b.lower_bound);
        if improved {
            best = Some(top.clone());
        }
        let b = best.as_ref().expect("set above");
        trace.push(TraceRow {
            round,
            q_max: qv,
            x,
            candidates: out.candidates_scored,
            round_q: top.q.clone(),
            round_bound: top.lower_bound,
            best_bound: b.lower_bound,
            new_best: improved,
            seconds: start.seconds(),
        });
        if let Some(done) = finish(b, checked, trace.clone())? {
            return Ok(done);
        }
    }
    let need = best.as_ref().map(|b| required_bound(&m, b.lower_bound, k_exp, cfg.slack));
    Ok(PipelineResult {
        certificate: None,
        best,
        required_b: need,
        factor_checked_to: checked,
        trace,
        note: if interrupted { "interrupted" } else { "budgets exhausted before the bound sufficed" }.into(),
        interrupted,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status", content = "reason")]
pub enum Verdict {
    Valid,
    Invalid(String),
    Inconclusive(String),
}

impl Verdict {
    pub fn is_valid(&self) -> bool {
        matches!(self, Verdict::Valid)
    }
}

// Sequential prime sum over an odd d with the generic Kronecker symbol, kept
// apart from the parallel residue-table path used by the producer.
fn reference_prime_sum(d: &BigInt, q: &BigInt, f: &TestFunction, limit: u64, check_to: u64) -> (f64, Option<u64>) {
    let qd = q * d;
    let segs = PrimeSegments::new(limit, 1 << 20);
    let mut acc = Kahan::new();
    for i in 0..segs.bounds.len() {
        for p in segs.primes(i) {
            let pb = BigInt::from(p);
            if p <= check_to && (d % (&pb * &pb)).is_zero() {
                return (f64::NAN, Some(p));
            }
            let chi = kronecker(&qd, &pb);
            if chi == 0 {
                continue;
            }
            let lp = (p as f64).ln();
            let mut pk = p as f64;
            let mut c = chi as f64;
            while pk <= limit as f64 {
                let x = pk.ln();
                if x >= f.support() {
                    break;
                }
                acc.add(c * lp / pk.sqrt() * f.g(x));
                pk *= p as f64;
                c *= chi as f64;
            }
        }
    }
    (2.0 * acc.value(), None)
}

/// Re-derive a certificate. `budget` bounds both the prime sum length and
/// the trial-division recheck.
pub fn verify_certificate(cert: &Certificate, budget: u64) -> Verdict {
    use Verdict::*;
    if cert.version != CERTIFICATE_VERSION {
        return Invalid(format!("unknown certificate version {}", cert.version));
    }
    let n = cert.n.magnitude().clone();
    if n <= BigUint::one() {
        return Invalid("N must exceed 1".into());
    }
    let m = if n.is_even() && !(&n % 4u32).is_zero() { &n / 2u32 } else { n.clone() };
    if cert.conclusion == Conclusion::SquareFactor {
        let Some(r) = &cert.square_factor else { return Invalid("missing square factor".into()) };
        let r = r.magnitude();
        if r <= &BigUint::one() {
            return Invalid("square factor must exceed 1".into());
        }
        return if (&n % (r * r)).is_zero() { Valid } else { Invalid(format!("{r}^2 does not divide N")) };
    }
    if cert.square_factor.is_some() {
        return Invalid("square factor recorded on a non-factor certificate".into());
    }
    if n.is_even() && (&n % 4u32).is_zero() {
        return Invalid("4 divides N".into());
    }
    if cert.odd_part != BigInt::from(m.clone()) {
        return Invalid("odd part does not match N".into());
    }
    if !cert.grh_conditional && !m.is_one() {
        return Invalid("bound-based certificates are GRH-conditional".into());
    }
    if m.is_one() {
        return Valid;
    }
    if is_perfect_power(&m, 2).is_some() || !cert.not_square {
        return Invalid("N is a perfect square".into());
    }
    let cube = is_perfect_power(&m, 3).is_some();
    if cert.not_cube == cube {
        return Invalid("cube attestation is wrong".into());
    }
    if cert.conclusion == Conclusion::NotSquarefull && cube {
        return Invalid("a cube can be squarefull".into());
    }
    let (Some(spec), Some(rep)) = (&cert.spec, &cert.bound_report) else {
        return Invalid("missing test function or bound report".into());
    };
    if &rep.spec != spec || rep.q != cert.q || rep.d.magnitude() != &m {
        return Invalid("bound report does not match the certificate".into());
    }
    let Ok(ch) = CharacterDescriptor::from_odd(&m) else { return Invalid("bad odd part".into()) };
    if rep.d != ch.d {
        return Invalid("character does not match N".into());
    }
    if cert.q.is_zero() {
        return Invalid("twist q must be nonzero".into());
    }
    let f = match spec.compile() {
        Ok(f) => f,
        Err(e) => return Invalid(format!("bad test function: {e}")),
    };
    let limit = match prime_limit(f.support(), budget) {
        Ok(l) => l,
        Err(e) => return Inconclusive(e.to_string()),
    };
    let Some(b) = cert.factor_checked_to.to_u64() else { return Inconclusive("factor bound exceeds 64 bits".into()) };
    if b > budget {
        return Inconclusive(format!("rechecking squares to {b} exceeds the budget {budget}"));
    }
    let (ps, sq) = reference_prime_sum(&ch.d, &cert.q, &f, limit, b.min(limit));
    if let Some(p) = sq {
        return Invalid(format!("{p}^2 divides N"));
    }
    // trial-division part of the check beyond the prime sum
    if b > limit {
        let (fac, _) = trial_divide(&m, b);
        if let Some(&(p, _)) = fac.iter().find(|&&(_, e)| e > 1) {
            return Invalid(format!("{p}^2 divides N"));
        }
    }
    let arch = match arch_terms_with(&f, twisted_parity(&ch.d, &cert.q)) {
        Ok(a) => a,
        Err(e) => return Inconclusive(e.to_string()),
    };
    let pen = log_abs(&cert.q);
    let l = ps + arch - pen;
    let tol = cert.slack.max(1e-9);
    if (ps - rep.prime_sum).abs() > tol || (arch - rep.arch_terms).abs() > tol || (pen - rep.twist_penalty).abs() > 1e-9 {
        return Invalid(format!("recomputed terms ({ps}, {arch}) differ from the report"));
    }
    if (rep.lower_bound - BoundReport::compose(rep.prime_sum, rep.arch_terms, rep.twist_penalty)).abs() > 1e-9 {
        return Invalid("reported bound is not the sum of its terms".into());
    }
    if (l - rep.lower_bound).abs() > tol {
        return Invalid(format!("recomputed bound {l} differs from {}", rep.lower_bound));
    }
    // B^2 e^{k(L - slack)} >= m, exactly, with e^x rounded down
    let k = if cert.conclusion == Conclusion::NotSquarefull { 3.0 } else { 1.0 };
    let expo = k * (rep.lower_bound.min(l) - cert.slack);
    let e_lo = expo.exp() * (1.0 - 1e-14);
    let Some(e_lo) = BigRational::from_float(e_lo.max(0.0)) else { return Inconclusive("overflow in e^L".into()) };
    let bb = BigRational::from_integer(BigInt::from(b) * BigInt::from(b));
    if bb * e_lo < BigRational::from_integer(BigInt::from(m)) {
        return Invalid("factor bound B is below sqrt(N / e^L)".into());
    }
    Valid
}
