//! Subcommand dispatch. Every artifact carries a header with the tool
//! version, the configuration hash and, where it applies, the GRH flag.

use crate::config::*;
use num_bigint::BigInt;
use serde::Serialize;
use serde_json::{json, Value};
use sqfree::certify::{run_pipeline, trace_csv, verify_certificate, Certificate, Mode, PipelineConfig, Verdict};
use sqfree::explicit::{geometric_grid, lower_bound, theta_scan};
use sqfree::integer::CharacterDescriptor;
use sqfree::lattice::{build_twist_lattice, extract_characters, lll_reduce, rows_to_text};
use sqfree::lp::{build_lp_system, export_lp, solve_lp, Direction, Envelope, Status};
use sqfree::rmt::{self, Ensemble, MaxGapOptions};
use sqfree::testfn::TestFunctionSpec;
use sqfree::twist::{default_lineup, staged_search_with, SearchConfig, SearchControl, Stage};
use sqfree::{Error, Result};
use std::fmt::Write as _;
use std::sync::atomic::AtomicBool;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_PARTIAL: i32 = 2;

pub const TOOL_VERSION: &str = concat!("sqfree-cli ", env!("CARGO_PKG_VERSION"));

/// Positive integer in decimal, underscores allowed.
pub fn parse_positive(s: &str) -> Result<BigInt> {
    let digits: String = s.chars().filter(|&c| c != '_').collect();
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return Err(Error::Parse(format!("{s:?} is not a positive decimal integer")));
    }
    let n: BigInt = digits.parse().map_err(|_| Error::Parse(format!("cannot parse {s:?}")))?;
    if n <= BigInt::from(0) {
        return Err(Error::Parse("N must be positive".into()));
    }
    Ok(n)
}

fn parse_int(s: &str) -> Result<BigInt> {
    let t: String = s.chars().filter(|&c| c != '_').collect();
    t.parse().map_err(|_| Error::Parse(format!("{s:?} is not an integer")))
}

/// A discriminant, or an odd positive N mapped to (-1)^((N-1)/2) N.
fn descriptor(s: &str) -> Result<CharacterDescriptor> {
    let d = parse_int(s)?;
    CharacterDescriptor::new(d.clone()).or_else(|e| {
        if d > BigInt::from(0) && d.bit(0) {
            CharacterDescriptor::from_odd(d.magnitude())
        } else {
            Err(e)
        }
    })
}

fn spec(f: &FamilyOpts, x: f64) -> TestFunctionSpec {
    match f.family {
        FamilyArg::Triangle => TestFunctionSpec::triangle(x),
        FamilyArg::Bessel => TestFunctionSpec::bessel(x, f.nu),
        FamilyArg::GAlpha => TestFunctionSpec::g_alpha(x),
        FamilyArg::Sinc => TestFunctionSpec::sinc_power(x, f.k),
    }
}

fn ensemble(e: EnsembleArg) -> Ensemble {
    match e {
        EnsembleArg::Usp => Ensemble::USp,
        EnsembleArg::U => Ensemble::U,
        EnsembleArg::So => Ensemble::SO,
    }
}

pub fn header(cfg: &RunConfig, grh: Option<bool>) -> Value {
    let mut h = json!({ "tool": TOOL_VERSION, "config_hash": cfg.hash(), "seed": cfg.global.seed });
    if let Some(g) = grh {
        h["grh_conditional"] = json!(g);
    }
    h
}

fn csv_header(cfg: &RunConfig, grh: Option<bool>) -> String {
    let mut s = format!("# tool={TOOL_VERSION}\n# config_hash={}\n# seed={}\n", cfg.hash(), cfg.global.seed);
    if let Some(g) = grh {
        let _ = writeln!(s, "# grh_conditional={g}");
    }
    s
}

fn write_out(cfg: &RunConfig, text: &str) -> Result<()> {
    match &cfg.global.out {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn emit_json(cfg: &RunConfig, grh: Option<bool>, key: &str, value: impl Serialize) -> Result<()> {
    let doc = json!({ "header": header(cfg, grh), key: value });
    write_out(cfg, &(serde_json::to_string_pretty(&doc)? + "\n"))
}

fn emit_csv(cfg: &RunConfig, grh: Option<bool>, body: &str) -> Result<()> {
    write_out(cfg, &(csv_header(cfg, grh) + body))
}

/// Run one configuration; returns the process exit code.
pub fn run(cfg: &RunConfig, cancel: &AtomicBool) -> i32 {
    match dispatch(cfg, cancel) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Budget(_) | Error::Interrupted(_) => EXIT_PARTIAL,
                _ => EXIT_ERROR,
            }
        }
    }
}

fn dispatch(cfg: &RunConfig, cancel: &AtomicBool) -> Result<i32> {
    let g = &cfg.global;
    match &cfg.command {
        Command::Certify(a) => certify(cfg, a, cancel),
        Command::Verify(a) => verify(cfg, a),
        Command::ScanTwists(a) => scan(cfg, a, cancel),
        Command::Lattice(a) => lattice(cfg, a),
        Command::Lp(a) => lp(cfg, a),
        Command::Rmt(a) => rmt_cmd(cfg, &a.op),
        Command::Theta(a) => {
            let ch = descriptor(&a.d)?;
            let hi = a.hi.unwrap_or_else(|| (2.0 * (0.5 * sqfree::explicit::log_abs(&ch.d)).exp()).min(400.0)).max(a.lo);
            let scan = theta_scan(&ch, &geometric_grid(a.lo, hi, a.points), a.terms_budget)?;
            emit_json(cfg, None, "theta_scan", scan)?;
            Ok(EXIT_OK)
        }
        Command::Curve(a) => {
            let ch = descriptor(&a.d)?;
            let q = parse_int(&a.q)?;
            let mut body = String::from("X,lower_bound,prime_sum,arch_terms,twist_penalty\n");
            let n = a.points.max(2);
            for i in 0..n {
                let x = a.x_from + (a.x_to - a.x_from) * i as f64 / (n - 1) as f64;
                let r = lower_bound(&ch, &q, &spec(&a.family, x), g.prime_budget)?;
                if let Some(f) = r.square_factor_found {
                    return Err(Error::Data(format!("{f}^2 divides d")));
                }
                let _ = writeln!(body, "{x},{},{},{},{}", r.lower_bound, r.prime_sum, r.arch_terms, r.twist_penalty);
            }
            emit_csv(cfg, Some(true), &body)?;
            Ok(EXIT_OK)
        }
    }
}

fn certify(cfg: &RunConfig, a: &CertifyArgs, cancel: &AtomicBool) -> Result<i32> {
    let n = parse_positive(&a.n)?;
    let pc = PipelineConfig {
        q_max: a.q_max,
        max_rounds: a.rounds,
        x_scale: a.x_scale,
        refine_count: a.refine_count,
        m: a.m,
        prime_budget: cfg.global.prime_budget,
        trial_division_max: a.trial_max,
        fixed_spec: a.x.map(|x| spec(&a.family, x)),
        theoretical: a.theoretical,
        slack: cfg.global.slack,
        ..Default::default()
    };
    let mode = match a.mode {
        ModeArg::Squarefree => Mode::Squarefree,
        ModeArg::NotSquarefull => Mode::NotSquarefull,
    };
    let res = run_pipeline(&n, &pc, mode, Some(cancel))?;
    if let Some(path) = &a.trace {
        std::fs::write(path, csv_header(cfg, Some(true)) + &trace_csv(&res.trace))?;
    }
    match &res.certificate {
        Some(c) => {
            if res.note.is_empty() {
                eprintln!("{:?}", c.conclusion);
            } else {
                eprintln!("{:?}: {}", c.conclusion, res.note);
            }
            emit_json(cfg, Some(c.grh_conditional), "certificate", c)?;
            Ok(EXIT_OK)
        }
        None => {
            eprintln!("no certificate: {}", res.note);
            emit_json(cfg, Some(true), "partial", &res)?;
            Ok(EXIT_PARTIAL)
        }
    }
}

/// Accepts a bare certificate or one wrapped with a header.
pub fn read_certificate(text: &str) -> Result<Certificate> {
    let mut v: Value = serde_json::from_str(text)?;
    if let Some(c) = v.get_mut("certificate") {
        return Ok(serde_json::from_value(c.take())?);
    }
    Ok(serde_json::from_value(v)?)
}

fn verify(cfg: &RunConfig, a: &VerifyArgs) -> Result<i32> {
    let cert = read_certificate(&std::fs::read_to_string(&a.certificate)?)?;
    let verdict = verify_certificate(&cert, cfg.global.prime_budget);
    let code = match &verdict {
        Verdict::Valid => EXIT_OK,
        Verdict::Invalid(_) => EXIT_ERROR,
        Verdict::Inconclusive(_) => EXIT_PARTIAL,
    };
    emit_json(cfg, Some(cert.grh_conditional), "verdict", verdict)?;
    Ok(code)
}

fn scan(cfg: &RunConfig, a: &ScanArgs, cancel: &AtomicBool) -> Result<i32> {
    let ch = descriptor(&a.d)?;
    let k = a.stages.max(1);
    let mut sc = SearchConfig::new(a.qmax);
    sc.stages = (1..=k).map(|i| Stage { x_short: a.x_short * i as f64 / k as f64, keep_fraction: a.keep }).collect();
    sc.short_spec = TestFunctionSpec::triangle(a.x_short);
    sc.lineup_primes = match a.lineup.as_str() {
        "none" => Vec::new(),
        "auto" => default_lineup(a.qmax, 1000),
        list => list
            .split(',')
            .map(|p| p.trim().parse::<u64>().map_err(|_| Error::Parse(format!("bad lineup prime {p:?}"))))
            .collect::<Result<_>>()?,
    };
    sc.lineup_parity = a.parity;
    sc.checkpoint_path = a.checkpoint.clone();
    sc.prime_budget = cfg.global.prime_budget;
    let out = staged_search_with(&ch, &sc, &SearchControl { cancel: Some(cancel), checkpoint_every: 0 })?;
    let mut body = String::new();
    if let Some(r) = &out.square_factor {
        let _ = writeln!(body, "# square factor: {r}^2 divides d");
    }
    let _ = writeln!(body, "# baseline (q = 1): {}", out.baseline);
    body += "rank,q,score\n";
    for (i, c) in out.ranking.iter().take(a.top).enumerate() {
        let _ = writeln!(body, "{},{},{}", i + 1, c.q, c.score);
    }
    emit_csv(cfg, Some(true), &body)?;
    Ok(EXIT_OK)
}

fn parse_delta(s: &str) -> Result<(u64, u64)> {
    let (a, b) = s.split_once('/').ok_or_else(|| Error::Parse("delta must be num/den".into()))?;
    let num = a.trim().parse().map_err(|_| Error::Parse("bad delta numerator".into()))?;
    let den = b.trim().parse().map_err(|_| Error::Parse("bad delta denominator".into()))?;
    Ok((num, den))
}

fn lattice(cfg: &RunConfig, a: &LatticeArgs) -> Result<i32> {
    let ch = descriptor(&a.d)?;
    let basis = build_twist_lattice(&ch, a.p, a.q, a.m)?;
    let reduced = lll_reduce(&basis.rows, parse_delta(&a.delta)?)?;
    if let Some(p) = &a.reduced {
        std::fs::write(p, rows_to_text(&reduced))?;
    }
    let found = extract_characters(&ch, &reduced, &basis, a.top);
    let (rows, cols) = basis.dims();
    emit_json(
        cfg,
        None,
        "lattice",
        json!({ "rows": rows, "cols": cols, "primes": basis.primes, "qs": basis.qs, "extracted": found }),
    )?;
    Ok(EXIT_OK)
}

fn lp(cfg: &RunConfig, a: &LpArgs) -> Result<i32> {
    let ch = descriptor(&a.d)?;
    let q = parse_int(&a.q)?;
    let specs: Vec<TestFunctionSpec> = (1..=a.k).map(|k| TestFunctionSpec::sinc_power(a.x, k)).collect();
    let dirs: Vec<Direction> = match &a.directions {
        None => vec![Direction::Both; specs.len()],
        Some(s) => s
            .split(',')
            .map(|d| match d.trim() {
                "both" => Ok(Direction::Both),
                "lower" => Ok(Direction::LowerOnly),
                "upper" => Ok(Direction::UpperOnly),
                o => Err(Error::Parse(format!("unknown direction {o:?}"))),
            })
            .collect::<Result<_>>()?,
    };
    let sys = build_lp_system(&ch, &q, &specs, a.t, a.v, a.int_bins, &dirs, cfg.global.prime_budget, &Envelope::default())?;
    if let Some(p) = &a.export {
        std::fs::write(p, export_lp(&sys))?;
    }
    let sol = solve_lp(&sys, a.node_budget)?;
    let code = if sol.status == Status::BudgetExceeded { EXIT_PARTIAL } else { EXIT_OK };
    emit_json(cfg, Some(true), "lp", json!({ "no_zero_bound": sys.no_zero_bound(), "solution": sol }))?;
    Ok(code)
}

fn rmt_cmd(cfg: &RunConfig, op: &RmtOp) -> Result<i32> {
    let seed = cfg.global.seed;
    match op {
        RmtOp::GapProb { ensemble: e, n, s, samples } => {
            emit_json(cfg, None, "gap_probability", rmt::gap_probability_mc(ensemble(*e), *n, *s, *samples, seed)?)?;
        }
        RmtOp::Sandwich { n, points, samples } => {
            let grid = rmt::interior_grid(*points);
            let mut rows = Vec::new();
            for &k in n {
                rows.extend(rmt::usp_sandwich(k, &grid, *samples, seed)?);
            }
            let csv = rmt::sandwich_csv(&rows, seed);
            // the seed is already in the tool header
            emit_csv(cfg, None, csv.split_once('\n').map_or("", |(_, rest)| rest))?;
        }
        RmtOp::MaxGap { ensemble: e, n, beta, trials, m_cap, no_shortcut, all_spacings } => {
            let opts = MaxGapOptions { m_cap: *m_cap, shortcut: !no_shortcut, all_spacings: *all_spacings };
            emit_json(cfg, None, "max_gap", rmt::max_gap_statistic(ensemble(*e), *n, *beta, *trials, seed, &opts)?)?;
        }
        RmtOp::Factorization { n, s, samples } => {
            let r = rmt::factorization_identity_check(*n, *s, *samples, seed)?;
            let holds = r.holds;
            emit_json(cfg, None, "factorization", r)?;
            return Ok(if holds { EXIT_OK } else { EXIT_ERROR });
        }
        RmtOp::PrimeModel { x, n, samples } => {
            emit_json(cfg, None, "prime_model", rmt::random_prime_model_multi(*x, n, *samples, seed)?)?;
        }
        RmtOp::UCurve { n, s_from, s_to, points, samples, c0 } => {
            let mut body = String::from("s,estimate,stderr,log_prob_model,derivative_model,in_range\n");
            let k = (*points).max(2);
            for i in 0..k {
                let s = s_from + (s_to - s_from) * i as f64 / (k - 1) as f64;
                let g = rmt::gap_probability_mc(Ensemble::U, *n, 2.0 * s, *samples, seed ^ i as u64)?;
                let m = rmt::u_gap_asymptotic(*n, s, *c0);
                let _ = writeln!(
                    body,
                    "{s},{},{},{},{},{}",
                    g.estimate, g.stderr, m.log_prob_model, m.derivative_model, m.in_range
                );
            }
            emit_csv(cfg, None, &body)?;
        }
    }
    Ok(EXIT_OK)
}
