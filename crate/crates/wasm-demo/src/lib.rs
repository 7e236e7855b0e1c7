//! Browser bindings: evaluate a single lower bound, certify a small N, and
//! estimate a USp(2N) gap probability. Every entry point returns JSON text.

use num_bigint::BigInt;
use serde_json::{json, Value};
use sqfree::certify::{certify_squarefree, verify_certificate, PipelineConfig};
use sqfree::explicit::lower_bound;
use sqfree::integer::CharacterDescriptor;
use sqfree::rmt::{gap_probability_mc, usp2_gap, uspgap_bounds, Ensemble};
use sqfree::testfn::TestFunctionSpec;
use wasm_bindgen::prelude::*;

// keeps each call well under a second in the browser
const PRIME_BUDGET: u64 = 2_000_000;
const MAX_SAMPLES: usize = 200_000;
const TRIAL_MAX: u64 = 10_000_000;

fn wrap(r: Result<Value, String>) -> String {
    match r {
        Ok(v) => json!({ "ok": true, "result": v }).to_string(),
        Err(e) => json!({ "ok": false, "error": e }).to_string(),
    }
}

fn parse_int(s: &str) -> Result<BigInt, String> {
    s.trim().replace('_', "").parse().map_err(|_| format!("not an integer: {s:?}"))
}

pub fn bound_json(d: &str, q: &str, x: f64) -> Result<Value, String> {
    let ch = CharacterDescriptor::new(parse_int(d)?).map_err(|e| e.to_string())?;
    let q = parse_int(q)?;
    let r = lower_bound(&ch, &q, &TestFunctionSpec::triangle(x), PRIME_BUDGET).map_err(|e| e.to_string())?;
    Ok(json!({
        "prime_sum": r.prime_sum,
        "arch_terms": r.arch_terms,
        "twist_penalty": r.twist_penalty,
        "lower_bound": r.lower_bound,
        "conductor_at_least": r.lower_bound.exp(),
        "square_factor": r.square_factor_found.map(|f| f.to_string()),
    }))
}

pub fn certify_json(n: &str) -> Result<Value, String> {
    let n = parse_int(n)?;
    if n.bits() > 64 {
        return Err("the demo accepts N below 2^64; use the command-line tool for larger N".into());
    }
    let cfg = PipelineConfig { q_max: 1 << 12, max_rounds: 12, prime_budget: PRIME_BUDGET, trial_division_max: TRIAL_MAX, m: 16, ..Default::default() };
    let res = certify_squarefree(&n, &cfg).map_err(|e| e.to_string())?;
    let rounds = res.trace.len();
    match res.certificate {
        Some(cert) => {
            let verdict = verify_certificate(&cert, TRIAL_MAX.max(PRIME_BUDGET));
            Ok(json!({
                "status": "certified",
                "rounds": rounds,
                "verdict": verdict,
                "certificate": cert,
            }))
        }
        None => Ok(json!({ "status": "inconclusive", "rounds": rounds, "note": res.note })),
    }
}

pub fn gap_json(n: usize, s: f64, samples: usize, seed: u64) -> Result<Value, String> {
    let samples = samples.min(MAX_SAMPLES);
    let est = gap_probability_mc(Ensemble::USp, n, s, samples, seed).map_err(|e| e.to_string())?;
    let b = uspgap_bounds(n, s).map_err(|e| e.to_string())?;
    Ok(json!({
        "estimate": est.estimate,
        "stderr": est.stderr,
        "samples": est.samples,
        "lower": b.lower,
        "upper": b.upper,
        "exact": (n == 1).then(|| usp2_gap(s)),
    }))
}

#[wasm_bindgen]
pub fn bound(d: &str, q: &str, x: f64) -> String {
    wrap(bound_json(d, q, x))
}

#[wasm_bindgen]
pub fn certify(n: &str) -> String {
    wrap(certify_json(n))
}

#[wasm_bindgen]
pub fn usp_gap(n: usize, s: f64, samples: usize, seed: u32) -> String {
    wrap(gap_json(n, s, samples, seed as u64))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_bound() {
        let v = bound_json("1548889", "1", 3.5).unwrap();
        let l = v["lower_bound"].as_f64().unwrap();
        assert!((7.3..7.7).contains(&l));
    }

    #[test]
    fn certify_small() {
        let v = certify_json("1548889").unwrap();
        assert_eq!(v["status"], "certified");
        assert_eq!(v["verdict"]["status"], "valid");
        let v = certify_json("999999999999999989").unwrap();
        assert_eq!(v["verdict"]["status"], "valid", "{v}");
        let v = certify_json("45").unwrap();
        assert_eq!(v["certificate"]["square_factor"], "3");
        let bad: Value = serde_json::from_str(&certify("1e9")).unwrap();
        assert_eq!(bad["ok"], false);
    }

    #[test]
    fn gap_against_closed_form() {
        let v = gap_json(1, 1.0, 20_000, 1).unwrap();
        let (p, se) = (v["estimate"].as_f64().unwrap(), v["stderr"].as_f64().unwrap());
        assert!((p - v["exact"].as_f64().unwrap()).abs() < 5.0 * se);
    }
}
