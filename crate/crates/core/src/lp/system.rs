//! The binned linear system: for each test function (g_k, h_k),
//!
//!   2 sum_v m(v) h_k^-(v) - E_k <= g_k(0) logd + g_k(0) log|q| - P_k <= 2 sum_v m(v) h_k^+(v) + E_k,
//!
//! with m(v) half the number of zeros in the bin [v T/V, (v+1) T/V).

use super::simplex::{floor_f64, LinearProgram, Row, Status};
use super::tail::{tail_bound_with, Envelope};
use crate::error::{Error, Result};
use crate::explicit::{arch_terms_with, log_abs, prime_sum_with, twisted_parity};
use crate::integer::CharacterDescriptor;
use crate::quad::integrate_pieces;
use crate::testfn::{TestFunction, TestFunctionSpec};
use num_bigint::BigInt;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

pub const DEFAULT_NODE_BUDGET: usize = 100_000;
const GRID: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Both,
    /// Only the inequality that bounds logd from below.
    LowerOnly,
    UpperOnly,
}

impl Direction {
    fn lower(self) -> bool {
        self != Direction::UpperOnly
    }
    fn upper(self) -> bool {
        self != Direction::LowerOnly
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RhsTerm {
    pub g0: f64,
    /// Prime sum plus archimedean terms for chi_{qd}.
    pub p: f64,
    pub tail: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LPSystem {
    #[serde(rename = "T")]
    pub t: f64,
    #[serde(rename = "V")]
    pub v: usize,
    pub delta_bin: f64,
    pub h_minus: Vec<Vec<f64>>,
    pub h_plus: Vec<Vec<f64>>,
    pub rhs_terms: Vec<RhsTerm>,
    pub directions: Vec<Direction>,
    pub integer_bin_count: usize,
    #[serde(with = "crate::bigint_serde")]
    pub q: BigInt,
    pub log_q: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualCertificate {
    /// Multiplier per constraint row, as exact rationals "p/q".
    pub multipliers: Vec<String>,
    pub bound: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LPSolution {
    /// Rounded down from the exact optimum; None when infeasible.
    pub logd_lower: Option<f64>,
    pub logd_exact: Option<String>,
    pub m: Vec<f64>,
    pub status: Status,
    pub dual_certificate: Option<DualCertificate>,
    pub nodes: usize,
    pub audit: Vec<super::simplex::AuditEntry>,
}

// sup |h'| <= 2 int_0^X x |g(x)| dx
fn lipschitz(f: &TestFunction) -> Result<f64> {
    Ok(2.0 * integrate_pieces(|x| x * f.g(x).abs(), &f.breakpoints(), 1e-12)? * (1.0 + 1e-9))
}

/// Inner and outer bin values of h over [lo, hi].
pub fn bin_extrema(f: &TestFunction, lo: f64, hi: f64, lip: f64, h_sup: f64) -> (f64, f64) {
    let step = (hi - lo) / (GRID - 1) as f64;
    let (mut mn, mut mx) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..GRID {
        let v = f.h(lo + i as f64 * step);
        mn = mn.min(v);
        mx = mx.max(v);
    }
    let pad = lip * step / 2.0 + 1e-12 * h_sup;
    ((mn - pad).max(0.0), (mx + pad).min(h_sup))
}

pub fn build_lp_system(
    ch: &CharacterDescriptor,
    q: &BigInt,
    specs: &[TestFunctionSpec],
    t: f64,
    v: usize,
    integer_bin_count: usize,
    directions: &[Direction],
    prime_budget: u64,
    env: &Envelope,
) -> Result<LPSystem> {
    if v == 0 || !(t > 0.0) || specs.is_empty() {
        return Err(Error::Domain("need V >= 1, T > 0 and at least one test function".into()));
    }
    if directions.len() != specs.len() {
        return Err(Error::Domain("one direction flag per test function".into()));
    }
    if integer_bin_count > v {
        return Err(Error::Domain("integer_bin_count exceeds V".into()));
    }
    let delta = t / v as f64;
    let log_q = log_abs(q);
    let modulus_log = log_abs(&ch.d) + log_q;
    let parity = twisted_parity(&ch.d, q);
    let mut sys = LPSystem {
        t,
        v,
        delta_bin: delta,
        h_minus: Vec::new(),
        h_plus: Vec::new(),
        rhs_terms: Vec::new(),
        directions: directions.to_vec(),
        integer_bin_count,
        q: q.clone(),
        log_q,
    };
    for spec in specs {
        let f = spec.compile()?;
        let ps = prime_sum_with(ch, q, &f, prime_budget)?;
        if let Some(r) = ps.square_factor {
            return Err(Error::Data(format!("{r}^2 divides d")));
        }
        let arch = arch_terms_with(&f, parity)?;
        let tail = tail_bound_with(&f, t, modulus_log, env)?.value;
        let lip = lipschitz(&f)?;
        let h_sup = 2.0 * integrate_pieces(|x| f.g(x).abs(), &f.breakpoints(), 1e-12)? * (1.0 + 1e-9);
        let (hm, hp): (Vec<f64>, Vec<f64>) =
            (0..v).map(|i| bin_extrema(&f, i as f64 * delta, (i + 1) as f64 * delta, lip, h_sup)).unzip();
        sys.h_minus.push(hm);
        sys.h_plus.push(hp);
        sys.rhs_terms.push(RhsTerm { g0: f.g(0.0), p: ps.sum + arch, tail });
    }
    Ok(sys)
}

impl LPSystem {
    pub fn k(&self) -> usize {
        self.rhs_terms.len()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.k();
        let ok = self.h_minus.len() == k
            && self.h_plus.len() == k
            && self.directions.len() == k
            && self.integer_bin_count <= self.v
            && self.h_minus.iter().chain(&self.h_plus).all(|r| r.len() == self.v)
            && self
                .h_minus
                .iter()
                .zip(&self.h_plus)
                .all(|(a, b)| a.iter().zip(b).all(|(x, y)| x <= y));
        if ok {
            Ok(())
        } else {
            Err(Error::Domain("malformed LP system".into()))
        }
    }

    /// Variables: logd (free), then m0..m{V-1}.
    pub fn to_program(&self) -> LinearProgram {
        let v = self.v;
        let mut names = vec!["logd".to_string()];
        names.extend((0..v).map(|i| format!("m{i}")));
        let mut objective = vec![0.0; v + 1];
        objective[0] = 1.0;
        let mut rows = Vec::new();
        for (k, r) in self.rhs_terms.iter().enumerate() {
            let base = r.g0 * self.log_q - r.p;
            if self.directions[k].lower() {
                let mut coeffs = vec![-r.g0];
                coeffs.extend(self.h_minus[k].iter().map(|h| 2.0 * h));
                rows.push(Row { name: format!("lo{k}"), coeffs, rhs: base + r.tail });
            }
            if self.directions[k].upper() {
                let mut coeffs = vec![r.g0];
                coeffs.extend(self.h_plus[k].iter().map(|h| -2.0 * h));
                rows.push(Row { name: format!("up{k}"), coeffs, rhs: r.tail - base });
            }
        }
        let mut free = vec![false; v + 1];
        free[0] = true;
        let mut integer = vec![false; v + 1];
        for flag in integer.iter_mut().skip(1).take(self.integer_bin_count) {
            *flag = true;
        }
        LinearProgram { names, objective, rows, free, integer }
    }

    /// Largest constraint violation at (logd, m), in f64.
    pub fn violation(&self, logd: f64, m: &[f64]) -> f64 {
        let prog = self.to_program();
        let mut x = vec![logd];
        x.extend_from_slice(m);
        prog.rows
            .iter()
            .map(|r| r.coeffs.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() - r.rhs)
            .fold(0.0, f64::max)
    }

    /// The bound with every m(v) forced to zero: max_k (P_k - E_k)/g_k(0) - log|q|.
    pub fn no_zero_bound(&self) -> f64 {
        self.rhs_terms
            .iter()
            .zip(&self.directions)
            .filter(|(_, d)| d.lower())
            .map(|(r, _)| (r.p - r.tail) / r.g0 - self.log_q)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

pub fn solve_lp(sys: &LPSystem, max_nodes: usize) -> Result<LPSolution> {
    sys.validate()?;
    let prog = sys.to_program();
    let res = prog.solve(max_nodes);
    let to_f = |x: &[super::simplex::Q]| x[1..].iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect::<Vec<_>>();
    let dual_certificate = res.duals.as_ref().map(|y| DualCertificate {
        multipliers: y.iter().map(|v| v.to_string()).collect(),
        bound: res.bound.as_ref().map(|b| b.to_string()).unwrap_or_default(),
    });
    Ok(LPSolution {
        logd_lower: res.bound.as_ref().map(floor_f64),
        logd_exact: res.bound.as_ref().map(|b| b.to_string()),
        m: res.x.as_deref().map(to_f).unwrap_or_default(),
        status: res.status,
        dual_certificate,
        nodes: res.nodes,
        audit: res.audit,
    })
}

/// Recompute the bound certified by a dual certificate against the system.
pub fn check_dual(sys: &LPSystem, cert: &DualCertificate) -> Option<f64> {
    let prog = sys.to_program();
    let (c, a, b) = prog.exact();
    let y: Vec<super::simplex::Q> = cert.multipliers.iter().map(|s| s.parse().ok()).collect::<Option<_>>()?;
    super::simplex::dual_bound(&c, &a, &b, &prog.free, &y).map(|q| floor_f64(&q))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(h: f64) -> LPSystem {
        LPSystem {
            t: 0.01,
            v: 1,
            delta_bin: 0.01,
            h_minus: vec![vec![h]],
            h_plus: vec![vec![h]],
            rhs_terms: vec![RhsTerm { g0: 2.0, p: 10.0, tail: 0.5 }],
            directions: vec![Direction::LowerOnly],
            integer_bin_count: 0,
            q: BigInt::from(-3),
            log_q: 3f64.ln(),
        }
    }

    #[test]
    fn degenerate_one_bin() {
        let sys = toy(0.0);
        let sol = solve_lp(&sys, 10).unwrap();
        let want = (10.0 - 0.5) / 2.0 - 3f64.ln();
        assert!((sol.logd_lower.unwrap() - want).abs() < 1e-12);
        assert!((sys.no_zero_bound() - want).abs() < 1e-12);
        let cert = sol.dual_certificate.unwrap();
        assert_eq!(check_dual(&sys, &cert), sol.logd_lower);
    }

    #[test]
    fn builder_extrema_bracket_midpoints() {
        let ch = CharacterDescriptor::from_i64(1548889).unwrap();
        let specs: Vec<_> = (1..=3).map(|k| TestFunctionSpec::sinc_power(3.5, k)).collect();
        let dirs = vec![Direction::Both; 3];
        let sys = build_lp_system(&ch, &BigInt::from(1), &specs, 4.0, 20, 5, &dirs, 1 << 30, &Envelope::default()).unwrap();
        sys.validate().unwrap();
        for (k, s) in specs.iter().enumerate() {
            let f = s.compile().unwrap();
            for v in 0..20 {
                let mid = f.h((v as f64 + 0.5) * 0.2);
                assert!(sys.h_minus[k][v] <= mid && mid <= sys.h_plus[k][v]);
            }
        }
    }
}
