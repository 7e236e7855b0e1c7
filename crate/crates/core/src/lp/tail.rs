//! Bounds for the part of the zero sum above a height T.

use crate::error::Result;
use crate::quad::{integrate, integrate_pieces};
use crate::testfn::{TestFunction, TestFunctionSpec};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Zero-counting envelope: the number of zeros with 0 < gamma <= t differs
/// from (t/2pi) log(k t / (2 pi e)) by at most c1 log(k (t + 2)) + c2, t >= 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub c1: f64,
    pub c2: f64,
}

impl Default for Envelope {
    /// Half of McCurley's constants (which count zeros of both signs), rounded up.
    fn default() -> Self {
        Envelope { c1: 0.5, c2: 3.0 }
    }
}

impl Envelope {
    pub fn error(&self, modulus_log: f64, t: f64) -> f64 {
        self.c1 * (modulus_log + (t + 2.0).ln()) + self.c2
    }
}

/// Smooth main term of the zero count.
pub fn smooth_count(modulus_log: f64, t: f64) -> f64 {
    t / (2.0 * PI) * (modulus_log + (t / (2.0 * PI)).ln() - 1.0)
}

fn smooth_density(modulus_log: f64, t: f64) -> f64 {
    (modulus_log + (t / (2.0 * PI)).ln()) / (2.0 * PI)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailBound {
    pub value: f64,
    /// Set when h decays only like t^-2, so the bound shrinks slowly in T.
    pub loose: bool,
}

/// Upper bound for 2 * sum over zeros gamma >= T of h(gamma), default envelope.
pub fn tail_bound(spec: &TestFunctionSpec, t: f64, modulus_log: f64) -> Result<f64> {
    Ok(tail_bound_with(&spec.compile()?, t, modulus_log, &Envelope::default())?.value)
}

// int_a^inf t^-p log(t) dt for a >= 1, p > 1
fn log_power_tail(a: f64, p: f64) -> f64 {
    a.powf(1.0 - p) / (p - 1.0) * (a.ln() + 1.0 / (p - 1.0))
}

pub fn tail_bound_with(f: &TestFunction, t: f64, modulus_log: f64, env: &Envelope) -> Result<TailBound> {
    let t_lo = t.max(1.0);
    let x = f.support();
    let chunk = PI / x;
    let t_end = f.envelope_start().max(t_lo + 400.0 * chunk);

    // Partial summation: int h dN <= int h M' + h(T) E(T) + int E |h'|, and
    // h(T) E(T) <= int E |h'| because E is increasing.
    let dens = |s: f64| f.h(s) * smooth_density(modulus_log, s).max(0.0);
    let var = |s: f64| env.error(modulus_log, s) * f.h_deriv(s).abs();
    let n = ((t_end - t_lo) / chunk).ceil().max(1.0) as usize;
    let step = (t_end - t_lo) / n as f64;
    let mut main = 0.0;
    let mut err = 0.0;
    for i in 0..n {
        let a = t_lo + i as f64 * step;
        let b = if i + 1 == n { t_end } else { a + step };
        main += integrate(dens, a, b, 1e-13)?;
        err += integrate(var, a, b, 1e-13)?;
    }

    let (amp, d_amp, p) = f.decay_envelope(t_end);
    let ln_c = modulus_log - (2.0 * PI).ln();
    let a = t_end.max((-ln_c).exp());
    let main_tail = amp / (2.0 * PI) * a.powf(1.0 - p) / (p - 1.0) * (a.ln() + ln_c + 1.0 / (p - 1.0));
    let err_tail = d_amp
        * (env.c1 * (log_power_tail(t_end, p) + (1.0 + 2.0 / t_end).ln() * t_end.powf(1.0 - p) / (p - 1.0))
            + (env.c1 * modulus_log + env.c2) * t_end.powf(1.0 - p) / (p - 1.0));

    let mut value = 2.0 * (main + main_tail + 2.0 * (err + err_tail));
    if t < 1.0 {
        // zeros in [T, 1): at most N(1) of them, each with h <= 2 int |g|
        let h_sup = 2.0 * integrate_pieces(|s| f.g(s).abs(), &f.breakpoints(), 1e-12)?;
        let count = smooth_count(modulus_log, 1.0).max(0.0) + env.error(modulus_log, 1.0);
        value += 2.0 * h_sup * count;
    }
    Ok(TailBound { value, loose: p <= 2.0 })
}
