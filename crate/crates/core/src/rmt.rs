//! Eigenphase statistics of Haar-random U(N), SO(2N) and USp(2N).
//!
//! USp(2N) and SO(2N) are sampled by rejection from the Weyl density with a
//! uniform proposal. U(N) is sampled through Verblunsky coefficients: the
//! eigenvalues of a CUE matrix are the zeros of a paraorthogonal polynomial
//! whose coefficients are independent with |alpha_k|^2 ~ Beta(1, N-k-1) and
//! alpha_{N-1} uniform on the circle. Zeros are located through the lifted
//! Pruefer phase, which is strictly increasing in theta.
//!
//! Every Monte Carlo routine takes a master seed; chunk or trial `i` draws
//! from ChaCha8 stream `i` of that seed (see [`stream_rng`]), so results do
//! not depend on the thread count.

use crate::error::{domain, Error, Result};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};
use std::sync::OnceLock;

/// Largest N for the rejection samplers.
pub const N_MAX: usize = 6;
pub const U_N_MAX: usize = 64;
pub const DEFAULT_M_CAP: u64 = 1_000_000;
/// Mean first zero of the twist family relative to 2 pi / log(d / 2 pi).
pub const MEAN_FIRST_ZERO_FACTOR: f64 = 0.78;
pub const WILSON_Z: f64 = 4.0;
const CHUNK: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Ensemble {
    #[serde(rename = "USp")]
    USp,
    U,
    SO,
}

impl Ensemble {
    /// Upper end of the fundamental domain.
    pub fn top(self) -> f64 {
        match self {
            Ensemble::U => TAU,
            _ => PI,
        }
    }

    pub fn label(self, n: usize) -> String {
        match self {
            Ensemble::USp => format!("USp({})", 2 * n),
            Ensemble::SO => format!("SO({})", 2 * n),
            Ensemble::U => format!("U({n})"),
        }
    }

    fn max_n(self) -> usize {
        match self {
            Ensemble::U => U_N_MAX,
            _ => N_MAX,
        }
    }
}

impl std::str::FromStr for Ensemble {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "usp" => Ok(Ensemble::USp),
            "u" => Ok(Ensemble::U),
            "so" => Ok(Ensemble::SO),
            _ => domain(format!("unknown ensemble {s:?}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSample {
    pub ensemble: Ensemble,
    #[serde(rename = "N")]
    pub n: usize,
    /// Ascending; [0, pi] for USp and SO, [0, 2 pi) for U.
    pub phases: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapProbEstimate {
    pub ensemble: Ensemble,
    #[serde(rename = "N")]
    pub n: usize,
    pub s: f64,
    pub estimate: f64,
    pub stderr: f64,
    pub samples: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Rejection,
    Verblunsky,
}

/// ChaCha8 stream `index` of `seed`.
pub fn stream_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(index);
    r
}

fn par_map<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

// ---------------------------------------------------------------------------
// Weyl densities and rejection

/// Unnormalized log density of the ordered-free eigenphases.
pub fn log_weyl(e: Ensemble, phi: &[f64]) -> f64 {
    let n = phi.len();
    let mut v = 0.0;
    match e {
        Ensemble::U => {
            for j in 0..n {
                for k in j + 1..n {
                    let h = ((phi[j] - phi[k]) / 2.0).sin();
                    v += (4.0 * h * h).ln();
                }
            }
        }
        _ => {
            let x: Vec<f64> = phi.iter().map(|p| p.cos()).collect();
            v = log_weyl_x(e, &x);
        }
    }
    v
}

fn log_weyl_x(e: Ensemble, x: &[f64]) -> f64 {
    let mut v = 0.0;
    for j in 0..x.len() {
        for k in j + 1..x.len() {
            v += 2.0 * (x[j] - x[k]).abs().ln();
        }
        if e == Ensemble::USp {
            v += (1.0 - x[j] * x[j]).ln();
        }
    }
    v
}

/// Maximum of [`log_weyl`]. In x = cos(phi) the log density is concave on
/// the ordered chamber, so coordinate ascent finds the global maximum.
pub fn log_weyl_max(e: Ensemble, n: usize) -> f64 {
    if e == Ensemble::U {
        return if n == 0 { 0.0 } else { n as f64 * (n as f64).ln() };
    }
    static CACHE: OnceLock<Vec<f64>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| {
        let mut out = Vec::new();
        for e in [Ensemble::USp, Ensemble::SO] {
            for n in 0..=N_MAX {
                out.push(chamber_max(e, n));
            }
        }
        out
    });
    let base = if e == Ensemble::USp { 0 } else { N_MAX + 1 };
    if n <= N_MAX {
        cache[base + n]
    } else {
        chamber_max(e, n)
    }
}

fn chamber_max(e: Ensemble, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let mut x: Vec<f64> = (0..n).map(|j| -(PI * (j as f64 + 0.5) / n as f64).cos()).collect();
    let mut best = log_weyl_x(e, &x);
    for _ in 0..10_000 {
        for j in 0..n {
            let lo = if j == 0 { -1.0 } else { x[j - 1] };
            let hi = if j + 1 == n { 1.0 } else { x[j + 1] };
            let f = |t: f64, x: &mut Vec<f64>| {
                x[j] = t;
                let v = log_weyl_x(e, x);
                if v.is_nan() {
                    f64::NEG_INFINITY
                } else {
                    v
                }
            };
            // golden section on the concave slice
            let g = (5f64.sqrt() - 1.0) / 2.0;
            let (mut a, mut b) = (lo, hi);
            let mut c = b - g * (b - a);
            let mut d = a + g * (b - a);
            let (mut fc, mut fd) = (f(c, &mut x), f(d, &mut x));
            for _ in 0..100 {
                if fc > fd {
                    b = d;
                    d = c;
                    fd = fc;
                    c = b - g * (b - a);
                    fc = f(c, &mut x);
                } else {
                    a = c;
                    c = d;
                    fc = fd;
                    d = a + g * (b - a);
                    fd = f(d, &mut x);
                }
            }
            let mut t = (a + b) / 2.0;
            // the SO maximum sits on the boundary
            for edge in [lo, hi] {
                if edge.abs() == 1.0 && f(edge, &mut x) > f(t, &mut x) {
                    t = edge;
                }
            }
            x[j] = t;
        }
        let v = log_weyl_x(e, &x);
        if v - best < 1e-15 {
            best = best.max(v);
            break;
        }
        best = v;
    }
    best
}

fn rejection<R: Rng + ?Sized>(e: Ensemble, n: usize, rng: &mut R) -> Vec<f64> {
    let bound = log_weyl_max(e, n) + 1e-9;
    let top = e.top();
    let mut phi = vec![0.0; n];
    loop {
        for p in phi.iter_mut() {
            *p = rng.random::<f64>() * top;
        }
        let u: f64 = rng.random();
        if u.ln() <= log_weyl(e, &phi) - bound {
            phi.sort_by(f64::total_cmp);
            return phi;
        }
    }
}

// ---------------------------------------------------------------------------
// Verblunsky sampler for U(N)

/// Verblunsky coefficients of a CUE(N) matrix.
pub fn cue_verblunsky<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<Complex64> {
    (0..n)
        .map(|k| {
            let arg = rng.random::<f64>() * TAU;
            if k + 1 == n {
                return Complex64::from_polar(1.0, arg);
            }
            // Beta(1, b) by inversion
            let b = (n - k - 1) as f64;
            let t = -(b.recip() * (1.0 - rng.random::<f64>()).ln()).exp_m1();
            Complex64::from_polar(t.sqrt(), arg)
        })
        .collect()
}

/// Lifted phase of z Phi_{N-1}(z) / Phi*_{N-1}(z) at z = e^{i theta}.
pub fn pruefer_phase(alpha: &[Complex64], theta: f64) -> f64 {
    let mut psi = 0.0;
    for a in &alpha[..alpha.len().saturating_sub(1)] {
        let w = theta + psi;
        psi = w - 2.0 * (Complex64::new(1.0, 0.0) - a * Complex64::from_polar(1.0, w)).arg();
    }
    theta + psi
}

fn target_phase(alpha: &[Complex64]) -> f64 {
    alpha.last().map(|a| a.conj().arg()).unwrap_or(0.0)
}

/// Number of eigenphases in (a, b], 0 <= a <= b <= 2 pi.
pub fn count_in_arc(alpha: &[Complex64], a: f64, b: f64) -> i64 {
    let t = target_phase(alpha);
    let k = |x: f64| ((pruefer_phase(alpha, x) - t) / TAU).floor() as i64;
    k(b) - k(a)
}

/// The `count` smallest eigenphases in [0, 2 pi).
pub fn lowest_phases(alpha: &[Complex64], count: usize) -> Vec<f64> {
    let t = target_phase(alpha);
    let p0 = pruefer_phase(alpha, 0.0);
    let k0 = ((p0 - t) / TAU).floor() + 1.0;
    (0..count.min(alpha.len()))
        .map(|i| {
            let target = t + TAU * (k0 + i as f64);
            let (mut lo, mut hi) = (0.0, TAU);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if pruefer_phase(alpha, mid) < target {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Sampling API

fn check_n(e: Ensemble, n: usize, method: Method) -> Result<()> {
    let cap = if method == Method::Rejection { N_MAX } else { e.max_n() };
    if n == 0 || n > cap {
        return domain(format!("{} needs 1 <= N <= {cap}", e.label(n)));
    }
    if e != Ensemble::U && method == Method::Verblunsky {
        return domain("the Verblunsky sampler covers U(N) only");
    }
    Ok(())
}

pub fn default_method(e: Ensemble) -> Method {
    match e {
        Ensemble::U => Method::Verblunsky,
        _ => Method::Rejection,
    }
}

pub fn sample_eigenphases<R: Rng + ?Sized>(e: Ensemble, n: usize, rng: &mut R) -> Result<EnsembleSample> {
    sample_eigenphases_with(e, n, default_method(e), rng)
}

pub fn sample_eigenphases_with<R: Rng + ?Sized>(
    e: Ensemble,
    n: usize,
    method: Method,
    rng: &mut R,
) -> Result<EnsembleSample> {
    check_n(e, n, method)?;
    let phases = match method {
        Method::Rejection => rejection(e, n, rng),
        Method::Verblunsky => lowest_phases(&cue_verblunsky(n, rng), n),
    };
    Ok(EnsembleSample { ensemble: e, n, phases })
}

/// Smallest eigenphase, without computing the others when possible.
fn first_phase_exceeds<R: Rng + ?Sized>(e: Ensemble, n: usize, s: f64, rng: &mut R) -> bool {
    match default_method(e) {
        Method::Verblunsky => count_in_arc(&cue_verblunsky(n, rng), 0.0, s) == 0,
        Method::Rejection => rejection(e, n, rng)[0] > s,
    }
}

fn binomial(e: Ensemble, n: usize, s: f64, hits: usize, samples: usize) -> GapProbEstimate {
    let p = hits as f64 / samples as f64;
    GapProbEstimate { ensemble: e, n, s, estimate: p, stderr: (p * (1.0 - p) / samples as f64).sqrt(), samples }
}

/// Fraction of Haar samples with theta_1 > s.
pub fn gap_probability_mc(e: Ensemble, n: usize, s: f64, samples: usize, seed: u64) -> Result<GapProbEstimate> {
    check_n(e, n, default_method(e))?;
    if !(0.0..=e.top()).contains(&s) {
        return domain(format!("s = {s} outside [0, {}]", e.top()));
    }
    if samples < 1000 {
        return domain("need at least 1000 samples");
    }
    let chunks = samples.div_ceil(CHUNK);
    let hits: usize = par_map(chunks, |c| {
        let mut rng = stream_rng(seed, c as u64);
        let len = CHUNK.min(samples - c * CHUNK);
        (0..len).filter(|_| first_phase_exceeds(e, n, s, &mut rng)).count()
    })
    .into_iter()
    .sum();
    Ok(binomial(e, n, s, hits, samples))
}

/// Gap probabilities on a grid from one pool of samples per grid point.
pub fn gap_curve(e: Ensemble, n: usize, grid: &[f64], samples: usize, seed: u64) -> Result<Vec<GapProbEstimate>> {
    grid.iter()
        .enumerate()
        .map(|(i, &s)| gap_probability_mc(e, n, s, samples, seed ^ ((i as u64 + 1) << 40)))
        .collect()
}

/// Closed form for USp(2): 1 - s/pi + sin(2s)/(2 pi).
pub fn usp2_gap(s: f64) -> f64 {
    1.0 - s / PI + (2.0 * s).sin() / TAU
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapBounds {
    pub lower: f64,
    pub upper: f64,
    pub exp_upper: f64,
}

/// Two-sided bounds on P_{USp(2N)}(theta_1 > s).
pub fn uspgap_bounds(n: usize, s: f64) -> Result<GapBounds> {
    if n == 0 || !(s > 0.0 && s < PI) {
        return domain("need N >= 1 and 0 < s < pi");
    }
    let nf = n as f64;
    let lower = (s / 2.0).cos().powf(nf * (2.0 * nf + 1.0));
    let t = (s / 2.0).sin() / 2f64.sqrt();
    let m = 2 * n as i32 + 1;
    let upper = lower * 0.5 * ((1.0 + t).powi(m) + (1.0 - t).powi(m));
    let exp_upper = lower * (nf * s / 2f64.sqrt()).exp();
    Ok(GapBounds { lower, upper, exp_upper })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SandwichRow {
    pub ensemble: Ensemble,
    #[serde(rename = "N")]
    pub n: usize,
    pub s: f64,
    pub estimate: f64,
    pub stderr: f64,
    pub samples: usize,
    pub lower: f64,
    pub upper: f64,
    /// Closed form where one is known (USp(2)).
    pub exact: Option<f64>,
}

impl SandwichRow {
    /// Whether the estimate is consistent with the bounds (and the closed
    /// form) at `sigmas` standard errors. The standard error is taken at the
    /// value being tested, so an empty tail still counts against a positive
    /// lower bound correctly.
    pub fn within(&self, sigmas: f64) -> bool {
        let n = self.samples as f64;
        let tol = |p: f64| sigmas * (p.clamp(0.0, 1.0) * (1.0 - p.clamp(0.0, 1.0)) / n).sqrt();
        let mut ok = self.estimate >= self.lower - tol(self.lower) && self.estimate <= self.upper + tol(self.upper);
        if let Some(x) = self.exact {
            ok &= (self.estimate - x).abs() <= tol(x);
        }
        ok
    }
}

/// `points` equally spaced s strictly inside (0, pi).
pub fn interior_grid(points: usize) -> Vec<f64> {
    (1..=points).map(|i| PI * i as f64 / (points + 1) as f64).collect()
}

pub fn usp_sandwich(n: usize, grid: &[f64], samples: usize, seed: u64) -> Result<Vec<SandwichRow>> {
    let est = gap_curve(Ensemble::USp, n, grid, samples, seed)?;
    est.into_iter()
        .map(|g| {
            let b = uspgap_bounds(n, g.s)?;
            Ok(SandwichRow {
                ensemble: Ensemble::USp,
                n,
                s: g.s,
                estimate: g.estimate,
                stderr: g.stderr,
                samples: g.samples,
                lower: b.lower,
                upper: b.upper,
                exact: (n == 1).then(|| usp2_gap(g.s)),
            })
        })
        .collect()
}

/// CSV for plotting; the seed goes in a comment header.
pub fn sandwich_csv(rows: &[SandwichRow], seed: u64) -> String {
    let mut out = format!("# seed={seed}\nensemble,N,s,estimate,stderr,lower,upper\n");
    for r in rows {
        out += &format!(
            "{},{},{},{},{},{},{}\n",
            r.ensemble.label(r.n),
            r.n,
            r.s,
            r.estimate,
            r.stderr,
            r.lower,
            r.upper
        );
    }
    out
}

// ---------------------------------------------------------------------------
// Max-of-samples statistics

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaxGapOptions {
    pub m_cap: u64,
    /// Allow the inverse-CDF approximation when M exceeds `m_cap`.
    pub shortcut: bool,
    /// For U(N): maximize over all spacings of each matrix, wrapping around.
    pub all_spacings: bool,
}

impl Default for MaxGapOptions {
    fn default() -> Self {
        MaxGapOptions { m_cap: DEFAULT_M_CAP, shortcut: true, all_spacings: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaxGapReport {
    pub ensemble: Ensemble,
    #[serde(rename = "N")]
    pub n: usize,
    pub beta: f64,
    #[serde(rename = "M")]
    pub m: u64,
    /// False when the inverse-CDF approximation was used.
    pub exact: bool,
    pub values: Vec<f64>,
    pub mean: f64,
    pub sd: f64,
    /// Limit of the normalized maximum: 4 for USp, sqrt 8 for U.
    pub limit: f64,
}

/// M = floor(exp((2N)^beta)) for USp/SO, floor(exp(N^beta)) for U.
pub fn max_gap_m(e: Ensemble, n: usize, beta: f64) -> u64 {
    let base = if e == Ensemble::U { n as f64 } else { 2.0 * n as f64 };
    let m = base.powf(beta).exp().floor();
    if m >= u64::MAX as f64 {
        u64::MAX
    } else {
        m as u64
    }
}

fn normalizer(e: Ensemble, n: usize, beta: f64) -> f64 {
    let base = if e == Ensemble::U { n as f64 } else { 2.0 * n as f64 };
    base.powf(1.0 - beta / 2.0)
}

/// theta_1 for USp/SO; half the first (or largest) spacing for U.
fn gap_statistic<R: Rng + ?Sized>(e: Ensemble, n: usize, all: bool, rng: &mut R) -> f64 {
    match e {
        Ensemble::U => {
            let alpha = cue_verblunsky(n, rng);
            if n == 1 {
                return PI;
            }
            if !all {
                let p = lowest_phases(&alpha, 2);
                return 0.5 * (p[1] - p[0]);
            }
            let p = lowest_phases(&alpha, n);
            let mut best = 0.5 * (TAU + p[0] - p[n - 1]);
            for w in p.windows(2) {
                best = best.max(0.5 * (w[1] - w[0]));
            }
            best
        }
        _ => rejection(e, n, rng)[0],
    }
}

fn summarize(values: &[f64]) -> (f64, f64) {
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0).max(1.0);
    (mean, var.sqrt())
}

pub fn max_gap_statistic(
    e: Ensemble,
    n: usize,
    beta: f64,
    trials: usize,
    seed: u64,
    opts: &MaxGapOptions,
) -> Result<MaxGapReport> {
    if !(beta > 0.0 && beta < 2.0) {
        return domain("beta must lie in (0, 2)");
    }
    max_gap_with_m(e, n, beta, max_gap_m(e, n, beta), trials, seed, opts)
}

/// As [`max_gap_statistic`] with an explicit sample count M per trial.
pub fn max_gap_with_m(
    e: Ensemble,
    n: usize,
    beta: f64,
    m: u64,
    trials: usize,
    seed: u64,
    opts: &MaxGapOptions,
) -> Result<MaxGapReport> {
    check_n(e, n, default_method(e))?;
    if trials < 30 {
        return domain("need at least 30 trials");
    }
    if m == 0 {
        return domain("M must be positive");
    }
    let norm = normalizer(e, n, beta);
    let all = opts.all_spacings;
    let exact = m <= opts.m_cap;
    let values: Vec<f64> = if exact {
        par_map(trials, |t| {
            let mut rng = stream_rng(seed, t as u64);
            (0..m).map(|_| gap_statistic(e, n, all, &mut rng)).fold(0.0, f64::max) * norm
        })
    } else if opts.shortcut {
        let sf = SurvivalFit::new(e, n, all, opts.m_cap.min(200_000) as usize, seed)?;
        let mut rng = stream_rng(seed, u64::MAX);
        (0..trials)
            .map(|_| {
                // P(max <= x) = F(x)^M, so max = F^{-1}(U^{1/M})
                let u: f64 = rng.random();
                let tail = -(u.ln() / m as f64).exp_m1();
                sf.inverse(tail) * norm
            })
            .collect()
    } else {
        return Err(Error::Budget(format!("M = {m} exceeds the cap {}", opts.m_cap)));
    };
    let (mean, sd) = summarize(&values);
    let limit = if e == Ensemble::U { 8f64.sqrt() } else { 4.0 };
    Ok(MaxGapReport { ensemble: e, n, beta, m, exact, values, mean, sd, limit })
}

/// Approximation layer: survival S(x) = A cos(x/2)^kappa fitted to the
/// empirical tail, or the closed form for USp(2).
struct SurvivalFit {
    closed_form: bool,
    log_a: f64,
    kappa: f64,
    top: f64,
}

impl SurvivalFit {
    fn new(e: Ensemble, n: usize, all: bool, k: usize, seed: u64) -> Result<Self> {
        let top = if e == Ensemble::U { PI } else { e.top() };
        if e == Ensemble::USp && n == 1 {
            return Ok(SurvivalFit { closed_form: true, log_a: 0.0, kappa: 0.0, top });
        }
        let chunks = k.div_ceil(CHUNK);
        let mut xs: Vec<f64> = par_map(chunks, |c| {
            let mut rng = stream_rng(seed ^ 0x5eed, c as u64);
            let len = CHUNK.min(k - c * CHUNK);
            (0..len).map(|_| gap_statistic(e, n, all, &mut rng)).collect::<Vec<_>>()
        })
        .concat();
        xs.sort_by(f64::total_cmp);
        let kf = xs.len() as f64;
        let (mut sx, mut sy, mut sxx, mut sxy, mut w) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (i, &x) in xs.iter().enumerate() {
            let surv = (kf - i as f64) / kf;
            if surv > 0.5 || surv < 20.0 / kf {
                continue;
            }
            let u = (x / 2.0).cos().ln();
            let v = surv.ln();
            sx += u;
            sy += v;
            sxx += u * u;
            sxy += u * v;
            w += 1.0;
        }
        let den = w * sxx - sx * sx;
        if w < 10.0 || den.abs() < 1e-300 {
            return Err(Error::Numeric("too few tail points to fit the gap distribution".into()));
        }
        let kappa = (w * sxy - sx * sy) / den;
        let log_a = (sy - kappa * sx) / w;
        Ok(SurvivalFit { closed_form: false, log_a, kappa, top })
    }

    fn survival(&self, x: f64) -> f64 {
        if self.closed_form {
            usp2_gap(x)
        } else {
            (self.log_a + self.kappa * (x / 2.0).cos().ln()).exp().min(1.0)
        }
    }

    /// x with S(x) = tail.
    fn inverse(&self, tail: f64) -> f64 {
        let (mut lo, mut hi) = (0.0, self.top);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if self.survival(mid) > tail {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

// ---------------------------------------------------------------------------
// Factorization identity

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactorizationReport {
    #[serde(rename = "N")]
    pub n: usize,
    pub s: f64,
    /// P_{U(2N+1)}(theta_1 > 2s)
    pub p_u: GapProbEstimate,
    /// P_{SO(2N+2)}(theta_1 > s)
    pub p_so: GapProbEstimate,
    /// P_{USp(2N)}(theta_1 > s)
    pub p_usp: GapProbEstimate,
    pub product: f64,
    pub difference: f64,
    pub sigma: f64,
    pub holds: bool,
}

pub fn factorization_identity_check(n: usize, s: f64, samples: usize, seed: u64) -> Result<FactorizationReport> {
    if n == 0 || n + 1 > N_MAX {
        return domain(format!("need 1 <= N <= {}", N_MAX - 1));
    }
    if !(0.0..=PI).contains(&s) {
        return domain("need 0 <= s <= pi");
    }
    let p_u = gap_probability_mc(Ensemble::U, 2 * n + 1, 2.0 * s, samples, seed)?;
    let p_so = gap_probability_mc(Ensemble::SO, n + 1, s, samples, seed ^ 1 << 62)?;
    let p_usp = gap_probability_mc(Ensemble::USp, n, s, samples, seed ^ 1 << 63)?;
    let product = p_so.estimate * p_usp.estimate;
    let difference = p_u.estimate - product;
    let sigma = (p_u.stderr.powi(2)
        + (p_usp.estimate * p_so.stderr).powi(2)
        + (p_so.estimate * p_usp.stderr).powi(2))
    .sqrt();
    let holds = difference.abs() <= 4.0 * sigma.max(1e-12);
    Ok(FactorizationReport { n, s, p_u, p_so, p_usp, product, difference, sigma, holds })
}

// ---------------------------------------------------------------------------
// Random prime model

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Wilson {
    pub estimate: f64,
    pub lo: f64,
    pub hi: f64,
}

pub fn wilson(hits: u64, n: u64, z: f64) -> Wilson {
    let nf = n as f64;
    let p = hits as f64 / nf;
    let z2 = z * z;
    let den = 1.0 + z2 / nf;
    let centre = (p + z2 / (2.0 * nf)) / den;
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / den;
    Wilson { estimate: p, lo: (centre - half).max(0.0), hi: (centre + half).min(1.0) }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrimeModelReport {
    #[serde(rename = "X")]
    pub x: f64,
    pub n: u64,
    pub v_n: f64,
    pub u_n: f64,
    pub c_n: f64,
    /// 2^-22 exp(-30 v_n^2 / c_n), a lower bound for P(Y >= v_n).
    pub lower_bound: f64,
    /// exp(-u_n^2 / (32 c_n)), an upper bound for P(Y >= u_n).
    pub upper_bound: f64,
    pub p_ge_v: Wilson,
    pub p_ge_u: Wilson,
    pub lower_violated: bool,
    pub upper_violated: bool,
    pub samples: u64,
}

fn model_primes(x: f64) -> Vec<u64> {
    crate::integer::primes_up_to((x.exp() * (1.0 + 1e-12)).floor() as u64)
}

fn model_weight(p: u64, x: f64) -> f64 {
    let l = (p as f64).ln();
    l / (p as f64).sqrt() * (1.0 - l / x)
}

/// v_n and c_n.
pub fn prime_model_constants(x: f64, n: u64) -> (f64, f64) {
    let mut v = 0.0;
    let mut c = 0.0;
    for p in model_primes(x) {
        let w = model_weight(p, x);
        if p <= n {
            v += w;
        } else {
            c += w * w;
        }
    }
    (v, c)
}

/// Coefficients 2 log p / sqrt p (1 - log p / X) of the +-1 variables.
pub fn prime_model_weights(x: f64) -> Vec<f64> {
    model_primes(x).into_iter().map(|p| 2.0 * model_weight(p, x)).collect()
}

/// Y for a given sign pattern; `true` means +1.
pub fn prime_model_y(weights: &[f64], signs: impl IntoIterator<Item = bool>) -> f64 {
    weights.iter().zip(signs).map(|(w, s)| if s { *w } else { -w }).sum()
}

fn draw_y<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> f64 {
    let mut y = 0.0;
    for block in weights.chunks(64) {
        let bits: u64 = rng.random();
        for (i, w) in block.iter().enumerate() {
            y += if bits >> i & 1 == 1 { *w } else { -w };
        }
    }
    y
}

/// Reports for several n from one set of Y samples.
pub fn random_prime_model_multi(x: f64, ns: &[u64], samples: u64, seed: u64) -> Result<Vec<PrimeModelReport>> {
    let top = x.exp();
    if ns.iter().any(|&n| n < 3 || n as f64 >= top) {
        return domain("need 3 <= n < e^X");
    }
    if samples == 0 {
        return domain("need at least one sample");
    }
    let weights = prime_model_weights(x);
    let consts: Vec<(f64, f64)> = ns.iter().map(|&n| prime_model_constants(x, n)).collect();
    let chunks = (samples as usize).div_ceil(CHUNK);
    let counts: Vec<Vec<(u64, u64)>> = par_map(chunks, |c| {
        let mut rng = stream_rng(seed, c as u64);
        let len = CHUNK.min(samples as usize - c * CHUNK);
        let mut acc = vec![(0u64, 0u64); consts.len()];
        for _ in 0..len {
            let y = draw_y(&weights, &mut rng);
            for (a, (v, _)) in acc.iter_mut().zip(&consts) {
                a.0 += (y >= *v) as u64;
                a.1 += (y >= 4.0 * v) as u64;
            }
        }
        acc
    });
    Ok(ns
        .iter()
        .zip(&consts)
        .enumerate()
        .map(|(i, (&n, &(v, c)))| {
            let hv: u64 = counts.iter().map(|a| a[i].0).sum();
            let hu: u64 = counts.iter().map(|a| a[i].1).sum();
            let u = 4.0 * v;
            let lower_bound = 2f64.powi(-22) * (-30.0 * v * v / c).exp();
            let upper_bound = (-u * u / (32.0 * c)).exp();
            let p_ge_v = wilson(hv, samples, WILSON_Z);
            let p_ge_u = wilson(hu, samples, WILSON_Z);
            PrimeModelReport {
                x,
                n,
                v_n: v,
                u_n: u,
                c_n: c,
                lower_bound,
                upper_bound,
                lower_violated: lower_bound > p_ge_v.hi,
                upper_violated: upper_bound < p_ge_u.lo,
                p_ge_v,
                p_ge_u,
                samples,
            }
        })
        .collect())
}

pub fn random_prime_model(x: f64, n: u64, samples: u64, seed: u64) -> Result<PrimeModelReport> {
    Ok(random_prime_model_multi(x, &[n], samples, seed)?.remove(0))
}

// ---------------------------------------------------------------------------
// Asymptotic comparator for U(N)

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UGapModel {
    /// Model for log P_{U(N)}(theta_1 > 2s).
    pub log_prob_model: f64,
    /// Model for its derivative in s.
    pub derivative_model: f64,
    /// False when N sin(s/2) < 2 or s is outside (0, pi).
    pub in_range: bool,
}

pub fn u_gap_asymptotic(n: usize, s: f64, c0: f64) -> UGapModel {
    let nf = n as f64;
    let h = s / 2.0;
    let log_prob_model = nf * nf * h.cos().ln() - 0.25 * (nf * h.sin()).ln() + c0;
    let derivative_model = -nf * nf / 2.0 * h.tan() - 0.125 / h.tan();
    let in_range = s > 0.0 && s < PI && nf * h.sin() >= 2.0;
    UGapModel { log_prob_model, derivative_model, in_range }
}

// ---------------------------------------------------------------------------
// Goodness of fit

/// Kolmogorov survival function P(K > lambda).
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let t = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        s += if k % 2 == 1 { t } else { -t };
        if t < 1e-18 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// One-sample KS statistic D and its asymptotic p-value.
pub fn ks_test(sample: &[f64], cdf: impl Fn(f64) -> f64) -> (f64, f64) {
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    let en = n.sqrt();
    (d, kolmogorov_sf((en + 0.12 + 0.11 / en) * d))
}

/// Two-sample KS statistic and asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let en = (na * nb / (na + nb)).sqrt();
    (d, kolmogorov_sf((en + 0.12 + 0.11 / en) * d))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn density_maxima() {
        // values found independently by Nelder-Mead with random restarts
        for (e, n, want) in [
            (Ensemble::USp, 2, -0.5232481437645473),
            (Ensemble::USp, 4, -4.509780128354459),
            (Ensemble::USp, 6, -13.066156570084843),
            (Ensemble::SO, 2, 4f64.ln()),
            (Ensemble::SO, 4, 0.2705766045488426),
            (Ensemble::SO, 6, -5.4870549468415994),
            (Ensemble::U, 3, 27f64.ln()),
        ] {
            let got = log_weyl_max(e, n);
            assert!(got >= want - 1e-9 && got - want < 1e-7, "{e:?} {n}: {got} vs {want}");
        }
    }

    #[test]
    fn usp_bounds_example() {
        let b = uspgap_bounds(1, PI / 2.0).unwrap();
        assert!((b.lower - 0.5f64.sqrt().powi(3)).abs() < 1e-12);
        assert!((b.upper - 0.61872).abs() < 1e-4);
        assert!(b.lower < 0.5 && 0.5 < b.upper);
        assert!((usp2_gap(PI / 2.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn pruefer_phase_winds_n_times() {
        let mut rng = stream_rng(3, 0);
        for n in [1, 2, 5, 17] {
            let a = cue_verblunsky(n, &mut rng);
            let w = pruefer_phase(&a, TAU) - pruefer_phase(&a, 0.0);
            assert!((w - TAU * n as f64).abs() < 1e-9);
            assert_eq!(count_in_arc(&a, 0.0, TAU), n as i64);
            let p = lowest_phases(&a, n);
            assert!(p.windows(2).all(|w| w[0] < w[1]));
            assert_eq!(count_in_arc(&a, 0.0, p[0] + 1e-9), 1);
        }
    }

    #[test]
    fn derivative_model_arithmetic() {
        let m = u_gap_asymptotic(20, 0.5, 0.0);
        let want = -200.0 * 0.25f64.tan() - 0.125 / 0.25f64.tan();
        assert!((m.derivative_model - want).abs() < 1e-12);
        assert!(m.in_range);
        assert!(!u_gap_asymptotic(20, 1e-3, 0.0).in_range);
    }

    #[test]
    fn trivial_gap_endpoints() {
        let g = gap_probability_mc(Ensemble::USp, 2, 0.0, 2000, 1).unwrap();
        assert_eq!(g.estimate, 1.0);
        let g = gap_probability_mc(Ensemble::USp, 2, PI, 2000, 1).unwrap();
        assert_eq!(g.estimate, 0.0);
        assert!(gap_probability_mc(Ensemble::USp, 7, 1.0, 2000, 1).is_err());
        assert!(gap_probability_mc(Ensemble::USp, 2, 1.0, 999, 1).is_err());
    }
}
