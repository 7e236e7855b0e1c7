//! Test-function pairs (g, h) for the explicit formula.
//!
//! Each g is even, supported in [-X, X] and normalized to g(0) = 1, and
//! h(t) = 2 * int_0^inf g(x) cos(tx) dx is non-negative.

use crate::error::{domain, Error, Result};
use crate::quad::tanh_sinh;
use crate::special::{bessel_j_log, ln_gamma, spherical_bessel_scaled, NU_MAX, U_MAX};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Clone, Debug, PartialEq)]
pub enum Family {
    Triangle,
    /// Autocorrelation of a step function with 2M+1 steps of width X/(2M+1);
    /// `coeffs[i]` is the height of step n = i - M.
    StepAutocorr { coeffs: Vec<f64> },
    BesselNuX { nu: f64 },
    /// G_alpha with alpha = X.
    GAlpha,
    SincPower { k: u32 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpec", into = "RawSpec")]
pub struct TestFunctionSpec {
    pub family: Family,
    pub x: f64,
}

#[derive(Serialize, Deserialize)]
struct RawSpec {
    family: String,
    #[serde(rename = "X")]
    x: f64,
    #[serde(default)]
    params: RawParams,
}

#[derive(Serialize, Deserialize, Default)]
struct RawParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    coeffs: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    nu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    k: Option<u32>,
}

impl TryFrom<RawSpec> for TestFunctionSpec {
    type Error = Error;
    fn try_from(r: RawSpec) -> Result<Self> {
        let p = r.params;
        let family = match r.family.as_str() {
            "triangle" => Family::Triangle,
            "step_autocorr" => Family::StepAutocorr {
                coeffs: p.coeffs.ok_or_else(|| Error::Parse("step_autocorr needs params.coeffs".into()))?,
            },
            "bessel_nuX" => Family::BesselNuX {
                nu: p.nu.ok_or_else(|| Error::Parse("bessel_nuX needs params.nu".into()))?,
            },
            "g_alpha" => Family::GAlpha,
            "sinc_power" => Family::SincPower {
                k: p.k.ok_or_else(|| Error::Parse("sinc_power needs params.k".into()))?,
            },
            other => return Err(Error::Parse(format!("unknown test-function family '{other}'"))),
        };
        let spec = TestFunctionSpec { family, x: r.x };
        spec.validate()?;
        Ok(spec)
    }
}

impl From<TestFunctionSpec> for RawSpec {
    fn from(s: TestFunctionSpec) -> Self {
        let mut params = RawParams::default();
        let family = match s.family {
            Family::Triangle => "triangle",
            Family::StepAutocorr { coeffs } => {
                params.coeffs = Some(coeffs);
                "step_autocorr"
            }
            Family::BesselNuX { nu } => {
                params.nu = Some(nu);
                "bessel_nuX"
            }
            Family::GAlpha => "g_alpha",
            Family::SincPower { k } => {
                params.k = Some(k);
                "sinc_power"
            }
        };
        RawSpec { family: family.into(), x: s.x, params }
    }
}

impl TestFunctionSpec {
    pub fn triangle(x: f64) -> Self {
        TestFunctionSpec { family: Family::Triangle, x }
    }

    pub fn step(x: f64, coeffs: Vec<f64>) -> Self {
        TestFunctionSpec { family: Family::StepAutocorr { coeffs }, x }
    }

    pub fn bessel(x: f64, nu: f64) -> Self {
        TestFunctionSpec { family: Family::BesselNuX { nu }, x }
    }

    pub fn g_alpha(alpha: f64) -> Self {
        TestFunctionSpec { family: Family::GAlpha, x: alpha }
    }

    pub fn sinc_power(x: f64, k: u32) -> Self {
        TestFunctionSpec { family: Family::SincPower { k }, x }
    }

    /// Same family and parameters at a different support length.
    pub fn with_x(&self, x: f64) -> Self {
        TestFunctionSpec { family: self.family.clone(), x }
    }

    pub fn family_name(&self) -> &'static str {
        match self.family {
            Family::Triangle => "triangle",
            Family::StepAutocorr { .. } => "step_autocorr",
            Family::BesselNuX { .. } => "bessel_nuX",
            Family::GAlpha => "g_alpha",
            Family::SincPower { .. } => "sinc_power",
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.x.is_finite() && self.x > 0.0) {
            return domain(format!("support length X must be positive, got {}", self.x));
        }
        match &self.family {
            Family::StepAutocorr { coeffs } => {
                if coeffs.len() % 2 == 0 {
                    return domain("step_autocorr needs 2M+1 coefficients");
                }
                if coeffs.iter().any(|c| !c.is_finite()) || coeffs.iter().all(|&c| c == 0.0) {
                    return domain("step_autocorr coefficients must be finite and not all zero");
                }
            }
            Family::BesselNuX { nu } => {
                if !(0.0..=NU_MAX).contains(nu) {
                    return domain(format!("bessel_nuX needs 0 <= nu <= {NU_MAX}"));
                }
            }
            Family::SincPower { k } => {
                if !(1..=50).contains(k) {
                    return domain("sinc_power needs 1 <= k <= 50");
                }
            }
            _ => {}
        }
        Ok(())
    }

    pub fn compile(&self) -> Result<TestFunction> {
        TestFunction::new(self)
    }
}

#[derive(Clone, Debug)]
enum Kind {
    Triangle,
    Step { w: f64, a: Vec<f64>, r: Vec<f64>, scale: f64 },
    Bessel { nu: f64, gcoef: f64, hcoef: f64 },
    GAlpha,
    Sinc { k: u32, center: f64 },
}

/// A test function prepared for repeated evaluation.
#[derive(Clone, Debug)]
pub struct TestFunction {
    spec: TestFunctionSpec,
    kind: Kind,
}

impl TestFunction {
    pub fn new(spec: &TestFunctionSpec) -> Result<Self> {
        spec.validate()?;
        let x = spec.x;
        let kind = match &spec.family {
            Family::Triangle => Kind::Triangle,
            Family::StepAutocorr { coeffs } => {
                let n = coeffs.len();
                let w = x / n as f64;
                let r: Vec<f64> = (0..n)
                    .map(|k| (0..n - k).map(|i| coeffs[i] * coeffs[i + k]).sum())
                    .collect();
                if r[0] <= 0.0 {
                    return domain("degenerate step coefficients");
                }
                let scale = 1.0 / (w * r[0]);
                Kind::Step { w, a: coeffs.clone(), r, scale }
            }
            &Family::BesselNuX { nu } => {
                let gcoef = (ln_gamma(1.5 + 2.0 * nu) - ln_gamma(1.0 + 2.0 * nu)).exp() / PI.sqrt();
                let hcoef = 2.0 * x / PI.sqrt()
                    * (ln_gamma(1.5 + 2.0 * nu) + 2.0 * ln_gamma(1.0 + nu) - ln_gamma(1.0 + 2.0 * nu)).exp();
                Kind::Bessel { nu, gcoef, hcoef }
            }
            Family::GAlpha => Kind::GAlpha,
            &Family::SincPower { k } => {
                let n = 2 * k;
                Kind::Sinc { k, center: cardinal_bspline(n, n as f64 / 2.0) }
            }
        };
        Ok(TestFunction { spec: spec.clone(), kind })
    }

    pub fn spec(&self) -> &TestFunctionSpec {
        &self.spec
    }

    pub fn support(&self) -> f64 {
        self.spec.x
    }

    pub fn g(&self, x: f64) -> f64 {
        let x = x.abs();
        let big_x = self.spec.x;
        if x >= big_x {
            return 0.0;
        }
        match &self.kind {
            Kind::Triangle => 1.0 - x / big_x,
            Kind::Step { w, r, scale, .. } => {
                let s = x / w;
                let j = s.floor() as usize;
                let frac = s - j as f64;
                let rj = r.get(j).copied().unwrap_or(0.0);
                let rj1 = r.get(j + 1).copied().unwrap_or(0.0);
                scale * w * ((1.0 - frac) * rj + frac * rj1)
            }
            &Kind::Bessel { nu, gcoef, .. } => {
                let u = 2.0 * x / big_x;
                if nu == 0.0 {
                    return gcoef * (2.0 - u);
                }
                let f = |_: f64, da: f64, db: f64| (db * (u + da) * da * (u + db)).powf(nu);
                gcoef * tanh_sinh(f, u - 1.0, 1.0, 7)
            }
            Kind::GAlpha => {
                let c = (PI * x / (2.0 * big_x)).cos();
                (1.0 - x / big_x) * c * c
            }
            &Kind::Sinc { k, center } => {
                let n = 2 * k;
                cardinal_bspline(n, n as f64 / 2.0 + k as f64 * x / big_x) / center
            }
        }
    }

    /// 1 - g(x), evaluated without cancellation where that is cheap.
    pub fn one_minus_g(&self, x: f64) -> f64 {
        let x = x.abs();
        let big_x = self.spec.x;
        if x >= big_x {
            return 1.0;
        }
        match &self.kind {
            Kind::Triangle => x / big_x,
            Kind::Step { w, r, .. } if x < *w => {
                let r1 = r.get(1).copied().unwrap_or(0.0);
                (x / w) * (r[0] - r1) / r[0]
            }
            _ => 1.0 - self.g(x),
        }
    }

    pub fn h(&self, t: f64) -> f64 {
        let t = t.abs();
        let big_x = self.spec.x;
        match &self.kind {
            Kind::Triangle => {
                let s = sinc(big_x * t / 2.0);
                big_x * s * s
            }
            Kind::Step { w, a, scale, .. } => {
                let s = sinc(t * w / 2.0);
                let (c, sn) = trig_sums(a, t * w);
                scale * w * w * s * s * (c * c + sn * sn)
            }
            &Kind::Bessel { nu, hcoef, .. } => {
                let f = bessel_scaled_any(nu, big_x * t / 2.0);
                hcoef * f * f
            }
            Kind::GAlpha => {
                let z = big_x * t / 2.0;
                let h = PI / 2.0;
                big_x / 2.0 * sinc(z).powi(2) + big_x / 4.0 * (sinc(z + h).powi(2) + sinc(z - h).powi(2))
            }
            &Kind::Sinc { k, center } => {
                let z = big_x * t / (2.0 * k as f64);
                big_x / k as f64 * sinc(z).powi(2 * k as i32) / center
            }
        }
    }

    /// dh/dt.
    pub fn h_deriv(&self, t: f64) -> f64 {
        let sign = if t < 0.0 { -1.0 } else { 1.0 };
        let t = t.abs();
        let big_x = self.spec.x;
        let v = match &self.kind {
            Kind::Triangle => {
                let z = big_x * t / 2.0;
                big_x * big_x * sinc(z) * sinc_deriv(z)
            }
            Kind::Step { w, a, scale, .. } => {
                let z = t * w / 2.0;
                let s = sinc(z);
                let ds = sinc_deriv(z) * w / 2.0;
                let (c, sn) = trig_sums(a, t * w);
                let m = a.len() / 2;
                let (mut dc, mut dsn) = (0.0, 0.0);
                for (i, &ai) in a.iter().enumerate() {
                    let n = i as f64 - m as f64;
                    let (si, co) = (n * t * w).sin_cos();
                    dc -= ai * n * w * si;
                    dsn += ai * n * w * co;
                }
                scale * w * w * (2.0 * s * ds * (c * c + sn * sn) + s * s * 2.0 * (c * dc + sn * dsn))
            }
            &Kind::Bessel { nu, hcoef, .. } => {
                let u = big_x * t / 2.0;
                let f = bessel_scaled_any(nu, u);
                let df = -0.5 * u * bessel_scaled_any(nu + 1.0, u);
                hcoef * 2.0 * f * df * big_x / 2.0
            }
            Kind::GAlpha => {
                let z = big_x * t / 2.0;
                let h = PI / 2.0;
                let d2 = |y: f64| 2.0 * sinc(y) * sinc_deriv(y);
                big_x / 2.0 * (big_x / 2.0 * d2(z) + big_x / 4.0 * (d2(z + h) + d2(z - h)))
            }
            &Kind::Sinc { k, center } => {
                let kf = k as f64;
                let z = big_x * t / (2.0 * kf);
                big_x / kf / center * 2.0 * kf * sinc(z).powi(2 * k as i32 - 1) * sinc_deriv(z) * big_x / (2.0 * kf)
            }
        };
        sign * v
    }

    /// Points in [0, X] where g may fail to be smooth.
    pub fn breakpoints(&self) -> Vec<f64> {
        let x = self.spec.x;
        match &self.kind {
            Kind::Step { a, w, .. } => (0..=a.len()).map(|j| (j as f64 * w).min(x)).collect(),
            Kind::Sinc { k, .. } => (0..=*k).map(|j| j as f64 * x / *k as f64).collect(),
            _ => vec![0.0, x],
        }
    }

    /// Smallest t0 accepted by [`TestFunction::decay_envelope`].
    pub fn envelope_start(&self) -> f64 {
        let x = self.spec.x;
        match &self.kind {
            Kind::GAlpha => (PI + 2.0) / x,
            &Kind::Bessel { nu, .. } => 4.0 * (nu + 1.5) / x,
            _ => 2.0 * PI / x,
        }
    }

    /// Constants (A, A', p) with h(t) <= A t^-p and |h'(t)| <= A' t^-p for
    /// all t >= t0, where t0 >= [`TestFunction::envelope_start`].
    pub fn decay_envelope(&self, t0: f64) -> (f64, f64, f64) {
        let t0 = t0.max(self.envelope_start());
        let x = self.spec.x;
        match &self.kind {
            // |sinc z| <= 1/z and |sinc' z| <= (1 + 1/z)/z
            Kind::Triangle => (4.0 / x, 4.0 * (1.0 + 2.0 / (x * t0)), 2.0),
            Kind::Step { w, a, scale, .. } => {
                let l1: f64 = a.iter().map(|c| c.abs()).sum();
                let m = (a.len() / 2) as f64;
                let amp = 4.0 * scale * l1 * l1;
                let d_amp = scale * l1 * l1 * (4.0 * w * (1.0 + 2.0 / (w * t0)) + 16.0 * m * w);
                (amp, d_amp, 2.0)
            }
            Kind::GAlpha => {
                // each shifted sinc^2 is at most 1/(z - pi/2)^2 with z = X t / 2
                let z0 = x * t0 / 2.0;
                let fac = (z0 / (z0 - PI / 2.0)).powi(2);
                (4.0 * fac / x, 4.0 * fac * (1.0 + 1.0 / (z0 - PI / 2.0)), 2.0)
            }
            &Kind::Sinc { k, center } => {
                let kf = k as f64;
                let a = x / (2.0 * kf);
                let p = 2.0 * kf;
                let amp = x / kf / center * a.powf(-p);
                let d_amp = x / kf / center * 2.0 * kf * a.powf(1.0 - p) * (1.0 + 1.0 / (a * t0));
                (amp, d_amp, p)
            }
            &Kind::Bessel { nu, hcoef, .. } => {
                // j_mu^2 <= 1/(u sqrt(u^2 - (mu+1/2)^2)) <= 2/(sqrt(3) u^2) past twice the turning point
                let p = 2.0 * nu + 2.0;
                let amp = hcoef * 2.0 / 3f64.sqrt() * 2f64.powf(2.0 * nu) * (2.0 / x).powf(p);
                (amp, amp * x, p)
            }
        }
    }
}

// F(u) = j_nu(u) (2/u)^nu without the argument-range check.
fn bessel_scaled_any(nu: f64, u: f64) -> f64 {
    if u <= U_MAX {
        return spherical_bessel_scaled(nu, u).unwrap_or(0.0);
    }
    match bessel_j_log(nu + 0.5, u) {
        Ok((s, l)) => s * (l + 0.5 * (PI / (2.0 * u)).ln() + nu * (2.0 / u).ln()).exp(),
        Err(_) => 0.0,
    }
}

// (sum a_n cos(n theta), sum a_n sin(n theta)) for n = -M..M
fn trig_sums(a: &[f64], theta: f64) -> (f64, f64) {
    let m = (a.len() / 2) as f64;
    let mut c = 0.0;
    let mut s = 0.0;
    for (i, &ai) in a.iter().enumerate() {
        let (si, co) = ((i as f64 - m) * theta).sin_cos();
        c += ai * co;
        s += ai * si;
    }
    (c, s)
}

pub fn sinc(z: f64) -> f64 {
    if z.abs() < 1e-4 {
        let z2 = z * z;
        1.0 - z2 / 6.0 + z2 * z2 / 120.0
    } else {
        z.sin() / z
    }
}

pub fn sinc_deriv(z: f64) -> f64 {
    if z.abs() < 1e-3 {
        let z2 = z * z;
        -z / 3.0 + z * z2 / 30.0
    } else {
        (z.cos() - z.sin() / z) / z
    }
}

/// Cardinal B-spline of order n (support [0, n]), i.e. the Irwin–Hall density.
pub fn cardinal_bspline(n: u32, x: f64) -> f64 {
    let n = n as usize;
    if x <= 0.0 || x >= n as f64 {
        return 0.0;
    }
    // vals[j] = M_k(x - j)
    let mut vals: Vec<f64> = (0..=n)
        .map(|j| {
            let y = x - j as f64;
            if (0.0..1.0).contains(&y) {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    for k in 2..=n {
        let kf = k as f64;
        for j in 0..=n - k {
            let y = x - j as f64;
            vals[j] = (y * vals[j] + (kf - y) * vals[j + 1]) / (kf - 1.0);
        }
    }
    vals[0]
}

/// g(x) for a spec, compiling on the fly.
pub fn eval_g(spec: &TestFunctionSpec, x: f64) -> Result<f64> {
    Ok(spec.compile()?.g(x))
}

/// h(t) for a spec, compiling on the fly.
pub fn eval_h(spec: &TestFunctionSpec, t: f64) -> Result<f64> {
    Ok(spec.compile()?.h(t))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triangle_examples() {
        let f = TestFunctionSpec::triangle(3.5).compile().unwrap();
        assert_eq!(f.g(0.0), 1.0);
        assert_eq!(f.g(1.75), 0.5);
        assert_eq!(f.g(7.0), 0.0);
        assert!((f.h(0.0) - 3.5).abs() < 1e-15);
        for &t in &[0.3, 1.0, 2.5, 10.0] {
            let want = 8.0 * (7.0 * t / 4.0f64).sin().powi(2) / (7.0 * t * t);
            assert!((f.h(t) - want).abs() < 1e-13);
        }
    }

    #[test]
    fn g_alpha_examples() {
        let g2 = TestFunctionSpec::g_alpha(2.0).compile().unwrap();
        assert!((g2.g(1.0) - 0.25).abs() < 1e-15);
        let h1 = TestFunctionSpec::g_alpha(1.0).compile().unwrap();
        assert!(h1.h(2.0) >= 0.5);
        // closed form of H_1
        for &t in &[0.7f64, 2.0, 5.0, 11.3] {
            let want = 2.0 / (t * t)
                + 2.0 * (PI * (t / 2.0).cos() / (t * (t * t - PI * PI))).powi(2) * (3.0 * t * t - PI * PI);
            assert!((h1.h(t) - want).abs() < 1e-12, "{t}");
        }
    }

    #[test]
    fn sinc_power_is_triangle_at_k1() {
        let s = TestFunctionSpec::sinc_power(3.0, 1).compile().unwrap();
        let t = TestFunctionSpec::triangle(3.0).compile().unwrap();
        for &x in &[0.0, 0.4, 1.9, 2.99] {
            assert!((s.g(x) - t.g(x)).abs() < 1e-14);
        }
        for &y in &[0.0, 0.4, 1.9, 7.0] {
            assert!((s.h(y) - t.h(y)).abs() < 1e-13);
        }
    }

    #[test]
    fn step_with_one_coefficient_is_triangle() {
        let s = TestFunctionSpec::step(2.0, vec![0.7]).compile().unwrap();
        let t = TestFunctionSpec::triangle(2.0).compile().unwrap();
        for &x in &[0.0, 0.5, 1.2] {
            assert!((s.g(x) - t.g(x)).abs() < 1e-15);
        }
        for &y in &[0.0, 0.5, 3.2] {
            assert!((s.h(y) - t.h(y)).abs() < 1e-13);
        }
    }

    #[test]
    fn bessel_nu0_is_triangle() {
        let b = TestFunctionSpec::bessel(4.0, 0.0).compile().unwrap();
        let t = TestFunctionSpec::triangle(4.0).compile().unwrap();
        for &x in &[0.0, 1.0, 3.3] {
            assert!((b.g(x) - t.g(x)).abs() < 1e-14);
        }
        for &y in &[0.0, 0.3, 2.0, 9.0] {
            assert!((b.h(y) - t.h(y)).abs() < 1e-12, "{y}: {} {}", b.h(y), t.h(y));
        }
    }

    #[test]
    fn bessel_g_at_zero_is_one() {
        for &nu in &[0.3, 1.0, 2.7, 10.0] {
            let b = TestFunctionSpec::bessel(5.0, nu).compile().unwrap();
            assert!((b.g(0.0) - 1.0).abs() < 1e-12, "nu={nu}: {}", b.g(0.0));
            assert_eq!(b.g(10.0), 0.0);
        }
    }

    #[test]
    fn json_round_trip() {
        let specs = [
            TestFunctionSpec::triangle(3.5),
            TestFunctionSpec::step(2.0, vec![0.1, 0.7, -0.2]),
            TestFunctionSpec::bessel(4.0, 1.0 / 3.0),
            TestFunctionSpec::g_alpha(1.25),
            TestFunctionSpec::sinc_power(16.118095650958319, 7),
        ];
        for s in specs {
            let j = serde_json::to_string(&s).unwrap();
            let back: TestFunctionSpec = serde_json::from_str(&j).unwrap();
            assert_eq!(s, back);
        }
        let j = serde_json::to_value(TestFunctionSpec::triangle(3.5)).unwrap();
        assert_eq!(j["family"], "triangle");
        assert_eq!(j["X"], 3.5);
        assert!(serde_json::from_str::<TestFunctionSpec>(r#"{"family":"triangle","X":-1,"params":{}}"#).is_err());
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let specs = [
            TestFunctionSpec::triangle(3.5),
            TestFunctionSpec::step(2.0, vec![0.1, 0.7, -0.2]),
            TestFunctionSpec::bessel(4.0, 1.5),
            TestFunctionSpec::g_alpha(1.25),
            TestFunctionSpec::sinc_power(6.0, 3),
        ];
        for s in specs {
            let f = s.compile().unwrap();
            for &t in &[0.37, 1.3, 4.4, 12.0] {
                let e = 1e-6;
                let fd = (f.h(t + e) - f.h(t - e)) / (2.0 * e);
                assert!((fd - f.h_deriv(t)).abs() < 1e-6 * (1.0 + fd.abs()), "{:?} t={t}: {fd} vs {}", s.family, f.h_deriv(t));
            }
        }
    }
}
