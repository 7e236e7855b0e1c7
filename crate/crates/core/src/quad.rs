//! Numerical integration and compensated summation.

use crate::error::{Error, Result};

/// Kahan–Babuška (Neumaier) compensated accumulator.
#[derive(Clone, Copy, Debug, Default)]
pub struct Kahan {
    sum: f64,
    comp: f64,
}

impl Kahan {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Sum a slice in index order with compensation.
pub fn kahan_sum(xs: &[f64]) -> f64 {
    let mut k = Kahan::new();
    for &x in xs {
        k.add(x);
    }
    k.value()
}

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// One Gauss–Kronrod 7/15 panel: (integral, error estimate).
pub fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut rk = fc * WGK[7];
    let mut rg = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        rk += WGK[j] * s;
        if j % 2 == 1 {
            rg += WG[j / 2] * s;
        }
    }
    (rk * h, ((rk - rg) * h).abs())
}

/// Adaptive Gauss–Kronrod integration to absolute tolerance `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let mut stack = vec![(a, b, 0u32)];
    let mut total = Kahan::new();
    let width = (b - a).abs();
    let mut evals = 0usize;
    while let Some((lo, hi, depth)) = stack.pop() {
        let (v, err) = gk15(&f, lo, hi);
        evals += 1;
        let local_tol = tol * ((hi - lo).abs() / width).max(1e-3);
        if err <= local_tol || depth >= 48 || (hi - lo).abs() < 1e-14 * width.max(1.0) {
            if err > local_tol && depth >= 48 {
                return Err(Error::Numeric(format!(
                    "quadrature on [{a}, {b}] did not converge (panel error {err:e})"
                )));
            }
            total.add(v);
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((mid, hi, depth + 1));
            stack.push((lo, mid, depth + 1));
        }
        if evals > 2_000_000 {
            return Err(Error::Numeric("quadrature evaluation budget exhausted".into()));
        }
    }
    Ok(total.value())
}

/// Integrate over consecutive breakpoints, summing the pieces.
pub fn integrate_pieces<F: Fn(f64) -> f64>(f: F, points: &[f64], tol: f64) -> Result<f64> {
    let mut k = Kahan::new();
    let n = points.len().saturating_sub(1).max(1) as f64;
    for w in points.windows(2) {
        k.add(integrate(&f, w[0], w[1], tol / n)?);
    }
    Ok(k.value())
}

/// Tanh–sinh quadrature on [a, b]; robust against integrable endpoint
/// singularities. `f` receives (x, distance to a, distance to b) so callers
/// can evaluate endpoint factors without cancellation.
pub fn tanh_sinh<F: Fn(f64, f64, f64) -> f64>(f: F, a: f64, b: f64, levels: u32) -> f64 {
    let h2 = 0.5 * (b - a);
    let half_pi = std::f64::consts::FRAC_PI_2;
    let mut step = 1.0;
    let tmax = 4.0;
    let eval = |t: f64| -> f64 {
        let s = half_pi * t.sinh();
        let cs = s.cosh();
        // distance from the nearer endpoint, 1 - |tanh(s)| computed stably
        let one_minus = 1.0 / (s.abs().exp() * cs);
        let x = s.tanh();
        let w = half_pi * t.cosh() / (cs * cs);
        if one_minus * h2 == 0.0 {
            return 0.0;
        }
        let (da, db) = if x < 0.0 {
            (h2 * one_minus, h2 * (2.0 - one_minus))
        } else {
            (h2 * (2.0 - one_minus), h2 * one_minus)
        };
        let xx = if x < 0.0 { a + da } else { b - db };
        w * f(xx, da, db)
    };
    let mut sum = eval(0.0);
    let mut k = 1;
    while k as f64 * step <= tmax {
        let t = k as f64 * step;
        sum += eval(t) + eval(-t);
        k += 1;
    }
    let mut est = sum * step;
    for _ in 0..levels {
        step *= 0.5;
        let mut k = 1;
        while k as f64 * step <= tmax {
            let t = k as f64 * step;
            sum += eval(t) + eval(-t);
            k += 2;
        }
        est = sum * step;
    }
    est * h2
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gk_polynomial_and_trig() {
        let v = integrate(|x| x * x, 0.0, 3.0, 1e-12).unwrap();
        assert!((v - 9.0).abs() < 1e-12);
        let v = integrate(f64::sin, 0.0, std::f64::consts::PI, 1e-12).unwrap();
        assert!((v - 2.0).abs() < 1e-12);
    }

    #[test]
    fn tanh_sinh_endpoint_singularity() {
        // integral of sqrt(1 - x^2) over [-1, 1] is pi/2
        let v = tanh_sinh(|_, da, db| (da * db).sqrt(), -1.0, 1.0, 6);
        assert!((v - std::f64::consts::FRAC_PI_2).abs() < 1e-13, "{v}");
        let v = tanh_sinh(|_, da, _| da.powf(-0.5), 0.0, 1.0, 6);
        assert!((v - 2.0).abs() < 1e-9, "{v}");
    }

    #[test]
    fn kahan_beats_naive() {
        let xs: Vec<f64> = std::iter::once(1.0).chain(std::iter::repeat_n(1e-16, 10_000)).collect();
        assert!((kahan_sum(&xs) - (1.0 + 1e-12)).abs() < 1e-15);
    }
}
