//! Special functions: log-gamma and Bessel functions of real order.

use crate::error::{domain, Error, Result};
use num_complex::Complex64;
use std::f64::consts::PI;

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

pub fn gamma(x: f64) -> f64 {
    libm::tgamma(x)
}

/// Bessel J_mu(x) as (sign, ln|J|), for mu >= 0 and x > 0.
pub fn bessel_j_log(mu: f64, x: f64) -> Result<(f64, f64)> {
    if mu < 0.0 || x < 0.0 || !mu.is_finite() || !x.is_finite() {
        return domain(format!("bessel_j needs mu >= 0, x >= 0 (got {mu}, {x})"));
    }
    if x == 0.0 {
        return Ok(if mu == 0.0 { (1.0, 0.0) } else { (0.0, f64::NEG_INFINITY) });
    }
    if x < 2.0 || x * x <= 4.0 * (mu + 1.0) {
        let s = series_sum(mu, x);
        let ln = mu * (0.5 * x).ln() - ln_gamma(mu + 1.0) + s.abs().ln();
        Ok((s.signum(), ln))
    } else if x > 25.0 && x > mu {
        // asymptotic at the fractional order, then upward recurrence,
        // which is stable while the order stays below x
        let n = mu.floor();
        let frac = mu - n;
        let mut jm = hankel_asymptotic(frac, x);
        if n == 0.0 {
            return Ok((jm.signum(), jm.abs().ln()));
        }
        let mut j = hankel_asymptotic(frac + 1.0, x);
        let mut k = frac + 1.0;
        while k < mu - 0.5 {
            let next = 2.0 * k / x * j - jm;
            jm = j;
            j = next;
            k += 1.0;
        }
        Ok((j.signum(), j.abs().ln()))
    } else {
        steed(mu, x)
    }
}

// Large-argument expansion J = sqrt(2/(pi x)) (P cos chi - Q sin chi).
fn hankel_asymptotic(mu: f64, x: f64) -> f64 {
    let m4 = 4.0 * mu * mu;
    let mut p = 1.0;
    let mut q = 0.0;
    let mut term = 1.0;
    let mut k = 1.0;
    let mut last = f64::INFINITY;
    loop {
        term *= (m4 - (2.0 * k - 1.0f64).powi(2)) / (k * 8.0 * x);
        if term.abs() > last || term == 0.0 {
            break;
        }
        last = term.abs();
        // k odd feeds Q, k even feeds P, signs alternate in pairs
        match (k as u64) % 4 {
            1 => q += term,
            2 => p -= term,
            3 => q -= term,
            _ => p += term,
        }
        if term.abs() < 1e-17 {
            break;
        }
        k += 1.0;
    }
    // chi = x - c with c = (mu/2 + 1/4) pi; expand to keep x exact
    let c = (0.5 * mu + 0.25) * PI;
    let (sx, cx) = x.sin_cos();
    let (sc, ccos) = c.sin_cos();
    let cos_chi = cx * ccos + sx * sc;
    let sin_chi = sx * ccos - cx * sc;
    (2.0 / (PI * x)).sqrt() * (p * cos_chi - q * sin_chi)
}

pub fn bessel_j(mu: f64, x: f64) -> Result<f64> {
    let (s, l) = bessel_j_log(mu, x)?;
    Ok(s * l.exp())
}

// sum_k (-x^2/4)^k Gamma(mu+1) / (k! Gamma(k+mu+1))
fn series_sum(mu: f64, x: f64) -> f64 {
    let y = -0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 0.0;
    loop {
        term *= y / ((k + 1.0) * (k + mu + 1.0));
        sum += term;
        k += 1.0;
        if term.abs() < 1e-17 * sum.abs() || k > 500.0 {
            break;
        }
    }
    sum
}

// Steed's method: CF1 for J'/J at order mu, stable downward recurrence to a
// small order, CF2 for (J' + iY')/(J + iY), and the Wronskian to normalize.
fn steed(xnu: f64, x: f64) -> Result<(f64, f64)> {
    const EPS: f64 = 1e-16;
    const FPMIN: f64 = 1e-300;
    let maxit = 100_000 + 4 * x as usize;
    let nl = ((xnu - x + 1.5).floor().max(0.0)) as usize;
    let xmu = xnu - nl as f64;
    let xi = 1.0 / x;
    let xi2 = 2.0 * xi;
    let w = xi2 / PI;
    let mut isign = 1.0;
    let mut h = (xnu * xi).max(FPMIN);
    let mut b = xi2 * xnu;
    let mut d = 0.0;
    let mut c = h;
    let mut converged = false;
    for _ in 0..maxit {
        b += xi2;
        d = b - d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = b - 1.0 / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let del = c * d;
        h *= del;
        if d < 0.0 {
            isign = -isign;
        }
        if (del - 1.0).abs() < EPS {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Numeric(format!("bessel CF1 failed at mu={xnu}, x={x}")));
    }
    let mut rjl = isign;
    let mut rjpl = h * rjl;
    let rjl1 = rjl;
    let mut log_scale = 0.0;
    for l in (1..=nl).rev() {
        let order = xmu + l as f64;
        let t = order * xi * rjl + rjpl;
        rjpl = (order - 1.0) * xi * t - rjl;
        rjl = t;
        if rjl.abs() > 1e200 {
            rjl *= 1e-200;
            rjpl *= 1e-200;
            log_scale += 200.0 * std::f64::consts::LN_10;
        }
    }
    if rjl == 0.0 {
        rjl = EPS;
    }
    let f = rjpl / rjl;
    // CF2: p + iq = -1/(2x) + i + (i/x) K, K = a1/(B1 + a2/(B2 + ...)),
    // a_k = ((2k-1)/2)^2 - mu^2, B_k = 2(x + ik).
    let tiny = Complex64::new(1e-150, 0.0);
    let mut fk = tiny;
    let mut cc = fk;
    let mut dd = Complex64::new(0.0, 0.0);
    converged = false;
    for k in 1..maxit {
        let kf = k as f64;
        let ak = (kf - 0.5) * (kf - 0.5) - xmu * xmu;
        let bk = Complex64::new(2.0 * x, 2.0 * kf);
        dd = bk + dd * ak;
        if dd.norm() < 1e-150 {
            dd = tiny;
        }
        cc = bk + ak / cc;
        if cc.norm() < 1e-150 {
            cc = tiny;
        }
        dd = dd.inv();
        let del = cc * dd;
        fk *= del;
        if (del - 1.0).norm() < EPS {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Numeric(format!("bessel CF2 failed at mu={xnu}, x={x}")));
    }
    let pq = Complex64::new(-0.5 * xi, 1.0) + Complex64::new(0.0, xi) * fk;
    let (p, q) = (pq.re, pq.im);
    let gam = (p - f) / q;
    let rjmu = (w / ((p - f) * gam + q)).sqrt().copysign(rjl);
    let val = rjl1 * rjmu / rjl;
    Ok((val.signum(), val.abs().ln() - log_scale))
}

/// Largest order accepted by the spherical Bessel routines.
pub const NU_MAX: f64 = 1e4;
/// Largest argument accepted by the spherical Bessel routines.
pub const U_MAX: f64 = 1e6;

fn check_nu_u(nu: f64, u: f64) -> Result<()> {
    if !(0.0..=NU_MAX).contains(&nu) || !(0.0..=U_MAX).contains(&u) || nu.is_nan() || u.is_nan() {
        return domain(format!(
            "spherical Bessel needs 0 <= nu <= {NU_MAX}, 0 <= u <= {U_MAX} (got {nu}, {u})"
        ));
    }
    Ok(())
}

/// Spherical Bessel function j_nu(u) = sqrt(pi/(2u)) J_{nu+1/2}(u).
pub fn spherical_bessel_j(nu: f64, u: f64) -> Result<f64> {
    check_nu_u(nu, u)?;
    if u == 0.0 {
        return Ok(if nu == 0.0 { 1.0 } else { 0.0 });
    }
    let (s, l) = bessel_j_log(nu + 0.5, u)?;
    Ok(s * (l + 0.5 * (PI / (2.0 * u)).ln()).exp())
}

/// Spherical Bessel j_nu(u) as (sign, ln|j|), usable when the value underflows.
pub fn spherical_bessel_j_log(nu: f64, u: f64) -> Result<(f64, f64)> {
    check_nu_u(nu, u)?;
    let (s, l) = bessel_j_log(nu + 0.5, u)?;
    Ok((s, l + 0.5 * (PI / (2.0 * u)).ln()))
}

/// j_nu(u) (2/u)^nu, finite at u = 0 where it equals sqrt(pi) / (2 Gamma(3/2 + nu)).
pub fn spherical_bessel_scaled(nu: f64, u: f64) -> Result<f64> {
    check_nu_u(nu, u)?;
    let mu = nu + 0.5;
    if u < 2.0 || u * u <= 4.0 * (mu + 1.0) {
        let s = series_sum(mu, u);
        return Ok(0.5 * PI.sqrt() * s * (-ln_gamma(mu + 1.0)).exp());
    }
    let (s, l) = bessel_j_log(mu, u)?;
    Ok(s * (l + 0.5 * (PI / (2.0 * u)).ln() + nu * (2.0 / u).ln()).exp())
}
