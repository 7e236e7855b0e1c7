//! The lower bound as a quadratic form in step-function coefficients, and
//! its maximization through the top eigenpair.
//!
//! With f = sum a_n 1_{[nw - w/2, nw + w/2)} and g = f * f~, g is a
//! combination of tents Lambda_k(x) = max(0, w - |x - kw|), so the bound is
//! a^T A a with A Toeplitz, A_ii = l_0 and A_ij = l_|i-j| / 2, where l_k is
//! the bound functional applied to Lambda_k.

use crate::error::{Error, Result};
use crate::explicit::{arch_functional, for_prime_powers, log_abs, prime_limit, scan_character, twisted_parity};
use crate::integer::CharacterDescriptor;
use crate::quad::Kahan;
use crate::testfn::TestFunctionSpec;
use num_bigint::BigInt;
use serde::{Deserialize, Serialize};

/// Default number of steps on each side of the origin.
pub const DEFAULT_M: usize = 312;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadraticForm {
    #[serde(rename = "X")]
    pub x: f64,
    pub m: usize,
    /// Normalization |a|^2 = c making g(0) = 1.
    pub c: f64,
    pub dim: usize,
    /// Row-major dim x dim symmetric matrix.
    pub matrix: Vec<f64>,
    /// The bound functional on each tent, l_0 .. l_{2M}.
    pub tents: Vec<f64>,
    pub primes_checked_to: u64,
    #[serde(with = "crate::bigint_serde::option", default)]
    pub square_factor: Option<BigInt>,
}

impl QuadraticForm {
    /// A form from an explicit symmetric matrix, for testing the optimizer.
    pub fn from_matrix(dim: usize, matrix: Vec<f64>, c: f64) -> Result<Self> {
        if matrix.len() != dim * dim || dim == 0 {
            return Err(Error::Domain("matrix shape mismatch".into()));
        }
        Ok(QuadraticForm {
            x: f64::NAN,
            m: (dim - 1) / 2,
            c,
            dim,
            matrix,
            tents: Vec::new(),
            primes_checked_to: 0,
            square_factor: None,
        })
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.matrix[i * self.dim + j]
    }

    /// a^T A a.
    pub fn eval(&self, a: &[f64]) -> f64 {
        let mut k = Kahan::new();
        for i in 0..self.dim {
            k.add(a[i] * dot(&self.matrix[i * self.dim..(i + 1) * self.dim], a));
        }
        k.value()
    }
}

pub fn build_quadratic_form(
    ch: &CharacterDescriptor,
    q: &BigInt,
    x: f64,
    m: usize,
    budget: u64,
) -> Result<QuadraticForm> {
    if !(x.is_finite() && x > 0.0) {
        return Err(Error::Domain("X must be positive".into()));
    }
    let n = 2 * m + 1;
    if n > 2001 {
        return Err(Error::Domain("dimension 2M+1 must be at most 2001".into()));
    }
    let w = x / n as f64;
    let limit = prime_limit(x, budget)?;

    let scan = scan_character(&ch.d, q, limit, || vec![Kahan::new(); n + 1], |acc, p, chi| {
        for_prime_powers(p, chi, limit, |_, weight, t| {
            if t >= x {
                return;
            }
            let s = t / w;
            let j = (s.floor() as usize).min(n - 1);
            let r = s - j as f64;
            acc[j].add(weight * w * (1.0 - r));
            acc[j + 1].add(weight * w * r);
        });
    });
    let mut tents = vec![0.0; n];
    for (k, t) in tents.iter_mut().enumerate() {
        let mut s = Kahan::new();
        for a in &scan.accs {
            s.add(a[k].value());
        }
        *t = 2.0 * s.value();
    }

    let parity = twisted_parity(&ch.d, q);
    for (k, t) in tents.iter_mut().enumerate() {
        let c = k as f64 * w;
        let tent = move |y: f64| (w - (y - c).abs()).max(0.0);
        let arch = if k == 0 {
            arch_functional(&tent, &|y: f64| w - tent(y), w, w, &[0.0, w], parity)?
        } else {
            let pts = [c - w, c, c + w];
            arch_functional(&tent, &|y: f64| -tent(y), 0.0, c + w, &pts, parity)?
        };
        *t += arch;
    }
    tents[0] -= w * log_abs(q);

    let mut matrix = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let k = i.abs_diff(j);
            matrix[i * n + j] = if k == 0 { tents[0] } else { tents[k] / 2.0 };
        }
    }
    Ok(QuadraticForm {
        x,
        m,
        c: n as f64 / x,
        dim: n,
        matrix,
        tents,
        primes_checked_to: scan.square_factor.unwrap_or(limit),
        square_factor: scan.square_factor.map(BigInt::from),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Optimized {
    /// Maximizer with |a|^2 = c.
    pub a: Vec<f64>,
    pub bound: f64,
    pub eigenvalue: f64,
    /// ||A v - lambda v|| for the unit eigenvector.
    pub residual: f64,
    /// lambda_1 minus an estimate of lambda_2 (0 for dimension 1).
    pub eigengap: f64,
}

impl Optimized {
    pub fn spec(&self, x: f64) -> TestFunctionSpec {
        TestFunctionSpec::step(x, self.a.clone())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn matvec(a: &[f64], n: usize, v: &[f64], out: &mut [f64]) {
    for i in 0..n {
        out[i] = dot(&a[i * n..(i + 1) * n], v);
    }
}

fn normalize(v: &mut [f64]) -> f64 {
    let s = norm(v);
    if s > 0.0 {
        for x in v.iter_mut() {
            *x /= s;
        }
    }
    s
}

fn project_out(v: &mut [f64], basis: &[Vec<f64>]) {
    for b in basis {
        let c = dot(v, b);
        for (x, y) in v.iter_mut().zip(b) {
            *x -= c * y;
        }
    }
}

// Power iteration on A - sigma I restricted to the complement of `deflate`.
fn power_iterate(a: &[f64], n: usize, sigma: f64, deflate: &[Vec<f64>], iters: usize, tol: f64) -> (Vec<f64>, f64) {
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * ((i as f64) * 0.7).sin()).collect();
    project_out(&mut v, deflate);
    if normalize(&mut v) == 0.0 {
        v = vec![0.0; n];
        v[0] = 1.0;
        project_out(&mut v, deflate);
        normalize(&mut v);
    }
    let mut av = vec![0.0; n];
    let mut rq = 0.0;
    for _ in 0..iters {
        matvec(a, n, &v, &mut av);
        rq = dot(&v, &av);
        let mut r = 0.0;
        for i in 0..n {
            r += (av[i] - rq * v[i]).powi(2);
        }
        if r.sqrt() <= tol {
            break;
        }
        for i in 0..n {
            av[i] -= sigma * v[i];
        }
        project_out(&mut av, deflate);
        if normalize(&mut av) == 0.0 {
            break;
        }
        std::mem::swap(&mut v, &mut av);
    }
    (v, rq)
}

// Solve M x = b by Gaussian elimination with partial pivoting; None if singular.
fn lu_solve(m: &[f64], n: usize, b: &[f64]) -> Option<Vec<f64>> {
    let mut a = m.to_vec();
    let mut x = b.to_vec();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs()))?;
        if a[piv * n + col] == 0.0 {
            return None;
        }
        if piv != col {
            for k in 0..n {
                a.swap(col * n + k, piv * n + k);
            }
            x.swap(col, piv);
        }
        let d = a[col * n + col];
        for r in col + 1..n {
            let f = a[r * n + col] / d;
            if f != 0.0 {
                for k in col..n {
                    a[r * n + k] -= f * a[col * n + k];
                }
                x[r] -= f * x[col];
            }
        }
    }
    for col in (0..n).rev() {
        let mut s = x[col];
        for k in col + 1..n {
            s -= a[col * n + k] * x[k];
        }
        x[col] = s / a[col * n + col];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

// Rayleigh quotient iteration from v.
fn rqi(a: &[f64], n: usize, mut v: Vec<f64>, tol: f64) -> (Vec<f64>, f64, f64) {
    let mut av = vec![0.0; n];
    let mut lam = 0.0;
    let mut res = f64::INFINITY;
    for _ in 0..30 {
        matvec(a, n, &v, &mut av);
        lam = dot(&v, &av);
        res = (0..n).map(|i| (av[i] - lam * v[i]).powi(2)).sum::<f64>().sqrt();
        if res <= tol {
            break;
        }
        let mut shifted = a.to_vec();
        for i in 0..n {
            shifted[i * n + i] -= lam;
        }
        match lu_solve(&shifted, n, &v) {
            Some(mut y) => {
                if normalize(&mut y) == 0.0 {
                    break;
                }
                v = y;
            }
            None => break,
        }
    }
    (v, lam, res)
}

/// Whether s I - A is positive definite, by Cholesky.
pub fn dominates(a: &[f64], n: usize, s: f64) -> bool {
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut d = s - a[j * n + j];
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        if !(d > 0.0) {
            return false;
        }
        let d = d.sqrt();
        l[j * n + j] = d;
        for i in j + 1..n {
            let mut v = -a[i * n + j];
            for k in 0..j {
                v -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = v / d;
        }
    }
    true
}

/// Largest eigenpair of the form, scaled so |a|^2 = c.
pub fn optimize_coefficients(form: &QuadraticForm) -> Result<Optimized> {
    let n = form.dim;
    let a = &form.matrix;
    let scale = (0..n)
        .map(|i| (0..n).map(|j| a[i * n + j].abs()).sum::<f64>())
        .fold(0.0, f64::max)
        .max(1e-300);
    let tol = 1e-12 * scale;
    // Gershgorin lower end, so A - sigma I is positive semidefinite
    let sigma = (0..n)
        .map(|i| a[i * n + i] - (0..n).filter(|&j| j != i).map(|j| a[i * n + j].abs()).sum::<f64>())
        .fold(f64::INFINITY, f64::min);

    let mut found: Vec<Vec<f64>> = Vec::new();
    let mut best: Option<(Vec<f64>, f64, f64)> = None;
    for _ in 0..n.min(8) {
        let (v0, _) = power_iterate(a, n, sigma, &found, 3000, tol);
        let (v, lam, res) = rqi(a, n, v0, tol);
        let take = best.as_ref().is_none_or(|b| lam > b.1);
        if take {
            best = Some((v.clone(), lam, res));
        }
        let (_, top, _) = best.as_ref().unwrap();
        if dominates(a, n, top + 1e-9 * scale) {
            break;
        }
        found.push(v);
    }
    let (mut v, lam, res) = best.unwrap();
    if !dominates(a, n, lam + 1e-9 * scale) {
        return Err(Error::Numeric(format!(
            "top eigenvalue not certified (best {lam}, residual {res:e})"
        )));
    }
    if res > 1e-10 * scale.max(1.0) {
        return Err(Error::Numeric(format!("eigenvector residual {res:e} above 1e-10")));
    }
    let eigengap = if n == 1 {
        0.0
    } else {
        let (_, l2) = power_iterate(a, n, sigma, std::slice::from_ref(&v), 500, tol);
        lam - l2
    };
    let imax = (0..n).max_by(|&i, &j| v[i].abs().total_cmp(&v[j].abs())).unwrap();
    let sgn = v[imax].signum();
    let sc = sgn * form.c.sqrt();
    for x in v.iter_mut() {
        *x *= sc;
    }
    Ok(Optimized { a: v, bound: form.c * lam, eigenvalue: lam, residual: res, eigengap })
}
