//! Test-function pairs: transforms, positivity, normalization, decay and the
//! quadratic-form optimizer.

use num_bigint::BigInt;
use num_traits::One;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sqfree::explicit::{lower_bound, DEFAULT_PRIME_BUDGET};
use sqfree::integer::{is_fundamental_i64, CharacterDescriptor};
use sqfree::qform::{build_quadratic_form, optimize_coefficients};
use sqfree::quad::integrate_pieces;
use sqfree::special::ln_gamma;
use sqfree::testfn::{TestFunction, TestFunctionSpec};

fn random_spec(rng: &mut ChaCha8Rng, family: usize) -> TestFunctionSpec {
    let x = rng.random_range(0.5..8.0);
    match family {
        0 => TestFunctionSpec::triangle(x),
        1 => {
            let m = rng.random_range(0..4usize);
            TestFunctionSpec::step(x, (0..2 * m + 1).map(|_| rng.random_range(-1.0..1.0)).collect())
        }
        2 => TestFunctionSpec::bessel(x, rng.random_range(0.0..6.0)),
        3 => TestFunctionSpec::g_alpha(x),
        _ => TestFunctionSpec::sinc_power(x, rng.random_range(1..6)),
    }
}

fn transform_by_quadrature(f: &TestFunction, t: f64) -> f64 {
    let mut pts = f.breakpoints();
    // split into pieces short against the period of cos(tx)
    let x = f.support();
    let n = (x * t / 2.0).ceil().max(1.0) as usize * 4;
    pts.extend((1..n).map(|i| x * i as f64 / n as f64));
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    2.0 * integrate_pieces(|u| f.g(u) * (t * u).cos(), &pts, 1e-13).unwrap()
}

#[test]
fn transform_consistency() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for family in 0..5 {
        for _ in 0..20 {
            let spec = random_spec(&mut rng, family);
            let f = spec.compile().unwrap();
            let t = rng.random_range(0.0..20.0);
            let (q, h) = (transform_by_quadrature(&f, t), f.h(t));
            assert!((q - h).abs() <= 1e-8, "{spec:?} t={t}: {q} vs {h}");
        }
    }
}

#[test]
fn transforms_are_nonnegative() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for family in 0..5 {
        for _ in 0..4 {
            let f = random_spec(&mut rng, family).compile().unwrap();
            for i in 0..=10_000 {
                let t = 200.0 * i as f64 / 10_000.0;
                assert!(f.h(t) >= -1e-12, "{:?} t={t}", f.spec());
            }
        }
    }
}

#[test]
fn bessel_decay_constant_is_stable() {
    let (nu, x) = (5.0f64, 4.0f64);
    let f = TestFunctionSpec::bessel(x, nu).compile().unwrap();
    let envelope = |t: f64| nu.powf(-0.5) * (-2.0 * nu).exp() * x * (4.0 * nu / (x * t)).powf(2.0 * nu + 2.0);
    let t0 = 4.0 * nu / x;
    let window_sup = |a: f64, b: f64| {
        (0..=4000).map(|i| a + (b - a) * i as f64 / 4000.0).map(|t| f.h(t) / envelope(t)).fold(0.0, f64::max)
    };
    let c = window_sup(t0, 10.0 * t0);
    assert!(c.is_finite() && c > 0.0);
    for (a, b) in [(10.0 * t0, 40.0 * t0), (40.0 * t0, 200.0 * t0)] {
        let w = window_sup(a, b);
        assert!(w <= 1.5 * c && w >= c / 50.0, "sup on [{a}, {b}] is {w}, fitted C = {c}");
    }
    // the exact closed form of the transform agrees at a few points
    let ratio = |t: f64| {
        let u = x * t / 2.0;
        let lg = ln_gamma(1.5 + 2.0 * nu) + 2.0 * ln_gamma(1.0 + nu) - ln_gamma(1.0 + 2.0 * nu);
        let jn = spherical_j(nu as usize, u);
        2.0 * x / std::f64::consts::PI.sqrt() * lg.exp() * jn * jn * (4.0 / (x * t)).powf(2.0 * nu)
    };
    for t in [3.0, 9.0, 31.0] {
        assert!((ratio(t) - f.h(t)).abs() <= 1e-8 * f.h(t), "t={t}: {} vs {}", ratio(t), f.h(t));
    }
}

// j_n(u) for integer n by upward recurrence, accurate for u > n.
fn spherical_j(n: usize, u: f64) -> f64 {
    let mut a = u.sin() / u;
    let mut b = u.sin() / (u * u) - u.cos() / u;
    if n == 0 {
        return a;
    }
    for k in 1..n {
        let c = (2 * k + 1) as f64 / u * b - a;
        a = b;
        b = c;
    }
    b
}

#[test]
fn h_alpha_floor() {
    for alpha in [0.5, 1.0, 2.0, 5.0] {
        let f = TestFunctionSpec::g_alpha(alpha).compile().unwrap();
        for i in 0..=20_000 {
            let t = 100.0 * i as f64 / 20_000.0;
            let floor = 2.0 * alpha / (alpha * t).powi(2).max(std::f64::consts::PI.powi(2) / 3.0);
            assert!(f.h(t) >= floor * (1.0 - 1e-12), "alpha={alpha} t={t}");
        }
    }
}

#[test]
fn optimizer_is_monotone_along_nested_dimensions() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut done = 0;
    while done < 4 {
        let d: i64 = rng.random_range(-1_000_000..1_000_000);
        if !is_fundamental_i64(d) || d.abs() < 1000 {
            continue;
        }
        let ch = CharacterDescriptor::from_i64(d).unwrap();
        let x = rng.random_range(3.0..7.0);
        let mut prev = f64::NEG_INFINITY;
        for m in [0usize, 1, 4, 13] {
            let form = build_quadratic_form(&ch, &BigInt::one(), x, m, DEFAULT_PRIME_BUDGET).unwrap();
            let b = optimize_coefficients(&form).unwrap().bound;
            assert!(b >= prev - 1e-8, "d={d} X={x} M={m}: {b} < {prev}");
            prev = b;
        }
        done += 1;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn normalized_with_support(seed in any::<u64>(), family in 0usize..5, frac in 0.0f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = random_spec(&mut rng, family);
        let f = spec.compile().unwrap();
        prop_assert!((f.g(0.0) - 1.0).abs() <= 1e-12);
        prop_assert_eq!(f.g(spec.x * (1.0 + frac)), 0.0);
        prop_assert!((f.g(-spec.x * frac) - f.g(spec.x * frac)).abs() == 0.0);
    }

    #[test]
    fn spec_json_round_trip_is_bit_stable(seed in any::<u64>(), family in 0usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = random_spec(&mut rng, family);
        let js = serde_json::to_string(&spec).unwrap();
        let back: TestFunctionSpec = serde_json::from_str(&js).unwrap();
        prop_assert_eq!(serde_json::to_string(&back).unwrap(), js);
        prop_assert_eq!(back, spec);
    }

    #[test]
    fn m0_form_matches_triangle_bound(d in -200_000i64..200_000, x in 2.0f64..6.0) {
        prop_assume!(is_fundamental_i64(d) && d != 1);
        let ch = CharacterDescriptor::from_i64(d).unwrap();
        let form = build_quadratic_form(&ch, &BigInt::one(), x, 0, DEFAULT_PRIME_BUDGET).unwrap();
        let got = optimize_coefficients(&form).unwrap().bound;
        let want = lower_bound(&ch, &BigInt::one(), &TestFunctionSpec::triangle(x), DEFAULT_PRIME_BUDGET).unwrap().lower_bound;
        prop_assert!((got - want).abs() <= 1e-8);
    }

    #[test]
    fn form_is_symmetric(d in -200_000i64..200_000, m in 1usize..6) {
        prop_assume!(is_fundamental_i64(d) && d != 1);
        let ch = CharacterDescriptor::from_i64(d).unwrap();
        let form = build_quadratic_form(&ch, &BigInt::from(-3), 4.0, m, DEFAULT_PRIME_BUDGET).unwrap();
        for i in 0..form.dim {
            for j in 0..i {
                let (a, b) = (form.at(i, j), form.at(j, i));
                prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1e-300));
            }
        }
    }
}
