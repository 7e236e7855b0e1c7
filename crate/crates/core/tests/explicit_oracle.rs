//! Explicit-formula identities checked against zero lists computed by PARI/GP
//! (`scripts/zero_oracle.py`). Tests skip when a fixture is missing.

use num_bigint::BigInt;
use num_traits::One;
use sqfree::explicit::{explicit_formula_residual, zero_sum, ZeroList, DEFAULT_PRIME_BUDGET};
use sqfree::integer::CharacterDescriptor;
use sqfree::lp::{tail_bound, Envelope};
use sqfree::testfn::TestFunctionSpec;
use std::path::PathBuf;

fn zeros(d: i64) -> Option<ZeroList> {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join(format!("tests/data/zeros_{d}.txt"));
    if !p.exists() {
        eprintln!("skipping: {} not found", p.display());
        return None;
    }
    Some(ZeroList::load(&p).unwrap())
}

fn fixture_ds() -> Vec<i64> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data");
    let mut ds: Vec<i64> = std::fs::read_dir(dir)
        .map(|it| {
            it.filter_map(|e| {
                let name = e.ok()?.file_name().into_string().ok()?;
                name.strip_prefix("zeros_")?.strip_suffix(".txt")?.parse().ok()
            })
            .collect()
        })
        .unwrap_or_default();
    ds.sort();
    ds
}

#[test]
fn worked_example_zero_sum() {
    let Some(z) = zeros(1548889) else { return };
    let spec = TestFunctionSpec::triangle(3.5);
    let (s, tail) = zero_sum(&z, &spec, z.t_complete, 1548889f64.ln(), &Envelope::default()).unwrap();
    assert!((s - 6.73).abs() <= 0.05, "zero sum {s}");
    let ch = CharacterDescriptor::from_i64(1548889).unwrap();
    let r = explicit_formula_residual(&ch, &BigInt::one(), &spec, &z, z.t_complete, DEFAULT_PRIME_BUDGET).unwrap();
    assert!(r.residual <= r.tail_bound + 1e-3, "{r:?}");
    assert!(tail.value >= r.residual);
}

#[test]
fn small_conductor_residual() {
    let Some(z) = zeros(5) else { return };
    let ch = CharacterDescriptor::from_i64(5).unwrap();
    let spec = TestFunctionSpec::triangle(3.0);
    let full = explicit_formula_residual(&ch, &BigInt::one(), &spec, &z, 50.0, DEFAULT_PRIME_BUDGET).unwrap();
    assert!(full.residual <= full.tail_bound + 1e-3, "{full:?}");
    let half = explicit_formula_residual(&ch, &BigInt::one(), &spec, &z, 25.0, DEFAULT_PRIME_BUDGET).unwrap();
    assert!(half.residual > full.residual);
}

#[test]
fn random_fundamental_residuals() {
    let specs = [
        TestFunctionSpec::triangle(4.0),
        TestFunctionSpec::bessel(6.0, 1.0),
        TestFunctionSpec::g_alpha(3.0),
        TestFunctionSpec::sinc_power(8.0, 3),
        TestFunctionSpec::step(5.0, vec![0.2, 1.0, 0.3]),
    ];
    let mut n = 0;
    for d in fixture_ds() {
        let z = zeros(d).unwrap();
        let ch = CharacterDescriptor::from_i64(d).unwrap();
        for spec in &specs {
            let r = explicit_formula_residual(&ch, &BigInt::one(), spec, &z, z.t_complete, DEFAULT_PRIME_BUDGET)
                .unwrap();
            assert!(r.residual <= r.tail_bound + 1e-3, "d={d} {spec:?}: {r:?}");
        }
        n += 1;
    }
    eprintln!("checked {n} zero lists");
}

#[test]
fn tail_from_zero_dominates_zero_sum() {
    for d in fixture_ds() {
        let z = zeros(d).unwrap();
        let spec = TestFunctionSpec::sinc_power(6.0, 2);
        let (s, _) = zero_sum(&z, &spec, z.t_complete, (d.abs() as f64).ln(), &Envelope::default()).unwrap();
        let e0 = tail_bound(&spec, 0.0, (d.abs() as f64).ln()).unwrap();
        assert!(e0 >= s, "d={d}: {e0} < {s}");
    }
}

#[test]
fn h_alpha_zero_sum_grows_like_log_modulus() {
    // sum over zeros of H_alpha is O(log |d|); fit the constant on the fixtures
    let mut ratios = Vec::new();
    for d in fixture_ds() {
        let z = zeros(d).unwrap();
        let spec = TestFunctionSpec::g_alpha(1.0);
        let m = (d.abs() as f64).ln();
        let (s, tail) = zero_sum(&z, &spec, z.t_complete, m, &Envelope::default()).unwrap();
        ratios.push((s + tail.value) / m);
    }
    if let Some(max) = ratios.iter().cloned().reduce(f64::max) {
        let min = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(max < 10.0 && max / min < 10.0, "{ratios:?}");
    }
}
