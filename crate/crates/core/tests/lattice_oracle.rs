use num_bigint::BigInt;
use proptest::prelude::*;
use sqfree::integer::{is_fundamental_i64, kronecker_i64, CharacterDescriptor};
use sqfree::lattice::*;

fn mat(v: Vec<Vec<i64>>) -> Vec<Vec<BigInt>> {
    v.into_iter().map(|r| r.into_iter().map(BigInt::from).collect()).collect()
}

// Smallest fundamental d > 10^5 with chi_d(p) = chi_{-3}(p) at every prime p <= 20 other than 3.
fn mimic_minus_three() -> i64 {
    (100_001i64..)
        .filter(|&d| d % 3 != 0 && is_fundamental_i64(d))
        .find(|&d| [2, 5, 7, 11, 13, 17, 19].iter().all(|&p| kronecker_i64(d, p) == kronecker_i64(-3, p)))
        .unwrap()
}

#[test]
fn recovers_planted_character() {
    let d = mimic_minus_three();
    let ch = CharacterDescriptor::from_i64(d).unwrap();
    let basis = build_twist_lattice(&ch, 20, 20, 24).unwrap();
    let red = lll_reduce(&basis.rows, (99, 100)).unwrap();
    assert!(is_lll_reduced(&red, (99, 100)));
    let found = extract_characters(&ch, &red, &basis, 5);
    assert_eq!(found[0].q, BigInt::from(-3), "d = {d}, found {found:?}");
    let trivial = correlation_objective(&ch, 1, &basis.primes);
    assert!(found[0].objective <= trivial);
}

#[test]
fn reduction_preserves_gram_determinant() {
    let ch = CharacterDescriptor::from_i64(1548889).unwrap();
    let basis = build_twist_lattice(&ch, 13, 13, 16).unwrap();
    let red = lll_reduce(&basis.rows, (3, 4)).unwrap();
    assert_eq!(gram_determinant(&basis.rows), gram_determinant(&red));
    assert!(is_lll_reduced(&red, (3, 4)));
}

#[test]
fn text_round_trip() {
    let ch = CharacterDescriptor::from_i64(-4).unwrap();
    let basis = build_twist_lattice(&ch, 7, 7, 8).unwrap();
    assert_eq!(rows_from_text(&basis.to_text()).unwrap(), basis.rows);
    assert!(rows_from_text("1 2\n3\n").is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lll_output_is_reduced_and_same_lattice(
        entries in prop::collection::vec(-50i64..50, 16),
    ) {
        let rows = mat(entries.chunks(4).map(|c| c.to_vec()).collect());
        prop_assume!(gram_determinant(&rows) != BigInt::from(0));
        let red = lll_reduce(&rows, (3, 4)).unwrap();
        prop_assert!(is_lll_reduced(&red, (3, 4)));
        prop_assert_eq!(gram_determinant(&rows), gram_determinant(&red));
        // the first vector obeys the LLL guarantee |b1|^2 <= 2^(n-1) lambda_1^2;
        // it is at most the shortest input row times 8 in squared norm
        let shortest = rows.iter().map(|r| norm2(r)).min().unwrap();
        prop_assert!(norm2(&red[0]) <= shortest * 8);
    }
}

// Shortest nonzero vector by exhaustive enumeration (Fincke-Pohst on floating Gram-Schmidt).
fn shortest_by_enumeration(rows: &[Vec<i64>]) -> i64 {
    let n = rows.len();
    let b: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|&x| x as f64).collect()).collect();
    let mut bs = b.clone();
    let mut mu = vec![vec![0.0; n]; n];
    let mut nn = vec![0.0; n];
    for i in 0..n {
        for j in 0..i {
            mu[i][j] = b[i].iter().zip(&bs[j]).map(|(x, y)| x * y).sum::<f64>() / nn[j];
            let bj = bs[j].clone();
            for (x, y) in bs[i].iter_mut().zip(&bj) {
                *x -= mu[i][j] * y;
            }
        }
        nn[i] = bs[i].iter().map(|x| x * x).sum();
    }
    let norm = |c: &[i64]| -> i64 {
        let mut v = vec![0i64; rows[0].len()];
        for (ci, r) in c.iter().zip(rows) {
            for (x, y) in v.iter_mut().zip(r) {
                *x += ci * y;
            }
        }
        v.iter().map(|x| x * x).sum()
    };
    let mut best = rows.iter().map(|r| r.iter().map(|x| x * x).sum::<i64>()).min().unwrap();
    let mut c = vec![0i64; n];
    fn rec(
        k: usize, c: &mut Vec<i64>, partial: f64, best: &mut i64, mu: &[Vec<f64>], nn: &[f64],
        norm: &dyn Fn(&[i64]) -> i64,
    ) {
        let n = c.len();
        let center: f64 = -(k + 1..n).map(|i| c[i] as f64 * mu[i][k]).sum::<f64>();
        let r = ((*best as f64 + 0.5 - partial) / nn[k]).max(0.0).sqrt();
        for x in (center - r).ceil() as i64..=(center + r).floor() as i64 {
            c[k] = x;
            let p = partial + (x as f64 - center).powi(2) * nn[k];
            if p > *best as f64 + 0.5 {
                continue;
            }
            if k == 0 {
                if c.iter().any(|&v| v != 0) {
                    *best = (*best).min(norm(c));
                }
            } else {
                rec(k - 1, c, p, best, mu, nn, norm);
            }
        }
        c[k] = 0;
    }
    rec(n - 1, &mut c, 0.0, &mut best, &mu, &nn, &norm);
    best
}

#[test]
fn enumeration_oracle_small_example() {
    assert_eq!(shortest_by_enumeration(&[vec![1, 1, 1], vec![-1, 0, 2], vec![3, 5, 6]]), 1);
}

#[test]
fn lll_quality_against_enumeration() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    let mut done = 0;
    while done < 10 {
        let rows: Vec<Vec<i64>> = (0..8).map(|_| (0..8).map(|_| rng.random_range(-30..=30)).collect()).collect();
        let big = mat(rows.clone());
        if gram_determinant(&big) == BigInt::from(0) {
            continue;
        }
        let red = lll_reduce(&big, (3, 4)).unwrap();
        let lambda1 = shortest_by_enumeration(&rows);
        let b1 = norm2(&red[0]);
        assert!(b1 <= BigInt::from(lambda1 << 7), "{b1} vs {lambda1}");
        done += 1;
    }
}

#[test]
fn charvector_norm_identity_and_fundamental_outputs() {
    let ch = CharacterDescriptor::from_i64(1548889).unwrap();
    let basis = build_twist_lattice(&ch, 20, 20, 12).unwrap();
    let (n, m) = basis.dims();
    for sel in [vec![], vec![0], vec![1, 3], vec![0, 2, m - 1]] {
        // explicit lattice vector, first block reduced into [0, 2w)
        let mut v = basis.rows[0].clone();
        for &j in &sel {
            for (x, y) in v.iter_mut().zip(&basis.rows[1 + j]) {
                *x += y;
            }
        }
        for k in 0..n {
            v[k] = v[k].modpow(&BigInt::from(1), &(&basis.weights[k] * 2));
        }
        assert_eq!(norm2(&v), charvector_norm2(&ch, &basis, &sel));
    }
    let red = lll_reduce(&basis.rows, (3, 4)).unwrap();
    let found = extract_characters(&ch, &red, &basis, 20);
    assert!(!found.is_empty());
    for e in &found {
        let q: i64 = e.q.clone().try_into().unwrap();
        assert!(q == 1 || is_fundamental_i64(q), "{q}");
        assert!(found[0].objective <= e.objective);
    }
    let trivial = found.iter().find(|e| e.q == BigInt::from(1));
    if let Some(t) = trivial {
        assert!(t.selected.is_empty());
    }
}
