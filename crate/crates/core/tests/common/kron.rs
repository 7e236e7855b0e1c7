#![allow(dead_code)]

// Kronecker symbol from its definition: factor n, take Legendre symbols by
// Euler's criterion, (d/2) from d mod 8, (d/-1) from the sign of d, and
// (d/0) = [d = +-1].

fn pow_mod(mut b: u64, mut e: u64, m: u64) -> u64 {
    let mut r = 1 % m;
    b %= m;
    while e > 0 {
        if e & 1 == 1 {
            r = r * b % m;
        }
        b = b * b % m;
        e >>= 1;
    }
    r
}

pub fn legendre_euler(d: i64, p: u64) -> i8 {
    let a = d.rem_euclid(p as i64) as u64;
    if a == 0 {
        return 0;
    }
    if pow_mod(a, (p - 1) / 2, p) == 1 {
        1
    } else {
        -1
    }
}

fn at_two(d: i64) -> i8 {
    match d.rem_euclid(8) {
        1 | 7 => 1,
        3 | 5 => -1,
        _ => 0,
    }
}

pub fn kronecker_oracle(d: i64, n: i64) -> i8 {
    if n == 0 {
        return if d == 1 || d == -1 { 1 } else { 0 };
    }
    let mut r: i8 = if n < 0 && d < 0 { -1 } else { 1 };
    let mut m = n.unsigned_abs();
    let mut p = 2u64;
    while p * p <= m {
        while m % p == 0 {
            r *= if p == 2 { at_two(d) } else { legendre_euler(d, p) };
            m /= p;
        }
        p += 1;
    }
    if m > 1 {
        r *= if m == 2 { at_two(d) } else { legendre_euler(d, m) };
    }
    r
}

pub fn is_prime(n: u64) -> bool {
    n >= 2 && (2..).take_while(|k| k * k <= n).all(|k| n % k != 0)
}

pub fn squarefree(n: u64) -> bool {
    (2..).take_while(|k| k * k <= n).all(|k| n % (k * k) != 0)
}
