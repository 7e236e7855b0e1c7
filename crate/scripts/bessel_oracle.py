"""Reference values for spherical Bessel functions of real order (mpmath).

Prints (nu, u, sign, log10|j_nu(u)|) rows for the Rust oracle test.
"""
import mpmath as mp

mp.mp.dps = 50
for nu in [0.3, 2.5, 7, 50, 333.3, 5000]:
    for u in [1, 5, 40, 400, 4000, 1e5]:
        mu = mp.mpf(nu) + mp.mpf(1) / 2
        v = mp.besselj(mu, u, maxterms=10**7, maxprec=400000) * mp.sqrt(mp.pi / (2 * mp.mpf(u)))
        s = 1 if v > 0 else -1
        print(f"    ({float(nu)!r}, {float(u)!r}, {s}.0, {mp.nstr(mp.log10(abs(v)), 20)}),")
