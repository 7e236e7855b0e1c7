"""Zero lists for L(s, chi_d) from PARI/GP, written as test fixtures.

Each file holds a `#T_complete=<T>` header and one ordinate per line.
Usage: python3 scripts/zero_oracle.py [outdir]
"""
import random
import sys
from pathlib import Path

import cypari2

pari = cypari2.Pari()
pari.allocatemem(4 * 10**9)
out = Path(sys.argv[1] if len(sys.argv) > 1 else "crates/core/tests/data")
out.mkdir(parents=True, exist_ok=True)


def write(d, t):
    zs = pari(f"lfunzeros(lfuncreate({d}), {t})")
    lines = [f"#T_complete={t}", f"#source=pari lfunzeros d={d}"]
    lines += [f"{float(z):.15g}" for z in zs]
    (out / f"zeros_{d}.txt").write_text("\n".join(lines) + "\n")
    print(d, t, len(zs))


write(5, 200)
write(-4, 200)
write(1548889, 1000)
rng = random.Random(20240601)
picked = []
while len(picked) < 20:
    d = rng.randint(10**4, 10**6) * rng.choice([1, -1])
    if int(pari(f"isfundamental({d})")) and d not in picked:
        picked.append(d)
for d in picked:
    write(d, 100)
