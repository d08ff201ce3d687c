"""Smoke test for the anderson_corr_py extension module.

Build it with `maturin develop -m crates/py/Cargo.toml`, or copy
target/release/libanderson_corr_py.so next to this script as
anderson_corr_py.so, then run `python python/smoke_test.py`.
"""

import cmath
import math
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent))

import anderson_corr_py as ac


def gauss(x):
    return math.exp(-x * x / 2) / math.sqrt(2 * math.pi)


def main():
    g = ac.Density("gaussian:sigma2=1,r=1")
    assert repr(g).startswith("Density(")
    assert abs(g(0.3) - gauss(0.3)) < 1e-14

    # Im I_0^+(E) = π g(E)
    for e in (-1.0, 0.0, 0.7):
        assert abs(ac.i0_boundary(g, "+", e).imag - math.pi * gauss(e)) < 1e-10

    # partial fractions of J at distinct points reduce to single-pole integrals
    z1, z2 = complex(0.2, 0.5), complex(-0.4, -0.3)
    lhs = ac.j_n(g, [0, 0], [z1, z2])
    rhs = (ac.i_n(g, 0, z1) - ac.i_n(g, 0, z2)) / (z1 - z2)
    assert abs(lhs - rhs) < 1e-10, (lhs, rhs)

    assert ac.count_walks(1, 6) == math.comb(6, 3)

    free = ac.Expansion(1, 0.0, 4, g)
    assert abs(free.dos(0.5).dos - gauss(0.5)) < 1e-10

    ex = ac.Expansion(1, 0.05, 8, g)
    z = complex(0.3, 0.4)
    s = ex.green([z])
    assert s.order == 8 and len(s.partial_sums) == 9
    assert math.isfinite(s.tail_bound)
    assert abs(ex.green([z.conjugate()]).value - s.value.conjugate()) < 1e-12
    assert '"value_re"' in s.to_json()

    mean, stderr = ac.mc_green(1, 20, 0.05, g, z, samples=400, seed=7)
    assert abs(mean - s.value) <= 4 * stderr + s.tail_bound, (mean, s.value, stderr)

    corr = ac.Expansion(1, 0.05, 2, g, observables=["velocity:nu=0", "velocity:nu=0"])
    b = corr.boundary("+-", [-1.0, 1.0])
    assert b.sigmas == "+-" and cmath.isfinite(b.value)

    try:
        ac.Expansion(1, 0.1, 2, ac.Density.cauchy(1.0, 0.5))
    except ValueError:
        pass
    else:
        raise AssertionError("cauchy density has no second moment")

    print("smoke test passed")


if __name__ == "__main__":
    main()
