"""Shared check routines used by the unit tests and the acceptance suite."""
import math

import numpy as np

from fracopt import (build_cylinder, build_omega, caputo_weights, graded_axis,
                     make_params, weight_integrals)
from fracopt.assembly import assemble_stiffness, assemble_trace_mass
from fracopt.mesh import default_zeta


def weighted_integral_oracle(y0, y1, alpha):
    """High-precision reference for the four weighted hat-function integrals."""
    import mpmath as mp
    mp.mp.dps = 40
    h = mp.mpf(y1) - mp.mpf(y0)

    if y0 == 0.0:
        # substitute y = t^k so the weight singularity at 0 disappears
        k = max(2, int(math.ceil(2.0 / (1.0 + alpha))))

        def quad(f):
            g = lambda t: k * t ** (k - 1) * f(t ** k)
            return float(mp.quad(g, [0, mp.mpf(y1) ** (mp.mpf(1) / k)],
                                 maxdegree=10))
    else:
        def quad(f):
            return float(mp.quad(f, [mp.mpf(y0), mp.mpf(y1)], maxdegree=10))

    phl = lambda y: (mp.mpf(y1) - y) / h
    phr = lambda y: (y - mp.mpf(y0)) / h
    w = lambda y: y ** mp.mpf(alpha)
    mass_ll = quad(lambda y: w(y) * phl(y) ** 2)
    mass_lr = quad(lambda y: w(y) * phl(y) * phr(y))
    mass_rr = quad(lambda y: w(y) * phr(y) ** 2)
    stiff = quad(lambda y: w(y)) / float(h) ** 2
    return mass_ll, mass_lr, mass_rr, stiff


def check_weight_integrals(rng, cases=12, tol=1e-10):
    """Closed forms vs the mpmath oracle (absolute+relative mix)."""
    worst = 0.0
    for _ in range(cases):
        alpha = rng.uniform(-0.9, 0.9)
        y0 = rng.choice([0.0, rng.uniform(0.0, 0.5)])
        y1 = y0 + rng.uniform(0.05, 1.0)
        got = weight_integrals(y0, y1, alpha)
        ref = weighted_integral_oracle(y0, y1, alpha)
        for g, r in zip(got, ref):
            worst = max(worst, abs(g - r) / max(1.0, abs(r)))
    assert worst <= tol, f"weighted integrals off by {worst:.3e}"
    return worst


def build_test_mesh(n=2, M=6, s=0.6, Y=1.5, zeta=None):
    params = make_params(s, 1.0, Y)
    if zeta is None:
        zeta = default_zeta(params.alpha)
    mesh = build_cylinder(build_omega(n, M), graded_axis(M, Y, zeta))
    return mesh, params


def check_operator_symmetry(mesh, params, tol=1e-12):
    A = assemble_stiffness(mesh, params)
    gap = abs(A - A.T)
    rel = gap.max() / abs(A).max()
    assert rel <= tol, f"stiffness asymmetry {rel:.3e}"
    Mt = assemble_trace_mass(mesh)
    gap = abs(Mt - Mt.T)
    rel = gap.max() / abs(Mt).max()
    assert rel <= tol, f"trace mass asymmetry {rel:.3e}"
    return A, Mt


def check_spd_rayleigh(A, rng, samples=100):
    n = A.shape[0]
    for _ in range(samples):
        v = rng.standard_normal(n)
        q = float(v @ (A @ v))
        assert q > 0.0, "nonpositive Rayleigh quotient"


def check_telescoping(gamma, K):
    w = caputo_weights(gamma, K, 1.0 / K)
    a = w.a
    assert a[0] == 1.0
    assert np.all(a > 0.0)
    assert np.all(np.diff(a) < 0.0)
    for k in range(K):
        total = float(np.sum(a[:k] - a[1:k + 1]) + a[k])
        assert abs(total - 1.0) <= 1e-12, f"telescoping off at k={k}: {total}"
