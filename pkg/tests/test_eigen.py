"""Eigenvalue solver against an independent bisection oracle.

The transcendental condition x cot x = c has exactly one root per interval
((n-1) pi, n pi) for c < 1 because x cot x decreases monotonically from
+inf (or 1 on the first interval) to -inf across each interval.  The
oracle below brackets each root and bisects 80 times, which pins the root
far below the comparison tolerance and shares no code with the solver.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mftx import EigenvalueError, robin_scalar, solve_eigenvalues
from mftx.eigen import j0, j0_prime

from test_config import valid_configs


def _bisect_root(c: float, n: int, iters: int = 80) -> float:
    lo = 1e-12 if n == 1 else (n - 1) * math.pi + 1e-12
    hi = n * math.pi - 1e-12
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if mid / math.tan(mid) - c > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def test_first_root_frozen(defaults, spectrum):
    # value frozen from the bisection oracle at the defaults' c = -191/9
    assert spectrum.x[0] == pytest.approx(3.0011105687354886, abs=1e-12)
    assert spectrum.robin_c == pytest.approx(-191.0 / 9.0, rel=1e-15)


def test_matches_bisection_oracle(defaults, spectrum):
    c = robin_scalar(defaults)
    for n in (1, 2, 3, 7, 20, 50, 100, 200):
        oracle = _bisect_root(c, n)
        assert spectrum.x[n - 1] == pytest.approx(oracle, abs=1e-11 * n)


def test_roots_live_in_their_intervals(defaults, spectrum):
    n = np.arange(1, len(spectrum) + 1)
    assert np.all(spectrum.x > (n - 1) * math.pi)
    assert np.all(spectrum.x < n * math.pi)
    # with c < 0 each root is pushed past the interval midpoint
    assert robin_scalar(defaults) < 0
    assert np.all(spectrum.x > (n - 0.5) * math.pi)
    assert np.all(np.diff(spectrum.x) > 0)


def test_lambda_is_x_over_radius(defaults, spectrum):
    assert np.allclose(spectrum.lambdas, spectrum.x / defaults.r_tx,
                       rtol=1e-15)


def test_dimensional_residuals_small(defaults, spectrum):
    # d_v lambda j0'(x) + k_f j0(x) should vanish at every eigenvalue
    assert np.max(np.abs(spectrum.residuals)) < 1e-9


def test_positive_robin_scalar_branch(defaults):
    weak = defaults.replace(k_f=0.5)
    c = robin_scalar(weak)
    assert 0.0 < c < 1.0
    spec = solve_eigenvalues(weak, 20)
    assert 0.0 < spec.x[0] < math.pi / 2
    for n in (1, 2, 5, 20):
        assert spec.x[n - 1] == pytest.approx(_bisect_root(c, n), abs=1e-11 * n)


def test_no_release_limit_is_degenerate(defaults):
    with pytest.raises(EigenvalueError, match="no-release"):
        solve_eigenvalues(defaults.replace(k_f=0.0), 10)


def test_spectrum_is_cached(defaults):
    a = solve_eigenvalues(defaults, 64)
    b = solve_eigenvalues(defaults, 64)
    assert a is b


def test_vanishing_reaction_rate_raises_cleanly(defaults):
    # k_f small enough that 1 - c falls below round-off must not divide
    # by zero while hunting for a bracket near the origin
    feeble = defaults.replace(k_f=1e-18)
    with pytest.raises(EigenvalueError, match="round-off"):
        solve_eigenvalues(feeble, 5)


@given(valid_configs())
@settings(max_examples=60, deadline=None)
def test_roots_bracketed_for_any_config(config):
    if config.k_f == 0.0 or 1.0 - robin_scalar(config) < 1e-10:
        return
    spec = solve_eigenvalues(config, 24)
    n = np.arange(1, 25)
    assert np.all(spec.x > (n - 1) * math.pi)
    assert np.all(spec.x < n * math.pi)
    c = robin_scalar(config)
    residual = np.abs(spec.x / np.tan(spec.x) - c)
    assert np.all(residual < 1e-9 * (1.0 + abs(c) + spec.x))


def test_spherical_bessel_helpers():
    assert j0(0.0) == 1.0
    assert j0_prime(0.0) == 0.0
    assert j0(math.pi) == pytest.approx(0.0, abs=1e-16)
    z = 0.7
    assert j0(z) == pytest.approx(math.sin(z) / z, rel=1e-15)
    step = 1e-6
    numeric = (j0(z + step) - j0(z - step)) / (2 * step)
    assert j0_prime(z) == pytest.approx(numeric, abs=1e-9)
