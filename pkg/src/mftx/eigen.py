"""Radial eigenmodes of vesicle diffusion inside the transmitter sphere.

Separation of variables on the sphere with the partially absorbing
(radiation) membrane condition

    d_v * lambda * j0'(lambda r_tx) = -k_f * j0(lambda r_tx)

leads, with x = lambda * r_tx and j0(z) = sin(z)/z, to the scalar condition

    x cot x = 1 - k_f r_tx / d_v =: c .

Because x cot x decreases strictly from 1 to -inf on (0, pi) and from +inf
to -inf on every ((n-1) pi, n pi), there is exactly one root per interval
whenever c < 1 (k_f > 0).  For c < 0 the n-th root further lies in
((n - 1/2) pi, n pi), since x cot x is negative only there.

Roots are found with a bracketing solver, so no starting guess can diverge;
each root is refined to floating-point resolution.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .config import SystemConfig
from .errors import EigenvalueError


def j0(z):
    """Spherical Bessel function of order zero, sin(z)/z with j0(0) = 1."""
    z = np.asarray(z, dtype=float)
    out = np.ones_like(z)
    nz = z != 0
    out[nz] = np.sin(z[nz]) / z[nz]
    return out if out.ndim else float(out)


def j0_prime(z):
    """Derivative of j0: (z cos z - sin z) / z^2, zero at the origin."""
    z = np.asarray(z, dtype=float)
    out = np.zeros_like(z)
    nz = z != 0
    zn = z[nz]
    out[nz] = (zn * np.cos(zn) - np.sin(zn)) / (zn * zn)
    return out if out.ndim else float(out)


def robin_scalar(config: SystemConfig) -> float:
    """The scalar c = 1 - k_f r_tx / d_v of the condition x cot x = c."""
    return 1.0 - config.k_f * config.r_tx / config.d_v


def _xcotx_minus_c(x: float, c: float) -> float:
    return x * math.cos(x) / math.sin(x) - c


@dataclass(frozen=True)
class EigenSpectrum:
    """First n_terms eigenvalues, ascending, with per-root residuals.

    lambdas    eigenvalues lambda_n = x_n / r_tx (1/um)
    x          scaled roots x_n of x cot x = robin_c
    robin_c    the scalar the roots solve for
    residuals  |d_v lambda j0'(lambda r_tx) + k_f j0(lambda r_tx)| per root
    """

    lambdas: np.ndarray
    x: np.ndarray
    robin_c: float
    residuals: np.ndarray

    def __post_init__(self):
        for name in ("lambdas", "x", "residuals"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    def __len__(self) -> int:
        return self.x.size


def _bracket(n: int, c: float) -> tuple[float, float]:
    """Sign-change bracket for the n-th root, valid for any c < 1."""
    if n == 1:
        if c <= 0:
            return 0.5 * math.pi, _shrink_right(math.pi, c)
        # For 0 < c < 1 the first root sits in (0, pi/2]; near zero
        # x cot x -> 1 > c, so a small positive abscissa brackets it.
        lo = 1e-8
        for _ in range(120):
            if _xcotx_minus_c(lo, c) > 0:
                return lo, 0.5 * math.pi
            lo *= 0.5
        raise EigenvalueError("bracket failure near the origin")
    lo = _shrink_left((n - 1) * math.pi, c)
    if c < 0:
        lo = (n - 0.5) * math.pi
    return lo, _shrink_right(n * math.pi, c)


def _shrink_left(edge: float, c: float) -> float:
    d = 1e-9 * max(1.0, edge)
    for _ in range(60):
        x = edge + d
        if _xcotx_minus_c(x, c) > 0:
            return x
        d *= 0.5
    raise EigenvalueError(f"bracket failure left of {edge:.6g}")


def _shrink_right(edge: float, c: float) -> float:
    d = 1e-9 * max(1.0, edge)
    for _ in range(60):
        x = edge - d
        if _xcotx_minus_c(x, c) < 0:
            return x
        d *= 0.5
    raise EigenvalueError(f"bracket failure right of {edge:.6g}")


def solve_eigenvalues(config: SystemConfig, n_terms: int = 200,
                      tol: float = 1e-12) -> EigenSpectrum:
    """Solve for the first n_terms roots of x cot x = robin_c.

    ``tol`` bounds the acceptable scaled residual
    |x cot x - c| / (1 + |c| + x); the solver itself refines each root to
    machine resolution.  Raises EigenvalueError when k_f = 0, where the
    membrane never reacts and the decaying spectrum degenerates (the lowest
    mode collapses to lambda = 0 and nothing is released).
    """
    if n_terms < 0:
        raise ValueError("n_terms must be >= 0")
    if config.k_f == 0:
        raise EigenvalueError("no-release limit: spectrum degenerate")
    c = robin_scalar(config)
    # Near c = 1 the first root sqrt(3 (1 - c)) drops below the scale at
    # which x cot x still evaluates away from 1.0, so no bracket exists.
    if 1.0 - c < 1e-12:
        raise EigenvalueError(
            "membrane reaction too weak: robin scalar within round-off of 1")
    return _solve_cached(c, config.r_tx, config.d_v, config.k_f,
                         n_terms, tol)


@functools.lru_cache(maxsize=32)
def _solve_cached(c: float, r_tx: float, d_v: float, k_f: float,
                  n_terms: int, tol: float) -> EigenSpectrum:
    xs = np.empty(n_terms)
    for n in range(1, n_terms + 1):
        lo, hi = _bracket(n, c)
        x = brentq(_xcotx_minus_c, lo, hi, args=(c,),
                   xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
        scaled = abs(_xcotx_minus_c(x, c)) / (1.0 + abs(c) + x)
        if scaled > tol:
            raise EigenvalueError(
                f"root {n} residual {scaled:.3e} exceeds tol {tol:.3e}")
        xs[n - 1] = x
    lams = xs / r_tx
    residuals = np.abs(d_v * lams * j0_prime(xs) + k_f * j0(xs))
    return EigenSpectrum(lambdas=lams, x=xs, robin_c=c, residuals=residuals)
