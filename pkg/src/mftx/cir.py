"""Analytic channel impulse response of the membrane-fusion transmitter.

Quantities, all per released molecule:

* ``release_density``   f_r(t), probability density of the molecule release
  (vesicle fusion) time, from the radial eigenmode expansion.
* ``release_fraction``  F_r(t), cumulative released fraction.
* ``point_hitting``     density of absorption at the receiver for a point
  source at distance l_alpha from the receiver center, with decay.
* ``uniform_hitting``   the same for a source spread uniformly over the
  transmitter membrane, folded over the sphere.
* ``e2e_hitting``       end-to-end absorption density: membrane release
  through fusion followed by passage to the receiver.  Closed form built
  from per-mode singular convolution integrals.
* ``e2e_hitting_convolved``  slow cross-check of the same quantity by direct
  numerical convolution of ``uniform_hitting`` with ``release_density``.

The e2e series is an alternating eigenmode sum whose terms decay only like
1/n, so a raw truncation at n_terms is not accurate enough for tight
tolerances.  ``e2e_hitting`` therefore adds the analytically integrated tail:
for large n the per-mode integral expands (by parts) in inverse powers of the
mode decay rate, and the resulting smooth alternating tail series is summed
by repeated averaging of its partial sums.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad as _scipy_quad
from scipy.optimize import golden as _golden

from .config import SystemConfig, derived_constants
from .eigen import EigenSpectrum, solve_eigenvalues
from .errors import QuadratureError, SeriesError


class PrecisionLossWarning(UserWarning):
    """Two nearly equal passage integrals were subtracted; the difference

    retains fewer significant digits than either term.  Flagged, not fixed."""


@dataclass(frozen=True)
class SeriesPolicy:
    """Truncation policy for the eigenmode series.

    n_terms   modes summed exactly (tail handling is per-function)
    t_min     smallest evaluable time; below it the decaying exponentials no
              longer control the sum and evaluation errors out instead of
              returning cancellation noise
    tail_tol  diagnostic threshold, both for the convergence check below
              t_min and for clamping round-off negatives to zero.  The
              default leaves room for the completeness-rewrite residue,
              which reaches a few 1e-10 when k_f r_tx / d_v is tiny, while
              real truncation failures overshoot it by many orders.
    """

    n_terms: int = 200
    t_min: float = 1e-3
    tail_tol: float = 1e-9

    def __post_init__(self):
        if self.n_terms < 1:
            raise ValueError("n_terms must be >= 1")
        if self.t_min <= 0 or self.tail_tol <= 0:
            raise ValueError("t_min and tail_tol must be > 0")


@dataclass(frozen=True)
class QuadraturePolicy:
    rel_tol: float = 1e-9
    abs_tol: float = 1e-14
    max_subdivisions: int = 200

    def __post_init__(self):
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ValueError("tolerances must be > 0")
        if self.max_subdivisions < 10:
            raise ValueError("max_subdivisions must be >= 10")


# Extra modes used when summing the analytic series tail.
_TAIL_MODES = 160

# Accuracy floor of the end-to-end closed form, 1/s.  Before the release
# gets going the true density sits below the third-order tail truncation
# left after the averaged limit, which shows up as signed noise of order
# 1e-10; negatives within this floor are zeroed rather than treated as a
# divergent series.
_E2E_NOISE_FLOOR = 1e-8


def _mode_arrays(config: SystemConfig, spectrum: EigenSpectrum,
                 n_terms: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-mode (lambda, density coefficient, fraction coefficient)."""
    if len(spectrum) < n_terms:
        raise ValueError(f"spectrum holds {len(spectrum)} modes, "
                         f"policy needs {n_terms}")
    x = spectrum.x[:n_terms]
    lam = spectrum.lambdas[:n_terms]
    denom = 2.0 * x - np.sin(2.0 * x)
    j0x = np.sin(x) / x
    a_coef = 4.0 * config.r_tx ** 2 * config.k_f * lam ** 3 * j0x / denom
    b_coef = a_coef / (config.d_v * lam ** 2)
    return lam, a_coef, b_coef


def release_density(config: SystemConfig, spectrum: EigenSpectrum | None,
                    policy: SeriesPolicy, t) -> np.ndarray | float:
    """Density f_r(t) of the molecule release time, 1/s.

    f_r(0) is defined as 0 by continuity.  With k_f = 0 nothing is ever
    released and the density is identically zero (no spectrum needed).
    """
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t_arr < 0):
        raise ValueError("t must be >= 0")
    if config.k_f == 0.0:
        out = np.zeros_like(t_arr)
        return out if np.ndim(t) else float(out[0])
    lam, a_coef, _ = _mode_arrays(config, spectrum, policy.n_terms)
    rates = config.d_v * lam ** 2
    out = np.zeros_like(t_arr)
    pos = t_arr > 0
    if np.any(pos):
        terms = a_coef[None, :] * np.exp(-np.outer(t_arr[pos], rates))
        vals = terms.sum(axis=1)
        small = t_arr[pos] < policy.t_min
        if np.any(small):
            bad = np.abs(terms[small, -1]) > policy.tail_tol * np.abs(vals[small])
            if np.any(bad):
                t_bad = t_arr[pos][small][bad][0]
                raise SeriesError(
                    f"series not converged at t={t_bad:.3e} s with "
                    f"n_terms={policy.n_terms}")
        out[pos] = _clamp_negative(vals, policy)
    return out if np.ndim(t) else float(out[0])


def release_fraction(config: SystemConfig, spectrum: EigenSpectrum | None,
                     policy: SeriesPolicy, t) -> np.ndarray | float:
    """Cumulative released fraction F_r(t), in [0, 1].

    The mode sum of the constant part telescopes to exactly 1 (every vesicle
    eventually fuses), so the fraction is evaluated as one minus the decaying
    remainder; the remainder series converges geometrically for t >= t_min
    while a raw truncation of the constant part would be off by the slow
    1/x_n tail.  The identity behind the rewrite is asserted in the tests.
    """
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t_arr < 0):
        raise ValueError("t must be >= 0")
    if config.k_f == 0.0:
        out = np.zeros_like(t_arr)
        return out if np.ndim(t) else float(out[0])
    lam, _, b_coef = _mode_arrays(config, spectrum, policy.n_terms)
    rates = config.d_v * lam ** 2
    out = np.zeros_like(t_arr)
    pos = t_arr > 0
    if np.any(pos):
        terms = b_coef[None, :] * np.exp(-np.outer(t_arr[pos], rates))
        rem = terms.sum(axis=1)
        small = t_arr[pos] < policy.t_min
        if np.any(small):
            bad = np.abs(terms[small, -1]) > policy.tail_tol * np.abs(rem[small])
            if np.any(bad):
                t_bad = t_arr[pos][small][bad][0]
                raise SeriesError(
                    f"series not converged at t={t_bad:.3e} s with "
                    f"n_terms={policy.n_terms}")
        vals = _clamp_negative(1.0 - rem, policy)
        over = vals > 1.0
        if np.any(over):
            if np.any(vals[over] - 1.0 >= policy.tail_tol):
                raise SeriesError("released fraction exceeds 1 beyond "
                                  "round-off")
            vals[over] = 1.0
        out[pos] = vals
    return out if np.ndim(t) else float(out[0])


def _clamp_negative(vals: np.ndarray, policy: SeriesPolicy,
                    allowance: float | None = None) -> np.ndarray:
    """Zero small negatives; raise when they exceed ``allowance``."""
    limit = policy.tail_tol if allowance is None else allowance
    neg = vals < 0
    if np.any(neg):
        if np.any(np.abs(vals[neg]) >= limit):
            worst = float(np.min(vals))
            raise SeriesError(f"series value {worst:.3e} negative beyond "
                              "round-off")
        vals = vals.copy()
        vals[neg] = 0.0
    return vals


def point_hitting(config: SystemConfig, l_alpha: float, t) -> np.ndarray | float:
    """Absorption-time density for a point source at distance l_alpha.

    First passage of free diffusion to the absorbing receiver surface,
    thinned by exp(-k_d t).  Defined as 0 at t = 0 by continuity.
    """
    if l_alpha <= config.r_rx:
        raise ValueError("point source must lie outside the receiver: "
                         f"l_alpha={l_alpha} <= r_rx={config.r_rx}")
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t_arr < 0):
        raise ValueError("t must be >= 0")
    out = np.zeros_like(t_arr)
    pos = t_arr > 0
    tp = t_arr[pos]
    d = config.d_sigma
    gap = l_alpha - config.r_rx
    amp = config.r_rx * gap / (l_alpha * np.sqrt(4.0 * math.pi * d * tp ** 3))
    out[pos] = amp * np.exp(-gap * gap / (4.0 * d * tp) - config.k_d * tp)
    return out if np.ndim(t) else float(out[0])


def uniform_hitting(config: SystemConfig, t) -> np.ndarray | float:
    """Absorption-time density for a membrane-uniform source, 1/s.

    Folding the point-source density over the transmitter sphere collapses
    to a difference of two lobes with passage scales beta1 (near side) and
    beta2 (far side).  Defined as 0 at t = 0 by continuity.
    """
    dc = derived_constants(config)
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t_arr < 0):
        raise ValueError("t must be >= 0")
    out = np.zeros_like(t_arr)
    pos = t_arr > 0
    tp = t_arr[pos]
    pref = (2.0 * dc.rho * config.r_tx * config.r_rx / config.l) \
        * np.sqrt(math.pi * config.d_sigma / tp)
    decay = config.k_d * tp
    out[pos] = pref * (np.exp(-dc.beta1 / tp - decay)
                       - np.exp(-dc.beta2 / tp - decay))
    return out if np.ndim(t) else float(out[0])


def singular_convolution(config: SystemConfig, spectrum: EigenSpectrum,
                         quad: QuadraturePolicy, zeta: float, n: int,
                         t: float) -> float:
    """Integral of the inverse-square-root passage kernel against mode n.

        I(zeta, n, t) = int_0^t (t-u)^(-1/2) exp(-zeta/(t-u) - a_n u) du,
        a_n = d_v lambda_n^2 - k_d.

    The substitution w = sqrt(t-u) removes the endpoint singularity:
    I = 2 int_0^sqrt(t) exp(-zeta/w^2 - a_n (t - w^2)) dw, which is what the
    adaptive Gauss-Kronrod routine integrates.
    """
    if not 1 <= n <= len(spectrum):
        raise ValueError(f"mode index {n} outside 1..{len(spectrum)}")
    if t < 0:
        raise ValueError("t must be >= 0")
    if t == 0.0:
        return 0.0
    lam = float(spectrum.lambdas[n - 1])
    a = config.d_v * lam * lam - config.k_d

    def integrand(w):
        with np.errstate(divide="ignore"):
            expo = -zeta / (w * w) - a * (t - w * w)
        return 2.0 * np.exp(expo)

    val, err = _scipy_quad(integrand, 0.0, math.sqrt(t),
                           epsabs=quad.abs_tol, epsrel=quad.rel_tol,
                           limit=quad.max_subdivisions)
    if err > 10.0 * max(quad.abs_tol, quad.rel_tol * abs(val), 1e-300):
        raise QuadratureError(
            f"singular convolution quadrature stalled at t={t:.3g}",
            estimate=val, error_bound=err)
    return val


def _tanh_sinh_grid(t: float, h: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Nodes u, complements t-u, and weights for int_0^t on a tanh-sinh grid.

    Endpoint distances are computed through exp(-2|y|) so nodes hug both
    endpoints far below float spacing of t; no node ever collides with an
    endpoint.
    """
    k_max = int(math.floor(3.8 / h))
    k = np.arange(-k_max, k_max + 1)
    y = 0.5 * math.pi * np.sinh(k * h)
    q = np.exp(-2.0 * np.abs(y))
    near = t * q / (1.0 + q)     # distance to the endpoint y points at
    far = t / (1.0 + q)
    u = np.where(y >= 0, far, near)
    v = np.where(y >= 0, near, far)
    sech2 = 4.0 * q / (1.0 + q) ** 2
    w = h * (t / 2.0) * (0.5 * math.pi) * np.cosh(k * h) * sech2
    return u, v, w


def _passage_kernel(v: np.ndarray, zeta: float, k_d: float) -> np.ndarray:
    """(t-u)^(-1/2) exp(-zeta/(t-u)) with the global decay folded in.

    Folding exp(-k_d t) = exp(-k_d u) exp(-k_d (t-u)) into kernel and mode
    factors keeps every exponent non-positive, so the shifted mode integrals
    can never overflow regardless of k_d.
    """
    return np.exp(-zeta / v - k_d * v) / np.sqrt(v)


def _averaged_limit(terms: np.ndarray) -> float:
    """Limit of an alternating series by repeated averaging of partial sums."""
    s = np.cumsum(terms)
    while s.size > 1:
        s = 0.5 * (s[1:] + s[:-1])
    return float(s[0])


def _kernel_g_derivs(t: float, b1: float, b2: float) -> tuple[float, float, float]:
    """g, g', g'' at v=t for g(v) = v^(-1/2)(exp(-b1/v) - exp(-b2/v))."""
    g = gp = gpp = 0.0
    for b, sign in ((b1, 1.0), (b2, -1.0)):
        h = math.exp(-b / t) / math.sqrt(t)
        d1 = b / t ** 2 - 0.5 / t
        d2 = d1 * d1 + (-2.0 * b / t ** 3 + 0.5 / t ** 2)
        g += sign * h
        gp += sign * h * d1
        gpp += sign * h * d2
    return g, gp, gpp


def _e2e_single(config: SystemConfig, dc, lam_all: np.ndarray,
                coef_all: np.ndarray, n_terms: int, quad: QuadraturePolicy,
                t: float) -> float:
    """Shifted mode sum S + analytic tail T at one time; p_v = P0 (S + T)."""
    lam = lam_all[:n_terms]
    coef = coef_all[:n_terms]
    mode_rates = config.d_v * lam ** 2

    s_prev = None
    diff = None
    cancel = 1.0
    for level in range(7):
        h = 0.5 / (1 << level)
        u, v, w = _tanh_sinh_grid(t, h)
        k1 = _passage_kernel(v, dc.beta1, config.k_d) * w
        k2 = _passage_kernel(v, dc.beta2, config.k_d) * w
        decay = np.exp(-np.outer(mode_rates, u))
        e1 = decay @ k1
        e2 = decay @ k2
        diff = e1 - e2
        s_cur = float(coef @ diff)
        scale = float(np.abs(coef * diff).sum())
        lobes = float((np.abs(coef) * np.maximum(np.abs(e1),
                                                 np.abs(e2))).sum())
        if lobes > 0.0:
            # fraction of the lobe magnitude surviving the e1 - e2
            # subtraction; sign alternation across modes is not counted
            cancel = min(cancel, scale / lobes)
        if s_prev is not None:
            thr = quad.rel_tol * (abs(s_cur) + 1e-3 * scale) + quad.abs_tol
            if abs(s_cur - s_prev) <= thr:
                s_prev = s_cur
                break
        s_prev = s_cur
    else:
        raise QuadratureError(
            f"mode integrals not converged at t={t:.3g}",
            estimate=s_prev, error_bound=abs(s_cur - s_prev))

    if 0.0 < cancel < 1e-3:
        warnings.warn(
            f"passage-lobe difference at t={t:.3g} s retains only a "
            f"{cancel:.1e} fraction of the lobe magnitude",
            PrecisionLossWarning, stacklevel=3)

    # Analytic tail: integrate the per-mode integral by parts in the mode
    # rate a_n; each power is a smooth alternating series in n, summed by
    # repeated averaging.  The exp(-k_d t) shift rides along unchanged.
    lam_t = lam_all[n_terms:]
    coef_t = coef_all[n_terms:]
    a_t = config.d_v * lam_t ** 2 - config.k_d
    tail = 0.0
    if lam_t.size and a_t[0] > 0:
        g, gp, gpp = _kernel_g_derivs(t, dc.beta1, dc.beta2)
        shift = math.exp(-config.k_d * t)
        if shift > 0.0 and g != 0.0:
            terms = coef_t * (g / a_t - gp / a_t ** 2 + gpp / a_t ** 3) * shift
            tail = _averaged_limit(terms)
    return s_prev + tail


def e2e_hitting(config: SystemConfig, spectrum: EigenSpectrum,
                policy: SeriesPolicy, quad: QuadraturePolicy,
                t) -> np.ndarray | float:
    """End-to-end absorption-time density p_v(t), 1/s, per released molecule.

    Mode-by-mode passage integrals evaluated on a shared tanh-sinh grid
    (exact for the first n_terms modes) plus the analytically integrated
    series tail; see the module docstring for why the tail is required.
    """
    if config.k_f == 0.0:
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.zeros_like(t_arr)
        return out if np.ndim(t) else float(out[0])
    if len(spectrum) < policy.n_terms:
        raise ValueError(f"spectrum holds {len(spectrum)} modes, "
                         f"policy needs {policy.n_terms}")
    dc = derived_constants(config)
    ext = solve_eigenvalues(config, policy.n_terms + _TAIL_MODES)
    x = ext.x
    denom = 2.0 * x - np.sin(2.0 * x)
    coef_all = ext.lambdas ** 3 * (np.sin(x) / x) / denom
    p0 = (8.0 * dc.rho * config.r_tx ** 3 * config.r_rx * config.k_f
          * math.sqrt(math.pi * config.d_sigma) / config.l)

    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t_arr < 0):
        raise ValueError("t must be >= 0")
    out = np.zeros_like(t_arr)
    for i, ti in enumerate(t_arr):
        if ti == 0.0:
            continue
        out[i] = p0 * _e2e_single(config, dc, ext.lambdas, coef_all,
                                  policy.n_terms, quad, float(ti))
    out = _clamp_negative(out, policy,
                          allowance=max(policy.tail_tol, _E2E_NOISE_FLOOR))
    return out if np.ndim(t) else float(out[0])


def e2e_hitting_convolved(config: SystemConfig, spectrum: EigenSpectrum,
                          policy: SeriesPolicy, quad: QuadraturePolicy,
                          t) -> np.ndarray | float:
    """p_v(t) by direct numerical convolution of p_u with f_r.

    Independent cross-check for ``e2e_hitting``: adaptive quadrature of
    uniform_hitting(t-u) * release_density(u) over u.  The lower limit is
    t_min; below it the release density is far beneath double-precision
    resolution (the vesicle would have to cross the transmitter almost
    instantly), so the omitted mass is zero to machine precision.
    """
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t_arr < 0):
        raise ValueError("t must be >= 0")
    out = np.zeros_like(t_arr)
    for i, ti in enumerate(t_arr):
        ti = float(ti)
        if ti <= policy.t_min:
            continue

        def integrand(u):
            return (uniform_hitting(config, ti - u)
                    * release_density(config, spectrum, policy, u))

        val, err = _scipy_quad(integrand, policy.t_min, ti,
                               epsabs=quad.abs_tol,
                               epsrel=max(quad.rel_tol, 1e-10),
                               limit=quad.max_subdivisions)
        if err > max(1e-12, 1e-6 * abs(val)):
            raise QuadratureError(
                f"convolution quadrature stalled at t={ti:.3g}",
                estimate=val, error_bound=err)
        out[i] = max(val, 0.0)
    return out if np.ndim(t) else float(out[0])


def peak_release_time(config: SystemConfig, spectrum: EigenSpectrum,
                      policy: SeriesPolicy) -> float:
    """Time at which the release density peaks, by scan plus golden search.

    A 1000-point logarithmic scan over [t_lo, T] establishes the bracket,
    with T doubled until the density has fallen to 1e-6 of the running
    maximum; golden-section refinement then localizes the peak.  Raises if
    the density is monotone over the scan (no interior peak).

    The scan floor is raised above ``policy.t_min`` when the truncated
    series cannot resolve such early times: the highest retained mode must
    have decayed to round-off, i.e. ``d_v lambda_max^2 t >= 35``.  The peak
    sits near ``0.1 r_tx^2 / d_v``, orders of magnitude later, so the
    floor never clips it.
    """
    t_lo = max(policy.t_min,
               35.0 / (config.d_v * float(spectrum.lambdas[-1]) ** 2))
    t_hi = 4.0 * config.r_tx ** 2 / config.d_v
    for _ in range(60):
        probe = release_density(config, spectrum, policy,
                                np.geomspace(t_lo, t_hi, 64))
        if probe[-1] < 1e-6 * probe.max() and probe.max() > 0:
            break
        t_hi *= 2.0
    else:
        raise SeriesError("release density does not decay on any practical "
                          "horizon")
    grid = np.geomspace(t_lo, t_hi, 1000)
    vals = release_density(config, spectrum, policy, grid)
    i = int(np.argmax(vals))
    if i == 0 or i == grid.size - 1 or vals[i] <= 0:
        raise SeriesError("no interior release peak: density is monotone "
                          "over the scan window")

    def neg(tt):
        return -release_density(config, spectrum, policy, float(tt))

    return float(_golden(neg, brack=(grid[i - 1], grid[i], grid[i + 1]),
                         tol=1e-10))
