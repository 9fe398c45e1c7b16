"""System configuration and derived constants.

A transmitter sphere of radius ``r_tx`` sits at the origin; molecules released
on its surface diffuse (coefficient ``d_sigma``, unimolecular decay ``k_d``)
toward a fully absorbing receiver sphere of radius ``r_rx`` whose center is a
distance ``l`` away.  Inside the transmitter, ``n_v`` vesicles diffuse with
coefficient ``d_v`` and fuse with the membrane at intrinsic rate ``k_f``,
each releasing ``eta`` molecules.  ``dt_s`` is the simulation time step.

Units: micrometers and seconds throughout (``k_f`` in um/s, ``k_d`` in 1/s).
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

_CONFIG_FIELDS = ("r_tx", "r_rx", "l", "d_v", "d_sigma", "k_f", "k_d",
                  "n_v", "eta", "dt_s")

#: Quantities a TimeSeries may hold.  Densities are in 1/s; release_fraction
#: is dimensionless and cumulative.
QUANTITIES = frozenset({
    "release_density", "release_fraction", "uniform_hit", "e2e_hit",
    "point_hit",
})

_CUMULATIVE = frozenset({"release_fraction"})


@dataclass(frozen=True)
class SystemConfig:
    r_tx: float
    r_rx: float
    l: float
    d_v: float
    d_sigma: float
    k_f: float
    k_d: float
    n_v: int
    eta: int
    dt_s: float

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2, sort_keys=False)

    @classmethod
    def from_json(cls, text: str) -> "SystemConfig":
        data = json.loads(text)
        if not isinstance(data, dict):
            raise ConfigError(["config document must be a JSON object"])
        unknown = sorted(set(data) - set(_CONFIG_FIELDS))
        missing = sorted(set(_CONFIG_FIELDS) - set(data))
        problems = []
        if unknown:
            problems.append(f"unknown config keys: {', '.join(unknown)}")
        if missing:
            problems.append(f"missing config keys: {', '.join(missing)}")
        if problems:
            raise ConfigError(problems)
        kwargs = {}
        for name in _CONFIG_FIELDS:
            value = data[name]
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                raise ConfigError([f"{name}: expected a number, got {value!r}"])
            kwargs[name] = int(value) if name in ("n_v", "eta") else float(value)
        return cls(**kwargs)

    def hash(self) -> str:
        """Stable content hash used to tag simulation outputs."""
        canon = json.dumps(dataclasses.asdict(self), sort_keys=True,
                           separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()

    def replace(self, **changes) -> "SystemConfig":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class DerivedConstants:
    """Constants computed once from a validated configuration.

    rho      surface release density on the transmitter membrane, 1/(4 pi r_tx^2)
    beta1    (l - r_tx - r_rx)^2 / (4 d_sigma), the near-lobe passage scale (s)
    beta2    (l + r_tx - r_rx)^2 / (4 d_sigma), the far-lobe passage scale (s)
    p_mf     per-contact fusion probability k_f * sqrt(pi dt_s / d_v)
    robin_c  1 - k_f r_tx / d_v, the scalar in the eigenvalue condition
             x cot x = robin_c
    """

    rho: float
    beta1: float
    beta2: float
    p_mf: float
    robin_c: float


def derived_constants(config: SystemConfig) -> DerivedConstants:
    """Compute derived constants without validity checks (see validate)."""
    a, b, l = config.r_tx, config.r_rx, config.l
    return DerivedConstants(
        rho=1.0 / (4.0 * math.pi * a * a),
        beta1=((a + b) * (a + b - 2.0 * l) + l * l) / (4.0 * config.d_sigma),
        beta2=((a - b) * (a - b + 2.0 * l) + l * l) / (4.0 * config.d_sigma),
        p_mf=config.k_f * math.sqrt(math.pi * config.dt_s / config.d_v),
        robin_c=1.0 - config.k_f * config.r_tx / config.d_v,
    )


def validate(config: SystemConfig) -> DerivedConstants:
    """Check every configuration rule and return the derived constants.

    All violated rules are reported together (one message each) so a bad
    config file can be fixed in a single pass.
    """
    v = []
    for name in ("r_tx", "r_rx", "l", "d_v", "d_sigma", "dt_s"):
        value = getattr(config, name)
        if not (isinstance(value, (int, float)) and math.isfinite(value)):
            v.append(f"{name}: must be a finite number (got {value!r})")
        elif value <= 0:
            v.append(f"{name}: must be > 0 (got {value})")
    for name in ("k_f", "k_d"):
        value = getattr(config, name)
        if not (isinstance(value, (int, float)) and math.isfinite(value)):
            v.append(f"{name}: must be a finite number (got {value!r})")
        elif value < 0:
            v.append(f"{name}: must be >= 0 (got {value})")
    for name in ("n_v", "eta"):
        value = getattr(config, name)
        if not isinstance(value, int) or isinstance(value, bool):
            v.append(f"{name}: must be an integer (got {value!r})")
        elif value < 0:
            v.append(f"{name}: must be >= 0 (got {value})")
    if not v:
        if config.l <= config.r_tx + config.r_rx:
            v.append("sphere separation: require l > r_tx + r_rx "
                     f"(got l={config.l}, r_tx+r_rx={config.r_tx + config.r_rx})")
        p_mf = config.k_f * math.sqrt(math.pi * config.dt_s / config.d_v)
        if p_mf > 1.0:
            v.append("fusion probability: k_f*sqrt(pi*dt_s/d_v) = "
                     f"{p_mf:.6g} exceeds 1; reduce dt_s or k_f")
    if v:
        raise ConfigError(v)
    return derived_constants(config)


DEFAULTS = SystemConfig(r_tx=10.0, r_rx=10.0, l=40.0, d_v=9.0, d_sigma=1000.0,
                        k_f=20.0, k_d=0.8, n_v=100, eta=100, dt_s=0.001)


@dataclass(frozen=True)
class TimeSeries:
    """A named quantity sampled on a strictly increasing time grid."""

    quantity: str
    t: np.ndarray
    value: np.ndarray

    def __post_init__(self):
        if self.quantity not in QUANTITIES:
            raise ValueError(f"unknown quantity {self.quantity!r}")
        t = np.asarray(self.t, dtype=float)
        value = np.asarray(self.value, dtype=float)
        if t.ndim != 1 or value.shape != t.shape:
            raise ValueError("t and value must be 1-d arrays of equal length")
        if t.size and t[0] < 0:
            raise ValueError("time grid must start at t >= 0")
        if t.size > 1 and not np.all(np.diff(t) > 0):
            raise ValueError("time grid must be strictly increasing")
        if np.any(value < 0):
            raise ValueError(f"{self.quantity} values must be non-negative")
        if self.quantity in _CUMULATIVE:
            if np.any(value > 1.0):
                raise ValueError("cumulative fraction exceeds 1")
            if value.size > 1 and np.any(np.diff(value) < 0):
                raise ValueError("cumulative fraction must be non-decreasing")
        t.flags.writeable = False
        value.flags.writeable = False
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "value", value)

    def to_csv_text(self) -> str:
        lines = ["t,value"]
        lines += [f"{repr(float(ti))},{repr(float(vi))}"
                  for ti, vi in zip(self.t, self.value)]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv_text(cls, text: str, quantity: str) -> "TimeSeries":
        lines = [ln for ln in text.strip().splitlines() if ln]
        if not lines or lines[0].strip() != "t,value":
            raise ValueError("expected header 't,value'")
        t, value = [], []
        for ln in lines[1:]:
            a, b = ln.split(",")
            t.append(float(a))
            value.append(float(b))
        return cls(quantity=quantity, t=np.array(t), value=np.array(value))
