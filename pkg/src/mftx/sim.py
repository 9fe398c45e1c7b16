"""Particle-based Monte Carlo of the vesicle-release transmitter chain.

One realization launches ``n_v`` vesicles from the transmitter center at
t = 0.  Vesicles take Gaussian steps with per-axis variance ``2 d_v dt_s``;
a step whose endpoint lies on or outside the membrane counts as a hit, and
the vesicle then fuses with probability ``p_mf`` or is sent back to its
start-of-interval position.  The fusion point is the segment-sphere
intersection, and the elapsed fraction of the step is the squared parameter
``s^2`` (squared displacement grows linearly in time along a Brownian
segment).

Each fusion event releases ``eta`` molecules at the event point.  Molecules
take a first partial step that re-aligns them with the global time grid,
then full steps of ``dt_s`` with per-axis variance ``2 d_sigma step``.
Within a step, degradation (Bernoulli, probability ``1 - exp(-k_d step)``)
is evaluated before the absorption membership test
``|pos - rx_center| <= r_rx``.  The transmitter sphere does not obstruct
released molecules.

Hits are detected only at interval ends, so sub-step membrane excursions
are invisible to both phases.  On the vesicle side the fusion probability
formula absorbs that discretization; on the absorption side it leaves the
estimate systematically low by an amount that shrinks like sqrt(dt_s).
See the comparison report produced by the CLI for the measured effect.

Scalar operations (``step_vesicle``, ``detect_membrane_hit``,
``attempt_fusion``, ``propagate_molecule``) define the scheme one particle
at a time; ``run_campaign`` applies the same scheme vectorized over whole
realizations and is the production path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from multiprocessing import get_context
from typing import Optional

import numpy as np

from .config import SystemConfig, validate
from .errors import GeometryError

__all__ = [
    "VesicleState",
    "FusionEvent",
    "MoleculeState",
    "CirEstimate",
    "RunSpec",
    "CampaignResult",
    "step_vesicle",
    "detect_membrane_hit",
    "attempt_fusion",
    "propagate_molecule",
    "run_campaign",
]

# Cap on scalars drawn per trajectory block; keeps peak memory of the
# molecule phase near 150 MB regardless of how many molecules are in
# flight at once.
_BLOCK_SCALARS = 6_000_000


@dataclass(frozen=True)
class VesicleState:
    """A single vesicle: position relative to the TX center, and status."""

    pos: np.ndarray
    status: str = "diffusing"

    def __post_init__(self):
        pos = np.asarray(self.pos, dtype=float)
        if pos.shape != (3,):
            raise ValueError(f"pos must be a 3-vector, got shape {pos.shape}")
        if self.status not in ("diffusing", "fused"):
            raise ValueError(f"unknown vesicle status {self.status!r}")
        pos = pos.copy()
        pos.flags.writeable = False
        object.__setattr__(self, "pos", pos)


@dataclass(frozen=True)
class FusionEvent:
    """Membrane fusion: where (on the TX sphere) and when (absolute time)."""

    point: np.ndarray
    time: float

    def __post_init__(self):
        point = np.asarray(self.point, dtype=float)
        if point.shape != (3,):
            raise ValueError("fusion point must be a 3-vector")
        point = point.copy()
        point.flags.writeable = False
        object.__setattr__(self, "point", point)
        if not self.time > 0:
            raise ValueError(f"fusion time must be > 0, got {self.time}")


@dataclass(frozen=True)
class MoleculeState:
    """A released molecule: position, birth time, and status.

    Status is one of ``diffusing``, ``absorbed``, ``degraded``; the latter
    two are terminal.
    """

    pos: np.ndarray
    birth: float
    status: str = "diffusing"

    def __post_init__(self):
        pos = np.asarray(self.pos, dtype=float)
        if pos.shape != (3,):
            raise ValueError("molecule position must be a 3-vector")
        if self.status not in ("diffusing", "absorbed", "degraded"):
            raise ValueError(f"unknown molecule status {self.status!r}")
        pos = pos.copy()
        pos.flags.writeable = False
        object.__setattr__(self, "pos", pos)


@dataclass(frozen=True)
class RunSpec:
    """Campaign shape: how many realizations, binning, horizon, seed."""

    realizations: int
    seed: int
    bin_width: float
    t_end: float

    def __post_init__(self):
        if not isinstance(self.realizations, int) or isinstance(self.realizations, bool):
            raise ValueError("realizations must be an integer")
        if self.realizations < 1:
            raise ValueError(f"realizations must be >= 1, got {self.realizations}")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool):
            raise ValueError("seed must be an integer")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must fit in an unsigned 64-bit integer")
        if not (isinstance(self.bin_width, (int, float)) and self.bin_width > 0
                and math.isfinite(self.bin_width)):
            raise ValueError(f"bin_width must be > 0, got {self.bin_width}")
        if not (isinstance(self.t_end, (int, float)) and math.isfinite(self.t_end)
                and self.t_end > self.bin_width):
            raise ValueError("t_end must exceed bin_width")

    @property
    def n_bins(self) -> int:
        ratio = self.t_end / self.bin_width
        nearest = round(ratio)
        if abs(ratio - nearest) < 1e-9 and nearest >= 1:
            return int(nearest)
        return int(math.floor(ratio))

    def bin_edges(self) -> np.ndarray:
        return self.bin_width * np.arange(self.n_bins + 1)


@dataclass(frozen=True)
class CirEstimate:
    """Histogram estimate of an event-time density.

    ``density[i]`` estimates the probability per unit time that one source
    particle produces its event in bin ``i``; ``stderr`` is the binomial
    standard error on the same scale.  ``n_source`` counts launched source
    particles (vesicles for release, potential molecules for end-to-end).
    """

    bin_edges: np.ndarray
    counts: np.ndarray
    n_source: int

    def __post_init__(self):
        edges = np.asarray(self.bin_edges, dtype=float)
        counts = np.asarray(self.counts, dtype=np.int64)
        if edges.ndim != 1 or edges.size < 2:
            raise ValueError("bin_edges must hold at least two edges")
        if np.any(np.diff(edges) <= 0):
            raise ValueError("bin_edges must increase strictly")
        if counts.shape != (edges.size - 1,):
            raise ValueError("counts length must match bin count")
        if np.any(counts < 0):
            raise ValueError("counts must be non-negative")
        if self.n_source < 0:
            raise ValueError("n_source must be >= 0")
        if counts.sum() > self.n_source:
            raise ValueError("recorded events exceed launched sources")
        edges = edges.copy()
        counts = counts.copy()
        edges.flags.writeable = False
        counts.flags.writeable = False
        object.__setattr__(self, "bin_edges", edges)
        object.__setattr__(self, "counts", counts)

    @property
    def bin_width(self) -> float:
        return float(self.bin_edges[1] - self.bin_edges[0])

    @property
    def bin_centers(self) -> np.ndarray:
        return 0.5 * (self.bin_edges[:-1] + self.bin_edges[1:])

    @property
    def n_events(self) -> int:
        return int(self.counts.sum())

    @property
    def density(self) -> np.ndarray:
        if self.n_source == 0:
            return np.zeros(self.counts.size)
        return self.counts / (self.n_source * self.bin_width)

    @property
    def stderr(self) -> np.ndarray:
        if self.n_source == 0:
            return np.zeros(self.counts.size)
        p = self.counts / self.n_source
        return np.sqrt(p * (1.0 - p) / self.n_source) / self.bin_width

    def mass(self) -> float:
        """Total estimated probability, sum of density times bin width."""
        if self.n_source == 0:
            return 0.0
        return self.n_events / self.n_source

    def to_csv_text(self) -> str:
        lines = ["t_bin_center,density,stderr,n_events"]
        centers = self.bin_centers
        density = self.density
        stderr = self.stderr
        for i in range(self.counts.size):
            lines.append(f"{float(centers[i])!r},{float(density[i])!r},"
                         f"{float(stderr[i])!r},{int(self.counts[i])}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv_text(cls, text: str) -> "CirEstimate":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines or lines[0].strip() != "t_bin_center,density,stderr,n_events":
            raise ValueError("estimate CSV must start with header "
                             "'t_bin_center,density,stderr,n_events'")
        centers, density, counts = [], [], []
        for ln in lines[1:]:
            parts = ln.split(",")
            if len(parts) != 4:
                raise ValueError(f"estimate CSV row has {len(parts)} fields: {ln!r}")
            centers.append(float(parts[0]))
            density.append(float(parts[1]))
            counts.append(int(parts[3]))
        centers = np.asarray(centers)
        density = np.asarray(density)
        counts = np.asarray(counts, dtype=np.int64)
        if centers.size < 1:
            raise ValueError("estimate CSV holds no bins")
        if centers.size == 1:
            raise ValueError("estimate CSV needs at least two bins to fix the width")
        widths = np.diff(centers)
        if np.any(np.abs(widths - widths[0]) > 1e-9 * abs(widths[0])):
            raise ValueError("estimate CSV bins are not uniform")
        bw = float(widths[0])
        edges = np.concatenate([[centers[0] - bw / 2], centers + bw / 2])
        # Recover the source count from any populated bin; an empty
        # estimate keeps n_source = 0 and zero stderr.
        n_source = 0
        hot = np.nonzero(counts)[0]
        if hot.size:
            i = hot[np.argmax(counts[hot])]
            n_source = int(round(counts[i] / (density[i] * bw)))
        est = cls(bin_edges=edges, counts=counts, n_source=n_source)
        if hot.size and not np.allclose(est.density, density, rtol=1e-9, atol=1e-300):
            raise ValueError("estimate CSV is internally inconsistent "
                             "(density does not match counts)")
        return est


@dataclass(frozen=True)
class CampaignResult:
    """Merged output of a campaign plus conservation tallies."""

    release: CirEstimate
    e2e: CirEstimate
    n_vesicles: int
    n_fused: int
    n_molecules: int
    n_absorbed: int
    n_degraded: int
    n_alive: int

    @property
    def unfused_fraction(self) -> float:
        if self.n_vesicles == 0:
            return 0.0
        return 1.0 - self.n_fused / self.n_vesicles


def step_vesicle(state: VesicleState, config: SystemConfig,
                 rng: np.random.Generator) -> np.ndarray:
    """Propose the next vesicle position: one Gaussian step.

    Returns the proposed endpoint; the caller decides whether the step is
    accepted, reflected, or ends in fusion.
    """
    if state.status != "diffusing":
        raise ValueError("cannot step a fused vesicle")
    sigma = math.sqrt(2.0 * config.d_v * config.dt_s)
    return state.pos + sigma * rng.standard_normal(3)


def _crossing_parameter(start: np.ndarray, disp: np.ndarray, r2: float) -> float:
    """Positive root s of |start + s*disp|^2 = r2, stable for c near 0.

    ``start`` must be inside the sphere (c <= 0), so the quadratic has one
    root on each side of zero and the positive one never suffers
    cancellation when taken in the branch-appropriate form.
    """
    a = float(disp @ disp)
    b = 2.0 * float(start @ disp)
    c = float(start @ start) - r2
    disc = b * b - 4.0 * a * c
    if not (disc >= 0.0) or not math.isfinite(disc) or a == 0.0:
        raise GeometryError(
            f"segment-sphere intersection lost (a={a!r}, b={b!r}, c={c!r})")
    root = math.sqrt(disc)
    if b > 0.0:
        return -2.0 * c / (b + root)
    return (-b + root) / (2.0 * a)


def detect_membrane_hit(start: np.ndarray, end: np.ndarray,
                        config: SystemConfig) -> Optional[tuple[np.ndarray, float]]:
    """Locate where a vesicle step crosses the membrane, if it does.

    Returns ``(hit_point, time_fraction)`` when ``|end| >= r_tx`` (equality
    counts as a hit), else None.  ``time_fraction`` is the elapsed fraction
    of the step, equal to the squared segment parameter because squared
    displacement is proportional to elapsed time along the step.
    """
    start = np.asarray(start, dtype=float)
    end = np.asarray(end, dtype=float)
    r = config.r_tx
    if float(start @ start) > (r + 1e-9) ** 2:
        raise ValueError("step start lies outside the membrane")
    if float(end @ end) < r * r:
        return None
    s = _crossing_parameter(start, end - start, r * r)
    hit = start + s * (end - start)
    return hit, s * s


def attempt_fusion(rng: np.random.Generator, config: SystemConfig) -> bool:
    """Bernoulli fusion decision for a vesicle that just hit the membrane."""
    p_mf = config.k_f * math.sqrt(math.pi * config.dt_s / config.d_v)
    return rng.random() < p_mf


def propagate_molecule(state: MoleculeState, config: SystemConfig,
                       rx_center: np.ndarray, rng: np.random.Generator,
                       *, step_length: float | None = None) -> MoleculeState:
    """Advance a molecule by one step and classify the outcome.

    ``step_length`` defaults to ``dt_s``; pass the shorter remainder of the
    birth interval for the first step so later steps land on the global
    grid.  Degradation is decided before the absorption membership test, so
    a molecule that would do both in the same step counts as degraded.
    """
    if state.status != "diffusing":
        raise ValueError("cannot propagate a terminated molecule")
    step = config.dt_s if step_length is None else step_length
    if not 0.0 <= step <= config.dt_s:
        raise ValueError(f"step_length must lie in [0, dt_s], got {step}")
    rx_center = np.asarray(rx_center, dtype=float)
    sigma = math.sqrt(2.0 * config.d_sigma * step)
    pos = state.pos + sigma * rng.standard_normal(3)
    p_deg = -math.expm1(-config.k_d * step)
    if p_deg > 0.0 and rng.random() < p_deg:
        return MoleculeState(pos=pos, birth=state.birth, status="degraded")
    offset = pos - rx_center
    if float(offset @ offset) <= config.r_rx ** 2:
        return MoleculeState(pos=pos, birth=state.birth, status="absorbed")
    return MoleculeState(pos=pos, birth=state.birth, status="diffusing")


def _first_true(mask: np.ndarray, sentinel: int) -> np.ndarray:
    """Column index of the first True per row, or sentinel for none."""
    has = mask.any(axis=1)
    idx = mask.argmax(axis=1)
    return np.where(has, idx, sentinel)


def _vesicle_phase(config: SystemConfig, n_steps: int, p_mf: float,
                   rng: np.random.Generator):
    """Run all vesicles of one realization to fusion or the horizon.

    Returns (fusion_step, s_squared, fusion_point) arrays, one entry per
    fused vesicle, in fusion order.  fusion_step is the 1-based index g of
    the interval in which fusion happened, so the fusion time is
    (g - 1 + s_squared) * dt_s.
    """
    sigma = math.sqrt(2.0 * config.d_v * config.dt_s)
    r2 = config.r_tx ** 2
    pos = np.zeros((config.n_v, 3))
    steps_out, s2_out, points_out = [], [], []
    for g in range(1, n_steps + 1):
        if pos.shape[0] == 0:
            break
        prop = pos + sigma * rng.standard_normal(pos.shape)
        d2 = np.einsum("ij,ij->i", prop, prop)
        hit = d2 >= r2
        n_hit = int(np.count_nonzero(hit))
        if n_hit == 0:
            pos = prop
            continue
        hit_idx = np.nonzero(hit)[0]
        fuse = rng.random(n_hit) < p_mf
        fused_idx = hit_idx[fuse]
        if fused_idx.size:
            st = pos[fused_idx]
            disp = prop[fused_idx] - st
            a = np.einsum("ij,ij->i", disp, disp)
            b = 2.0 * np.einsum("ij,ij->i", st, disp)
            c = np.einsum("ij,ij->i", st, st) - r2
            disc = b * b - 4.0 * a * c
            if not np.all(np.isfinite(disc)) or np.any(disc < 0) or np.any(a == 0):
                raise GeometryError("membrane crossing lost during vesicle phase")
            root = np.sqrt(disc)
            s = np.where(b > 0, -2.0 * c / (b + root), (-b + root) / (2.0 * a))
            steps_out.append(np.full(fused_idx.size, g, dtype=np.int64))
            s2_out.append(s * s)
            points_out.append(st + s[:, None] * disp)
        # Failed hits revert to the start-of-interval position; misses
        # advance; fused vesicles leave the population.
        keep_new = prop.copy()
        keep_new[hit_idx[~fuse]] = pos[hit_idx[~fuse]]
        survivor = np.ones(pos.shape[0], dtype=bool)
        survivor[fused_idx] = False
        pos = keep_new[survivor]
    if steps_out:
        return (np.concatenate(steps_out), np.concatenate(s2_out),
                np.concatenate(points_out))
    return (np.zeros(0, dtype=np.int64), np.zeros(0), np.zeros((0, 3)))


def _molecule_phase(config: SystemConfig, n_steps: int,
                    fusion_step: np.ndarray, s2: np.ndarray,
                    fusion_point: np.ndarray, rng: np.random.Generator):
    """Propagate all molecules of one realization.

    Returns (absorption_times, n_degraded, n_alive).  Absorption times sit
    on the global grid because every step after the first partial one ends
    on a multiple of dt_s.
    """
    dt = config.dt_s
    eta = config.eta
    n_fused = fusion_step.size
    n_mol = n_fused * eta
    if n_mol == 0:
        return np.zeros(0), 0, 0
    rx = np.array([config.l, 0.0, 0.0])
    r_rx2 = config.r_rx ** 2
    sigma = math.sqrt(2.0 * config.d_sigma * dt)
    q = -math.expm1(-config.k_d * dt)

    pos = np.repeat(fusion_point, eta, axis=0)
    birth_step = np.repeat(fusion_step, eta)
    frac = np.repeat(1.0 - s2, eta)

    # Partial first step, length (1 - s^2) dt, ends exactly at birth_step*dt.
    sig1 = np.sqrt(2.0 * config.d_sigma * frac * dt)
    pos = pos + sig1[:, None] * rng.standard_normal((n_mol, 3))
    if config.k_d > 0.0:
        q1 = -np.expm1(-config.k_d * frac * dt)
        degraded = rng.random(n_mol) < q1
    else:
        degraded = np.zeros(n_mol, dtype=bool)
    off = pos - rx
    inside = np.einsum("ij,ij->i", off, off) <= r_rx2
    absorbed = ~degraded & inside
    abs_times = [birth_step[absorbed] * dt]

    n_degraded = int(np.count_nonzero(degraded))
    active = ~degraded & ~absorbed
    remaining = n_steps - birth_step
    exhausted = active & (remaining <= 0)
    n_alive = int(np.count_nonzero(exhausted))
    active &= ~exhausted

    completed = birth_step.astype(np.int64)
    rx_norm2 = float(rx @ rx)
    while np.count_nonzero(active):
        idx = np.nonzero(active)[0]
        m = idx.size
        block = max(8, min(1024, _BLOCK_SCALARS // (3 * m)))
        lim = np.minimum(remaining[idx], block)
        width = int(lim.max())
        # Build trajectories in place: scale, prefix-sum, shift by the
        # molecule's current position.  The distance to the receiver comes
        # from the expanded square so no (m, width, 3) temporary appears.
        traj = rng.standard_normal((m, width, 3))
        traj *= sigma
        np.cumsum(traj, axis=1, out=traj)
        traj += pos[idx, None, :]
        d2 = np.einsum("ijk,ijk->ij", traj, traj)
        d2 -= 2.0 * (traj @ rx)
        d2 += rx_norm2
        hit = d2 <= r_rx2
        valid = np.arange(width)[None, :] < lim[:, None]
        hit &= valid
        first_hit = _first_true(hit, width)
        if q > 0.0:
            deg = (rng.random((m, width)) < q) & valid
            first_deg = _first_true(deg, width)
        else:
            first_deg = np.full(m, width, dtype=np.int64)
        # Ties go to degradation: within one step it is checked first.
        absorbed_now = (first_hit < first_deg) & (first_hit < lim)
        degraded_now = (first_deg <= first_hit) & (first_deg < lim)
        if np.any(absorbed_now):
            rows = idx[absorbed_now]
            when = completed[rows] + first_hit[absorbed_now] + 1
            abs_times.append(when * dt)
            active[rows] = False
        if np.any(degraded_now):
            n_degraded += int(np.count_nonzero(degraded_now))
            active[idx[degraded_now]] = False
        survive = ~absorbed_now & ~degraded_now
        rows = idx[survive]
        if rows.size:
            last = lim[survive] - 1
            pos[rows] = traj[np.nonzero(survive)[0], last, :]
            completed[rows] += lim[survive]
            remaining[rows] -= lim[survive]
            done = rows[remaining[rows] <= 0]
            n_alive += done.size
            active[done] = False
    times = np.concatenate(abs_times) if abs_times else np.zeros(0)
    return times, n_degraded, n_alive


def _run_realization(config: SystemConfig, runspec: RunSpec, index: int):
    """One independent realization; returns integer tallies only.

    The generator is keyed on (seed, index) so the stream never depends on
    which worker executes the realization or in what order.
    """
    rng = np.random.default_rng([runspec.seed, index])
    dt = config.dt_s
    n_steps = int(math.ceil(runspec.t_end / dt - 1e-9))
    p_mf = config.k_f * math.sqrt(math.pi * dt / config.d_v)
    edges = runspec.bin_edges()

    fusion_step, s2, fusion_point = _vesicle_phase(config, n_steps, p_mf, rng)
    fusion_times = (fusion_step - 1 + s2) * dt
    release_counts, _ = np.histogram(fusion_times, bins=edges)

    abs_times, n_degraded, n_alive = _molecule_phase(
        config, n_steps, fusion_step, s2, fusion_point, rng)
    e2e_counts, _ = np.histogram(abs_times, bins=edges)

    n_fused = int(fusion_step.size)
    n_molecules = n_fused * config.eta
    n_absorbed = int(abs_times.size)
    if n_absorbed + n_degraded + n_alive != n_molecules:
        raise GeometryError("molecule bookkeeping leak: "
                            f"{n_absorbed}+{n_degraded}+{n_alive} != {n_molecules}")
    return (release_counts.astype(np.int64), e2e_counts.astype(np.int64),
            n_fused, n_absorbed, n_degraded, n_alive)


def _worker(args):
    config, runspec, index = args
    return _run_realization(config, runspec, index)


def run_campaign(config: SystemConfig, runspec: RunSpec,
                 workers: int = 1) -> CampaignResult:
    """Run a full campaign and merge per-realization histograms.

    Results are identical for any ``workers`` value: each realization owns
    a generator derived from (seed, realization index), and merging sums
    integer counts, which is exact and order-free.
    """
    validate(config)
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")
    tasks = [(config, runspec, i) for i in range(runspec.realizations)]
    if workers == 1 or len(tasks) == 1:
        results = [_worker(t) for t in tasks]
    else:
        # fork shares the already-imported interpreter with the workers;
        # fall back to spawn on platforms without it.
        try:
            ctx = get_context("fork")
        except ValueError:
            ctx = get_context("spawn")
        chunk = max(1, len(tasks) // (4 * workers))
        with ctx.Pool(processes=workers) as pool:
            results = pool.map(_worker, tasks, chunksize=chunk)

    edges = runspec.bin_edges()
    release_counts = np.zeros(edges.size - 1, dtype=np.int64)
    e2e_counts = np.zeros(edges.size - 1, dtype=np.int64)
    n_fused = n_absorbed = n_degraded = n_alive = 0
    for rel, e2e, fused, absorbed, degraded, alive in results:
        release_counts += rel
        e2e_counts += e2e
        n_fused += fused
        n_absorbed += absorbed
        n_degraded += degraded
        n_alive += alive

    n_vesicles = config.n_v * runspec.realizations
    n_molecules = n_fused * config.eta
    release = CirEstimate(bin_edges=edges, counts=release_counts,
                          n_source=n_vesicles)
    e2e = CirEstimate(bin_edges=edges, counts=e2e_counts,
                      n_source=config.n_v * config.eta * runspec.realizations)
    return CampaignResult(release=release, e2e=e2e,
                          n_vesicles=n_vesicles, n_fused=n_fused,
                          n_molecules=n_molecules, n_absorbed=n_absorbed,
                          n_degraded=n_degraded, n_alive=n_alive)
