"""Gillespie simulation of the SIS process and Monte Carlo decay-rate estimation.

Each path draws from its own Philox stream keyed by ``(seed, path_index)``,
so an ensemble is reproducible and can be split across workers without
changing the result. Ensemble statistics are accumulated as integer counts,
which makes the reduction exact and independent of summation order.
"""

from __future__ import annotations

import csv
import io
import math
from bisect import bisect_left, bisect_right
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import accumulate

import numpy as np

from .bounds import SisParams
from .graph import DiGraph


class DecayFitError(ValueError):
    """Not enough usable points to fit a decay rate."""


@dataclass(frozen=True)
class SimConfig:
    paths: int = 10_000
    horizon: float = 100.0
    grid_dt: float = 0.1
    seed: int = 0
    initial: tuple[int, ...] | None = None  # None: all nodes infected
    fit_window: tuple[float, float] | None = None
    workers: int = 1

    def __post_init__(self):
        if self.paths < 1:
            raise ValueError("paths must be >= 1")
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        if not self.grid_dt > 0:
            raise ValueError("grid_dt must be positive")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.initial is not None:
            object.__setattr__(self, "initial", tuple(sorted(set(int(i) for i in self.initial))))
            if not self.initial:
                raise ValueError("initial infected set must be nonempty")
        if self.fit_window is not None:
            a, b = self.fit_window
            if not 0 <= a < b:
                raise ValueError("fit window must satisfy 0 <= a < b")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    def grid(self) -> np.ndarray:
        return make_grid(self.horizon, self.grid_dt)

    def initial_nodes(self, n: int) -> tuple[int, ...]:
        nodes = tuple(range(n)) if self.initial is None else self.initial
        if any(not 0 <= i < n for i in nodes):
            raise ValueError(f"initial node out of range for n={n}")
        return nodes


def make_grid(horizon: float, dt: float) -> np.ndarray:
    steps = int(math.floor(horizon / dt + 1e-9))
    return np.arange(steps + 1) * dt


def path_rng(seed: int, index: int) -> np.random.Generator:
    """Independent counter-based stream for path ``index``."""
    return np.random.Generator(np.random.Philox(key=int(seed) | (int(index) << 64)))


@dataclass
class PathSample:
    grid: np.ndarray
    states: np.ndarray  # (len(grid), n) 0/1
    absorbed_at: float | None
    events: list[tuple[float, int, int]] | None = None


def _simulate(out_nbrs, beta, delta, initial, grid, horizon, rng, counts, path_m, events):
    """One Gillespie path. Infection intervals are added to ``counts`` (n x K) and ``path_m``.

    Returns the absorption time, or None if the path survives past ``horizon``.
    """
    n = len(beta)
    kmax = len(grid)
    infected = [False] * n
    pressure = [0] * n
    start_k = [0] * n
    for i in initial:
        infected[i] = True
    for i in initial:
        for v in out_nbrs[i]:
            pressure[v] += 1
    rates = [delta[i] if infected[i] else beta[i] * pressure[i] for i in range(n)]

    buf: list[float] = []
    pos = 0
    t = 0.0
    while True:
        acc = list(accumulate(rates))
        total = acc[-1]
        if total <= 0.0:
            return t
        if pos + 2 > len(buf):
            buf = rng.random(512).tolist()
            pos = 0
        u1, u2 = buf[pos], buf[pos + 1]
        pos += 2
        t += -math.log(1.0 - u1) / total
        if t > horizon:
            break
        i = bisect_right(acc, u2 * total)
        if i >= n:
            i = n - 1
        k = bisect_left(grid, t)
        if infected[i]:
            infected[i] = False
            rates[i] = beta[i] * pressure[i]
            if k > start_k[i]:
                counts[i, start_k[i]:k] += 1
                path_m[start_k[i]:k] += 1
            for v in out_nbrs[i]:
                pressure[v] -= 1
                if not infected[v]:
                    rates[v] = beta[v] * pressure[v]
            if events is not None:
                events.append((t, i, 0))
        else:
            infected[i] = True
            rates[i] = delta[i]
            start_k[i] = k
            for v in out_nbrs[i]:
                pressure[v] += 1
                if not infected[v]:
                    rates[v] = beta[v] * pressure[v]
            if events is not None:
                events.append((t, i, 1))
    for i in range(n):
        if infected[i] and kmax > start_k[i]:
            counts[i, start_k[i]:kmax] += 1
            path_m[start_k[i]:kmax] += 1
    return None


def _model(g: DiGraph, params: SisParams):
    if g.n != params.n:
        raise ValueError(f"graph has {g.n} nodes but rates are given for {params.n}")
    return g.out_neighbors, params.beta.tolist(), params.delta.tolist()


def run_single_path(g: DiGraph, params: SisParams, initial, horizon: float, rng: np.random.Generator,
                    grid_dt: float = 0.1, record_events: bool = False) -> PathSample:
    """Simulate one path and sample its state on ``0, grid_dt, ..., horizon``."""
    out_nbrs, beta, delta = _model(g, params)
    grid = make_grid(horizon, grid_dt)
    counts = np.zeros((g.n, len(grid)), dtype=np.int64)
    path_m = np.zeros(len(grid), dtype=np.int64)
    events = [] if record_events else None
    absorbed = _simulate(out_nbrs, beta, delta, sorted(set(initial)), grid.tolist(), horizon, rng,
                         counts, path_m, events)
    return PathSample(grid, counts.T.astype(np.uint8), absorbed, events)


@dataclass
class Trajectory:
    t: np.ndarray
    p_hat: np.ndarray  # (len(t), n)
    m: np.ndarray
    stderr_m: np.ndarray
    paths: int
    horizon: float
    initial_count: int
    statistic: str = "mean_infected"

    @property
    def n(self) -> int:
        return self.p_hat.shape[1]

    def stderr_p(self) -> np.ndarray:
        """Binomial standard error of each ``p_hat``."""
        return np.sqrt(self.p_hat * (1.0 - self.p_hat) / self.paths)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "m", "stderr_m"] + [f"p_{i}" for i in range(self.n)])
        for k in range(len(self.t)):
            row = [self.t[k], self.m[k], self.stderr_m[k], *self.p_hat[k]]
            w.writerow([repr(float(x)) for x in row])
        return buf.getvalue()


def read_trajectory_csv(text: str, paths: int) -> Trajectory:
    rows = list(csv.reader(io.StringIO(text)))
    data = np.array(rows[1:], dtype=float)
    t = data[:, 0]
    return Trajectory(t, data[:, 3:], data[:, 1], data[:, 2], paths, float(t[-1]), int(round(data[0, 1])))


def _ensemble_chunk(args):
    g, params, initial, horizon, grid_dt, seed, start, stop = args
    out_nbrs, beta, delta = _model(g, params)
    grid = make_grid(horizon, grid_dt)
    glist = grid.tolist()
    counts = np.zeros((g.n, len(grid)), dtype=np.int64)
    sum_m = np.zeros(len(grid), dtype=np.int64)
    sumsq_m = np.zeros(len(grid), dtype=np.int64)
    for idx in range(start, stop):
        path_m = np.zeros(len(grid), dtype=np.int64)
        _simulate(out_nbrs, beta, delta, initial, glist, horizon, path_rng(seed, idx), counts, path_m, None)
        sum_m += path_m
        sumsq_m += path_m * path_m
    return counts, sum_m, sumsq_m


def run_ensemble(g: DiGraph, params: SisParams, cfg: SimConfig) -> Trajectory:
    """Average ``cfg.paths`` independent paths on the sampling grid."""
    initial = list(cfg.initial_nodes(g.n))
    grid = cfg.grid()
    if cfg.workers == 1 or cfg.paths < 2 * cfg.workers:
        chunks = [_ensemble_chunk((g, params, initial, cfg.horizon, cfg.grid_dt, cfg.seed, 0, cfg.paths))]
    else:
        bounds = np.linspace(0, cfg.paths, cfg.workers + 1).astype(int)
        jobs = [(g, params, initial, cfg.horizon, cfg.grid_dt, cfg.seed, int(a), int(b))
                for a, b in zip(bounds[:-1], bounds[1:])]
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            chunks = list(pool.map(_ensemble_chunk, jobs))
    counts = sum(c[0] for c in chunks)
    sum_m = sum(c[1] for c in chunks)
    sumsq_m = sum(c[2] for c in chunks)

    npaths = cfg.paths
    p_hat = (counts / npaths).T
    m = sum_m / npaths
    if npaths > 1:
        # integer numerator keeps the variance exact up to the final division
        var = (sumsq_m * npaths - sum_m * sum_m) / (npaths * (npaths - 1.0))
        stderr = np.sqrt(np.clip(var, 0.0, None) / npaths)
    else:
        stderr = np.zeros_like(m)
    return Trajectory(grid, p_hat, m, stderr, npaths, cfg.horizon, len(initial))


@dataclass
class DecayEstimate:
    rho_hat: float
    window: tuple[float, float]
    slope_stderr: float
    points: int
    intercept: float
    statistic: str = "mean_infected"
    notes: list[str] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "rho_hat": self.rho_hat,
            "window": list(self.window),
            "slope_stderr": self.slope_stderr,
            "points": self.points,
            "intercept": self.intercept,
            "statistic": self.statistic,
            "notes": list(self.notes),
        }


def fit_log_linear(t, y) -> tuple[float, float, float]:
    """OLS of ``ln y`` on ``t``: ``(slope, intercept, slope standard error)``."""
    t = np.asarray(t, dtype=float)
    z = np.log(np.asarray(y, dtype=float))
    tc = t - t.mean()
    sxx = float(tc @ tc)
    slope = float(tc @ (z - z.mean())) / sxx
    intercept = float(z.mean() - slope * t.mean())
    resid = z - (intercept + slope * t)
    dof = max(len(t) - 2, 1)
    se = math.sqrt(float(resid @ resid) / dof / sxx)
    return slope, intercept, se


MIN_FIT_POINTS = 5


def default_window(traj: Trajectory) -> tuple[float, float, list[str]]:
    """``[0.2 horizon, last t with m(t) >= max(10/sqrt(paths), 1e-3 m(0))]``.

    When that leaves fewer than ``MIN_FIT_POINTS`` samples (fast decay
    relative to the horizon) the start moves back to ``0.2 t_end``.
    """
    notes: list[str] = []
    floor = max(10.0 / math.sqrt(traj.paths), 1e-3 * traj.m[0])
    above = np.flatnonzero(traj.m >= floor)
    if above.size == 0:
        raise DecayFitError("mean infected count never reaches the noise floor")
    t_end = float(traj.t[above[-1]])
    t_start = 0.2 * traj.horizon
    if np.count_nonzero((traj.t >= t_start) & (traj.t <= t_end) & (traj.m > 0)) < MIN_FIT_POINTS:
        t_start = 0.2 * t_end
        notes.append(f"window start moved to 0.2*t_end={t_start:.6g}: signal below floor before 0.2*horizon")
    return t_start, t_end, notes


def estimate_decay(traj: Trajectory, window: tuple[float, float] | None = None) -> DecayEstimate:
    """Least-squares decay rate of the ensemble-mean infected count."""
    if len(traj.t) == 0:
        raise DecayFitError("empty trajectory")
    notes: list[str] = []
    if window is None:
        t_a, t_b, notes = default_window(traj)
    else:
        t_a, t_b = map(float, window)
    sel = (traj.t >= t_a - 1e-12) & (traj.t <= t_b + 1e-12) & (traj.m > 0)
    k = int(np.count_nonzero(sel))
    if k < MIN_FIT_POINTS:
        raise DecayFitError(f"only {k} usable points in window [{t_a:g}, {t_b:g}]")
    slope, intercept, se = fit_log_linear(traj.t[sel], traj.m[sel])
    return DecayEstimate(-slope, (t_a, t_b), se, k, intercept, traj.statistic, notes)
