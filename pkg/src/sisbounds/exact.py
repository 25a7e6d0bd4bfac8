"""Exact SIS decay rate from the full continuous-time Markov chain.

States are bitmasks ``x`` with bit ``i`` set iff node ``i`` is infected. The
sub-generator drops the absorbing all-susceptible state ``x = 0``; transient
state ``x`` sits at row ``x - 1``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .bounds import SisParams
from .errors import ResourceGuardError
from .graph import DiGraph
from .spectral import SparseMetzler, expm_action

MAX_EXACT_N = 14


@dataclass(frozen=True)
class CtmcGenerator:
    n: int
    sub: SparseMetzler

    @property
    def dim(self) -> int:
        return self.sub.dim

    def state_index(self, x: int) -> int:
        if not 1 <= x < 2**self.n:
            raise ValueError(f"state {x} is not transient for n={self.n}")
        return x - 1

    def absorption_rates(self) -> np.ndarray:
        """Flow from each transient state into the absorbing state."""
        return -np.asarray(self.sub.csr.sum(axis=1)).ravel()


def _guard(n: int, max_n: int) -> None:
    if n > max_n:
        raise ResourceGuardError(
            f"exact chain for n={n} has {2**n - 1} transient states; limit is n <= {max_n}"
        )
    if n > 12:
        warnings.warn(
            f"dense eigensolve on {2**n - 1} states needs about {8 * 4**n / 1e9:.1f} GB",
            ResourceWarning,
            stacklevel=3,
        )


def _transitions(g: DiGraph, params: SisParams):
    n = g.n
    xs = np.arange(1, 2**n, dtype=np.int64)
    bits = ((xs[:, None] >> np.arange(n)) & 1).astype(np.int64)
    pressure = bits @ g.adjacency().T.astype(np.int64)  # infected in-neighbors of each node
    rows, cols, vals = [], [], []
    for i in range(n):
        infected = bits[:, i] == 1
        # recovery: clear bit i; x with only bit i set flows to the absorbing state
        src = xs[infected]
        dst = src & ~(1 << i)
        rate = np.full(src.size, params.delta[i])
        keep = dst != 0
        rows.append(src[keep] - 1), cols.append(dst[keep] - 1), vals.append(rate[keep])
        # infection: set bit i at rate beta_i * pressure_i
        sus = ~infected & (pressure[:, i] > 0)
        src = xs[sus]
        rows.append(src - 1)
        cols.append((src | (1 << i)) - 1)
        vals.append(params.beta[i] * pressure[sus, i])
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals).astype(float)
    exit_rate = (bits * params.delta).sum(axis=1) + ((1 - bits) * pressure * params.beta).sum(axis=1)
    return xs, rows, cols, vals, exit_rate


def build_sub_generator(g: DiGraph, params: SisParams, max_n: int = MAX_EXACT_N) -> CtmcGenerator:
    """Generator restricted to the ``2^n - 1`` transient states."""
    if g.n != params.n:
        raise ValueError(f"graph has {g.n} nodes but rates are given for {params.n}")
    _guard(g.n, max_n)
    xs, rows, cols, vals, exit_rate = _transitions(g, params)
    dim = xs.size
    sub = SparseMetzler.from_triplets(
        dim,
        np.concatenate([rows, xs - 1]),
        np.concatenate([cols, xs - 1]),
        np.concatenate([vals, -exit_rate]),
    )
    return CtmcGenerator(g.n, sub)


def full_generator(g: DiGraph, params: SisParams, max_n: int = 10) -> np.ndarray:
    """Dense ``2^n x 2^n`` generator including the absorbing state (row/col 0)."""
    _guard(g.n, max_n)
    xs, rows, cols, vals, exit_rate = _transitions(g, params)
    q = np.zeros((2**g.n, 2**g.n))
    q[rows + 1, cols + 1] = vals
    q[xs, xs] = -exit_rate
    # singleton recoveries go to the absorbing state
    for i in range(g.n):
        q[1 << i, 0] = params.delta[i]
    return q


def exact_decay_rate(g: DiGraph, params: SisParams, max_n: int = MAX_EXACT_N) -> float:
    """``-max Re(spec(Q_t))`` via a dense general eigensolver."""
    gen = build_sub_generator(g, params, max_n=max_n)
    w = np.linalg.eigvals(gen.sub.toarray())
    return float(-np.max(w.real))


def exact_marginals(g: DiGraph, params: SisParams, x0: int, grid, max_n: int = MAX_EXACT_N,
                    return_distribution: bool = False):
    """Infection probabilities ``p_i(t)`` from start state ``x0`` on ``grid``.

    The transient distribution evolves as ``pi(t)^T = exp(Q_t^T t) e_{x0}``.
    Returns an array of shape ``(len(grid), n)``; with ``return_distribution``
    also the ``(len(grid), 2^n - 1)`` transient distribution.
    """
    gen = build_sub_generator(g, params, max_n=max_n)
    start = np.zeros(gen.dim)
    start[gen.state_index(int(x0))] = 1.0
    dist = expm_action(gen.sub.transpose(), start, grid)
    xs = np.arange(1, 2**g.n, dtype=np.int64)
    bits = ((xs[:, None] >> np.arange(g.n)) & 1).astype(float)
    marg = np.clip(dist @ bits, 0.0, 1.0)
    if return_distribution:
        return marg, dist
    return marg
