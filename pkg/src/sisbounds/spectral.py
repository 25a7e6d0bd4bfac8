"""Sparse Metzler matrices, their spectral abscissa, and the action of exp(tM)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .errors import ConvergenceError  # noqa: F401  (re-exported)

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 1_000_000
DENSE_THRESHOLD = 256


class NotMetzlerError(ValueError):
    pass


class SparseMetzler:
    """Square sparse matrix whose off-diagonal entries are nonnegative.

    Stored as CSR with duplicates summed, so every (row, col) holds at most
    one value. Immutable by convention.
    """

    __slots__ = ("_csr",)

    def __init__(self, matrix, check: bool = True):
        csr = sp.csr_matrix(matrix, dtype=float)
        csr.sum_duplicates()
        csr.eliminate_zeros()
        if csr.shape[0] != csr.shape[1]:
            raise ValueError(f"matrix must be square, got shape {csr.shape}")
        if check:
            if not np.all(np.isfinite(csr.data)):
                raise ValueError("matrix has non-finite entries")
            coo = csr.tocoo()
            off = coo.row != coo.col
            if np.any(coo.data[off] < 0):
                i = int(np.flatnonzero(off & (coo.data < 0))[0])
                raise NotMetzlerError(
                    f"negative off-diagonal entry {coo.data[i]} at ({coo.row[i]}, {coo.col[i]})"
                )
        self._csr = csr

    @classmethod
    def from_triplets(cls, dim: int, rows, cols, vals) -> "SparseMetzler":
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        if len(rows) and (rows.min() < 0 or cols.min() < 0 or rows.max() >= dim or cols.max() >= dim):
            raise IndexError("triplet index out of range")
        return cls(sp.coo_matrix((np.asarray(vals, dtype=float), (rows, cols)), shape=(dim, dim)))

    @property
    def dim(self) -> int:
        return self._csr.shape[0]

    @property
    def csr(self) -> sp.csr_matrix:
        return self._csr

    @property
    def nnz(self) -> int:
        return self._csr.nnz

    def diagonal(self) -> np.ndarray:
        return self._csr.diagonal()

    def toarray(self) -> np.ndarray:
        return self._csr.toarray()

    def transpose(self) -> "SparseMetzler":
        return SparseMetzler(self._csr.T, check=False)

    def triplets(self) -> list[tuple[int, int, float]]:
        coo = self._csr.tocoo()
        order = np.lexsort((coo.col, coo.row))
        return [(int(coo.row[k]), int(coo.col[k]), float(coo.data[k])) for k in order]

    def __matmul__(self, x):
        return self._csr @ x

    def __repr__(self) -> str:
        return f"SparseMetzler(dim={self.dim}, nnz={self.nnz})"


@dataclass
class EigResult:
    lambda_max: float
    eigvec: np.ndarray
    iterations: int
    residual: float
    converged: bool = True
    method: str = "power"

    def as_dict(self) -> dict:
        return {
            "lambda_max": self.lambda_max,
            "iterations": self.iterations,
            "residual": self.residual,
            "converged": self.converged,
            "method": self.method,
        }


def _as_metzler(m) -> SparseMetzler:
    return m if isinstance(m, SparseMetzler) else SparseMetzler(m)


def _residual(m: SparseMetzler, lam: float, v: np.ndarray) -> float:
    return float(np.max(np.abs(m @ v - lam * v)))


def _dense_lambda_max(m: SparseMetzler) -> EigResult:
    dense = m.toarray()
    w, vecs = np.linalg.eig(dense)
    top = float(np.max(w.real))
    # prefer the (near-)real eigenvalue among those attaining the top real part
    cands = np.flatnonzero(w.real >= top - 1e-12 * max(1.0, abs(top)))
    k = int(cands[np.argmin(np.abs(w.imag[cands]))])
    lam = float(w[k].real)
    v = vecs[:, k].real
    if np.max(v) < -np.min(v):
        v = -v
    v = np.clip(v, 0.0, None)
    peak = np.max(v)
    if peak > 0:
        v = v / peak
    return EigResult(lam, v, 1, _residual(m, lam, v), True, "dense")


def _power_lambda_max(m: SparseMetzler, tol: float, max_iter: int) -> EigResult:
    diag = m.diagonal()
    shift = float(np.max(np.abs(diag))) + 1.0
    shifted = (m.csr + shift * sp.identity(m.dim, format="csr")).tocsr()
    x = np.ones(m.dim)
    rho_prev = math.inf
    rho = 0.0
    res = math.inf
    it = 0
    for it in range(1, max_iter + 1):
        y = shifted @ x
        rho = float(x @ y) / float(x @ x)
        # residual of the current pair; shifting does not change it
        res = float(np.max(np.abs(y - rho * x)))
        scale = tol * max(1.0, abs(rho - shift))
        if abs(rho - rho_prev) < scale and res < scale:
            break
        rho_prev = rho
        x = y / np.max(y)
    else:
        return EigResult(rho - shift, x, it, res, False, "power")
    return EigResult(rho - shift, x, it, res, True, "power")


def lambda_max(
    m,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    method: str = "auto",
    dense_threshold: int = DENSE_THRESHOLD,
) -> EigResult:
    """Spectral abscissa (maximum real eigenvalue) of a Metzler matrix.

    ``method="power"`` runs power iteration on ``m + s I`` with
    ``s = max|m_ii| + 1`` from the all-ones vector; ``"dense"`` calls LAPACK's
    Hessenberg-QR eigensolver; ``"auto"`` picks dense up to ``dense_threshold``.
    A non-converged power iteration is returned with ``converged=False``.
    """
    m = _as_metzler(m)
    if m.dim == 0:
        raise ValueError("empty matrix")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if method == "auto":
        method = "dense" if m.dim <= dense_threshold else "power"
    if method == "dense":
        return _dense_lambda_max(m)
    if method == "power":
        return _power_lambda_max(m, tol, max_iter)
    raise ValueError(f"unknown method {method!r}")


def pattern_is_irreducible(m) -> bool:
    """True iff the off-diagonal sparsity graph is strongly connected."""
    m = _as_metzler(m)
    if m.dim == 0:
        raise ValueError("empty matrix")
    if m.dim == 1:
        return True
    pattern = m.csr.copy()
    pattern.setdiag(0)
    pattern.eliminate_zeros()
    ncomp, _ = connected_components(pattern, directed=True, connection="strong")
    return ncomp == 1


def _uniformized_step(csr, rate: float, pnorm: float, v: np.ndarray, h: float, rtol: float) -> np.ndarray:
    """exp(h M) v with M = rate (P - I): Poisson-weighted sum of P^j v."""
    a = rate * h
    theta = a * pnorm
    term = v.copy()
    total = v.copy()
    j = 0
    while True:
        j += 1
        # P term = term + (M term) / rate
        term = (term + (csr @ term) / rate) * (a / j)
        total += term
        tn = np.max(np.abs(term))
        if tn == 0.0:
            break
        ratio = theta / (j + 1)
        if ratio < 0.5 and tn * ratio / (1.0 - ratio) <= rtol * np.max(np.abs(total)):
            break
    return math.exp(-a) * total


def expm_action(m, v0, grid, rtol: float = 1e-15) -> np.ndarray:
    """Rows ``exp(m t_k) v0`` for each time in ``grid`` (row k is time ``grid[k]``).

    Uniformization: for Metzler ``m`` and ``s >= max(-m_ii)``, ``P = I + m/s``
    is nonnegative, so every partial sum stays nonnegative when ``v0 >= 0``.
    Long intervals are split so each substep has ``s h ||P|| <= 8``.
    """
    m = _as_metzler(m)
    v = np.asarray(v0, dtype=float)
    grid = np.asarray(grid, dtype=float)
    if v.shape != (m.dim,):
        raise ValueError(f"v0 must have length {m.dim}")
    if not (np.all(np.isfinite(v)) and np.all(np.isfinite(grid))):
        raise ValueError("non-finite input")
    if grid.ndim != 1 or len(grid) == 0:
        raise ValueError("grid must be a nonempty 1-D array")
    if grid[0] < 0 or np.any(np.diff(grid) < 0):
        raise ValueError("grid must be nondecreasing and start at t >= 0")

    csr = m.csr
    rate = max(-float(np.min(m.diagonal(), initial=0.0)), 0.0)
    if rate == 0.0:
        rate = 1.0
    pabs = abs(sp.identity(m.dim, format="csr") + csr / rate)
    pnorm = max(1.0, float(np.max(pabs.sum(axis=1)))) if m.dim else 1.0

    out = np.empty((len(grid), m.dim))
    t_prev = 0.0
    for k, t in enumerate(grid):
        dt = t - t_prev
        if dt > 0:
            steps = max(1, math.ceil(rate * dt * pnorm / 8.0))
            h = dt / steps
            for _ in range(steps):
                v = _uniformized_step(csr, rate, pnorm, v, h, rtol)
        out[k] = v
        t_prev = t
    return out
