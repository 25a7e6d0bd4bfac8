"""First- and second-order lower bounds on the SIS decay rate.

State ordering for the second-order system is ``r = (p_0, ..., p_{n-1}, q_01,
q_02, ..., q_{n-1,n-2})`` where ``q_ij`` is the probability that node ``i`` is
susceptible while node ``j`` is infected, stacked by ``i`` then ascending
``j != i``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import ConvergenceError, ResourceGuardError
from .graph import DiGraph, is_strongly_connected
from .spectral import EigResult, SparseMetzler, expm_action, lambda_max

DEFAULT_NNZ_BUDGET = 50_000_000


class ConnectivityWarning(UserWarning):
    """Input graph is not strongly connected; strict orderings may not hold."""


@dataclass(frozen=True)
class SisParams:
    beta: np.ndarray
    delta: np.ndarray

    def __post_init__(self):
        beta = np.asarray(self.beta, dtype=float).reshape(-1)
        delta = np.asarray(self.delta, dtype=float).reshape(-1)
        if beta.shape != delta.shape:
            raise ValueError(f"beta has {beta.size} entries but delta has {delta.size}")
        if not (np.all(np.isfinite(beta)) and np.all(np.isfinite(delta))):
            raise ValueError("rates must be finite")
        if np.any(beta <= 0) or np.any(delta <= 0):
            raise ValueError("infection and recovery rates must be strictly positive")
        beta.setflags(write=False)
        delta.setflags(write=False)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "delta", delta)

    @property
    def n(self) -> int:
        return self.beta.size

    @property
    def delta_min(self) -> float:
        return float(self.delta.min())

    @classmethod
    def homogeneous(cls, n: int, beta: float, delta: float = 1.0) -> "SisParams":
        return cls(np.full(n, float(beta)), np.full(n, float(delta)))

    @classmethod
    def from_beta_frac(cls, g: DiGraph, frac: float, delta: float = 1.0) -> "SisParams":
        """Homogeneous rates with ``beta = frac / lambda_max(A)``."""
        if not frac > 0:
            raise ValueError("beta fraction must be positive")
        lam = adjacency_lambda_max(g).lambda_max
        if lam <= 0:
            raise ValueError("adjacency matrix has no positive eigenvalue (graph has no cycles)")
        return cls.homogeneous(g.n, frac / lam, delta)


def _check_dims(g: DiGraph, params: SisParams) -> None:
    if g.n != params.n:
        raise ValueError(f"graph has {g.n} nodes but rates are given for {params.n}")


def _solve(m: SparseMetzler, what: str, **solver) -> EigResult:
    res = lambda_max(m, **solver)
    if not res.converged:
        raise ConvergenceError(
            f"{what}: eigensolver did not converge in {res.iterations} iterations "
            f"(residual {res.residual:.3e})",
            res,
        )
    return res


def _warn_if_disconnected(g: DiGraph) -> bool:
    ok = is_strongly_connected(g)
    if not ok:
        warnings.warn("graph is not strongly connected", ConnectivityWarning, stacklevel=3)
    return ok


def adjacency_lambda_max(g: DiGraph, **solver) -> EigResult:
    return _solve(SparseMetzler(g.adjacency_sparse()), "adjacency", **solver)


# ---------------------------------------------------------------------------
# first order


def build_first_order(g: DiGraph, params: SisParams) -> SparseMetzler:
    """``B A - D``: entry ``(i, j)`` is ``beta_i a_ij``, diagonal ``-delta_i``."""
    _check_dims(g, params)
    n = g.n
    rows = [i for i in range(n)]
    cols = list(rows)
    vals = list(-params.delta)
    for u, v in g.edges:
        rows.append(v)
        cols.append(u)
        vals.append(params.beta[v])
    return SparseMetzler.from_triplets(n, rows, cols, vals)


def first_order_eig(g: DiGraph, params: SisParams, **solver) -> EigResult:
    return _solve(build_first_order(g, params), "first-order matrix", **solver)


def rho1(g: DiGraph, params: SisParams, **solver) -> float:
    _warn_if_disconnected(g)
    return 0.0 - first_order_eig(g, params, **solver).lambda_max


# ---------------------------------------------------------------------------
# second order


def q_index(i, j, n: int):
    """Position of ``q_ij`` in the stacked state; works elementwise on arrays."""
    if np.isscalar(i) and np.isscalar(j):
        if i == j:
            raise ValueError("q_ii is not a state variable")
        if not (0 <= i < n and 0 <= j < n):
            raise IndexError(f"node index out of range for n={n}")
        return n + i * (n - 1) + j - (1 if j > i else 0)
    i = np.asarray(i)
    j = np.asarray(j)
    return n + i * (n - 1) + j - (j > i)


def second_order_nnz(g: DiGraph) -> int:
    n, e = g.n, g.num_edges
    return n + e + 2 * n * (n - 1) + e * max(n - 2, 0)


@dataclass(frozen=True)
class SecondOrder:
    matrix: SparseMetzler
    n: int

    def index(self, kind: str, i: int, j: int | None = None) -> int:
        if kind == "p":
            if not 0 <= i < self.n:
                raise IndexError(i)
            return i
        if kind == "q":
            return int(q_index(i, j, self.n))
        raise ValueError(f"unknown state kind {kind!r}")

    def labels(self) -> list[tuple]:
        out: list[tuple] = [("p", i) for i in range(self.n)]
        out += [("q", i, j) for i in range(self.n) for j in range(self.n) if j != i]
        return out

    def state_from_infected(self, x0) -> np.ndarray:
        """``r(0)`` for a deterministic start: ``p = x``, ``q_ij = (1 - x_i) x_j``."""
        x = np.asarray(x0, dtype=float)
        if x.shape != (self.n,):
            raise ValueError(f"initial state must have length {self.n}")
        ii, jj = _offdiag_pairs(self.n)
        r = np.empty(self.n * self.n)
        r[: self.n] = x
        r[q_index(ii, jj, self.n)] = (1 - x[ii]) * x[jj]
        return r


def _offdiag_pairs(n: int) -> tuple[np.ndarray, np.ndarray]:
    ii, jj = np.nonzero(~np.eye(n, dtype=bool))
    return ii, jj


def build_second_order(
    g: DiGraph, params: SisParams, nnz_budget: int = DEFAULT_NNZ_BUDGET
) -> SecondOrder:
    """Assemble the ``n^2 x n^2`` moment-closure matrix.

    p-row ``i``: ``-delta_i`` on ``p_i``, ``beta_i a_ik`` on ``q_ik``.
    q-row ``(i, j)``: ``delta_i`` on ``p_j``, ``-gamma_ij`` on ``q_ij`` with
    ``gamma_ij = delta_i + delta_j + a_ij beta_i``, and ``beta_j a_jk`` on
    ``q_ik`` for every ``k`` outside ``{i, j}``.
    """
    _check_dims(g, params)
    nnz = second_order_nnz(g)
    if nnz > nnz_budget:
        raise ResourceGuardError(
            f"second-order matrix would hold {nnz} nonzeros (budget {nnz_budget})"
        )
    n = g.n
    beta, delta = params.beta, params.delta
    a = g.adjacency()
    nz_j, nz_k = np.nonzero(a)  # a_jk = 1
    ii, jj = _offdiag_pairs(n)
    q_ij = q_index(ii, jj, n)

    # coupling q_ij <- q_ik through edge k -> j, for i outside {j, k}
    i_all = np.arange(n)[None, :]
    mask = (i_all != nz_j[:, None]) & (i_all != nz_k[:, None])
    ci = np.broadcast_to(i_all, mask.shape)[mask]
    cj = np.broadcast_to(nz_j[:, None], mask.shape)[mask]
    ck = np.broadcast_to(nz_k[:, None], mask.shape)[mask]

    rows = np.concatenate([np.arange(n), nz_j, q_ij, q_ij, q_index(ci, cj, n)])
    cols = np.concatenate([np.arange(n), q_index(nz_j, nz_k, n), jj, q_ij, q_index(ci, ck, n)])
    vals = np.concatenate([
        -delta,
        beta[nz_j],
        delta[ii],
        -(delta[ii] + delta[jj] + a[ii, jj] * beta[ii]),
        beta[cj],
    ])
    return SecondOrder(SparseMetzler.from_triplets(n * n, rows, cols, vals), n)


def second_order_eig(g: DiGraph, params: SisParams, **solver) -> EigResult:
    return _solve(build_second_order(g, params).matrix, "second-order matrix", **solver)


def rho2(g: DiGraph, params: SisParams, **solver) -> float:
    _warn_if_disconnected(g)
    return 0.0 - second_order_eig(g, params, **solver).lambda_max


def propagate_bound(so: SecondOrder, p0, q0=None, grid=(0.0,)) -> np.ndarray:
    """Upper bounds on ``p_i(t)``: the p-block of ``exp(A t) r(0)`` on ``grid``.

    If ``q0`` is omitted, ``p0`` must be a 0/1 vector and the consistent
    ``q_ij(0) = (1 - x_i) x_j`` is used. Returns shape ``(len(grid), n)``.
    """
    n = so.n
    p0 = np.asarray(p0, dtype=float)
    if p0.shape != (n,):
        raise ValueError(f"p0 must have length {n}")
    if np.any(p0 < 0) or np.any(p0 > 1):
        raise ValueError("initial probabilities must lie in [0, 1]")
    if q0 is None:
        if not np.all((p0 == 0) | (p0 == 1)):
            raise ValueError("q0 is required unless p0 is a deterministic 0/1 state")
        r0 = so.state_from_infected(p0)
    else:
        q0 = np.asarray(q0, dtype=float)
        if q0.shape != (n * (n - 1),):
            raise ValueError(f"q0 must have length {n * (n - 1)}")
        r0 = np.concatenate([p0, q0])
    traj = expm_action(so.matrix, r0, grid)
    return np.clip(traj[:, :n], 0.0, None)


# ---------------------------------------------------------------------------
# report


@dataclass
class BoundsReport:
    n: int
    lambda_max_adjacency: float
    rho1: float
    rho2: float
    delta_min: float
    strongly_connected: bool
    diagnostics: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        solves = self.diagnostics
        return {
            "n": self.n,
            "lambda_max_adjacency": self.lambda_max_adjacency,
            "rho1": self.rho1,
            "rho2": self.rho2,
            "delta_min": self.delta_min,
            "strongly_connected": self.strongly_connected,
            "solver": {
                "iterations": int(sum(d["iterations"] for d in solves.values())),
                "residual": float(max((d["residual"] for d in solves.values()), default=0.0)),
                "eigensolves": solves,
            },
        }


def compute_bounds(g: DiGraph, params: SisParams, **solver) -> BoundsReport:
    """Both bounds plus diagnostics; hypotheses violations are flagged, not fatal."""
    _check_dims(g, params)
    connected = is_strongly_connected(g)
    if not connected:
        warnings.warn("graph is not strongly connected", ConnectivityWarning, stacklevel=2)
    adj = adjacency_lambda_max(g, **solver)
    first = first_order_eig(g, params, **solver)
    second = second_order_eig(g, params, **solver)
    return BoundsReport(
        n=g.n,
        lambda_max_adjacency=adj.lambda_max,
        rho1=0.0 - first.lambda_max,
        rho2=0.0 - second.lambda_max,
        delta_min=params.delta_min,
        strongly_connected=connected,
        diagnostics={
            "adjacency": adj.as_dict(),
            "first_order": first.as_dict(),
            "second_order": second.as_dict(),
        },
    )


# ---------------------------------------------------------------------------
# proof machinery: the splitting A = M - N and the reduced matrix L


@dataclass(frozen=True)
class ProofMatrices:
    """Blocks of the splitting ``A = M - N``.

    ``M = [[0, M12], [0, M22]]`` and ``N = [[D, 0], [N21, N22]]``. ``L`` is set
    only when ``rho2 < delta_min`` (then ``N - rho2 I`` is invertible).
    """

    n: int
    D: sp.csr_matrix
    M12: sp.csr_matrix
    M22: sp.csr_matrix
    N21: sp.csr_matrix
    N22: sp.csr_matrix
    rho2: float
    L: SparseMetzler | None = None

    @property
    def applicable(self) -> bool:
        return self.L is not None

    def reconstruct(self) -> sp.csr_matrix:
        n = self.n
        zero_pp = sp.csr_matrix((n, n))
        m = sp.bmat([[zero_pp, self.M12], [sp.csr_matrix((n * (n - 1), n)), self.M22]])
        nn = sp.bmat([[self.D, sp.csr_matrix((n, n * (n - 1)))], [self.N21, self.N22]])
        return (m - nn).tocsr()


def build_proof_matrices(g: DiGraph, params: SisParams, rho2_value: float) -> ProofMatrices:
    _check_dims(g, params)
    n = g.n
    nq = n * (n - 1)
    beta, delta = params.beta, params.delta
    a = g.adjacency()
    nz_j, nz_k = np.nonzero(a)
    ii, jj = _offdiag_pairs(n)
    qrow = q_index(ii, jj, n) - n

    m12 = sp.csr_matrix((beta[nz_j], (nz_j, q_index(nz_j, nz_k, n) - n)), shape=(n, nq))

    i_all = np.arange(n)[None, :]
    mask = (i_all != nz_j[:, None]) & (i_all != nz_k[:, None])
    ci = np.broadcast_to(i_all, mask.shape)[mask]
    cj = np.broadcast_to(nz_j[:, None], mask.shape)[mask]
    ck = np.broadcast_to(nz_k[:, None], mask.shape)[mask]
    m22 = sp.csr_matrix(
        (
            np.concatenate([beta[cj], -a[ii, jj] * beta[ii]]),
            (np.concatenate([q_index(ci, cj, n) - n, qrow]), np.concatenate([q_index(ci, ck, n) - n, qrow])),
        ),
        shape=(nq, nq),
    )
    m22.eliminate_zeros()
    n21 = sp.csr_matrix((-delta[ii], (qrow, jj)), shape=(nq, n))
    n22_diag = delta[ii] + delta[jj]
    n22 = sp.diags(n22_diag, format="csr")
    d = sp.diags(delta, format="csr")

    L = None
    if rho2_value < params.delta_min:
        left = sp.diags(1.0 / (n22_diag - rho2_value))
        mid = sp.diags(1.0 / (delta - rho2_value))
        L = SparseMetzler(left @ ((-n21) @ mid @ m12 + m22))
    return ProofMatrices(n, d, m12, m22, n21, n22, float(rho2_value), L)


def l_sandwich(pm: ProofMatrices, rho1_value: float, rho2_value: float, params: SisParams, **solver):
    """``(lambda_max(L), max_i (delta_i - rho1) / (delta_i - rho2))``."""
    if not pm.applicable:
        raise ValueError("L is undefined when rho2 >= delta_min")
    lam = _solve(pm.L, "reduced matrix L", **solver).lambda_max
    delta = params.delta
    upper = float(np.max((delta - rho1_value) / (delta - rho2_value)))
    return lam, upper


def verify_L_sandwich(pm: ProofMatrices, rho1_value: float, rho2_value: float, params: SisParams,
                      slack: float = 1e-7) -> bool:
    """``1 - slack <= lambda_max(L) < max_i (delta_i - rho1) / (delta_i - rho2)``."""
    lam, upper = l_sandwich(pm, rho1_value, rho2_value, params)
    return 1.0 - slack <= lam < upper


def build_gpp(g: DiGraph) -> DiGraph:
    """Auxiliary graph on the ``n(n-1)`` ordered pairs, ordered like ``q_index``.

    Edges ``(i,j) -> (j,k)`` and ``(i,j) -> (i,k)`` for each edge ``(j,k)`` of
    ``g``; pairs whose target would be ``(i,i)`` are dropped.
    """
    n = g.n
    if n < 2:
        raise ValueError("need at least two nodes")
    edges = set()
    for j, k in g.edges:
        for i in range(n):
            if i == j:
                continue
            src = int(q_index(i, j, n)) - n
            edges.add((src, int(q_index(j, k, n)) - n))
            if k != i:
                edges.add((src, int(q_index(i, k, n)) - n))
    return DiGraph(n * (n - 1), frozenset(edges))
