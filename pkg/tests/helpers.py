"""Shared instance generators and naive reference implementations for tests."""

from __future__ import annotations

import numpy as np

from sisbounds import DiGraph, SisParams


def random_strong_digraph(rng: np.random.Generator, n: int, extra: float = 0.3) -> DiGraph:
    """A random permutation cycle (so strongly connected) plus extra random arcs."""
    perm = rng.permutation(n)
    edges = {(int(perm[i]), int(perm[(i + 1) % n])) for i in range(n)} if n > 1 else set()
    for u in range(n):
        for v in range(n):
            if u != v and rng.random() < extra:
                edges.add((u, v))
    return DiGraph.from_edges(n, edges)


def random_rates(rng: np.random.Generator, n: int, lo: float = 0.5, hi: float = 2.0) -> SisParams:
    return SisParams(rng.uniform(lo, hi, n), rng.uniform(lo, hi, n))


def karate() -> DiGraph:
    import networkx as nx

    kg = nx.karate_club_graph()
    return DiGraph.from_edges(kg.number_of_nodes(), kg.edges()).bidirected()


def naive_second_order(g: DiGraph, params: SisParams) -> np.ndarray:
    """Dense moment-closure matrix built entry by entry from the ODE right-hand side."""
    n = g.n
    a = g.adjacency()
    b, d = params.beta, params.delta
    pairs = [(i, j) for i in range(n) for j in range(n) if i != j]
    col = {("p", i): i for i in range(n)}
    col.update({("q",) + pq: n + k for k, pq in enumerate(pairs)})
    m = np.zeros((n * n, n * n))
    for i in range(n):
        # dp_i/dt = -d_i p_i + b_i sum_k a_ik q_ik
        m[i, i] = -d[i]
        for k in range(n):
            if a[i, k]:
                m[i, col["q", i, k]] += b[i]
    for i, j in pairs:
        r = col["q", i, j]
        m[r, col["p", j]] += d[i]
        m[r, r] -= d[i] + d[j] + a[i, j] * b[i]
        for k in range(n):
            if k not in (i, j) and a[j, k]:
                m[r, col["q", i, k]] += b[j]
    return m


def naive_first_order(g: DiGraph, params: SisParams) -> np.ndarray:
    return np.diag(params.beta) @ g.adjacency().astype(float) - np.diag(params.delta)


def random_metzler(rng: np.random.Generator, dim: int, density: float = 0.2,
                   irreducible: bool = True) -> np.ndarray:
    """Dense Metzler matrix; a random Hamiltonian cycle in the pattern makes it irreducible."""
    m = np.where(rng.random((dim, dim)) < density, rng.uniform(0.0, 1.0, (dim, dim)), 0.0)
    if irreducible and dim > 1:
        perm = rng.permutation(dim)
        m[perm, np.roll(perm, -1)] = rng.uniform(0.1, 1.0, dim)
    np.fill_diagonal(m, rng.uniform(-5.0, 1.0, dim))
    return m
