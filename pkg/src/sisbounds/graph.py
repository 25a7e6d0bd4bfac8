"""Directed contact networks: representation, edge-list I/O, connectivity, generators.

Orientation convention: an edge ``(u, v)`` points from ``u`` to ``v``, so ``u``
is an in-neighbor of ``v`` and the adjacency entry ``a[v][u]`` equals 1.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable

import numpy as np
import scipy.sparse as sp


class EdgeListError(ValueError):
    """Raised for malformed edge-list input."""


@dataclass(frozen=True)
class DiGraph:
    n: int
    edges: frozenset[tuple[int, int]] = field(default_factory=frozenset)

    def __post_init__(self):
        if self.n < 0:
            raise ValueError(f"node count must be nonnegative, got {self.n}")
        edges = frozenset((int(u), int(v)) for u, v in self.edges)
        for u, v in edges:
            if u == v:
                raise ValueError(f"self-loop at node {u}")
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise ValueError(f"edge ({u}, {v}) out of range for n={self.n}")
        object.__setattr__(self, "edges", edges)

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]]) -> "DiGraph":
        return cls(n, frozenset(edges))

    @classmethod
    def from_adjacency(cls, a) -> "DiGraph":
        """Build from an adjacency matrix with ``a[i, j] = 1`` iff ``j -> i``."""
        a = np.asarray(a)
        rows, cols = np.nonzero(a)
        return cls(a.shape[0], frozenset(zip(cols.tolist(), rows.tolist())))

    def __len__(self) -> int:
        return self.n

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self.edges)

    @cached_property
    def out_neighbors(self) -> tuple[tuple[int, ...], ...]:
        out: list[list[int]] = [[] for _ in range(self.n)]
        for u, v in self.sorted_edges():
            out[u].append(v)
        return tuple(tuple(x) for x in out)

    @cached_property
    def in_neighbors(self) -> tuple[tuple[int, ...], ...]:
        inn: list[list[int]] = [[] for _ in range(self.n)]
        for u, v in self.sorted_edges():
            inn[v].append(u)
        return tuple(tuple(x) for x in inn)

    def adjacency(self) -> np.ndarray:
        """Dense 0/1 matrix with ``a[i, j] = 1`` iff ``j`` is an in-neighbor of ``i``."""
        a = np.zeros((self.n, self.n), dtype=np.int8)
        if self.edges:
            u, v = np.array(self.sorted_edges()).T
            a[v, u] = 1
        return a

    def adjacency_sparse(self) -> sp.csr_matrix:
        if not self.edges:
            return sp.csr_matrix((self.n, self.n), dtype=float)
        u, v = np.array(self.sorted_edges()).T
        return sp.csr_matrix((np.ones(len(u)), (v, u)), shape=(self.n, self.n))

    def is_bidirected(self) -> bool:
        return all((v, u) in self.edges for u, v in self.edges)

    def reverse(self) -> "DiGraph":
        return DiGraph(self.n, frozenset((v, u) for u, v in self.edges))

    def bidirected(self) -> "DiGraph":
        return DiGraph(self.n, self.edges | {(v, u) for u, v in self.edges})


# ---------------------------------------------------------------------------
# edge-list I/O


def parse_edge_list(text: bytes | str, bidirect: bool = False, n: int | None = None) -> DiGraph:
    """Parse a whitespace-separated edge list.

    Lines starting with ``#`` and blank lines are skipped. A directive line
    ``n=N`` fixes the node count; otherwise it is ``1 + max id``. With
    ``bidirect`` every listed pair also inserts its reverse. An explicit ``n``
    argument overrides the directive.
    """
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    edges: set[tuple[int, int]] = set()
    directive_n = None
    max_id = -1
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.replace(" ", "").startswith("n="):
            try:
                directive_n = int(line.replace(" ", "")[2:])
            except ValueError:
                raise EdgeListError(f"line {lineno}: bad node-count directive {raw!r}") from None
            if directive_n < 1:
                raise EdgeListError(f"line {lineno}: node count must be positive")
            continue
        tokens = line.split()
        if len(tokens) < 2:
            raise EdgeListError(f"line {lineno}: expected two node ids, got {raw!r}")
        try:
            u, v = int(tokens[0]), int(tokens[1])
        except ValueError:
            raise EdgeListError(f"line {lineno}: non-integer node id in {raw!r}") from None
        if u < 0 or v < 0:
            raise EdgeListError(f"line {lineno}: negative node id in {raw!r}")
        if u == v:
            raise EdgeListError(f"line {lineno}: self-loop at node {u}")
        edges.add((u, v))
        if bidirect:
            edges.add((v, u))
        max_id = max(max_id, u, v)

    count = n if n is not None else directive_n
    if count is None:
        count = max_id + 1
    if count <= max_id:
        raise EdgeListError(f"node count {count} too small for node id {max_id}")
    if count < 1:
        raise EdgeListError("edge list defines no nodes")
    return DiGraph(count, frozenset(edges))


def read_edge_list(path, bidirect: bool = False) -> DiGraph:
    with open(path, "rb") as fh:
        return parse_edge_list(fh.read(), bidirect=bidirect)


def write_edge_list(g: DiGraph) -> bytes:
    """Serialize ``g``; a ``n=N`` directive is emitted only when ids alone can't fix ``n``."""
    buf = io.StringIO()
    max_id = max((max(e) for e in g.edges), default=-1)
    if g.n != max_id + 1:
        buf.write(f"n={g.n}\n")
    for u, v in g.sorted_edges():
        buf.write(f"{u} {v}\n")
    return buf.getvalue().encode("utf-8")


# ---------------------------------------------------------------------------
# connectivity


def _reachable(adj: tuple[tuple[int, ...], ...], start: int) -> list[bool]:
    seen = [False] * len(adj)
    seen[start] = True
    stack = [start]
    while stack:
        u = stack.pop()
        for v in adj[u]:
            if not seen[v]:
                seen[v] = True
                stack.append(v)
    return seen


def is_strongly_connected(g: DiGraph) -> bool:
    """One forward and one reverse reachability sweep from node 0."""
    if g.n < 1:
        raise ValueError("graph has no nodes")
    return all(_reachable(g.out_neighbors, 0)) and all(_reachable(g.in_neighbors, 0))


def strongly_connected_components(g: DiGraph) -> list[list[int]]:
    """Tarjan's algorithm, iterative. Components are returned with sorted members."""
    n = g.n
    adj = g.out_neighbors
    index = [-1] * n
    low = [0] * n
    on_stack = [False] * n
    stack: list[int] = []
    comps: list[list[int]] = []
    counter = 0
    for root in range(n):
        if index[root] >= 0:
            continue
        work = [(root, 0)]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack[root] = True
        while work:
            v, pos = work[-1]
            nbrs = adj[v]
            if pos < len(nbrs):
                work[-1] = (v, pos + 1)
                w = nbrs[pos]
                if index[w] < 0:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack[w] = True
                    work.append((w, 0))
                elif on_stack[w]:
                    low[v] = min(low[v], index[w])
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    comp.append(w)
                    if w == v:
                        break
                comps.append(sorted(comp))
    return comps


def induced_subgraph(g: DiGraph, nodes: Iterable[int]) -> tuple[DiGraph, np.ndarray]:
    """Induced subgraph relabeled 0..k-1 in ascending original order.

    Returns the subgraph and the array mapping new ids to original ids.
    """
    keep = np.array(sorted(set(nodes)), dtype=np.int64)
    new_id = {int(old): new for new, old in enumerate(keep)}
    edges = frozenset(
        (new_id[u], new_id[v]) for u, v in g.edges if u in new_id and v in new_id
    )
    return DiGraph(len(keep), edges), keep


def restrict_to_largest_scc(g: DiGraph) -> tuple[DiGraph, np.ndarray]:
    """Largest strongly connected component; ties go to the one holding the smallest id."""
    if g.n < 1:
        raise ValueError("graph has no nodes")
    comps = strongly_connected_components(g)
    best = min(comps, key=lambda c: (-len(c), c[0]))
    return induced_subgraph(g, best)


# ---------------------------------------------------------------------------
# random generators


@dataclass(frozen=True)
class GraphGenSpec:
    """Parameters of a random graph family.

    ``p`` is the edge probability for ER and the shortcut probability for NWS;
    ``m`` is the BA attachment count; ``k`` the NWS ring half-degree.
    """

    family: str
    n: int
    p: float | None = None
    m: int | None = None
    k: int | None = None
    seed: int = 0

    def __post_init__(self):
        fam = self.family.lower()
        object.__setattr__(self, "family", fam)
        if fam not in ("er", "ba", "nws"):
            raise ValueError(f"unknown graph family {self.family!r}")
        if self.n < 1:
            raise ValueError("n must be positive")
        if not (0 <= self.seed < 2**64):
            raise ValueError("seed must be a 64-bit unsigned integer")
        if fam in ("er", "nws"):
            if self.p is None or not (0.0 <= self.p <= 1.0):
                raise ValueError(f"{fam}: probability p must lie in [0, 1]")
        if fam == "ba":
            if self.m is None or self.m < 1:
                raise ValueError("ba: attachment count m must be >= 1")
            if self.n < self.m + 1:
                raise ValueError("ba: need n > m")
        if fam == "nws":
            if self.k is None or self.k < 1:
                raise ValueError("nws: ring half-degree k must be >= 1")
            if self.n < 2 * self.k + 1:
                raise ValueError("nws: need n >= 2k + 1")


def _undirected_to_digraph(n: int, pairs: Iterable[tuple[int, int]]) -> DiGraph:
    edges = set()
    for u, v in pairs:
        edges.add((u, v))
        edges.add((v, u))
    return DiGraph(n, frozenset(edges))


def _gen_er(spec: GraphGenSpec, rng: np.random.Generator) -> DiGraph:
    iu, ju = np.triu_indices(spec.n, k=1)
    keep = rng.random(len(iu)) < spec.p
    return _undirected_to_digraph(spec.n, zip(iu[keep].tolist(), ju[keep].tolist()))


def _gen_ba(spec: GraphGenSpec, rng: np.random.Generator) -> DiGraph:
    m = spec.m
    pairs = [(i, j) for i in range(m) for j in range(i + 1, m)]
    # each node appears once per incident edge, so uniform draws are degree-proportional
    repeated: list[int] = [x for e in pairs for x in e]
    for new in range(m, spec.n):
        targets: set[int] = set()
        while len(targets) < m:
            if repeated:
                pick = repeated[int(rng.integers(len(repeated)))]
            else:
                pick = int(rng.integers(new))
            targets.add(pick)
        for t in sorted(targets):
            pairs.append((t, new))
            repeated.extend((t, new))
    return _undirected_to_digraph(spec.n, pairs)


def _gen_nws(spec: GraphGenSpec, rng: np.random.Generator) -> DiGraph:
    n, k = spec.n, spec.k
    nbrs: list[set[int]] = [set() for _ in range(n)]
    ring = []
    for u in range(n):
        for d in range(1, k + 1):
            v = (u + d) % n
            ring.append((u, v))
            nbrs[u].add(v)
            nbrs[v].add(u)
    for u, _ in ring:
        if rng.random() >= spec.p:
            continue
        free = [w for w in range(n) if w != u and w not in nbrs[u]]
        if not free:
            continue
        w = free[int(rng.integers(len(free)))]
        nbrs[u].add(w)
        nbrs[w].add(u)
    pairs = [(u, v) for u in range(n) for v in nbrs[u] if u < v]
    return _undirected_to_digraph(n, pairs)


def gen_random(spec: GraphGenSpec) -> DiGraph:
    """Generate a bidirected random graph; deterministic given ``spec.seed``."""
    rng = np.random.default_rng(spec.seed)
    if spec.family == "er":
        return _gen_er(spec, rng)
    if spec.family == "ba":
        return _gen_ba(spec, rng)
    return _gen_nws(spec, rng)
