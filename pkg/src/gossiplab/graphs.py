"""Directed graphs, connectivity predicates, and the structural constants of a
node-pair selection matrix.

A digraph here is just a node count plus a set of ordered arcs. The induced
graph of a nonnegative matrix M puts an arc (j, i) in the graph exactly when
m_ij > 0, so arcs point in the direction information flows when row i of M
mixes in column j.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import GraphConnectivityError

ROW_SUM_TOL = 1e-12
EIG_TOL = 1e-9


@dataclass(frozen=True)
class Digraph:
    n: int
    arcs: frozenset[tuple[int, int]]

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"node count must be >= 1, got {self.n}")
        object.__setattr__(self, "arcs", frozenset(self.arcs))
        for (i, j) in self.arcs:
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise ValueError(f"arc ({i}, {j}) out of range for n={self.n}")

    def out_neighbors(self) -> list[list[int]]:
        out = [[] for _ in range(self.n)]
        for (i, j) in self.arcs:
            out[i].append(j)
        return out

    def __contains__(self, arc):
        return tuple(arc) in self.arcs


def digraph(n, arcs) -> Digraph:
    return Digraph(n, frozenset((int(i), int(j)) for i, j in arcs))


def induced_graph(m) -> Digraph:
    """Digraph with an arc (j, i) for every strictly positive entry m_ij.

    The threshold is exact zero on purpose: entries are user-supplied
    probabilities, not computed quantities.
    """
    a = np.asarray(getattr(m, "to_floats", lambda: m)(), dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"induced graph needs a square matrix, got shape {a.shape}")
    if (a < 0).any():
        raise ValueError("induced graph needs a nonnegative matrix")
    n = a.shape[0]
    rows, cols = np.nonzero(a > 0)
    return Digraph(n, frozenset((int(j), int(i)) for i, j in zip(rows, cols)))


def converse(g: Digraph) -> Digraph:
    """Same nodes, every arc reversed. An involution."""
    return Digraph(g.n, frozenset((j, i) for (i, j) in g.arcs))


def _reachable_from(out, start) -> set[int]:
    seen = {start}
    queue = deque([start])
    while queue:
        v = queue.popleft()
        for w in out[v]:
            if w not in seen:
                seen.add(w)
                queue.append(w)
    return seen


def is_weakly_connected(g: Digraph) -> bool:
    """True when the graph is connected once arc directions are ignored."""
    if g.n == 1:
        return True
    out = [[] for _ in range(g.n)]
    for (i, j) in g.arcs:
        out[i].append(j)
        out[j].append(i)
    return len(_reachable_from(out, 0)) == g.n


def is_quasi_strongly_connected(g: Digraph) -> bool:
    """True when some node (a center) reaches every node."""
    out = g.out_neighbors()
    return any(len(_reachable_from(out, v)) == g.n for v in range(g.n))


def is_strongly_connected(g: Digraph) -> bool:
    out = g.out_neighbors()
    if len(_reachable_from(out, 0)) != g.n:
        return False
    rev = converse(g).out_neighbors()
    return len(_reachable_from(rev, 0)) == g.n


def is_double_connected(g: Digraph) -> bool:
    """True when both the graph and its converse have a center."""
    return is_quasi_strongly_connected(g) and is_quasi_strongly_connected(converse(g))


def shortest_path_lengths(g: Digraph) -> np.ndarray:
    """All-pairs BFS distances; -1 marks unreachable pairs."""
    out = g.out_neighbors()
    dist = np.full((g.n, g.n), -1, dtype=np.int64)
    for s in range(g.n):
        dist[s, s] = 0
        queue = deque([s])
        while queue:
            v = queue.popleft()
            for w in out[v]:
                if dist[s, w] < 0:
                    dist[s, w] = dist[s, v] + 1
                    queue.append(w)
    return dist


def diameter(g: Digraph) -> int:
    """Longest shortest-path length over ordered pairs (i, j), i != j, where j
    is reachable from i. Unreachable pairs are skipped; a graph with no arcs
    between distinct nodes has no diameter.
    """
    dist = shortest_path_lengths(g)
    np.fill_diagonal(dist, -1)
    best = int(dist.max())
    if best < 1:
        raise GraphConnectivityError(
            "diameter undefined: no path between any two distinct nodes")
    return best


class SelectionMatrix:
    """The n x n meeting matrix A: entry a_ij is the probability that node i,
    once drawn, picks the ordered pair (i, j).

    Rows must sum to one. With ``relaxed_rows=True`` row sums may fall short of
    one and the leftover mass means "node i selects nobody" (a no-op slot).
    """

    def __init__(self, entries, relaxed_rows: bool = False):
        a = np.array(entries, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"selection matrix must be square, got shape {a.shape}")
        n = a.shape[0]
        if n < 3:
            raise ValueError(
                f"selection matrix needs n >= 3 (the consensus thresholds break at n=2), got n={n}")
        if (a < 0).any():
            raise ValueError("selection matrix entries must be nonnegative")
        sums = a.sum(axis=1)
        if (sums > 1 + ROW_SUM_TOL).any():
            raise ValueError(f"row sums exceed 1: {sums}")
        if not relaxed_rows and (np.abs(sums - 1.0) > ROW_SUM_TOL).any():
            raise ValueError(
                f"row sums must equal 1 in strict mode (pass relaxed_rows=True for sub-stochastic rows): {sums}")
        self.a = a
        self.a.setflags(write=False)
        self.n = n
        self.relaxed_rows = relaxed_rows
        self._pair_cum = None

    @classmethod
    def complete_uniform(cls, n: int) -> "SelectionMatrix":
        a = np.full((n, n), 1.0 / (n - 1))
        np.fill_diagonal(a, 0.0)
        return cls(a)

    @classmethod
    def directed_cycle(cls, n: int) -> "SelectionMatrix":
        a = np.zeros((n, n))
        for i in range(n):
            a[i, (i + 1) % n] = 1.0
        return cls(a)

    @classmethod
    def from_digraph(cls, g: Digraph) -> "SelectionMatrix":
        """Uniform selection matrix whose induced graph is exactly ``g``.

        Row v is uniform over {u : (u, v) in arcs}. Rows with no support stay
        empty, so the matrix is built in relaxed mode when such rows exist.
        """
        a = np.zeros((g.n, g.n))
        picks = [[] for _ in range(g.n)]
        for (u, v) in g.arcs:
            picks[v].append(u)
        relaxed = False
        for v in range(g.n):
            if picks[v]:
                for u in picks[v]:
                    a[v, u] = 1.0 / len(picks[v])
            else:
                relaxed = True
        return cls(a, relaxed_rows=relaxed)

    def induced(self) -> Digraph:
        return induced_graph(self.a)

    def pair_cumulative(self) -> np.ndarray:
        """Cumulative distribution over the n*n flattened ordered-pair cells;
        mass to the right of the last entry is the relaxed-mode no-op slot."""
        if self._pair_cum is None:
            cum = np.cumsum(self.a.ravel() / self.n)
            cum.setflags(write=False)
            self._pair_cum = cum
        return self._pair_cum

    def to_floats(self) -> np.ndarray:
        return self.a

    def __repr__(self):
        return f"SelectionMatrix(n={self.n}, relaxed_rows={self.relaxed_rows})"


@dataclass(frozen=True)
class StructuralConstants:
    lambda2_star: float
    d_star: int
    e_star: int
    a_star: float
    theta0: int
    h: tuple[float, ...]

    def __post_init__(self):
        assert self.theta0 == (2 * self.d_star - 1) * (2 * self.e_star - 1)
        assert sum(self.h) <= 2 + 1e-9


def laplacian(a: np.ndarray) -> np.ndarray:
    """D - (A + A^T) with D = diag of the row sums of A + A^T."""
    s = a + a.T
    return np.diag(s.sum(axis=1)) - s


def structural_constants(sel: SelectionMatrix) -> StructuralConstants:
    """All graph-derived constants of a selection matrix.

    lambda2_star is the second-smallest eigenvalue of D - (A + A^T); it is
    positive exactly when the underlying graph is weakly connected. d_star and
    e_star need quasi-strong connectivity of the induced graph and its
    converse to be meaningful, but are computed whenever the diameters exist.
    """
    a = sel.a
    n = sel.n
    g = sel.induced()
    if not is_weakly_connected(g):
        raise GraphConnectivityError(
            "underlying graph is not weakly connected (lambda2_star would be 0)")

    eigs = np.linalg.eigvalsh(laplacian(a))
    # the Laplacian is PSD; clamp the zero eigenvalue's numerical noise
    if abs(eigs[0]) > EIG_TOL:
        raise AssertionError(f"Laplacian smallest eigenvalue {eigs[0]} not ~0")
    lambda2 = float(eigs[1])

    d_star = max(diameter(g), diameter(converse(g)))

    off = a.copy()
    np.fill_diagonal(off, 0.0)
    arcs_total = int(np.count_nonzero(a > 0))
    e_star = arcs_total - int(np.count_nonzero(np.diag(a) > 0))

    positive_off = off[off > 0]
    if positive_off.size == 0:
        raise ValueError("no nonzero off-diagonal entry; a_star undefined")
    a_star = float(positive_off.min())

    h = tuple(float(v) for v in (off.sum(axis=1) + off.sum(axis=0)) / n)

    return StructuralConstants(
        lambda2_star=lambda2,
        d_star=int(d_star),
        e_star=int(e_star),
        a_star=a_star,
        theta0=(2 * d_star - 1) * (2 * e_star - 1),
        h=h,
    )
