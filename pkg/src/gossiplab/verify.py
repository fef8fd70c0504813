"""Independent brute-force oracles for the small-instance claims.

Everything here runs in exact arithmetic: enumeration walks every product of
update matrices up to a depth (deduplicating by value, which preserves the set
of reachable products), the stall bound evaluates an explicit infinite product
with an analytic tail, and the counterexample generator mechanically builds a
configuration that provably cannot mix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .engine import TrialConfig
from .errors import (EnumerationCeilingError, GraphConnectivityError,
                     NoCounterexampleError)
from .graphs import (Digraph, SelectionMatrix, converse, is_double_connected,
                     is_quasi_strongly_connected, structural_constants)
from .matrices import (StochasticMatrix, asymmetric_update,
                       product_chain, symmetric_update)
from .process import Schedule

FAMILIES = ("symmetric", "asymmetric", "full")
MAX_ENUM_DEPTH = 55  # int64 numerators hold exponents safely up to here


def family_members(n: int, family: str):
    """The update-matrix alphabet as (descriptor, int64 numerators, exp=1).

    symmetric: every pairwise averaging matrix (both endpoints move);
    asymmetric: every one-sided averaging matrix (first index receives);
    full: both.
    """
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}")
    members = []

    def base():
        m = 2 * np.eye(n, dtype=np.int64)
        return m

    if family in ("symmetric", "full"):
        for i in range(n):
            for j in range(i + 1, n):
                m = base()
                m[i, i] = m[j, j] = 1
                m[i, j] = m[j, i] = 1
                members.append((("symmetric", i, j), m))
    if family in ("asymmetric", "full"):
        for i in range(n):
            for j in range(n):
                if i == j:
                    continue
                m = base()
                m[i, i] = 1
                m[i, j] = 1
                members.append((("asymmetric", i, j), m))
    return members


@dataclass
class EnumerationReport:
    n: int
    depth: int
    family: str
    chains_checked: int
    distinct_products: int
    violations: list = field(default_factory=list)
    min_delta_seen: Optional[float] = None
    ceiling_hit: bool = False

    def to_json(self) -> dict:
        return {
            "n": self.n, "depth": self.depth, "family": self.family,
            "chains_checked": self.chains_checked,
            "distinct_products": self.distinct_products,
            "violations": [
                {"type": v["type"], "chain": [list(c) for c in v["chain"]]}
                for v in self.violations],
            "min_delta_seen": self.min_delta_seen,
            "ceiling_hit": self.ceiling_hit,
        }


def _normalize_batch(prods, exps):
    """Divide out common powers of two, per product. Entries are nonnegative
    int64 with headroom, so (v & -v) isolates the lowest set bit exactly."""
    flat = prods.reshape(prods.shape[0], -1)
    acc = np.bitwise_or.reduce(flat, axis=1)
    lowbit = acc & -acc
    tz = np.where(acc > 0, np.log2(np.maximum(lowbit, 1)).astype(np.int64), 0)
    shift = np.minimum(tz, exps)
    prods >>= shift[:, None, None]
    return prods, exps - shift


def enumerate_products(n: int, max_depth: int, family: str = "symmetric", *,
                       ceiling: int = 10_000_000,
                       members=None) -> EnumerationReport:
    """Exhaustively multiply every chain over the family up to max_depth.

    Chains are covered through a reachable-set walk: two chains with the same
    product value have identical continuations, so deduplicating by exact
    value loses nothing. Reports every product whose rows are all identical
    (finite-time consensus) with a witness chain, and - for the symmetric
    family, whose members are all doubly stochastic - any product that fails
    to preserve column sums, which can only happen with a corrupted member.
    """
    if max_depth < 1:
        raise ValueError("max_depth must be >= 1")
    if max_depth > MAX_ENUM_DEPTH:
        raise ValueError(f"max_depth above {MAX_ENUM_DEPTH} would overflow int64")
    fam = members if members is not None else family_members(n, family)
    check_doubly = family == "symmetric"
    n_fam = len(fam)

    ident = np.eye(n, dtype=np.int64)
    root_key = (0, ident.tobytes())
    seen = {root_key: None}  # key -> (parent_key, member_index) | None
    frontier = [(ident, 0, root_key)]

    violations = []
    min_delta = None
    ceiling_hit = False

    def chain_of(key):
        out = []
        while seen[key] is not None:
            parent, midx = seen[key]
            out.append(fam[midx][0])
            key = parent
        out.reverse()
        return out

    depth_reached = 0
    for depth in range(1, max_depth + 1):
        if not frontier or ceiling_hit:
            break
        depth_reached = depth
        stack = np.stack([p for p, _, _ in frontier])
        exps = np.array([e for _, e, _ in frontier], dtype=np.int64)
        parent_keys = [k for _, _, k in frontier]
        next_frontier = []
        for midx, (_, wmat) in enumerate(fam):
            prods = np.matmul(wmat[None, :, :], stack)
            new_exps = exps + 1
            prods, new_exps = _normalize_batch(prods, new_exps)
            consensus = (prods == prods[:, :1, :]).all(axis=(1, 2))
            if check_doubly:
                colsums = prods.sum(axis=1)
                bad_cols = (colsums != (np.int64(1) << new_exps)[:, None]).any(axis=1)
            deltas = (prods.max(axis=1) - prods.min(axis=1)).max(axis=1)
            for f in range(prods.shape[0]):
                exp_f = int(new_exps[f])
                key = (exp_f, prods[f].tobytes())
                if key in seen:
                    continue
                seen[key] = (parent_keys[f], midx)
                d = float(deltas[f]) / float(1 << exp_f)
                if min_delta is None or d < min_delta:
                    min_delta = d
                if consensus[f]:
                    violations.append({"type": "finite_consensus",
                                       "chain": chain_of(key)})
                if check_doubly and bad_cols[f]:
                    violations.append({"type": "not_doubly_stochastic",
                                       "chain": chain_of(key)})
                next_frontier.append((prods[f], exp_f, key))
                if len(seen) - 1 > ceiling:
                    ceiling_hit = True
                    break
            if ceiling_hit:
                break
        frontier = next_frontier

    if ceiling_hit:
        raise EnumerationCeilingError(
            f"distinct-product ceiling {ceiling} hit at depth {depth_reached}; "
            "result inconclusive")

    chains_checked = sum(n_fam ** d for d in range(1, max_depth + 1))
    return EnumerationReport(
        n=n, depth=max_depth, family=family, chains_checked=chains_checked,
        distinct_products=len(seen) - 1, violations=violations,
        min_delta_seen=min_delta, ceiling_hit=False)


@dataclass(frozen=True)
class StallBound:
    """Analytic floor on the probability that a chosen node pair keeps its
    initial values forever (hence on the non-consensus probability)."""

    truncated_product: float
    tail_factor: float

    @property
    def floor(self) -> float:
        return self.truncated_product * self.tail_factor


def stall_probability_bound(sel: SelectionMatrix, sched_plus: Schedule,
                            sched_minus: Schedule, node_pair, horizon: int,
                            model: str = "dependent", k0: int = 0) -> StallBound:
    """Product over slots of the two nodes' per-slot untouched probabilities,
    truncated at the horizon, times exp(-2 * tail sum) which lower-bounds the
    remaining infinite product (log(1-t) >= -2t for t in [0, 1/2])."""
    a = sel.a
    n = sel.n
    off = a.copy()
    np.fill_diagonal(off, 0.0)
    r = off.sum(axis=1)
    c = off.sum(axis=0)
    h = (r + c) / n
    alpha, beta = node_pair
    for node in (alpha, beta):
        if h[node] >= 1.0:
            raise ValueError(
                f"node {node} has per-slot touch mass {h[node]} >= 1; "
                "its stall probability cannot be bounded away from zero")

    ks = np.arange(k0, horizon + 1, dtype=np.int64)
    pp = sched_plus.values(ks)
    pm = sched_minus.values(ks)
    if model == "dependent":
        touch = {node: h[node] * pp for node in (alpha, beta)}
        tails = {node: h[node] * sched_plus.tail_sum_upper(horizon + 1)
                 for node in (alpha, beta)}
    else:
        touch = {node: (r[node] * pp + c[node] * pm) / n for node in (alpha, beta)}
        tails = {node: (r[node] * sched_plus.tail_sum_upper(horizon + 1)
                        + c[node] * sched_minus.tail_sum_upper(horizon + 1)) / n
                 for node in (alpha, beta)}

    truncated = float(np.prod(1.0 - touch[alpha]) * np.prod(1.0 - touch[beta]))
    tail_total = tails[alpha] + tails[beta]
    tail_factor = 0.0 if math.isinf(tail_total) else math.exp(-2.0 * tail_total)
    return StallBound(truncated, tail_factor)


def pick_stall_pair(sel: SelectionMatrix):
    """Two nodes with the smallest per-slot touch mass (both below 1 whenever
    n >= 3 and rows are stochastic)."""
    off = sel.a.copy()
    np.fill_diagonal(off, 0.0)
    h = (off.sum(axis=1) + off.sum(axis=0)) / sel.n
    order = np.argsort(h, kind="stable")
    if h[order[1]] >= 1.0:
        raise ValueError("fewer than two nodes with touch mass below 1")
    return int(order[0]), int(order[1])


@dataclass(frozen=True)
class Prop1Counterexample:
    config: TrialConfig
    group_a: tuple
    group_b: tuple
    silenced: str  # which direction's schedule is pinned to zero


def _ancestor_sets(g: Digraph):
    rev = converse(g).out_neighbors()
    sets = []
    for v in range(g.n):
        seen = {v}
        stack = [v]
        while stack:
            w = stack.pop()
            for u in rev[w]:
                if u not in seen:
                    seen.add(u)
                    stack.append(u)
        sets.append(frozenset(seen))
    return sets


def prop1_counterexample(g: Digraph, horizon: int = 100_000) -> Prop1Counterexample:
    """Build a configuration that cannot reach consensus on a graph violating
    double connectivity.

    Information moves along the graph's arcs when the picker's receive
    direction fires, and along the converse arcs when the picked node's
    receive direction fires. Silencing the direction whose graph still has a
    center leaves two ancestor-closed node groups that never hear from each
    other; a 0/1 split across them is frozen forever.
    """
    if is_double_connected(g):
        raise NoCounterexampleError(
            "graph and its converse both have a center; no counterexample exists")
    if not is_quasi_strongly_connected(g):
        failing = g
        silenced = "minus"
    else:
        failing = converse(g)
        silenced = "plus"

    anc = _ancestor_sets(failing)
    witness = None
    for i in range(g.n):
        for j in range(i + 1, g.n):
            if not (anc[i] & anc[j]):
                witness = (i, j)
                break
        if witness:
            break
    assert witness is not None, "no center implies two disjoint ancestor sets"

    group_a = tuple(sorted(anc[witness[0]]))
    group_b = tuple(sorted(anc[witness[1]]))
    x0 = np.full(g.n, 0.5)
    x0[list(group_a)] = 0.0
    x0[list(group_b)] = 1.0

    zero = Schedule.constant(0.0)
    one = Schedule.constant(1.0)
    cfg = TrialConfig(
        matrix=SelectionMatrix.from_digraph(g),
        model="independent",
        sched_plus=zero if silenced == "plus" else one,
        sched_minus=zero if silenced == "minus" else one,
        x0=x0,
        horizon=horizon,
        arithmetic="float",
    )
    return Prop1Counterexample(cfg, group_a, group_b, silenced)


@dataclass
class ScramblingReport:
    chains: int
    block_count: int
    nonscrambling: int
    floor_violations: int
    lambda_max: float
    first_nonscrambling_chain: Optional[list] = None


def _arc_family(sel: SelectionMatrix):
    """The update matrices the selection matrix can actually realize."""
    sym = set()
    asym = []
    a = sel.a
    for i in range(sel.n):
        for j in range(sel.n):
            if i == j or a[i, j] + a[j, i] <= 0:
                continue
            sym.add((min(i, j), max(i, j)))
            asym.append(("asymmetric", i, j))
    return [("symmetric", i, j) for (i, j) in sorted(sym)] + sorted(asym)


def _expand_descriptor(desc, n) -> StochasticMatrix:
    kind, i, j = desc
    if kind == "symmetric":
        return symmetric_update(i, j, n).expand()
    return asymmetric_update(i, j, n).expand()


def scrambling_block_check(sel: SelectionMatrix, trials: int,
                           rng: np.random.Generator,
                           blocks: Optional[int] = None) -> ScramblingReport:
    """Random chains of covering blocks, checked exactly.

    Each block multiplies update matrices drawn to cover every arc of the
    selection graph or of its converse (one covering matrix per arc, sampled
    without replacement, plus a few extra random members), so the block's
    induced graph contains the target graph. With 2 d* - 1 covering blocks the
    product must be scrambling, and with N total matrices its smallest shared
    row mass is at least 2^-N.
    """
    g = sel.induced()
    if not is_double_connected(g):
        raise GraphConnectivityError(
            "scrambling block check needs double connectivity of the selection graph")
    sc = structural_constants(sel)
    block_count = blocks if blocks is not None else 2 * sc.d_star - 1
    n = sel.n
    arcs_fwd = sorted(g.arcs - {(i, i) for i in range(n)})
    arcs_rev = sorted(converse(g).arcs - {(i, i) for i in range(n)})
    extras_pool = _arc_family(sel)

    nonscrambling = 0
    floor_bad = 0
    lam_max = 0.0
    first_bad = None
    for _ in range(trials):
        chain = []
        for _ in range(block_count):
            arcs = list(arcs_fwd if rng.random() < 0.5 else arcs_rev)
            order = rng.permutation(len(arcs))
            block = []
            for idx in order:
                u, v = arcs[idx]
                # arc (u, v) appears in the induced graph of sym{u,v} and of
                # the one-sided update where v receives from u
                if rng.random() < 0.5:
                    block.append(("symmetric", min(u, v), max(u, v)))
                else:
                    block.append(("asymmetric", v, u))
            for _ in range(int(rng.integers(0, 3))):
                block.append(extras_pool[int(rng.integers(0, len(extras_pool)))])
            chain.extend(block)
        prod = product_chain([_expand_descriptor(d, n) for d in chain])
        nmat = len(chain)
        worst = min(
            sum(min(prod.nums[a][k], prod.nums[b][k]) for k in range(n))
            for a in range(n) for b in range(a + 1, n))
        lam = 1.0 - worst / float(1 << prod.exp)
        lam_max = max(lam_max, lam)
        if worst == 0:
            nonscrambling += 1
            if first_bad is None:
                first_bad = chain
        # lambda <= 1 - 2^-N  <=>  worst / 2^exp >= 2^-N
        if (worst << nmat) < (1 << prod.exp):
            floor_bad += 1
    return ScramblingReport(trials, block_count, nonscrambling, floor_bad,
                            lam_max, first_bad)


@dataclass
class ChainCheckReport:
    chains: int
    violations: int
    detail: Optional[str] = None


def chain_contraction_check(n: int, trials: int, rng: np.random.Generator,
                            max_len: int = 6) -> ChainCheckReport:
    """Random chains of random row-stochastic matrices: the product's row
    disagreement never exceeds the product of the members' scrambling
    coefficients."""
    from .matrices import delta_coefficient, lambda_coefficient

    bad = 0
    detail = None
    for t in range(trials):
        length = int(rng.integers(1, max_len + 1))
        mats = []
        for _ in range(length):
            raw = rng.random((n, n)) + 1e-12
            mats.append(StochasticMatrix(floats=raw / raw.sum(axis=1, keepdims=True),
                                         validate=False))
        prod = product_chain(mats)
        bound = 1.0
        for m in mats:
            bound *= lambda_coefficient(m)
        if delta_coefficient(prod) > bound + 1e-12:
            bad += 1
            if detail is None:
                detail = f"chain {t}: delta {delta_coefficient(prod)} > bound {bound}"
    return ChainCheckReport(trials, bad, detail)


def chain_floor_union_check(n: int, trials: int, rng: np.random.Generator,
                            max_len: int = 8) -> ChainCheckReport:
    """Random chains of update matrices, checked exactly: every nonzero entry
    of an N-fold product is at least 2^-N, and the product's induced graph
    contains the union of the members' induced graphs."""
    from .graphs import induced_graph

    fam = family_members(n, "full")
    bad = 0
    detail = None
    for t in range(trials):
        length = int(rng.integers(1, max_len + 1))
        picks = [fam[int(rng.integers(0, len(fam)))] for _ in range(length)]
        mats = [_expand_descriptor(desc, n) for desc, _ in picks]
        prod = product_chain(mats)
        ok = True
        # entry floor, exact: v / 2^exp >= 2^-N  <=>  v << N >= 2^exp
        for row in prod.nums:
            for v in row:
                if v and (v << length) < (1 << prod.exp):
                    ok = False
        union = set()
        for m in mats:
            union |= induced_graph(m.to_floats()).arcs
        if not union <= induced_graph(prod.to_floats()).arcs:
            ok = False
        if not ok:
            bad += 1
            if detail is None:
                detail = f"chain {t}: {[d for d, _ in picks]}"
    return ChainCheckReport(trials, bad, detail)
