"""Success-probability schedules, seeded random streams, and the two samplers
that drive the simulation: ordered node-pair selection and per-direction
communication outcomes.

Streams are Philox (counter-based) generators keyed by
(master_seed, trial_index, purpose), so every trial and every purpose within a
trial draws from its own independent stream. That makes trials reproducible
and independent of worker count, and it structurally separates the pair
selection process from the communication process.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ModelMismatchError
from .graphs import SelectionMatrix

MODELS = ("dependent", "independent")

# purpose tags for stream derivation
PURPOSE_PAIR = 0
PURPOSE_COMM = 1
PURPOSE_X0 = 2
PURPOSE_ORACLE = 3

NO_PAIR = (-1, -1)


def derive_generator(master_seed: int, trial_index: int, purpose: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(master_seed) & (2**64 - 1),
                                spawn_key=(int(trial_index), int(purpose)))
    return np.random.Generator(np.random.Philox(ss))


@dataclass
class RandomStream:
    """All streams owned by one trial."""

    master_seed: int
    trial_index: int = 0

    def generator(self, purpose: int) -> np.random.Generator:
        return derive_generator(self.master_seed, self.trial_index, purpose)

    @property
    def pair(self) -> np.random.Generator:
        if not hasattr(self, "_pair"):
            self._pair = self.generator(PURPOSE_PAIR)
        return self._pair

    @property
    def comm(self) -> np.random.Generator:
        if not hasattr(self, "_comm"):
            self._comm = self.generator(PURPOSE_COMM)
        return self._comm

    @property
    def x0(self) -> np.random.Generator:
        if not hasattr(self, "_x0"):
            self._x0 = self.generator(PURPOSE_X0)
        return self._x0


class Schedule:
    """Deterministic success-probability sequence, one of four closed forms:

    constant(c), power(c, gamma) meaning min(1, c/(k+1)^gamma),
    periodic(values), explicit(values, tail).
    """

    __slots__ = ("kind", "c", "gamma", "values_list", "tail")

    def __init__(self, kind, c=0.0, gamma=0.0, values_list=(), tail=0.0):
        self.kind = kind
        self.c = float(c)
        self.gamma = float(gamma)
        self.values_list = tuple(float(v) for v in values_list)
        self.tail = float(tail)
        if kind not in ("constant", "power", "periodic", "explicit"):
            raise ValueError(f"unknown schedule family {kind!r}")
        if kind == "constant" and not 0.0 <= self.c <= 1.0:
            raise ValueError("constant schedule needs c in [0, 1]")
        if kind == "power":
            if self.c < 0 or self.gamma < 0:
                raise ValueError("power schedule needs c >= 0, gamma >= 0")
        if kind in ("periodic", "explicit"):
            if kind == "periodic" and not self.values_list:
                raise ValueError("periodic schedule needs at least one value")
            if any(not 0.0 <= v <= 1.0 for v in self.values_list):
                raise ValueError("schedule values must lie in [0, 1]")
        if kind == "explicit" and not 0.0 <= self.tail <= 1.0:
            raise ValueError("tail value must lie in [0, 1]")

    @classmethod
    def constant(cls, c):
        return cls("constant", c=c)

    @classmethod
    def power(cls, c, gamma):
        return cls("power", c=c, gamma=gamma)

    @classmethod
    def periodic(cls, values):
        return cls("periodic", values_list=values)

    @classmethod
    def explicit(cls, values, tail=0.0):
        return cls("explicit", values_list=values, tail=tail)

    def value(self, k: int) -> float:
        # single source of truth is the vectorized path, so per-slot values
        # are bit-identical no matter how a consumer evaluates them
        if k < 0:
            raise ValueError("k must be >= 0")
        return float(self.values(np.array([k], dtype=np.int64))[0])

    def values(self, ks) -> np.ndarray:
        ks = np.asarray(ks, dtype=np.int64)
        if self.kind == "constant":
            return np.full(ks.shape, self.c)
        if self.kind == "power":
            return np.minimum(1.0, self.c / (ks + 1).astype(float) ** self.gamma)
        if self.kind == "periodic":
            table = np.asarray(self.values_list)
            return table[ks % len(table)]
        out = np.full(ks.shape, self.tail)
        head = ks < len(self.values_list)
        if head.any():
            table = np.asarray(self.values_list)
            out[head] = table[ks[head]]
        return out

    def partial_sum(self, k_from: int, k_to: int) -> float:
        """Sum of values over [k_from, k_to] inclusive (exact per family)."""
        if k_to < k_from:
            return 0.0
        return float(self.values(np.arange(k_from, k_to + 1)).sum())

    def tail_sum_upper(self, k_from: int) -> float:
        """Analytic upper bound on the sum of values over [k_from, inf)."""
        if self.kind == "constant":
            return math.inf if self.c > 0 else 0.0
        if self.kind == "power":
            if self.c == 0:
                return 0.0
            if self.gamma <= 1:
                return math.inf
            # sum_{k>=K} c/(k+1)^g <= c * integral_{K}^{inf} (x+1)^-g dx
            return self.c * (k_from + 1) ** (1.0 - self.gamma) / (self.gamma - 1.0)
        if self.kind == "periodic":
            return math.inf if sum(self.values_list) > 0 else 0.0
        if self.tail > 0:
            return math.inf
        return float(sum(self.values_list[k_from:]))

    def __eq__(self, other):
        return isinstance(other, Schedule) and (
            self.kind, self.c, self.gamma, self.values_list, self.tail
        ) == (other.kind, other.c, other.gamma, other.values_list, other.tail)

    def __repr__(self):
        if self.kind == "constant":
            return f"Schedule.constant({self.c})"
        if self.kind == "power":
            return f"Schedule.power({self.c}, {self.gamma})"
        if self.kind == "periodic":
            return f"Schedule.periodic({list(self.values_list)})"
        return f"Schedule.explicit({list(self.values_list)}, tail={self.tail})"

    def to_json(self):
        if self.kind == "constant":
            return {"family": "constant", "c": self.c}
        if self.kind == "power":
            return {"family": "power", "c": self.c, "gamma": self.gamma}
        if self.kind == "periodic":
            return {"family": "periodic", "values": list(self.values_list)}
        return {"family": "explicit", "values": list(self.values_list), "tail": self.tail}


@dataclass(frozen=True)
class ScheduleClass:
    """Analytic classification of a schedule's tail behaviour.

    divergent_sum: whether the infinite sum of values diverges.
    linear_growth_witness: (p_star, t_star) such that every window of t_star
    consecutive values sums to at least p_star, when such a pair exists.
    """

    divergent_sum: bool
    linear_growth_witness: Optional[tuple[float, int]] = None

    def __post_init__(self):
        if self.linear_growth_witness is not None:
            assert self.divergent_sum


def classify(s: Schedule) -> ScheduleClass:
    """Classify a closed-form family analytically.

    Explicit lists classify by their tail value: a finite list can never
    witness divergence on its own.
    """
    if s.kind == "constant":
        if s.c > 0:
            return ScheduleClass(True, (s.c, 1))
        return ScheduleClass(False)
    if s.kind == "power":
        if s.c == 0:
            return ScheduleClass(False)
        if s.gamma == 0:
            v = min(1.0, s.c)
            return ScheduleClass(True, (v, 1))
        if s.gamma <= 1:
            # divergent p-series, but partial sums grow sublinearly: no window witness
            return ScheduleClass(True, None)
        return ScheduleClass(False)
    if s.kind == "periodic":
        period_sum = sum(s.values_list)
        if period_sum > 0:
            return ScheduleClass(True, (period_sum, len(s.values_list)))
        return ScheduleClass(False)
    # explicit: behaviour is the tail's
    if s.tail > 0:
        # any window of len(list)+1 values reaches at least one tail slot
        return ScheduleClass(True, (s.tail, len(s.values_list) + 1))
    return ScheduleClass(False)


def success_divergent(sched_plus: Schedule, sched_minus: Schedule) -> bool:
    """Whether the per-slot success probability z_k = p_k + q_k - p_k q_k sums
    to infinity. Since (p+q)/2 <= max(p,q) <= z <= p+q pointwise, this holds
    exactly when either direction's sum diverges."""
    return classify(sched_plus).divergent_sum or classify(sched_minus).divergent_sum


def pair_indices_from_uniforms(sel: SelectionMatrix, u: np.ndarray):
    """Map uniforms to ordered pairs by inverting the flattened pair CDF.

    Returns (first, second) int64 arrays; -1 marks the relaxed-mode no-op
    slot. Cells (i, i) are legitimate draws and act as no-ops downstream.
    """
    cum = sel.pair_cumulative()
    idx = np.searchsorted(cum, u, side="right")
    first = np.where(idx < sel.n * sel.n, idx // sel.n, -1).astype(np.int64)
    second = np.where(idx < sel.n * sel.n, idx % sel.n, -1).astype(np.int64)
    return first, second


def sample_pair(sel: SelectionMatrix, rng: np.random.Generator):
    """Draw one ordered pair: (i, j) with probability a_ij / n.

    Leftover row mass (relaxed mode) returns NO_PAIR. Same law as drawing a
    node uniformly and letting it pick a partner from its row.
    """
    u = rng.random()
    first, second = pair_indices_from_uniforms(sel, np.array([u]))
    return int(first[0]), int(second[0])


def communication_flags_from_uniforms(model, p_plus, p_minus, u: np.ndarray):
    """Vector form of sample_communication; u has shape (m,) for the
    single-coin model and (m, 2) for independent coins."""
    if model == "dependent":
        succ = u < p_plus
        return succ, succ
    return u[:, 0] < p_plus, u[:, 1] < p_minus


def sample_communication(model: str, p_plus: float, p_minus: float,
                         rng: np.random.Generator) -> tuple[bool, bool]:
    """Sample the two direction-success flags for one meeting slot.

    dependent: both directions share a single coin (requires equal
    probabilities). independent: two independent coins.
    """
    if model not in MODELS:
        raise ValueError(f"unknown model {model!r}")
    if model == "dependent":
        if p_plus != p_minus:
            raise ModelMismatchError(
                "dependent communication forces equal direction probabilities; "
                f"got {p_plus} and {p_minus}")
        u = rng.random()
        return bool(u < p_plus), bool(u < p_plus)
    u = rng.random(2)
    return bool(u[0] < p_plus), bool(u[1] < p_minus)


def success_times(sched_plus: Schedule, sched_minus: Schedule, model: str,
                  horizon: int, rng: np.random.Generator) -> np.ndarray:
    """Slots k in [0, horizon] where at least one direction succeeds."""
    if horizon < 0:
        raise ValueError("horizon must be >= 0")
    if model not in MODELS:
        raise ValueError(f"unknown model {model!r}")
    ks = np.arange(horizon + 1)
    pp = sched_plus.values(ks)
    pm = sched_minus.values(ks)
    if model == "dependent":
        if sched_plus != sched_minus:
            raise ModelMismatchError(
                "dependent communication needs one shared schedule")
        u = rng.random(horizon + 1)
        succ = u < pp
    else:
        u = rng.random((horizon + 1, 2))
        succ = (u[:, 0] < pp) | (u[:, 1] < pm)
    return np.flatnonzero(succ)
