"""Gossip trajectory execution and Monte Carlo aggregation.

A trial runs the recursion x(k+1) = W(k) x(k) from slot k0: each slot draws an
ordered pair (the picker and its pick), then per-direction success flags; a
successful direction averages the receiving node onto the midpoint of the two
states. The driver pre-draws each chunk of randomness from per-(trial, purpose)
Philox streams and hands the surviving event slots to a kernel (compiled or
pure Python), so trajectories are identical across kernels, worker counts, and
chunk boundaries.

Spread bookkeeping rides on two facts: the max state is nonincreasing and the
min nondecreasing (every update row is a convex combination), so the spread
crosses each threshold at most once and a descending-threshold pointer scan
finds all crossing slots in one pass.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._kernels import get_backend
from .errors import HorizonExceededError, ModelMismatchError
from .graphs import SelectionMatrix, StructuralConstants
from .matrices import (DYADIC_EXP_CAP, DyadicVector, asymmetric_update,
                       identity_update, symmetric_update)
from .process import (MODELS, RandomStream, Schedule,
                      communication_flags_from_uniforms,
                      pair_indices_from_uniforms, sample_communication,
                      sample_pair)

CHUNK = 2048
X0_KINDS = ("extremal-01", "extremal-half", "random-dyadic")
DEFAULT_CONSENSUS_THRESHOLD = 1e-9


@dataclass(frozen=True)
class TrialConfig:
    matrix: SelectionMatrix
    model: str
    sched_plus: Schedule
    sched_minus: Schedule
    x0: object
    horizon: int
    k0: int = 0
    consensus_threshold: float = DEFAULT_CONSENSUS_THRESHOLD
    arithmetic: str = "float"

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"unknown model {self.model!r}")
        if self.model == "dependent" and self.sched_plus != self.sched_minus:
            raise ModelMismatchError(
                "dependent communication uses one coin; both directions need the same schedule")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.k0 < 0:
            raise ValueError("k0 must be >= 0")
        if not self.consensus_threshold > 0:
            raise ValueError("consensus threshold must be > 0")
        if self.arithmetic not in ("float", "dyadic"):
            raise ValueError(f"unknown arithmetic mode {self.arithmetic!r}")
        if isinstance(self.x0, str):
            if self.x0 not in X0_KINDS:
                raise ValueError(f"unknown x0 kind {self.x0!r}")
        else:
            vals = np.asarray(self.x0, dtype=float)
            if vals.shape != (self.matrix.n,):
                raise ValueError(
                    f"x0 length {vals.shape} does not fit n={self.matrix.n}")


def resolve_x0(cfg: TrialConfig, streams: RandomStream):
    """Materialize the initial condition: float values plus, in dyadic mode,
    the exact vector (float64 values embed exactly)."""
    n = cfg.matrix.n
    if isinstance(cfg.x0, str):
        if cfg.x0 == "extremal-01":
            floats = np.zeros(n)
            floats[0] = 1.0
        elif cfg.x0 == "extremal-half":
            floats = np.zeros(n)
            floats[n // 2:] = 1.0
        else:  # random-dyadic: uniform 53-bit dyadic rationals in [0, 1)
            nums = streams.x0.integers(0, 1 << 53, size=n, dtype=np.int64)
            floats = nums.astype(float) / float(1 << 53)
            if cfg.arithmetic == "dyadic":
                return floats, DyadicVector._reduced([int(v) for v in nums], 53)
    else:
        floats = np.asarray(cfg.x0, dtype=float).copy()
    exact = DyadicVector.from_floats(floats) if cfg.arithmetic == "dyadic" else None
    return floats, exact


@dataclass
class TrialResult:
    final_state: np.ndarray
    consensus_step: Optional[int]
    sum_history_exact: Optional[bool]
    spread_trace: list
    limit_estimate: Optional[float]
    asym_on_unequal: bool
    events: int
    crossing_steps: Optional[dict] = None
    final_exact: Optional[DyadicVector] = None
    audit: Optional[list] = None


def step(state, sel: SelectionMatrix, model: str, p_plus: float, p_minus: float,
         streams: RandomStream):
    """One meeting slot. Returns (new state, realized update matrix).

    The realized event law: node i averages onto the pair midpoint with
    probability a_ij p_plus / n + a_ji p_minus / n summed over partners j.
    """
    i, j = sample_pair(sel, streams.pair)
    e_plus, e_minus = sample_communication(model, p_plus, p_minus, streams.comm)
    n = sel.n
    if i < 0 or i == j or not (e_plus or e_minus):
        return (state if isinstance(state, DyadicVector) else state.copy(),
                identity_update(n))
    if e_plus and e_minus:
        update = symmetric_update(i, j, n)
    elif e_plus:
        update = asymmetric_update(i, j, n)
    else:
        update = asymmetric_update(j, i, n)
    if isinstance(state, DyadicVector):
        if update.kind == "symmetric":
            return state.averaged(i, j, both=True), update
        return state.averaged(update.i, update.j, both=False), update
    out = state.copy()
    mid = 0.5 * (out[i] + out[j])
    if update.kind == "symmetric":
        out[i] = mid
        out[j] = mid
    else:
        out[update.i] = mid
    return out, update


def _build_thresholds(h0, consensus_threshold, epsilons):
    """Merged descending absolute thresholds. The consensus entry is nudged up
    one ulp so the recorded slot satisfies spread <= threshold * H(k0); epsilon
    entries stay strict (the tracked event is spread/H(k0) >= epsilon)."""
    entries = [(math.nextafter(consensus_threshold * h0, math.inf), "cons")]
    for e in epsilons or ():
        if not 0.0 < e < 1.0:
            raise ValueError(f"epsilon must lie in (0, 1), got {e}")
        entries.append((e * h0, e))
    entries.sort(key=lambda t: -t[0])
    thr = np.array([v for v, _ in entries], dtype=float)
    tags = [tag for _, tag in entries]
    return thr, tags


def run_trial(cfg: TrialConfig, master_seed: int, trial_index: int = 0, *,
              epsilons=None, audit: bool = False, backend=None) -> TrialResult:
    kern = get_backend(backend) if not hasattr(backend, "run_events_float") else backend
    streams = RandomStream(master_seed, trial_index)
    x, exact = resolve_x0(cfg, streams)
    n = cfg.matrix.n
    k0 = cfg.k0
    hmax = float(x.max())
    hmin = float(x.min())
    init_max, init_min = hmax, hmin
    h0 = hmax - hmin
    dyadic = cfg.arithmetic == "dyadic"

    if h0 == 0.0:
        crossings = {float(e): 0 for e in epsilons} if epsilons else None
        return TrialResult(
            final_state=x, consensus_step=0,
            sum_history_exact=True if dyadic else None,
            spread_trace=[(k0, hmax, hmin, True if dyadic else None)],
            limit_estimate=float(x.mean()), asym_on_unequal=False, events=0,
            crossing_steps=crossings, final_exact=exact,
            audit=[] if audit else None)

    thr, tags = _build_thresholds(h0, cfg.consensus_threshold, epsilons)
    crossings = np.full(len(thr), -1, dtype=np.int64)
    thr_ptr = 0

    rel = {0, cfg.horizon}
    p = 1
    while p < cfg.horizon:
        rel.add(p)
        p <<= 1
    grid_ks = np.array(sorted(r + k0 for r in rel if r > 0), dtype=np.int64)
    grid_max = np.zeros(len(grid_ks))
    grid_min = np.zeros(len(grid_ks))
    grid_sum = np.full(len(grid_ks), -1, dtype=np.int8)
    grid_ptr = 0

    if dyadic:
        nums = list(exact.nums)
        exp = exp0 = exact.exp
        expected_scaled = sum(nums)
        xs = exact.to_floats()
    else:
        xs = x

    sum_ok = True
    asym_unequal = False
    events_seen = 0
    audit_log = [] if audit else None
    dep = cfg.model == "dependent"

    done = 0
    while done < cfg.horizon:
        m = min(CHUNK, cfg.horizon - done)
        k_base = k0 + done
        ks = np.arange(k_base, k_base + m, dtype=np.int64)
        u_pair = streams.pair.random(m)
        pu, pv = pair_indices_from_uniforms(cfg.matrix, u_pair)
        pp = cfg.sched_plus.values(ks)
        if dep:
            u = streams.comm.random(m)
            ep, em = communication_flags_from_uniforms("dependent", pp, pp, u)
        else:
            pm = cfg.sched_minus.values(ks)
            u = streams.comm.random((m, 2))
            ep, em = communication_flags_from_uniforms("independent", pp, pm, u)
        active = (pu >= 0) & (pu != pv) & (ep | em)
        evt = np.flatnonzero(active).astype(np.int64)
        events_seen += len(evt)
        if audit:
            for off in evt.tolist():
                i, j = int(pu[off]), int(pv[off])
                if ep[off] and em[off]:
                    audit_log.append(("symmetric", i, j, k_base + off + 1))
                elif ep[off]:
                    audit_log.append(("asymmetric", i, j, k_base + off + 1))
                else:
                    audit_log.append(("asymmetric", j, i, k_base + off + 1))
        ep8 = ep.view(np.uint8)
        em8 = em.view(np.uint8)
        if dyadic:
            (exp, expected_scaled, thr_ptr, grid_ptr, hmax, hmin, sum_ok,
             asym_unequal) = kern.run_events_dyadic(
                nums, exp, exp0, expected_scaled, xs, pu, pv, ep8, em8, evt,
                k_base, m, thr, crossings, thr_ptr,
                grid_ks, grid_max, grid_min, grid_sum, grid_ptr,
                hmax, hmin, sum_ok, asym_unequal, DYADIC_EXP_CAP)
        else:
            thr_ptr, grid_ptr, hmax, hmin, asym_unequal = kern.run_events_float(
                xs, pu, pv, ep8, em8, evt, k_base, m, thr, crossings, thr_ptr,
                grid_ks, grid_max, grid_min, grid_ptr, hmax, hmin, asym_unequal)
        done += m
        if not dyadic and thr_ptr == len(thr):
            break

    end_slot = k0 + done
    init_flag = True if dyadic else None
    trace = [(k0, init_max, init_min, init_flag)]
    for g in range(grid_ptr):
        flag = None
        if dyadic:
            flag = bool(grid_sum[g])
        trace.append((int(grid_ks[g]), float(grid_max[g]), float(grid_min[g]), flag))
    if trace[-1][0] != end_slot:
        trace.append((end_slot, float(hmax), float(hmin),
                      bool(sum_ok) if dyadic else None))

    tag_steps = {}
    for idx, tag in enumerate(tags):
        slot = int(crossings[idx])
        tag_steps[tag] = (slot - k0) if slot >= 0 else None
    consensus_step = tag_steps.pop("cons")
    eps_steps = {float(e): tag_steps.get(e) for e in (epsilons or ())} or None

    final_exact = DyadicVector._reduced(nums, exp) if dyadic else None
    limit = float(np.mean(xs)) if consensus_step is not None else None
    return TrialResult(
        final_state=np.array(xs, dtype=float),
        consensus_step=consensus_step,
        sum_history_exact=bool(sum_ok) if dyadic else None,
        spread_trace=trace,
        limit_estimate=limit,
        asym_on_unequal=bool(asym_unequal),
        events=events_seen,
        crossing_steps=eps_steps,
        final_exact=final_exact,
        audit=audit_log)


def _slim(result: TrialResult) -> TrialResult:
    # drop the heavyweight fields before results cross process boundaries
    result.final_exact = None
    result.audit = None
    return result


def _run_batch(payload):
    cfg, master_seed, indices, epsilons, backend_name = payload
    out = []
    for idx in indices:
        out.append((idx, _slim(run_trial(cfg, master_seed, idx,
                                         epsilons=epsilons, backend=backend_name))))
    return out


def run_trials(cfg: TrialConfig, trials: int, master_seed: int, *,
               epsilons=None, workers=None, backend=None) -> list:
    """Run seeded trials 0..trials-1 and return their results in index order.

    Results are a pure function of (cfg, master_seed, trial index), so the
    worker count changes wall time only.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    workers = workers or 1
    if workers <= 1:
        return [_slim(run_trial(cfg, master_seed, i, epsilons=epsilons,
                                backend=backend))
                for i in range(trials)]
    batch = max(1, -(-trials // (workers * 8)))
    payloads = [(cfg, master_seed, list(range(lo, min(lo + batch, trials))),
                 epsilons, backend)
                for lo in range(0, trials, batch)]
    gathered: dict[int, TrialResult] = {}
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for chunk in pool.map(_run_batch, payloads):
            for idx, res in chunk:
                gathered[idx] = res
    return [gathered[i] for i in range(trials)]


def _binomial_ci(count: int, total: int) -> tuple[float, float]:
    p = count / total
    half = 1.96 * math.sqrt(max(p * (1 - p), 0.0) / total)
    return (max(0.0, p - half), min(1.0, p + half))


@dataclass
class EnsembleStats:
    trials: int
    consensus_count: int
    consensus_fraction: float
    consensus_ci: tuple
    mean_limit: Optional[float]
    mean_limit_se: Optional[float]
    limit_trials: int
    preservation_count: Optional[int]
    preservation_fraction: Optional[float]
    preservation_ci: Optional[tuple]
    sum_change_violations: Optional[int]
    tcom_empirical: Optional[int]
    epsilon: Optional[float]
    events_total: int

    def to_json(self) -> dict:
        return {
            "trials": self.trials,
            "consensus_count": self.consensus_count,
            "consensus_fraction": self.consensus_fraction,
            "consensus_ci": list(self.consensus_ci),
            "mean_limit": self.mean_limit,
            "mean_limit_se": self.mean_limit_se,
            "limit_trials": self.limit_trials,
            "preservation_count": self.preservation_count,
            "preservation_fraction": self.preservation_fraction,
            "preservation_ci": (list(self.preservation_ci)
                                if self.preservation_ci is not None else None),
            "sum_change_violations": self.sum_change_violations,
            "tcom_empirical": self.tcom_empirical,
            "epsilon": self.epsilon,
            "events_total": self.events_total,
        }


def aggregate(results: list, epsilon: Optional[float] = None) -> EnsembleStats:
    trials = len(results)
    consensus = [r for r in results if r.consensus_step is not None]
    limits = np.array([r.limit_estimate for r in consensus], dtype=float)
    mean_limit = float(limits.mean()) if len(limits) else None
    se = (float(limits.std(ddof=1) / math.sqrt(len(limits)))
          if len(limits) > 1 else None)

    dyadic = results[0].sum_history_exact is not None
    preserved = viol = None
    pres_frac = pres_ci = None
    if dyadic:
        preserved = sum(1 for r in results if r.sum_history_exact)
        viol = sum(1 for r in results
                   if r.asym_on_unequal and r.sum_history_exact)
        pres_frac = preserved / trials
        pres_ci = _binomial_ci(preserved, trials)

    tcom = None
    if epsilon is not None:
        try:
            tcom = tcom_from_results(results, epsilon)
        except HorizonExceededError:
            tcom = None

    return EnsembleStats(
        trials=trials,
        consensus_count=len(consensus),
        consensus_fraction=len(consensus) / trials,
        consensus_ci=_binomial_ci(len(consensus), trials),
        mean_limit=mean_limit,
        mean_limit_se=se,
        limit_trials=len(consensus),
        preservation_count=preserved,
        preservation_fraction=pres_frac,
        preservation_ci=pres_ci,
        sum_change_violations=viol,
        tcom_empirical=tcom,
        epsilon=epsilon,
        events_total=sum(r.events for r in results),
    )


def run_ensemble(cfg: TrialConfig, trials: int, master_seed: int, *,
                 epsilons=None, workers=None, backend=None) -> EnsembleStats:
    eps_list = list(epsilons) if epsilons else None
    results = run_trials(cfg, trials, master_seed, epsilons=eps_list,
                         workers=workers, backend=backend)
    single = eps_list[0] if eps_list and len(eps_list) == 1 else None
    return aggregate(results, epsilon=single)


def tcom_from_results(results: list, epsilon: float) -> int:
    """Empirical epsilon-computation time from per-trial crossing steps.

    The slot where the fraction of trials still at spread ratio >= epsilon
    drops to <= epsilon is the ceil((1-eps)*T)-th order statistic of the
    per-trial crossing times (the spread is monotone, so fractions are too).
    """
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0, 1)")
    trials = len(results)
    times = sorted(r.crossing_steps[epsilon] for r in results
                   if r.crossing_steps and r.crossing_steps.get(epsilon) is not None)
    need = math.ceil((1.0 - epsilon) * trials)
    if len(times) < need:
        raise HorizonExceededError(
            f"epsilon={epsilon}: only {len(times)}/{trials} trials crossed within "
            f"the horizon (need {need})",
            achieved_fraction=1.0 - len(times) / trials)
    if need == 0:
        return 0
    return int(times[need - 1])


def estimate_tcom(cfg: TrialConfig, epsilon: float, trials: int,
                  master_seed: int, *, workers=None, backend=None) -> int:
    """Smallest elapsed slot count after which at most an epsilon fraction of
    trials still has spread ratio >= epsilon, on a shared seeded ensemble."""
    floats, _ = resolve_x0(cfg, RandomStream(master_seed, 0))
    if float(floats.max() - floats.min()) <= 0:
        raise ValueError("estimate_tcom needs an initial condition with positive spread")
    results = run_trials(cfg, trials, master_seed, epsilons=[epsilon],
                         workers=workers, backend=backend)
    return tcom_from_results(results, epsilon)


def estimate_tcom_table(cfg: TrialConfig, epsilons, trials: int, master_seed: int,
                        *, workers=None, backend=None) -> dict:
    """One shared ensemble, one row per epsilon: empirical value or the
    achieved fraction when the horizon ran out."""
    eps_list = sorted(set(float(e) for e in epsilons), reverse=True)
    results = run_trials(cfg, trials, master_seed, epsilons=eps_list,
                         workers=workers, backend=backend)
    table = {}
    for e in eps_list:
        try:
            table[e] = {"tcom": tcom_from_results(results, e), "achieved_fraction": None}
        except HorizonExceededError as exc:
            table[e] = {"tcom": None, "achieved_fraction": exc.achieved_fraction}
    return table


TCOM_PROBES = ("extremal-01", "extremal-half")


def _check_window_constants(p_star: float, t_star: int):
    if not (isinstance(t_star, (int, np.integer)) and t_star >= 1):
        raise ValueError("t_star must be an integer >= 1")
    if not 0.0 < p_star <= t_star:
        raise ValueError("p_star must lie in (0, t_star]")


def tcom_bound_dependent(sc: StructuralConstants, p_star: float, t_star: int,
                         n: int, epsilon: float) -> float:
    """Single-coin closed-form bound, slope term only:
    3 / log(1 / (1 - lambda2* p* / (2 n T*))) * log(1/eps)."""
    _check_window_constants(p_star, t_star)
    if not 0.0 < epsilon <= 1.0:
        raise ValueError("epsilon must lie in (0, 1]")
    x = sc.lambda2_star * p_star / (2.0 * n * t_star)
    if x >= 1.0:
        raise ValueError(f"invalid constants: lambda2* p*/(2nT*) = {x} >= 1")
    slope = 3.0 / (-math.log1p(-x))
    return slope * math.log(1.0 / epsilon)


def tcom_bound_dependent_offset(sc: StructuralConstants, p_star: float,
                                t_star: int, n: int) -> float:
    """The explicit additive constant that accompanies the dependent bound:
    T* log(2(n-1) / (c* n)) / log(1/c*) with c* = (1 - lambda2* p*/(2nT*))^T*."""
    _check_window_constants(p_star, t_star)
    x = sc.lambda2_star * p_star / (2.0 * n * t_star)
    if x >= 1.0:
        raise ValueError(f"invalid constants: lambda2* p*/(2nT*) = {x} >= 1")
    c_star = (1.0 - x) ** t_star
    return t_star * math.log(2.0 * (n - 1) / (c_star * n)) / math.log(1.0 / c_star)


def tcom_bound_independent(sc: StructuralConstants, p_star: float, t_star: int,
                           n: int, epsilon: float) -> float:
    """Two-coin closed-form bound:
    (4 T* theta0 / p*) / log(1 / (1 - (a*/4n)^theta0)) * log(1/eps)."""
    _check_window_constants(p_star, t_star)
    if not 0.0 < epsilon <= 1.0:
        raise ValueError("epsilon must lie in (0, 1]")
    x = (sc.a_star / (4.0 * n)) ** sc.theta0
    denom = -math.log1p(-x)
    return (4.0 * t_star * sc.theta0 / p_star) / denom * math.log(1.0 / epsilon)


def apply_updates(x: DyadicVector, chain) -> DyadicVector:
    """Replay a realized update chain exactly. Chain entries are
    (kind, i, j) triples in time order; asymmetric means node i receives."""
    for entry in chain:
        kind, i, j = entry[0], entry[1], entry[2]
        if kind == "identity":
            continue
        x = x.averaged(i, j, both=(kind == "symmetric"))
    return x
