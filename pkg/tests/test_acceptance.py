"""Acceptance suite.

Each criterion prints one pass/fail line. Stated runtime budgets are asserted
when the compiled kernel is active (the pure-Python fallback is a degraded
mode and only reports its timing). Criteria 3-9 run twice, once per worker
count, and the final criterion asserts the runs were byte-identical.
"""

import json
import math
import time

import numpy as np

from gossiplab import engine
from gossiplab._kernels import backend_name
from gossiplab.engine import (TrialConfig, run_trials, tcom_bound_dependent,
                              tcom_bound_independent, tcom_from_results)
from gossiplab.graphs import SelectionMatrix, digraph, structural_constants
from gossiplab.matrices import (asymmetric_update, expected_update_dependent,
                                expected_update_independent, symmetric_update)
from gossiplab.process import (PURPOSE_COMM, PURPOSE_PAIR,
                               communication_flags_from_uniforms,
                               derive_generator, pair_indices_from_uniforms,
                               Schedule)
from gossiplab.verify import (chain_contraction_check, chain_floor_union_check,
                              enumerate_products, pick_stall_pair,
                              prop1_counterexample, scrambling_block_check,
                              stall_probability_bound)

K3 = SelectionMatrix.complete_uniform(3)
RING3 = SelectionMatrix.directed_cycle(3)
COMPILED = backend_name() == "compiled"

DETERMINISM = {}


def report(cid, name, ok, detail=""):
    print(f"[acceptance] {cid} {name}: {'PASS' if ok else 'FAIL'} {detail}")
    assert ok, f"{cid} {name}: {detail}"


def check_budget(cid, name, elapsed, budget):
    note = f"({elapsed:.1f}s of {budget:.0f}s budget, kernel={backend_name()})"
    if COMPILED:
        report(cid, f"{name} runtime", elapsed < budget, note)
    else:
        print(f"[acceptance] {cid} {name} runtime: SKIPPED on fallback kernel {note}")


def dual_run(cid, cfg, trials, seed, epsilons=None, summarize=None):
    """Run the same seeded experiment under two worker counts; log whether the
    canonical JSON matched; hand back the single-worker results."""
    if summarize is None:
        summarize = lambda rs: engine.aggregate(rs).to_json()
    r1 = run_trials(cfg, trials, seed, epsilons=epsilons, workers=1)
    r2 = run_trials(cfg, trials, seed, epsilons=epsilons, workers=2)
    j1 = json.dumps(summarize(r1), sort_keys=True)
    j2 = json.dumps(summarize(r2), sort_keys=True)
    DETERMINISM[cid] = (j1 == j2)
    return r1


def test_c01_structural_constants():
    t0 = time.monotonic()
    sc = structural_constants(K3)
    elapsed = time.monotonic() - t0
    ok = (abs(sc.lambda2_star - 3.0) <= 1e-9 and sc.theta0 == 11
          and sc.a_star == 0.5
          and all(abs(v - 2 / 3) <= 1e-12 for v in sc.h))
    report("C1", "structural constants", ok,
           f"lambda2*={sc.lambda2_star} theta0={sc.theta0} a*={sc.a_star}")
    check_budget("C1", "structural constants", elapsed, 1.0)


def test_c02_expected_update_oracle_match():
    t0 = time.monotonic()
    draws = 100_000
    n = 3

    def empirical_mean(model, p_plus, p_minus, seed):
        pair_gen = derive_generator(seed, 0, PURPOSE_PAIR)
        comm_gen = derive_generator(seed, 0, PURPOSE_COMM)
        first, second = pair_indices_from_uniforms(K3, pair_gen.random(draws))
        if model == "dependent":
            u = comm_gen.random(draws)
            ep, em = communication_flags_from_uniforms(model, p_plus, p_minus, u)
        else:
            u = comm_gen.random((draws, 2))
            ep, em = communication_flags_from_uniforms(model, p_plus, p_minus, u)
        live = (first >= 0) & (first != second)
        mean = np.zeros((n, n))
        idle = draws
        for i in range(n):
            for j in range(n):
                if i == j:
                    continue
                here = live & (first == i) & (second == j)
                n_both = int((here & ep & em).sum())
                n_fwd = int((here & ep & ~em).sum())
                n_bwd = int((here & ~ep & em).sum())
                if i > j and n_both:
                    mean += n_both * symmetric_update(i, j, n).expand().to_floats()
                elif i < j and n_both:
                    mean += n_both * symmetric_update(j, i, n).expand().to_floats()
                if n_fwd:
                    mean += n_fwd * asymmetric_update(i, j, n).expand().to_floats()
                if n_bwd:
                    mean += n_bwd * asymmetric_update(j, i, n).expand().to_floats()
                idle -= n_both + n_fwd + n_bwd
        mean += idle * np.eye(n)
        return mean / draws

    dep_err = np.abs(empirical_mean("dependent", 0.7, 0.7, 21)
                     - expected_update_dependent(K3, 0.7).to_floats()).max()
    ind_err = np.abs(empirical_mean("independent", 0.6, 0.3, 22)
                     - expected_update_independent(K3, 0.6, 0.3).to_floats()).max()
    elapsed = time.monotonic() - t0
    report("C2", "expected update vs sampled mean",
           dep_err <= 5e-3 and ind_err <= 5e-3,
           f"dep err={dep_err:.2e} ind err={ind_err:.2e} (tol 5e-3)")
    check_budget("C2", "expected update", elapsed, 10.0)


def test_c03_consensus_threshold_dependent():
    t0 = time.monotonic()
    suff = TrialConfig(matrix=K3, model="dependent",
                       sched_plus=Schedule.constant(0.5),
                       sched_minus=Schedule.constant(0.5),
                       x0="extremal-01", horizon=10_000)
    results = dual_run("C3a", suff, 10_000, 1234)
    frac = engine.aggregate(results).consensus_fraction
    report("C3", "divergent-sum sufficiency", frac >= 0.999,
           f"consensus fraction {frac:.4f} >= 0.999")

    summable = Schedule.power(1, 2)
    nec = TrialConfig(matrix=K3, model="dependent", sched_plus=summable,
                      sched_minus=summable, x0=[0.0, 1.0, 0.5], horizon=10_000)
    resn = dual_run("C3b", nec, 2000, 1234)
    non_consensus = 1.0 - engine.aggregate(resn).consensus_fraction
    floor = stall_probability_bound(K3, summable, summable, pick_stall_pair(K3),
                                    10_000, model="dependent").floor
    elapsed = time.monotonic() - t0
    report("C3", "summable-sum necessity", non_consensus >= 0.9 * floor,
           f"non-consensus {non_consensus:.4f} >= 0.9*{floor:.4f}")
    check_budget("C3", "consensus threshold", elapsed, 120.0)


def test_c04_tcom_slope_dependent():
    t0 = time.monotonic()
    eps = [2.0 ** -j for j in range(1, 13)]
    sc = structural_constants(K3)
    bound_slope = tcom_bound_dependent(sc, 0.5, 1, 3, math.exp(-1.0))
    per_probe = {}
    for tag, probe in (("C4a", "extremal-01"), ("C4b", "extremal-half")):
        cfg = TrialConfig(matrix=K3, model="dependent",
                          sched_plus=Schedule.constant(0.5),
                          sched_minus=Schedule.constant(0.5),
                          x0=probe, horizon=10_000)

        def table(rs):
            return {str(e): tcom_from_results(rs, e) for e in eps}

        results = dual_run(tag, cfg, 10_000, 2024, epsilons=eps, summarize=table)
        per_probe[probe] = [tcom_from_results(results, e) for e in eps]
    sup = np.maximum(per_probe["extremal-01"], per_probe["extremal-half"])
    xs = np.array([math.log(1 / e) for e in eps])
    slope, intercept = np.polyfit(xs, sup, 1)
    pred = slope * xs + intercept
    r2 = 1 - ((sup - pred) ** 2).sum() / ((sup - sup.mean()) ** 2).sum()
    elapsed = time.monotonic() - t0
    report("C4", "epsilon-computation slope",
           slope <= bound_slope and r2 >= 0.99,
           f"fitted slope {slope:.2f} <= bound {bound_slope:.2f}, R^2={r2:.4f}")
    check_budget("C4", "epsilon-computation slope", elapsed, 300.0)


def test_c05_exact_sum_preservation_dependent():
    cfg = TrialConfig(matrix=K3, model="dependent",
                      sched_plus=Schedule.constant(0.5),
                      sched_minus=Schedule.constant(0.5),
                      x0="random-dyadic", horizon=10_000, arithmetic="dyadic")
    t0 = time.monotonic()
    r1 = run_trials(cfg, 10_000, 555, workers=1)
    elapsed = time.monotonic() - t0
    stats1 = engine.aggregate(r1)
    r2 = run_trials(cfg, 10_000, 555, workers=2)
    DETERMINISM["C5"] = (json.dumps(stats1.to_json(), sort_keys=True)
                         == json.dumps(engine.aggregate(r2).to_json(), sort_keys=True))
    report("C5", "one-coin model preserves the sum bit-exactly",
           stats1.preservation_count == 10_000,
           f"{stats1.preservation_count}/10000 trials exact")
    check_budget("C5", "exact sum preservation", elapsed, 120.0)


def test_c06_consensus_threshold_independent():
    t0 = time.monotonic()
    suff = TrialConfig(matrix=RING3, model="independent",
                       sched_plus=Schedule.constant(0.3),
                       sched_minus=Schedule.constant(0.3),
                       x0=[0.0, 1.0, 0.5], horizon=100_000)
    res = dual_run("C6a", suff, 2000, 60)
    frac = engine.aggregate(res).consensus_fraction
    report("C6", "two-coin sufficiency on the directed ring", frac >= 0.999,
           f"consensus fraction {frac:.4f}")

    summable = Schedule.power(1, 2)
    nec = TrialConfig(matrix=RING3, model="independent", sched_plus=summable,
                      sched_minus=summable, x0=[0.0, 1.0, 0.5], horizon=100_000)
    resn = dual_run("C6b", nec, 2000, 61)
    non_consensus = 1.0 - engine.aggregate(resn).consensus_fraction
    floor = stall_probability_bound(RING3, summable, summable,
                                    pick_stall_pair(RING3), 100_000,
                                    model="independent").floor
    se = math.sqrt(max(non_consensus * (1 - non_consensus), 1e-12) / 2000)
    elapsed = time.monotonic() - t0
    report("C6", "two-coin necessity stall floor",
           non_consensus >= floor - 3 * se,
           f"non-consensus {non_consensus:.4f} >= {floor:.4f} - 3*{se:.4f}")
    check_budget("C6", "two-coin threshold", elapsed, 600.0)


def test_c07_tcom_bound_independent_one_sided():
    t0 = time.monotonic()
    eps = [2.0 ** -j for j in range(1, 13)]
    cfg = TrialConfig(matrix=K3, model="independent",
                      sched_plus=Schedule.constant(0.5),
                      sched_minus=Schedule.constant(0.5),
                      x0="extremal-01", horizon=10_000)

    def table(rs):
        return {str(e): tcom_from_results(rs, e) for e in eps}

    results = dual_run("C7", cfg, 10_000, 70, epsilons=eps, summarize=table)
    sc = structural_constants(K3)
    # window mass of P+ + P- is 1 per slot: p*=1, T*=1
    worst = 0.0
    for e in eps:
        emp = tcom_from_results(results, e)
        bound = tcom_bound_independent(sc, 1.0, 1, 3, e)
        worst = max(worst, emp / bound)
    elapsed = time.monotonic() - t0
    report("C7", "two-coin closed-form bound holds one-sided", worst <= 1.0,
           f"max empirical/bound = {worst:.2e}")
    check_budget("C7", "two-coin bound", elapsed, 600.0)


def test_c08_limit_mean_matches_initial_average():
    t0 = time.monotonic()
    cfg = TrialConfig(matrix=K3, model="independent",
                      sched_plus=Schedule.constant(0.5),
                      sched_minus=Schedule.constant(0.5),
                      x0=[0.0, 1.0, 0.5], horizon=10_000)
    results = dual_run("C8", cfg, 10_000, 80)
    stats = engine.aggregate(results)
    dev = abs(stats.mean_limit - 0.5)
    elapsed = time.monotonic() - t0
    report("C8", "mean consensus limit equals the initial average",
           stats.limit_trials == 10_000 and dev <= 3 * stats.mean_limit_se,
           f"|{stats.mean_limit:.5f} - 0.5| <= 3*{stats.mean_limit_se:.5f}")
    check_budget("C8", "limit mean", elapsed, 600.0)


def test_c09_two_coin_model_almost_never_preserves_the_sum():
    t0 = time.monotonic()
    # direction probabilities stay a fixed distance (0.25) below one
    cfg = TrialConfig(matrix=K3, model="independent",
                      sched_plus=Schedule.constant(0.5),
                      sched_minus=Schedule.constant(0.5),
                      x0="random-dyadic", horizon=1000, arithmetic="dyadic")
    results = dual_run("C9", cfg, 10_000, 90)
    stats = engine.aggregate(results)
    ok_fraction = stats.preservation_fraction <= 1e-3
    # deterministic per-trial check: a one-sided average on unequal exact
    # values must break the sum, with no exception
    implied = all((not r.asym_on_unequal) or (not r.sum_history_exact)
                  for r in results)
    flagged = sum(1 for r in results if r.asym_on_unequal)
    elapsed = time.monotonic() - t0
    report("C9", "two-coin model almost never preserves the sum",
           ok_fraction and implied and stats.sum_change_violations == 0,
           f"preserved fraction={stats.preservation_fraction} "
           f"flagged={flagged}/10000 violations={stats.sum_change_violations}")
    check_budget("C9", "sum non-preservation", elapsed, 600.0)


def test_c10_exhaustive_enumeration_finite_consensus():
    t0 = time.monotonic()
    r3 = enumerate_products(3, 10, "symmetric")
    r5 = enumerate_products(5, 6, "symmetric")
    r4 = enumerate_products(4, 6, "symmetric")
    elapsed = time.monotonic() - t0
    odd_clean = not r3.violations and not r5.violations
    witness = any(v["type"] == "finite_consensus" for v in r4.violations)
    report("C10", "finite-consensus impossible at odd sizes, witnessed at n=4",
           odd_clean and witness,
           f"n3[{r3.distinct_products} products] n5[{r5.distinct_products}] "
           f"n4 witnesses={len(r4.violations)}")
    check_budget("C10", "enumeration", elapsed, 120.0)


def test_c11_product_law_property_suites():
    t0 = time.monotonic()
    rng = derive_generator(110, 0, 3)
    contraction = chain_contraction_check(4, 1000, rng)
    rng = derive_generator(110, 1, 3)
    floor_union = chain_floor_union_check(4, 1000, rng)
    rng = derive_generator(110, 2, 3)
    scram = scrambling_block_check(RING3, 1000, rng)
    elapsed = time.monotonic() - t0
    report("C11", "contraction / entry floor / graph union / covering blocks",
           contraction.violations == 0 and floor_union.violations == 0
           and scram.nonscrambling == 0 and scram.floor_violations == 0,
           f"contraction 0/{contraction.chains}, floor+union 0/{floor_union.chains}, "
           f"scrambling 0/{scram.chains} at {scram.block_count} blocks "
           f"({elapsed:.1f}s)")


def test_c12_counterexample_config_never_mixes():
    t0 = time.monotonic()
    star = digraph(3, [(0, 1), (0, 2)])
    cx = prop1_counterexample(star, horizon=100_000)
    results = run_trials(cx.config, 1000, 120, workers=1)
    frac = engine.aggregate(results).consensus_fraction
    frozen = all(r.final_state[1] == 0.0 and r.final_state[2] == 1.0
                 for r in results)
    elapsed = time.monotonic() - t0
    report("C12", "silenced-direction counterexample stays split",
           frac == 0.0 and frozen,
           f"consensus fraction {frac}, split groups exactly invariant "
           f"({elapsed:.1f}s)")


def test_c13_worker_count_determinism():
    if not DETERMINISM:
        # criteria 3-9 did not run in this session; do one representative pair
        cfg = TrialConfig(matrix=K3, model="dependent",
                          sched_plus=Schedule.constant(0.5),
                          sched_minus=Schedule.constant(0.5),
                          x0="extremal-01", horizon=2000)
        dual_run("C13-solo", cfg, 500, 13)
    bad = [cid for cid, same in DETERMINISM.items() if not same]
    report("C13", "identical outputs across worker counts", not bad,
           f"compared {sorted(DETERMINISM)}; mismatches: {bad or 'none'}")
