"""Command-line front end.

Subcommands: analyze-graph, simulate, tcom, preserve-average, verify.
Configuration comes from a JSON file (--config); unknown keys are rejected.
Exit codes: 0 ok, 2 config error, 3 runtime error, 4 verification failure,
5 inconclusive (enumeration ceiling).
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import replace

from . import engine, verify
from ._kernels import backend_name
from .errors import ConfigError, EnumerationCeilingError
from .graphs import (SelectionMatrix, digraph, is_double_connected,
                     is_quasi_strongly_connected, is_weakly_connected,
                     converse, structural_constants)
from .process import PURPOSE_ORACLE, Schedule, classify, derive_generator

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3
EXIT_VERIFY_FAIL = 4
EXIT_INCONCLUSIVE = 5


def _line_of(text: str, key: str):
    pos = text.find(f'"{key}"')
    if pos < 0:
        return None
    return text.count("\n", 0, pos) + 1


class ConfigReader:
    """Schema checks with path- and line-anchored error messages."""

    def __init__(self, raw_text: str, data: dict):
        self.text = raw_text
        self.data = data

    def fail(self, path: str, key: str, message: str):
        line = _line_of(self.text, key)
        anchor = f" (line {line})" if line else ""
        raise ConfigError(f"{path}: {message}{anchor}")

    def section(self, obj: dict, path: str, required: dict, optional: dict):
        if not isinstance(obj, dict):
            raise ConfigError(f"{path}: expected an object")
        allowed = set(required) | set(optional)
        for key in obj:
            if key not in allowed:
                self.fail(path, key, f"unknown key {key!r}")
        out = {}
        for key, kind in required.items():
            if key not in obj:
                raise ConfigError(f"{path}: missing required key {key!r}")
            out[key] = self.check_type(obj[key], kind, f"{path}.{key}", key)
        for key, (kind, default) in optional.items():
            if key in obj:
                out[key] = self.check_type(obj[key], kind, f"{path}.{key}", key)
            else:
                out[key] = default
        return out

    def check_type(self, value, kind, path, key):
        if kind == "any":
            return value
        if kind is int and isinstance(value, bool):
            self.fail(path, key, "expected an integer, got a boolean")
        if kind is float and isinstance(value, (int, float)) and not isinstance(value, bool):
            return float(value)
        if not isinstance(value, kind):
            self.fail(path, key, f"expected {getattr(kind, '__name__', kind)}, "
                                 f"got {type(value).__name__}")
        return value


def load_config(path: str) -> "ConfigReader":
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}")
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return ConfigReader(text, data)


def build_matrix(reader: ConfigReader, spec) -> SelectionMatrix:
    sect = reader.section(spec, "matrix",
                          required={"kind": str},
                          optional={"rows": (list, None), "n": (int, None),
                                    "arcs": (list, None),
                                    "relaxed_rows": (bool, False)})
    kind = sect["kind"]
    if kind == "dense":
        if sect["rows"] is None:
            raise ConfigError("matrix: dense form needs 'rows'")
        return SelectionMatrix(sect["rows"], relaxed_rows=sect["relaxed_rows"])
    if kind == "arcs":
        if sect["n"] is None or sect["arcs"] is None:
            raise ConfigError("matrix: arcs form needs 'n' and 'arcs'")
        g = digraph(sect["n"], [tuple(a) for a in sect["arcs"]])
        return SelectionMatrix.from_digraph(g)
    if kind == "complete-uniform":
        if sect["n"] is None:
            raise ConfigError("matrix: complete-uniform needs 'n'")
        return SelectionMatrix.complete_uniform(sect["n"])
    if kind == "directed-cycle":
        if sect["n"] is None:
            raise ConfigError("matrix: directed-cycle needs 'n'")
        return SelectionMatrix.directed_cycle(sect["n"])
    reader.fail("matrix.kind", "kind", f"unknown matrix kind {kind!r}")


def build_schedule(reader: ConfigReader, spec, path: str) -> Schedule:
    sect = reader.section(spec, path,
                          required={"family": str},
                          optional={"c": (float, None), "gamma": (float, None),
                                    "values": (list, None), "tail": (float, 0.0)})
    fam = sect["family"]
    try:
        if fam == "constant":
            return Schedule.constant(sect["c"])
        if fam == "power":
            return Schedule.power(sect["c"], sect["gamma"])
        if fam == "periodic":
            return Schedule.periodic(sect["values"])
        if fam == "explicit":
            return Schedule.explicit(sect["values"] or [], sect["tail"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}")
    reader.fail(path, "family", f"unknown schedule family {fam!r}")


def build_x0(reader: ConfigReader, spec, path: str):
    sect = reader.section(spec, path,
                          required={"kind": str},
                          optional={"values": (list, None),
                                    "variant": (str, "single")})
    kind = sect["kind"]
    if kind == "explicit":
        if sect["values"] is None:
            raise ConfigError(f"{path}: explicit x0 needs 'values'")
        return [float(v) for v in sect["values"]]
    if kind == "extremal-01":
        return "extremal-01" if sect["variant"] == "single" else "extremal-half"
    if kind == "random-dyadic":
        return "random-dyadic"
    reader.fail(path, "kind", f"unknown x0 kind {kind!r}")


TOP_KEYS_OPTIONAL = {
    "model": (str, "dependent"),
    "schedules": (dict, None),
    "x0": (dict, None),
    "horizon": (int, 10_000),
    "k0": (int, 0),
    "trials": (int, 1000),
    "epsilon": (list, None),
    "consensus_threshold": (float, engine.DEFAULT_CONSENSUS_THRESHOLD),
    "arithmetic": (str, "float"),
    "master_seed": (int, 0),
    "workers": (int, None),
    "trace_trials": (int, 4),
    "p_star": (float, None),
    "t_star": (int, None),
    "verify": (dict, None),
}


def parse_config(path: str):
    reader = load_config(path)
    top = reader.section(reader.data, "config",
                         required={"matrix": dict}, optional=TOP_KEYS_OPTIONAL)
    return reader, top


def build_trial_config(reader: ConfigReader, top) -> engine.TrialConfig:
    matrix = build_matrix(reader, top["matrix"])
    scheds = top["schedules"] or {"plus": {"family": "constant", "c": 1.0},
                                  "minus": {"family": "constant", "c": 1.0}}
    sect = reader.section(scheds, "schedules",
                          required={"plus": dict, "minus": dict}, optional={})
    sched_plus = build_schedule(reader, sect["plus"], "schedules.plus")
    sched_minus = build_schedule(reader, sect["minus"], "schedules.minus")
    x0 = build_x0(reader, top["x0"], "x0") if top["x0"] else "extremal-01"
    try:
        return engine.TrialConfig(
            matrix=matrix, model=top["model"], sched_plus=sched_plus,
            sched_minus=sched_minus, x0=x0, horizon=top["horizon"],
            k0=top["k0"], consensus_threshold=top["consensus_threshold"],
            arithmetic=top["arithmetic"])
    except ValueError as exc:
        raise ConfigError(str(exc))


def resolve_workers(args_workers, top):
    if args_workers is not None:
        return args_workers
    if top.get("workers") is not None:
        return top["workers"]
    env = os.environ.get("GOSSIPLAB_WORKERS")
    if env:
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"GOSSIPLAB_WORKERS must be an integer, got {env!r}")
    return 1


def dump_json(obj, out_dir, name):
    text = json.dumps(obj, indent=2, sort_keys=True)
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, name), "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def write_traces(results, out_dir, count):
    os.makedirs(out_dir, exist_ok=True)
    for idx, res in enumerate(results[:count]):
        path = os.path.join(out_dir, f"trial_{idx:05d}.csv")
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)  # RFC 4180: CRLF line endings, '.' decimals
            w.writerow(["k", "H", "h", "spread", "sum_exact"])
            for (k, hi, lo, flag) in res.spread_trace:
                w.writerow([k, repr(hi), repr(lo), repr(hi - lo),
                            "" if flag is None else int(flag)])


def cmd_analyze_graph(args) -> int:
    reader, top = parse_config(args.config)
    sel = build_matrix(reader, top["matrix"])
    g = sel.induced()
    weakly = is_weakly_connected(g)
    qsc_fwd = is_quasi_strongly_connected(g)
    qsc_rev = is_quasi_strongly_connected(converse(g))
    report = {
        "n": sel.n,
        "arcs": sorted(list(a) for a in g.arcs),
        "weakly_connected": weakly,
        "quasi_strongly_connected": qsc_fwd,
        "converse_quasi_strongly_connected": qsc_rev,
        "double_connected": qsc_fwd and qsc_rev,
        "matrix": sel.a.tolist(),
    }
    if not (qsc_fwd and qsc_rev):
        report["failing_direction"] = "forward" if not qsc_fwd else "converse"
    if weakly:
        sc = structural_constants(sel)
        report.update({
            "lambda2_star": sc.lambda2_star,
            "d_star": sc.d_star,
            "e_star": sc.e_star,
            "a_star": sc.a_star,
            "theta0": sc.theta0,
            "h": list(sc.h),
        })
    dump_json(report, args.out, "analyze.json")
    return EXIT_OK


def cmd_simulate(args) -> int:
    reader, top = parse_config(args.config)
    cfg = build_trial_config(reader, top)
    if top["trials"] < 1:
        raise ConfigError("trials must be >= 1")
    seed = args.seed if args.seed is not None else top["master_seed"]
    workers = resolve_workers(args.workers, top)
    if args.arithmetic:
        cfg = replace(cfg, arithmetic=args.arithmetic)
    results = engine.run_trials(cfg, top["trials"], seed, workers=workers)
    stats = engine.aggregate(results)
    payload = {"kernel": backend_name(), "master_seed": seed,
               "trials": top["trials"], "stats": stats.to_json()}
    dump_json(payload, args.out, "results.json")
    if args.out:
        write_traces(results, args.out, min(top["trace_trials"], len(results)))
    return EXIT_OK


def _window_witness(top, sched_plus, sched_minus):
    if top["p_star"] is not None and top["t_star"] is not None:
        return float(top["p_star"]), int(top["t_star"])
    for sched in (sched_plus, sched_minus):
        cls = classify(sched)
        if cls.linear_growth_witness:
            return cls.linear_growth_witness
    return None


def cmd_tcom(args) -> int:
    reader, top = parse_config(args.config)
    cfg = build_trial_config(reader, top)
    if not top["epsilon"]:
        raise ConfigError("tcom needs a nonempty 'epsilon' list")
    epsilons = [float(e) for e in top["epsilon"]]
    seed = args.seed if args.seed is not None else top["master_seed"]
    workers = resolve_workers(args.workers, top)
    witness = _window_witness(top, cfg.sched_plus, cfg.sched_minus)
    sc = structural_constants(cfg.matrix)

    rows = []
    for probe in engine.TCOM_PROBES:
        probe_cfg = replace(cfg, x0=probe)
        table = engine.estimate_tcom_table(probe_cfg, epsilons, top["trials"],
                                           seed, workers=workers)
        for eps in sorted(table, reverse=True):
            entry = table[eps]
            bound_dep = bound_ind = None
            if witness:
                p_star, t_star = witness
                if cfg.model == "dependent":
                    bound_dep = engine.tcom_bound_dependent(sc, p_star, t_star,
                                                            cfg.matrix.n, eps)
                bound_ind = engine.tcom_bound_independent(sc, p_star, t_star,
                                                          cfg.matrix.n, eps)
            applicable = bound_dep if cfg.model == "dependent" else bound_ind
            exceeded = (entry["tcom"] is not None and applicable is not None
                        and entry["tcom"] > applicable)
            rows.append([probe, repr(eps),
                         "" if entry["tcom"] is None else entry["tcom"],
                         "" if entry["achieved_fraction"] is None
                         else repr(entry["achieved_fraction"]),
                         "" if bound_dep is None else repr(bound_dep),
                         "" if bound_ind is None else repr(bound_ind),
                         int(exceeded)])

    header = ["probe", "epsilon", "empirical", "achieved_fraction",
              "bound_dependent", "bound_independent", "exceeds_bound"]
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        path = os.path.join(args.out, "tcom.csv")
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            w.writerows(rows)
    else:
        w = csv.writer(sys.stdout)
        w.writerow(header)
        w.writerows(rows)
    return EXIT_OK


def cmd_preserve_average(args) -> int:
    reader, top = parse_config(args.config)
    cfg = build_trial_config(reader, top)
    cfg = replace(cfg, arithmetic="dyadic")
    seed = args.seed if args.seed is not None else top["master_seed"]
    workers = resolve_workers(args.workers, top)
    stats = engine.run_ensemble(cfg, top["trials"], seed, workers=workers)
    payload = {"kernel": backend_name(), "master_seed": seed,
               "model": cfg.model, "stats": stats.to_json()}
    dump_json(payload, args.out, "preserve_average.json")
    return EXIT_OK


VERIFY_DEFAULTS = {
    "enum_n": (list, None),
    "enum_depth": (int, 8),
    "family": (str, "symmetric"),
    "ceiling": (int, 10_000_000),
    "scrambling_trials": (int, 200),
    "chain_trials": (int, 200),
    "inject_fault": (bool, False),
}


def cmd_verify(args) -> int:
    reader, top = parse_config(args.config)
    sel = build_matrix(reader, top["matrix"])
    vconf = reader.section(top["verify"] or {}, "verify", required={},
                           optional=VERIFY_DEFAULTS)
    seed = args.seed if args.seed is not None else top["master_seed"]
    enum_ns = vconf["enum_n"] or [sel.n]
    summary = {"kernel": backend_name(), "suites": {}, "failures": []}

    rng = derive_generator(seed, 0, PURPOSE_ORACLE)
    try:
        for n in enum_ns:
            members = None
            if vconf["inject_fault"]:
                members = verify.family_members(n, "symmetric")
                _, bad = verify.family_members(n, "asymmetric")[0]
                members[0] = (members[0][0], bad)  # masquerade
            report = verify.enumerate_products(
                n, vconf["enum_depth"], vconf["family"],
                ceiling=vconf["ceiling"], members=members)
            summary["suites"][f"enumeration_n{n}"] = report.to_json()
            for v in report.violations:
                if v["type"] == "not_doubly_stochastic":
                    summary["failures"].append(
                        f"enumeration n={n}: product not doubly stochastic via {v['chain']}")
                elif n % 2 == 1 and vconf["family"] == "symmetric":
                    summary["failures"].append(
                        f"enumeration n={n}: finite-consensus chain {v['chain']}")
    except EnumerationCeilingError as exc:
        summary["suites"]["enumeration"] = {"inconclusive": str(exc)}
        dump_json(summary, args.out, "verify.json")
        return EXIT_INCONCLUSIVE

    contraction = verify.chain_contraction_check(sel.n, vconf["chain_trials"], rng)
    summary["suites"]["contraction"] = contraction.__dict__
    if contraction.violations:
        summary["failures"].append(f"contraction: {contraction.detail}")

    floor_union = verify.chain_floor_union_check(sel.n, vconf["chain_trials"], rng)
    summary["suites"]["floor_union"] = floor_union.__dict__
    if floor_union.violations:
        summary["failures"].append(f"floor/union: {floor_union.detail}")

    g = sel.induced()
    if is_double_connected(g):
        scram = verify.scrambling_block_check(sel, vconf["scrambling_trials"], rng)
        summary["suites"]["scrambling"] = {
            "chains": scram.chains, "block_count": scram.block_count,
            "nonscrambling": scram.nonscrambling,
            "floor_violations": scram.floor_violations,
            "lambda_max": scram.lambda_max,
        }
        if scram.nonscrambling or scram.floor_violations:
            summary["failures"].append("scrambling block check found violations")
    else:
        summary["suites"]["scrambling"] = {"skipped": "graph lacks double connectivity"}

    summary["pass"] = not summary["failures"]
    dump_json(summary, args.out, "verify.json")
    return EXIT_OK if summary["pass"] else EXIT_VERIFY_FAIL


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gossiplab",
        description="Randomized gossip averaging under unreliable links: "
                    "simulation, bounds, and exact verification oracles.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in (("analyze-graph", cmd_analyze_graph),
                     ("simulate", cmd_simulate),
                     ("tcom", cmd_tcom),
                     ("preserve-average", cmd_preserve_average),
                     ("verify", cmd_verify)):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON experiment config")
        p.add_argument("--seed", type=int, default=None,
                       help="master seed (overrides the config)")
        p.add_argument("--workers", type=int, default=None,
                       help="worker processes (falls back to GOSSIPLAB_WORKERS)")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--arithmetic", choices=["float", "dyadic"], default=None)
        p.set_defaults(fn=fn)
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except EnumerationCeilingError as exc:
        print(f"inconclusive: {exc}", file=sys.stderr)
        return EXIT_INCONCLUSIVE
    except Exception as exc:  # runtime failures get a distinct exit code
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
