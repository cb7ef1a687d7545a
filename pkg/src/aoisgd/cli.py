"""Command-line entry point.

Commands: run, replicate, verify, analyze-aoi, bounds, reference-unconstrained.
The scenario is parsed and validated before any output is written.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__, aoi, checks, io
from .engine import replicate, run
from .errors import ConfigError, StabilityViolation
from .scenario import SCHEMA_VERSION, Scenario, load_scenario

log = logging.getLogger("aoisgd")

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="aoisgd", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", required=True,
                        help="scenario file, or the name of a shipped scenario")
    common.add_argument("--out", type=Path, default=None, help="output directory")
    common.add_argument("--seed", type=_u64, default=None, help="override the scenario seed")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("-v", "--verbose", action="count", default=0,
                        help="-v adds optimizer/channel traces, -vv adds the message log")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="simulate one run")
    r = sub.add_parser("replicate", parents=[common], help="independent replications")
    r.add_argument("-n", "--replications", type=int, default=8)
    sub.add_parser("verify", parents=[common], help="check the network and schedule assumptions")
    a = sub.add_parser("analyze-aoi", parents=[common], help="normalized AoI and sqrt(n) check")
    a.add_argument("--trace", type=Path, default=None,
                   help="existing run directory to analyse instead of simulating")
    a.add_argument("--window", type=int, default=None)
    b = sub.add_parser("bounds", parents=[common], help="tail bounds against simulated ages")
    b.add_argument("-n", "--replications", type=int, default=4)
    b.add_argument("--m-max", type=int, default=200)
    sub.add_parser("reference-unconstrained", parents=[common],
                   help="the scenario with the penalty switched off")
    return p


def _summary(sc: Scenario, command: str, extra: dict | None = None) -> dict:
    out = {"schema_version": SCHEMA_VERSION, "csv_schema_version": io.CSV_SCHEMA_VERSION,
           "command": command, "scenario": sc.name, "seed": sc.seed, "config": sc.config}
    if extra:
        out.update(extra)
    return out


def _final_stats(tr) -> dict:
    return {"slots": tr.slot_count, "final_objective": tr.objective[-1],
            "final_penalty": tr.penalty[-1], "final_max_target_error": tr.max_target_error[-1],
            "final_mean_aoi": float(tr.mean_aoi[-1]), "sup_norm": tr.sup_norm,
            "updates_per_agent": tr.nu[-1], "coalesced_fraction": tr.coalesced_fraction,
            "warnings": sorted(set(tr.warnings))}


def _out_dir(args, sc: Scenario) -> Path:
    return args.out if args.out is not None else Path("out") / f"{args.command}-{sc.name}"


def cmd_run(args, sc: Scenario) -> int:
    tr = run(sc, record_log=args.verbose >= 2 or sc.record_log)
    out = _out_dir(args, sc)
    io.write_run(out, tr, sc, args.format, args.verbose)
    io.write_json(out / "summary.json", _summary(sc, args.command, _final_stats(tr)))
    for w in sorted(set(tr.warnings)):
        log.warning(w)
    log.info("wrote %s", out)
    return EXIT_OK


def cmd_reference(args, sc: Scenario) -> int:
    if sc.config["problem"]["kind"] != "coverage":
        log.error("reference-unconstrained needs a coverage problem")
        return EXIT_CONFIG
    ref = sc.with_overrides(problem={"penalty": False})
    return cmd_run(args, ref)


def cmd_replicate(args, sc: Scenario) -> int:
    if args.replications < 1:
        log.error("need at least one replication")
        return EXIT_CONFIG
    traces, agg, seeds = replicate(sc, args.replications,
                                   record_log=args.verbose >= 2 or sc.record_log)
    out = _out_dir(args, sc)
    out.mkdir(parents=True, exist_ok=True)
    for r, (tr, s) in enumerate(zip(traces, seeds)):
        sub = out / f"rep_{r:03d}"
        io.write_run(sub, tr, sc.with_seed(s), args.format, args.verbose)
        io.write_json(sub / "summary.json", _summary(sc.with_seed(s), "run", _final_stats(tr)))
    header = ["slot"]
    for name in agg.columns:
        header += [f"{name}_mean", f"{name}_se"]
    N = sc.slot_count

    def rows():
        for k in range(N):
            row = [k + 1]
            for name in agg.columns:
                row += [agg.columns[name][k], agg.stderr[name][k]]
            yield row

    io.write_table(out / "aggregate.csv", header, rows(), args.format)
    io.write_json(out / "summary.json", _summary(sc, args.command, {
        "replications": args.replications, "replication_seeds": seeds,
        "seed_rule": "SeedSequence(seed).spawn(K)[r].generate_state(1, uint64)[0]",
        "final": {name: {"mean": agg.columns[name][-1], "se": agg.stderr[name][-1]}
                  for name in agg.columns}}))
    return EXIT_OK


def cmd_verify(args, sc: Scenario) -> int:
    report = checks.verify(sc)
    out = _out_dir(args, sc)
    out.mkdir(parents=True, exist_ok=True)
    io.write_json(out / "verify.json", _summary(sc, args.command, {
        "assumptions": {k: v.to_dict() for k, v in report.items()}}))
    io.write_table(out / "verify.csv", ("assumption", "status"),
                   ((k, v.status) for k, v in report.items()), args.format)
    width = max(len(k) for k in report)
    for k, v in report.items():
        print(f"{k:<{width}}  {v.status}")
    return EXIT_OK


class _SummaryAoi:
    """Adapter exposing per-slot mean and max ages read from metrics.csv."""

    def __init__(self, mean, mx):
        self._mean, self._max = np.asarray(mean), np.asarray(mx)

    def mean_offdiag(self):
        return self._mean

    def max_offdiag(self):
        return self._max


def cmd_analyze(args, sc: Scenario) -> int:
    if args.trace is not None:
        path = args.trace / "metrics.csv"
        if not path.exists():
            path = args.trace / "metrics.json"
        if not path.exists():
            log.error("no metrics table in %s", args.trace)
            return EXIT_CONFIG
        cols = io.read_table(path)
        series = _SummaryAoi(cols["mean_aoi"], cols["max_aoi"])
    else:
        series = run(sc).aoi
    N = len(series.mean_offdiag())
    if N < 1000:
        log.error("trace has %d slots; the sqrt(n) check needs at least 1000", N)
        return EXIT_CONFIG
    window = args.window or N // 4
    rep = aoi.sqrt_scaling_check(series, window)
    out = _out_dir(args, sc)
    out.mkdir(parents=True, exist_ok=True)
    mean = np.asarray(series.mean_offdiag(), dtype=float)
    mx = np.asarray(series.max_offdiag(), dtype=float)
    io.write_table(out / "aoi_normalized.csv",
                   ("slot", "mean_aoi", "max_aoi", "mean_over_sqrt", "max_over_sqrt"),
                   ((int(rep.slots[k]), mean[k], mx[k], rep.normalized_mean[k],
                     rep.normalized_curve[k]) for k in range(N)), args.format)
    half = N // 2
    io.write_json(out / "analysis.json", _summary(sc, args.command, {
        "window": window, "exceed_previous_window": rep.exceed_previous,
        "exceed_trailing_window": rep.exceed_count, "sqrt_check_passed": rep.passed,
        "normalized_mean_first_half": float(np.mean(rep.normalized_mean[:half])),
        "normalized_mean_second_half": float(np.mean(rep.normalized_mean[half:])),
        "normalized_max_sup": float(np.max(rep.normalized_curve))}))
    print(f"sqrt(n) exceedances: previous window {rep.exceed_previous}, "
          f"trailing window {rep.exceed_count} -> {'pass' if rep.passed else 'fail'}")
    return EXIT_OK


def cmd_bounds(args, sc: Scenario) -> int:
    if sc.slot_count < 1000:
        log.error("trace length %d is too short for tail estimates (need >= 1000 slots)",
                  sc.slot_count)
        return EXIT_CONFIG
    traces, _, seeds = replicate(sc, max(args.replications, 1), record_log=False)
    out = _out_dir(args, sc)
    out.mkdir(parents=True, exist_ok=True)
    summary: dict = {"replications": len(traces), "replication_seeds": seeds}
    analytic = sc.channel.mode == "probability" and sc.channel.bank.decay_mode == "constant"
    edge_results = {}
    if analytic:
        rows = []
        for e in sc.topology.union().edges:
            res = checks.edge_bound_check(sc, traces, e, args.m_max)
            edge_results[e] = res
            d = res.dominance
            for k in range(len(d.m)):
                rows.append((e[0], e[1], int(d.m[k]), d.empirical[k], d.se[k], d.bound[k],
                             int(d.samples[k]), bool(d.checked[k]),
                             bool(d.empirical[k] <= d.bound[k] + 3 * d.se[k])))
            summary.setdefault("edges", []).append({
                "edge": list(e), "p_tilde": res.p_tilde, "q": res.q, "q_fit": res.decay.q_fit,
                "dominance_passed": d.passed, "violations": d.violations})
        io.write_table(out / "edge_bounds.csv",
                       ("src", "dst", "m", "empirical", "se", "bound", "samples", "checked", "ok"),
                       rows, args.format)
    else:
        summary["edge_bound_note"] = ("analytic bound disabled: the channel is not in constant "
                                      "probability mode, so no stationary p_tilde exists")
        log.warning(summary["edge_bound_note"])
    crow, prow = [], []
    for path in checks.two_hop_paths(sc):
        if analytic:
            res = checks.path_check(sc, traces, path, args.m_max, edge_results)
            cont = res.containment
            for k in range(len(res.empirical.m)):
                prow.append((*path, int(res.empirical.m[k]), res.empirical.ccdf[k],
                             res.empirical.se[k], res.bound[k]))
            summary.setdefault("paths", []).append({
                "path": list(path), "containment_passed": cont.passed,
                "composed_moment": res.moment.composed,
                "factor_two_bound": res.moment.factor_two_bound,
                "factor_four_bound": res.moment.factor_four_bound,
                "moment_factor_two_passed": res.moment.passed,
                "moment_factor_four_passed": res.moment.passed_factor_four,
                "empirical_moments": res.empirical_moments})
        else:
            i, j, k2 = path
            viol = prem = 0
            for t in traces:
                e2 = t.aoi.edges.index((j, k2))
                c = aoi.containment_check(t.aoi.pair_aoi[:, i, j], t.aoi.link_aoi[:, e2],
                                          t.aoi.pair_aoi[:, i, k2], args.m_max)
                viol = viol + c.violations
                prem = prem + c.premises
            cont = aoi.ContainmentReport(np.arange(args.m_max + 1), viol, prem)
            summary.setdefault("paths", []).append({"path": list(path),
                                                    "containment_passed": cont.passed})
        for k in range(len(cont.m_values)):
            crow.append((*path, int(cont.m_values[k]), int(cont.premises[k]),
                         int(cont.violations[k])))
    io.write_table(out / "path_containment.csv", ("i", "j", "k", "m", "premises", "violations"),
                   crow, args.format)
    if prow:
        io.write_table(out / "path_bounds.csv", ("i", "j", "k", "m", "empirical", "se", "bound"),
                       prow, args.format)
    io.write_json(out / "bounds.json", _summary(sc, args.command, summary))
    for e in summary.get("edges", []):
        print(f"edge {tuple(e['edge'])}: p_tilde={e['p_tilde']:.4f} q={e['q']:.4f} "
              f"dominance {'pass' if e['dominance_passed'] else 'fail'}")
    paths = summary.get("paths", [])
    failed = [tuple(pth["path"]) for pth in paths if not pth["containment_passed"]]
    print(f"containment: {len(paths) - len(failed)}/{len(paths)} two-hop paths pass")
    for pth in failed:
        print(f"path {pth}: containment fail")
    return EXIT_OK


COMMANDS = {"run": cmd_run, "replicate": cmd_replicate, "verify": cmd_verify,
            "analyze-aoi": cmd_analyze, "bounds": cmd_bounds,
            "reference-unconstrained": cmd_reference}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING if args.verbose == 0 else logging.INFO
    logging.basicConfig(level=level, format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        sc = load_scenario(args.scenario, args.seed)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return COMMANDS[args.command](args, sc)
    except StabilityViolation as exc:
        print(f"stability violation: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
