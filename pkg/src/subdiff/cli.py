"""Command-line front end.

Reports are JSON on stdout (or ``--out``); a one-line summary goes to
stderr.  Exit status: 0 success, 1 domain failure (infeasible under
``--require-feasible``, non-convergence), 2 bad input.
"""

import argparse
import json
import re
import sys
import time

import numpy as np

from . import __version__
from .certify import DEFAULT_EPS, certify_model, certify_vertex, falsify_equivalence, theorem2_check
from .maximize import GUARANTEE, MonteCarlo, brute_force_opt, greedy_select
from .model import ModelError, dump_network, read_network
from .project import DEFAULT_MAX_ITER, DEFAULT_TOL, project_model
from .simulate import (
    ENGINES,
    TIE_RULES,
    estimate_spread,
    exact_multi_distribution,
    exact_spread,
    exact_distribution,
    multi_spread,
    simulate_batch,
    simulate_multi_batch,
    split_samples,
    substream,
    total_variation,
)

TYPE_SEEDS = re.compile(r"^--seeds-type-(\d+)(?:=(.*))?$")


class InputError(Exception):
    pass


def _seed_list(values):
    out = []
    for chunk in values or []:
        out += [s for s in chunk.split(",") if s]
    return out


def _names(net, idx):
    return [net.vertices[v] for v in sorted(idx)]


def cmd_certify(args, net):
    cert = certify_model(net, args.eps)
    result = cert.report(net, args.eps)
    summary = f"verdict: {result['verdict']}"
    if cert.infeasible:
        summary += f" (infeasible: {', '.join(result['infeasible_vertices'])})"
    status = 1 if args.require_feasible and not cert.feasible else 0
    return result, summary, status


def cmd_project(args, net):
    proj = project_model(net, args.tol, args.max_iter)
    result = proj.report(net)
    if args.write_network:
        with open(args.write_network, "w", encoding="utf-8") as fh:
            json.dump(dump_network(proj.network), fh, indent=2, sort_keys=True)
            fh.write("\n")
    replaced = result["replaced_vertices"]
    summary = (f"replaced {len(replaced)} vertex table(s), total objective "
               f"{result['total_objective']:.6g}" + (" [partial]" if proj.partial else ""))
    return result, summary, 1 if proj.partial else 0


def _batches(net, seeds, samples, rng_seed, workers):
    workers = max(1, min(workers, samples))
    return [simulate_batch(net, seeds, size, substream(rng_seed, i))
            for i, size in enumerate(split_samples(samples, workers))]


def cmd_simulate(args, net):
    seeds = _seed_list(args.seeds)
    active = np.concatenate(_batches(net, seeds, args.samples, args.rng_seed, args.workers))
    counts = active.sum(axis=1)
    result = {"seeds": seeds, "samples": args.samples}
    if args.samples == 1:
        result["activated"] = _names(net, np.flatnonzero(active[0]).tolist())
    freq = active.mean(axis=0)
    result["activation_frequency"] = {net.vertices[v]: float(freq[v]) for v in range(len(net))}
    result["mean"] = float(counts.mean())
    result["stderr"] = float(counts.std(ddof=1) / np.sqrt(args.samples)) if args.samples > 1 else 0.0
    return result, f"mean spread {result['mean']:.6g} ± {result['stderr']:.2g}", 0


def cmd_spread(args, net):
    seeds = _seed_list(args.seeds)
    if args.exact:
        value = exact_spread(net, seeds)
        result = {"seeds": seeds, "exact": True, "mean": value, "stderr": 0.0}
        if args.distribution:
            dist = exact_distribution(net, seeds)
            result["distribution"] = [
                {"active": _names(net, T), "bitmask": sum(1 << v for v in T), "probability": p}
                for T, p in sorted(dist.items(), key=lambda kv: sum(1 << v for v in kv[0]))
                if p >= 1e-15]
        return result, f"exact spread {value:.10g}", 0
    est = estimate_spread(net, seeds, args.samples, args.rng_seed, args.workers)
    result = {"seeds": seeds, "exact": False, "mean": est.mean, "stderr": est.stderr,
              "samples": est.samples, "rng_seed": est.rng_seed, "workers": est.workers}
    return result, f"spread {est.mean:.6g} ± {est.stderr:.2g}", 0


def cmd_greedy(args, net):
    if not 1 <= args.budget <= len(net):
        raise InputError(f"--budget must lie in [1, {len(net)}]")
    estimator = "exact" if args.exact else MonteCarlo(args.samples, args.rng_seed, args.workers)
    trace = greedy_select(net, args.budget, estimator, lazy=not args.naive)
    guarantee = {"certified": trace.certified}
    if trace.certified and args.exact:
        guarantee["statement"] = f"spread >= {GUARANTEE:.6f} * optimum"
    if args.opt:
        best, value = brute_force_opt(net, args.budget)
        guarantee["optimum_seeds"] = _names(net, best)
        guarantee["optimum_spread"] = value
        guarantee["ratio_vs_opt"] = trace.spread / value if value else 1.0
    result = {
        "chosen": [net.vertices[v] for v in trace.chosen],
        "gains": trace.marginal_gains,
        "evaluations": trace.evaluations,
        "spread": trace.spread,
        "estimator": "exact" if args.exact else
        {"samples": args.samples, "rng_seed": args.rng_seed, "workers": args.workers},
        "lazy": not args.naive,
        "guarantee": guarantee,
    }
    if not args.exact:
        result["pooled_stderr"] = trace.pooled_stderr
    return result, f"chosen {', '.join(result['chosen'])}; spread {trace.spread:.6g}", 0


def cmd_multi(args, net):
    if not net.n_types:
        raise InputError("multi needs a network of plmmi vertices")
    per_type = [_seed_list(args.type_seeds.get(n)) for n in range(1, net.n_types + 1)]
    result = {"engine": args.engine, "tie_rule": args.tie_rule, "seeds": per_type,
              "n_types": net.n_types}
    if args.exact:
        dist = exact_multi_distribution(net, per_type, args.engine, args.tie_rule)
        result["exact_spread"] = [multi_spread(dist, n) for n in range(1, net.n_types + 1)]
        plmmi = exact_multi_distribution(net, per_type, "plmmi")
        result["tv_plmmi_vs_cltm"] = {
            rule: total_variation(plmmi, exact_multi_distribution(net, per_type, "cltm", rule))
            for rule in TIE_RULES}
        if args.distribution:
            result["distribution"] = [{"labels": list(state.labels), "probability": p}
                                      for state, p in sorted(dist.items(), key=lambda kv: kv[0].labels)
                                      if p >= 1e-15]
        summary = "exact per-type spread " + ", ".join(f"{x:.6g}" for x in result["exact_spread"])
    else:
        workers = max(1, min(args.workers, args.samples))
        labels = np.concatenate([
            simulate_multi_batch(net, per_type, size, substream(args.rng_seed, i),
                                 args.engine, args.tie_rule)
            for i, size in enumerate(split_samples(args.samples, workers))])
        spreads = [(labels == n).sum(axis=1) for n in range(1, net.n_types + 1)]
        result["samples"] = args.samples
        result["mean_spread"] = [float(s.mean()) for s in spreads]
        result["stderr"] = [float(s.std(ddof=1) / np.sqrt(args.samples)) if args.samples > 1
                            else 0.0 for s in spreads]
        summary = "per-type spread " + ", ".join(f"{x:.6g}" for x in result["mean_spread"])
    return result, summary, 0


def cmd_falsify(args, _net):
    found = falsify_equivalence(args.k, args.samples, args.rng_seed, args.eps)
    items = []
    for a in found:
        cert = certify_vertex(a, args.eps)
        items.append({"table": a.tolist(), "passes_per_vertex_check": theorem2_check(a).passed,
                      "witness_pattern": cert.witness_pattern,
                      "witness_value": cert.witness_value})
    result = {"k": args.k, "divergences": len(items), "tables": items}
    return result, f"{len(items)} table(s) pass the per-vertex check but have no certificate", 0


COMMANDS = {
    "certify": cmd_certify,
    "project": cmd_project,
    "simulate": cmd_simulate,
    "spread": cmd_spread,
    "greedy": cmd_greedy,
    "multi": cmd_multi,
    "falsify": cmd_falsify,
}


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def _positive_float(text):
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return value


def build_parser():
    parser = argparse.ArgumentParser(prog="subdiff", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"subdiff {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="write the report here instead of stdout")
    common.add_argument("--timing", action="store_true",
                        help="include wall-clock time in the report metadata")

    def with_network(name, help_text):
        p = sub.add_parser(name, parents=[common], help=help_text)
        p.add_argument("network", help="network JSON file")
        p.add_argument("--strict-normalization", action="store_true",
                       help="require plmmi weights to sum to exactly 1")
        return p

    def sampling(p, samples):
        p.add_argument("--samples", type=_positive_int, default=samples)
        p.add_argument("--rng-seed", type=int, default=0)
        p.add_argument("--workers", type=_positive_int, default=1)

    p = with_network("certify", "certify every vertex table")
    p.add_argument("--eps", type=_positive_float, default=DEFAULT_EPS)
    p.add_argument("--require-feasible", action="store_true",
                   help="exit 1 when some vertex is infeasible")

    p = with_network("project", "replace tables by their nearest certified tables")
    p.add_argument("--tol", type=_positive_float, default=DEFAULT_TOL)
    p.add_argument("--max-iter", type=_positive_int, default=DEFAULT_MAX_ITER)
    p.add_argument("--write-network", help="write the projected network file here")

    p = with_network("simulate", "sample propagations from a seed set")
    p.add_argument("--seeds", action="append", default=[])
    sampling(p, 1)

    p = with_network("spread", "estimate expected spread")
    p.add_argument("--seeds", action="append", default=[])
    p.add_argument("--exact", action="store_true", help="exact enumeration (<= 20 vertices)")
    p.add_argument("--distribution", action="store_true",
                   help="with --exact, list every outcome and its probability")
    sampling(p, 10_000)

    p = with_network("greedy", "greedy seed selection")
    p.add_argument("--budget", type=_positive_int, required=True)
    p.add_argument("--exact", action="store_true", help="use the exact spread estimator")
    p.add_argument("--naive", action="store_true", help="disable lazy evaluation")
    p.add_argument("--opt", action="store_true", help="compare against the brute-force optimum")
    sampling(p, 10_000)

    p = with_network("multi", "multi-information propagation (seeds via --seeds-type-N)")
    p.add_argument("--engine", choices=ENGINES, default="plmmi")
    p.add_argument("--tie-rule", choices=TIE_RULES, default="lowest-type-index")
    p.add_argument("--exact", action="store_true")
    p.add_argument("--distribution", action="store_true",
                   help="with --exact, list every label vector and its probability")
    sampling(p, 10_000)

    p = sub.add_parser("falsify", parents=[common],
                       help="search for tables passing the per-vertex check without a certificate")
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--eps", type=_positive_float, default=DEFAULT_EPS)
    sampling(p, 1000)
    return parser


def _parse(parser, argv):
    args, extra = parser.parse_known_args(argv)
    type_seeds = {}
    i = 0
    while i < len(extra):
        m = TYPE_SEEDS.match(extra[i])
        if not m or args.command != "multi":
            parser.error(f"unrecognized arguments: {' '.join(extra[i:])}")
        n = int(m.group(1))
        if m.group(2) is not None:
            value = m.group(2)
        elif i + 1 < len(extra):
            i += 1
            value = extra[i]
        else:
            parser.error(f"{extra[i]} needs a value")
        type_seeds.setdefault(n, []).append(value)
        i += 1
    args.type_seeds = type_seeds
    return args


def _config(args):
    skip = {"out", "timing", "type_seeds"}
    config = {k: v for k, v in vars(args).items() if k not in skip}
    if args.command == "multi":
        config["seeds_per_type"] = {str(n): _seed_list(v) for n, v in sorted(args.type_seeds.items())}
    return config


def run(argv=None) -> int:
    parser = build_parser()
    args = _parse(parser, argv)
    start = time.perf_counter()
    try:
        net = None
        if args.command != "falsify":
            net = read_network(args.network, strict_normalization=args.strict_normalization)
            if args.command == "multi" and args.type_seeds and max(args.type_seeds) > net.n_types:
                raise InputError(f"model has {net.n_types} types")
        result, summary, status = COMMANDS[args.command](args, net)
    except (OSError, ValueError, InputError) as exc:
        print(f"subdiff {args.command}: error: {exc}", file=sys.stderr)
        return 2

    report = {"tool": "subdiff", "version": __version__, "command": args.command,
              "config": _config(args), "result": result}
    if args.timing:
        report["metadata"] = {"wall_clock_seconds": time.perf_counter() - start}
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    print(f"subdiff {args.command}: {summary}", file=sys.stderr)
    return status


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
