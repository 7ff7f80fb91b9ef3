"""Command line tools for certified causal transfer of regression models.

Exit codes: 0 success (abstaining included), 1 usage error, 2 data error,
3 internal invariant violation.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import __version__
from .admg import (
    GraphError,
    JciBackground,
    SeparationQuery,
    admg_from_json,
    admg_to_json,
    m_separated,
    make_universe,
)
from .jci import read_constraints, write_constraints
from .pipeline import BENCHMARK_FIELDS, benchmark_task, result_json, run, summarize
from .simulate import SimConfig, generate_task, model_rngs
from .solver import query_confidence
from .stats import DataError, read_dataset, write_dataset

log = logging.getLogger("jcitransfer")

EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive_int(text: str) -> int:
    value = int(text)
    if value <= 0:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _positive_float(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return value


def _alpha(text: str) -> float:
    value = float(text)
    if not 0 < value < 1:
        raise argparse.ArgumentTypeError(f"alpha must lie in (0, 1), got {text}")
    return value


def _dump(obj) -> None:
    json.dump(obj, sys.stdout, indent=2)
    sys.stdout.write("\n")


def _names(text: str | None) -> list[str]:
    return [t for t in (text or "").split(",") if t]


# -- subcommands ----------------------------------------------------------------


def cmd_simulate(args) -> int:
    cfg = SimConfig(args.models, args.n, args.gamma, args.seed, args.alpha)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    tasks = []
    for i, rng in enumerate(model_rngs(cfg.seed, cfg.n_models)):
        scm, task = generate_task(rng, cfg.gamma, cfg.n_samples)
        tdir = out / f"task_{i:04d}"
        tdir.mkdir(exist_ok=True)
        ds = task.dataset
        write_dataset(ds, tdir / "data.csv", tdir / "data.json")
        (tdir / "graph.json").write_text(admg_to_json(task.graph) + "\n")
        truth = {
            "c1": ds.names[ds.c1],
            "target": ds.names[ds.y],
            "truth": [float(v) for v in task.truth],
            "weights": [[p, c, w] for (p, c), w in sorted(scm.weights.items())],
            "latents": list(scm.latents),
        }
        (tdir / "truth.json").write_text(json.dumps(truth, indent=2) + "\n")
        tasks.append(tdir.name)
    manifest = {
        "version": __version__,
        "models": cfg.n_models,
        "n": cfg.n_samples,
        "gamma": cfg.gamma,
        "seed": cfg.seed,
        "alpha": cfg.alpha,
        "tasks": tasks,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    log.info("wrote %d tasks to %s", len(tasks), out)
    return 0


def cmd_run(args) -> int:
    ds = read_dataset(args.dataset, args.meta)
    res = run(ds, args.alpha, args.max_cond, seed=args.seed)
    if args.constraints_out:
        write_constraints(res.constraints, ds.universe, args.constraints_out)
    _dump(result_json(ds, res))
    return 0


def _bench_row(job):
    return benchmark_task(*job)


def cmd_benchmark(args) -> int:
    cfg = SimConfig(args.models, args.n, args.gamma, args.seed, args.alpha)
    jobs = [
        (i, rng, cfg.gamma, cfg.n_samples, cfg.alpha, args.max_cond)
        for i, rng in enumerate(model_rngs(cfg.seed, cfg.n_models))
    ]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_bench_row, jobs))
    else:
        rows = [_bench_row(job) for job in jobs]
    rows.sort(key=lambda r: r["task"])
    summary = summarize(rows)
    summary.update(gamma=cfg.gamma, n=cfg.n_samples, seed=cfg.seed, alpha=cfg.alpha)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        with (out / "results.csv").open("w", newline="") as fh:
            writer = csv.DictWriter(fh, BENCHMARK_FIELDS, lineterminator="\n")
            writer.writeheader()
            writer.writerows(rows)
        (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    _dump(summary)
    return 0


def _query(index: dict[str, int], a: str, b: str, given: list[str]) -> SeparationQuery:
    try:
        return SeparationQuery(index[a], index[b], frozenset(index[s] for s in given))
    except KeyError as exc:
        raise UsageError(f"unknown variable {exc.args[0]!r}") from None
    except GraphError as exc:
        raise UsageError(str(exc)) from None


def cmd_dsep(args) -> int:
    g = admg_from_json(Path(args.graph).read_text())
    index = {v.name: v.index for v in g.universe}
    q = _query(index, args.a, args.b, _names(args.given))
    _dump({"a": args.a, "b": args.b, "given": _names(args.given), "separated": m_separated(g, q)})
    return 0


def cmd_query(args) -> int:
    if args.meta:
        meta = json.loads(Path(args.meta).read_text())
        context, system = meta["context"], meta["system"]
        c1, target = meta["c1"], meta["target"]
    else:
        context, system = _names(args.context), _names(args.system)
        c1, target = args.c1, args.target
        if not (context and system and c1 and target):
            raise UsageError("give --meta or all of --context, --system, --c1, --target")
    universe = make_universe(context, system)
    index = {v.name: v.index for v in universe}
    if c1 not in index or target not in index:
        raise UsageError(f"c1={c1!r} / target={target!r} not among the variables")
    bg = JciBackground(index[c1], index[target], forbid_c1_to_y=not args.allow_c1_to_y)
    constraints = read_constraints(args.constraints, universe)
    q = _query(index, args.a, args.b, _names(args.given))
    conf = query_confidence(q, constraints, bg, universe)

    def num(x):
        return x if abs(x) != float("inf") else ("inf" if x > 0 else "-inf")

    _dump({
        "a": args.a,
        "b": args.b,
        "given": _names(args.given),
        "confidence": num(conf.value),
        "min_loss_false": num(conf.min_loss_false),
        "min_loss_true": num(conf.min_loss_true),
    })
    return 0


# -- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="jcitransfer", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def sim_flags(p):
        p.add_argument("--models", type=_positive_int, default=200)
        p.add_argument("--n", type=_positive_int, default=1000, help="samples per regime")
        p.add_argument("--gamma", type=_positive_float, default=10.0)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--alpha", type=_alpha, default=0.05)

    p = sub.add_parser("simulate", help="write synthetic tasks to disk")
    sim_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("run", help="solve one task dataset")
    p.add_argument("dataset", help="CSV file; sidecar defaults to the same name with .json")
    p.add_argument("--meta")
    p.add_argument("--alpha", type=_alpha, default=0.05)
    p.add_argument("--max-cond", type=int, default=None)
    p.add_argument("--seed", type=int, default=0, help="CV fold seed")
    p.add_argument("--constraints-out", help="also write the weighted constraints as JSON lines")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("benchmark", help="simulate and evaluate many tasks")
    sim_flags(p)
    p.add_argument("--max-cond", type=int, default=None)
    p.add_argument("--jobs", type=_positive_int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_benchmark)

    def query_flags(p):
        p.add_argument("--a", required=True)
        p.add_argument("--b", required=True)
        p.add_argument("--given", default="", help="comma-separated conditioning set")

    p = sub.add_parser("dsep", help="m-separation in a graph JSON file")
    p.add_argument("graph")
    query_flags(p)
    p.set_defaults(func=cmd_dsep)

    p = sub.add_parser("query", help="confidence of a statement given a constraint file")
    p.add_argument("constraints")
    p.add_argument("--meta", help="dataset sidecar naming variables, c1 and target")
    p.add_argument("--context")
    p.add_argument("--system")
    p.add_argument("--c1")
    p.add_argument("--target")
    p.add_argument("--allow-c1-to-y", action="store_true")
    query_flags(p)
    p.set_defaults(func=cmd_query)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # --help, --version and usage errors
        return exc.code
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"jcitransfer: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, GraphError, OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"jcitransfer: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # invariant violations and bugs
        log.exception("internal error")
        print(f"jcitransfer: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
