"""Command-line front end: ``l1fd <subcommand>``.

Settings come from defaults, then an optional JSON ``--config`` file, then
flags. ``--seed`` overrides every seed; ``L1FD_SEED`` is used only when
neither the config nor the flags set one. Exit codes: 0 success, 1 a
check failed, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import ann_index as ai
from . import checks
from .datasets import DatasetSpec, gen_dataset, load_dataset, read_points, save_dataset
from .embedding import DimensionPlan
from .rng import RandomSeed

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _settings(args: argparse.Namespace, defaults: dict) -> dict:
    """defaults < config file < explicit flags, plus the resolved seed."""
    merged = dict(defaults)
    if getattr(args, "config", None):
        try:
            cfg = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(cfg, dict):
            raise UsageError("config must be a JSON object")
        merged.update(cfg)
    for key in defaults:
        val = getattr(args, key, None)
        if val is not None:
            merged[key] = val
    if args.seed is not None:
        merged["seed"] = args.seed
    elif "seed" not in merged or merged["seed"] is None:
        env = os.environ.get("L1FD_SEED")
        merged["seed"] = int(env) if env else 0
    return merged


def _seed(value) -> RandomSeed:
    if isinstance(value, dict):
        return RandomSeed.from_json(value)
    return RandomSeed(int(value))


def cmd_gen_data(args) -> int:
    s = _settings(args, {"n": 1000, "d": 256, "intrinsic_dim": 3, "geometry": "subspace",
                         "noise": 0.01, "planted_queries": 100, "control_queries": 0,
                         "near_distance": 1.0, "far_distance": 6.0})
    spec = DatasetSpec(**{k: v for k, v in s.items() if k != "seed"}, seed=_seed(s["seed"]))
    ds = gen_dataset(spec)
    save_dataset(args.out, ds)
    print(json.dumps({"out": str(args.out), "n": spec.n, "d": spec.d, "queries": len(ds.kinds),
                      "scale": ds.scale}, sort_keys=True))
    return EXIT_OK


def _load_points(path: str) -> np.ndarray:
    p = Path(path)
    return load_dataset(p).points if p.is_dir() else read_points(p)


def cmd_build_index(args) -> int:
    s = _settings(args, {"epsilon": 0.25, "c": 2.0, "variant": "net", "fail_prob": 0.1,
                         "k": checks.REFERENCE_K, "a": checks.REFERENCE_AMPLIFICATION, "m": None})
    X = _load_points(args.points)
    scale = s["c"] if s["variant"] == "net" else X.shape[1]
    plan = DimensionPlan(int(s["k"]), s["epsilon"], scale, 1.0)
    index = ai.build_index(X, s["epsilon"], s["c"], s["variant"], s["fail_prob"], _seed(s["seed"]),
                           plan=plan, a=s["a"], m=s["m"])
    ai.save_index(args.out, index)
    print(json.dumps({"out": str(args.out), "m": index.m, "k": index.k, "variant": index.variant},
                     sort_keys=True))
    return EXIT_OK


def cmd_query(args) -> int:
    index = ai.load_index(args.index)
    p = Path(args.queries)
    Q = load_dataset(p).queries if p.is_dir() else read_points(p)
    lines = []
    for i, q in enumerate(Q):
        ans = ai.query(index, q)
        dist = None if ans is None else float(np.abs(index.points[ans] - q).sum())
        lines.append(json.dumps({"query": i, "answer": ans, "distance": dist}, sort_keys=True))
    text = "".join(line + "\n" for line in lines)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _emit(records, out: str | None) -> None:
    text = checks.write_report(records, out)
    if not out:
        sys.stdout.write(text)


def cmd_verify(args) -> int:
    s = _settings(args, {"checks": None, "overrides": {}})
    names = s["checks"]
    if names is None:
        names = list(checks.REGISTRY) if args.all else []
    if isinstance(names, str):
        names = [n for n in names.split(",") if n]
    unknown = [n for n in names if n not in checks.REGISTRY]
    if unknown:
        raise UsageError(f"unknown checks: {', '.join(unknown)}; known: {', '.join(checks.REGISTRY)}")
    records = checks.run_verify(names, s["overrides"], _seed(s["seed"]), timing=args.timing)
    _emit(records, args.out)
    return EXIT_OK if all(r.passed for r in records) else EXIT_FAIL


def cmd_experiment(args) -> int:
    s = _settings(args, {"variant": "grid", "epsilon": 0.25, "c": 2.0, "fail_prob": 0.1,
                         "k": checks.REFERENCE_K, "a": checks.REFERENCE_AMPLIFICATION})
    ds = load_dataset(args.data)
    records = checks.run_experiment(ds.points, ds.queries, ds.kinds, s["variant"], s["epsilon"],
                                    s["c"], s["fail_prob"], _seed(s["seed"]), k=int(s["k"]),
                                    a=s["a"], timing=args.timing)
    _emit(records, args.out)
    return EXIT_OK if all(r.passed for r in records) else EXIT_FAIL


def cmd_report(args) -> int:
    rows = []
    for path in args.files:
        for line in Path(path).read_text().splitlines():
            if line.strip():
                rows.append(json.loads(line))
    for r in rows:
        mark = "PASS" if r["pass"] else "FAIL"
        emp, ana = r.get("empirical_value"), r.get("analytic_value")
        print(f"{mark}  {r['experiment']:<15} {r['bound_name']:<45} value={_fmt(emp)} reference={_fmt(ana)}")
    failed = sum(not r["pass"] for r in rows)
    print(f"{len(rows)} records, {failed} failed")
    return EXIT_OK


def _fmt(v) -> str:
    return f"{v:.6g}" if isinstance(v, float) else str(v)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="l1fd", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON file with settings for this subcommand")
        p.add_argument("--seed", type=int, help="overrides every seed")
        return p

    g = common(sub.add_parser("gen-data", help="generate a planted low-doubling data set"))
    g.add_argument("--out", required=True)
    g.add_argument("--n", type=int)
    g.add_argument("--d", type=int)
    g.add_argument("--intrinsic-dim", dest="intrinsic_dim", type=int)
    g.add_argument("--geometry", choices=["subspace", "segment-union", "clustered"])
    g.add_argument("--noise", type=float)
    g.add_argument("--planted-queries", dest="planted_queries", type=int)
    g.add_argument("--control-queries", dest="control_queries", type=int)
    g.add_argument("--near-distance", dest="near_distance", type=float)
    g.add_argument("--far-distance", dest="far_distance", type=float)
    g.set_defaults(func=cmd_gen_data)

    b = common(sub.add_parser("build-index", help="build an amplified near-neighbor index"))
    b.add_argument("--points", required=True, help="point file or gen-data directory")
    b.add_argument("--out", required=True)
    b.add_argument("--epsilon", type=float)
    b.add_argument("--c", type=float)
    b.add_argument("--variant", choices=["net", "grid"])
    b.add_argument("--fail-prob", dest="fail_prob", type=float)
    b.add_argument("--k", type=int)
    b.add_argument("--a", type=float)
    b.add_argument("--m", type=int)
    b.set_defaults(func=cmd_build_index)

    q = sub.add_parser("query", help="answer queries against a saved index")
    q.add_argument("--index", required=True)
    q.add_argument("--queries", required=True, help="point file or gen-data directory")
    q.add_argument("--out")
    q.set_defaults(func=cmd_query, seed=None)

    v = common(sub.add_parser("verify-bounds", help="run registered verification checks"))
    v.add_argument("--checks", help="comma-separated check names")
    v.add_argument("--all", action="store_true", help="run every registered check")
    v.add_argument("--list", action="store_true", help="list check names and exit")
    v.add_argument("--timing", action="store_true", help="record wall-clock seconds")
    v.add_argument("--out", help="append JSON lines here instead of stdout")
    v.set_defaults(func=cmd_verify)

    e = common(sub.add_parser("experiment", help="index a gen-data set and answer its queries"))
    e.add_argument("--data", required=True)
    e.add_argument("--variant", choices=["net", "grid"])
    e.add_argument("--epsilon", type=float)
    e.add_argument("--c", type=float)
    e.add_argument("--fail-prob", dest="fail_prob", type=float)
    e.add_argument("--k", type=int)
    e.add_argument("--a", type=float)
    e.add_argument("--timing", action="store_true")
    e.add_argument("--out")
    e.set_defaults(func=cmd_experiment)

    r = sub.add_parser("report", help="pretty-print JSON-lines reports")
    r.add_argument("files", nargs="+")
    r.set_defaults(func=cmd_report, seed=None)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    if getattr(args, "list", False):
        for name, c in checks.REGISTRY.items():
            print(f"{name}{'  (timing)' if c.timing else ''}")
        return EXIT_OK
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"l1fd: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, FileNotFoundError) as exc:
        print(f"l1fd: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
