"""Command-line entry point: ``permsync {sync,gen,bench}``.

Exit codes: 0 success, 1 usage/parse error, 2 validation failure, 3 solver error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

from . import evalkit
from .baselines import matcheig, spectral_greedy
from .matmodel import validate_pairwise
from .pmx import PmxParseError, read_pmx, write_pmx
from .sync import SyncConfig, nmfsync

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

log = logging.getLogger("permsync")

EXIT_OK, EXIT_PARSE, EXIT_INVALID, EXIT_SOLVER = 0, 1, 2, 3
CSV_COLUMNS = ("sweep_param", "value", "method", "metric", "mean", "stddev", "trials", "failures")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _sync(args) -> int:
    try:
        W = read_pmx(args.input)
        Wgt = read_pmx(args.gt) if args.gt else None
    except (OSError, PmxParseError) as exc:
        print(f"permsync sync: {exc}", file=sys.stderr)
        return EXIT_PARSE
    for name, M in (("input", W), ("gt", Wgt)):
        if M is None:
            continue
        res = validate_pairwise(M)
        if not res:
            print(f"permsync sync: invalid {name}: {res.message}", file=sys.stderr)
            return EXIT_INVALID
    if Wgt is not None and Wgt.structure != W.structure:
        print("permsync sync: --gt has a different block structure", file=sys.stderr)
        return EXIT_INVALID
    if W.m and args.d < max(W.structure.sizes):
        print(f"permsync sync: --d {args.d} is smaller than the largest object "
              f"({max(W.structure.sizes)} features)", file=sys.stderr)
        return EXIT_INVALID

    timings = {}
    try:
        if args.method == "nmfsync":
            res = nmfsync(W, SyncConfig(d=args.d, theta=args.theta, seed=args.seed))
            Ws, timings = res.W, res.diagnostics["timings"]
        elif args.method == "spectral":
            Ws = spectral_greedy(W, args.d, seed=args.seed)[1]
        else:
            Ws = matcheig(W, args.d, tau=args.tau, seed=args.seed)
    except Exception as exc:  # noqa: BLE001
        print(f"permsync sync: solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER

    write_pmx(Ws, args.output)
    if args.report:
        rep = evalkit.evaluate(Ws, Wgt, wall_times=timings)
        payload = rep.to_dict()
        if Wgt is None:
            for key in ("gt_error", "precision", "recall", "fscore"):
                payload.pop(key)
        payload["method"] = args.method
        Path(args.report).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    return EXIT_OK


def _gen(args) -> int:
    try:
        params = evalkit.GenParams(k=args.k, d=args.d, rho=args.rho, sigma=args.sigma, seed=args.seed)
    except ValueError as exc:
        print(f"permsync gen: {exc}", file=sys.stderr)
        return EXIT_PARSE
    W, Wgt, _ = evalkit.generate(params)
    write_pmx(W, args.output)
    if args.gt:
        write_pmx(Wgt, args.gt)
    return EXIT_OK


def load_protocol(path) -> evalkit.Protocol:
    """Read a TOML sweep description.

    Raises ``ValueError`` whose message starts with the offending key.
    """
    with open(path, "rb") as fh:
        try:
            raw = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ValueError(f"(toml): {exc}") from None
    known = {"sweep", "values", "methods", "metrics", "trials", "seed", "fixed"}
    for key in raw:
        if key not in known:
            raise ValueError(f"{key}: unknown key")
    for key in ("sweep", "values", "methods"):
        if key not in raw:
            raise ValueError(f"{key}: missing")
    if not isinstance(raw["values"], list):
        raise ValueError("values: must be a list")
    if not isinstance(raw["methods"], list):
        raise ValueError("methods: must be a list")
    fixed = raw.get("fixed", {})
    if not isinstance(fixed, dict):
        raise ValueError("fixed: must be a table")
    for key in fixed:
        if key not in ("k", "d", "rho", "sigma", "theta", "true_d", "tau"):
            raise ValueError(f"fixed.{key}: unknown parameter")
    kwargs = dict(sweep=raw["sweep"], values=tuple(raw["values"]), methods=tuple(raw["methods"]),
                  trials=int(raw.get("trials", 100)), seed=int(raw.get("seed", 0)), fixed=dict(fixed))
    if "metrics" in raw:
        kwargs["metrics"] = tuple(raw["metrics"])
    return evalkit.Protocol(**kwargs)


def write_csv(rows, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for r in rows:
            d = asdict(r)
            w.writerow([d[c] if not isinstance(d[c], float) else repr(d[c]) for c in CSV_COLUMNS])


def plot_svg(rows, path) -> None:
    """One line chart per metric, one line per method."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    metrics = sorted({r.metric for r in rows})
    fig, axes = plt.subplots(1, len(metrics), figsize=(3.2 * len(metrics), 3), squeeze=False)
    for ax, met in zip(axes[0], metrics):
        for mth, pts in sorted(evalkit.summarise(rows, met).items()):
            xs, ys = zip(*pts)
            ax.plot(xs, ys, marker="o", label=mth)
        ax.set_title(met)
        ax.set_xlabel(rows[0].sweep_param)
    axes[0][0].legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def _bench(args) -> int:
    try:
        proto = load_protocol(args.protocol)
    except OSError as exc:
        print(f"permsync bench: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (ValueError, TypeError) as exc:
        print(f"permsync bench: malformed protocol: {exc}", file=sys.stderr)
        return EXIT_PARSE
    rows = evalkit.run_experiment(proto, n_jobs=args.jobs)
    write_csv(rows, args.out)
    if args.plot:
        plot_svg(rows, args.plot)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="permsync", description="Synchronise partial pairwise matchings.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("sync", help="synchronise a .pmx file")
    s.add_argument("--input", required=True)
    s.add_argument("--d", type=int, required=True, help="universe size")
    s.add_argument("--theta", type=float, default=0.0, help="pruning threshold")
    s.add_argument("--method", choices=("nmfsync", "spectral", "matcheig"), default="nmfsync")
    s.add_argument("--tau", type=float, default=0.5, help="matcheig threshold")
    s.add_argument("--output", required=True)
    s.add_argument("--report")
    s.add_argument("--gt", help="ground-truth .pmx for gt-error and f-score")
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=_sync)

    g = sub.add_parser("gen", help="generate a synthetic instance")
    g.add_argument("--k", type=int, required=True)
    g.add_argument("--d", type=int, required=True)
    g.add_argument("--rho", type=float, required=True)
    g.add_argument("--sigma", type=float, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--output", required=True)
    g.add_argument("--gt")
    g.set_defaults(func=_gen)

    b = sub.add_parser("bench", help="run a parameter sweep")
    b.add_argument("--protocol", required=True)
    b.add_argument("--out", required=True)
    b.add_argument("--plot")
    b.add_argument("--jobs", type=int, default=1)
    b.set_defaults(func=_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_PARSE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
