"""Command-line entry point: ``lewis-coreset {weights,coreset,mu,bench,hardinstance}``.

Exit codes: 0 success, 1 invalid input or configuration, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import itertools
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import bench
from .coreset import derive_seed, draw_coreset
from .data import gen_index_instance
from .errors import ConfigError, CoresetError, InvalidShape, ParseError
from .losses import HINGE, Regularizer, estimate_mu, total_loss
from .weights import LewisConfig, sampling_probabilities

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _csv_list(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def _scores(dataset: str, method: str, iters: int):
    if method in bench.RESERVED_METHODS:
        raise ConfigError(f"method {method!r} is not implemented (external baseline)")
    if method not in bench.METHODS:
        raise ConfigError(f"unknown method {method!r}")
    data = bench.load_dataset(dataset)
    return data, bench.method_scores(method, data.Z, LewisConfig(max_iters=iters))


def cmd_weights(args) -> int:
    data, w = _scores(args.dataset, args.method, args.iters)
    if args.size:
        w = sampling_probabilities(w, args.size, uniform_mix=not args.no_mix)
    lines = ["# " + json.dumps({"kind": w.kind, "n": data.n, "d": data.d, "sum": float(w.values.sum()),
                                **{k: v for k, v in w.meta.items()}}, sort_keys=True),
             "index,weight"]
    lines += [f"{i},{v!r}" for i, v in enumerate(w.values.tolist())]
    _write(args.out, "\n".join(lines) + "\n")
    return EXIT_OK


def cmd_coreset(args) -> int:
    data, w = _scores(args.dataset, args.method, args.iters)
    p = sampling_probabilities(w, args.size, uniform_mix=not args.no_mix)
    core = draw_coreset(p, args.size, derive_seed(args.seed, "coreset"), d=data.d)
    if args.merge:
        core = core.merged()
    _write(args.out, core.to_csv())
    return EXIT_OK


def cmd_mu(args) -> int:
    data = bench.load_dataset(args.dataset)
    est = estimate_mu(data.Z, args.budget, derive_seed(args.seed, "mu"))
    print(json.dumps({"mu_hat": est.mu, "beta": est.beta.tolist(), "budget": args.budget}))
    return EXIT_OK


def _bench_config(args) -> bench.ExperimentConfig:
    raw: dict = {}
    if args.config:
        try:
            raw = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
    flags = {
        "dataset": args.dataset,
        "loss": args.loss,
        "reg": args.reg,
        "methods": _csv_list(args.methods) if args.methods is not None else None,
        "sizes": _csv_list(args.sizes) if args.sizes is not None else None,
        "trials": args.trials,
        "seed": args.seed,
        "out": args.out,
        "formats": _csv_list(args.format) if args.format else None,
        "jobs": args.jobs,
    }
    raw.update({k: v for k, v in flags.items() if v is not None})
    try:
        return bench.ExperimentConfig.from_dict(raw).validate()
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None


def cmd_bench(args) -> int:
    cfg = _bench_config(args)
    report = bench.run_experiment(cfg)
    for path in bench.emit_report(report, cfg.out, cfg.formats):
        print(path)
    for c in report.cells:
        print(f"{c.method:8s} m={c.m:<6d} p25={c.p25:.3e} p50={c.p50:.3e} p75={c.p75:.3e}"
              f" failures={c.failures} unconverged={c.unconverged}", file=sys.stderr)
    return EXIT_OK


def _parse_bits(text: str) -> list[int]:
    if not text or any(ch not in "01" for ch in text):
        raise ConfigError("--a must be a string of 0/1 characters")
    return [int(ch) for ch in text]


def cmd_hardinstance(args) -> int:
    if args.sweep:
        cases = [(n0, k, a, b) for n0 in (4, 8) for k in (0.25, 0.5)
                 for a in itertools.product((0, 1), repeat=n0) for b in range(1, n0 + 1)]
    else:
        if args.a is None or args.b is None:
            raise ConfigError("--a and --b are required unless --sweep is given")
        a = _parse_bits(args.a)
        if not 1 <= args.b <= len(a):
            raise ConfigError(f"--b must lie in [1, {len(a)}]")
        cases = [(len(a), args.kappa, tuple(a), args.b)]
    worst = 0.0
    cache: dict = {}
    for n0, kappa, a, b in cases:
        key = (n0, kappa, a)
        if key not in cache:
            cache.clear()
            cache[key] = gen_index_instance(n0, kappa, a, 1)
        inst = cache[key]
        beta = inst.probe(b)
        reg = Regularizer("l2sq", inst.reg_scale)
        got = total_loss(inst.Z, beta, HINGE, reg)
        base = inst.n_kappa * inst.d * (inst.d + 1) ** 2
        want = 2 * base if a[b - 1] else base
        err = abs(got - want) / want
        worst = max(worst, err)
        if not args.sweep:
            print(json.dumps({"n0": n0, "kappa": kappa, "b": b, "d": inst.d, "n": inst.n,
                              "n_rows": inst.n_rows, "copies": inst.copies, "objective": got,
                              "expected": float(want), "rel_error": err}))
    if args.sweep:
        print(json.dumps({"cases": len(cases), "max_rel_error": worst}))
    return EXIT_OK if worst <= 1e-9 else EXIT_RUNTIME


def _write(out: str | None, text: str) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text, newline="\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lewis-coreset", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def data_args(p, method=True):
        p.add_argument("--dataset", default=bench.DEFAULT_DATASET,
                       help="synthetic:n=..,d=..,skew=..,seed=..,flip=.. or a libsvm/.csv path")
        if method:
            p.add_argument("--method", default="lewis", help="lewis, l2s or uniform")
            p.add_argument("--iters", type=int, default=20, help="Lewis iterations")
            p.add_argument("--no-mix", action="store_true", help="do not floor scores at 1/n")

    p = sub.add_parser("weights", help="compute and dump per-row sampling scores")
    data_args(p)
    p.add_argument("--size", type=int, default=None, help="normalize to sampling rates summing to m")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_weights)

    p = sub.add_parser("coreset", help="draw one coreset and write it as CSV")
    data_args(p)
    p.add_argument("--size", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--merge", action="store_true", help="merge repeated indices")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_coreset)

    p = sub.add_parser("mu", help="lower-bound the classification complexity mu")
    data_args(p, method=False)
    p.add_argument("--budget", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_mu)

    p = sub.add_parser("bench", help="run the relative-loss benchmark")
    p.add_argument("--config", default=None, help="JSON config; flags override it")
    p.add_argument("--dataset", default=None)
    p.add_argument("--loss", default=None, choices=("logistic", "hinge"))
    p.add_argument("--reg", default=None, help="none, l2sq:0.5, l2:1, l1:1")
    p.add_argument("--methods", default=None, help="comma list of lewis,l2s,uniform")
    p.add_argument("--sizes", default=None, help="comma list of coreset sizes")
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--format", default=None, help="comma list of csv,json,svg")
    p.add_argument("--jobs", type=int, default=None)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("hardinstance", help="build and check the INDEX hard instance")
    p.add_argument("--a", default=None, help="bit string, e.g. 1011")
    p.add_argument("--b", type=int, default=None, help="1-based query index")
    p.add_argument("--kappa", type=float, default=0.5)
    p.add_argument("--sweep", action="store_true", help="check every a, b for n0 in {4,8}, kappa in {.25,.5}")
    p.set_defaults(func=cmd_hardinstance)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ParseError, InvalidShape, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (CoresetError, ValueError, ArithmeticError, OSError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
