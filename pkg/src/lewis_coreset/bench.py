"""Seeded coreset benchmark: relative loss versus coreset size per method.

For each method the sampling scores are computed once; for every size m and
trial t a coreset is drawn with the seed derived from ``(seed, method, m, t)``,
the weighted problem is solved from zero, and the relative loss against the
full-data optimum is recorded.
"""

from __future__ import annotations

import json
import logging
import math
import re
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .coreset import RNG_ALGORITHM, derive_seed, draw_coreset
from .data import LabeledMatrix, gen_synthetic, load_csv, load_libsvm
from .errors import ConfigError, DegenerateInstance, NonFinite
from .losses import Regularizer, estimate_mu, get_loss, total_loss
from .solve import SolveConfig, minimize, relative_loss
from .weights import (
    LewisConfig,
    distribution_ratio_histogram,
    lewis_weights,
    sampling_probabilities,
    sqrt_leverage_distribution,
    uniform_distribution,
)

log = logging.getLogger(__name__)

METHODS = ("lewis", "l2s", "uniform")
RESERVED_METHODS = ("sketch",)
DEFAULT_SIZES = (500, 1000, 2000, 4000, 8000)
DEFAULT_DATASET = "synthetic:n=10000,d=10,skew=3,seed=0,flip=0.05"
PERCENTILES = (25, 50, 75)
FORMATS = ("csv", "json", "svg")


@dataclass
class ExperimentConfig:
    dataset: str = DEFAULT_DATASET
    loss: str = "logistic"
    reg: str = "none"
    methods: list = field(default_factory=lambda: list(METHODS))
    sizes: list = field(default_factory=lambda: list(DEFAULT_SIZES))
    trials: int = 100
    seed: int = 0
    uniform_mix: bool = True
    mu_budget: int = 1000
    lewis: LewisConfig = field(default_factory=LewisConfig)
    solver: SolveConfig = field(default_factory=SolveConfig)
    out: str = "results"
    formats: list = field(default_factory=lambda: ["csv", "json"])
    jobs: int = 1

    def validate(self) -> "ExperimentConfig":
        if not self.methods:
            raise ConfigError("methods must be nonempty")
        for m in self.methods:
            if m in RESERVED_METHODS:
                raise ConfigError(f"method {m!r} is not implemented (external baseline)")
            if m not in METHODS:
                raise ConfigError(f"unknown method {m!r}; choose from {METHODS}")
        if len(set(self.methods)) != len(self.methods):
            raise ConfigError("methods must not repeat")
        if not self.sizes or any(int(s) < 1 for s in self.sizes):
            raise ConfigError("sizes must be positive")
        if any(b <= a for a, b in zip(self.sizes, self.sizes[1:])):
            raise ConfigError("sizes must be strictly increasing")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        if self.loss not in ("logistic", "hinge"):
            raise ConfigError("loss must be logistic or hinge")
        try:
            Regularizer.parse(self.reg)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        for fmt in self.formats:
            if fmt not in FORMATS:
                raise ConfigError(f"unknown format {fmt!r}")
        return self

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("out")
        d.pop("jobs")
        d.pop("formats")
        return d

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        raw = dict(raw)
        known = set(cls.__dataclass_fields__)
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        try:
            if isinstance(raw.get("lewis"), dict):
                raw["lewis"] = LewisConfig(**raw["lewis"])
            if isinstance(raw.get("solver"), dict):
                raw["solver"] = SolveConfig(**raw["solver"])
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
        for key in ("methods", "sizes", "formats"):
            if key in raw and isinstance(raw[key], str):
                raw[key] = [s for s in raw[key].split(",") if s]
        if "sizes" in raw:
            raw["sizes"] = [int(s) for s in raw["sizes"]]
        return cls(**raw)


def load_dataset(spec: str) -> LabeledMatrix:
    """Resolve ``synthetic:k=v,...`` or a path to a ``.csv`` / libsvm file."""
    if spec.startswith("synthetic"):
        _, _, args = spec.partition(":")
        kw = dict(n=10000, d=10, skew=0.0, seed=0, flip=0.1)
        for item in filter(None, args.split(",")):
            k, _, v = item.partition("=")
            if k not in kw:
                raise ConfigError(f"unknown synthetic parameter {k!r}")
            kw[k] = type(kw[k])(float(v)) if isinstance(kw[k], int) else float(v)
        return gen_synthetic(**kw)
    path = Path(spec)
    if not path.exists():
        raise ConfigError(f"dataset {spec!r} not found")
    return load_csv(path) if path.suffix.lower() == ".csv" else load_libsvm(path)


def nearest_rank(values, pct: float) -> float:
    """Nearest-rank percentile: the ceil(pct/100 * N)-th smallest value."""
    v = sorted(values)
    k = max(1, math.ceil(pct / 100.0 * len(v)))
    return v[k - 1]


@dataclass
class Cell:
    method: str
    m: int
    p25: float
    p50: float
    p75: float
    values: list
    failures: int
    unconverged: int
    iterations: list


@dataclass
class ExperimentReport:
    config: dict
    dataset: str
    n: int
    d: int
    loss: str
    reg: str
    beta_star_objective: float
    beta_star_converged: bool
    mu_hat: float
    rng: str
    weights: dict
    histograms: dict
    cells: list
    timings: dict = field(default_factory=dict, compare=False)

    def cell(self, method: str, m: int) -> Cell:
        for c in self.cells:
            if c.method == method and c.m == m:
                return c
        raise KeyError((method, m))

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("timings")
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True, allow_nan=True) + "\n"

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentReport":
        raw = dict(raw)
        raw["cells"] = [Cell(**c) for c in raw["cells"]]
        return cls(**raw)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentReport":
        return cls.from_dict(json.loads(text))


def method_scores(method: str, Z: np.ndarray, lewis_cfg: LewisConfig):
    if method == "lewis":
        return lewis_weights(Z, lewis_cfg).weights
    if method == "l2s":
        return sqrt_leverage_distribution(Z)
    return uniform_distribution(Z.shape[0])


# worker state for process pools
_STATE: dict = {}


def _init_worker(state):
    _STATE.clear()
    _STATE.update(state)


def _run_trial(task):
    method, m, trial = task
    s = _STATE
    p = s["probs"][(method, m)]
    try:
        core = draw_coreset(p, m, derive_seed(s["seed"], method, m, trial))
        res = minimize(s["Z"], s["f"], s["reg"], weights=core, cfg=s["solver"])
        rl = relative_loss(s["L_star"], res.beta, s["Z"], s["f"], s["reg"])
        if not math.isfinite(rl):
            raise NonFinite("relative loss is not finite")
        return rl, res.converged, res.iterations
    except (NonFinite, FloatingPointError) as exc:
        log.warning("trial %s/%s/%s failed: %s", method, m, trial, exc)
        return None, False, 0


def run_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    cfg.validate()
    data = load_dataset(cfg.dataset)
    Z = data.Z
    f = get_loss(cfg.loss)
    reg = Regularizer.parse(cfg.reg)
    timings: dict = {}

    t0 = time.perf_counter()
    star = minimize(Z, f, reg, cfg=cfg.solver)
    L_star = total_loss(Z, star.beta, f, reg)
    timings["beta_star"] = time.perf_counter() - t0
    if not L_star > 0:
        raise DegenerateInstance("full-data optimum is zero; relative loss undefined")

    t0 = time.perf_counter()
    mu = estimate_mu(Z, cfg.mu_budget, derive_seed(cfg.seed, "mu"))
    timings["mu"] = time.perf_counter() - t0

    scores, winfo = {}, {}
    for method in cfg.methods:
        t0 = time.perf_counter()
        scores[method] = method_scores(method, Z, cfg.lewis)
        timings[f"weights_{method}"] = time.perf_counter() - t0
        winfo[method] = {k: v for k, v in scores[method].meta.items()}

    hists = {}
    if "lewis" in scores:
        for other in ("uniform", "l2s"):
            if other in scores:
                h = distribution_ratio_histogram(scores[other], scores["lewis"])
                hists[f"{other}_vs_lewis"] = {"counts": h.counts.tolist(), "edges": h.edges.tolist()}

    probs = {}
    for method in cfg.methods:
        for m in cfg.sizes:
            probs[(method, m)] = sampling_probabilities(scores[method], m, uniform_mix=cfg.uniform_mix)

    state = dict(Z=Z, f=f, reg=reg, solver=cfg.solver, L_star=L_star, seed=cfg.seed, probs=probs)
    tasks = [(meth, m, t) for meth in cfg.methods for m in cfg.sizes for t in range(cfg.trials)]
    t0 = time.perf_counter()
    if cfg.jobs > 1:
        with ProcessPoolExecutor(cfg.jobs, initializer=_init_worker, initargs=(state,)) as ex:
            results = list(ex.map(_run_trial, tasks, chunksize=max(1, len(tasks) // (4 * cfg.jobs))))
    else:
        _init_worker(state)
        results = [_run_trial(t) for t in tasks]
    timings["trials"] = time.perf_counter() - t0

    cells = []
    for i, (method, m) in enumerate((a, b) for a in cfg.methods for b in cfg.sizes):
        chunk = results[i * cfg.trials:(i + 1) * cfg.trials]
        vals = [r[0] for r in chunk]
        ranked = [math.inf if v is None else v for v in vals]
        its = [r[2] for r in chunk]
        cells.append(Cell(
            method=method,
            m=int(m),
            p25=nearest_rank(ranked, 25),
            p50=nearest_rank(ranked, 50),
            p75=nearest_rank(ranked, 75),
            values=vals,
            failures=sum(v is None for v in vals),
            unconverged=sum(not r[1] for r in chunk),
            iterations=[int(min(its)), int(np.median(its)), int(max(its))],
        ))

    return ExperimentReport(
        config=cfg.to_dict(),
        dataset=data.provenance,
        n=data.n,
        d=data.d,
        loss=f.name,
        reg=str(reg),
        beta_star_objective=L_star,
        beta_star_converged=bool(star.converged),
        mu_hat=float(mu.mu),
        rng=RNG_ALGORITHM,
        weights=winfo,
        histograms=hists,
        cells=cells,
        timings=timings,
    )


def _slug(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9.=_-]+", "_", text).strip("_")


def report_stem(report: ExperimentReport) -> str:
    return _slug(f"{report.dataset}__{report.loss}__{report.reg}")


def report_csv(report: ExperimentReport) -> str:
    lines = ["method,m,percentile,relative_loss"]
    for c in report.cells:
        for pct in PERCENTILES:
            lines.append(f"{c.method},{c.m},{pct},{getattr(c, f'p{pct}')!r}")
    return "\n".join(lines) + "\n"


def _svg_plots(report: ExperimentReport, out: Path, stem: str) -> list[Path]:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "lewis-coreset"
    meta = {"Date": None, "Creator": None}
    paths = []

    fig, ax = plt.subplots(figsize=(5, 4))
    for k, method in enumerate(dict.fromkeys(c.method for c in report.cells)):
        cs = [c for c in report.cells if c.method == method]
        ms = [c.m for c in cs]
        color = f"C{k}"
        for pct, style in zip(PERCENTILES, (":", "-", ":")):
            y = [math.log10(max(getattr(c, f"p{pct}"), 1e-16)) for c in cs]
            ax.plot(ms, y, style, color=color, label=method if pct == 50 else None)
    ax.set_xlabel("coreset size")
    ax.set_ylabel("log10 relative loss")
    ax.set_title(f"{report.loss}, reg={report.reg}")
    ax.legend()
    path = out / f"{stem}.svg"
    fig.savefig(path, format="svg", metadata=meta)
    plt.close(fig)
    paths.append(path)

    for name, h in report.histograms.items():
        fig, ax = plt.subplots(figsize=(5, 4))
        edges = np.asarray(h["edges"])
        ax.stairs(h["counts"], edges, fill=True)
        ax.set_xscale("log")
        ax.set_xlabel("max(p_i/q_i, q_i/p_i)")
        ax.set_ylabel("rows")
        ax.set_title(name.replace("_", " "))
        path = out / f"{stem}__hist_{name}.svg"
        fig.savefig(path, format="svg", metadata=meta)
        plt.close(fig)
        paths.append(path)
    return paths


def emit_report(report: ExperimentReport, out_dir, formats=("csv", "json")) -> list[Path]:
    """Write the report in each requested format; returns the written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = report_stem(report)
    written = []
    for fmt in formats:
        if fmt == "csv":
            p = out / f"{stem}.csv"
            p.write_text(report_csv(report), newline="\n")
            written.append(p)
        elif fmt == "json":
            p = out / f"{stem}.json"
            p.write_text(report.to_json(), newline="\n")
            written.append(p)
        elif fmt == "svg":
            written.extend(_svg_plots(report, out, stem))
        else:
            raise ConfigError(f"unknown format {fmt!r}")
    if report.timings:
        p = out / f"{stem}.timings.json"
        p.write_text(json.dumps(report.timings, indent=1, sort_keys=True) + "\n")
    return written


__all__ = [
    "Cell",
    "ExperimentConfig",
    "ExperimentReport",
    "emit_report",
    "load_dataset",
    "nearest_rank",
    "run_experiment",
]
