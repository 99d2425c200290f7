"""Importance-sampled coresets: drawing, quality measurement, serialization.

A coreset of size m is m i.i.d. row draws where row i is picked with
probability p_i / m and carries weight 1 / p_i (``sum(p) == m``). The
weighted loss is then an unbiased estimate of the full loss for every beta.

Randomness comes from numpy's Philox (a counter-based 64-bit generator)
seeded through :class:`numpy.random.SeedSequence`, so draws are reproducible
across platforms.
"""

from __future__ import annotations

import io
import json
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .data import data_matrix
from .errors import DimMismatch, ParseError, ZeroMass
from .losses import get_loss
from .weights import WeightVector

RNG_ALGORITHM = "numpy.random.Philox(4x64, SeedSequence)"


def derive_seed(base: int, *keys) -> np.random.SeedSequence:
    """Stable child seed for ``(base, *keys)``; strings are hashed with CRC32."""
    ints = [int(base)]
    for k in keys:
        ints.append(zlib.crc32(k.encode()) if isinstance(k, str) else int(k))
    return np.random.SeedSequence(ints)


def make_rng(seed) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


def _seed_label(seed):
    if isinstance(seed, np.random.SeedSequence):
        ent = seed.entropy
        return list(ent) if isinstance(ent, (list, tuple)) else int(ent)
    return seed


@dataclass
class Coreset:
    indices: np.ndarray
    weights: np.ndarray
    source_kind: str = "raw"
    seed: object = None
    n: int | None = None
    d: int | None = None

    def __post_init__(self):
        self.indices = np.asarray(self.indices, dtype=np.int64)
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.indices.shape != self.weights.shape or self.indices.ndim != 1:
            raise ValueError("indices and weights must be 1-d and the same length")
        if self.indices.size < 1:
            raise ValueError("a coreset needs at least one row")
        if np.any(self.weights <= 0) or not np.all(np.isfinite(self.weights)):
            raise ValueError("coreset weights must be finite and positive")

    @property
    def m(self) -> int:
        return self.indices.shape[0]

    def merged(self) -> "Coreset":
        """Collapse repeated indices by summing their weights."""
        idx, inv = np.unique(self.indices, return_inverse=True)
        w = np.bincount(inv, weights=self.weights)
        return Coreset(idx, w, self.source_kind, self.seed, self.n, self.d)

    def header(self) -> dict:
        return {
            "source_kind": self.source_kind,
            "seed": _seed_label(self.seed),
            "m": self.m,
            "n": self.n,
            "d": self.d,
            "rng": RNG_ALGORITHM,
        }

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write("# " + json.dumps(self.header(), sort_keys=True) + "\n")
        out.write("index,weight\n")
        for i, w in zip(self.indices, self.weights):
            out.write(f"{int(i)},{float(w)!r}\n")
        return out.getvalue()

    def save(self, path) -> None:
        Path(path).write_text(self.to_csv(), newline="\n")

    @classmethod
    def from_csv(cls, text: str) -> "Coreset":
        lines = text.splitlines()
        if len(lines) < 3 or not lines[0].startswith("#") or lines[1].strip() != "index,weight":
            raise ParseError("expected a JSON header line and an index,weight table")
        hdr = json.loads(lines[0][1:])
        idx, w = [], []
        for lineno, line in enumerate(lines[2:], start=3):
            if not line.strip():
                continue
            i, _, v = line.partition(",")
            try:
                idx.append(int(i))
                w.append(float(v))
            except ValueError:
                raise ParseError(f"bad row {line!r}", lineno) from None
        return cls(np.array(idx), np.array(w), hdr.get("source_kind", "raw"), hdr.get("seed"),
                   hdr.get("n"), hdr.get("d"))

    @classmethod
    def load(cls, path) -> "Coreset":
        return cls.from_csv(Path(path).read_text())


def full_coreset(n: int) -> Coreset:
    """Every row once with weight 1."""
    return Coreset(np.arange(n), np.ones(n), "identity", None, n)


def draw_coreset(p: WeightVector, m: int, seed=0, d: int | None = None) -> Coreset:
    """Draw ``m`` rows i.i.d., row i with probability ``p_i / m`` and weight ``1 / p_i``."""
    pv = np.asarray(getattr(p, "values", p), dtype=np.float64)
    if m < 1:
        raise ValueError("m must be >= 1")
    if np.any(pv < 0) or not np.all(np.isfinite(pv)):
        raise ValueError("sampling rates must be finite and nonnegative")
    total = float(pv.sum())
    if not total > 0:
        raise ZeroMass("sampling rates sum to zero")
    if abs(total - m) > 1e-6 * m:
        raise ValueError(f"sampling rates sum to {total}, expected m={m}")
    rng = make_rng(seed)
    cdf = np.cumsum(pv)
    u = rng.random(m) * cdf[-1]
    idx = np.searchsorted(cdf, u, side="right")
    last = int(np.flatnonzero(pv > 0)[-1])
    idx = np.minimum(idx, last)
    kind = p.meta.get("source_kind", p.kind) if isinstance(p, WeightVector) else "raw"
    return Coreset(idx, 1.0 / pv[idx], kind, seed, pv.shape[0], d)


class ErrorSummary(NamedTuple):
    max_additive: float
    max_relative: float
    additive: np.ndarray
    relative: np.ndarray
    normalized: np.ndarray
    l1_norms: np.ndarray


def coreset_error(coreset: Coreset, Z, f, betas) -> ErrorSummary:
    """Additive and relative error of the coreset loss over a set of betas.

    The regularizer is left out of both sides. ``normalized`` is
    ``|delta| / (||Z beta||_1 + n)``; ``l1_norms`` holds ``||Z beta||_1`` so
    callers can form other normalizations.
    """
    A = data_matrix(Z)
    f = get_loss(f)
    B = np.atleast_2d(np.asarray(betas, dtype=np.float64))
    if B.size == 0:
        raise ValueError("betas must be nonempty")
    if B.shape[1] != A.shape[1]:
        raise DimMismatch(f"betas have dimension {B.shape[1]}, data has {A.shape[1]} columns")
    ZB = A @ B.T
    full = f.value(ZB).sum(axis=0)
    approx = coreset.weights @ f.value(ZB[coreset.indices])
    add = np.abs(approx - full)
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.where(full > 0, add / full, np.where(add > 0, np.inf, 0.0))
    l1 = np.abs(ZB).sum(axis=0)
    norm = add / (l1 + A.shape[0])
    return ErrorSummary(float(add.max()), float(rel.max()), add, rel, norm, l1)
