"""Datasets: libsvm/CSV I/O, label fold-in, synthetic generators and the
INDEX hard instance for regularized classification.

All matrices are stored with labels folded in: row i of ``Z`` is ``y_i x_i``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .errors import InvalidShape, MoreThanTwoClasses, NonFinite, ParseError


@dataclass
class LabeledMatrix:
    """Label-premultiplied data ``Z = diag(y) X``.

    ``labels`` (the +-1 vector) is optional and only kept so that the raw
    data can be written back out.
    """

    Z: np.ndarray
    provenance: str = ""
    labels: np.ndarray | None = None
    row_norm_bounded: bool = False

    def __post_init__(self):
        self.Z = np.asarray(self.Z, dtype=np.float64)
        if self.Z.ndim != 2:
            raise ValueError("Z must be 2-d")
        if not np.all(np.isfinite(self.Z)):
            raise NonFinite("data matrix contains NaN or Inf")

    @property
    def n(self) -> int:
        return self.Z.shape[0]

    @property
    def d(self) -> int:
        return self.Z.shape[1]

    @property
    def X(self) -> np.ndarray:
        """Raw features (``Z`` with labels divided back out, if known)."""
        if self.labels is None:
            return self.Z
        return self.Z * self.labels[:, None]


def data_matrix(Z) -> np.ndarray:
    if isinstance(Z, LabeledMatrix):
        return Z.Z
    A = np.asarray(Z, dtype=np.float64)
    return A[:, None] if A.ndim == 1 else A


def fold_labels(X, y, provenance: str = "") -> LabeledMatrix:
    """Multiply each row of ``X`` by its label in {-1, +1}."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if X.shape[0] != y.shape[0]:
        raise ValueError("X and y have different numbers of rows")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise ValueError("labels must be -1 or +1")
    return LabeledMatrix(X * y[:, None], provenance, labels=y)


def _map_labels(raw: list[float], source: str) -> np.ndarray:
    classes = sorted(set(raw))
    if len(classes) > 2:
        raise MoreThanTwoClasses(f"{source}: found {len(classes)} classes {classes[:5]}...")
    if len(classes) == 2:
        hi = classes[1]
        return np.array([1.0 if v == hi else -1.0 for v in raw])
    return np.full(len(raw), 1.0 if classes[0] > 0 else -1.0)


def parse_libsvm(text: str, n_features: int | None = None, source: str = "<string>") -> LabeledMatrix:
    """Parse libsvm text; the larger of the two raw labels maps to +1."""
    labels: list[float] = []
    rows: list[list[tuple[int, float]]] = []
    dmax = 0
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            labels.append(float(parts[0]))
        except ValueError:
            raise ParseError(f"bad label {parts[0]!r}", lineno) from None
        entries = []
        for tok in parts[1:]:
            k, sep, v = tok.partition(":")
            try:
                idx, val = int(k), float(v)
            except ValueError:
                raise ParseError(f"bad feature token {tok!r}", lineno) from None
            if not sep or idx < 1:
                raise ParseError(f"bad feature token {tok!r}", lineno)
            if not math.isfinite(val):
                raise ParseError(f"non-finite value in {tok!r}", lineno)
            entries.append((idx - 1, val))
            dmax = max(dmax, idx)
        rows.append(entries)
    if not rows:
        raise ParseError("no data rows", None)
    d = n_features if n_features is not None else dmax
    if d < dmax:
        raise ParseError(f"feature index {dmax} exceeds n_features={d}", None)
    X = np.zeros((len(rows), max(d, 1)))
    for i, entries in enumerate(rows):
        for j, v in entries:
            X[i, j] = v
    y = _map_labels(labels, source)
    return LabeledMatrix(X * y[:, None], provenance=f"libsvm:{source}", labels=y)


def load_libsvm(path, n_features: int | None = None) -> LabeledMatrix:
    path = Path(path)
    return parse_libsvm(path.read_text(), n_features, source=str(path))


def _fmt(v: float) -> str:
    return repr(float(v))


def _raw(data: LabeledMatrix) -> tuple[np.ndarray, np.ndarray]:
    if data.labels is None:
        return data.Z, np.ones(data.n)
    return data.X, data.labels


def format_libsvm(data: LabeledMatrix) -> str:
    """libsvm text for ``data``; the last column is always written so the
    width survives a round trip."""
    X, y = _raw(data)
    d = X.shape[1]
    out = io.StringIO()
    for i in range(X.shape[0]):
        toks = [str(int(y[i])) if y[i] < 0 else "+1"]
        for j in range(d):
            if X[i, j] != 0 or j == d - 1:
                toks.append(f"{j + 1}:{_fmt(X[i, j])}")
        out.write(" ".join(toks) + "\n")
    return out.getvalue()


def write_libsvm(data: LabeledMatrix, path) -> None:
    Path(path).write_text(format_libsvm(data), newline="\n")


def load_csv(path) -> LabeledMatrix:
    """CSV with a header row; the first column is the label."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            next(reader)
        except StopIteration:
            raise ParseError("empty file", None) from None
        labels, rows = [], []
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            try:
                vals = [float(v) for v in rec]
            except ValueError:
                raise ParseError(f"non-numeric field in {rec!r}", lineno) from None
            if rows and len(vals) - 1 != len(rows[0]):
                raise ParseError("ragged row", lineno)
            labels.append(vals[0])
            rows.append(vals[1:])
    if not rows:
        raise ParseError("no data rows", None)
    X = np.array(rows, dtype=np.float64)
    if not np.all(np.isfinite(X)):
        raise ParseError("non-finite feature value", None)
    y = _map_labels(labels, str(path))
    return LabeledMatrix(X * y[:, None], provenance=f"csv:{path}", labels=y)


def write_csv(data: LabeledMatrix, path) -> None:
    X, y = _raw(data)
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["label"] + [f"x{j + 1}" for j in range(X.shape[1])])
        for i in range(X.shape[0]):
            w.writerow([int(y[i])] + [_fmt(v) for v in X[i]])


def gen_synthetic(n: int, d: int, skew: float = 0.0, seed: int = 0, flip: float = 0.1) -> LabeledMatrix:
    """Gaussian rows with lognormal per-row scale ``exp(skew * N(0, 1))``.

    Labels come from a random planted direction with a fraction ``flip`` of
    them flipped at random. skew = 0 gives near-uniform Lewis weights; skew of
    2 or more gives a heavy-tailed profile.
    """
    if not n >= d >= 1:
        raise ValueError("need n >= d >= 1")
    if skew < 0 or not 0 <= flip <= 1:
        raise ValueError("skew must be >= 0 and flip in [0, 1]")
    rng = np.random.Generator(np.random.Philox(seed))
    G = rng.standard_normal((n, d))
    scale = np.exp(skew * rng.standard_normal(n))
    X = G * scale[:, None]
    planted = rng.standard_normal(d)
    planted /= np.linalg.norm(planted)
    y = np.where(X @ planted >= 0, 1.0, -1.0)
    y[rng.random(n) < flip] *= -1.0
    prov = f"synthetic:n={n},d={d},skew={skew:g},seed={seed},flip={flip:g}"
    return LabeledMatrix(X * y[:, None], provenance=prov, labels=y)


# --------------------------------------------------------------------------
# INDEX hard instance


@dataclass
class IndexInstance:
    """Hard instance for regularized hinge regression built from an INDEX input.

    ``n`` is the scale parameter with ``n^(1-kappa) = 2^d``; the regularized
    objective is ``sum_i hinge((Z beta)_i) + n^kappa ||beta||_2^2``. The
    matrix holds ``copies = n^kappa d (d+1)^2`` stacked copies of the
    ``n0 x (d+1)`` base block, so ``n_rows = copies * n0``.
    """

    a: np.ndarray
    b: int
    kappa: float
    n: int
    n_kappa: int
    d: int
    gamma: float
    copies: int
    X0: np.ndarray
    Z: LabeledMatrix
    beta_probe: np.ndarray
    extra: dict = field(default_factory=dict)

    @property
    def n0(self) -> int:
        return self.a.shape[0]

    @property
    def n_rows(self) -> int:
        return self.Z.n

    @property
    def reg_scale(self) -> float:
        return float(self.n_kappa)

    def probe(self, b: int) -> np.ndarray:
        """Probe vector for query index ``b`` (1-based) on this instance."""
        return np.append(_pm_bits(b, self.d), -1.0) / self.gamma

    def expected_objective(self) -> float:
        """Closed-form objective at ``beta_probe``: twice the baseline when a(b)=1."""
        base = self.n_kappa * self.d * (self.d + 1) ** 2
        return float(2 * base if self.a[self.b - 1] else base)


def _pm_bits(i: int, d: int) -> np.ndarray:
    return np.array([1.0 if (i >> (d - 1 - k)) & 1 else -1.0 for k in range(d)])


def index_dimensions(n0: int, kappa: float, max_d: int = 60) -> tuple[int, int]:
    """Smallest ``d`` (and exponent ``e = d kappa / (1 - kappa)``) that makes
    every integrality requirement hold.

    Needs 2^d > n0 so indices 1..n0 have distinct d-bit codes, and an integer
    ``e`` so that ``n = 2^(d + e)`` and ``n^kappa = 2^e`` are integers.
    """
    if not 0 < kappa < 1:
        raise InvalidShape("kappa must lie in (0, 1)")
    ratio = Fraction(kappa).limit_denominator(10**6)
    ratio = ratio / (1 - ratio)
    d = max(1, int(n0).bit_length())
    while d <= max_d:
        e = d * ratio
        if e.denominator == 1:
            return d, int(e)
        d += 1
    raise InvalidShape(f"no d <= {max_d} makes n^(1-kappa) a power of two for kappa={kappa}")


def gen_index_instance(n0: int, kappa: float, a, b: int) -> IndexInstance:
    """Build the INDEX reduction matrix for bit string ``a`` and query ``b``.

    Row i of the base block is the +-1 binary code of i when a(i) = 1 and
    zero otherwise, with d appended, all scaled by 1/sqrt(d^2 + d). The probe
    is the +-1 code of b with -1 appended, scaled by sqrt(d^2 + d). ``b`` is
    1-based.
    """
    a = np.asarray(a, dtype=np.int64).reshape(-1)
    if a.shape[0] != n0 or n0 < 1:
        raise InvalidShape(f"bit string has length {a.shape[0]}, expected n0={n0}")
    if not np.all((a == 0) | (a == 1)):
        raise InvalidShape("a must be a 0/1 string")
    if not 1 <= b <= n0:
        raise InvalidShape(f"b={b} outside [1, {n0}]")
    d, e = index_dimensions(n0, kappa)
    gamma = 1.0 / math.sqrt(d * d + d)
    n_kappa = 2**e
    n = 2 ** (d + e)
    copies = n_kappa * d * (d + 1) ** 2

    X0 = np.zeros((n0, d + 1))
    for i in range(1, n0 + 1):
        if a[i - 1]:
            X0[i - 1, :d] = _pm_bits(i, d)
        X0[i - 1, d] = d
    X0 *= gamma
    beta = np.append(_pm_bits(b, d), -1.0) / gamma
    Z = LabeledMatrix(
        np.tile(X0, (copies, 1)),
        provenance=f"index:n0={n0},kappa={kappa:g},b={b}",
        row_norm_bounded=True,
    )
    return IndexInstance(a, b, kappa, n, n_kappa, d, gamma, copies, X0, Z, beta)
