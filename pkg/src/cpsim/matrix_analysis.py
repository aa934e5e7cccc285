"""Distance matrices between series, their norms, triangle audits and clustering."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.cluster.hierarchy import linkage as _scipy_linkage
from scipy.spatial.distance import squareform

from .errors import DataError, EmptyCollection, EmptyMemberSet, ParseError, TooFewSeries
from .uncertain_sets import SetWithUncertainty, mj_wasserstein

BLUE, YELLOW, RED = 0, 1, 2
# relative slack on the class boundaries so that rounding in D_ij + D_jk
# does not turn an equality (collinear points) into a failure
RATIO_RTOL = 1e-12
COLOR_NAMES = ("blue", "yellow", "red")
LINKAGES = ("average", "single", "complete")


@dataclass(frozen=True, eq=False)
class DistanceMatrix:
    """Labeled symmetric matrix with zero diagonal and nonnegative entries."""

    labels: tuple
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        labels = tuple(str(s) for s in self.labels)
        if v.ndim != 2 or v.shape[0] != v.shape[1] or v.shape[0] != len(labels):
            raise DataError("distance matrix must be square and match its labels")
        if not np.all(np.isfinite(v)):
            raise DataError("distance matrix has non-finite entries")
        if not np.array_equal(v, v.T):
            raise DataError("distance matrix is not symmetric")
        if np.any(np.diag(v) != 0):
            raise DataError("distance matrix diagonal must be zero")
        if np.any(v < 0):
            raise DataError("distance matrix has negative entries")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return len(self.labels)

    def __eq__(self, other):
        if not isinstance(other, DistanceMatrix):
            return NotImplemented
        return self.labels == other.labels and np.array_equal(self.values, other.values)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([""] + list(self.labels))
        for lab, row in zip(self.labels, self.values):
            w.writerow([lab] + [repr(float(v)) for v in row])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "DistanceMatrix":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows:
            raise ParseError("empty distance matrix file")
        labels = rows[0][1:]
        body = rows[1:]
        if len(body) != len(labels):
            raise ParseError(f"expected {len(labels)} rows, found {len(body)}")
        vals = np.empty((len(labels), len(labels)))
        for i, row in enumerate(body):
            if len(row) != len(labels) + 1 or row[0] != labels[i]:
                raise ParseError("row label or width mismatch", row=i + 2)
            for j, cell in enumerate(row[1:]):
                try:
                    vals[i, j] = float(cell)
                except ValueError:
                    raise ParseError(f"not a number: {cell!r}", row=i + 2, column=labels[j]) from None
        return cls(tuple(labels), vals)


def distance_matrix(
    sets: Sequence[SetWithUncertainty],
    series_length: int,
    p: float = 1.0,
    q: float = 1.0,
    labels: Sequence[str] | None = None,
) -> DistanceMatrix:
    """Pairwise MJ-Wasserstein distances divided by the series length.

    Each unordered pair is evaluated once and mirrored, so the result is
    exactly symmetric.
    """
    sets = list(sets)
    n = len(sets)
    if n < 2:
        raise EmptyCollection("need at least two sets to build a distance matrix")
    if series_length < 1:
        raise DataError("series length must be positive")
    if labels is None:
        labels = [str(i) for i in range(n)]
    for lab, s in zip(labels, sets):
        if s.is_empty:
            raise EmptyMemberSet(f"series {lab!r} has no change points")
    D = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            D[i, j] = D[j, i] = mj_wasserstein(sets[i], sets[j], p, q) / series_length
    return DistanceMatrix(tuple(labels), D)


def matrix_norm(D, kind: str = "l1") -> float:
    """Size-normalized L1/L2 norms or the operator norm of a distance matrix.

    ``l1`` and ``l2`` average over the ``n(n-1)`` off-diagonal entries;
    ``operator`` is the largest absolute eigenvalue.
    """
    v = D.values if isinstance(D, DistanceMatrix) else np.asarray(D, dtype=np.float64)
    n = v.shape[0]
    if n < 2:
        raise TooFewSeries("matrix norms need n >= 2")
    if kind == "l1":
        return float(np.abs(v).sum() / (n * (n - 1)))
    if kind == "l2":
        return float(np.sqrt((v**2).sum() / (n * (n - 1))))
    if kind == "operator":
        return float(np.max(np.abs(np.linalg.eigvalsh(v))))
    raise ValueError(f"unknown norm {kind!r}")


@dataclass(frozen=True)
class TriangleTestSummary:
    """Outcome of checking ``D[i,k] <= D[i,j] + D[j,k]`` over ordered triples.

    ``classifications[i, j, k]`` is 0 (blue, inequality holds), 1 (yellow,
    ratio in (1, 2]), 2 (red, ratio above 2) or -1 for triples that were not
    tested (repeated index or zero denominator).
    """

    classifications: np.ndarray
    ratios: np.ndarray
    n_triples: int
    n_degenerate: int
    counts: dict
    fail_fraction: float
    mean_fail_ratio: float | None

    def to_dict(self) -> dict:
        return {
            "fail_fraction": self.fail_fraction,
            "mean_fail_ratio": self.mean_fail_ratio,
            "counts": dict(self.counts),
            "n_triples": self.n_triples,
            "n_degenerate": self.n_degenerate,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def triples_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["i", "j", "k", "ratio", "class"])
        for i, j, k in zip(*np.nonzero(self.classifications >= 0)):
            w.writerow([i, j, k, repr(float(self.ratios[i, j, k])), COLOR_NAMES[self.classifications[i, j, k]]])
        return buf.getvalue()


def classify_ratio(ratio: float, rtol: float = RATIO_RTOL) -> int:
    if ratio <= 1.0 + rtol:
        return BLUE
    if ratio <= 2.0 * (1.0 + rtol):
        return YELLOW
    return RED


def triangle_test(D, rtol: float = RATIO_RTOL) -> TriangleTestSummary:
    """Classify every ordered triple of distinct indices by ``D_ik / (D_ij + D_jk)``.

    A triple fails when its ratio exceeds ``1 + rtol``. Triples with
    ``D_ij + D_jk == 0`` are counted as degenerate and left out of the fail
    fraction, whose denominator is the number of tested triples.
    """
    v = D.values if isinstance(D, DistanceMatrix) else np.asarray(D, dtype=np.float64)
    n = v.shape[0]
    if n < 3:
        raise TooFewSeries("the triangle test needs at least three series")
    denom = v[:, :, None] + v[None, :, :]  # D_ij + D_jk at [i, j, k]
    numer = np.broadcast_to(v[:, None, :], denom.shape)  # D_ik
    idx = np.arange(n)
    distinct = (idx[:, None, None] != idx[None, :, None]) & (idx[None, :, None] != idx[None, None, :]) & (
        idx[:, None, None] != idx[None, None, :]
    )
    usable = distinct & (denom > 0)
    ratios = np.full(denom.shape, np.nan)
    ratios[usable] = numer[usable] / denom[usable]
    cls = np.full(denom.shape, -1, dtype=np.int8)
    r = ratios[usable]
    cls[usable] = np.where(r <= 1.0 + rtol, BLUE, np.where(r <= 2.0 * (1.0 + rtol), YELLOW, RED))
    n_tested = int(usable.sum())
    counts = {name: int((cls == c).sum()) for c, name in enumerate(COLOR_NAMES)}
    fails = r[r > 1.0 + rtol]
    return TriangleTestSummary(
        classifications=cls,
        ratios=ratios,
        n_triples=n_tested,
        n_degenerate=int(distinct.sum()) - n_tested,
        counts=counts,
        fail_fraction=float(fails.size / n_tested) if n_tested else 0.0,
        mean_fail_ratio=float(fails.mean()) if fails.size else None,
    )


@dataclass(frozen=True)
class Dendrogram:
    """Agglomerative merge tree in the usual linkage-matrix layout.

    Row ``s`` of ``merges`` joins clusters ``left`` and ``right`` at
    ``height``; ids below ``n`` are leaves, id ``n + s`` is the cluster made
    at step ``s``.
    """

    labels: tuple
    merges: np.ndarray  # (n - 1, 4): left, right, height, size
    method: str

    @property
    def heights(self) -> np.ndarray:
        return self.merges[:, 2]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["step", "left", "right", "height", "size", "left_label", "right_label"])
        n = len(self.labels)
        for s, (a, b, h, size) in enumerate(self.merges):
            a, b = int(a), int(b)
            w.writerow([
                s, a, b, repr(float(h)), int(size),
                self.labels[a] if a < n else "",
                self.labels[b] if b < n else "",
            ])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, labels: Sequence[str], method: str = "average") -> "Dendrogram":
        rows = list(csv.DictReader(io.StringIO(text)))
        merges = np.array(
            [[float(r["left"]), float(r["right"]), float(r["height"]), float(r["size"])] for r in rows]
        )
        return cls(tuple(labels), merges.reshape(-1, 4), method)


def hierarchical_cluster(D, linkage: str = "average") -> Dendrogram:
    """Agglomerative clustering of a precomputed distance matrix."""
    if linkage not in LINKAGES:
        raise ValueError(f"linkage must be one of {LINKAGES}, got {linkage!r}")
    if isinstance(D, DistanceMatrix):
        labels, v = D.labels, D.values
    else:
        v = np.asarray(D, dtype=np.float64)
        labels = tuple(str(i) for i in range(v.shape[0]))
    if v.shape[0] < 2:
        raise TooFewSeries("clustering needs at least two series")
    Z = _scipy_linkage(squareform(v, checks=False), method=linkage)
    return Dendrogram(tuple(labels), Z, linkage)
