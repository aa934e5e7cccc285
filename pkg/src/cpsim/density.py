"""Discrete probability densities on the real line.

A :class:`DiscreteDensity` is a probability mass function on a strictly
increasing grid of time points. Change point posteriors are histograms over
observation indices, so this is the only density type the package needs.

The 1-D Wasserstein distance is evaluated through quantile functions. Both
quantile functions are step functions in ``u``, so merging the two sets of
CDF breakpoints gives the integral exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    EmptySupport,
    InvalidOrder,
    NegativeMass,
    NonFiniteInput,
    NonIncreasingGrid,
    QuantileOutOfRange,
    ZeroTotalMass,
)

MASS_TOL = 1e-12


def _frozen(a):
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class DiscreteDensity:
    """Probability mass ``masses[i]`` placed at ``points[i]``.

    Build instances with :func:`make_density`; the constructor assumes its
    inputs are already validated and normalized.
    """

    points: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "points", _frozen(self.points))
        object.__setattr__(self, "masses", _frozen(self.masses))

    def __len__(self):
        return len(self.points)

    def __eq__(self, other):
        if not isinstance(other, DiscreteDensity):
            return NotImplemented
        return np.array_equal(self.points, other.points) and np.array_equal(
            self.masses, other.masses
        )

    def __hash__(self):
        return hash((self.points.tobytes(), self.masses.tobytes()))

    def __repr__(self):
        if len(self) == 1:
            return f"DiscreteDensity(delta at {self.points[0]:g})"
        return f"DiscreteDensity({len(self)} atoms on [{self.points[0]:g}, {self.points[-1]:g}])"

    @property
    def cdf_values(self) -> np.ndarray:
        c = np.cumsum(self.masses)
        c[-1] = 1.0
        return c

    def support(self) -> tuple[float, float]:
        """Closed interval spanned by the atoms carrying positive mass."""
        pos = np.flatnonzero(self.masses > 0)
        return float(self.points[pos[0]]), float(self.points[pos[-1]])

    def mode(self) -> float:
        """Location of the largest atom (leftmost on ties)."""
        return float(self.points[int(np.argmax(self.masses))])

    def mean(self) -> float:
        return float(np.dot(self.points, self.masses))

    def cdf(self, x: float) -> float:
        i = np.searchsorted(self.points, x, side="right")
        return 0.0 if i == 0 else float(self.cdf_values[i - 1])

    def quantile(self, u: float) -> float:
        return quantile(self, u)

    def is_delta(self) -> bool:
        return int(np.count_nonzero(self.masses)) == 1

    def to_record(self) -> dict:
        return {"points": self.points.tolist(), "masses": self.masses.tolist()}

    @classmethod
    def from_record(cls, record: dict) -> "DiscreteDensity":
        return make_density(record["points"], record["masses"])

    @classmethod
    def delta(cls, x: float) -> "DiscreteDensity":
        return make_density([x], [1.0])


def make_density(points, masses) -> DiscreteDensity:
    """Validate a grid and weights and return the normalized density.

    Masses are divided by their sum, so histogram counts can be passed
    directly.

    Raises
    ------
    EmptySupport
        If no points are given.
    NonIncreasingGrid
        If ``points`` is not strictly increasing or the lengths differ.
    NegativeMass, ZeroTotalMass, NonFiniteInput
        For invalid weights.
    """
    x = np.asarray(points, dtype=np.float64).ravel()
    w = np.asarray(masses, dtype=np.float64).ravel()
    if x.size == 0:
        raise EmptySupport("a density needs at least one point")
    if x.size != w.size:
        raise NonIncreasingGrid(
            f"points and masses differ in length ({x.size} vs {w.size})"
        )
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(w))):
        raise NonFiniteInput("points and masses must be finite")
    if np.any(np.diff(x) <= 0):
        raise NonIncreasingGrid("points must be strictly increasing")
    if np.any(w < 0):
        raise NegativeMass("masses must be nonnegative")
    total = w.sum()
    if total <= 0:
        raise ZeroTotalMass("masses sum to zero")
    if abs(total - 1.0) > MASS_TOL:
        w = w / total
    return DiscreteDensity(x, w)


def quantile(f: DiscreteDensity, u: float) -> float:
    """Generalized inverse CDF: the smallest grid point with ``CDF >= u``."""
    if not 0.0 < u < 1.0:
        raise QuantileOutOfRange(f"quantile level must lie in (0, 1), got {u}")
    i = int(np.searchsorted(f.cdf_values, u, side="left"))
    return float(f.points[min(i, len(f) - 1)])


def wasserstein(f: DiscreteDensity, g: DiscreteDensity, q: float = 1.0) -> float:
    """Exact order-``q`` Wasserstein distance between two discrete densities.

    Computes ``(int_0^1 |F^-1(u) - G^-1(u)|^q du)^(1/q)`` by summing over the
    intervals between consecutive merged CDF breakpoints, on each of which
    both quantile functions are constant.
    """
    if not q >= 1:
        raise InvalidOrder(f"Wasserstein order must be >= 1, got {q}")
    if len(f) == 1 and len(g) == 1:
        return abs(float(f.points[0]) - float(g.points[0]))
    cf, cg = f.cdf_values, g.cdf_values
    breaks = np.union1d(cf, cg)
    breaks = breaks[breaks > 0]
    widths = np.diff(breaks, prepend=0.0)
    fi = np.minimum(np.searchsorted(cf, breaks, side="left"), len(f) - 1)
    gi = np.minimum(np.searchsorted(cg, breaks, side="left"), len(g) - 1)
    gap = np.abs(f.points[fi] - g.points[gi])
    if q == 1:
        return float(np.dot(widths, gap))
    return float(np.dot(widths, gap**q) ** (1.0 / q))
