"""Sets with uncertainty and distances between finite sets.

Regular finite sets of reals (:class:`FiniteSet`) support the minimal
distance, the Hausdorff metric and the MJ_p semi-metric. Sets whose elements
are probability densities (:class:`SetWithUncertainty`) support the
MJ-Wasserstein semi-metric, which replaces the point distance ``|x - y|`` by
the Wasserstein distance between member densities. On sets of point masses
both families agree.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .density import DiscreteDensity, make_density, wasserstein
from .errors import (
    DuplicatePoint,
    EmptyMemberSet,
    InvalidOrder,
    NonFiniteInput,
    OverlappingSupports,
)


@dataclass(frozen=True, eq=False)
class FiniteSet:
    """A nonempty set of distinct reals, stored sorted."""

    elements: np.ndarray

    def __init__(self, elements: Iterable[float]):
        x = np.sort(np.asarray(list(elements), dtype=np.float64).ravel())
        if x.size == 0:
            raise EmptyMemberSet("a finite set needs at least one element")
        if not np.all(np.isfinite(x)):
            raise NonFiniteInput("set elements must be finite")
        if np.any(np.diff(x) == 0):
            raise DuplicatePoint("set elements must be distinct")
        x.setflags(write=False)
        object.__setattr__(self, "elements", x)

    def __len__(self):
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements.tolist())

    def __eq__(self, other):
        if not isinstance(other, FiniteSet):
            return NotImplemented
        return np.array_equal(self.elements, other.elements)

    def __hash__(self):
        return hash(self.elements.tobytes())

    def __repr__(self):
        return f"FiniteSet({self.elements.tolist()})"


class SetWithUncertainty:
    """Ordered collection of densities with pairwise disjoint supports.

    Members are sorted by the left endpoint of their support. Construction
    fails with :class:`OverlappingSupports` when two supports intersect,
    unless ``repair=True``, in which case overlapping neighbours are cut at
    the midpoint between their anchor locations (see :func:`repair_overlaps`).

    A set with no members can only be made through :meth:`empty`; it marks a
    series without change points and is rejected by every distance.
    """

    __slots__ = ("_members",)

    def __init__(self, members: Sequence[DiscreteDensity], repair: bool = False):
        members = list(members)
        if not members:
            raise EmptyMemberSet("a set with uncertainty needs at least one member")
        if repair:
            members = repair_overlaps(members)
        members.sort(key=lambda d: d.support()[0])
        supports = [d.support() for d in members]
        for (_, hi), (lo, _) in zip(supports, supports[1:]):
            if lo <= hi:
                raise OverlappingSupports(
                    f"member supports overlap: ... {hi:g}] vs [{lo:g} ..."
                )
        self._members = tuple(members)

    @classmethod
    def empty(cls) -> "SetWithUncertainty":
        obj = cls.__new__(cls)
        obj._members = ()
        return obj

    @property
    def members(self) -> tuple[DiscreteDensity, ...]:
        return self._members

    @property
    def is_empty(self) -> bool:
        return not self._members

    def __len__(self):
        return len(self._members)

    def __iter__(self):
        return iter(self._members)

    def __eq__(self, other):
        if not isinstance(other, SetWithUncertainty):
            return NotImplemented
        return self._members == other._members

    def __hash__(self):
        return hash(self._members)

    def __repr__(self):
        return f"SetWithUncertainty({list(self._members)!r})"

    def is_regular(self) -> bool:
        return all(d.is_delta() for d in self._members)

    def regular_set(self) -> FiniteSet:
        """The associated regular set when every member is a point mass."""
        if not self.is_regular():
            raise ValueError("set has members that are not point masses")
        return FiniteSet(d.mode() for d in self._members)

    def to_records(self) -> list[dict]:
        return [d.to_record() for d in self._members]

    @classmethod
    def from_records(cls, records: Sequence[dict]) -> "SetWithUncertainty":
        if not records:
            return cls.empty()
        return cls([DiscreteDensity.from_record(r) for r in records])


def from_points(points: Iterable[float]) -> SetWithUncertainty:
    """Set with uncertainty made of one point mass per (distinct) point."""
    pts = list(points)
    if len(set(pts)) != len(pts):
        raise DuplicatePoint("points must be distinct")
    return SetWithUncertainty([DiscreteDensity.delta(x) for x in pts])


def _anchors(members):
    a = np.array([d.mode() for d in members])
    if np.all(np.diff(a) > 0):
        return a
    a = np.array([d.quantile(0.5) for d in members])
    if np.all(np.diff(a) > 0):
        return a
    raise OverlappingSupports("cannot order members to repair overlapping supports")


def repair_overlaps(members: Sequence[DiscreteDensity]) -> list[DiscreteDensity]:
    """Make supports disjoint by cutting overlapping neighbours at midpoints.

    ``members`` must be given in their intended left-to-right order. Each
    member is anchored at its mode, falling back to the median if the modes
    are not strictly increasing. When neighbours ``i`` and ``i + 1`` overlap,
    member ``i`` keeps its atoms at or below the midpoint ``c`` of the two
    anchors and member ``i + 1`` keeps those above ``c``; kept masses are
    renormalized. Pairs that do not overlap are left alone. Every member
    keeps its anchor, so none becomes empty.
    """
    members = list(members)
    if len(members) < 2:
        return members
    anchors = _anchors(members)
    lo = np.full(len(members), -np.inf)
    hi = np.full(len(members), np.inf)
    for i in range(len(members) - 1):
        left_hi = members[i].support()[1]
        right_lo = members[i + 1].support()[0]
        if right_lo <= left_hi:
            c = (anchors[i] + anchors[i + 1]) / 2.0
            hi[i] = min(hi[i], c)
            lo[i + 1] = max(lo[i + 1], c)
    out = []
    for d, a, b in zip(members, lo, hi):
        keep = (d.points > a) & (d.points <= b) & (d.masses > 0)
        if np.all(keep | (d.masses == 0)):
            out.append(d)
        else:
            out.append(make_density(d.points[keep], d.masses[keep]))
    return out


def _as_array(S) -> np.ndarray:
    if isinstance(S, FiniteSet):
        return S.elements
    return FiniteSet(S).elements


def min_distance_to_set(x: float, S) -> float:
    """Distance from ``x`` to its nearest element of ``S``."""
    return float(np.min(np.abs(_as_array(S) - x)))


def min_wasserstein_to_set(f: DiscreteDensity, S: SetWithUncertainty, q: float = 1.0) -> float:
    if S.is_empty:
        raise EmptyMemberSet("distance to an empty set with uncertainty is undefined")
    return min(wasserstein(f, h, q) for h in S.members)


def hausdorff(S, T) -> float:
    """Largest minimal distance from an element of either set to the other."""
    s, t = _as_array(S), _as_array(T)
    gaps = np.abs(s[:, None] - t[None, :])
    return float(max(gaps.min(axis=1).max(), gaps.min(axis=0).max()))


def _mj_combine(d_t: np.ndarray, d_s: np.ndarray, p: float) -> float:
    # Power mean with weights 1/(2|T|) and 1/(2|S|); scaling by the largest
    # gap keeps large p free of overflow.
    if not p > 0:
        raise InvalidOrder(f"MJ order p must be positive, got {p}")
    top = max(d_t.max(), d_s.max())
    if top == 0:
        return 0.0
    total = np.sum((d_t / top) ** p) / (2 * d_t.size) + np.sum((d_s / top) ** p) / (
        2 * d_s.size
    )
    return float(top * total ** (1.0 / p))


def mj_distance(S, T, p: float = 1.0) -> float:
    """MJ_p semi-metric between two finite sets of reals."""
    s, t = _as_array(S), _as_array(T)
    gaps = np.abs(t[:, None] - s[None, :])
    return _mj_combine(gaps.min(axis=1), gaps.min(axis=0), p)


def wasserstein_matrix(S: SetWithUncertainty, T: SetWithUncertainty, q: float = 1.0) -> np.ndarray:
    """``W[j, i]`` is the Wasserstein distance between ``T[j]`` and ``S[i]``."""
    return np.array([[wasserstein(g, f, q) for f in S.members] for g in T.members])


def mj_wasserstein(
    S: SetWithUncertainty, T: SetWithUncertainty, p: float = 1.0, q: float = 1.0
) -> float:
    """MJ-Wasserstein semi-metric between two sets with uncertainty.

    Parameters
    ----------
    S, T : SetWithUncertainty
        Nonempty sets with uncertainty.
    p : float
        Order of the power mean over minimal distances, ``p > 0``.
    q : float
        Order of the Wasserstein distance between members, ``q >= 1``.

    Returns
    -------
    float
        ``(sum_j d_W(g_j, S)^p / 2l + sum_i d_W(f_i, T)^p / 2k)^(1/p)``.
    """
    if S.is_empty or T.is_empty:
        raise EmptyMemberSet("MJ-Wasserstein distance needs nonempty sets")
    if not q >= 1:
        raise InvalidOrder(f"Wasserstein order must be >= 1, got {q}")
    W = wasserstein_matrix(S, T, q)
    return _mj_combine(W.min(axis=1), W.min(axis=0), p)
