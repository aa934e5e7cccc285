"""Equity panel analytics: windowed correlations, rolling PCA spectrum and
normalized price trajectories."""

from __future__ import annotations

import datetime as dt
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DataError, NonPositivePrice, WindowTooShort, ZeroVarianceSeries


class ZeroVarianceWarning(UserWarning):
    pass


class NegativeEigenvalueWarning(UserWarning):
    pass


@dataclass(frozen=True, eq=False)
class PricePanel:
    """``prices[i, t]`` is the price of ``tickers[i]`` on ``dates[t]``."""

    tickers: tuple
    dates: tuple
    prices: np.ndarray

    def __post_init__(self):
        p = np.array(self.prices, dtype=np.float64)
        if p.ndim != 2 or p.shape != (len(self.tickers), len(self.dates)):
            raise DataError(f"price array shape {p.shape} does not match tickers x dates")
        if not np.all(np.isfinite(p)):
            raise DataError("price panel has missing or non-finite cells")
        if np.any(p <= 0):
            raise NonPositivePrice("all prices must be positive")
        if any(b <= a for a, b in zip(self.dates, self.dates[1:])):
            raise DataError("dates must be strictly increasing")
        p.setflags(write=False)
        object.__setattr__(self, "prices", p)
        object.__setattr__(self, "tickers", tuple(self.tickers))
        object.__setattr__(self, "dates", tuple(self.dates))

    @property
    def n_series(self) -> int:
        return len(self.tickers)

    def __eq__(self, other):
        if not isinstance(other, PricePanel):
            return NotImplemented
        return (
            self.tickers == other.tickers
            and self.dates == other.dates
            and np.array_equal(self.prices, other.prices)
        )


@dataclass(frozen=True, eq=False)
class ReturnPanel:
    tickers: tuple
    dates: tuple
    returns: np.ndarray

    @property
    def n_series(self) -> int:
        return len(self.tickers)

    @property
    def length(self) -> int:
        return self.returns.shape[1]


@dataclass(frozen=True)
class WindowSpec:
    """Inclusive index window ``[start, end]``."""

    start: int
    end: int

    def __post_init__(self):
        if not 0 <= self.start <= self.end:
            raise DataError(f"invalid window [{self.start}, {self.end}]")

    def __len__(self):
        return self.end - self.start + 1

    def slice(self) -> slice:
        return slice(self.start, self.end + 1)

    def check(self, length: int) -> "WindowSpec":
        if self.end >= length:
            raise DataError(f"window [{self.start}, {self.end}] exceeds series length {length}")
        return self


def resolve_window(dates: Sequence[dt.date], start: dt.date, end: dt.date) -> WindowSpec:
    """Map a calendar range onto index positions, snapping to the nearest date present."""
    if end < start:
        raise DataError(f"window ends ({end}) before it starts ({start})")
    ords = np.array([d.toordinal() for d in dates])

    def nearest(d):
        return int(np.argmin(np.abs(ords - d.toordinal())))

    a, b = nearest(start), nearest(end)
    return WindowSpec(a, max(a, b))


def log_returns(panel: PricePanel) -> ReturnPanel:
    """``R_i(t) = log(p_i(t) / p_i(t-1))`` for ``t = 1 .. T``."""
    p = np.asarray(panel.prices, dtype=np.float64)
    if np.any(p <= 0):
        raise NonPositivePrice("log returns need positive prices")
    r = np.log(p[:, 1:] / p[:, :-1])
    return ReturnPanel(panel.tickers, panel.dates[1:], r)


def correlation_matrix(returns, w: WindowSpec | None = None, zero_variance: str = "zero") -> np.ndarray:
    """Pearson correlations of the return series over the window ``w``.

    Series that are constant on the window have no defined correlation; with
    ``zero_variance="zero"`` their off-diagonal entries are set to 0 and a
    :class:`ZeroVarianceWarning` is issued, with ``"raise"`` a
    :class:`ZeroVarianceSeries` error is raised instead. The diagonal is
    always exactly 1 and entries are clipped to [-1, 1].
    """
    R = returns.returns if isinstance(returns, ReturnPanel) else np.asarray(returns, dtype=np.float64)
    if w is not None:
        R = R[:, w.check(R.shape[1]).slice()]
    if R.shape[1] < 3:
        raise WindowTooShort(f"correlation window has {R.shape[1]} points, need at least 3")
    dev = R - R.mean(axis=1, keepdims=True)
    ss = np.sqrt(np.einsum("ij,ij->i", dev, dev))
    flat = ss == 0
    if flat.any():
        if zero_variance == "raise":
            raise ZeroVarianceSeries(f"series {np.flatnonzero(flat).tolist()} are constant on the window")
        warnings.warn(
            f"series {np.flatnonzero(flat).tolist()} are constant on the window; correlations set to 0",
            ZeroVarianceWarning,
            stacklevel=2,
        )
        ss = np.where(flat, 1.0, ss)
    u = dev / ss[:, None]
    rho = np.clip(u @ u.T, -1.0, 1.0)
    rho[flat, :] = 0.0
    rho[:, flat] = 0.0
    rho = (rho + rho.T) / 2.0
    np.fill_diagonal(rho, 1.0)
    return rho


@dataclass(frozen=True)
class Histogram:
    edges: np.ndarray
    counts: np.ndarray

    def mean(self) -> float:
        mids = (self.edges[:-1] + self.edges[1:]) / 2.0
        return float(np.dot(mids, self.counts) / self.counts.sum())

    def to_csv(self) -> str:
        lines = ["bin_left,bin_right,count"]
        for lo, hi, c in zip(self.edges[:-1], self.edges[1:], self.counts):
            lines.append(f"{float(lo)!r},{float(hi)!r},{int(c)}")
        return "\n".join(lines) + "\n"


def upper_coefficients(rho: np.ndarray) -> np.ndarray:
    i, j = np.triu_indices(rho.shape[0], k=1)
    return np.asarray(rho)[i, j]


def correlation_histogram(rho: np.ndarray, bins: int = 20) -> Histogram:
    """Histogram of the ``i < j`` correlation coefficients on equal-width bins over [-1, 1]."""
    rho = np.asarray(rho)
    if rho.shape[0] < 2:
        raise DataError("need at least two series")
    if bins < 1:
        raise DataError("bins must be positive")
    counts, edges = np.histogram(upper_coefficients(rho), bins=bins, range=(-1.0, 1.0))
    return Histogram(edges, counts)


@dataclass(frozen=True)
class RollingSpectrum:
    """Normalized eigenvalue magnitudes ``mu[t, i]`` of rolling correlation matrices.

    Row ``t`` belongs to the window starting at return index ``starts[t]``.
    ``negative_eigenvalues`` lists ``(start, value)`` for every negative
    eigenvalue met, which for correlation matrices only arise from rounding.
    """

    starts: np.ndarray
    mu: np.ndarray
    window: int
    negative_eigenvalues: tuple = ()

    def to_csv(self, dates: Sequence | None = None) -> str:
        k = self.mu.shape[1]
        lines = ["date," + ",".join(f"mu_{i + 1}" for i in range(k))]
        for s, row in zip(self.starts, self.mu):
            key = str(dates[s]) if dates is not None else str(int(s))
            lines.append(key + "," + ",".join(repr(float(v)) for v in row))
        return "\n".join(lines) + "\n"


def eigen_share(rho: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues sorted by decreasing magnitude and their shares of the total magnitude."""
    lam = np.linalg.eigvalsh(rho)
    order = np.argsort(-np.abs(lam), kind="stable")
    lam = lam[order]
    mag = np.abs(lam)
    return lam, mag / mag.sum()


def rolling_pca(returns, window: int = 45, top_k: int | None = 10) -> RollingSpectrum:
    """Explanatory-variance shares over rolling windows ``[t, t + window - 1]``.

    Parameters
    ----------
    returns : ReturnPanel or array of shape (N, T)
    window : int
        Window length in observations, at least 3.
    top_k : int or None
        Number of leading shares kept per window; ``None`` keeps all ``N``.
    """
    R = returns.returns if isinstance(returns, ReturnPanel) else np.asarray(returns, dtype=np.float64)
    N, T = R.shape
    if window < 3:
        raise WindowTooShort("rolling PCA window must have at least 3 points")
    if T < window:
        raise WindowTooShort(f"series of length {T} is shorter than the window {window}")
    k = N if top_k is None else min(top_k, N)
    starts = np.arange(T - window + 1)
    mu = np.empty((starts.size, k))
    negatives = []
    for row, t in enumerate(starts):
        rho = correlation_matrix(R[:, t : t + window])
        lam, share = eigen_share(rho)
        negatives.extend((int(t), float(v)) for v in lam[lam < 0])
        mu[row] = share[:k]
    if negatives:
        worst = min(v for _, v in negatives)
        warnings.warn(
            f"{len(negatives)} negative eigenvalues met (most negative {worst:.3g})",
            NegativeEigenvalueWarning,
            stacklevel=2,
        )
    return RollingSpectrum(starts, mu, window, tuple(negatives))


def normalized_trajectory(panel, i: int, w: WindowSpec) -> np.ndarray:
    """Prices of series ``i`` on ``w`` divided by their sum (their L1 norm)."""
    P = panel.prices if isinstance(panel, PricePanel) else np.asarray(panel, dtype=np.float64)
    seg = P[i, w.check(P.shape[1]).slice()]
    if np.any(seg <= 0):
        raise NonPositivePrice("trajectories need positive prices")
    return seg / seg.sum()


def flat_trajectory(length: int) -> np.ndarray:
    return np.full(length, 1.0 / length)


def _trajectories(P: np.ndarray) -> np.ndarray:
    return P / P.sum(axis=1, keepdims=True)


def trajectory_distance_matrix(panel, w: WindowSpec) -> np.ndarray:
    """``D[i, j] = ||g_i - g_j||_1`` between normalized trajectories on ``w``."""
    P = panel.prices if isinstance(panel, PricePanel) else np.asarray(panel, dtype=np.float64)
    seg = P[:, w.check(P.shape[1]).slice()]
    if np.any(seg <= 0):
        raise NonPositivePrice("trajectories need positive prices")
    g = _trajectories(seg)
    D = np.abs(g[:, None, :] - g[None, :, :]).sum(axis=2)
    np.fill_diagonal(D, 0.0)
    return D


def trajectory_dispersion(panel, w: WindowSpec) -> float:
    """Largest L1 distance of a normalized trajectory from the flat trajectory."""
    P = panel.prices if isinstance(panel, PricePanel) else np.asarray(panel, dtype=np.float64)
    g = _trajectories(P[:, w.check(P.shape[1]).slice()])
    return float(np.abs(g - 1.0 / g.shape[1]).sum(axis=1).max())


def frobenius(A: np.ndarray) -> float:
    return float(np.sqrt(np.sum(np.asarray(A) ** 2)))


def rolling_trajectory_norm(panel, window: int = 45) -> np.ndarray:
    """Frobenius norm of the trajectory distance matrix on each window ``[t, t + window - 1]``.

    One value per feasible start ``t`` over the price dates.
    """
    P = panel.prices if isinstance(panel, PricePanel) else np.asarray(panel, dtype=np.float64)
    length = P.shape[1]
    if window < 1 or length < window:
        raise WindowTooShort(f"{length} prices cannot fill a window of {window}")
    return np.array(
        [frobenius(trajectory_distance_matrix(P, WindowSpec(t, t + window - 1))) for t in range(length - window + 1)]
    )
