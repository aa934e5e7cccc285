"""Synthetic series and panels with known structure, for tests and demos."""

from __future__ import annotations

import datetime as dt

import numpy as np

from .market_analytics import PricePanel


def white_noise(n: int, rng: np.random.Generator, sd: float = 1.0) -> np.ndarray:
    return sd * rng.standard_normal(n)


def variance_shift(n: int, at: int, rng: np.random.Generator, sd_before: float = 1.0, sd_after: float = 4.0) -> np.ndarray:
    """Gaussian noise whose standard deviation jumps at index ``at``."""
    x = rng.standard_normal(n)
    x[:at] *= sd_before
    x[at:] *= sd_after
    return x


def piecewise_ar1(breaks, coefs, sds, rng: np.random.Generator) -> np.ndarray:
    """Piecewise AR(1) series; segment ``j`` spans ``breaks[j] .. breaks[j+1] - 1``."""
    n = breaks[-1]
    x = np.zeros(n)
    prev = 0.0
    for (a, b), phi, sd in zip(zip(breaks, breaks[1:]), coefs, sds):
        for t in range(a, b):
            prev = phi * prev + sd * rng.standard_normal()
            x[t] = prev
    return x


def one_factor_returns(
    n_series: int,
    length: int,
    rng: np.random.Generator,
    loading: float = 0.3,
    crisis: tuple[int, int] | None = None,
    crisis_loading: float = 1.5,
    noise_sd: float = 0.01,
) -> np.ndarray:
    """Returns ``R[i, t] = b_i(t) f(t) + e_i(t)`` with one common factor.

    Loadings are ``loading`` times a per-series jitter, replaced by
    ``crisis_loading`` times the same jitter on the inclusive index range
    ``crisis``. Factor and idiosyncratic terms share the scale ``noise_sd``.
    """
    jitter = rng.uniform(0.8, 1.2, size=n_series)
    b = np.outer(jitter, np.full(length, loading))
    if crisis is not None:
        a, e = crisis
        b[:, a : e + 1] = np.outer(jitter, np.full(e - a + 1, crisis_loading))
    f = noise_sd * rng.standard_normal(length)
    eps = noise_sd * rng.standard_normal((n_series, length))
    return b * f[None, :] + eps


def prices_from_returns(returns: np.ndarray, start_price: float = 100.0) -> np.ndarray:
    R = np.asarray(returns)
    logp = np.concatenate([np.zeros((R.shape[0], 1)), np.cumsum(R, axis=1)], axis=1)
    return start_price * np.exp(logp)


def business_days(start: dt.date, count: int) -> list[dt.date]:
    out, d = [], start
    while len(out) < count:
        if d.weekday() < 5:
            out.append(d)
        d += dt.timedelta(days=1)
    return out


def make_panel(returns: np.ndarray, tickers=None, start=dt.date(2020, 1, 1)) -> PricePanel:
    P = prices_from_returns(returns)
    if tickers is None:
        tickers = [f"S{i:02d}" for i in range(P.shape[0])]
    return PricePanel(tuple(tickers), tuple(business_days(start, P.shape[1])), P)
