"""Segment likelihood: Whittle approximation with a cosine log-spectrum.

The log spectral density of a stationary segment is modeled as

    log f(nu) = beta_0 + sum_{s=1}^J beta_s * sqrt(2) * cos(2 pi s nu)

and the periodogram ordinates ``I_k`` at the Fourier frequencies
``nu_k = k / n`` enter through the Whittle log-likelihood

    sum_k w_k * (-log f(nu_k) - I_k / f(nu_k)),

summed over ``k = 0 .. n // 2`` with ``w_k = 1`` except ``w = 1/2`` at
frequency zero and at the Nyquist frequency (when ``n`` is even). That is half
the sum over all ``n`` DFT frequencies, so the weights of a segment add up to
``n / 2`` and partitions of one series always carry the same total weight.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from ..errors import NonFiniteInput, NumericalError, SegmentTooShort

INTERCEPT_PRIOR_VAR = 1e4
NEWTON_MAX_ITER = 50
NEWTON_GRAD_TOL = 1e-8
_LOG_2PI = math.log(2.0 * math.pi)


def periodogram(x: np.ndarray) -> np.ndarray:
    """``|DFT(x)_k|^2 / n`` for ``k = 0 .. n // 2``."""
    x = np.asarray(x, dtype=np.float64)
    return np.abs(np.fft.rfft(x)) ** 2 / x.size


def frequency_weights(n: int) -> np.ndarray:
    w = np.ones(n // 2 + 1)
    w[0] = 0.5
    if n % 2 == 0:
        w[-1] = 0.5
    return w


def cosine_basis(n: int, n_basis: int) -> np.ndarray:
    """Design matrix of shape ``(n // 2 + 1, n_basis + 1)``; column 0 is the intercept."""
    nu = np.arange(n // 2 + 1) / n
    s = np.arange(1, n_basis + 1)
    X = np.empty((nu.size, n_basis + 1))
    X[:, 0] = 1.0
    X[:, 1:] = math.sqrt(2.0) * np.cos(2.0 * math.pi * np.outer(nu, s))
    return X


def log_whittle_likelihood(segment, beta, basis=None, t_min: int = 2) -> float:
    """Whittle log-likelihood of ``segment`` when ``log f = basis @ beta``.

    ``basis`` defaults to :func:`cosine_basis` with ``len(beta) - 1``
    cosine terms.
    """
    x = np.asarray(segment, dtype=np.float64)
    if x.size < max(t_min, 2):
        raise SegmentTooShort(f"segment of length {x.size} is shorter than {max(t_min, 2)}")
    if not np.all(np.isfinite(x)):
        raise NonFiniteInput("segment contains non-finite values")
    beta = np.asarray(beta, dtype=np.float64)
    if basis is None:
        basis = cosine_basis(x.size, beta.size - 1)
    eta = basis @ beta
    I = periodogram(x)
    return float(np.dot(frequency_weights(x.size), -eta - I * np.exp(-eta)))


def log_beta_prior(beta: np.ndarray, tau2: float) -> float:
    """Gaussian prior: intercept variance 1e4, cosine coefficients variance ``tau2``."""
    J = beta.size - 1
    out = -0.5 * (_LOG_2PI + math.log(INTERCEPT_PRIOR_VAR)) - 0.5 * beta[0] ** 2 / INTERCEPT_PRIOR_VAR
    if J:
        out += -0.5 * J * (_LOG_2PI + math.log(tau2)) - 0.5 * float(beta[1:] @ beta[1:]) / tau2
    return float(out)


@dataclass(frozen=True)
class GaussianApprox:
    """``N(mean, precision^-1)`` with the Cholesky factor of the precision kept."""

    mean: np.ndarray
    chol: np.ndarray  # lower triangular, precision = chol @ chol.T
    half_logdet: float  # 0.5 * log det(precision)

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        z = rng.standard_normal(self.mean.size)
        return self.mean + solve_triangular(self.chol, z, lower=True, trans="T")

    def logpdf(self, beta: np.ndarray) -> float:
        r = self.chol.T @ (beta - self.mean)
        return float(-0.5 * self.mean.size * _LOG_2PI + self.half_logdet - 0.5 * r @ r)

    @property
    def covariance(self) -> np.ndarray:
        inv = solve_triangular(self.chol, np.eye(self.mean.size), lower=True)
        return inv.T @ inv


class SegmentData:
    """Periodogram, weights and design matrix of one segment ``x[a:b]``."""

    __slots__ = ("start", "stop", "I", "w", "X", "XT", "wI", "start_beta")

    def __init__(self, x: np.ndarray, start: int, stop: int, n_basis: int):
        seg = x[start:stop]
        n = seg.size
        self.start, self.stop = start, stop
        self.I = periodogram(seg)
        self.w = frequency_weights(n)
        self.X = cosine_basis(n, n_basis)
        self.XT = np.ascontiguousarray(self.X.T)
        self.wI = self.w * self.I
        b0 = np.zeros(n_basis + 1)
        b0[0] = math.log(max(self.wI.sum() / self.w.sum(), 1e-300))
        self.start_beta = b0

    def loglik(self, beta: np.ndarray) -> float:
        eta = self.X @ beta
        return float(-self.w @ eta - self.wI @ np.exp(-eta))

    def log_posterior(self, beta: np.ndarray, tau2: float) -> float:
        """Unnormalized log conditional posterior of ``beta`` (likelihood times prior)."""
        return self.loglik(beta) + log_beta_prior(beta, tau2)

    def laplace(self, tau2: float) -> GaussianApprox:
        """Gaussian approximation at the posterior mode of ``beta`` given ``tau2``.

        Newton iterations with step halving to keep every step an ascent
        step. The first fit of a segment starts from a flat spectrum at the
        mean periodogram level; later fits start from the previous mode.
        """
        X, XT, w, wI = self.X, self.XT, self.w, self.wI
        d = X.shape[1]
        prior_prec = np.full(d, 1.0 / tau2)
        prior_prec[0] = 1.0 / INTERCEPT_PRIOR_VAR
        beta = self.start_beta.copy()
        eta = X @ beta
        e = wI * np.exp(-eta)
        obj = float(-w @ eta - e.sum()) - 0.5 * float(prior_prec @ beta**2)
        for _ in range(NEWTON_MAX_ITER):
            grad = XT @ (e - w) - prior_prec * beta
            if np.abs(grad).max() < NEWTON_GRAD_TOL:
                break
            prec = (XT * e) @ X
            prec.flat[:: d + 1] += prior_prec
            step = np.linalg.solve(prec, grad)
            # objective differences below rounding level count as ascent
            slack = 1e-12 * (1.0 + abs(obj))
            t = 1.0
            while True:
                cand = beta + t * step
                eta_c = X @ cand
                e_c = wI * np.exp(-eta_c)
                obj_c = float(-w @ eta_c - e_c.sum()) - 0.5 * float(prior_prec @ cand**2)
                if obj_c >= obj - slack or t < 1e-6:
                    break
                t *= 0.5
            beta, eta, e, obj = cand, eta_c, e_c, obj_c
        prec = (XT * e) @ X
        prec.flat[:: d + 1] += prior_prec
        try:
            L = np.linalg.cholesky(prec)
        except np.linalg.LinAlgError as exc:  # pragma: no cover - precision is PD by construction
            raise NumericalError("Laplace precision is not positive definite") from exc
        if not np.all(np.isfinite(beta)):
            raise NumericalError("Laplace mode diverged")
        self.start_beta = beta
        return GaussianApprox(beta, L, float(np.sum(np.log(np.diag(L)))))
