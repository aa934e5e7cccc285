"""Reversible-jump moves over piecewise-stationary segmentations.

A state holds the partition ``xi = (0, xi_1, ..., xi_{m-1}, n)``; segment
``j`` (0-based) covers observations ``xi[j] .. xi[j+1] - 1``. Each segment has
an amplitude ``tau2[j]`` and log-spectrum coefficients ``beta[j]``.

Target density (up to a constant)::

    p(m) p(xi | m) prod_j L_j(beta_j) p(beta_j | tau2_j) p(tau2_j)

with ``p(m)`` uniform, ``p(xi | m)`` uniform over partitions whose segments
all have at least ``t_min`` points, ``beta_j`` Gaussian (intercept variance
1e4, cosine terms variance ``tau2_j``) and ``tau2_j`` inverse-gamma with
shape 1 and scale ``prior_scale``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from ..errors import NoRemovableChangePoint, NoSplittableSegment
from .config import SamplerConfig
from .whittle import GaussianApprox, SegmentData, log_beta_prior

TAU2_PRIOR_SHAPE = 1.0


@dataclass(frozen=True, eq=False)
class ChainState:
    xi: tuple
    tau2: tuple
    beta: tuple

    @property
    def m(self) -> int:
        return len(self.xi) - 1

    @property
    def changepoints(self) -> tuple:
        return self.xi[1:-1]

    def lengths(self) -> list[int]:
        return [b - a for a, b in zip(self.xi, self.xi[1:])]

    def m2min(self, t_min: int) -> int:
        return sum(1 for n in self.lengths() if n >= 2 * t_min)

    def is_valid(self, n: int, t_min: int) -> bool:
        return (
            self.xi[0] == 0
            and self.xi[-1] == n
            and all(L >= t_min for L in self.lengths())
            and len(self.tau2) == self.m
            and len(self.beta) == self.m
            and all(t > 0 for t in self.tau2)
        )

    def __eq__(self, other):
        if not isinstance(other, ChainState):
            return NotImplemented
        return (
            self.xi == other.xi
            and self.tau2 == other.tau2
            and all(np.array_equal(a, b) for a, b in zip(self.beta, other.beta))
        )


class PiecewiseModel:
    """Series, settings and caches shared by every move of one chain."""

    def __init__(self, x: np.ndarray, config: SamplerConfig):
        self.x = np.ascontiguousarray(x, dtype=np.float64)
        self.n = self.x.size
        self.config = config
        self._segments: dict = {}
        self._fits: dict = {}
        s = config.prior_scale
        self._tau2_const = TAU2_PRIOR_SHAPE * math.log(s) - math.lgamma(TAU2_PRIOR_SHAPE)

    def segment(self, a: int, b: int) -> SegmentData:
        seg = self._segments.get((a, b))
        if seg is None:
            seg = SegmentData(self.x, a, b, self.config.n_basis)
            self._segments[(a, b)] = seg
        return seg

    def fit(self, a: int, b: int, tau2: float) -> GaussianApprox:
        key = (a, b, tau2)
        g = self._fits.get(key)
        if g is None:
            if len(self._fits) > 200_000:
                self._fits.clear()
            g = self.segment(a, b).laplace(tau2)
            self._fits[key] = g
        return g

    def log_tau2_prior(self, tau2: float) -> float:
        return (
            self._tau2_const
            - (TAU2_PRIOR_SHAPE + 1.0) * math.log(tau2)
            - self.config.prior_scale / tau2
        )

    def log_segment(self, a: int, b: int, beta: np.ndarray, tau2: float) -> float:
        """Likelihood times the beta and tau2 priors for one segment."""
        return (
            self.segment(a, b).loglik(beta)
            + log_beta_prior(beta, tau2)
            + self.log_tau2_prior(tau2)
        )

    def log_partition_prior(self, m: int) -> float:
        """``log p(xi | m)``: uniform over the admissible partitions into ``m`` segments."""
        free = self.n - m * self.config.t_min
        return -float(gammaln(free + m) - gammaln(m) - gammaln(free + 1))

    def initial_state(self) -> ChainState:
        tau2 = self.config.prior_scale
        return ChainState((0, self.n), (tau2,), (self.fit(0, self.n, tau2).mean.copy(),))


def count_move_prob(k: int, m: int, M: int, m2min: int) -> float:
    """``q(m_p = k | m_c = m)`` for the segment-count proposal."""
    if k == m + 1:
        if m == 1:
            return 1.0
        if m >= M or m2min == 0:
            return 0.0
        return 0.5
    if k == m - 1:
        if m == 1:
            return 0.0
        if m >= M or m2min == 0:
            return 1.0
        return 0.5
    return 0.0


def propose_segment_count(m_c: int, M: int, m2min: int, rng: np.random.Generator):
    """Draw the proposed number of segments.

    Returns ``(m_p, forward_prob, reverse_prob)``. The reverse probability
    ``q(m_c | m_p)`` is evaluated assuming the proposed partition still has a
    segment of at least ``2 * t_min`` points whenever ``m_p`` could grow; a
    birth move that exhausts every splittable segment recomputes it with
    :func:`count_move_prob`.
    """
    if M < 2:
        raise ValueError("segment-count moves need max_segments >= 2")
    up = count_move_prob(m_c + 1, m_c, M, m2min)
    if up == 1.0 or (up > 0.0 and rng.random() < up):
        m_p = m_c + 1
    else:
        m_p = m_c - 1
    fwd = count_move_prob(m_p, m_c, M, m2min)
    rev = count_move_prob(m_c, m_p, M, 1)
    return m_p, fwd, rev


def split_tau2(tau2: float, u: float) -> tuple[float, float]:
    """Split one amplitude into two with the dimension-matching variable ``u``."""
    return u / (1.0 - u) * tau2, (1.0 - u) / u * tau2


def merge_tau2(tau2_left: float, tau2_right: float) -> tuple[float, float]:
    """Inverse of :func:`split_tau2`: geometric mean and the recovered ``u``."""
    tl, tr = math.sqrt(tau2_left), math.sqrt(tau2_right)
    return tl * tr, tl / (tl + tr)


def birth_jacobian(tau2: float, u: float) -> float:
    """``|d(tau2_left, tau2_right) / d(tau2, u)| = 2 tau2 / (u (1 - u))``."""
    return 2.0 * tau2 / (u * (1.0 - u))


def global_window(a: int, b: int, t_min: int) -> tuple[int, int]:
    """Feasible locations (inclusive) for a change point between ``a`` and ``b``."""
    return a + t_min, b - t_min


def local_kernel(t: int, centre: int, n_left: int, n_right: int, t_min: int) -> float:
    """Probability of the local relocation kernel moving ``centre`` to ``t``.

    Steps of at most one; a side whose segment already has ``t_min`` points
    cannot shrink, and the mass is spread evenly over the remaining options.
    """
    step = t - centre
    if abs(step) > 1:
        return 0.0
    left_free = n_left > t_min
    right_free = n_right > t_min
    if left_free and right_free:
        return 1.0 / 3.0
    if not left_free and right_free:
        return 0.5 if step >= 0 else 0.0
    if left_free and not right_free:
        return 0.5 if step <= 0 else 0.0
    return 1.0 if step == 0 else 0.0


def local_support(centre: int, n_left: int, n_right: int, t_min: int) -> list[int]:
    return [t for t in (centre - 1, centre, centre + 1) if local_kernel(t, centre, n_left, n_right, t_min) > 0]


def relocation_prob(t: int, centre: int, a: int, b: int, t_min: int, pi: float) -> float:
    """Mixture probability ``pi q1 + (1 - pi) q2`` of moving ``centre`` to ``t``."""
    lo, hi = global_window(a, b, t_min)
    q1 = 1.0 / (hi - lo + 1) if lo <= t <= hi else 0.0
    q2 = local_kernel(t, centre, centre - a, b - centre, t_min)
    return pi * q1 + (1.0 - pi) * q2


def draw_relocation(centre: int, a: int, b: int, t_min: int, pi: float, rng) -> int:
    if rng.random() < pi:
        lo, hi = global_window(a, b, t_min)
        return int(rng.integers(lo, hi + 1))
    opts = local_support(centre, centre - a, b - centre, t_min)
    return opts[int(rng.integers(len(opts)))]


def _uniform_open(rng) -> float:
    u = rng.random()
    while u == 0.0:
        u = rng.random()
    return u


def birth_log_ratio(model: PiecewiseModel, small: ChainState, big: ChainState, k: int, u: float) -> float:
    """Log acceptance ratio of the birth that splits segment ``k`` of ``small`` into ``big``.

    The death move from ``big`` back to ``small`` uses the negative of this
    value, so the pair satisfies detailed balance by construction.
    """
    cfg = model.config
    m = small.m
    a, b = small.xi[k], small.xi[k + 1]
    t = big.xi[k + 1]
    tau_old = small.tau2[k]
    tau_l, tau_r = big.tau2[k], big.tau2[k + 1]
    beta_old = small.beta[k]
    beta_l, beta_r = big.beta[k], big.beta[k + 1]

    log_target = (
        model.log_segment(a, t, beta_l, tau_l)
        + model.log_segment(t, b, beta_r, tau_r)
        - model.log_segment(a, b, beta_old, tau_old)
        + model.log_partition_prior(m + 1)
        - model.log_partition_prior(m)
    )
    m2_small = small.m2min(cfg.t_min)
    log_reverse = (
        math.log(count_move_prob(m, m + 1, cfg.max_segments, big.m2min(cfg.t_min)))
        - math.log(m)
        + model.fit(a, b, tau_old).logpdf(beta_old)
    )
    log_forward = (
        math.log(count_move_prob(m + 1, m, cfg.max_segments, m2_small))
        - math.log(m2_small * (b - a - 2 * cfg.t_min + 1))
        + model.fit(a, t, tau_l).logpdf(beta_l)
        + model.fit(t, b, tau_r).logpdf(beta_r)
    )
    return log_target + log_reverse - log_forward + math.log(birth_jacobian(tau_old, u))


def _accept(log_alpha: float, rng) -> bool:
    return log_alpha >= 0.0 or math.log(_uniform_open(rng)) < log_alpha


def birth_move(state: ChainState, model: PiecewiseModel, rng: np.random.Generator):
    """Propose splitting a segment at a new change point.

    Returns ``(new_state, accepted, log_alpha)``; ``new_state is state`` when
    the proposal is rejected.
    """
    cfg = model.config
    t_min = cfg.t_min
    lengths = state.lengths()
    splittable = [j for j, L in enumerate(lengths) if L >= 2 * t_min]
    if not splittable or state.m >= cfg.max_segments:
        raise NoSplittableSegment("no segment can be split under t_min and max_segments")
    k = splittable[int(rng.integers(len(splittable)))]
    a, b = state.xi[k], state.xi[k + 1]
    t = int(rng.integers(a + t_min, b - t_min + 1))
    u = _uniform_open(rng)
    tau_l, tau_r = split_tau2(state.tau2[k], u)
    beta_l = model.fit(a, t, tau_l).sample(rng)
    beta_r = model.fit(t, b, tau_r).sample(rng)
    big = ChainState(
        state.xi[: k + 1] + (t,) + state.xi[k + 1 :],
        state.tau2[:k] + (tau_l, tau_r) + state.tau2[k + 1 :],
        state.beta[:k] + (beta_l, beta_r) + state.beta[k + 1 :],
    )
    log_alpha = birth_log_ratio(model, state, big, k, u)
    if _accept(log_alpha, rng):
        return big, True, log_alpha
    return state, False, log_alpha


def merge_state(state: ChainState, k: int, beta: np.ndarray) -> tuple[ChainState, float]:
    """Remove change point ``xi[k + 1]``, merging segments ``k`` and ``k + 1``.

    Returns the merged state and the ``u`` that the reverse birth would use.
    """
    tau2, u = merge_tau2(state.tau2[k], state.tau2[k + 1])
    small = ChainState(
        state.xi[: k + 1] + state.xi[k + 2 :],
        state.tau2[:k] + (tau2,) + state.tau2[k + 2 :],
        state.beta[:k] + (beta,) + state.beta[k + 2 :],
    )
    return small, u


def death_move(state: ChainState, model: PiecewiseModel, rng: np.random.Generator):
    """Propose removing a uniformly chosen change point.

    Returns ``(new_state, accepted, log_alpha)``.
    """
    if state.m < 2:
        raise NoRemovableChangePoint("a single-segment partition has no change point to remove")
    k = int(rng.integers(state.m - 1))
    a, b = state.xi[k], state.xi[k + 2]
    tau2, _ = merge_tau2(state.tau2[k], state.tau2[k + 1])
    beta = model.fit(a, b, tau2).sample(rng)
    small, u = merge_state(state, k, beta)
    log_alpha = -birth_log_ratio(model, small, state, k, u)
    if _accept(log_alpha, rng):
        return small, True, log_alpha
    return state, False, log_alpha


def gibbs_tau2(beta: np.ndarray, prior_scale: float, rng: np.random.Generator) -> float:
    """Draw ``tau2`` from its inverse-gamma full conditional given ``beta``."""
    J = beta.size - 1
    shape = TAU2_PRIOR_SHAPE + 0.5 * J
    rate = prior_scale + 0.5 * float(beta[1:] @ beta[1:])
    return rate / rng.gamma(shape)


def within_move(state: ChainState, model: PiecewiseModel, rng: np.random.Generator):
    """Relocate one change point with fresh coefficients, then redraw amplitudes.

    The relocation and the new ``beta`` of the two adjacent segments are
    accepted or rejected jointly. The ``tau2`` of those segments is then
    drawn from its full conditional. A single-segment state only refreshes
    its coefficients and amplitude.

    Returns ``(new_state, accepted)``.
    """
    cfg = model.config
    xi, tau2, beta = list(state.xi), list(state.tau2), list(state.beta)
    if state.m == 1:
        n = model.n
        g = model.fit(0, n, tau2[0])
        prop = g.sample(rng)
        seg = model.segment(0, n)
        log_alpha = (
            seg.log_posterior(prop, tau2[0])
            - seg.log_posterior(beta[0], tau2[0])
            + g.logpdf(beta[0])
            - g.logpdf(prop)
        )
        accepted = _accept(log_alpha, rng)
        if accepted:
            beta[0] = prop
        tau2[0] = gibbs_tau2(beta[0], cfg.prior_scale, rng)
        return ChainState(tuple(xi), tuple(tau2), tuple(beta)), accepted

    k = int(rng.integers(1, state.m))
    a, c, b = xi[k - 1], xi[k], xi[k + 1]
    t = draw_relocation(c, a, b, cfg.t_min, cfg.mixture_weight, rng)
    tl, tr = tau2[k - 1], tau2[k]
    g_l, g_r = model.fit(a, t, tl), model.fit(t, b, tr)
    prop_l, prop_r = g_l.sample(rng), g_r.sample(rng)
    cur_l, cur_r = beta[k - 1], beta[k]
    log_alpha = (
        model.segment(a, t).log_posterior(prop_l, tl)
        + model.segment(t, b).log_posterior(prop_r, tr)
        - model.segment(a, c).log_posterior(cur_l, tl)
        - model.segment(c, b).log_posterior(cur_r, tr)
        + model.fit(a, c, tl).logpdf(cur_l)
        + model.fit(c, b, tr).logpdf(cur_r)
        - g_l.logpdf(prop_l)
        - g_r.logpdf(prop_r)
        + math.log(relocation_prob(c, t, a, b, cfg.t_min, cfg.mixture_weight))
        - math.log(relocation_prob(t, c, a, b, cfg.t_min, cfg.mixture_weight))
    )
    accepted = _accept(log_alpha, rng)
    if accepted:
        xi[k] = t
        beta[k - 1], beta[k] = prop_l, prop_r
    tau2[k - 1] = gibbs_tau2(beta[k - 1], cfg.prior_scale, rng)
    tau2[k] = gibbs_tau2(beta[k], cfg.prior_scale, rng)
    return ChainState(tuple(xi), tuple(tau2), tuple(beta)), accepted
