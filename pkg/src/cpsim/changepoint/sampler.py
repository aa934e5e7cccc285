"""Chain driver, posterior summaries and the posterior file format."""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from ..density import make_density
from ..errors import EmptyPosterior, NonFiniteInput, SeriesTooShort
from ..uncertain_sets import SetWithUncertainty
from .config import SamplerConfig
from .moves import (
    PiecewiseModel,
    birth_move,
    death_move,
    propose_segment_count,
    within_move,
)

MOVE_KINDS = ("birth", "death", "within", "gibbs")


@dataclass
class Posterior:
    """Post burn-in draws of the number of segments and change point locations."""

    n: int
    samples: list = field(default_factory=list)  # (m, changepoints tuple)
    m_histogram: dict = field(default_factory=dict)
    acceptance_rates: dict = field(default_factory=dict)
    config: SamplerConfig | None = None

    @property
    def modal_m(self) -> int:
        """Most frequent segment count; ties go to the smaller count."""
        if not self.m_histogram:
            raise EmptyPosterior("posterior holds no samples")
        top = max(self.m_histogram.values())
        return min(m for m, c in self.m_histogram.items() if c == top)

    def __eq__(self, other):
        if not isinstance(other, Posterior):
            return NotImplemented
        return (
            self.n == other.n
            and self.samples == other.samples
            and self.m_histogram == other.m_histogram
            and self.acceptance_rates == other.acceptance_rates
            and self.config == other.config
        )


def _check_series(x, config: SamplerConfig) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64).ravel()
    if not np.all(np.isfinite(x)):
        raise NonFiniteInput("series contains NaN or infinite values")
    if x.size < 2 * config.t_min:
        raise SeriesTooShort(
            f"series of length {x.size} is shorter than 2 * t_min = {2 * config.t_min}"
        )
    return x


def standardize(x: np.ndarray) -> np.ndarray:
    sd = x.std()
    z = x - x.mean()
    return z / sd if sd > 0 else z


def run_chain(series, config: SamplerConfig, rng: np.random.Generator | None = None) -> Posterior:
    """Run the reversible-jump sampler on one series.

    The series is centred and scaled to unit variance first; change point
    inference is invariant to that transformation apart from the diffuse
    intercept prior. Each iteration makes one segment-count move (birth or
    death) followed by one within-model move. Output is a deterministic
    function of ``series`` and ``config.seed`` unless ``rng`` is given.
    """
    x = standardize(_check_series(series, config))
    if rng is None:
        rng = np.random.default_rng(config.seed)
    model = PiecewiseModel(x, config)
    state = model.initial_state()
    tried = Counter()
    taken = Counter()
    samples = []
    t_min, M = config.t_min, config.max_segments
    for it in range(config.n_iterations):
        if M >= 2:
            m_p, _, _ = propose_segment_count(state.m, M, state.m2min(t_min), rng)
            kind = "birth" if m_p > state.m else "death"
            move = birth_move if kind == "birth" else death_move
            state, ok, _ = move(state, model, rng)
            tried[kind] += 1
            taken[kind] += ok
        gibbs_draws = min(state.m, 2)
        state, ok = within_move(state, model, rng)
        tried["within"] += 1
        taken["within"] += ok
        tried["gibbs"] += gibbs_draws
        taken["gibbs"] += gibbs_draws
        if it >= config.n_burnin:
            samples.append((state.m, tuple(int(v) for v in state.changepoints)))
    hist = Counter(m for m, _ in samples)
    rates = {k: (taken[k] / tried[k] if tried[k] else 0.0) for k in MOVE_KINDS}
    return Posterior(
        n=x.size,
        samples=samples,
        m_histogram=dict(sorted(hist.items())),
        acceptance_rates=rates,
        config=config,
    )


def changepoint_histograms(post: Posterior, m: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Per change point ``(locations, counts)`` over samples with ``m`` segments."""
    rows = np.array([cps for mm, cps in post.samples if mm == m], dtype=np.int64)
    out = []
    for j in range(m - 1):
        vals, counts = np.unique(rows[:, j], return_counts=True)
        out.append((vals, counts))
    return out


def modal_changepoint_set(post: Posterior, n: int | None = None) -> SetWithUncertainty:
    """Set with uncertainty of the change points at the modal segment count.

    Conditional on the modal count ``m0``, the sampled locations of the
    ``j``-th change point are turned into a histogram density. Overlapping
    neighbours are cut at the midpoint of their modes. A modal count of one
    gives :meth:`SetWithUncertainty.empty`.
    """
    if not post.samples:
        raise EmptyPosterior("posterior holds no samples")
    m0 = post.modal_m
    if m0 == 1:
        return SetWithUncertainty.empty()
    dens = [make_density(v, c) for v, c in changepoint_histograms(post, m0)]
    if n is not None:
        for d in dens:
            if d.points[0] <= 0 or d.points[-1] >= n:
                raise ValueError(f"change point outside the interior of a length-{n} series")
    return SetWithUncertainty(dens, repair=True)


# ---------------------------------------------------------------------------
# posterior documents


@dataclass(frozen=True)
class PosteriorRecord:
    """What gets persisted per series."""

    series_id: str
    m_histogram: dict
    modal_m: int
    changepoints: SetWithUncertainty
    acceptance_rates: dict
    config_echo: dict

    def to_dict(self) -> dict:
        return {
            "series_id": self.series_id,
            "m_histogram": {str(k): int(v) for k, v in sorted(self.m_histogram.items())},
            "modal_m": int(self.modal_m),
            "changepoints": self.changepoints.to_records(),
            "acceptance_rates": {k: float(v) for k, v in self.acceptance_rates.items()},
            "config_echo": dict(self.config_echo),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "PosteriorRecord":
        return cls(
            series_id=str(d["series_id"]),
            m_histogram={int(k): int(v) for k, v in d["m_histogram"].items()},
            modal_m=int(d["modal_m"]),
            changepoints=SetWithUncertainty.from_records(d["changepoints"]),
            acceptance_rates={k: float(v) for k, v in d["acceptance_rates"].items()},
            config_echo=dict(d["config_echo"]),
        )

    @classmethod
    def from_json(cls, text: str) -> "PosteriorRecord":
        return cls.from_dict(json.loads(text))

    @classmethod
    def from_posterior(cls, series_id: str, post: Posterior) -> "PosteriorRecord":
        return cls(
            series_id=series_id,
            m_histogram=dict(post.m_histogram),
            modal_m=post.modal_m,
            changepoints=modal_changepoint_set(post, post.n),
            acceptance_rates=dict(post.acceptance_rates),
            config_echo=post.config.to_record() if post.config else {},
        )
