from __future__ import annotations

from dataclasses import asdict, dataclass

from ..errors import ConfigError


@dataclass(frozen=True)
class SamplerConfig:
    """Settings of the reversible-jump sampler.

    Attributes
    ----------
    t_min : int
        Minimum segment length in observations.
    max_segments : int
        Largest number of segments ``M`` the chain may visit.
    n_iterations, n_burnin : int
        Total iterations and the number discarded at the start.
    n_basis : int
        Number of cosine terms ``J`` in each segment's log spectrum.
    prior_scale : float
        Scale of the inverse-gamma prior (shape 1) on each ``tau^2``.
    mixture_weight : float
        Probability ``pi`` of the global (uniform) relocation proposal.
    seed : int
        Root of every random stream used by the chain.
    """

    t_min: int = 40
    max_segments: int = 20
    n_iterations: int = 10000
    n_burnin: int = 2000
    n_basis: int = 7
    prior_scale: float = 1.0
    mixture_weight: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if self.t_min < 2:
            raise ConfigError(f"t_min must be at least 2, got {self.t_min}")
        if self.max_segments < 1:
            raise ConfigError(f"max_segments must be at least 1, got {self.max_segments}")
        if self.n_iterations < 1 or not 0 <= self.n_burnin < self.n_iterations:
            raise ConfigError(
                f"need 0 <= n_burnin < n_iterations, got {self.n_burnin} and {self.n_iterations}"
            )
        if self.n_basis < 0:
            raise ConfigError("n_basis must be nonnegative")
        if not self.prior_scale > 0:
            raise ConfigError("prior_scale must be positive")
        if not 0.0 <= self.mixture_weight <= 1.0:
            raise ConfigError("mixture_weight must lie in [0, 1]")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")

    def to_record(self) -> dict:
        return asdict(self)

    @classmethod
    def from_record(cls, record: dict) -> "SamplerConfig":
        return cls(**record)
