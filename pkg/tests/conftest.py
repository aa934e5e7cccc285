import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from cpsim import synthetic  # noqa: E402
from cpsim.changepoint import SamplerConfig  # noqa: E402
from cpsim.pipeline import PipelineConfig, write_price_csv  # noqa: E402

SMOKE_SAMPLER = SamplerConfig(t_min=20, max_segments=5, n_iterations=400, n_burnin=100)


def write_smoke_corpus(path: Path) -> Path:
    """Three return series with one variance shift each, at different times."""
    rng = np.random.default_rng(5)
    R = np.vstack([0.01 * synthetic.variance_shift(240, at, rng) for at in (80, 120, 160)])
    write_price_csv(synthetic.make_panel(R, ["AAA", "BBB", "CCC"]), path)
    return path


@pytest.fixture
def smoke_csv(tmp_path):
    return write_smoke_corpus(tmp_path / "prices.csv")


@pytest.fixture
def smoke_config(smoke_csv, tmp_path):
    return PipelineConfig(input=str(smoke_csv), out=str(tmp_path / "out"), seed=3, sampler=SMOKE_SAMPLER)
