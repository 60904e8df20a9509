import functools

import pytest
from hypothesis import HealthCheck, settings

from fbm_seqtest import ModelParams, SolverOptions, solve_boundary

settings.register_profile(
    "default", max_examples=60, deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@functools.lru_cache(maxsize=None)
def solved(hurst: float, n_grid: int = 500, sigma: float = 1.0, extend: bool = False):
    """Boundary tables are expensive; solve each configuration once per session."""
    params = ModelParams(mu=0.0, sigma=sigma, hurst=hurst)
    opts = SolverOptions(extend_below_t0=extend)
    return solve_boundary(params, n_grid, opts)


@pytest.fixture(scope="session")
def table_half():
    return solved(0.5, 250)
