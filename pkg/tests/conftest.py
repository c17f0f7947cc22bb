import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from choquard import (
    Params,
    SolveOptions,
    build_grid,
    continue_exponent,
    default_initial_guess,
    ground_state,
)

from oracles import pekar_bvp_oracle


@dataclass(frozen=True)
class ContinuationRun:
    reports: list
    seconds: float


@pytest.fixture(scope="session")
def pekar_params():
    return Params(N=3, alpha=2.0, p=2.0, q=3.0, mu=1.0, lam=1.0)


@pytest.fixture(scope="session")
def pekar_grid():
    return build_grid(3, 30.0, 2048, scheme="graded")


@pytest.fixture(scope="session")
def pekar_report(pekar_params, pekar_grid):
    return ground_state(pekar_params, default_initial_guess(pekar_grid), SolveOptions())


@pytest.fixture(scope="session")
def pekar_oracle():
    return pekar_bvp_oracle()


@pytest.fixture(scope="session")
def n4_grid():
    return build_grid(4, 16.0, 4096, scheme="graded")


@pytest.fixture(scope="session")
def n4_continuation(n4_grid):
    start = Params(N=4, alpha=1.0, p=2.0, q=3.0, mu=1.0, lam=1.0)
    t0 = time.perf_counter()
    reports = continue_exponent(start, "p-upper", 6, SolveOptions(max_iter=600), n4_grid)
    return ContinuationRun(reports, time.perf_counter() - t0)


@pytest.fixture(scope="session")
def n4_continuation_lam0(n4_grid):
    start = Params(N=4, alpha=1.0, p=2.0, q=3.0, mu=1.0, lam=0.0)
    t0 = time.perf_counter()
    reports = continue_exponent(start, "p-upper", 6, SolveOptions(max_iter=600), n4_grid)
    return ContinuationRun(reports, time.perf_counter() - t0)


@pytest.fixture()
def rng():
    return np.random.default_rng(20240811)
