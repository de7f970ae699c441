import functools
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from mhres.milp import SolverControls, solve  # noqa: E402
from mhres.model import build_model  # noqa: E402
from mhres.scengen import synthetic_instance  # noqa: E402

# three-stage desk instance: 7 strategic nodes, 4 scenarios, solves in well under a second
DESK = dict(E=3, branching=2, op_scenarios=2, periods=4, I=2, B=1, J1=2, J2=2, H1=1, H2=1)
DESK_SEEDS = (0, 1, 2)
EXACT = SolverControls(gap=1e-9)


@functools.lru_cache(maxsize=None)
def desk(seed: int, **over):
    return synthetic_instance("custom", seed=seed, **{**DESK, **over})


@functools.lru_cache(maxsize=None)
def optimum(seed: int, variant: str):
    inst = desk(seed)
    m = build_model(inst, variant)
    out = solve(m, EXACT)
    assert out.status == "optimal"
    return m, out


@pytest.fixture
def inst0():
    return desk(0)
