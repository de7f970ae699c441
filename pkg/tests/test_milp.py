import math

import pytest

from mhres.milp import (BINARY, CONTINUOUS, GE, INTEGER, LE, AbstractMilp, BackendUnavailable,
                        ModelError, SolverControls, solve)

from oracle import enumerate_optimum


def knapsack():
    m = AbstractMilp("k")
    a = m.add_var("a", BINARY, 0, 1)
    b = m.add_var("b", INTEGER, 0, 2)
    c = m.add_var("c", CONTINUOUS, 0, 1.5)
    m.add_obj(a, -5)
    m.add_obj(b, -4)
    m.add_obj(c, -1)
    m.add_constr([(a, 2), (b, 3), (c, 1)], LE, 7, "cap")
    return m


def test_knapsack_hand_optimum():
    # a=1, b=1 leaves 2 units of capacity, c is capped at 1.5
    out = solve(knapsack())
    assert out.status == "optimal"
    assert out.objective == pytest.approx(-10.5)
    assert out.x.tolist()[:2] == [1.0, 1.0]


def test_knapsack_matches_enumeration():
    z, n = enumerate_optimum(knapsack())
    assert z == pytest.approx(solve(knapsack()).objective, abs=1e-9)
    assert n == 6   # the capacity row has a continuous term, so nothing is pruned early


def test_infeasible_status():
    m = AbstractMilp()
    x = m.add_var("x", CONTINUOUS, 0, 1)
    m.add_constr([(x, 1)], GE, 2, "r")
    out = solve(m)
    assert out.status == "infeasible" and not out.has_solution
    assert math.isnan(out.gap)


def test_constant_objective_carried():
    m = knapsack()
    m.obj_const = 3.0
    assert solve(m).objective == pytest.approx(-7.5)


def test_duplicates_and_unknown_columns_rejected():
    m = knapsack()
    with pytest.raises(ModelError):
        m.add_var("a", BINARY, 0, 1)
    with pytest.raises(ModelError):
        m.add_constr([(0, 1)], LE, 1, "cap")
    with pytest.raises(ModelError):
        m.add_constr([(17, 1)], LE, 1, "new")


def test_fix_outside_bounds_rejected():
    m = knapsack()
    with pytest.raises(ModelError):
        m.fix("b", 3)
    m.fix("b", 2)
    assert (m.lb[1], m.ub[1]) == (2, 2)


def test_stats_and_lp_export():
    m = knapsack()
    assert m.stats() == {"constraints": 1, "integers": 1, "binaries": 1, "continuous": 1,
                         "nonzeros": 3}
    lp = m.to_lp()
    assert "Minimize" in lp and " cap:" in lp and "Binary" in lp and "General" in lp


def test_gap_control_accepted():
    out = solve(knapsack(), SolverControls(gap=1e-3, time_limit=10))
    assert out.has_solution


def test_unknown_backend():
    with pytest.raises(BackendUnavailable):
        solve(knapsack(), backend="nope")
