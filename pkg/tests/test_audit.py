import copy

import numpy as np
import pytest

from mhres.audit import check_feasibility, discomfort_statistics, nodal_discomfort, sd_audit
from mhres.solution import solution_from_outcome

from conftest import desk, optimum


def _optimal(seed, variant):
    m, out = optimum(seed, variant)
    return desk(seed), copy.deepcopy(solution_from_outcome(desk(seed), m, out))


def _duplicate_start(inst, sol):
    """Add a second start for the first deferrable load in scenario 0 of the root."""
    d = sol.operational[0]["delta"]
    started = int(np.argmax(d[0, 0]))
    other = next(t for t in inst.feasible_starts(0, 1) if t != started)
    d[0, 0, other] = 1.0


def test_optimal_solution_passes():
    inst, sol = _optimal(0, "sd")
    rep = check_feasibility(inst, sol, "sd")
    assert rep.passed and rep.tags() == set()


def test_duplicated_start_is_4d():
    inst, sol = _optimal(0, "nod")
    _duplicate_start(inst, sol)
    rep = check_feasibility(inst, sol, "nod")
    assert not rep.passed
    assert "4d" in rep.tags()
    assert any(str(v).startswith("(4d)") for v in rep.violations)


def test_battery_over_capacity_is_3h():
    inst, sol = _optimal(1, "nod")
    sol.operational[0]["y"][0, 0, 0] = inst.bess[0].unit_kwh * (sol.strategic["xp_tilde"][0, 0] + 1) + 1
    assert "3h" in check_feasibility(inst, sol, "nod").tags()


def test_fractional_units_flagged():
    inst, sol = _optimal(1, "nod")
    sol.strategic["x_tilde"][0, 0] += 0.5
    assert not check_feasibility(inst, sol, "nod").passed


def test_sd_frequency_excess_is_7d():
    inst, sol = _optimal(2, "sd")
    sol.operational[0]["eta"][:] = 1.0
    assert "7d" in check_feasibility(inst, sol, "sd").tags()


def test_sd_rows_ignored_for_rn():
    inst, sol = _optimal(2, "rn")
    assert check_feasibility(inst, sol, "rn").passed


def test_sd_audit_on_optimal_sd_solutions():
    for seed in (0, 1, 2):
        inst, sol = _optimal(seed, "sd")
        assert sd_audit(inst, sol) == []
        assert discomfort_statistics(inst, sol)["max_violation_frequency"] <= 0.05 + 1e-9


def test_sd_audit_catches_heavy_curtailment():
    inst, sol = _optimal(0, "sd")
    op = sol.operational[0]
    for j, el in enumerate(inst.loads.elastic):
        op["dl1"][j] = el.max_curtail[0][None, :]
    if not sd_audit(inst, sol):
        pytest.skip("full curtailment stays under the threshold on this seed")
    assert any("node 0" in s for s in sd_audit(inst, sol))


def test_nodal_rows_cover_tree():
    inst, sol = _optimal(0, "rn")
    rows = nodal_discomfort(inst, sol)
    assert [r["node"] for r in rows] == list(range(inst.tree.n_nodes))
    assert all(0.0 <= r["violation_frequency"] <= 1.0 for r in rows)
    assert all(r["expected"] <= inst.discomfort.expected_cap[inst.tree.node_stage[r["node"]] - 1] + 1e-6
               for r in rows)
