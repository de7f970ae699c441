import math
from fractions import Fraction
from types import SimpleNamespace

import pytest
from hypothesis import given, settings, strategies as st

from mhres.audit import check_feasibility
from mhres.heuristics import (HeuristicError, IterationRecord, Run, Sfr3Params, compare, goodness_ratio,
                              log_to_csv, parse_strategy, sfr3, sfr3_node_set, srh, time_ratio)
from mhres.scengen import synthetic_instance
from mhres.tree import MultiHorizonTree

from conftest import DESK, DESK_SEEDS, EXACT, desk, optimum


def _close(a, b, rel=1e-6):
    return abs(a - b) <= rel * max(1.0, abs(b))


@pytest.mark.parametrize("seed", DESK_SEEDS)
@pytest.mark.parametrize("variant", ["nod", "rn", "sd"])
def test_full_horizon_is_monolithic(seed, variant):
    inst = desk(seed)
    sol, log = sfr3(inst, variant, Sfr3Params(e_hat=inst.tree.n_stages, controls=EXACT))
    assert len(log) == 1
    assert _close(sol.objective, optimum(seed, variant)[1].objective)


@pytest.mark.parametrize("params", [Sfr3Params(1, 0, 0.0), Sfr3Params(2, 1, 1 / 3, seed=4),
                                    Sfr3Params(1, 2, 0.5, seed=1)])
def test_sfr3_feasible_and_above_optimum(params):
    params.controls = EXACT
    inst = desk(1)
    for v in ("nod", "sd"):
        sol, _ = sfr3(inst, v, params)
        assert check_feasibility(inst, sol, v).passed
        assert sol.objective >= optimum(1, v)[1].objective - 1e-6 * abs(sol.objective)


def test_full_relaxation_selects_everything():
    inst = desk(0)
    E = inst.tree.n_stages
    full = sfr3_node_set(inst, Sfr3Params(E, 0), 1, 0)
    relaxed = sfr3_node_set(inst, Sfr3Params(1, E - 1, 1.0, seed=9), 1, 0)
    assert full == relaxed
    assert set(full) == set(range(inst.tree.n_nodes))


@settings(max_examples=60, deadline=None)
@given(E=st.integers(2, 4), b=st.integers(1, 3), e_hat=st.integers(1, 3), e_hat_r=st.integers(0, 3),
       phi=st.floats(0, 1), seed=st.integers(0, 50), data=st.data())
def test_rescaled_weights_sum_to_one(E, b, e_hat, e_hat_r, phi, seed, data):
    e_hat = min(e_hat, E)
    tree = MultiHorizonTree.balanced(E, b)
    inst = SimpleNamespace(tree=tree)
    kappa = data.draw(st.integers(1, E - e_hat + 1))
    r = data.draw(st.sampled_from(tree.nodes_at_stage(kappa)))
    w = sfr3_node_set(inst, Sfr3Params(e_hat, e_hat_r, phi, seed), kappa, r)
    assert w[r] == 1
    depth = max(tree.node_stage[n] for n in w)
    for e in range(kappa, depth + 1):
        assert sum(v for n, v in w.items() if tree.node_stage[n] == e) == Fraction(1)
    for n in w:   # closed under parents up to r
        assert n == r or tree.parents[n] in w


def test_selection_is_seeded():
    inst = desk(2)
    p = Sfr3Params(1, 2, 0.4, seed=11)
    assert sfr3_node_set(inst, p, 1, 0) == sfr3_node_set(inst, p, 1, 0)
    a, _ = sfr3(inst, "rn", Sfr3Params(1, 1, 0.5, seed=3, controls=EXACT))
    b, _ = sfr3(inst, "rn", Sfr3Params(1, 1, 0.5, seed=3, controls=EXACT))
    assert a.to_values(inst) == b.to_values(inst)


@pytest.mark.parametrize("variant", ["nod", "sd"])
def test_srh_two_stages_is_monolithic(variant):
    inst = synthetic_instance("custom", seed=5, **{**DESK, "E": 2, "branching": 3})
    from mhres.milp import solve
    from mhres.model import build_model
    z = solve(build_model(inst, variant), EXACT).objective
    sol, log = srh(inst, variant, EXACT)
    assert _close(sol.objective, z)
    assert check_feasibility(inst, sol, variant).passed


def test_srh_feasible_on_desk():
    inst = desk(0)
    sol, log = srh(inst, "rn", EXACT)
    assert check_feasibility(inst, sol, "rn").passed
    assert sol.objective >= optimum(0, "rn")[1].objective - 1e-6 * abs(sol.objective)
    assert [r.kappa for r in log] == sorted(r.kappa for r in log)


def test_deterministic_instance_all_methods_agree():
    inst = synthetic_instance("custom", seed=2, **{**DESK, "branching": 1, "op_scenarios": 1})
    from mhres.milp import solve
    from mhres.model import build_model
    z = solve(build_model(inst, "nod"), EXACT).objective
    z_srh = srh(inst, "nod", EXACT)[0].objective
    # on a chain every look-ahead keeps the single child, whatever phi is
    E = inst.tree.n_stages
    z_sfr3 = sfr3(inst, "nod", Sfr3Params(1, E - 1, 0.0, controls=EXACT))[0].objective
    assert _close(z_srh, z) and _close(z_sfr3, z)
    assert sfr3(inst, "nod", Sfr3Params(1, 0, 0.0, controls=EXACT))[0].objective >= z - 1e-6 * abs(z)


def test_goodness_and_time_ratios():
    assert round(goodness_ratio(20912766, 21285417), 3) == 0.982
    assert round(time_ratio(2367, 20301), 3) == 0.117
    out = compare([Run("sfr3", 10.0, 1.0), Run("srh", 10.0, 4.0)], best_bound=8.0)
    assert out["GR"] == 1.0 and out["TR"] == 0.25
    assert out["rows"][0]["gap"] == pytest.approx(0.25)


def test_compare_without_pair_or_bound():
    out = compare([Run("sfr3", 5.0, 1.0)])
    assert math.isnan(out["GR"]) and math.isnan(out["rows"][0]["gap"])


def test_compare_rejects_mismatched_instances():
    with pytest.raises(ValueError, match="mismatched"):
        compare([Run("sfr3", 1, 1, "a.json", "nod"), Run("srh", 1, 1, "b.json", "nod")])


@pytest.mark.parametrize("text,want", [
    ("weak-myopic", (1, 0, 0.0)), ("stronger-myopic", (2, 0, 0.0)),
    ("multistage-myopic:4", (4, 0, 0.0)), ("relaxed:2,1,1/3", (2, 1, 1 / 3)),
])
def test_parse_strategy(text, want):
    p = parse_strategy(text, seed=7)
    assert (p.e_hat, p.e_hat_r, p.phi) == want and p.seed == 7


def test_parse_strategy_unknown():
    with pytest.raises(ValueError):
        parse_strategy("greedy")


def test_label_is_short():
    assert Sfr3Params(2, 1, 1 / 3).label() == "(2,1,0.3333)"


@pytest.mark.parametrize("params", [Sfr3Params(0, 0), Sfr3Params(4, 0), Sfr3Params(1, 1, 1.5)])
def test_invalid_params(params):
    with pytest.raises(ValueError):
        sfr3(desk(0), "nod", params)


def test_log_csv_is_ordered():
    log = [IterationRecord(2, 3, 4, 10, 0.5, 1.0, "optimal"), IterationRecord(1, 0, 7, 20, 0.25, 2.0, "optimal")]
    lines = log_to_csv(log).splitlines()
    assert lines[0] == "kappa,root,nodes,vars,time,objective,status"
    assert lines[1].startswith("1,0,7,20,")


def test_infeasible_subproblem_names_iteration(monkeypatch):
    import mhres.heuristics as h
    real = h._solve_views

    def flaky(inst, variant, views, fixings, controls, name):
        m, out = real(inst, variant, views, fixings, controls, name)
        if name.startswith("sfr3-k2"):
            out.status, out.x = "infeasible", None
        return m, out

    monkeypatch.setattr(h, "_solve_views", flaky)
    with pytest.raises(HeuristicError) as info:
        sfr3(desk(0), "nod", Sfr3Params(1, 0, 0.0))
    assert info.value.kappa == 2 and info.value.root in desk(0).tree.nodes_at_stage(2)
