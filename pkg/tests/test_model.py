import numpy as np
import pytest

from mhres.audit import check_feasibility, evaluate_cost, scenario_discomfort
from mhres.milp import ModelError, solve
from mhres.model import Variant, build_model, node_variables
from mhres.solution import MissingValues, Solution, solution_from_outcome

from conftest import DESK_SEEDS, desk, optimum
from micro import deferrable_load, elastic_load, one_node
from oracle import enumerate_optimum


@pytest.mark.parametrize("text,v", [("nod", Variant.NOD), ("No-D", Variant.NOD), ("rn", Variant.RN),
                                    ("SD", Variant.SD)])
def test_variant_parse(text, v):
    assert Variant.parse(text) is v


def test_empty_system_costs_nothing():
    inst = one_node(load_kw=0.0)
    out = solve(build_model(inst, "nod"))
    assert out.objective == pytest.approx(0.0, abs=1e-12)


def test_one_kwh_at_thirty_cents():
    inst = one_node(load_kw=1.0, price=0.3)
    m = build_model(inst, "nod")
    out = solve(m)
    assert out.objective == pytest.approx(0.3)
    z, _ = enumerate_optimum(build_model(inst, "nod"))
    assert z == pytest.approx(0.3)
    assert evaluate_cost(inst, solution_from_outcome(inst, m, out))["total"] == pytest.approx(0.3)


def test_residual_value_of_one_leaf_panel():
    inst = one_node(load_kw=0.0, pv=True)
    sol = Solution.empty(inst, "nod")
    sol.strategic["x"][0, 0] = 1
    sol.strategic["x_tilde"][0, 0] = 1
    c = evaluate_cost(inst, sol)
    assert c["residual"] == pytest.approx(50.0)     # V2 = 50 at the only (leaf) node, weight 1
    assert c["total"] == pytest.approx(100.0 - 50.0)


def test_scenario_discomfort_by_hand():
    inst = one_node(load_kw=0.0, hours=(1, 1), elastic=[elastic_load(2, D1=5.0)],
                    deferrable=[deferrable_load(2, tau=0, rate=3.0)])
    sol = Solution.empty(inst, "rn")
    assert scenario_discomfort(inst, sol, 0, 0) == 0.0
    sol.operational[0]["dl1"][0, 0, 1] = 2.0
    assert scenario_discomfort(inst, sol, 0, 0) == pytest.approx(10.0)
    sol.operational[0]["delta"][0, 0, 1] = 1.0    # one period late at 3 per period
    assert scenario_discomfort(inst, sol, 0, 0) == pytest.approx(13.0)


def test_mixed_discomfort_matches_term_sum():
    inst = desk(2)
    m, out = optimum(2, "rn")
    sol = solution_from_outcome(inst, m, out)
    rng = np.random.default_rng(0)
    for n in range(inst.tree.n_nodes):
        op = sol.operational[n]
        op["dl1"][:] = rng.random(op["dl1"].shape)
        e = inst.tree.node_stage[n]
        hours = inst.tree.stage(e).hours
        for pi in range(inst.tree.n_op_scenarios(e)):
            want = 0.0
            for j, el in enumerate(inst.loads.elastic):
                want += sum(hours[t] * el.discomfort[e - 1][t] * op["dl1"][j, pi, t] for t in el.window[e - 1])
            for j, d in enumerate(inst.loads.deferrable):
                want += sum(d.discomfort[e - 1][t] * op["delta"][j, pi, t] for t in d.window[e - 1])
            assert scenario_discomfort(inst, sol, n, pi) == pytest.approx(want)


@pytest.mark.parametrize("seed", DESK_SEEDS)
@pytest.mark.parametrize("variant", ["nod", "rn", "sd"])
def test_objective_parity_and_audit(seed, variant):
    inst = desk(seed)
    m, out = optimum(seed, variant)
    sol = solution_from_outcome(inst, m, out)
    assert evaluate_cost(inst, sol)["total"] == pytest.approx(out.objective, rel=1e-6)
    assert check_feasibility(inst, sol, variant).passed
    assert out.objective >= out.best_bound - 1e-6 * abs(out.objective)


@pytest.mark.parametrize("seed", DESK_SEEDS)
def test_variant_nesting(seed):
    z = [optimum(seed, v)[1].objective for v in ("nod", "rn", "sd")]
    assert z[0] <= z[1] + 1e-9 and z[1] <= z[2] + 1e-9


def test_battery_conservation_sign():
    inst = desk(0)
    m, out = optimum(0, "nod")
    sol = solution_from_outcome(inst, m, out)
    for n in range(inst.tree.n_nodes):
        e = inst.tree.node_stage[n]
        st = inst.tree.stage(e)
        op = sol.operational[n]
        for b, bt in enumerate(inst.bess):
            f = bt.loss[e - 1]
            for t in list(st.periods)[1:]:
                lhs = op["y"][b, :, t]
                rhs = (1 - f) * op["y"][b, :, t - 1] + st.hours[t] * (op["y_plus"][b, :, t] - op["y_minus"][b, :, t])
                assert np.allclose(lhs, rhs, atol=1e-6)


def test_stats_reported():
    m, _ = optimum(0, "sd")
    st = m.stats()
    assert st["binaries"] > 0 and st["integers"] == desk(0).tree.n_nodes * desk(0).n_bess
    assert st["constraints"] == m.n_rows


def test_fixing_outside_bounds_rejected():
    inst = desk(0)
    with pytest.raises(ModelError):
        build_model(inst, "nod", fixings={"x[0,0]": 2.0})


def test_subset_without_anchor_rejected():
    inst = desk(0)
    leaf = inst.tree.leaves[0]
    with pytest.raises(ModelError, match="closure"):
        build_model(inst, "nod", node_subset=[leaf])


def test_names_carry_tags():
    m, _ = optimum(0, "sd")
    tags = {nm.split("[")[0] for nm in m.row_names}
    for t in ("2b", "2p", "3b", "3g", "3h", "4d", "5a", "5b", "6", "7a", "7d", "7e"):
        assert t in tags, t


def test_solution_roundtrip_and_missing_values(tmp_path):
    inst = desk(0)
    m, out = optimum(0, "rn")
    sol = solution_from_outcome(inst, m, out)
    back = Solution.from_dict(sol.to_dict(), inst)
    assert back.to_values(inst) == sol.to_values(inst)
    vals = sol.to_values(inst)
    vals.pop(next(iter(vals)))
    with pytest.raises(MissingValues):
        Solution.empty(inst, "rn").fill(inst, vals)


def test_node_variables_cover_solution_arrays():
    inst = desk(1)
    for n in range(inst.tree.n_nodes):
        names = list(node_variables(inst, Variant.SD, n))
        assert len(names) == len(set(names))
