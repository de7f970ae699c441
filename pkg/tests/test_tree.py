from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from mhres.tree import (MultiHorizonTree, Stage, scenario_cluster_partition,
                        scenario_group_partition, validate_tree)

DAY = Stage(days=365, hours=(6, 6, 6, 6), pv_periods=frozenset({1, 2}))


def thirteen_node_tree() -> MultiHorizonTree:
    """Four stages, 1 + 1 + 4 + 7 nodes, seven scenarios."""
    parents = [None, 0, 1, 1, 1, 1, 2, 2, 3, 4, 5, 5, 5]
    w = [Fraction(1), Fraction(1)] + [Fraction(1, 4)] * 4 + [Fraction(1, 8)] * 2 \
        + [Fraction(1, 4)] * 2 + [Fraction(1, 12)] * 3
    return MultiHorizonTree([DAY] * 4, parents, w, [[1]] * 4)


def test_thirteen_node_tree_is_valid():
    tr = thirteen_node_tree()
    assert validate_tree(tr) == []
    assert tr.n_nodes == 13 and tr.n_scenarios == 7


def test_breaking_stage_two_clusters():
    cl = scenario_cluster_partition(thirteen_node_tree(), 2)
    assert [c.scenarios for c in cl] == [(0, 1), (2,), (3,), (4, 5, 6)]
    assert sum(c.weight for c in cl) == 1


def test_balanced_small_shape():
    tr = MultiHorizonTree.balanced(3, 3)
    assert (tr.n_nodes, tr.n_scenarios) == (13, 9)
    assert [len(tr.nodes_at_stage(e)) for e in (1, 2, 3)] == [1, 3, 9]


def test_successors_and_ancestors():
    tr = MultiHorizonTree.balanced(3, 2)
    assert set(tr.successors(1)) == {3, 4}
    assert tr.ancestors(6) == (2, 0) or tr.ancestors(6) == (0, 2)
    assert tr.successors(6) == ()


def test_weight_conservation_violation_reported():
    tr = MultiHorizonTree([DAY, DAY], [None, 0, 0], [1, Fraction(1, 2), Fraction(1, 3)], [[1], [1]])
    assert any("weight" in v for v in validate_tree(tr))


def test_cycle_rejected():
    with pytest.raises(ValueError):
        MultiHorizonTree([DAY], [1, 0], [1, 1], [[1]])


@settings(max_examples=30, deadline=None)
@given(E=st.integers(2, 4), b=st.integers(1, 3))
def test_balanced_trees_conserve_weight(E, b):
    tr = MultiHorizonTree.balanced(E, b)
    assert validate_tree(tr) == []
    assert sum(tr.scenario_weights) == 1
    for e in range(1, E + 1):
        assert sum(tr.weights[n] for n in tr.nodes_at_stage(e)) == 1


@settings(max_examples=30, deadline=None)
@given(E=st.integers(2, 4), b=st.integers(1, 3), data=st.data())
def test_partitions_cover_scenarios_once(E, b, data):
    tr = MultiHorizonTree.balanced(E, b)
    G = data.draw(st.integers(1, tr.n_scenarios))
    seed = data.draw(st.integers(0, 100))
    e_star = data.draw(st.integers(1, E - 1))
    for blocks in (scenario_group_partition(tr, G, seed), scenario_cluster_partition(tr, e_star)):
        seen = sorted(w for c in blocks for w in c.scenarios)
        assert seen == list(range(tr.n_scenarios))
        assert sum(c.weight for c in blocks) == 1
        for c in blocks:
            # rescaled node weights sum to one per stage inside a block
            for e in range(1, E + 1):
                assert sum(w for n, w in c.node_weights.items() if tr.node_stage[n] == e) == 1


def test_group_partition_is_seeded():
    tr = MultiHorizonTree.balanced(3, 3)
    a = [c.scenarios for c in scenario_group_partition(tr, 4, 7)]
    b = [c.scenarios for c in scenario_group_partition(tr, 4, 7)]
    assert a == b
    sizes = sorted(len(s) for s in a)
    assert sizes[-1] - sizes[0] <= 1


def test_partition_arguments_checked():
    tr = MultiHorizonTree.balanced(3, 2)
    with pytest.raises(ValueError):
        scenario_cluster_partition(tr, 3)
    with pytest.raises(ValueError):
        scenario_group_partition(tr, 0)
