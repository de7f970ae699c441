"""Tactical multi-horizon scenario trees.

A tree has a strategic part (investment nodes organised in stages) and, for
every stage, a two-stage multi-period operational subtree: a fan of
operational scenarios, each one a chain over the daily periods of that
stage.  Operational subtrees are shared by all strategic nodes of a stage.

Stage numbers are 1-based (``1..E``); daily periods and operational
scenarios are 0-based positions.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Sequence


def as_fraction(value) -> Fraction:
    """Exact rational from a number or a string such as ``"1/3"``.

    Floats are snapped to the nearest fraction with a denominator below
    1e12 so that ``1/3`` written as a float is read back as one third.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value.strip())
    return Fraction(float(value)).limit_denominator(10**12)


@dataclass(frozen=True)
class Stage:
    days: int
    hours: tuple[int, ...]
    pv_periods: frozenset[int] = frozenset()

    @property
    def n_periods(self) -> int:
        return len(self.hours)

    @property
    def periods(self) -> range:
        return range(len(self.hours))

    @property
    def first_period(self) -> int:
        return 0

    @property
    def last_period(self) -> int:
        return len(self.hours) - 1


@dataclass(frozen=True)
class Cluster:
    """A block of strategic scenarios solved as one independent submodel.

    Used both for scenario groups (random partition) and scenario clusters
    (subtrees below a breaking stage).  ``node_weights`` are the rescaled
    weights of the member nodes inside the block.
    """
    index: int
    scenarios: tuple[int, ...]
    nodes: tuple[int, ...]
    weight: Fraction
    scenario_weights: dict[int, Fraction] = field(repr=False)
    node_weights: dict[int, Fraction] = field(repr=False)
    root: int | None = None


class MultiHorizonTree:
    """Strategic tree with per-stage operational subtrees.

    Parameters
    ----------
    stages
        One :class:`Stage` per strategic stage.
    parents
        ``parents[n]`` is the ancestor of node ``n`` (``None`` for the root).
    weights
        Absolute probability ``w^n`` of each strategic node.
    op_probs
        Operational scenario probabilities, one sequence per stage.
    node_stages
        Optional explicit stage of each node; derived from depth otherwise.
    """

    def __init__(self, stages: Sequence[Stage], parents: Sequence[int | None],
                 weights: Sequence, op_probs: Sequence[Sequence],
                 node_stages: Sequence[int] | None = None):
        self.stages = tuple(stages)
        self.parents = tuple(None if p is None else int(p) for p in parents)
        self.weights = tuple(as_fraction(w) for w in weights)
        self.op_probs = tuple(tuple(as_fraction(p) for p in ps) for ps in op_probs)
        n = len(self.parents)
        if len(self.weights) != n:
            raise ValueError("weights and parents differ in length")
        for node, p in enumerate(self.parents):
            if p is not None and not 0 <= p < n:
                raise ValueError(f"node {node}: unknown parent {p}")
            if p is not None and p == node:
                raise ValueError(f"node {node} is its own parent")
        if node_stages is None:
            node_stages = [self._depth(v) + 1 for v in range(n)]
        self.node_stage = tuple(int(e) for e in node_stages)
        self.children: tuple[tuple[int, ...], ...] = tuple(
            tuple(sorted(m for m in range(n) if self.parents[m] == v)) for v in range(n))

    def _depth(self, node: int) -> int:
        depth, seen = 0, set()
        while self.parents[node] is not None:
            if node in seen:
                raise ValueError(f"cycle through node {node}")
            seen.add(node)
            node = self.parents[node]
            depth += 1
        return depth

    # -- basic sizes -------------------------------------------------------
    @property
    def n_nodes(self) -> int:
        return len(self.parents)

    @property
    def n_stages(self) -> int:
        return len(self.stages)

    def stage(self, e: int) -> Stage:
        return self.stages[e - 1]

    def stage_of(self, n: int) -> Stage:
        return self.stages[self.node_stage[n] - 1]

    def n_op_scenarios(self, e: int) -> int:
        return len(self.op_probs[e - 1])

    def nodes_at_stage(self, e: int) -> tuple[int, ...]:
        return tuple(n for n in range(self.n_nodes) if self.node_stage[n] == e)

    @property
    def leaves(self) -> tuple[int, ...]:
        return tuple(n for n in range(self.n_nodes) if not self.children[n])

    def _check(self, n: int) -> None:
        if not (isinstance(n, int) and 0 <= n < self.n_nodes):
            raise KeyError(f"unknown strategic node {n!r}")

    # -- derived sets ------------------------------------------------------
    def successors(self, n: int) -> tuple[int, ...]:
        """All descendants of ``n``, ordered by stage then id."""
        self._check(n)
        out, frontier = [], list(self.children[n])
        while frontier:
            out.extend(frontier)
            frontier = [m for v in frontier for m in self.children[v]]
        return tuple(sorted(out, key=lambda m: (self.node_stage[m], m)))

    def ancestors(self, n: int) -> tuple[int, ...]:
        """Path from the root down to the parent of ``n``."""
        self._check(n)
        path = []
        while self.parents[n] is not None:
            n = self.parents[n]
            path.append(n)
        return tuple(reversed(path))

    @cached_property
    def scenarios(self) -> tuple[tuple[int, ...], ...]:
        """Root-to-leaf node paths, one per strategic scenario, ordered by leaf id."""
        return tuple(self.ancestors(leaf) + (leaf,) for leaf in sorted(self.leaves))

    @property
    def n_scenarios(self) -> int:
        return len(self.scenarios)

    @cached_property
    def scenario_weights(self) -> tuple[Fraction, ...]:
        return tuple(self.weights[path[-1]] for path in self.scenarios)

    @cached_property
    def _through(self) -> tuple[tuple[int, ...], ...]:
        acc: list[list[int]] = [[] for _ in range(self.n_nodes)]
        for w, path in enumerate(self.scenarios):
            for n in path:
                acc[n].append(w)
        return tuple(tuple(a) for a in acc)

    def scenarios_through(self, n: int) -> tuple[int, ...]:
        self._check(n)
        return self._through[n]

    def tactical_links(self, n: int) -> tuple[tuple[int, int], ...]:
        """Last-period operational nodes ``(scenario, period)`` of the parent's subtree."""
        self._check(n)
        p = self.parents[n]
        if p is None:
            return ()
        e = self.node_stage[p]
        last = self.stage(e).last_period
        return tuple((pi, last) for pi in range(self.n_op_scenarios(e)))

    def op_nodes(self, e: int) -> Iterable[tuple[int, int]]:
        """Operational nodes of stage ``e`` as ``(scenario, period)`` pairs."""
        for pi in range(self.n_op_scenarios(e)):
            for t in self.stage(e).periods:
                yield pi, t

    # -- constructors ------------------------------------------------------
    @classmethod
    def balanced(cls, n_stages: int, branching: int | Sequence[int],
                 stages: Sequence[Stage] | None = None,
                 op_probs: Sequence[Sequence] | None = None) -> "MultiHorizonTree":
        """Tree with breadth-first ids and equiprobable children.

        ``branching`` may be one degree for every stage or a list with one
        degree per non-terminal stage.
        """
        if n_stages < 1:
            raise ValueError("need at least one stage")
        if isinstance(branching, int):
            branching = [branching] * (n_stages - 1)
        if len(branching) != n_stages - 1 or any(b < 1 for b in branching):
            raise ValueError("invalid branching")
        parents: list[int | None] = [None]
        weights = [Fraction(1)]
        level = [0]
        for b in branching:
            nxt = []
            for p in level:
                for _ in range(b):
                    parents.append(p)
                    weights.append(weights[p] / b)
                    nxt.append(len(parents) - 1)
            level = nxt
        if stages is None:
            stages = [Stage(days=1, hours=(24,), pv_periods=frozenset({0}))] * n_stages
        if op_probs is None:
            op_probs = [[Fraction(1)]] * n_stages
        return cls(stages, parents, weights, op_probs)

    def __repr__(self) -> str:
        return (f"MultiHorizonTree(E={self.n_stages}, N={self.n_nodes}, "
                f"scenarios={self.n_scenarios})")


# -- validation ---------------------------------------------------------------

def validate_tree(tree: MultiHorizonTree) -> list[str]:
    """List of invariant violations; empty when the tree is well formed."""
    out: list[str] = []
    if tree.n_nodes == 0:
        return ["empty tree"]
    roots = [n for n in range(tree.n_nodes) if tree.parents[n] is None]
    if roots != [0]:
        out.append(f"root must be node 0 and unique, found {roots}")
    for e, st in enumerate(tree.stages, start=1):
        if st.days < 1:
            out.append(f"stage {e}: days must be >= 1")
        if not st.hours:
            out.append(f"stage {e}: no daily periods")
        if any(int(m) != m or m < 1 for m in st.hours):
            out.append(f"stage {e}: period hours must be integers >= 1")
        if sum(st.hours) != 24:
            out.append(f"stage {e}: period hours sum to {sum(st.hours)}, not 24")
        if not set(st.pv_periods) <= set(st.periods):
            out.append(f"stage {e}: pv periods outside the daily periods")
    if len(tree.op_probs) != tree.n_stages:
        out.append("scenario/period coverage: operational scenarios not given for every stage")
    for e, probs in enumerate(tree.op_probs, start=1):
        if not probs:
            out.append(f"scenario/period coverage: stage {e} has no operational scenario")
        elif sum(probs) != 1:
            out.append(f"stage {e}: operational probabilities sum to {sum(probs)}")
        if any(p < 0 for p in probs):
            out.append(f"stage {e}: negative operational probability")
    for n in range(tree.n_nodes):
        p = tree.parents[n]
        e = tree.node_stage[n]
        if not 1 <= e <= tree.n_stages:
            out.append(f"node {n}: stage {e} out of range")
        if p is None and e != 1:
            out.append(f"node {n}: root must be in stage 1")
        if p is not None and e != tree.node_stage[p] + 1:
            out.append(f"node {n}: stage {e} does not follow parent stage {tree.node_stage[p]}")
        if not 0 <= tree.weights[n] <= 1:
            out.append(f"node {n}: weight {tree.weights[n]} outside [0, 1]")
        kids = tree.children[n]
        if kids and sum(tree.weights[m] for m in kids) != tree.weights[n]:
            out.append(f"weight conservation at node {n}: children sum "
                       f"{sum(tree.weights[m] for m in kids)} != {tree.weights[n]}")
        if not kids and e != tree.n_stages:
            out.append(f"node {n}: leaf before the last stage")
    for e in range(1, tree.n_stages + 1):
        total = sum(tree.weights[n] for n in tree.nodes_at_stage(e))
        if total != 1:
            out.append(f"stage {e}: node weights sum to {total}")
    return out


# -- partitions ---------------------------------------------------------------

def _block(tree: MultiHorizonTree, index: int, scenarios: Sequence[int],
           root: int | None = None) -> Cluster:
    sw = {w: tree.scenario_weights[w] for w in scenarios}
    total = sum(sw.values(), Fraction(0))
    rescaled = {w: v / total for w, v in sw.items()}
    node_weights: dict[int, Fraction] = {}
    for w in scenarios:
        for n in tree.scenarios[w]:
            node_weights[n] = node_weights.get(n, Fraction(0)) + rescaled[w]
    nodes = tuple(sorted(node_weights))
    return Cluster(index=index, scenarios=tuple(sorted(scenarios)), nodes=nodes,
                   weight=total, scenario_weights=rescaled,
                   node_weights={n: node_weights[n] for n in nodes}, root=root)


def scenario_cluster_partition(tree: MultiHorizonTree, e_star: int) -> list[Cluster]:
    """One cluster per node of stage ``e_star + 1``; scenarios below it."""
    if not 1 <= e_star <= tree.n_stages - 1:
        raise ValueError(f"breaking stage {e_star} outside 1..{tree.n_stages - 1}")
    out = []
    for c, n_c in enumerate(tree.nodes_at_stage(e_star + 1)):
        out.append(_block(tree, c, tree.scenarios_through(n_c), root=n_c))
    return out


def scenario_group_partition(tree: MultiHorizonTree, n_groups: int,
                             seed: int = 0) -> list[Cluster]:
    """Random partition of the strategic scenarios into ``n_groups`` blocks.

    Scenarios are shuffled with a seeded RNG and dealt round-robin, so the
    block sizes differ by at most one.
    """
    n = tree.n_scenarios
    if not 1 <= n_groups <= n:
        raise ValueError(f"group count {n_groups} outside 1..{n}")
    order = list(range(n))
    random.Random(seed).shuffle(order)
    blocks: list[list[int]] = [[] for _ in range(n_groups)]
    for k, w in enumerate(order):
        blocks[k % n_groups].append(w)
    return [_block(tree, g, b) for g, b in enumerate(blocks)]
