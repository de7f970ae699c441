"""Lower bounds by scenario decomposition and expectation collapse, plus VSD.

Block schemes (SWS, SMG, SMC) solve the full model restricted to the nodes
of a block of strategic scenarios with rescaled weights; each block
contributes its solver best bound, so the combination stays a valid lower
bound when a subproblem stops early.
"""
from __future__ import annotations

import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path

import numpy as np

from .audit import evaluate_cost
from .instance import (BessTechnology, DeferrableLoad, ElasticLoad, GridParams, Instance, Loads,
                       PvTechnology, SystemLimits)
from .milp import SolverControls, solve
from .model import Variant, build_model, vname
from .solution import Solution, solution_from_outcome
from .tree import (Cluster, MultiHorizonTree, _block, scenario_cluster_partition,
                   scenario_group_partition)

BOUND_SCHEMA = "mhres-bound/1"
SCHEMES = ("mhev", "mhoev", "sws", "smg", "smc")


class BoundError(RuntimeError):
    def __init__(self, message: str, block: int | None = None):
        super().__init__(message)
        self.block = block


@dataclass
class BlockResult:
    index: int
    weight: Fraction
    value: float            # best bound of the block subproblem
    objective: float        # incumbent value
    status: str
    gap: float
    wall_time: float
    scenarios: tuple[int, ...] = ()

    def to_dict(self, timing: bool = False) -> dict:
        d = {"index": self.index, "weight": str(self.weight), "value": self.value,
             "objective": self.objective, "status": self.status, "gap": self.gap,
             "scenarios": list(self.scenarios)}
        if timing:
            d["wall_time"] = self.wall_time
        return d


@dataclass
class BoundReport:
    scheme: str
    variant: str
    params: dict
    value: float
    rows: list[BlockResult]
    wall_time: float = 0.0
    meta: dict = field(default_factory=dict)

    def to_dict(self, timing: bool = False) -> dict:
        d = {"schema": BOUND_SCHEMA, "scheme": self.scheme, "variant": self.variant,
             "params": self.params, "value": self.value,
             "rows": [r.to_dict(timing) for r in self.rows], "meta": self.meta}
        if timing:
            d["wall_time"] = self.wall_time
        return d


def save_bound_report(rep: BoundReport, path: str | Path, timing: bool = False) -> None:
    from .io import atomic_write
    atomic_write(path, json.dumps(rep.to_dict(timing), sort_keys=True, indent=1) + "\n")


def combine(rows: list[BlockResult]) -> float:
    """Weight-combined block values, summed exactly."""
    return math.fsum(float(r.weight) * r.value for r in rows)


def _pool_map(fn, items, jobs: int):
    items = list(items)
    if jobs > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(fn, items))
    return [fn(x) for x in items]


def solve_blocks(inst: Instance, variant, blocks: list[Cluster],
                 controls: SolverControls | None = None, jobs: int = 1) -> list[BlockResult]:
    variant = Variant.parse(variant)
    controls = controls or SolverControls()

    def run(blk: Cluster) -> BlockResult:
        m = build_model(inst, variant, node_subset={n: float(w) for n, w in blk.node_weights.items()},
                        name=f"block{blk.index}")
        out = solve(m, controls)
        if not out.has_solution:
            raise BoundError(f"subproblem {blk.index} (scenarios {list(blk.scenarios)}) "
                             f"not solved: {out.status}", blk.index)
        bb = out.best_bound if math.isfinite(out.best_bound) else out.objective
        return BlockResult(blk.index, blk.weight, float(min(bb, out.objective)), float(out.objective),
                           out.status, float(out.gap), out.wall_time, blk.scenarios)

    return _pool_map(run, blocks, jobs)


def _report(scheme, variant, params, rows, t0, **meta) -> BoundReport:
    return BoundReport(scheme, Variant.parse(variant).value, params, combine(rows), rows,
                       time.perf_counter() - t0, dict(meta))


def bound_sws(inst: Instance, variant, controls=None, jobs: int = 1) -> BoundReport:
    """Wait-and-see: one subproblem per strategic scenario."""
    t0 = time.perf_counter()
    tr = inst.tree
    blocks = [_block(tr, w, [w]) for w in range(tr.n_scenarios)]
    return _report("sws", variant, {}, solve_blocks(inst, variant, blocks, controls, jobs), t0)


def bound_smg(inst: Instance, variant, n_groups: int, seed: int = 0, controls=None,
              jobs: int = 1) -> BoundReport:
    """Scenario groups from a seeded random partition."""
    t0 = time.perf_counter()
    blocks = scenario_group_partition(inst.tree, n_groups, seed)
    rows = solve_blocks(inst, variant, blocks, controls, jobs)
    return _report("smg", variant, {"G": n_groups, "seed": seed}, rows, t0)


def bound_smc(inst: Instance, variant, e_star: int, controls=None, jobs: int = 1) -> BoundReport:
    """Scenario clusters below the breaking stage ``e_star``."""
    t0 = time.perf_counter()
    blocks = scenario_cluster_partition(inst.tree, e_star)
    rows = solve_blocks(inst, variant, blocks, controls, jobs)
    return _report("smc", variant, {"e_star": e_star}, rows, t0)


# -- expectation collapse -----------------------------------------------------

def _op_mean(arrs: list[np.ndarray], probs) -> list[np.ndarray]:
    out = []
    for a, ps in zip(arrs, probs):
        p = np.array([float(x) for x in ps])
        out.append((p @ np.asarray(a))[None, :])
    return out


def collapse_operational(inst: Instance) -> Instance:
    """Same strategic tree, one expected operational scenario per stage."""
    tr = inst.tree
    probs = tr.op_probs
    tree = MultiHorizonTree(tr.stages, tr.parents, tr.weights, [[Fraction(1)]] * tr.n_stages,
                            node_stages=tr.node_stage)
    pv = [replace(p, gen_cost=_op_mean(p.gen_cost, probs), availability=_op_mean(p.availability, probs))
          for p in inst.pv]
    el = [replace(x, setpoint=_op_mean(x.setpoint, probs)) for x in inst.loads.elastic]
    loads = replace(inst.loads, base=_op_mean(inst.loads.base, probs), elastic=el)
    grid = GridParams(_op_mean(inst.grid.import_price, probs), _op_mean(inst.grid.export_price, probs))
    meta = dict(inst.meta, derived="mhoev")
    return Instance(tree, pv, list(inst.bess), inst.limits, loads, grid, inst.discomfort, meta)


def collapse_strategic(inst: Instance) -> Instance:
    """One strategic node per stage carrying stage-weighted expected costs."""
    tr = inst.tree
    E = tr.n_stages
    W = np.zeros((E, tr.n_nodes))
    for n in range(tr.n_nodes):
        W[tr.node_stage[n] - 1, n] = float(tr.weights[n])

    def ev(a):
        return W @ np.asarray(a, dtype=float)

    tree = MultiHorizonTree(tr.stages, [None] + list(range(E - 1)), [1] * E, tr.op_probs,
                            node_stages=list(range(1, E + 1)))
    costs = ("prep_cost", "install_cost", "maint_cost", "residual_value")
    pv = [replace(p, **{c: ev(getattr(p, c)) for c in costs}) for p in inst.pv]
    bess = [replace(b, **{c: ev(getattr(b, c)) for c in costs}) for b in inst.bess]
    limits = replace(inst.limits, budget=ev(inst.limits.budget))
    meta = dict(inst.meta, derived="mhev")
    return Instance(tree, pv, bess, limits, inst.loads, inst.grid, inst.discomfort, meta)


def ev_instance(inst: Instance) -> Instance:
    return collapse_strategic(collapse_operational(inst))


def _reject_sd(variant) -> Variant:
    v = Variant.parse(variant)
    if v is Variant.SD:
        raise ValueError("expected-value bounds are defined for NoD and RN only")
    return v


def _single(scheme, inst, variant, controls, t0) -> BoundReport:
    m = build_model(inst, variant, name=scheme)
    out = solve(m, controls or SolverControls())
    if not out.has_solution:
        raise BoundError(f"{scheme} model not solved: {out.status}", 0)
    bb = out.best_bound if math.isfinite(out.best_bound) else out.objective
    row = BlockResult(0, Fraction(1), float(min(bb, out.objective)), float(out.objective),
                      out.status, float(out.gap), out.wall_time)
    rep = _report(scheme, variant, {}, [row], t0, heuristic=True)
    rep.meta["solution"] = solution_from_outcome(inst, m, out)
    return rep


def bound_mhev(inst: Instance, variant, controls=None) -> BoundReport:
    """Expected-value model: one strategic and one operational scenario per stage."""
    t0 = time.perf_counter()
    v = _reject_sd(variant)
    rep = _single("mhev", ev_instance(inst), v, controls, t0)
    rep.meta.pop("solution")
    return rep


def bound_mhoev(inst: Instance, variant, controls=None) -> BoundReport:
    """Full strategic tree with expected operational scenarios."""
    t0 = time.perf_counter()
    v = _reject_sd(variant)
    rep = _single("mhoev", collapse_operational(inst), v, controls, t0)
    rep.meta.pop("solution")
    return rep


def run_bound(inst: Instance, scheme: str, variant, *, G: int | None = None, e_star: int | None = None,
              seed: int = 0, controls=None, jobs: int = 1) -> BoundReport:
    scheme = scheme.lower()
    if scheme == "mhev":
        return bound_mhev(inst, variant, controls)
    if scheme == "mhoev":
        return bound_mhoev(inst, variant, controls)
    if scheme == "sws":
        return bound_sws(inst, variant, controls, jobs)
    if scheme == "smg":
        if G is None:
            raise ValueError("smg needs the group count G")
        return bound_smg(inst, variant, G, seed, controls, jobs)
    if scheme == "smc":
        if e_star is None:
            raise ValueError("smc needs the breaking stage e_star")
        return bound_smc(inst, variant, e_star, controls, jobs)
    raise ValueError(f"unknown bound scheme {scheme!r}; known: {', '.join(SCHEMES)}")


# -- value of the strategic decision --------------------------------------------

class EvDesignInfeasible(RuntimeError):
    pass


STRATEGIC = ("x", "x_tilde", "alpha", "xp", "xp_tilde", "beta")


@dataclass
class VsdResult:
    z_s_mhev: float
    cost: float
    vsd: float
    gr: float
    ev_value: float

    def to_dict(self) -> dict:
        return {"z_S_MHEV": self.z_s_mhev, "cost": self.cost, "VSD": self.vsd,
                "GR": self.gr, "z_MHEV": self.ev_value}


def ev_strategic_fixings(inst: Instance, variant, controls=None) -> tuple[dict[str, float], float]:
    """Solve the expected-value model and map its stage-e design onto every stage-e node."""
    v = Variant.parse(variant)
    ev_variant = Variant.RN if v is Variant.SD else v
    evi = ev_instance(inst)
    m = build_model(evi, ev_variant, name="mhev")
    out = solve(m, controls or SolverControls())
    if not out.has_solution:
        raise BoundError(f"expected-value model not solved: {out.status}", 0)
    ev_sol = solution_from_outcome(evi, m, out)
    tr = inst.tree
    fix = {}
    for n in range(tr.n_nodes):
        chain = tr.node_stage[n] - 1
        for fam in STRATEGIC:
            for i in range(ev_sol.strategic[fam].shape[1]):
                fix[vname(fam, str(n), i)] = float(ev_sol.strategic[fam][chain, i])
    return fix, float(out.objective)


def vsd(inst: Instance, variant, feasible: Solution | float, controls=None) -> VsdResult:
    """Cost of living with the expected-value design under the full tree."""
    v = Variant.parse(variant)
    cost = feasible if isinstance(feasible, (int, float)) else evaluate_cost(inst, feasible)["total"]
    fix, ev_val = ev_strategic_fixings(inst, v, controls)
    m = build_model(inst, v, fixings=fix, name="s-mhev")
    out = solve(m, controls or SolverControls())
    if not out.has_solution:
        raise EvDesignInfeasible("EV design infeasible under uncertainty")
    z = float(out.objective)
    return VsdResult(z, float(cost), z - float(cost), float(cost) / z if z else math.nan, ev_val)
