"""Matheuristics producing feasible full-tree solutions: SFR3 and SRH.

Both solve a sequence of restricted models, fix the decisions of the
current root node and move forward through the stages.  Subproblems of one
iteration are independent and can be solved by a thread pool.
"""
from __future__ import annotations

import csv
import io
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .audit import evaluate_cost
from .instance import Instance
from .milp import SolverControls, solve
from .model import NodeView, Variant, build_model, subset_views
from .solution import Solution


class HeuristicError(RuntimeError):
    def __init__(self, message: str, kappa: int | None = None, root: int | None = None):
        super().__init__(message)
        self.kappa = kappa
        self.root = root


@dataclass
class Sfr3Params:
    e_hat: int = 1
    e_hat_r: int = 0
    phi: float | Sequence[float] = 0.0
    seed: int = 0
    controls: SolverControls = field(default_factory=SolverControls)
    jobs: int = 1

    def phi_at(self, e: int) -> float:
        if isinstance(self.phi, (int, float)):
            return float(self.phi)
        return float(self.phi[e - 1])

    def label(self) -> str:
        phis = [self.phi] if isinstance(self.phi, (int, float)) else list(self.phi)
        phi = "/".join(f"{float(p):.4g}" for p in phis)
        return f"({self.e_hat},{self.e_hat_r},{phi})"


def parse_strategy(text: str, **kw) -> Sfr3Params:
    """``weak-myopic``, ``stronger-myopic``, ``multistage-myopic:K`` or ``relaxed:K,R,PHI``."""
    name, _, arg = text.partition(":")
    name = name.strip().lower()
    if name == "weak-myopic":
        return Sfr3Params(1, 0, 0.0, **kw)
    if name == "stronger-myopic":
        return Sfr3Params(2, 0, 0.0, **kw)
    if name == "multistage-myopic":
        return Sfr3Params(int(arg), 0, 0.0, **kw)
    if name == "relaxed":
        k, r, phi = arg.split(",")
        return Sfr3Params(int(k), int(r), float(Fraction(phi.strip())), **kw)
    raise ValueError(f"unknown strategy {text!r}")


@dataclass
class IterationRecord:
    kappa: int
    root: int
    nodes: int
    variables: int
    time: float
    objective: float
    status: str


LOG_COLUMNS = ("kappa", "root", "nodes", "vars", "time", "objective", "status")


def log_to_csv(log: Sequence[IterationRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(LOG_COLUMNS)
    for r in sorted(log, key=lambda r: (r.kappa, r.root)):
        w.writerow([r.kappa, r.root, r.nodes, r.variables, f"{r.time:.3f}", repr(r.objective), r.status])
    return buf.getvalue()


# -- SFR3 ------------------------------------------------------------------------

def sfr3_node_set(inst: Instance, params: Sfr3Params, kappa: int, r: int) -> dict[int, Fraction]:
    """Nodes of the ``r``-submodel of iteration ``kappa`` with rescaled weights."""
    tr = inst.tree
    E = tr.n_stages
    succ = tr.successors(r)
    fixed_part = [n for n in succ if tr.node_stage[n] < kappa + params.e_hat]
    members = {r, *fixed_part}
    if params.e_hat_r > 0:
        rng = np.random.default_rng([params.seed, kappa, r])
        last_relax = min(kappa + params.e_hat + params.e_hat_r - 1, E)
        prev_stage = {n for n in members if tr.node_stage[n] == kappa + params.e_hat - 1}
        for e2 in range(kappa + params.e_hat, last_relax + 1):
            phi = params.phi_at(e2)
            chosen = set()
            for p in sorted(prev_stage):
                kids = tr.children[p]
                draws = rng.uniform(size=len(kids))
                pick = [c for c, u in zip(kids, draws) if u < phi]
                if not pick and kids:
                    pick = [kids[int(rng.integers(len(kids)))]]  # repair: keep the branch connected
                chosen.update(pick)
            members |= chosen
            prev_stage = chosen
    weights = {r: Fraction(1)}
    for n in sorted(members - {r}, key=lambda m: (tr.node_stage[m], m)):
        p = tr.parents[n]
        sib = sum((tr.weights[m] for m in tr.children[p] if m in members), Fraction(0))
        weights[n] = weights[p] * tr.weights[n] / sib
    return weights


def _solve_views(inst, variant, views, fixings, controls, name):
    m = build_model(inst, variant, views=views, fixings=fixings, name=name)
    t0 = time.perf_counter()
    out = solve(m, controls)
    out.wall_time = out.wall_time or time.perf_counter() - t0
    return m, out


def sfr3(inst: Instance, variant, params: Sfr3Params) -> tuple[Solution, list[IterationRecord]]:
    """Rolling-horizon matheuristic with probabilistic look-ahead."""
    variant = Variant.parse(variant)
    tr = inst.tree
    E = tr.n_stages
    if not 1 <= params.e_hat <= E:
        raise ValueError(f"e_hat={params.e_hat} outside 1..{E}")
    if params.e_hat_r < 0:
        raise ValueError("e_hat_r must be >= 0")
    for e in range(1, E + 1):
        if not 0 <= params.phi_at(e) <= 1:
            raise ValueError("selection probabilities must lie in [0, 1]")
    fixings: dict[str, float] = {}
    log: list[IterationRecord] = []
    last_kappa = E - params.e_hat + 1
    for kappa in range(1, last_kappa + 1):
        roots = tr.nodes_at_stage(kappa)
        plans = {r: sfr3_node_set(inst, params, kappa, r) for r in roots}

        def run(r):
            views = subset_views(inst, {n: float(w) for n, w in plans[r].items()}, fixings)
            return r, _solve_views(inst, variant, views, fixings, params.controls, f"sfr3-k{kappa}-r{r}")

        results = _map(run, roots, params.jobs)
        new_fix: dict[str, float] = {}
        for r, (m, out) in results:
            log.append(IterationRecord(kappa, r, len(plans[r]), m.n_vars, out.wall_time,
                                       float(out.objective), out.status))
            if not out.has_solution:
                raise HeuristicError(f"subproblem infeasible at kappa={kappa}, r={r} ({out.status})", kappa, r)
            values = m.values(out.x)
            keep = [r]
            if kappa == last_kappa:
                keep += [n for n in tr.successors(r) if tr.node_stage[n] < kappa + params.e_hat]
            prefixes = tuple(f"[{n}," for n in keep)
            new_fix.update({k: v for k, v in values.items() if k[k.index("["):].startswith(prefixes)})
        fixings.update(new_fix)
    sol = Solution.empty(inst, variant).fill(inst, fixings)
    sol.objective = evaluate_cost(inst, sol)["total"]
    sol.meta.update(method="sfr3", params=params.label(), seed=params.seed)
    return sol, log


def _map(fn, items, jobs: int):
    items = list(items)
    if jobs > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(fn, items))
    return [fn(x) for x in items]


# -- SRH ------------------------------------------------------------------------

def srh_views(inst: Instance, r: int) -> list[NodeView]:
    """Two-stage approximation rooted at ``r``: the node itself plus one
    independent copy of every scenario path below it (per-scenario recourse)."""
    tr = inst.tree
    p = tr.parents[r]
    views = [NodeView(str(r), r, None if p is None else str(p), 1.0)]
    wr = tr.weights[r]
    for w in tr.scenarios_through(r):
        path = tr.scenarios[w]
        below = path[path.index(r) + 1:]
        prob = float(tr.scenario_weights[w] / wr)
        parent = str(r)
        for n in below:
            key = f"{n}@{w}"
            views.append(NodeView(key, n, parent, prob))
            parent = key
    return views


def srh(inst: Instance, variant, controls: SolverControls | None = None,
        jobs: int = 1) -> tuple[Solution, list[IterationRecord]]:
    """Shrinking-horizon sequence of two-stage approximations."""
    variant = Variant.parse(variant)
    controls = controls or SolverControls()
    tr = inst.tree
    fixings: dict[str, float] = {}
    log: list[IterationRecord] = []
    for e in range(1, tr.n_stages + 1):
        roots = tr.nodes_at_stage(e)

        def run(r):
            views = srh_views(inst, r)
            return r, views, _solve_views(inst, variant, views, fixings, controls, f"srh-e{e}-r{r}")

        new_fix = {}
        for r, views, (m, out) in _map(run, roots, jobs):
            log.append(IterationRecord(e, r, len(views), m.n_vars, out.wall_time, float(out.objective), out.status))
            if not out.has_solution:
                raise HeuristicError(f"subproblem infeasible at stage {e}, r={r} ({out.status})", e, r)
            values = m.values(out.x)
            pre = f"[{r},"
            new_fix.update({k: v for k, v in values.items() if k[k.index("["):].startswith(pre)})
        fixings.update(new_fix)
    sol = Solution.empty(inst, variant).fill(inst, fixings)
    sol.objective = evaluate_cost(inst, sol)["total"]
    sol.meta.update(method="srh")
    return sol, log


# -- comparison -----------------------------------------------------------------

@dataclass
class Run:
    method: str
    cost: float
    time: float
    instance: str = ""
    variant: str = ""


def compare(runs: Sequence[Run], best_bound: float | None = None,
            pair: tuple[str, str] = ("sfr3", "srh")) -> dict:
    """Gaps against a bound plus GR and TR ratios between two methods."""
    if len({(r.instance, r.variant) for r in runs}) > 1:
        raise ValueError("mismatched instances: runs must share instance and variant")
    rows = []
    for r in runs:
        gap = math.nan if best_bound is None else (r.cost - best_bound) / abs(best_bound or 1.0)
        rows.append({"method": r.method, "cost": r.cost, "time": r.time, "gap": gap})
    by = {r.method.lower(): r for r in runs}
    a, b = pair
    gr = tr_ = math.nan
    if a in by and b in by:
        gr = goodness_ratio(by[a].cost, by[b].cost)
        tr_ = time_ratio(by[a].time, by[b].time)
    return {"rows": rows, "GR": gr, "TR": tr_}


def goodness_ratio(z_a: float, z_b: float) -> float:
    return z_a / z_b if z_b else (1.0 if z_a == z_b else math.inf)


def time_ratio(t_a: float, t_b: float) -> float:
    return t_a / t_b if t_b else math.nan
