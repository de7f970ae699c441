"""Problem data of the domestic RES design problem and its JSON schema.

All strategic parameters are indexed by strategic node id; operational
parameters are indexed per stage by ``[scenario, period]`` (the operational
subtree is shared by the strategic nodes of a stage).  Money is in EUR,
energy in kWh, power in kW and durations in whole hours.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .tree import MultiHorizonTree, Stage, as_fraction, validate_tree

SCHEMA = "mhres/1"


class InstanceError(ValueError):
    """Raised for unreadable, incomplete or inconsistent instance data."""

    def __init__(self, message: str, violations: Sequence[str] = ()):
        super().__init__(message)
        self.violations = list(violations)


class InsufficientHours(ValueError):
    pass


@dataclass
class PvTechnology:
    name: str
    capacity_kw: float
    max_panels: float
    prep_cost: np.ndarray
    install_cost: np.ndarray
    maint_cost: np.ndarray
    residual_value: np.ndarray
    gen_cost: list[np.ndarray]
    availability: list[np.ndarray]


@dataclass
class BessTechnology:
    name: str
    unit_kwh: float
    loss: np.ndarray
    charge_depth: np.ndarray
    discharge_depth: np.ndarray
    op_cost: float
    prep_cost: np.ndarray
    install_cost: np.ndarray
    maint_cost: np.ndarray
    residual_value: np.ndarray
    max_units: int


@dataclass
class SystemLimits:
    pv_total_max: float
    pv_min_batch: float
    bess_total_max: int
    bess_min_batch: int
    budget: np.ndarray


@dataclass
class ElasticLoad:
    name: str
    setpoint: list[np.ndarray]          # per stage [scenario, period]
    window: list[frozenset[int]]        # per stage
    max_curtail: list[np.ndarray]       # per stage [period]
    max_ramp: list[np.ndarray]
    discomfort: list[np.ndarray]


@dataclass
class DeferrableLoad:
    name: str
    ref_start: list[int]                # per stage
    power_kw: list[float]
    duration_h: list[int]
    window: list[frozenset[int]]
    discomfort: list[np.ndarray]        # per stage [period], per start


@dataclass
class Loads:
    base: list[np.ndarray]
    elastic: list[ElasticLoad] = field(default_factory=list)
    deferrable: list[DeferrableLoad] = field(default_factory=list)
    incompatible: list[tuple[int, int]] = field(default_factory=list)
    precedence: list[tuple[int, int, int]] = field(default_factory=list)


@dataclass
class GridParams:
    import_price: list[np.ndarray]
    export_price: list[np.ndarray]


@dataclass(frozen=True)
class DiscomfortProfile:
    threshold: float
    prob_bound: float
    max_excess: float
    expected_excess: float


@dataclass
class DiscomfortPolicy:
    expected_cap: list[float]
    profiles: list[list[DiscomfortProfile]]


def derive_m2(hours: Sequence[int], t_start: int, m1: int) -> int:
    """Consecutive periods needed from ``t_start`` to cover ``m1`` hours."""
    acc = 0
    for k, t in enumerate(range(t_start, len(hours)), start=1):
        acc += hours[t]
        if acc >= m1:
            return k
    raise InsufficientHours(
        f"insufficient remaining hours: {acc} h left from period {t_start}, need {m1} h")


@dataclass
class Instance:
    tree: MultiHorizonTree
    pv: list[PvTechnology]
    bess: list[BessTechnology]
    limits: SystemLimits
    loads: Loads
    grid: GridParams
    discomfort: DiscomfortPolicy
    meta: dict[str, Any] = field(default_factory=dict)
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    # -- deferrable load timing -------------------------------------------
    def m2(self, j: int, e: int, t_start: int) -> int:
        key = ("m2", j, e, t_start)
        if key not in self._cache:
            d = self.loads.deferrable[j]
            try:
                self._cache[key] = derive_m2(self.tree.stage(e).hours, t_start, d.duration_h[e - 1])
            except InsufficientHours as err:
                self._cache[key] = err
        val = self._cache[key]
        if isinstance(val, Exception):
            raise val
        return val

    def feasible_starts(self, j: int, e: int) -> tuple[int, ...]:
        """Window periods from which deferrable load ``j`` completes within the day."""
        key = ("starts", j, e)
        if key not in self._cache:
            out = []
            for t in sorted(self.loads.deferrable[j].window[e - 1]):
                try:
                    self.m2(j, e, t)
                except InsufficientHours:
                    continue
                out.append(t)
            self._cache[key] = tuple(out)
        return self._cache[key]

    def supply_window_set(self, j: int, e: int, q: tuple[int, int]) -> set[tuple[int, int]]:
        """Start nodes ``q'`` whose supply of load ``j`` covers node ``q``."""
        pi, t = q
        out = set()
        for ts in self.feasible_starts(j, e):
            if t - self.m2(j, e, ts) + 1 <= ts <= t:
                out.add((pi, ts))
        return out

    def precedence_set(self, j: int, j2: int, e: int, q: tuple[int, int]) -> set[tuple[int, int]]:
        """Admissible starts of ``j2`` when ``j`` starts at node ``q``."""
        latency = self.latency(j, j2)
        pi, t = q
        try:
            lo = t + self.m2(j, e, t) + latency
        except InsufficientHours:
            return set()
        return {(pi, t2) for t2 in self.feasible_starts(j2, e) if t2 >= lo}

    def latency(self, j: int, j2: int) -> int:
        for a, b, lat in self.loads.precedence:
            if (a, b) == (j, j2):
                return lat
        raise KeyError(f"({j}, {j2}) is not a precedence pair")

    # -- sizes ---------------------------------------------------------------
    @property
    def n_pv(self) -> int:
        return len(self.pv)

    @property
    def n_bess(self) -> int:
        return len(self.bess)

    def dims(self) -> dict[str, int]:
        tr = self.tree
        kids = [len(c) for c in tr.children if c]
        return {
            "E": tr.n_stages, "N": tr.n_nodes, "scenarios": tr.n_scenarios,
            "branching": max(kids) if kids else 0,
            "op_scenarios": max(tr.n_op_scenarios(e) for e in range(1, tr.n_stages + 1)),
            "periods": max(s.n_periods for s in tr.stages),
            "I": self.n_pv, "B": self.n_bess,
            "J1": len(self.loads.elastic), "J2": len(self.loads.deferrable),
            "H1": len(self.loads.incompatible), "H2": len(self.loads.precedence),
        }


# -- validation -----------------------------------------------------------

def validate_instance(inst: Instance) -> list[str]:
    out = list(validate_tree(inst.tree))
    if out:
        return out
    tr = inst.tree
    E = tr.n_stages

    def nonneg(name: str, arr) -> None:
        if np.any(np.asarray(arr) < 0):
            out.append(f"{name}: negative value")

    for i, p in enumerate(inst.pv):
        tag = f"pv[{p.name}]"
        if p.capacity_kw <= 0:
            out.append(f"{tag}: capacity must be positive")
        for nm in ("prep_cost", "install_cost", "maint_cost", "residual_value"):
            nonneg(f"{tag}.{nm}", getattr(p, nm))
        for e in range(1, E + 1):
            nonneg(f"{tag}.gen_cost stage {e}", p.gen_cost[e - 1])
            av = p.availability[e - 1]
            if np.any(av < 0) or np.any(av > 1):
                out.append(f"{tag}: availability outside [0, 1] at stage {e}")
            off = [t for t in tr.stage(e).periods if t not in tr.stage(e).pv_periods]
            if off and np.any(av[:, off] != 0):
                out.append(f"{tag}: nonzero availability outside pv periods at stage {e}")
        if p.max_panels > inst.limits.pv_total_max:
            out.append(f"{tag}: max panels exceed the global cap")
        if p.max_panels < inst.limits.pv_min_batch:
            out.append(f"{tag}: max panels below the minimum batch")
    for b in inst.bess:
        tag = f"bess[{b.name}]"
        if b.unit_kwh <= 0:
            out.append(f"{tag}: unit capacity must be positive")
        if np.any((b.loss < 0) | (b.loss >= 1)):
            out.append(f"{tag}: loss factor outside [0, 1)")
        for nm in ("charge_depth", "discharge_depth"):
            arr = getattr(b, nm)
            if np.any((arr <= 0) | (arr > 1)):
                out.append(f"{tag}: {nm} outside (0, 1]")
        for nm in ("prep_cost", "install_cost", "maint_cost", "residual_value"):
            nonneg(f"{tag}.{nm}", getattr(b, nm))
        if b.op_cost < 0:
            out.append(f"{tag}: negative operating cost")
        if b.max_units > inst.limits.bess_total_max:
            out.append(f"{tag}: max units exceed the global cap")
        if b.max_units < inst.limits.bess_min_batch:
            out.append(f"{tag}: max units below the minimum batch")
    nonneg("limits.budget", inst.limits.budget)
    for e in range(1, E + 1):
        st = tr.stage(e)
        nonneg(f"loads.base stage {e}", inst.loads.base[e - 1])
        nonneg(f"grid.import_price stage {e}", inst.grid.import_price[e - 1])
        nonneg(f"grid.export_price stage {e}", inst.grid.export_price[e - 1])
        for el in inst.loads.elastic:
            win = el.window[e - 1]
            if not win <= set(st.periods):
                out.append(f"elastic[{el.name}]: window outside stage {e} periods")
                continue
            for t in win:
                if np.any(el.max_curtail[e - 1][t] > el.setpoint[e - 1][:, t] + 1e-12):
                    out.append(f"elastic[{el.name}]: max curtailment exceeds setpoint at stage {e} period {t}")
            nonneg(f"elastic[{el.name}].setpoint stage {e}", el.setpoint[e - 1])
            nonneg(f"elastic[{el.name}].max_curtail stage {e}", el.max_curtail[e - 1])
            nonneg(f"elastic[{el.name}].max_ramp stage {e}", el.max_ramp[e - 1])
            nonneg(f"elastic[{el.name}].discomfort stage {e}", el.discomfort[e - 1])
        for j, d in enumerate(inst.loads.deferrable):
            win = d.window[e - 1]
            if not win <= set(st.periods):
                out.append(f"deferrable[{d.name}]: window outside stage {e} periods")
                continue
            if d.ref_start[e - 1] not in win:
                out.append(f"deferrable[{d.name}]: reference start not in window at stage {e}")
            if d.duration_h[e - 1] < 1 or d.power_kw[e - 1] < 0:
                out.append(f"deferrable[{d.name}]: invalid duration or power at stage {e}")
            elif not inst.feasible_starts(j, e):
                out.append(f"deferrable[{d.name}]: no start completes within the day at stage {e}")
            nonneg(f"deferrable[{d.name}].discomfort stage {e}", d.discomfort[e - 1])
        if inst.discomfort.expected_cap[e - 1] < 0:
            out.append(f"discomfort: negative expected cap at stage {e}")
        for p in inst.discomfort.profiles[e - 1]:
            if p.expected_excess > p.max_excess:
                out.append(f"expected excess exceeds max excess (stage {e})")
            if p.threshold <= 0:
                out.append(f"discomfort threshold must be positive (stage {e})")
            if not 0 <= p.prob_bound <= 1:
                out.append(f"probability bound outside [0, 1] (stage {e})")
            if p.max_excess < 0 or p.expected_excess < 0:
                out.append(f"negative excess fraction (stage {e})")
    nd = len(inst.loads.deferrable)
    for a, b in inst.loads.incompatible:
        if not (0 <= a < nd and 0 <= b < nd):
            out.append(f"incompatible pair ({a}, {b}) references an unknown load")
    for a, b, lat in inst.loads.precedence:
        if not (0 <= a < nd and 0 <= b < nd):
            out.append(f"precedence pair ({a}, {b}) references an unknown load")
        if lat < 0:
            out.append(f"precedence pair ({a}, {b}) has negative latency")
    lim = inst.limits
    if lim.pv_min_batch < 0 or lim.bess_min_batch < 0:
        out.append("negative minimum batch")
    return out


# -- JSON I/O -------------------------------------------------------------

class _Reader:
    """Field access with errors that name the offending path."""

    def __init__(self, tree: MultiHorizonTree | None = None):
        self.tree = tree

    @staticmethod
    def get(d: dict, key: str, path: str):
        if not isinstance(d, dict) or key not in d:
            raise InstanceError(f"missing field '{path}.{key}'" if path else f"missing field '{key}'")
        return d[key]

    def per_node(self, raw, name: str) -> np.ndarray:
        tr = self.tree
        if not isinstance(raw, list):
            raise InstanceError(f"field '{name}' must be a list over strategic nodes")
        for n in range(tr.n_nodes):
            if n >= len(raw) or raw[n] is None:
                raise InstanceError(f"coverage: {name} missing at strategic node {n}")
        return np.asarray(raw[:tr.n_nodes], dtype=float)

    def per_stage(self, raw, name: str, cast=float) -> list:
        tr = self.tree
        if not isinstance(raw, list):
            raise InstanceError(f"field '{name}' must be a list over stages")
        for e in range(1, tr.n_stages + 1):
            if e - 1 >= len(raw) or raw[e - 1] is None:
                raise InstanceError(f"coverage: {name} missing at stage {e}")
        return [cast(v) for v in raw[:tr.n_stages]]

    def per_period(self, raw, name: str) -> list[np.ndarray]:
        tr = self.tree
        rows = self.per_stage(raw, name, cast=lambda v: v)
        out = []
        for e, row in enumerate(rows, start=1):
            T = tr.stage(e).n_periods
            if not isinstance(row, list):
                raise InstanceError(f"field '{name}' stage {e} must be a list over periods")
            for t in range(T):
                if t >= len(row) or row[t] is None:
                    raise InstanceError(f"coverage: {name} missing at stage {e} period {t}")
            out.append(np.asarray(row[:T], dtype=float))
        return out

    def per_op_node(self, raw, name: str) -> list[np.ndarray]:
        tr = self.tree
        rows = self.per_stage(raw, name, cast=lambda v: v)
        out = []
        for e, grid in enumerate(rows, start=1):
            P, T = tr.n_op_scenarios(e), tr.stage(e).n_periods
            arr = np.empty((P, T))
            if not isinstance(grid, list):
                raise InstanceError(f"field '{name}' stage {e} must be [scenario][period]")
            for pi in range(P):
                row = grid[pi] if pi < len(grid) else None
                for t in range(T):
                    if row is None or t >= len(row) or row[t] is None:
                        raise InstanceError(
                            f"coverage: {name} missing at operational node "
                            f"(stage {e}, scenario {pi}, period {t})")
                    arr[pi, t] = float(row[t])
            out.append(arr)
        return out

    def windows(self, raw, name: str) -> list[frozenset[int]]:
        return self.per_stage(raw, name, cast=lambda v: frozenset(int(t) for t in v))


def instance_from_dict(doc: dict) -> Instance:
    """Build and validate an :class:`Instance` from a parsed JSON document."""
    r = _Reader()
    if doc.get("schema") != SCHEMA:
        raise InstanceError(f"unsupported or missing schema tag {doc.get('schema')!r}; expected {SCHEMA!r}")
    t = r.get(doc, "tree", "")
    stages = []
    for e, s in enumerate(r.get(t, "stages", "tree"), start=1):
        stages.append(Stage(days=int(r.get(s, "days", f"tree.stages[{e}]")),
                            hours=tuple(int(h) for h in r.get(s, "period_hours", f"tree.stages[{e}]")),
                            pv_periods=frozenset(int(p) for p in s.get("pv_periods", []))))
    nodes = sorted(r.get(t, "strategic_nodes", "tree"), key=lambda d: int(d["id"]))
    if [int(d["id"]) for d in nodes] != list(range(len(nodes))):
        raise InstanceError("strategic node ids must be dense 0..N-1")
    parents = [None if d.get("parent") is None else int(d["parent"]) for d in nodes]
    weights = [as_fraction(r.get(d, "weight", f"tree.strategic_nodes[{k}]")) for k, d in enumerate(nodes)]
    node_stages = [int(r.get(d, "stage", f"tree.strategic_nodes[{k}]")) for k, d in enumerate(nodes)]
    op = [[as_fraction(p) for p in ps] for ps in r.get(t, "operational_scenarios", "tree")]
    # normalise once: node weights by the root weight, operational probabilities per stage
    root_w = weights[0] if weights and weights[0] > 0 else Fraction(1)
    weights = [w / root_w for w in weights]
    op = [[p / sum(ps) for p in ps] if sum(ps) > 0 else ps for ps in op]
    try:
        tree = MultiHorizonTree(stages, parents, weights, op, node_stages=node_stages)
    except ValueError as err:
        raise InstanceError(str(err)) from err
    bad = validate_tree(tree)
    if bad:
        raise InstanceError("invalid tree: " + "; ".join(bad), bad)
    r.tree = tree

    pvs = []
    for k, p in enumerate(r.get(doc, "pv_technologies", "")):
        path = f"pv_technologies[{k}]"
        pvs.append(PvTechnology(
            name=str(p.get("id", k)),
            capacity_kw=float(r.get(p, "capacity_kw", path)),
            max_panels=float(r.get(p, "max_panels", path)),
            prep_cost=r.per_node(r.get(p, "prep_cost", path), f"{path}.prep_cost"),
            install_cost=r.per_node(r.get(p, "install_cost", path), f"{path}.install_cost"),
            maint_cost=r.per_node(r.get(p, "maint_cost", path), f"{path}.maint_cost"),
            residual_value=r.per_node(r.get(p, "residual_value", path), f"{path}.residual_value"),
            gen_cost=r.per_op_node(r.get(p, "gen_cost", path), f"{path}.gen_cost"),
            availability=r.per_op_node(r.get(p, "availability", path), f"{path}.availability"),
        ))
    besses = []
    for k, b in enumerate(r.get(doc, "bess_technologies", "")):
        path = f"bess_technologies[{k}]"
        besses.append(BessTechnology(
            name=str(b.get("id", k)),
            unit_kwh=float(r.get(b, "unit_kwh", path)),
            loss=np.asarray(r.per_stage(r.get(b, "loss", path), f"{path}.loss")),
            charge_depth=np.asarray(r.per_stage(r.get(b, "charge_depth", path), f"{path}.charge_depth")),
            discharge_depth=np.asarray(r.per_stage(r.get(b, "discharge_depth", path), f"{path}.discharge_depth")),
            op_cost=float(r.get(b, "op_cost", path)),
            prep_cost=r.per_node(r.get(b, "prep_cost", path), f"{path}.prep_cost"),
            install_cost=r.per_node(r.get(b, "install_cost", path), f"{path}.install_cost"),
            maint_cost=r.per_node(r.get(b, "maint_cost", path), f"{path}.maint_cost"),
            residual_value=r.per_node(r.get(b, "residual_value", path), f"{path}.residual_value"),
            max_units=int(r.get(b, "max_units", path)),
        ))
    lim = r.get(doc, "limits", "")
    limits = SystemLimits(
        pv_total_max=float(r.get(lim, "pv_total_max", "limits")),
        pv_min_batch=float(r.get(lim, "pv_min_batch", "limits")),
        bess_total_max=int(r.get(lim, "bess_total_max", "limits")),
        bess_min_batch=int(r.get(lim, "bess_min_batch", "limits")),
        budget=r.per_node(r.get(lim, "budget", "limits"), "limits.budget"),
    )
    ld = r.get(doc, "loads", "")
    elastic = []
    for k, el in enumerate(ld.get("elastic", [])):
        path = f"loads.elastic[{k}]"
        elastic.append(ElasticLoad(
            name=str(el.get("id", k)),
            setpoint=r.per_op_node(r.get(el, "setpoint", path), f"{path}.setpoint"),
            window=r.windows(r.get(el, "window", path), f"{path}.window"),
            max_curtail=r.per_period(r.get(el, "max_curtail", path), f"{path}.max_curtail"),
            max_ramp=r.per_period(r.get(el, "max_ramp", path), f"{path}.max_ramp"),
            discomfort=r.per_period(r.get(el, "discomfort", path), f"{path}.discomfort"),
        ))
    deferrable = []
    for k, d in enumerate(ld.get("deferrable", [])):
        path = f"loads.deferrable[{k}]"
        deferrable.append(DeferrableLoad(
            name=str(d.get("id", k)),
            ref_start=r.per_stage(r.get(d, "ref_start", path), f"{path}.ref_start", int),
            power_kw=r.per_stage(r.get(d, "power_kw", path), f"{path}.power_kw", float),
            duration_h=r.per_stage(r.get(d, "duration_h", path), f"{path}.duration_h", int),
            window=r.windows(r.get(d, "window", path), f"{path}.window"),
            discomfort=r.per_period(r.get(d, "discomfort", path), f"{path}.discomfort"),
        ))
    loads = Loads(
        base=r.per_op_node(r.get(ld, "base", "loads"), "loads.base"),
        elastic=elastic, deferrable=deferrable,
        incompatible=[(int(a), int(b)) for a, b in ld.get("incompatible", [])],
        precedence=[(int(p["before"]), int(p["after"]), int(p.get("latency", 0)))
                    for p in ld.get("precedence", [])],
    )
    g = r.get(doc, "grid", "")
    grid = GridParams(import_price=r.per_op_node(r.get(g, "import_price", "grid"), "grid.import_price"),
                      export_price=r.per_op_node(r.get(g, "export_price", "grid"), "grid.export_price"))
    dc = r.get(doc, "discomfort", "")
    profiles = r.per_stage(dc.get("profiles", [[]] * tree.n_stages), "discomfort.profiles",
                           cast=lambda ps: [DiscomfortProfile(float(p["threshold"]), float(p["prob_bound"]),
                                                              float(p["max_excess"]), float(p["expected_excess"]))
                                            for p in ps])
    policy = DiscomfortPolicy(
        expected_cap=r.per_stage(r.get(dc, "expected_cap", "discomfort"), "discomfort.expected_cap"),
        profiles=profiles)
    inst = Instance(tree=tree, pv=pvs, bess=besses, limits=limits, loads=loads, grid=grid,
                    discomfort=policy, meta=dict(doc.get("meta", {})))
    bad = validate_instance(inst)
    if bad:
        raise InstanceError("invalid instance: " + "; ".join(bad), bad)
    return inst


def load_instance(path: str | Path) -> Instance:
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as err:
        raise InstanceError(f"parse error at line {err.lineno}, column {err.colno}: {err.msg}") from err
    return instance_from_dict(doc)


def _num(v: float):
    f = float(v)
    return int(f) if f.is_integer() and abs(f) < 2**53 else f


def _arr(a) -> list:
    return [_arr(x) for x in a] if np.ndim(a) > 0 else _num(a)


def instance_to_dict(inst: Instance) -> dict:
    tr = inst.tree
    E = tr.n_stages
    return {
        "schema": SCHEMA,
        "meta": inst.meta,
        "tree": {
            "stages": [{"days": s.days, "period_hours": list(s.hours),
                        "pv_periods": sorted(s.pv_periods)} for s in tr.stages],
            "strategic_nodes": [{"id": n, "stage": tr.node_stage[n], "parent": tr.parents[n],
                                 "weight": str(tr.weights[n])} for n in range(tr.n_nodes)],
            "operational_scenarios": [[str(p) for p in ps] for ps in tr.op_probs],
        },
        "pv_technologies": [{
            "id": p.name, "capacity_kw": _num(p.capacity_kw), "max_panels": _num(p.max_panels),
            "prep_cost": _arr(p.prep_cost), "install_cost": _arr(p.install_cost),
            "maint_cost": _arr(p.maint_cost), "residual_value": _arr(p.residual_value),
            "gen_cost": [_arr(a) for a in p.gen_cost], "availability": [_arr(a) for a in p.availability],
        } for p in inst.pv],
        "bess_technologies": [{
            "id": b.name, "unit_kwh": _num(b.unit_kwh), "loss": _arr(b.loss),
            "charge_depth": _arr(b.charge_depth), "discharge_depth": _arr(b.discharge_depth),
            "op_cost": _num(b.op_cost), "prep_cost": _arr(b.prep_cost),
            "install_cost": _arr(b.install_cost), "maint_cost": _arr(b.maint_cost),
            "residual_value": _arr(b.residual_value), "max_units": int(b.max_units),
        } for b in inst.bess],
        "limits": {
            "pv_total_max": _num(inst.limits.pv_total_max), "pv_min_batch": _num(inst.limits.pv_min_batch),
            "bess_total_max": int(inst.limits.bess_total_max), "bess_min_batch": int(inst.limits.bess_min_batch),
            "budget": _arr(inst.limits.budget),
        },
        "loads": {
            "base": [_arr(a) for a in inst.loads.base],
            "elastic": [{
                "id": el.name, "setpoint": [_arr(a) for a in el.setpoint],
                "window": [sorted(w) for w in el.window],
                "max_curtail": [_arr(a) for a in el.max_curtail],
                "max_ramp": [_arr(a) for a in el.max_ramp],
                "discomfort": [_arr(a) for a in el.discomfort],
            } for el in inst.loads.elastic],
            "deferrable": [{
                "id": d.name, "ref_start": [int(v) for v in d.ref_start],
                "power_kw": [_num(v) for v in d.power_kw], "duration_h": [int(v) for v in d.duration_h],
                "window": [sorted(w) for w in d.window],
                "discomfort": [_arr(a) for a in d.discomfort],
            } for d in inst.loads.deferrable],
            "incompatible": [[a, b] for a, b in inst.loads.incompatible],
            "precedence": [{"before": a, "after": b, "latency": lat} for a, b, lat in inst.loads.precedence],
        },
        "grid": {"import_price": [_arr(a) for a in inst.grid.import_price],
                 "export_price": [_arr(a) for a in inst.grid.export_price]},
        "discomfort": {
            "expected_cap": [_num(v) for v in inst.discomfort.expected_cap[:E]],
            "profiles": [[{"threshold": _num(p.threshold), "prob_bound": _num(p.prob_bound),
                           "max_excess": _num(p.max_excess), "expected_excess": _num(p.expected_excess)}
                          for p in ps] for ps in inst.discomfort.profiles],
        },
    }


def dumps_instance(inst: Instance) -> str:
    return json.dumps(instance_to_dict(inst), separators=(",", ":")) + "\n"


def save_instance(inst: Instance, path: str | Path) -> None:
    from .io import atomic_write
    atomic_write(path, dumps_instance(inst))
