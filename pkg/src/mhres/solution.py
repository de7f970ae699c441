"""Full-tree solutions: per-node arrays, named-value conversion and JSON I/O."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping

import numpy as np

from .instance import Instance
from .milp import AbstractMilp, SolveOutcome
from .model import Variant, node_variables, vname

SOLUTION_SCHEMA = "mhres-solution/1"


class MissingValues(KeyError):
    pass


def _op_shapes(inst: Instance, n: int, variant: Variant) -> dict[str, tuple[int, ...]]:
    tr = inst.tree
    e = tr.node_stage[n]
    P, T = tr.n_op_scenarios(e), tr.stage(e).n_periods
    I, B = inst.n_pv, inst.n_bess
    J1, J2 = len(inst.loads.elastic), len(inst.loads.deferrable)
    Pp = len(inst.discomfort.profiles[e - 1]) if variant.has_sd else 0
    return {"zR": (I, P, T), "zG": (P, T), "y": (B, P, T), "y_plus": (B, P, T),
            "y_minus": (B, P, T), "dl1": (J1, P, T), "delta": (J2, P, T),
            "s": (Pp, P), "eta": (Pp, P)}


@dataclass
class Solution:
    """Decision values of every strategic node.

    ``strategic[f]`` has shape ``[N, I]`` for PV families and ``[N, B]`` for
    BESS families; ``operational[n][f]`` holds the node's operational and
    risk arrays (entries outside a family's index set stay zero).
    """
    variant: Variant
    strategic: dict[str, np.ndarray]
    operational: list[dict[str, np.ndarray]]
    objective: float | None = None
    meta: dict = field(default_factory=dict)

    @classmethod
    def empty(cls, inst: Instance, variant) -> "Solution":
        variant = Variant.parse(variant)
        N = inst.tree.n_nodes
        strat = {f: np.zeros((N, inst.n_pv)) for f in ("x", "x_tilde", "alpha")}
        strat.update({f: np.zeros((N, inst.n_bess)) for f in ("xp", "xp_tilde", "beta")})
        op = [{f: np.zeros(s) for f, s in _op_shapes(inst, n, variant).items()} for n in range(N)]
        return cls(variant, strat, op)

    def _slot(self, fam: str, n: int, idx: tuple):
        if fam in self.strategic:
            return self.strategic[fam], (n,) + idx
        return self.operational[n][fam], idx

    def get(self, fam: str, n: int, *idx) -> float:
        arr, pos = self._slot(fam, n, idx)
        return float(arr[pos])

    def fill(self, inst: Instance, values: Mapping[str, float], nodes: Iterable[int] | None = None,
             key: Callable[[int], str] = str, strict: bool = True) -> "Solution":
        """Copy named values of ``nodes`` into the arrays (in place)."""
        nodes = range(inst.tree.n_nodes) if nodes is None else nodes
        missing = []
        for n in nodes:
            k = key(n)
            for fam, idx in node_variables(inst, self.variant, n):
                nm = vname(fam, k, *idx)
                if nm in values:
                    arr, pos = self._slot(fam, n, idx)
                    arr[pos] = values[nm]
                elif strict:
                    missing.append(nm)
        if missing:
            raise MissingValues(f"missing variable values: {missing[:5]}"
                                + (f" (+{len(missing) - 5} more)" if len(missing) > 5 else ""))
        return self

    def to_values(self, inst: Instance, nodes: Iterable[int] | None = None,
                  key: Callable[[int], str] = str) -> dict[str, float]:
        """Named values (usable as fixings) of the given nodes."""
        nodes = range(inst.tree.n_nodes) if nodes is None else nodes
        out = {}
        for n in nodes:
            k = key(n)
            for fam, idx in node_variables(inst, self.variant, n):
                out[vname(fam, k, *idx)] = self.get(fam, n, *idx)
        return out

    def copy(self) -> "Solution":
        return Solution(self.variant, {k: v.copy() for k, v in self.strategic.items()},
                        [{k: v.copy() for k, v in d.items()} for d in self.operational],
                        self.objective, dict(self.meta))

    # -- serialisation -----------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "schema": SOLUTION_SCHEMA,
            "variant": self.variant.value,
            "objective": self.objective,
            "meta": self.meta,
            "strategic": {k: v.tolist() for k, v in self.strategic.items()},
            "nodes": [{k: v.tolist() for k, v in d.items()} for d in self.operational],
        }

    @classmethod
    def from_dict(cls, doc: dict, inst: Instance | None = None) -> "Solution":
        if doc.get("schema") != SOLUTION_SCHEMA:
            raise ValueError(f"unsupported solution schema {doc.get('schema')!r}")
        variant = Variant.parse(doc["variant"])
        strat = {k: np.asarray(v, dtype=float) for k, v in doc["strategic"].items()}
        op = [{k: np.asarray(v, dtype=float) for k, v in d.items()} for d in doc["nodes"]]
        sol = cls(variant, strat, op, doc.get("objective"), dict(doc.get("meta", {})))
        if inst is not None:
            ref = cls.empty(inst, variant)
            for k, v in ref.strategic.items():
                if k not in strat or strat[k].reshape(-1).size != v.size:
                    raise MissingValues(f"missing variable values: strategic family {k}")
                strat[k] = strat[k].reshape(v.shape)
            if len(op) != inst.tree.n_nodes:
                raise MissingValues("missing variable values: solution does not cover every node")
            for n, d in enumerate(ref.operational):
                for k, v in d.items():
                    if k not in op[n] or op[n][k].size != v.size:
                        raise MissingValues(f"missing variable values: {k} at node {n}")
                    op[n][k] = op[n][k].reshape(v.shape)
        return sol


def solution_from_outcome(inst: Instance, model: AbstractMilp, outcome: SolveOutcome) -> Solution:
    """Full-tree solution from a solve of the complete model."""
    if not outcome.has_solution:
        raise ValueError(f"no solution available (status {outcome.status})")
    sol = Solution.empty(inst, model.variant)
    sol.fill(inst, model.values(outcome.x))
    sol.objective = outcome.objective
    return sol


def save_solution(sol: Solution, path: str | Path, extra: dict | None = None) -> None:
    from .io import atomic_write
    doc = sol.to_dict()
    if extra:
        doc.update(extra)
    atomic_write(path, json.dumps(doc, sort_keys=True) + "\n")


def load_solution(path: str | Path, inst: Instance | None = None) -> Solution:
    return Solution.from_dict(json.loads(Path(path).read_text()), inst)
