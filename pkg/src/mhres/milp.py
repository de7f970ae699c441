"""Solver-agnostic MILP container and solver backends.

:class:`AbstractMilp` stores variables, sparse linear rows and a linear
objective (minimisation) and knows nothing about the energy model.  The
default backend is HiGHS through :func:`scipy.optimize.milp`; the backend is
chosen with the ``MHRES_SOLVER`` environment variable.
"""
from __future__ import annotations

import math
import os
import time
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np
import scipy.sparse as sp

CONTINUOUS, INTEGER, BINARY = "continuous", "integer", "binary"
LE, EQ, GE = "<=", "=", ">="

OPTIMAL = "optimal"
FEASIBLE_GAP = "feasible-gap"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
LIMIT = "limit"


class ModelError(ValueError):
    pass


class BackendUnavailable(RuntimeError):
    pass


@dataclass
class SolverControls:
    gap: float = 1e-6
    time_limit: float | None = None
    threads: int = 1
    presolve: bool = True


class AbstractMilp:
    """Variables, linear constraints and a minimisation objective."""

    def __init__(self, name: str = "model"):
        self.name = name
        self.var_names: list[str] = []
        self.kinds: list[str] = []
        self.lb: list[float] = []
        self.ub: list[float] = []
        self._index: dict[str, int] = {}
        self.obj: dict[int, float] = {}
        self.obj_const = 0.0
        self.row_names: list[str] = []
        self.senses: list[str] = []
        self.rhs: list[float] = []
        self._rows: list[int] = []
        self._cols: list[int] = []
        self._vals: list[float] = []
        self._row_names: set[str] = set()
        self.controls = SolverControls()

    # -- construction --------------------------------------------------------
    def add_var(self, name: str, kind: str = CONTINUOUS, lb: float = 0.0,
                ub: float = math.inf) -> int:
        if name in self._index:
            raise ModelError(f"duplicate variable {name}")
        if kind == BINARY:
            lb, ub = max(lb, 0.0), min(ub, 1.0)
        if lb > ub + 1e-12:
            raise ModelError(f"variable {name}: empty domain [{lb}, {ub}]")
        k = len(self.var_names)
        self._index[name] = k
        self.var_names.append(name)
        self.kinds.append(kind)
        self.lb.append(float(lb))
        self.ub.append(float(ub))
        return k

    def has_var(self, name: str) -> bool:
        return name in self._index

    def var(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise ModelError(f"undeclared variable {name}") from None

    def fix(self, name: str, value: float, tol: float = 1e-7) -> None:
        """Turn a variable into a constant at ``value`` (checked against its bounds)."""
        k = self.var(name)
        if value < self.lb[k] - tol or value > self.ub[k] + tol:
            raise ModelError(f"fixing {name}={value} outside bounds [{self.lb[k]}, {self.ub[k]}]")
        value = min(max(value, self.lb[k]), self.ub[k])
        self.lb[k] = self.ub[k] = float(value)

    def add_obj(self, k: int, coef: float) -> None:
        if coef:
            self.obj[k] = self.obj.get(k, 0.0) + coef

    def add_constr(self, terms: Iterable[tuple[int, float]], sense: str, rhs: float,
                   name: str) -> int:
        if sense not in (LE, EQ, GE):
            raise ModelError(f"bad sense {sense!r}")
        if name in self._row_names:
            raise ModelError(f"duplicate constraint {name}")
        r = len(self.row_names)
        merged: dict[int, float] = {}
        for k, c in terms:
            if not 0 <= k < len(self.var_names):
                raise ModelError(f"constraint {name} references undeclared column {k}")
            merged[k] = merged.get(k, 0.0) + c
        for k, c in merged.items():
            if c:
                self._rows.append(r)
                self._cols.append(k)
                self._vals.append(c)
        self._row_names.add(name)
        self.row_names.append(name)
        self.senses.append(sense)
        self.rhs.append(float(rhs))
        return r

    # -- views ---------------------------------------------------------------
    @property
    def n_vars(self) -> int:
        return len(self.var_names)

    @property
    def n_rows(self) -> int:
        return len(self.row_names)

    def matrix(self) -> sp.csr_matrix:
        return sp.csr_matrix((self._vals, (self._rows, self._cols)),
                             shape=(self.n_rows, self.n_vars))

    def objective_vector(self) -> np.ndarray:
        c = np.zeros(self.n_vars)
        for k, v in self.obj.items():
            c[k] = v
        return c

    def stats(self) -> dict[str, int]:
        kinds = self.kinds
        return {
            "constraints": self.n_rows,
            "integers": sum(k == INTEGER for k in kinds),
            "binaries": sum(k == BINARY for k in kinds),
            "continuous": sum(k == CONTINUOUS for k in kinds),
            "nonzeros": len(self._vals),
        }

    def values(self, x: np.ndarray) -> dict[str, float]:
        return dict(zip(self.var_names, map(float, x)))

    def to_lp(self) -> str:
        """The model in CPLEX LP text format with names preserved."""
        names = [_lp_name(n) for n in self.var_names]

        def expr(pairs):
            parts = []
            for k, c in pairs:
                sign = "-" if c < 0 else "+"
                parts.append(f"{sign} {abs(c):.17g} {names[k]}")
            return " ".join(parts) if parts else "0 " + (names[0] if names else "")

        lines = [f"\\ {self.name}", "Minimize", " obj: " + expr(sorted(self.obj.items())),
                 "Subject To"]
        A = self.matrix().tocsr()
        for r in range(self.n_rows):
            lo, hi = A.indptr[r], A.indptr[r + 1]
            pairs = list(zip(A.indices[lo:hi], A.data[lo:hi]))
            op = {LE: "<=", EQ: "=", GE: ">="}[self.senses[r]]
            lines.append(f" {_lp_name(self.row_names[r])}: {expr(pairs)} {op} {self.rhs[r]:.17g}")
        lines.append("Bounds")
        for k, n in enumerate(names):
            lo, hi = self.lb[k], self.ub[k]
            lo_s = "-inf" if lo == -math.inf else f"{lo:.17g}"
            hi_s = "+inf" if hi == math.inf else f"{hi:.17g}"
            lines.append(f" {lo_s} <= {n} <= {hi_s}")
        gen = [names[k] for k, t in enumerate(self.kinds) if t == INTEGER]
        binv = [names[k] for k, t in enumerate(self.kinds) if t == BINARY]
        if gen:
            lines += ["General"] + [f" {n}" for n in gen]
        if binv:
            lines += ["Binary"] + [f" {n}" for n in binv]
        lines.append("End")
        return "\n".join(lines) + "\n"


def _lp_name(name: str) -> str:
    return (name.replace("[", "(").replace("]", ")").replace(",", "_")
            .replace("=", "").replace(":", "."))


@dataclass
class SolveOutcome:
    status: str
    objective: float = math.nan
    best_bound: float = math.nan
    x: np.ndarray | None = field(default=None, repr=False)
    wall_time: float = 0.0
    message: str = ""

    @property
    def has_solution(self) -> bool:
        return self.x is not None and self.status in (OPTIMAL, FEASIBLE_GAP, LIMIT)

    @property
    def gap(self) -> float:
        if not self.has_solution:
            return math.nan
        return (self.objective - self.best_bound) / max(1.0, abs(self.objective))


# -- backends ---------------------------------------------------------------

def _solve_highs(model: AbstractMilp, controls: SolverControls) -> SolveOutcome:
    from scipy.optimize import Bounds, LinearConstraint, milp

    n = model.n_vars
    c = model.objective_vector()
    if n == 0:
        return SolveOutcome(OPTIMAL, model.obj_const, model.obj_const, np.zeros(0))
    integrality = np.array([0 if k == CONTINUOUS else 1 for k in model.kinds])
    rhs = np.asarray(model.rhs)
    lo = np.where([s in (GE, EQ) for s in model.senses], rhs, -np.inf)
    hi = np.where([s in (LE, EQ) for s in model.senses], rhs, np.inf)
    cons = [LinearConstraint(model.matrix(), lo, hi)] if model.n_rows else []
    opts = {"disp": False, "presolve": controls.presolve, "mip_rel_gap": controls.gap}
    if controls.time_limit:
        opts["time_limit"] = float(controls.time_limit)
    t0 = time.perf_counter()
    try:
        res = milp(c, constraints=cons, integrality=integrality,
                   bounds=Bounds(np.asarray(model.lb), np.asarray(model.ub)), options=opts)
    except (ValueError, FloatingPointError) as err:  # numerical trouble is a status
        return SolveOutcome(INFEASIBLE, message=f"backend error: {err}",
                            wall_time=time.perf_counter() - t0)
    wall = time.perf_counter() - t0
    if res.status == 2:
        return SolveOutcome(INFEASIBLE, message=res.message, wall_time=wall)
    if res.status == 3:
        return SolveOutcome(UNBOUNDED, message=res.message, wall_time=wall)
    if res.x is None:
        return SolveOutcome(LIMIT, message=res.message, wall_time=wall)
    x = np.asarray(res.x, dtype=float)
    ints = integrality == 1
    x[ints] = np.round(x[ints])
    x = np.clip(x, model.lb, model.ub)
    obj = float(c @ x) + model.obj_const
    bound = getattr(res, "mip_dual_bound", None)
    if bound is None or not np.isfinite(bound) or not ints.any():
        bound = float(res.fun)
    bound = min(float(bound) + model.obj_const, obj)
    if res.status == 0:
        status = OPTIMAL
    else:
        status = LIMIT
    return SolveOutcome(status, obj, bound, x, wall, res.message)


BACKENDS: dict[str, Callable[[AbstractMilp, SolverControls], SolveOutcome]] = {
    "highs": _solve_highs,
    "scipy": _solve_highs,
}


def default_backend() -> str:
    return os.environ.get("MHRES_SOLVER", "highs").lower()


def solve(model: AbstractMilp, controls: SolverControls | None = None,
          backend: str | None = None) -> SolveOutcome:
    """Solve ``model`` with the selected backend."""
    name = (backend or default_backend()).lower()
    if name not in BACKENDS:
        raise BackendUnavailable(f"solver backend {name!r} unavailable; known: {sorted(BACKENDS)}")
    return BACKENDS[name](model, controls or model.controls)
