"""Exhaustive-enumeration oracle for tiny MILPs.

Integer columns are assigned by depth-first search; a row whose columns
are all integer is checked as soon as its last column is set.  Every
complete assignment leaves an LP over the continuous columns, solved by
the same HiGHS backend.  Independent of any branch-and-bound logic.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, milp

from mhres.milp import CONTINUOUS, EQ, GE, LE


class TooLarge(RuntimeError):
    pass


def _row_bounds(model):
    rhs = np.asarray(model.rhs, dtype=float)
    lo = np.where([s in (GE, EQ) for s in model.senses], rhs, -np.inf)
    hi = np.where([s in (LE, EQ) for s in model.senses], rhs, np.inf)
    return lo, hi


def integer_assignments(model, cap: int):
    """All integer assignments satisfying the pure-integer rows."""
    A = model.matrix().tocsr()
    lo, hi = _row_bounds(model)
    ints = [k for k, t in enumerate(model.kinds) if t != CONTINUOUS]
    is_int = np.zeros(model.n_vars, bool)
    is_int[ints] = True
    order = {k: pos for pos, k in enumerate(ints)}
    # rows touching only integer columns, keyed by the position of their last column
    checks: dict[int, list[int]] = {}
    for r in range(model.n_rows):
        cols = A.indices[A.indptr[r]:A.indptr[r + 1]]
        if len(cols) and is_int[cols].all():
            checks.setdefault(max(order[c] for c in cols), []).append(r)
    domains = [range(int(math.ceil(model.lb[k])), int(math.floor(model.ub[k])) + 1) for k in ints]
    x = np.zeros(model.n_vars)
    out = []

    def ok(pos):
        for r in checks.get(pos, ()):
            a, b = A.indptr[r], A.indptr[r + 1]
            v = float(A.data[a:b] @ x[A.indices[a:b]])
            if v < lo[r] - 1e-9 or v > hi[r] + 1e-9:
                return False
        return True

    def rec(pos):
        if pos == len(ints):
            out.append(x[ints].copy())
            if len(out) > cap:
                raise TooLarge(f"more than {cap} integer assignments")
            return
        k = ints[pos]
        for val in domains[pos]:
            x[k] = val
            if ok(pos):
                rec(pos + 1)
        x[k] = 0.0

    rec(0)
    return ints, out


def enumerate_optimum(model, cap: int = 2000) -> tuple[float, int]:
    """Minimum objective over all integer assignments, and the count of LPs solved."""
    ints, assignments = integer_assignments(model, cap)
    c = model.objective_vector()
    lo, hi = _row_bounds(model)
    cons = [LinearConstraint(model.matrix(), lo, hi)]
    lb0, ub0 = np.asarray(model.lb, float), np.asarray(model.ub, float)
    best = math.inf
    for vals in assignments:
        lb, ub = lb0.copy(), ub0.copy()
        lb[ints] = vals
        ub[ints] = vals
        res = milp(c, constraints=cons, bounds=Bounds(lb, ub), options={"presolve": True})
        if res.status == 0:
            best = min(best, float(res.fun) + model.obj_const)
    return best, len(assignments)
