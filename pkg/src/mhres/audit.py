"""Solver-free feasibility audit, cost evaluation and discomfort statistics.

Everything here is recomputed from the instance data and the solution
arrays; nothing is read back from a built model.  Deferrable supply is
replayed from the chosen starts (each start covers its run of periods)
rather than through the balance-equation index sets.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .instance import Instance
from .model import Variant
from .solution import Solution

INT_TOL = 1e-6


@dataclass
class Violation:
    tag: str
    index: tuple
    residual: float

    def __str__(self) -> str:
        return f"({self.tag}) at {self.index}: residual {self.residual:.3g}"

    def to_dict(self) -> dict:
        return {"constraint": f"({self.tag})", "index": list(self.index), "residual": self.residual}


@dataclass
class AuditReport:
    variant: Variant
    tol: float
    violations: list[Violation] = field(default_factory=list)
    max_residual: float = 0.0
    checked: int = 0

    @property
    def passed(self) -> bool:
        return not self.violations

    def tags(self) -> set[str]:
        return {v.tag for v in self.violations}

    def to_dict(self) -> dict:
        return {"status": "PASS" if self.passed else "FAIL", "variant": self.variant.value,
                "tol": self.tol, "max_relative_residual": self.max_residual,
                "checked": self.checked, "violations": [v.to_dict() for v in self.violations]}


class _Checker:
    def __init__(self, tol: float, variant: Variant):
        self.rep = AuditReport(variant, tol)
        self.tol = tol

    def le(self, tag: str, idx: tuple, lhs: float, rhs: float, scale: float = 0.0) -> None:
        self._record(tag, idx, lhs - rhs, max(1.0, abs(rhs), abs(lhs), scale))

    def eq(self, tag: str, idx: tuple, lhs: float, rhs: float, scale: float = 0.0) -> None:
        self._record(tag, idx, abs(lhs - rhs), max(1.0, abs(rhs), abs(lhs), scale))

    def integral(self, tag: str, idx: tuple, v: float, binary: bool = False) -> None:
        self.rep.checked += 1
        bad = abs(v - round(v)) > INT_TOL or (binary and not -INT_TOL <= v <= 1 + INT_TOL)
        if bad:
            self.rep.violations.append(Violation(tag, idx, abs(v - round(v)) or abs(v)))

    def _record(self, tag: str, idx: tuple, excess: float, scale: float) -> None:
        self.rep.checked += 1
        rel = excess / scale
        if rel > self.rep.max_residual:
            self.rep.max_residual = rel
        if rel > self.tol:
            self.rep.violations.append(Violation(tag, idx, excess))


def _m2(hours, t0: int, m1: int) -> int | None:
    acc = 0
    for k in range(t0, len(hours)):
        acc += hours[k]
        if acc >= m1:
            return k - t0 + 1
    return None


def scenario_discomfort(inst: Instance, sol: Solution, n: int, pi: int) -> float:
    """Daily discomfort of operational scenario ``pi`` at strategic node ``n``."""
    e = inst.tree.node_stage[n]
    hours = inst.tree.stage(e).hours
    op = sol.operational[n]
    total = 0.0
    for j, el in enumerate(inst.loads.elastic):
        for t in el.window[e - 1]:
            total += hours[t] * el.discomfort[e - 1][t] * op["dl1"][j, pi, t]
    for j, d in enumerate(inst.loads.deferrable):
        for t in d.window[e - 1]:
            total += d.discomfort[e - 1][t] * op["delta"][j, pi, t]
    return float(total)


def check_feasibility(inst: Instance, sol: Solution, variant=None, tol: float = 1e-6) -> AuditReport:
    """Re-evaluate every constraint family of ``variant`` on ``sol``."""
    variant = Variant.parse(variant if variant is not None else sol.variant)
    if variant.has_sd and not sol.variant.has_sd:
        raise KeyError("missing variable values: risk variables s/eta absent from a non-SD solution")
    ck = _Checker(tol, variant)
    tr = inst.tree
    S = sol.strategic
    lim = inst.limits
    for n in range(tr.n_nodes):
        p = tr.parents[n]

        def prev(fam, k):
            return 0.0 if p is None else S[fam][p, k]

        cost = 0.0
        for i, pv in enumerate(inst.pv):
            x, xt, al = S["x"][n, i], S["x_tilde"][n, i], S["alpha"][n, i]
            xa, xta = prev("x", i), prev("x_tilde", i)
            ck.integral("2a", (n, i, "x"), x, True)
            ck.integral("2a", (n, i, "alpha"), al, True)
            ck.le("2b", (n, i), al, x)
            ck.le("2c", (n, i), xa, x)
            ck.le("2d", (n, i, "lo"), xta, xt)
            ck.le("2d", (n, i, "hi"), xt, pv.max_panels * x, pv.max_panels)
            ck.le("2g", (n, i, "lo"), lim.pv_min_batch * al, xt - xta, pv.max_panels)
            ck.le("2g", (n, i, "hi"), xt - xta, pv.max_panels * al, pv.max_panels)
            cost += pv.prep_cost[n] * (x - xa) + pv.install_cost[n] * (xt - xta)
        if inst.n_pv:
            ck.le("2e", (n,), sum(S["x"][n, i] - prev("x", i) for i in range(inst.n_pv)), 1)
            ck.le("2f", (n,), float(S["x_tilde"][n].sum()), lim.pv_total_max)
        for b, bt in enumerate(inst.bess):
            x, xt, be = S["xp"][n, b], S["xp_tilde"][n, b], S["beta"][n, b]
            xa, xta = prev("xp", b), prev("xp_tilde", b)
            ck.integral("2h", (n, b, "xp"), x, True)
            ck.integral("2h", (n, b, "beta"), be, True)
            ck.le("2i", (n, b), xa, x)
            ck.le("2j", (n, b), be, x)
            ck.integral("2k", (n, b), xt)
            ck.le("2l", (n, b, "lo"), xta, xt)
            ck.le("2l", (n, b, "hi"), xt, bt.max_units * x, bt.max_units)
            ck.le("2o", (n, b, "lo"), lim.bess_min_batch * be, xt - xta, bt.max_units)
            ck.le("2o", (n, b, "hi"), xt - xta, bt.max_units * be, bt.max_units)
            cost += bt.prep_cost[n] * (x - xa) + bt.install_cost[n] * (xt - xta)
        if inst.n_bess:
            ck.le("2m", (n,), sum(S["xp"][n, b] - prev("xp", b) for b in range(inst.n_bess)), 1)
            ck.le("2n", (n,), float(S["xp_tilde"][n].sum()), lim.bess_total_max)
        if inst.n_pv or inst.n_bess:
            ck.le("2p", (n,), cost, float(lim.budget[n]))
        _check_operational(inst, sol, n, ck)
        _check_loads(inst, sol, n, ck)
        if variant.has_expected_cap:
            _check_discomfort(inst, sol, n, variant, ck)
    return ck.rep


def _check_operational(inst: Instance, sol: Solution, n: int, ck: _Checker) -> None:
    tr = inst.tree
    e = tr.node_stage[n]
    st = tr.stage(e)
    op = sol.operational[n]
    S = sol.strategic
    p = tr.parents[n]
    P = tr.n_op_scenarios(e)
    for pi in range(P):
        # deferrable supply replayed from the chosen starts
        supply = np.zeros(st.n_periods)
        for j, d in enumerate(inst.loads.deferrable):
            for ts in range(st.n_periods):
                v = op["delta"][j, pi, ts]
                if v == 0:
                    continue
                k = _m2(st.hours, ts, d.duration_h[e - 1])
                if k is None:
                    continue
                supply[ts:ts + k] += d.power_kw[e - 1] * v
        for t in st.periods:
            m_t = st.hours[t]
            lhs = op["zG"][pi, t]
            ck.le("3b", (n, pi, t, "zG>=0"), -op["zG"][pi, t], 0)
            for i, pv in enumerate(inst.pv):
                zr = op["zR"][i, pi, t]
                if t in st.pv_periods:
                    gen = pv.availability[e - 1][pi, t] * pv.capacity_kw * S["x_tilde"][n, i]
                    ck.le("3a", (n, i, pi, t), zr, gen)
                    ck.le("3a", (n, i, pi, t, "nonneg"), -zr, 0)
                    lhs += zr
                else:
                    ck.eq("3a", (n, i, pi, t, "off"), zr, 0)
            rhs = inst.loads.base[e - 1][pi, t] + supply[t]
            for j, el in enumerate(inst.loads.elastic):
                if t in el.window[e - 1]:
                    rhs += el.setpoint[e - 1][pi, t] - op["dl1"][j, pi, t]
            for b, bt in enumerate(inst.bess):
                y, yp, ym = op["y"][b, pi, t], op["y_plus"][b, pi, t], op["y_minus"][b, pi, t]
                lhs += ym - yp
                cap = bt.unit_kwh * S["xp_tilde"][n, b]
                keep = 1 - bt.loss[e - 1]
                ck.le("3e", (n, b, pi, t), m_t * yp, bt.charge_depth[e - 1] * cap)
                ck.le("3e", (n, b, pi, t, "nonneg"), -yp, 0)
                ck.le("3f", (n, b, pi, t, "nonneg"), -ym, 0)
                ck.le("3h", (n, b, pi, t), y, cap)
                ck.le("3h", (n, b, pi, t, "nonneg"), -y, 0)
                if t > st.first_period:
                    before = op["y"][b, pi, t - 1]
                    ck.le("3f", (n, b, pi, t), m_t * ym, bt.discharge_depth[e - 1] * keep * before)
                    ck.eq("3g", (n, b, pi, t), y, keep * before + m_t * (yp - ym))
                else:
                    carry = _carry_in(inst, sol, n, b)
                    ck.le("3f", (n, b, pi, t), m_t * ym, bt.discharge_depth[e - 1] * carry)
                    ck.eq("5a" if p is None else "5b", (n, b, pi), y, carry + m_t * (yp - ym))
            ck.eq("3b", (n, pi, t), lhs, rhs)


def _carry_in(inst: Instance, sol: Solution, n: int, b: int) -> float:
    tr = inst.tree
    p = tr.parents[n]
    if p is None:
        return 0.0
    bt = inst.bess[b]
    e, ea = tr.node_stage[n], tr.node_stage[p]
    d = tr.stage(e).days
    la, le = tr.stage(ea).last_period, tr.stage(e).last_period
    from_parent = sum(float(w) * (1 - bt.loss[ea - 1]) * sol.operational[p]["y"][b, pi, la]
                      for pi, w in enumerate(tr.op_probs[ea - 1]))
    own = sum(float(w) * (1 - bt.loss[e - 1]) * sol.operational[n]["y"][b, pi, le]
              for pi, w in enumerate(tr.op_probs[e - 1]))
    return from_parent / d + own * (d - 1) / d


def _check_loads(inst: Instance, sol: Solution, n: int, ck: _Checker) -> None:
    tr = inst.tree
    e = tr.node_stage[n]
    st = tr.stage(e)
    op = sol.operational[n]
    P = tr.n_op_scenarios(e)
    for j, el in enumerate(inst.loads.elastic):
        win = el.window[e - 1]
        for pi in range(P):
            for t in st.periods:
                dl = op["dl1"][j, pi, t]
                if t not in win:
                    ck.eq("4b", (n, j, pi, t, "off"), dl, 0)
                    continue
                ck.le("4b", (n, j, pi, t, "lo"), -dl, 0)
                ck.le("4b", (n, j, pi, t, "hi"), dl, el.max_curtail[e - 1][t])
                if t > st.first_period and (t - 1) in win:
                    now = el.setpoint[e - 1][pi, t] - dl
                    before = el.setpoint[e - 1][pi, t - 1] - op["dl1"][j, pi, t - 1]
                    ck.le("4a", (n, j, pi, t), abs(now - before), el.max_ramp[e - 1][t])
    starts_of = {}
    for j, d in enumerate(inst.loads.deferrable):
        hours = st.hours
        ok = [t for t in sorted(d.window[e - 1]) if _m2(hours, t, d.duration_h[e - 1]) is not None]
        for pi in range(P):
            for t in st.periods:
                v = op["delta"][j, pi, t]
                if t in ok:
                    ck.integral("4c", (n, j, pi, t), v, True)
                else:
                    ck.eq("4c", (n, j, pi, t, "off"), v, 0)
            ck.eq("4d", (n, j, pi), float(sum(op["delta"][j, pi, t] for t in ok)), 1)
            starts_of[(j, pi)] = [t for t in ok if op["delta"][j, pi, t] > 0.5]
    for h, (j, j2) in enumerate(inst.loads.incompatible):
        dj, dj2 = inst.loads.deferrable[j], inst.loads.deferrable[j2]
        for pi in range(P):
            for t in starts_of.get((j, pi), []):
                end = t + _m2(st.hours, t, dj.duration_h[e - 1]) - 1
                for t2 in starts_of.get((j2, pi), []):
                    if j == j2 and t == t2:
                        continue
                    end2 = t2 + _m2(st.hours, t2, dj2.duration_h[e - 1]) - 1
                    if t <= end2 and t2 <= end:
                        ck.le("4e", (n, h, pi, t, t2), 2.0, 1.0)
    for h, (j, j2, lat) in enumerate(inst.loads.precedence):
        dj = inst.loads.deferrable[j]
        for pi in range(P):
            for t in starts_of.get((j, pi), []):
                lo = t + _m2(st.hours, t, dj.duration_h[e - 1]) + lat
                ok2 = [t2 for t2 in starts_of.get((j2, pi), []) if t2 >= lo]
                ck.le("4f", (n, h, pi, t), 1.0, float(len(ok2)))


def _check_discomfort(inst: Instance, sol: Solution, n: int, variant: Variant, ck: _Checker) -> None:
    tr = inst.tree
    e = tr.node_stage[n]
    probs = [float(w) for w in tr.op_probs[e - 1]]
    disc = [scenario_discomfort(inst, sol, n, pi) for pi in range(len(probs))]
    ck.le("6", (n,), float(np.dot(probs, disc)), inst.discomfort.expected_cap[e - 1])
    if not variant.has_sd:
        return
    op = sol.operational[n]
    for p, prof in enumerate(inst.discomfort.profiles[e - 1]):
        for pi, dv in enumerate(disc):
            s, eta = op["s"][p, pi], op["eta"][p, pi]
            ck.le("7a", (n, p, pi), dv - s, prof.threshold)
            ck.le("7b", (n, p, pi, "lo"), -s, 0)
            ck.le("7b", (n, p, pi), s, prof.max_excess * prof.threshold * eta, prof.threshold)
            ck.integral("7c", (n, p, pi), eta, True)
        ck.le("7d", (n, p), float(np.dot(probs, op["eta"][p])), prof.prob_bound)
        ck.le("7e", (n, p), float(np.dot(probs, op["s"][p])), prof.expected_excess * prof.threshold)


# -- cost ---------------------------------------------------------------------

def evaluate_cost(inst: Instance, sol: Solution) -> dict[str, float]:
    """Objective breakdown recomputed from the solution arrays."""
    tr = inst.tree
    S = sol.strategic
    pv_cost = bess_cost = oper = residual = 0.0
    for n in range(tr.n_nodes):
        w = float(tr.weights[n])
        p = tr.parents[n]
        e = tr.node_stage[n]
        st = tr.stage(e)
        for i, pv in enumerate(inst.pv):
            xa = 0.0 if p is None else S["x"][p, i]
            xta = 0.0 if p is None else S["x_tilde"][p, i]
            pv_cost += w * (pv.prep_cost[n] * (S["x"][n, i] - xa)
                            + pv.install_cost[n] * (S["x_tilde"][n, i] - xta)
                            + pv.maint_cost[n] * S["x_tilde"][n, i])
        for b, bt in enumerate(inst.bess):
            xa = 0.0 if p is None else S["xp"][p, b]
            xta = 0.0 if p is None else S["xp_tilde"][p, b]
            bess_cost += w * (bt.prep_cost[n] * (S["xp"][n, b] - xa)
                              + bt.install_cost[n] * (S["xp_tilde"][n, b] - xta)
                              + bt.maint_cost[n] * S["xp_tilde"][n, b])
        op = sol.operational[n]
        for pi, wq in enumerate(tr.op_probs[e - 1]):
            for t in st.periods:
                c = inst.grid.import_price[e - 1][pi, t] * op["zG"][pi, t]
                for b, bt in enumerate(inst.bess):
                    c += bt.op_cost * (op["y_plus"][b, pi, t] + op["y_minus"][b, pi, t])
                if t in st.pv_periods:
                    price = inst.grid.export_price[e - 1][pi, t]
                    for i, pv in enumerate(inst.pv):
                        zr = op["zR"][i, pi, t]
                        avail = pv.availability[e - 1][pi, t] * pv.capacity_kw * S["x_tilde"][n, i]
                        c += pv.gen_cost[e - 1][pi, t] * zr - price * (avail - zr)
                oper += w * st.days * float(wq) * st.hours[t] * c
        if not tr.children[n]:
            residual += w * (sum(pv.residual_value[n] * S["x_tilde"][n, i] for i, pv in enumerate(inst.pv))
                             + sum(bt.residual_value[n] * S["xp_tilde"][n, b] for b, bt in enumerate(inst.bess)))
    total = pv_cost + bess_cost + oper - residual
    return {"pv_strategic": float(pv_cost), "bess_strategic": float(bess_cost),
            "operational": float(oper), "residual": float(residual), "total": float(total)}


# -- discomfort statistics -------------------------------------------------------

def nodal_discomfort(inst: Instance, sol: Solution) -> list[dict]:
    """Per strategic node: expected discomfort, worst exceedance and violation frequency."""
    tr = inst.tree
    rows = []
    for n in range(tr.n_nodes):
        e = tr.node_stage[n]
        probs = np.array([float(w) for w in tr.op_probs[e - 1]])
        disc = np.array([scenario_discomfort(inst, sol, n, pi) for pi in range(len(probs))])
        profiles = inst.discomfort.profiles[e - 1]
        thr = profiles[0].threshold if profiles else math.inf
        over = disc > thr + 1e-9
        rows.append({"node": n, "expected": float(probs @ disc),
                     "max_exceedance": float(max(0.0, (disc - thr).max())) if profiles else 0.0,
                     "violation_frequency": float(probs[over].sum())})
    return rows


def discomfort_statistics(inst: Instance, sol: Solution) -> dict[str, float]:
    rows = nodal_discomfort(inst, sol)
    exp = np.array([r["expected"] for r in rows])
    freq = np.array([r["violation_frequency"] for r in rows])
    exc = np.array([r["max_exceedance"] for r in rows])
    return {"mean_expected": float(exp.mean()), "p95_expected": float(np.percentile(exp, 95)),
            "mean_max_exceedance": float(exc.mean()), "mean_violation_frequency": float(freq.mean()),
            "max_violation_frequency": float(freq.max())}


def sd_audit(inst: Instance, sol: Solution, tol: float = 1e-9) -> list[str]:
    """SD limits checked with discomfort recomputed from primitive decisions.

    Returns human-readable failures (empty when every node complies).
    """
    tr = inst.tree
    out = []
    for n in range(tr.n_nodes):
        e = tr.node_stage[n]
        probs = np.array([float(w) for w in tr.op_probs[e - 1]])
        disc = np.array([scenario_discomfort(inst, sol, n, pi) for pi in range(len(probs))])
        for p, prof in enumerate(inst.discomfort.profiles[e - 1]):
            excess = np.maximum(0.0, disc - prof.threshold)
            slack = 1e-6 * max(1.0, prof.threshold)  # solver noise is not an exceedance
            freq = float(probs[excess > slack].sum())
            if freq > prof.prob_bound + tol:
                out.append(f"node {n} profile {p}: violation frequency {freq:.6g} > {prof.prob_bound}")
            if excess.max() > prof.max_excess * prof.threshold + slack:
                out.append(f"node {n} profile {p}: excess {excess.max():.6g} above cap")
            if probs @ excess > prof.expected_excess * prof.threshold + slack:
                out.append(f"node {n} profile {p}: expected excess {probs @ excess:.6g} above cap")
    return out
