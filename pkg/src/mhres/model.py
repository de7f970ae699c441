"""Emitter of the multistage multi-horizon RES design MILP.

The model is written over *node views*: each view is one strategic node of
the model, carrying the instance node that supplies its data, the key of its
predecessor and its weight in the objective.  The full model uses one view
per tree node; decomposition schemes and matheuristics pass restricted or
re-weighted views.  A predecessor that is not part of the model is read from
``fixings`` as constants (the boundary of a rolling-horizon subproblem).

Variable names are ``family[key,idx...]`` and constraint names are
``tag[key,idx...]`` where ``tag`` is the label of the constraint family
(``2a``..``2p``, ``3a``..``3h``, ``4a``..``4f``, ``5a``, ``5b``, ``6``,
``7a``..``7e``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Iterator, Mapping

from .instance import Instance
from .milp import BINARY, CONTINUOUS, EQ, INTEGER, LE, AbstractMilp, ModelError


class Variant(str, Enum):
    NOD = "NoD"
    RN = "RN"
    SD = "SD"

    @classmethod
    def parse(cls, value) -> "Variant":
        if isinstance(value, Variant):
            return value
        key = str(value).strip().lower().replace("-", "").replace("_", "")
        table = {"nod": cls.NOD, "nodiscomfort": cls.NOD, "rn": cls.RN,
                 "riskneutral": cls.RN, "sd": cls.SD, "riskaverse": cls.SD}
        if key not in table:
            raise ValueError(f"unknown variant {value!r}; expected NoD, RN or SD")
        return table[key]

    @property
    def has_expected_cap(self) -> bool:
        return self is not Variant.NOD

    @property
    def has_sd(self) -> bool:
        return self is Variant.SD


STRATEGIC = ("x", "x_tilde", "alpha", "xp", "xp_tilde", "beta")
OPERATIONAL = ("zR", "zG", "y", "y_plus", "y_minus", "dl1", "delta")
RISK = ("s", "eta")


def vname(fam: str, key, *idx) -> str:
    return f"{fam}[{','.join(str(v) for v in (key, *idx))}]"


@dataclass(frozen=True)
class NodeView:
    key: str
    node: int
    parent: str | None
    weight: float


def node_variables(inst: Instance, variant: Variant, n: int) -> Iterator[tuple[str, tuple]]:
    """All ``(family, index)`` pairs of strategic node ``n``, in emission order."""
    tr = inst.tree
    e = tr.node_stage[n]
    st = tr.stage(e)
    P = tr.n_op_scenarios(e)
    for fam in ("x", "x_tilde", "alpha"):
        for i in range(inst.n_pv):
            yield fam, (i,)
    for fam in ("xp", "xp_tilde", "beta"):
        for b in range(inst.n_bess):
            yield fam, (b,)
    for pi in range(P):
        for t in st.periods:
            if t in st.pv_periods:
                for i in range(inst.n_pv):
                    yield "zR", (i, pi, t)
            yield "zG", (pi, t)
            for b in range(inst.n_bess):
                for fam in ("y", "y_plus", "y_minus"):
                    yield fam, (b, pi, t)
            for j, el in enumerate(inst.loads.elastic):
                if t in el.window[e - 1]:
                    yield "dl1", (j, pi, t)
            for j in range(len(inst.loads.deferrable)):
                if t in inst.feasible_starts(j, e):
                    yield "delta", (j, pi, t)
    if variant.has_sd:
        for p in range(len(inst.discomfort.profiles[e - 1])):
            for pi in range(P):
                yield "s", (p, pi)
                yield "eta", (p, pi)


def _domain(inst: Instance, fam: str, n: int, idx: tuple) -> tuple[str, float, float]:
    e = inst.tree.node_stage[n]
    if fam in ("x", "alpha", "xp", "beta", "delta", "eta"):
        return BINARY, 0.0, 1.0
    if fam == "x_tilde":
        return CONTINUOUS, 0.0, float(inst.pv[idx[0]].max_panels)
    if fam == "xp_tilde":
        return INTEGER, 0.0, float(inst.bess[idx[0]].max_units)
    if fam == "dl1":
        j, _, t = idx
        return CONTINUOUS, 0.0, float(inst.loads.elastic[j].max_curtail[e - 1][t])
    return CONTINUOUS, 0.0, math.inf


def boundary_names(inst: Instance, key: str, n: int) -> list[str]:
    """Names a model needs from a predecessor that is not part of it."""
    tr = inst.tree
    e = tr.node_stage[n]
    last = tr.stage(e).last_period
    out = [vname(f, key, i) for f in ("x", "x_tilde") for i in range(inst.n_pv)]
    out += [vname(f, key, b) for f in ("xp", "xp_tilde") for b in range(inst.n_bess)]
    out += [vname("y", key, b, pi, last) for b in range(inst.n_bess)
            for pi in range(tr.n_op_scenarios(e))]
    return out


def full_views(inst: Instance, weights: Mapping[int, float] | None = None,
               nodes: Iterable[int] | None = None) -> list[NodeView]:
    tr = inst.tree
    nodes = range(tr.n_nodes) if nodes is None else nodes
    out = []
    for n in sorted(set(nodes), key=lambda m: (tr.node_stage[m], m)):
        p = tr.parents[n]
        w = float(tr.weights[n]) if weights is None else float(weights[n])
        out.append(NodeView(str(n), n, None if p is None else str(p), w))
    return out


def subset_views(inst: Instance, node_subset, fixings: Mapping[str, float]) -> list[NodeView]:
    """Views for a node subset, resolving each member's predecessor.

    The direct parent is used when it is a member or fully fixed; otherwise
    the nearest member ancestor stands in for it.
    """
    tr = inst.tree
    if isinstance(node_subset, Mapping):
        weights = {int(n): float(w) for n, w in node_subset.items()}
    else:
        weights = {int(n): float(tr.weights[n]) for n in node_subset}
    for n in weights:
        if not 0 <= n < tr.n_nodes:
            raise ModelError(f"invalid subset closure: unknown node {n}")
    out = []
    for n in sorted(weights, key=lambda m: (tr.node_stage[m], m)):
        p = tr.parents[n]
        parent = None
        if p is not None:
            if p in weights or all(nm in fixings for nm in boundary_names(inst, str(p), p)):
                parent = str(p)
            else:
                a = tr.parents[p]
                while a is not None and a not in weights:
                    a = tr.parents[a]
                if a is None:
                    raise ModelError(f"invalid subset closure: node {n} has no member or fixed predecessor")
                parent = str(a)
        out.append(NodeView(str(n), n, parent, weights[n]))
    return out


class _Lin:
    """Linear expression over model columns plus a constant."""
    __slots__ = ("terms", "const")

    def __init__(self):
        self.terms: list[tuple[int, float]] = []
        self.const = 0.0

    def add(self, ref, coef: float) -> "_Lin":
        if coef == 0:
            return self
        if isinstance(ref, int):
            self.terms.append((ref, coef))
        else:
            self.const += coef * ref
        return self

    def add_all(self, pairs) -> "_Lin":
        for k, c in pairs:
            self.add(k, c)
        return self


def build_model(inst: Instance, variant, node_subset=None, fixings: Mapping[str, float] | None = None,
                views: list[NodeView] | None = None, name: str = "res") -> AbstractMilp:
    """Emit the RES model of ``variant`` over all nodes or a subset of them.

    ``node_subset`` is an iterable of node ids or a ``{node: weight}`` map;
    ``fixings`` maps variable names to values.  Fixed variables of member
    nodes get equal bounds, those of non-member predecessors enter as
    constants.
    """
    variant = Variant.parse(variant)
    fixings = dict(fixings or {})
    if views is None:
        views = full_views(inst) if node_subset is None else subset_views(inst, node_subset, fixings)
    em = _Emitter(inst, variant, views, fixings, name)
    em.emit()
    m = em.m
    for nm, val in fixings.items():
        if m.has_var(nm):
            m.fix(nm, float(val))
    return m


class _Emitter:
    def __init__(self, inst: Instance, variant: Variant, views: list[NodeView],
                 fixings: Mapping[str, float], name: str):
        self.inst = inst
        self.variant = variant
        self.views = views
        self.fixings = fixings
        self.m = AbstractMilp(name)
        self.m.views = {v.key: v for v in views}
        self.m.variant = variant
        self.m.vmap = {}
        self.vmap = self.m.vmap
        self.keys = set(self.m.views)
        self.node_of = {v.key: v.node for v in views}

    # -- references ------------------------------------------------------
    def v(self, fam: str, key: str, *idx) -> int:
        return self.vmap[(fam, key) + idx]

    def ref(self, fam: str, key: str | None, *idx):
        """Column index of a member variable or the fixed value of a boundary one."""
        if key is None:
            return 0.0
        if key in self.keys:
            return self.vmap[(fam, key) + idx]
        nm = vname(fam, key, *idx)
        if nm not in self.fixings:
            raise ModelError(f"invalid subset closure: boundary value {nm} not fixed")
        return float(self.fixings[nm])

    def node_of_key(self, key: str) -> int:
        if key in self.node_of:
            return self.node_of[key]
        base = key.split("@", 1)[0]
        return int(base)

    def row(self, lin: _Lin, sense: str, rhs: float, name: str) -> None:
        self.m.add_constr(lin.terms, sense, rhs - lin.const, name)

    # -- emission ----------------------------------------------------------
    def emit(self) -> None:
        inst, m = self.inst, self.m
        for v in self.views:
            for fam, idx in node_variables(inst, self.variant, v.node):
                kind, lb, ub = _domain(inst, fam, v.node, idx)
                self.vmap[(fam, v.key) + idx] = m.add_var(vname(fam, v.key, *idx), kind, lb, ub)
        for v in self.views:
            self._strategic(v)
            self._operational(v)
            self._loads(v)
            self._discomfort(v)

    def _strategic(self, v: NodeView) -> None:
        inst, m = self.inst, self.m
        n, key, par, w = v.node, v.key, v.parent, v.weight
        leaf = not inst.tree.children[n]
        lim = inst.limits
        budget = _Lin()
        obj = _Lin()
        one_pv, cap_pv = _Lin(), _Lin()
        for i, p in enumerate(inst.pv):
            x, xt, al = self.v("x", key, i), self.v("x_tilde", key, i), self.v("alpha", key, i)
            xa, xta = self.ref("x", par, i), self.ref("x_tilde", par, i)
            self.row(_Lin().add(al, 1).add(x, -1), LE, 0, f"2b[{key},{i}]")
            self.row(_Lin().add(xa, 1).add(x, -1), LE, 0, f"2c[{key},{i}]")
            self.row(_Lin().add(xta, 1).add(xt, -1), LE, 0, f"2d[{key},{i},lo]")
            self.row(_Lin().add(xt, 1).add(x, -p.max_panels), LE, 0, f"2d[{key},{i},hi]")
            one_pv.add(x, 1).add(xa, -1)
            cap_pv.add(xt, 1)
            self.row(_Lin().add(al, lim.pv_min_batch).add(xt, -1).add(xta, 1), LE, 0, f"2g[{key},{i},lo]")
            self.row(_Lin().add(xt, 1).add(xta, -1).add(al, -p.max_panels), LE, 0, f"2g[{key},{i},hi]")
            budget.add(x, p.prep_cost[n]).add(xa, -p.prep_cost[n])
            budget.add(xt, p.install_cost[n]).add(xta, -p.install_cost[n])
            obj.add(x, w * p.prep_cost[n]).add(xa, -w * p.prep_cost[n])
            obj.add(xt, w * (p.install_cost[n] + p.maint_cost[n])).add(xta, -w * p.install_cost[n])
            if leaf:
                obj.add(xt, -w * p.residual_value[n])
        if inst.n_pv:
            self.row(one_pv, LE, 1, f"2e[{key}]")
            self.row(cap_pv, LE, lim.pv_total_max, f"2f[{key}]")
        one_b, cap_b = _Lin(), _Lin()
        for b, bt in enumerate(inst.bess):
            x, xt, be = self.v("xp", key, b), self.v("xp_tilde", key, b), self.v("beta", key, b)
            xa, xta = self.ref("xp", par, b), self.ref("xp_tilde", par, b)
            self.row(_Lin().add(xa, 1).add(x, -1), LE, 0, f"2i[{key},{b}]")
            self.row(_Lin().add(be, 1).add(x, -1), LE, 0, f"2j[{key},{b}]")
            self.row(_Lin().add(xta, 1).add(xt, -1), LE, 0, f"2l[{key},{b},lo]")
            self.row(_Lin().add(xt, 1).add(x, -bt.max_units), LE, 0, f"2l[{key},{b},hi]")
            one_b.add(x, 1).add(xa, -1)
            cap_b.add(xt, 1)
            self.row(_Lin().add(be, lim.bess_min_batch).add(xt, -1).add(xta, 1), LE, 0, f"2o[{key},{b},lo]")
            self.row(_Lin().add(xt, 1).add(xta, -1).add(be, -bt.max_units), LE, 0, f"2o[{key},{b},hi]")
            budget.add(x, bt.prep_cost[n]).add(xa, -bt.prep_cost[n])
            budget.add(xt, bt.install_cost[n]).add(xta, -bt.install_cost[n])
            obj.add(x, w * bt.prep_cost[n]).add(xa, -w * bt.prep_cost[n])
            obj.add(xt, w * (bt.install_cost[n] + bt.maint_cost[n])).add(xta, -w * bt.install_cost[n])
            if leaf:
                obj.add(xt, -w * bt.residual_value[n])
        if inst.n_bess:
            self.row(one_b, LE, 1, f"2m[{key}]")
            self.row(cap_b, LE, lim.bess_total_max, f"2n[{key}]")
        if inst.n_pv or inst.n_bess:
            self.row(budget, LE, float(lim.budget[n]), f"2p[{key}]")
        self._objective(obj)

    def _objective(self, lin: _Lin) -> None:
        for k, c in lin.terms:
            self.m.add_obj(k, c)
        self.m.obj_const += lin.const

    def _carry(self, v: NodeView, b: int) -> _Lin:
        """Storage carried into the first period of node ``v`` (zero at the root)."""
        inst = self.inst
        tr = inst.tree
        lin = _Lin()
        if v.parent is None:
            return lin
        e = tr.node_stage[v.node]
        d = tr.stage(e).days
        pn = self.node_of_key(v.parent)
        ea = tr.node_stage[pn]
        bt = inst.bess[b]
        la = tr.stage(ea).last_period
        for pi, wq in enumerate(tr.op_probs[ea - 1]):
            lin.add(self.ref("y", v.parent, b, pi, la), float(wq) * (1 - bt.loss[ea - 1]) / d)
        if d > 1:
            le = tr.stage(e).last_period
            for pi, wq in enumerate(tr.op_probs[e - 1]):
                lin.add(self.v("y", v.key, b, pi, le), float(wq) * (1 - bt.loss[e - 1]) * (d - 1) / d)
        return lin

    def _operational(self, v: NodeView) -> None:
        inst = self.inst
        tr = inst.tree
        n, key, w = v.node, v.key, v.weight
        e = tr.node_stage[n]
        st = tr.stage(e)
        d = st.days
        carries = [self._carry(v, b) for b in range(inst.n_bess)]
        obj = _Lin()
        for pi, wq in enumerate(tr.op_probs[e - 1]):
            for t in st.periods:
                m_t = st.hours[t]
                scale = w * d * float(wq) * m_t
                idx = (pi, t)
                zG = self.v("zG", key, pi, t)
                obj.add(zG, scale * inst.grid.import_price[e - 1][pi, t])
                bal = _Lin().add(zG, 1)
                rhs = float(inst.loads.base[e - 1][pi, t])
                if t in st.pv_periods:
                    price = inst.grid.export_price[e - 1][pi, t]
                    for i, p in enumerate(inst.pv):
                        zR = self.v("zR", key, i, pi, t)
                        xt = self.v("x_tilde", key, i)
                        gen = p.availability[e - 1][pi, t] * p.capacity_kw
                        self.row(_Lin().add(zR, 1).add(xt, -gen), LE, 0, f"3a[{key},{i},{pi},{t}]")
                        bal.add(zR, 1)
                        obj.add(zR, scale * (p.gen_cost[e - 1][pi, t] + price))
                        obj.add(xt, -scale * price * gen)
                for j, el in enumerate(inst.loads.elastic):
                    if t in el.window[e - 1]:
                        rhs += float(el.setpoint[e - 1][pi, t])
                        bal.add(self.v("dl1", key, j, pi, t), 1)
                for j, dfl in enumerate(inst.loads.deferrable):
                    for (_, ts) in inst.supply_window_set(j, e, idx):
                        bal.add(self.v("delta", key, j, pi, ts), -dfl.power_kw[e - 1])
                for b, bt in enumerate(inst.bess):
                    y = self.v("y", key, b, pi, t)
                    yp = self.v("y_plus", key, b, pi, t)
                    ym = self.v("y_minus", key, b, pi, t)
                    bal.add(ym, 1).add(yp, -1)
                    obj.add(yp, scale * bt.op_cost).add(ym, scale * bt.op_cost)
                    xt = self.v("xp_tilde", key, b)
                    cap = bt.unit_kwh
                    self.row(_Lin().add(yp, m_t).add(xt, -bt.charge_depth[e - 1] * cap), LE, 0,
                             f"3e[{key},{b},{pi},{t}]")
                    keep = 1 - bt.loss[e - 1]
                    dis = _Lin().add(ym, m_t)
                    if t > st.first_period:
                        prev = self.v("y", key, b, pi, t - 1)
                        dis.add(prev, -bt.discharge_depth[e - 1] * keep)
                        self.row(_Lin().add(y, 1).add(prev, -keep).add(yp, -m_t).add(ym, m_t), EQ, 0,
                                 f"3g[{key},{b},{pi},{t}]")
                    else:
                        carry = carries[b]
                        for k, c in carry.terms:
                            dis.add(k, -bt.discharge_depth[e - 1] * c)
                        dis.const -= bt.discharge_depth[e - 1] * carry.const
                        lin = _Lin().add(y, 1).add(yp, -m_t).add(ym, m_t)
                        for k, c in carry.terms:
                            lin.add(k, -c)
                        lin.const -= carry.const
                        tag = "5a" if v.parent is None else "5b"
                        self.row(lin, EQ, 0, f"{tag}[{key},{b},{pi}]")
                    self.row(dis, LE, 0, f"3f[{key},{b},{pi},{t}]")
                    self.row(_Lin().add(y, 1).add(xt, -cap), LE, 0, f"3h[{key},{b},{pi},{t}]")
                self.row(bal, EQ, rhs, f"3b[{key},{pi},{t}]")
        self._objective(obj)

    def _loads(self, v: NodeView) -> None:
        inst = self.inst
        tr = inst.tree
        key = v.key
        e = tr.node_stage[v.node]
        st = tr.stage(e)
        P = tr.n_op_scenarios(e)
        for j, el in enumerate(inst.loads.elastic):
            win = el.window[e - 1]
            sp = el.setpoint[e - 1]
            for pi in range(P):
                for t in sorted(win):
                    if t == st.first_period or (t - 1) not in win:
                        continue
                    dl, dla = self.v("dl1", key, j, pi, t), self.v("dl1", key, j, pi, t - 1)
                    diff = float(sp[pi, t] - sp[pi, t - 1])
                    r = float(el.max_ramp[e - 1][t])
                    # |(L_t - dl_t) - (L_{t-1} - dl_{t-1})| <= r
                    self.row(_Lin().add(dl, -1).add(dla, 1), LE, r - diff, f"4a[{key},{j},{pi},{t},up]")
                    self.row(_Lin().add(dl, 1).add(dla, -1), LE, r + diff, f"4a[{key},{j},{pi},{t},dn]")
        defs = inst.loads.deferrable
        for j in range(len(defs)):
            starts = inst.feasible_starts(j, e)
            for pi in range(P):
                self.row(_Lin().add_all(((self.v("delta", key, j, pi, t), 1.0) for t in starts)),
                         EQ, 1, f"4d[{key},{j},{pi}]")
        for h, (j, j2) in enumerate(inst.loads.incompatible):
            for pi in range(P):
                for t in inst.feasible_starts(j, e):
                    end = t + inst.m2(j, e, t) - 1
                    for t2 in inst.feasible_starts(j2, e):
                        if j == j2 and t == t2:
                            continue
                        end2 = t2 + inst.m2(j2, e, t2) - 1
                        if t <= end2 and t2 <= end:
                            self.row(_Lin().add(self.v("delta", key, j, pi, t), 1)
                                     .add(self.v("delta", key, j2, pi, t2), 1), LE, 1,
                                     f"4e[{key},{h},{pi},{t},{t2}]")
        for h, (j, j2, _) in enumerate(inst.loads.precedence):
            for pi in range(P):
                for t in inst.feasible_starts(j, e):
                    lin = _Lin().add(self.v("delta", key, j, pi, t), 1)
                    for (_, t2) in sorted(inst.precedence_set(j, j2, e, (pi, t))):
                        lin.add(self.v("delta", key, j2, pi, t2), -1)
                    self.row(lin, LE, 0, f"4f[{key},{h},{pi},{t}]")

    def _scenario_discomfort(self, key: str, e: int, pi: int) -> _Lin:
        inst = self.inst
        st = inst.tree.stage(e)
        lin = _Lin()
        for j, el in enumerate(inst.loads.elastic):
            for t in sorted(el.window[e - 1]):
                lin.add(self.v("dl1", key, j, pi, t), st.hours[t] * float(el.discomfort[e - 1][t]))
        for j, d in enumerate(inst.loads.deferrable):
            for t in inst.feasible_starts(j, e):
                lin.add(self.v("delta", key, j, pi, t), float(d.discomfort[e - 1][t]))
        return lin

    def _discomfort(self, v: NodeView) -> None:
        if not self.variant.has_expected_cap:
            return
        inst = self.inst
        tr = inst.tree
        key = v.key
        e = tr.node_stage[v.node]
        probs = [float(p) for p in tr.op_probs[e - 1]]
        disc = [self._scenario_discomfort(key, e, pi) for pi in range(len(probs))]
        total = _Lin()
        for wq, lin in zip(probs, disc):
            for k, c in lin.terms:
                total.add(k, wq * c)
        self.row(total, LE, float(inst.discomfort.expected_cap[e - 1]), f"6[{key}]")
        if not self.variant.has_sd:
            return
        for p, prof in enumerate(inst.discomfort.profiles[e - 1]):
            freq, excess = _Lin(), _Lin()
            for pi, wq in enumerate(probs):
                s, eta = self.v("s", key, p, pi), self.v("eta", key, p, pi)
                lin = _Lin().add_all(disc[pi].terms).add(s, -1)
                self.row(lin, LE, prof.threshold, f"7a[{key},{p},{pi}]")
                self.row(_Lin().add(s, 1).add(eta, -prof.max_excess * prof.threshold), LE, 0,
                         f"7b[{key},{p},{pi}]")
                freq.add(eta, wq)
                excess.add(s, wq)
            self.row(freq, LE, prof.prob_bound, f"7d[{key},{p}]")
            self.row(excess, LE, prof.expected_excess * prof.threshold, f"7e[{key},{p}]")
