"""Instance generation: cost-trajectory trees, representative days, synthetic instances.

All generators are deterministic functions of their seed.  Generated values
are rounded so that re-serialisation is byte-stable.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .instance import (BessTechnology, DeferrableLoad, DiscomfortPolicy, DiscomfortProfile,
                       ElasticLoad, GridParams, Instance, Loads, PvTechnology, SystemLimits,
                       derive_m2, validate_instance, InstanceError)
from .tree import MultiHorizonTree, Stage

MAINTENANCE_SHARE = 0.015
# straight-line depreciation over the asset life gives the residual value
PV_LIFE_YEARS = 25
BESS_LIFE_YEARS = 12
# unit power rating per kWh of storage (the BESS cost anchor is per W)
BESS_C_RATE = 0.5

# named shapes: E, branching, op scenarios, periods, I, B, J1, J2, H1, H2
SIZES = {
    "small": dict(E=3, branching=3, op_scenarios=10, periods=24, I=3, B=2, J1=25, J2=25, H1=10, H2=10),
    "medium": dict(E=4, branching=3, op_scenarios=20, periods=24, I=3, B=2, J1=40, J2=35, H1=15, H2=15),
    "large": dict(E=6, branching=3, op_scenarios=20, periods=24, I=3, B=2, J1=75, J2=75, H1=50, H2=50),
}

PV_EUR_PER_W = (2.5, 2.1, 1.95)
BESS_EUR_PER_W = (1.05, 1.3)


# -- strategic cost trees ------------------------------------------------------

@dataclass
class StrategicCosts:
    """Balanced tree with one cost multiplier chain per node."""
    parents: list[int | None]
    weights: list[Fraction]
    trajectory: list[str]
    multiplier: np.ndarray
    costs: dict[str, np.ndarray]
    maintenance: dict[str, np.ndarray]

    @property
    def n_nodes(self) -> int:
        return len(self.parents)


def generate_strategic_tree(E: int, branching: int, base_costs: Mapping[str, float],
                            trajectory_spread: float = 0.3, seed: int = 0) -> StrategicCosts:
    """Cost tables over a balanced tree of stable/down/up trajectories.

    With branching 3 the children follow a stable, a decreasing and an
    increasing trajectory; the decrease and increase are uniform draws of
    at most ``trajectory_spread``.  Other branchings use evenly spaced
    multipliers in ``[1 - spread, 1 + spread]``.
    """
    if E < 2:
        raise ValueError("need at least two stages")
    if branching < 1:
        raise ValueError("branching must be >= 1")
    rng = np.random.default_rng(seed)
    parents: list[int | None] = [None]
    weights = [Fraction(1)]
    traj = ["root"]
    mult = [1.0]
    level = [0]
    for _ in range(E - 1):
        nxt = []
        for p in level:
            if branching == 3:
                u = rng.uniform(size=2)
                kids = [("stable", 1.0), ("down", 1 - trajectory_spread * u[0]),
                        ("up", 1 + trajectory_spread * u[1])]
            elif branching == 1:
                kids = [("stable", 1.0)]
            else:
                grid = np.linspace(1 - trajectory_spread, 1 + trajectory_spread, branching)
                kids = [(f"m{k}", float(g)) for k, g in enumerate(grid)]
            for label, f in kids:
                parents.append(p)
                weights.append(weights[p] / branching)
                traj.append(label)
                mult.append(mult[p] * f)
                nxt.append(len(parents) - 1)
        level = nxt
    mult_arr = np.round(np.asarray(mult), 6)
    costs = {k: np.round(v * mult_arr, 4) for k, v in base_costs.items()}
    maint = {k: np.round(MAINTENANCE_SHARE * c, 4) for k, c in costs.items()}
    return StrategicCosts(parents, weights, traj, mult_arr, costs, maint)


# -- representative days --------------------------------------------------------

@dataclass
class RepresentativeDays:
    medoids: list[int]
    probabilities: list[Fraction]
    labels: np.ndarray
    objective_trace: list[float] = field(default_factory=list)

    def pairs(self) -> list[tuple[int, Fraction]]:
        return list(zip(self.medoids, self.probabilities))


def _normalise(X: np.ndarray) -> np.ndarray:
    lo, hi = X.min(axis=0), X.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    return (X - lo) / span


def representative_days(profiles, k: int, seed: int = 0) -> RepresentativeDays:
    """k-medoids (PAM build + swap) on min-max normalised daily vectors.

    Returns medoid row indices (actual input days) with cluster shares as
    exact probabilities.  Ties are broken by a seeded ordering of the days.
    """
    X = np.asarray(profiles, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("empty input: need a 2-D array with at least one profile")
    n = X.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k={k} outside 1..{n}")
    Z = _normalise(X)
    D = np.sqrt(((Z[:, None, :] - Z[None, :, :]) ** 2).sum(axis=2))
    order = np.random.default_rng(seed).permutation(n)

    def best(values):
        # lowest value, ties by seeded order
        vals = values[order]
        return int(order[int(np.argmin(vals))])

    medoids = [best(D.sum(axis=1))]
    nearest = D[:, medoids[0]].copy()
    while len(medoids) < k:
        gain = np.maximum(nearest[:, None] - D, 0.0).sum(axis=0)
        gain[medoids] = -np.inf
        medoids.append(best(-gain))
        nearest = np.minimum(nearest, D[:, medoids[-1]])
    trace = [float(D[:, medoids].min(axis=1).sum())]
    while True:
        cur = trace[-1]
        best_swap, best_val = None, cur
        for a in range(k):
            others = [m for idx, m in enumerate(medoids) if idx != a]
            base = D[:, others].min(axis=1) if others else np.full(n, np.inf)
            cand = np.minimum(base[:, None], D).sum(axis=0)
            cand[medoids] = np.inf
            for h in order:
                if cand[h] < best_val - 1e-12:
                    best_val, best_swap = float(cand[h]), (a, int(h))
        if best_swap is None:
            break
        medoids[best_swap[0]] = best_swap[1]
        trace.append(best_val)
    medoids = sorted(medoids)
    labels = np.argmin(D[:, medoids], axis=1)
    counts = np.bincount(labels, minlength=k)
    probs = [Fraction(int(c), n) for c in counts]
    return RepresentativeDays(medoids, probs, labels, trace)


# -- synthetic instances ---------------------------------------------------------

def _path_min(tree: MultiHorizonTree, cost: np.ndarray) -> np.ndarray:
    # cheapest purchase price seen on the way to each node; bounds resale value
    out = np.array(cost, dtype=float)
    for n in range(tree.n_nodes):
        p = tree.parents[n]
        if p is not None:
            out[n] = min(out[n], out[p])
    return out


def _period_hours(T: int) -> tuple[int, ...]:
    if not 1 <= T <= 24:
        raise ValueError("periods per day must lie in 1..24")
    base, extra = divmod(24, T)
    return tuple(base + (1 if t < extra else 0) for t in range(T))


def _aggregate(hourly: np.ndarray, hours: Sequence[int]) -> np.ndarray:
    out, h0 = [], 0
    for m in hours:
        out.append(hourly[..., h0:h0 + m].mean(axis=-1))
        h0 += m
    return np.stack(out, axis=-1)


def _synthetic_days(rng: np.random.Generator, n_days: int = 365) -> tuple[np.ndarray, np.ndarray]:
    """Hourly load (kW) and PV availability for a synthetic year."""
    h = np.arange(24)
    doy = np.arange(n_days)
    season = 0.5 + 0.5 * np.cos(2 * np.pi * (doy - 172) / 365)   # 1 in summer
    shape = 0.35 + 0.25 * np.exp(-((h - 8) / 2.0) ** 2) + 0.45 * np.exp(-((h - 20) / 2.5) ** 2)
    load = shape[None, :] * (1.1 - 0.3 * season[:, None]) * rng.uniform(0.8, 1.2, (n_days, 1))
    load = load * rng.uniform(0.9, 1.1, (n_days, 24))
    sun = np.clip(np.sin(np.pi * (h - 6) / 13), 0, None)
    daylen = 0.75 + 0.25 * season
    cloud = rng.beta(4, 2, (n_days, 1))
    avail = np.clip(sun[None, :] ** (1 / daylen[:, None]) * cloud * (0.6 + 0.4 * season[:, None]), 0, 1)
    return load, avail


def synthetic_instance(size: str = "small", seed: int = 0, **dims) -> Instance:
    """Schema-valid instance of a named shape or custom dimensions.

    ``size`` is ``small``, ``medium``, ``large`` or ``custom``; keyword
    arguments override any dimension (``E``, ``branching``,
    ``op_scenarios``, ``periods``, ``I``, ``B``, ``J1``, ``J2``, ``H1``,
    ``H2``) and the knobs ``days``, ``max_units``, ``max_panels``,
    ``spread``, ``cap`` (expected discomfort cap) and ``budget``.
    """
    if size != "custom" and size not in SIZES:
        raise ValueError(f"unknown size {size!r}")
    cfg = dict(SIZES.get(size, SIZES["small"]))
    cfg.update(days=365, max_units=8, max_panels=40, spread=0.3, budget=20000.0,
               cap=None, min_batch_pv=2, min_batch_bess=1,
               pv_total=60, bess_total=10)
    unknown = set(dims) - set(cfg)
    if unknown:
        raise ValueError(f"unknown dimension(s) {sorted(unknown)}")
    cfg.update(dims)
    if cfg["cap"] is None:
        # 20 per 50 controllable loads, 40 for the large shape
        cap = {"small": 20.0, "medium": 20.0, "large": 40.0}.get(size)
        cfg["cap"] = cap if cap is not None else round(20.0 * max(1, cfg["J1"] + cfg["J2"]) / 50, 4)
    rng = np.random.default_rng(seed)
    E, br, P, T = cfg["E"], cfg["branching"], cfg["op_scenarios"], cfg["periods"]
    I, B, J1, J2 = cfg["I"], cfg["B"], cfg["J1"], cfg["J2"]

    hours = _period_hours(T)
    mids = np.cumsum(hours) - np.asarray(hours) / 2
    pv_periods = frozenset(t for t in range(T) if 6 <= mids[t] <= 19)
    stages = [Stage(days=int(cfg["days"]), hours=hours, pv_periods=pv_periods) for _ in range(E)]

    # operational scenarios from representative days of a synthetic year
    load_h, avail_h = _synthetic_days(rng)
    feats = np.hstack([load_h, avail_h])
    rep = representative_days(feats, P, seed=seed)
    load = np.round(_aggregate(load_h[rep.medoids], hours), 4)          # [P, T]
    avail = np.round(_aggregate(avail_h[rep.medoids], hours), 4)
    off = [t for t in range(T) if t not in pv_periods]
    avail[:, off] = 0.0
    op_probs = [rep.probabilities] * E

    # strategic tree with cost trajectories
    panel_kw = 0.3
    unit_kwh = 2.4
    base = {}
    for i in range(I):
        base[f"pv{i}"] = PV_EUR_PER_W[i % 3] * 1000 * panel_kw
    for b in range(B):
        base[f"bess{b}"] = BESS_EUR_PER_W[b % 2] * 1000 * unit_kwh * BESS_C_RATE
    if E >= 2:
        sc = generate_strategic_tree(E, br, base, cfg["spread"], seed)
        parents, weights, costs, maint = sc.parents, sc.weights, sc.costs, sc.maintenance
    else:
        parents, weights = [None], [Fraction(1)]
        costs = {k: np.array([round(v, 4)]) for k, v in base.items()}
        maint = {k: np.round(MAINTENANCE_SHARE * c, 4) for k, c in costs.items()}
    tree = MultiHorizonTree(stages, parents, weights, op_probs)
    N = tree.n_nodes

    # stage drift of energy prices and load
    drift = [1.0 + 0.03 * e for e in range(E)]
    imp_shape = np.array([0.30 if 17 <= mids[t] <= 22 else (0.22 if 7 <= mids[t] < 17 else 0.16)
                          for t in range(T)])
    pv = []
    for i in range(I):
        inst_cost = costs[f"pv{i}"]
        pv.append(PvTechnology(
            name=f"pv{i}", capacity_kw=panel_kw, max_panels=float(cfg["max_panels"]),
            prep_cost=np.round(np.full(N, 400.0 + 100 * i) * (inst_cost / inst_cost[0]), 4),
            install_cost=inst_cost, maint_cost=maint[f"pv{i}"],
            residual_value=np.round(max(0.0, 1 - E / PV_LIFE_YEARS) * _path_min(tree, inst_cost), 4),
            gen_cost=[np.full((P, T), 0.005)] * E,
            availability=[np.round(avail * (1 - 0.04 * i), 4)] * E))
    bess = []
    for b in range(B):
        inst_cost = costs[f"bess{b}"]
        bess.append(BessTechnology(
            name=f"bess{b}", unit_kwh=unit_kwh,
            loss=np.full(E, 0.01 + 0.005 * b), charge_depth=np.full(E, 0.9),
            discharge_depth=np.full(E, 0.9 - 0.05 * b), op_cost=0.01,
            prep_cost=np.round(np.full(N, 300.0) * (inst_cost / inst_cost[0]), 4),
            install_cost=inst_cost, maint_cost=maint[f"bess{b}"],
            residual_value=np.round(max(0.0, 1 - E / BESS_LIFE_YEARS) * _path_min(tree, inst_cost), 4),
            max_units=int(min(cfg["max_units"], cfg["bess_total"]))))
    limits = SystemLimits(pv_total_max=float(max(cfg["pv_total"], cfg["max_panels"])),
                          pv_min_batch=float(min(cfg["min_batch_pv"], cfg["max_panels"])),
                          bess_total_max=int(max(cfg["bess_total"], cfg["max_units"])),
                          bess_min_batch=int(min(cfg["min_batch_bess"], cfg["max_units"])),
                          budget=np.full(N, float(cfg["budget"])))

    scen_scale = load.mean(axis=1) / load.mean()                         # [P]
    elastic = []
    for j in range(J1):
        length = int(rng.integers(1, T + 1))
        start = int(rng.integers(0, T - length + 1))
        window = frozenset(range(start, start + length))
        level = rng.uniform(0.05, 0.3)
        prof = np.zeros(T)
        for t in window:
            prof[t] = level * (0.8 + 0.4 * rng.uniform())
        sp = np.round(np.outer(scen_scale, prof), 4)
        steps = np.abs(np.diff(sp, axis=1)).max(axis=0) if T > 1 else np.zeros(0)
        ramp = np.zeros(T)
        ramp[1:] = steps
        ramp = np.round(ramp + rng.uniform(0.02, 0.08), 4)
        curtail = np.round(0.5 * np.where(prof > 0, sp.min(axis=0), 0.0), 4)
        disc = np.round(np.where(prof > 0, rng.uniform(1.0, 5.0), 0.0) * np.ones(T), 4)
        elastic.append(ElasticLoad(f"el{j}", [sp] * E, [window] * E, [curtail] * E, [ramp] * E, [disc] * E))

    deferrable, taus, spans = [], [], []
    for j in range(J2):
        m1 = int(rng.integers(1, 4))
        for _ in range(50):
            w_len = int(rng.integers(1, T + 1))
            w0 = int(rng.integers(0, T - w_len + 1))
            window = [t for t in range(w0, w0 + w_len)
                      if sum(hours[t:]) >= m1]
            if window:
                break
        else:
            m1 = 1
            window = list(range(T))
        tau = int(rng.choice(window))
        rate = rng.uniform(1.0, 4.0)
        disc = np.round(np.array([rate * abs(t - tau) if t in window else 0.0 for t in range(T)]), 4)
        power = round(float(rng.uniform(0.3, 1.5)), 4)
        deferrable.append(DeferrableLoad(f"def{j}", [tau] * E, [power] * E, [m1] * E,
                                         [frozenset(window)] * E, [disc] * E))
        taus.append(tau)
        spans.append((tau, tau + derive_m2(hours, tau, m1) - 1))

    # pairs compatible with the reference schedule, so zero discomfort is attainable
    incompatible, precedence = [], []
    pairs = [(a, b) for a in range(J2) for b in range(J2) if a != b]
    rng.shuffle(pairs)
    used = set()
    for a, b in pairs:
        if len(incompatible) >= cfg["H1"]:
            break
        key = (min(a, b), max(a, b))
        if key in used:
            continue
        if spans[a][1] < spans[b][0] or spans[b][1] < spans[a][0]:
            incompatible.append(key)
            used.add(key)
    for a, b in pairs:
        if len(precedence) >= cfg["H2"]:
            break
        gap = taus[b] - (spans[a][1] + 1)
        if gap >= 0 and (a, b) not in {(p, q) for p, q, _ in precedence}:
            precedence.append((a, b, int(rng.integers(0, gap + 1))))
    loads = Loads(base=[np.round(load * drift[e], 4) for e in range(E)],
                  elastic=elastic, deferrable=deferrable,
                  incompatible=sorted(incompatible), precedence=sorted(precedence))
    grid = GridParams(
        import_price=[np.round(np.outer(np.ones(P), imp_shape) * drift[e]
                               * (1 + 0.1 * (scen_scale[:, None] - 1)), 4) for e in range(E)],
        export_price=[np.round(np.full((P, T), 0.05 * drift[e]), 4) for e in range(E)])
    cap = float(cfg["cap"])
    policy = DiscomfortPolicy(expected_cap=[cap] * E,
                              profiles=[[DiscomfortProfile(cap, 0.05, 0.25, 0.05)] for _ in range(E)])
    meta = {"name": f"synthetic-{size}", "seed": int(seed), "currency": "EUR",
            "dims": {k: (v if not isinstance(v, float) else round(v, 6)) for k, v in cfg.items()}}
    inst = Instance(tree, pv, bess, limits, loads, grid, policy, meta)
    bad = validate_instance(inst)
    if bad:
        raise InstanceError("generator produced an invalid instance: " + "; ".join(bad), bad)
    return inst
