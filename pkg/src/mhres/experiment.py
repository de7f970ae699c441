"""Declarative experiment runs: variants x methods x bound schemes.

A run directory receives one JSON per sub-run, ``results.csv`` (costs,
bounds, gaps and ratios only, so reruns are byte-identical),
``timings.csv`` with wall times and time ratios, and ``provenance.json``.
"""
from __future__ import annotations

import csv
import io
import json
import math
import platform
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .audit import check_feasibility, evaluate_cost
from .bounds import EvDesignInfeasible, run_bound, vsd
from .heuristics import log_to_csv, parse_strategy, sfr3, srh
from .instance import Instance, load_instance, save_instance
from .io import atomic_write, write_json
from .milp import SolverControls, default_backend, solve
from .model import Variant, build_model
from .scengen import synthetic_instance
from .solution import save_solution, solution_from_outcome

RESULT_COLUMNS = ("variant", "kind", "label", "status", "E", "N", "scenarios", "I", "B", "J1", "J2",
                  "constraints", "integers", "binaries", "continuous", "nonzeros",
                  "z", "gap", "GR", "VSD", "audit")
TIMING_COLUMNS = ("variant", "kind", "label", "time", "TR")


def _fmt(v) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    if isinstance(v, float):
        return f"{v:.10g}"
    return str(v)


def method_label(entry: dict) -> str:
    m = entry["method"].lower()
    if m == "sfr3":
        p = _sfr3_params(entry, SolverControls())
        return f"sfr3{p.label()}s{p.seed}"
    return m


def bound_label(entry: dict) -> str:
    s = entry["scheme"].lower()
    if s == "smg":
        return f"smg(G={entry['G']},seed={entry.get('seed', 0)})"
    if s == "smc":
        return f"smc(e*={entry['e_star']})"
    return s


def _sfr3_params(entry: dict, controls: SolverControls):
    seed = int(entry.get("seed", 0))
    if "strategy" in entry:
        return parse_strategy(entry["strategy"], seed=seed, controls=controls)
    from .heuristics import Sfr3Params
    return Sfr3Params(int(entry.get("e_hat", 1)), int(entry.get("e_hat_r", 0)),
                      float(entry.get("phi", 0.0)), seed, controls)


def load_config_instance(cfg: dict, base: Path) -> Instance:
    src = cfg["instance"]
    if isinstance(src, str):
        src = {"path": src}
    if "path" in src:
        p = Path(src["path"])
        return load_instance(p if p.is_absolute() else base / p)
    gen = dict(src.get("generate", src))
    size = gen.pop("size", "small")
    seed = int(gen.pop("seed", 0))
    return synthetic_instance(size, seed=seed, **gen)


@dataclass
class _Row:
    variant: str
    kind: str
    label: str
    status: str
    z: float = math.nan
    time: float = math.nan
    stats: dict | None = None
    audit: str = ""
    extra: dict | None = None


def run_experiment(cfg: dict, out_dir: str | Path, base: str | Path = ".", jobs: int = 1) -> dict:
    """Execute the declared matrix and write the results bundle to ``out_dir``."""
    out = Path(out_dir)
    (out / "runs").mkdir(parents=True, exist_ok=True)
    inst = load_config_instance(cfg, Path(base))
    save_instance(inst, out / "instance.json")
    controls = SolverControls(gap=float(cfg.get("gap", 1e-6)), time_limit=cfg.get("time_limit"))
    variants = [Variant.parse(v) for v in cfg.get("variants", ["NoD", "RN", "SD"])]
    methods = cfg.get("methods", [{"method": "monolithic"}])
    bounds_ = cfg.get("bounds", [])
    dims = inst.dims()
    rows: list[_Row] = []
    failures = 0

    for v in variants:
        vrows: list[_Row] = []
        z_star = math.nan
        for entry in methods:
            label = method_label(entry)
            stem = f"{v.value}_{label}"
            t0 = time.perf_counter()
            try:
                row, doc = _run_method(inst, v, entry, label, controls, jobs, out / "runs" / stem)
            except Exception as err:  # recorded, bundle still emitted
                failures += 1
                row, doc = _Row(v.value, "method", label, f"failed: {err}"), {"error": str(err)}
            row.time = time.perf_counter() - t0
            doc.update(variant=v.value, label=label, wall_time=row.time, status=row.status)
            write_json(out / "runs" / f"{stem}.json", doc)
            if label == "monolithic" and row.status == "optimal":
                z_star = row.z
            vrows.append(row)
        for entry in bounds_:
            label = bound_label(entry)
            stem = f"{v.value}_{label}".replace("*", "")
            t0 = time.perf_counter()
            try:
                rep = run_bound(inst, entry["scheme"], v, G=entry.get("G"), e_star=entry.get("e_star"),
                                seed=int(entry.get("seed", 0)), controls=controls, jobs=jobs)
                row = _Row(v.value, "bound", label, "ok", rep.value)
                doc = rep.to_dict(timing=True)
            except Exception as err:
                failures += 1
                row, doc = _Row(v.value, "bound", label, f"failed: {err}"), {"error": str(err)}
            row.time = time.perf_counter() - t0
            write_json(out / "runs" / f"{stem}.json", doc)
            vrows.append(row)
        if cfg.get("vsd"):
            anchor = next((r for r in vrows if r.kind == "method" and r.label.startswith("sfr3")
                           and math.isfinite(r.z)), None) or \
                next((r for r in vrows if r.kind == "method" and math.isfinite(r.z)), None)
            t0 = time.perf_counter()
            if anchor is not None:
                try:
                    res = vsd(inst, v, anchor.z, controls)
                    row = _Row(v.value, "vsd", f"vsd[{anchor.label}]", "ok", res.z_s_mhev,
                               extra={"VSD": res.vsd, "GR": res.gr})
                    doc = res.to_dict()
                except EvDesignInfeasible as err:
                    row, doc = _Row(v.value, "vsd", f"vsd[{anchor.label}]", str(err)), {"error": str(err)}
                except Exception as err:
                    failures += 1
                    row, doc = _Row(v.value, "vsd", f"vsd[{anchor.label}]", f"failed: {err}"), {"error": str(err)}
                row.time = time.perf_counter() - t0
                write_json(out / "runs" / f"{v.value}_vsd.json", doc)
                vrows.append(row)
        for r in vrows:
            r.extra = dict(r.extra or {}, z_star=z_star)
        rows.extend(vrows)

    results = _results_csv(rows, dims)
    timings = _timings_csv(rows)
    atomic_write(out / "results.csv", results)
    atomic_write(out / "timings.csv", timings)
    prov = {"config": cfg, "seeds": _seeds(cfg), "solver": default_backend(), "versions": {
        "mhres": __version__, "python": platform.python_version(), "numpy": np.__version__,
        "scipy": scipy.__version__}, "failures": failures, "partial": failures > 0}
    write_json(out / "provenance.json", prov)
    return {"results": results, "timings": timings, "failures": failures, "dir": str(out)}


def _seeds(cfg: dict) -> dict:
    src = cfg.get("instance", {})
    gen = src.get("generate", src) if isinstance(src, dict) else {}
    return {"instance": gen.get("seed"),
            "methods": [m.get("seed") for m in cfg.get("methods", []) if "seed" in m],
            "bounds": [b.get("seed") for b in cfg.get("bounds", []) if "seed" in b]}


def _sib(stem: Path, suffix: str) -> Path:
    return stem.parent / (stem.name + suffix)


def _run_method(inst, v, entry, label, controls, jobs, stem: Path):
    m = entry["method"].lower()
    doc: dict = {"method": m}
    if m == "monolithic":
        model = build_model(inst, v)
        outc = solve(model, controls)
        stats = model.stats()
        if not outc.has_solution:
            return _Row(v.value, "method", label, outc.status, stats=stats), doc
        sol = solution_from_outcome(inst, model, outc)
        status = outc.status
        doc.update(best_bound=outc.best_bound, solver_gap=outc.gap)
    elif m == "sfr3":
        params = _sfr3_params(entry, controls)
        params.jobs = jobs
        sol, log = sfr3(inst, v, params)
        atomic_write(_sib(stem, ".log.csv"), log_to_csv(log))
        status, stats = "feasible", None
    elif m == "srh":
        sol, log = srh(inst, v, controls, jobs=jobs)
        atomic_write(_sib(stem, ".log.csv"), log_to_csv(log))
        status, stats = "feasible", None
    else:
        raise ValueError(f"unknown method {m!r}")
    rep = check_feasibility(inst, sol, v)
    cost = evaluate_cost(inst, sol)
    save_solution(sol, _sib(stem, ".sol.json"))
    doc.update(cost=cost, audit=rep.to_dict(), stats=stats)
    return _Row(v.value, "method", label, status, cost["total"], stats=stats,
                audit="PASS" if rep.passed else "FAIL"), doc


def _results_csv(rows: list[_Row], dims: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RESULT_COLUMNS)
    by_variant: dict[str, dict[str, float]] = {}
    for r in rows:
        if r.kind == "method" and math.isfinite(r.z):
            by_variant.setdefault(r.variant, {})[r.label] = r.z
    for r in rows:
        zs = (r.extra or {}).get("z_star", math.nan)
        gap = (r.z - zs) / abs(zs) if math.isfinite(zs) and math.isfinite(r.z) and zs else math.nan
        gr = (r.extra or {}).get("GR", math.nan)
        if r.kind == "method" and r.label.startswith("sfr3"):
            z_srh = by_variant.get(r.variant, {}).get("srh")
            if z_srh:
                gr = round(r.z / z_srh, 3)
        st = r.stats or {}
        w.writerow([r.variant, r.kind, r.label, r.status, dims["E"], dims["N"], dims["scenarios"],
                    dims["I"], dims["B"], dims["J1"], dims["J2"],
                    *(_fmt(st.get(k)) for k in ("constraints", "integers", "binaries", "continuous",
                                                "nonzeros")),
                    _fmt(r.z), _fmt(gap), _fmt(gr), _fmt((r.extra or {}).get("VSD")), r.audit])
    return buf.getvalue()


def _timings_csv(rows: list[_Row]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TIMING_COLUMNS)
    t_srh = {r.variant: r.time for r in rows if r.kind == "method" and r.label == "srh"}
    for r in rows:
        tr = math.nan
        if r.label.startswith("sfr3") and t_srh.get(r.variant):
            tr = round(r.time / t_srh[r.variant], 3)
        w.writerow([r.variant, r.kind, r.label, f"{r.time:.3f}", _fmt(tr)])
    return buf.getvalue()


def load_config(path: str | Path) -> dict:
    return json.loads(Path(path).read_text())
