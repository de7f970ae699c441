"""``mhres`` command line.

Exit codes: 0 success, 1 audit failure, 2 usage or input error, 3 solver failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

EXIT_OK, EXIT_AUDIT, EXIT_USAGE, EXIT_SOLVER = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse exits with 2 already; keep the message terse
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _emit(doc, out: str | None) -> None:
    from .io import atomic_write
    text = json.dumps(doc, sort_keys=True, indent=1) + "\n"
    if out:
        atomic_write(out, text)
    else:
        sys.stdout.write(text)


def _controls(a):
    from .milp import SolverControls
    return SolverControls(gap=a.gap, time_limit=a.time_limit, threads=a.jobs)


# -- commands ------------------------------------------------------------------

def cmd_generate(a) -> int:
    from .instance import dumps_instance, save_instance
    from .scengen import synthetic_instance
    dims = {}
    for kv in a.dim or []:
        k, _, v = kv.partition("=")
        dims[k] = float(v) if "." in v else int(v)
    inst = synthetic_instance(a.size, seed=a.seed, **dims)
    if a.out:
        save_instance(inst, a.out)
    else:
        sys.stdout.write(dumps_instance(inst) + "\n")
    print(json.dumps(inst.dims(), sort_keys=True), file=sys.stderr)
    return EXIT_OK


def cmd_repdays(a) -> int:
    from .scengen import representative_days
    data = np.loadtxt(a.input, delimiter=",", ndmin=2)
    rep = representative_days(data, a.k, a.seed)
    doc = {"k": a.k, "seed": a.seed, "medoids": [int(m) for m in rep.medoids],
           "probabilities": [str(p) for p in rep.probabilities],
           "labels": [int(x) for x in rep.labels]}
    _emit(doc, a.out)
    return EXIT_OK


def cmd_solve(a) -> int:
    from .audit import check_feasibility, evaluate_cost
    from .heuristics import HeuristicError, Sfr3Params, log_to_csv, parse_strategy, sfr3, srh
    from .instance import load_instance
    from .io import atomic_write
    from .milp import solve
    from .model import build_model
    from .solution import save_solution, solution_from_outcome

    inst = load_instance(a.instance)
    controls = _controls(a)
    log = None
    try:
        if a.method == "monolithic":
            m = build_model(inst, a.variant)
            if a.lp:
                atomic_write(a.lp, m.to_lp())
            out = solve(m, controls)
            print(json.dumps({"stats": m.stats(), "status": out.status, "objective": out.objective,
                              "best_bound": out.best_bound}, sort_keys=True), file=sys.stderr)
            if not out.has_solution:
                return EXIT_SOLVER
            sol = solution_from_outcome(inst, m, out)
            sol.meta.update(method="monolithic", best_bound=out.best_bound, status=out.status)
        elif a.method == "sfr3":
            if a.strategy:
                p = parse_strategy(a.strategy, seed=a.seed, controls=controls)
            else:
                p = Sfr3Params(a.e_hat, a.e_hat_r, a.phi, a.seed, controls)
            p.jobs = a.jobs
            sol, log = sfr3(inst, a.variant, p)
        else:
            sol, log = srh(inst, a.variant, controls, jobs=a.jobs)
    except HeuristicError as err:
        print(f"solver failure: {err}", file=sys.stderr)
        return EXIT_SOLVER
    rep = check_feasibility(inst, sol)
    if a.out:
        save_solution(sol, a.out)
    if log is not None and a.log:
        atomic_write(a.log, log_to_csv(log))
    print(json.dumps({"cost": evaluate_cost(inst, sol), "audit": "PASS" if rep.passed else "FAIL"},
                     sort_keys=True))
    return EXIT_OK if rep.passed else EXIT_AUDIT


def cmd_bound(a) -> int:
    from .bounds import BoundError, run_bound, save_bound_report
    from .instance import load_instance
    inst = load_instance(a.instance)
    try:
        rep = run_bound(inst, a.scheme, a.variant, G=a.g, e_star=a.e_star, seed=a.seed,
                        controls=_controls(a), jobs=a.jobs)
    except BoundError as err:
        print(f"solver failure: {err}", file=sys.stderr)
        return EXIT_SOLVER
    if a.out:
        save_bound_report(rep, a.out, timing=a.timings)
    print(json.dumps(rep.to_dict(timing=a.timings), sort_keys=True))
    return EXIT_OK


def cmd_vsd(a) -> int:
    from .audit import check_feasibility
    from .bounds import BoundError, EvDesignInfeasible, vsd
    from .instance import load_instance
    from .solution import load_solution
    inst = load_instance(a.instance)
    sol = load_solution(a.feasible, inst)
    if not check_feasibility(inst, sol, a.variant).passed:
        print("feasible solution does not pass the audit", file=sys.stderr)
        return EXIT_AUDIT
    try:
        res = vsd(inst, a.variant, sol, _controls(a))
    except EvDesignInfeasible as err:
        print(str(err))
        return EXIT_SOLVER
    except BoundError as err:
        print(f"solver failure: {err}", file=sys.stderr)
        return EXIT_SOLVER
    _emit(res.to_dict(), a.out)
    return EXIT_OK


def cmd_audit(a) -> int:
    from .audit import check_feasibility, discomfort_statistics, sd_audit
    from .instance import load_instance
    from .model import Variant
    from .solution import load_solution
    inst = load_instance(a.instance)
    sol = load_solution(a.solution, inst)
    variant = Variant.parse(a.variant) if a.variant else sol.variant
    rep = check_feasibility(inst, sol, variant, tol=a.tol)
    doc = rep.to_dict()
    if variant is Variant.SD:
        doc["sd_audit"] = sd_audit(inst, sol)
    doc["discomfort"] = discomfort_statistics(inst, sol)
    ok = rep.passed and not doc.get("sd_audit")
    print("PASS" if ok else "FAIL")
    for v in rep.violations[:50]:
        print(f"  {v}")
    st = doc["discomfort"]
    print(f"nodal discomfort: mean {st['mean_expected']:.4g}  p95 {st['p95_expected']:.4g}  "
          f"mean exceedance {st['mean_max_exceedance']:.4g}  "
          f"violation frequency mean {100 * st['mean_violation_frequency']:.2f}% "
          f"max {100 * st['max_violation_frequency']:.2f}%")
    if a.out:
        _emit(doc, a.out)
    return EXIT_OK if ok else EXIT_AUDIT


def cmd_experiment(a) -> int:
    from .experiment import load_config, run_experiment
    cfg_path = Path(a.config)
    cfg = load_config(cfg_path)
    for kv in a.set or []:
        k, _, v = kv.partition("=")
        cfg[k] = json.loads(v)
    res = run_experiment(cfg, a.out, base=cfg_path.parent, jobs=a.jobs)
    sys.stdout.write(res["results"])
    if a.report:
        from .report import render_report
        render_report(a.out)
    return EXIT_SOLVER if res["failures"] else EXIT_OK


def cmd_report(a) -> int:
    from .report import render_report
    for p in render_report(a.results, a.out):
        print(p)
    return EXIT_OK


# -- parser --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="mhres", description="PV + battery design with multistage multi-horizon MILPs")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def solver_opts(p):
        p.add_argument("--gap", type=float, default=1e-6)
        p.add_argument("--time-limit", type=float, default=None)
        p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("generate", help="write a synthetic instance")
    p.add_argument("--size", default="small", choices=["small", "medium", "large", "custom"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dim", action="append", metavar="KEY=VALUE", help="dimension override, e.g. E=2")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_generate)

    p = sub.add_parser("repdays", help="representative days by k-medoids")
    p.add_argument("--input", required=True, help="CSV, one daily profile per row")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_repdays)

    p = sub.add_parser("solve", help="monolithic model or a matheuristic")
    p.add_argument("--instance", required=True)
    p.add_argument("--variant", default="nod")
    p.add_argument("--method", default="monolithic", choices=["monolithic", "sfr3", "srh"])
    p.add_argument("--strategy")
    p.add_argument("--e-hat", type=int, default=1)
    p.add_argument("--e-hat-r", type=int, default=0)
    p.add_argument("--phi", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.add_argument("--log", help="iteration log CSV (sfr3/srh)")
    p.add_argument("--lp", help="also write the model in LP format")
    solver_opts(p)
    p.set_defaults(fn=cmd_solve)

    p = sub.add_parser("bound", help="lower bound by decomposition or expectation")
    p.add_argument("--instance", required=True)
    p.add_argument("--variant", default="nod")
    p.add_argument("--scheme", required=True, choices=["sws", "mhev", "mhoev", "smg", "smc"])
    p.add_argument("--g", type=int)
    p.add_argument("--e-star", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--timings", action="store_true", help="include wall times in the report")
    p.add_argument("--out")
    solver_opts(p)
    p.set_defaults(fn=cmd_bound)

    p = sub.add_parser("vsd", help="value of the strategic decision")
    p.add_argument("--instance", required=True)
    p.add_argument("--variant", default="nod")
    p.add_argument("--feasible", required=True, help="solution JSON")
    p.add_argument("--out")
    solver_opts(p)
    p.set_defaults(fn=cmd_vsd)

    p = sub.add_parser("audit", help="independent feasibility check of a solution")
    p.add_argument("--instance", required=True)
    p.add_argument("--solution", required=True)
    p.add_argument("--variant")
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_audit)

    p = sub.add_parser("experiment", help="run a JSON-declared experiment matrix")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--set", action="append", metavar="KEY=JSON", help="override a config entry")
    p.add_argument("--report", action="store_true", help="render figures after the run")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(fn=cmd_experiment)

    p = sub.add_parser("report", help="summary CSV and figures from an experiment directory")
    p.add_argument("--results", required=True)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_report)
    return ap


def main(argv=None) -> int:
    from .instance import InstanceError
    from .milp import BackendUnavailable, ModelError
    from .solution import MissingValues
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as stop:   # usage errors and --help
        return int(stop.code or 0)
    try:
        return args.fn(args)
    except (InstanceError, MissingValues, FileNotFoundError, ModelError, ValueError,
            json.JSONDecodeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except BackendUnavailable as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
