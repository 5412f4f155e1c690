"""``wprox`` command-line entry point.

Exit codes: 0 success, 1 a check failed, 2 bad input, 3 solver failure.
Errors are reported on stderr as one JSON object
``{"error": {"kind": ..., "type": ..., "message": ...}}``.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import io
from .checks import SUITES, list_checks, run_suite
from .errors import NonFiniteObjective, SolverFailure, WProxError
from .functionals import functional_from_spec
from .iterate import (
    Diminishing,
    IterationTrace,
    StopRule,
    cyclic_ppa,
    cyclic_ppa_diminishing,
    ppa,
    schedule_from_dict,
)
from .measures import DiscreteMeasure
from .prox import ProxConfig, prox_result
from .transport import geodesic, solve_w2

EXIT_OK, EXIT_CHECK, EXIT_INPUT, EXIT_SOLVER = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _emit(text: str, out: str | None) -> None:
    if out:
        io.write_text(out, text)
    else:
        sys.stdout.write(text)


def _measure_arg(value, name: str) -> DiscreteMeasure:
    if value is None:
        raise UsageError(f"--{name} is required")
    return io.measure_from_obj(value) if isinstance(value, dict) else io.load_measure(value)


def _functional_arg(value):
    spec = value if isinstance(value, dict) else io.read_json(value)
    try:
        return functional_from_spec(spec)
    except (KeyError, TypeError) as e:
        raise io.InputError(f"bad functional description: {e}") from e


def _prox_cfg(tau: float, tol: float | None) -> ProxConfig:
    return ProxConfig(tau) if tol is None else ProxConfig(tau, tol=tol)


def cmd_w2(args) -> int:
    plan = solve_w2(_measure_arg(args.mu, "mu"), _measure_arg(args.nu, "nu"))
    report = {"w2_squared": plan.cost, "w2": plan.w2, "gap": plan.gap, "certified": plan.certified}
    if args.plan_out:
        io.save_plan(plan, args.plan_out)
    _emit(io.dumps(report), args.out)
    return EXIT_OK


def cmd_prox(args) -> int:
    F = _functional_arg(args.functional)
    mu = _measure_arg(args.mu, "mu")
    res = prox_result(F, _prox_cfg(args.tau, args.tol), mu)
    out = {"measure": res.measure.to_dict(), "objective": res.objective, "certified": res.certified,
           "exact": res.exact, "outer_iterations": res.outer_iterations}
    _emit(io.dumps(out), args.out)
    return EXIT_OK


def cmd_geodesic(args) -> int:
    plan = solve_w2(_measure_arg(args.mu, "mu"), _measure_arg(args.nu, "nu"))
    ts = args.t or [0.5]
    out = {"w2": plan.w2, "points": [{"t": t, "measure": geodesic(plan, t).to_dict()} for t in ts]}
    _emit(io.dumps(out), args.out)
    return EXIT_OK


def _summary(trace: IterationTrace) -> dict:
    last = trace.steps[-1]
    return {"algorithm": trace.meta["algorithm"], "schedule": trace.meta["schedule"], "seed": trace.meta["seed"],
            "iterations": len(trace) - 1, "final_objective": last.objective,
            "final_dist_to_refs": list(last.dist_to_refs), "final_measure": trace.last.to_dict()}


def _write_trace(trace: IterationTrace, args) -> int:
    if args.out:
        io.save_trace_csv(trace, args.out)
        sys.stdout.write(io.dumps(_summary(trace)))
    else:
        sys.stdout.write(io.trace_csv(trace))
    return EXIT_OK


def _stop(args, stop_cfg: dict | None = None) -> StopRule:
    kw = dict(stop_cfg or {})
    for key in ("max_iter", "step_tol", "patience"):
        if getattr(args, key) is not None:
            kw[key] = getattr(args, key)
    return StopRule(**kw)


def _run(algorithm, Fs, taus, schedule, mu0, refs, stop, args, max_cycles):
    if algorithm == "ppa":
        if len(Fs) != 1:
            raise UsageError("ppa takes exactly one functional")
        return ppa(Fs[0], _prox_cfg(taus[0], args.tol), mu0, stop, refs, seed=args.seed)
    if algorithm == "cppa":
        if len(taus) == 1:
            taus = taus * len(Fs)
        if len(taus) != len(Fs):
            raise UsageError("give one --tau, or one per functional")
        return cyclic_ppa(Fs, [_prox_cfg(t, args.tol) for t in taus], mu0, stop, refs, seed=args.seed)
    base = None if args.tol is None else ProxConfig(1.0, tol=args.tol)
    return cyclic_ppa_diminishing(Fs, schedule, mu0, max_cycles, refs, seed=args.seed, base_cfg=base)


def cmd_iterate(args) -> int:
    if args.config:
        cfg = io.load_run_config(args.config)
        algorithm = cfg["algorithm"]
        Fs = [_functional_arg(f) for f in cfg["functionals"]]
        mu0 = _measure_arg(cfg["mu0"], "mu0")
        refs = [_measure_arg(r, "refs") for r in cfg["refs"]]
        sched = schedule_from_dict(cfg.get("schedule", {"kind": "constant", "tau": 1.0}))
        taus = list(sched.taus) if sched.kind != "diminishing" else []
        stop = _stop(args, cfg.get("stop"))
        max_cycles = int(cfg.get("max_cycles", args.cycles or 100))
    else:
        if not args.functional:
            raise UsageError("--functional (or --config) is required")
        Fs = [_functional_arg(f) for f in args.functional]
        mu0 = _measure_arg(args.mu0 or args.mu, "mu0")
        refs = [_measure_arg(r, "refs") for r in args.ref or []]
        stop = _stop(args)
        max_cycles = args.cycles or 100
        if args.diminishing is not None:
            algorithm, sched, taus = "cppa_diminishing", Diminishing(args.diminishing), []
        else:
            if not args.tau:
                raise UsageError("--tau is required")
            algorithm, sched, taus = args.command, None, list(args.tau)
    if algorithm == "cppa_diminishing" and args.command == "ppa":
        raise UsageError("diminishing steps are only available with cppa")
    return _write_trace(_run(algorithm, Fs, taus, sched, mu0, refs, stop, args, max_cycles), args)


def cmd_check(args) -> int:
    if args.list_checks:
        sys.stdout.write(list_checks())
        return EXIT_OK
    if not args.suite:
        raise UsageError("--suite is required (or --list-checks)")
    names = list(SUITES) if args.suite == ["all"] else args.suite
    reports = [run_suite(n, args.seed, args.tol) for n in names]
    out = {"seed": args.seed, "holds": all(r.holds for r in reports), "reports": [r.to_dict() for r in reports]}
    _emit(io.dumps(out), args.out)
    return EXIT_OK if out["holds"] else EXIT_CHECK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="wprox", description="Exact W2 transport, Wasserstein prox maps and proximal iterations.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--out", help="write the main output here instead of stdout")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--tol", type=float, help="tolerance override")

    s = sub.add_parser("w2", help="exact squared W2 and optimal plan")
    s.add_argument("--mu", required=True)
    s.add_argument("--nu", required=True)
    s.add_argument("--plan-out", help="also write the optimal plan as JSON")
    common(s)

    s = sub.add_parser("prox", help="Wasserstein prox of a functional")
    s.add_argument("--functional", required=True)
    s.add_argument("--tau", type=float, required=True)
    s.add_argument("--mu", required=True)
    common(s)

    s = sub.add_parser("geodesic", help="displacement interpolation between two measures")
    s.add_argument("--mu", required=True)
    s.add_argument("--nu", required=True)
    s.add_argument("--t", type=float, action="append", help="time in [0, 1]; repeatable (default 0.5)")
    common(s)

    for name, text in (("ppa", "proximal point iteration"), ("cppa", "cyclic proximal point iteration")):
        s = sub.add_parser(name, help=text)
        s.add_argument("--functional", action="append", help="functional JSON; repeat for cppa")
        s.add_argument("--tau", type=float, action="append", help="step size; repeat for one per functional")
        s.add_argument("--mu", help="initial measure (alias of --mu0)")
        s.add_argument("--mu0")
        s.add_argument("--ref", action="append", help="reference measure for distance columns; repeatable")
        s.add_argument("--max-iter", dest="max_iter", type=int)
        s.add_argument("--step-tol", dest="step_tol", type=float)
        s.add_argument("--patience", type=int)
        s.add_argument("--config", help="run config JSON")
        if name == "cppa":
            s.add_argument("--diminishing", type=float, metavar="TAU0", help="use steps TAU0/(k+1) per cycle")
            s.add_argument("--cycles", type=int, help="number of cycles for diminishing steps")
        else:
            s.set_defaults(diminishing=None, cycles=None)
        common(s)

    s = sub.add_parser("check", help="run a batch inequality suite")
    s.add_argument("--suite", action="append", help="suite name or 'all'; repeatable")
    s.add_argument("--list-checks", action="store_true")
    common(s)
    return p


COMMANDS = {"w2": cmd_w2, "prox": cmd_prox, "geodesic": cmd_geodesic, "ppa": cmd_iterate,
            "cppa": cmd_iterate, "check": cmd_check}


def _fail(kind: str, exc: BaseException, code: int) -> int:
    record = {"error": {"kind": kind, "type": type(exc).__name__, "message": str(exc)}}
    sys.stderr.write(json.dumps(record, sort_keys=True) + "\n")
    return code


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as e:
        return _fail("usage", e, EXIT_INPUT)
    except io.InputError as e:
        return _fail("parse", e, EXIT_INPUT)
    except (SolverFailure, NonFiniteObjective) as e:
        return _fail("solver", e, EXIT_SOLVER)
    except (WProxError, ValueError, KeyError) as e:
        return _fail("input", e, EXIT_INPUT)
    except OSError as e:
        return _fail("io", e, EXIT_INPUT)


if __name__ == "__main__":
    sys.exit(main())
