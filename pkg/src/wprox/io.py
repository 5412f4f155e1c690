"""JSON and CSV formats.

Measures: ``{"points": [[...], ...], "weights": [...]}``; ``weights`` may be
omitted for a uniform measure and 1-d points may be given as plain numbers.
Plans: ``{"cost": c, "matrix": [[...]]}``.  Traces: CSV with one row per
iterate.  All writers are deterministic: keys sorted, floats in ``repr``
form.
"""

from __future__ import annotations

import csv
import io as _io
import json
from pathlib import Path

from .iterate import IterationTrace
from .measures import DiscreteMeasure, make_discrete
from .transport import TransportPlan


class InputError(ValueError):
    """A file could not be read or does not have the expected shape."""


def read_json(path) -> object:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError as e:
        raise InputError(f"no such file: {path}") from e
    except json.JSONDecodeError as e:
        raise InputError(f"{path}: invalid JSON ({e})") from e


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_text(path, text: str) -> None:
    Path(path).write_text(text, encoding="utf-8")


def measure_from_obj(obj) -> DiscreteMeasure:
    if not isinstance(obj, dict) or "points" not in obj:
        raise InputError('a measure must be an object with a "points" list')
    pts = obj["points"]
    if not isinstance(pts, list) or not pts:
        raise InputError('"points" must be a non-empty list')
    if all(isinstance(p, (int, float)) for p in pts):
        pts = [[p] for p in pts]
    lengths = {len(p) if isinstance(p, list) else -1 for p in pts}
    if len(lengths) != 1 or -1 in lengths:
        raise InputError("all points must be lists of the same length")
    dim = obj.get("dim")
    if dim is not None and dim != lengths.pop():
        raise InputError(f'"dim" is {dim} but points have a different length')
    return make_discrete(pts, obj.get("weights"))


def load_measure(path) -> DiscreteMeasure:
    return measure_from_obj(read_json(path))


def measure_to_obj(mu: DiscreteMeasure) -> dict:
    return mu.to_dict()


def save_measure(mu: DiscreteMeasure, path) -> None:
    write_text(path, dumps(measure_to_obj(mu)))


def plan_to_obj(plan: TransportPlan) -> dict:
    return plan.to_dict()


def save_plan(plan: TransportPlan, path) -> None:
    write_text(path, dumps(plan_to_obj(plan)))


def load_run_config(path) -> dict:
    """Run config: ``algorithm``, ``functionals``, ``schedule``, ``mu0`` (a path,
    relative to the config file), optional ``refs`` and ``stop``."""
    cfg = read_json(path)
    if not isinstance(cfg, dict):
        raise InputError("run config must be a JSON object")
    missing = [k for k in ("algorithm", "functionals", "mu0") if k not in cfg]
    if missing:
        raise InputError(f"run config is missing {missing}")
    if cfg["algorithm"] not in ("ppa", "cppa", "cppa_diminishing"):
        raise InputError(f"unknown algorithm {cfg['algorithm']!r}")
    base = Path(path).parent

    def resolve(p):
        return p if isinstance(p, dict) else str(base / p)

    cfg = dict(cfg)
    cfg["mu0"] = resolve(cfg["mu0"])
    cfg["refs"] = [resolve(r) for r in cfg.get("refs", [])]
    cfg["functionals"] = [resolve(f) for f in cfg["functionals"]]
    return cfg


def _num(x) -> str:
    return repr(float(x))


def trace_csv(trace: IterationTrace) -> str:
    """Columns: iter, functional_index, step_w2, objective, dist_to_ref_0..R-1, second_moment."""
    n_refs = len(trace.refs)
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["iter", "functional_index", "step_w2", "objective"]
               + [f"dist_to_ref_{r}" for r in range(n_refs)] + ["second_moment"])
    for s in trace.steps:
        fi = "" if s.functional_index is None else s.functional_index
        w.writerow([s.index, fi, _num(s.step_w2), _num(s.objective)]
                   + [_num(d) for d in s.dist_to_refs] + [_num(s.second_moment)])
    return buf.getvalue()


def save_trace_csv(trace: IterationTrace, path) -> None:
    write_text(path, trace_csv(trace))


def read_trace_csv(path) -> list:
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))
