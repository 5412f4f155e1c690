"""Proximal iteration drivers and the monitors that certify their traces.

Three drivers produce an :class:`IterationTrace`:

* :func:`ppa` repeats one prox map;
* :func:`cyclic_ppa` cycles through the prox maps of several functionals
  with fixed step sizes;
* :func:`cyclic_ppa_diminishing` does the same with a step size that
  shrinks once per cycle.

Monitors read a finished trace and return :class:`CheckReport` objects.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .errors import MissingLipschitzBound
from .functionals import Functional, sum_functional
from .measures import DiscreteMeasure, second_moment
from .operators import MeasureMap
from .prox import ProxConfig, prox
from .reports import CheckReport
from .transport import w2

FEJER_TOL = 1e-7
REGULARITY_TOL = 1e-6
STEP_BOUND_TOL = 1e-7
MAX_STORED = 10_001  # iterates 0..10^4
MAX_STORED_ATOMS = 1_000


# -- schedules and stopping ----------------------------------------------------

@dataclass(frozen=True)
class StepSchedule:
    """Step sizes for the drivers.

    ``constant``: the same ``tau`` everywhere.  ``per_function``: ``taus[i]``
    for functional ``i``.  ``diminishing``: ``tau0 / (k+1)^power`` in cycle
    ``k``, for every functional.
    """

    kind: str
    taus: tuple = ()
    tau0: float = 0.0
    power: float = 1.0

    def __post_init__(self):
        if self.kind not in ("constant", "per_function", "diminishing"):
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if self.kind == "diminishing":
            if not self.tau0 > 0:
                raise ValueError("tau0 must be positive")
            if not 0.5 < self.power <= 1.0:
                raise ValueError("power must lie in (1/2, 1] for the step sums to behave")
        elif not self.taus or any(not t > 0 for t in self.taus):
            raise ValueError("all step sizes must be positive")

    def tau(self, cycle: int, i: int = 0) -> float:
        if self.kind == "constant":
            return self.taus[0]
        if self.kind == "per_function":
            return self.taus[i]
        return self.tau0 / (cycle + 1) ** self.power

    @property
    def sum_diverges(self) -> bool:
        """``sum_k tau_k = inf``: true for constants and for powers <= 1."""
        return self.kind != "diminishing" or self.power <= 1.0

    @property
    def squares_summable(self) -> bool:
        """``sum_k tau_k^2 < inf``: only diminishing rules with power > 1/2."""
        return self.kind == "diminishing" and self.power > 0.5

    def describe(self) -> str:
        if self.kind == "diminishing":
            p = "" if self.power == 1.0 else f"^{self.power:g}"
            return f"diminishing(tau0={self.tau0:g}/(k+1){p})"
        return f"{self.kind}({', '.join(f'{t:g}' for t in self.taus)})"

    def to_dict(self) -> dict:
        if self.kind == "diminishing":
            return {"kind": "diminishing", "tau0": self.tau0, "power": self.power}
        return {"kind": self.kind, "taus": list(self.taus)}


def Constant(tau: float) -> StepSchedule:
    return StepSchedule("constant", (float(tau),))


def PerFunction(taus: Sequence[float]) -> StepSchedule:
    return StepSchedule("per_function", tuple(float(t) for t in taus))


def Diminishing(tau0: float, power: float = 1.0) -> StepSchedule:
    return StepSchedule("diminishing", tau0=float(tau0), power=float(power))


def schedule_from_dict(d: dict) -> StepSchedule:
    kind = d.get("kind")
    if kind == "constant":
        return Constant(d["tau"] if "tau" in d else d["taus"][0])
    if kind == "per_function":
        return PerFunction(d["taus"])
    if kind == "diminishing":
        return Diminishing(d["tau0"], d.get("power", 1.0))
    raise ValueError(f"unknown schedule kind {kind!r}")


@dataclass(frozen=True)
class StopRule:
    """Stop after ``patience`` consecutive steps shorter than ``step_tol``,
    or after ``max_iter`` steps."""

    max_iter: int = 10_000
    step_tol: float = 1e-8
    patience: int = 3

    def __post_init__(self):
        if self.max_iter < 0 or self.patience < 1 or self.step_tol < 0:
            raise ValueError("invalid stop rule")


# -- traces --------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class StepRecord:
    index: int
    measure: Optional[DiscreteMeasure]  # None when thinned out
    step_w2: float
    objective: float
    dist_to_refs: tuple
    second_moment: float
    functional_index: Optional[int] = None
    tau: Optional[float] = None
    cycle: Optional[int] = None


@dataclass(eq=False)
class IterationTrace:
    """Iterates of one run, in order, with per-step diagnostics.

    ``boundaries`` maps cycle number ``k`` to the index of ``mu_{kN}``; those
    iterates are always stored.  ``lipschitz`` lists the declared bounds of
    the functionals for diminishing-step runs.
    """

    steps: list
    meta: dict
    refs: tuple = ()
    objective_fn: Optional[Functional] = None
    boundaries: dict = field(default_factory=dict)
    lipschitz: tuple = ()

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def measures(self) -> list:
        return [s.measure for s in self.steps]

    @property
    def last(self) -> DiscreteMeasure:
        return self.steps[-1].measure

    def step_sizes(self) -> list:
        return [s.step_w2 for s in self.steps[1:]]

    def stored(self) -> list:
        return [s for s in self.steps if s.measure is not None]

    def boundary_records(self) -> list:
        return [self.steps[i] for _, i in sorted(self.boundaries.items())]


class _Recorder:
    def __init__(self, refs, objective, expected_steps: int, n_atoms: int):
        self.refs = tuple(refs)
        self.objective = objective
        self.steps: list[StepRecord] = []
        every = max(1, math.ceil((expected_steps + 1) / MAX_STORED))
        if n_atoms > MAX_STORED_ATOMS:
            every = max(every, 10)
        self.every = every
        self.prev: Optional[DiscreteMeasure] = None

    def add(self, mu, fi=None, tau=None, cycle=None, keep=False) -> StepRecord:
        idx = len(self.steps)
        step = 0.0 if self.prev is None else w2(mu, self.prev)
        rec = StepRecord(
            idx,
            mu if (keep or idx % self.every == 0) else None,
            step,
            float(self.objective(mu)),
            tuple(w2(mu, r) for r in self.refs),
            second_moment(mu),
            fi,
            tau,
            cycle,
        )
        self.steps.append(rec)
        self.prev = mu
        return rec

    def keep_last(self, mu):
        """Make sure the final iterate is stored."""
        last = self.steps[-1]
        if last.measure is None:
            self.steps[-1] = StepRecord(last.index, mu, last.step_w2, last.objective, last.dist_to_refs,
                                        last.second_moment, last.functional_index, last.tau, last.cycle)


def _run_cyclic(Fs, cfgs, mu0, stop: StopRule, refs, meta, objective):
    N = len(Fs)
    rec = _Recorder(refs, objective, stop.max_iter, mu0.size)
    rec.add(mu0)
    mu = mu0
    quiet = 0
    need = max(stop.patience, N)
    for n in range(stop.max_iter):
        i = n % N
        mu = prox(Fs[i], cfgs[i], mu)
        r = rec.add(mu, fi=i, tau=cfgs[i].tau, cycle=n // N)
        quiet = quiet + 1 if r.step_w2 < stop.step_tol else 0
        if quiet >= need:
            break
    rec.keep_last(mu)
    meta = dict(meta, stop={"max_iter": stop.max_iter, "step_tol": stop.step_tol, "patience": stop.patience})
    return IterationTrace(rec.steps, meta, tuple(refs), objective)


def ppa(F: Functional, cfg: ProxConfig, mu0: DiscreteMeasure, stop: StopRule = StopRule(),
        refs: Sequence[DiscreteMeasure] = (), seed: int = 0) -> IterationTrace:
    """Iterate ``mu <- prox(mu)`` until the stop rule fires."""
    meta = {"algorithm": "ppa", "schedule": Constant(cfg.tau).describe(), "seed": seed, "n_functionals": 1}
    return _run_cyclic([F], [cfg], mu0, stop, refs, meta, F)


def cyclic_ppa(Fs: Sequence[Functional], cfgs: Sequence[ProxConfig], mu0: DiscreteMeasure,
               stop: StopRule = StopRule(), refs: Sequence[DiscreteMeasure] = (),
               seed: int = 0) -> IterationTrace:
    """Apply the prox maps of ``Fs`` in round-robin order.

    Step ``n`` uses functional ``n mod N``.  Since a single prox may leave a
    measure fixed while another moves it, the stop rule waits for at least
    ``N`` consecutive short steps.  The recorded objective is the sum of
    the functionals.
    """
    Fs, cfgs = list(Fs), list(cfgs)
    if not Fs or len(Fs) != len(cfgs):
        raise ValueError("need one ProxConfig per functional and at least one functional")
    taus = [c.tau for c in cfgs]
    sched = Constant(taus[0]) if len(set(taus)) == 1 else PerFunction(taus)
    meta = {"algorithm": "cppa", "schedule": sched.describe(), "seed": seed, "n_functionals": len(Fs)}
    objective = Fs[0] if len(Fs) == 1 else sum_functional(Fs)
    return _run_cyclic(Fs, cfgs, mu0, stop, refs, meta, objective)


def cyclic_ppa_diminishing(Fs: Sequence[Functional], schedule: StepSchedule, mu0: DiscreteMeasure,
                           max_cycles: int, refs: Sequence[DiscreteMeasure] = (), seed: int = 0,
                           base_cfg: Optional[ProxConfig] = None) -> IterationTrace:
    """Cyclic prox with step ``tau_k`` shared by all functionals in cycle ``k``.

    Every functional must declare a Lipschitz bound; the monitors use them.
    ``boundaries[k]`` is the trace index of ``mu_{kN}`` for ``k = 0..max_cycles``.
    """
    Fs = list(Fs)
    if not Fs:
        raise ValueError("need at least one functional")
    missing = [F.name for F in Fs if F.lipschitz_bound is None]
    if missing:
        raise MissingLipschitzBound(f"functionals without a Lipschitz bound: {missing}")
    if not (schedule.sum_diverges and schedule.squares_summable):
        raise ValueError(f"schedule {schedule.describe()} does not meet the step-sum conditions")
    base = base_cfg or ProxConfig(1.0)
    N = len(Fs)
    objective = Fs[0] if N == 1 else sum_functional(Fs)
    rec = _Recorder(refs, objective, max_cycles * N, mu0.size)
    rec.add(mu0, keep=True)
    boundaries = {0: 0}
    mu = mu0
    for k in range(max_cycles):
        tau = schedule.tau(k)
        for i, F in enumerate(Fs):
            mu = prox(F, base.with_tau(tau), mu)
            rec.add(mu, fi=i, tau=tau, cycle=k, keep=(i == N - 1))
        boundaries[k + 1] = len(rec.steps) - 1
    meta = {"algorithm": "cppa_diminishing", "schedule": schedule.describe(), "seed": seed,
            "n_functionals": N, "max_cycles": max_cycles}
    return IterationTrace(rec.steps, meta, tuple(refs), objective, boundaries,
                          tuple(float(F.lipschitz_bound) for F in Fs))


def iterate_operator(T: MeasureMap, mu0: DiscreteMeasure, stop: StopRule = StopRule(),
                     refs: Sequence[DiscreteMeasure] = (), objective: Optional[Functional] = None,
                     seed: int = 0) -> IterationTrace:
    """Plain fixed-point iteration ``mu <- T(mu)`` for any measure map."""
    obj = objective if objective is not None else (lambda mu: 0.0)
    rec = _Recorder(refs, obj, stop.max_iter, mu0.size)
    rec.add(mu0)
    mu, quiet = mu0, 0
    for _ in range(stop.max_iter):
        mu = T(mu)
        r = rec.add(mu, fi=0)
        quiet = quiet + 1 if r.step_w2 < stop.step_tol else 0
        if quiet >= stop.patience:
            break
    rec.keep_last(mu)
    meta = {"algorithm": "fixed-point", "schedule": T.label, "seed": seed, "n_functionals": 1}
    return IterationTrace(rec.steps, meta, tuple(refs), objective)


# -- monitors ------------------------------------------------------------------

def _ref_dists(trace: IterationTrace, refs) -> tuple[list, list]:
    """(records, distance rows) for the requested refs, over stored iterates."""
    if refs is None:
        if not trace.refs:
            raise ValueError("no reference measures given and none recorded in the trace")
        return trace.steps, [list(s.dist_to_refs) for s in trace.steps]
    refs = list(refs)
    if not refs:
        raise ValueError("refs must be nonempty")
    recs = trace.stored()
    return recs, [[w2(s.measure, r) for r in refs] for s in recs]


def fejer_monitor(trace: IterationTrace, refs: Optional[Sequence[DiscreteMeasure]] = None) -> CheckReport:
    """Distances to each reference must not grow along the trace.

    For a diminishing-step trace the check is made between consecutive
    cycle boundaries and allows the growth
    ``-2 tau_k (F(mu_kN) - F(nu)) + 2 tau_k^2 L^2 N (N+1)`` with ``L`` the
    largest declared Lipschitz bound.
    """
    if trace.meta.get("algorithm") == "cppa_diminishing":
        return _near_fejer(trace, refs)
    recs, dists = _ref_dists(trace, refs)
    slacks = []
    for prev, cur in zip(dists, dists[1:]):
        slacks.extend(p - c for p, c in zip(prev, cur))
    return CheckReport("fejer", slacks, FEJER_TOL, {"n_iterates": len(recs)})


def _near_fejer(trace: IterationTrace, refs) -> CheckReport:
    refs = list(trace.refs if refs is None else refs)
    if not refs:
        raise ValueError("refs must be nonempty")
    F = trace.objective_fn
    N = trace.meta["n_functionals"]
    L = max(trace.lipschitz)
    f_ref = [F(r) for r in refs]
    bnd = trace.boundary_records()
    d2 = [[w2(b.measure, r) ** 2 for r in refs] for b in bnd]
    slacks = []
    for k in range(len(bnd) - 1):
        tau = trace.steps[bnd[k + 1].index].tau
        f_k = bnd[k].objective
        for j in range(len(refs)):
            allowed = d2[k][j] - 2.0 * tau * (f_k - f_ref[j]) + 2.0 * tau * tau * L * L * N * (N + 1)
            slacks.append(allowed - d2[k + 1][j])
    return CheckReport("near-fejer", slacks, FEJER_TOL, {"n_cycles": len(bnd) - 1, "L_max": L, "N": N})


def step_bound_check(trace: IterationTrace) -> CheckReport:
    """Each prox step moves at most ``2 tau_k L_i`` (diminishing-step traces)."""
    if not trace.lipschitz:
        raise MissingLipschitzBound("trace carries no Lipschitz bounds")
    slacks = [2.0 * s.tau * trace.lipschitz[s.functional_index] - s.step_w2 for s in trace.steps[1:]]
    return CheckReport("step-bound", slacks, STEP_BOUND_TOL)


def asymptotic_regularity(trace: IterationTrace, alpha: float = 0.5,
                          refs: Optional[Sequence[DiscreteMeasure]] = None) -> CheckReport:
    """Sum of squared steps against ``alpha/(1-alpha) * W2(mu_0, nu)^2``.

    Holds for any reference ``nu`` fixed by every operator that drove the
    trace.  ``details["steps"]`` holds the step sequence.
    """
    if len(trace) < 3:
        raise ValueError("asymptotic regularity needs at least three iterates")
    refs = list(trace.refs if refs is None else refs)
    if not refs:
        raise ValueError("refs must be nonempty")
    total = math.fsum(s * s for s in trace.step_sizes())
    mu0 = trace.steps[0].measure
    k = alpha / (1.0 - alpha)
    slacks = [k * w2(mu0, r) ** 2 - total for r in refs]
    return CheckReport("asymptotic-regularity", slacks, REGULARITY_TOL,
                       {"sum_sq_steps": total, "steps": trace.step_sizes()})


def quadratic_growth_check(T: MeasureMap, phi: Functional, C: float, pairs) -> CheckReport:
    """``W2(T mu, nu)^2 - W2(mu, nu)^2 <= C (phi(nu) - phi(T mu))`` per pair."""
    if not C > 0:
        raise ValueError("C must be positive")
    slacks = []
    for mu, nu in pairs:
        tmu = T(mu)
        lhs = w2(tmu, nu) ** 2 - w2(mu, nu) ** 2
        slacks.append(C * (phi(nu) - phi(tmu)) - lhs)
    return CheckReport(f"quadratic-growth[C={C:g}]", slacks, FEJER_TOL)


def convergence_report(trace: IterationTrace, candidate: DiscreteMeasure, tol: float = 1e-4,
                       patience: int = 3) -> CheckReport:
    """Distance and second-moment gap to ``candidate`` over the trace tail.

    Converged (``holds``) when, for the last ``patience`` stored iterates,
    both ``W2(mu_n, candidate)`` and ``|m2(mu_n) - m2(candidate)|`` are below
    ``tol`` (all of them when the trace is shorter).  With all iterates in a fixed compact set this certifies
    narrow convergence.
    """
    recs = trace.stored()
    m2 = second_moment(candidate)
    dist = [w2(s.measure, candidate) for s in recs]
    gap = [abs(s.second_moment - m2) for s in recs]
    tail = range(max(0, len(recs) - patience), len(recs))
    slacks = [tol - max(dist[i], gap[i]) for i in tail]
    return CheckReport("convergence", slacks, 0.0,
                       {"w2_tail": [dist[i] for i in tail], "moment_gap_tail": [gap[i] for i in tail],
                        "tol": tol, "assumes": "iterates stay in a fixed compact set"})


def recompute_steps(trace: IterationTrace) -> list:
    """``|recorded - recomputed|`` for every consecutive pair of stored iterates."""
    out = []
    for a, b in zip(trace.steps, trace.steps[1:]):
        if a.measure is not None and b.measure is not None:
            out.append(abs(b.step_w2 - w2(a.measure, b.measure)))
    return out

