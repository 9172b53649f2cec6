"""Empirical attraction experiments: pullback limits, repellers, forwards
attraction, blow-up curves and the basin of the zero solution."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional, Sequence, Union

from .errors import StepFailure
from .field_model import FieldSpec
from .integrator import DEFAULT_TOL, BlowUp, NoBlowUp, StepFailed, Tolerance, detect_blowup, process

__all__ = [
    "PullbackEstimate", "ForwardsEstimate", "BlowUpCurve", "BasinEstimate",
    "pullback_schedule", "repeller_schedule", "pullback_limit", "repeller_orbit",
    "forwards_attraction", "blow_up_curve", "zero_basin",
    "CONVERGED", "DIVERGED", "BLOWUP", "INCONCLUSIVE",
]

CONVERGED, DIVERGED, BLOWUP, INCONCLUSIVE = "Converged", "Diverged", "BlowUp", "Inconclusive"
_DIVERGENCE_SIZE = 1e6


def pullback_schedule(t: float, doublings: int = 8, delta: float = 1.0) -> list:
    return [t - delta * 2.0 ** k for k in range(doublings + 1)]


def repeller_schedule(t: float, doublings: int = 8, delta: float = 1.0) -> list:
    return [t + delta * 2.0 ** k for k in range(doublings + 1)]


@dataclass
class PullbackEstimate:
    t: float
    x0: float
    schedule: list
    values: list                 # float, or None where the run escaped or failed
    outcomes: list               # None, BlowUp or StepFailed per entry
    residuals: list              # |values[k+1] - values[k]|, None across a gap
    verdict: str
    limit: Optional[float] = None
    tol: float = 1e-6

    @property
    def converged(self) -> bool:
        return self.verdict == CONVERGED

    def converged_to_zero(self, tol: Optional[float] = None) -> bool:
        tol = self.tol if tol is None else tol
        return self.converged and abs(self.limit) <= 10 * tol

    def to_json(self) -> dict:
        entries = []
        for k, (s, v, o) in enumerate(zip(self.schedule, self.values, self.outcomes)):
            item = {"k": k, "s": s, "x": v}
            if isinstance(o, BlowUp):
                item["blowup"] = {"t_star": o.t_star, "sign": o.sign}
            elif isinstance(o, StepFailed):
                item["step_failure"] = o.t_fail
            entries.append(item)
        return {"t": self.t, "x0": self.x0, "tol": self.tol, "verdict": self.verdict,
                "limit": self.limit, "entries": entries, "residuals": self.residuals}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "s", "x", "residual"])
        for k, (s, v) in enumerate(zip(self.schedule, self.values)):
            r = self.residuals[k - 1] if k > 0 else None
            w.writerow([k, repr(s), "" if v is None else repr(v), "" if r is None else repr(r)])
        return buf.getvalue()


def _residuals(values):
    out = []
    for a, b in zip(values, values[1:]):
        out.append(None if a is None or b is None else abs(b - a))
    return out


def _is_converged(values, residuals, tol):
    if len(values) < 3 or any(v is None for v in values[-3:]):
        return False
    r1, r2 = residuals[-2], residuals[-1]
    if not (r1 < tol and r2 < tol):
        return False
    # residuals this small are integration noise, not a trend
    floor = max(1e-12 * max(1.0, abs(values[-1])), 1e-3 * tol)
    return max(r2, floor) <= max(r1, floor)


def _aitken(values):
    x0, x1, x2 = values[-3:]
    d1, d2 = x1 - x0, x2 - x1
    if d1 == 0.0 or d2 == 0.0:
        return x2
    ratio = d2 / d1
    denom = d2 - d1
    if not (0.0 < ratio < 0.95) or abs(denom) < 1e-300:
        return x2
    return x2 - d2 * d2 / denom


def _verdict(values, outcomes, residuals, tol):
    if _is_converged(values, residuals, tol):
        return CONVERGED, _aitken(values)
    escaped = [isinstance(o, BlowUp) for o in outcomes]
    if escaped and all(escaped):
        return BLOWUP, None
    trailing = 0
    for e in reversed(escaped):
        if not e:
            break
        trailing += 1
    if trailing >= 2:
        return BLOWUP, None
    finite = [v for v in values if v is not None]
    if finite and abs(finite[-1]) > _DIVERGENCE_SIZE:
        return DIVERGED, None
    tail = residuals[-3:]
    if len(tail) == 3 and all(r is not None for r in tail) and tail[0] < tail[1] < tail[2] \
            and tail[2] >= tol:
        return DIVERGED, None
    return INCONCLUSIVE, None


def _limit_run(field, t, x0, schedule, tol, integ_tol, early_stop):
    values, outcomes = [], []
    used = []
    for s in schedule:
        try:
            r = process(field, t, s, x0, integ_tol)
        except StepFailure as exc:
            values.append(None)
            outcomes.append(StepFailed(exc.t_fail))
        else:
            if isinstance(r, BlowUp):
                values.append(None)
                outcomes.append(r)
            else:
                values.append(r)
                outcomes.append(None)
        used.append(s)
        if early_stop and _is_converged(values, _residuals(values), tol):
            break
    residuals = _residuals(values)
    verdict, limit = _verdict(values, outcomes, residuals, tol)
    return PullbackEstimate(t, x0, used, values, outcomes, residuals, verdict, limit, tol)


def pullback_limit(field: FieldSpec, t: float, x0: float, schedule: Optional[Sequence] = None,
                   tol: float = 1e-6, integ_tol: Tolerance = DEFAULT_TOL,
                   early_stop: bool = True) -> PullbackEstimate:
    """Estimate ``lim_{s -> -inf} S(t, s) x0`` along a decreasing schedule of start times.

    With ``early_stop`` the schedule is truncated as soon as the convergence
    test passes.  A converged limit is refined by Aitken extrapolation when the
    residuals decay geometrically.
    """
    schedule = pullback_schedule(t) if schedule is None else [float(s) for s in schedule]
    if any(s >= t for s in schedule) or any(b >= a for a, b in zip(schedule, schedule[1:])):
        raise ValueError("pullback schedule must be strictly decreasing and below t")
    return _limit_run(field, t, x0, schedule, tol, integ_tol, early_stop)


def repeller_orbit(field: FieldSpec, t: float, x0: float, schedule: Optional[Sequence] = None,
                   tol: float = 1e-6, integ_tol: Tolerance = DEFAULT_TOL,
                   early_stop: bool = True) -> PullbackEstimate:
    """Estimate ``lim_{s -> +inf} S(t, s) x0`` by integrating backwards from later start times."""
    schedule = repeller_schedule(t) if schedule is None else [float(s) for s in schedule]
    if any(s <= t for s in schedule) or any(b <= a for a, b in zip(schedule, schedule[1:])):
        raise ValueError("repeller schedule must be strictly increasing and above t")
    return _limit_run(field, t, x0, schedule, tol, integ_tol, early_stop)


# -- forwards attraction -------------------------------------------------------

ATTRACTING, NOT_ATTRACTING = "Attracting", "NotAttracting"


@dataclass
class ForwardsEstimate:
    s: float
    times: list
    distances: list
    verdict: str
    blowup: Optional[str] = None     # "probe" or "reference" when one escaped

    def to_json(self) -> dict:
        return {"s": self.s, "verdict": self.verdict, "blowup": self.blowup,
                "series": [{"t": t, "distance": d} for t, d in zip(self.times, self.distances)]}


def forwards_attraction(field: FieldSpec, s: float, x0: float,
                        reference: Union[float, Callable[[float], float]], horizon: float,
                        tol: float = 1e-6, points: int = 12,
                        integ_tol: Tolerance = DEFAULT_TOL) -> ForwardsEstimate:
    """Track ``|S(t, s) x0 - reference(t)|`` on a geometric grid of ``t`` in ``(s, horizon]``.

    ``reference`` is either an orbit ``t -> x(t)`` or a second initial value at ``s``.
    Attracting: the distance ends below ``tol``.  NotAttracting: it exceeds ten
    times its initial value at some sample, or the last three samples all sit
    above twice the initial value.
    """
    if not horizon > s:
        raise ValueError("horizon must exceed s")
    span = horizon - s
    times = [s + span * 2.0 ** (j - points) for j in range(points + 1)]
    orbit = reference if callable(reference) else None
    xr = None if orbit else float(reference)
    xp = float(x0)
    prev = s
    d0 = abs(xp - (orbit(s) if orbit else xr))
    dists = []
    for t in times:
        try:
            xp_new = process(field, t, prev, xp, integ_tol)
            xr_new = orbit(t) if orbit else process(field, t, prev, xr, integ_tol)
        except StepFailure:
            return ForwardsEstimate(s, times[:len(dists)], dists, INCONCLUSIVE)
        for who, val in (("probe", xp_new), ("reference", xr_new)):
            if isinstance(val, BlowUp):
                return ForwardsEstimate(s, times[:len(dists)], dists, BLOWUP, who)
        xp, xr, prev = xp_new, xr_new, t
        dists.append(abs(xp - xr))
    if dists[-1] < tol:
        verdict = ATTRACTING
    elif d0 > 0 and (max(dists) > 10 * d0 or all(d > 2 * d0 for d in dists[-3:])):
        verdict = NOT_ATTRACTING
    else:
        verdict = INCONCLUSIVE
    return ForwardsEstimate(s, times, dists, verdict)


# -- blow-up curve -------------------------------------------------------------

@dataclass
class BlowUpCurve:
    x0: float
    entries: list                # (s, BlowUp | NoBlowUp | StepFailed)
    sigma: Optional[float]       # every sampled s <= sigma escapes in finite time
    violations: list             # sampled s without escape although a later s escapes

    def to_json(self) -> dict:
        rows = []
        for s, r in self.entries:
            row = {"s": s, "kind": r.kind}
            if isinstance(r, BlowUp):
                row.update(t_star=r.t_star, sign=r.sign)
            rows.append(row)
        return {"x0": self.x0, "sigma": self.sigma, "violations": self.violations,
                "entries": rows}


def blow_up_curve(field: FieldSpec, s_grid: Sequence, x0: float, t_max: float,
                  tol: Tolerance = DEFAULT_TOL) -> BlowUpCurve:
    """Escape time ``t*(s)`` of the forward solution through ``(s, x0)`` for each ``s``."""
    grid = sorted(float(s) for s in s_grid)
    entries = []
    for s in grid:
        if not t_max > s:
            entries.append((s, NoBlowUp(t_max, float(x0))))
            continue
        try:
            entries.append((s, detect_blowup(field, s, x0, t_max, tol)))
        except StepFailure as exc:
            entries.append((s, StepFailed(exc.t_fail)))
    sigma = None
    for s, r in entries:
        if not isinstance(r, BlowUp):
            break
        sigma = s
    escaping = [s for s, r in entries if isinstance(r, BlowUp)]
    last = max(escaping) if escaping else -math.inf
    violations = [s for s, r in entries if isinstance(r, NoBlowUp) and s < last]
    return BlowUpCurve(float(x0), entries, sigma, violations)


# -- basin of the zero solution --------------------------------------------------

@dataclass
class BasinEstimate:
    t: float
    delta: float
    probes: list = dc_field(default_factory=list)   # (x0, verdict, limit)

    def to_json(self) -> dict:
        return {"t": self.t, "delta": self.delta,
                "probes": [{"x0": x, "verdict": v, "limit": lim} for x, v, lim in self.probes]}


def zero_basin(field: FieldSpec, t: float, probe_grid: Sequence, schedule: Optional[Sequence] = None,
               tol: float = 1e-3, integ_tol: Tolerance = DEFAULT_TOL) -> BasinEstimate:
    """Largest probed ``x0 > 0`` whose pullback limit is the zero solution.

    Positive probes are bisected on the assumption that the basin is an interval
    containing zero; negative probes are evaluated individually.  ``delta`` is 0
    when no positive probe converges to zero.
    """
    schedule = pullback_schedule(t, doublings=20) if schedule is None else list(schedule)
    positive = sorted({float(x) for x in probe_grid if x > 0})
    negative = sorted({float(x) for x in probe_grid if x <= 0})
    results = {}

    def probe(x):
        if x not in results:
            est = pullback_limit(field, t, x, schedule, tol, integ_tol)
            results[x] = est
        return results[x].converged_to_zero(tol)

    delta = 0.0
    if positive:
        if probe(positive[-1]):
            delta = positive[-1]
        elif probe(positive[0]):
            lo, hi = 0, len(positive) - 1          # lo converges, hi does not
            while hi - lo > 1:
                mid = (lo + hi) // 2
                if probe(positive[mid]):
                    lo = mid
                else:
                    hi = mid
            delta = positive[lo]
    for x in negative:
        probe(x)
    probes = [(x, results[x].verdict, results[x].limit) for x in sorted(results)]
    return BasinEstimate(t, delta, probes)
