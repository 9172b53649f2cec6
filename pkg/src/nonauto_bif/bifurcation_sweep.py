"""Orbit-structure classification over a grid of mu and location of the bifurcation point."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field as dc_field
from typing import Optional, Sequence

from .attractor_lab import (NOT_ATTRACTING, BLOWUP, forwards_attraction, pullback_limit,
                            pullback_schedule, repeller_orbit, repeller_schedule, zero_basin)
from .errors import NoTransitionFound, StepFailure
from .expr import ipow
from .field_model import Family, FieldSpec
from .integrator import BlowUp, advance, detect_blowup
from .oracles import attractor_orbit_tc, quad, repeller_orbit_tc

__all__ = [
    "MuClassification", "BifurcationDiagram", "classify_mu", "sweep",
    "NO_BOUNDED_NONZERO_ORBIT", "ZERO_ONLY", "ATTRACTOR_REPELLER_PAIR",
    "ATTRACTOR_AND_UNSTABLE_ZERO", "REPELLER_AND_STABLE_ZERO", "INCONCLUSIVE",
]

NO_BOUNDED_NONZERO_ORBIT = "NoBoundedNonzeroOrbit"
ZERO_ONLY = "ZeroOnly"
ATTRACTOR_REPELLER_PAIR = "AttractorRepellerPair"
ATTRACTOR_AND_UNSTABLE_ZERO = "AttractorAndUnstableZero"
REPELLER_AND_STABLE_ZERO = "RepellerAndStableZero"
INCONCLUSIVE = "Inconclusive"
_INTERMEDIATE = (ZERO_ONLY, INCONCLUSIVE)

_T_SAMPLES = (-1.0, 0.0, 1.0)
_ZERO_PROBE = 0.01
_CROSS_CHECK = 1e-4


@dataclass
class MuClassification:
    mu: float
    kind: str
    attractor_samples: list = dc_field(default_factory=list)    # (t, x)
    repeller_samples: list = dc_field(default_factory=list)     # (t, x)
    zero_stable: Optional[bool] = None
    evidence: dict = dc_field(default_factory=dict)

    def value_at(self, samples, t=0.0):
        for tt, x in samples:
            if tt == t:
                return x
        return None

    def to_json(self) -> dict:
        return {"mu": self.mu, "kind": self.kind, "zero_stable": self.zero_stable,
                "attractor_samples": [list(p) for p in self.attractor_samples],
                "repeller_samples": [list(p) for p in self.repeller_samples],
                "evidence": self.evidence}


@dataclass
class BifurcationDiagram:
    family: str
    grid: list
    mu_c: float
    bracket: tuple
    bracket_kinds: tuple
    label: str

    @property
    def width(self) -> float:
        return self.bracket[1] - self.bracket[0]

    def to_json(self) -> dict:
        return {"family": self.family, "label": self.label, "mu_c": self.mu_c,
                "bracket": list(self.bracket), "bracket_width": self.width,
                "bracket_kinds": list(self.bracket_kinds),
                "grid": [c.to_json() for c in self.grid]}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["mu", "kind", "attractor_at_t0", "repeller_at_t0"])
        for c in self.grid:
            a = c.value_at(c.attractor_samples)
            r = c.value_at(c.repeller_samples)
            w.writerow([repr(c.mu), c.kind, "" if a is None else repr(a),
                        "" if r is None else repr(r)])
        return buf.getvalue()


# -- helpers -------------------------------------------------------------------------

def _kind_of(field: FieldSpec) -> str:
    kind = field.kind
    if kind is None:
        raise ValueError("classification needs a field of a concrete or general family")
    return kind


def _int_f(field: FieldSpec, s: float, t: float) -> float:
    f = field.f
    if f.antiderivative is not None:
        return f.anti_fn(t) - f.anti_fn(s)
    return quad(f.fn, s, t, tol=1e-10, rel=1e-8).value


def _drive_horizon(field: FieldSpec, s: float, target: float, cap: float = 1e4) -> float:
    """Smallest doubling span ``H`` with ``|mu^(2m-1)| int_s^{s+H} f >= target``."""
    a = abs(field.mu_power)
    H = 10.0
    while H < cap and a * _int_f(field, s, s + H) < target:
        H *= 2.0
    return min(H, cap)


def _safe_blowup(field, s, x0, t_max):
    try:
        return detect_blowup(field, s, x0, t_max)
    except StepFailure:
        return None


def _sn_escapes(field: FieldSpec, s: float = 0.0, x0: float = 1.0) -> bool:
    """Does the solution from ``x0 > 0`` leave through zero (the mu < 0 behaviour)?

    The forcing term ``mu^(2m-1) f`` drives ``x`` down by at least
    ``|mu^(2m-1)| int f`` when ``mu < 0``; once that exceeds ``2 (1 + x0)`` a
    solution that stays positive rules escape out.
    """
    if field.mu_power >= 0:
        return False
    H = _drive_horizon(field, s, 2.0 * (1.0 + abs(x0)))
    traj = advance(field, s, x0, s + 2.0 * H, record=False)
    return isinstance(traj.outcome, BlowUp) or traj.x_end < 0


def _tc_zero_unstable(field: FieldSpec, s: float = 0.0) -> bool:
    """Is the zero solution forwards unstable (the mu > 0 behaviour)?"""
    if field.mu_power <= 0:
        return False
    H = _drive_horizon(field, s, 14.0)
    est = forwards_attraction(field, s, _ZERO_PROBE, lambda t: 0.0, s + H)
    return est.verdict == NOT_ATTRACTING


def _orbit_check(field, t, x, signed_repeller=False):
    if field.family is not Family.CONCRETE_TC or field.f.antiderivative is None:
        return None
    if signed_repeller:
        ref = repeller_orbit_tc(field.m, field.n, field.mu, field.f, field.g, t, signed=True)
    else:
        ref = attractor_orbit_tc(field.m, field.n, field.mu, field.f, field.g, t)
    return abs(ref - x)


# -- classification ----------------------------------------------------------------------

def classify_mu(field: FieldSpec, t_samples: Sequence[float] = _T_SAMPLES,
                doublings: int = 8, tol: float = 1e-6) -> MuClassification:
    """Classify the bounded-orbit structure of ``field`` at its own value of ``mu``.

    Dynamical outcomes never raise; a failed sub-verdict yields ``Inconclusive``
    with the sub-verdicts recorded as evidence.
    """
    family = _kind_of(field)
    mu = field.mu
    try:
        if family == "SN":
            return _classify_sn(field, list(t_samples), doublings, tol)
        return _classify_tc(field, list(t_samples), doublings, tol)
    except StepFailure as exc:
        return MuClassification(mu, INCONCLUSIVE, evidence={"step_failure": exc.t_fail})


def _classify_sn(field, ts, doublings, tol):
    mu = field.mu
    t0 = ts[len(ts) // 2]
    if mu < 0:
        H = _drive_horizon(field, t0, 4.0)
        probes = {x0: _safe_blowup(field, t0, x0, t0 + 2.0 * H) for x0 in (1.0, -1.0)}
        evidence = {repr(x0): (None if r is None else r.kind) for x0, r in probes.items()}
        if all(isinstance(r, BlowUp) for r in probes.values()):
            return MuClassification(mu, NO_BOUNDED_NONZERO_ORBIT, evidence=evidence)
        return MuClassification(mu, INCONCLUSIVE, evidence=evidence)
    if mu == 0:
        basin = zero_basin(field, t0, (0.1, 0.5, 1.0))
        neg = _safe_blowup(field, t0, -0.1, t0 + 1e3)
        evidence = {"basin": basin.to_json(), "negative_probe": None if neg is None else neg.kind}
        if basin.delta > 0 and isinstance(neg, BlowUp):
            return MuClassification(mu, ZERO_ONLY, zero_stable=True, evidence=evidence)
        return MuClassification(mu, INCONCLUSIVE, evidence=evidence)
    attract, repel, evidence = [], [], {}
    for t in ts:
        up = pullback_limit(field, t, 1.0, pullback_schedule(t, doublings), tol)
        down = repeller_orbit(field, t, 0.0, repeller_schedule(t, doublings), tol)
        evidence[repr(t)] = {"pullback": up.verdict, "repeller": down.verdict}
        if not (up.converged and down.converged):
            return MuClassification(mu, INCONCLUSIVE, evidence=evidence)
        attract.append((t, up.limit))
        repel.append((t, down.limit))
    if all(a > r for (_, a), (_, r) in zip(attract, repel)):
        return MuClassification(mu, ATTRACTOR_REPELLER_PAIR, attract, repel, evidence=evidence)
    return MuClassification(mu, INCONCLUSIVE, attract, repel, evidence=evidence)


def _classify_tc(field, ts, doublings, tol):
    mu = field.mu
    t0 = ts[len(ts) // 2]
    if mu == 0:
        basin = zero_basin(field, t0, (0.1, 0.5, 1.0))
        kind = ZERO_ONLY if basin.delta > 0 else INCONCLUSIVE
        return MuClassification(mu, kind, zero_stable=basin.delta > 0 or None,
                                evidence={"basin": basin.to_json()})
    evidence = {}
    if mu < 0:
        repel = []
        for t in ts:
            zero = pullback_limit(field, t, 0.5, pullback_schedule(t, doublings), tol)
            rep = repeller_orbit(field, t, -1.0, repeller_schedule(t, doublings), tol)
            entry = {"zero_pullback": zero.verdict, "repeller": rep.verdict}
            evidence[repr(t)] = entry
            if not (zero.converged_to_zero() and rep.converged):
                return MuClassification(mu, INCONCLUSIVE, evidence=evidence)
            gap = _orbit_check(field, t, rep.limit, signed_repeller=True)
            entry["oracle_gap"] = gap
            if gap is not None and gap > _CROSS_CHECK:
                return MuClassification(mu, INCONCLUSIVE, evidence=evidence)
            repel.append((t, rep.limit))
        if all(x < 0 for _, x in repel):
            return MuClassification(mu, REPELLER_AND_STABLE_ZERO, repeller_samples=repel,
                                    zero_stable=True, evidence=evidence)
        return MuClassification(mu, INCONCLUSIVE, repeller_samples=repel, evidence=evidence)
    unstable = _tc_zero_unstable(field, t0)
    evidence["zero_forwards"] = NOT_ATTRACTING if unstable else "not shown unstable"
    if not unstable:
        return MuClassification(mu, INCONCLUSIVE, evidence=evidence)
    attract = []
    for t in ts:
        est = pullback_limit(field, t, 1.0, pullback_schedule(t, doublings), tol)
        entry = {"pullback": est.verdict}
        evidence[repr(t)] = entry
        if not est.converged or est.limit <= 0:
            return MuClassification(mu, INCONCLUSIVE, evidence=evidence)
        gap = _orbit_check(field, t, est.limit)
        entry["oracle_gap"] = gap
        if gap is not None and gap > _CROSS_CHECK:
            return MuClassification(mu, INCONCLUSIVE, evidence=evidence)
        attract.append((t, est.limit))
    return MuClassification(mu, ATTRACTOR_AND_UNSTABLE_ZERO, attractor_samples=attract,
                            zero_stable=False, evidence=evidence)


# -- sweep -----------------------------------------------------------------------------

def _label(family, before: MuClassification, after: MuClassification) -> str:
    if family == "SN" and before.kind == NO_BOUNDED_NONZERO_ORBIT \
            and after.kind == ATTRACTOR_REPELLER_PAIR:
        return "SaddleNode"
    if family == "TC" and before.kind == REPELLER_AND_STABLE_ZERO \
            and after.kind == ATTRACTOR_AND_UNSTABLE_ZERO:
        r = before.value_at(before.repeller_samples, before.repeller_samples[0][0])
        a = after.value_at(after.attractor_samples, after.attractor_samples[0][0])
        if r is not None and a is not None and r < 0 < a:
            return "Transcritical"
    return "Unknown"


def sweep(field: FieldSpec, mu_grid: Optional[Sequence[float]] = None, mu_tol: float = 0.125,
          t_samples: Sequence[float] = _T_SAMPLES, doublings: int = 8,
          tol: float = 1e-6) -> BifurcationDiagram:
    """Classify every grid point, bracket the first change of structure and refine it.

    The bracket runs from the last point of the initial structure to the first
    point of the next non-degenerate structure (points classified ``ZeroOnly``
    or ``Inconclusive`` in between are spanned).  It is then bisected to width
    ``mu_tol`` with a cheap discriminating probe: escape of a positive solution
    for the saddle-node family, forwards instability of zero for the
    transcritical one.
    """
    family = _kind_of(field)
    grid = [-1.0 + 0.25 * i for i in range(9)] if mu_grid is None else sorted(map(float, mu_grid))
    if len(grid) < 2:
        raise ValueError("a sweep needs at least two grid points")
    classes = [classify_mu(field.with_mu(mu), t_samples, doublings, tol) for mu in grid]
    kinds = [c.kind for c in classes]
    if len(set(kinds)) == 1:
        raise NoTransitionFound(f"every grid point classified as {kinds[0]}")
    i = next(k for k in range(len(kinds) - 1) if kinds[k] != kinds[k + 1])
    j = i + 1
    while j + 1 < len(kinds) and kinds[j] in _INTERMEDIATE and kinds[j] != kinds[i]:
        j += 1
    if kinds[j] == kinds[i]:
        j = i + 1
    before, after = classes[i], classes[j]
    lo, hi = grid[i], grid[j]

    probe = (lambda mu: _sn_escapes(field.with_mu(mu))) if family == "SN" \
        else (lambda mu: not _tc_zero_unstable(field.with_mu(mu)))
    if probe(lo) and not probe(hi):
        while hi - lo > mu_tol * (1 + 1e-12):
            mid = 0.5 * (lo + hi)
            if probe(mid):
                lo = mid
            else:
                hi = mid
    ends = []
    for mu in (lo, hi):
        known = next((c for c in classes if c.mu == mu), None)
        ends.append(known or classify_mu(field.with_mu(mu), t_samples, doublings, tol))
    return BifurcationDiagram(family, classes, 0.5 * (lo + hi), (lo, hi),
                              (ends[0].kind, ends[1].kind), _label(family, before, after))
