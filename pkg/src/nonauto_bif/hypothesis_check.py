"""Finite-horizon audits of the coefficient conditions behind each bifurcation theorem.

Limits at ``t -> +-inf`` cannot be decided numerically.  Every audit samples
tail bands ``T/10 <= |t| <= T`` for a sequence of horizons ``T`` and judges the
trend: ``Violated`` is a trustworthy falsification, ``Supported`` only means
consistent up to the largest horizon.  A condition is Supported when both of
the two largest horizons agree.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field as dc_field
from typing import Optional, Sequence

from . import expr as ex
from .errors import NoConvergence, NonFiniteResult, TailDivergence
from .expr import ipow
from .field_model import CoefficientFunction, Family, FieldSpec
from .oracles import attractor_orbit_tc, quad, repeller_orbit_tc, weighted_integral

__all__ = [
    "SUPPORTED", "VIOLATED", "INCONCLUSIVE", "DEFAULT_HORIZONS", "ConditionEntry",
    "ConditionReport", "check_sn_concrete", "check_sn_general", "check_tc_concrete",
    "check_tc_general", "check_field", "strict_json",
]

SUPPORTED, VIOLATED, INCONCLUSIVE = "Supported", "Violated", "Inconclusive"
DEFAULT_HORIZONS = (1e2, 1e3, 1e4)
BAND_POINTS = 256
_ORBIT_POINTS = 24
_GRID_T_POINTS = 16
_T_GRID = (-2.0, 0.0, 2.0)
_SINGULAR_CUT = 1e-3
_ORDER = {SUPPORTED: 0, INCONCLUSIVE: 1, VIOLATED: 2}


@dataclass
class ConditionEntry:
    condition_id: str
    verdict: str
    samples: int
    estimates: list            # one dict per horizon
    note: str = ""

    def to_json(self) -> dict:
        return {"condition_id": self.condition_id, "verdict": self.verdict,
                "samples": self.samples, "estimates": self.estimates, "note": self.note}


@dataclass
class ConditionReport:
    theorem: str
    horizons: list
    entries: list
    constants: dict = dc_field(default_factory=dict)
    notes: list = dc_field(default_factory=list)

    def entry(self, condition_id: str) -> ConditionEntry:
        for e in self.entries:
            if e.condition_id == condition_id:
                return e
        raise KeyError(condition_id)

    @property
    def verdict(self) -> str:
        return _worst(e.verdict for e in self.entries)

    @property
    def supported(self) -> bool:
        return all(e.verdict == SUPPORTED for e in self.entries)

    def to_json(self) -> dict:
        return {
            "theorem": self.theorem, "horizons": list(self.horizons), "verdict": self.verdict,
            "semantics": "Violated falsifies the condition; Supported means consistent up to "
                         "the largest horizon",
            "entries": [e.to_json() for e in self.entries],
            "constants": self.constants, "notes": self.notes,
        }

    def dumps(self) -> str:
        return json.dumps(strict_json(self.to_json()), sort_keys=True, indent=2, allow_nan=False)


def strict_json(obj):
    """Replace non-finite floats by their string forms so the output is strict JSON."""
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    if isinstance(obj, dict):
        return {k: strict_json(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [strict_json(v) for v in obj]
    return obj


def _worst(verdicts) -> str:
    verdicts = list(verdicts)
    if not verdicts:
        return INCONCLUSIVE
    return max(verdicts, key=_ORDER.__getitem__)


def _final(per_horizon: Sequence[str]) -> str:
    last = list(per_horizon[-2:])
    if VIOLATED in last:
        return VIOLATED
    if all(v == SUPPORTED for v in last):
        return SUPPORTED
    return INCONCLUSIVE


def _lower_trend(values):
    """Per-horizon verdicts for an estimate that must stay bounded away from zero."""
    out, prev = [], None
    for v in values:
        if not (math.isfinite(v) and v > 0):
            out.append(VIOLATED)
        elif prev is not None and prev > 0 and v < 0.5 * prev:
            out.append(VIOLATED)
        elif prev is not None and prev > 0 and v < 0.9 * prev:
            out.append(INCONCLUSIVE)
        else:
            out.append(SUPPORTED)
        prev = v
    return out


def _upper_trend(values):
    """Per-horizon verdicts for an estimate that must stay bounded above."""
    out, prev = [], None
    for v in values:
        if not math.isfinite(v):
            out.append(VIOLATED)
        elif prev is not None and prev > 0 and v > 2.0 * prev:
            out.append(VIOLATED)
        elif prev is not None and prev > 0 and v > 1.1 * prev:
            out.append(INCONCLUSIVE)
        else:
            out.append(SUPPORTED)
        prev = v
    return out


def _merge(*verdict_lists):
    return [_worst(vs) for vs in zip(*verdict_lists)]


def _join(first, second):
    """Merge two per-horizon estimate lists, keeping the worse verdict."""
    out = []
    for a, b in zip(first, second):
        row = {**a, **b}
        row["verdict"] = _worst([a["verdict"], b["verdict"]])
        out.append(row)
    return out


def _band(T: float, points: int = BAND_POINTS) -> list:
    lo, hi = math.log(T / 10.0), math.log(T)
    return [math.exp(lo + (hi - lo) * i / (points - 1)) for i in range(points)]


def _sides(side: int):
    return (-1.0, 1.0) if side == 0 else (float(side),)


def _sample(cf: CoefficientFunction, ts) -> list:
    fn = cf.fn
    out = []
    for t in ts:
        try:
            v = fn(t)
        except (ArithmeticError, ValueError):
            v = math.nan
        if not math.isfinite(v):
            cf(t)                       # checked path raises NonFiniteResult with location
            raise NonFiniteResult(f"coefficient not finite at t={t!r}")
        out.append(v)
    return out


def _horizons(horizons) -> list:
    hs = sorted(float(T) for T in horizons)
    if not hs or hs[0] <= 0:
        raise ValueError("horizons must be positive")
    return hs


# -- shared audits -----------------------------------------------------------------

def _audit_positive(cid, g, horizons, side=0, label="g_inf"):
    ests, infs = [], []
    for T in horizons:
        ts = [s * u for s in _sides(side) for u in _band(T)]
        v = min(_sample(g, ts))
        infs.append(v)
        ests.append({"T": T, label: v})
    verdicts = _lower_trend(infs)
    for e, v in zip(ests, verdicts):
        e["verdict"] = v
    n = len(horizons) * BAND_POINTS * len(_sides(side))
    return ConditionEntry(cid, _final(verdicts), n, ests), infs[-1]


def _audit_ratio(cid, f, g, horizons):
    ests, lows, highs = [], [], []
    for T in horizons:
        ts = [s * u for s in (-1.0, 1.0) for u in _band(T)]
        fs, gs = _sample(f, ts), _sample(g, ts)
        ratios = [a / b for a, b in zip(fs, gs) if b > 0]
        lo = min(ratios) if len(ratios) == len(ts) else -math.inf
        hi = max(ratios) if ratios else math.inf
        lows.append(lo)
        highs.append(hi)
        ests.append({"T": T, "ratio_inf": lo, "ratio_sup": hi})
    verdicts = _merge(_lower_trend(lows), _upper_trend(highs))
    for e, v in zip(ests, verdicts):
        e["verdict"] = v
    return ConditionEntry(cid, _final(verdicts), 2 * len(horizons) * BAND_POINTS, ests), \
        lows[-1], highs[-1]


def _band_integral(fn, lo, hi, side):
    res = quad(lambda u: fn(side * u), lo, hi, tol=1e-12, rel=1e-10)
    return res.value


def _audit_divergence(cid, f, horizons, side=0):
    """``int f`` towards the given infinite end(s) grows without bound.

    Per horizon the band increment ``D(T) = int_{T/10 <= |t| <= T} f`` is
    compared with ``D(T/10)``: a divergent integral keeps ``D(T)/D(T/10) >= 0.8``
    (logarithmic or faster growth), a convergent one decays geometrically.
    """
    ests, verdicts = [], []
    fn = f.fn
    for T in horizons:
        per_side = []
        for s in _sides(side):
            try:
                d_now = _band_integral(fn, T / 10, T, s)
                d_prev = _band_integral(fn, T / 100, T / 10, s)
                total = _band_integral(fn, 0.0, T, s)
            except NoConvergence as exc:
                per_side.append((INCONCLUSIVE, {"side": s, "error": str(exc)}))
                continue
            ratio = d_now / d_prev if d_prev > 0 else (math.inf if d_now > 0 else 0.0)
            v = SUPPORTED if (d_now > 0 and ratio >= 0.8) else VIOLATED
            per_side.append((v, {"side": s, "band_increment": d_now, "growth_ratio": ratio,
                                 "partial_integral": total}))
        v = _worst(p[0] for p in per_side)
        verdicts.append(v)
        ests.append({"T": T, "sides": [p[1] for p in per_side], "verdict": v})
    return ConditionEntry(cid, _final(verdicts), len(ests) * len(_sides(side)) * 3, ests)


def _audit_sup_ratio(cid, h, g, horizons):
    ests, sups = [], []
    for T in horizons:
        ts = [s * u for s in (-1.0, 1.0) for u in _band(T)]
        hs, gs = _sample(h, ts), _sample(g, ts)
        vals = [a / b if b > 0 else math.inf for a, b in zip(hs, gs)]
        v = max(vals)
        sups.append(v)
        ests.append({"T": T, "h_over_g_sup": v})
    verdicts = _upper_trend(sups)
    for e, v in zip(ests, verdicts):
        e["verdict"] = v
    return ConditionEntry(cid, _final(verdicts), 2 * len(horizons) * BAND_POINTS, ests), sups[-1]


# -- concrete families -------------------------------------------------------------

def check_sn_concrete(f, g, horizons=DEFAULT_HORIZONS) -> ConditionReport:
    """Audit of ``int f = +inf`` at both ends and ``liminf g > 0``, ``l <= f/g <= M``."""
    f = CoefficientFunction(f) if not isinstance(f, CoefficientFunction) else f
    g = CoefficientFunction(g) if not isinstance(g, CoefficientFunction) else g
    hs = _horizons(horizons)
    eq4 = _audit_divergence("eq4", f, hs, side=0)
    pos, g_inf = _audit_positive("eq5", g, hs)
    ratio, lo, hi = _audit_ratio("eq5", f, g, hs)
    eq5 = ConditionEntry("eq5", _worst([pos.verdict, ratio.verdict]), pos.samples + ratio.samples,
                         _join(pos.estimates, ratio.estimates),
                         "liminf g > 0 and l <= f/g <= M on both tails")
    constants = {"l_hat": lo, "M_hat": hi, "g_liminf_hat": g_inf}
    return ConditionReport("T1", hs, [eq4, eq5], constants)


def _quotient(f, g, k, a, s, t, tol):
    if not t > s:
        return None
    res = weighted_integral(f, g, s, k * a, 0.0, t - s, tol)
    if not res.value > 0:
        return 0.0
    return (k * res.value) ** (-1.0 / k)


def check_tc_concrete(f, g, m: int = 2, n: int = 3, mu_probe: Sequence[float] = (-0.5, 0.5),
                      horizons=DEFAULT_HORIZONS, t_grid: Sequence[float] = _T_GRID,
                      tol: float = 1e-10) -> ConditionReport:
    """Audit of the transcritical conditions for ``x' = mu^(2m-1) f x - g x^(2n)``.

    Probes with ``mu <= 0`` drive the pullback quotient audit and the repeller
    bounds; probes with ``mu > 0`` drive the attractor bounds.
    """
    f = CoefficientFunction(f) if not isinstance(f, CoefficientFunction) else f
    g = CoefficientFunction(g) if not isinstance(g, CoefficientFunction) else g
    hs = _horizons(horizons)
    k = 2 * n - 1
    entries, constants, notes = [], {}, []

    entries.append(_audit_divergence("eq16", f, hs, side=-1))
    eq17, r_minus = _audit_positive("eq17", g, hs, side=-1, label="g_inf_left")
    entries.append(eq17)
    constants["r_minus_hat"] = r_minus

    if f.antiderivative is None:
        # the quotient and orbit audits evaluate closed forms built on F
        notes.append("eq18, eq19 and eq21 not audited: f has no antiderivative")
        mu_probe = ()
    nonpos = [float(mu) for mu in mu_probe if mu <= 0]
    positive = [float(mu) for mu in mu_probe if mu > 0]
    negative = [mu for mu in nonpos if mu < 0]

    if nonpos:
        per_mu, verdict_lists, m_hat = [], [], {}
        for mu in nonpos:
            a = ipow(mu, 2 * m - 1)
            lows, ests = [], []
            for T in hs:
                ss = [-u for u in _band(T, _ORBIT_POINTS)]
                try:
                    qs = [q for s in ss for t in t_grid
                          if (q := _quotient(f, g, k, a, s, t, tol)) is not None]
                    v = min(qs)
                except (TailDivergence, NoConvergence) as exc:
                    v = math.nan
                    notes.append(f"eq18 mu={mu!r} T={T!r}: {exc}")
                lows.append(v)
                ests.append({"T": T, "mu": mu, "quotient_inf": v})
            vs = _lower_trend(lows)
            for e, v in zip(ests, vs):
                e["verdict"] = v
            verdict_lists.append(vs)
            per_mu.extend(ests)
            m_hat[repr(mu)] = lows[-1]
        entries.append(ConditionEntry("eq18", _final(_merge(*verdict_lists)),
                                      len(nonpos) * len(hs) * _ORBIT_POINTS * len(t_grid),
                                      per_mu, "inf over s of the pullback quotient at each t"))
        constants["m_mu_hat_eq18"] = m_hat
    elif f.antiderivative is not None:
        notes.append("eq18 not audited: no probe with mu <= 0")

    def orbit_audit(cid, mus, orbit):
        per_mu, verdict_lists, lo_hat, hi_hat = [], [], {}, {}
        for mu in mus:
            lows, highs, ests = [], [], []
            for T in hs:
                ts = list(t_grid) + [s * u for s in (-1.0, 1.0) for u in _band(T, _ORBIT_POINTS)]
                try:
                    xs = [orbit(mu, t) for t in ts]
                    lo, hi = min(xs), max(xs)
                except (TailDivergence, NoConvergence) as exc:
                    lo, hi = math.nan, math.nan
                    notes.append(f"{cid} mu={mu!r} T={T!r}: {exc}")
                lows.append(lo)
                highs.append(hi)
                ests.append({"T": T, "mu": mu, "orbit_inf": lo, "orbit_sup": hi})
            vs = _merge(_lower_trend(lows), _upper_trend(highs))
            for e, v in zip(ests, vs):
                e["verdict"] = v
            verdict_lists.append(vs)
            per_mu.extend(ests)
            lo_hat[repr(mu)], hi_hat[repr(mu)] = lows[-1], highs[-1]
        n_samples = len(mus) * len(hs) * (len(t_grid) + 2 * _ORBIT_POINTS)
        return ConditionEntry(cid, _final(_merge(*verdict_lists)), n_samples, per_mu), \
            lo_hat, hi_hat

    if positive:
        e19, lo19, hi19 = orbit_audit(
            "eq19", positive, lambda mu, t: attractor_orbit_tc(m, n, mu, f, g, t, tol))
        entries.append(e19)
        constants["m_mu_hat"], constants["M_mu_hat"] = lo19, hi19
    elif f.antiderivative is not None:
        notes.append("eq19 not audited: no probe with mu > 0")

    eq20_div = _audit_divergence("eq20", f, hs, side=1)
    eq20_pos, r_plus = _audit_positive("eq20", g, hs, side=1, label="g_inf_right")
    entries.append(ConditionEntry(
        "eq20", _worst([eq20_div.verdict, eq20_pos.verdict]),
        eq20_div.samples + eq20_pos.samples,
        _join(eq20_div.estimates, eq20_pos.estimates),
        "g >= r+ > 0 on the right tail and int_t^inf f = +inf"))
    constants["r_plus_hat"] = r_plus

    if negative:
        e21, lo21, hi21 = orbit_audit(
            "eq21", negative, lambda mu, t: repeller_orbit_tc(m, n, mu, f, g, t, tol))
        entries.append(e21)
        constants["m_mu_hat_eq21"], constants["M_mu_hat_eq21"] = lo21, hi21
    elif f.antiderivative is not None:
        notes.append("eq21 not audited: no probe with mu < 0")
    return ConditionReport("T4", hs, entries, constants, notes)


# -- general families: grid-sampled perturbation bounds -------------------------------

def _linspace(lo, hi, n):
    return [lo + (hi - lo) * i / (n - 1) for i in range(n)] if n > 1 else [0.5 * (lo + hi)]


def _grid_times(T_max, horizons):
    ts = _linspace(-10.0, 10.0, 21)
    for T in horizons:
        if T <= T_max:
            ts += [s * u for s in (-1.0, 1.0) for u in _band(T, _GRID_T_POINTS)]
    return ts


def _checked(node):
    fast = ex.compile_expr(node)

    def fn(t, x, mu):
        try:
            v = fast(t, x, mu)
            if math.isfinite(v):
                return v
        except (ArithmeticError, ValueError):
            pass
        return ex.eval_expr(node, t, x, mu)
    return fn


def _d(fn, t, x, mu, wrt):
    """Centered difference with one Richardson step."""
    base = x if wrt == "x" else mu
    h = 1e-4 * max(1.0, abs(base))

    def central(step):
        if wrt == "x":
            return (fn(t, x + step, mu) - fn(t, x - step, mu)) / (2 * step)
        return (fn(t, x, mu + step) - fn(t, x, mu - step)) / (2 * step)
    return (4 * central(h / 2) - central(h)) / 3


def _bound_audit(cid, checks, horizons, sample_box, note=""):
    """``checks``: list of (name, lhs(t,x,mu), rhs(t,x,mu), rel_slack, admissible(x,mu))."""
    xs = _linspace(*sample_box["x_range"], 9)
    mus = _linspace(*sample_box["mu_range"], 9)
    ests, verdicts, total = [], [], 0
    for T in horizons:
        est = {"T": T}
        violated = False
        for name, lhs, rhs, slack, admissible in checks:
            worst_ratio, worst_at, count = 0.0, None, 0
            for t in _grid_times(T, horizons):
                for x in xs:
                    for mu in mus:
                        if not admissible(x, mu):
                            continue
                        a, b = abs(lhs(t, x, mu)), rhs(t, x, mu)
                        count += 1
                        bad = a > b * (1 + slack) + 1e-12 * (1 + abs(b))
                        ratio = a / b if b > 0 else (0.0 if a == 0 else math.inf)
                        if ratio > worst_ratio or (bad and worst_at is None):
                            worst_ratio, worst_at = ratio, (t, x, mu)
                        violated |= bad
            total += count
            est[name] = {"max_ratio": worst_ratio, "at": worst_at, "samples": count}
        v = VIOLATED if violated else SUPPORTED
        est["verdict"] = v
        verdicts.append(v)
        ests.append(est)
    return ConditionEntry(cid, _final(verdicts), total, ests, note)


_DEFAULT_BOX = {"x_range": (-0.5, 0.5), "mu_range": (-0.5, 0.5)}


def _require(field: FieldSpec, family: Family):
    if field.family is not family:
        raise ValueError(f"expected a {family.value} field, got {field.family.value}")
    if field.h is None:
        raise ValueError("the general audits need the bounding function h(t)")


def check_sn_general(field: FieldSpec, horizons=DEFAULT_HORIZONS,
                     sample_box: Optional[dict] = None) -> ConditionReport:
    """Audit of ``x' = mu^(2m-1)[f + phi] - x^(2n)[g + psi]`` with bounding function ``h``.

    For ``m = 1`` the perturbation bound is ``|phi| <= h (|x| + |mu|)``; for
    ``m > 1`` it is ``|phi| <= h (|x| + |mu|^-(2m-2))``, sampled only where
    ``|mu| >= 1e-3``.
    """
    _require(field, Family.GENERAL_SN)
    box = dict(_DEFAULT_BOX, **(sample_box or {}))
    hs = _horizons(horizons)
    f, g, h = field.f, field.g, field.h
    phi, psi = _checked(field.phi), _checked(field.psi_or_r)
    hf = h.fn
    m = field.m
    eq11, g_inf = _audit_positive("eq11", g, hs)
    eq12, lo, hi = _audit_ratio("eq12", f, g, hs)
    if m == 1:
        theorem, note = "T2", ""
        phi_rhs = lambda t, x, mu: hf(t) * (abs(x) + abs(mu))  # noqa: E731
        admissible = lambda x, mu: True  # noqa: E731
    else:
        theorem = "T3"
        note = (f"variant bound |phi| <= h (|x| + |mu|^-{2 * m - 2}); "
                f"sampled on |mu| >= {_SINGULAR_CUT}")
        phi_rhs = lambda t, x, mu: hf(t) * (abs(x) + abs(mu) ** -(2 * m - 2))  # noqa: E731
        admissible = lambda x, mu: abs(mu) >= _SINGULAR_CUT  # noqa: E731
    eq13 = _bound_audit("eq13", [
        ("phi", phi, phi_rhs, 1e-9, admissible),
        ("phi_x", lambda t, x, mu: _d(phi, t, x, mu, "x"), lambda t, x, mu: hf(t), 1e-6,
         lambda x, mu: True),
    ], hs, box, note)
    eq14 = _bound_audit("eq14", [
        ("psi_x", lambda t, x, mu: _d(psi, t, x, mu, "x"), lambda t, x, mu: hf(t), 1e-6,
         lambda x, mu: True),
    ], hs, box)
    eq15, k_hat = _audit_sup_ratio("eq15", h, g, hs)
    notes = [note] if note else []
    return ConditionReport(theorem, hs, [eq11, eq12, eq13, eq14, eq15],
                           {"l_hat": lo, "M_hat": hi, "k_hat": k_hat, "g_liminf_hat": g_inf},
                           notes)


def check_tc_general(field: FieldSpec, horizons=DEFAULT_HORIZONS,
                     sample_box: Optional[dict] = None) -> ConditionReport:
    """Audit of ``x' = mu^(2m-1)[f + mu phi] x - [g + r] x^(2n)`` with bounding function ``h``.

    For ``n = 1``: ``r(t,0,0) = 0`` and ``|phi|, |r_mu|, |r_x| <= h``.  For
    ``n > 1`` the bound on ``r`` becomes ``|r| <= h (|x|^-(2n-2) + |mu|)``,
    sampled only where ``|x| >= 1e-3``.
    """
    _require(field, Family.GENERAL_TC)
    box = dict(_DEFAULT_BOX, **(sample_box or {}))
    hs = _horizons(horizons)
    f, g, h = field.f, field.g, field.h
    phi, r = _checked(field.phi), _checked(field.psi_or_r)
    hf = h.fn
    n = field.n

    ts = _grid_times(hs[-1], hs)
    anchor = [abs(r(t, 0.0, 0.0)) for t in ts]
    gs = _sample(g, ts)
    bad = [t for t, a, gv in zip(ts, anchor, gs) if a > 1e-12 * max(1.0, abs(gv))]
    eq23 = ConditionEntry("eq23", VIOLATED if bad else SUPPORTED, len(ts),
                          [{"T": hs[-1], "max_abs_r_at_origin": max(anchor),
                            "violations": len(bad), "first_violation": bad[0] if bad else None}])
    eq24, g_inf = _audit_positive("eq24", g, hs)
    eq25, lo, hi = _audit_ratio("eq25", f, g, hs)
    hcap = lambda t, x, mu: hf(t)  # noqa: E731
    anywhere = lambda x, mu: True  # noqa: E731
    if n == 1:
        theorem, note = "T5", ""
        checks = [
            ("phi", phi, hcap, 1e-9, anywhere),
            ("r_mu", lambda t, x, mu: _d(r, t, x, mu, "mu"), hcap, 1e-6, anywhere),
            ("r_x", lambda t, x, mu: _d(r, t, x, mu, "x"), hcap, 1e-6, anywhere),
        ]
    else:
        theorem = "T6"
        note = (f"variant bound |r| <= h (|x|^-{2 * n - 2} + |mu|); "
                f"sampled on |x| >= {_SINGULAR_CUT}")
        checks = [
            ("phi", phi, hcap, 1e-9, anywhere),
            ("r", r, lambda t, x, mu: hf(t) * (abs(x) ** -(2 * n - 2) + abs(mu)), 1e-9,
             lambda x, mu: abs(x) >= _SINGULAR_CUT),
        ]
    eq26 = _bound_audit("eq26", checks, hs, box, note)
    eq27, k_hat = _audit_sup_ratio("eq27", h, g, hs)
    notes = [note] if note else []
    return ConditionReport(theorem, hs, [eq23, eq24, eq25, eq26, eq27],
                           {"l_hat": lo, "M_hat": hi, "k_hat": k_hat, "g_liminf_hat": g_inf},
                           notes)


def check_field(field: FieldSpec, horizons=DEFAULT_HORIZONS, mu_probe=(-0.5, 0.5),
                sample_box: Optional[dict] = None) -> ConditionReport:
    """Dispatch to the audit matching the field's family."""
    fam = field.family
    if fam is Family.CONCRETE_SN:
        return check_sn_concrete(field.f, field.g, horizons)
    if fam is Family.CONCRETE_TC:
        return check_tc_concrete(field.f, field.g, field.m, field.n, mu_probe, horizons)
    if fam is Family.GENERAL_SN:
        return check_sn_general(field, horizons, sample_box)
    if fam is Family.GENERAL_TC:
        return check_tc_general(field, horizons, sample_box)
    raise ValueError("black-box fields have no coefficient conditions to audit; "
                     "extract coefficients first")
