"""Adaptive integration of ``x' = G(t, x, mu)`` realizing the process ``S(t, s)``.

Dormand-Prince 5(4) with PI step-size control.  Backward runs integrate the
time-reversed field ``tau = -t``, so a single forward code path is used.

When the step size collapses while the field is fast relative to the state
(finite-time blow-up, or the violent transient of a run started far in the
past) the stepper switches to a speed-normalised parametrisation

    dt/dsigma = rho,  dx/dsigma = G rho,  rho = sqrt((1 + x^2) / (1 + x^2 + G^2))

in which ``|x|`` grows at most exponentially while ``t`` approaches the escape
time.  It switches back once ``rho > 1/2``.  Escape is declared when
``|x| >= x_max`` and the crossing is located on the dense output.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional, Union

from .errors import NonFiniteResult, StepFailure
from .field_model import FieldSpec, eval_rhs

__all__ = [
    "Tolerance", "DEFAULT_TOL", "X_MAX", "Completed", "BlowUp", "StepFailed", "NoBlowUp",
    "Trajectory", "advance", "process", "detect_blowup", "integrate",
]

X_MAX = 1e8
MIN_STEP_FACTOR = 1e-13
MAX_STEPS = 2_000_000
_SWITCH_FACTOR = 1e-10
_SAFETY = 0.9
_ALPHA = 0.17   # PI controller exponents (Hairer-Wanner, DOPRI5)
_BETA = 0.04

# Dormand-Prince tableau
_C2, _C3, _C4, _C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
_A21 = 1 / 5
_A31, _A32 = 3 / 40, 9 / 40
_A41, _A42, _A43 = 44 / 45, -56 / 15, 32 / 9
_A51, _A52, _A53, _A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
_A61, _A62, _A63, _A64, _A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
_B1, _B3, _B4, _B5, _B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
_E1, _E3, _E4, _E5, _E6, _E7 = (-71 / 57600, 71 / 16695, -71 / 1920, 17253 / 339200,
                                -22 / 525, 1 / 40)
# dense output (Shampine), rows per stage, columns theta^1..theta^4
_P = (
    (1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432),
    (0.0, 0.0, 0.0, 0.0),
    (0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799),
    (0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072),
    (0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632),
    (0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844),
    (0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423),
)


@dataclass(frozen=True)
class Tolerance:
    rel: float = 1e-9
    abs: float = 1e-12

    def __post_init__(self):
        if not (self.rel > 0 and self.abs > 0):
            raise ValueError("tolerances must be positive")


DEFAULT_TOL = Tolerance()


@dataclass(frozen=True)
class Completed:
    kind = "Completed"


@dataclass(frozen=True)
class BlowUp:
    """Finite-time escape: ``|x| -> inf`` with the given sign as ``t -> t_star``."""
    t_star: float
    sign: int
    bracket: tuple = ()
    kind = "BlowUp"


@dataclass(frozen=True)
class StepFailed:
    t_fail: float
    kind = "StepFailure"


@dataclass(frozen=True)
class NoBlowUp:
    t_max: float
    x_end: float
    kind = "NoBlowUp"


Outcome = Union[Completed, BlowUp, StepFailed]


@dataclass
class Trajectory:
    samples: list
    outcome: Outcome
    stats: dict = dc_field(default_factory=dict)

    @property
    def t_end(self) -> float:
        return self.samples[-1][0]

    @property
    def x_end(self) -> float:
        return self.samples[-1][1]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["t", "x"])
        for t, x in self.samples:
            writer.writerow([repr(t), repr(x)])
        return buf.getvalue()

    def to_json(self) -> dict:
        outcome = {"kind": self.outcome.kind}
        if isinstance(self.outcome, BlowUp):
            outcome.update(t_star=self.outcome.t_star, sign=self.outcome.sign,
                           bracket=list(self.outcome.bracket))
        elif isinstance(self.outcome, StepFailed):
            outcome["t_fail"] = self.outcome.t_fail
        return {"outcome": outcome, "stats": dict(self.stats),
                "t_end": self.t_end, "x_end": self.x_end, "n_samples": len(self.samples)}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


# -- stepping kernels --------------------------------------------------------

def _step(fun, t, y, h, k1):
    """One DP5 step; returns (y5, err_estimate, stages) or None if the field failed."""
    try:
        k2 = fun(t + _C2 * h, y + h * _A21 * k1)
        k3 = fun(t + _C3 * h, y + h * (_A31 * k1 + _A32 * k2))
        k4 = fun(t + _C4 * h, y + h * (_A41 * k1 + _A42 * k2 + _A43 * k3))
        k5 = fun(t + _C5 * h, y + h * (_A51 * k1 + _A52 * k2 + _A53 * k3 + _A54 * k4))
        k6 = fun(t + h, y + h * (_A61 * k1 + _A62 * k2 + _A63 * k3 + _A64 * k4 + _A65 * k5))
        y5 = y + h * (_B1 * k1 + _B3 * k3 + _B4 * k4 + _B5 * k5 + _B6 * k6)
        k7 = fun(t + h, y5)
        err = h * (_E1 * k1 + _E3 * k3 + _E4 * k4 + _E5 * k5 + _E6 * k6 + _E7 * k7)
    except (ArithmeticError, ValueError):
        return None
    if not (math.isfinite(err) and math.isfinite(k7)):
        return None
    return y5, err, (k1, k2, k3, k4, k5, k6, k7)


def _step2(fun, s, u, v, h, k1):
    """DP5 step for the two-component state (t, x) of the normalised mode."""
    a1, b1 = k1
    try:
        a2, b2 = fun(u + h * _A21 * a1, v + h * _A21 * b1)
        a3, b3 = fun(u + h * (_A31 * a1 + _A32 * a2), v + h * (_A31 * b1 + _A32 * b2))
        a4, b4 = fun(u + h * (_A41 * a1 + _A42 * a2 + _A43 * a3),
                     v + h * (_A41 * b1 + _A42 * b2 + _A43 * b3))
        a5, b5 = fun(u + h * (_A51 * a1 + _A52 * a2 + _A53 * a3 + _A54 * a4),
                     v + h * (_A51 * b1 + _A52 * b2 + _A53 * b3 + _A54 * b4))
        a6, b6 = fun(u + h * (_A61 * a1 + _A62 * a2 + _A63 * a3 + _A64 * a4 + _A65 * a5),
                     v + h * (_A61 * b1 + _A62 * b2 + _A63 * b3 + _A64 * b4 + _A65 * b5))
        u5 = u + h * (_B1 * a1 + _B3 * a3 + _B4 * a4 + _B5 * a5 + _B6 * a6)
        v5 = v + h * (_B1 * b1 + _B3 * b3 + _B4 * b4 + _B5 * b5 + _B6 * b6)
        a7, b7 = fun(u5, v5)
        eu = h * (_E1 * a1 + _E3 * a3 + _E4 * a4 + _E5 * a5 + _E6 * a6 + _E7 * a7)
        ev = h * (_E1 * b1 + _E3 * b3 + _E4 * b4 + _E5 * b5 + _E6 * b6 + _E7 * b7)
    except (ArithmeticError, ValueError):
        return None
    if not all(map(math.isfinite, (eu, ev, u5, v5, a7, b7))):
        return None
    return u5, v5, eu, ev, ((a1, a2, a3, a4, a5, a6, a7), (b1, b2, b3, b4, b5, b6, b7))


def _dense(y0, h, K, theta):
    total = 0.0
    for k, (p1, p2, p3, p4) in zip(K, _P):
        if k:
            total += k * theta * (p1 + theta * (p2 + theta * (p3 + theta * p4)))
    return y0 + h * total


def _bisect(pred, lo=0.0, hi=1.0, width=1e-15):
    """Shrink [lo, hi] around the first theta where ``pred`` turns true (pred(hi) is true)."""
    while hi - lo > width:
        mid = 0.5 * (lo + hi)
        if pred(mid):
            hi = mid
        else:
            lo = mid
    return lo, hi


def _controller(err, err_prev, rejected):
    if err == 0.0:
        factor = 10.0
    else:
        factor = _SAFETY * err ** -_ALPHA * err_prev ** _BETA
        factor = min(10.0, max(0.2, factor))
    if rejected:
        factor = min(1.0, factor)
    return factor


def _initial_step(fun, t0, y0, f0, t1, rtol, atol):
    sc = atol + rtol * abs(y0)
    d0, d1 = abs(y0) / sc, abs(f0) / sc
    h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    h0 = min(h0, t1 - t0)
    try:
        f1 = fun(t0 + h0, y0 + h0 * f0)
        d2 = abs(f1 - f0) / sc / h0
        if not math.isfinite(d2):
            raise ValueError
    except (ArithmeticError, ValueError):
        return h0 * 1e-2
    dm = max(d1, d2)
    h1 = max(1e-6, h0 * 1e-3) if dm <= 1e-15 else (0.01 / dm) ** 0.2
    return min(100 * h0, h1, t1 - t0)


def _rho(G, x):
    q = 1.0 + x * x
    return math.sqrt(q / (q + G * G))


# -- driver ------------------------------------------------------------------

def integrate(fun: Callable[[float, float], float], t0: float, y0: float, t1: float,
              tol: Tolerance = DEFAULT_TOL, x_max: float = X_MAX, record: bool = True,
              on_nonfinite: Optional[Callable[[float, float], None]] = None,
              max_steps: int = MAX_STEPS) -> Trajectory:
    """Integrate ``y' = fun(t, y)`` forward from ``t0`` to ``t1 > t0``.

    More than ``max_steps`` step attempts count as a step failure; this stops
    discontinuous or very stiff fields from chattering indefinitely.
    """
    rtol, atol = tol.rel, tol.abs
    samples = [(t0, y0)]
    stats = {"steps": 0, "rejections": 0, "min_step": math.inf}
    t, y = t0, y0
    if t1 == t0:
        stats["min_step"] = 0.0
        return Trajectory(samples, Completed(), stats)

    def field_failure(tt, yy):
        if on_nonfinite is not None:
            on_nonfinite(tt, yy)
        raise NonFiniteResult(f"field is not finite at t={tt!r}, x={yy!r}")

    def evaluate(tt, yy):
        try:
            v = fun(tt, yy)
        except (ArithmeticError, ValueError):
            field_failure(tt, yy)
        if not math.isfinite(v):
            field_failure(tt, yy)
        return v

    def push(tt, yy):
        if record:
            if tt > samples[-1][0]:
                samples.append((tt, yy))
        else:
            if len(samples) == 1:
                samples.append((tt, yy))
            else:
                samples[-1] = (tt, yy)

    def normalised(u, v):
        G = fun(u, v)
        r = _rho(G, v)
        return r, G * r

    def finish(outcome):
        if stats["min_step"] is math.inf:
            stats["min_step"] = 0.0
        return Trajectory(samples, outcome, stats)

    f = evaluate(t, y)
    h = _initial_step(fun, t, y, f, t1, rtol, atol)
    # a tiny |y0| makes the guess scale with y0; keep it clear of the underflow test
    h = min(max(h, 10 * _SWITCH_FACTOR * max(1.0, abs(t))), t1 - t)
    err_prev = 1e-4
    rejected = False

    while True:
        # ---- ordinary time stepping -------------------------------------
        switch = False
        while t < t1:
            if stats["steps"] + stats["rejections"] >= max_steps:
                return finish(StepFailed(t))
            hmin = MIN_STEP_FACTOR * max(1.0, abs(t))
            last = False
            if t + h >= t1 or t1 - (t + h) < hmin:
                h = t1 - t
                last = True
            res = _step(fun, t, y, h, f)
            if res is None:
                err = math.inf
            else:
                y_new, e, K = res
                err = abs(e) / (atol + rtol * max(abs(y), abs(y_new)))
            if err <= 1.0:
                t_new = t1 if last else t + h
                stats["steps"] += 1
                stats["min_step"] = min(stats["min_step"], h)
                if abs(y_new) >= x_max:
                    y_old, h_old = y, h
                    lo, hi = _bisect(lambda th: abs(_dense(y_old, h_old, K, th)) >= x_max)
                    t_lo, t_hi = t + lo * h_old, t + hi * h_old
                    y_hi = _dense(y_old, h_old, K, hi)
                    t_hi = max(t_hi, math.nextafter(samples[-1][0], math.inf))
                    push(t_hi, y_hi)
                    return finish(BlowUp(t_hi, 1 if y_hi > 0 else -1, (t_lo, t_hi)))
                factor = _controller(err, err_prev, rejected)
                err_prev = max(err, 1e-4)
                rejected = False
                t, y, f = t_new, y_new, K[6]
                push(t, y)
                h *= factor
            else:
                stats["rejections"] += 1
                rejected = True
                h *= 0.25 if not math.isfinite(err) else max(0.2, _SAFETY * err ** -0.2)
            if h < _SWITCH_FACTOR * max(1.0, abs(t)) and t < t1:
                if _rho(f, y) < 0.5:
                    switch = True
                    break
                if h < MIN_STEP_FACTOR * max(1.0, abs(t)):
                    return finish(StepFailed(t))
        if not switch:
            return finish(Completed())

        # ---- speed-normalised stepping ----------------------------------
        # time is carried as an offset from the entry point so that the error
        # test resolves the (tiny) elapsed time rather than rtol * |t|
        tb = t
        span = t1 - tb
        tau = 0.0
        sigma = 0.0
        k = normalised(tb, y)
        hs = h / k[0]
        err_prev = 1e-4
        rejected = False
        while True:
            if (hs < MIN_STEP_FACTOR * max(1.0, abs(sigma))
                    or stats["steps"] + stats["rejections"] >= max_steps):
                return finish(StepFailed(tb + tau))
            res = _step2(lambda u, v: normalised(tb + u, v), sigma, tau, y, hs, k)
            if res is None:
                err = math.inf
            else:
                u5, v5, eu, ev, (KA, KB) = res
                err = max(abs(eu) / (atol + rtol * max(abs(tau), abs(u5))),
                          abs(ev) / (atol + rtol * max(abs(y), abs(v5))))
            if err > 1.0:
                stats["rejections"] += 1
                rejected = True
                hs *= 0.25 if not math.isfinite(err) else max(0.2, _SAFETY * err ** -0.2)
                continue
            stats["steps"] += 1
            tau_old, y_old, h_old = tau, y, hs
            if u5 >= span:
                lo, hi = _bisect(lambda th: _dense(tau_old, h_old, KA, th) >= span)
                y_end = _dense(y_old, h_old, KB, hi)
                if abs(y_end) < x_max:
                    push(t1, y_end)
                    return finish(Completed())
            if abs(v5) >= x_max:
                lo, hi = _bisect(lambda th: abs(_dense(y_old, h_old, KB, th)) >= x_max)
                t_lo = tb + _dense(tau_old, h_old, KA, lo)
                t_hi = tb + _dense(tau_old, h_old, KA, hi)
                t_hi = min(max(t_hi, tb + tau_old), t1)
                y_hi = _dense(y_old, h_old, KB, hi)
                push(max(t_hi, math.nextafter(samples[-1][0], math.inf)), y_hi)
                return finish(BlowUp(samples[-1][0], 1 if y_hi > 0 else -1, (t_lo, t_hi)))
            factor = _controller(err, err_prev, rejected)
            err_prev = max(err, 1e-4)
            rejected = False
            sigma += hs
            tau, y = u5, v5
            t = tb + tau
            k = (KA[6], KB[6])
            push(t, y)
            hs *= factor
            if k[0] > 0.5:
                f = k[1] / k[0]
                h = min(hs * k[0], t1 - t)
                break


def _as_fun(field) -> Callable[[float, float], float]:
    return field.rhs() if isinstance(field, FieldSpec) else field


def advance(field, s: float, x0: float, t_end: float, tol: Tolerance = DEFAULT_TOL,
            record: bool = True, x_max: float = X_MAX, max_steps: int = MAX_STEPS) -> Trajectory:
    """Integrate from ``(s, x0)`` to ``t_end`` in either time direction.

    ``field`` is a :class:`FieldSpec` or any callable ``(t, x) -> float``.
    Escape to infinity is an outcome (:class:`BlowUp`), as is step-size
    underflow (:class:`StepFailed`); samples run monotonically from ``s``.
    """
    s, x0, t_end = float(s), float(x0), float(t_end)
    fun = _as_fun(field)
    on_bad = (lambda t, x: eval_rhs(field, t, x)) if isinstance(field, FieldSpec) else None
    if t_end >= s:
        return integrate(fun, s, x0, t_end, tol, x_max, record, on_bad, max_steps)

    def reversed_fun(tau, x):
        return -fun(-tau, x)

    bad = (lambda tau, x: on_bad(-tau, x)) if on_bad else None
    traj = integrate(reversed_fun, -s, x0, -t_end, tol, x_max, record, bad, max_steps)
    samples = [(-tau, x) for tau, x in traj.samples]
    out = traj.outcome
    if isinstance(out, BlowUp):
        out = BlowUp(-out.t_star, out.sign, tuple(-b for b in reversed(out.bracket)))
    elif isinstance(out, StepFailed):
        out = StepFailed(-out.t_fail)
    return Trajectory(samples, out, traj.stats)


def process(field, t: float, s: float, x0: float, tol: Tolerance = DEFAULT_TOL):
    """``S(t, s) x0``: the state at ``t`` of the solution through ``(s, x0)``.

    Returns a float, or a :class:`BlowUp` if the solution escapes first.
    Raises :class:`StepFailure` on step-size underflow.
    """
    if t == s:
        return float(x0)
    traj = advance(field, s, x0, t, tol, record=False)
    out = traj.outcome
    if isinstance(out, StepFailed):
        raise StepFailure(out.t_fail)
    if isinstance(out, BlowUp):
        return out
    return traj.x_end


def detect_blowup(field, s: float, x0: float, t_max: float, tol: Tolerance = DEFAULT_TOL,
                  x_max: float = X_MAX):
    """Escape time of the forward solution through ``(s, x0)`` on ``[s, t_max]``.

    Returns :class:`BlowUp` (with a bracket no wider than ``1e-6 max(1, |t*|)``)
    or :class:`NoBlowUp`.  Raises :class:`StepFailure` on underflow.
    """
    if not t_max > s:
        raise ValueError("t_max must exceed s")
    traj = advance(field, s, x0, t_max, tol, record=False, x_max=x_max)
    out = traj.outcome
    if isinstance(out, StepFailed):
        raise StepFailure(out.t_fail)
    if isinstance(out, BlowUp):
        return out
    return NoBlowUp(t_max, traj.x_end)
