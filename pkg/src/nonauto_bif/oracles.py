"""Reference solutions: closed forms and quadrature-based orbit formulas.

The transcritical family ``x' = mu^(2m-1) f x - g x^(2n)`` is a Bernoulli
equation.  With ``k = 2n-1``, ``a = mu^(2m-1)`` and ``u = x^(-k)``,

    u(t) = e^{-k a (F(t)-F(s))} u(s) + k * int_s^t g(r) e^{-k a (F(t)-F(r))} dr

and the bounded complete orbits are

    x(t) = [k * int_{-inf}^t g(r) e^{k a (F(r)-F(t))} dr]^{-1/k}      (a > 0)
    x(t) = [k * int_t^{+inf} g(r) e^{k a (F(r)-F(t))} dr]^{-1/k}      (a < 0)

All exponentials are taken relative to ``F(t)`` so that nothing overflows
when ``F`` grows like ``t^3``.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Callable, Optional

from .errors import NoConvergence, TailDivergence
from .expr import ipow
from .field_model import CoefficientFunction
from .integrator import BlowUp

__all__ = [
    "QuadratureResult", "quad", "oddroot", "exact_mu0_sn", "exact_tc",
    "attractor_orbit_tc", "repeller_orbit_tc", "orbit_scale", "weighted_integral",
]

# Gauss-Kronrod 7-15 nodes and weights (QUADPACK qk15)
_XGK = (0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
        0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
        0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
        0.207784955007898467600689403773245, 0.0)
_WGK = (0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
        0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
        0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
        0.204432940075298892414161999234649, 0.209482141084727828012999174891714)
_WG = (0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
       0.381830050505118944950369775488975, 0.417959183673469387755102040816327)


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    error_estimate: float
    tail_truncation: Optional[float]
    evaluations: int


class _Bad(Exception):
    def __init__(self, r):
        self.r = r


def _gk15(fn, a, b):
    c = 0.5 * (a + b)
    hl = 0.5 * (b - a)
    fc = fn(c)
    resk = fc * _WGK[7]
    resg = fc * _WG[3]
    for j in range(7):
        dx = hl * _XGK[j]
        s = fn(c - dx) + fn(c + dx)
        resk += _WGK[j] * s
        if j & 1:
            resg += _WG[j >> 1] * s
    val = resk * hl
    err = abs((resk - resg) * hl)
    if not (math.isfinite(val) and math.isfinite(err)):
        raise _Bad(c)
    return val, err


def _kronrod(fn, a, b):
    c = 0.5 * (a + b)
    hl = 0.5 * (b - a)
    acc = fn(c) * _WGK[7]
    for j in range(7):
        dx = hl * _XGK[j]
        acc += _WGK[j] * (fn(c - dx) + fn(c + dx))
    return acc * hl


def _graded(a, b, scale):
    """Breakpoints that resolve features of width ``scale`` at either end."""
    if scale is None or not scale < 0.5 * (b - a):
        return [a, b]
    left, right = [a], [b]
    w = scale
    while w < 0.5 * (b - a):
        left.append(a + w)
        right.append(b - w)
        w *= 2.0
    return left + right[::-1]


def _adaptive(fn, a, b, tol, rel, limit, scale):
    """Globally adaptive GK15 on a finite interval; returns (value, error, evaluations)."""
    pts = _graded(a, b, scale)
    heap = []
    done_val, done_err = [], []
    evals = 0
    for lo, hi in zip(pts, pts[1:]):
        v, e = _gk15(fn, lo, hi)
        evals += 15
        heapq.heappush(heap, (-e, lo, hi, v))
    splits = 0
    while True:
        total = math.fsum([item[3] for item in heap] + done_val)
        err = math.fsum([-item[0] for item in heap] + done_err)
        if err <= max(tol, rel * abs(total)) or not heap:
            return total, err, evals
        if splits >= limit:
            raise NoConvergence(f"subdivision limit {limit} reached on [{a!r}, {b!r}], "
                                f"error {err:.3g}")
        neg_e, lo, hi, v = heapq.heappop(heap)
        mid = 0.5 * (lo + hi)
        if not (lo < mid < hi) or hi - lo <= 4e-16 * max(abs(lo), abs(hi)):
            done_val.append(v)
            done_err.append(-neg_e)
            continue
        for x0, x1 in ((lo, mid), (mid, hi)):
            vv, ee = _gk15(fn, x0, x1)
            heapq.heappush(heap, (-ee, x0, x1, vv))
        evals += 30
        splits += 1


def _safe(fn):
    def wrapped(r):
        try:
            v = fn(r)
        except (ArithmeticError, ValueError):
            raise _Bad(r) from None
        if not math.isfinite(v):
            raise _Bad(r)
        return v
    return wrapped


def quad(fn: Callable[[float], float], a: float, b: float, tol: float = 1e-10,
         rel: float = 1e-10, limit: int = 2000, initial_scale: Optional[float] = None,
         min_window: float = 1.0, max_doublings: int = 64) -> QuadratureResult:
    """Adaptive Gauss-Kronrod quadrature of ``fn`` over ``[a, b]``.

    Either endpoint may be infinite.  An infinite end is approached through
    windows of doubling length starting at ``initial_scale``; the cutoff is
    accepted once two successive window increments fall below a quarter of
    the tolerance (and the window is at least ``min_window`` long).  Growing
    or non-finite tails raise :class:`TailDivergence`.
    """
    if math.isnan(a) or math.isnan(b):
        raise ValueError("integration limits must not be NaN")
    if a == b:
        return QuadratureResult(0.0, 0.0, None, 0)
    if a > b:
        r = quad(fn, b, a, tol, rel, limit, initial_scale, min_window, max_doublings)
        return QuadratureResult(-r.value, r.error_estimate, r.tail_truncation, r.evaluations)
    safe = _safe(fn)
    if math.isinf(a) and math.isinf(b):
        lo = quad(fn, a, 0.0, tol / 2, rel, limit, initial_scale, min_window, max_doublings)
        hi = quad(fn, 0.0, b, tol / 2, rel, limit, initial_scale, min_window, max_doublings)
        return QuadratureResult(lo.value + hi.value, lo.error_estimate + hi.error_estimate,
                                math.inf, lo.evaluations + hi.evaluations)
    if not (math.isinf(a) or math.isinf(b)):
        try:
            v, e, n = _adaptive(safe, a, b, tol, rel, limit, initial_scale)
        except _Bad as bad:
            raise NoConvergence(f"integrand not finite near r={bad.r!r}") from None
        return QuadratureResult(v, e, None, n)
    return _tail(safe, a, b, tol, rel, limit, initial_scale or 1.0, min_window, max_doublings)


def _tail(fn, a, b, tol, rel, limit, scale, min_window, max_doublings):
    forward = math.isinf(b)          # integrating towards +inf from a
    anchor = a if forward else b
    direction = 1.0 if forward else -1.0
    pieces, errs = [], []
    evals = 0
    quiet = 0
    inner, outer = 0.0, scale
    for _ in range(max_doublings + 1):
        p0, p1 = anchor + direction * inner, anchor + direction * outer
        lo, hi = (p0, p1) if forward else (p1, p0)
        try:
            v, e, n = _adaptive(fn, lo, hi, tol / 8, rel, limit,
                                scale if inner == 0.0 else None)
        except _Bad as bad:
            raise TailDivergence(f"integrand not finite near r={bad.r!r}",
                                 cutoff=p1, partial=math.fsum(pieces)) from None
        evals += n
        pieces.append(v)
        errs.append(e)
        total = math.fsum(pieces)
        target = max(tol, rel * abs(total))
        if inner > 0.0 and abs(v) < target / 4 and outer >= min_window:
            quiet += 1
        else:
            quiet = 0
        if quiet >= 2:
            return QuadratureResult(total, math.fsum(errs) + abs(v), p1, evals)
        inner, outer = outer, 2.0 * outer
    raise TailDivergence(f"tail did not settle after {max_doublings} doublings",
                         cutoff=anchor + direction * inner, partial=math.fsum(pieces))


def oddroot(y: float, k: int) -> float:
    """The real ``k``-th root of ``y`` for odd ``k`` (sign preserved)."""
    if k < 1 or k % 2 == 0:
        raise ValueError(f"k must be a positive odd integer, got {k}")
    if y == 0.0 or k == 1 or not math.isfinite(y):
        return y
    r = math.copysign(abs(y) ** (1.0 / k), y)
    try:
        rk1 = ipow(r, k - 1)
        polished = r - (rk1 * r - y) / (k * rk1)
    except (OverflowError, ZeroDivisionError):
        return r
    return polished if math.isfinite(polished) else r


# -- Bernoulli solutions -----------------------------------------------------

def _log_add(terms):
    """``log|sum|`` and sign of ``sum(sign_i * e^{L_i})`` without overflow."""
    terms = [(sg, L) for sg, L in terms if sg != 0 and L != -math.inf]
    if not terms:
        return 0, -math.inf
    top = max(L for _, L in terms)
    acc = math.fsum(sg * math.exp(L - top) for sg, L in terms)
    if acc == 0.0:
        return 0, -math.inf
    return (1 if acc > 0 else -1), top + math.log(abs(acc))


def _weighted_log_integral(g, F, kappa, lo, hi, tol):
    """``log`` of ``int_lo^hi g(r) e^{kappa F(r)} dr`` (with g >= 0 over most of the range)."""
    if hi <= lo:
        return 0, -math.inf
    probe = [lo + (hi - lo) * i / 64 for i in range(65)]
    shift = max(kappa * F(r) for r in probe)
    res = quad(lambda r: g(r) * math.exp(kappa * F(r) - shift), lo, hi, tol=tol, rel=tol)
    if res.value == 0.0:
        return 0, -math.inf
    return (1 if res.value > 0 else -1), shift + math.log(abs(res.value))


def _bernoulli(k, a, Ffn, gfn, s, t, x0, tol):
    if t < s:
        raise ValueError("requires t >= s")
    if x0 == 0.0:
        return 0.0
    if t == s:
        return x0
    sign0 = 1 if x0 > 0 else -1
    kappa = k * a
    base = -k * math.log(abs(x0))           # log|u(s)|
    Fs = Ffn(s)

    def w(tau):
        # e^{kappa (F(tau) - F(s))} u(tau) = u(s) + k int_s^tau g e^{kappa (F(r) - F(s))} dr
        sg, L = _weighted_log_integral(gfn, lambda r: Ffn(r) - Fs, kappa, s, tau, tol)
        return _log_add([(sign0, base), (sg, math.log(k) + L if sg else -math.inf)])

    sg_t, L_t = w(t)
    if sg_t == sign0:
        log_u = L_t - kappa * (Ffn(t) - Fs)
        return sign0 * math.exp(-log_u / k)
    lo, hi = s, t
    while hi - lo > 1e-12 * max(1.0, abs(hi)):
        mid = 0.5 * (lo + hi)
        if w(mid)[0] == sign0:
            lo = mid
        else:
            hi = mid
    return BlowUp(0.5 * (lo + hi), sign0, (lo, hi))


def exact_mu0_sn(n: int, g: CoefficientFunction, s: float, t: float, x0: float,
                 tol: float = 1e-12):
    """Solution of ``x' = -g(t) x^(2n)`` through ``(s, x0)`` evaluated at ``t >= s``.

    Returns :class:`BlowUp` when the solution escapes before ``t``.
    """
    g = g if isinstance(g, CoefficientFunction) else CoefficientFunction(g)
    return _bernoulli(2 * n - 1, 0.0, lambda r: 0.0, g.fn, s, t, x0, tol)


def exact_tc(m: int, n: int, mu: float, f: CoefficientFunction, g: CoefficientFunction,
             s: float, t: float, x0: float, tol: float = 1e-12):
    """Solution of ``x' = mu^(2m-1) f x - g x^(2n)`` through ``(s, x0)`` at ``t >= s``."""
    f = f if isinstance(f, CoefficientFunction) else CoefficientFunction(f)
    g = g if isinstance(g, CoefficientFunction) else CoefficientFunction(g)
    if f.antiderivative is None:
        raise ValueError("f needs an antiderivative")
    a = ipow(mu, 2 * m - 1)
    return _bernoulli(2 * n - 1, a, f.anti_fn, g.fn, s, t, x0, tol)


def orbit_scale(k: int, a: float, f: CoefficientFunction, t: float) -> float:
    """Width of the exponential weight near ``r = t``: resolves the integrand spike."""
    rate = k * abs(a) * abs(f.fn(t))
    return 1.0 if rate <= 1.0 else 1.0 / rate


def weighted_integral(f: CoefficientFunction, g: CoefficientFunction, anchor: float,
                      kappa: float, lo: float, hi: float, tol: float = 1e-12,
                      initial_scale: Optional[float] = None) -> QuadratureResult:
    """``int_lo^hi g(anchor+v) exp(kappa (F(anchor+v) - F(anchor))) dv``.

    The integration variable is the offset ``v`` from ``anchor`` (the weight can
    be far narrower than ``ulp(anchor)``), and near the anchor the exponent is
    obtained by integrating ``f`` directly because the antiderivative difference
    cancels catastrophically once ``|F(anchor)|`` is large.  Either limit may be
    infinite.
    """
    Fa = f.anti_fn(anchor)
    Ffn, ffn, gfn = f.anti_fn, f.fn, g.fn
    near = 0.25 * max(1.0, abs(anchor))

    def weight(v):
        if abs(v) <= near:
            d = _kronrod(lambda u: ffn(anchor + u), 0.0, v)
        else:
            d = Ffn(anchor + v) - Fa
        e = kappa * d
        return 0.0 if e < -745.0 else gfn(anchor + v) * math.exp(e)

    if initial_scale is None:
        rate = abs(kappa) * abs(ffn(anchor))
        initial_scale = 1.0 if rate <= 1.0 else 1.0 / rate
    return quad(weight, lo, hi, tol=tol, rel=tol, initial_scale=initial_scale)


def _coefs(f, g):
    f = f if isinstance(f, CoefficientFunction) else CoefficientFunction(f)
    g = g if isinstance(g, CoefficientFunction) else CoefficientFunction(g)
    if f.antiderivative is None:
        raise ValueError("f needs an antiderivative")
    return f, g


def _orbit(m, n, mu, f, g, t, tol, towards):
    f, g = _coefs(f, g)
    k = 2 * n - 1
    a = ipow(mu, 2 * m - 1)
    lo, hi = (-math.inf, 0.0) if towards < 0 else (0.0, math.inf)
    res = weighted_integral(f, g, t, k * a, lo, hi, tol, orbit_scale(k, a, f, t))
    if not res.value > 0:
        raise TailDivergence("weighted integral is not positive", cutoff=res.tail_truncation,
                             partial=res.value)
    return (k * res.value) ** (-1.0 / k)


def attractor_orbit_tc(m: int, n: int, mu: float, f: CoefficientFunction,
                       g: CoefficientFunction, t: float, tol: float = 1e-12) -> float:
    """The positive pullback attractor ``x_mu(t)`` of the transcritical family (``mu > 0``)."""
    if not mu > 0:
        raise ValueError("attractor orbit requires mu > 0")
    return _orbit(m, n, mu, f, g, t, tol, -1)


def repeller_orbit_tc(m: int, n: int, mu: float, f: CoefficientFunction,
                      g: CoefficientFunction, t: float, tol: float = 1e-12,
                      signed: bool = False) -> float:
    """Magnitude of the pullback repeller of the transcritical family (``mu < 0``).

    The orbit itself lies below zero; pass ``signed=True`` to get it with its sign.
    """
    if not mu < 0:
        raise ValueError("repeller orbit requires mu < 0")
    value = _orbit(m, n, mu, f, g, t, tol, +1)
    return -value if signed else value
