"""Scalar non-autonomous vector fields ``x' = G(t, x, mu)``.

Five families are supported:

* ``ConcreteSN``  ``mu^(2m-1) f(t) - g(t) x^(2n)``
* ``ConcreteTC``  ``mu^(2m-1) f(t) x - g(t) x^(2n)``
* ``GeneralSN``   ``mu^(2m-1) [f(t) + phi] - x^(2n) [g(t) + psi]``
* ``GeneralTC``   ``mu^(2m-1) [f(t) + mu phi] x - [g(t) + r] x^(2n)``
* ``BlackBox``    an arbitrary expression ``G(t, x, mu)``

The module also recovers the Taylor coefficients ``f`` and ``g`` of a black
box by centered finite differences with Richardson extrapolation.
"""

from __future__ import annotations

import enum
import math
import sys
from dataclasses import dataclass, field as dc_field, replace
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Optional, Sequence

from . import expr as ex
from .errors import NonFiniteResult, StencilUnderflow

__all__ = [
    "Family", "CoefficientFunction", "FieldSpec", "eval_rhs",
    "CoefficientEstimate", "extract_coefficients", "fd_weights", "partial_derivative",
]


class Family(str, enum.Enum):
    CONCRETE_SN = "ConcreteSN"
    CONCRETE_TC = "ConcreteTC"
    GENERAL_SN = "GeneralSN"
    GENERAL_TC = "GeneralTC"
    BLACKBOX = "BlackBox"

    @property
    def kind(self) -> Optional[str]:
        """``"SN"`` or ``"TC"`` for the structured families, None for a black box."""
        if self in (Family.CONCRETE_SN, Family.GENERAL_SN):
            return "SN"
        if self in (Family.CONCRETE_TC, Family.GENERAL_TC):
            return "TC"
        return None


def _as_expr(value) -> ex.Expression:
    return ex.parse_expr(value) if isinstance(value, str) else value


@dataclass(frozen=True)
class CoefficientFunction:
    """A function of ``t`` alone, optionally paired with an antiderivative."""

    body: ex.Expression
    antiderivative: Optional[ex.Expression] = None

    def __post_init__(self):
        object.__setattr__(self, "body", _as_expr(self.body))
        if self.antiderivative is not None:
            object.__setattr__(self, "antiderivative", _as_expr(self.antiderivative))
        for label, node in (("body", self.body), ("antiderivative", self.antiderivative)):
            if node is None:
                continue
            extra = ex.free_vars(node) - {"t"}
            if extra:
                raise ValueError(
                    f"coefficient {label} {ex.to_source(node)!r} may depend on t only, "
                    f"found {sorted(extra)}")

    @property
    def fn(self) -> Callable[[float], float]:
        """Fast unchecked callable ``t -> body(t)``."""
        return ex.compile_expr(self.body, ("t",))

    @property
    def anti_fn(self) -> Callable[[float], float]:
        if self.antiderivative is None:
            raise ValueError(f"no antiderivative supplied for {ex.to_source(self.body)!r}")
        return ex.compile_expr(self.antiderivative, ("t",))

    def __call__(self, t: float) -> float:
        return ex.eval_expr(self.body, t=t)

    def F(self, t: float) -> float:
        if self.antiderivative is None:
            raise ValueError(f"no antiderivative supplied for {ex.to_source(self.body)!r}")
        return ex.eval_expr(self.antiderivative, t=t)

    def antiderivative_residual(self, ts: Sequence[float]) -> float:
        """Largest relative mismatch between ``d/dt F`` (centered differences) and the body."""
        worst = 0.0
        for t in ts:
            h = 1e-5 * max(1.0, abs(t))
            deriv = (self.F(t + h) - self.F(t - h)) / (2 * h)
            body = self(t)
            worst = max(worst, abs(deriv - body) / max(1.0, abs(body)))
        return worst

    def source(self) -> str:
        return ex.to_source(self.body)


def _coef(value) -> Optional[CoefficientFunction]:
    if value is None or isinstance(value, CoefficientFunction):
        return value
    return CoefficientFunction(value)


_REQUIRED = {
    Family.CONCRETE_SN: ("f", "g"),
    Family.CONCRETE_TC: ("f", "g"),
    Family.GENERAL_SN: ("f", "g", "phi", "psi_or_r"),
    Family.GENERAL_TC: ("f", "g", "phi", "psi_or_r"),
    Family.BLACKBOX: ("G",),
}


@dataclass(frozen=True)
class FieldSpec:
    family: Family
    m: int = 1
    n: int = 1
    mu: float = 0.0
    f: Optional[CoefficientFunction] = None
    g: Optional[CoefficientFunction] = None
    phi: Optional[ex.Expression] = None
    psi_or_r: Optional[ex.Expression] = None
    h: Optional[CoefficientFunction] = None
    G: Optional[ex.Expression] = None
    _cache: dict = dc_field(default_factory=dict, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        if int(self.m) != self.m or self.m < 1 or int(self.n) != self.n or self.n < 1:
            raise ValueError(f"exponents must be positive integers, got m={self.m}, n={self.n}")
        object.__setattr__(self, "m", int(self.m))
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "mu", float(self.mu))
        if not math.isfinite(self.mu):
            raise ValueError("mu must be finite")
        for name in ("f", "g", "h"):
            object.__setattr__(self, name, _coef(getattr(self, name)))
        for name in ("phi", "psi_or_r", "G"):
            value = getattr(self, name)
            if value is not None:
                object.__setattr__(self, name, _as_expr(value))
        missing = [k for k in _REQUIRED[self.family] if getattr(self, k) is None]
        if missing:
            raise ValueError(f"{self.family.value} requires {', '.join(missing)}")

    # -- construction helpers ----------------------------------------------

    @property
    def kind(self) -> Optional[str]:
        return self.family.kind

    def with_mu(self, mu: float) -> "FieldSpec":
        return replace(self, mu=float(mu))

    @property
    def mu_power(self) -> float:
        """``mu^(2m-1)``, computed exactly."""
        return ex.ipow(self.mu, 2 * self.m - 1)

    def as_expression(self) -> ex.Expression:
        """The full right-hand side as a single expression in ``(t, x, mu)``."""
        if "expr" in self._cache:
            return self._cache["expr"]
        B = ex.BinOp
        P = lambda a, k: ex.BinOp("^", a, ex.Num(float(k)))  # noqa: E731
        mu, x = ex.Var("mu"), ex.Var("x")
        amp = P(mu, 2 * self.m - 1)
        xpow = P(x, 2 * self.n)
        fam = self.family
        if fam is Family.BLACKBOX:
            node = self.G
        elif fam is Family.CONCRETE_SN:
            node = B("-", B("*", amp, self.f.body), B("*", self.g.body, xpow))
        elif fam is Family.CONCRETE_TC:
            node = B("-", B("*", B("*", amp, self.f.body), x), B("*", self.g.body, xpow))
        elif fam is Family.GENERAL_SN:
            node = B("-", B("*", amp, B("+", self.f.body, self.phi)),
                     B("*", xpow, B("+", self.g.body, self.psi_or_r)))
        else:
            node = B("-", B("*", B("*", amp, B("+", self.f.body, B("*", mu, self.phi))), x),
                     B("*", B("+", self.g.body, self.psi_or_r), xpow))
        self._cache["expr"] = node
        return node

    def blackbox(self) -> "FieldSpec":
        """The same field presented as an opaque ``G`` (for coefficient extraction)."""
        return FieldSpec(Family.BLACKBOX, m=self.m, n=self.n, mu=self.mu, h=self.h,
                         G=self.as_expression())

    def rhs(self) -> Callable[[float, float], float]:
        """Fast unchecked ``(t, x) -> G(t, x, mu)`` with ``mu`` bound."""
        fn = self._cache.get("rhs")
        if fn is None:
            src = ex.python_source(self.as_expression())
            fn = eval(f"lambda t, x, mu={self.mu!r}: {src}", ex.codegen_namespace())  # noqa: S307
            self._cache["rhs"] = fn
        return fn

    def anchor_residual(self, ts: Sequence[float]) -> dict:
        """Largest ``|phi(t,0,0)|`` and ``|psi/r(t,0,0)|`` on ``ts`` (general families only)."""
        out = {}
        for name in ("phi", "psi_or_r"):
            node = getattr(self, name)
            if node is not None:
                out[name] = max(abs(ex.eval_expr(node, t=t, x=0.0, mu=0.0)) for t in ts)
        return out


def eval_rhs(field: FieldSpec, t: float, x: float) -> float:
    """Checked evaluation of ``G(t, x, mu)``; raises NonFiniteResult with a node path."""
    fn = field.rhs()
    try:
        value = fn(t, x)
        if math.isfinite(value):
            return value
    except (ArithmeticError, ValueError):
        pass
    return ex.eval_expr(field.as_expression(), t=t, x=x, mu=field.mu)


# -- finite differences ------------------------------------------------------

MAX_ORDER = 8
_EPS = sys.float_info.epsilon


@lru_cache(maxsize=None)
def fd_weights(order: int) -> tuple:
    """Central-difference weights on offsets ``-k..k`` for the ``order``-th derivative.

    The stencil is the smallest symmetric one, giving an error expansion in
    even powers of the step ``h``; derivative = sum(w_j f(x + j h)) / h**order.
    """
    if order < 0 or order > MAX_ORDER:
        raise ValueError(f"derivative order must be in [0, {MAX_ORDER}], got {order}")
    k = (order + 1) // 2
    offsets = list(range(-k, k + 1))
    size = len(offsets)
    # Vandermonde system sum_j w_j j^q = q! delta_{q,order}
    rows = [[Fraction(j) ** q for j in offsets] + [Fraction(math.factorial(order) if q == order else 0)]
            for q in range(size)]
    for col in range(size):
        pivot = next(r for r in range(col, size) if rows[r][col] != 0)
        rows[col], rows[pivot] = rows[pivot], rows[col]
        pv = rows[col][col]
        rows[col] = [v / pv for v in rows[col]]
        for r in range(size):
            if r != col and rows[r][col] != 0:
                factor = rows[r][col]
                rows[r] = [a - factor * b for a, b in zip(rows[r], rows[col])]
    return tuple((j, float(rows[i][-1])) for i, j in enumerate(offsets) if rows[i][-1] != 0)


def _stencil_value(fn, t, x_order, mu_order, h):
    total = 0.0
    for i, wi in fd_weights(x_order):
        for j, wj in fd_weights(mu_order):
            total += wi * wj * fn(t, i * h, j * h)
    return total / h ** (x_order + mu_order)


def partial_derivative(fn: Callable[[float, float, float], float], t: float,
                       x_order: int, mu_order: int, step: Optional[float] = None,
                       levels: int = 3) -> tuple[float, float]:
    """``d^(x_order+mu_order) G / dx^x_order dmu^mu_order`` at ``(t, 0, 0)``.

    Central stencils at steps h, h/2, h/4 combined by Richardson
    extrapolation; returns ``(value, error_estimate)``.
    """
    p = x_order + mu_order
    if p == 0:
        return fn(t, 0.0, 0.0), 0.0
    h = step if step is not None else max(abs(t), 1.0) * _EPS ** (1.0 / (p + 2))
    smallest = h / 2 ** (levels - 1)
    if smallest <= 0 or smallest ** p < 1e-280:
        raise StencilUnderflow(f"step {smallest!r} too small for a derivative of order {p}")
    table = [_stencil_value(fn, t, x_order, mu_order, h / 2 ** k) for k in range(levels)]
    err = 0.0
    factor = 4.0
    while len(table) > 1:
        nxt = [(factor * table[k + 1] - table[k]) / (factor - 1) for k in range(len(table) - 1)]
        err = abs(nxt[-1] - table[-1])
        table = nxt
        factor *= 4.0
    return table[0], err


@dataclass(frozen=True)
class CoefficientEstimate:
    t: float
    f_hat: float
    g_hat: float
    f_err: float
    g_err: float


def extract_coefficients(G, m: int, n: int, family_hint: str,
                         t_samples: Sequence[float], step: Optional[float] = None) -> list[CoefficientEstimate]:
    """Recover ``f(t)`` and ``g(t)`` of a black-box field at each sample time.

    SN: ``f = d^(2m-1)G/dmu^(2m-1) / (2m-1)!``, ``g = -d^(2n)G/dx^(2n) / (2n)!``.
    TC: ``f = C(2m, 2m-1) d^(2m)G/dx dmu^(2m-1) / (2m)!``, ``g`` as for SN.
    All derivatives are taken at ``(t, 0, 0)``.
    """
    G = _as_expr(G)
    hint = family_hint.upper()
    if hint not in ("SN", "TC"):
        raise ValueError(f"family_hint must be 'SN' or 'TC', got {family_hint!r}")
    if max(2 * m - (0 if hint == "TC" else 1), 2 * n) > MAX_ORDER:
        raise ValueError(f"derivative order above {MAX_ORDER} not supported")
    raw = ex.compile_expr(G)

    def fn(t, x, mu):
        try:
            value = raw(t, x, mu)
            if math.isfinite(value):
                return value
        except (ArithmeticError, ValueError):
            pass
        return ex.eval_expr(G, t, x, mu)

    out = []
    for t in t_samples:
        t = float(t)
        if hint == "SN":
            d, e = partial_derivative(fn, t, 0, 2 * m - 1, step)
            scale = 1.0 / math.factorial(2 * m - 1)
        else:
            d, e = partial_derivative(fn, t, 1, 2 * m - 1, step)
            scale = math.comb(2 * m, 2 * m - 1) / math.factorial(2 * m)
        dg, eg = partial_derivative(fn, t, 2 * n, 0, step)
        gscale = 1.0 / math.factorial(2 * n)
        out.append(CoefficientEstimate(t, scale * d, -gscale * dg, scale * e, gscale * eg))
    return out


__all__ += ["NonFiniteResult"]
