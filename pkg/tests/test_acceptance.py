"""Acceptance criteria, one test group per criterion.

The terminal summary lists one PASS/FAIL line per criterion (see conftest.py).
"""

import math
import random
import time

import pytest

from nonauto_bif.attractor_lab import forwards_attraction, pullback_limit, repeller_orbit
from nonauto_bif.bifurcation_sweep import ATTRACTOR_REPELLER_PAIR, classify_mu
from nonauto_bif.cli import execute
from nonauto_bif.errors import NonFiniteResult
from nonauto_bif.expr import FUNCTIONS, BinOp, Call, Neg, Num, Var, eval_expr, parse_expr, to_source
from nonauto_bif.field_model import CoefficientFunction, Family, FieldSpec, extract_coefficients
from nonauto_bif.hypothesis_check import check_sn_concrete, check_tc_concrete
from nonauto_bif.integrator import BlowUp, Tolerance, advance, detect_blowup, process
from nonauto_bif.oracles import attractor_orbit_tc, exact_mu0_sn, repeller_orbit_tc
from nonauto_bif.scenario import load_scenario

F2 = CoefficientFunction("t^2", "t^3/3")
G2 = CoefficientFunction("2*t^2")
HORIZONS = (1e2, 1e3, 1e4)


def ex1(mu):
    return FieldSpec(Family.CONCRETE_SN, m=2, n=2, mu=mu, f=F2, g=G2)


def ex2(mu):
    return FieldSpec(Family.CONCRETE_TC, m=2, n=3, mu=mu, f=F2, g=G2)


def report(number, ok, detail):
    print(f"criterion {number} {'PASS' if ok else 'FAIL'}: {detail}")


# -- 1 ------------------------------------------------------------------------------

@pytest.mark.criterion(1, "integrator matches the mu=0 closed form (50 draws, rel 1e-6, < 5 s)")
def test_c1_oracle_equivalence():
    rng = random.Random(1)
    field = ex1(0.0)
    worst = 0.0
    start = time.perf_counter()
    for _ in range(50):
        s, t = sorted(rng.uniform(-5.0, 5.0) for _ in range(2))
        x0 = rng.uniform(0.01, 5.0)
        got = advance(field, s, x0, t).x_end
        exact = exact_mu0_sn(2, G2, s, t, x0)
        worst = max(worst, abs(got - exact) / abs(exact))
    elapsed = time.perf_counter() - start
    report(1, worst <= 1e-6 and elapsed < 5.0, f"worst rel err {worst:.2e}, {elapsed:.2f} s")
    assert worst <= 1e-6
    assert elapsed < 5.0


# -- 2 ------------------------------------------------------------------------------

@pytest.mark.criterion(2, "blow-up time 2^(-1/3) +- 1e-4 for x0=-1")
def test_c2_blowup_fixture():
    out = detect_blowup(ex1(0.0), 0.0, -1.0, 10.0)
    assert isinstance(out, BlowUp)
    err = abs(out.t_star - 2 ** (-1 / 3))
    report(2, err <= 1e-4, f"t* = {out.t_star!r}, error {err:.2e}")
    assert err <= 1e-4


# -- 3 ------------------------------------------------------------------------------

@pytest.mark.criterion(3, "saddle-node pair +-(mu^3/2)^(1/4) within 1e-3, < 30 s")
def test_c3_saddle_node_structure():
    start = time.perf_counter()
    rows = []
    for mu in (0.25, 0.5, 1.0):
        amp = (mu ** 3 / 2) ** 0.25
        att = pullback_limit(ex1(mu), 0.0, 1.0).limit
        rep = repeller_orbit(ex1(mu), 0.0, 0.0).limit
        kind = classify_mu(ex1(mu)).kind
        rows.append((mu, att, rep, kind))
        assert att == pytest.approx(amp, abs=1e-3)
        assert rep == pytest.approx(-amp, abs=1e-3)
        assert kind == ATTRACTOR_REPELLER_PAIR
    elapsed = time.perf_counter() - start
    report(3, elapsed < 30.0, f"{rows}, {elapsed:.2f} s")
    assert elapsed < 30.0


# -- 4 ------------------------------------------------------------------------------

@pytest.mark.criterion(4, "transcritical orbits 2^(-1/5) within 1e-4 and zero stability exchange")
@pytest.mark.parametrize("t", [-2.0, 0.0, 2.0])
def test_c4_attractor_orbit(t):
    x = attractor_orbit_tc(2, 3, 1.0, F2, G2, t)
    report(4, abs(x - 2 ** -0.2) <= 1e-4, f"attractor_orbit_tc({t}) = {x!r}")
    assert x == pytest.approx(2 ** -0.2, abs=1e-4)


@pytest.mark.criterion(4, "transcritical orbits 2^(-1/5) within 1e-4 and zero stability exchange")
def test_c4_repeller_orbit():
    x = repeller_orbit_tc(2, 3, -1.0, F2, G2, 0.0)
    report(4, abs(x - 2 ** -0.2) <= 1e-4, f"repeller_orbit_tc(0) = {x!r}")
    assert x == pytest.approx(2 ** -0.2, abs=1e-4)


@pytest.mark.criterion(4, "transcritical orbits 2^(-1/5) within 1e-4 and zero stability exchange")
def test_c4_zero_stability():
    unstable = forwards_attraction(ex2(1.0), 0.0, 0.01, 0.0, 50.0).verdict
    pull = pullback_limit(ex2(-0.5), 0.0, 0.5)
    ok = unstable == "NotAttracting" and pull.converged_to_zero()
    report(4, ok, f"mu=1 forwards {unstable}; mu=-0.5 pullback {pull.verdict} -> {pull.limit!r}")
    assert unstable == "NotAttracting"
    assert pull.converged_to_zero()


# -- 5 ------------------------------------------------------------------------------

@pytest.mark.criterion(5, "attractor x_mu(0) decreases with mu and obeys the mu^(3/5) law")
def test_c5_small_mu_limit():
    mus = (1.0, 0.5, 0.25, 0.125)
    exact = [attractor_orbit_tc(2, 3, mu, F2, G2, 0.0) for mu in mus]
    numeric = [pullback_limit(ex2(mu), 0.0, 1.0).limit for mu in mus]
    bounds = [2 ** -0.2 * mu ** 0.6 * 1.01 for mu in mus]
    for values in (exact, numeric):
        assert all(b < a for a, b in zip(values, values[1:]))
        assert all(v < cap for v, cap in zip(values, bounds))
    report(5, True, f"closed form {exact}, pullback {numeric}")


# -- 6 ------------------------------------------------------------------------------

TOL = Tolerance(1e-9, 1e-12)
ORDER_TOL = Tolerance(1e-12, 1e-12)


def _families(rng):
    return rng.choice([ex1(rng.uniform(0.1, 1.0)), ex2(rng.uniform(-1.0, 1.0))])


@pytest.mark.criterion(6, "process identity, cocycle (10 tol) and order preservation")
def test_c6_identity():
    rng = random.Random(6)
    for _ in range(100):
        field, s, x0 = _families(rng), rng.uniform(-3, 3), rng.uniform(-2, 2)
        assert process(field, s, s, x0) == x0
    report(6, True, "identity exact on 100 draws")


@pytest.mark.criterion(6, "process identity, cocycle (10 tol) and order preservation")
def test_c6_cocycle():
    rng = random.Random(7)
    worst, count = 0.0, 0
    while count < 100:
        field = _families(rng)
        s = rng.uniform(-2, 2)
        r = s + rng.uniform(0.01, 2)
        t = r + rng.uniform(0.01, 2)
        x0 = rng.uniform(-1.5, 1.5)
        mid = process(field, r, s, x0, TOL)
        direct = process(field, t, s, x0, TOL)
        if isinstance(mid, BlowUp) or isinstance(direct, BlowUp):
            continue
        composed = process(field, t, r, mid, TOL)
        bound = 10 * (TOL.rel * max(1.0, abs(direct)) + TOL.abs)
        worst = max(worst, abs(direct - composed) / bound)
        count += 1
    report(6, worst <= 1.0, f"cocycle residual / (10 tol): worst {worst:.3f} on 100 triples")
    assert worst <= 1.0


def _escape_order_broken(lo, hi):
    """Ordered data: the lower solution reaches -inf first, the upper one +inf first."""
    lo_down = isinstance(lo, BlowUp) and lo.sign < 0
    hi_up = isinstance(hi, BlowUp) and hi.sign > 0
    if isinstance(hi, BlowUp) and hi.sign < 0:
        return not lo_down or lo.t_star > hi.t_star + 1e-6
    if isinstance(lo, BlowUp) and lo.sign > 0:
        return not hi_up or hi.t_star > lo.t_star + 1e-6
    return False


@pytest.mark.criterion(6, "process identity, cocycle (10 tol) and order preservation")
@pytest.mark.parametrize("family", ["SN", "TC"])
def test_c6_order_preservation(family):
    rng = random.Random(8 if family == "SN" else 9)
    violations, worst = 0, 0.0
    for _ in range(100):
        field = ex1(rng.uniform(0.1, 1.0)) if family == "SN" else ex2(rng.uniform(-1.0, 1.0))
        s = rng.uniform(-2, 2)
        t = s + rng.uniform(0.01, 3)
        x0 = rng.uniform(-1.5, 1.5)
        x1 = x0 + rng.uniform(1e-6, 1.0)
        lo, hi = process(field, t, s, x0, ORDER_TOL), process(field, t, s, x1, ORDER_TOL)
        if _escape_order_broken(lo, hi):
            violations += 1
        if isinstance(lo, BlowUp) or isinstance(hi, BlowUp):
            continue
        gap = lo - hi
        worst = max(worst, gap)
        if gap > 10 * ORDER_TOL.abs:
            violations += 1
    report(6, violations == 0, f"{family}: {violations} order violations, worst overlap {worst:.2e}")
    assert violations == 0


# -- 7 ------------------------------------------------------------------------------

@pytest.mark.criterion(7, "black-box extraction recovers t^2 and 2t^2 within 1e-4")
@pytest.mark.parametrize("make,hint", [(ex1, "SN"), (ex2, "TC")])
def test_c7_extraction(make, hint):
    box = make(0.0).blackbox()
    est = extract_coefficients(box.G, box.m, box.n, hint, [0.5, 1.0, 2.0])
    worst = max(max(abs(e.f_hat - e.t ** 2) / e.t ** 2, abs(e.g_hat - 2 * e.t ** 2) / (2 * e.t ** 2))
                for e in est)
    report(7, worst <= 1e-4, f"{hint}: worst rel err {worst:.2e}")
    assert worst <= 1e-4


# -- 8 ------------------------------------------------------------------------------

@pytest.mark.criterion(8, "hypothesis audits: examples Supported, counterexamples Violated")
def test_c8_examples_supported():
    sn = check_sn_concrete(F2, G2, HORIZONS)
    tc = check_tc_concrete(F2, G2, 2, 3, horizons=HORIZONS)
    ids = [e.condition_id for e in sn.entries] + [e.condition_id for e in tc.entries]
    ok = sn.supported and tc.supported
    report(8, ok, f"{sn.verdict}/{tc.verdict} on {ids}")
    assert ids == ["eq4", "eq5", "eq16", "eq17", "eq18", "eq19", "eq20", "eq21"]
    assert ok


@pytest.mark.criterion(8, "hypothesis audits: examples Supported, counterexamples Violated")
def test_c8_counterexamples_violated():
    bad_g = check_sn_concrete("1", "exp(-t^2)", HORIZONS).entry("eq5").verdict
    bad_f = check_tc_concrete("1/(1+t^2)", G2, 2, 3, horizons=HORIZONS).entry("eq16").verdict
    report(8, bad_g == bad_f == "Violated", f"eq5 {bad_g}, eq16 {bad_f}")
    assert bad_g == "Violated"
    assert bad_f == "Violated"


# -- 9 ------------------------------------------------------------------------------

@pytest.mark.criterion(9, "bundled sweeps bracket mu_c=0 with width <= 0.13, < 60 s each")
@pytest.mark.parametrize("name,label", [("example1", "SaddleNode"), ("example2", "Transcritical")])
def test_c9_sweeps(name, label):
    start = time.perf_counter()
    result = execute("sweep", load_scenario(name))
    elapsed = time.perf_counter() - start
    data = result.report["result"]
    lo, hi = data["bracket"]
    ok = data["label"] == label and lo <= 0.0 <= hi and hi - lo <= 0.13 and elapsed < 60
    report(9, ok, f"{name}: {result.summary} ({elapsed:.2f} s)")
    assert data["label"] == label
    assert lo <= 0.0 <= hi and hi - lo <= 0.13
    assert elapsed < 60.0


# -- 10 -----------------------------------------------------------------------------

def _random_tree(rng, depth=0):
    if depth >= 4 or rng.random() < 0.3:
        if rng.random() < 0.5:
            return Var(rng.choice(["t", "x", "mu"]))
        return Num(rng.choice([float(rng.randint(0, 9)), round(rng.uniform(0, 100), 3), 2.5e-7]))
    kind = rng.random()
    if kind < 0.15:
        return Neg(_random_tree(rng, depth + 1))
    if kind < 0.3:
        return Call(rng.choice(FUNCTIONS), _random_tree(rng, depth + 1))
    return BinOp(rng.choice("+-*/^"), _random_tree(rng, depth + 1), _random_tree(rng, depth + 1))


def _full_parens(node):
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        return f"(-{_full_parens(node.operand)})"
    if isinstance(node, Call):
        return f"{node.func}({_full_parens(node.arg)})"
    return f"({_full_parens(node.left)}{node.op}{_full_parens(node.right)})"


_PY = {"exp": math.exp, "log": math.log, "sin": math.sin, "cos": math.cos, "tanh": math.tanh,
       "abs": abs, "sqrt": math.sqrt, "__builtins__": {}}


@pytest.mark.criterion(10, "parser round-trip and precedence on 1000 generated expressions")
def test_c10_expression_language():
    rng = random.Random(10)
    compared = 0
    for _ in range(1000):
        tree = _random_tree(rng)
        text = to_source(tree)
        assert parse_expr(text) == tree
        assert parse_expr(_full_parens(tree)) == tree
        env = {"t": rng.uniform(-2, 2), "x": rng.uniform(-2, 2), "mu": rng.uniform(-2, 2)}
        try:
            expected = eval(text.replace("^", "**"), dict(_PY), env)
            got = eval_expr(tree, **env)
        except (ArithmeticError, ValueError, TypeError, NonFiniteResult):
            continue
        if isinstance(expected, complex) or not math.isfinite(expected):
            continue
        assert got == pytest.approx(expected, rel=1e-9, abs=1e-9), text
        compared += 1
    report(10, True, f"1000 round trips, {compared} value comparisons against Python")
    assert compared > 300
