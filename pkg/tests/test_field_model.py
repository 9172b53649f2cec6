import math

import pytest

from nonauto_bif.field_model import (CoefficientFunction, Family, FieldSpec, eval_rhs,
                                     extract_coefficients, fd_weights, partial_derivative)


def example1(mu=1.0):
    return FieldSpec(Family.CONCRETE_SN, m=2, n=2, mu=mu, f="t^2", g="2*t^2")


def example2(mu=1.0):
    return FieldSpec(Family.CONCRETE_TC, m=2, n=3, mu=mu,
                     f=CoefficientFunction("t^2", "t^3/3"), g="2*t^2")


def test_concrete_sn_value():
    assert eval_rhs(example1(), 1.0, 1.0) == -1.0
    assert example1().rhs()(1.0, 1.0) == -1.0


def test_concrete_tc_value():
    # mu^3 t^2 x - 2 t^2 x^6 at t=1, x=2
    assert eval_rhs(example2(), 1.0, 2.0) == pytest.approx(2.0 - 128.0)


def test_general_families():
    sn = FieldSpec(Family.GENERAL_SN, m=1, n=1, mu=0.5, f="1", g="1",
                   phi="mu*x", psi_or_r="x")
    # mu (f + phi) - x^2 (g + psi)
    assert eval_rhs(sn, 0.0, 2.0) == pytest.approx(0.5 * (1 + 1.0) - 4.0 * 3.0)
    tc = FieldSpec(Family.GENERAL_TC, m=1, n=1, mu=0.5, f="1", g="1",
                   phi="x", psi_or_r="x")
    # mu (f + mu phi) x - x^2 (g + r)
    assert eval_rhs(tc, 0.0, 2.0) == pytest.approx(0.5 * (1 + 0.5 * 2.0) * 2.0 - 4.0 * 3.0)


def test_with_mu_and_power():
    f = example1(2.0)
    assert f.mu_power == 8.0
    assert f.with_mu(-1.0).mu_power == -1.0
    assert f.with_mu(-1.0).family is Family.CONCRETE_SN


def test_missing_coefficients_rejected():
    with pytest.raises(ValueError, match="requires"):
        FieldSpec(Family.CONCRETE_SN, f="1")
    with pytest.raises(ValueError, match="requires"):
        FieldSpec(Family.GENERAL_TC, f="1", g="1")
    with pytest.raises(ValueError):
        FieldSpec(Family.BLACKBOX)


def test_bad_exponent_rejected():
    with pytest.raises(ValueError):
        FieldSpec(Family.CONCRETE_SN, m=0, f="1", g="1")
    with pytest.raises(ValueError):
        FieldSpec(Family.CONCRETE_SN, n=1.5, f="1", g="1")


def test_coefficient_depends_on_t_only():
    with pytest.raises(ValueError, match="t only"):
        CoefficientFunction("x + t")


def test_antiderivative_residual():
    cf = CoefficientFunction("t^2", "t^3/3")
    assert cf.antiderivative_residual([-2.0, 0.0, 1.5]) < 1e-8
    assert CoefficientFunction("t^2", "t^3").antiderivative_residual([1.0]) > 0.5


def test_blackbox_matches_structured():
    f = example2(0.7)
    box = f.blackbox()
    assert box.family is Family.BLACKBOX
    for t, x in [(-1.0, 0.3), (0.5, -1.2), (2.0, 0.9)]:
        assert box.rhs()(t, x) == pytest.approx(f.rhs()(t, x), rel=1e-14)


def test_fd_weights_sum_rules():
    for order in range(1, 7):
        w = fd_weights(order)
        # sum_j w_j j^q = q! when q == order and 0 for the lower moments
        for q in range(order + 1):
            moment = sum(wj * j ** q for j, wj in w)
            expected = math.factorial(order) if q == order else 0.0
            assert moment == pytest.approx(expected, abs=1e-9)


def test_partial_derivative_polynomial():
    fn = lambda t, x, mu: x ** 4 + 3 * mu * x  # noqa: E731
    d4, _ = partial_derivative(fn, 0.0, 4, 0)
    assert d4 == pytest.approx(24.0, rel=1e-6)
    dxm, _ = partial_derivative(fn, 0.0, 1, 1)
    assert dxm == pytest.approx(3.0, rel=1e-6)


@pytest.mark.parametrize("field,hint", [(example1(0.0), "SN"), (example2(0.0), "TC")])
def test_extract_recovers_coefficients(field, hint):
    est = extract_coefficients(field.blackbox().G, field.m, field.n, hint, [0.5, 1.0, 2.0])
    for e in est:
        assert e.f_hat == pytest.approx(e.t ** 2, rel=1e-4)
        assert e.g_hat == pytest.approx(2 * e.t ** 2, rel=1e-4)


def test_extract_rejects_bad_hint():
    with pytest.raises(ValueError):
        extract_coefficients("x", 1, 1, "XX", [0.0])


def test_nonfinite_field_value():
    f = FieldSpec(Family.BLACKBOX, G="log(x)")
    with pytest.raises(ArithmeticError):
        eval_rhs(f, 0.0, -1.0)
    assert math.isfinite(eval_rhs(f, 0.0, 1.0))
