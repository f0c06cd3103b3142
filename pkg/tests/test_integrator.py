"""Validated Taylor/Lohner integration against closed forms and oracles."""

import math
from fractions import Fraction

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from fhnverify.errors import RoughEnclosureFailed, StepRejected
from fhnverify.fhn import FhnField, FhnParams, NegatedField
from fhnverify.integrator import (
    EnclosureSet,
    IntegratorConfig,
    LinearField,
    integrate_fixed_time,
    inverse_enclosure,
    rough_enclosure,
    step,
    taylor_coefficients,
)
from fhnverify.intervals import Interval, IntervalMatrix, IntervalVector

I = Interval

E_TIGHT = Interval.from_decimal("2.71828182845904523536028747135266")
E_INV_TIGHT = Interval.from_decimal("0.36787944117144232159552377016146")


class QuadField1D:
    """x' = x^2; solution from 1 is 1/(1-t), all Taylor coefficients 1."""

    dim = 1

    def eval_iv(self, x):
        return IntervalVector([x[0] * x[0]])

    def jac_iv(self, x):
        return IntervalMatrix([[x[0] * 2]])

    def eval_np(self, x):
        return x**2

    def jac_np(self, x):
        return np.array([[2.0 * x[0]]])

    def series_coeff(self, series, k, scratch):
        from fhnverify._jets import tconv

        xs = [series[j][0] for j in range(k + 1)]
        return (tconv(xs, xs, k),)

    def dfx_series_coeff(self, series, k, scratch):
        from fhnverify._jets import tmul

        return [(0, 0, tmul((2.0, 2.0), series[k][0]))]

    def negated(self):
        return NegatedField(self)


def thin_set(point) -> EnclosureSet:
    return EnclosureSet.from_box(IntervalVector(np.asarray(point, dtype=float)))


def test_taylor_coefficients_exponential():
    coeffs = taylor_coefficients(LinearField([[1.0]]), IntervalVector([1.0]), 4)
    for k, c in enumerate(coeffs):
        exact = Fraction(1, math.factorial(k))
        assert Fraction(c[0].lo) <= exact <= Fraction(c[0].hi)
        assert c[0].width < 1e-15


def test_taylor_coefficients_geometric():
    coeffs = taylor_coefficients(QuadField1D(), IntervalVector([1.0]), 6)
    for c in coeffs:
        assert c[0].contains(1.0) and c[0].width < 1e-12


def test_taylor_coefficients_fhn_equilibrium():
    field = FhnField(FhnParams(epsilon=I(0, 1.5e-4)))
    coeffs = taylor_coefficients(field, IntervalVector([0.0, 0.0, 0.0]), 8)
    for c in coeffs[1:]:
        for i in range(3):
            assert c[i].contains(0.0) and c[i].width < 1e-14


def test_rough_enclosure_zero_field():
    cfg = IntegratorConfig()
    x = IntervalVector([I(1, 2), I(-1, 0)])
    Z = rough_enclosure(LinearField(np.zeros((2, 2))), x, 0.5, cfg)
    assert Z.contains(x)
    assert float(np.max(Z.width() - x.width())) < 1e-14  # Z = x up to rounding


def test_rough_enclosure_exponential():
    cfg = IntegratorConfig()
    Z = rough_enclosure(LinearField([[1.0]]), IntervalVector([1.0]), 0.1, cfg)
    assert Z[0].lo >= 1.0 - 1e-12 and Z[0].hi <= 1.2
    # Picard containment holds for e^{0.1} = 1.105...
    assert Z[0].hi >= math.exp(0.1) - 1e-9 or Z[0].hi >= 1.105


def test_rough_enclosure_failure():
    cfg = IntegratorConfig()
    with pytest.raises(RoughEnclosureFailed):
        rough_enclosure(LinearField([[1.0]]), IntervalVector([1.0]), 50.0, cfg)


def test_step_rejected_below_h_min():
    cfg = IntegratorConfig(h_min=10.0, h_max=100.0, trial_step=50.0)
    with pytest.raises(StepRejected):
        step(LinearField([[1.0]]), thin_set([1.0]), cfg, h=50.0)


def test_exponential_encloses_e():
    cfg = IntegratorConfig(order=12, trial_step=1.0 / 16.0, h_max=1.0 / 16.0)
    fe = integrate_fixed_time(LinearField([[1.0]]), thin_set([1.0]), 1.0, cfg)
    out = fe.at_end.hull()[0]
    assert out.contains(E_TIGHT)
    assert out.width <= 1e-10


def test_exponential_decay_encloses_inv_e():
    cfg = IntegratorConfig()
    fe = integrate_fixed_time(LinearField([[-1.0]]), thin_set([1.0]), 1.0, cfg)
    out = fe.at_end.hull()[0]
    assert out.contains(E_INV_TIGHT)
    assert out.width <= 1e-10


def test_harmonic_oscillator_period():
    cfg = IntegratorConfig(order=14, h_max=0.25)
    field = LinearField([[0.0, 1.0], [-1.0, 0.0]])
    fe = integrate_fixed_time(field, thin_set([1.0, 0.0]), 2 * math.pi, cfg)
    out = fe.at_end.hull()
    assert out[0].contains(1.0) and out[1].contains(0.0)
    assert out.max_width() <= 1e-8


def test_zero_field_integration_identity():
    cfg = IntegratorConfig()
    s = EnclosureSet.from_box(IntervalVector([I(1, 2), I(-1, 1)]))
    fe = integrate_fixed_time(LinearField(np.zeros((2, 2))), s, 5.0, cfg)
    out = fe.at_end.hull()
    ref = s.hull()
    assert out.contains(ref)
    assert float(np.max(out.width() - ref.width())) < 1e-12


def test_c1_scalar_linear_derivative():
    cfg = IntegratorConfig()
    a = 0.122
    fe = integrate_fixed_time(LinearField([[a]]), thin_set([1.0]), 1.0, cfg, mode="C1")
    d = fe.derivative[0, 0]
    assert d.contains(math.exp(a))
    assert d.width < 1e-10


def test_semigroup_containment():
    cfg = IntegratorConfig()
    field = LinearField([[1.0]])
    T1, T2 = 0.3, 0.7
    one = integrate_fixed_time(field, thin_set([1.0]), T1 + T2, cfg)
    two_a = integrate_fixed_time(field, thin_set([1.0]), T1, cfg)
    two_b = integrate_fixed_time(field, two_a.at_end, T2, cfg)
    exact = E_TIGHT  # e^{1.0}
    assert one.at_end.hull()[0].contains(exact)
    assert two_b.at_end.hull()[0].contains(exact)


def test_backward_forward_reencloses():
    cfg = IntegratorConfig()
    field = FhnField(FhnParams(epsilon=1e-4))
    x0 = np.array([0.4, 0.1, 0.05])
    fwd = integrate_fixed_time(field, thin_set(x0), 1.0, cfg)
    back = integrate_fixed_time(field, fwd.at_end, 1.0, cfg, direction="backward")
    assert back.at_end.hull().contains(IntervalVector(x0))


def test_backward_is_negated_forward():
    cfg = IntegratorConfig()
    field = LinearField([[1.0]])
    b = integrate_fixed_time(field, thin_set([1.0]), 1.0, cfg, direction="backward")
    assert b.at_end.hull()[0].contains(E_INV_TIGHT)


def test_fhn_matches_rk_oracle():
    p = FhnParams(epsilon=1e-3)
    field = FhnField(p)
    cfg = IntegratorConfig()
    x0 = np.array([0.5, 0.0, 0.05])
    fe = integrate_fixed_time(field, thin_set(x0), 1.0, cfg)
    sol = solve_ivp(
        lambda t, y: field.eval_np(y),
        (0, 1.0),
        x0,
        method="DOP853",
        rtol=1e-12,
        atol=1e-14,
    )
    ref = sol.y[:, -1]
    out = fe.at_end.hull()
    # the oracle itself carries ~1e-13 error, wider than the rigorous hull
    assert np.max(np.abs(out.mid() - ref)) < 1e-8


def test_c1_fhn_finite_differences():
    p = FhnParams(epsilon=1e-3)
    field = FhnField(p)
    cfg = IntegratorConfig()
    rng = np.random.default_rng(17)
    T = 0.5
    for _ in range(20):
        x0 = rng.uniform([-0.3, -0.2, 0.0], [1.0, 0.2, 0.1])
        fe = integrate_fixed_time(field, thin_set(x0), T, cfg, mode="C1")
        h = 1e-5
        for j in range(3):
            e = np.zeros(3)
            e[j] = h
            up = solve_ivp(lambda t, y: field.eval_np(y), (0, T), x0 + e,
                           method="DOP853", rtol=1e-12, atol=1e-14).y[:, -1]
            dn = solve_ivp(lambda t, y: field.eval_np(y), (0, T), x0 - e,
                           method="DOP853", rtol=1e-12, atol=1e-14).y[:, -1]
            fd = (up - dn) / (2 * h)
            for i in range(3):
                d = fe.derivative[i, j]
                assert abs(d.mid - fd[i]) < 1e-6
                assert d.width < 1e-6


def test_splitting_refines_enclosure():
    from fhnverify.intervals import split_box

    p = FhnParams(epsilon=1e-3)
    field = FhnField(p)
    cfg = IntegratorConfig()
    box = IntervalVector.from_box([0.5, 0.0, 0.05], 0.01)
    whole = integrate_fixed_time(field, EnclosureSet.from_box(box), 1.0, cfg)
    pieces = split_box(box, 2)
    hulls = None
    for piece in pieces:
        fe = integrate_fixed_time(field, EnclosureSet.from_box(piece), 1.0, cfg)
        h = fe.at_end.hull()
        hulls = h if hulls is None else hulls.hull(h)
        # oracle point from this piece stays inside its enclosure
        mid = piece.mid()
        ref = solve_ivp(lambda t, y: field.eval_np(y), (0, 1.0), mid,
                        method="DOP853", rtol=1e-12, atol=1e-14).y[:, -1]
        assert h.contains(IntervalVector(ref))
    assert whole.at_end.hull().contains(hulls)


def test_inverse_enclosure():
    A = np.array([[2.0, 1.0], [1.0, 3.0]])
    inv = inverse_enclosure(IntervalMatrix(A))
    assert inv.contains(np.linalg.inv(A))
    prod = inv.matmul(IntervalMatrix(A))
    assert prod.contains(np.eye(2))


def test_over_step_tube_contains_path():
    cfg = IntegratorConfig(h_max=0.2)
    field = LinearField([[0.0, 1.0], [-1.0, 0.0]])
    fe = step(field, thin_set([1.0, 0.0]), cfg, h=0.2)
    for t in np.linspace(0, fe.step, 10):
        pt = np.array([math.cos(t), -math.sin(t)])
        assert fe.over_step.contains(IntervalVector(pt))
    sub = fe.set_at(0.05, 0.1)
    for t in np.linspace(0.05, 0.1, 5):
        pt = np.array([math.cos(t), -math.sin(t)])
        assert sub.contains(IntervalVector(pt))
