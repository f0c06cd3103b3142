"""Model field, fast-subsystem eigen data, slow-manifold utilities."""

import numpy as np
import pytest

from fhnverify.errors import ComplexOrDegenerate, NewtonDiverged
from fhnverify.fhn import (
    FhnField,
    FhnParams,
    PhasePoint,
    cubic_deriv_float,
    cubic_float,
    eigen2x2,
    fast_linearization,
    jacobian,
    slow_manifold_u,
    slow_manifold_w,
    vector_field,
)
from fhnverify.intervals import Interval, IntervalMatrix, IntervalVector

I = Interval


@pytest.fixture
def params():
    return FhnParams(epsilon=I(0, 1.5e-4))


def test_origin_is_equilibrium(params):
    f = vector_field(PhasePoint.of(0, 0, 0), params)
    for i in range(3):
        assert f[i] == I(0)


def test_cubic_root_at_one(params):
    f = vector_field(PhasePoint.of(1, 0, 0), params)
    assert f[0] == I(0)
    assert f[1] == I(0)
    # third component is eps/theta * 1
    et = params.epsilon / params.theta
    assert f[2].contains(et) and f[2].width <= et.width * 1.0001 + 1e-18


def test_vector_field_matches_float_oracle(params):
    rng = np.random.default_rng(3)
    field = FhnField(params.with_epsilon(1e-4))
    for _ in range(50):
        x = rng.uniform(-1, 1, 3)
        f_iv = field.eval_iv(IntervalVector(x))
        f_np = field.eval_np(x)
        for i in range(3):
            assert abs(f_iv[i].mid - f_np[i]) < 1e-12
            assert f_iv[i].width < 1e-12


def test_jacobian_structure(params):
    J = jacobian(PhasePoint.of(0, 0, 0), params)
    assert J[0, 0] == I(0) and J[0, 1] == I(1) and J[0, 2] == I(0)
    # dv'/dv = gamma*theta = 0.122
    assert J[1, 1].contains(0.122) and J[1, 1].width < 1e-15
    # dv'/du at u=0: -gamma*g'(0) = 0.02
    assert J[1, 0].contains(0.02) and J[1, 0].width < 1e-15
    et = params.epsilon / params.theta
    assert J[2, 0].contains(et)
    assert J[2, 2].contains(-et)


def test_jacobian_finite_differences():
    p = FhnParams(epsilon=1e-4)
    field = FhnField(p)
    rng = np.random.default_rng(11)
    h = 1e-6
    for _ in range(20):
        x = rng.uniform(-0.5, 1.0, 3)
        J = jacobian(IntervalVector(x), p)
        for j in range(3):
            e = np.zeros(3)
            e[j] = h
            col = (field.eval_np(x + e) - field.eval_np(x - e)) / (2 * h)
            for i in range(3):
                assert abs(J[i, j].mid - col[i]) < 1e-6


def test_fast_linearization_values(params):
    M = fast_linearization(I(-0.10841296), params)
    assert M[0, 0] == I(0) and M[0, 1] == I(1)
    expected = -0.2 * cubic_deriv_float(-0.10841296)
    assert abs(M[1, 0].mid - expected) < 1e-15
    assert abs(M[1, 0].mid - 0.074754) < 1e-5
    assert abs(M[1, 1].mid - 0.122) < 1e-15

    M0 = fast_linearization(I(0), params)
    assert abs(M0[1, 0].mid - 0.02) < 1e-15


def test_fast_linearization_trace_det(params):
    rng = np.random.default_rng(5)
    for _ in range(20):
        u = rng.uniform(-0.5, 1.2)
        M = fast_linearization(I(u), params)
        tr = M[0, 0] + M[1, 1]
        det = M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
        assert abs(tr.mid - 0.122) < 1e-14
        assert abs(det.mid - 0.2 * cubic_deriv_float(u)) < 1e-14


# paper's printed eigen slopes at the four corner points
CORNER_SLOPES = {
    -0.10841296: (0.34113340, -0.21913340),
    0.97034558: (0.46313340, -0.34113340),
    0.84174629: (0.34113340, -0.21913340),
    -0.23701225: (0.46313340, -0.34113340),
}


@pytest.mark.parametrize("u,slopes", sorted(CORNER_SLOPES.items()))
def test_eigen_slopes_at_corner_points(u, slopes, params):
    lam_u, lam_s, V = eigen2x2(fast_linearization(I(u), params))
    assert abs(lam_u.mid - slopes[0]) < 1e-6
    assert abs(lam_s.mid - slopes[1]) < 1e-6
    # eigenvector shape (1, lambda)
    assert V[0, 0] == I(1) and V[0, 1] == I(1)
    assert abs(V[1, 0].mid - lam_u.mid) < 1e-12
    assert abs(V[1, 1].mid - lam_s.mid) < 1e-12


def test_eigen_diagonal():
    lam_u, lam_s, V = eigen2x2(IntervalMatrix([[I(2), I(0)], [I(0), I(-1)]]))
    assert lam_u == I(2) and lam_s == I(-1)
    assert V[0, 0] == I(1) and V[1, 0] == I(0)
    assert V[0, 1] == I(0) and V[1, 1] == I(1)


def test_eigen_complex_rejected():
    rot = IntervalMatrix([[I(0), I(-1)], [I(1), I(0)]])
    with pytest.raises(ComplexOrDegenerate):
        eigen2x2(rot)


def test_eigen_residual_thin(params):
    rng = np.random.default_rng(9)
    for _ in range(10):
        # saddle branches only; the middle branch has complex eigenvalues
        u = rng.choice([rng.uniform(-0.4, 0.0), rng.uniform(0.75, 1.1)])
        M = fast_linearization(I(u), params)
        lam_u, lam_s, V = eigen2x2(M)
        Mf = M.mid()
        for lam, col in ((lam_u, 0), (lam_s, 1)):
            vec = np.array([V[0, col].mid, V[1, col].mid])
            res = Mf @ vec - lam.mid * vec
            assert np.max(np.abs(res)) < 1e-10


def test_slow_manifold_paper_points():
    assert abs(slow_manifold_w(-0.10841296) - 0.025044220) < 1e-8
    assert abs(slow_manifold_w(0.84174629) - 0.098807631) < 1e-8


def test_slow_manifold_solve_branches():
    u = slow_manifold_u(0.0, branch="lower")
    assert abs(u) < 1e-12
    u = slow_manifold_u(0.025044220, branch="upper")
    assert abs(u - 0.97034558) < 1e-7
    u = slow_manifold_u(0.098807631, branch="lower")
    assert abs(u - (-0.23701225)) < 1e-7


def test_slow_manifold_round_trip():
    for u0 in (-0.3, -0.15, 0.8, 0.95, 1.05):
        w = slow_manifold_w(u0)
        u1 = slow_manifold_u(w, guess=u0 + 1e-4)
        assert abs(u1 - u0) < 1e-10


def test_slow_manifold_divergence():
    with pytest.raises(NewtonDiverged):
        # a far target with a tight iteration budget cannot converge
        slow_manifold_u(2.0, guess=0.05, max_iter=3)


def test_third_component_sign(params):
    p = params.with_epsilon(I(1e-6, 1e-4))
    x = PhasePoint.of(I(0.9, 0.95), I(-0.01, 0.01), I(0.02, 0.03))
    f = vector_field(x, p)
    assert f[2].lo > 0  # u - w > 0 on this box and eps.lo > 0


def test_batch_matches_scalar(params):
    field = FhnField(params)
    rng = np.random.default_rng(2)
    lo = rng.uniform(-1, 1, (40, 3))
    hi = lo + rng.uniform(0, 0.01, (40, 3))
    blo, bhi = field.eval_batch(lo, hi)
    for i in range(40):
        f = field.eval_iv(IntervalVector(lo[i], hi[i]))
        for j in range(3):
            assert blo[i, j] <= f[j].lo + 1e-15
            assert bhi[i, j] >= f[j].hi - 1e-15
            assert abs(blo[i, j] - f[j].lo) < 1e-10
            assert abs(bhi[i, j] - f[j].hi) < 1e-10


def test_negated_field(params):
    field = FhnField(params.with_epsilon(1e-4))
    neg = field.negated()
    x = IntervalVector([0.5, 0.1, 0.03])
    f = field.eval_iv(x)
    g = neg.eval_iv(x)
    for i in range(3):
        assert g[i] == -f[i]
    assert neg.negated() is field
