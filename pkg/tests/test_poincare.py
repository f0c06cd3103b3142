"""Section crossings: closed-form flows, FHN oracle agreement, derivatives."""

import math

import numpy as np
import pytest

from fhnverify.errors import NoCrossing, TransversalityLost
from fhnverify.fhn import FhnField, FhnParams
from fhnverify.integrator import EnclosureSet, IntegratorConfig, LinearField
from fhnverify.intervals import Interval, IntervalVector, split_box
from fhnverify.poincare import (
    AffineSection,
    CrossingReport,
    nonrigorous_poincare,
    rigorous_poincare,
    section_value,
)

I = Interval
CFG = IntegratorConfig()


class TranslationField:
    """x' = (1, 0, 0)."""

    dim = 3

    def eval_iv(self, x):
        return IntervalVector([I(1), I(0), I(0)])

    def jac_iv(self, x):
        from fhnverify.intervals import IntervalMatrix

        return IntervalMatrix(np.zeros((3, 3)))

    def eval_np(self, x):
        out = np.zeros_like(x)
        out[..., 0] = 1.0
        return out

    def jac_np(self, x):
        return np.zeros((3, 3))

    def series_coeff(self, series, k, scratch):
        if k == 0:
            return ((1.0, 1.0), (0.0, 0.0), (0.0, 0.0))
        return ((0.0, 0.0), (0.0, 0.0), (0.0, 0.0))

    def dfx_series_coeff(self, series, k, scratch):
        return []

    def negated(self):
        from fhnverify.fhn import NegatedField

        return NegatedField(self)


ROTATION = LinearField([[0.0, 1.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])


def test_section_value_cases():
    sec = AffineSection([0.0, 0.0, 0.05], [0.0, 0.0, 1.0])
    assert sec.section_value(np.array([0.3, 0.2, 0.05])) == I(0)
    box = IntervalVector([I(0, 1), I(0, 1), I(0.04, 0.06)])
    sv = sec.section_value(box)
    # [-0.01, 0.01] up to the decimals' rounding
    assert sv.lo <= -0.00999999999 and sv.hi >= 0.00999999999
    assert sv.width < 0.021


def test_section_value_sign_oracle():
    rng = np.random.default_rng(4)
    sec = AffineSection(rng.uniform(-1, 1, 3), rng.uniform(-1, 1, 3))
    for _ in range(100):
        x = rng.uniform(-2, 2, 3)
        sv = sec.section_value(x)
        ref = sec.section_value_np(x)
        assert abs(sv.mid - ref) < 1e-12
        if abs(ref) > 1e-10:
            assert (sv.lo > 0) == (ref > 0) or (sv.hi < 0) == (ref < 0)


def test_translation_flow_image_and_time():
    field = TranslationField()
    target = AffineSection([1.0, 0.0, 0.0], [1.0, 0.0, 0.0])
    start = IntervalVector([I(0), I(0.2, 0.3), I(-0.1, 0.1)])
    rep = rigorous_poincare(field, start, target, CFG, crossing_sign=1)
    assert rep.time.contains(1.0) and rep.time.width < 1e-8
    # image in section coordinates preserves (v, w)
    img3 = rep.box3d
    assert img3[1].contains(I(0.2, 0.3))
    assert img3[2].contains(I(-0.1, 0.1))
    assert img3[1].width < 0.1 + 1e-6


def test_rotation_full_return():
    target = AffineSection([1.0, 0.0, 0.0], [0.0, 1.0, 0.0])
    start = IntervalVector(np.array([1.0, 0.0, 0.0]))
    # flow from (1,0): y(t) = -sin t, so the return crossing has <n,f> < 0
    rep = rigorous_poincare(ROTATION, start, target, CFG, crossing_sign=-1,
                            time_hint=2 * math.pi)
    assert rep.time.contains(2 * math.pi)
    assert rep.box3d[0].contains(1.0)
    assert rep.box3d[0].width < 1e-8


def test_rotation_skips_wrong_direction_crossing():
    # the half-turn crossing at t=pi has positive transversality and is skipped
    target = AffineSection([1.0, 0.0, 0.0], [0.0, 1.0, 0.0])
    start = IntervalVector(np.array([1.0, 0.0, 0.0]))
    rep = rigorous_poincare(ROTATION, start, target, CFG, crossing_sign=-1,
                            time_hint=2 * math.pi)
    assert rep.time.lo > math.pi


def test_no_crossing_raises():
    field = TranslationField()
    target = AffineSection([-1.0, 0.0, 0.0], [1.0, 0.0, 0.0])
    start = IntervalVector(np.array([0.0, 0.0, 0.0]))
    with pytest.raises(NoCrossing):
        rigorous_poincare(field, start, target, CFG, crossing_sign=1, max_time=5.0)


def test_transversality_lost_on_tangency():
    # flow parallel to the target plane from a box touching it
    field = TranslationField()
    target = AffineSection([0.0, 0.25, 0.0], [0.0, 1.0, 0.0])
    start = IntervalVector([I(0), I(0.2, 0.3), I(0)])
    with pytest.raises((TransversalityLost, NoCrossing)):
        rigorous_poincare(field, start, target, CFG, crossing_sign=1, max_time=3.0)


def test_nonrigorous_translation_derivative_identity():
    field = TranslationField()
    target = AffineSection([1.0, 0.0, 0.0], [1.0, 0.0, 0.0])
    img, t, D, xc = nonrigorous_poincare(
        field, np.array([0.0, 0.25, 0.05]), target, crossing_sign=1, with_derivative=True
    )
    assert abs(t - 1.0) < 1e-10
    assert np.allclose(D, np.eye(2), atol=1e-9)


def test_nonrigorous_saddle_crossing_time():
    lam, mu = 0.7, 0.4
    field = LinearField([[lam, 0.0, 0.0], [0.0, -mu, 0.0], [0.0, 0.0, 0.0]])
    target = AffineSection([1.0, 0.0, 0.0], [1.0, 0.0, 0.0])
    x0 = np.array([0.2, 0.5, 0.0])
    img, t, D, xc = nonrigorous_poincare(field, x0, target, crossing_sign=1,
                                         with_derivative=True)
    t_exact = math.log(1.0 / 0.2) / lam
    assert abs(t - t_exact) < 1e-9
    assert abs(xc[1] - 0.5 * math.exp(-mu * t_exact)) < 1e-9


def test_nonrigorous_derivative_matches_finite_differences():
    p = FhnParams(epsilon=1e-3)
    field = FhnField(p)
    x0 = np.array([0.4, 0.05, 0.05])
    f0 = field.eval_np(x0)
    target = AffineSection(x0 + 0.5 * f0, f0)
    img0, t0, D, _ = nonrigorous_poincare(field, x0, target, crossing_sign=1,
                                          with_derivative=True)
    h = 1e-6
    for j in range(2):
        dv = h * target.frame[:, j]
        imp, _, _, _ = nonrigorous_poincare(field, x0 + dv, target, crossing_sign=1)
        imm, _, _, _ = nonrigorous_poincare(field, x0 - dv, target, crossing_sign=1)
        fd = (imp - imm) / (2 * h)
        assert np.max(np.abs(fd - D[:, j])) < 1e-5


def test_rigorous_contains_nonrigorous_fhn():
    p = FhnParams(epsilon=1e-3)
    field = FhnField(p)
    x0 = np.array([0.4, 0.05, 0.05])
    f0 = field.eval_np(x0)
    target = AffineSection(x0 + 0.5 * f0, f0)
    img_n, t_n, _, _ = nonrigorous_poincare(field, x0, target, crossing_sign=1)
    rep = rigorous_poincare(field, IntervalVector(x0), target, CFG, crossing_sign=1)
    assert rep.time.contains(t_n) or abs(rep.time.mid - t_n) < 1e-9
    for k in range(2):
        assert rep.image[k].lo - 1e-10 <= img_n[k] <= rep.image[k].hi + 1e-10


def test_monotone_refinement_fhn():
    p = FhnParams(epsilon=1e-3)
    field = FhnField(p)
    x0 = np.array([0.4, 0.05, 0.05])
    f0 = field.eval_np(x0)
    target = AffineSection(x0 + 0.5 * f0, f0)
    box = IntervalVector.from_box(x0, 2e-3)
    whole = rigorous_poincare(field, box, target, CFG, crossing_sign=1)
    hulls = None
    for piece in split_box(box, 2):
        rep = rigorous_poincare(field, piece, target, CFG, crossing_sign=1)
        hulls = rep.image if hulls is None else hulls.hull(rep.image)
    assert whole.image.contains(hulls)


def test_backward_forward_consistency():
    p = FhnParams(epsilon=1e-3)
    field = FhnField(p)
    x0 = np.array([0.4, 0.05, 0.05])
    f0 = field.eval_np(x0)
    src = AffineSection(x0, f0)
    target = AffineSection(x0 + 0.5 * f0, f0)
    rep_f = rigorous_poincare(field, IntervalVector(x0), target, CFG, crossing_sign=1)
    back = rigorous_poincare(
        field, rep_f.box3d, src, CFG, crossing_sign=-1, time_direction="backward"
    )
    # backward crossing against the flow has <n, -f> < 0
    assert back.box3d.contains(IntervalVector(x0))


def test_rigorous_c1_derivative_contains_nonrigorous():
    p = FhnParams(epsilon=1e-3)
    field = FhnField(p)
    x0 = np.array([0.4, 0.05, 0.05])
    f0 = field.eval_np(x0)
    target = AffineSection(x0 + 0.5 * f0, f0)
    src_frame = target.frame
    img, t, Dn, _ = nonrigorous_poincare(field, x0, target, crossing_sign=1,
                                         with_derivative=True, src_frame=src_frame)
    rep = rigorous_poincare(field, IntervalVector.from_box(x0, 1e-9), target, CFG,
                            crossing_sign=1, mode="C1", src_frame=src_frame)
    for i in range(2):
        for j in range(2):
            d = rep.derivative[i, j]
            assert d.lo - 1e-7 <= Dn[i, j] <= d.hi + 1e-7
