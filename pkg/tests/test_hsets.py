"""Covering-relation verifier against analytic verdicts on affine instances."""

import numpy as np
import pytest
import shapely.geometry as sg

from fhnverify.errors import CannotFit
from fhnverify.hsets import (
    AffineSectionMap,
    CoveringVerdict,
    HSet,
    IdentityMapper,
    check_backcovering,
    check_covering,
    constrict,
    fit_covered_set,
)
from fhnverify.intervals import Interval, IntervalVector
from fhnverify.poincare import AffineSection

I = Interval

SEC = AffineSection([0.0, 0.0, 0.0], [0.0, 0.0, 1.0], frame=np.eye(3)[:, :2])


def unit_hset(center=(0.0, 0.0), dirs=None) -> HSet:
    return HSet(SEC, center, np.eye(2) if dirs is None else dirs)


def amap(M, b=(0.0, 0.0)) -> AffineSectionMap:
    return AffineSectionMap(SEC, SEC, M, b)


def test_to_local_roundtrip():
    rng = np.random.default_rng(0)
    for _ in range(50):
        dirs = rng.uniform(-1, 1, (2, 2))
        if abs(np.linalg.det(dirs)) < 0.1:
            continue
        X = HSet(SEC, rng.uniform(-1, 1, 2), dirs)
        p = rng.uniform(-1, 1, 2)
        sc = X.center + X.dirs @ p
        loc = X.to_local(IntervalVector(sc))
        assert abs(loc[0].mid - p[0]) < 1e-12
        assert abs(loc[1].mid - p[1]) < 1e-12
        assert loc.max_width() < 1e-12


def test_to_local_center_and_exit():
    X = unit_hset(center=(0.5, -0.25), dirs=np.array([[2.0, 0.0], [0.0, 3.0]]))
    assert X.to_local(IntervalVector([0.5, -0.25])).max_width() < 1e-15
    loc = X.to_local(IntervalVector([2.5, -0.25]))
    assert abs(loc[0].mid - 1.0) < 1e-15 and abs(loc[1].mid) < 1e-15


def test_edges_layout():
    X = unit_hset()
    el = X.edges("exit_left")
    assert el[0] == I(-1) and el[1] == I(-1, 1)
    er = X.edges("entry_right")
    assert er[0] == I(-1, 1) and er[1] == I(1)
    with pytest.raises(ValueError):
        X.edges("diagonal")


def test_identity_covering_stretch_holds():
    X = unit_hset(dirs=np.diag([2.0, 0.5]))
    Y = unit_hset()
    v = check_covering(amap(np.eye(2)), X, Y, div=4)
    assert v.holds and v.c1_margin > 0 and v.c2_margin > 0


def test_identity_covering_shrink_fails_c2():
    X = unit_hset(dirs=np.diag([0.5, 0.5]))
    Y = unit_hset()
    v = check_covering(amap(np.eye(2)), X, Y, div=4)
    assert not v.holds and v.c2_margin < 0


def test_chain_factor_alignment():
    # consecutive chain faces align by diag(factor, 1/factor)
    f = 1.05
    X = unit_hset(dirs=np.diag([f, 1.0 / f]))
    Y = unit_hset()
    v = check_covering(amap(np.eye(2)), X, Y, div=3)
    assert v.holds
    assert v.margin < 0.06  # the alignment is tight, margin of order factor-1


def test_backcovering_transposed_roles():
    X = unit_hset()
    Y = unit_hset(dirs=np.diag([0.5, 2.0]))
    # backward map is the identity; Y^T covers X^T iff Y's entry direction
    # stretches over X's and exit compresses
    v = check_backcovering(amap(np.eye(2)), X, Y, div=4)
    assert v.holds


def test_backcovering_fails_both_expand():
    X = unit_hset()
    Y = unit_hset(dirs=np.diag([2.0, 2.0]))
    v = check_backcovering(amap(np.eye(2)), X, Y, div=4)
    assert not v.holds


def test_transposition_duality():
    rng = np.random.default_rng(7)
    for _ in range(20):
        Mx = rng.uniform(-0.5, 0.5, (2, 2)) + np.diag(rng.uniform(0.8, 2.0, 2))
        X = unit_hset(dirs=rng.uniform(0.5, 1.5) * np.eye(2))
        Y = unit_hset(dirs=np.diag(rng.uniform(0.4, 2.2, 2)))
        back = check_backcovering(amap(Mx), X, Y, div=3)
        fwd_of_transposed = check_covering(amap(Mx), Y.transposed(), X.transposed(), div=3)
        assert back.holds == fwd_of_transposed.holds
        assert abs(back.margin - fwd_of_transposed.margin) < 1e-12


def test_constrict_scaling():
    X = unit_hset(dirs=np.diag([2.0, 3.0]))
    Xc = constrict(X, 1.0, "exit")
    assert np.allclose(Xc.dirs[:, 0], [1.0, 0.0])
    assert np.allclose(Xc.dirs[:, 1], [0.0, 3.0])
    Xe = constrict(X, 0.25, "entry")
    assert np.allclose(Xe.dirs[:, 1], [0.0, 2.4])


def test_constrict_support_containment():
    rng = np.random.default_rng(3)
    for _ in range(20):
        dirs = rng.uniform(-1, 1, (2, 2)) + np.diag([1.5, 1.5])
        X = HSet(SEC, rng.uniform(-1, 1, 2), dirs)
        delta = rng.uniform(1e-6, 1.0)
        Xc = constrict(X, delta, "exit")
        assert X.support_box().contains(Xc.support_box())


def test_constriction_preserves_covering():
    X = unit_hset(dirs=np.diag([3.0, 0.25]))
    Y = unit_hset()
    v = check_covering(amap(np.eye(2)), X, Y, div=4)
    assert v.holds and v.margin > 0
    # constricting the source's exit direction by less than the C2 margin
    # keeps the covering
    delta = 0.5 * v.c2_margin
    Xc = constrict(X, delta, "exit")
    vc = check_covering(amap(np.eye(2)), Xc, Y, div=4)
    assert vc.holds


def test_div_monotonicity():
    M = np.array([[1.8, 0.3], [0.1, 0.4]])
    X = unit_hset()
    Y = unit_hset(dirs=np.diag([1.2, 1.1]))
    margins = [check_covering(amap(M), X, Y, div=d).margin for d in (1, 2, 4, 8)]
    for a, b in zip(margins, margins[1:]):
        assert b >= a - 1e-12


def _analytic_covering(M, b, X: HSet, Y: HSet) -> bool:
    """Exact verdict for an affine map via polygon geometry (oracle)."""
    # local-to-local affine map
    A = np.linalg.inv(Y.dirs) @ M @ X.dirs
    c = np.linalg.inv(Y.dirs) @ (M @ X.center + b - Y.center)
    corners = [c + A @ np.array([su, ss]) for su in (-1, 1) for ss in (-1, 1)]
    poly = sg.MultiPoint([tuple(p) for p in corners]).convex_hull
    BIG = 1e6
    strip_hi = sg.box(-1.0, 1.0, 1.0, BIG)
    strip_lo = sg.box(-1.0, -BIG, 1.0, -1.0)
    c1 = (not poly.intersects(strip_hi)) and (not poly.intersects(strip_lo))
    le = [c + A @ np.array([-1.0, ss]) for ss in (-1, 1)]
    re = [c + A @ np.array([1.0, ss]) for ss in (-1, 1)]
    le_max = max(p[0] for p in le)
    le_min = min(p[0] for p in le)
    re_max = max(p[0] for p in re)
    re_min = min(p[0] for p in re)
    c2 = (le_max < -1 and re_min > 1) or (le_min > 1 and re_max < -1)
    return c1 and c2


def test_verifier_matches_analytic_oracle():
    rng = np.random.default_rng(42)
    done = 0
    while done < 200:
        M = rng.uniform(-2, 2, (2, 2))
        if abs(np.linalg.det(M)) < 0.05:
            continue
        b = rng.uniform(-0.5, 0.5, 2)
        X = unit_hset(dirs=np.diag(rng.uniform(0.3, 1.5, 2)))
        Y = unit_hset(center=rng.uniform(-0.3, 0.3, 2), dirs=np.diag(rng.uniform(0.3, 1.5, 2)))
        v = check_covering(amap(M, b), X, Y, div=6)
        if abs(v.margin) < 1e-9:
            continue  # skip rounding-level ties
        assert v.holds == _analytic_covering(M, b, X, Y)
        done += 1


def test_fit_covered_set_saddle():
    M = np.diag([3.0, 1.0 / 3.0])
    X = unit_hset()
    mapper = amap(M)
    support = [(l, mapper.map_box(X.ambient(c))) for l, c in X.support_cells(4)]
    left = [(l, mapper.map_box(X.ambient(c))) for l, c in X.edge_cells("exit_left", 4)]
    right = [(l, mapper.map_box(X.ambient(c))) for l, c in X.edge_cells("exit_right", 4)]
    fitted, verdict = fit_covered_set(support, left, right, SEC, margin=0.1)
    assert verdict.holds
    # independent re-check through the public verifier
    v2 = check_covering(mapper, X, fitted, div=4)
    assert v2.holds


def test_fit_covered_set_margin_monotone():
    M = np.diag([3.0, 1.0 / 3.0])
    X = unit_hset()
    mapper = amap(M)
    support = [(l, mapper.map_box(X.ambient(c))) for l, c in X.support_cells(4)]
    left = [(l, mapper.map_box(X.ambient(c))) for l, c in X.edge_cells("exit_left", 4)]
    right = [(l, mapper.map_box(X.ambient(c))) for l, c in X.edge_cells("exit_right", 4)]
    w = []
    for margin in (0.05, 0.2, 0.5):
        fitted, _ = fit_covered_set(support, left, right, SEC, margin=margin)
        w.append(np.linalg.norm(fitted.dirs[:, 1]))
    assert w[0] < w[1] < w[2]


def test_fit_covered_set_cannot_fit():
    # a fold: both exit edges map to the same side
    M = np.diag([1.0, 0.5])
    X = unit_hset()
    mapper = amap(M)
    support = [(l, mapper.map_box(X.ambient(c))) for l, c in X.support_cells(3)]
    left = [(l, mapper.map_box(X.ambient(c))) for l, c in X.edge_cells("exit_left", 3)]
    # fake a fold by reusing left images as "right" images
    with pytest.raises(CannotFit):
        fit_covered_set(support, left, left, SEC, margin=0.1)


def test_identity_mapper_requires_shared_plane():
    other = AffineSection([0.0, 0.0, 1.0], [0.0, 0.0, 1.0])
    with pytest.raises(ValueError):
        IdentityMapper(SEC, other)
    same = AffineSection([5.0, -2.0, 0.0], [0.0, 0.0, -1.0])
    IdentityMapper(SEC, same)  # shifted origin in-plane is fine


def test_mapper_error_becomes_verdict():
    from fhnverify.fhn import FhnField, FhnParams
    from fhnverify.hsets import PoincareMapper
    from fhnverify.integrator import IntegratorConfig

    field = FhnField(FhnParams(epsilon=1e-4))
    # a target plane the trajectory never reaches
    target = AffineSection([50.0, 0.0, 0.0], [1.0, 0.0, 0.0])
    mapper = PoincareMapper(field, target, IntegratorConfig(), max_time=2.0)
    X = HSet(
        AffineSection([0.0, 0.0, 0.05], [0.0, 0.0, 1.0], frame=np.eye(3)[:, :2]),
        (0.0, 0.0),
        np.diag([1e-3, 1e-3]),
    )
    Y = unit_hset()
    v = check_covering(mapper, X, Y, div=1)
    assert not v.holds
    assert v.error and "NoCrossing" in v.error
