"""Affine transversal sections and Poincaré-map enclosures.

Rigorous crossings: integrate until the section functional changes sign over
a validated tube, then bracket the crossing window [tau_lo, tau_hi] by
bisecting time against the step's Taylor jets.  The transversality enclosure
<n, f> over the crossing tube must exclude zero; its sign selects between
accepting the crossing and passing through (first-return semantics with a
required crossing direction).

Nonrigorous maps run on scipy's DOP853 with event detection, plus a scalar
Newton polish of the crossing time; their derivative comes from the
variational flow with the usual section-correction of the crossing-time
sensitivity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np
from scipy.integrate import solve_ivp

from .errors import MaxStepsExceeded, NoCrossing, TransversalityLost
from .integrator import EnclosureSet, FlowEnclosure, IntegratorConfig, step
from .intervals import Interval, IntervalMatrix, IntervalVector


class AffineSection:
    """A plane {x : <normal, x - origin> = 0} with an orthonormal in-plane frame."""

    __slots__ = ("origin", "normal", "frame")

    def __init__(self, origin, normal, frame=None):
        self.origin = np.asarray(origin, dtype=float)
        n = np.asarray(normal, dtype=float)
        nn = np.linalg.norm(n)
        if nn == 0.0:
            raise ValueError("zero normal")
        self.normal = n / nn
        dim = self.origin.shape[0]
        if frame is None:
            # complete the normal to an orthonormal basis
            M = np.eye(dim)
            idx = int(np.argmax(np.abs(self.normal)))
            M[:, [0, idx]] = M[:, [idx, 0]]
            M[:, 0] = self.normal
            Q, _ = np.linalg.qr(M)
            # fix potential sign flip of the first column
            frame = Q[:, 1:]
        else:
            frame = np.asarray(frame, dtype=float)
            # orthonormalize and project out the normal component
            frame = frame - np.outer(self.normal, self.normal @ frame)
            Q, R = np.linalg.qr(frame)
            frame = Q * np.sign(np.diag(R))
        if np.max(np.abs(self.normal @ frame)) > 1e-12:
            raise ValueError("frame not orthogonal to normal")
        self.frame = frame

    def section_value(self, x) -> Interval:
        """Enclosure of <normal, x - origin>."""
        if isinstance(x, np.ndarray):
            x = IntervalVector(x)
        acc = Interval(0.0)
        for i in range(x.dim):
            acc = acc + Interval(self.normal[i]) * (x[i] - Interval(self.origin[i]))
        return acc

    def section_value_np(self, x: np.ndarray) -> float:
        return float(self.normal @ (np.asarray(x) - self.origin))

    def normal_dot(self, v: IntervalVector) -> Interval:
        """Enclosure of <normal, v> (used for transversality of the field)."""
        acc = Interval(0.0)
        for i in range(v.dim):
            acc = acc + Interval(self.normal[i]) * v[i]
        return acc

    def tighten(self, box: IntervalVector) -> IntervalVector:
        """Refine a box with the plane constraint <n, x-o> = 0."""
        out = box
        for i in range(box.dim):
            ni = self.normal[i]
            if abs(ni) < 1e-12:
                continue
            acc = Interval(0.0)
            for j in range(box.dim):
                if j == i:
                    continue
                acc = acc + Interval(self.normal[j]) * (out[j] - Interval(self.origin[j]))
            xi = Interval(self.origin[i]) + (-acc) / Interval(ni)
            lo = out.lo.copy()
            hi = out.hi.copy()
            clipped = xi.intersect(out[i])
            lo[i], hi[i] = clipped.lo, clipped.hi
            out = IntervalVector(lo, hi)
        return out

    def project(self, box: IntervalVector) -> IntervalVector:
        """Section coordinates frame^T (x - origin) of a (tightened) box."""
        diff = box - IntervalVector(self.origin)
        cols = []
        for k in range(self.frame.shape[1]):
            acc = Interval(0.0)
            for i in range(box.dim):
                acc = acc + Interval(self.frame[i, k]) * diff[i]
            cols.append(acc)
        return IntervalVector(cols)

    def project_np(self, x: np.ndarray) -> np.ndarray:
        return self.frame.T @ (np.asarray(x) - self.origin)

    def embed(self, coords) -> IntervalVector:
        """Ambient enclosure of origin + frame @ coords for 2D interval coords."""
        if isinstance(coords, np.ndarray):
            return IntervalVector(self.origin + self.frame @ coords)
        out = IntervalVector(self.origin)
        for k in range(coords.dim):
            out = out + IntervalVector(self.frame[:, k]).scale(coords[k])
        return out

    def embed_np(self, coords: np.ndarray) -> np.ndarray:
        return self.origin + self.frame @ np.asarray(coords)

    def same_plane(self, other: "AffineSection", tol: float = 1e-11) -> bool:
        cross = abs(abs(float(self.normal @ other.normal)) - 1.0)
        off = abs(float(self.normal @ (other.origin - self.origin)))
        return cross < tol and off < tol


def section_value(sec: AffineSection, x) -> Interval:
    return sec.section_value(x)


@dataclass
class CrossingReport:
    image: IntervalVector  # 2D section coordinates
    time: Interval
    transversality: Interval
    derivative: Optional[IntervalMatrix] = None  # 2x2, source-frame -> target-frame
    box3d: Optional[IntervalVector] = None


_BISECT_TOL = 1e-10
_BISECT_MAX = 60


def _sv_pair(sec: AffineSection, box: IntervalVector) -> Interval:
    return sec.section_value(box)


def _strict_side(iv: Interval) -> int:
    if iv.hi < 0.0:
        return -1
    if iv.lo > 0.0:
        return 1
    return 0


def _refine_entry(fe: FlowEnclosure, sec: AffineSection, side: int) -> float:
    """Largest tau in [0, step] with the set at tau strictly on `side`."""
    lo, hi = 0.0, fe.step
    for _ in range(_BISECT_MAX):
        if hi - lo < _BISECT_TOL:
            break
        mid = 0.5 * (lo + hi)
        if _strict_side(_sv_pair(sec, fe.set_at(mid, mid))) == side:
            lo = mid
        else:
            hi = mid
    return lo


def _refine_exit(fe: FlowEnclosure, sec: AffineSection, side: int) -> float:
    """Smallest tau in [0, step] with the set at tau strictly on `side`."""
    lo, hi = 0.0, fe.step
    for _ in range(_BISECT_MAX):
        if hi - lo < _BISECT_TOL:
            break
        mid = 0.5 * (lo + hi)
        if _strict_side(_sv_pair(sec, fe.set_at(mid, mid))) == side:
            hi = mid
        else:
            lo = mid
    return hi


def rigorous_poincare(
    field,
    start,
    target: AffineSection,
    cfg: IntegratorConfig,
    crossing_sign: int = 1,
    time_direction: str = "forward",
    mode: str = "C0",
    max_time: float | None = None,
    time_hint: float | None = None,
    src_frame: np.ndarray | None = None,
) -> CrossingReport:
    """Enclose the first section crossing with the requested direction.

    `start` is a 3D box (IntervalVector) or an EnclosureSet.  `crossing_sign`
    is the required sign of <n, f> at the accepted crossing, with f the
    effective (possibly negated) field.  In C1 mode the report carries an
    enclosure of the crossing map's derivative from `src_frame` coordinates
    (defaults to the target frame) to target-section coordinates.
    """
    wf = field if time_direction == "forward" else field.negated()
    s = start if isinstance(start, EnclosureSet) else EnclosureSet.from_box(start)
    if max_time is None:
        max_time = 10.0 * time_hint if time_hint else 1000.0
    n_dim = s.dim
    want_c1 = mode == "C1"
    D_acc = IntervalMatrix.identity(n_dim) if want_c1 else None

    sv0 = _sv_pair(target, s.hull())
    side = _strict_side(sv0)
    leaving = False
    if side == 0:
        tr0 = target.normal_dot(wf.eval_iv(s.hull()))
        if tr0.contains(0.0):
            raise TransversalityLost(
                "start set touches the section without outgoing transversality"
            )
        side = 1 if tr0.lo > 0.0 else -1
        leaving = True

    t_acc = Fraction(0)
    h_next = cfg.trial_step
    steps = 0
    zone: list[tuple[FlowEnclosure, float, float, Fraction]] = []  # (fe, tau_lo, tau_hi, t_start)
    zone_active = False

    while True:
        steps += 1
        if steps > cfg.max_steps:
            raise MaxStepsExceeded("crossing search exceeded step limit")
        if float(t_acc) > max_time:
            raise NoCrossing(f"no {crossing_sign:+d} crossing within t={max_time}")
        fe = step(field, s, cfg, mode=mode, direction=time_direction, h=h_next)
        t_start = t_acc
        t_acc = t_acc + Fraction(fe.step)
        s = fe.at_end
        tube_sv = _sv_pair(target, fe.over_step)
        end_side = _strict_side(_sv_pair(target, fe.at_end.hull()))

        if leaving:
            tr = target.normal_dot(wf.eval_iv(fe.over_step))
            if tr.contains(0.0):
                raise TransversalityLost("transversality lost while leaving the section")
            if want_c1:
                D_acc = fe.derivative.matmul(D_acc)
            h_next = min(cfg.h_max, fe.step * 1.5)
            if end_side == side:
                leaving = False
            continue

        if not zone_active and _strict_side(tube_sv) == side:
            # clean step on the current side
            if want_c1:
                D_acc = fe.derivative.matmul(D_acc)
            h_next = min(cfg.h_max, fe.step * 1.5)
            continue

        # the tube touches the section: we are in a crossing zone
        if not zone_active:
            zone_active = True
            tau_lo = _refine_entry(fe, target, side)
            zone = [(fe, tau_lo, fe.step, t_start)]
        else:
            zone.append((fe, 0.0, fe.step, t_start))

        if end_side == -side:
            # zone complete; trim the last piece
            fe_last, tlo_last, _, tstart_last = zone[-1]
            tau_hi = _refine_exit(fe_last, target, -side)
            zone[-1] = (fe_last, tlo_last, tau_hi, tstart_last)

            tube = None
            for fz, a, b, _ts in zone:
                piece = fz.set_at(a, b)
                tube = piece if tube is None else tube.hull(piece)
            trans = target.normal_dot(wf.eval_iv(tube))
            if trans.contains(0.0):
                raise TransversalityLost(
                    f"transversality enclosure {trans} contains 0 at crossing"
                )
            tsign = 1 if trans.lo > 0.0 else -1
            if tsign == crossing_sign:
                t_lo_fr = zone[0][3] + Fraction(zone[0][1])
                t_hi_fr = zone[-1][3] + Fraction(zone[-1][2])
                t_int = Interval(
                    math.nextafter(float(t_lo_fr), -math.inf),
                    math.nextafter(float(t_hi_fr), math.inf),
                )
                cross_box = target.tighten(tube)
                image = target.project(cross_box)
                deriv = None
                if want_c1:
                    V_win = None
                    D_run = D_acc
                    for fz, a, b, _ts in zone:
                        piece = fz.deriv_at(a, b).matmul(D_run)
                        V_win = piece if V_win is None else V_win.hull(piece)
                        D_run = fz.derivative.matmul(D_run)
                    F_c = wf.eval_iv(cross_box)
                    corr = _section_correction(target, F_c, trans, n_dim)
                    full = corr.matmul(V_win)
                    J = target.frame if src_frame is None else np.asarray(src_frame)
                    proj = IntervalMatrix(target.frame.T).matmul(full).matmul(IntervalMatrix(J))
                    deriv = proj
                return CrossingReport(
                    image=image,
                    time=t_int,
                    transversality=trans,
                    derivative=deriv,
                    box3d=cross_box,
                )
            # wrong-direction crossing: pass through and continue
            if want_c1:
                for fz, _a, _b, _ts in zone:
                    D_acc = fz.derivative.matmul(D_acc)
            side = -side
            zone = []
            zone_active = False
            h_next = cfg.trial_step
            continue

        if end_side == side:
            # the tube touched the zero level but every endpoint is strictly
            # back on the original side; with a sign-definite <n, f> over the
            # zone no trajectory can have reached the plane, so the touch was
            # enclosure overestimation and the zone is dismissed
            tube = None
            for fz, a, b, _ts in zone:
                piece = fz.set_at(a, b)
                tube = piece if tube is None else tube.hull(piece)
            tr = target.normal_dot(wf.eval_iv(tube))
            if tr.contains(0.0):
                raise TransversalityLost(
                    "tube touched the section without passing through"
                )
            if want_c1:
                for fz, _a, _b, _ts in zone:
                    D_acc = fz.derivative.matmul(D_acc)
            zone = []
            zone_active = False
            h_next = min(cfg.h_max, fe.step)
            continue

        # still mid-crossing (end set straddles); keep stepping with the zone open
        h_next = min(cfg.h_max, fe.step)


def _section_correction(
    sec: AffineSection, F: IntervalVector, trans: Interval, n_dim: int
) -> IntervalMatrix:
    """Enclosure of (I - f n^T / <n, f>) at the crossing."""
    lo = np.empty((n_dim, n_dim))
    hi = np.empty((n_dim, n_dim))
    for i in range(n_dim):
        for j in range(n_dim):
            e = Interval(1.0 if i == j else 0.0)
            e = e - F[i] * Interval(sec.normal[j]) / trans
            lo[i, j], hi[i, j] = e.lo, e.hi
    return IntervalMatrix(lo, hi)


def nonrigorous_poincare(
    field,
    x0: np.ndarray,
    target: AffineSection,
    crossing_sign: int = 1,
    time_direction: str = "forward",
    with_derivative: bool = False,
    max_time: float = 1000.0,
    src_frame: np.ndarray | None = None,
    rtol: float = 1e-12,
    atol: float = 1e-14,
):
    """Floating-point first crossing: (image2, time, derivative, point3).

    The crossing is polished by a scalar Newton iteration on the dense output
    until |section value| < 1e-13 (or stagnation).  The derivative is the
    variational flow with the crossing-time correction, projected between
    section frames.
    """
    wf = field if time_direction == "forward" else field.negated()
    x0 = np.asarray(x0, dtype=float)
    n = x0.shape[0]

    if with_derivative:
        def rhs(t, y):
            x = y[:n]
            V = y[n:].reshape(n, n)
            dV = wf.jac_np(x) @ V
            return np.concatenate([wf.eval_np(x), dV.ravel()])
        y0 = np.concatenate([x0, np.eye(n).ravel()])
    else:
        def rhs(t, y):
            return wf.eval_np(y)
        y0 = x0

    def event(t, y):
        return target.section_value_np(y[:n])

    event.terminal = False
    event.direction = float(crossing_sign)

    sol = solve_ivp(
        rhs, (0.0, max_time), y0, method="DOP853", rtol=rtol, atol=atol,
        events=event, dense_output=True,
    )
    times = [t for t in sol.t_events[0] if t > 1e-9]
    if not times:
        raise NoCrossing("no event within max_time")
    t_e = float(times[0])

    # Newton polish on the dense interpolant
    for _ in range(60):
        y = sol.sol(t_e)
        sv = target.section_value_np(y[:n])
        if abs(sv) < 1e-13:
            break
        dsv = float(target.normal @ wf.eval_np(y[:n]))
        if dsv == 0.0:
            break
        t_e -= sv / dsv
    y = sol.sol(t_e)
    x_c = y[:n]
    image = target.project_np(x_c)

    deriv = None
    if with_derivative:
        V = y[n:].reshape(n, n)
        f_c = wf.eval_np(x_c)
        denom = float(target.normal @ f_c)
        corr = np.eye(n) - np.outer(f_c, target.normal) / denom
        J = target.frame if src_frame is None else np.asarray(src_frame)
        deriv = target.frame.T @ corr @ V @ J
    return image, t_e, deriv, x_c
