"""Rigorous Taylor-method ODE integration with Lohner wrapping control.

Propagated sets are doubletons x = center + Cr0*r0 + B*r: the linear part of
the initial box is transported by the Taylor-polynomial Jacobian enclosure,
the accumulated remainder is re-expressed each step in a QR-orthogonalized
frame.  A step consists of

  1. a first-order Picard ("rough") enclosure Z of all trajectories over
     [0, h], with geometric inflation retries and step halving;
  2. Taylor jets of order n at the center, over the current hull, and at Z
     (the (n+1)-st jet over Z is the Lagrange remainder term);
  3. the mean-value update through the doubleton bookkeeping.

C1 mode additionally propagates an enclosure of the flow derivative through
the variational jets, with its own rough enclosure for the variational part.
Backward integration is forward integration of the negated field.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np

from ._jets import ZERO, tadd, tconv, tdivn, thull, tmul, tneg, tpow_interval, tsub
from .errors import (
    MaxStepsExceeded,
    Overflow,
    RoughEnclosureFailed,
    StepRejected,
)
from .fhn import NegatedField
from .intervals import Interval, IntervalMatrix, IntervalVector, linear_solve


@dataclass(frozen=True)
class IntegratorConfig:
    order: int = 12
    h_min: float = 1e-7
    h_max: float = 0.5
    trial_step: float = 1.0 / 32.0
    rough_inflation: float = 1.1
    rough_retries: int = 20
    max_steps: int = 200_000

    def __post_init__(self):
        if not (0 < self.h_min <= self.h_max):
            raise ValueError("require 0 < h_min <= h_max")
        if self.order < 2:
            raise ValueError("order must be >= 2")


class EnclosureSet:
    """Doubleton x = center + Cr0 @ r0 + B @ r."""

    __slots__ = ("center", "Cr0", "r0", "B", "r")

    def __init__(self, center, Cr0, r0: IntervalVector, B, r: IntervalVector):
        self.center = np.asarray(center, dtype=float)
        self.Cr0 = np.asarray(Cr0, dtype=float)
        self.r0 = r0
        self.B = np.asarray(B, dtype=float)
        self.r = r

    @staticmethod
    def from_box(x: IntervalVector) -> "EnclosureSet":
        n = x.dim
        c = x.mid()
        r0 = x - IntervalVector(c)
        zero = IntervalVector(np.zeros(n))
        return EnclosureSet(c, np.eye(n), r0, np.eye(n), zero)

    @staticmethod
    def from_affine(center, cols: np.ndarray, half: np.ndarray,
                    extra: IntervalVector | None = None) -> "EnclosureSet":
        """Parallelotope start set center + cols @ [-half, half] (+ extra box).

        Keeps slanted cells exact instead of hulling them into axis-aligned
        boxes, which matters before strongly expanding flows.  `cols` is
        (n, k) with k <= n; missing directions get zero-width components.
        """
        center = np.asarray(center, dtype=float)
        n = center.shape[0]
        k = cols.shape[1]
        Cr0 = np.zeros((n, n))
        Cr0[:, :k] = cols
        lo = np.zeros(n)
        hi = np.zeros(n)
        lo[:k] = -np.asarray(half, dtype=float)
        hi[:k] = np.asarray(half, dtype=float)
        r0 = IntervalVector(lo, hi)
        r = extra if extra is not None else IntervalVector(np.zeros(n))
        return EnclosureSet(center, Cr0, r0, np.eye(n), r)

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    def hull(self) -> IntervalVector:
        out = IntervalVector(self.center) + IntervalMatrix(self.Cr0).matvec(self.r0)
        return out + IntervalMatrix(self.B).matvec(self.r)


@dataclass
class FlowEnclosure:
    """Result of one validated step (or a composition of steps)."""

    over_step: IntervalVector
    at_end: EnclosureSet
    step: float
    derivative: Optional[IntervalMatrix] = None
    # order-n jets over the step's start hull plus the Lagrange term,
    # kept so a crossing locator can evaluate sub-tubes without re-integration
    poly: Optional[list] = None
    rem: Optional[list] = None
    vpoly: Optional[list] = None
    vrem: Optional[tuple] = None

    def set_at(self, tau_lo: float, tau_hi: float) -> IntervalVector:
        """Enclosure of the flow image of the start set over times [tau_lo, tau_hi]."""
        if self.poly is None:
            raise ValueError("this enclosure does not carry jets")
        t = (tau_lo, tau_hi)
        n = len(self.poly) - 1
        dim = len(self.poly[0])
        out_lo = np.empty(dim)
        out_hi = np.empty(dim)
        for i in range(dim):
            acc = self.poly[n][i]
            for k in range(n - 1, -1, -1):
                acc = tadd(tmul(acc, t), self.poly[k][i])
            rem = tmul(self.rem[i], tpow_interval(t, n + 1))
            acc = tadd(acc, rem)
            out_lo[i], out_hi[i] = acc
        return IntervalVector(out_lo, out_hi)

    def deriv_at(self, tau_lo: float, tau_hi: float) -> IntervalMatrix:
        """Enclosure of the one-step flow derivative over times [tau_lo, tau_hi]."""
        if self.vpoly is None:
            raise ValueError("this enclosure does not carry variational jets")
        t = (tau_lo, tau_hi)
        n = len(self.vpoly) - 1
        dim = len(self.vpoly[0])
        out_lo = np.empty((dim, dim))
        out_hi = np.empty((dim, dim))
        tp = tpow_interval(t, n + 1)
        for i in range(dim):
            for j in range(dim):
                acc = self.vpoly[n][i][j]
                for k in range(n - 1, -1, -1):
                    acc = tadd(tmul(acc, t), self.vpoly[k][i][j])
                acc = tadd(acc, tmul(self.vrem[i][j], tp))
                out_lo[i, j], out_hi[i, j] = acc
        return IntervalMatrix(out_lo, out_hi)


class LinearField:
    """x' = A x; exact test field with closed-form flows."""

    def __init__(self, A):
        self.A = np.asarray(A, dtype=float)
        self.dim = self.A.shape[0]
        self._pairs = [
            [(self.A[i, j], self.A[i, j]) for j in range(self.dim)]
            for i in range(self.dim)
        ]
        self._nz = [
            (i, j, self._pairs[i][j])
            for i in range(self.dim)
            for j in range(self.dim)
            if self.A[i, j] != 0.0
        ]

    def eval_iv(self, x: IntervalVector) -> IntervalVector:
        return IntervalMatrix(self.A).matvec(x)

    def jac_iv(self, x) -> IntervalMatrix:
        return IntervalMatrix(self.A)

    def eval_np(self, x: np.ndarray) -> np.ndarray:
        return x @ self.A.T

    def jac_np(self, x) -> np.ndarray:
        return self.A

    def series_coeff(self, series, k: int, scratch: dict):
        xk = series[k]
        out = []
        for i in range(self.dim):
            acc = ZERO
            for j in range(self.dim):
                if self.A[i, j] != 0.0:
                    acc = tadd(acc, tmul(self._pairs[i][j], xk[j]))
            out.append(acc)
        return tuple(out)

    def dfx_series_coeff(self, series, k: int, scratch: dict):
        return self._nz if k == 0 else []

    def negated(self):
        return NegatedField(self)


def _pairs_of(x: IntervalVector):
    return tuple((float(l), float(h)) for l, h in zip(x.lo, x.hi))


def _pairs_of_point(p: np.ndarray):
    return tuple((float(v), float(v)) for v in p)


def _iv_of_pairs(pairs) -> IntervalVector:
    lo = np.array([p[0] for p in pairs])
    hi = np.array([p[1] for p in pairs])
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
        raise Overflow("jet evaluation overflowed")
    return IntervalVector(lo, hi)


def solution_jets(wf, x0_pairs, order: int, scratch: dict | None = None):
    """Taylor coefficients x_0..x_order of the solution seeded at x0."""
    if scratch is None:
        scratch = {}
    series = [tuple(x0_pairs)]
    for k in range(order):
        fk = wf.series_coeff(series, k, scratch)
        series.append(tuple(tdivn(c, k + 1) for c in fk))
    return series, scratch


def taylor_coefficients(field, x: IntervalVector, order: int) -> list[IntervalVector]:
    """Public jet interface: coefficient k encloses the k-th Taylor
    coefficient of the flow at every point of x."""
    series, _ = solution_jets(field, _pairs_of(x), order)
    return [_iv_of_pairs(c) for c in series]


def variational_jets(wf, series, scratch: dict, V0, order: int):
    """Taylor coefficients V_0..V_order of the variational flow, V(0)=V0.

    V0 is an n x n grid of pairs; series must cover indices 0..order.
    """
    n = wf.dim
    dfx_cache = scratch.setdefault("dfx", [])
    Vs = [V0]
    for k in range(order):
        while len(dfx_cache) <= k:
            dfx_cache.append(wf.dfx_series_coeff(series, len(dfx_cache), scratch))
        S = [[ZERO] * n for _ in range(n)]
        for j in range(k + 1):
            Vkj = Vs[k - j]
            for (i, l, val) in dfx_cache[j]:
                row = S[i]
                vrow = Vkj[l]
                for m in range(n):
                    row[m] = tadd(row[m], tmul(val, vrow[m]))
        Vs.append(tuple(tuple(tdivn(S[i][m], k + 1) for m in range(n)) for i in range(n)))
    return Vs


def _identity_pairs(n: int):
    return tuple(
        tuple((1.0, 1.0) if i == j else ZERO for j in range(n)) for i in range(n)
    )


def _inflate(x: IntervalVector, factor: float) -> IntervalVector:
    c = x.mid()
    half = 0.5 * (x.hi - x.lo) * factor + 1e-300
    pad = np.abs(c) * 1e-15
    return IntervalVector(c - half - pad, c + half + pad)


def rough_enclosure(wf, x: IntervalVector, h: float, cfg: IntegratorConfig) -> IntervalVector:
    """First-order Picard enclosure: returns Z with x + [0,h] f(Z) inside Z."""
    span = Interval(0.0, h)
    f0 = wf.eval_iv(x)
    Z = x.hull(x + f0.scale(span))
    for _ in range(cfg.rough_retries):
        Zi = _inflate(Z, cfg.rough_inflation)
        Y = x + wf.eval_iv(Zi).scale(span)
        if Zi.contains(Y):
            return Y
        Z = Z.hull(Y)
    raise RoughEnclosureFailed(f"no validated enclosure at h={h}")


def _matrix_rough_enclosure(wf, Z: IntervalVector, h: float, cfg: IntegratorConfig) -> IntervalMatrix:
    """Picard enclosure for the variational flow V' = Df(x(t)) V, V(0)=I."""
    n = wf.dim
    span = Interval(0.0, h)
    J = wf.jac_iv(Z)
    I_m = IntervalMatrix.identity(n)
    W = I_m + J.matmul(I_m).scale(span)
    for _ in range(cfg.rough_retries):
        mid = W.mid()
        half = 0.5 * (W.hi - W.lo) * cfg.rough_inflation + 1e-300
        Wi = IntervalMatrix(mid - half, mid + half)
        Y = I_m + J.matmul(Wi).scale(span)
        if Wi.contains(Y):
            return Y
        W = W.hull(Y)
    raise RoughEnclosureFailed(f"no variational enclosure at h={h}")


def _pairs_matrix(W: IntervalMatrix):
    n = W.rows
    return tuple(
        tuple((float(W.lo[i, j]), float(W.hi[i, j])) for j in range(W.cols))
        for i in range(n)
    )


def _horner_pairs(coeffs, t):
    """Evaluate sum coeffs[k] * t^k with pair arithmetic (t a pair)."""
    acc = coeffs[-1]
    for k in range(len(coeffs) - 2, -1, -1):
        acc = tadd(tmul(acc, t), coeffs[k])
    return acc


def step(
    field,
    s: EnclosureSet,
    cfg: IntegratorConfig,
    mode: str = "C0",
    direction: str = "forward",
    h: float | None = None,
) -> FlowEnclosure:
    """One validated Taylor/Lohner step from the doubleton s.

    Returns a FlowEnclosure whose step field is the h actually used (the
    requested h is halved until the rough enclosure validates).
    """
    wf = field if direction == "forward" else field.negated()
    n_dim = s.dim
    X = s.hull()
    h_try = min(h if h is not None else cfg.trial_step, cfg.h_max)
    Z = None
    while True:
        try:
            Z = rough_enclosure(wf, X, h_try, cfg)
            if mode == "C1":
                W = _matrix_rough_enclosure(wf, Z, h_try, cfg)
            break
        except RoughEnclosureFailed as exc:
            h_try *= 0.5
            if h_try < cfg.h_min:
                raise StepRejected(str(exc)) from exc

    order = cfg.order
    ht = (h_try, h_try)

    # jets over the rough enclosure: Lagrange remainder coefficient
    series_z, scratch_z = solution_jets(wf, _pairs_of(Z), order + 1)
    rem_coeff = series_z[order + 1]
    hpow = tpow_interval(ht, order + 1)
    delta = [tmul(c, hpow) for c in rem_coeff]

    # jets at the thin center: polynomial value
    series_c, _ = solution_jets(wf, _pairs_of_point(s.center), order)
    val = [
        tadd(_horner_pairs([series_c[k][i] for k in range(order + 1)], ht), delta[i])
        for i in range(n_dim)
    ]
    val_iv = _iv_of_pairs(val)

    # jets over the hull: tube and the polynomial Jacobian
    series_x, scratch_x = solution_jets(wf, _pairs_of(X), order)
    Vk = variational_jets(wf, series_x, scratch_x, _identity_pairs(n_dim), order)
    A_lo = np.empty((n_dim, n_dim))
    A_hi = np.empty((n_dim, n_dim))
    for i in range(n_dim):
        for j in range(n_dim):
            lo, hi = _horner_pairs([Vk[k][i][j] for k in range(order + 1)], ht)
            A_lo[i, j], A_hi[i, j] = lo, hi
    A = IntervalMatrix(A_lo, A_hi)

    # over-step tube: intersection of the rough enclosure with the series tube
    span = (0.0, h_try)
    tube = [
        tadd(
            _horner_pairs([series_x[k][i] for k in range(order + 1)], span),
            tmul(rem_coeff[i], tpow_interval(span, order + 1)),
        )
        for i in range(n_dim)
    ]
    over = Z.intersect(_iv_of_pairs(tube))

    derivative = None
    vpoly = None
    vrem = None
    if mode == "C1":
        Vz = variational_jets(wf, series_z, scratch_z, _pairs_matrix(W), order + 1)
        vrem = Vz[order + 1]
        R_lo = np.empty((n_dim, n_dim))
        R_hi = np.empty((n_dim, n_dim))
        for i in range(n_dim):
            for j in range(n_dim):
                lo, hi = tmul(vrem[i][j], hpow)
                R_lo[i, j], R_hi[i, j] = lo, hi
        derivative = A + IntervalMatrix(R_lo, R_hi)
        vpoly = Vk

    # Lohner doubleton update
    c_new = val_iv.mid()
    eps0 = val_iv - IntervalVector(c_new)
    CR = A.matmul(IntervalMatrix(s.Cr0))
    C_new = CR.mid()
    E1 = (CR - IntervalMatrix(C_new)).matvec(s.r0)
    BB = A.matmul(IntervalMatrix(s.B))
    Q, _ = np.linalg.qr(BB.mid())
    Qinv = inverse_enclosure(IntervalMatrix(Q))
    r_new = Qinv.matmul(BB).matvec(s.r) + Qinv.matvec(E1 + eps0)
    new_set = EnclosureSet(c_new, C_new, s.r0, Q, r_new)

    return FlowEnclosure(
        over_step=over,
        at_end=new_set,
        step=h_try,
        derivative=derivative,
        poly=series_x,
        rem=list(rem_coeff),
        vpoly=vpoly,
        vrem=vrem,
    )


def inverse_enclosure(A: IntervalMatrix) -> IntervalMatrix:
    """Rigorous matrix inverse: adjugate formula up to 3x3, elimination above."""
    n = A.rows
    if n == 1:
        inv = Interval(1.0) / A[0, 0]
        return IntervalMatrix([[inv]])
    if n == 2:
        a, b, c, d = A[0, 0], A[0, 1], A[1, 0], A[1, 1]
        det = a * d - b * c
        return IntervalMatrix([[d / det, -(b / det)], [-(c / det), a / det]])
    if n == 3:
        e = [[A[i, j] for j in range(3)] for i in range(3)]
        cof = [[None] * 3 for _ in range(3)]
        for i in range(3):
            i1, i2 = (i + 1) % 3, (i + 2) % 3
            for j in range(3):
                j1, j2 = (j + 1) % 3, (j + 2) % 3
                cof[i][j] = e[i1][j1] * e[i2][j2] - e[i1][j2] * e[i2][j1]
        det = e[0][0] * cof[0][0] + e[0][1] * cof[0][1] + e[0][2] * cof[0][2]
        return IntervalMatrix(
            [[cof[j][i] / det for j in range(3)] for i in range(3)]
        )
    cols_lo = np.empty((n, n))
    cols_hi = np.empty((n, n))
    for j in range(n):
        ej = np.zeros(n)
        ej[j] = 1.0
        x = linear_solve(A, IntervalVector(ej))
        cols_lo[:, j] = x.lo
        cols_hi[:, j] = x.hi
    return IntervalMatrix(cols_lo, cols_hi)


def integrate_fixed_time(
    field,
    s: EnclosureSet,
    T: float,
    cfg: IntegratorConfig,
    mode: str = "C0",
    direction: str = "forward",
) -> FlowEnclosure:
    """Compose validated steps to cover exactly the time span T > 0."""
    if T <= 0:
        raise ValueError("T must be positive")
    # exact bookkeeping so the composed steps cover exactly T
    remaining = Fraction(T)
    over = None
    deriv = IntervalMatrix.identity(s.dim) if mode == "C1" else None
    h_next = cfg.trial_step
    steps = 0
    while remaining > 0:
        rem_f = float(remaining)
        if Fraction(rem_f) > remaining:
            rem_f = math.nextafter(rem_f, -math.inf)
        h_ask = min(h_next, rem_f)
        fe = step(field, s, cfg, mode=mode, direction=direction, h=h_ask)
        s = fe.at_end
        remaining -= Fraction(fe.step)
        over = fe.over_step if over is None else over.hull(fe.over_step)
        if mode == "C1":
            deriv = fe.derivative.matmul(deriv)
        h_next = min(cfg.h_max, fe.step * 1.5)
        steps += 1
        if steps > cfg.max_steps:
            raise MaxStepsExceeded(f"{steps} steps without covering T={T}")
    return FlowEnclosure(over_step=over, at_end=s, step=T, derivative=deriv)
