"""The FitzHugh-Nagumo traveling-wave field, fast subsystem, and slow manifold.

The 3D system integrated everywhere in this package:

    u' = v
    v' = gamma * (theta*v - u(u-a)(1-u) + w)
    w' = (epsilon/theta) * (u - w)

Parameters default to a=0.1, gamma=0.2, theta=0.61.  They are stored as
tight intervals around their decimal values so that every rigorous claim
refers to the real-valued parameters, not to their nearest doubles.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ComplexOrDegenerate, NewtonDiverged
from .intervals import Interval, IntervalMatrix, IntervalVector, v_add, v_mul, v_scale, v_sub


def _param(x) -> Interval:
    if isinstance(x, Interval):
        return x
    if isinstance(x, str):
        return Interval.from_decimal(x)
    return Interval(float(x))


@dataclass(frozen=True)
class FhnParams:
    """Equation parameters; epsilon is an interval (time-scale ratio >= 0)."""

    a: Interval
    gamma: Interval
    theta: Interval
    epsilon: Interval

    def __init__(self, a="0.1", gamma="0.2", theta="0.61", epsilon=0.0):
        object.__setattr__(self, "a", _param(a))
        object.__setattr__(self, "gamma", _param(gamma))
        object.__setattr__(self, "theta", _param(theta))
        object.__setattr__(self, "epsilon", _param(epsilon))
        if self.theta.lo <= 0.0:
            raise ValueError("theta must be positive")
        if self.epsilon.lo < 0.0:
            raise ValueError("epsilon must be >= 0")

    def with_epsilon(self, epsilon) -> "FhnParams":
        return FhnParams(self.a, self.gamma, self.theta, _param(epsilon))

    # midpoint floats for the nonrigorous code paths
    @property
    def a_mid(self) -> float:
        return self.a.mid

    @property
    def gamma_mid(self) -> float:
        return self.gamma.mid

    @property
    def theta_mid(self) -> float:
        return self.theta.mid

    @property
    def eps_mid(self) -> float:
        return self.epsilon.mid


@dataclass(frozen=True)
class PhasePoint:
    u: Interval
    v: Interval
    w: Interval

    @staticmethod
    def of(u, v, w) -> "PhasePoint":
        return PhasePoint(Interval.coerce(u), Interval.coerce(v), Interval.coerce(w))

    @staticmethod
    def from_vector(x: IntervalVector) -> "PhasePoint":
        return PhasePoint(x[0], x[1], x[2])

    def to_vector(self) -> IntervalVector:
        return IntervalVector([self.u, self.v, self.w])


def _as_triplet(x) -> tuple[Interval, Interval, Interval]:
    if isinstance(x, PhasePoint):
        return x.u, x.v, x.w
    if isinstance(x, IntervalVector):
        return x[0], x[1], x[2]
    return (Interval.coerce(x[0]), Interval.coerce(x[1]), Interval.coerce(x[2]))


def cubic(u: Interval, p: FhnParams) -> Interval:
    """g(u) = u(u-a)(1-u), kept factored so the roots stay exact."""
    return u * (u - p.a) * (Interval(1) - u)


def cubic_deriv(u: Interval, p: FhnParams) -> Interval:
    """g'(u) = -3u^2 + 2(1+a)u - a."""
    two1a = (Interval(1) + p.a) * 2
    return (Interval(-3) * u + two1a) * u - p.a


def cubic_float(u: float, a: float = 0.1) -> float:
    return u * (u - a) * (1.0 - u)


def cubic_deriv_float(u: float, a: float = 0.1) -> float:
    return -3.0 * u * u + 2.0 * (1.0 + a) * u - a


def vector_field(x, p: FhnParams) -> IntervalVector:
    """Enclosure of the FitzHugh-Nagumo right-hand side over the box x."""
    u, v, w = _as_triplet(x)
    fu = v
    fv = p.gamma * (p.theta * v - cubic(u, p) + w)
    fw = (p.epsilon / p.theta) * (u - w)
    return IntervalVector([fu, fv, fw])


def jacobian(x, p: FhnParams) -> IntervalMatrix:
    """Entrywise enclosure of the derivative of the field over the box x."""
    u, _, _ = _as_triplet(x)
    z = Interval(0)
    et = p.epsilon / p.theta
    return IntervalMatrix(
        [
            [z, Interval(1), z],
            [-(p.gamma * cubic_deriv(u, p)), p.gamma * p.theta, p.gamma],
            [et, z, -et],
        ]
    )


def fast_linearization(u, p: FhnParams) -> IntervalMatrix:
    """Jacobian [[0,1],[-gamma g'(u), gamma theta]] of the fast subsystem."""
    u = Interval.coerce(u)
    return IntervalMatrix(
        [
            [Interval(0), Interval(1)],
            [-(p.gamma * cubic_deriv(u, p)), p.gamma * p.theta],
        ]
    )


def eigen2x2(M: IntervalMatrix):
    """Real eigen-decomposition of a 2x2 interval matrix.

    Returns (lambda_u, lambda_s, V) with lambda_u > lambda_s and V's columns
    enclosing eigenvectors, normalized to first component 1 where possible
    (giving the (1, lambda) shape for companion-form matrices).
    Raises ComplexOrDegenerate when the discriminant enclosure touches 0.
    """
    if M.shape != (2, 2):
        raise ValueError("eigen2x2 expects a 2x2 matrix")
    m00, m01 = M[0, 0], M[0, 1]
    m10, m11 = M[1, 0], M[1, 1]
    tr = m00 + m11
    det = m00 * m11 - m01 * m10
    disc = tr.sqr() - Interval(4) * det
    if disc.lo <= 0.0:
        raise ComplexOrDegenerate(f"discriminant enclosure {disc} touches 0")
    root = disc.sqrt()
    lam_u = (tr + root) / 2
    lam_s = (tr - root) / 2

    def eigvec(lam: Interval) -> list[Interval]:
        cands = [
            (m01, lam - m00),
            (lam - m11, m10),
        ]
        # prefer a candidate whose first component excludes zero
        best = max(cands, key=lambda c: c[0].mig)
        if best[0].mig > 0.0:
            return [Interval(1), best[1] / best[0]]
        best = max(cands, key=lambda c: c[1].mig)
        if best[1].mig > 0.0:
            return [best[0] / best[1], Interval(1)]
        raise ComplexOrDegenerate("degenerate eigenvector system")

    vu = eigvec(lam_u)
    vs = eigvec(lam_s)
    V = IntervalMatrix([[vu[0], vs[0]], [vu[1], vs[1]]])
    return lam_u, lam_s, V


def slow_manifold_w(u: float, p: FhnParams | None = None) -> float:
    """w-value of the slow manifold point over u (direct evaluation)."""
    a = p.a_mid if p is not None else 0.1
    return cubic_float(u, a)


def slow_manifold_u(
    w: float,
    branch: str | None = None,
    guess: float | None = None,
    p: FhnParams | None = None,
    tol: float = 1e-12,
    max_iter: int = 50,
) -> float:
    """Solve u(u-a)(1-u) = w on the requested branch with Newton's method.

    Either a branch name ('lower', 'middle', 'upper') or an explicit initial
    guess must be given.  Nonrigorous; residual below `tol` on success.
    """
    a = p.a_mid if p is not None else 0.1
    if guess is None:
        if branch is None:
            raise ValueError("need a branch selector or an initial guess")
        roots = np.roots([-1.0, 1.0 + a, -a, -w])
        real = sorted(r.real for r in roots if abs(r.imag) < 1e-9)
        if len(real) < 3:
            # outside the fold window only one branch exists
            idx = {"lower": 0, "middle": 0, "upper": -1}[branch]
            guess = real[idx]
        else:
            guess = real[{"lower": 0, "middle": 1, "upper": 2}[branch]]
    u = float(guess)
    for _ in range(max_iter):
        r = cubic_float(u, a) - w
        if abs(r) < tol:
            return u
        d = cubic_deriv_float(u, a)
        if d == 0.0:
            break
        u -= r / d
        if not np.isfinite(u):
            break
    raise NewtonDiverged(f"slow-manifold Newton failed for w={w}")


def slow_manifold_point(u: float, p: FhnParams | None = None) -> np.ndarray:
    return np.array([u, 0.0, slow_manifold_w(u, p)])


class FhnField:
    """Rigorous/nonrigorous evaluation bundle consumed by the integrator."""

    dim = 3

    def __init__(self, params: FhnParams):
        self.params = params
        p = params
        self._one_a = Interval(1) + p.a
        self._gt = p.gamma * p.theta
        self._et = p.epsilon / p.theta
        self._a_f = p.a_mid
        self._g_f = p.gamma_mid
        self._t_f = p.theta_mid
        self._e_f = p.eps_mid
        # pair-form parameter constants for the jet recurrences
        self._t_a = (p.a.lo, p.a.hi)
        self._t_gamma = (p.gamma.lo, p.gamma.hi)
        self._t_theta = (p.theta.lo, p.theta.hi)
        self._t_one_a = (self._one_a.lo, self._one_a.hi)
        two_one_a = self._one_a * 2
        self._t_2one_a = (two_one_a.lo, two_one_a.hi)
        self._t_gt = (self._gt.lo, self._gt.hi)
        self._t_et = (self._et.lo, self._et.hi)

    # -- interval evaluation ------------------------------------------------

    def eval_iv(self, x: IntervalVector) -> IntervalVector:
        return vector_field(x, self.params)

    def jac_iv(self, x: IntervalVector) -> IntervalMatrix:
        return jacobian(x, self.params)

    def eval_batch(self, lo: np.ndarray, hi: np.ndarray):
        """Vectorized field enclosure for an (m, 3) stack of boxes."""
        p = self.params
        ulo, uhi = lo[:, 0], hi[:, 0]
        vlo, vhi = lo[:, 1], hi[:, 1]
        wlo, whi = lo[:, 2], hi[:, 2]
        m = ulo.shape[0]

        def full(c: Interval):
            return np.full(m, c.lo), np.full(m, c.hi)

        # g(u) = u * (u - a) * (1 - u), factored as in the scalar path
        alo_, ahi_ = full(p.a)
        f1lo, f1hi = v_sub(ulo, uhi, alo_, ahi_)
        onelo, onehi = np.ones(m), np.ones(m)
        f2lo, f2hi = v_sub(onelo, onehi, ulo, uhi)
        glo, ghi = v_mul(ulo, uhi, f1lo, f1hi)
        glo, ghi = v_mul(glo, ghi, f2lo, f2hi)
        # theta*v - g + w
        slo, shi = v_mul(*full(p.theta), vlo, vhi)
        slo, shi = v_sub(slo, shi, glo, ghi)
        slo, shi = v_add(slo, shi, wlo, whi)
        fvlo, fvhi = v_mul(*full(p.gamma), slo, shi)
        # (eps/theta)(u - w)
        dlo, dhi = v_sub(ulo, uhi, wlo, whi)
        fwlo, fwhi = v_mul(*full(self._et), dlo, dhi)
        out_lo = np.stack([vlo, fvlo, fwlo], axis=1)
        out_hi = np.stack([vhi, fvhi, fwhi], axis=1)
        return out_lo, out_hi

    # -- float evaluation -----------------------------------------------------

    def eval_np(self, x: np.ndarray) -> np.ndarray:
        u, v, w = x[..., 0], x[..., 1], x[..., 2]
        g = u * (u - self._a_f) * (1.0 - u)
        return np.stack(
            [
                v,
                self._g_f * (self._t_f * v - g + w),
                (self._e_f / self._t_f) * (u - w),
            ],
            axis=-1,
        )

    def jac_np(self, x: np.ndarray) -> np.ndarray:
        u = x[0]
        et = self._e_f / self._t_f
        return np.array(
            [
                [0.0, 1.0, 0.0],
                [-self._g_f * cubic_deriv_float(u, self._a_f), self._g_f * self._t_f, self._g_f],
                [et, 0.0, -et],
            ]
        )

    # -- Taylor jets ----------------------------------------------------------
    #
    # Jet arithmetic runs on (lo, hi) float pairs (see integrator._jets) for
    # speed; series[k] is a tuple of per-coordinate pairs.

    def series_coeff(self, series, k: int, scratch: dict):
        """Coefficient k of f(x(t)) from solution coefficients 0..k."""
        from ._jets import tadd, tconv, tmul, tneg, tsub

        u = scratch.setdefault("u", [])
        v = scratch.setdefault("v", [])
        w = scratch.setdefault("w", [])
        u2 = scratch.setdefault("u2", [])
        u3 = scratch.setdefault("u3", [])
        while len(u) <= k:
            j = len(u)
            u.append(series[j][0])
            v.append(series[j][1])
            w.append(series[j][2])
            u2.append(tconv(u, u, j))
            u3.append(tconv(u2, u, j))
        gk = tadd(tneg(u3[k]), tsub(tmul(self._t_one_a, u2[k]), tmul(self._t_a, u[k])))
        fv = tmul(self._t_gamma, tadd(tsub(tmul(self._t_theta, v[k]), gk), w[k]))
        fw = tmul(self._t_et, tsub(u[k], w[k]))
        return (v[k], fv, fw)

    def dfx_series_coeff(self, series, k: int, scratch: dict):
        """Coefficient k of Df(x(t)) as a sparse [(i, j, pair)] list."""
        from ._jets import tmul, tneg, tsub

        self.series_coeff(series, k, scratch)  # ensure u, u2 caches
        u = scratch["u"]
        u2 = scratch["u2"]
        gp_k = tsub(tmul(self._t_2one_a, u[k]), tmul((3.0, 3.0), u2[k]))
        if k == 0:
            gp_k = tsub(gp_k, self._t_a)
        e21 = tneg(tmul(self._t_gamma, gp_k))
        if k == 0:
            return [
                (0, 1, (1.0, 1.0)),
                (1, 0, e21),
                (1, 1, self._t_gt),
                (1, 2, self._t_gamma),
                (2, 0, self._t_et),
                (2, 2, tneg(self._t_et)),
            ]
        return [(1, 0, e21)]

    def negated(self) -> "NegatedField":
        return NegatedField(self)


class NegatedField:
    """Time-reversed field: every evaluation is negated."""

    def __init__(self, base):
        self.base = base
        self.dim = base.dim

    def eval_iv(self, x):
        return -self.base.eval_iv(x)

    def jac_iv(self, x):
        return -self.base.jac_iv(x)

    def eval_np(self, x):
        return -self.base.eval_np(x)

    def jac_np(self, x):
        return -self.base.jac_np(x)

    def eval_batch(self, lo, hi):
        blo, bhi = self.base.eval_batch(lo, hi)
        return -bhi, -blo

    def series_coeff(self, series, k, scratch):
        return tuple((-hi, -lo) for (lo, hi) in self.base.series_coeff(series, k, scratch))

    def dfx_series_coeff(self, series, k, scratch):
        entries = self.base.dfx_series_coeff(series, k, scratch)
        return [(i, j, (-hi, -lo)) for (i, j, (lo, hi)) in entries]

    def negated(self):
        return self.base
