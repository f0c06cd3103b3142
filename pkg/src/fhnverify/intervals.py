"""Outward-rounded interval arithmetic: scalars, vectors, matrices.

Rounding policy (uniform across the package): all arithmetic is performed in
round-to-nearest and the result is widened to the next representable double
on the outside whenever the operation may have rounded.  Scalar operations
use error-free transformations (TwoSum for +/-, Dekker's product for */ and
sqrt, guarded against over/underflow) to detect exact results and skip the
widening, so integer-endpoint arithmetic stays exact.  Batch (numpy) kernels
always widen by one ulp.  The FPU rounding mode is never touched, so results
are reproducible regardless of the host's fenv handling.

The empty interval is not representable; an empty intersection raises
EmptyIntersection instead of producing a value.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    DivisionByZeroInterval,
    EmptyIntersection,
    Overflow,
)

_INF = math.inf
_SPLITTER = 134217729.0  # 2**27 + 1, Dekker/Veltkamp split constant

# Dekker's error term is exact only away from the over/underflow ranges.
_DEKKER_MAX = 1e300
_DEKKER_MIN = 1e-290


def _up(x: float) -> float:
    return math.nextafter(x, _INF)


def _dn(x: float) -> float:
    return math.nextafter(x, -_INF)


def _add2(a: float, b: float) -> tuple[float, float]:
    """Enclosure of the exact sum a+b (TwoSum; exact when it can be)."""
    s = a + b
    bv = s - a
    err = (a - (s - bv)) + (b - bv)
    if err > 0.0:
        return s, _up(s)
    if err < 0.0:
        return _dn(s), s
    return s, s


def _mul2(a: float, b: float) -> tuple[float, float]:
    """Enclosure of the exact product a*b (Dekker where safe)."""
    p = a * b
    if p == 0.0:
        if a == 0.0 or b == 0.0:
            return 0.0, 0.0
        return _dn(p), _up(p)  # underflowed to zero
    if not (
        (_DEKKER_MIN < p < _DEKKER_MAX or -_DEKKER_MAX < p < -_DEKKER_MIN)
        and -_DEKKER_MAX < a < _DEKKER_MAX
        and -_DEKKER_MAX < b < _DEKKER_MAX
    ):
        return _dn(p), _up(p)
    ca = _SPLITTER * a
    ah = ca - (ca - a)
    al = a - ah
    cb = _SPLITTER * b
    bh = cb - (cb - b)
    bl = b - bh
    err = ((ah * bh - p) + ah * bl + al * bh) + al * bl
    if err > 0.0:
        return p, _up(p)
    if err < 0.0:
        return _dn(p), p
    return p, p


def _div2(a: float, b: float) -> tuple[float, float]:
    """Enclosure of the exact quotient a/b, b != 0."""
    q = a / b
    if q == 0.0 and a == 0.0:
        return 0.0, 0.0
    aq, ab2 = abs(q), abs(b)
    if aq > _DEKKER_MAX or ab2 > _DEKKER_MAX or aq * ab2 < _DEKKER_MIN or aq < _DEKKER_MIN:
        return _dn(q), _up(q)
    # q exact iff q*b == a exactly; Dekker gives the rounding error of q*b.
    p = q * b
    cq = _SPLITTER * q
    qh = cq - (cq - q)
    ql = q - qh
    cb = _SPLITTER * b
    bh = cb - (cb - b)
    bl = b - bh
    err = ((qh * bh - p) + qh * bl + ql * bh) + ql * bl
    # exact product of q and b is p + err; compare with a
    if p == a and err == 0.0:
        return q, q
    # sign of (q*b - a) tells which side fl rounded to, accounting for b's sign
    diff = (p - a) + err
    if diff == 0.0:
        return q, q
    high = (diff < 0.0) == (b > 0.0)  # q underestimates a/b
    if high:
        return q, _up(q)
    return _dn(q), q


def _sqrt2(x: float) -> tuple[float, float]:
    r = math.sqrt(x)
    if r * r == x:
        # confirm exactness with Dekker (r*r may have rounded to x)
        if r == 0.0 or (r < _DEKKER_MAX and r * r > _DEKKER_MIN):
            cr = _SPLITTER * r
            rh = cr - (cr - r)
            rl = r - rh
            err = ((rh * rh - x) + 2.0 * rh * rl) + rl * rl
            if err == 0.0:
                return r, r
    return _dn(r), _up(r)


class Interval:
    """Closed interval [lo, hi] with finite double endpoints."""

    __slots__ = ("lo", "hi")

    def __init__(self, lo: float, hi: float | None = None):
        lo = float(lo)
        hi = lo if hi is None else float(hi)
        if math.isnan(lo) or math.isnan(hi):
            raise ValueError("NaN interval bound")
        if math.isinf(lo) or math.isinf(hi):
            raise Overflow(f"non-finite interval bound [{lo}, {hi}]")
        if lo > hi:
            raise ValueError(f"inverted interval bounds [{lo}, {hi}]")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    def __setattr__(self, name, value):
        raise AttributeError("Interval is immutable")

    @staticmethod
    def from_decimal(text: str) -> "Interval":
        """Tightest interval containing the exact decimal value of `text`."""
        exact = Fraction(text)
        f = float(exact)
        if math.isinf(f):
            raise Overflow(f"decimal {text!r} outside double range")
        ff = Fraction(f)
        if ff == exact:
            return Interval(f)
        if ff < exact:
            return Interval(f, _up(f))
        return Interval(_dn(f), f)

    @staticmethod
    def coerce(x) -> "Interval":
        if isinstance(x, Interval):
            return x
        if isinstance(x, str):
            return Interval.from_decimal(x)
        return Interval(float(x))

    # -- queries ----------------------------------------------------------

    @property
    def mid(self) -> float:
        m = 0.5 * (self.lo + self.hi)
        if not math.isfinite(m):
            m = 0.5 * self.lo + 0.5 * self.hi
        return min(max(m, self.lo), self.hi)

    @property
    def width(self) -> float:
        return _add2(self.hi, -self.lo)[1]

    @property
    def rad(self) -> float:
        return 0.5 * self.width

    @property
    def mag(self) -> float:
        return max(abs(self.lo), abs(self.hi))

    @property
    def mig(self) -> float:
        if self.lo <= 0.0 <= self.hi:
            return 0.0
        return min(abs(self.lo), abs(self.hi))

    def is_thin(self) -> bool:
        return self.lo == self.hi

    def contains(self, x) -> bool:
        if isinstance(x, Interval):
            return self.lo <= x.lo and x.hi <= self.hi
        return self.lo <= x <= self.hi

    def interior_contains(self, x) -> bool:
        if isinstance(x, Interval):
            return self.lo < x.lo and x.hi < self.hi
        return self.lo < x < self.hi

    def __contains__(self, x) -> bool:
        return self.contains(x)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Interval)
            and self.lo == other.lo
            and self.hi == other.hi
        )

    def __hash__(self):
        return hash((self.lo, self.hi))

    def __repr__(self) -> str:
        return f"Interval({self.lo!r}, {self.hi!r})"

    # -- set operations ----------------------------------------------------

    def hull(self, other: "Interval") -> "Interval":
        other = Interval.coerce(other)
        return Interval(min(self.lo, other.lo), max(self.hi, other.hi))

    def intersect(self, other: "Interval") -> "Interval":
        other = Interval.coerce(other)
        lo = max(self.lo, other.lo)
        hi = min(self.hi, other.hi)
        if lo > hi:
            raise EmptyIntersection(f"{self} and {other} are disjoint")
        return Interval(lo, hi)

    def split(self, parts: int) -> list["Interval"]:
        """Partition into `parts` pieces sharing endpoints, hull-exact."""
        if parts < 1:
            raise ValueError("parts must be >= 1")
        if parts == 1:
            return [self]
        cuts = [self.lo]
        w = self.hi - self.lo
        for i in range(1, parts):
            t = self.lo + w * (i / parts)
            cuts.append(min(max(t, cuts[-1]), self.hi))
        cuts.append(self.hi)
        return [Interval(cuts[i], cuts[i + 1]) for i in range(parts)]

    # -- arithmetic ---------------------------------------------------------

    def _check(self, lo: float, hi: float) -> "Interval":
        if math.isinf(lo) or math.isinf(hi):
            raise Overflow(f"interval operation overflowed to [{lo}, {hi}]")
        return Interval(lo, hi)

    def __neg__(self) -> "Interval":
        return Interval(-self.hi, -self.lo)

    def __add__(self, other) -> "Interval":
        other = Interval.coerce(other)
        if self.lo == 0.0 and self.hi == 0.0:
            return other
        if other.lo == 0.0 and other.hi == 0.0:
            return self
        return self._check(_add2(self.lo, other.lo)[0], _add2(self.hi, other.hi)[1])

    __radd__ = __add__

    def __sub__(self, other) -> "Interval":
        other = Interval.coerce(other)
        if other.lo == 0.0 and other.hi == 0.0:
            return self
        return self._check(_add2(self.lo, -other.hi)[0], _add2(self.hi, -other.lo)[1])

    def __rsub__(self, other) -> "Interval":
        return Interval.coerce(other).__sub__(self)

    def __mul__(self, other) -> "Interval":
        other = Interval.coerce(other)
        a, b = self, other
        if (a.lo == 0.0 and a.hi == 0.0) or (b.lo == 0.0 and b.hi == 0.0):
            return Interval(0.0)
        if b.lo == 1.0 and b.hi == 1.0:
            return a
        if a.lo == 1.0 and a.hi == 1.0:
            return b
        c1 = _mul2(a.lo, b.lo)
        c2 = _mul2(a.lo, b.hi)
        c3 = _mul2(a.hi, b.lo)
        c4 = _mul2(a.hi, b.hi)
        return self._check(
            min(c1[0], c2[0], c3[0], c4[0]), max(c1[1], c2[1], c3[1], c4[1])
        )

    __rmul__ = __mul__

    def __truediv__(self, other) -> "Interval":
        other = Interval.coerce(other)
        if other.lo <= 0.0 <= other.hi:
            raise DivisionByZeroInterval(f"denominator {other} contains 0")
        if other.lo == 1.0 and other.hi == 1.0:
            return self
        c1 = _div2(self.lo, other.lo)
        c2 = _div2(self.lo, other.hi)
        c3 = _div2(self.hi, other.lo)
        c4 = _div2(self.hi, other.hi)
        return self._check(
            min(c1[0], c2[0], c3[0], c4[0]), max(c1[1], c2[1], c3[1], c4[1])
        )

    def __rtruediv__(self, other) -> "Interval":
        return Interval.coerce(other).__truediv__(self)

    def sqr(self) -> "Interval":
        lo2 = _mul2(self.lo, self.lo)
        hi2 = _mul2(self.hi, self.hi)
        hi = max(lo2[1], hi2[1])
        if self.lo <= 0.0 <= self.hi:
            return self._check(0.0, hi)
        return self._check(min(lo2[0], hi2[0]), hi)

    def sqrt(self) -> "Interval":
        if self.lo < 0.0:
            raise ValueError(f"sqrt of {self} with negative part")
        lo = _sqrt2(self.lo)[0] if self.lo > 0.0 else 0.0
        return self._check(max(lo, 0.0), _sqrt2(self.hi)[1])

    def __pow__(self, n: int) -> "Interval":
        if not isinstance(n, int) or n < 0:
            raise ValueError("only nonnegative integer powers")
        if n == 0:
            return Interval(1.0)
        if n == 1:
            return self
        if n % 2 == 0:
            return self.sqr() ** (n // 2) if n > 2 else self.sqr()
        return self * (self ** (n - 1))

    def __abs__(self) -> "Interval":
        if self.lo >= 0.0:
            return self
        if self.hi <= 0.0:
            return -self
        return Interval(0.0, self.mag)


ZERO = Interval(0.0)
ONE = Interval(1.0)


def hull(a, b):
    """Smallest interval object containing both arguments (componentwise)."""
    if isinstance(a, Interval):
        return a.hull(b)
    return a.hull(b)  # IntervalVector / IntervalMatrix define .hull too


def intersect(a, b):
    return a.intersect(b)


def poly_eval(coeffs: Sequence, x) -> Interval:
    """Horner evaluation of sum(coeffs[k] * x**k) over the interval x."""
    x = Interval.coerce(x)
    acc = Interval.coerce(coeffs[-1])
    for c in reversed(coeffs[:-1]):
        acc = acc * x + Interval.coerce(c)
    return acc


# ---------------------------------------------------------------------------
# Batch kernels on (lo, hi) ndarray pairs.  Sound via one-ulp outward nudge;
# they do not attempt exactness detection.
# ---------------------------------------------------------------------------


def v_add(alo, ahi, blo, bhi):
    return np.nextafter(alo + blo, -_INF), np.nextafter(ahi + bhi, _INF)


def v_sub(alo, ahi, blo, bhi):
    return np.nextafter(alo - bhi, -_INF), np.nextafter(ahi - blo, _INF)


def v_mul(alo, ahi, blo, bhi):
    p1 = alo * blo
    p2 = alo * bhi
    p3 = ahi * blo
    p4 = ahi * bhi
    lo = np.minimum(np.minimum(p1, p2), np.minimum(p3, p4))
    hi = np.maximum(np.maximum(p1, p2), np.maximum(p3, p4))
    return np.nextafter(lo, -_INF), np.nextafter(hi, _INF)


def v_scale(alo, ahi, c: float):
    """Multiply by a thin float scalar."""
    if c >= 0.0:
        lo, hi = alo * c, ahi * c
    else:
        lo, hi = ahi * c, alo * c
    return np.nextafter(lo, -_INF), np.nextafter(hi, _INF)


def v_check_finite(lo, hi):
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
        raise Overflow("batch interval operation overflowed")


class IntervalVector:
    """Vector of intervals backed by lo/hi float64 arrays."""

    __slots__ = ("lo", "hi")

    @classmethod
    def _raw(cls, lo: np.ndarray, hi: np.ndarray) -> "IntervalVector":
        """Internal fast path: bounds already validated by the caller."""
        out = object.__new__(cls)
        out.lo = lo
        out.hi = hi
        return out

    def __init__(self, lo, hi=None):
        if hi is None:
            if len(lo) > 0 and isinstance(lo[0], Interval):
                hi = np.array([iv.hi for iv in lo], dtype=float)
                lo = np.array([iv.lo for iv in lo], dtype=float)
            else:
                lo = np.asarray(lo, dtype=float).copy()
                hi = lo.copy()
        else:
            lo = np.asarray(lo, dtype=float).copy()
            hi = np.asarray(hi, dtype=float).copy()
        if lo.shape != hi.shape or lo.ndim != 1:
            raise DimensionMismatch("lo/hi shape mismatch")
        if np.any(np.isnan(lo)) or np.any(np.isnan(hi)):
            raise ValueError("NaN bound")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise Overflow("non-finite interval vector bound")
        if np.any(lo > hi):
            raise ValueError("inverted bounds")
        self.lo = lo
        self.hi = hi

    @staticmethod
    def from_point(p) -> "IntervalVector":
        return IntervalVector(np.asarray(p, dtype=float))

    @staticmethod
    def from_box(center, rad) -> "IntervalVector":
        center = np.asarray(center, dtype=float)
        rad = np.broadcast_to(np.asarray(rad, dtype=float), center.shape)
        return IntervalVector(center - rad, center + rad)

    @property
    def dim(self) -> int:
        return self.lo.shape[0]

    def __len__(self) -> int:
        return self.dim

    def __getitem__(self, i) -> Interval:
        if isinstance(i, slice):
            return IntervalVector(self.lo[i], self.hi[i])
        return Interval(self.lo[i], self.hi[i])

    def __iter__(self):
        for i in range(self.dim):
            yield Interval(self.lo[i], self.hi[i])

    def mid(self) -> np.ndarray:
        m = 0.5 * (self.lo + self.hi)
        return np.clip(m, self.lo, self.hi)

    def width(self) -> np.ndarray:
        return np.nextafter(self.hi - self.lo, _INF)

    def max_width(self) -> float:
        return float(np.max(self.width())) if self.dim else 0.0

    def mag(self) -> float:
        return float(max(np.max(np.abs(self.lo)), np.max(np.abs(self.hi))))

    def contains(self, other) -> bool:
        other = _as_vector(other, self.dim)
        return bool(np.all(self.lo <= other.lo) and np.all(other.hi <= self.hi))

    def interior_contains(self, other) -> bool:
        other = _as_vector(other, self.dim)
        return bool(np.all(self.lo < other.lo) and np.all(other.hi < self.hi))

    def hull(self, other) -> "IntervalVector":
        other = _as_vector(other, self.dim)
        return IntervalVector(
            np.minimum(self.lo, other.lo), np.maximum(self.hi, other.hi)
        )

    def intersect(self, other) -> "IntervalVector":
        other = _as_vector(other, self.dim)
        lo = np.maximum(self.lo, other.lo)
        hi = np.minimum(self.hi, other.hi)
        if np.any(lo > hi):
            raise EmptyIntersection("disjoint interval vectors")
        return IntervalVector(lo, hi)

    def disjoint(self, other) -> bool:
        other = _as_vector(other, self.dim)
        return bool(np.any(self.lo > other.hi) or np.any(self.hi < other.lo))

    def __add__(self, other) -> "IntervalVector":
        other = _as_vector(other, self.dim)
        lo, hi = v_add(self.lo, self.hi, other.lo, other.hi)
        v_check_finite(lo, hi)
        return IntervalVector._raw(lo, hi)

    def __sub__(self, other) -> "IntervalVector":
        other = _as_vector(other, self.dim)
        lo, hi = v_sub(self.lo, self.hi, other.lo, other.hi)
        v_check_finite(lo, hi)
        return IntervalVector._raw(lo, hi)

    def __neg__(self) -> "IntervalVector":
        return IntervalVector(-self.hi, -self.lo)

    def scale(self, s) -> "IntervalVector":
        """Multiply every entry by a scalar Interval or float."""
        if isinstance(s, Interval) and not s.is_thin():
            lo, hi = v_mul(
                self.lo, self.hi, np.full(self.dim, s.lo), np.full(self.dim, s.hi)
            )
        else:
            c = s.lo if isinstance(s, Interval) else float(s)
            lo, hi = v_scale(self.lo, self.hi, c)
        v_check_finite(lo, hi)
        return IntervalVector._raw(lo, hi)

    def __mul__(self, s):
        return self.scale(s)

    __rmul__ = __mul__

    def __repr__(self) -> str:
        parts = ", ".join(f"[{l!r}, {h!r}]" for l, h in zip(self.lo, self.hi))
        return f"IntervalVector({parts})"


def _as_vector(x, dim: int) -> IntervalVector:
    if isinstance(x, IntervalVector):
        v = x
    else:
        v = IntervalVector.from_point(x) if not isinstance(x, Interval) else None
        if v is None:
            raise DimensionMismatch("cannot coerce scalar Interval to vector")
    if v.dim != dim:
        raise DimensionMismatch(f"dimension {v.dim} != {dim}")
    return v


class IntervalMatrix:
    """Rectangular matrix of intervals backed by lo/hi float64 arrays."""

    __slots__ = ("lo", "hi")

    @classmethod
    def _raw(cls, lo: np.ndarray, hi: np.ndarray) -> "IntervalMatrix":
        out = object.__new__(cls)
        out.lo = lo
        out.hi = hi
        return out

    def __init__(self, lo, hi=None):
        if hi is None and isinstance(lo, (list, tuple)) and lo and isinstance(lo[0], (list, tuple)):
            rows = lo
            lo = np.array([[Interval.coerce(e).lo for e in r] for r in rows])
            hi = np.array([[Interval.coerce(e).hi for e in r] for r in rows])
        elif hi is None:
            lo = np.asarray(lo, dtype=float).copy()
            hi = lo.copy()
        else:
            lo = np.asarray(lo, dtype=float).copy()
            hi = np.asarray(hi, dtype=float).copy()
        if lo.shape != hi.shape or lo.ndim != 2:
            raise DimensionMismatch("matrix lo/hi shape mismatch")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise Overflow("non-finite interval matrix bound")
        if np.any(lo > hi):
            raise ValueError("inverted bounds")
        self.lo = lo
        self.hi = hi

    @staticmethod
    def identity(n: int) -> "IntervalMatrix":
        return IntervalMatrix(np.eye(n))

    @property
    def shape(self) -> tuple[int, int]:
        return self.lo.shape

    @property
    def rows(self) -> int:
        return self.lo.shape[0]

    @property
    def cols(self) -> int:
        return self.lo.shape[1]

    def __getitem__(self, ij) -> Interval:
        return Interval(self.lo[ij], self.hi[ij])

    def mid(self) -> np.ndarray:
        return np.clip(0.5 * (self.lo + self.hi), self.lo, self.hi)

    def width(self) -> np.ndarray:
        return np.nextafter(self.hi - self.lo, _INF)

    def max_width(self) -> float:
        return float(np.max(self.width()))

    def contains(self, other) -> bool:
        if isinstance(other, IntervalMatrix):
            return bool(np.all(self.lo <= other.lo) and np.all(other.hi <= self.hi))
        m = np.asarray(other, dtype=float)
        return bool(np.all(self.lo <= m) and np.all(m <= self.hi))

    def hull(self, other: "IntervalMatrix") -> "IntervalMatrix":
        return IntervalMatrix(
            np.minimum(self.lo, other.lo), np.maximum(self.hi, other.hi)
        )

    def transpose(self) -> "IntervalMatrix":
        return IntervalMatrix(self.lo.T, self.hi.T)

    def __add__(self, other: "IntervalMatrix") -> "IntervalMatrix":
        lo, hi = v_add(self.lo, self.hi, other.lo, other.hi)
        v_check_finite(lo, hi)
        return IntervalMatrix(lo, hi)

    def __sub__(self, other: "IntervalMatrix") -> "IntervalMatrix":
        lo, hi = v_sub(self.lo, self.hi, other.lo, other.hi)
        v_check_finite(lo, hi)
        return IntervalMatrix(lo, hi)

    def __neg__(self) -> "IntervalMatrix":
        return IntervalMatrix(-self.hi, -self.lo)

    def scale(self, s) -> "IntervalMatrix":
        if isinstance(s, Interval) and not s.is_thin():
            slo = np.full(self.shape, s.lo)
            shi = np.full(self.shape, s.hi)
            lo, hi = v_mul(self.lo, self.hi, slo, shi)
        else:
            c = s.lo if isinstance(s, Interval) else float(s)
            lo, hi = v_scale(self.lo, self.hi, c)
        v_check_finite(lo, hi)
        return IntervalMatrix(lo, hi)

    def matvec(self, v) -> IntervalVector:
        """Inclusion-isotone interval matrix-vector product."""
        v = _as_vector(v, self.cols)
        acc_lo = np.zeros(self.rows)
        acc_hi = np.zeros(self.rows)
        for k in range(self.cols):
            plo, phi = v_mul(
                self.lo[:, k],
                self.hi[:, k],
                np.full(self.rows, v.lo[k]),
                np.full(self.rows, v.hi[k]),
            )
            acc_lo, acc_hi = v_add(acc_lo, acc_hi, plo, phi)
        v_check_finite(acc_lo, acc_hi)
        return IntervalVector._raw(acc_lo, acc_hi)

    def matmul(self, other: "IntervalMatrix") -> "IntervalMatrix":
        if self.cols != other.rows:
            raise DimensionMismatch("matmul shape mismatch")
        acc_lo = np.zeros((self.rows, other.cols))
        acc_hi = np.zeros((self.rows, other.cols))
        for k in range(self.cols):
            plo, phi = v_mul(
                self.lo[:, k : k + 1],
                self.hi[:, k : k + 1],
                other.lo[k : k + 1, :],
                other.hi[k : k + 1, :],
            )
            acc_lo, acc_hi = v_add(acc_lo, acc_hi, plo, phi)
        v_check_finite(acc_lo, acc_hi)
        return IntervalMatrix._raw(acc_lo, acc_hi)

    def __matmul__(self, other):
        if isinstance(other, IntervalVector):
            return self.matvec(other)
        if isinstance(other, IntervalMatrix):
            return self.matmul(other)
        other = np.asarray(other, dtype=float)
        if other.ndim == 1:
            return self.matvec(IntervalVector.from_point(other))
        return self.matmul(IntervalMatrix(other))

    def __repr__(self) -> str:
        return f"IntervalMatrix(lo={self.lo!r}, hi={self.hi!r})"


def matrix_from_float(m) -> IntervalMatrix:
    return IntervalMatrix(np.asarray(m, dtype=float))


def linear_solve(A: IntervalMatrix, b: IntervalVector, precondition: bool = True) -> IntervalVector:
    """Enclosure of { x : Mx = v, M in A, v in b } by interval elimination.

    Optionally preconditions by the midpoint inverse (still an enclosure:
    every M x = v implies (CM) x = Cv with CM in C*A, Cv in C*b), which keeps
    the elimination stable on the large Newton systems.  Pivots are chosen by
    midpoint magnitude; a pivot whose enclosure contains zero is skipped, and
    if no admissible pivot exists the matrix enclosure is reported singular.
    """
    from .errors import SingularEnclosure

    n = A.rows
    if A.cols != n or b.dim != n:
        raise DimensionMismatch("linear_solve expects square A and matching b")
    if precondition and n > 1:
        try:
            C = np.linalg.inv(A.mid())
        except np.linalg.LinAlgError as exc:
            raise SingularEnclosure("midpoint matrix not invertible") from exc
        CA = IntervalMatrix(C).matmul(A)
        Cb = IntervalMatrix(C).matvec(b)
        A, b = CA, Cb

    alo = A.lo.copy()
    ahi = A.hi.copy()
    blo = b.lo.copy()
    bhi = b.hi.copy()
    perm = list(range(n))

    for col in range(n):
        # choose a pivot row by midpoint magnitude among rows with 0 not in pivot
        best, best_mag = -1, -1.0
        for r in range(col, n):
            plo, phi = alo[perm[r], col], ahi[perm[r], col]
            if plo <= 0.0 <= phi:
                continue
            m = abs(plo + phi)
            if m > best_mag:
                best, best_mag = r, m
        if best < 0:
            raise SingularEnclosure(f"no admissible pivot in column {col}")
        perm[col], perm[best] = perm[best], perm[col]
        p = perm[col]
        plo_, phi_ = alo[p, col], ahi[p, col]
        for r in range(col + 1, n):
            q = perm[r]
            qlo, qhi = alo[q, col], ahi[q, col]
            if qlo == 0.0 and qhi == 0.0:
                continue
            f = Interval(qlo, qhi) / Interval(plo_, phi_)
            flo = np.full(n - col, f.lo)
            fhi = np.full(n - col, f.hi)
            mlo, mhi = v_mul(flo, fhi, alo[p, col:], ahi[p, col:])
            alo[q, col:], ahi[q, col:] = v_sub(alo[q, col:], ahi[q, col:], mlo, mhi)
            alo[q, col] = ahi[q, col] = 0.0
            fb = f * Interval(blo[p], bhi[p])
            d = Interval(blo[q], bhi[q]) - fb
            blo[q], bhi[q] = d.lo, d.hi
        v_check_finite(alo, ahi)

    xlo = np.zeros(n)
    xhi = np.zeros(n)
    for col in range(n - 1, -1, -1):
        p = perm[col]
        acc = Interval(blo[p], bhi[p])
        if col + 1 < n:
            plo, phi = v_mul(alo[p, col + 1 :], ahi[p, col + 1 :], xlo[col + 1 :], xhi[col + 1 :])
            # entries that are exactly zero contribute exactly zero
            zero = (alo[p, col + 1 :] == 0.0) & (ahi[p, col + 1 :] == 0.0)
            plo[zero] = 0.0
            phi[zero] = 0.0
            s = Interval(0.0)
            for l, h in zip(plo, phi):
                s = s + Interval(l, h)
            acc = acc - s
        x = acc / Interval(alo[p, col], ahi[p, col])
        xlo[col], xhi[col] = x.lo, x.hi
    return IntervalVector(xlo, xhi)


def split_box(x: IntervalVector, parts) -> list[IntervalVector]:
    """Partition a box into a grid of sub-boxes sharing facet endpoints."""
    if isinstance(parts, int):
        parts = [parts] * x.dim
    if len(parts) != x.dim:
        raise DimensionMismatch("one part count per axis required")
    axis_pieces = [x[i].split(int(parts[i])) for i in range(x.dim)]
    out: list[IntervalVector] = []
    idx = [0] * x.dim
    total = 1
    for p in parts:
        total *= int(p)
    for _ in range(total):
        out.append(
            IntervalVector(
                np.array([axis_pieces[i][idx[i]].lo for i in range(x.dim)]),
                np.array([axis_pieces[i][idx[i]].hi for i in range(x.dim)]),
            )
        )
        for i in range(x.dim - 1, -1, -1):
            idx[i] += 1
            if idx[i] < int(parts[i]):
                break
            idx[i] = 0
    return out
