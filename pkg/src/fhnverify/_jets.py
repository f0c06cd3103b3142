"""Interval arithmetic on bare (lo, hi) float pairs for the jet hot path.

These mirror the scalar Interval operations (same rounding policy, same
error-free shortcuts) without object construction overhead.  Soundness
contract: every function returns a pair enclosing the exact real result set.
Overflow is deferred: callers check finiteness when packaging results.
"""

from __future__ import annotations

from .intervals import _add2, _div2, _mul2

ZERO = (0.0, 0.0)


def tadd(a, b):
    alo, ahi = a
    blo, bhi = b
    if alo == 0.0 and ahi == 0.0:
        return b
    if blo == 0.0 and bhi == 0.0:
        return a
    return _add2(alo, blo)[0], _add2(ahi, bhi)[1]


def tsub(a, b):
    alo, ahi = a
    blo, bhi = b
    if blo == 0.0 and bhi == 0.0:
        return a
    if alo == 0.0 and ahi == 0.0:
        return -bhi, -blo
    return _add2(alo, -bhi)[0], _add2(ahi, -blo)[1]


def tneg(a):
    return -a[1], -a[0]


def tmul(a, b):
    alo, ahi = a
    blo, bhi = b
    if (alo == 0.0 and ahi == 0.0) or (blo == 0.0 and bhi == 0.0):
        return ZERO
    if alo >= 0.0:
        if blo >= 0.0:
            return _mul2(alo, blo)[0], _mul2(ahi, bhi)[1]
        if bhi <= 0.0:
            return _mul2(ahi, blo)[0], _mul2(alo, bhi)[1]
        return _mul2(ahi, blo)[0], _mul2(ahi, bhi)[1]
    if ahi <= 0.0:
        if blo >= 0.0:
            return _mul2(alo, bhi)[0], _mul2(ahi, blo)[1]
        if bhi <= 0.0:
            return _mul2(ahi, bhi)[0], _mul2(alo, blo)[1]
        return _mul2(alo, bhi)[0], _mul2(alo, blo)[1]
    if blo >= 0.0:
        return _mul2(alo, bhi)[0], _mul2(ahi, bhi)[1]
    if bhi <= 0.0:
        return _mul2(ahi, blo)[0], _mul2(alo, blo)[1]
    c1 = _mul2(alo, bhi)
    c2 = _mul2(ahi, blo)
    c3 = _mul2(alo, blo)
    c4 = _mul2(ahi, bhi)
    return min(c1[0], c2[0]), max(c3[1], c4[1])


def tdivn(a, n: int):
    """Divide by a positive integer."""
    return _div2(a[0], n)[0], _div2(a[1], n)[1]


def tconv(xs, ys, k: int):
    """Coefficient k of the Cauchy product of coefficient lists xs, ys."""
    acc = tmul(xs[0], ys[k])
    for j in range(1, k + 1):
        acc = tadd(acc, tmul(xs[j], ys[k - j]))
    return acc


def thull(a, b):
    return min(a[0], b[0]), max(a[1], b[1])


def tpow_interval(t, k: int):
    """Enclosure of tau**k for tau in t = (lo, hi), 0 <= lo."""
    if k == 0:
        return (1.0, 1.0)
    acc = t
    for _ in range(k - 1):
        acc = tmul(acc, t)
    return acc
