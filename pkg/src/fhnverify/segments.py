"""Isolating segments along the slow manifold: geometry, isolation, chains.

A segment is a cuboid spanned between two slow-manifold points Front and
Rear.  Its local cube [-1,1]^2 x [0,1] maps to phase space by

    (xu, xs, xm) -> (1-xm) (Front + Pi_{a,b}(xu, xs)) + xm (Rear + Pi_{c,d}(xu, xs)),

where Pi_{a,b}(xu, xs) embeds P @ (a xu, b xs) into the fast (u, v) plane.
The central coordinate is literally w, so monotonicity (S1a) reduces to a
sign check of u - w over the support with epsilon factored out.  The side
faces are evaluated from this exact parameterization; their outward normals
come from the tangent cross product per subdivision cell, with the
orientation fixed rigorously against the ruling directions.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from .errors import NewtonDiverged
from .fhn import FhnField, FhnParams, eigen2x2, fast_linearization, slow_manifold_u
from .hsets import HSet, IdentityMapper, check_covering
from .intervals import Interval, IntervalVector, v_add, v_mul, v_scale, v_sub
from .poincare import AffineSection
from .report import Relation


def w_plane(w: float) -> AffineSection:
    """Canonical section {w = const} with coordinates (u, v)."""
    return AffineSection(
        [0.0, 0.0, w], [0.0, 0.0, 1.0], frame=np.eye(3)[:, :2]
    )


class Segment:
    __slots__ = ("front", "rear", "P", "a", "b", "c", "d", "name")

    def __init__(self, front, rear, P, a, b, c, d, name=""):
        self.front = np.asarray(front, dtype=float)
        self.rear = np.asarray(rear, dtype=float)
        self.P = np.asarray(P, dtype=float)
        self.a, self.b, self.c, self.d = float(a), float(b), float(c), float(d)
        self.name = name
        if min(self.a, self.b, self.c, self.d) <= 0.0:
            raise ValueError("face half-widths must be positive")
        if self.front[2] == self.rear[2]:
            raise ValueError("front and rear must differ in w")
        if abs(np.linalg.det(self.P)) < 1e-300:
            raise ValueError("P must be invertible")

    @property
    def w_span(self) -> float:
        return self.rear[2] - self.front[2]

    @property
    def orientation(self) -> int:
        return 1 if self.w_span > 0 else -1

    def sec_in(self) -> AffineSection:
        return w_plane(self.front[2])

    def sec_out(self) -> AffineSection:
        return w_plane(self.rear[2])

    # -- parameterization ----------------------------------------------------

    def support_point_np(self, xu: float, xs: float, xm: float) -> np.ndarray:
        alpha = (1 - xm) * self.a + xm * self.c
        beta = (1 - xm) * self.b + xm * self.d
        disp = self.P @ np.array([alpha * xu, beta * xs])
        base = (1 - xm) * self.front + xm * self.rear
        return base + np.array([disp[0], disp[1], 0.0])

    def support_enclosure(self, cell: IntervalVector) -> IntervalVector:
        """Interval image of a sub-box of [-1,1]^2 x [0,1]."""
        xu, xs, xm = cell[0], cell[1], cell[2]
        # single occurrence of xm keeps the width interpolation tight
        alpha = Interval(self.a) + xm * (self.c - self.a)
        beta = Interval(self.b) + xm * (self.d - self.b)
        su = alpha * xu
        sv = beta * xs
        u = Interval(self.front[0]) + xm * (self.rear[0] - self.front[0]) \
            + su * self.P[0, 0] + sv * self.P[0, 1]
        v = Interval(self.front[1]) + xm * (self.rear[1] - self.front[1]) \
            + su * self.P[1, 0] + sv * self.P[1, 1]
        w = Interval(self.front[2]) + xm * self.w_span
        return IntervalVector([u, v, w])

    def _param_batch(self, xu, xs, xm):
        """Vectorized support enclosure; each argument is an (m,) lo/hi pair."""
        m = xu[0].shape[0]

        def const(cval):
            arr = np.full(m, cval)
            return arr, arr.copy()

        alpha = v_add(*const(self.a), *v_scale(*xm, self.c - self.a))
        beta = v_add(*const(self.b), *v_scale(*xm, self.d - self.b))
        su = v_mul(*alpha, *xu)
        sv = v_mul(*beta, *xs)
        out = []
        for i in range(2):
            base = v_add(*const(self.front[i]), *v_scale(*xm, self.rear[i] - self.front[i]))
            t = v_add(*base, *v_scale(*su, self.P[i, 0]))
            t = v_add(*t, *v_scale(*sv, self.P[i, 1]))
            out.append(t)
        out.append(v_add(*const(self.front[2]), *v_scale(*xm, self.w_span)))
        lo = np.stack([out[0][0], out[1][0], out[2][0]], axis=1)
        hi = np.stack([out[0][1], out[1][1], out[2][1]], axis=1)
        return lo, hi

    # -- faces -----------------------------------------------------------------

    def in_face(self) -> HSet:
        dirs = self.P @ np.diag([self.a, self.b])
        return HSet(self.sec_in(), self.front[:2], dirs)

    def out_face(self) -> HSet:
        dirs = self.P @ np.diag([self.c, self.d])
        return HSet(self.sec_out(), self.rear[:2], dirs)

    def face(self, side: str) -> "FaceHSet":
        return FaceHSet(self, side)

    def faces(self) -> "SegmentFaces":
        return SegmentFaces(
            in_face=self.in_face(),
            out_face=self.out_face(),
            lu=self.face("lu"),
            ru=self.face("ru"),
            ls=self.face("ls"),
            rs=self.face("rs"),
        )

    def transposed(self) -> "Segment":
        """Segment for the reversed flow: exit/entry roles and ends swap."""
        return Segment(
            self.rear, self.front, self.P[:, ::-1],
            self.d, self.c, self.b, self.a, name=self.name + "^T",
        )

    def __repr__(self):
        return (
            f"Segment({self.name or 'anon'}: w {self.front[2]:.6g} -> "
            f"{self.rear[2]:.6g}, a={self.a:.4g} b={self.b:.4g} "
            f"c={self.c:.4g} d={self.d:.4g})"
        )


@dataclass
class SegmentFaces:
    in_face: HSet
    out_face: HSet
    lu: "FaceHSet"
    ru: "FaceHSet"
    ls: "FaceHSet"
    rs: "FaceHSet"


class FaceHSet:
    """Side face of a segment with the fast-slow switched h-set structure.

    Local coordinates (p, q) in [-1,1]^2.  For exit faces (lu/ru) the exit
    coordinate p is the rescaled central direction and q the segment's entry
    ruling; for entrance faces (ls/rs) p is the segment's exit ruling and the
    entry coordinate q is the rescaled central direction.  Ambient images
    always go through the exact segment parameterization.
    """

    __slots__ = ("segment", "side", "swapped")

    def __init__(self, segment: Segment, side: str, swapped: bool = False):
        if side not in ("lu", "ru", "ls", "rs"):
            raise ValueError(f"unknown face side {side!r}")
        self.segment = segment
        self.side = side
        self.swapped = swapped

    def _cube_coords(self, p: Interval, q: Interval):
        if self.swapped:
            p, q = q, p
        half = Interval(0.5)
        if self.side in ("lu", "ru"):
            xu = Interval(-1.0 if self.side == "lu" else 1.0)
            xm = (p + 1) * half
            xs = q
        else:
            xs = Interval(-1.0 if self.side == "ls" else 1.0)
            xm = (q + 1) * half
            xu = p
        return xu, xs, xm

    def ambient(self, local: IntervalVector) -> IntervalVector:
        xu, xs, xm = self._cube_coords(local[0], local[1])
        return self.segment.support_enclosure(IntervalVector([xu, xs, xm]))

    def support_cells(self, div: int) -> Iterable[tuple[str, IntervalVector]]:
        cuts = Interval(-1, 1).split(div)
        for i, cp in enumerate(cuts):
            for j, cq in enumerate(cuts):
                yield (
                    f"{self.segment.name}.{self.side}[{i},{j}]",
                    IntervalVector([cp, cq]),
                )

    def edge_cells(self, side: str, div: int) -> Iterable[tuple[str, IntervalVector]]:
        lvl = Interval(-1) if side == "exit_left" else Interval(1)
        for j, cq in enumerate(Interval(-1, 1).split(div)):
            yield (
                f"{self.segment.name}.{self.side}.{side}[{j}]",
                IntervalVector([lvl, cq]),
            )

    def corners_np(self):
        out = {}
        for pp in (-1.0, 1.0):
            for qq in (-1.0, 1.0):
                amb = self.ambient(IntervalVector([Interval(pp), Interval(qq)]))
                out[(pp, qq)] = amb.mid()
        return out

    def transposed(self) -> "FaceHSet":
        return FaceHSet(self.segment, self.side, swapped=not self.swapped)

    def enclosure_cell(self, cell: IntervalVector):
        """Parallelotope start set for a local cell, exact up to the bilinear
        term (which goes into the remainder).  Axis-aligned hulls of slanted
        cells would be amplified badly by the expanding fast flow."""
        from .integrator import EnclosureSet

        S = self.segment
        p_iv, q_iv = cell[0], cell[1]
        if self.swapped:
            p_iv, q_iv = q_iv, p_iv
        p0, hp = p_iv.mid, 0.5 * p_iv.width
        q0, hq = q_iv.mid, 0.5 * q_iv.width
        one = Interval(1)
        dR = [Interval(S.rear[i]) - Interval(S.front[i]) for i in range(3)]
        p1 = [Interval(S.P[0, 0]), Interval(S.P[1, 0]), Interval(0)]
        p2 = [Interval(S.P[0, 1]), Interval(S.P[1, 1]), Interval(0)]
        ca2 = (Interval(S.c) - S.a) * Interval(0.5)
        db2 = (Interval(S.d) - S.b) * Interval(0.5)
        if self.side in ("lu", "ru"):
            sgn = -1.0 if self.side == "lu" else 1.0
            xm0 = (Interval(p0) + one) * Interval(0.5)
            al0 = Interval(S.a) + xm0 * (S.c - S.a)
            be0 = Interval(S.b) + xm0 * (S.d - S.b)
            A0 = [Interval(S.front[i]) + xm0 * dR[i] + al0 * (sgn * 1.0) * p1[i]
                  + be0 * q0 * p2[i] for i in range(3)]
            A1 = [dR[i] * Interval(0.5) + ca2 * sgn * p1[i] + db2 * q0 * p2[i]
                  for i in range(3)]
            A2 = [be0 * p2[i] for i in range(3)]
            A3 = [db2 * p2[i] for i in range(3)]
        else:
            sgn = -1.0 if self.side == "ls" else 1.0
            xm0 = (Interval(q0) + one) * Interval(0.5)
            al0 = Interval(S.a) + xm0 * (S.c - S.a)
            be0 = Interval(S.b) + xm0 * (S.d - S.b)
            A0 = [Interval(S.front[i]) + xm0 * dR[i] + al0 * p0 * p1[i]
                  + be0 * (sgn * 1.0) * p2[i] for i in range(3)]
            A1 = [al0 * p1[i] for i in range(3)]
            A2 = [dR[i] * Interval(0.5) + ca2 * p0 * p1[i] + db2 * sgn * p2[i]
                  for i in range(3)]
            A3 = [ca2 * p1[i] for i in range(3)]

        center = np.array([x.mid for x in A0])
        c1 = np.array([x.mid for x in A1])
        c2 = np.array([x.mid for x in A2])
        # all representation slack (midpoint rounding, bilinear term) -> r
        span_p = Interval(-hp, hp)
        span_q = Interval(-hq, hq)
        span_pq = Interval(-hp * hq, hp * hq)
        extra = []
        for i in range(3):
            e = (A0[i] - center[i]) \
                + (A1[i] - Interval(c1[i])) * span_p \
                + (A2[i] - Interval(c2[i])) * span_q \
                + A3[i] * span_pq
            extra.append(e)
        # column order is immaterial: the box [-h, h]^2 is symmetric
        cols = np.column_stack([c1, c2])
        half = np.array([hp, hq])
        return EnclosureSet.from_affine(center, cols, half, IntervalVector(extra))


@dataclass
class IsolationVerdict:
    s1a: bool
    s1a_margin: float
    s2b: bool
    s2b_margin: float
    s3b: bool
    s3b_margin: float
    subdiv: int
    worst: dict

    @property
    def holds(self) -> bool:
        return self.s1a and self.s2b and self.s3b


def _axis_pairs(n: int, lo: float, hi: float):
    t = np.linspace(lo, hi, n + 1)
    return t[:-1], t[1:]


def check_s1a(S: Segment, subdiv: int = 10) -> tuple[bool, float]:
    """Sign of (u - w) over the support must match the w-orientation.

    Epsilon is factored out exactly, so a true verdict covers every eps > 0.
    """
    ulo, uhi = _axis_pairs(subdiv, -1.0, 1.0)
    mlo, mhi = _axis_pairs(subdiv, 0.0, 1.0)
    XU_lo, XS_lo, XM_lo = np.meshgrid(ulo, ulo, mlo, indexing="ij")
    XU_hi, XS_hi, XM_hi = np.meshgrid(uhi, uhi, mhi, indexing="ij")
    xu = (XU_lo.ravel(), XU_hi.ravel())
    xs = (XS_lo.ravel(), XS_hi.ravel())
    xm = (XM_lo.ravel(), XM_hi.ravel())
    lo, hi = S._param_batch(xu, xs, xm)
    dlo, dhi = v_sub(lo[:, 0], hi[:, 0], lo[:, 2], hi[:, 2])
    if S.orientation > 0:
        margin = float(np.min(dlo))
    else:
        margin = float(np.min(-dhi))
    return margin > 0.0, margin


def _face_grid(S: Segment, side: str, subdiv: int):
    """Cell arrays (xu, xs, xm pairs) plus per-cell cube data for a face."""
    rlo, rhi = _axis_pairs(subdiv, -1.0, 1.0)   # ruling coordinate
    mlo, mhi = _axis_pairs(subdiv, 0.0, 1.0)    # central coordinate
    R_lo, M_lo = np.meshgrid(rlo, mlo, indexing="ij")
    R_hi, M_hi = np.meshgrid(rhi, mhi, indexing="ij")
    m = R_lo.size
    if side in ("lu", "ru"):
        lvl = -1.0 if side == "lu" else 1.0
        xu = (np.full(m, lvl), np.full(m, lvl))
        xs = (R_lo.ravel(), R_hi.ravel())
    else:
        lvl = -1.0 if side == "ls" else 1.0
        xu = (R_lo.ravel(), R_hi.ravel())
        xs = (np.full(m, lvl), np.full(m, lvl))
    xm = (M_lo.ravel(), M_hi.ravel())
    return xu, xs, xm


def _cross_batch(a, b):
    """Componentwise interval cross product of two triples of (m,) pairs."""
    out = []
    for (i, j) in ((1, 2), (2, 0), (0, 1)):
        p1 = v_mul(*a[i], *b[j])
        p2 = v_mul(*a[j], *b[i])
        out.append(v_sub(*p1, *p2))
    return out


def _dot_batch(a, b):
    acc = v_mul(*a[0], *b[0])
    acc = v_add(*acc, *v_mul(*a[1], *b[1]))
    acc = v_add(*acc, *v_mul(*a[2], *b[2]))
    return acc


def _face_normal_margins(S: Segment, side: str, subdiv: int, field) -> np.ndarray:
    """Per-cell signed margins of <n_out, f> (positive means outward flow)."""
    xu, xs, xm = _face_grid(S, side, subdiv)
    m = xu[0].shape[0]

    def const(cval):
        arr = np.full(m, cval)
        return arr, arr.copy()

    # tangents of the parameterization at the face
    # d/d(ruling): alpha * p1 (entrance faces) or beta * p2 (exit faces)
    # d/d(central): (Rear - Front) + (c-a) xu p1 + (d-b) xs p2
    alpha = v_add(*const(S.a), *v_scale(*xm, S.c - S.a))
    beta = v_add(*const(S.b), *v_scale(*xm, S.d - S.b))
    p1 = (S.P[0, 0], S.P[1, 0], 0.0)
    p2 = (S.P[0, 1], S.P[1, 1], 0.0)
    if side in ("lu", "ru"):
        t_rule = [v_scale(*beta, p2[i]) for i in range(3)]
    else:
        t_rule = [v_scale(*alpha, p1[i]) for i in range(3)]
    dR = S.rear - S.front
    t_cent = []
    for i in range(3):
        t = const(dR[i])
        t = v_add(*t, *v_mul(*v_scale(*xu, S.c - S.a), *const(p1[i])))
        t = v_add(*t, *v_mul(*v_scale(*xs, S.d - S.b), *const(p2[i])))
        t_cent.append(t)
    n_raw = _cross_batch(t_rule, t_cent)

    # rigorous outward orientation: <n_out, ruling direction> must be
    # negative on left faces and positive on right faces
    ref = p1 if side in ("lu", "ru") else p2
    d_ref = _dot_batch(n_raw, [const(ref[i]) for i in range(3)])
    want_neg = side in ("lu", "ls")
    dlo, dhi = d_ref
    sign = np.zeros(m)
    if want_neg:
        sign[dhi < 0.0] = 1.0   # n_raw already points outward
        sign[dlo > 0.0] = -1.0
    else:
        sign[dlo > 0.0] = 1.0
        sign[dhi < 0.0] = -1.0
    degenerate = sign == 0.0

    n_out = []
    for i in range(3):
        nlo, nhi = n_raw[i]
        olo = np.where(sign >= 0.0, nlo, -nhi)
        ohi = np.where(sign >= 0.0, nhi, -nlo)
        n_out.append((olo, ohi))

    box_lo, box_hi = S._param_batch(xu, xs, xm)
    flo, fhi = field.eval_batch(box_lo, box_hi)
    inner = _dot_batch(n_out, [(flo[:, i], fhi[:, i]) for i in range(3)])

    # normalize margins by the midpoint normal length for reporting
    nmid = np.stack([0.5 * (n_out[i][0] + n_out[i][1]) for i in range(3)], axis=1)
    scale = np.maximum(np.linalg.norm(nmid, axis=1), 1e-300)
    if side in ("lu", "ru"):
        margins = inner[0] / scale          # want > 0 (exit isolation)
    else:
        margins = -inner[1] / scale         # want < 0 (entrance isolation)
    margins = np.where(degenerate, -np.inf, margins)
    return margins


def check_s2b_s3b(
    S: Segment,
    params: FhnParams,
    subdiv: int,
    field=None,
) -> IsolationVerdict:
    """Exit/entrance isolation on all four side faces (epsilon as interval)."""
    if field is None:
        field = FhnField(params)
    worst = {}
    s2b_margin = np.inf
    for side in ("lu", "ru"):
        m = _face_normal_margins(S, side, subdiv, field)
        i = int(np.argmin(m))
        if m[i] < s2b_margin:
            s2b_margin = float(m[i])
            worst["s2b"] = f"{S.name}.{side}[{i // subdiv},{i % subdiv}]"
    s3b_margin = np.inf
    for side in ("ls", "rs"):
        m = _face_normal_margins(S, side, subdiv, field)
        i = int(np.argmin(m))
        if m[i] < s3b_margin:
            s3b_margin = float(m[i])
            worst["s3b"] = f"{S.name}.{side}[{i // subdiv},{i % subdiv}]"
    return IsolationVerdict(
        s1a=True, s1a_margin=np.inf,
        s2b=s2b_margin > 0.0, s2b_margin=s2b_margin,
        s3b=s3b_margin > 0.0, s3b_margin=s3b_margin,
        subdiv=subdiv, worst=worst,
    )


def check_isolation(
    S: Segment,
    params: FhnParams,
    subdiv_faces: int,
    subdiv_s1a: int = 10,
    field=None,
) -> IsolationVerdict:
    ok1, m1 = check_s1a(S, subdiv_s1a)
    v = check_s2b_s3b(S, params, subdiv_faces, field=field)
    v.s1a = ok1
    v.s1a_margin = m1
    return v


def build_chain(
    S0: Segment,
    S_end: Segment,
    N: int,
    factor: float,
    params: FhnParams | None = None,
    blend: float = 0.25,
) -> list[Segment]:
    """Chain of N short segments connecting X_{S0,out} to X_{S_end,in}.

    Sequential recipe: each front is the previous rear; each rear is a
    Newton-corrected slow-manifold point one w-step further; P holds the
    fast-subsystem eigenvectors at the rear; the front widths shrink the
    exit by `factor` and expand the entry by `factor` relative to the
    previous rear widths, whose own widths interpolate linearly toward the
    end segment.  The last segment is pinned so its out-face equals
    X_{S_end,in} exactly.

    The corner segments' frames are anchored at the corner points, a fixed
    w-offset from the junction faces, so the local eigenframe does not meet
    them continuously.  Over the leading/trailing `blend` fraction of the
    chain the frames are interpolated toward the respective corner frame;
    one abrupt frame jump would eat the whole `factor` margin of the
    neighboring identity covering.  Every link is verified afterwards.
    """
    if params is None:
        params = FhnParams()
    if N < 1:
        raise ValueError("N must be >= 1")
    w0 = S0.rear[2]
    w1 = S_end.front[2]
    h_w = (w1 - w0) / N
    a_next, b_next = S_end.a, S_end.b
    c_prev, d_prev = S0.c, S0.d
    front = S0.rear.copy()
    chain: list[Segment] = []
    base = S0.name or "chain"
    k_blend = max(1, int(round(blend * N)))
    for i in range(1, N + 1):
        a_i = c_prev / factor
        b_i = factor * d_prev
        c_i = (i / N) * a_next + ((N - i) / N) * S0.c
        d_i = (i / N) * b_next + ((N - i) / N) * S0.d
        if i < N:
            w = front[2] + h_w
            u = slow_manifold_u(w, guess=front[0], p=params)
            rear = np.array([u, 0.0, w])
            lam_u, lam_s, _V = eigen2x2(fast_linearization(Interval(u), params))
            P_i = np.array([[1.0, 1.0], [lam_u.mid, lam_s.mid]])
            w_head = max(0.0, 1.0 - i / k_blend)
            w_tail = max(0.0, 1.0 - (N - i) / k_blend)
            if w_head > 0.0:
                P_i = (1.0 - w_head) * P_i + w_head * S0.P
            elif w_tail > 0.0:
                P_i = (1.0 - w_tail) * P_i + w_tail * S_end.P
        else:
            rear = S_end.front.copy()
            P_i = S_end.P.copy()
            c_i, d_i = a_next, b_next
        chain.append(
            Segment(front, rear, P_i, a_i, b_i, c_i, d_i, name=f"{base}->{i}")
        )
        front = rear
        c_prev, d_prev = c_i, d_i
    return chain


def verify_chain(
    chain: list[Segment],
    params: FhnParams,
    subdiv_faces: int,
    div_ident: int,
    head: Segment | None = None,
    tail: Segment | None = None,
    field=None,
    subdiv_s1a: int = 10,
) -> list[Relation]:
    """Isolation of every chain segment plus the identity coverings.

    With `head` given, also checks X_{head,out} => X_{chain[0],in}; with
    `tail`, asserts the pinned structural equality X_{chain[-1],out} =
    X_{tail,in}.
    """
    rels: list[Relation] = []
    if field is None:
        field = FhnField(params)

    def id_cover(src: Segment, dst: Segment):
        Xo = src.out_face()
        Yi = dst.in_face()
        mapper = IdentityMapper(Xo.section, Yi.section)
        v = check_covering(mapper, Xo, Yi, div_ident)
        rels.append(
            Relation(
                "identity-covering",
                f"X[{src.name},out] => X[{dst.name},in]",
                v.holds,
                v.margin,
                note=v.error or "",
            )
        )

    if head is not None:
        id_cover(head, chain[0])
    for i, S in enumerate(chain):
        v = check_isolation(S, params, subdiv_faces, subdiv_s1a=subdiv_s1a, field=field)
        rels.append(Relation("s1a", S.name, v.s1a, v.s1a_margin))
        rels.append(Relation("s2b", S.name, v.s2b, v.s2b_margin,
                             note=v.worst.get("s2b", "")))
        rels.append(Relation("s3b", S.name, v.s3b, v.s3b_margin,
                             note=v.worst.get("s3b", "")))
        if i + 1 < len(chain):
            id_cover(S, chain[i + 1])
    if tail is not None:
        last = chain[-1]
        pinned = (
            bool(np.all(last.rear == tail.front))
            and bool(np.all(last.P == tail.P))
            and last.c == tail.a
            and last.d == tail.b
        )
        rels.append(
            Relation(
                "structural",
                f"X[{last.name},out] == X[{tail.name},in]",
                pinned,
                0.0 if pinned else -np.inf,
            )
        )
    return rels
