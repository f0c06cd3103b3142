"""H-sets on affine sections and covering/backcovering verification.

An h-set is a parallelogram on a 2D section: center plus a 2x2 matrix whose
first column spans the exit direction and second the entry direction; its
local coordinates map the support onto [-1,1]^2.

Covering X => Y under a map g is verified by the two geometric conditions,
evaluated in Y's local frame on a subdivided X:

  (C1) the image of every support piece avoids the closed strips
       {|xu| <= 1, |xs| >= 1} (it lies in Y's entry band or escapes through
       the exit half-planes);
  (C2) the images of the left/right exit edges land strictly beyond the
       exit levels xu = -1 / xu = +1, on opposite sides (either orientation,
       detected from the first piece and then enforced).

Backcovering is the covering of transposed h-sets under the backward map and
is checked by exactly that reduction.  Verdicts carry signed margins (the
smallest slack over all pieces), so a failed check names how far it failed
and a passed check names how much room is left.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

import numpy as np

from .errors import (
    CannotFit,
    FhnVerifyError,
    MaxStepsExceeded,
    NoCrossing,
    StepRejected,
    TransversalityLost,
)
from .intervals import Interval, IntervalMatrix, IntervalVector
from .poincare import AffineSection, rigorous_poincare


class HSet:
    """Parallelogram h-set with one exit and one entry direction."""

    __slots__ = ("section", "center", "dirs")

    def __init__(self, section: AffineSection, center, dirs):
        self.section = section
        self.center = np.asarray(center, dtype=float)
        self.dirs = np.asarray(dirs, dtype=float)
        if self.dirs.shape != (2, 2) or self.center.shape != (2,):
            raise ValueError("h-set needs a 2D center and a 2x2 direction matrix")
        if abs(np.linalg.det(self.dirs)) < 1e-300:
            raise ValueError("direction matrix is singular")

    # -- coordinates -------------------------------------------------------

    def from_local(self, local: IntervalVector) -> IntervalVector:
        """Section coordinates of local (xu, xs) in [-1,1]^2."""
        out = IntervalVector(self.center)
        for k in range(2):
            out = out + IntervalVector(self.dirs[:, k]).scale(local[k])
        return out

    def to_local(self, p: IntervalVector) -> IntervalVector:
        """Inverse affine map, rigorous for interval section coordinates."""
        inv = self.inv_dirs_int()
        return inv.matvec(p - IntervalVector(self.center))

    def inv_dirs_int(self) -> IntervalMatrix:
        """Rigorous enclosure of dirs^{-1} via the 2x2 adjugate."""
        a, b = self.dirs[0, 0], self.dirs[0, 1]
        c, d = self.dirs[1, 0], self.dirs[1, 1]
        det = Interval(a) * Interval(d) - Interval(b) * Interval(c)
        return IntervalMatrix(
            [
                [Interval(d) / det, -(Interval(b) / det)],
                [-(Interval(c) / det), Interval(a) / det],
            ]
        )

    def ambient(self, local: IntervalVector) -> IntervalVector:
        return self.section.embed(self.from_local(local))

    def support_box(self) -> IntervalVector:
        return self.from_local(IntervalVector([Interval(-1, 1), Interval(-1, 1)]))

    def corners_np(self):
        """Ambient corners at local (+-1, +-1), ordered (uu, us, su, ss)."""
        out = {}
        for pu in (-1.0, 1.0):
            for ps in (-1.0, 1.0):
                sc = self.center + self.dirs @ np.array([pu, ps])
                out[(pu, ps)] = self.section.embed_np(sc)
        return out

    def edges(self, which: str) -> IntervalVector:
        """Local-coordinate edge as a degenerate box."""
        full = Interval(-1, 1)
        table = {
            "exit_left": IntervalVector([Interval(-1), full]),
            "exit_right": IntervalVector([Interval(1), full]),
            "entry_left": IntervalVector([full, Interval(-1)]),
            "entry_right": IntervalVector([full, Interval(1)]),
        }
        try:
            return table[which]
        except KeyError:
            raise ValueError(f"unknown edge {which!r}") from None

    # -- piece generation for covering checks --------------------------------
    # cells are yielded in local coordinates; mappers decide how to realize
    # them (exact affine composition or ambient boxes for integration)

    def support_cells(self, div: int) -> Iterable[tuple[str, IntervalVector]]:
        cuts = Interval(-1, 1).split(div)
        for i, cu in enumerate(cuts):
            for j, cs in enumerate(cuts):
                yield f"support[{i},{j}]", IntervalVector([cu, cs])

    def edge_cells(self, side: str, div: int) -> Iterable[tuple[str, IntervalVector]]:
        lvl = Interval(-1) if side == "exit_left" else Interval(1)
        for j, cs in enumerate(Interval(-1, 1).split(div)):
            yield f"{side}[{j}]", IntervalVector([lvl, cs])

    # -- derived h-sets ------------------------------------------------------

    def transposed(self) -> "HSet":
        return HSet(self.section, self.center, self.dirs[:, ::-1])

    def enclosure_cell(self, cell: IntervalVector):
        """Parallelotope start set of a local cell (exact affine geometry)."""
        from .integrator import EnclosureSet

        mids = np.array([cell[0].mid, cell[1].mid])
        half = np.array([0.5 * cell[0].width, 0.5 * cell[1].width])
        sec = self.section
        # exact interval columns frame @ dirs, midpoint floats for the frame
        col_int = [
            [
                Interval(sec.frame[i, 0]) * self.dirs[0, j]
                + Interval(sec.frame[i, 1]) * self.dirs[1, j]
                for j in range(2)
            ]
            for i in range(3)
        ]
        cols_f = np.array([[col_int[i][j].mid for j in range(2)] for i in range(3)])
        off = self.center
        A0 = []
        for i in range(3):
            a = Interval(sec.origin[i])
            a = a + Interval(sec.frame[i, 0]) * off[0] + Interval(sec.frame[i, 1]) * off[1]
            a = a + col_int[i][0] * mids[0] + col_int[i][1] * mids[1]
            A0.append(a)
        center = np.array([x.mid for x in A0])
        extra = []
        for i in range(3):
            e = A0[i] - center[i]
            for j in range(2):
                e = e + (col_int[i][j] - cols_f[i, j]) * Interval(-half[j], half[j])
            extra.append(e)
        return EnclosureSet.from_affine(center, cols_f, half, IntervalVector(extra))

    def constricted(self, delta: float, direction: str) -> "HSet":
        if delta <= 0:
            raise ValueError("delta must be positive")
        dirs = self.dirs.copy()
        col = {"exit": 0, "entry": 1}[direction]
        dirs[:, col] = dirs[:, col] / (1.0 + delta)
        return HSet(self.section, self.center, dirs)


def constrict(X: HSet, delta: float, direction: str) -> HSet:
    """Shorten the support by 1/(1+delta) in the exit or entry direction."""
    return X.constricted(delta, direction)


@dataclass
class CoveringVerdict:
    holds: bool
    c1_margin: float
    c2_margin: float
    pieces_checked: int
    orientation: int = 0
    worst_c1: str = ""
    worst_c2: str = ""
    error: Optional[str] = None

    @property
    def margin(self) -> float:
        return min(self.c1_margin, self.c2_margin)


def _c1_piece_margin(img: IntervalVector) -> float:
    iu, is_ = img[0], img[1]
    inside = min(is_.lo - (-1.0), 1.0 - is_.hi)
    right = iu.lo - 1.0
    left = -1.0 - iu.hi
    return max(inside, right, left)


def _c2_piece_margin(img: IntervalVector, target_side: int) -> float:
    iu = img[0]
    return (iu.lo - 1.0) if target_side > 0 else (-1.0 - iu.hi)


def covering_margins(
    support_images: list[tuple[str, IntervalVector]],
    left_images: list[tuple[str, IntervalVector]],
    right_images: list[tuple[str, IntervalVector]],
) -> CoveringVerdict:
    """Evaluate (C1)/(C2) margins from images already in Y-local coordinates."""
    c1 = np.inf
    worst_c1 = ""
    for label, img in support_images:
        m = _c1_piece_margin(img)
        if m < c1:
            c1, worst_c1 = m, label
    # orientation from the first left-edge piece
    first = left_images[0][1]
    orient = 1 if (-1.0 - first[0].hi) >= (first[0].lo - 1.0) else -1
    c2 = np.inf
    worst_c2 = ""
    for label, img in left_images:
        m = _c2_piece_margin(img, -orient)
        if m < c2:
            c2, worst_c2 = m, label
    for label, img in right_images:
        m = _c2_piece_margin(img, orient)
        if m < c2:
            c2, worst_c2 = m, label
    n = len(support_images) + len(left_images) + len(right_images)
    return CoveringVerdict(
        holds=bool(c1 > 0.0 and c2 > 0.0),
        c1_margin=float(c1),
        c2_margin=float(c2),
        pieces_checked=n,
        orientation=orient,
        worst_c1=worst_c1,
        worst_c2=worst_c2,
    )


_PROPAGATED = (TransversalityLost, NoCrossing, StepRejected, MaxStepsExceeded)


def check_covering(mapper, X, Y: HSet, div: int) -> CoveringVerdict:
    """Verify that X mapper-covers Y with div x div subdivision.

    X may be any source exposing local support_cells/edge_cells; the mapper
    prepares a cell map into Y's local coordinates.  Integration failures
    become a failed verdict with diagnostics, not an exception.
    """
    cell_map = mapper.prepare(X, Y)
    try:
        support = [(label, cell_map(c)) for label, c in X.support_cells(div)]
        left = [(label, cell_map(c)) for label, c in X.edge_cells("exit_left", div)]
        right = [(label, cell_map(c)) for label, c in X.edge_cells("exit_right", div)]
    except _PROPAGATED as exc:
        return CoveringVerdict(
            holds=False, c1_margin=-np.inf, c2_margin=-np.inf,
            pieces_checked=0, error=f"{type(exc).__name__}: {exc}",
        )
    return covering_margins(support, left, right)


def check_backcovering(backward_mapper, X: HSet, Y, div: int) -> CoveringVerdict:
    """Verify that X g-backcovers Y: Y^T g^{-1}-covers X^T.

    `backward_mapper` must realize g^{-1} (integration of the negated field)
    onto X's section; Y is the source whose transposed support and entry
    edges are integrated backward.
    """
    return check_covering(backward_mapper, Y.transposed(), X.transposed(), div)


class IdentityMapper:
    """Chain link: pure change of coordinates on a shared section plane.

    For parallelogram sources the local-to-local map is composed as a single
    affine interval map, avoiding the wrapping of an intermediate box hull.
    """

    def __init__(self, source_section: AffineSection, target_section: AffineSection):
        if not source_section.same_plane(target_section):
            raise ValueError("identity mapper requires a shared section plane")
        self.source = source_section
        self.target = target_section

    def map_box(self, box: IntervalVector) -> IntervalVector:
        return self.target.project(self.target.tighten(box))

    def prepare(self, X: HSet, Y: HSet):
        R = IntervalMatrix(self.target.frame.T).matmul(IntervalMatrix(self.source.frame))
        t0 = IntervalMatrix(self.target.frame.T).matvec(
            IntervalVector(self.source.origin) - IntervalVector(self.target.origin)
        )
        Minv = Y.inv_dirs_int()
        A = Minv.matmul(R).matmul(IntervalMatrix(X.dirs))
        t = Minv.matvec(
            R.matvec(IntervalVector(X.center)) + t0 - IntervalVector(Y.center)
        )

        def cell_map(cell: IntervalVector) -> IntervalVector:
            return A.matvec(cell) + t

        return cell_map


class PoincareMapper:
    """Rigorous Poincaré transport of ambient boxes onto a target section."""

    def __init__(
        self,
        field,
        target: AffineSection,
        cfg,
        crossing_sign: int = 1,
        time_direction: str = "forward",
        time_hint: float | None = None,
        max_time: float | None = None,
    ):
        self.field = field
        self.target = target
        self.cfg = cfg
        self.crossing_sign = crossing_sign
        self.time_direction = time_direction
        self.time_hint = time_hint
        self.max_time = max_time
        self.last_time: Optional[Interval] = None

    def map_box(self, box) -> IntervalVector:
        rep = rigorous_poincare(
            self.field,
            box,
            self.target,
            self.cfg,
            crossing_sign=self.crossing_sign,
            time_direction=self.time_direction,
            time_hint=self.time_hint,
            max_time=self.max_time,
        )
        self.last_time = rep.time if self.last_time is None else self.last_time.hull(rep.time)
        return rep.image

    def map_cell(self, src, cell: IntervalVector) -> IntervalVector:
        """Image of one local cell, carried as an exact parallelotope."""
        if hasattr(src, "enclosure_cell"):
            return self.map_box(src.enclosure_cell(cell))
        return self.map_box(src.ambient(cell))

    def prepare(self, X, Y: HSet):
        def cell_map(cell: IntervalVector) -> IntervalVector:
            return Y.to_local(self.map_cell(X, cell))

        return cell_map


class AffineSectionMap:
    """Test map acting affinely on section coordinates: q = M p + b."""

    def __init__(self, source: AffineSection, target: AffineSection, M, b=(0.0, 0.0)):
        self.source = source
        self.target = target
        self.M = np.asarray(M, dtype=float)
        self.b = np.asarray(b, dtype=float)

    def map_box(self, box: IntervalVector) -> IntervalVector:
        p = self.source.project(self.source.tighten(box))
        out = IntervalVector(self.b)
        for k in range(2):
            out = out + IntervalVector(self.M[:, k]).scale(p[k])
        return out

    def prepare(self, X: HSet, Y: HSet):
        Mi = IntervalMatrix(self.M)
        Minv = Y.inv_dirs_int()
        A = Minv.matmul(Mi).matmul(IntervalMatrix(X.dirs))
        t = Minv.matvec(
            Mi.matvec(IntervalVector(X.center))
            + IntervalVector(self.b)
            - IntervalVector(Y.center)
        )

        def cell_map(cell: IntervalVector) -> IntervalVector:
            return A.matvec(cell) + t

        return cell_map


def fit_covered_set(
    support_images: list[tuple[str, IntervalVector]],
    left_images: list[tuple[str, IntervalVector]],
    right_images: list[tuple[str, IntervalVector]],
    target_section: AffineSection,
    margin: float = 0.1,
    frame: np.ndarray | None = None,
    exit_gap: float = 0.05,
) -> tuple[HSet, CoveringVerdict]:
    """Construct an h-set on target_section covered by the mapped source.

    Images are rigorous enclosures in target-section coordinates.  The exit
    direction runs between the two exit-edge image clusters; the exit extent
    stops short of them by `exit_gap`, the entry extent pads the support
    image's spread by `margin`.  The construction is re-verified against the
    same images and never trusted.
    """
    def hull_of(images):
        acc = None
        for _l, img in images:
            acc = img if acc is None else acc.hull(img)
        return acc

    hl = hull_of(left_images)
    hr = hull_of(right_images)
    if hl is None or hr is None or not support_images:
        raise CannotFit("no images to fit")
    eL = hl.mid()
    eR = hr.mid()
    center = 0.5 * (eL + eR)
    if frame is None:
        vu = 0.5 * (eR - eL)
        nu = np.linalg.norm(vu)
        if nu < 1e-300:
            raise CannotFit("exit-edge images coincide")
        vu_dir = vu / nu
        vs_dir = np.array([-vu_dir[1], vu_dir[0]])
    else:
        vu_dir = frame[:, 0] / np.linalg.norm(frame[:, 0])
        vs_dir = frame[:, 1] / np.linalg.norm(frame[:, 1])

    probe = HSet(target_section, center, np.column_stack([vu_dir, vs_dir]))

    def ranges(images):
        acc_u, acc_s = None, None
        for _l, img in images:
            loc = probe.to_local(img)
            acc_u = loc[0] if acc_u is None else acc_u.hull(loc[0])
            acc_s = loc[1] if acc_s is None else acc_s.hull(loc[1])
        return acc_u, acc_s

    lu, _ls = ranges(left_images)
    ru, _rs = ranges(right_images)
    if lu.mid > ru.mid:
        lu, ru = ru, lu
    edge_min = min(-lu.hi, ru.lo)
    if edge_min <= 0.0:
        raise CannotFit("exit-edge images overlap the interior in the exit coordinate")
    lam_u = edge_min / (1.0 + exit_gap)

    # the entry extent only needs to cover pieces whose exit coordinate can
    # land inside the band |xu| <= 1: anything further out escapes through
    # the exit half-planes no matter its entry coordinate
    band = None
    for _l, img in support_images:
        loc = probe.to_local(img)
        if loc[0].lo <= lam_u and loc[0].hi >= -lam_u:
            band = loc[1] if band is None else band.hull(loc[1])
    if band is None:
        raise CannotFit("no support image meets the exit band")
    cs_mid = band.mid
    center = center + vs_dir * cs_mid
    spread_s = max(band.hi - cs_mid, cs_mid - band.lo, 1e-300)
    lam_s = spread_s * (1.0 + margin)
    dirs = np.column_stack([vu_dir * lam_u, vs_dir * lam_s])
    fitted = HSet(target_section, center, dirs)

    def relabel(images):
        return [(l, fitted.to_local(img)) for l, img in images]

    verdict = covering_margins(
        relabel(support_images), relabel(left_images), relabel(right_images)
    )
    if not verdict.holds:
        raise CannotFit(
            f"fitted set fails re-verification (c1={verdict.c1_margin:.3g}, "
            f"c2={verdict.c2_margin:.3g})"
        )
    return fitted, verdict
