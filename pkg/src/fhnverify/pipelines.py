"""Proof drivers: the segment/covering loop, validated continuation, and the
interval Newton certification, plus the nonrigorous generators they need.

All rigorous claims are issued through ProofReport records; the nonrigorous
machinery (corner-point shooting, orbit guesses, multiple-shooting Newton,
frame propagation) only proposes geometry that the rigorous checks then
verify or reject.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field as dc_field, replace

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .errors import (
    BisectionBracketFailed,
    CannotFit,
    ContinuationStalled,
    FhnVerifyError,
    MaxStepsExceeded,
    NewtonDiverged,
    NoCrossing,
    SingularEnclosure,
    StepRejected,
    TransversalityLost,
)
from .fhn import (
    FhnField,
    FhnParams,
    cubic_deriv_float,
    cubic_float,
    eigen2x2,
    fast_linearization,
)
from .hsets import HSet, PoincareMapper, check_backcovering, check_covering, fit_covered_set
from .integrator import IntegratorConfig
from .intervals import Interval, IntervalMatrix, IntervalVector, linear_solve
from .poincare import AffineSection, nonrigorous_poincare, rigorous_poincare
from .report import ProofReport, Relation
from .segments import Segment, build_chain, check_isolation, verify_chain


# ---------------------------------------------------------------------------
# corner points and the singular orbit
# ---------------------------------------------------------------------------


@dataclass
class CornerData:
    gammaDL: np.ndarray
    gammaUL: np.ndarray
    gammaUR: np.ndarray
    gammaDR: np.ndarray
    w_star: float
    w_star_upper: float
    PDL: np.ndarray
    PUL: np.ndarray
    PUR: np.ndarray
    PDR: np.ndarray
    trace_left: np.ndarray   # left fast jump sampled at w = w_star, (m, 3)
    trace_right: np.ndarray  # right fast jump sampled at w = w_star_upper


def _fast_rhs(w: float, p: FhnParams):
    ga, th, a = p.gamma_mid, p.theta_mid, p.a_mid

    def rhs(t, y):
        u, v = y
        return [v, ga * (th * v - cubic_float(u, a) + w)]

    return rhs


def _branch_roots(w: float, p: FhnParams):
    a = p.a_mid
    roots = np.roots([-1.0, 1.0 + a, -a, -w])
    real = sorted(r.real for r in roots if abs(r.imag) < 1e-9)
    if len(real) != 3:
        raise BisectionBracketFailed(f"w={w} outside the three-branch window")
    return real[0], real[1], real[2]


def _saddle_eigs(u: float, p: FhnParams):
    ga, th = p.gamma_mid, p.theta_mid
    tr = ga * th
    det = ga * cubic_deriv_float(u, p.a_mid)
    disc = tr * tr - 4.0 * det
    root = np.sqrt(disc)
    return 0.5 * (tr + root), 0.5 * (tr - root)


def _shoot_gap(w: float, jump: str, p: FhnParams, delta: float = 1e-6,
               frac: float = 0.5, want_trace: bool = False):
    """Signed v-mismatch of unstable/stable manifold traces at the mid section."""
    u_d, _, u_u = _branch_roots(w, p)
    u_mid = u_d + frac * (u_u - u_d)
    rhs = _fast_rhs(w, p)

    def rhs_neg(t, y):
        d = rhs(t, y)
        return [-d[0], -d[1]]

    def section(t, y):
        return y[0] - u_mid

    section.terminal = True

    lam_u_d, lam_s_d = _saddle_eigs(u_d, p)
    lam_u_u, lam_s_u = _saddle_eigs(u_u, p)
    if jump == "left":
        x_a = [u_d + delta, delta * lam_u_d]          # unstable of the lower saddle
        x_b = [u_u - delta, -delta * lam_s_u]         # stable of the upper saddle
        section.direction = 1.0
        dir_b = -1.0
    else:
        x_a = [u_u - delta, -delta * lam_u_u]         # unstable of the upper saddle
        x_b = [u_d + delta, delta * lam_s_d]          # stable of the lower saddle
        section.direction = -1.0
        dir_b = 1.0

    kw = dict(method="DOP853", rtol=1e-12, atol=1e-14, max_step=5.0,
              dense_output=want_trace)
    sol_a = solve_ivp(rhs, (0.0, 500.0), x_a, events=section, **kw)
    if not sol_a.t_events[0].size:
        raise BisectionBracketFailed(f"unstable trace missed the section at w={w}")
    v_a = sol_a.y_events[0][0][1]

    section.direction = dir_b
    sol_b = solve_ivp(rhs_neg, (0.0, 500.0), x_b, events=section, **kw)
    if not sol_b.t_events[0].size:
        raise BisectionBracketFailed(f"stable trace missed the section at w={w}")
    v_b = sol_b.y_events[0][0][1]

    if not want_trace:
        return v_a - v_b
    # assemble the full heteroclinic trace in flow order
    ta = np.linspace(0.0, sol_a.t_events[0][0], 200)
    a_pts = sol_a.sol(ta).T
    tb = np.linspace(0.0, sol_b.t_events[0][0], 200)
    b_pts = sol_b.sol(tb).T[::-1]  # backward trajectory reversed -> flow order
    pts2 = np.vstack([a_pts, b_pts])
    trace = np.column_stack([pts2, np.full(len(pts2), w)])
    return v_a - v_b, trace


def shoot_corner_points(
    p: FhnParams | None = None,
    window: tuple[float, float] = (0.004, 0.12),
    scan: int = 40,
    delta: float = 1e-6,
    frac: float = 0.5,
) -> CornerData:
    """Locate w*, w^* by shooting for the fast-subsystem heteroclinics.

    Nonrigorous: the gap between the unstable and stable manifold traces on
    an intermediate section is driven to zero in w by bracketing and Brent
    root finding, polished below |gap| < 1e-10.
    """
    if p is None:
        p = FhnParams()
    ws: dict[str, float] = {}
    traces: dict[str, np.ndarray] = {}
    for jump in ("left", "right"):
        grid = np.linspace(window[0], window[1], scan)
        gaps = []
        for w in grid:
            try:
                gaps.append(_shoot_gap(w, jump, p, delta, frac))
            except BisectionBracketFailed:
                gaps.append(np.nan)
        bracket = None
        for (w1, g1), (w2, g2) in zip(zip(grid, gaps), zip(grid[1:], gaps[1:])):
            if np.isfinite(g1) and np.isfinite(g2) and g1 * g2 < 0:
                bracket = (w1, w2)
                break
        if bracket is None:
            raise BisectionBracketFailed(f"no sign change for the {jump} jump in {window}")
        w_root = brentq(lambda w: _shoot_gap(w, jump, p, delta, frac),
                        *bracket, xtol=1e-14, rtol=1e-15)
        gap, trace = _shoot_gap(w_root, jump, p, delta, frac, want_trace=True)
        if abs(gap) > 1e-10:
            raise BisectionBracketFailed(f"{jump} jump gap {gap} above tolerance")
        ws[jump] = float(w_root)
        traces[jump] = trace

    w_star, w_up = ws["left"], ws["right"]
    dl, _, ul = _branch_roots(w_star, p)
    dr, _, ur = _branch_roots(w_up, p)

    def pmat(u):
        lam_u, lam_s, _ = eigen2x2(fast_linearization(Interval(u), p))
        return np.array([[1.0, 1.0], [lam_u.mid, lam_s.mid]])

    return CornerData(
        gammaDL=np.array([dl, 0.0, w_star]),
        gammaUL=np.array([ul, 0.0, w_star]),
        gammaUR=np.array([ur, 0.0, w_up]),
        gammaDR=np.array([dr, 0.0, w_up]),
        w_star=w_star,
        w_star_upper=w_up,
        PDL=pmat(dl),
        PUL=pmat(ul),
        PUR=pmat(ur),
        PDR=pmat(dr),
        trace_left=traces["left"],
        trace_right=traces["right"],
    )


# (a, b) = (c, d) half-widths and the w-offset sign of Front per corner
TABLE1 = {
    "DL": {"sign": +1, "ab": (0.015, 0.012)},
    "UL": {"sign": -1, "ab": (0.010, 0.015)},
    "UR": {"sign": -1, "ab": (0.029, 0.019)},
    "DR": {"sign": +1, "ab": (0.007, 0.030)},
}
W_OFFSET = 0.005


def corner_segments(corner: CornerData, table: dict | None = None) -> dict[str, Segment]:
    table = table or TABLE1
    gamma = {
        "DL": (corner.gammaDL, corner.PDL),
        "UL": (corner.gammaUL, corner.PUL),
        "UR": (corner.gammaUR, corner.PUR),
        "DR": (corner.gammaDR, corner.PDR),
    }
    out = {}
    for name, spec in table.items():
        g, P = gamma[name]
        off = np.array([0.0, 0.0, spec.get("w_off", W_OFFSET)]) * spec["sign"]
        a, b = spec["ab"]
        cd = spec.get("cd", (a, b))
        out[name] = Segment(g + off, g - off, P, a, b, cd[0], cd[1], name=name)
    return out


def default_sections(corner: CornerData, p: FhnParams, frac: float = 0.5):
    """Transversal sections mid-jump, normal along the nonrigorous velocity."""
    field = FhnField(p)

    def place(trace, u_lo, u_hi):
        u_mid = u_lo + frac * (u_hi - u_lo)
        idx = int(np.argmin(np.abs(trace[:, 0] - u_mid)))
        origin = trace[idx]
        f = field.eval_np(origin)
        return AffineSection(origin, f / np.linalg.norm(f))

    left = place(corner.trace_left, corner.gammaDL[0], corner.gammaUL[0])
    right = place(corner.trace_right, corner.gammaUR[0], corner.gammaDR[0])
    return left, right


# ---------------------------------------------------------------------------
# Theorem 1: segments + coverings around the singular orbit
# ---------------------------------------------------------------------------


@dataclass
class Thm1Config:
    div: int = 20
    corner_subdiv: int = 150
    chain_subdiv: int = 110
    chain_N: int = 80
    factor: float = 1.05
    mid_margin: float = 0.1
    exit_gap: float = 0.05
    div_ident: int = 2
    s1a_subdiv: int = 10
    section_frac: float = 0.5
    blend: float = 0.25
    max_jump_time: float = 400.0
    table: dict | None = None
    left_section: AffineSection | None = None
    right_section: AffineSection | None = None
    icfg: IntegratorConfig = dc_field(default_factory=IntegratorConfig)


def assemble_loop(segs: dict[str, Segment], up: list[Segment], down: list[Segment]):
    """The closed h-set loop in the order of the topological theorem.

    Entries are (mechanism, payload); the mechanism names which hypothesis
    carries the step.  The loop starts and ends at the same object.
    """
    loop: list[tuple[str, object]] = []
    x_dl_in = segs["DL"].in_face()
    loop.append(("node", x_dl_in))
    loop.append(("segment-exit", segs["DL"]))      # X_DL_in => X_DL_ru
    loop.append(("covering", "pmDL"))              # X_DL_ru => midLeftSet
    loop.append(("backcovering", "pmUL"))          # midLeftSet <= X_UL_ls
    loop.append(("segment-entry", segs["UL"]))     # X_UL_ls => X_UL_out
    for S in up:
        loop.append(("identity-covering", S))
    loop.append(("segment-exit", segs["UR"]))      # X_UR_in => X_UR_lu
    loop.append(("covering", "pmUR"))
    loop.append(("backcovering", "pmDR"))
    loop.append(("segment-entry", segs["DR"]))
    for S in down:
        loop.append(("identity-covering", S))
    loop.append(("node", x_dl_in))
    return loop


def _loop_is_closed(segs, up, down, loop) -> bool:
    ok = loop[0][1] is loop[-1][1]
    ok &= bool(np.all(up[0].front == segs["UL"].rear))
    ok &= bool(np.all(up[-1].rear == segs["UR"].front))
    ok &= bool(np.all(down[0].front == segs["DR"].rear))
    ok &= bool(np.all(down[-1].rear == segs["DL"].front))
    ok &= up[-1].c == segs["UR"].a and up[-1].d == segs["UR"].b
    ok &= down[-1].c == segs["DL"].a and down[-1].d == segs["DL"].b
    return ok


def _collect_images(mapper: PoincareMapper, face, div: int):
    support = [(l, mapper.map_cell(face, c)) for l, c in face.support_cells(div)]
    left = [(l, mapper.map_cell(face, c)) for l, c in face.edge_cells("exit_left", div)]
    right = [(l, mapper.map_cell(face, c)) for l, c in face.edge_cells("exit_right", div)]
    return support, left, right


def prove_theorem1(eps0: float, cfg: Thm1Config | None = None) -> ProofReport:
    """Existence of the periodic orbit for every eps in (0, eps0].

    Runs the four-corner construction: corner-segment isolation, rigorous
    fast-jump coverings through mid-jump sections, and two chains of
    isolating segments along the slow-manifold branches, assembled into the
    closed loop of the topological fixed-point theorem.
    """
    if cfg is None:
        cfg = Thm1Config()
    if eps0 <= 0:
        raise ValueError("eps0 must be positive")
    params = FhnParams(epsilon=Interval(0.0, eps0))
    rep = ProofReport(theorem="thm1", eps_lo=0.0, eps_hi=eps0)
    rep.config_echo.update(
        {
            "div": str(cfg.div),
            "corner_subdiv": str(cfg.corner_subdiv),
            "chain_subdiv": str(cfg.chain_subdiv),
            "chain_N": str(cfg.chain_N),
            "factor": repr(cfg.factor),
            "mid_margin": repr(cfg.mid_margin),
            "order": str(cfg.icfg.order),
            "eps0": repr(eps0),
        }
    )

    t0 = time.perf_counter()
    corner = shoot_corner_points(p=params)
    rep.phase_seconds["shooting"] = time.perf_counter() - t0
    rep.extras["w_star"] = corner.w_star
    rep.extras["w_star_upper"] = corner.w_star_upper

    t0 = time.perf_counter()
    segs = corner_segments(corner, cfg.table)
    up = build_chain(segs["UL"], segs["UR"], cfg.chain_N, cfg.factor, params,
                     blend=cfg.blend)
    down = build_chain(segs["DR"], segs["DL"], cfg.chain_N, cfg.factor, params,
                       blend=cfg.blend)
    loop = assemble_loop(segs, up, down)
    rep.add("structural", "loop-closure", _loop_is_closed(segs, up, down, loop), 0.0)
    rep.phase_seconds["construction"] = time.perf_counter() - t0

    field = FhnField(params)

    t0 = time.perf_counter()
    for name in ("DL", "UL", "UR", "DR"):
        v = check_isolation(segs[name], params, cfg.corner_subdiv,
                            subdiv_s1a=cfg.s1a_subdiv, field=field)
        rep.add("s1a", name, v.s1a, v.s1a_margin)
        rep.add("s2b", name, v.s2b, v.s2b_margin, note=v.worst.get("s2b", ""))
        rep.add("s3b", name, v.s3b, v.s3b_margin, note=v.worst.get("s3b", ""))
    rep.phase_seconds["corners"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    rep.relations.extend(
        verify_chain(up, params, cfg.chain_subdiv, cfg.div_ident,
                     head=segs["UL"], tail=segs["UR"], field=field,
                     subdiv_s1a=cfg.s1a_subdiv)
    )
    rep.relations.extend(
        verify_chain(down, params, cfg.chain_subdiv, cfg.div_ident,
                     head=segs["DR"], tail=segs["DL"], field=field,
                     subdiv_s1a=cfg.s1a_subdiv)
    )
    rep.phase_seconds["chains"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    default_left, default_right = default_sections(corner, params, cfg.section_frac)
    left_sec = cfg.left_section or default_left
    right_sec = cfg.right_section or default_right

    for side, sec, src_name, src_face, back_name, back_face, pm_f, pm_b in (
        ("left", left_sec, "DL", segs["DL"].face("ru"), "UL", segs["UL"].face("ls"),
         "pmDL", "pmUL"),
        ("right", right_sec, "UR", segs["UR"].face("lu"), "DR", segs["DR"].face("rs"),
         "pmUR", "pmDR"),
    ):
        t_side = time.perf_counter()
        fwd = PoincareMapper(field, sec, cfg.icfg, crossing_sign=1,
                             max_time=cfg.max_jump_time)
        mid_name = "midLeftSet" if side == "left" else "midRightSet"
        try:
            support, li, ri = _collect_images(fwd, src_face, cfg.div)
            mid, fit_verdict = fit_covered_set(
                support, li, ri, sec, margin=cfg.mid_margin, exit_gap=cfg.exit_gap
            )
            rep.add(
                "covering",
                f"X[{src_name},{src_face.side}] ={pm_f}=> {mid_name}",
                fit_verdict.holds,
                fit_verdict.margin,
                wall_ms=1e3 * (time.perf_counter() - t_side),
            )
            rep.config_echo[f"{mid_name}.center"] = repr(mid.center.tolist())
            rep.config_echo[f"{mid_name}.dirs"] = repr(mid.dirs.tolist())
        except (CannotFit, TransversalityLost, NoCrossing, StepRejected,
                MaxStepsExceeded) as exc:
            rep.add(
                "covering",
                f"X[{src_name},{src_face.side}] ={pm_f}=> {mid_name}",
                False,
                -np.inf,
                note=f"{type(exc).__name__}: {exc}",
            )
            continue
        t_back = time.perf_counter()
        bwd = PoincareMapper(field, sec, cfg.icfg, crossing_sign=-1,
                             time_direction="backward", max_time=cfg.max_jump_time)
        v = check_backcovering(bwd, mid, back_face, cfg.div)
        rep.add(
            "backcovering",
            f"{mid_name} <={pm_b}= X[{back_name},{back_face.side}]",
            v.holds,
            v.margin,
            wall_ms=1e3 * (time.perf_counter() - t_back),
            note=v.error or "",
        )
    rep.phase_seconds["jumps"] = time.perf_counter() - t0
    rep.config_echo["left_section.origin"] = repr(left_sec.origin.tolist())
    rep.config_echo["left_section.normal"] = repr(left_sec.normal.tolist())
    rep.config_echo["right_section.origin"] = repr(right_sec.origin.tolist())
    rep.config_echo["right_section.normal"] = repr(right_sec.normal.tolist())
    return rep


# ---------------------------------------------------------------------------
# orbit guesses and multiple-shooting refinement
# ---------------------------------------------------------------------------


@dataclass
class OrbitGuess:
    epsilon: float
    points: np.ndarray  # (k, 3)

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        if self.points.shape[0] < 3:
            raise ValueError("an orbit guess needs at least 3 points")

    @property
    def count(self) -> int:
        return self.points.shape[0]

    def sections(self) -> list[AffineSection]:
        k = self.count
        out = []
        for i in range(k):
            d = self.points[(i + 1) % k] - self.points[i]
            out.append(AffineSection(self.points[i], d))
        return out


def save_orbit(orbit: OrbitGuess, path: str, note: str = ""):
    with open(path, "w") as fh:
        if note:
            for line in note.splitlines():
                fh.write(f"# {line}\n")
        fh.write(f"epsilon {orbit.epsilon!r}\n")
        for u, v, w in orbit.points:
            fh.write(f"{u!r} {v!r} {w!r}\n")


def load_orbit(path: str) -> OrbitGuess:
    eps = None
    pts = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if line.startswith("epsilon"):
                eps = float(line.split()[1])
                continue
            parts = line.split()
            if len(parts) != 3:
                raise ValueError(f"malformed orbit line: {line!r}")
            pts.append([float(x) for x in parts])
    if eps is None:
        raise ValueError("orbit file lacks the epsilon header")
    return OrbitGuess(epsilon=eps, points=np.array(pts))


def _link_maps(field: FhnField, points: np.ndarray, sections, with_derivative=True,
               max_time: float = 200.0):
    """Nonrigorous Poincaré data for every consecutive section pair."""
    k = len(points)
    images, times, derivs = [], [], []
    for i in range(k):
        tgt = sections[(i + 1) % k]
        img, t, D, _x = nonrigorous_poincare(
            field, points[i], tgt, crossing_sign=1,
            with_derivative=with_derivative, max_time=max_time,
            src_frame=sections[i].frame,
        )
        images.append(img)
        times.append(t)
        derivs.append(D)
    return images, times, derivs


def refine_orbit(field: FhnField, guess: OrbitGuess, max_iters: int = 30,
                 tol: float = 1e-11) -> tuple[OrbitGuess, list[float]]:
    """Multiple-shooting Newton on the stacked section offsets.

    Returns the refined orbit (sections re-derived from the new points) and
    the final crossing times per link.
    """
    points = guess.points.copy()
    sections = OrbitGuess(guess.epsilon, points).sections()
    k = len(points)
    y = np.zeros(2 * k)

    def embed_all(yv):
        return np.array(
            [sections[i].embed_np(yv[2 * i : 2 * i + 2]) for i in range(k)]
        )

    def residual_and_jac(yv):
        pts = embed_all(yv)
        images, times, derivs = _link_maps(field, pts, sections)
        r = np.empty(2 * k)
        J = np.zeros((2 * k, 2 * k))
        for i in range(k):
            nxt = (i + 1) % k
            r[2 * i : 2 * i + 2] = images[i] - yv[2 * nxt : 2 * nxt + 2]
            J[2 * i : 2 * i + 2, 2 * i : 2 * i + 2] = derivs[i]
            J[2 * i : 2 * i + 2, 2 * nxt : 2 * nxt + 2] -= np.eye(2)
        return r, J, times

    r, J, times = residual_and_jac(y)
    for _ in range(max_iters):
        if np.max(np.abs(r)) < tol:
            new_pts = embed_all(y)
            return OrbitGuess(guess.epsilon, new_pts), times
        try:
            delta = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError as exc:
            raise NewtonDiverged(f"singular shooting Jacobian: {exc}") from exc
        base = np.max(np.abs(r))
        for damp in (1.0, 0.5, 0.25, 0.125, 0.0625):
            y_try = y + damp * delta
            try:
                r_try, J_try, times_try = residual_and_jac(y_try)
            except (NoCrossing, ValueError):
                continue
            if np.max(np.abs(r_try)) < base:
                y, r, J, times = y_try, r_try, J_try, times_try
                break
        else:
            raise NewtonDiverged(f"no damping step reduced the residual {base:.3e}")
    if np.max(np.abs(r)) < tol:
        return OrbitGuess(guess.epsilon, embed_all(y)), times
    raise NewtonDiverged(f"residual {np.max(np.abs(r)):.3e} after {max_iters} iterations")


def singular_skeleton(corner: CornerData, p: FhnParams | None = None,
                      arc_samples: int = 400) -> np.ndarray:
    """Closed polyline along the singular orbit (two jumps + two slow arcs).

    With parameters given, the slow arcs carry the first-order slow-manifold
    correction v = (eps/theta)(u-w)/g'(u), w = g(u) - theta*v; points exactly
    on C0 sit O(eps) off the saddle-type invariant manifold and escape it
    before a multiple-shooting link can close.
    """
    eps = p.eps_mid if p is not None else 0.0
    th = p.theta_mid if p is not None else 0.61
    a = p.a_mid if p is not None else 0.1

    def arc(u_from, u_to):
        u = np.linspace(u_from, u_to, arc_samples)
        w0 = cubic_float(u, a)
        if eps > 0.0:
            v = (eps / th) * (u - w0) / cubic_deriv_float(u, a)
            w = w0 - th * v
        else:
            v = np.zeros_like(u)
            w = w0
        return np.column_stack([u, v, w])

    upper_arc = arc(corner.gammaUL[0], corner.gammaUR[0])
    lower_arc = arc(corner.gammaDR[0], corner.gammaDL[0])
    pts = np.vstack([corner.trace_left, upper_arc, corner.trace_right, lower_arc])
    if eps > 0.0:
        # trim the fictitious deep-saddle crawl near the corner points: the
        # true orbit at eps > 0 rounds the corners at O(eps) distance, and
        # links bridging the trimmed turns are flow-transversal again
        trim = max(0.012, 8.0 * eps)
        corners = np.stack([corner.gammaDL, corner.gammaUL, corner.gammaUR, corner.gammaDR])
        dists = np.min(
            np.linalg.norm(pts[:, None, :] - corners[None, :, :], axis=2), axis=1
        )
        pts = pts[dists > trim]
    return pts


def _resample_equal_time(points: np.ndarray, field: FhnField, n: int) -> np.ndarray:
    """Resample a closed polyline to n points equidistributed in transit time."""
    speeds = np.linalg.norm(field.eval_np(points), axis=1)
    speeds = np.maximum(speeds, 1e-9)
    seglen = np.linalg.norm(np.diff(points, axis=0, append=points[:1]), axis=1)
    dt = seglen / speeds
    t_cum = np.concatenate([[0.0], np.cumsum(dt)])
    total = t_cum[-1]
    targets = np.linspace(0.0, total, n, endpoint=False)
    idx = np.searchsorted(t_cum, targets, side="right") - 1
    idx = np.clip(idx, 0, len(points) - 1)
    out = points[np.unique(idx)]
    # drop consecutive near-duplicates (they would give degenerate normals)
    keep = [0]
    for i in range(1, len(out)):
        if np.linalg.norm(out[i] - out[keep[-1]]) > 1e-9:
            keep.append(i)
    if np.linalg.norm(out[keep[-1]] - out[keep[0]]) <= 1e-9:
        keep.pop()
    return out[keep]


def _drop_dead_links(points: np.ndarray, field: FhnField, passes: int = 4,
                     max_time: float = 60.0) -> np.ndarray:
    """Merge away points whose forward link никогда reaches the next section.

    Skeleton junctions (near the saddle corners) can produce links almost
    orthogonal to the flow; dropping the target point merges two links into
    one that the flow does cross.
    """
    pts = points
    for _ in range(passes):
        k = len(pts)
        secs = [
            AffineSection(pts[i], pts[(i + 1) % k] - pts[i]) for i in range(k)
        ]
        bad = set()
        for i in range(k):
            tgt = secs[(i + 1) % k]
            try:
                nonrigorous_poincare(field, pts[i], tgt, crossing_sign=1,
                                     with_derivative=False, max_time=max_time,
                                     rtol=1e-9, atol=1e-11)
            except NoCrossing:
                bad.add((i + 1) % k)
        if not bad:
            return pts
        pts = np.array([q for j, q in enumerate(pts) if j not in bad])
        if len(pts) < 8:
            raise NewtonDiverged("orbit skeleton collapsed while pruning links")
    raise NewtonDiverged("orbit skeleton has unreachable links after pruning")


def _corrected_branch_point(u: float, p: FhnParams) -> np.ndarray:
    """First-order slow-manifold point over u (points on C0 itself escape)."""
    eps, th, a = p.eps_mid, p.theta_mid, p.a_mid
    w0 = cubic_float(u, a)
    v = (eps / th) * (u - w0) / cubic_deriv_float(u, a)
    return np.array([u, v, w0 - th * v])


def _branch_u_interp(branch: str, p: FhnParams):
    from .fhn import slow_manifold_u

    ws = np.linspace(0.003, 0.123, 121)
    us = []
    guess = -0.05 if branch == "lower" else 1.0
    for w in ws:
        guess = slow_manifold_u(w, guess=guess, p=p)
        us.append(guess)
    us = np.array(us)
    return lambda w: np.interp(w, ws, us)


def _orbit_jump_trace(p: FhnParams, corner: CornerData, jump: str,
                      horizon: float = 400.0, lam_max: float = 2e-3):
    """Trajectory of the full eps-field that makes one fast jump and then
    tracks the saddle-type slow manifold past the corner.

    The launch offset along the local fast-unstable direction is bisected on
    the side the trajectory finally escapes to; the balanced trajectory is
    the closest the shooting gets to the periodic orbit, and it tracks the
    landing branch for O(log(1/eps)) time units before escaping.
    """
    field = FhnField(p)
    if jump == "left":
        u0 = corner.gammaDL[0]
        land_branch = "upper"
        jump_sign = +1.0
    else:
        u0 = corner.gammaUR[0]
        land_branch = "lower"
        jump_sign = -1.0
    base = _corrected_branch_point(u0, p)
    lam_u, _ls = _saddle_eigs(u0, p)
    vdir = np.array([1.0, lam_u, 0.0])
    vdir = jump_sign * vdir / np.linalg.norm(vdir)
    u_of_w = _branch_u_interp(land_branch, p)
    u_jumped = 0.5 * (u0 + (corner.gammaUL[0] if jump == "left" else corner.gammaDR[0]))

    def run(lam):
        sol = solve_ivp(
            lambda t, y: field.eval_np(y), (0.0, horizon), base + lam * vdir,
            method="DOP853", rtol=1e-11, atol=1e-13, dense_output=True,
            max_step=2.0,
        )
        ts = np.linspace(0.0, sol.t[-1], 2000)
        ys = sol.sol(ts).T
        jumped = np.abs(ys[:, 0] - u0) > abs(u_jumped - u0)
        if not jumped.any():
            return 0, ts, ys, len(ts) - 1
        j0 = int(np.argmax(jumped))
        dev = ys[:, 0] - u_of_w(ys[:, 2])
        out = np.abs(dev) > 0.05
        out[: j0 + 1] = False
        # ignore the jump transit itself: deviation counts once near the branch
        near = np.abs(dev) < 0.02
        first_near = np.argmax(near[j0:]) + j0 if near[j0:].any() else None
        if first_near is None:
            return int(np.sign(dev[-1])), ts, ys, len(ts) - 1
        out[: first_near] = False
        if not out.any():
            return 0, ts, ys, len(ts) - 1
        k = int(np.argmax(out))
        return int(np.sign(dev[k])), ts, ys, k

    # bracket the escape side over a logarithmic ladder of offsets
    lams = [lam_max * (0.5**k) for k in range(40)]
    sides = {}
    prev = None
    bracket = None
    for lam in lams:
        s, *_ = run(lam)
        sides[lam] = s
        if s == 0:
            bracket = (lam, lam)
            break
        if prev is not None and s != prev[1]:
            bracket = (prev[0], lam)
            break
        prev = (lam, s)
    if bracket is None:
        raise NewtonDiverged(f"no escape-side bracket for the {jump} jump trace")
    lo, hi = bracket
    best = None
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        s, ts, ys, k = run(mid)
        if best is None or k > best[3]:
            best = (s, ts, ys, k)
        if s == 0:
            break
        if s == sides[bracket[0]]:
            lo = mid
        else:
            hi = mid
        if (lo - hi) == 0.0 or abs(lo - hi) < 1e-17 * max(1.0, abs(lo)):
            break
    _s, ts, ys, k = best
    stop = max(2, k - 20)  # back off a little from the escape
    return ys[:stop]


def generate_orbit_guess(
    p: FhnParams,
    corner: CornerData | None = None,
    n_points: int = 200,
    orbit_file: str | None = None,
    max_iters: int = 40,
) -> OrbitGuess:
    """Nonrigorous periodic-orbit approximation at moderate epsilon.

    Builds a skeleton from two full-field jump traces (launch offsets
    bisected so each rounds its corner and tracks the landing branch) plus
    first-order slow-manifold arcs for whatever branch range the traces do
    not cover, resamples to roughly equal transit times, and runs damped
    multiple-shooting Newton.  With a file given it is loaded instead.
    """
    if orbit_file is not None:
        return load_orbit(orbit_file)
    eps = p.eps_mid
    pe = p.with_epsilon(eps)
    if corner is None:
        corner = shoot_corner_points(pe)
    field = FhnField(pe)

    left = _orbit_jump_trace(pe, corner, "left")
    right = _orbit_jump_trace(pe, corner, "right")

    pieces = [left]
    # upper arc between the left trace's landing end and the right launch
    w_hi_start = left[-1, 2]
    w_hi_end = right[0, 2]
    if w_hi_end - w_hi_start > 1e-4:
        u_interp = _branch_u_interp("upper", pe)
        ws = np.linspace(w_hi_start + 2e-4, w_hi_end - 2e-4, 200)
        pieces.append(
            np.array([_corrected_branch_point(float(u_interp(w)), pe) for w in ws])
        )
    pieces.append(right)
    w_lo_start = right[-1, 2]
    w_lo_end = left[0, 2]
    if w_lo_start - w_lo_end > 1e-4:
        u_interp = _branch_u_interp("lower", pe)
        ws = np.linspace(w_lo_start - 2e-4, w_lo_end + 2e-4, 200)
        pieces.append(
            np.array([_corrected_branch_point(float(u_interp(w)), pe) for w in ws])
        )
    skel = np.vstack(pieces)

    pts = _resample_equal_time(skel, field, n_points)
    pts = _drop_dead_links(pts, field)
    guess = OrbitGuess(epsilon=eps, points=pts)
    refined, _times = refine_orbit(field, guess, max_iters=max_iters)
    return refined


# ---------------------------------------------------------------------------
# Theorem 2: validated continuation by covering relations
# ---------------------------------------------------------------------------


@dataclass
class Thm2Config:
    increment0: float = 1e-6
    x0_halfwidth: float = 1e-6
    div: int = 5
    exit_cap: float = 4.0
    growth_factor: float = 2.0
    increment_cap: float = 8e-6
    success_streak: int = 3
    increment_floor: float = 1e-9
    t_split: float = 2.0
    t_merge: float = 0.2
    frame_tol: float = 1e-6
    frame_loops: int = 5
    margin: float = 0.1
    exit_gap: float = 0.05
    max_link_time: float = 100.0
    icfg: IntegratorConfig = dc_field(
        default_factory=lambda: IntegratorConfig(trial_step=0.25)
    )


def _stable_frames(field: FhnField, points: np.ndarray, sections, cfg: Thm2Config):
    """Exit/entry in-plane unit vectors per section via variational loops."""
    k = len(points)

    def propagate(vec, backward: bool):
        f = field.negated() if backward else field
        order = range(k - 1, -1, -1) if backward else range(k)
        n = 3

        def rhs(t, y):
            x = y[:n]
            V = y[n:]
            return np.concatenate([f.eval_np(x), f.jac_np(x) @ V])

        outs = [None] * k
        v = vec / np.linalg.norm(vec)
        prev = None
        for _loop in range(cfg.frame_loops):
            start = v.copy()
            for i in order:
                src = points[i]
                tgt_i = (i + 1) % k if not backward else (i - 1) % k
                tgt = sections[tgt_i]

                def event(t, y):
                    return tgt.section_value_np(y[:n])

                event.terminal = True
                event.direction = -1.0 if backward else 1.0
                sol = solve_ivp(
                    rhs, (0.0, cfg.max_link_time), np.concatenate([src, v]),
                    method="DOP853", rtol=1e-10, atol=1e-12, events=event,
                )
                if not sol.t_events[0].size:
                    raise NoCrossing(f"frame propagation lost the section at {i}")
                v = sol.y_events[0][0][n:]
                v = v / np.linalg.norm(v)
                outs[tgt_i] = v.copy()
            if prev is not None and np.linalg.norm(v - prev) < cfg.frame_tol:
                break
            prev = v.copy()
        return outs

    rng = np.random.default_rng(0)
    exit_raw = propagate(rng.standard_normal(3), backward=False)
    entry_raw = propagate(rng.standard_normal(3), backward=True)
    frames = []
    for i in range(k):
        n = sections[i].normal
        vu = exit_raw[i] - n * (n @ exit_raw[i])
        vs = entry_raw[i] - n * (n @ entry_raw[i])
        vu = vu / np.linalg.norm(vu)
        vs = vs / np.linalg.norm(vs)
        if abs(np.cross(vu, vs) @ n) < 1e-6:
            raise NewtonDiverged(f"degenerate exit/entry frame at section {i}")
        frames.append(
            np.column_stack([sections[i].frame.T @ vu, sections[i].frame.T @ vs])
        )
    return frames


class _StepFailed(Exception):
    def __init__(self, reason: str):
        self.reason = reason
        super().__init__(reason)


def _continuation_step(orbit: OrbitGuess, eps_range: Interval, x0_hw: float,
                       cfg: Thm2Config):
    """One rigorous existence proof for eps in eps_range around the orbit."""
    p_mid = FhnParams(epsilon=eps_range.mid)
    field_mid = FhnField(p_mid)
    try:
        refined, times = refine_orbit(field_mid, orbit)
    except (NewtonDiverged, NoCrossing) as exc:
        raise _StepFailed(f"refine: {exc}") from exc
    sections = refined.sections()
    k = refined.count
    try:
        frames = _stable_frames(field_mid, refined.points, sections, cfg)
    except (NoCrossing, NewtonDiverged) as exc:
        raise _StepFailed(f"frames: {exc}") from exc

    p_rig = FhnParams(epsilon=eps_range)
    field_rig = FhnField(p_rig)

    hsets: list[HSet] = [
        HSet(sections[0], (0.0, 0.0), frames[0] * x0_hw)
    ]
    exit_cap = cfg.exit_cap * x0_hw
    min_margin = np.inf
    period = Interval(0.0)
    for i in range(k):
        tgt = sections[(i + 1) % k]
        mapper = PoincareMapper(
            field_rig, tgt, cfg.icfg, crossing_sign=1,
            max_time=max(10.0 * times[i], 5.0),
        )
        X = hsets[i]
        try:
            if i < k - 1:
                support, li, ri = _collect_images(mapper, X, cfg.div)
                Y, verdict = fit_covered_set(
                    support, li, ri, tgt, margin=cfg.margin,
                    frame=frames[i + 1], exit_gap=cfg.exit_gap,
                )
                if np.linalg.norm(Y.dirs[:, 0]) > exit_cap:
                    Y = HSet(
                        tgt, Y.center,
                        np.column_stack(
                            [Y.dirs[:, 0] * exit_cap / np.linalg.norm(Y.dirs[:, 0]),
                             Y.dirs[:, 1]]
                        ),
                    )
                    verdict = _reverify(support, li, ri, Y)
                if not verdict.holds:
                    raise _StepFailed(f"link {i}: covering fails {verdict.margin:.3g}")
                hsets.append(Y)
            else:
                verdict = check_covering(mapper, X, hsets[0], cfg.div)
                if not verdict.holds:
                    raise _StepFailed(
                        f"closing covering fails (margin {verdict.margin:.3g}"
                        f"{', ' + verdict.error if verdict.error else ''})"
                    )
            min_margin = min(min_margin, verdict.margin)
            period = period + mapper.last_time
        except (CannotFit, TransversalityLost, NoCrossing, StepRejected,
                MaxStepsExceeded) as exc:
            raise _StepFailed(f"link {i}: {type(exc).__name__}: {exc}") from exc

    # resample sections by transit time for the next step
    pts = [refined.points[0]]
    for i in range(k - 1):
        t = times[i]
        if t > cfg.t_split:
            sol = solve_ivp(
                lambda tt, y: field_mid.eval_np(y), (0.0, t / 2.0),
                refined.points[i], method="DOP853", rtol=1e-11, atol=1e-13,
            )
            pts.append(sol.y[:, -1])
            pts.append(refined.points[i + 1])
        elif t < cfg.t_merge and len(pts) > 1:
            continue  # drop the next point: merge the two links
        else:
            pts.append(refined.points[i + 1])
    next_orbit = OrbitGuess(refined.epsilon, np.array(pts))
    return refined, next_orbit, float(min_margin), period, k


def _reverify(support, left, right, Y: HSet):
    from .hsets import covering_margins

    def relabel(images):
        return [(l, Y.to_local(img)) for l, img in images]

    return covering_margins(relabel(support), relabel(left), relabel(right))


def prove_theorem2(
    eps_from: float,
    eps_to: float,
    seed_orbit: OrbitGuess,
    cfg: Thm2Config | None = None,
) -> ProofReport:
    """Validated continuation over [eps_from, eps_to] by covering loops.

    Each step proves existence for a closed eps-subinterval; consecutive
    subintervals share endpoints exactly, so the certified union is gap-free.
    The increment halves on failure (with the initial h-set size scaled
    proportionally) and grows on success streaks up to a cap.
    """
    if cfg is None:
        cfg = Thm2Config()
    rep = ProofReport(theorem="thm2", eps_lo=eps_from, eps_hi=eps_to)
    rep.config_echo.update(
        {
            "increment0": repr(cfg.increment0),
            "x0_halfwidth": repr(cfg.x0_halfwidth),
            "div": str(cfg.div),
            "increment_cap": repr(cfg.increment_cap),
            "order": str(cfg.icfg.order),
        }
    )
    t_start = time.perf_counter()
    orbit = seed_orbit
    lo = eps_from
    increment = cfg.increment0
    streak = 0
    increments: list[float] = []
    counts: list[int] = []
    ranges: list[tuple[float, float]] = []
    while lo < eps_to:
        hi = min(lo + increment, eps_to)
        t0 = time.perf_counter()
        try:
            refined, next_orbit, margin, period, k = _continuation_step(
                orbit, Interval(lo, hi),
                cfg.x0_halfwidth * min(1.0, increment / cfg.increment0), cfg,
            )
        except _StepFailed as exc:
            # a failed attempt is retried at a smaller increment, not a failed
            # proof; it is logged but kept out of the verdict
            rep.extras.setdefault("failed_attempts", []).append(
                f"eps=[{lo!r},{hi!r}]: {exc.reason}"
            )
            increment *= 0.5
            streak = 0
            if increment < cfg.increment_floor:
                raise ContinuationStalled(
                    f"increment underflow at eps={lo} ({exc.reason})"
                ) from exc
            continue
        rep.add(
            "covering",
            f"eps=[{lo!r},{hi!r}] loop k={k}",
            True,
            margin,
            wall_ms=1e3 * (time.perf_counter() - t0),
            note=f"period in [{period.lo:.8g}, {period.hi:.8g}]",
        )
        increments.append(increment)
        counts.append(k)
        ranges.append((lo, hi))
        orbit = next_orbit
        lo = hi
        streak += 1
        if streak >= cfg.success_streak:
            increment = min(increment * cfg.growth_factor, cfg.increment_cap)
    # gap-free coverage, asserted arithmetically
    gapfree = bool(ranges) and ranges[0][0] == eps_from and ranges[-1][1] >= eps_to
    for (a, b), (c, d) in zip(ranges, ranges[1:]):
        gapfree &= b == c
    rep.add("structural", "gap-free-coverage", gapfree, 0.0)
    rep.extras["increments"] = increments
    rep.extras["pm_counts"] = counts
    rep.phase_seconds["continuation"] = time.perf_counter() - t_start
    return rep


# ---------------------------------------------------------------------------
# Theorem 3: interval Newton-Moore for the cyclic Poincaré system
# ---------------------------------------------------------------------------


@dataclass
class NewtonVerdict:
    inclusion: str  # "unique-zero" | "no-zero" | "inconclusive"
    N_image: IntervalVector
    contraction: float


def newton_moore(F_rig, x0: np.ndarray, X: IntervalVector) -> NewtonVerdict:
    """Interval Newton operator N(x0, X) = x0 - [DF(X)]^{-1} F(x0).

    N inside the interior of X certifies a unique zero in X; N disjoint from
    X certifies no zero; anything else is inconclusive.
    """
    x0 = np.asarray(x0, dtype=float)
    if not X.contains(IntervalVector(x0)):
        raise ValueError("x0 must lie in X")
    Fx = F_rig.F(x0)
    DF = F_rig.DF(X)
    delta = linear_solve(DF, Fx)
    N = IntervalVector(x0) - delta
    rx = 0.5 * float(np.max(X.width()))
    rn = float(np.max(np.abs(np.concatenate([N.lo - x0, N.hi - x0]))))
    if X.interior_contains(N):
        verdict = "unique-zero"
    elif X.disjoint(N):
        verdict = "no-zero"
    else:
        verdict = "inconclusive"
    return NewtonVerdict(inclusion=verdict, N_image=N,
                         contraction=rn / rx if rx > 0 else np.inf)


class CyclicPoincareSystem:
    """F(x)_i = P_i(x_i) - x_{i+1} over the orbit's sections, rigorously."""

    def __init__(self, field: FhnField, orbit: OrbitGuess, cfg: IntegratorConfig,
                 times: list[float] | None = None, max_time: float = 100.0):
        self.field = field
        self.orbit = orbit
        self.sections = orbit.sections()
        self.cfg = cfg
        self.k = orbit.count
        self.times = times
        self.max_time = max_time

    def _max_time(self, i):
        if self.times is not None:
            return max(10.0 * self.times[i], 5.0)
        return self.max_time

    def F(self, x0: np.ndarray) -> IntervalVector:
        k = self.k
        out_lo = np.empty(2 * k)
        out_hi = np.empty(2 * k)
        for i in range(k):
            nxt = (i + 1) % k
            pt = self.sections[i].embed_np(x0[2 * i : 2 * i + 2])
            rep = rigorous_poincare(
                self.field, IntervalVector(pt), self.sections[nxt], self.cfg,
                crossing_sign=1, max_time=self._max_time(i),
            )
            diff = rep.image - IntervalVector(x0[2 * nxt : 2 * nxt + 2])
            out_lo[2 * i : 2 * i + 2] = diff.lo
            out_hi[2 * i : 2 * i + 2] = diff.hi
        return IntervalVector(out_lo, out_hi)

    def DF(self, X: IntervalVector) -> IntervalMatrix:
        k = self.k
        lo = np.zeros((2 * k, 2 * k))
        hi = np.zeros((2 * k, 2 * k))
        for i in range(k):
            nxt = (i + 1) % k
            sec = self.sections[i]
            box2 = IntervalVector(X.lo[2 * i : 2 * i + 2], X.hi[2 * i : 2 * i + 2])
            box3 = sec.embed(box2)
            rep = rigorous_poincare(
                self.field, box3, self.sections[nxt], self.cfg,
                crossing_sign=1, mode="C1", max_time=self._max_time(i),
                src_frame=sec.frame,
            )
            lo[2 * i : 2 * i + 2, 2 * i : 2 * i + 2] = rep.derivative.lo
            hi[2 * i : 2 * i + 2, 2 * i : 2 * i + 2] = rep.derivative.hi
            lo[2 * i, 2 * nxt] -= 1.0
            hi[2 * i, 2 * nxt] -= 1.0
            lo[2 * i + 1, 2 * nxt + 1] -= 1.0
            hi[2 * i + 1, 2 * nxt + 1] -= 1.0
        return IntervalMatrix(lo, hi)


def prove_theorem3(
    epsilon: float,
    orbit: OrbitGuess,
    radius: float = 1e-6,
    icfg: IntegratorConfig | None = None,
) -> ProofReport:
    """Existence and local uniqueness at a single epsilon via Newton-Moore."""
    if icfg is None:
        icfg = IntegratorConfig(trial_step=0.25)
    rep = ProofReport(theorem="thm3", eps_lo=epsilon, eps_hi=epsilon)
    rep.config_echo.update(
        {"radius": repr(radius), "pm_count": str(orbit.count), "order": str(icfg.order)}
    )
    t0 = time.perf_counter()
    field_mid = FhnField(FhnParams(epsilon=epsilon))
    refined, times = refine_orbit(field_mid, orbit)
    rep.phase_seconds["refine"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    field = FhnField(FhnParams(epsilon=Interval(epsilon)))
    system = CyclicPoincareSystem(field, refined, icfg, times=times)
    k = refined.count
    x0 = np.zeros(2 * k)
    X = IntervalVector.from_box(x0, radius)
    try:
        verdict = newton_moore(system, x0, X)
    except SingularEnclosure as exc:
        rep.add("newton-inclusion", f"eps={epsilon} k={k}", False, -np.inf,
                note=f"SingularEnclosure: {exc}")
        rep.phase_seconds["newton"] = time.perf_counter() - t0
        return rep
    n_radius = float(
        np.max(np.abs(np.concatenate([verdict.N_image.lo - x0, verdict.N_image.hi - x0])))
    )
    rep.add(
        "newton-inclusion",
        f"eps={epsilon} k={k}",
        verdict.inclusion == "unique-zero",
        radius - n_radius,
        wall_ms=1e3 * (time.perf_counter() - t0),
        note=f"verdict={verdict.inclusion} N-radius={n_radius:.4e}",
    )
    rep.extras["n_image_radius"] = n_radius
    rep.extras["contraction"] = verdict.contraction
    rep.extras["inclusion"] = verdict.inclusion
    rep.phase_seconds["newton"] = time.perf_counter() - t0
    return rep
