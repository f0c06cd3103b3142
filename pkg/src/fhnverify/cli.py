"""Command-line entry points: run proofs from config files, emit plot data.

Config files are flat INI-style text (one [section] per module, `key = value`
lines).  Exit codes are the machine contract: 0 proof verified, 1 verdict
false, 2 config error, 3 internal error.  Everything on stdout is
human-oriented logging; the report file is the machine-readable record.
"""

from __future__ import annotations

import argparse
import configparser
import sys
from dataclasses import dataclass, field as dc_field
from importlib import resources

import numpy as np

from . import report as report_mod
from .errors import FhnVerifyError
from .fhn import FhnParams
from .integrator import IntegratorConfig
from .intervals import Interval
from .pipelines import (
    OrbitGuess,
    Thm1Config,
    Thm2Config,
    generate_orbit_guess,
    load_orbit,
    prove_theorem1,
    prove_theorem2,
    prove_theorem3,
    save_orbit,
    shoot_corner_points,
    singular_skeleton,
)
from .segments import Segment


class ConfigError(Exception):
    pass


@dataclass
class RunConfig:
    theorem: str
    eps_lo: float = 0.0
    eps_hi: float = 0.0
    eps: float = 0.0
    radius: float = 1e-6
    orbit_file: str | None = None
    orbit_points: int = 200
    report_path: str = "report.txt"
    thm1: Thm1Config = dc_field(default_factory=Thm1Config)
    thm2: Thm2Config = dc_field(default_factory=Thm2Config)
    icfg: IntegratorConfig = dc_field(default_factory=IntegratorConfig)
    segment_table: dict | None = None


def _positive(cfg_val: str, name: str) -> float:
    try:
        v = float(cfg_val)
    except ValueError as exc:
        raise ConfigError(f"field {name}: not a number: {cfg_val!r}") from exc
    if v <= 0.0:
        raise ConfigError(f"field {name}: must be positive, got {cfg_val!r}")
    return v


def _eps_interval(text: str, name: str) -> Interval:
    """Outward-rounded interval of a decimal config value."""
    try:
        return Interval.from_decimal(text)
    except Exception as exc:
        raise ConfigError(f"field {name}: bad decimal {text!r}") from exc


def _parse_floats(text: str, n: int, name: str) -> list[float]:
    parts = text.split()
    if len(parts) != n:
        raise ConfigError(f"field {name}: expected {n} numbers, got {len(parts)}")
    try:
        return [float(x) for x in parts]
    except ValueError as exc:
        raise ConfigError(f"field {name}: {exc}") from exc


def _segment_table(cp: configparser.ConfigParser) -> dict | None:
    names = [s for s in cp.sections() if s.startswith("segment.")]
    if not names:
        return None
    table = {}
    for sec in names:
        name = sec.split(".", 1)[1]
        body = cp[sec]
        ab = _parse_floats(body.get("ab", ""), 2, f"{sec}.ab")
        entry = {"sign": int(body.get("sign", "1")), "ab": tuple(ab)}
        if "cd" in body:
            entry["cd"] = tuple(_parse_floats(body["cd"], 2, f"{sec}.cd"))
        if "w_off" in body:
            entry["w_off"] = _positive(body["w_off"], f"{sec}.w_off")
        table[name] = entry
    return table


def _integrator_config(cp: configparser.ConfigParser, fallback: IntegratorConfig) -> IntegratorConfig:
    if "integrator" not in cp:
        return fallback
    body = cp["integrator"]
    return IntegratorConfig(
        order=int(body.get("order", fallback.order)),
        h_min=float(body.get("h_min", fallback.h_min)),
        h_max=float(body.get("h_max", fallback.h_max)),
        trial_step=float(body.get("trial_step", fallback.trial_step)),
        rough_inflation=float(body.get("rough_inflation", fallback.rough_inflation)),
        rough_retries=int(body.get("rough_retries", fallback.rough_retries)),
        max_steps=int(body.get("max_steps", fallback.max_steps)),
    )


def parse_config(path: str) -> RunConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    read = cp.read(path)
    if not read:
        raise ConfigError(f"cannot read config {path!r}")
    if "run" not in cp:
        raise ConfigError("missing [run] section")
    run = cp["run"]
    theorem = run.get("theorem", "").strip()
    if theorem not in ("thm1", "thm2", "thm3"):
        raise ConfigError(f"field theorem: expected thm1|thm2|thm3, got {theorem!r}")
    rc = RunConfig(theorem=theorem)
    rc.report_path = run.get("report", "report.txt")
    rc.orbit_file = run.get("orbit_file", None)
    rc.orbit_points = int(run.get("orbit_points", "200"))
    rc.segment_table = _segment_table(cp)

    if theorem == "thm1":
        rc.eps_hi = _eps_interval(run.get("eps0", ""), "eps0").hi
        if _positive(run.get("eps0", "0"), "eps0") <= 0:
            raise ConfigError("field eps0: must be positive")
        sub = cp["thm1"] if "thm1" in cp else {}
        base = Thm1Config(table=rc.segment_table)
        rc.thm1 = Thm1Config(
            div=int(sub.get("div", base.div)),
            corner_subdiv=int(sub.get("corner_subdiv", base.corner_subdiv)),
            chain_subdiv=int(sub.get("chain_subdiv", base.chain_subdiv)),
            chain_N=int(sub.get("chain_n", base.chain_N)),
            factor=float(sub.get("factor", base.factor)),
            mid_margin=float(sub.get("mid_margin", base.mid_margin)),
            exit_gap=float(sub.get("exit_gap", base.exit_gap)),
            div_ident=int(sub.get("div_ident", base.div_ident)),
            s1a_subdiv=int(sub.get("s1a_subdiv", base.s1a_subdiv)),
            section_frac=float(sub.get("section_frac", base.section_frac)),
            blend=float(sub.get("blend", base.blend)),
            max_jump_time=float(sub.get("max_jump_time", base.max_jump_time)),
            table=rc.segment_table,
            icfg=_integrator_config(cp, IntegratorConfig(h_max=0.25)),
        )
    elif theorem == "thm2":
        lo = _eps_interval(run.get("eps_from", ""), "eps_from")
        hi = _eps_interval(run.get("eps_to", ""), "eps_to")
        if lo.lo <= 0 or hi.hi <= lo.lo:
            raise ConfigError("fields eps_from/eps_to: need 0 < eps_from < eps_to")
        rc.eps_lo, rc.eps_hi = lo.lo, hi.hi
        sub = cp["thm2"] if "thm2" in cp else {}
        base = Thm2Config()
        rc.thm2 = Thm2Config(
            increment0=float(sub.get("increment0", base.increment0)),
            x0_halfwidth=float(sub.get("x0_halfwidth", base.x0_halfwidth)),
            div=int(sub.get("div", base.div)),
            exit_cap=float(sub.get("exit_cap", base.exit_cap)),
            increment_cap=float(sub.get("increment_cap", base.increment_cap)),
            success_streak=int(sub.get("success_streak", base.success_streak)),
            t_split=float(sub.get("t_split", base.t_split)),
            t_merge=float(sub.get("t_merge", base.t_merge)),
            margin=float(sub.get("margin", base.margin)),
            icfg=_integrator_config(cp, base.icfg),
        )
    else:
        rc.eps = _positive(run.get("eps", "0"), "eps")
        rc.radius = _positive(run.get("radius", "1e-6"), "radius")
        rc.icfg = _integrator_config(cp, IntegratorConfig(trial_step=0.25))
    return rc


def run(config_path: str) -> int:
    """Dispatch a proof run; returns the process exit status."""
    try:
        rc = parse_config(config_path)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        if rc.theorem == "thm1":
            rep = prove_theorem1(rc.eps_hi, rc.thm1)
        elif rc.theorem == "thm2":
            seed = _seed_orbit(rc)
            rep = prove_theorem2(rc.eps_lo, rc.eps_hi, seed, rc.thm2)
        else:
            orbit = _seed_orbit(rc, at_eps=rc.eps)
            rep = prove_theorem3(rc.eps, orbit, rc.radius, rc.icfg)
    except FhnVerifyError as exc:
        print(f"proof machinery error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    text = report_mod.serialize(rep)
    with open(rc.report_path, "w") as fh:
        fh.write(text)
    print(f"theorem {rep.theorem}: verdict {'TRUE' if rep.verdict else 'FALSE'}")
    for r in rep.failing():
        print(f"  FAILED {r.kind} {r.ids} margin={r.margin:.4g} {r.note}")
    print(f"report written to {rc.report_path}")
    return 0 if rep.verdict else 1


def bundled_orbit_path() -> str:
    """Path of the reference orbit fixture at eps = 0.001."""
    return str(resources.files("fhnverify").joinpath("data/orbit_eps0.001.txt"))


def _seed_orbit(rc: RunConfig, at_eps: float | None = None) -> OrbitGuess:
    eps = at_eps if at_eps is not None else rc.eps_lo
    if rc.orbit_file:
        orbit = load_orbit(rc.orbit_file)
    else:
        orbit = generate_orbit_guess(FhnParams(epsilon=eps), n_points=rc.orbit_points)
    if abs(orbit.epsilon - eps) > 1e-12:
        # reuse the stored geometry as the initial guess at the new epsilon
        orbit = OrbitGuess(epsilon=eps, points=orbit.points)
    return orbit


def emit_plot_data(what: str, out_path: str, eps: float = 1e-3,
                   orbit_file: str | None = None) -> None:
    """CSV emission: orbit trajectories or segment corner vertices."""
    if what == "orbit":
        if orbit_file:
            orbit = load_orbit(orbit_file)
        else:
            orbit = generate_orbit_guess(FhnParams(epsilon=eps))
        times = np.zeros(orbit.count)
        with open(out_path, "w") as fh:
            fh.write("u,v,w,t\n")
            for t, (u, v, w) in zip(times, orbit.points):
                fh.write(f"{u!r},{v!r},{w!r},{t!r}\n")
    elif what == "singular-orbit":
        corner = shoot_corner_points()
        pts = singular_skeleton(corner)
        with open(out_path, "w") as fh:
            fh.write("u,v,w,t\n")
            for u, v, w in pts:
                fh.write(f"{u!r},{v!r},{w!r},0.0\n")
    elif what == "segments":
        from .pipelines import corner_segments

        corner = shoot_corner_points()
        segs = corner_segments(corner)
        with open(out_path, "w") as fh:
            fh.write("segment,vertex,u,v,w\n")
            for name, S in segs.items():
                verts = []
                for xm in (0.0, 1.0):
                    for xu in (-1.0, 1.0):
                        for xs in (-1.0, 1.0):
                            verts.append(S.support_point_np(xu, xs, xm))
                for i, p in enumerate(verts):
                    fh.write(f"{name},{i},{p[0]!r},{p[1]!r},{p[2]!r}\n")
    else:
        raise ConfigError(f"unknown plot kind {what!r}")


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(prog="fhn-verify",
                                 description="validated FitzHugh-Nagumo wave proofs")
    sub = ap.add_subparsers(dest="cmd", required=True)
    p_run = sub.add_parser("run", help="run a proof from a config file")
    p_run.add_argument("config")
    p_plot = sub.add_parser("plot", help="emit CSV plot data")
    p_plot.add_argument("what", choices=["orbit", "singular-orbit", "segments"])
    p_plot.add_argument("out")
    p_plot.add_argument("--eps", type=float, default=1e-3)
    p_plot.add_argument("--orbit-file", default=None)
    p_guess = sub.add_parser("orbit-guess", help="generate a nonrigorous orbit file")
    p_guess.add_argument("--eps", type=float, required=True)
    p_guess.add_argument("--out", required=True)
    p_guess.add_argument("--points", type=int, default=200)
    args = ap.parse_args(argv)

    if args.cmd == "run":
        return run(args.config)
    try:
        if args.cmd == "plot":
            emit_plot_data(args.what, args.out, eps=args.eps, orbit_file=args.orbit_file)
            print(f"wrote {args.out}")
            return 0
        if args.cmd == "orbit-guess":
            orbit = generate_orbit_guess(FhnParams(epsilon=args.eps), n_points=args.points)
            save_orbit(orbit, args.out,
                       note=f"nonrigorous multiple-shooting orbit at eps={args.eps}")
            print(f"wrote {args.out} ({orbit.count} points)")
            return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except FhnVerifyError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    return 2


if __name__ == "__main__":
    sys.exit(main())
