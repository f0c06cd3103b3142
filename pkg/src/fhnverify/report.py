"""Machine-readable proof reports: typed relation records plus serialization.

The text format is line-oriented `key value` records in bracketed sections;
it round-trips exactly and is the only machine contract of the CLI besides
exit codes.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field


@dataclass
class Relation:
    """One verified (or failed) inequality/covering with its margin."""

    kind: str  # covering | backcovering | identity-covering | s1a | s2b | s3b | newton-inclusion | structural
    ids: str
    holds: bool
    margin: float
    wall_ms: float = 0.0
    note: str = ""


@dataclass
class ProofReport:
    theorem: str
    eps_lo: float
    eps_hi: float
    relations: list[Relation] = field(default_factory=list)
    config_echo: dict = field(default_factory=dict)
    phase_seconds: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)

    @property
    def verdict(self) -> bool:
        return bool(self.relations) and all(r.holds for r in self.relations)

    def add(self, kind: str, ids: str, holds: bool, margin: float,
            wall_ms: float = 0.0, note: str = "") -> Relation:
        rel = Relation(kind, ids, bool(holds), float(margin), float(wall_ms), note)
        self.relations.append(rel)
        return rel

    def failing(self) -> list[Relation]:
        return [r for r in self.relations if not r.holds]


def serialize(report: ProofReport) -> str:
    out = io.StringIO()
    w = out.write
    w("fhn-verify-report 1\n")
    w(f"theorem {report.theorem}\n")
    w(f"eps_lo {report.eps_lo!r}\n")
    w(f"eps_hi {report.eps_hi!r}\n")
    w(f"verdict {'TRUE' if report.verdict else 'FALSE'}\n")
    w("[config]\n")
    for k, v in sorted(report.config_echo.items()):
        w(f"{k} {v}\n")
    w("[phase]\n")
    for k, v in report.phase_seconds.items():
        w(f"{k} {v!r}\n")
    w("[extras]\n")
    for k, v in report.extras.items():
        w(f"{k} {v!r}\n")
    for r in report.relations:
        w("[relation]\n")
        w(f"kind {r.kind}\n")
        w(f"id {r.ids}\n")
        w(f"holds {'true' if r.holds else 'false'}\n")
        w(f"margin {r.margin!r}\n")
        w(f"wall_ms {r.wall_ms!r}\n")
        if r.note:
            w(f"note {r.note}\n")
    w("[end]\n")
    return out.getvalue()


def parse(text: str) -> ProofReport:
    lines = text.splitlines()
    if not lines or not lines[0].startswith("fhn-verify-report"):
        raise ValueError("not a fhn-verify report")
    rep = ProofReport(theorem="", eps_lo=0.0, eps_hi=0.0)
    section = None
    current: dict | None = None

    def close_relation():
        nonlocal current
        if current is not None:
            rep.relations.append(
                Relation(
                    kind=current.get("kind", ""),
                    ids=current.get("id", ""),
                    holds=current.get("holds") == "true",
                    margin=float(current.get("margin", "nan")),
                    wall_ms=float(current.get("wall_ms", "0")),
                    note=current.get("note", ""),
                )
            )
            current = None

    for line in lines[1:]:
        if not line.strip():
            continue
        if line.startswith("["):
            close_relation()
            section = line.strip("[]")
            if section == "relation":
                current = {}
            continue
        key, _, value = line.partition(" ")
        if section is None:
            if key == "theorem":
                rep.theorem = value
            elif key == "eps_lo":
                rep.eps_lo = float(value)
            elif key == "eps_hi":
                rep.eps_hi = float(value)
        elif section == "config":
            rep.config_echo[key] = value
        elif section == "phase":
            rep.phase_seconds[key] = float(value)
        elif section == "extras":
            rep.extras[key] = value
        elif section == "relation":
            current[key] = value
    close_relation()
    return rep
