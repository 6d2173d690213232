"""Verification report records shared by every check."""

from __future__ import annotations

import math
import time
from contextlib import contextmanager
from dataclasses import dataclass, field


@dataclass
class VerificationReport:
    name: str
    statement: str
    samples: int
    max_residual: float
    threshold: float
    passed: bool
    margin: float = float("nan")
    status: str = "verified"
    details: dict = field(default_factory=dict)
    wall_time: float = 0.0

    def lines(self) -> list[str]:
        """Flat key = value lines in stable order; wall time is left out so output is reproducible."""
        out = [
            f"[{self.name}]",
            f"statement = {self.statement}",
            f"status = {self.status}",
            f"samples = {self.samples}",
            f"max_residual = {_fmt(self.max_residual)}",
            f"threshold = {_fmt(self.threshold)}",
            f"margin = {_fmt(self.margin)}",
            f"passed = {'true' if self.passed else 'false'}",
        ]
        for key in sorted(self.details):
            out.append(f"{key} = {_fmt(self.details[key])}")
        return out


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    return str(v)


def make_report(
    name: str,
    statement: str,
    samples: int,
    max_residual: float,
    threshold: float,
    *,
    positive: dict | None = None,
    details: dict | None = None,
    status: str = "verified",
) -> VerificationReport:
    """Build a report with pass <=> residual < threshold and every positivity flag true.

    ``margin`` is the relative headroom ``1 - residual/threshold``.
    """
    max_residual = float(max_residual)
    threshold = float(threshold)
    flags = dict(positive or {})
    ok = math.isfinite(max_residual) and max_residual < threshold and all(flags.values())
    extra = dict(details or {})
    for key, val in flags.items():
        extra[f"flag_{key}"] = bool(val)
    margin = 1.0 - max_residual / threshold if threshold > 0 else float("nan")
    return VerificationReport(
        name=name,
        statement=statement,
        samples=int(samples),
        max_residual=max_residual,
        threshold=threshold,
        passed=bool(ok),
        margin=float(margin),
        status=status,
        details=extra,
    )


@contextmanager
def timed(holder: dict):
    start = time.perf_counter()
    try:
        yield
    finally:
        holder["wall_time"] = time.perf_counter() - start
