"""Exceptional couplings ``c_m`` of the simplified equation for ``alpha = -1``.

On the window ``(c_m, c_{m-1})`` the distinguished solution ``theta_0`` of the
simplified equation tends to ``theta_+(c) - m pi``.  The transitions are located by
classifying ``theta_0`` on a grid of couplings and bisecting every bucket change.
"""

from __future__ import annotations

import csv
import functools
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

from .distinguished import simplified_limit
from .errors import DomainError, NumericalError
from .model import ModelParams
from .odecore import StepControl
from .parallel import parallel_map

__all__ = [
    "ExceptionalEntry",
    "ExceptionalTable",
    "MinCount",
    "bucket",
    "find_exceptional",
    "c0_analytic_bound",
    "min_count",
    "max_safe_Z",
    "FINE_STRUCTURE_INVERSE",
]

FINE_STRUCTURE_INVERSE = 137.035999
CSV_COLUMNS = ("k", "m", "c_m", "bracket_lo", "bracket_hi", "tol", "resolved")


@dataclass(frozen=True)
class ExceptionalEntry:
    """Transition ``m -> m+1`` of the bucket index, bracketed by ``(lo, hi)``.

    ``c_m`` is ``None`` for a bracket-only entry, i.e. when the classifier stayed
    unresolved on a zone wider than the tolerance.
    """

    m: int
    c_m: Optional[float]
    bracket: tuple
    tol: float

    @property
    def resolved(self) -> bool:
        return self.c_m is not None


@dataclass(frozen=True)
class ExceptionalTable:
    k: float
    entries: tuple
    grid_resolution: float
    complete_to: float
    evidence: tuple = field(default=(), compare=False)

    @property
    def values(self) -> list:
        return [e.c_m for e in self.entries if e.resolved]

    @property
    def c0(self) -> Optional[float]:
        for e in self.entries:
            if e.m == 0:
                return e.c_m
        return None

    def rows(self) -> list:
        return [
            {"k": self.k, "m": e.m, "c_m": e.c_m if e.resolved else float("nan"),
             "bracket_lo": e.bracket[0], "bracket_hi": e.bracket[1], "tol": e.tol,
             "resolved": int(e.resolved)}
            for e in self.entries
        ]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_COLUMNS)
            for row in self.rows():
                w.writerow([_fmt(row[col]) for col in CSV_COLUMNS])


def _fmt(v):
    return f"{v:.17g}" if isinstance(v, float) else str(v)


def bucket(k: float, c: float, ctl: Optional[StepControl] = None) -> Optional[int]:
    """Bucket index ``m(c)`` of ``theta_0`` for ``alpha = -1``; ``None`` if unresolved."""
    return simplified_limit(ModelParams(float(k), -1, 1, float(c)), ctl=ctl).bucket_m


def _bucket_task(args):
    k, c, ctl = args
    return bucket(k, c, ctl)


def _locate(k, m, lo, hi, tol, ctl):
    """Bisect the transition ``m -> m+1`` with ``m(lo) > m >= m(hi)``, ``lo < hi``."""
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        probes = (mid, lo + 0.25 * (hi - lo), lo + 0.75 * (hi - lo))
        for x in probes:
            b = bucket(k, x, ctl)
            if b is not None:
                break
        else:
            return ExceptionalEntry(m, None, (lo, hi), tol)
        if b > m:
            lo = x
        else:
            hi = x
    return ExceptionalEntry(m, 0.5 * (lo + hi), (lo, hi), tol)


def _grid(k, depth, step):
    n = int(math.floor(-depth / step + 1e-9))
    cs = [-(i * step) for i in range(1, n + 1) if -(i * step) > depth]
    if not cs or cs[-1] > depth:
        cs.append(depth)
    return cs


def find_exceptional(k: float, c_depth: Optional[float] = None, grid_step: Optional[float] = None,
                     tol: float = 1e-8, ctl: Optional[StepControl] = None) -> ExceptionalTable:
    """Exceptional couplings in ``[c_depth, 0)``.

    Buckets are evaluated on the grid ``-grid_step, -2 grid_step, ...`` down to
    ``c_depth`` (default ``-k(1 - 1e-3)``, default step ``k/100``).  The bucket index
    must not decrease as ``c`` decreases; a violation raises :class:`NumericalError`.
    """
    if not k > 0:
        raise DomainError(f"k must be positive, got {k!r}")
    depth = -k * (1.0 - 1e-3) if c_depth is None else float(c_depth)
    if not (-k < depth < 0):
        raise DomainError(f"c_depth must lie in (-k, 0) = ({-k:g}, 0), got {c_depth!r}")
    step = k / 100.0 if grid_step is None else float(grid_step)
    if not step > 0:
        raise DomainError("grid_step must be positive")
    if not tol > 0:
        raise DomainError("tol must be positive")
    cs = _grid(k, depth, step)
    ms = parallel_map(_bucket_task, [(k, c, ctl) for c in cs])
    evidence = tuple(zip(cs, ms))
    resolved = [(c, m) for c, m in evidence if m is not None]
    prev = 0
    for c, m in resolved:
        if m < prev:
            raise NumericalError(f"bucket index decreased to {m} at c={c!r} (was {prev}); classifier failure")
        prev = m
    # c = 0- is bucket 0
    anchors = [(0.0, 0)] + resolved
    jobs = []
    for (c_hi, m_hi), (c_lo, m_lo) in zip(anchors, anchors[1:]):
        for m in range(m_hi, m_lo):
            jobs.append((m, c_lo, c_hi))
    entries = parallel_map(functools.partial(_locate_task, k=k, tol=tol, ctl=ctl), jobs)
    return ExceptionalTable(float(k), tuple(entries), step, depth, evidence)


def _locate_task(job, k, tol, ctl):
    m, lo, hi = job
    # the upper end of the first interval is c = 0 itself, which is not admissible
    if hi == 0.0:
        hi = -1e-12 * k
    return _locate(k, m, lo, hi, tol, ctl)


def c0_analytic_bound(k: float) -> float:
    """Upper bound for the first exceptional coupling:
    ``c_0^2 >= (18k^2 + 3 pi k - sqrt((18k^2 + 3 pi k)^2 - 132 pi k^3)) / 22``."""
    if not k > 0:
        raise DomainError(f"k must be positive, got {k!r}")
    b = 18.0 * k * k + 3.0 * math.pi * k
    return -math.sqrt((b - math.sqrt(b * b - 132.0 * math.pi * k**3)) / 22.0)


class MinCount(NamedTuple):
    clamped: int
    raw: int


def min_count(k: float) -> MinCount:
    """Guaranteed number of exceptional couplings, ``floor(k log 4 / pi - 1)``."""
    if not k > 0:
        raise DomainError(f"k must be positive, got {k!r}")
    raw = math.floor(k * math.log(4.0) / math.pi - 1.0)
    return MinCount(max(0, raw), raw)


def max_safe_Z(fine_structure_inverse: float = FINE_STRUCTURE_INVERSE) -> int:
    """Largest nuclear charge ``Z`` with ``Z / fine_structure_inverse`` inside the
    ``k = 1`` bound, so that every ``kappa`` has its coupling in the window ``C_0``."""
    if not fine_structure_inverse > 0:
        raise DomainError("fine_structure_inverse must be positive")
    return math.floor(-c0_analytic_bound(1.0) * fine_structure_inverse)
