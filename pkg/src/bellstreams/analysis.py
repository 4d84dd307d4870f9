"""Consistency analysis of hypothesised correlation functions.

All searches here are grid searches followed by shrinking-box refinement.
The objectives are cheap trigonometric expressions, so the coarse grid is
evaluated in full and ties are broken towards the lexicographically smallest
angle tuple.
"""

from __future__ import annotations

import dataclasses
import itertools
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Callable

import numpy as np

from .errors import UsageError
from .models import CorrelationFunction

if TYPE_CHECKING:
    from .gedanken import ViolationReport

__all__ = [
    "ScanGrid",
    "FeasibilityVerdict",
    "SearchResult",
    "wss_feasibility_scan",
    "three_term_violation",
    "chsh_excess",
    "violation_search_three",
    "violation_search_chsh",
    "slack_statistics",
]


@dataclass(frozen=True)
class ScanGrid:
    lo: float
    hi: float
    steps: int = 64
    refinement_rounds: int = 4
    refinement_shrink: float = 0.25

    def __post_init__(self):
        if not self.hi > self.lo:
            raise UsageError("grid needs hi > lo")
        if self.steps < 2:
            raise UsageError("grid needs at least two steps")
        if self.refinement_rounds < 0:
            raise UsageError("refinement_rounds must be non-negative")
        if not 0.0 < self.refinement_shrink < 1.0:
            raise UsageError("refinement_shrink must lie in (0, 1)")

    @property
    def resolution(self) -> float:
        return (self.hi - self.lo) / (self.steps - 1)

    def points(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.steps)

    def shifted(self, offset: float) -> ScanGrid:
        return dataclasses.replace(self, lo=self.lo + offset, hi=self.hi + offset)

    def describe(self) -> dict:
        return dataclasses.asdict(self) | {"resolution": self.resolution}


@dataclass(frozen=True)
class FeasibilityVerdict:
    """Result of scanning all grid triples ``x1 < x2 < x3``.

    The verdict certifies feasibility only at the grid points scanned.
    """

    feasible: bool
    worst_triple: tuple[float, float, float]
    worst_slack: float
    violations: list[tuple[tuple[float, float, float], float]]
    grid: ScanGrid
    tolerance: float
    orientation: int


def _autocorrelation_orientation(f: CorrelationFunction) -> int:
    # A pair function with f(0) = -1 (singlet convention) describes perfectly
    # anticorrelated sides; the single-process autocorrelation is then -f.
    lo, hi = f.domain
    if not lo <= 0.0 <= hi:
        return 1
    return 1 if f(0.0) >= 0 else -1


def wss_feasibility_scan(f: CorrelationFunction, grid: ScanGrid, tolerance: float = 1e-12) -> FeasibilityVerdict:
    """Check whether ``f`` can be the correlation of a homogeneous +/-1 process.

    Every triple of grid points yields three streams of any such process,
    which must satisfy ``1 - C(x3 - x2) - |C(x2 - x1) - C(x3 - x1)| >= 0``.
    Slack below ``-tolerance`` counts as a violation; the tolerance only
    absorbs float rounding in functions that attain the bound.
    """
    pts = grid.points()
    orientation = _autocorrelation_orientation(f)
    n = pts.size
    iu = np.triu_indices(n, k=1)
    corr = np.zeros((n, n))
    corr[iu] = orientation * np.asarray(f(pts[iu[1]] - pts[iu[0]]))
    triples = np.array(list(itertools.combinations(range(n), 3)), dtype=np.intp)
    i, j, k = triples.T
    slack = (1.0 - corr[j, k]) - np.abs(corr[i, j] - corr[i, k])
    worst = int(np.argmin(slack))
    bad = np.flatnonzero(slack < -tolerance)
    violations = [(tuple(float(x) for x in pts[triples[t]]), float(slack[t])) for t in bad]
    worst_slack = float(slack[worst])
    return FeasibilityVerdict(
        feasible=worst_slack >= -tolerance,
        worst_triple=tuple(float(x) for x in pts[triples[worst]]),
        worst_slack=worst_slack,
        violations=violations,
        grid=grid,
        tolerance=tolerance,
        orientation=orientation,
    )


def three_term_violation(f: CorrelationFunction, a, b, b2):
    """``|f(b-a) - f(b2-a)| - (1 - f(b2-b))``; positive means violation.

    Every correlation is taken from the same function ``f``.
    """
    return np.abs(f(b - a) - f(b2 - a)) - (1.0 - f(b2 - b))


def chsh_excess(f: CorrelationFunction, a, a2, b, b2):
    """``|f(b-a) + f(b2-a)| + |f(b-a2) - f(b2-a2)| - 2``."""
    return np.abs(f(b - a) + f(b2 - a)) + np.abs(f(b - a2) - f(b2 - a2)) - 2.0


@dataclass(frozen=True)
class SearchResult:
    best_angles: tuple[float, ...]
    best_value: float
    history: list[tuple[tuple[float, ...], float]] = field(default_factory=list)
    grid: ScanGrid | None = None


def _coarse_argmax(objective: Callable, pts: np.ndarray, dims: int) -> tuple[tuple[float, ...], float]:
    # Loop over the leading coordinate to bound memory; C-order argmax picks the
    # lexicographically smallest maximiser.
    best_val, best_idx = -math.inf, None
    rest = np.meshgrid(*([pts] * (dims - 1)), indexing="ij")
    for i0, x0 in enumerate(pts):
        vals = np.asarray(objective(x0, *rest))
        idx = int(np.argmax(vals))
        if vals.flat[idx] > best_val:
            best_val = float(vals.flat[idx])
            best_idx = (i0, *np.unravel_index(idx, vals.shape))
    return tuple(float(pts[i]) for i in best_idx), best_val


def _refine(objective, start, value, grid: ScanGrid, history):
    shrink = grid.refinement_shrink
    k = max(3, math.ceil(2.0 / shrink) + 1)
    if k % 2 == 0:
        k += 1
    half = grid.resolution
    best, best_val = np.asarray(start), value
    for _ in range(grid.refinement_rounds):
        axes = [np.clip(np.linspace(c - half, c + half, k), grid.lo, grid.hi) for c in best]
        mesh = np.meshgrid(*axes, indexing="ij")
        vals = np.asarray(objective(*mesh))
        idx = int(np.argmax(vals))
        # the centre point is on the local grid, so this never decreases
        if vals.flat[idx] >= best_val:
            best_val = float(vals.flat[idx])
            best = np.array([m.flat[idx] for m in mesh])
        history.append((tuple(float(x) for x in best), best_val))
        half *= shrink
    return tuple(float(x) for x in best), best_val


def _search(objective, dims: int, grid: ScanGrid) -> SearchResult:
    angles, value = _coarse_argmax(objective, grid.points(), dims)
    history = [(angles, value)]
    angles, value = _refine(objective, angles, value, grid, history)
    return SearchResult(angles, value, history, grid)


def violation_search_three(f: CorrelationFunction, grid: ScanGrid) -> SearchResult:
    """Maximise the three-term violation over ``(a, b, b2)``."""
    return _search(lambda a, b, b2: three_term_violation(f, a, b, b2), 3, grid)


def violation_search_chsh(f: CorrelationFunction, grid: ScanGrid) -> SearchResult:
    """Maximise the CHSH excess over ``(a, a2, b, b2)``."""
    return _search(lambda a, a2, b, b2: chsh_excess(f, a, a2, b, b2), 4, grid)


def slack_statistics(report: ViolationReport) -> ViolationReport:
    """Attach the standard error of the slack.

    Each correlation enters the slack with a coefficient of +/-1, so treating
    the estimates as independent the variances simply add. Matched reports
    are exact and keep a zero standard error.
    """
    if report.acquisition.value == "matched":
        return dataclasses.replace(report, stderr_of_slack=0.0)
    var = sum(c.stderr**2 for c in report.correlations.values())
    return dataclasses.replace(report, stderr_of_slack=math.sqrt(var))

