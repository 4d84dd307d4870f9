"""Exact correlation arithmetic on finite +/-1 data streams.

Correlations are carried as an integer numerator over the stream length so
that the three- and four-stream identities can be checked without any
floating-point tolerance. Floats only appear in the derived report fields.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Iterator, Mapping, Sequence
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import DataError, DomainError, LengthMismatchError

__all__ = [
    "BinaryStream",
    "MatchedStreamSet",
    "CorrelationEstimate",
    "IdentityReport",
    "FeasibleInterval",
    "correlate",
    "bell_identity_three",
    "bell_identity_four",
    "check_inequality_three",
    "check_inequality_four",
    "third_correlation_bounds",
    "fourth_correlation_bounds",
]


class BinaryStream:
    """An immutable finite sequence of +1/-1 outcomes."""

    __slots__ = ("_values",)

    def __init__(self, values: Iterable[int] | np.ndarray):
        arr = np.asarray(values if isinstance(values, np.ndarray) else list(values))
        if arr.ndim != 1:
            raise DataError("a stream must be one-dimensional")
        if arr.size == 0:
            raise DataError("a stream needs at least one outcome")
        if not np.all((arr == 1) | (arr == -1)):
            raise DataError("stream entries must be exactly +1 or -1")
        arr = arr.astype(np.int8)
        arr.flags.writeable = False
        self._values = arr

    @classmethod
    def _trusted(cls, arr: np.ndarray) -> BinaryStream:
        # Skips validation; callers guarantee a 1-D array of +/-1.
        obj = cls.__new__(cls)
        arr = np.asarray(arr, dtype=np.int8)
        arr.flags.writeable = False
        obj._values = arr
        return obj

    @property
    def values(self) -> np.ndarray:
        return self._values

    def __len__(self) -> int:
        return int(self._values.size)

    def __iter__(self) -> Iterator[int]:
        return (int(v) for v in self._values)

    def __getitem__(self, i):
        return int(self._values[i])

    def __eq__(self, other) -> bool:
        if not isinstance(other, BinaryStream):
            return NotImplemented
        return np.array_equal(self._values, other._values)

    def __hash__(self) -> int:
        return hash(self._values.tobytes())

    def __neg__(self) -> BinaryStream:
        return BinaryStream._trusted(-self._values)

    def negate(self) -> BinaryStream:
        return -self

    def __repr__(self) -> str:
        head = " ".join(f"{v:+d}" for v in self._values[:8])
        more = " ..." if len(self) > 8 else ""
        return f"BinaryStream(N={len(self)}: {head}{more})"


@dataclass(frozen=True)
class MatchedStreamSet:
    """Equal-length streams sharing trial indices, keyed by setting label."""

    labels: tuple[str, ...]
    streams: tuple[BinaryStream, ...]
    settings: Mapping[str, tuple] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if len(self.labels) != len(self.streams):
            raise DataError("one label per stream is required")
        if len(set(self.labels)) != len(self.labels):
            raise DataError(f"labels must be unique: {self.labels}")
        if not self.streams:
            raise DataError("a stream set needs at least one stream")
        lengths = {len(s) for s in self.streams}
        if len(lengths) != 1:
            raise LengthMismatchError(f"streams have unequal lengths {sorted(lengths)}")

    @classmethod
    def from_mapping(cls, streams: Mapping[str, BinaryStream], settings=None) -> MatchedStreamSet:
        return cls(tuple(streams), tuple(streams.values()), dict(settings or {}))

    @property
    def n(self) -> int:
        return len(self.streams[0])

    def __len__(self) -> int:
        return len(self.streams)

    def __getitem__(self, label: str) -> BinaryStream:
        try:
            return self.streams[self.labels.index(label)]
        except ValueError:
            raise KeyError(label) from None

    def __iter__(self) -> Iterator[str]:
        return iter(self.labels)

    def items(self):
        return zip(self.labels, self.streams)

    def as_array(self) -> np.ndarray:
        """Trials as rows, streams as columns."""
        return np.column_stack([s.values for s in self.streams])


@dataclass(frozen=True)
class CorrelationEstimate:
    """Sample correlation ``sum / n`` of two +/-1 streams."""

    sum: int
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise DataError("n must be positive")
        if abs(self.sum) > self.n or (self.sum - self.n) % 2:
            raise DataError(f"sum {self.sum} is not a valid product sum for n={self.n}")

    @property
    def value(self) -> float:
        return self.sum / self.n

    @property
    def exact(self) -> Fraction:
        return Fraction(self.sum, self.n)

    @property
    def stderr(self) -> float:
        v = self.value
        return math.sqrt(max(0.0, 1.0 - v * v) / self.n)

    def to_dict(self) -> dict:
        return {"value": self.value, "n": self.n, "sum": self.sum, "stderr": self.stderr}


@dataclass(frozen=True)
class IdentityReport:
    """Outcome of an identity check.

    Both sides are stored scaled by the stream length ``n`` so that the
    comparison is between integers; ``lhs``, ``rhs`` and ``slack`` are the
    exact fractions.
    """

    lhs_scaled: int
    rhs_scaled: int
    n: int
    exact_numerators: Mapping[str, int]

    @property
    def lhs(self) -> Fraction:
        return Fraction(self.lhs_scaled, self.n)

    @property
    def rhs(self) -> Fraction:
        return Fraction(self.rhs_scaled, self.n)

    @property
    def slack(self) -> Fraction:
        return Fraction(self.rhs_scaled - self.lhs_scaled, self.n)

    @property
    def holds(self) -> bool:
        return self.rhs_scaled >= self.lhs_scaled

    def to_dict(self) -> dict:
        return {
            "lhs": float(self.lhs),
            "rhs": float(self.rhs),
            "slack": float(self.slack),
            "holds": self.holds,
            "n": self.n,
            "exact_numerators": dict(self.exact_numerators),
        }


@dataclass(frozen=True)
class FeasibleInterval:
    """Closed interval of achievable correlation values, or the empty set."""

    lower: float | None
    upper: float | None

    @classmethod
    def empty(cls) -> FeasibleInterval:
        return cls(None, None)

    @property
    def is_empty(self) -> bool:
        return self.lower is None

    def __contains__(self, x: float) -> bool:
        return not self.is_empty and self.lower <= x <= self.upper

    def __iter__(self):
        return iter((self.lower, self.upper))


def _product_sum(x: BinaryStream, y: BinaryStream) -> int:
    if len(x) != len(y):
        raise LengthMismatchError(f"stream lengths differ: {len(x)} != {len(y)}")
    # each disagreement contributes -1, each agreement +1
    return len(x) - 2 * int(np.count_nonzero(x.values != y.values))


def correlate(x: BinaryStream, y: BinaryStream) -> CorrelationEstimate:
    return CorrelationEstimate(_product_sum(x, y), len(x))


def bell_identity_three(a: BinaryStream, b: BinaryStream, b2: BinaryStream) -> IdentityReport:
    """Evaluate ``|<ab> - <ab2>| <= 1 - <b b2>`` on matched streams.

    Holds for every possible input; a failure would mean an arithmetic bug.
    """
    n = len(a)
    s_ab, s_ab2, s_bb2 = _product_sum(a, b), _product_sum(a, b2), _product_sum(b, b2)
    return IdentityReport(
        lhs_scaled=abs(s_ab - s_ab2),
        rhs_scaled=n - s_bb2,
        n=n,
        exact_numerators={"ab": s_ab, "ab2": s_ab2, "bb2": s_bb2},
    )


def bell_identity_four(
    a: BinaryStream, a2: BinaryStream, b: BinaryStream, b2: BinaryStream
) -> IdentityReport:
    """Evaluate ``|<ab> + <ab2>| + |<a2 b> - <a2 b2>| <= 2`` on matched streams."""
    n = len(a)
    s_ab, s_ab2 = _product_sum(a, b), _product_sum(a, b2)
    s_a2b, s_a2b2 = _product_sum(a2, b), _product_sum(a2, b2)
    return IdentityReport(
        lhs_scaled=abs(s_ab + s_ab2) + abs(s_a2b - s_a2b2),
        rhs_scaled=2 * n,
        n=n,
        exact_numerators={"ab": s_ab, "ab2": s_ab2, "a2b": s_a2b, "a2b2": s_a2b2},
    )


def _check_domain(values: Sequence[float]) -> None:
    for v in values:
        if not (-1.0 <= v <= 1.0):
            raise DomainError(f"correlation {v!r} lies outside [-1, 1]")


def check_inequality_three(c_ab: float, c_ab2: float, c_bb2: float) -> float:
    """Slack of the three-correlation inequality; negative means no matched data can exist."""
    _check_domain((c_ab, c_ab2, c_bb2))
    return (1.0 - c_bb2) - abs(c_ab - c_ab2)


def check_inequality_four(c_ab: float, c_ab2: float, c_a2b: float, c_a2b2: float) -> float:
    _check_domain((c_ab, c_ab2, c_a2b, c_a2b2))
    return 2.0 - (abs(c_ab + c_ab2) + abs(c_a2b - c_a2b2))


def third_correlation_bounds(c_ab: float, c_ab2: float) -> FeasibleInterval:
    """Range of ``<b b2>`` compatible with given ``<ab>`` and ``<ab2>``.

    Every pair in [-1, 1]^2 is achievable, so the interval is never empty.
    """
    _check_domain((c_ab, c_ab2))
    return FeasibleInterval(abs(c_ab + c_ab2) - 1.0, 1.0 - abs(c_ab - c_ab2))


def fourth_correlation_bounds(c_ab: float, c_ab2: float, c_a2b: float) -> FeasibleInterval:
    """Range of ``<a2 b2>`` given the other three CHSH correlations.

    The four correlations close the cycle a-b-a2-b2-a, whose achievable set is
    cut out by the eight sign variants ``|E1 + E2 + E3 - E4| <= 2`` (one term
    negated in each) plus ``|E| <= 1``.
    """
    _check_domain((c_ab, c_ab2, c_a2b))
    total = c_ab + c_ab2 + c_a2b
    lower, upper = -1.0, 1.0
    # x negated: -2 <= total - x <= 2
    lower, upper = max(lower, total - 2.0), min(upper, total + 2.0)
    # one known term negated: -2 <= total - 2*c + x <= 2
    for c in (c_ab, c_ab2, c_a2b):
        rest = total - 2.0 * c
        lower, upper = max(lower, -2.0 - rest), min(upper, 2.0 - rest)
    if lower > upper + _ROUNDING:
        return FeasibleInterval.empty()
    return FeasibleInterval(min(lower, upper), upper)


_ROUNDING = 1e-12
