"""Sources of correlated +/-1 data.

Three kinds of source live here: the quantum singlet sampler, deterministic
hidden-variable models (local, optionally with a nonlocal B-side readout),
and the random telegraph wave. Hypothesised correlation functions that are
fed to the consistency checks are also defined here.
"""

from __future__ import annotations

import enum
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from typing import NamedTuple, Union

import numpy as np

from . import substreams
from .corrcore import BinaryStream, MatchedStreamSet
from .errors import RangeError, UnsupportedError, UsageError

__all__ = [
    "Kind",
    "CorrelationFunction",
    "eval_correlation_function",
    "wrap_angle",
    "sign",
    "SingletSource",
    "sample_singlet_pair",
    "LhvModel",
    "Setting",
    "bell_linear_model",
    "nonlocal_toy_model",
    "lhv_readout",
    "generate_matched_streams",
    "generate_unmatched_runs",
    "TelegraphProcess",
    "sample_telegraph",
]

TWO_PI = 2.0 * math.pi

# Substream namespaces; keeps matched, unmatched and telegraph draws disjoint.
MATCHED_KEY = 0
UNMATCHED_KEY = 1
TELEGRAPH_KEY = 2
CONDITIONAL_KEY = 3


def wrap_angle(d):
    """Map an angle difference onto [-pi, pi)."""
    return np.mod(np.asarray(d, dtype=float) + math.pi, TWO_PI) - math.pi


def sign(x) -> np.ndarray:
    """Sign with the tie ``sign(0) = +1``."""
    return np.where(np.asarray(x) >= 0, 1, -1).astype(np.int8)


# ---------------------------------------------------------------------------
# correlation functions


class Kind(enum.Enum):
    NEG_COSINE = "neg-cosine"
    COSINE = "cosine"
    BELL_LINEAR = "bell-linear"
    EXPONENTIAL = "exponential"
    TABULATED = "tabulated"


@dataclass(frozen=True)
class CorrelationFunction:
    """A hypothesised map from a setting or coordinate difference to a correlation.

    The angular kinds wrap their argument onto [-pi, pi) first. ``Exponential``
    works in spatial units and is not wrapped. A tabulated function is
    linearly interpolated and refuses to extrapolate.
    """

    kind: Kind
    correlation_length: float | None = None
    table: tuple[tuple[float, float], ...] = ()
    angular: bool = True

    def __post_init__(self):
        if self.kind is Kind.EXPONENTIAL:
            if self.correlation_length is None or not self.correlation_length > 0:
                raise UsageError("exponential correlation needs a positive correlation_length")
            object.__setattr__(self, "angular", False)
        if self.kind is Kind.TABULATED:
            if len(self.table) < 2:
                raise UsageError("a tabulated function needs at least two grid points")
            xs = [p[0] for p in self.table]
            if any(x1 >= x2 for x1, x2 in zip(xs, xs[1:])):
                raise UsageError("tabulated grid must be strictly increasing")
            if any(not -1.0 <= p[1] <= 1.0 for p in self.table):
                raise UsageError("tabulated correlations must lie in [-1, 1]")

    @classmethod
    def neg_cosine(cls) -> CorrelationFunction:
        return cls(Kind.NEG_COSINE)

    @classmethod
    def cosine(cls) -> CorrelationFunction:
        return cls(Kind.COSINE)

    @classmethod
    def bell_linear(cls) -> CorrelationFunction:
        return cls(Kind.BELL_LINEAR)

    @classmethod
    def exponential(cls, correlation_length: float) -> CorrelationFunction:
        return cls(Kind.EXPONENTIAL, correlation_length=float(correlation_length))

    @classmethod
    def tabulated(cls, points: Sequence[tuple[float, float]], angular: bool = False) -> CorrelationFunction:
        return cls(Kind.TABULATED, table=tuple((float(x), float(y)) for x, y in points), angular=angular)

    @property
    def domain(self) -> tuple[float, float]:
        if self.kind is Kind.TABULATED:
            return self.table[0][0], self.table[-1][0]
        return -math.inf, math.inf

    def __call__(self, difference):
        d = np.asarray(difference, dtype=float)
        if self.angular:
            d = wrap_angle(d)
        k = self.kind
        if k is Kind.NEG_COSINE:
            out = -np.cos(d)
        elif k is Kind.COSINE:
            out = np.cos(d)
        elif k is Kind.BELL_LINEAR:
            out = -1.0 + 2.0 * np.abs(d) / math.pi
        elif k is Kind.EXPONENTIAL:
            out = np.exp(-np.abs(d) / self.correlation_length)
        else:
            lo, hi = self.domain
            if np.any((d < lo) | (d > hi)):
                raise RangeError(f"tabulated function queried outside [{lo}, {hi}]")
            xs, ys = zip(*self.table)
            out = np.interp(d, xs, ys)
        out = np.clip(out, -1.0, 1.0)
        return float(out) if out.ndim == 0 else out

    def describe(self) -> dict:
        out = {"kind": self.kind.value}
        if self.kind is Kind.EXPONENTIAL:
            out["correlation_length"] = self.correlation_length
        if self.kind is Kind.TABULATED:
            out["table"] = [list(p) for p in self.table]
            out["angular"] = self.angular
        return out


def eval_correlation_function(f: CorrelationFunction, difference):
    return f(difference)


# ---------------------------------------------------------------------------
# quantum singlet


def _singlet_outcomes(a: float, b: float, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # Fair A outcome; B is opposite with probability (1 + cos(b - a)) / 2,
    # which gives P(s, t) = (1 - s t cos(b - a)) / 4.
    s = np.where(u[:, 0] < 0.5, 1, -1).astype(np.int8)
    p_opposite = 0.5 * (1.0 + math.cos(b - a))
    t = np.where(u[:, 1] < p_opposite, -s, s).astype(np.int8)
    return s, t


@dataclass(frozen=True)
class SingletSource:
    """Spin-singlet measurement statistics: fair marginals, ``<ab> = -cos(b - a)``."""

    name: str = "singlet"

    def pair_correlation(self, a: float, b: float) -> float:
        return -math.cos(b - a)

    def sample(self, a: float, b: float, n: int, seed: int, key=(UNMATCHED_KEY, 0)):
        u = substreams.uniforms(seed, tuple(key), n, 2)
        return _singlet_outcomes(a, b, u)


def sample_singlet_pair(a: float, b: float, rng: np.random.Generator) -> tuple[int, int]:
    s, t = _singlet_outcomes(a, b, rng.random((1, 2)))
    return int(s[0]), int(t[0])


# ---------------------------------------------------------------------------
# hidden-variable models

Readout = Callable[[float, np.ndarray], np.ndarray]
NonlocalReadout = Callable[[float, float, np.ndarray], np.ndarray]


def _uniform_angle(u: np.ndarray) -> np.ndarray:
    return TWO_PI * u


@dataclass(frozen=True)
class LhvModel:
    """Hidden-variable law plus deterministic +/-1 readouts per side.

    Readouts are vectorised over the hidden variable. ``nonlocal_b`` takes the
    B setting, the remote A setting and the hidden variable. When it is absent
    the model is local. The optional analytic correlations are test oracles
    and never feed the samplers.
    """

    name: str
    readout_a: Readout
    readout_b: Readout
    nonlocal_b: NonlocalReadout | None = None
    lambda_from_uniform: Callable[[np.ndarray], np.ndarray] = _uniform_angle
    pair_correlation: CorrelationFunction | None = field(default=None, compare=False)
    same_side_correlation: CorrelationFunction | None = field(default=None, compare=False)

    @property
    def is_local(self) -> bool:
        return self.nonlocal_b is None


def _bell_a(setting: float, lam: np.ndarray) -> np.ndarray:
    return sign(np.cos(lam - setting))


def _bell_b(setting: float, lam: np.ndarray) -> np.ndarray:
    return -sign(np.cos(lam - setting))


def _toy_nonlocal_b(setting: float, remote: float, lam: np.ndarray) -> np.ndarray:
    return -sign(np.cos(lam - setting + remote / 2.0))


def bell_linear_model() -> LhvModel:
    """Sign readouts of a uniform hidden angle; ``<ab> = -1 + 2|b - a|/pi``."""
    return LhvModel(
        name="bell-linear",
        readout_a=_bell_a,
        readout_b=_bell_b,
        pair_correlation=CorrelationFunction.bell_linear(),
        same_side_correlation=CorrelationFunction.tabulated(
            [(-math.pi, -1.0), (0.0, 1.0), (math.pi, -1.0)], angular=True
        ),
    )


def nonlocal_toy_model() -> LhvModel:
    """The bell-linear model with a B readout that also sees the A setting.

    Only used to demonstrate stream counting; its correlations carry no
    physical meaning.
    """
    base = bell_linear_model()
    return LhvModel(
        name="nonlocal-toy",
        readout_a=base.readout_a,
        readout_b=base.readout_b,
        nonlocal_b=_toy_nonlocal_b,
        pair_correlation=base.pair_correlation,
        same_side_correlation=base.same_side_correlation,
    )


def lhv_readout(model: LhvModel, side: str, setting: float, lam, remote_setting: float | None = None):
    """Readout of one side at ``setting`` for hidden value(s) ``lam``.

    Returns an int for scalar ``lam`` and an int8 array otherwise.
    """
    side = side.upper()
    scalar = np.ndim(lam) == 0
    lam_arr = np.atleast_1d(np.asarray(lam, dtype=float))
    if side == "A":
        if remote_setting is not None:
            raise UsageError("the A side has no remote-setting dependence")
        out = model.readout_a(setting, lam_arr)
    elif side == "B":
        if remote_setting is None:
            out = model.readout_b(setting, lam_arr)
        elif model.nonlocal_b is None:
            raise UsageError(f"model {model.name!r} is local; remote_setting is not accepted")
        else:
            out = model.nonlocal_b(setting, remote_setting, lam_arr)
    else:
        raise UsageError(f"side must be 'A' or 'B', got {side!r}")
    out = np.asarray(out, dtype=np.int8)
    return int(out[0]) if scalar else out


class Setting(NamedTuple):
    """One measurement setting: a side, an angle in radians, and for nonlocal
    B readouts the remote A angle."""

    side: str
    angle: float
    remote: float | None = None
    label: str | None = None

    def default_label(self) -> str:
        tag = f"{self.side.upper()}@{math.degrees(self.angle):.6f}"
        if self.remote is not None:
            tag += f"|{math.degrees(self.remote):.6f}"
        return tag


SettingLike = Union[Setting, tuple]


def _as_setting(s: SettingLike) -> Setting:
    return s if isinstance(s, Setting) else Setting(*s)


def _hidden_values(model: LhvModel, seed: int, key: tuple[int, ...], n: int) -> np.ndarray:
    return model.lambda_from_uniform(substreams.uniforms(seed, key, n, 1)[:, 0])


def generate_matched_streams(
    model: LhvModel, settings: Sequence[SettingLike], n: int, seed: int
) -> MatchedStreamSet:
    """One hidden value per trial, read out at every setting.

    This is counterfactual acquisition: all streams share trial indices, so
    any identity among them holds exactly.
    """
    if n < 1:
        raise UsageError("n must be at least 1")
    settings = [_as_setting(s) for s in settings]
    if not settings:
        raise UsageError("at least one setting is required")
    lam = _hidden_values(model, seed, (MATCHED_KEY,), n)
    streams, labels, meta = [], [], {}
    for k, s in enumerate(settings):
        label = s.label or s.default_label()
        if label in meta and s.label is None:
            label = f"{label}#{k}"
        streams.append(BinaryStream._trusted(lhv_readout(model, s.side, s.angle, lam, s.remote)))
        labels.append(label)
        meta[label] = (s.side.upper(), s.angle, s.remote)
    return MatchedStreamSet(tuple(labels), tuple(streams), meta)


def generate_unmatched_runs(
    source: SingletSource | LhvModel,
    setting_pairs: Sequence[tuple],
    n_per_run: int,
    seed: int,
) -> list[tuple[BinaryStream, BinaryStream]]:
    """An independent run of ``n_per_run`` trials for each setting pair.

    A pair is either ``(a, b)`` angles (A side then B side) or two
    :class:`Setting` values. Same-side pairs only exist for hidden-variable
    sources; quantum mechanics assigns no joint statistics to two settings on
    one particle.
    """
    if n_per_run < 1:
        raise UsageError("n_per_run must be at least 1")
    runs = []
    for r, pair in enumerate(setting_pairs):
        first, second = pair
        if not isinstance(first, tuple):
            first, second = Setting("A", float(first)), Setting("B", float(second))
        first, second = _as_setting(first), _as_setting(second)
        key = (UNMATCHED_KEY, r)
        if isinstance(source, SingletSource):
            sides = {first.side.upper(), second.side.upper()}
            if sides != {"A", "B"}:
                raise UnsupportedError(
                    "the singlet source has no joint statistics for two settings on the same "
                    "particle; their spin operators do not commute"
                )
            if first.remote is not None or second.remote is not None:
                raise UsageError("the singlet source takes no remote settings")
            s, t = source.sample(first.angle, second.angle, n_per_run, seed, key)
            if first.side.upper() == "B":
                s, t = t, s
            runs.append((BinaryStream._trusted(s), BinaryStream._trusted(t)))
        else:
            lam = _hidden_values(source, seed, key, n_per_run)
            x = lhv_readout(source, first.side, first.angle, lam, first.remote)
            y = lhv_readout(source, second.side, second.angle, lam, second.remote)
            runs.append((BinaryStream._trusted(x), BinaryStream._trusted(y)))
    return runs


# ---------------------------------------------------------------------------
# telegraph process


@dataclass(frozen=True)
class TelegraphProcess:
    """Random +/-1 wave flipping at Poisson events of the given rate.

    The value at the first position is a fair coin, so the process is
    stationary with correlation ``exp(-2 * rate * |dx|)``.
    """

    switching_rate: float

    def __post_init__(self):
        if not self.switching_rate > 0:
            raise UsageError("switching_rate must be positive")

    def correlation(self, lag):
        return np.exp(-2.0 * self.switching_rate * np.abs(lag))

    def correlation_function(self) -> CorrelationFunction:
        return CorrelationFunction.exponential(1.0 / (2.0 * self.switching_rate))


def sample_telegraph(process: TelegraphProcess, positions: Sequence[float], n: int, seed: int) -> MatchedStreamSet:
    """Read ``n`` independent realisations at each position.

    Only the parity of the number of events between consecutive positions
    matters, so each realisation draws a starting sign and one Poisson count
    per gap.
    """
    pos = np.asarray(positions, dtype=float)
    if pos.ndim != 1 or pos.size == 0:
        raise UsageError("positions must be a non-empty list")
    if np.any(np.diff(pos) <= 0):
        raise UsageError("positions must be strictly increasing")
    if n < 1:
        raise UsageError("n must be at least 1")
    means = process.switching_rate * np.diff(pos)

    def draw(gen: np.random.Generator, m: int) -> np.ndarray:
        start = np.where(gen.random(m) < 0.5, 1, -1)
        counts = gen.poisson(means, size=(m, means.size))
        return np.column_stack([start, counts])

    raw = substreams.per_trial(seed, (TELEGRAPH_KEY,), n, draw)
    flips = np.cumsum(raw[:, 1:], axis=1) % 2
    values = raw[:, :1] * np.where(np.column_stack([np.zeros(n, int), flips]) == 1, -1, 1)
    labels = tuple(f"x={x:.6f}" for x in pos)
    if len(set(labels)) != len(labels):
        labels = tuple(f"x{k}={x!r}" for k, x in enumerate(pos))
    streams = tuple(BinaryStream._trusted(values[:, k]) for k in range(pos.size))
    return MatchedStreamSet(labels, streams, {lab: ("X", float(x), None) for lab, x in zip(labels, pos)})
