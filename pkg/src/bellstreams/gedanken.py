"""Delayed-choice experiment engine.

Two acquisition protocols are contrasted here:

* matched: one hidden value per trial is read out at every setting, including
  the settings that were not "really" measured. The streams share trial
  indices and the identities hold exactly.
* unmatched: each setting pair gets its own independent run, which is how
  correlations are obtained in practice. Nothing ties the runs together, so
  the resulting correlations can violate the inequalities.
"""

from __future__ import annotations

import enum
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass

import numpy as np

from . import substreams
from .analysis import slack_statistics
from .corrcore import (
    CorrelationEstimate,
    MatchedStreamSet,
    bell_identity_four,
    bell_identity_three,
    correlate,
)
from .errors import ConfigurationError, InvariantBreach, NoSupportError, UnsupportedError, UsageError
from .models import (
    CONDITIONAL_KEY,
    LhvModel,
    Setting,
    SingletSource,
    generate_matched_streams,
    generate_unmatched_runs,
    lhv_readout,
)

__all__ = [
    "Acquisition",
    "Expression",
    "ExperimentProtocol",
    "ViolationReport",
    "CounterfactualEstimate",
    "run_delayed_choice",
    "three_correlation_experiment",
    "chsh_experiment",
    "conditional_counterfactual",
    "SIGNIFICANCE_SIGMAS",
]

# Monte Carlo slack must fall this many standard errors below zero before a
# violation is called significant.
SIGNIFICANCE_SIGMAS = 4.0


class Acquisition(enum.Enum):
    MATCHED = "matched"
    UNMATCHED = "unmatched"


class Expression(enum.Enum):
    THREE_TERM = "three-term"
    FOUR_TERM = "chsh"


@dataclass(frozen=True)
class ExperimentProtocol:
    acquisition: Acquisition
    a_settings: tuple[float, ...]
    b_settings: tuple[float, ...]
    locality: bool = True
    trials: int = 100_000
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "acquisition", Acquisition(self.acquisition))
        object.__setattr__(self, "a_settings", tuple(float(x) for x in self.a_settings))
        object.__setattr__(self, "b_settings", tuple(float(x) for x in self.b_settings))
        if self.trials < 1:
            raise UsageError("trials must be at least 1")
        if len(self.b_settings) != 2 or len(self.a_settings) not in (1, 2):
            raise UsageError("a protocol needs one or two A settings and exactly two B settings")
        if self.acquisition is Acquisition.MATCHED and not self.locality and self.four_correlation:
            raise ConfigurationError(
                "matched acquisition with nonlocal readouts yields six streams, which is "
                "inconsistent with the use of the four-stream identity"
            )

    @property
    def four_correlation(self) -> bool:
        return len(self.a_settings) == 2

    def describe(self) -> dict:
        return {
            "acquisition": self.acquisition.value,
            "a_settings_deg": [round(math.degrees(x), 6) for x in self.a_settings],
            "b_settings_deg": [round(math.degrees(x), 6) for x in self.b_settings],
            "locality": "local" if self.locality else "nonlocal",
            "trials": self.trials,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class ViolationReport:
    """An inequality evaluated on experiment output.

    ``violated`` is the bare sign test on the slack. ``significant`` asks for
    the slack to sit more than ``SIGNIFICANCE_SIGMAS`` standard errors below
    zero, which is the test to use on Monte Carlo data.
    """

    expression: Expression
    acquisition: Acquisition
    correlations: Mapping[str, CorrelationEstimate]
    settings: Mapping[str, tuple[float, float]]
    lhs: float
    rhs: float
    stderr_of_slack: float = 0.0

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs

    @property
    def violated(self) -> bool:
        return self.slack < 0

    @property
    def significant(self) -> bool:
        return self.slack < -SIGNIFICANCE_SIGMAS * self.stderr_of_slack

    def to_dict(self) -> dict:
        return {
            "expression": self.expression.value,
            "acquisition": self.acquisition.value,
            "correlations": {
                k: {
                    **v.to_dict(),
                    "settings_deg": [round(math.degrees(x), 6) for x in self.settings[k]],
                }
                for k, v in self.correlations.items()
            },
            "lhs": self.lhs,
            "rhs": self.rhs,
            "slack": self.slack,
            "stderr_of_slack": self.stderr_of_slack,
            "violated": self.violated,
            "significant": self.significant,
        }


def _a_labels(k: int) -> list[str]:
    return ["a", "a'"][:k]


def _check_model(model, locality: bool) -> None:
    if not isinstance(model, LhvModel):
        raise UnsupportedError(
            "matched acquisition needs a hidden-variable model; the singlet source has no "
            "counterfactual readouts"
        )
    if not locality and model.nonlocal_b is None:
        raise ConfigurationError(f"model {model.name!r} has no nonlocal readout")


def _delayed_choice_settings(a_settings, b_settings, locality: bool) -> list[Setting]:
    out = [Setting("A", a, None, lab) for lab, a in zip(_a_labels(len(a_settings)), a_settings)]
    for b_lab, b in zip(("b", "b'"), b_settings):
        if locality:
            out.append(Setting("B", b, None, b_lab))
    if not locality:
        for a_lab, a in zip(_a_labels(len(a_settings)), a_settings):
            for b_lab, b in zip(("b", "b'"), b_settings):
                out.append(Setting("B", b, a, f"{b_lab}|{a_lab}"))
    return out


def run_delayed_choice(
    model: LhvModel,
    a_settings: Sequence[float],
    b_settings: Sequence[float],
    locality: bool,
    n: int,
    seed: int,
) -> tuple[MatchedStreamSet, int]:
    """Generate every stream the delayed-choice apparatus defines.

    Local readouts give one stream per setting. A nonlocal B readout depends
    on which A setting was chosen, so every (B setting, A setting) pair is a
    separate stream: 2 + 4 = 6 streams for two settings per side. With a
    single A setting both cases give three streams.

    In the nonlocal case the B stream order is ``b|a, b'|a, b|a', b'|a'``.
    """
    if len(b_settings) != 2 or len(a_settings) not in (1, 2):
        raise UsageError("need one or two A settings and exactly two B settings")
    _check_model(model, locality)
    settings = _delayed_choice_settings(a_settings, b_settings, locality)
    streams = generate_matched_streams(model, settings, n, seed)
    return streams, len(streams)


def _matched_three(protocol: ExperimentProtocol, model: LhvModel) -> ViolationReport:
    streams, _ = run_delayed_choice(
        model, protocol.a_settings[:1], protocol.b_settings, protocol.locality, protocol.trials, protocol.seed
    )
    if protocol.locality:
        a, b, b2 = streams["a"], streams["b"], streams["b'"]
    else:
        a, b, b2 = streams["a"], streams["b|a"], streams["b'|a"]
    ident = bell_identity_three(a, b, b2)
    if not ident.holds:
        raise InvariantBreach(f"three-stream identity failed on matched data: {ident}")
    (ang_a,), (ang_b, ang_b2) = protocol.a_settings[:1], protocol.b_settings
    corr = {"ab": correlate(a, b), "ab'": correlate(a, b2), "bb'": correlate(b, b2)}
    return ViolationReport(
        Expression.THREE_TERM,
        Acquisition.MATCHED,
        corr,
        {"ab": (ang_a, ang_b), "ab'": (ang_a, ang_b2), "bb'": (ang_b, ang_b2)},
        lhs=float(ident.lhs),
        rhs=float(ident.rhs),
    )


def three_correlation_experiment(protocol: ExperimentProtocol, source: SingletSource | LhvModel) -> ViolationReport:
    """Evaluate ``|<ab> - <ab'>| <= 1 - <bb'>`` on acquired data.

    Unmatched acquisition needs a separate (b, b') run, which only a
    hidden-variable model can supply.
    """
    if protocol.four_correlation:
        raise UsageError("the three-correlation experiment takes a single A setting")
    if protocol.acquisition is Acquisition.MATCHED:
        _check_model(source, protocol.locality)
        return _matched_three(protocol, source)
    _check_unmatched_source(source, protocol.locality)
    (a,), (b, b2) = protocol.a_settings, protocol.b_settings
    remote = None if protocol.locality else a
    pairs = [
        (Setting("A", a), Setting("B", b, remote)),
        (Setting("A", a), Setting("B", b2, remote)),
        (Setting("B", b, remote), Setting("B", b2, remote)),
    ]
    runs = generate_unmatched_runs(source, pairs, protocol.trials, protocol.seed)
    corr = dict(zip(("ab", "ab'", "bb'"), (correlate(x, y) for x, y in runs)))
    report = ViolationReport(
        Expression.THREE_TERM,
        Acquisition.UNMATCHED,
        corr,
        {"ab": (a, b), "ab'": (a, b2), "bb'": (b, b2)},
        lhs=abs(corr["ab"].value - corr["ab'"].value),
        rhs=1.0 - corr["bb'"].value,
    )
    return slack_statistics(report)


def _check_unmatched_source(source, locality: bool) -> None:
    if isinstance(source, SingletSource):
        if not locality:
            raise ConfigurationError("the locality flag applies to hidden-variable models only")
    elif not locality and source.nonlocal_b is None:
        raise ConfigurationError(f"model {source.name!r} has no nonlocal readout")


def chsh_experiment(protocol: ExperimentProtocol, source: SingletSource | LhvModel) -> ViolationReport:
    """Evaluate ``|<ab> + <ab'>| + |<a'b> - <a'b'>| <= 2`` on acquired data."""
    if not protocol.four_correlation:
        raise UsageError("the CHSH experiment takes two A settings")
    (a, a2), (b, b2) = protocol.a_settings, protocol.b_settings
    labels = ("ab", "ab'", "a'b", "a'b'")
    angles = {"ab": (a, b), "ab'": (a, b2), "a'b": (a2, b), "a'b'": (a2, b2)}
    if protocol.acquisition is Acquisition.MATCHED:
        _check_model(source, protocol.locality)
        streams, count = run_delayed_choice(source, protocol.a_settings, protocol.b_settings, True, protocol.trials, protocol.seed)
        ident = bell_identity_four(streams["a"], streams["a'"], streams["b"], streams["b'"])
        if not ident.holds:
            raise InvariantBreach(f"four-stream identity failed on matched data: {ident}")
        corr = {
            lab: correlate(streams[x], streams[y])
            for lab, (x, y) in zip(labels, (("a", "b"), ("a", "b'"), ("a'", "b"), ("a'", "b'")))
        }
        return ViolationReport(
            Expression.FOUR_TERM, Acquisition.MATCHED, corr, angles, lhs=float(ident.lhs), rhs=2.0
        )
    _check_unmatched_source(source, protocol.locality)
    pairs = []
    for lab in labels:
        x, y = angles[lab]
        remote = None if protocol.locality else x
        pairs.append((Setting("A", x), Setting("B", y, remote)))
    runs = generate_unmatched_runs(source, pairs, protocol.trials, protocol.seed)
    corr = dict(zip(labels, (correlate(x, y) for x, y in runs)))
    v = {k: c.value for k, c in corr.items()}
    report = ViolationReport(
        Expression.FOUR_TERM,
        Acquisition.UNMATCHED,
        corr,
        angles,
        lhs=abs(v["ab"] + v["ab'"]) + abs(v["a'b"] - v["a'b'"]),
        rhs=2.0,
    )
    return slack_statistics(report)


@dataclass(frozen=True)
class CounterfactualEstimate:
    conditional_mean: float
    unconditional_mean: float
    stderr: float
    unconditional_stderr: float
    accepted: int
    drawn: int


def conditional_counterfactual(
    model: LhvModel,
    a_setting: float,
    b_setting: float,
    b2_setting: float,
    observed_a: int | None,
    observed_b: int | None,
    n: int,
    seed: int,
    max_draws: int | None = None,
) -> CounterfactualEstimate:
    """Estimate ``E[B(b2) | A(a) = observed_a, B(b) = observed_b]`` by rejection.

    Hidden values are drawn until ``n`` of them reproduce the observed
    outcomes, or ``max_draws`` (default ``100 * n``) is reached. Passing
    ``None`` for an observation drops that condition. The unconditional mean
    of ``B(b2)`` is taken over every draw.
    """
    if n < 1:
        raise UsageError("n must be at least 1")
    if not model.is_local:
        raise UsageError("conditional_counterfactual needs a local model")
    for obs in (observed_a, observed_b):
        if obs not in (None, 1, -1):
            raise UsageError(f"observed outcomes must be +1, -1 or None, got {obs!r}")
    max_draws = 100 * n if max_draws is None else max_draws
    accepted: list[np.ndarray] = []
    n_acc = drawn = 0
    total_b2 = 0
    while n_acc < n and drawn < max_draws:
        m = min(max(n - n_acc, substreams.BLOCK), max_draws - drawn)
        lam = model.lambda_from_uniform(
            substreams.uniforms(seed, (CONDITIONAL_KEY,), m, 1, first_trial=drawn)[:, 0]
        )
        out_b2 = lhv_readout(model, "B", b2_setting, lam)
        keep = np.ones(m, dtype=bool)
        if observed_a is not None:
            keep &= lhv_readout(model, "A", a_setting, lam) == observed_a
        if observed_b is not None:
            keep &= lhv_readout(model, "B", b_setting, lam) == observed_b
        hits = out_b2[keep]
        take = min(hits.size, n - n_acc)
        if take < hits.size:
            # stop at the draw that produced the n-th acceptance
            last = np.flatnonzero(keep)[take - 1] if take else -1
            m = last + 1
            out_b2 = out_b2[:m]
        accepted.append(hits[:take])
        n_acc += take
        drawn += m
        total_b2 += int(out_b2.astype(np.int64).sum())
    if n_acc == 0:
        raise NoSupportError(f"conditioning event never occurred in {drawn} draws")
    vals = np.concatenate(accepted).astype(np.int64)
    cond = float(vals.mean())
    uncond = total_b2 / drawn
    return CounterfactualEstimate(
        conditional_mean=cond,
        unconditional_mean=uncond,
        stderr=math.sqrt(max(0.0, 1.0 - cond * cond) / n_acc),
        unconditional_stderr=math.sqrt(max(0.0, 1.0 - uncond * uncond) / drawn),
        accepted=n_acc,
        drawn=drawn,
    )
