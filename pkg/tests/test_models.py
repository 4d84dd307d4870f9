import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bellstreams import substreams
from bellstreams.corrcore import bell_identity_three, correlate
from bellstreams.errors import RangeError, UnsupportedError, UsageError
from bellstreams.models import (
    CorrelationFunction,
    Setting,
    SingletSource,
    TelegraphProcess,
    bell_linear_model,
    eval_correlation_function,
    generate_matched_streams,
    generate_unmatched_runs,
    lhv_readout,
    nonlocal_toy_model,
    sample_singlet_pair,
    sample_telegraph,
    sign,
    wrap_angle,
)

from oracles import parity_correlation

PI = math.pi


def within(est, target, k=3.0):
    return abs(est.value - target) <= k * est.stderr


class TestSubstreams:
    def test_prefix_independent_of_n(self):
        long = substreams.uniforms(5, (0,), 40_000)
        short = substreams.uniforms(5, (0,), 20_000)
        np.testing.assert_array_equal(long[:20_000], short)

    def test_offset_reproduces_trials(self):
        full = substreams.uniforms(5, (1,), 50_000)
        tail = substreams.uniforms(5, (1,), 10_000, first_trial=30_000)
        np.testing.assert_array_equal(full[30_000:40_000], tail)

    def test_keys_are_independent(self):
        assert not np.array_equal(substreams.uniforms(5, (0,), 10), substreams.uniforms(5, (1,), 10))


class TestCorrelationFunction:
    def test_values_at_zero(self):
        assert CorrelationFunction.neg_cosine()(0) == -1
        assert CorrelationFunction.cosine()(0) == 1
        assert CorrelationFunction.exponential(2.0)(0) == 1
        assert CorrelationFunction.bell_linear()(0) == -1

    def test_examples(self):
        assert eval_correlation_function(CorrelationFunction.neg_cosine(), PI / 2) == pytest.approx(0, abs=1e-15)
        assert CorrelationFunction.bell_linear()(PI) == pytest.approx(1)
        assert CorrelationFunction.bell_linear()(PI / 2) == pytest.approx(0)

    def test_wrapping(self):
        f = CorrelationFunction.bell_linear()
        assert f(2 * PI + 0.3) == pytest.approx(f(0.3))
        assert f(-0.3) == pytest.approx(f(0.3))

    def test_exponential_not_wrapped(self):
        f = CorrelationFunction.exponential(1.0)
        assert f(2 * PI) == pytest.approx(math.exp(-2 * PI))

    def test_tabulated(self):
        f = CorrelationFunction.tabulated([(0, 1), (1, 0), (2, -0.5)])
        assert f(0.5) == pytest.approx(0.5)
        assert f(1.5) == pytest.approx(-0.25)
        with pytest.raises(RangeError):
            f(2.5)
        with pytest.raises(RangeError):
            f(np.array([0.1, -0.1]))

    def test_tabulated_validation(self):
        with pytest.raises(UsageError):
            CorrelationFunction.tabulated([(0, 1), (0, 0)])
        with pytest.raises(UsageError):
            CorrelationFunction.tabulated([(0, 1.5), (1, 0)])
        with pytest.raises(UsageError):
            CorrelationFunction.exponential(0)

    @given(st.floats(-1e3, 1e3))
    def test_range(self, d):
        for f in (
            CorrelationFunction.neg_cosine(),
            CorrelationFunction.cosine(),
            CorrelationFunction.bell_linear(),
            CorrelationFunction.exponential(0.3),
        ):
            assert -1 <= f(d) <= 1

    @given(st.floats(-50, 50))
    def test_wrap_angle_range(self, d):
        w = float(wrap_angle(d))
        assert -PI <= w < PI
        assert math.cos(w) == pytest.approx(math.cos(d), abs=1e-9)


class TestSinglet:
    def test_equal_settings_anticorrelated(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            s, t = sample_singlet_pair(0.4, 0.4, rng)
            assert s == -t

    def test_opposite_settings_equal(self):
        rng = np.random.default_rng(1)
        for _ in range(200):
            s, t = sample_singlet_pair(0.0, PI, rng)
            assert s == t

    def test_sixty_degrees(self):
        (x, y), = generate_unmatched_runs(SingletSource(), [(0.0, PI / 3)], 10**6, 7)
        c = correlate(x, y)
        assert c.stderr == pytest.approx(0.000866, abs=1e-6)
        assert within(c, -0.5)

    def test_marginals_fair(self):
        (x, y), = generate_unmatched_runs(SingletSource(), [(0.3, 2.0)], 10**6, 8)
        for s in (x, y):
            mean = s.values.mean()
            assert abs(mean) <= 4 / math.sqrt(len(s))

    def test_forty_five(self):
        (x, y), = generate_unmatched_runs(SingletSource(), [(0.0, PI / 4)], 10**6, 9)
        assert within(correlate(x, y), -math.sqrt(0.5))

    def test_same_side_unsupported(self):
        with pytest.raises(UnsupportedError):
            generate_unmatched_runs(SingletSource(), [(Setting("B", 0.0), Setting("B", 1.0))], 10, 0)


class TestLhv:
    def test_readouts(self):
        m = bell_linear_model()
        assert lhv_readout(m, "A", 0.0, 0.0) == 1
        assert lhv_readout(m, "B", 0.0, 0.0) == -1

    def test_tie_break(self):
        # cos never returns an exact zero for float input, so test the sign rule itself
        assert sign(0.0) == 1 and sign(-0.0) == 1
        np.testing.assert_array_equal(sign(np.array([-0.5, 0.0, 0.5])), [-1, 1, 1])

    def test_remote_on_local_model(self):
        with pytest.raises(UsageError):
            lhv_readout(bell_linear_model(), "B", 0.0, 0.1, remote_setting=0.2)
        with pytest.raises(UsageError):
            lhv_readout(nonlocal_toy_model(), "A", 0.0, 0.1, remote_setting=0.2)

    def test_nonlocal_depends_on_remote(self):
        m = nonlocal_toy_model()
        lam = np.linspace(0, 2 * PI, 1000, endpoint=False)
        x = lhv_readout(m, "B", 0.3, lam, remote_setting=0.0)
        y = lhv_readout(m, "B", 0.3, lam, remote_setting=PI / 2)
        assert not np.array_equal(x, y)

    def test_matched_equal_settings_opposite(self):
        s = generate_matched_streams(bell_linear_model(), [("A", 0.0), ("B", 0.0)], 5000, 3)
        np.testing.assert_array_equal(s.streams[0].values, -s.streams[1].values)

    def test_single_setting_fair(self):
        s = generate_matched_streams(bell_linear_model(), [("A", 1.0)], 10**5, 3)
        assert abs(s.streams[0].values.mean()) < 4 / math.sqrt(10**5)

    def test_determinism(self):
        args = (bell_linear_model(), [("A", 0.0), ("B", 1.0), ("B", 2.0)], 30_000, 12)
        a, b = generate_matched_streams(*args), generate_matched_streams(*args)
        np.testing.assert_array_equal(a.as_array(), b.as_array())

    @given(st.floats(-PI, PI), st.floats(-PI, PI), st.floats(-PI, PI), st.integers(1, 300), st.integers(0, 2**32))
    @settings(max_examples=50, deadline=None)
    def test_matched_identity(self, a, b, b2, n, seed):
        s = generate_matched_streams(bell_linear_model(), [("A", a), ("B", b), ("B", b2)], n, seed)
        assert bell_identity_three(*s.streams).holds

    def test_linear_correlation_grid(self):
        m = bell_linear_model()
        for k, d in enumerate(np.linspace(-PI, PI, 12)):
            (x, y), = generate_unmatched_runs(m, [(0.2, 0.2 + d)], 10**5, 100 + k)
            assert within(correlate(x, y), m.pair_correlation(d)), d

    def test_linear_at_right_angle(self):
        m = bell_linear_model()
        (x, y), = generate_unmatched_runs(m, [(0.0, PI / 2)], 10**5, 4)
        assert within(correlate(x, y), CorrelationFunction.bell_linear()(PI / 2))

    def test_same_side_correlation(self):
        m = bell_linear_model()
        (x, y), = generate_unmatched_runs(m, [(Setting("B", 0.0), Setting("B", 1.0))], 10**5, 5)
        assert within(correlate(x, y), 1 - 2 / PI)

    def test_unmatched_runs_independent(self):
        runs = generate_unmatched_runs(bell_linear_model(), [(0.0, 1.0), (0.0, 1.0)], 1000, 6)
        assert not np.array_equal(runs[0][0].values, runs[1][0].values)


class TestTelegraph:
    def test_single_position(self):
        s = sample_telegraph(TelegraphProcess(1.0), [0.0], 10**5, 1)
        assert abs(s.streams[0].values.mean()) < 4 / math.sqrt(10**5)

    @pytest.mark.parametrize("rate,lag", [(1.0, 0.25), (0.5, 1.0), (3.0, 0.1)])
    def test_pair_correlation(self, rate, lag):
        s = sample_telegraph(TelegraphProcess(rate), [0.0, lag], 10**5, 2)
        target = parity_correlation(rate, lag)
        assert target == pytest.approx(math.exp(-2 * rate * lag), abs=1e-12)
        assert within(correlate(*s.streams), target)

    def test_non_increasing(self):
        with pytest.raises(UsageError):
            sample_telegraph(TelegraphProcess(1.0), [0.0, 0.0], 10, 1)

    @given(st.lists(st.floats(0, 10), min_size=3, max_size=3, unique=True), st.integers(1, 200))
    @settings(max_examples=30, deadline=None)
    def test_identity(self, pos, n):
        s = sample_telegraph(TelegraphProcess(0.7), sorted(pos), n, 5)
        assert bell_identity_three(*s.streams).holds

    def test_determinism(self):
        a = sample_telegraph(TelegraphProcess(1.0), [0, 1, 2], 20_000, 9)
        b = sample_telegraph(TelegraphProcess(1.0), [0, 1, 2], 20_000, 9)
        np.testing.assert_array_equal(a.as_array(), b.as_array())
