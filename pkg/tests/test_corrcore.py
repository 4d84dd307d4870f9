import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bellstreams.corrcore import (
    BinaryStream,
    CorrelationEstimate,
    FeasibleInterval,
    MatchedStreamSet,
    bell_identity_four,
    bell_identity_three,
    check_inequality_four,
    check_inequality_three,
    correlate,
    fourth_correlation_bounds,
    third_correlation_bounds,
)
from bellstreams.errors import DataError, DomainError, LengthMismatchError

from oracles import fair_coin_mean_within, fourth_bounds_by_lp, third_bounds_by_lp

S = BinaryStream
R = 1 / math.sqrt(2)


def signs(min_size=1, max_size=50):
    return st.lists(st.sampled_from([1, -1]), min_size=min_size, max_size=max_size)


@st.composite
def matched(draw, k):
    n = draw(st.integers(1, 60))
    return [S(draw(signs(n, n))) for _ in range(k)]


class TestBinaryStream:
    def test_rejects_zero(self):
        with pytest.raises(DataError):
            S([1, 0, -1])

    def test_rejects_other_values(self):
        with pytest.raises(DataError):
            S([1, 2])

    def test_rejects_empty(self):
        with pytest.raises(DataError):
            S([])

    def test_immutable(self):
        s = S([1, -1])
        with pytest.raises(ValueError):
            s.values[0] = -1

    def test_negate(self):
        assert list(-S([1, -1, -1])) == [-1, 1, 1]


class TestMatchedStreamSet:
    def test_unequal_lengths(self):
        with pytest.raises(LengthMismatchError):
            MatchedStreamSet(("a", "b"), (S([1, 1]), S([1])))

    def test_duplicate_labels(self):
        with pytest.raises(DataError):
            MatchedStreamSet(("a", "a"), (S([1]), S([1])))

    def test_lookup(self):
        m = MatchedStreamSet(("a", "b"), (S([1, 1]), S([-1, 1])))
        assert m["b"] == S([-1, 1])
        assert m.n == 2
        assert m.as_array().shape == (2, 2)


class TestCorrelate:
    def test_self(self):
        assert correlate(S([1, -1, 1]), S([1, -1, 1])).value == 1.0

    def test_cancellation(self):
        c = correlate(S([1, -1, 1, -1]), S([1, -1, -1, 1]))
        assert c.value == 0.0 and c.sum == 0

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatchError):
            correlate(S([1, 1]), S([1]))

    def test_stderr(self):
        c = correlate(S([1, 1, 1, -1]), S([1, 1, 1, 1]))
        assert c.stderr == pytest.approx(math.sqrt((1 - 0.25) / 4))

    def test_estimate_parity_invariant(self):
        with pytest.raises(DataError):
            CorrelationEstimate(sum=2, n=3)
        with pytest.raises(DataError):
            CorrelationEstimate(sum=5, n=3)

    def test_independent_coins(self):
        n = 10**5
        # the bound holds with probability computed exactly from the binomial law
        assert fair_coin_mean_within(n, 4) > 0.9999
        rng = np.random.default_rng(11)
        x = S(rng.choice([1, -1], n))
        y = S(rng.choice([1, -1], n))
        assert abs(correlate(x, y).value) < 4 / math.sqrt(n)

    @given(signs(), st.data())
    def test_symmetric_and_exact(self, xs, data):
        ys = data.draw(signs(len(xs), len(xs)))
        x, y = S(xs), S(ys)
        assert correlate(x, y) == correlate(y, x)
        assert correlate(x, y).sum == sum(p * q for p, q in zip(xs, ys))

    @given(signs())
    def test_self_and_negation(self, xs):
        x = S(xs)
        assert correlate(x, x).value == 1
        assert correlate(x, -x).value == -1


class TestIdentityThree:
    def test_identical_streams(self):
        r = bell_identity_three(*[S([1, 1, 1, 1])] * 3)
        assert (r.lhs, r.rhs, r.holds) == (0, 0, True)

    def test_equality_case(self):
        r = bell_identity_three(S([1, -1]), S([1, 1]), S([-1, 1]))
        assert r.exact_numerators == {"ab": 0, "ab2": -2, "bb2": 0}
        assert r.lhs == 1 and r.rhs == 1 and r.slack == 0 and r.holds

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatchError):
            bell_identity_three(S([1]), S([1, 1]), S([1, 1]))

    def test_exhaustive_short(self):
        for n in range(1, 5):
            vecs = [S(v) for v in itertools.product([1, -1], repeat=n)]
            for a, b, b2 in itertools.product(vecs, repeat=3):
                assert bell_identity_three(a, b, b2).holds

    @given(matched(3))
    def test_property(self, streams):
        r = bell_identity_three(*streams)
        assert r.holds
        assert isinstance(r.slack, Fraction)

    @given(matched(3))
    def test_inequality_agrees_with_identity(self, streams):
        a, b, b2 = streams
        slack = check_inequality_three(correlate(a, b).value, correlate(a, b2).value, correlate(b, b2).value)
        assert slack >= -1e-12


class TestIdentityFour:
    def test_all_ones(self):
        r = bell_identity_four(*[S([1, 1, 1])] * 4)
        assert r.lhs == 2 and r.slack == 0 and r.holds

    @given(matched(2))
    def test_degenerate_collapse(self, streams):
        a, b = streams
        r = bell_identity_four(a, a, b, b)
        assert r.lhs == 2 * abs(correlate(a, b).exact)
        assert r.holds

    @given(matched(4))
    def test_property(self, streams):
        assert bell_identity_four(*streams).holds


class TestInequalities:
    def test_three_perfect(self):
        assert check_inequality_three(-1, -1, 1) == 0

    def test_three_cosine_violation(self):
        # all-cosine values at 0, 30 and 150 degrees
        c30, c150 = math.cos(math.radians(30)), math.cos(math.radians(150))
        slack = check_inequality_three(-c30, -c150, -math.cos(math.radians(120)))
        assert slack == pytest.approx(0.5 - math.sqrt(3), abs=1e-12)
        assert check_inequality_three(-0.8660, 0.8660, 0.5) == pytest.approx(-1.2320, abs=1e-4)

    def test_three_unviolated(self):
        assert check_inequality_three(0, -0.7071, -0.7071) == pytest.approx(1.0)

    def test_four(self):
        assert check_inequality_four(1, 1, 1, 1) == 0
        assert check_inequality_four(0, 0, 0, 0) == 2
        assert check_inequality_four(-R, -R, R, -R) == pytest.approx(2 - 2 * math.sqrt(2))

    @pytest.mark.parametrize("vals", [(1.1, 0, 0), (0, -1.0001, 0), (0, 0, float("nan"))])
    def test_domain(self, vals):
        with pytest.raises(DomainError):
            check_inequality_three(*vals)
        with pytest.raises(DomainError):
            check_inequality_four(*vals, 0)


class TestBounds:
    def test_third_examples(self):
        assert tuple(third_correlation_bounds(1, 1)) == (1, 1)
        assert tuple(third_correlation_bounds(0.5, -0.5)) == (-1, 0)
        assert tuple(third_correlation_bounds(0, 0)) == (-1, 1)

    def test_third_domain(self):
        with pytest.raises(DomainError):
            third_correlation_bounds(2, 0)

    @given(st.floats(-1, 1), st.floats(-1, 1))
    @settings(max_examples=40, deadline=None)
    def test_third_matches_lp(self, x, y):
        lo, hi = third_bounds_by_lp(x, y)
        iv = third_correlation_bounds(x, y)
        assert iv.lower == pytest.approx(lo, abs=1e-7)
        assert iv.upper == pytest.approx(hi, abs=1e-7)

    def test_fourth_examples(self):
        assert tuple(fourth_correlation_bounds(1, 1, 1)) == (1, 1)
        assert tuple(fourth_correlation_bounds(0, 0, 0)) == (-1, 1)

    def test_fourth_excludes_quantum_value(self):
        iv = fourth_correlation_bounds(-0.7071, -0.7071, 0.7071)
        # endpoints from the 16-outcome linear program
        assert iv.lower == pytest.approx(0.1213, abs=1e-9)
        assert iv.upper == pytest.approx(1.0)
        assert -0.7071 not in iv

    @given(st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1))
    @settings(max_examples=40, deadline=None)
    def test_fourth_matches_lp(self, x, y, z):
        lo, hi = fourth_bounds_by_lp(x, y, z)
        iv = fourth_correlation_bounds(x, y, z)
        assert not iv.is_empty
        assert iv.lower == pytest.approx(lo, abs=1e-7)
        assert iv.upper == pytest.approx(hi, abs=1e-7)

    def test_empty_marker(self):
        e = FeasibleInterval.empty()
        assert e.is_empty and 0.0 not in e
