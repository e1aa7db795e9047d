import math
from fractions import Fraction

import mpmath
import pytest
from hypothesis import given, strategies as st

from coinsieve import DomainError, TernaryCoeffDist
from coinsieve.poly_square import (
    bracket_r,
    claim_bound,
    entropy_map,
    from_balanced_ternary,
    monte_carlo_square_divisor,
    optimize_rate,
    rate_bound,
    solve_entropy_threshold,
    to_balanced_ternary,
)
from coinsieve.residue_dp import (
    enumerate_square_divisor_prob,
    max_abs_value,
    prob_value_zero,
    union_by_inclusion_exclusion,
)

UNIFORM = (Fraction(1, 3), Fraction(1, 3), Fraction(1, 3))
DISTS = [
    UNIFORM,
    (Fraction(1, 4), Fraction(1, 2), Fraction(1, 4)),
    (Fraction(1, 10), Fraction(7, 10), Fraction(1, 5)),
    (Fraction(1, 2), Fraction(0), Fraction(1, 2)),
    (Fraction(0), Fraction(3, 5), Fraction(2, 5)),
]


def test_balanced_ternary_examples():
    assert to_balanced_ternary(0, 4).digits == (0, 0, 0, 0)
    assert to_balanced_ternary(5, 3).digits == (-1, -1, 1)
    assert to_balanced_ternary(-5, 3).digits == (1, 1, -1)
    with pytest.raises(DomainError):
        to_balanced_ternary(14, 3)
    assert int(to_balanced_ternary(13, 3)) == 13


def test_balanced_ternary_exhaustive_small():
    for r in range(11):
        half = (3**r - 1) // 2
        codes = set()
        for n in range(-half, half + 1):
            code = to_balanced_ternary(n, r)
            assert from_balanced_ternary(code) == n
            codes.add(code.digits)
        assert len(codes) == 3**r


@given(st.integers(1, 20).flatmap(
    lambda r: st.tuples(st.just(r), st.integers(-(3**r - 1) // 2, (3**r - 1) // 2))))
def test_balanced_ternary_round_trip(args):
    r, n = args
    assert from_balanced_ternary(to_balanced_ternary(n, r)) == n


def test_entropy_threshold_values():
    assert solve_entropy_threshold(0.5) == 0.5
    t = solve_entropy_threshold(0.9)
    assert abs(entropy_map(t) - 0.9) <= 1e-12
    with pytest.raises(DomainError):
        solve_entropy_threshold(0.4)
    with pytest.raises(DomainError):
        solve_entropy_threshold(1.0)


def test_entropy_threshold_against_mpmath():
    with mpmath.workdps(40):
        c = 1 / mpmath.sqrt(3)
        root = mpmath.findroot(lambda t: t * mpmath.log(t) + (1 - t) * mpmath.log(1 - t)
                               - mpmath.log(c), (0.7, 0.8), solver="anderson")
    assert abs(solve_entropy_threshold(1 / math.sqrt(3)) - float(root)) <= 1e-15


@given(st.floats(0.5001, 0.9999))
def test_entropy_back_substitution(c):
    assert abs(entropy_map(solve_entropy_threshold(c)) - c) <= 1e-12


def test_rate_invariants_and_limits():
    dist = TernaryCoeffDist.with_max(0.6)
    rb = rate_bound(dist, 5, 3.0)
    assert 1 / rb.p + 1 / rb.q == pytest.approx(1, abs=1e-12)
    assert rb.total_bound == pytest.approx(rb.per_digit_rate**5, rel=1e-12)
    assert rate_bound(dist, 1, 1e9).per_digit_rate == pytest.approx(1, abs=1e-8)
    with pytest.raises(DomainError):
        rate_bound(dist, 1, 1.0)


def test_rate_threshold_sides():
    assert optimize_rate(TernaryCoeffDist.with_max(0.70), 1).per_digit_rate < 1
    assert optimize_rate(TernaryCoeffDist.with_max(0.80), 1, two_term=True).two_term_rate >= 1
    t_star = solve_entropy_threshold(1 / math.sqrt(3))
    assert optimize_rate(TernaryCoeffDist.with_max(t_star - 0.01), 1, True).two_term_rate < 1
    assert optimize_rate(TernaryCoeffDist.with_max(t_star + 0.01), 1, True).two_term_rate >= 1


def test_old_condition_implies_new():
    # every law with max probability below 1/sqrt3 is inside the new regime
    for t in [0.34, 0.4, 0.45, 0.5, 0.55, 0.577]:
        for split in [0.0, 0.25, 0.5]:
            rest = 1 - t
            probs = sorted([t, rest * split, rest * (1 - split)])
            if max(probs) >= 1 / math.sqrt(3) or probs[-1] != t:
                continue
            dist = TernaryCoeffDist(probs[0], probs[1], probs[2])
            assert optimize_rate(dist, 1, two_term=True).two_term_rate < 1
            assert dist.rho < solve_entropy_threshold(1 / math.sqrt(3))


def test_claim_bracketing():
    assert bracket_r(3) == 2
    assert bracket_r(2) == 1
    assert bracket_r(10) == 4
    with pytest.raises(DomainError):
        bracket_r(1)


def test_claim_uniform_b10():
    rep = claim_bound(TernaryCoeffDist(*UNIFORM, 30), 10)
    assert rep.r == 4 and not rep.partial and rep.k_cutoff == 20
    assert rep.exact_union == Fraction(3870445321477, 68630377364883)
    assert rep.exact_union <= rep.total_bound


def test_claim_deterministic_laws():
    m = 7
    value = (3 ** (m + 1) - 1) // 2
    rep = claim_bound(TernaryCoeffDist(0, 0, 1, m), 2)
    assert rep.exact_event == int(any(value % (k * k) == 0 for k in range(2, 5)))
    # all-zero coefficients: P(3) = 0 is divisible by everything
    assert claim_bound(TernaryCoeffDist(0, 1, 0, m), 2).exact_event == 1


def test_claim_partial_on_budget():
    rep = claim_bound(TernaryCoeffDist(*UNIFORM, 30), 200, dp_budget=100_000)
    assert rep.partial and rep.k_cutoff < 400


@pytest.mark.parametrize("probs", DISTS)
def test_union_matches_enumeration(probs):
    for m in range(8):
        dist = TernaryCoeffDist(*probs, m)
        for B in range(2, 6):
            moduli = [k * k for k in range(B, 2 * B + 1)]
            assert union_by_inclusion_exclusion(dist, moduli) == \
                enumerate_square_divisor_prob(dist, B, 2 * B)


def test_monte_carlo_deterministic_law():
    m = 5
    value = (3 ** (m + 1) - 1) // 2
    res = monte_carlo_square_divisor(TernaryCoeffDist(0, 0, 1, m), 2, 6, 1000, seed=1)
    assert res.estimate == int(any(value % (k * k) == 0 for k in range(2, 7)))
    assert res.std_error == 0


def test_monte_carlo_only_zero_qualifies():
    dist = TernaryCoeffDist(Fraction(1, 4), Fraction(1, 2), Fraction(1, 4), 4)
    B = math.isqrt(max_abs_value(4)) + 1
    res = monte_carlo_square_divisor(dist, B, B, 200_000, seed=5)
    p0 = float(prob_value_zero(dist))
    assert abs(res.estimate - p0) <= 4 * math.sqrt(p0 * (1 - p0) / res.samples)


def test_monte_carlo_thread_independent_and_big_values():
    dist = TernaryCoeffDist(0.3, 0.4, 0.3, 6)
    a = monte_carlo_square_divisor(dist, 2, 5, 150_000, seed=2, threads=1)
    b = monte_carlo_square_divisor(dist, 2, 5, 150_000, seed=2, threads=3)
    assert a == b and a.trace[-1] == (150_000, a.hits)
    big = monte_carlo_square_divisor(TernaryCoeffDist(0.3, 0.4, 0.3, 60), 2, 4, 2000, seed=0)
    assert 0 < big.estimate < 1
