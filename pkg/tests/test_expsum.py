import cmath
import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from coinsieve import BiasedBitMeasure, DomainError
from coinsieve.expsum import (
    exact_remainder,
    max_orbit_log_magnitude,
    multiplicative_order,
    orbit_factorization,
    remainder_term,
    small_q_decay_check,
    unit_factor,
    unit_factor_sq_magnitude,
    window_length,
    window_max_sin2,
    window_min_over_lambda,
)
from coinsieve.residue_dp import residue_mass


def direct_remainder(q, m, rho):
    """Term-by-term complex product, no orbit compression."""
    total = 0j
    for lam in range(1, q):
        prod = 1 + 0j
        for j in range(m):
            prod *= rho + (1 - rho) * cmath.exp(2j * math.pi * (lam * 2**j % q) / q)
        total += prod
    return total / q


def test_worked_value():
    meas = BiasedBitMeasure(2, Fraction(1, 2))
    assert exact_remainder(3, meas) == Fraction(1, 6)
    est = remainder_term(3, meas)
    with mpmath.workprec(200):
        assert abs(est.value - mpmath.mpf(1) / 6) <= est.error_bound


def test_frozen_exact_values():
    assert exact_remainder(15, BiasedBitMeasure(10, Fraction(3, 5))) == Fraction(-39338, 29296875)
    assert exact_remainder(21, BiasedBitMeasure(12, Fraction(9, 10))) == \
        Fraction(1271279315381, 5250000000000)


@pytest.mark.parametrize("bits", [53, 128, 200])
@pytest.mark.parametrize("q,m,rho", [(3, 5, Fraction(3, 4)), (15, 12, Fraction(3, 5)),
                                     (35, 20, Fraction(9, 10)), (77, 16, Fraction(1, 2))])
def test_float_within_error_bound(bits, q, m, rho):
    meas = BiasedBitMeasure(m, rho)
    exact = residue_mass(meas, q).remainder()
    est = remainder_term(q, meas, bits)
    with mpmath.workprec(bits + 64):
        diff = abs(est.value - mpmath.mpf(exact.numerator) / exact.denominator)
    assert diff <= est.error_bound
    assert est.error_bound < 2.0 ** (-bits + 20)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 30).map(lambda k: 2 * k + 1), st.integers(0, 30), st.floats(0.5, 0.99))
def test_agrees_with_direct_product(q, m, rho):
    est = remainder_term(q, BiasedBitMeasure(m, rho), 53)
    assert float(est.value) == pytest.approx(direct_remainder(q, m, rho).real, abs=1e-12)


def test_exact_flag_and_domain():
    meas = BiasedBitMeasure(6, Fraction(3, 4))
    est = remainder_term(9, meas, exact=True)
    assert est.exact == residue_mass(meas, 9).remainder() and est.error_bound == 0
    with pytest.raises(DomainError):
        remainder_term(10, meas)
    with pytest.raises(DomainError):
        remainder_term(9, meas, precision_bits=32)
    assert remainder_term(1, meas).value == 0


def test_orbits():
    assert multiplicative_order(7) == 3
    assert multiplicative_order(99) == 30
    assert multiplicative_order(1) == 1
    fac = orbit_factorization(21)
    assert fac.d == 6 and sum(fac.cycle_lengths) == 20
    assert fac.representatives == (1, 3, 5, 7, 9)


@given(st.floats(-10, 10), st.floats(0.5, 1.0))
def test_magnitude_identity(theta, rho):
    assert abs(abs(unit_factor(theta, rho)) ** 2 - unit_factor_sq_magnitude(theta, rho)) <= 1e-14


def test_window_bound_examples():
    assert window_length(3) == 2 and window_length(4096) == 12 and window_length(4097) == 13
    assert window_max_sin2(3, 1, 1) == pytest.approx(0.75)
    assert window_max_sin2(7, 1, 3) >= 0.5
    for q in (3, 5, 255, 257, 1023):
        brute = min(window_max_sin2(q, lam, window_length(q)) for lam in range(1, q))
        assert window_min_over_lambda(q) == pytest.approx(brute, abs=1e-15)
        assert brute >= 0.5


def test_orbit_maximum_submultiplicative():
    for q in (3, 7, 21, 45):
        for rho in (0.75, 0.9):
            a, ea = max_orbit_log_magnitude(q, BiasedBitMeasure(8, rho))
            b, eb = max_orbit_log_magnitude(q, BiasedBitMeasure(16, rho))
            assert b <= 2 * a + eb + 2 * ea


def test_small_q_decay():
    table = small_q_decay_check(3, 0.75, [8, 16, 24, 32])
    vals = [r.abs_rq for r in table.rows]
    assert all(x > y for x, y in zip(vals, vals[1:]))
    # |R_3| decays like |f(1/3) f(2/3)|^(m/2)
    expected = -0.5 * math.log(unit_factor_sq_magnitude(1 / 3, 0.75))
    assert table.decay_rate == pytest.approx(expected, rel=1e-6)
    assert np.isfinite(table.decay_rate)
