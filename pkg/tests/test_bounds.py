import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from coinsieve import DomainError
from coinsieve.bounds import (
    BoundParams,
    holder_chain_diagnostic,
    power_bound_check,
    power_bound_sweep,
    product_integral_identity,
    shift_bound_check,
    shift_bound_margin,
    shift_bound_sides,
    shift_bound_sweep,
)


def test_power_bound_examples():
    # theta = 0 is equality
    assert power_bound_check(0.0, 0.1, 0.75, 20.0)
    assert power_bound_check(0.5, 0.1, 0.75, 20.0)
    with pytest.raises(DomainError):
        power_bound_check(0.3, 0.1, 0.75, 1.0)


@given(st.floats(0, 1), st.floats(0.01, 0.99), st.floats(0.5, 0.99), st.floats(1.001, 3))
def test_power_bound_property(theta, delta, rho, factor):
    ell = factor * math.log(1 / delta) / (rho * (1 - rho))
    assert power_bound_check(theta, delta, rho, ell)


@given(st.floats(-7, 7), st.floats(1e-6, 0.0999), st.floats(1e-6, 0.999))
def test_shift_bound_property(theta, gamma, delta):
    assert shift_bound_check(theta, gamma, delta)
    lhs, rhs = shift_bound_sides(theta, gamma, delta)
    margin = float(shift_bound_margin(theta, gamma, delta))
    assert margin >= delta * gamma * (1 - 1e-12)
    assert margin == pytest.approx(float(rhs - lhs), abs=1e-14)


def test_shift_bound_domain():
    with pytest.raises(DomainError):
        shift_bound_check(0.0, 0.2, 0.5)


def test_sweeps_clean_in_regime():
    s3 = power_bound_sweep(20_000, seed=1)
    s4 = shift_bound_sweep(20_000, seed=1)
    assert s3.violations == 0 and s4.violations == 0 and s4.worst >= 1 - 1e-12
    out = power_bound_sweep(20_000, seed=1, out_of_regime=True)
    assert out.violations > 0 and len(out.counterexamples) == 10


@pytest.mark.parametrize("h", [1, 3, 6, 10])
@pytest.mark.parametrize("delta", [0.01, 0.3])
def test_product_integral(h, delta):
    quad, closed = product_integral_identity(h, delta)
    assert abs(quad - closed) <= 1e-12
    with pytest.raises(DomainError):
        product_integral_identity(h, delta, quadrature_points=3)


def test_product_integral_monte_carlo_agrees():
    x = np.random.default_rng(0).random(200_000)
    vals = np.prod([1.1 - 0.9 * np.sin(np.pi * 2**j * x) ** 2 for j in range(4)], axis=0)
    assert vals.mean() == pytest.approx(product_integral_identity(4, 0.1)[1], abs=5e-3)


def test_bound_params():
    p = BoundParams.for_chain(0.75, 0.05, 32)
    assert p.t_holder == 64 and p.h == 10 and p.ell == 16
    assert p.gamma == pytest.approx(math.pi * 2**9 * 0.05 / 4 / 32**2)
    assert p.violations(0.75, 32) == []


def test_chain_ordering_and_rejection():
    rep = holder_chain_diagnostic(0.75, 32, BoundParams.for_chain(0.75, 0.05, 32))
    assert rep.m == 320 and all(rep.ordered)
    assert rep.integral_bound == pytest.approx(4 / 0.05 * 32 * 0.575**10)
    bad = BoundParams.for_chain(0.75, 0.05, 32, t_holder=10)
    with pytest.raises(DomainError):
        holder_chain_diagnostic(0.75, 32, bad)
