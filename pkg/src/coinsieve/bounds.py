"""Numerical harnesses for the large-modulus estimate: the two elementary
inequalities behind it, the product-integral identity, and an end-to-end
evaluation of every quantity in the Hoelder chain."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from coinsieve.errors import DomainError
from coinsieve.expsum import _float_log_polar, remainder_term
from coinsieve.measure import BiasedBitMeasure, Prob, make_rng
from coinsieve.primes import odd_squarefree_upto

U53 = 2.0**-53
# Absolute slack for comparing two quantities in [0, 1] computed in float64.
COMPARE_SLACK = 4 * U53


def power_bound_threshold(delta: float, rho: float) -> float:
    """log(1/delta) / (rho (1 - rho)); the exponent must exceed this."""
    return math.log(1 / delta) / (rho * (1 - rho))


def power_bound_sides(theta, delta, rho, ell):
    """(|rho + (1-rho) e(theta)|^(2 ell), 1 - (1 - delta) sin^2(pi theta)).

    Vectorised; the left side goes through log1p of the magnitude identity.
    """
    s2 = np.sin(np.pi * np.asarray(theta, dtype=float)) ** 2
    rho = np.asarray(rho, dtype=float)
    with np.errstate(divide="ignore"):
        lhs = np.exp(ell * np.log1p(-4 * rho * (1 - rho) * s2))
    rhs = 1 - (1 - np.asarray(delta, dtype=float)) * s2
    return lhs, rhs


def _power_bound_regime(delta, rho, ell):
    if not 0 < delta < 1:
        raise DomainError(f"delta must lie in (0, 1), got {delta}")
    if not 0.5 <= rho < 1:
        raise DomainError(f"rho must lie in [1/2, 1), got {rho}")
    if not ell > power_bound_threshold(delta, rho):
        raise DomainError(f"ell = {ell} not above log(1/delta)/(rho(1-rho)) = "
                          f"{power_bound_threshold(delta, rho):.6g}")


def power_bound_check(theta: float, delta: float, rho: Prob, ell: float) -> bool:
    rho = float(rho)
    _power_bound_regime(delta, rho, ell)
    lhs, rhs = power_bound_sides(theta, delta, rho, ell)
    return bool(lhs <= rhs + COMPARE_SLACK)


def shift_bound_margin(theta, gamma, delta):
    """RHS - LHS of 1-(1-d)sin^2 t <= 1+g-(1-d)sin^2(t+g), vectorised.

    Written as d g + (1-d)[(g - sin g) + sin g (1 - sin(2t + g))]; every
    bracketed term is nonnegative, so the margin over d g carries no
    cancellation.
    """
    theta = np.asarray(theta, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    delta = np.asarray(delta, dtype=float)
    sg = np.sin(gamma)
    excess = (gamma - sg) + sg * (1 - np.sin(2 * theta + gamma))
    return delta * gamma + (1 - delta) * excess


def shift_bound_sides(theta, gamma, delta):
    theta = np.asarray(theta, dtype=float)
    lhs = 1 - (1 - delta) * np.sin(theta) ** 2
    rhs = 1 + gamma - (1 - delta) * np.sin(theta + gamma) ** 2
    return lhs, rhs


def _shift_bound_regime(gamma, delta):
    if not 0 < gamma < 0.1:
        raise DomainError(f"gamma must lie in (0, 1/10), got {gamma}")
    if not 0 < delta < 1:
        raise DomainError(f"delta must lie in (0, 1), got {delta}")


def shift_bound_check(theta_rad: float, gamma: float, delta: float) -> bool:
    """Direct comparison of both sides; theta in radians."""
    _shift_bound_regime(gamma, delta)
    lhs, rhs = shift_bound_sides(theta_rad, gamma, delta)
    return bool(lhs <= rhs + COMPARE_SLACK)


@dataclass(frozen=True)
class PropertySweep:
    name: str
    samples: int
    violations: int
    worst: float  # smallest (rhs - lhs) seen, or smallest margin ratio
    counterexamples: tuple = ()


def power_bound_sweep(samples: int = 100_000, seed: int = 0, out_of_regime: bool = False) -> PropertySweep:
    """Random tuples (theta, delta, rho, ell).

    In regime, ell is drawn above the threshold and no violation may occur.
    With ``out_of_regime`` ell is drawn below it; violations are then
    reported as counterexamples (the inequality claims nothing there).
    """
    rng = make_rng(seed, 3)
    theta = rng.random(samples)
    delta = rng.uniform(1e-6, 1, samples)
    rho = rng.uniform(0.5, 1, samples)
    thr = np.log(1 / delta) / (rho * (1 - rho))
    if out_of_regime:
        ell = thr * rng.uniform(0.01, 1, samples)
    else:
        ell = thr * (1 + rng.uniform(1e-9, 2, samples))
    lhs, rhs = power_bound_sides(theta, delta, rho, ell)
    bad = lhs > rhs + COMPARE_SLACK
    ex = tuple(zip(theta[bad][:10], delta[bad][:10], rho[bad][:10], ell[bad][:10]))
    return PropertySweep("power-bound", samples, int(bad.sum()), float((rhs - lhs).min()), ex)


def shift_bound_sweep(samples: int = 100_000, seed: int = 0, out_of_regime: bool = False) -> PropertySweep:
    """Random tuples (theta, gamma, delta); checks both sides and the sharp
    margin RHS - LHS >= delta gamma (1 - 1e-12)."""
    rng = make_rng(seed, 4)
    theta = rng.uniform(-2 * np.pi, 2 * np.pi, samples)
    if out_of_regime:
        gamma = rng.uniform(0.1, 3, samples)
    else:
        gamma = rng.uniform(0, 0.1, samples)
        gamma[gamma == 0] = 0.05
    delta = rng.uniform(0, 1, samples)
    delta[delta == 0] = 0.5
    lhs, rhs = shift_bound_sides(theta, gamma, delta)
    margin = shift_bound_margin(theta, gamma, delta)
    bad = (lhs > rhs + COMPARE_SLACK) | (margin < delta * gamma * (1 - 1e-12))
    ex = tuple(zip(theta[bad][:10], gamma[bad][:10], delta[bad][:10]))
    return PropertySweep("shift-bound", samples, int(bad.sum()),
                         float((margin / (delta * gamma)).min()), ex)


def product_integral_identity(h: int, delta: float, quadrature_points: int | None = None):
    """(quadrature, closed form) for
    int_0^1 prod_{j<h} (1 + delta - (1 - delta) sin^2(pi 2^j x)) dx = ((1 + 3 delta)/2)^h.

    The integrand is a trigonometric polynomial of degree below 2^h, so the
    N-point rectangle rule on [0, 1) is exact for N >= 2^h; 2^(h+4) points
    are required anyway as a margin.
    """
    if not 1 <= h <= 20:
        raise DomainError(f"h must lie in [1, 20], got {h}")
    n = quadrature_points if quadrature_points is not None else 1 << (h + 4)
    if n & (n - 1) or n < (1 << (h + 4)):
        raise DomainError(f"quadrature_points must be a power of 2 >= 2^(h+4), got {n}")
    i = np.arange(n, dtype=np.int64)
    prod = np.ones(n)
    for j in range(h):
        # 2^j x mod 1 computed on integers, so the sine argument is exact
        frac = ((i << j) % n) / n
        prod *= 1 + delta - (1 - delta) * np.sin(np.pi * frac) ** 2
    return math.fsum(prod) / n, ((1 + 3 * delta) / 2) ** h


@dataclass(frozen=True)
class BoundParams:
    delta: float
    gamma: float  # largest shift pi 2^(h-1) beta fed to the shift inequality
    ell: float  # exponent fed to the power inequality, t/4
    t_holder: int
    h: int
    beta: float

    @classmethod
    def for_chain(cls, rho: Prob, delta: float, Q: int, t_holder: int | None = None):
        """Smallest even t above 4 log(1/delta)/(rho(1-rho)), 2^h = Q^2 rounded,
        beta = delta Q^-2 / 4."""
        rho = float(rho)
        if t_holder is None:
            thr = 4 * math.log(1 / delta) / (rho * (1 - rho))
            t_holder = 2 * (math.floor(thr / 2) + 1)
        h = max(1, round(2 * math.log2(Q)))
        beta = delta / 4 / Q**2
        gamma = math.pi * 2 ** (h - 1) * beta
        return cls(delta, gamma, t_holder / 4, t_holder, h, beta)

    def t_threshold(self, rho: float) -> float:
        return 4 * math.log(1 / self.delta) / (rho * (1 - rho))

    def violations(self, rho: Prob, Q: int) -> list[str]:
        rho = float(rho)
        out = []
        if not 0 < self.delta < 1:
            out.append("delta outside (0, 1)")
        if self.t_holder % 2 or self.t_holder < 2:
            out.append("t must be an even integer >= 2")
        if not self.t_holder > self.t_threshold(rho):
            out.append(f"t = {self.t_holder} not above 4 log(1/delta)/(rho(1-rho)) = "
                       f"{self.t_threshold(rho):.6g}")
        if not self.ell > power_bound_threshold(self.delta, rho):
            out.append("ell not above log(1/delta)/(rho(1-rho))")
        if not self.gamma < 0.1:
            out.append(f"gamma = {self.gamma:.4g} not below 1/10")
        if not 0.5 * Q * Q <= 2**self.h <= 2 * Q * Q:
            out.append("2^h not within a factor 2 of Q^2")
        return out


@dataclass(frozen=True)
class ChainReport:
    rho: float
    Q: int
    m: int
    params: BoundParams
    moduli: tuple
    true_sum: float  # sum' |R_q|, Q <= q < 2Q
    triangle: float  # (1/Q) sum' sum_lambda prod_{j<m} |f|
    holder_blocks: float  # sum' [prod_tau (1/Q) sum_lambda prod_{block tau} |f|^(t/2)]^(2/t)
    holder: float  # sum' (1/Q) sum_lambda prod_{j<h} |f|^(t/2)
    sine_product_bound: float  # (1/Q) sum' sum_lambda prod_{j<h} (1 - (1-delta) sin^2)
    integral_bound: float  # (4/delta) Q ((1+3 delta)/2)^h
    target: float  # Q^(-1/2)
    regime_violations: tuple

    @property
    def chain(self) -> list[tuple[str, float]]:
        return [("true_sum", self.true_sum), ("triangle", self.triangle),
                ("holder_blocks", self.holder_blocks), ("holder", self.holder),
                ("sine_product_bound", self.sine_product_bound), ("integral_bound", self.integral_bound)]

    @property
    def ordered(self) -> list[bool]:
        """Each consecutive pair of the chain is ordered (relative slack 1e-12)."""
        vals = [v for _, v in self.chain]
        return [a <= b * (1 + 1e-12) for a, b in zip(vals, vals[1:])]

    @property
    def final_ok(self) -> bool:
        return self.integral_bound < self.target


def holder_chain_diagnostic(rho: Prob, Q: int, params: BoundParams) -> ChainReport:
    """Evaluate every display of the chain for q ~ Q with m = t h / 2.

    The averaging step over beta' is not re-derived; the integral bound is
    evaluated directly. A t below its threshold is rejected; other regime
    conditions are only reported.
    """
    rho_f = float(rho)
    if params.t_holder % 2 or not params.t_holder > params.t_threshold(rho_f):
        raise DomainError(f"t = {params.t_holder} is out of regime (needs an even integer "
                          f"above {params.t_threshold(rho_f):.6g})")
    if Q < 3:
        raise DomainError("Q must be >= 3")
    t, h, delta = params.t_holder, params.h, params.delta
    m = t * h // 2
    meas = BiasedBitMeasure(m, rho)
    moduli = tuple(int(q) for q in odd_squarefree_upto(2 * Q - 1) if q >= Q)
    true_sum = triangle = holder_blocks = holder = sine_prod = 0.0
    half_t = t // 2
    for q in moduli:
        est = remainder_term(q, meas, 53)
        true_sum += float(est.abs_value)
        triangle += float(est.triangle_sum) * q / Q
        logs_h, _, _, _ = _float_log_polar(q, rho_f, h)
        holder += math.fsum(np.exp(half_t * logs_h)) / Q
        # each tau block of length h, evaluated separately
        lam = np.arange(1, q, dtype=np.int64)
        log_blocks = 0.0
        for tau in range(half_t):
            shifted = (lam * pow(2, tau * h, q)) % q
            block = _block_log_magnitudes(q, rho_f, h, shifted)
            log_blocks += math.log(math.fsum(np.exp(half_t * block)) / Q)
        holder_blocks += math.exp(log_blocks * 2 / t)
        idx = (lam[None, :] * np.array([pow(2, j, q) for j in range(h)])[:, None]) % q
        s2 = np.sin(np.pi * idx / q) ** 2
        sine_prod += math.fsum(np.prod(1 - (1 - delta) * s2, axis=0)) / Q
    integral = 4 / delta * Q * ((1 + 3 * delta) / 2) ** h
    return ChainReport(rho_f, Q, m, params, moduli, true_sum, triangle, holder_blocks, holder,
                       sine_prod, integral, Q**-0.5, tuple(params.violations(rho_f, Q)))


def _block_log_magnitudes(q, rho, h, start):
    """sum_{j<h} log|f(start 2^j / q)| for each entry of ``start``."""
    idx = (start[None, :] * np.array([pow(2, j, q) for j in range(h)])[:, None]) % q
    sq = 1 - 4 * rho * (1 - rho) * np.sin(np.pi * idx / q) ** 2
    return 0.5 * np.log(sq).sum(axis=0)
