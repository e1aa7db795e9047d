"""Square divisors of P(3) for random polynomials with coefficients in {-1, 0, 1}.

Balanced-ternary codes, the entropy threshold for the coefficient bias, the
Hoelder rate bound on the probability that some k^2 with k in [B, 2B] divides
P(3), and exact / Monte Carlo evaluation of that probability.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from coinsieve.errors import DomainError
from coinsieve.measure import SHARD_SIZE, TernaryCoeffDist, make_rng
from coinsieve.residue_dp import (
    ENUMERATION_LIMIT_DIGITS,
    divisibility_prob,
    enumerate_square_divisor_prob,
    max_abs_value,
    prob_value_zero,
)

LOG3 = math.log(3)


@dataclass(frozen=True)
class BalancedTernary:
    digits: tuple  # little-endian, each in {-1, 0, 1}

    def __int__(self):
        return from_balanced_ternary(self)

    def __len__(self):
        return len(self.digits)


def to_balanced_ternary(n: int, r: int) -> BalancedTernary:
    """Unique r-digit signed code of n; needs |n| < 3^r / 2."""
    if r < 0 or 2 * abs(n) >= 3**r:
        raise DomainError(f"{n} is not representable with {r} balanced-ternary digits")
    digits = []
    for _ in range(r):
        d = (n + 1) % 3 - 1
        digits.append(d)
        n = (n - d) // 3
    return BalancedTernary(tuple(digits))


def from_balanced_ternary(code) -> int:
    digits = code.digits if isinstance(code, BalancedTernary) else tuple(code)
    value = 0
    for d in reversed(digits):
        value = 3 * value + d
    return value


def entropy_map(t: float) -> float:
    """t^t (1 - t)^(1 - t), continuous at t = 1."""
    if t >= 1:
        return 1.0
    return math.exp(t * math.log(t) + (1 - t) * math.log1p(-t))


def solve_entropy_threshold(c: float) -> float:
    """The t in [1/2, 1) with t^t (1 - t)^(1 - t) = c.

    The map is increasing on [1/2, 1) from 1/2 towards 1. Solved on the log
    scale with Brent's method, then one Newton polish.
    """
    if not 0.5 <= c < 1:
        raise DomainError(f"c must lie in [1/2, 1), got {c}")
    if c == 0.5:
        return 0.5
    target = math.log(c)

    def g(t):
        return t * math.log(t) + (1 - t) * math.log1p(-t) - target

    t = brentq(g, 0.5, math.nextafter(1.0, 0.0), xtol=1e-16, maxiter=500)
    slope = math.log(t) - math.log1p(-t)
    if slope > 0:
        t -= g(t) / slope
    return t


@dataclass(frozen=True)
class RateBound:
    dist: TernaryCoeffDist
    r: int
    p: float
    q: float  # Hoelder conjugate of p
    per_digit_rate: float  # sqrt3^(1/p) (rho_0^q + rho_1^q + rho_-1^q)^(1/q)
    two_term_rate: float  # sqrt3^(1/p) (rho^q + (1 - rho)^q)^(1/q)
    total_bound: float  # per_digit_rate^r
    two_term_total: float

    @property
    def exponent_c(self) -> float:
        """-log2(per-digit rate), the c in 2^(-c r)."""
        return -math.log2(self.per_digit_rate)


def _log_norm(probs, q):
    """log (sum x^q)^(1/q), computed in log space so large q cannot underflow."""
    logs = [math.log(x) for x in probs if x > 0]
    top = max(logs)
    return top + math.log(sum(math.exp(q * (v - top)) for v in logs)) / q


def _log_rates(probs, s):
    """(three-term, two-term) log per-digit rates at s = 1/p."""
    q = 1 / (1 - s)
    rho = max(probs)
    base = s * LOG3 / 2
    return base + _log_norm(probs, q), base + _log_norm((rho, 1 - rho), q)


def rate_bound(dist: TernaryCoeffDist, r: int, p: float) -> RateBound:
    if not p > 1:
        raise DomainError(f"Hoelder exponent p must exceed 1, got {p}")
    if r < 0:
        raise DomainError("r must be nonnegative")
    probs = tuple(float(x) for x in dist.probs)
    s = 1 / p
    three, two = _log_rates(probs, s)
    return RateBound(dist, r, p, p / (p - 1), math.exp(three), math.exp(two),
                     math.exp(r * three), math.exp(r * two))


def optimize_rate(dist: TernaryCoeffDist, r: int, two_term: bool = False) -> RateBound:
    """Minimise the per-digit rate over p.

    The log rate is convex in s = 1/p (log of an l^q norm is convex in 1/q),
    so a bounded scalar search on s in (0, 1) finds the minimum.
    """
    probs = tuple(float(x) for x in dist.probs)
    pick = 1 if two_term else 0
    eps = 1e-12
    res = minimize_scalar(lambda s: _log_rates(probs, s)[pick], bounds=(eps, 1 - eps),
                          method="bounded", options={"xatol": 1e-10})
    return rate_bound(dist, r, 1 / float(res.x))


def bracket_r(B: int) -> int:
    """r with 3^r <= B^2 < 3^(r+1)."""
    if B < 2:
        raise DomainError("B must be >= 2")
    r, power = 0, 3
    while power <= B * B:
        r += 1
        power *= 3
    return r


def _deterministic_value(dist: TernaryCoeffDist) -> int | None:
    for digit, p in zip((-1, 0, 1), dist.probs):
        if p == 1:
            return digit * (3 ** (dist.m + 1) - 1) // 2
    return None


@dataclass(frozen=True)
class ClaimReport:
    B: int
    r: int
    per_digit_rate: float
    total_bound: float
    two_term_rate: float
    two_term_total: float
    hoelder_p: float
    exponent_c: float
    set_size_bound: float  # (B+1)^(1/p) (sum rho_j^q)^(r/q): |A| <= B+1 in place of sqrt3^r
    exact_union: Fraction  # sum_k P(k^2 | P(3)) over the k reached
    k_cutoff: int  # largest k included in exact_union
    partial: bool
    exact_event: Fraction | None  # P(some k^2 | P(3)) when enumerable


def claim_bound(dist: TernaryCoeffDist, B: int, dp_budget: int = 50_000_000) -> ClaimReport:
    """Analytic rate bound next to the exact union bound for k in [B, 2B].

    Each k costs an O(m k^2) exact table; k stops once the running cost
    passes ``dp_budget`` (the report is then partial).
    """
    r = bracket_r(B)
    best = optimize_rate(dist, r)
    two = optimize_rate(dist, r, two_term=True)
    probs = [float(x) for x in dist.probs]
    q = best.q
    set_size = math.exp(math.log(B + 1) / best.p + r * _log_norm(probs, q))
    union, cost, k_cut, partial = Fraction(0), 0, B - 1, False
    cap = max_abs_value(dist.m)
    for k in range(B, 2 * B + 1):
        cost += (dist.m + 1) * min(k * k, 2 * cap + 1)
        if cost > dp_budget:
            partial = True
            break
        union += divisibility_prob(dist, k * k)
        k_cut = k
    event = None
    fixed = _deterministic_value(dist)
    if fixed is not None:
        event = Fraction(int(any(fixed % (k * k) == 0 for k in range(B, 2 * B + 1))))
    elif dist.m + 1 <= ENUMERATION_LIMIT_DIGITS:
        event = enumerate_square_divisor_prob(dist, B, 2 * B)
    return ClaimReport(B, r, best.per_digit_rate, best.total_bound, two.two_term_rate,
                       two.two_term_total, best.p, best.exponent_c, set_size, union, k_cut,
                       partial, event)


@dataclass(frozen=True)
class MonteCarloResult:
    estimate: float
    std_error: float
    samples: int
    hits: int
    trace: tuple  # (samples so far, hits so far) after each shard


def _value_column(xi: np.ndarray):
    n = xi.shape[1]
    if 3**n < 2**62:
        return xi.astype(np.int64) @ (3 ** np.arange(n, dtype=np.int64))
    powers = [3**j for j in range(n)]
    return [sum(int(c) * pw for c, pw in zip(row, powers)) for row in xi]


def _mc_shard(args):
    dist, B, k_max, seed, shard, size = args
    xi = dist.sample(make_rng(seed, shard), size)
    vals = _value_column(xi)
    squares = [k * k for k in range(B, k_max + 1)]
    if isinstance(vals, np.ndarray):
        hit = np.zeros(size, dtype=bool)
        for sq in squares:
            hit |= vals % sq == 0
        return int(hit.sum())
    return sum(1 for v in vals if any(v % sq == 0 for sq in squares))


def monte_carlo_square_divisor(dist: TernaryCoeffDist, B: int, k_max: int, samples: int,
                               seed: int = 0, threads: int = 1) -> MonteCarloResult:
    """Frequency of {k^2 | P(3) for some B <= k <= k_max} over sampled vectors.

    Shard s draws ``SHARD_SIZE`` vectors from sub-stream (seed, s); the result
    does not depend on ``threads``.
    """
    if samples < 1:
        raise DomainError("samples must be >= 1")
    if not 1 <= B <= k_max:
        raise DomainError(f"need 1 <= B <= k_max, got B={B}, k_max={k_max}")
    jobs = [(dist, B, k_max, seed, s, min(SHARD_SIZE, samples - start))
            for s, start in enumerate(range(0, samples, SHARD_SIZE))]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            hits_per = list(pool.map(_mc_shard, jobs))
    else:
        hits_per = [_mc_shard(j) for j in jobs]
    trace, n, h = [], 0, 0
    for job, hits in zip(jobs, hits_per):
        n += job[-1]
        h += hits
        trace.append((n, h))
    p = h / n
    return MonteCarloResult(p, math.sqrt(p * (1 - p) / n), n, h, tuple(trace))


def zero_value_prob(dist: TernaryCoeffDist) -> Fraction:
    """P(P(3) = 0)."""
    return prob_value_zero(dist)
