"""Sieve-side experiments: remainder sweeps over odd squarefree moduli, the
empirical sieving exponent, almost-prime mass and a small Legendre sieve."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations

import mpmath
import numpy as np
from sympy import primeomega

from coinsieve.errors import DomainError
from coinsieve.expsum import exact_remainder, multiplicative_order, pinned_precision, remainder_term
from coinsieve.measure import BiasedBitMeasure, Prob, is_exact
from coinsieve.primes import CHUNK, factor_stats, odd_primes_below, odd_squarefree_upto, spf_sieve
from coinsieve.residue_dp import residue_mass

EXACT_ENUMERATION_MAX_M = 26
DEFAULT_Q_BUDGET = 1 << 13
UNIFORM_Q_BUDGET = 1 << 24


@dataclass(frozen=True)
class SweepRecord:
    q: int
    ord2: int
    squarefree: bool
    abs_rq: mpmath.mpf
    error_bound: mpmath.mpf
    cumulative: mpmath.mpf
    rq_exact: Fraction | None = None


@dataclass(frozen=True)
class SweepReport:
    rho: Prob
    m: int
    q_range: tuple  # inclusive (q_min, q_max)
    precision_bits: int
    records: tuple = field(repr=False)
    cumulative_sum: mpmath.mpf = mpmath.mpf(0)
    partial: bool = False
    q_cutoff: int | None = None  # last q processed when partial


def _sweep_one(args):
    q, meas, bits, exact = args
    est = remainder_term(q, meas, bits)
    rq_exact = exact_remainder(q, meas) if exact else None
    return q, est, rq_exact


def sweep_remainders(meas: BiasedBitMeasure, q_max: int, precision_bits: int = 128,
                     threads: int = 1, q_min: int = 3, work_budget: int | None = None,
                     exact: bool | None = None) -> SweepReport:
    """|R_q| for every odd squarefree q in [q_min, q_max] and the running sum.

    ``exact`` defaults to whether rho is rational and adds the exact R_q to
    each record. ``work_budget`` caps sum_q q * min(m, ord_q 2); past it the
    report is returned with ``partial=True`` (it is not raised).
    Records are merged in ascending q, so ``threads`` never changes output.
    """
    if q_max < 3:
        raise DomainError(f"q_max must be >= 3, got {q_max}")
    if exact is None:
        exact = meas.exact
    qs = [int(q) for q in odd_squarefree_upto(q_max) if q >= q_min]
    partial, cutoff = False, None
    if work_budget is not None:
        spent, keep = 0, []
        for q in qs:
            spent += q * min(meas.m, multiplicative_order(q))
            if spent > work_budget:
                partial = True
                break
            keep.append(q)
        qs = keep
        cutoff = qs[-1] if (partial and qs) else None
    jobs = [(q, meas, precision_bits, exact) for q in qs]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_sweep_one, jobs))
    else:
        results = [_sweep_one(j) for j in jobs]
    records = []
    with pinned_precision(max(precision_bits, 53) + 16):
        total = mpmath.mpf(0)
        for q, est, rq_exact in results:
            total = total + est.abs_value
            records.append(SweepRecord(q, multiplicative_order(q), True, est.abs_value,
                                       est.error_bound, +total, rq_exact))
    return SweepReport(meas.rho, meas.m, (q_min, q_max), precision_bits, tuple(records),
                       total, partial, cutoff)


def uniform_remainders(m: int, qs: np.ndarray) -> np.ndarray:
    """|R_q| for rho = 1/2 from the count of multiples of q below 2^m.

    Exact as a rational; returned as float64 (numerators fit for m <= 52).
    """
    if m > 52:
        raise DomainError("closed form limited to m <= 52")
    qs = np.asarray(qs, dtype=np.int64)
    count = (np.int64((1 << m) - 1) // qs) + 1
    # R_q = count/2^m - 1/q = (q count - 2^m) / (q 2^m)
    num = qs * count - np.int64(1 << m)
    return np.abs(num) / (qs.astype(np.float64) * float(1 << m))


@dataclass(frozen=True)
class ExponentRow:
    m: int
    alpha_hat: float
    q_star: int | None  # first q where the running sum exceeds epsilon
    q_cutoff: int  # largest q examined
    capped: bool  # True when q_cutoff < 2^m - 1 and no crossing was found


def _first_crossing(qs, values, epsilon):
    cum = np.cumsum(values)
    i = int(np.searchsorted(cum, epsilon, side="right"))
    return (int(qs[i]) if i < len(qs) else None), cum


def estimate_sieving_exponent(rho: Prob, m_list, epsilon: float = 0.1,
                              q_budget: int | None = None,
                              precision_bits: int = 53) -> list[ExponentRow]:
    """Largest alpha in (0, 1] with sum'_{q < 2^(alpha m)} |R_q| <= epsilon.

    The running sum over ascending q is monotone, so alpha_hat comes from a
    binary search for the first q* where it exceeds epsilon:
    alpha_hat = log2(q*)/m. Moduli stop at ``q_budget``; if no crossing
    occurs before that, the row is ``capped`` and alpha_hat is only the
    lower bound log2(q_budget + 1)/m. rho = 1/2 uses the counting closed form.
    """
    if not 0 < epsilon < 1:
        raise DomainError(f"epsilon must lie in (0, 1), got {epsilon}")
    m_list = list(m_list)
    if any(b <= a for a, b in zip(m_list, m_list[1:])):
        raise DomainError("m_list must be increasing")
    uniform = Fraction(rho) == Fraction(1, 2)
    if q_budget is None:
        q_budget = UNIFORM_Q_BUDGET if uniform else DEFAULT_Q_BUDGET
    rows = []
    for m in m_list:
        top = min((1 << m) - 1, q_budget)
        qs = odd_squarefree_upto(top)
        if uniform:
            q_star, _ = _first_crossing(qs, uniform_remainders(m, qs), epsilon)
        else:
            q_star, running = None, 0.0
            meas = BiasedBitMeasure(m, rho)
            for q in qs:
                running += float(remainder_term(int(q), meas, precision_bits).abs_value)
                if running > epsilon:
                    q_star = int(q)
                    break
        if q_star is not None:
            rows.append(ExponentRow(m, math.log2(q_star) / m, q_star, top, False))
        elif top >= (1 << m) - 1:
            rows.append(ExponentRow(m, 1.0, None, top, False))
        else:
            rows.append(ExponentRow(m, math.log2(top + 1) / m, None, top, True))
    return rows


@dataclass(frozen=True)
class PseudoprimeMass:
    m: int
    rho: Prob
    r: int
    value: Prob
    std_error: float
    method: str  # "exact-enumeration" or "sampling"
    samples: int = 0

    @property
    def scaled(self) -> float:
        """mass * log N."""
        return float(self.value) * self.m * math.log(2)


def almost_prime_popcounts(m: int, r: int) -> np.ndarray:
    """count[ell] = #{2 <= n < 2^m : Omega(n) <= r, popcount(n) = ell}."""
    n = 1 << m
    spf = spf_sieve(max(n - 1, 2))
    counts = np.zeros(m + 1, dtype=np.int64)
    for lo in range(0, n, CHUNK):
        hi = min(n, lo + CHUNK)
        omega, _ = factor_stats(spf, lo, hi)
        ks = np.arange(lo, hi, dtype=np.int64)
        keep = (omega <= r) & (ks >= 2)
        counts += np.bincount(np.bitwise_count(ks[keep]), minlength=m + 1)[: m + 1]
    return counts


def pseudoprime_mass(meas: BiasedBitMeasure, r: int, method: str = "auto",
                     samples: int = 100_000, seed: int = 0) -> PseudoprimeMass:
    """mu-mass of {2 <= n < 2^m : Omega(n) <= r} (0 and 1 excluded)."""
    if r < 1:
        raise DomainError(f"r must be >= 1, got {r}")
    if method == "auto":
        method = "exact" if meas.m <= EXACT_ENUMERATION_MAX_M else "sampling"
    if method == "exact":
        if meas.m > EXACT_ENUMERATION_MAX_M:
            raise DomainError(f"exact enumeration limited to m <= {EXACT_ENUMERATION_MAX_M}")
        counts = almost_prime_popcounts(meas.m, r)
        atoms = meas.popcount_masses()
        value = sum(int(c) * a for c, a in zip(counts, atoms))
        return PseudoprimeMass(meas.m, meas.rho, r, value, 0.0, "exact-enumeration")
    if method != "sampling":
        raise DomainError(f"unknown method {method!r}")
    draws = meas.sample(seed, samples)
    hits = sum(1 for n in draws if n >= 2 and primeomega(n) <= r)
    p = hits / samples
    return PseudoprimeMass(meas.m, meas.rho, r, p, math.sqrt(p * (1 - p) / samples),
                           "sampling", samples)


@dataclass(frozen=True)
class LegendreResult:
    z: int
    primes: tuple
    main_term: Fraction  # sum_d mu(d)/d
    remainder_sum: float  # sum_d mu(d) R_d
    estimate: float  # main_term + remainder_sum
    error_budget: float  # sum_d |R_d| + float error bounds
    exact: Prob  # mu{n : gcd(n, prod p) = 1} from the residue DP


def legendre_sieve_demo(meas: BiasedBitMeasure, z: int, precision_bits: int = 53,
                        max_modulus: int = 15015) -> LegendreResult:
    """Inclusion-exclusion over the odd primes p <= z.

    Measures the set of n with no odd prime factor up to z. The main term
    uses the densities 1/d; the remainders R_d feed the error budget.
    """
    if not 2 <= z <= 50:
        raise DomainError(f"z must lie in [2, 50], got {z}")
    primes = odd_primes_below(z + 1)
    P = math.prod(primes)
    if P > max_modulus:
        raise DomainError(f"product of odd primes up to {z} is {P} > {max_modulus}")
    main, rem_sum, budget, terms = Fraction(0), 0.0, 0.0, 0
    for k in range(len(primes) + 1):
        sign = -1 if k % 2 else 1
        for subset in combinations(primes, k):
            d = math.prod(subset)
            main += Fraction(sign, d)
            if d > 1:
                est = remainder_term(d, meas, precision_bits)
                rem_sum += sign * float(est.value)
                budget += float(est.abs_value) + float(est.error_bound)
                terms += 1
    # cover rounding in the float accumulation of the budget itself
    budget *= 1 + 4 * terms * 2.0**-53
    table = residue_mass(meas, P)
    exact = sum((table.masses[a] for a in range(P) if math.gcd(a, P) == 1), Fraction(0))
    if not is_exact(meas.rho):
        exact = float(exact)
    return LegendreResult(z, tuple(primes), main, rem_sum, float(main) + rem_sum, budget, exact)
