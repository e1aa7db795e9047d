"""Exact digit dynamic programs over residue classes.

Two automata: binary digits with a biased bit (measure of n mod q) and
balanced ternary coefficients (law of P(3) = sum xi_j 3^j mod M). Both run on
integer numerators over a common denominator and return Fractions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache, reduce
from itertools import combinations

import numpy as np

from coinsieve.errors import DomainError
from coinsieve.measure import BiasedBitMeasure, TernaryCoeffDist, exact_prob

# Full enumeration of coefficient vectors is allowed up to 3^15 outcomes.
ENUMERATION_LIMIT_DIGITS = 15


@dataclass(frozen=True)
class ResidueMassTable:
    q: int
    masses: tuple  # Fraction per residue a = 0..q-1

    def __post_init__(self):
        assert len(self.masses) == self.q
        assert sum(self.masses) == 1

    def __getitem__(self, a):
        return self.masses[a % self.q]

    def remainder(self) -> Fraction:
        """mu[q | n] - 1/q."""
        return self.masses[0] - Fraction(1, self.q)


@dataclass(frozen=True)
class TernaryResidueTable:
    M: int
    probs: tuple  # Fraction per residue r = 0..M-1
    dist: TernaryCoeffDist

    def __post_init__(self):
        assert len(self.probs) == self.M
        assert sum(self.probs) == 1


def _common_denominator(fracs):
    den = reduce(math.lcm, (f.denominator for f in fracs), 1)
    return [int(f * den) for f in fracs], den


def _object_zeros(n):
    v = np.empty(n, dtype=object)
    v[:] = 0
    return v


def residue_mass(meas: BiasedBitMeasure, q: int) -> ResidueMassTable:
    """Exact mu[n = a mod q] for every a, one digit at a time (O(m q))."""
    if q < 1:
        raise DomainError(f"modulus must be positive, got {q}")
    rho = exact_prob(meas.rho)
    a, b = rho.numerator, rho.denominator
    v = _object_zeros(q)
    v[0] = 1
    for j in range(meas.m):
        shift = pow(2, j, q)
        v = a * v + (b - a) * np.roll(v, shift)
    den = b**meas.m
    return ResidueMassTable(q, tuple(Fraction(int(x), den) for x in v))


@lru_cache(maxsize=256)
def ternary_residue_table(dist: TernaryCoeffDist, M: int) -> TernaryResidueTable:
    """Exact P(sum_{j<=m} xi_j 3^j = r mod M) for every r."""
    if M < 1:
        raise DomainError(f"modulus must be positive, got {M}")
    (n_minus, n_zero, n_plus), den = _common_denominator(dist.exact_probs())
    v = _object_zeros(M)
    v[0] = 1
    for j in range(dist.m + 1):
        s = pow(3, j, M)
        v = n_zero * v + n_plus * np.roll(v, s) + n_minus * np.roll(v, -s)
    total = den ** (dist.m + 1)
    return TernaryResidueTable(M, tuple(Fraction(int(x), total) for x in v), dist)


def max_abs_value(m: int) -> int:
    """Largest |P(3)| for m+1 coefficients in {-1, 0, 1}."""
    return (3 ** (m + 1) - 1) // 2


def divisibility_prob(dist: TernaryCoeffDist, L: int) -> Fraction:
    """P(L | P(3)), with P(3) = 0 divisible by everything.

    Moduli beyond the value range only catch P(3) = 0, so they are answered
    from one table whose modulus exceeds twice the range.
    """
    cap = max_abs_value(dist.m)
    if L > cap:
        return ternary_residue_table(dist, 2 * cap + 1).probs[0]
    return ternary_residue_table(dist, L).probs[0]


def prob_value_zero(dist: TernaryCoeffDist) -> Fraction:
    return ternary_residue_table(dist, 2 * max_abs_value(dist.m) + 1).probs[0]


def union_by_inclusion_exclusion(dist: TernaryCoeffDist, moduli) -> Fraction:
    """Exact P(some L in moduli divides P(3)) via lcm-moduli tables.

    Exponential in ``len(moduli)``; meant for a handful of small moduli.
    """
    moduli = sorted(set(moduli))
    if len(moduli) > 16:
        raise DomainError("inclusion-exclusion limited to 16 moduli")
    total = Fraction(0)
    for size in range(1, len(moduli) + 1):
        sign = 1 if size % 2 else -1
        for subset in combinations(moduli, size):
            total += sign * divisibility_prob(dist, math.lcm(*subset))
    return total


def enumerate_values(m: int):
    """All 3^(m+1) values of P(3) with per-vector counts of -1 and +1 digits."""
    if m + 1 > ENUMERATION_LIMIT_DIGITS:
        raise DomainError(f"enumeration limited to {ENUMERATION_LIMIT_DIGITS} coefficients")
    vals = np.zeros(1, dtype=np.int64)
    n_minus = np.zeros(1, dtype=np.int8)
    n_plus = np.zeros(1, dtype=np.int8)
    digits = np.array([-1, 0, 1], dtype=np.int64)
    for j in range(m + 1):
        vals = (vals[:, None] + digits[None, :] * 3**j).ravel()
        n_minus = (n_minus[:, None] + (digits == -1)[None, :]).ravel().astype(np.int8)
        n_plus = (n_plus[:, None] + (digits == 1)[None, :]).ravel().astype(np.int8)
    return vals, n_minus, n_plus


def enumerate_event_prob(dist: TernaryCoeffDist, mask: np.ndarray, n_minus, n_plus) -> Fraction:
    """Exact probability of a boolean event over the enumerated vectors."""
    p_minus, p_zero, p_plus = dist.exact_probs()
    n = dist.m + 1
    width = n + 1
    counts = np.bincount(
        (n_minus.astype(np.int64) * width + n_plus)[mask], minlength=width * width
    )
    total = Fraction(0)
    for idx in np.flatnonzero(counts):
        a, c = divmod(int(idx), width)
        total += int(counts[idx]) * p_minus**a * p_plus**c * p_zero ** (n - a - c)
    return total


def enumerate_square_divisor_prob(dist: TernaryCoeffDist, B: int, k_max: int) -> Fraction:
    """Brute force: P(k^2 | P(3) for some B <= k <= k_max) over all vectors."""
    vals, n_minus, n_plus = enumerate_values(dist.m)
    hit = np.zeros(vals.shape, dtype=bool)
    for k in range(B, k_max + 1):
        hit |= vals % (k * k) == 0
    return enumerate_event_prob(dist, hit, n_minus, n_plus)


@dataclass(frozen=True)
class SquareDivisorUnion:
    B: int
    k_max: int
    per_k: tuple  # (k, P(k^2 | P(3)))
    union_bound: Fraction
    exact: Fraction | None  # full enumeration, when small enough


def square_divisor_union(dist: TernaryCoeffDist, B: int, k_max: int) -> SquareDivisorUnion:
    """Union bound sum_k P(k^2 | P(3)) for B <= k <= k_max, plus the exact
    event probability by enumeration when m + 1 <= 15."""
    if not 2 <= B <= k_max:
        raise DomainError(f"need 2 <= B <= k_max, got B={B}, k_max={k_max}")
    per_k = tuple((k, divisibility_prob(dist, k * k)) for k in range(B, k_max + 1))
    bound = sum((p for _, p in per_k), Fraction(0))
    exact = None
    if dist.m + 1 <= ENUMERATION_LIMIT_DIGITS:
        exact = enumerate_square_divisor_prob(dist, B, k_max)
    return SquareDivisorUnion(B, k_max, per_k, bound, exact)
