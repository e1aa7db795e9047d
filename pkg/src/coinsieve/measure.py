"""Biased-coin convolution measure on m-bit integers and the ternary
coefficient law used for random polynomials.

Probabilities are either ``fractions.Fraction`` (exact paths) or ``float``
(floating paths); nothing here converts one into the other silently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational
from typing import Union

import numpy as np

from coinsieve.errors import DomainError

Prob = Union[Fraction, float]

# Sampling is sharded in fixed-size blocks so the output stream does not
# depend on how many workers are used.
SHARD_SIZE = 1 << 16


def parse_prob(text: str) -> Prob:
    """Parse ``"3/4"`` to an exact Fraction and ``"0.75"`` to a float.

    A bare integer (``"1"``) is treated as rational.
    """
    s = text.strip()
    if "/" in s or s.lstrip("+-").isdigit():
        try:
            return Fraction(s)
        except (ValueError, ZeroDivisionError) as exc:
            raise DomainError(f"cannot parse probability {text!r}") from exc
    try:
        return float(s)
    except ValueError as exc:
        raise DomainError(f"cannot parse probability {text!r}") from exc


def is_exact(p) -> bool:
    return isinstance(p, Rational)


def exact_prob(value) -> Fraction:
    """Coerce to an exact rational in [0, 1] (floats convert bit-exactly)."""
    f = Fraction(value)
    if not 0 <= f <= 1:
        raise DomainError(f"probability {value} outside [0, 1]")
    return f


def make_rng(seed: int, *task: int) -> np.random.Generator:
    """PCG64 stream for ``(seed, task...)``; sub-streams are independent."""
    ss = np.random.SeedSequence(entropy=int(seed) & ((1 << 64) - 1), spawn_key=tuple(task))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True)
class BiasedBitMeasure:
    """mu(n) = rho^(m - popcount n) (1 - rho)^(popcount n) on 0 <= n < 2^m.

    ``rho`` is the probability of a 0 digit. ``rho = 1`` (point mass at 0)
    is accepted only because the sampler uses it as an edge case; anything
    that takes a logarithm of ``1 - rho`` rejects it.
    """

    m: int
    rho: Prob

    def __post_init__(self):
        if not isinstance(self.m, (int, np.integer)) or self.m < 0:
            raise DomainError(f"bit count m must be a nonnegative integer, got {self.m!r}")
        if not (0.5 <= self.rho <= 1):
            raise DomainError(f"rho must lie in [1/2, 1), got {self.rho}")

    @property
    def N(self) -> int:
        return 1 << self.m

    @property
    def exact(self) -> bool:
        return is_exact(self.rho)

    def require_nondegenerate(self):
        if self.rho >= 1:
            raise DomainError("rho = 1 is a degenerate measure; need rho < 1")

    def point_mass(self, n: int) -> Prob:
        if not 0 <= n < self.N:
            raise DomainError(f"n = {n} outside support [0, 2^{self.m})")
        ell = int(n).bit_count()
        rho = self.rho
        return rho ** (self.m - ell) * (1 - rho) ** ell

    def popcount_masses(self) -> list:
        """Mass of a single atom with popcount ell, for ell = 0..m."""
        rho = self.rho
        return [rho ** (self.m - ell) * (1 - rho) ** ell for ell in range(self.m + 1)]

    def sample(self, seed: int, count: int) -> list[int]:
        """Draw ``count`` integers; a deterministic function of ``seed``.

        Shard ``s`` of ``SHARD_SIZE`` draws uses sub-stream ``(seed, s)``.
        """
        if count < 0:
            raise DomainError("count must be nonnegative")
        p_one = 1.0 - float(self.rho)
        out: list[int] = []
        for shard, start in enumerate(range(0, count, SHARD_SIZE)):
            size = min(SHARD_SIZE, count - start)
            out.extend(_sample_block(self.m, p_one, make_rng(seed, shard), size))
        return out

    def digit_entropy_dimension(self) -> float:
        """Base-2 digit entropy H(rho)/log 2; equals 1 for the uniform measure."""
        self.require_nondegenerate()
        r = float(self.rho)
        return (r * math.log(1 / r) + (1 - r) * math.log(1 / (1 - r))) / math.log(2)

    def one_term_dimension(self) -> float:
        """(1 - rho) log(1/(1 - rho)), the one-term dimension expression.

        It omits the rho log(1/rho) part of the digit entropy and is not
        monotone in rho below 1 - 1/e.
        """
        self.require_nondegenerate()
        r = float(self.rho)
        return (1 - r) * math.log(1 / (1 - r))


def _sample_block(m: int, p_one: float, rng: np.random.Generator, size: int) -> list[int]:
    bits = rng.random((size, m)) < p_one
    if m <= 62:
        weights = np.left_shift(np.int64(1), np.arange(m, dtype=np.int64))
        return (bits.astype(np.int64) @ weights).tolist() if m else [0] * size
    # Past int64: pack the bit matrix row-wise into Python ints.
    packed = np.packbits(bits, axis=1, bitorder="little")
    return [int.from_bytes(row.tobytes(), "little") for row in packed]


@dataclass(frozen=True)
class TernaryCoeffDist:
    """Law of i.i.d. coefficients xi_0..xi_m in {-1, 0, 1}."""

    rho_minus: Prob
    rho_zero: Prob
    rho_plus: Prob
    m: int = 0

    def __post_init__(self):
        probs = (self.rho_minus, self.rho_zero, self.rho_plus)
        if any(p < 0 or p > 1 for p in probs):
            raise DomainError(f"coefficient probabilities must lie in [0, 1], got {probs}")
        total = sum(probs)
        if all(is_exact(p) for p in probs):
            if total != 1:
                raise DomainError(f"coefficient probabilities sum to {total}, not 1")
        elif abs(float(total) - 1.0) > 1e-15:
            raise DomainError(f"coefficient probabilities sum to {float(total)!r}, not 1")
        if self.m < 0:
            raise DomainError("degree bound m must be nonnegative")

    @classmethod
    def with_max(cls, t: Prob, m: int = 0) -> "TernaryCoeffDist":
        """P(0) = t and the remaining mass split evenly between -1 and +1."""
        rest = (1 - t) / 2
        return cls(rest, t, rest, m)

    @property
    def probs(self) -> tuple:
        """Ordered as (P(-1), P(0), P(+1))."""
        return (self.rho_minus, self.rho_zero, self.rho_plus)

    @property
    def rho(self) -> Prob:
        return max(self.probs)

    @property
    def exact(self) -> bool:
        return all(is_exact(p) for p in self.probs)

    def exact_probs(self) -> tuple[Fraction, Fraction, Fraction]:
        return tuple(exact_prob(p) for p in self.probs)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """(size, m+1) int8 array of coefficients, column j is xi_j."""
        p = np.array([float(x) for x in self.probs])
        p = p / p.sum()
        u = rng.random((size, self.m + 1))
        return (np.searchsorted(np.cumsum(p)[:-1], u, side="right") - 1).astype(np.int8)
