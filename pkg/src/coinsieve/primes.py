"""Smallest-prime-factor sieve and the per-integer statistics derived from it."""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

CHUNK = 1 << 22


@lru_cache(maxsize=4)
def spf_sieve(n: int) -> np.ndarray:
    """spf[k] = smallest prime factor of k for 2 <= k <= n (spf[0] = 0, spf[1] = 1)."""
    spf = np.zeros(n + 1, dtype=np.int32)
    for p in range(2, math.isqrt(n) + 1):
        if spf[p]:
            continue
        block = spf[p * p::p]
        block[block == 0] = p
    rest = np.flatnonzero(spf == 0)
    spf[rest] = rest
    if n >= 1:
        spf[1] = 1
    spf.setflags(write=False)
    return spf


def factor_stats(spf: np.ndarray, lo: int, hi: int):
    """(Omega, squarefree) for lo <= k < hi; Omega counts multiplicity.

    Repeatedly strips the smallest prime factor; a repeated factor shows up
    as the same spf twice in a row. 0 and 1 get Omega = 0.
    """
    cur = np.arange(lo, hi, dtype=np.int64)
    omega = np.zeros(hi - lo, dtype=np.int16)
    squarefree = np.ones(hi - lo, dtype=bool)
    squarefree[cur == 0] = False
    prev = np.zeros(hi - lo, dtype=np.int64)
    live = cur > 1
    while live.any():
        p = spf[cur[live]].astype(np.int64)
        squarefree[np.flatnonzero(live)[p == prev[live]]] = False
        prev[live] = p
        cur[live] //= p
        omega[live] += 1
        live = cur > 1
    return omega, squarefree


def odd_squarefree_upto(n: int) -> np.ndarray:
    """Odd squarefree q with 3 <= q <= n, ascending."""
    if n < 3:
        return np.zeros(0, dtype=np.int64)
    _, sf = factor_stats(spf_sieve(n), 0, n + 1)
    q = np.flatnonzero(sf)
    return q[(q % 2 == 1) & (q >= 3)]


def is_squarefree(n: int) -> bool:
    if n < 1:
        return False
    _, sf = factor_stats(spf_sieve(max(n, 2)), n, n + 1)
    return bool(sf[0])


def odd_primes_below(z: int) -> list[int]:
    if z <= 3:
        return []
    spf = spf_sieve(z)
    return [p for p in range(3, z) if spf[p] == p]
