"""Remainder terms R_q of the biased binary measure as exponential sums.

    R_q = (1/q) sum_{lambda=1}^{q-1} prod_{j<m} (rho + (1 - rho) e(lambda 2^j / q))

Each inner product is accumulated in log-polar form (sum of log-magnitudes,
sum of phases in turns) so that products far below the floating-point range
stay representable. The j-products are periodic with period d = ord_q(2), so
only min(m, d) factors per lambda are ever touched:

    prod_{j<m} = (prod_{j<d})^(m // d) * prod_{j < m mod d}

Two arithmetic back ends share that structure:

* 53 bits: numpy float64, with a first-order forward error bound carried
  per factor and per summation.
* more than 53 bits: factor logs and phases rounded once to fixed point with
  ``precision_bits`` fractional bits and summed as Python integers (exact
  accumulation); exponentials taken in mpmath.

An exact rational route multiplies the generating polynomial
prod_j (rho + (1 - rho) x^(2^j)) in Z[x]/(x^q - 1), using the same orbit
compression (power of the full-period product).
"""

from __future__ import annotations

import math
import threading
from contextlib import contextmanager
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import mpmath
import numpy as np
from sympy.ntheory import n_order

from coinsieve.errors import DomainError
from coinsieve.measure import BiasedBitMeasure, Prob, exact_prob

U53 = 2.0**-53

# mpmath keeps one process-wide working precision. Every block that uses it
# holds this lock and sets the precision explicitly, so results do not
# depend on thread scheduling or on the caller's mpmath settings.
_MP_LOCK = threading.RLock()


@contextmanager
def pinned_precision(bits: int):
    with _MP_LOCK, mpmath.workprec(bits):
        yield
# Safety factor applied to every first-order error estimate.
ERROR_SAFETY = 2


def unit_factor(theta: float, rho: Prob) -> complex:
    """rho + (1 - rho) e(theta), theta in turns."""
    r = float(rho)
    return r + (1 - r) * complex(math.cos(2 * math.pi * theta), math.sin(2 * math.pi * theta))


def unit_factor_sq_magnitude(theta: float, rho: Prob) -> float:
    """|rho + (1 - rho) e(theta)|^2 = 1 - 4 rho (1 - rho) sin^2(pi theta)."""
    r = float(rho)
    return 1 - 4 * r * (1 - r) * math.sin(math.pi * theta) ** 2


@lru_cache(maxsize=4096)
def multiplicative_order(q: int) -> int:
    """ord_q(2) for odd q (1 for q = 1)."""
    if q % 2 == 0:
        raise DomainError(f"ord_q(2) needs odd q, got {q}")
    return 1 if q == 1 else int(n_order(2, q))


@dataclass(frozen=True)
class OrbitFactorization:
    """Cycles of x -> 2x on the nonzero residues mod an odd q."""

    q: int
    d: int
    representatives: tuple
    cycle_lengths: tuple

    def cycle(self, rep: int) -> list[int]:
        out, x = [rep], (2 * rep) % self.q
        while x != rep:
            out.append(x)
            x = (2 * x) % self.q
        return out


def orbit_factorization(q: int) -> OrbitFactorization:
    d = multiplicative_order(q)
    seen = np.zeros(q, dtype=bool)
    reps, lengths = [], []
    for lam in range(1, q):
        if seen[lam]:
            continue
        x, n = lam, 0
        while not seen[x]:
            seen[x] = True
            x = (2 * x) % q
            n += 1
        reps.append(lam)
        lengths.append(n)
    return OrbitFactorization(q, d, tuple(reps), tuple(lengths))


def _check_modulus(q: int):
    if not isinstance(q, (int, np.integer)) or q < 1:
        raise DomainError(f"modulus must be a positive integer, got {q!r}")
    if q % 2 == 0:
        raise DomainError(f"modulus must be odd, got {q}")


def _orbit_indices(q: int, n_terms: int) -> np.ndarray:
    """(n_terms, q-1) array of lambda 2^j mod q for lambda = 1..q-1."""
    lam = np.arange(1, q, dtype=np.int64)
    pow2 = np.array([pow(2, j, q) for j in range(n_terms)], dtype=np.int64)
    return (pow2[:, None] * lam[None, :]) % q


def _split(m: int, d: int) -> tuple[int, int, int]:
    """(factors to touch, full periods, leftover length)."""
    if m >= d:
        return d, m // d, m % d
    return m, 0, m


# -- float64 back end -------------------------------------------------------


def _float_tables(q: int, rho: float):
    """Per-residue log|f|, arg f (turns) and their absolute error bounds.

    Uses |f|^2 = (2 rho - 1)^2 + 4 rho (1 - rho) cos^2(pi x) and
    Re f = (2 rho - 1) + 2 (1 - rho) cos^2(pi x): sums of nonnegative terms,
    so no cancellation near x = 1/2.
    """
    r = np.arange(q, dtype=np.int64)
    c = np.where(2 * r > q, r - q, r)  # centred residue, x = c/q in (-1/2, 1/2)
    s = np.sin(np.pi * np.abs(c) / q) * np.sign(c)
    co = np.sin(np.pi * (q - 2 * np.abs(c)) / (2 * q))  # cos(pi x), exact argument
    bias = (2 * rho - 1) ** 2
    cc = 4 * rho * (1 - rho)
    with np.errstate(divide="ignore"):
        logmag = 0.5 * np.log(bias + cc * co * co)
        re = (2 * rho - 1) + 2 * (1 - rho) * co * co
        im = 2 * (1 - rho) * s * co
        phase = np.arctan2(im, re) / (2 * np.pi)
    elog = 8 * U53 + U53 * np.abs(logmag)
    ephase = 2 * U53 + U53 * np.abs(phase)
    return logmag, phase, elog, ephase


def _float_log_polar(q: int, rho: float, m: int):
    """Per-lambda (L, Phi, err_L, err_Phi); Phi in turns reduced to [-1/2, 1/2]."""
    d = multiplicative_order(q)
    n1, k, rem = _split(m, d)
    logmag, phase, elog, ephase = _float_tables(q, rho)
    if n1 == 0:
        zeros = np.zeros(q - 1)
        return zeros, zeros.copy(), zeros.copy(), zeros.copy()
    idx = _orbit_indices(q, n1)

    def accumulate(table, etable):
        t = table[idx]
        part = t[:rem].sum(axis=0)
        full = part + t[rem:].sum(axis=0)
        abs_full = np.abs(t).sum(axis=0)
        abs_part = np.abs(t[:rem]).sum(axis=0)
        e_full = etable[idx].sum(axis=0) + n1 * U53 * abs_full
        e_part = etable[idx[:rem]].sum(axis=0) + max(rem, 1) * U53 * abs_part
        if k:
            total = k * full + part
            err = k * e_full + e_part + U53 * (np.abs(k * full) + np.abs(total))
        else:
            total, err = full, e_full
        return total, err

    L, eL = accumulate(logmag, elog)
    Phi, ePhi = accumulate(phase, ephase)
    ePhi = ePhi + U53 * np.abs(Phi)
    Phi = Phi - np.rint(Phi)
    return L, Phi, eL, ePhi


# -- fixed-point back end ---------------------------------------------------


@lru_cache(maxsize=4096)
def _fixed_tables(q: int, rho: Fraction, bits: int):
    """Per-residue log|f| and arg f (turns) as integers scaled by 2^bits.

    Only residues up to q/2 are evaluated; f(-x) is the conjugate of f(x).
    """
    logs = np.zeros(q, dtype=np.int64).astype(object)
    phases = logs.copy()
    with pinned_precision(bits + 24):
        scale = mpmath.mpf(2) ** bits
        rh = mpmath.mpf(rho.numerator) / rho.denominator
        bias = (2 * rh - 1) ** 2
        cc = 4 * rh * (1 - rh)
        for r in range(1, (q + 1) // 2):
            s = mpmath.sinpi(mpmath.mpf(r) / q)
            co = mpmath.sinpi(mpmath.mpf(q - 2 * r) / (2 * q))
            lg = int(mpmath.nint(mpmath.log(bias + cc * co * co) / 2 * scale))
            re = (2 * rh - 1) + 2 * (1 - rh) * co * co
            im = 2 * (1 - rh) * s * co
            ph = int(mpmath.nint(mpmath.atan2(im, re) / (2 * mpmath.pi) * scale))
            logs[r] = logs[q - r] = lg
            phases[r], phases[q - r] = ph, -ph
    logs.setflags(write=False)
    phases.setflags(write=False)
    return logs, phases


def _fixed_log_polar(q: int, rho: Prob, m: int, bits: int):
    """Per-lambda (L, Phi) as exact integer sums of rounded table entries."""
    d = multiplicative_order(q)
    n1, k, rem = _split(m, d)
    if n1 == 0:
        zeros = np.empty(q - 1, dtype=object)
        zeros[:] = 0
        return zeros, zeros.copy()
    logs, phases = _fixed_tables(q, Fraction(rho), bits)
    idx = _orbit_indices(q, n1)

    def accumulate(table):
        t = table[idx]
        part = t[:rem].sum(axis=0) if rem else 0
        full = part + t[rem:].sum(axis=0)
        return k * full + part if k else full

    one = 1 << bits
    Phi = accumulate(phases)
    Phi = np.array([((int(x) + one // 2) % one) - one // 2 for x in Phi], dtype=object)
    return accumulate(logs), Phi


# -- results ----------------------------------------------------------------


@dataclass(frozen=True)
class RemainderEstimate:
    q: int
    m: int
    rho: Prob
    value: mpmath.mpf
    abs_value: mpmath.mpf
    method: str  # "float-product" or "exact-rational"
    error_bound: mpmath.mpf
    precision_bits: int = 53
    imag_residual: mpmath.mpf = mpmath.mpf(0)
    triangle_sum: mpmath.mpf = mpmath.mpf(0)  # (1/q) sum_lambda |prod|
    exact: Fraction | None = None

    @property
    def sign_certified(self) -> bool:
        return self.abs_value > self.error_bound or self.value == 0

    def __float__(self):
        return float(self.value)


def remainder_term(q: int, meas: BiasedBitMeasure, precision_bits: int = 128,
                   exact: bool = False) -> RemainderEstimate:
    """R_q through the product formula.

    ``exact=True`` needs a rational rho and returns the exact value (method
    ``exact-rational``, zero error bound). Otherwise ``precision_bits == 53``
    selects float64 and anything larger the fixed-point back end.
    """
    _check_modulus(q)
    if precision_bits < 53:
        raise DomainError(f"precision_bits must be >= 53, got {precision_bits}")
    m, rho = meas.m, meas.rho
    if exact:
        value = exact_remainder(q, meas)
        with pinned_precision(precision_bits):
            v = mpmath.mpf(value.numerator) / value.denominator
            return RemainderEstimate(q, m, rho, v, abs(v), "exact-rational", mpmath.mpf(0),
                                     precision_bits, exact=value)
    if q == 1:
        z = mpmath.mpf(0)
        return RemainderEstimate(q, m, rho, z, z, "float-product", z, precision_bits,
                                 exact=Fraction(0))
    if precision_bits == 53:
        return _remainder_float(q, meas)
    return _remainder_fixed(q, meas, precision_bits)


def _remainder_float(q: int, meas: BiasedBitMeasure) -> RemainderEstimate:
    L, Phi, eL, ePhi = _float_log_polar(q, float(meas.rho), meas.m)
    Lmax = float(L.max())
    w = np.exp(L - Lmax)
    re = math.fsum(w * np.cos(2 * np.pi * Phi))
    im = math.fsum(w * np.sin(2 * np.pi * Phi))
    rel = np.expm1(eL + U53 * np.abs(L) + 2 * np.pi * ePhi) + 4 * U53
    err = float((w * rel).sum()) + 4 * U53 * float(w.sum())
    with pinned_precision(53):
        scale = mpmath.exp(Lmax) / q
        value = mpmath.mpf(re) * scale
        bound = ERROR_SAFETY * mpmath.mpf(err) * scale
        imag = mpmath.mpf(im) * scale
        tri = mpmath.mpf(float(w.sum())) * scale
    if abs(imag) > bound:
        raise AssertionError(f"conjugate symmetry violated for q={q}: imag {imag} > {bound}")
    return RemainderEstimate(q, meas.m, meas.rho, value, abs(value), "float-product", bound, 53,
                             imag_residual=abs(imag),
                             triangle_sum=tri)


def _remainder_fixed(q: int, meas: BiasedBitMeasure, bits: int) -> RemainderEstimate:
    L, Phi = _fixed_log_polar(q, meas.rho, meas.m, bits)
    one = 1 << bits
    # lambda and q - lambda give conjugate products; with mirrored tables and
    # exact integer sums this holds bit for bit, so the imaginary parts
    # cancel exactly and only half of the lambdas need exponentials.
    half = (q - 1) // 2
    if any(L[i] != L[q - 2 - i] or (Phi[i] + Phi[q - 2 - i]) % one for i in range(half)):
        raise AssertionError(f"conjugate symmetry violated for q={q}")
    work = bits + 16 + q.bit_length()
    with pinned_precision(work):
        scale = mpmath.mpf(2) ** -bits
        mags = [mpmath.exp(int(x) * scale) for x in L[:half]]
        re = 2 * mpmath.fsum(a * mpmath.cospi(2 * int(t) * scale) for a, t in zip(mags, Phi))
        tri = 2 * mpmath.fsum(mags)
        # Every table entry is within 2^-bits of its true value and the
        # integer sums are exact.
        per_lambda = mpmath.expm1(meas.m * (1 + 2 * mpmath.pi) * mpmath.mpf(2) ** (-bits))
        err = ERROR_SAFETY * (tri * (per_lambda + mpmath.mpf(2) ** (-bits)) / q)
        value = re / q
    with pinned_precision(bits):
        return RemainderEstimate(q, meas.m, meas.rho, +value, abs(+value), "float-product",
                                 +err, bits, triangle_sum=+(tri / q))


# -- exact route ------------------------------------------------------------


def _pack(v, width: int) -> int:
    return int.from_bytes(b"".join(int(x).to_bytes(width, "little") for x in v), "little")


def _cyclic_mul(u, v, q: int) -> list[int]:
    """Product in Z[x]/(x^q - 1) of nonnegative coefficient vectors."""
    bound = max(u) * max(v) * q
    width = (bound.bit_length() + 8) // 8 + 1
    prod = _pack(u, width) * _pack(v, width)
    raw = prod.to_bytes((2 * q) * width + width, "little")
    out = [0] * q
    for i in range(2 * q - 1):
        out[i % q] += int.from_bytes(raw[i * width:(i + 1) * width], "little")
    return out


def _factor(q: int, a: int, b: int, shift: int) -> list[int]:
    v = [0] * q
    v[0] += a
    v[shift] += b - a
    return v


def _tree_product(vectors, q: int) -> list[int]:
    if not vectors:
        return [1] + [0] * (q - 1)
    while len(vectors) > 1:
        nxt = [_cyclic_mul(vectors[i], vectors[i + 1], q) for i in range(0, len(vectors) - 1, 2)]
        if len(vectors) % 2:
            nxt.append(vectors[-1])
        vectors = nxt
    return vectors[0]


def _power(v, e: int, q: int) -> list[int]:
    result = [1] + [0] * (q - 1)
    while e:
        if e & 1:
            result = _cyclic_mul(result, v, q)
        e >>= 1
        if e:
            v = _cyclic_mul(v, v, q)
    return result


def exact_remainder(q: int, meas: BiasedBitMeasure) -> Fraction:
    """R_q exactly: coefficient of x^0 in prod_j (rho + (1 - rho) x^(2^j)) mod
    x^q - 1, minus 1/q."""
    _check_modulus(q)
    if q == 1:
        return Fraction(0)
    rho = exact_prob(meas.rho)
    a, b = rho.numerator, rho.denominator
    d = multiplicative_order(q)
    n1, k, rem = _split(meas.m, d)
    part = _tree_product([_factor(q, a, b, pow(2, j, q)) for j in range(rem)], q)
    if k:
        full = _tree_product([_factor(q, a, b, pow(2, j, q)) for j in range(d)], q)
        part = _cyclic_mul(_power(full, k, q), part, q)
    return Fraction(part[0], b**meas.m) - Fraction(1, q)


# -- magnitudes and windows -------------------------------------------------


def max_orbit_log_magnitude(q: int, meas: BiasedBitMeasure) -> tuple[float, float]:
    """(log M_q(m), absolute error bound on it), float64 back end."""
    _check_modulus(q)
    if q < 3:
        raise DomainError("need q >= 3")
    L, _, eL, _ = _float_log_polar(q, float(meas.rho), meas.m)
    i = int(np.argmax(L))
    return float(L[i]), float(ERROR_SAFETY * (eL.max() + U53 * abs(L[i])))


def max_orbit_magnitude(q: int, meas: BiasedBitMeasure) -> mpmath.mpf:
    """M_q(m) = max over 1 <= lambda < q of |prod_{j<m} f(lambda 2^j / q)|."""
    logm, _ = max_orbit_log_magnitude(q, meas)
    with pinned_precision(53):
        return mpmath.exp(logm)


def window_max_sin2(q: int, lam: int, window_len: int) -> float:
    """max_{0 <= j < window_len} sin^2(pi lambda 2^j / q)."""
    _check_modulus(q)
    if lam % q == 0:
        raise DomainError("lambda must be nonzero mod q")
    if window_len < 1:
        raise DomainError("window_len must be >= 1")
    return max(math.sin(math.pi * ((lam * pow(2, j, q)) % q) / q) ** 2 for j in range(window_len))


def window_length(q: int) -> int:
    """ceil(log2 q)."""
    return max(1, (q - 1).bit_length())


def window_min_over_lambda(q: int, window_len: int | None = None) -> float:
    """min over lambda of window_max_sin2(q, lambda, window_len), vectorised."""
    _check_modulus(q)
    if q < 3:
        raise DomainError("need q >= 3")
    w = window_length(q) if window_len is None else window_len
    idx = _orbit_indices(q, w)
    dist = np.minimum(idx, q - idx) / q  # distance to the nearest integer
    return float((np.sin(np.pi * dist) ** 2).max(axis=0).min())


# -- small-q regime ---------------------------------------------------------


@dataclass(frozen=True)
class DecayRow:
    m: int
    abs_rq: mpmath.mpf
    error_bound: mpmath.mpf
    in_regime: bool  # log q <= sqrt(m log 2)


@dataclass(frozen=True)
class DecayTable:
    q: int
    rho: Prob
    rows: tuple
    decay_rate: float | None  # fitted -d log|R_q| / dm


def small_q_decay_check(q: int, rho: Prob, m_list, precision_bits: int = 128) -> DecayTable:
    rows = []
    for m in m_list:
        est = remainder_term(q, BiasedBitMeasure(m, rho), precision_bits)
        in_regime = math.log(q) <= math.sqrt(m * math.log(2))
        rows.append(DecayRow(m, est.abs_value, est.error_bound, in_regime))
    with pinned_precision(precision_bits):
        pts = [(r.m, float(mpmath.log(r.abs_rq))) for r in rows if r.abs_rq > 0]
    rate = None
    if len(pts) >= 2:
        ms, logs = zip(*pts)
        rate = -float(np.polyfit(ms, logs, 1)[0])
    return DecayTable(q, rho, tuple(rows), rate)
