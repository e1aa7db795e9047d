import numpy as np
from sympy import factorint, primepi

from coinsieve.primes import factor_stats, is_squarefree, odd_primes_below, odd_squarefree_upto, spf_sieve


def test_spf_small():
    spf = spf_sieve(30)
    assert list(spf[2:13]) == [2, 3, 2, 5, 2, 7, 2, 3, 2, 11, 2]
    assert not spf.flags.writeable


def test_factor_stats_against_sympy():
    spf = spf_sieve(5000)
    omega, sf = factor_stats(spf, 2, 5001)
    for k in range(2, 5001):
        f = factorint(k)
        assert omega[k - 2] == sum(f.values())
        assert sf[k - 2] == all(e == 1 for e in f.values())


def test_prime_count():
    omega, _ = factor_stats(spf_sieve(1 << 16), 0, 1 << 16)
    assert int((omega == 1).sum()) == int(primepi(1 << 16))


def test_odd_squarefree():
    qs = odd_squarefree_upto(99)
    assert qs[0] == 3 and 9 not in qs and 15 in qs and 45 not in qs
    assert list(qs) == [q for q in range(3, 100, 2) if all(e == 1 for e in factorint(q).values())]
    assert np.all(np.diff(qs) > 0)
    assert is_squarefree(30) and not is_squarefree(18)
    assert odd_primes_below(12) == [3, 5, 7, 11]
