"""Angular-momentum coupling coefficients and spherical-tensor matrix elements.

All angular momenta are handled internally as doubled integers so that
half-integer nuclear spins compare exactly.  The public functions accept
ints, floats, :class:`fractions.Fraction` or :class:`HalfInt`.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import factorial, sqrt

SpinLike = "int | float | Fraction | HalfInt"


@dataclass(frozen=True, order=True)
class HalfInt:
    """An integer or half-integer quantum number stored as ``2*j``."""

    twice_value: int

    @classmethod
    def of(cls, value) -> "HalfInt":
        if isinstance(value, HalfInt):
            return value
        return cls(twice(value))

    @property
    def value(self) -> Fraction:
        return Fraction(self.twice_value, 2)

    @property
    def is_integer(self) -> bool:
        return self.twice_value % 2 == 0

    def __float__(self) -> float:
        return self.twice_value / 2

    def __repr__(self) -> str:
        if self.is_integer:
            return f"HalfInt({self.twice_value // 2})"
        return f"HalfInt({self.twice_value}/2)"


def twice(value) -> int:
    """Return ``2*value`` as an exact int; raise if ``value`` is not a multiple of 1/2."""
    if isinstance(value, HalfInt):
        return value.twice_value
    doubled = 2 * Fraction(value).limit_denominator(4)
    if doubled.denominator != 1 or abs(float(doubled) - 2 * float(value)) > 1e-9:
        raise ValueError(f"{value!r} is not an integer or half-integer")
    return int(doubled)


def projections(j) -> list[Fraction]:
    """Projections -j, -j+1, ..., j (ascending)."""
    tj = twice(j)
    return [Fraction(tm, 2) for tm in range(-tj, tj + 1, 2)]


def _fac(twice_n: int) -> int:
    return factorial(twice_n // 2)


@lru_cache(maxsize=65536)
def _wigner3j_twice(tj1: int, tj2: int, tj3: int, tm1: int, tm2: int, tm3: int) -> float:
    if tm1 + tm2 + tm3 != 0:
        return 0.0
    if min(tj1, tj2, tj3) < 0:
        return 0.0
    if tj3 < abs(tj1 - tj2) or tj3 > tj1 + tj2 or (tj1 + tj2 + tj3) % 2:
        return 0.0
    for tj, tm in ((tj1, tm1), (tj2, tm2), (tj3, tm3)):
        if abs(tm) > tj or (tj - tm) % 2:
            return 0.0

    # Racah formula; every factorial argument below is a doubled integer
    # that is guaranteed even, so exact integer arithmetic applies.
    triangle = Fraction(
        _fac(tj1 + tj2 - tj3) * _fac(tj1 - tj2 + tj3) * _fac(-tj1 + tj2 + tj3),
        _fac(tj1 + tj2 + tj3 + 2),
    )
    norm = (
        _fac(tj1 + tm1) * _fac(tj1 - tm1) * _fac(tj2 + tm2)
        * _fac(tj2 - tm2) * _fac(tj3 + tm3) * _fac(tj3 - tm3)
    )
    kmin = max(0, (tj2 - tj3 - tm1) // 2, (tj1 - tj3 + tm2) // 2)
    kmax = min((tj1 + tj2 - tj3) // 2, (tj1 - tm1) // 2, (tj2 + tm2) // 2)
    total = Fraction(0)
    for k in range(kmin, kmax + 1):
        tk = 2 * k
        denom = (
            factorial(k)
            * _fac(tj1 + tj2 - tj3 - tk)
            * _fac(tj1 - tm1 - tk)
            * _fac(tj2 + tm2 - tk)
            * _fac(tj3 - tj2 + tm1 + tk)
            * _fac(tj3 - tj1 - tm2 + tk)
        )
        total += Fraction((-1) ** k, denom)
    if total == 0:
        return 0.0
    squared = total * total * triangle * norm
    phase_twice = tj1 - tj2 - tm3
    sign = -1.0 if (phase_twice // 2) % 2 else 1.0
    if total < 0:
        sign = -sign
    return sign * sqrt(float(squared))


def wigner3j(j1, j2, j3, m1, m2, m3) -> float:
    """Wigner 3-j symbol ``(j1 j2 j3; m1 m2 m3)``.

    Returns 0 for any combination forbidden by the triangle rule, the
    projection sum rule or the ranges of the projections.
    """
    return _wigner3j_twice(
        twice(j1), twice(j2), twice(j3), twice(m1), twice(m2), twice(m3)
    )


def reduced_ck(jp, k: int, j) -> float:
    """Reduced matrix element ``<J'||C_k||J>`` of the modified spherical harmonic."""
    tjp, tj = twice(jp), twice(j)
    phase = -1.0 if (tjp // 2) % 2 else 1.0
    return phase * sqrt((tj + 1) * (tjp + 1)) * _wigner3j_twice(tjp, 2 * k, tj, 0, 0, 0)


def ck_element(jp, mp, k: int, q: int, j, m) -> float:
    """``<J' M'| C_{k,q} |J M>`` via the Wigner-Eckart theorem."""
    tjp, tmp = twice(jp), twice(mp)
    if tmp != twice(m) + 2 * q:
        return 0.0
    red = reduced_ck(jp, k, j)
    if red == 0.0:
        return 0.0
    phase = -1.0 if ((tjp - tmp) // 2) % 2 else 1.0
    return phase * _wigner3j_twice(tjp, 2 * k, twice(j), -tmp, 2 * q, twice(m)) * red


def reduced_t2(spin) -> float:
    """``<I||T_2(I,I)||I>`` for the normalisation ``T_{2,0} = (3 I_z^2 - I.I)/sqrt(6)``."""
    ti = twice(spin)
    if ti < 2:
        return 0.0
    prod = (ti - 1) * ti * (ti + 1) * (ti + 2) * (ti + 3)
    return sqrt(prod) / (2.0 * sqrt(6.0))


def tensor_t2_ii(spin, mi_p, mi, q: int) -> float:
    """``<I, m'| T_{2,q}(I, I) |I, m>`` for a single spin coupled with itself."""
    ti, tmp, tm = twice(spin), twice(mi_p), twice(mi)
    if tmp != tm + 2 * q or abs(q) > 2:
        return 0.0
    red = reduced_t2(spin)
    if red == 0.0:
        return 0.0
    phase = -1.0 if ((ti - tmp) // 2) % 2 else 1.0
    return phase * _wigner3j_twice(ti, 4, ti, -tmp, 2 * q, tm) * red
