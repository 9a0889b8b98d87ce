"""Self-contained special functions: integer-order Bessel J and Wigner 3-j/6-j symbols.

Angular momenta are tracked as doubled integers (``HalfInt``) so that
half-integer bookkeeping and triangle/parity selection rules are exact.
Wigner symbols use Racah's closed-form alternating sums over a log-factorial
table; selection-rule zeros are returned as exact ``0.0`` before any floating
arithmetic happens.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from fractions import Fraction

from .errors import DomainError

__all__ = ["HalfInt", "bessel_j", "wigner_3j", "wigner_6j"]

BESSEL_MAX_ORDER = 200


@dataclass(frozen=True, order=True)
class HalfInt:
    """Exact half-integer, stored as twice its value."""

    twice: int

    @classmethod
    def coerce(cls, value) -> "HalfInt":
        """Accept HalfInt, int, float, Fraction or strings like '7/2'."""
        if isinstance(value, HalfInt):
            return value
        if isinstance(value, int):
            return cls(2 * value)
        if isinstance(value, str):
            value = Fraction(value)
        if isinstance(value, Fraction):
            if value.denominator not in (1, 2):
                raise DomainError(f"{value} is not a half-integer")
            return cls(int(value * 2))
        if isinstance(value, float):
            twice = round(2 * value)
            if abs(2 * value - twice) > 1e-9:
                raise DomainError(f"{value} is not a half-integer")
            return cls(twice)
        raise DomainError(f"cannot interpret {value!r} as a half-integer")

    @property
    def value(self) -> float:
        return self.twice / 2.0

    @property
    def is_integer(self) -> bool:
        return self.twice % 2 == 0

    def __float__(self) -> float:
        return self.value

    def __str__(self) -> str:
        if self.is_integer:
            return str(self.twice // 2)
        return f"{self.twice}/2"


# ---------------------------------------------------------------------------
# Bessel functions of the first kind, integer order, real argument
# ---------------------------------------------------------------------------

def bessel_j(n: int, x: float) -> float:
    """J_n(x) for integer n, |n| <= 200, by normalized downward recurrence.

    Miller's algorithm: run j_{k-1} = (2k/x) j_k - j_{k+1} downward from a
    start order well above max(n, x) and normalize with
    J_0(x) + 2 sum_{k>=1} J_{2k}(x) = 1.  Relative accuracy is ~1e-13 for
    |x| <= 50 (away from zeros of J_n, where absolute accuracy ~1e-15 holds).
    """
    if n != int(n):
        raise DomainError(f"Bessel order must be an integer, got {n}")
    n = int(n)
    if abs(n) > BESSEL_MAX_ORDER:
        raise DomainError(f"|n| = {abs(n)} exceeds supported order {BESSEL_MAX_ORDER}")
    if not math.isfinite(x):
        raise DomainError(f"Bessel argument must be finite, got {x}")

    sign = 1.0
    if n < 0:
        # J_{-n}(x) = (-1)^n J_n(x)
        n = -n
        if n % 2:
            sign = -sign
    if x < 0:
        # J_n(-x) = (-1)^n J_n(x)
        x = -x
        if n % 2:
            sign = -sign
    if x == 0.0:
        return 1.0 if n == 0 else 0.0

    top = max(n, int(x))
    m_start = top + 60 + int(1.5 * math.sqrt(top) + 0.5)
    if m_start % 2:
        m_start += 1

    j_up = 0.0        # j_{k+1}
    j_cur = 1e-280    # j_k, arbitrary seed at k = m_start
    norm = 0.0        # accumulates j_0 + 2 sum_{even k > 0} j_k
    out = math.nan
    k = m_start
    while k > 0:
        j_down = (2.0 * k / x) * j_cur - j_up
        if k % 2 == 0:
            norm += 2.0 * j_cur
        if k == n:
            out = j_cur
        j_up = j_cur
        j_cur = j_down
        k -= 1
        if abs(j_cur) > 1e250:
            j_cur *= 1e-250
            j_up *= 1e-250
            norm *= 1e-250
            if not math.isnan(out):
                out *= 1e-250
    if n == 0:
        out = j_cur
    norm += j_cur
    return sign * out / norm


# ---------------------------------------------------------------------------
# Wigner symbols (Racah closed forms over log-factorials)
# ---------------------------------------------------------------------------

# built once at import (covers all Racah sums up to j ~ 250); growth beyond
# that is rare and guarded by a lock so concurrent callers stay safe
_LOG_FACT = [0.0, 0.0]
while len(_LOG_FACT) < 1024:
    _LOG_FACT.append(_LOG_FACT[-1] + math.log(len(_LOG_FACT)))
_LOG_FACT_LOCK = threading.Lock()


def _log_fact(n: int) -> float:
    """log(n!) from the precomputed table (lock-protected lazy extension)."""
    if n < 0:
        raise DomainError(f"negative factorial argument {n}")
    if n >= len(_LOG_FACT):
        with _LOG_FACT_LOCK:
            while len(_LOG_FACT) <= n:
                _LOG_FACT.append(_LOG_FACT[-1] + math.log(len(_LOG_FACT)))
    return _LOG_FACT[n]


def _triangle_ok(a: int, b: int, c: int) -> bool:
    """Triangle rule for doubled angular momenta, including parity."""
    return (abs(a - b) <= c <= a + b) and (a + b + c) % 2 == 0


def _log_delta(a: int, b: int, c: int) -> float:
    """log of the triangle coefficient Delta(abc) for doubled arguments."""
    return (_log_fact((a + b - c) // 2)
            + _log_fact((a - b + c) // 2)
            + _log_fact((-a + b + c) // 2)
            - _log_fact((a + b + c) // 2 + 1))


# below this cancellation level the float sum has lost too many digits and
# the exact big-integer route takes over
_CANCELLATION_FLOOR = 1e-2


def _alternating_sum(log_terms, signs):
    """sum_i signs[i] * exp(log_terms[i]), factored around the peak term."""
    log_max = max(log_terms)
    acc = 0.0
    for lt, s in zip(log_terms, signs):
        acc += s * math.exp(lt - log_max)
    return acc, log_max


def _sqrt_signed(sum_frac: Fraction, radicand_frac: Fraction, phase: float) -> float:
    """phase * sum * sqrt(radicand) with the magnitude squared kept exact."""
    if sum_frac == 0:
        return 0.0
    sign = phase if sum_frac > 0 else -phase
    return sign * math.sqrt(float(sum_frac * sum_frac * radicand_frac))


def wigner_3j(j1, j2, j3, m1, m2, m3) -> float:
    """Wigner 3-j symbol (j1 j2 j3 / m1 m2 m3) via the Racah formula.

    Arguments may be HalfInt, int, float or '7/2'-style strings.  Violated
    selection rules (triangle, m-sum, |m| <= j) give exact 0.0; inconsistent
    half-integers (j + m not an integer) raise DomainError.
    """
    tj1, tj2, tj3 = (HalfInt.coerce(j).twice for j in (j1, j2, j3))
    tm1, tm2, tm3 = (HalfInt.coerce(m).twice for m in (m1, m2, m3))
    if tj1 < 0 or tj2 < 0 or tj3 < 0:
        raise DomainError("angular momenta must be non-negative")
    for tj, tm in ((tj1, tm1), (tj2, tm2), (tj3, tm3)):
        if (tj + tm) % 2:
            raise DomainError("j + m must be an integer for each column")
    if abs(tm1) > tj1 or abs(tm2) > tj2 or abs(tm3) > tj3:
        return 0.0
    if tm1 + tm2 + tm3 != 0:
        return 0.0
    if not _triangle_ok(tj1, tj2, tj3):
        return 0.0

    # summation limits (all quantities below are plain integers)
    t1 = (tj2 - tj3 - tm1) // 2
    t2 = (tj1 - tj3 + tm2) // 2
    t3 = (tj1 + tj2 - tj3) // 2
    t4 = (tj1 - tm1) // 2
    t5 = (tj2 + tm2) // 2
    tmin = max(0, t1, t2)
    tmax = min(t3, t4, t5)
    if tmax < tmin:
        return 0.0

    log_pref = 0.5 * (_log_delta(tj1, tj2, tj3)
                      + _log_fact((tj1 + tm1) // 2) + _log_fact((tj1 - tm1) // 2)
                      + _log_fact((tj2 + tm2) // 2) + _log_fact((tj2 - tm2) // 2)
                      + _log_fact((tj3 + tm3) // 2) + _log_fact((tj3 - tm3) // 2))
    log_terms = []
    signs = []
    for t in range(tmin, tmax + 1):
        log_terms.append(-(_log_fact(t) + _log_fact(t - t1) + _log_fact(t - t2)
                           + _log_fact(t3 - t) + _log_fact(t4 - t) + _log_fact(t5 - t)))
        signs.append(-1.0 if t % 2 else 1.0)
    acc, log_max = _alternating_sum(log_terms, signs)
    phase = -1.0 if ((tj1 - tj2 - tm3) // 2) % 2 else 1.0
    if abs(acc) >= _CANCELLATION_FLOOR:
        return phase * acc * math.exp(log_pref + log_max)

    # heavy cancellation (large j): redo the alternating sum exactly
    fact = math.factorial
    total = Fraction(0)
    for t in range(tmin, tmax + 1):
        denom = (fact(t) * fact(t - t1) * fact(t - t2)
                 * fact(t3 - t) * fact(t4 - t) * fact(t5 - t))
        total += Fraction(-1 if t % 2 else 1, denom)
    radicand = Fraction(
        fact((tj1 + tj2 - tj3) // 2) * fact((tj1 - tj2 + tj3) // 2)
        * fact((-tj1 + tj2 + tj3) // 2)
        * fact((tj1 + tm1) // 2) * fact((tj1 - tm1) // 2)
        * fact((tj2 + tm2) // 2) * fact((tj2 - tm2) // 2)
        * fact((tj3 + tm3) // 2) * fact((tj3 - tm3) // 2),
        fact((tj1 + tj2 + tj3) // 2 + 1))
    return _sqrt_signed(total, radicand, phase)


def wigner_6j(j1, j2, j3, j4, j5, j6) -> float:
    """Wigner 6-j symbol {j1 j2 j3 / j4 j5 j6} via the Racah formula.

    Returns exact 0.0 when any of the four triads (j1 j2 j3), (j1 j5 j6),
    (j4 j2 j6), (j4 j5 j3) violates the triangle rule.
    """
    ta, tb, tc, td, te, tf = (HalfInt.coerce(j).twice for j in (j1, j2, j3, j4, j5, j6))
    if min(ta, tb, tc, td, te, tf) < 0:
        raise DomainError("angular momenta must be non-negative")
    triads = ((ta, tb, tc), (ta, te, tf), (td, tb, tf), (td, te, tc))
    for a, b, c in triads:
        if not _triangle_ok(a, b, c):
            return 0.0

    s1 = (ta + tb + tc) // 2
    s2 = (ta + te + tf) // 2
    s3 = (td + tb + tf) // 2
    s4 = (td + te + tc) // 2
    p1 = (ta + tb + td + te) // 2
    p2 = (tb + tc + te + tf) // 2
    p3 = (ta + tc + td + tf) // 2
    tmin = max(s1, s2, s3, s4)
    tmax = min(p1, p2, p3)
    if tmax < tmin:
        return 0.0

    log_pref = 0.5 * sum(_log_delta(a, b, c) for a, b, c in triads)
    log_terms = []
    signs = []
    for t in range(tmin, tmax + 1):
        log_terms.append(_log_fact(t + 1)
                         - (_log_fact(t - s1) + _log_fact(t - s2) + _log_fact(t - s3)
                            + _log_fact(t - s4) + _log_fact(p1 - t) + _log_fact(p2 - t)
                            + _log_fact(p3 - t)))
        signs.append(-1.0 if t % 2 else 1.0)
    acc, log_max = _alternating_sum(log_terms, signs)
    if abs(acc) >= _CANCELLATION_FLOOR:
        return acc * math.exp(log_pref + log_max)

    fact = math.factorial
    total = Fraction(0)
    for t in range(tmin, tmax + 1):
        denom = (fact(t - s1) * fact(t - s2) * fact(t - s3) * fact(t - s4)
                 * fact(p1 - t) * fact(p2 - t) * fact(p3 - t))
        total += Fraction((-1 if t % 2 else 1) * fact(t + 1), denom)
    radicand = Fraction(1)
    for a, b, c in triads:
        radicand *= Fraction(
            fact((a + b - c) // 2) * fact((a - b + c) // 2) * fact((-a + b + c) // 2),
            fact((a + b + c) // 2 + 1))
    return _sqrt_signed(total, radicand, 1.0)
