"""Continued fractions of rotation numbers, convergents and Brjuno sums.

A :class:`RotationNumber` is driven by its stream of partial quotients
``a_1, a_2, ...`` of ``alpha = [0; a_1, a_2, ...]`` in ``(0, 1)``.  The float
value is derived from the stream, never the other way round, except for
float/decimal seeds where only the quotients shared by the whole uncertainty
interval are trusted.
"""

from __future__ import annotations

import math
import re
import threading
from fractions import Fraction
from math import isqrt

import mpmath

from .errors import PrecisionError, RationalityError

__all__ = [
    "RotationNumber",
    "convergents",
    "signed_error",
    "brjuno_partial_sum",
    "liouville_stream",
    "non_brjuno_stream",
    "binary64_horizon",
    "golden_mean",
    "parse_alpha",
    "surd_exact_checks",
]

LN2 = math.log(2.0)


def _sign_surd(x, y, d):
    """Exact sign of ``x + y*sqrt(d)`` for integers, ``d`` a non-square."""
    if y == 0:
        return (x > 0) - (x < 0)
    if x == 0:
        return (y > 0) - (y < 0)
    if x > 0 and y > 0:
        return 1
    if x < 0 and y < 0:
        return -1
    # opposite signs: compare x^2 with y^2 d
    lhs, rhs = x * x, y * y * d
    if lhs == rhs:
        return 0
    if x > 0:
        return 1 if lhs > rhs else -1
    return -1 if lhs > rhs else 1


def _floor_surd(p, q, d):
    """floor((p + sqrt(d)) / q) for integer p, q != 0 and non-square d."""
    s = isqrt(d)
    if q > 0:
        return (p + s) // q
    return (-p - s - 1) // (-q)


class RotationNumber:
    """An irrational number of ``(0, 1)`` given by its partial quotients.

    Use the constructors :meth:`from_surd`, :meth:`from_quotients`,
    :meth:`from_float`, :func:`liouville_stream` and :func:`non_brjuno_stream`
    rather than calling ``__init__`` directly.

    Memoization of the quotient stream is guarded by a lock, so instances are
    safe to share between threads.
    """

    def __init__(self, kind, quotient_fn, label=None, **meta):
        self.kind = kind
        self.label = label or kind
        self._quotient_fn = quotient_fn
        self._meta = meta
        self._lock = threading.Lock()
        # index 0 holds a_0 = 0; convergents carry the (-1) seed separately
        self._a = [0]
        self._p = [0]
        self._q = [1]
        self._state = meta.pop("state", None)

    # -- constructors -----------------------------------------------------

    @classmethod
    def from_surd(cls, a, b, c, d, label=None):
        """``alpha = (a + b*sqrt(d)) / c`` reduced mod 1."""
        if c == 0:
            raise ValueError("c must be nonzero")
        if d <= 0 or isqrt(d) ** 2 == d or b == 0:
            raise RationalityError(f"({a}+{b}*sqrt({d}))/{c} is rational")
        # write alpha = (P + sqrt(D)) / Q with Q | D - P^2
        D = b * b * d
        if b > 0:
            P, Q = a, c
        else:
            P, Q = -a, -c
        if (D - P * P) % Q:
            P, D, Q = P * abs(Q), D * Q * Q, Q * abs(Q)
        a0 = _floor_surd(P, Q, D)
        P = P - a0 * Q  # subtract integer part: alpha mod 1
        state = {"P": [P], "Q": [Q], "D": D, "orig": (a - a0 * c, b, c, d)}

        def quotient(n, self_):
            # frac_{n-1} = (P + sqrt D)/Q; x_n = 1/frac_{n-1} = (-P + sqrt D)/Q2
            st = self_._state
            P, Q = st["P"][n - 1], st["Q"][n - 1]
            Q2 = (D - P * P) // Q
            an = _floor_surd(-P, Q2, D)
            st["P"].append(-P - an * Q2)
            st["Q"].append(Q2)
            return an

        lab = label or f"({a}+{b}*sqrt({d}))/{c}"
        return cls("surd", quotient, label=lab, state=state)

    @classmethod
    def from_quotients(cls, quotients, period=(), label=None):
        """``[0; q_1, ..., q_k, (period repeated)]``; finite lists are rational."""
        quotients = [int(a) for a in quotients]
        period = [int(a) for a in period]
        if any(a < 1 for a in quotients + period):
            raise ValueError("partial quotients must be >= 1")

        def quotient(n, self_):
            if n <= len(quotients):
                return quotients[n - 1]
            if not period:
                raise RationalityError(
                    f"quotient stream terminates after a_{len(quotients)}"
                )
            return period[(n - len(quotients) - 1) % len(period)]

        lab = label or "[0;" + ",".join(map(str, quotients)) + (
            ",(" + ",".join(map(str, period)) + ")" if period else ""
        ) + "]"
        return cls("quotients", quotient, label=lab)

    @classmethod
    def from_float(cls, value, radius=None, label=None):
        """Seed from a float or decimal string, reduced mod 1.

        ``radius`` is the absolute uncertainty; it defaults to half an ulp
        for floats and half a unit of the last digit for decimal strings.
        Only quotients shared by both ends of the uncertainty interval are
        returned; asking for more raises :class:`PrecisionError`.
        """
        if isinstance(value, str):
            text = value.strip()
            center = Fraction(text)
            if radius is None:
                digits = len(text.split(".")[1]) if "." in text else 0
                radius = Fraction(1, 2 * 10 ** digits)
        else:
            value = float(value)
            center = Fraction(value)
            if radius is None:
                radius = Fraction(math.ulp(value)) / 2
        radius = Fraction(radius)
        center -= math.floor(center)
        lo, hi = center - radius, center + radius
        if lo <= 0 or hi >= 1:
            raise PrecisionError("uncertainty interval reaches an integer", 0)

        def cf(x):
            while True:
                if x == 0:
                    return
                x = 1 / x
                a = math.floor(x)
                yield a
                x -= a

        lo_it, hi_it = cf(lo), cf(hi)
        shared = []

        def quotient(n, self_):
            while len(shared) < n:
                a1 = next(lo_it, None)
                a2 = next(hi_it, None)
                if a1 is None or a1 != a2:
                    raise PrecisionError(
                        f"float seed certifies only {len(shared)} partial quotients",
                        len(shared),
                    )
                shared.append(a1)
            return shared[n - 1]

        return cls(
            "float", quotient, label=label or str(value),
            center=center, radius=radius,
        )

    # -- stream access ----------------------------------------------------

    def quotient(self, n):
        """Partial quotient ``a_n`` (``n >= 1``; ``a_0 = 0``)."""
        self._extend(n)
        return self._a[n]

    def convergent(self, n):
        """``(p_n, q_n)`` as exact integers."""
        self._extend(n)
        return self._p[n], self._q[n]

    def _extend(self, n):
        if n < len(self._a):
            return
        with self._lock:
            while len(self._a) <= n:
                k = len(self._a)
                a = self._quotient_fn(k, self)
                if not isinstance(a, int) or a < 1:
                    raise ValueError(f"invalid partial quotient a_{k}={a!r}")
                p_prev2 = self._p[k - 2] if k >= 2 else 1
                q_prev2 = self._q[k - 2] if k >= 2 else 0
                self._p.append(a * self._p[k - 1] + p_prev2)
                self._q.append(a * self._q[k - 1] + q_prev2)
                self._a.append(a)

    # -- values -----------------------------------------------------------

    def complete_quotient(self, n, dps=30):
        """Complete quotient ``x_n = [a_n; a_{n+1}, ...]`` as an mpf."""
        with mpmath.workdps(dps):
            if self.kind == "surd":
                self._extend(n)
                st = self._state
                P, Q = st["P"][n - 1], st["Q"][n - 1]
                # x_{n} = 1/frac_{n-1} where frac_{n-1} = (P + sqrt D)/Q
                return mpmath.mpf(Q) / (P + mpmath.sqrt(st["D"]))
            # tail expansion until the truncation error is below 10^-dps
            tol = mpmath.mpf(10) ** (-dps - 2)
            k = n
            pp, qq = 1, 0
            p, q = self.quotient(k), 1
            while True:
                k += 1
                a = self.quotient(k)
                pp, p = p, a * p + pp
                qq, q = q, a * q + qq
                if mpmath.mpf(1) / (mpmath.mpf(q) * qq) < tol * (mpmath.mpf(p) / q):
                    return mpmath.mpf(p) / q

    def value(self, dps=30):
        """Value in ``(0, 1)`` to ``dps`` significant digits (mpf)."""
        with mpmath.workdps(dps + 5):
            if self.kind == "surd":
                a, b, c, d = self._state["orig"]
                return (a + b * mpmath.sqrt(d)) / c
            if self.kind == "float":
                c = self._meta["center"]
                return mpmath.mpf(c.numerator) / c.denominator
            return 1 / self.complete_quotient(1, dps + 5)

    def __float__(self):
        return float(self.value(20))

    def __repr__(self):
        return f"RotationNumber({self.label})"


def golden_mean():
    """``(sqrt 5 - 1)/2 = [0; 1, 1, 1, ...]``."""
    return RotationNumber.from_surd(-1, 1, 2, 5, label="golden")


def liouville_stream(growth, label=None):
    """Rotation number whose partial quotients are ``a_n = growth(n)``."""

    def quotient(n, self_):
        a = int(growth(n))
        if a < 1:
            raise ValueError(f"growth({n}) = {a} < 1")
        return a

    return RotationNumber("stream", quotient, label=label or "stream")


def non_brjuno_stream(rate=10, prefix=0):
    """Stream with ``q_{n+1} >= exp(rate * q_n)``; each Brjuno term is ``>= rate``.

    The quotients are powers of two, ``a_{n+1} = 2**ceil(rate*q_n/ln 2)``,
    after ``prefix`` leading quotients equal to 1 (a golden-mean start keeps
    the binary64 value away from small-denominator rationals).
    Only the first few are materializable; later ones raise
    :class:`PrecisionError` but :func:`brjuno_partial_sum` still evaluates
    their terms in log form.
    """
    max_bits = 1 << 24

    def exponent(q):
        with mpmath.workprec(q.bit_length() + 80):
            return int(mpmath.ceil(rate * mpmath.mpf(q) / mpmath.log(2)))

    def quotient(n, self_):
        if n <= prefix:
            return 1
        q_prev = self_._q[n - 1]
        if q_prev.bit_length() > 64:
            raise PrecisionError(
                f"a_{n} = 2**ceil({rate}*q_{n-1}/ln2) is not materializable", n - 1
            )
        k = exponent(q_prev)
        if k > max_bits:
            raise PrecisionError(f"a_{n} has {k} bits", n - 1)
        return 1 << k

    label = f"non_brjuno({rate})" if not prefix else f"non_brjuno({rate},{prefix})"
    return RotationNumber("non_brjuno", quotient, label=label, rate=rate, prefix=prefix)


_SURD_RE = re.compile(
    r"^\(\s*([+-]?\d+)\s*([+-])\s*(\d*)\s*\*?\s*sqrt\(\s*(\d+)\s*\)\s*\)\s*/\s*([+-]?\d+)$"
)


def parse_alpha(spec):
    """Parse a command-line alpha specification.

    Accepted forms: ``golden``; ``(a+b*sqrt(d))/c``; quotient lists
    ``[1,2,2]`` or ``[1,(2)]`` (parenthesized tail repeats); decimals.
    """
    if isinstance(spec, RotationNumber):
        return spec
    text = str(spec).strip().replace(" ", "")
    if text in ("golden", "phi"):
        return golden_mean()
    m = _SURD_RE.match(text)
    if m:
        a, sgn, b, d, c = m.groups()
        b = int(b) if b else 1
        if sgn == "-":
            b = -b
        return RotationNumber.from_surd(int(a), b, int(c), int(d), label=text)
    if text.startswith("[") and text.endswith("]"):
        body = text[1:-1]
        if body.startswith("0;"):
            body = body[2:]
        period = ()
        pm = re.search(r"\(([\d,]*)\)$", body)
        if pm:
            period = [int(t) for t in pm.group(1).split(",") if t]
            body = body[: pm.start()].rstrip(",")
        head = [int(t) for t in body.split(",") if t]
        return RotationNumber.from_quotients(head, period, label=text)
    if text.startswith("non_brjuno"):
        m2 = re.match(r"non_brjuno(?:\((\d+)(?:\s*,\s*(\d+))?\))?$", text)
        if not m2:
            raise ValueError(f"cannot parse {spec!r}")
        return non_brjuno_stream(int(m2.group(1) or 10), int(m2.group(2) or 0))
    try:
        Fraction(text)
    except ValueError:
        raise ValueError(f"cannot parse alpha {spec!r}") from None
    return RotationNumber.from_float(text, label=text)


def convergents(alpha, count):
    """First ``count`` convergents ``(p_n, q_n)``, ``n = 0..count-1``."""
    if count < 1:
        raise ValueError("count must be >= 1")
    return [alpha.convergent(n) for n in range(count)]


def signed_error(alpha, n, rtol=1e-8):
    """``q_n * alpha - p_n`` as a float, free of cancellation.

    Uses ``q_n alpha - p_n = (-1)^n / (q_n x_{n+1} + q_{n-1})`` with the
    complete quotient ``x_{n+1}``.  For float seeds the result is computed from
    the interval center and certified against ``rtol``.
    """
    p, q = alpha.convergent(n)
    if alpha.kind == "float":
        c, r = alpha._meta["center"], alpha._meta["radius"]
        val = q * c - p
        err = q * r
        if val == 0 or err > rtol * abs(val):
            raise PrecisionError(
                f"signed error at n={n} not certified to rtol={rtol}",
                max(n - 1, 0),
            )
        return float(val)
    q_prev = alpha.convergent(n - 1)[1] if n >= 1 else 0
    digits = 30 + len(str(q))
    with mpmath.workdps(digits):
        x = alpha.complete_quotient(n + 1, digits)
        val = (-1) ** n / (q * x + q_prev)
        return float(val)


def _log_ratio(num_log, q):
    """``num_log / q`` for a possibly huge integer ``q``."""
    if q.bit_length() < 1000:
        return num_log / q
    if num_log <= 0:
        return 0.0
    return math.exp(math.log(num_log) - math.log(q))


def brjuno_partial_sum(alpha, N):
    """``sum_{n=0}^{N} log(q_{n+1}) / q_n`` using exact big integers.

    For :func:`non_brjuno_stream` numbers, terms whose ``q_{n+1}`` is not
    materializable are evaluated in log form: the term is
    ``rate + delta`` with ``0 <= delta < (ln 2 + log(2 q_n)) / q_n``, and
    ``delta`` is below binary64 resolution whenever that branch is taken.
    """
    if N < 0:
        raise ValueError("N must be >= 0")
    total = 0.0
    for n in range(N + 1):
        try:
            q_next = alpha.convergent(n + 1)[1]
            q = alpha.convergent(n)[1]
            total += _log_ratio(math.log(q_next), q)
        except PrecisionError:
            if alpha.kind != "non_brjuno":
                raise
            total += float(alpha._meta["rate"])
    return total


def surd_exact_checks(alpha, n):
    """Exact checks at index ``n`` for surd-backed alpha.

    Returns a dict with the determinant identity, the bound
    ``|q_n alpha - p_n| < 1/q_{n+1}`` and the sign ``(-1)^n``, all decided in
    integer arithmetic on ``(a + b sqrt d)/c``.
    """
    if alpha.kind != "surd":
        raise ValueError("exact checks need a surd-backed alpha")
    a, b, c, d = alpha._state["orig"]
    p, q = alpha.convergent(n)
    q1 = alpha.convergent(n + 1)[1]
    p_prev, q_prev = alpha.convergent(n - 1) if n >= 1 else (1, 0)
    # c * (q alpha - p) = (q a - p c) + q b sqrt d ; sign of c matters
    x, y = q * a - p * c, q * b
    sgn = _sign_surd(x, y, d) * (1 if c > 0 else -1)
    # |q alpha - p| < 1/q1  <=>  |c| * q1 * |q alpha - p| < |c|
    s = sgn * (1 if c > 0 else -1)  # sign of x + y sqrt d
    xa, ya = s * x * q1, s * y * q1
    bound = _sign_surd(abs(c) - xa, -ya, d) > 0
    return {
        "n": n,
        "determinant": q * p_prev - p * q_prev,
        "determinant_ok": q * p_prev - p * q_prev == (-1) ** n,
        "bound_ok": bound,
        "sign": sgn,
        "sign_ok": sgn == (-1) ** n,
    }


def binary64_horizon(alpha, max_terms=64):
    """Largest convergent denominator that ``float(alpha)`` still resolves.

    Returns ``(q, exact)``: the last ``q_n`` shared by the continued fractions
    of ``alpha`` and of its binary64 value, and whether that value *is*
    ``p_n/q_n`` (then any dynamics run in binary64 sees a rational rotation).
    """
    fr = Fraction(float(alpha))
    num, den = fr.numerator, fr.denominator
    p0, q0, p1, q1 = 1, 0, num // den, 1
    num, den = den, num - (num // den) * den
    last_q = 1
    for n in range(max_terms):
        try:
            pa, qa = alpha.convergent(n)
        except PrecisionError:
            break
        if (pa, qa) != (p1, q1):
            break
        last_q = qa
        if den == 0:
            return last_q, True
        a = num // den
        p0, q0, p1, q1 = p1, q1, a * p1 + p0, a * q1 + q0
        num, den = den, num - a * den
    return last_q, False
