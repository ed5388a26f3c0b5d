"""Analytic circle-diffeomorphism lifts and the real estimates on their iterates.

Lifts act on real or complex numpy arrays.  Iterates are computed by
sequential composition with the integer part split off at every step, so
that ``g^q(x) - x - p`` keeps full relative precision for large ``q``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numba
import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .arithmetic import RotationNumber, parse_alpha, signed_error
from .errors import (
    BudgetError,
    CombinatoricsError,
    DomainError,
    EstimateViolation,
    PrecisionError,
    RefinementError,
    RotationMismatchError,
)

TWO_PI = 2.0 * math.pi
DEFAULT_Q_CAP = 10**6


@numba.njit(cache=True)
def _trig_orbit(x, j, omega, c, d):
    n = x.size
    frac = np.empty(n)
    count = np.empty(n, dtype=np.int64)
    K = c.size
    for i in range(n):
        f = math.floor(x[i])
        cur = x[i] - f
        cnt = np.int64(f)
        for _ in range(j):
            v = cur + omega
            for k in range(K):
                w = 2.0 * math.pi * (k + 1) * cur
                v += c[k] * math.sin(w) + d[k] * math.cos(w)
            f = math.floor(v)
            cur = v - f
            cnt += np.int64(f)
        frac[i] = cur
        count[i] = cnt
    return frac, count


class CircleLift:
    """Base class: a lift ``g`` with ``g(z + 1) = g(z) + 1``."""

    band_halfwidth = 0.0

    def __call__(self, z):
        return self.derivatives(z, order=0)[0]

    def derivative(self, z):
        return self.derivatives(z, order=1)[1]

    def derivatives(self, z, order=3):
        """Tuple ``(g, Dg, D2g, D3g)`` truncated to ``order``."""
        raise NotImplementedError

    def shifted(self, domega):
        """The lift ``g + domega``."""
        raise NotImplementedError

    def inverse(self, x, tol=1e-15, maxiter=60):
        """Real inverse by safeguarded Newton iteration."""
        x = np.asarray(x, dtype=float)
        y = x - (self(x) - x)
        for _ in range(maxiter):
            gy, dgy = self.derivatives(y, order=1)
            step = (gy - x) / dgy
            y = y - step
            if np.all(np.abs(step) <= tol * (1.0 + np.abs(y))):
                break
        return y

    def is_rigid(self):
        return False


class TrigLift(CircleLift):
    """``x + omega + sum_k c_k sin(2 pi k x) + d_k cos(2 pi k x)``.

    ``band_halfwidth`` is the claimed half-width of the band of univalence;
    the sufficient condition ``sum 2 pi k (|c_k| + |d_k|) e^{2 pi k Delta} < 1``
    is enforced at construction.
    """

    def __init__(self, omega, c=(), d=(), band_halfwidth=0.0, name=None):
        c = np.atleast_1d(np.asarray(c, dtype=float))
        d = np.atleast_1d(np.asarray(d, dtype=float))
        K = max(c.size, d.size)
        self.c = np.zeros(K)
        self.d = np.zeros(K)
        self.c[: c.size] = c
        self.d[: d.size] = d
        self.omega = float(omega)
        self.band_halfwidth = float(band_halfwidth)
        self.name = name or "trig"
        self.k = np.arange(1, K + 1, dtype=float)
        # drop trailing zero harmonics
        nz = np.nonzero((self.c != 0) | (self.d != 0))[0]
        keep = nz[-1] + 1 if nz.size else 0
        self.c, self.d, self.k = self.c[:keep], self.d[:keep], self.k[:keep]
        if self.band_halfwidth > 0 and self.univalence_margin() >= 1.0:
            raise DomainError(
                f"univalence condition fails on B_{self.band_halfwidth}: "
                f"sum = {self.univalence_margin():.4g} >= 1"
            )
        if self.k.size:
            xs = np.arange(4096 * self.k.size) / (4096 * self.k.size)
            if np.min(self.derivative(xs)) <= 0:
                raise DomainError("Dg is not positive: not a diffeomorphism")

    def univalence_margin(self):
        k = self.k
        return float(
            np.sum(TWO_PI * k * (np.abs(self.c) + np.abs(self.d))
                   * np.exp(TWO_PI * k * self.band_halfwidth))
        )

    def is_rigid(self):
        return self.k.size == 0

    def shifted(self, domega):
        return TrigLift(self.omega + domega, self.c, self.d,
                        self.band_halfwidth, self.name)

    def derivatives(self, z, order=3):
        z = np.asarray(z)
        if self.k.size == 0:
            out = [z + self.omega, np.ones_like(z), np.zeros_like(z), np.zeros_like(z)]
            return tuple(out[: order + 1])
        if self.k.size == 1:
            w = TWO_PI * z
            s, co = np.sin(w), np.cos(w)
            c, d = self.c[0], self.d[0]
            out = [z + self.omega + c * s + d * co]
            if order >= 1:
                out.append(1.0 + TWO_PI * (c * co - d * s))
            if order >= 2:
                out.append(-(TWO_PI**2) * (c * s + d * co))
            if order >= 3:
                out.append(-(TWO_PI**3) * (c * co - d * s))
            return tuple(out)
        w = TWO_PI * np.multiply.outer(z, self.k)
        s, co = np.sin(w), np.cos(w)
        wk = TWO_PI * self.k
        out = [z + self.omega + s @ self.c + co @ self.d]
        if order >= 1:
            out.append(1.0 + co @ (wk * self.c) - s @ (wk * self.d))
        if order >= 2:
            out.append(-(s @ (wk**2 * self.c) + co @ (wk**2 * self.d)))
        if order >= 3:
            out.append(-(co @ (wk**3 * self.c) - s @ (wk**3 * self.d)))
        return tuple(out)

    def __repr__(self):
        return f"TrigLift({self.name}, omega={self.omega!r}, K={self.k.size})"


class Composition(CircleLift):
    """``maps[-1] o ... o maps[0]`` (``maps[0]`` is applied first)."""

    def __init__(self, maps, name=None):
        self.maps = list(maps)
        self.band_halfwidth = min(m.band_halfwidth for m in self.maps)
        self.name = name or "compose"

    def shifted(self, domega):
        return Composition(self.maps[:-1] + [self.maps[-1].shifted(domega)], self.name)

    def is_rigid(self):
        return all(m.is_rigid() for m in self.maps)

    def derivatives(self, z, order=3):
        z = np.asarray(z)
        g = z
        d1 = np.ones_like(z)
        d2 = np.zeros_like(z)
        d3 = np.zeros_like(z)
        for m in self.maps:
            f0, f1, f2, f3 = m.derivatives(g, order=3)
            # Faa di Bruno up to third order
            d3 = f3 * d1**3 + 3.0 * f2 * d1 * d2 + f1 * d3
            d2 = f2 * d1**2 + f1 * d2
            d1 = f1 * d1
            g = f0
        return (g, d1, d2, d3)[: order + 1]


def translation(omega):
    """Rigid translation ``T_omega``."""
    return TrigLift(omega, name="translation", band_halfwidth=1.0)


def arnold(omega, eps, band_halfwidth=0.0):
    """``x + omega + (eps / 2 pi) sin(2 pi x)``."""
    return TrigLift(omega, c=[eps / TWO_PI], band_halfwidth=band_halfwidth,
                    name=f"arnold(eps={eps})")


def mobius(a, omega=0.0, band_halfwidth=0.0, tol=1e-18):
    """Lift of the circle Blaschke map ``w -> e^{2 pi i omega} (w + a)/(1 + conj(a) w)``.

    Expanded as a trigonometric series truncated once ``|a|^k / k < tol``.
    """
    a = complex(a)
    r = abs(a)
    if r >= 1:
        raise DomainError("|a| must be < 1")
    K = 1
    while r > 0 and r**K / K > tol:
        K += 1
    k = np.arange(1, K + 1)
    ak = a ** k
    sgn = (-1.0) ** (k + 1)
    c = -sgn * ak.real / (math.pi * k)
    d = sgn * ak.imag / (math.pi * k)
    return TrigLift(omega, c, d, band_halfwidth=band_halfwidth, name=f"mobius(a={a})")


def parse_map(spec, band_halfwidth=None):
    """Parse ``rotation[:omega=..]``, ``arnold:eps=..[,omega=..]``,
    ``trig:omega=..,c=1e-3;2e-4,d=..``, ``mobius:a=0.2+0.1j``.

    ``omega`` defaults to 0; tune it with :func:`tune_parameter`.
    """
    if isinstance(spec, CircleLift):
        return spec
    name, _, rest = str(spec).partition(":")
    kw = {}
    for item in filter(None, re.split(r",(?=[a-z]+=)", rest)):
        key, _, val = item.partition("=")
        kw[key.strip()] = val.strip()
    omega = float(kw.get("omega", 0.0))
    delta = band_halfwidth if band_halfwidth is not None else float(kw.get("delta", 0.0))
    name = name.strip()
    if name in ("rotation", "translation"):
        return translation(omega)
    if name == "arnold":
        return arnold(omega, float(kw["eps"]), delta)
    if name == "trig":
        c = [float(t) for t in kw.get("c", "").split(";") if t]
        d = [float(t) for t in kw.get("d", "").split(";") if t]
        return TrigLift(omega, c, d, delta)
    if name == "mobius":
        return mobius(complex(kw["a"].replace(" ", "")), omega, delta)
    raise ValueError(f"unknown map family {name!r}")


# -- iteration ---------------------------------------------------------------


def orbit_mod1(g, x, j):
    """``g^j(x)`` split as ``(frac, count)`` with ``g^j(x) = frac + count``.

    Works on real and complex arrays (the integer part of the real part is
    split off).  ``j`` may be negative for real input (inverse iteration).
    """
    if isinstance(g, TrigLift) and j >= 0 and not np.iscomplexobj(x):
        xa = np.asarray(x, dtype=float)
        frac, count = _trig_orbit(np.ascontiguousarray(xa.ravel()), int(j),
                                  g.omega, g.c, g.d)
        return frac.reshape(xa.shape), count.reshape(xa.shape)
    x = np.array(x, dtype=complex if np.iscomplexobj(x) else float, copy=True)
    count = np.floor(x.real)
    x = x - count
    step = g if j >= 0 else g.inverse
    for _ in range(abs(int(j))):
        x = step(x)
        k = np.floor(x.real)
        x = x - k
        count = count + k
    return x, count.astype(np.int64)


def iterate(g, x, j):
    """``g^j(x)`` as a plain lift value."""
    frac, count = orbit_mod1(g, x, j)
    return frac + count


def lift_diff(a, b):
    """Difference of two ``(frac, count)`` lift values."""
    return (a[0] - b[0]) + (a[1] - b[1])


def displacement(g, x, q, p):
    """``g^q(x) - x - p`` evaluated without cancellation in the integer part."""
    x = np.asarray(x, dtype=float)
    frac, count = orbit_mod1(g, x, q)
    x0 = np.floor(x)
    return (frac - (x - x0)) + (count - x0 - p)


def orbit_with_derivative(g, x, j):
    """Real orbit of ``x`` of length ``j + 1`` (as ``(frac, count)`` arrays
    with leading axis ``j + 1``) together with ``Dg^l(x)``."""
    x = np.asarray(x, dtype=float)
    shape = (j + 1,) + x.shape
    fr = np.empty(shape)
    ct = np.empty(shape, dtype=np.int64)
    dg = np.empty(shape)
    count = np.floor(x)
    cur = x - count
    d = np.ones_like(x)
    fr[0], ct[0], dg[0] = cur, count, d
    for l in range(1, j + 1):
        val, der = g.derivatives(cur, order=1)
        k = np.floor(val)
        cur = val - k
        count = count + k
        d = d * der
        fr[l], ct[l], dg[l] = cur, count, d
    return fr, ct, dg


# -- rotation number ---------------------------------------------------------


@dataclass
class RotationBracket:
    lo: float
    hi: float
    exact: tuple | None = None  # (p, q) when locked at a rational
    iterations: int = 0

    @property
    def mid(self):
        if self.exact is not None:
            return self.exact[0] / self.exact[1]
        return 0.5 * (self.lo + self.hi)


def _sign_test(g, p, q, xs):
    """+1 if rho >= p/q, -1 if rho <= p/q, 0 if rho == p/q (sign change)."""
    m = displacement(g, xs, q, p)
    if np.all(m > 0):
        return 1
    if np.all(m < 0):
        return -1
    return 0


def rotation_bracket(g, tol=1e-10, budget=10**8, probes=16):
    """Certified bracket of the rotation number by Stern-Brocot descent.

    Uses the classical criterion: ``rho > p/q`` forces ``g^q(x) > x + p`` for
    every ``x``, so the sign of ``g^q - id - p`` at any point decides on which
    side of ``p/q`` the rotation number lies, and a sign change means
    ``rho = p/q``.
    """
    xs = (np.arange(probes) + 0.5) / probes
    used = 0
    k = int(math.floor(np.min(g(xs) - xs)))
    while _sign_test(g, k, 1, xs) < 0:
        k -= 1
    while _sign_test(g, k + 1, 1, xs) > 0:
        k += 1
    lp, lq, rp, rq = k, 1, k + 1, 1
    s = _sign_test(g, k, 1, xs)
    if s == 0:
        return RotationBracket(k, k, (k, 1), used)
    s = _sign_test(g, k + 1, 1, xs)
    if s == 0:
        return RotationBracket(k + 1, k + 1, (k + 1, 1), used)

    def test(p, q):
        nonlocal used
        used += q * probes
        if used > budget:
            raise BudgetError(
                f"rotation number budget {budget} exhausted",
                bracket=(lp / lq, rp / rq),
            )
        return _sign_test(g, p, q, xs)

    while rp / rq - lp / lq > 2 * tol:
        s = test(lp + rp, lq + rq)
        if s == 0:
            p, q = lp + rp, lq + rq
            return RotationBracket(p / q, p / q, (p, q), used)

        def cand(t):
            if s > 0:
                return lp + t * rp, lq + t * rq
            return t * lp + rp, t * lq + rq

        # gallop, then bisect, for the largest t with the same outcome
        t_good, t_bad, t = 1, None, 2
        while t_bad is None:
            r = test(*cand(t))
            if r == 0:
                p, q = cand(t)
                return RotationBracket(p / q, p / q, (p, q), used)
            if r == s:
                t_good, t = t, 2 * t
            else:
                t_bad = t
        while t_bad - t_good > 1:
            mid = (t_good + t_bad) // 2
            r = test(*cand(mid))
            if r == 0:
                p, q = cand(mid)
                return RotationBracket(p / q, p / q, (p, q), used)
            if r == s:
                t_good = mid
            else:
                t_bad = mid
        near, far = cand(t_good), cand(t_good + 1)
        if s > 0:
            (lp, lq), (rp, rq) = near, far
        else:
            (rp, rq), (lp, lq) = near, far
    return RotationBracket(lp / lq, rp / rq, None, used)


def rotation_number(g, tol=1e-10, budget=10**8):
    """Rotation number within ``tol`` (certified bracket midpoint)."""
    if g.is_rigid():
        return float(g.omega) if hasattr(g, "omega") else float(iterate(g, 0.0, 1))
    return rotation_bracket(g, tol, budget).mid


def orbit_average(g, N, x=0.0):
    """Brute-force estimate ``(g^N(x) - x) / N``; error below ``1/N``."""
    frac, count = orbit_mod1(g, np.array([x]), N)
    return float(((frac[0] - x) + count[0]) / N)


def compare_with(g, alpha, tol, x=0.0):
    """Compare ``rho(g)`` with ``alpha``: returns -1, +1, or 0 when
    ``|rho - alpha| <= tol`` is certified through convergents of alpha."""
    cur = np.array([x])
    count = np.zeros(1)
    done = 0
    n = 1
    while True:
        p, q = alpha.convergent(n)
        q_next = alpha.convergent(n + 1)[1]
        for _ in range(q - done):
            cur = g(cur)
            k = np.floor(cur)
            cur = cur - k
            count = count + k
        done = q
        m = float((cur[0] - x) + (count[0] - p))
        want = (-1) ** n
        if m == 0.0 or (m > 0) != (want > 0):
            # rho on the far side of p_n/q_n relative to alpha
            return 1 if want < 0 else -1
        if 1.0 / (q * q_next) <= tol:
            return 0
        n += 1


def tune_parameter(family, target, tol=1e-9, omega_bracket=None, maxiter=200):
    """Find ``omega`` with ``|rho(family(omega)) - target| <= tol`` by bisection.

    ``family(omega)`` must have rotation number non-decreasing in ``omega``.
    """
    if not isinstance(target, RotationNumber):
        target = parse_alpha(target)
    alpha = float(target.value(20))
    if omega_bracket is None:
        xs = np.linspace(0, 1, 257)
        g0 = family(0.0)
        spread = float(np.max(np.abs(g0(xs) - xs)))
        omega_bracket = (alpha - spread - 0.01, alpha + spread + 0.01)
    lo, hi = omega_bracket
    for _ in range(maxiter):
        mid = 0.5 * (lo + hi)
        c = compare_with(family(mid), target, tol)
        if c == 0:
            return family(mid)
        if c < 0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 4 * np.finfo(float).eps * max(1.0, abs(mid)):
            raise BudgetError(
                "omega bracket collapsed before certification "
                "(mode-locking plateau or precision floor)",
                bracket=(lo, hi),
            )
    raise BudgetError("tune_parameter did not converge", bracket=(lo, hi))


# -- renormalization data ----------------------------------------------------


@dataclass
class RenormData:
    n: int
    p: int
    q: int
    xs: np.ndarray
    m: np.ndarray
    dgn: np.ndarray
    M: float
    m_min: float
    M_raw: float
    m_min_raw: float
    lipschitz: float
    sign: int

    @property
    def grid(self):
        return self.xs.size


def renorm_data(g, alpha, n, grid=None, q_cap=DEFAULT_Q_CAP):
    """Sample ``m_n(x) = g^{q_n}(x) - x - p_n`` on a uniform grid of ``[0, 1)``."""
    p, q = alpha.convergent(n)
    if q > q_cap:
        raise DomainError(f"q_{n} = {q} exceeds the iteration cap {q_cap}")
    if grid is None:
        grid = max(2 * q, 256)
    if grid < 2 * q:
        raise ValueError(f"grid={grid} < 2 q_n = {2 * q}")
    xs = np.arange(grid) / grid
    count = np.zeros(grid)
    cur = xs.copy()
    logd = np.zeros(grid)
    for _ in range(q):
        val, der = g.derivatives(cur, order=1)
        logd += np.log(der)
        k = np.floor(val)
        cur = val - k
        count += k
    m = (cur - xs) + (count - p)
    dgn = np.exp(logd)
    want = (-1) ** n
    signs = np.sign(m)
    if not np.all(signs == want):
        bad = int(np.argmax(signs != want))
        raise RotationMismatchError(
            f"m_{n} has sign {signs[bad]:+.0f} at x={xs[bad]:.6g}, expected {want:+d}"
        )
    lip = float(np.max(np.abs(dgn - 1.0)))
    h = 1.0 / grid
    am = np.abs(m)
    M_raw, mn_raw = float(am.max()), float(am.min())
    return RenormData(
        n, p, q, xs, m, dgn,
        M=M_raw + 0.5 * lip * h,
        m_min=max(mn_raw - 0.5 * lip * h, 0.0),
        M_raw=M_raw, m_min_raw=mn_raw, lipschitz=lip, sign=want,
    )


def m_n(g, alpha, n, x):
    """``m_n`` at arbitrary points (no grid requirement)."""
    p, q = alpha.convergent(n)
    return displacement(g, x, q, p)


# -- distortion quantities ---------------------------------------------------


def _log_dg(g, x):
    return np.log(g.derivative(x))


def variation_log_derivative(g, tol=1e-12, start=1024, max_points=2**22):
    """Total variation of ``log Dg`` over one period.

    Sampled on a grid, local extrema are located as roots of ``D^2 g`` with
    Brent's method and inserted, so the sum of absolute increments is exact
    once every extremum is bracketed by the grid.  The grid is doubled until
    two successive values agree to ``tol`` (relative).
    """
    if g.is_rigid():
        return 0.0
    prev = None
    npts = start
    history = []
    while npts <= max_points:
        xs = np.arange(npts + 1) / npts
        d2 = g.derivatives(xs, order=2)[2]
        pts = [xs]
        idx = np.nonzero(np.sign(d2[:-1]) * np.sign(d2[1:]) < 0)[0]
        roots = [
            brentq(lambda t: float(g.derivatives(np.array(t), 2)[2]), xs[i], xs[i + 1],
                   xtol=1e-15)
            for i in idx
        ]
        if roots:
            pts.append(np.array(roots))
        allx = np.sort(np.concatenate(pts))
        v = float(np.sum(np.abs(np.diff(_log_dg(g, allx)))))
        history.append(v)
        if prev is not None and abs(v - prev) <= tol * max(1.0, abs(v)):
            return v
        prev = v
        npts *= 2
    raise RefinementError("variation of log Dg did not converge", history[-2:])


def _refined_sup(fun, tol, start, max_points):
    prev = None
    npts = start
    history = []
    while npts <= max_points:
        xs = np.arange(npts) / npts
        vals = np.abs(fun(xs))
        i = int(np.argmax(vals))
        h = 1.0 / npts
        res = minimize_scalar(
            lambda t: -abs(float(fun(np.array([t]))[0])),
            bounds=(xs[i] - h, xs[i] + h), method="bounded",
            options={"xatol": 1e-13},
        )
        v = max(float(vals[i]), -float(res.fun))
        history.append(v)
        if prev is not None and abs(v - prev) <= tol * max(1.0, v):
            return v, float(res.x if -res.fun >= vals[i] else xs[i])
        prev = v
        npts *= 2
    raise RefinementError("sup did not converge", history[-2:])


def schwarzian(g, x, projective=False):
    """Schwarzian ``D^3g/Dg - 3/2 (D^2g/Dg)^2``.

    With ``projective=True`` the circle-invariant variant
    ``Sg + 2 pi^2 (Dg^2 - 1)`` is returned; it vanishes on lifts of Moebius maps
    of the circle, whereas the plain Schwarzian of such a lift equals
    ``2 pi^2 (1 - Dg^2)``.
    """
    _, d1, d2, d3 = g.derivatives(x, order=3)
    s = d3 / d1 - 1.5 * (d2 / d1) ** 2
    if projective:
        s = s + 2.0 * math.pi**2 * (d1**2 - 1.0)
    return s


def schwarzian_sup(g, projective=False, tol=1e-10, start=1024, max_points=2**20):
    """``S = sup |Sg|`` over a refinement-converged grid."""
    if g.is_rigid():
        return 0.0
    return _refined_sup(lambda x: schwarzian(g, x, projective), tol, start, max_points)[0]


def nonlinearity_sup(g, tol=1e-10, start=1024, max_points=2**20):
    """``sup_R |D log Dg|``."""
    if g.is_rigid():
        return 0.0

    def f(x):
        _, d1, d2 = g.derivatives(x, order=2)
        return d2 / d1

    return _refined_sup(f, tol, start, max_points)[0]


# -- verification reports ----------------------------------------------------


@dataclass
class CheckReport:
    """JSON-able verification report ``{check, n, lhs_max, rhs, ratio, witnesses}``."""

    check: str
    n: int
    lhs_max: float
    rhs: float
    ratio: float
    witnesses: dict = field(default_factory=dict)
    status: str = "pass"
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        d = {
            "check": self.check, "n": self.n, "lhs_max": self.lhs_max,
            "rhs": self.rhs, "ratio": self.ratio, "witnesses": self.witnesses,
            "status": self.status,
        }
        d.update(self.extra)
        return d


def _mod_intervals(lo, hi):
    """Reduce intervals ``[lo, hi]`` mod 1, splitting those that wrap."""
    shift = np.floor(lo)
    lo, hi = lo - shift, hi - shift
    wrap = hi > 1.0
    los = np.concatenate([lo, np.zeros(wrap.sum())])
    his = np.concatenate([np.where(wrap, 1.0, hi), hi[wrap] - 1.0])
    ids = np.concatenate([np.arange(lo.size), np.nonzero(wrap)[0]])
    return los, his, ids


def check_interval_combinatorics(g, alpha, n, x=0.0, tol=1e-12):
    """Disjointness of ``g^j(I_n(x))`` and the cover multiplicity of ``g^j(J_n(x))``,
    ``0 <= j < q_{n+1}``, all modulo 1.

    Returns a dict with ``disjoint``, ``multiplicity`` (histogram of lengths
    per multiplicity) and ``covers``.  Raises :class:`CombinatoricsError` on
    overlapping ``I`` intervals, multiplicity above two or a gap in the cover.
    """
    p, q = alpha.convergent(n)
    q1 = alpha.convergent(n + 1)[1]
    x = float(x)
    back = orbit_mod1(g, np.array([x]), -q)  # g^{-q_n}(x)
    start_back = float(back[0][0] + back[1][0]) + p  # g_n^{-1}(x)
    # orbit of x for j = 0 .. q1 + q - 1, and of g_n^{-1}(x) for j = 0 .. q1 - 1
    L = q1 + q
    fr = np.empty(L)
    ct = np.empty(L)
    cur, cnt = x - math.floor(x), math.floor(x)
    for j in range(L):
        fr[j], ct[j] = cur, cnt
        v = float(g(np.array([cur]))[0])
        k = math.floor(v)
        cur, cnt = v - k, cnt + k
    frb = np.empty(q1)
    ctb = np.empty(q1)
    cur, cnt = start_back - math.floor(start_back), math.floor(start_back)
    for j in range(q1):
        frb[j], ctb[j] = cur, cnt
        v = float(g(np.array([cur]))[0])
        k = math.floor(v)
        cur, cnt = v - k, cnt + k
    # I_n(x_j) = [x_j, x_{j+q} - p]; lengths |m_n(x_j)|
    mj = (fr[q:q + q1] - fr[:q1]) + (ct[q:q + q1] - ct[:q1] - p)
    lo_i = fr[:q1] + np.minimum(mj, 0.0)
    hi_i = fr[:q1] + np.maximum(mj, 0.0)
    los, his, ids = _mod_intervals(lo_i, hi_i)
    order = np.argsort(los, kind="stable")
    los, his, ids = los[order], his[order], ids[order]
    overlap = his[:-1] - los[1:] > tol
    wrap_overlap = his[-1] - (los[0] + 1.0) > tol if los.size > 1 else False
    disjoint = not overlap.any() and not wrap_overlap
    witness = None
    if not disjoint:
        i = int(np.argmax(overlap)) if overlap.any() else -1
        witness = (int(ids[i]), int(ids[(i + 1) % ids.size]))
    # J_n(x_j) = [g^j(g_n^{-1} x), x_{j+q} - p]
    left = frb + (ctb - ct[:q1])
    right = fr[q:q + q1] + (ct[q:q + q1] - ct[:q1] - p)
    lo_j = np.minimum(left, right)
    hi_j = np.maximum(left, right)
    jl, jh, _ = _mod_intervals(lo_j, hi_j)
    events = np.concatenate([jl, jh])
    deltas = np.concatenate([np.ones(jl.size), -np.ones(jh.size)])
    order = np.lexsort((-deltas, events))
    events, deltas = events[order], deltas[order]
    pts = np.concatenate([[0.0], events, [1.0]])
    mult = np.concatenate([[0], np.cumsum(deltas)])
    lengths = np.diff(pts)
    hist = {}
    for mlt, ln in zip(mult.astype(int), lengths):
        if ln > tol:
            hist[int(mlt)] = hist.get(int(mlt), 0.0) + float(ln)
    covers = min(hist) >= 1 if hist else False
    report = {
        "check": "comb", "n": n, "x": x, "q_next": q1, "disjoint": bool(disjoint),
        "multiplicity": {str(k): v for k, v in sorted(hist.items())},
        "covers": bool(covers), "witness": witness,
        "sum_lengths": float(np.sum(np.abs(mj))),
    }
    if not disjoint:
        raise CombinatoricsError(f"I_{n} iterates overlap: pair {witness}", witness)
    if max(hist) > 2 or not covers:
        raise CombinatoricsError(
            f"J_{n} cover multiplicities {sorted(hist)} outside {{1, 2}}", report
        )
    return report


def _sample_points(samples):
    return (np.arange(samples) + 0.5) / samples


def check_schwarzian_estimate(g, alpha, n, samples=100, V=None, S=None, renorm=None):
    """``|S g^j(x)| <= M_n e^{2V} S / |I_n(x)|^2`` for ``0 <= j <= q_{n+1}``."""
    q1 = alpha.convergent(n + 1)[1]
    renorm = renorm or renorm_data(g, alpha, n)
    V = variation_log_derivative(g) if V is None else V
    S = schwarzian_sup(g) if S is None else S
    xs = _sample_points(samples)
    mx = np.abs(m_n(g, alpha, n, xs))
    rhs = renorm.M * math.exp(2 * V) * S / mx**2
    cur = xs.copy()
    dj = np.ones_like(xs)
    sj = np.zeros_like(xs)
    worst = np.zeros_like(xs)
    worst_j = np.zeros(samples, dtype=int)
    for j in range(1, q1 + 1):
        _, d1, d2, d3 = g.derivatives(cur, order=3)
        s1 = d3 / d1 - 1.5 * (d2 / d1) ** 2
        sj = s1 * dj**2 + sj
        dj = dj * d1
        cur = g(cur)
        better = np.abs(sj) > worst
        worst = np.where(better, np.abs(sj), worst)
        worst_j = np.where(better, j, worst_j)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(rhs > 0, worst / rhs, np.where(worst > 0, np.inf, 0.0))
    i = int(np.argmax(ratios))
    rep = CheckReport(
        "schwarzian", n, float(worst.max()), float(rhs[i]), float(ratios[i]),
        {"x": float(xs[i]), "j": int(worst_j[i])},
        extra={"V": V, "S": S, "M_n": renorm.M},
    )
    if rep.ratio > 1:
        rep.status = "fail"
        raise EstimateViolation(f"Schwarzian estimate ratio {rep.ratio:.4g} > 1", rep)
    return rep


def check_iterate_nonlinearity(g, alpha, n, samples=200, V=None, S=None, renorm=None):
    """``||D log Dg^j|| <= sqrt(2S) e^V M_n^{1/2} / m_n`` for ``0 <= j <= 2 q_{n+1}``."""
    q1 = alpha.convergent(n + 1)[1]
    renorm = renorm or renorm_data(g, alpha, n)
    V = variation_log_derivative(g) if V is None else V
    S = schwarzian_sup(g) if S is None else S
    c = math.sqrt(2 * S) * math.exp(V)
    rhs = c * math.sqrt(renorm.M) / renorm.m_min if renorm.m_min > 0 else math.inf
    xs = _sample_points(samples)
    cur = xs.copy()
    dl = np.ones_like(xs)
    acc = np.zeros_like(xs)
    worst, wj, wx = 0.0, 0, float(xs[0])
    for j in range(1, 2 * q1 + 1):
        _, d1, d2 = g.derivatives(cur, order=2)
        acc = acc + (d2 / d1) * dl
        dl = dl * d1
        cur = g(cur)
        i = int(np.argmax(np.abs(acc)))
        if abs(acc[i]) > worst:
            worst, wj, wx = float(abs(acc[i])), j, float(xs[i])
    ratio = worst / rhs if rhs > 0 else (0.0 if worst == 0 else math.inf)
    rep = CheckReport("nonlin", n, worst, rhs, ratio, {"x": wx, "j": wj},
                      extra={"c": c, "M_n": renorm.M, "m_n": renorm.m_min})
    if ratio > 1:
        rep.status = "fail"
        raise EstimateViolation(f"iterate non-linearity ratio {ratio:.4g} > 1", rep)
    return rep


def check_gn_estimates(g, alpha, n, grid=None, interior=9, V=None, S=None):
    """Estimates on ``g_n = g^{q_n} - p_n``.

    Reports ``sup|log Dg_n|``, ``sup|Dg_n - 1|`` and the extreme ratios
    ``m_n(y)/m_n(x)`` over ``y`` in ``I_n(x)``.  The ratio is asserted in
    ``[1 - eps, 1 + eps]`` with ``eps = 1.5 sup|Dg_n - 1|`` only once the
    measured premise ``sup|log Dg_n| < 1/2`` holds and ``n >= 1``; otherwise
    the status is ``skipped(gate)``.  The mean-value chain
    ``|log Dg_n(x)| <= |log(m_n(g_n x)/m_n(x))| + ||D log Dg^{q_n}|| M_n`` is
    printed alongside as the audit value of the constant.
    """
    rd = renorm_data(g, alpha, n, grid)
    V = variation_log_derivative(g) if V is None else V
    S = schwarzian_sup(g) if S is None else S
    log_dgn = np.log(rd.dgn)
    sup_log = float(np.max(np.abs(log_dgn)))
    sup_d = float(np.max(np.abs(rd.dgn - 1.0)))
    ts = np.linspace(0.0, 1.0, interior)
    ys = (rd.xs[:, None] + ts[None, :] * rd.m[:, None]).ravel()
    my = m_n(g, alpha, n, ys).reshape(rd.xs.size, interior)
    ratios = my / rd.m[:, None]
    rmin, rmax = float(ratios.min()), float(ratios.max())
    eps = 1.5 * sup_d
    gnx = rd.xs + rd.m
    m_next = m_n(g, alpha, n, gnx)
    c = math.sqrt(2 * S) * math.exp(V)
    nonlin = c * math.sqrt(rd.M) / rd.m_min if rd.m_min > 0 else math.inf
    chain = float(np.max(np.abs(np.log(m_next / rd.m)))) + nonlin * rd.M
    gate = n >= 1 and sup_log < 0.5
    dev = max(1.0 - rmin, rmax - 1.0)
    ratio = dev / eps if eps > 0 else (0.0 if dev <= 1e-13 else math.inf)
    wi = np.unravel_index(np.argmax(np.abs(ratios - 1.0)), ratios.shape)
    rep = CheckReport(
        "gn", n, dev, eps, ratio,
        {"x": float(rd.xs[wi[0]]), "y": float(ys.reshape(ratios.shape)[wi])},
        extra={
            "sup_log_dgn": sup_log, "sup_dgn_minus_1": sup_d,
            "ratio_min": rmin, "ratio_max": rmax, "M_n": rd.M,
            "chain_bound": chain,
            "C_measured": sup_log / math.sqrt(rd.M) if rd.M > 0 else 0.0,
            "C_chain": chain / math.sqrt(rd.M) if rd.M > 0 else 0.0,
            "gate": bool(gate),
        },
    )
    if not gate:
        rep.status = "skipped(gate)"
        return rep
    if ratio > 1 or sup_log > chain * (1 + 1e-9):
        rep.status = "fail"
        raise EstimateViolation("g_n estimate violated", rep)
    return rep


# -- conjugacy ---------------------------------------------------------------


class DenjoyConjugacy:
    """Monotone sample of ``h^{-1}`` with ``h^{-1}(g^j(x_0)) = j alpha mod 1``."""

    def __init__(self, xs, ys):
        self.xs = xs
        self.ys = ys
        # periodic extension for interpolation
        self._xe = np.concatenate([xs - 1.0, xs, xs + 1.0])
        self._ye = np.concatenate([ys - 1.0, ys, ys + 1.0])

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        f = np.floor(x)
        return np.interp(x - f, self._xe, self._ye) + f

    @property
    def gap(self):
        """Largest spacing of the sample in the range of ``h^{-1}``."""
        if self.ys.size == 1:
            return 1.0
        return float(np.max(np.diff(np.concatenate([self.ys, [self.ys[0] + 1.0]]))))


def denjoy_conjugacy(g, alpha, orbit_length, x0=0.0):
    """Sample ``h^{-1}`` from the orbit of ``x0`` and monotone-interpolate."""
    if orbit_length < 1:
        raise ValueError("orbit_length must be >= 1")
    a = float(alpha.value(20)) if isinstance(alpha, RotationNumber) else float(alpha)
    xs = np.empty(orbit_length)
    cur = float(x0) - math.floor(x0)
    for j in range(orbit_length):
        xs[j] = cur
        cur = float(g(np.array([cur]))[0])
        cur -= math.floor(cur)
    j = np.arange(orbit_length)
    ys = np.mod(j * a, 1.0)
    order = np.argsort(xs, kind="stable")
    xs, ys = xs[order], ys[order]
    # ys must be cyclically increasing: unwrap at the single descent
    drops = np.nonzero(np.diff(ys) < 0)[0]
    if drops.size > 1:
        raise PrecisionError(
            f"assembled conjugacy sample is not monotone ({drops.size} descents)"
        )
    if drops.size == 1:
        ys[drops[0] + 1:] += 1.0
    ys = ys - (ys[0] // 1.0)
    # anchor the lift so that h^{-1}(x0 mod 1) = 0
    return DenjoyConjugacy(xs, ys)


def conjugacy_defect(g, hinv, alpha, xs):
    """``sup |h^{-1} o g - T_alpha o h^{-1}|`` (mod 1) on ``xs``."""
    a = float(alpha.value(20)) if isinstance(alpha, RotationNumber) else float(alpha)
    d = hinv(g(xs)) - (hinv(xs) + a)
    d = d - np.round(d)
    return float(np.max(np.abs(d)))
