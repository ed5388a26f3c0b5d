"""Holonomy of the singular foliation ``alpha y (1+P) dx + x (1+Q) dy = 0``.

The loop ``x(theta) = x0 exp(-2 pi i theta)``, ``theta in [0, 1]``, is lifted
into the leaves.  Along it

    dy/dtheta = 2 pi i alpha y (1 + P(x, y)) / (1 + Q(x, y)),

and for ``P = Q = 0`` the first integral ``y x^alpha`` gives the return map
``y -> e^{2 pi i alpha} y``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .arithmetic import RotationNumber, parse_alpha
from .errors import DomainError, FitError, LeafEscapeError, ModelError, StiffnessError
from .germ import Germ

TWO_PI = 2.0 * math.pi


def _parse_terms(terms):
    """``{(j, k): coeff}`` or an iterable of ``(j, k, coeff)``."""
    if terms is None:
        return {}
    if isinstance(terms, dict):
        items = terms.items()
    else:
        items = (((j, k), c) for j, k, c in terms)
    out = {}
    for (j, k), c in items:
        j, k = int(j), int(k)
        if j < 0 or k < 0 or j + k == 0:
            raise DomainError(f"monomial x^{j} y^{k} must vanish at the origin")
        out[(j, k)] = out.get((j, k), 0) + complex(c)
    return out


def parse_monomials(text):
    """``"P:1,1,0.1;Q:0,2,0.05"`` -> (P terms, Q terms)."""
    P, Q = {}, {}
    for item in filter(None, (t.strip() for t in str(text).split(";"))):
        name, _, rest = item.partition(":")
        j, k, c = (s.strip() for s in rest.split(","))
        target = {"P": P, "Q": Q}[name.strip().upper()]
        target[(int(j), int(k))] = target.get((int(j), int(k)), 0) + complex(c)
    return P, Q


def _poly_eval(terms, x, y):
    acc = 0j
    for (j, k), c in terms.items():
        acc += c * x**j * y**k
    return acc


def _poly_bound(terms, rx, ry):
    return sum(abs(c) * rx**j * ry**k for (j, k), c in terms.items())


@dataclass
class FoliationGerm:
    """Normal form ``alpha y (1 + P) dx + x (1 + Q) dy = 0``."""

    alpha: float
    P: dict = field(default_factory=dict)
    Q: dict = field(default_factory=dict)
    x0_abs: float = 0.05
    y_radius: float = 0.05

    def __post_init__(self):
        self.alpha = float(self.alpha)
        if not self.alpha > 0:
            raise DomainError("alpha must be positive (Siegel-type singularity)")
        self.P = _parse_terms(self.P)
        self.Q = _parse_terms(self.Q)
        bp = _poly_bound(self.P, self.x0_abs, self.y_radius)
        bq = _poly_bound(self.Q, self.x0_abs, self.y_radius)
        if bp >= 0.5 or bq >= 0.5:
            raise DomainError(
                f"|P| <= {bp:.3g}, |Q| <= {bq:.3g} on the tube; both must stay < 1/2")

    @property
    def multiplier(self):
        return cmath.exp(1j * TWO_PI * self.alpha)

    @property
    def is_linear(self):
        return not self.P and not self.Q

    def rhs(self, theta, y):
        x = self.x0_abs * cmath.exp(-1j * TWO_PI * theta)
        return 1j * TWO_PI * self.alpha * y * (1 + _poly_eval(self.P, x, y)) / (
            1 + _poly_eval(self.Q, x, y))

    def with_radius(self, x0_abs):
        return FoliationGerm(self.alpha, dict(self.P), dict(self.Q), x0_abs, self.y_radius)


def holonomy_map(F: FoliationGerm, y_start, tol=1e-12, reverse=False, theta_span=(0.0, 1.0)):
    """Return map on the transversal ``{x = x0}`` (``reverse=True`` runs the loop
    backwards, i.e. applies the inverse holonomy)."""
    y_start = complex(y_start)
    if abs(y_start) > F.y_radius:
        raise DomainError("|y_start| exceeds the leaf domain radius")
    if y_start == 0:
        return 0j
    a, b = theta_span
    span = (b, a) if reverse else (a, b)

    def fun(t, y):
        return np.array([F.rhs(t, y[0])])

    def escape(t, y):
        return F.y_radius - abs(y[0])

    escape.terminal = True
    escape.direction = -1
    sol = solve_ivp(fun, span, np.array([y_start]), method="DOP853", rtol=tol,
                    atol=tol * abs(y_start), events=escape)
    if sol.status == 1:
        raise LeafEscapeError("leaf left |y| <= radius", theta=float(sol.t_events[0][0]))
    if sol.status != 0:
        raise StiffnessError(sol.message)
    return complex(sol.y[0, -1])


def holonomy_multiplier(F: FoliationGerm, tol=1e-12, h=None):
    """``f'(0)`` by Richardson extrapolation of ``H(y)/y`` at ``y = h, h/2, h/4``.

    The extrapolation weights sum to 5 in modulus, so the leaves are
    integrated at ``tol / 100`` (floored at 2.5e-14) to keep the estimate
    inside the ``10 tol`` modulus window.
    """
    if h is None:
        h = F.y_radius / 64.0
    inner = max(tol / 100.0, 2.5e-14)
    r = [holonomy_map(F, h / 2**k, inner) / (h / 2**k) for k in range(3)]
    # remove the O(y) and O(y^2) terms
    r1 = [2 * r[1] - r[0], 2 * r[2] - r[1]]
    est = (4 * r1[1] - r1[0]) / 3
    if abs(abs(est) - 1.0) > 10 * tol + 1e-12:
        raise ModelError(f"|multiplier| = {abs(est):.15g} is not 1 within 10 tol")
    return est


@dataclass
class FitResult:
    germ: Germ
    coeffs: np.ndarray
    residual: float
    alpha_recovered: float


def germ_from_holonomy(F: FoliationGerm, sample_radius=None, degree=6, samples=64,
                       tol=1e-12, max_residual=1e-9):
    """Least-squares polynomial ``sum_{k=1}^{degree} b_k y^k`` through holonomy
    samples on ``|y| = sample_radius``, returned as a :class:`Germ`."""
    if sample_radius is None:
        sample_radius = F.y_radius / 4.0
    ys = sample_radius * np.exp(1j * TWO_PI * np.arange(samples) / samples)
    hs = np.array([holonomy_map(F, y, tol) for y in ys])
    V = np.column_stack([ys**k for k in range(1, degree + 1)])
    b, *_ = np.linalg.lstsq(V, hs, rcond=None)
    residual = float(np.max(np.abs(V @ b - hs)) / np.max(np.abs(hs)))
    if residual > max_residual:
        raise FitError(f"fit residual {residual:.3g} above {max_residual:g}", residual)
    arg = cmath.phase(b[0]) / TWO_PI % 1.0
    alpha = RotationNumber.from_float(repr(arg), radius=max(tol, 1e-15))
    g = Germ(alpha, b[1:], r0=sample_radius, check=False)
    return FitResult(g, b, residual, arg)


def holonomy_report(F: FoliationGerm, tol=1e-12, fit_degree=6, y_test=None):
    """JSON-able summary used by the CLI."""
    mult = holonomy_multiplier(F, tol)
    y_test = F.y_radius / 10.0 if y_test is None else y_test
    there = holonomy_map(F, y_test, tol)
    back = holonomy_map(F, there, tol, reverse=True)
    rep = {
        "alpha": F.alpha, "x0": F.x0_abs,
        "multiplier": [float(mult.real), float(mult.imag)],
        "multiplier_error": abs(mult - F.multiplier),
        "alpha_recovered": cmath.phase(mult) / TWO_PI % 1.0,
        "roundtrip_error": abs(back - y_test),
    }
    try:
        fit = germ_from_holonomy(F, degree=fit_degree, tol=tol)
        rep.update(fit_coeffs=[[float(c.real), float(c.imag)] for c in fit.coeffs], residual=fit.residual)
    except FitError as exc:
        rep.update(fit_coeffs=None, residual=exc.residual)
    return rep
