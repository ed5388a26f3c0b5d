"""Complex extension of circle lifts to the band ``|Im z| < Delta``.

Orbits are tracked in normalized heights ``y_j`` defined by
``z_j = x_j + i m_n(x_j) y_j`` where ``x_j`` is the real orbit and
``m_n = g^{q_n} - id - p_n``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .circle import CircleLift, TrigLift, renorm_data
from .errors import (
    BandEscapeError,
    BranchError,
    CombinatoricsError,
    DomainError,
    GateError,
    RefinementError,
)

TAU_GATE = 1.0 / 9.0
DEFAULT_DELTA = 0.25
DEFAULT_Y0 = 0.75


def band_nonlinearity(g: CircleLift, delta: float, boundary_samples: int = 1024,
                      max_samples: int = 2**20):
    """``tau = sup |D log Dg|`` on the closed band of half-width ``delta``.

    ``D log Dg`` is holomorphic and 1-periodic, so its modulus peaks on the
    boundary lines.  Samples are doubled until neighbouring values differ by
    less than 10% of the running max; the result is then inflated by
    ``h/2 * max |D^2 log Dg|`` to cover the space between samples.
    """
    if not delta > 0 or not math.isfinite(delta):
        raise DomainError(f"delta must be positive and finite, got {delta!r}")
    if isinstance(g, TrigLift) and g.k.size and g.univalence_margin() >= 1.0 \
            and g.band_halfwidth >= delta:
        raise DomainError("univalence condition fails on the band")
    if g.is_rigid():
        return 0.0
    n = int(boundary_samples)
    while True:
        xs = np.arange(n) / n
        z = np.concatenate([xs + 1j * delta, xs - 1j * delta])
        _, d1, d2, d3 = g.derivatives(z, order=3)
        # Re Dg is harmonic: its min over the band sits on the boundary
        if np.min(d1.real) <= 0:
            i = int(np.argmin(d1.real))
            raise BranchError(f"Re Dg = {d1.real[i]:.3g} <= 0 at z = {z[i]:.6g}")
        nl = np.abs(d2 / d1)
        top = float(nl.max())
        jumps = np.abs(np.diff(np.concatenate([nl[:n], nl[:1]])))
        jumps = np.maximum(jumps, np.abs(np.diff(np.concatenate([nl[n:], nl[n:n + 1]]))))
        if jumps.max() < 0.1 * top or top == 0.0:
            break
        n *= 2
        if n > max_samples:
            raise RefinementError("boundary sampling of D log Dg did not settle", [top])
    # derivative of D log Dg is (D3 D1 - D2^2) / D1^2
    slope = np.abs((d3 * d1 - d2**2) / d1**2)
    return top + 0.5 / n * float(slope.max())


@dataclass
class BandOrbit:
    """Complex orbit of ``z_0 = x_0 + i m_n(x_0) y_0`` in normalized coordinates."""

    n: int
    x0: float
    y0: float
    J: int
    x: np.ndarray          # real orbit (lift values)
    z: np.ndarray          # complex orbit
    y: np.ndarray          # normalized heights
    m: np.ndarray          # m_n(x_j), j = 0..J
    sign: int
    max_deviation: float = 0.0
    within_bound: bool = True
    sum_m: float = 0.0
    extra: dict = field(default_factory=dict)

    @property
    def rel_deviation(self):
        return self.max_deviation / self.y0

    def hyperbolic_deviation(self):
        """Per-``j`` half-plane distance between the orbit and the flow points
        ``x_j + i |m_n(x_j)| y_0`` (after reflecting into the upper half-plane)."""
        y = self.y
        return 2.0 * np.arcsinh(np.abs(y - self.y0) / (2.0 * np.sqrt(y.real * self.y0)))


def _complex_orbit(g, z0, J, delta):
    """Orbit of complex points split as ``(frac, count)``; checks the band."""
    z = np.atleast_1d(np.asarray(z0, dtype=complex))
    frac = np.empty((J + 1,) + z.shape, dtype=complex)
    count = np.empty((J + 1,) + z.shape, dtype=np.int64)
    k = np.floor(z.real)
    cur = z - k
    cnt = k.astype(np.int64)
    frac[0], count[0] = cur, cnt
    for j in range(1, J + 1):
        cur = g(cur)
        if np.any(np.abs(cur.imag) >= delta):
            raise BandEscapeError(f"orbit left the band at j = {j}", index=j)
        k = np.floor(cur.real)
        cur = cur - k
        cnt = cnt + k.astype(np.int64)
        frac[j], count[j] = cur, cnt
    return frac, count


def _real_orbit(g, x0, length):
    x = np.atleast_1d(np.asarray(x0, dtype=float))
    frac = np.empty((length + 1,) + x.shape)
    count = np.empty((length + 1,) + x.shape, dtype=np.int64)
    k = np.floor(x)
    cur = x - k
    cnt = k.astype(np.int64)
    frac[0], count[0] = cur, cnt
    for j in range(1, length + 1):
        cur = g(cur)
        k = np.floor(cur)
        cur = cur - k
        cnt = cnt + k.astype(np.int64)
        frac[j], count[j] = cur, cnt
    return frac, count


def check_gates(g, alpha, n, delta=DEFAULT_DELTA, tau=None, renorm=None):
    """Measured premises ``tau < 1/9`` and ``M_n < delta/2``."""
    if tau is None:
        tau = band_nonlinearity(g, delta)
    if renorm is None:
        renorm = renorm_data(g, alpha, n)
    return {
        "tau": tau, "M_n": renorm.M, "tau_ok": tau < TAU_GATE,
        "M_ok": renorm.M < delta / 2, "gate_ok": tau < TAU_GATE and renorm.M < delta / 2,
    }


def track_dy_orbits(g, alpha, n, x0, y0=DEFAULT_Y0, J=None, delta=DEFAULT_DELTA,
                    gates=None, check_gates_first=True):
    """Vectorized :func:`track_dy_orbit` over arrays of ``x0`` and ``y0``."""
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    y0 = np.broadcast_to(np.asarray(y0, dtype=float), x0.shape).copy()
    if np.any((y0 <= 0) | (y0 > 1)):
        raise DomainError("y0 must lie in (0, 1]")
    p, q = alpha.convergent(n)
    if J is None:
        J = alpha.convergent(n + 1)[1]
    if check_gates_first:
        if gates is None:
            gates = check_gates(g, alpha, n, delta)
        if not gates["gate_ok"]:
            raise GateError(
                f"premises unmet: tau = {gates['tau']:.4g} (need < 1/9), "
                f"M_n = {gates['M_n']:.4g} (need < {delta / 2:g})"
            )
    fr, ct = _real_orbit(g, x0, J + q)
    # m_n(x_j) = x_{j+q} - x_j - p
    m = (fr[q:] - fr[: J + 1]) + (ct[q:] - ct[: J + 1] - p)
    sign = (-1) ** n
    if np.any(np.sign(m) != sign):
        raise DomainError(f"m_{n} changes sign along the orbit")
    z0 = x0 + 1j * m[0] * y0
    zf, zc = _complex_orbit(g, z0, J, delta)
    dz = (zf - fr[: J + 1]) + (zc - ct[: J + 1])
    y = dz / (1j * m)
    out = []
    for i in range(x0.size):
        yi = y[:, i]
        if np.any(yi.real <= 0):
            raise DomainError("Re y_j <= 0: normalization lost")
        dev = float(np.max(np.abs(yi - y0[i])))
        am = np.abs(m[:J, i]) if J > 0 else np.zeros(0)
        out.append(BandOrbit(
            n=n, x0=float(x0[i]), y0=float(y0[i]), J=J,
            x=fr[: J + 1, i] + ct[: J + 1, i], z=zf[:, i] + zc[:, i], y=yi,
            m=m[:, i], sign=sign, max_deviation=dev,
            within_bound=dev <= 0.75 * y0[i], sum_m=float(am.sum()),
            extra={"gates": gates},
        ))
    return out


def track_dy_orbit(g, alpha, n, x0, y0=DEFAULT_Y0, J=None, delta=DEFAULT_DELTA,
                   gates=None, check_gates_first=True):
    """Track ``z_0 = x_0 + i m_n(x_0) y_0`` for ``J`` (default ``q_{n+1}``) steps.

    Raises :class:`GateError` when ``tau < 1/9`` or ``M_n < delta/2`` is not
    met and :class:`BandEscapeError` if the orbit leaves the band.
    """
    return track_dy_orbits(g, alpha, n, [x0], y0, J, delta, gates, check_gates_first)[0]


def sum_interval_lengths(orbit: BandOrbit, alpha=None):
    """``sum_{l < J} |m_n(x_l)|``; the intervals are disjoint mod 1, so it is < 1."""
    if alpha is not None and orbit.J > alpha.convergent(orbit.n + 1)[1]:
        raise DomainError("orbit longer than q_{n+1}")
    s = float(np.sum(np.abs(orbit.m[: max(orbit.J, 1)])))
    if s >= 1.0:
        raise CombinatoricsError(f"sum of |m_n(x_l)| = {s:.6g} >= 1", witness=orbit.x0)
    return s


def dy_sweep(g, alpha, n, samples=50, delta=DEFAULT_DELTA, seed=0, y_range=(0.05, 1.0),
             tau=None, renorm=None):
    """Track ``samples`` random ``(x_0, y_0)``; JSON-able summary plus orbits.

    Gate failures are reported with ``status = "skipped(gate)"``.
    """
    gates = check_gates(g, alpha, n, delta, tau, renorm)
    rep = {"n": n, "delta": delta, **gates, "samples": samples}
    if not gates["gate_ok"]:
        rep.update(status="skipped(gate)", violations=[], max_rel_deviation=None,
                   max_hyperbolic=None)
        return rep, []
    rng = np.random.default_rng(seed)
    x0 = rng.random(samples)
    y0 = rng.uniform(*y_range, samples)
    orbits = track_dy_orbits(g, alpha, n, x0, y0, delta=delta, gates=gates)
    violations = []
    rel = []
    hyp = []
    for o in orbits:
        r = o.rel_deviation
        h = float(np.max(o.hyperbolic_deviation()))
        rel.append(r)
        hyp.append(h)
        if not o.within_bound:
            j = int(np.argmax(np.abs(o.y - o.y0)))
            violations.append({"x0": o.x0, "y0": o.y0, "j": j, "rel": r})
    rep.update(
        J=orbits[0].J if orbits else 0,
        max_rel_deviation=max(rel), max_hyperbolic=max(hyp),
        max_sum_m=max(o.sum_m for o in orbits),
        violations=violations, status="pass" if not violations else "fail",
    )
    return rep, orbits
