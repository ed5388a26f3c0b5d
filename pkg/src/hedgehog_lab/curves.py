"""Flow-line curves ``x -> x + i |m_{n-1}(x)| y_0`` and their quasi-invariance.

The curve ``gamma_n`` is built from ``m_{n-1}``; it is a 1-periodic graph in
the upper half-plane, i.e. a closed curve around the unit disk in the
exterior chart.  All Hausdorff values are half-plane distances minimized over
integer shifts (the exterior-chart distance) and carry a sampling correction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .band import DEFAULT_DELTA, DEFAULT_Y0, band_nonlinearity, TAU_GATE
from .circle import displacement, renorm_data
from .errors import BandEscapeError, DomainError, GateError, RotationMismatchError
from .hyperbolic import (
    _f_to_dist,
    curve_length_P,
    dist_halfplane,
    hausdorff_report,
)

C0 = 3.0
SLACK = 0.05
MIN_RESOLUTION = 8


def grade(value, threshold, slack=SLACK):
    """``pass`` below the threshold, ``warn`` within the slack, else ``fail``."""
    if value <= threshold:
        return "pass"
    if value <= threshold * (1.0 + slack):
        return "warn"
    return "fail"


def worst(statuses):
    order = ["pass", "skipped(gate)", "warn", "fail"]
    return max(statuses, key=order.index) if statuses else "pass"


@dataclass
class QICurve:
    """Sampled flow line over one period."""

    n: int
    y0: float
    xs: np.ndarray
    z: np.ndarray
    m: np.ndarray            # m_{n-1}(xs), signed
    provenance: dict = field(default_factory=dict)

    @property
    def resolution(self):
        return self.xs.size

    @property
    def heights(self):
        return self.z.imag

    def to_rows(self):
        return [(float(x), float(w.real), float(w.imag)) for x, w in zip(self.xs, self.z)]


def _level_m(g, alpha, k, xs):
    p, q = alpha.convergent(k)
    m = displacement(g, xs, q, p)
    sgn = (-1) ** k
    if np.any(np.sign(m) != sgn):
        bad = int(np.argmax(np.sign(m) != sgn))
        raise RotationMismatchError(f"m_{k} changes sign near x = {xs[bad]:.6g}")
    return m


def build_curve(g, alpha, n, y0=DEFAULT_Y0, resolution=None, gap_target=0.1):
    """Sample ``gamma_n``: the graph of ``x -> x + i |m_{n-1}(x)| y_0``.

    The default resolution makes neighbouring samples at most about
    ``gap_target`` apart in the Poincare metric.
    """
    if n < 1:
        raise DomainError("curve level n must be >= 1 (it uses m_{n-1})")
    if not 0.5 < y0 <= 1.0:
        raise DomainError("y0 must lie in (1/2, 1]")
    if resolution is not None and resolution < MIN_RESOLUTION:
        raise DomainError(f"resolution {resolution} below the minimum {MIN_RESOLUTION}")
    p, q = alpha.convergent(n - 1)
    if resolution is None:
        probe = np.arange(max(2 * q, 256)) / max(2 * q, 256)
        hmin = float(np.min(np.abs(_level_m(g, alpha, n - 1, probe)))) * y0
        resolution = max(256, 1 << math.ceil(math.log2(1.0 / (gap_target * hmin))))
    xs = np.arange(resolution) / resolution
    m = _level_m(g, alpha, n - 1, xs)
    z = xs + 1j * np.abs(m) * y0
    prov = {"map": repr(g), "level_m": n - 1, "p": p, "q": q,
            "M": float(np.max(np.abs(m))), "m_min": float(np.min(np.abs(m)))}
    return QICurve(n, float(y0), xs, z, m, prov)


def _iterate_log_derivative(g, x, q):
    cur = np.array(x, dtype=float)
    count = np.zeros_like(cur)
    logd = np.zeros_like(cur)
    for _ in range(q):
        val, der = g.derivatives(cur, order=1)
        logd += np.log(der)
        k = np.floor(val)
        cur, count = val - k, count + k
    return cur, count, np.exp(logd)


def piece_diameter(g, alpha, n, x, y0=DEFAULT_Y0, samples=257):
    """Poincare length of the piece of ``x -> x + i |m_n| y_0`` over ``I_n(x)``.

    Returns a dict with the length, the bound ``2 (1+eps0)/(1-eps0)`` and the
    measured ``eps0``.
    """
    p, q = alpha.convergent(n)
    m0 = float(displacement(g, np.array([x]), q, p)[0])
    ts = x + m0 * np.linspace(0.0, 1.0, samples)
    fr, ct, dgn = _iterate_log_derivative(g, ts, q)
    x0 = np.floor(ts)
    m = (fr - (ts - x0)) + (ct - x0 - p)
    if np.any(np.sign(m) != np.sign(m0)):
        raise RotationMismatchError(f"m_{n} changes sign on I_n({x})")
    am = np.abs(m)
    path = ts + 1j * am * y0
    order = np.argsort(ts)
    length = curve_length_P(path[order], "H")
    eps0 = max(y0 * float(np.max(np.abs(dgn - 1.0))), 1.0 - float(am.min()) / abs(m0))
    bound = 2.0 * (1.0 + eps0) / (1.0 - eps0) if eps0 < 1 else math.inf
    return {
        "check": "piece", "n": n, "x": float(x), "y0": y0, "length": length,
        "bound": bound, "eps0": eps0, "status": "pass" if length <= bound else "fail",
    }


def _curve_gates(g, alpha, curve, delta, tau):
    if tau is None:
        tau = band_nonlinearity(g, delta)
    M = renorm_data(g, alpha, curve.n - 1).M
    ok = tau < TAU_GATE and M < delta / 2
    return {"tau": tau, "M_prev": M, "gate_ok": ok}


def _step_complex(g, z, delta, j):
    w = g(z)
    if np.any(np.abs(w.imag) >= delta):
        raise BandEscapeError(f"curve image left the band at j = {j}", index=j)
    if np.any(w.imag <= 0):
        raise BandEscapeError(f"curve image reached the real axis at j = {j}", index=j)
    return w - np.floor(w.real)


@dataclass
class CurveReport:
    check: str
    n: int
    value: float
    threshold: float
    status: str
    per_j: list = field(default_factory=list)
    witness: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        d = {"check": self.check, "n": self.n, "value": self.value,
             "threshold": self.threshold, "status": self.status,
             "witness": self.witness}
        d.update(self.extra)
        if self.per_j:
            d["per_j"] = self.per_j
        return d


def verify_quasi_invariance(g, alpha, curve: QICurve, j_max=None, delta=DEFAULT_DELTA,
                            threshold=2 * C0, tau=None, enforce_gates=True):
    """``D_P(g^j(gamma_n), gamma_n)`` for ``0 <= j <= j_max`` (default ``q_n``)."""
    gates = _curve_gates(g, alpha, curve, delta, tau)
    if enforce_gates and not gates["gate_ok"]:
        return CurveReport("invariance", curve.n, math.nan, threshold, "skipped(gate)",
                           extra=gates)
    if j_max is None:
        j_max = alpha.convergent(curve.n)[1]
    per_j = []
    cur = curve.z.copy()
    worst_j, worst_val, worst_raw = 0, -1.0, 0.0
    for j in range(j_max + 1):
        if j > 0:
            cur = _step_complex(g, cur, delta, j)
        rep = hausdorff_report(cur, curve.z, period=1.0)
        per_j.append({"j": j, "value": rep.value, "raw": rep.raw, "correction": rep.correction})
        if rep.value > worst_val:
            worst_j, worst_val, worst_raw = j, rep.value, rep.raw
    max_raw = max(r["raw"] for r in per_j)
    return CurveReport(
        "invariance", curve.n, worst_val, threshold, grade(worst_val, threshold), per_j,
        witness={"j": worst_j, "raw": worst_raw},
        extra={**gates, "max_raw": max_raw, "j_max": j_max},
    )


def return_displacement(g, curve: QICurve, q, p):
    """``sup_z d_P(g^q(z) - p, z)`` over the curve samples."""
    cur = curve.z.copy()
    count = np.zeros(cur.shape)
    for _ in range(q):
        cur = g(cur)
        k = np.floor(cur.real)
        cur, count = cur - k, count + k
    shifted = cur + (count - p)
    d = dist_halfplane(shifted, curve.z)
    i = int(np.argmax(d))
    return float(d[i]), float(curve.xs[i])


def verify_return_displacement(g, alpha, curve: QICurve, threshold=C0):
    """Return displacement on ``gamma_n``.

    ``value`` uses ``g^{q_{n-1}}``, the return matching the curve's own level
    (a horizontal shift by ``m_{n-1}`` for rotations, giving
    ``arccosh(1 + 1/(2 y_0^2))``).  The ``g^{q_n}`` return is reported as
    ``value_qn``; both are graded.
    """
    p1, q1 = alpha.convergent(curve.n - 1)
    p2, q2 = alpha.convergent(curve.n)
    v1, x1 = return_displacement(g, curve, q1, p1)
    v2, x2 = return_displacement(g, curve, q2, p2)
    status = worst([grade(v1, threshold), grade(v2, threshold)])
    rigid = math.acosh(1.0 + 1.0 / (2.0 * curve.y0**2))
    return CurveReport(
        "return", curve.n, v1, threshold, status, witness={"x": x1, "x_qn": x2},
        extra={"value_qn": v2, "rigid_value": rigid},
    )


@numba.njit(cache=True)
def _periodic_points_f(px, py, qx, qy, period, ymax):
    """min over the 1-periodic point set ``q + k`` of ``|p - w|^2/(2 Im p Im w)``."""
    N = qx.size
    out = np.empty(px.size)
    arg = np.empty(px.size, dtype=np.int64)
    for i in range(px.size):
        u = px[i]
        v = py[i]
        sh = math.floor((u - qx[0]) / period)
        ur = u - sh * period
        lo = np.searchsorted(qx, ur, side="right") - 1
        best = 1e300
        barg = 0
        for direction in (-1, 1):
            s = lo if direction == -1 else lo + 1
            steps = 0
            while steps <= N:
                k = s // N
                r = s - k * N
                wx = qx[r] + k * period
                dx = ur - wx
                dy = v - qy[r]
                f = (dx * dx + dy * dy) / (2.0 * v * qy[r])
                if f < best:
                    best = f
                    barg = r
                if dx * dx >= 2.0 * v * ymax * best:
                    break
                s += direction
                steps += 1
        out[i] = best
        arg[i] = barg
    return out, arg


def distance_to_orbit(points, orbit):
    """Half-plane distance from points to the set ``orbit + Z``."""
    o = np.asarray(orbit, dtype=complex)
    o = o - np.floor(o.real)
    o = o[np.argsort(o.real, kind="stable")]
    P = np.asarray(points, dtype=complex)
    f, arg = _periodic_points_f(P.real.copy(), P.imag.copy(), o.real.copy(),
                                o.imag.copy(), 1.0, float(o.imag.max()))
    return _f_to_dist(f), arg


def osculating_cover_check(g, alpha, n, x0=0.0, y0=DEFAULT_Y0, ball_radius=C0,
                           curve=None, delta=DEFAULT_DELTA, visit_seeds=64, seed=0):
    """Cover of ``gamma_n`` by Poincare balls around ``g^j(z_0) + k``, ``j < q_n``.

    ``z_0 = x_0 + i |m_{n-1}(x_0)| y_0`` lies on the curve.  The separation
    height is ``H = 2 max Im gamma_n``; the ball union separates the line from
    ``{Im z > H}`` when it covers the curve and consecutive balls overlap.
    A sampled visit check tracks seeds within ``log 2`` of the curve.
    """
    if curve is None:
        curve = build_curve(g, alpha, n, y0)
    p, q = alpha.convergent(n - 1)
    _, qn = alpha.convergent(n)
    m0 = float(_level_m(g, alpha, n - 1, np.array([x0 - math.floor(x0)]))[0])
    z0 = complex(x0, abs(m0) * y0)
    orbit = np.empty(qn, dtype=complex)
    cur = np.array([z0 - math.floor(x0)])
    for j in range(qn):
        orbit[j] = cur[0]
        if j + 1 < qn:
            cur = _step_complex(g, cur, delta, j + 1)
    d, _ = distance_to_orbit(curve.z, orbit)
    covered = d <= ball_radius
    frac = float(np.mean(covered))
    i = int(np.argmax(d))
    # consecutive balls (sorted mod 1, with the wrap) must overlap
    o = orbit - np.floor(orbit.real)
    o = o[np.argsort(o.real, kind="stable")]
    nxt = np.concatenate([o[1:], o[:1] + 1.0])
    links = dist_halfplane(o, nxt) if o.size > 1 else np.array([0.0])
    chain = bool(np.all(links < 2.0 * ball_radius))
    if o.size == 1:
        # one ball per period: it must reach its own translate
        chain = dist_halfplane(o[0], o[0] + 1.0) < 2.0 * ball_radius
    gaps = np.diff(np.concatenate([o.real, o.real[:1] + 1.0]))
    distinct = np.unique(np.round(gaps / gaps.max(), 9)) if gaps.size else np.array([])
    H = 2.0 * float(curve.heights.max())
    # visit check: seeds within log 2 of the curve
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, curve.resolution, visit_seeds)
    s = np.exp(rng.uniform(-math.log(2.0), math.log(2.0), visit_seeds))
    w = curve.xs[idx] + 1j * curve.heights[idx] * s
    visited = np.zeros(visit_seeds, dtype=bool)
    cur = w.copy()
    for j in range(qn + 1):
        dv, _ = distance_to_orbit(cur, orbit)
        visited |= dv <= ball_radius
        if visited.all() or j == qn:
            break
        cur = g(cur)
        cur = cur - np.floor(cur.real)
    status = "pass" if frac == 1.0 else "fail"
    return CurveReport(
        "cover", n, float(d.max()), ball_radius, status,
        witness={"x": float(curve.xs[i]), "distance": float(d[i])},
        extra={
            "coverage": frac, "q_n": qn, "z0": [z0.real, z0.imag], "H": H,
            "chain_connected": chain, "separates": bool(frac == 1.0 and chain),
            "max_link": float(links.max()), "gap_ratios": distinct.tolist()[:8],
            "max_gap": float(gaps.max()) if gaps.size else 0.0,
            "visit_fraction": float(visited.mean()),
        },
    )
