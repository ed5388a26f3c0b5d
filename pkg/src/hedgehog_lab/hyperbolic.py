"""Poincare distances on the upper half-plane and on the exterior of the unit disk.

The two charts are linked by ``u -> zeta = exp(-2 pi i u)``, which maps the
upper half-plane onto ``C - closed(D)`` as a universal covering with deck group
``u -> u + 1``.  A 1-periodic curve in the half-plane is therefore a closed
curve around the disk, and periodic half-plane computations (minimum over
integer shifts) are exterior-chart computations.

Distances are evaluated as ``2 asinh(|z - w| / (2 sqrt(Im z Im w)))``, which
equals ``arccosh(1 + |z - w|^2 / (2 Im z Im w))`` without the cancellation
near 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from .errors import DeckSearchError, DomainError, RefinementError

CHARTS = ("H", "exterior")
TWO_PI = 2.0 * math.pi


def _as_complex(z):
    return np.asarray(z, dtype=complex)


def _check_chart(z, chart):
    z = _as_complex(z)
    if chart == "H":
        if np.any(~(z.imag > 0)):
            raise DomainError("point not in the open upper half-plane")
    elif chart == "exterior":
        if np.any(~(np.abs(z) > 1)):
            raise DomainError("point not outside the closed unit disk")
    else:
        raise ValueError(f"unknown chart {chart!r}; use one of {CHARTS}")
    return z


def dist_halfplane(z1, z2):
    """Poincare distance in the upper half-plane (metric ``|dz| / Im z``)."""
    z1 = _check_chart(z1, "H")
    z2 = _check_chart(z2, "H")
    r = np.abs(z1 - z2) / (2.0 * np.sqrt(z1.imag * z2.imag))
    d = 2.0 * np.arcsinh(r)
    return float(d) if np.ndim(d) == 0 else d


def halfplane_to_exterior(u):
    """Covering map ``u -> exp(-2 pi i u)`` from H onto ``C - closed(D)``."""
    return np.exp(-1j * TWO_PI * _as_complex(u))


def exterior_to_halfplane(zeta):
    """Principal lift of ``zeta`` (``|zeta| > 1``) to H, ``Re u`` in ``(-1/2, 1/2]``."""
    zeta = _check_chart(zeta, "exterior")
    return 1j * np.log(zeta) / TWO_PI


def band_to_disk(z):
    """``E(z) = exp(2 pi i z)``: the upper band picture onto the punctured disk."""
    return np.exp(1j * TWO_PI * _as_complex(z))


def dist_exterior(z1, z2, k_max=64):
    """Complete hyperbolic distance in ``C - closed(D)``.

    Lifts both points to H and minimizes over deck shifts ``k``; the search
    widens until the minimum is attained strictly inside the window.
    """
    u1 = np.atleast_1d(exterior_to_halfplane(z1))
    u2 = np.atleast_1d(exterior_to_halfplane(z2))
    u1, u2 = np.broadcast_arrays(u1, u2)
    k0 = np.round((u1 - u2).real)
    out = np.empty(u1.shape)
    for idx in np.ndindex(u1.shape):
        for K in range(1, k_max + 1):
            ks = k0[idx] + np.arange(-K, K + 1)
            vals = dist_halfplane(np.full(ks.shape, u1[idx]), u2[idx] + ks)
            i = int(np.argmin(vals))
            if 0 < i < ks.size - 1:
                out[idx] = vals[i]
                break
        else:
            raise DeckSearchError(f"deck minimum not stabilized within |k| <= {k_max}")
    return float(out[0]) if np.ndim(z1) == 0 and np.ndim(z2) == 0 else out


def density(z, chart="H"):
    """Metric density: ``1/Im z`` in H, ``1/(|z| log|z|)`` in the exterior."""
    z = _as_complex(z)
    if chart == "H":
        return 1.0 / z.imag
    if chart == "exterior":
        r = np.abs(z)
        return 1.0 / (r * np.log(r))
    raise ValueError(f"unknown chart {chart!r}")


def curve_length_P(polyline, chart="H", rtol=1e-6, max_sub=2**16):
    """Poincare length of a polyline by midpoint quadrature, refined by doubling."""
    pts = _as_complex(polyline).ravel()
    if pts.size < 2:
        return 0.0
    _check_chart(pts, chart)
    a, b = pts[:-1], pts[1:]
    seg = np.abs(b - a)
    m = 1
    prev = None
    while m <= max_sub:
        t = (np.arange(m) + 0.5) / m
        mids = a[:, None] + np.multiply.outer(b - a, t)
        L = float(np.sum(seg * density(mids, chart).mean(axis=1)))
        if prev is not None and abs(L - prev) <= rtol * abs(L):
            return L
        prev = L
        m *= 2
    raise RefinementError("curve length refinement budget exceeded", [prev, L])


# -- point-to-polyline distances ---------------------------------------------


@numba.njit(cache=True)
def _seg_f(px, py, ax, ay, bx, by):
    """min over the segment [a, b] of |p - w|^2 / (2 Im p Im w)."""
    dx, dy = bx - ax, by - ay
    ex, ey = px - ax, py - ay
    A = ex * ex + ey * ey
    B = ex * dx + ey * dy
    C = dx * dx + dy * dy
    best = 1e300
    cands = np.empty(4)
    nc = 2
    cands[0] = 0.0
    cands[1] = 1.0
    if C > 0.0:
        if dy == 0.0:
            cands[2] = B / C
            nc = 3
        else:
            # stationary points of the quadratic/linear ratio
            qa = C * dy
            qb = 2.0 * C * ay
            qc = -(2.0 * B * ay + A * dy)
            disc = qb * qb - 4.0 * qa * qc
            if disc >= 0.0:
                s = math.sqrt(disc)
                cands[2] = (-qb + s) / (2.0 * qa)
                cands[3] = (-qb - s) / (2.0 * qa)
                nc = 4
    for i in range(nc):
        t = cands[i]
        if t < 0.0 or t > 1.0:
            continue
        wx = ax + t * dx
        wy = ay + t * dy
        rx, ry = px - wx, py - wy
        f = (rx * rx + ry * ry) / (2.0 * py * wy)
        if f < best:
            best = f
    return best


@numba.njit(cache=True)
def _periodic_polyline_f(px, py, qx, qy, period, ymax):
    """For each point, min ``f`` over a polyline sorted in x and extended
    periodically; the window stops once horizontal separation alone forces
    ``f`` above the best value found."""
    N = qx.size
    out = np.empty(px.size)
    arg = np.empty(px.size, dtype=np.int64)
    for i in range(px.size):
        u = px[i]
        v = py[i]
        sh = math.floor((u - qx[0]) / period)
        ur = u - sh * period
        # qx[lo] <= ur < qx[lo+1] in the extended sequence
        lo = np.searchsorted(qx, ur, side="right") - 1
        best = 1e300
        barg = 0
        # segment s joins extended points s and s+1
        for direction in (-1, 1):
            s = lo if direction == -1 else lo + 1
            steps = 0
            while steps <= N:
                k = s // N
                r = s - k * N
                k2 = (s + 1) // N
                r2 = s + 1 - k2 * N
                ax = qx[r] + k * period
                bx = qx[r2] + k2 * period
                f = _seg_f(ur, v, ax, qy[r], bx, qy[r2])
                if f < best:
                    best = f
                    barg = r
                if direction == -1:
                    gap = ur - bx
                else:
                    gap = ax - ur
                if gap > 0.0 and gap * gap >= 2.0 * v * ymax * best:
                    break
                s += direction
                steps += 1
        out[i] = best
        arg[i] = barg
    return out, arg


def _f_to_dist(f):
    return 2.0 * np.arcsinh(np.sqrt(np.maximum(f, 0.0) / 2.0))


def point_to_polyline(points, polyline, period=None):
    """Half-plane distance from each point to a polyline.

    With ``period`` the polyline is one period of a curve sorted by real part
    and is extended by ``z -> z + period``.  Otherwise all segments are scanned.
    """
    P = _check_chart(points, "H").ravel()
    Q = _check_chart(polyline, "H").ravel()
    if period is not None:
        qx = Q.real.copy()
        if np.any(np.diff(qx) <= 0) or qx[-1] - qx[0] >= period:
            raise DomainError("periodic polyline must be strictly increasing within one period")
        f, arg = _periodic_polyline_f(P.real.copy(), P.imag.copy(), qx, Q.imag.copy(),
                                      float(period), float(Q.imag.max()))
        return _f_to_dist(f), arg
    if Q.size == 1:
        return dist_halfplane(P, np.full(P.shape, Q[0])), np.zeros(P.size, dtype=np.int64)
    f = np.empty(P.size)
    arg = np.empty(P.size, dtype=np.int64)
    for i in range(P.size):
        vals = np.array([_seg_f(P[i].real, P[i].imag, Q[s].real, Q[s].imag,
                                Q[s + 1].real, Q[s + 1].imag) for s in range(Q.size - 1)])
        arg[i] = int(np.argmin(vals))
        f[i] = vals[arg[i]]
    return _f_to_dist(f), arg


def sample_gap(curve, period=None, chart="H"):
    """Largest metric distance between consecutive samples (the wrap included
    for periodic curves)."""
    z = _as_complex(curve).ravel()
    if z.size < 2:
        return 0.0
    if chart == "exterior":
        z = exterior_to_halfplane(z)
        nxt = np.concatenate([z[1:], z[:1]])
        return float(np.max(dist_exterior(halfplane_to_exterior(z), halfplane_to_exterior(nxt))))
    if period is not None:
        z = np.concatenate([z, z[:1] + period])
    return float(np.max(dist_halfplane(z[:-1], z[1:])))


@dataclass
class HausdorffResult:
    value: float         # raw + correction: an upper bound
    raw: float           # sampled directed sup-inf maximum
    correction: float
    forward: float       # sup over A of dist to B
    backward: float
    witness: complex


def _unwrap_sorted(z, period):
    """Reduce a periodic sample to one period and sort by real part."""
    x = z.real - np.floor((z.real - z.real.min()) / period) * period
    w = x + 1j * z.imag
    order = np.argsort(x, kind="stable")
    w = w[order]
    keep = np.concatenate([[True], np.diff(w.real) > 0])
    return w[keep]


def hausdorff_report(A, B, chart="H", period=None):
    """Hausdorff distance between sampled curves with a sampling correction.

    ``raw`` uses point-to-polyline distances in both directions.  The
    correction is the larger of the two curves' max metric sample gaps, so
    ``value`` bounds the distance between the underlying continua.
    """
    A = _as_complex(A).ravel()
    B = _as_complex(B).ravel()
    if chart == "exterior":
        A = exterior_to_halfplane(A)
        B = exterior_to_halfplane(B)
        period = 1.0
    if period is not None:
        Aw = _unwrap_sorted(A, period)
        Bw = _unwrap_sorted(B, period)
        fwd, _ = point_to_polyline(A, Bw, period)
        bwd, _ = point_to_polyline(B, Aw, period)
        corr = max(sample_gap(Aw, period), sample_gap(Bw, period))
    else:
        fwd, _ = point_to_polyline(A, B)
        bwd, _ = point_to_polyline(B, A)
        corr = max(sample_gap(A), sample_gap(B))
    f, b = float(fwd.max()), float(bwd.max())
    wit = A[int(np.argmax(fwd))] if f >= b else B[int(np.argmax(bwd))]
    raw = max(f, b)
    return HausdorffResult(raw + corr, raw, corr, f, b, complex(wit))


def hausdorff_dist_P(A, B, chart="H", period=None):
    """Upper bound for the Poincare Hausdorff distance between two sampled curves."""
    return hausdorff_report(A, B, chart, period).value
